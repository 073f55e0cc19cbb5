// PNG and binary PPM codecs. PNG is read chunk by chunk with zlib doing the
// inflate/deflate and CRC work; 8-bit gray, RGB and RGBA only, no interlacing.
#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "enrest/data.hpp"
#include "enrest/error.hpp"

namespace enrest {

namespace {

using Bytes = std::vector<unsigned char>;

Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path);
  f.seekg(0, std::ios::end);
  const std::streamoff len = f.tellg();
  f.seekg(0);
  Bytes b(static_cast<std::size_t>(len));
  if (len > 0) f.read(reinterpret_cast<char*>(b.data()), len);
  if (!f) throw IOError("read failed: " + path);
  return b;
}

void write_file(const std::string& path, const Bytes& b) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  f.flush();
  if (!f) throw IOError("write failed: " + path);
}

constexpr unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void push_be32(Bytes& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

void push_chunk(Bytes& out, const char type[4], const Bytes& data) {
  push_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(4 + data.size()));
  push_be32(out, static_cast<std::uint32_t>(crc));
}

unsigned char paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
  if (pb <= pc) return static_cast<unsigned char>(b);
  return static_cast<unsigned char>(c);
}

unsigned char to_byte(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
}

void check_image(const Tensor& img, const char* who) {
  if (img.rank() != 4 || img.dim(0) != 1 || (img.dim(1) != 1 && img.dim(1) != 3))
    throw ShapeError(std::string(who) + ": expected [1,{1|3},H,W], got " + shape_str(img.shape()));
}

}  // namespace

Tensor decode_png(const Bytes& bytes, DType dt) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw IOError("not a png stream");
  std::size_t pos = 8;
  bool have_ihdr = false;
  std::uint32_t w = 0, h = 0;
  int channels = 0;
  Bytes idat;
  bool done = false;
  while (!done) {
    if (pos + 8 > bytes.size()) throw IOError("png: truncated chunk header");
    const std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw IOError("png: truncated chunk");
    const unsigned char* type = &bytes[pos + 4];
    const unsigned char* data = &bytes[pos + 8];
    const uLong crc = crc32(0L, type, static_cast<uInt>(4 + len));
    if (static_cast<std::uint32_t>(crc) != be32(&bytes[pos + 8 + len]))
      throw IOError("png: chunk crc mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IOError("png: bad IHDR");
      w = be32(data);
      h = be32(data + 4);
      const int depth = data[8], color = data[9], interlace = data[12];
      if (w == 0 || h == 0) throw IOError("png: zero dimensions");
      if (depth != 8) throw IOError("png: only 8-bit depth supported");
      if (interlace != 0) throw IOError("png: interlaced images not supported");
      if (color == 0)
        channels = 1;
      else if (color == 2)
        channels = 3;
      else if (color == 6)
        channels = 4;
      else
        throw IOError("png: unsupported color type " + std::to_string(color));
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!have_ihdr) throw IOError("png: IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      done = true;
    }
    // ancillary chunks are skipped
    pos += 12 + len;
  }
  if (!have_ihdr || idat.empty()) throw IOError("png: missing image data");

  const std::size_t stride = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
  const std::size_t raw_len = (stride + 1) * h;
  Bytes raw(raw_len);
  uLongf got = static_cast<uLongf>(raw_len);
  const int zr = uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size()));
  if (zr != Z_OK || got != raw_len) throw IOError("png: inflate failed");

  // undo per-scanline filters in place (prev row already reconstructed)
  const int bpp = channels;
  for (std::uint32_t y = 0; y < h; ++y) {
    unsigned char* row = raw.data() + y * (stride + 1);
    const unsigned char filter = row[0];
    unsigned char* cur = row + 1;
    const unsigned char* up = y ? raw.data() + (y - 1) * (stride + 1) + 1 : nullptr;
    switch (filter) {
      case 0:
        break;
      case 1:
        for (std::size_t i = static_cast<std::size_t>(bpp); i < stride; ++i)
          cur[i] = static_cast<unsigned char>(cur[i] + cur[i - static_cast<std::size_t>(bpp)]);
        break;
      case 2:
        if (up)
          for (std::size_t i = 0; i < stride; ++i) cur[i] = static_cast<unsigned char>(cur[i] + up[i]);
        break;
      case 3:
        for (std::size_t i = 0; i < stride; ++i) {
          const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - static_cast<std::size_t>(bpp)] : 0;
          const int above = up ? up[i] : 0;
          cur[i] = static_cast<unsigned char>(cur[i] + (left + above) / 2);
        }
        break;
      case 4:
        for (std::size_t i = 0; i < stride; ++i) {
          const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - static_cast<std::size_t>(bpp)] : 0;
          const int above = up ? up[i] : 0;
          const int ul = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - static_cast<std::size_t>(bpp)] : 0;
          cur[i] = static_cast<unsigned char>(cur[i] + paeth(left, above, ul));
        }
        break;
      default:
        throw IOError("png: bad filter type " + std::to_string(filter));
    }
  }

  const int out_c = channels == 4 ? 3 : channels;  // alpha is dropped
  Tensor img = Tensor::zeros({1, out_c, static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)},
                             dt);
  for (std::uint32_t y = 0; y < h; ++y) {
    const unsigned char* cur = raw.data() + y * (stride + 1) + 1;
    for (std::uint32_t x = 0; x < w; ++x)
      for (int ch = 0; ch < out_c; ++ch)
        img.set(img.offset(0, ch, y, x),
                static_cast<double>(cur[x * static_cast<std::uint32_t>(channels) +
                                        static_cast<std::uint32_t>(ch)]) /
                    255.0);
  }
  return img;
}

std::vector<unsigned char> encode_png(const Tensor& img) {
  check_image(img, "encode_png");
  const std::int64_t c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::size_t stride = static_cast<std::size_t>(w * c);
  Bytes raw((stride + 1) * static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) {
    unsigned char* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    row[0] = 0;  // no filtering
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch)
        row[1 + static_cast<std::size_t>(x * c + ch)] = to_byte(img.at(img.offset(0, ch, y, x)));
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  Bytes packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IOError("png: deflate failed");
  packed.resize(bound);

  Bytes out(kPngSig, kPngSig + 8);
  Bytes ihdr;
  push_be32(ihdr, static_cast<std::uint32_t>(w));
  push_be32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(c == 1 ? 0 : 2);                     // gray or rgb
  ihdr.push_back(0);                                  // compression
  ihdr.push_back(0);                                  // filter method
  ihdr.push_back(0);                                  // no interlace
  push_chunk(out, "IHDR", ihdr);
  push_chunk(out, "IDAT", packed);
  push_chunk(out, "IEND", Bytes());
  return out;
}

Tensor decode_ppm(const Bytes& bytes, DType dt) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
      t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw IOError("not a binary ppm stream");
  const std::string ws = token(), hs = token(), ms = token();
  std::int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(ws);
    h = std::stoll(hs);
    maxval = std::stoll(ms);
  } catch (const std::exception&) {
    throw IOError("ppm: malformed header");
  }
  if (w < 1 || h < 1) throw IOError("ppm: bad dimensions");
  if (maxval != 255) throw IOError("ppm: only maxval 255 supported");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(w * h * 3);
  if (bytes.size() < pos + need) throw IOError("ppm: truncated pixel data");
  Tensor img = Tensor::zeros({1, 3, h, w}, dt);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < 3; ++ch)
        img.set(img.offset(0, ch, y, x),
                static_cast<double>(bytes[pos + static_cast<std::size_t>((y * w + x) * 3 + ch)]) /
                    255.0);
  return img;
}

std::vector<unsigned char> encode_ppm(const Tensor& img) {
  check_image(img, "encode_ppm");
  if (img.dim(1) != 3) throw ShapeError("encode_ppm: 3-channel images only");
  const std::int64_t h = img.dim(2), w = img.dim(3);
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(w * h * 3));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < 3; ++ch)
        out.push_back(to_byte(img.at(img.offset(0, ch, y, x))));
  return out;
}

Tensor load_image(const std::string& path, DType dt) {
  const Bytes b = read_file(path);
  if (b.size() >= 8 && std::memcmp(b.data(), kPngSig, 8) == 0) return decode_png(b, dt);
  if (b.size() >= 2 && b[0] == 'P' && b[1] == '6') return decode_ppm(b, dt);
  throw IOError(path + ": unsupported image format (png or binary ppm expected)");
}

void save_image(const std::string& path, const Tensor& img) {
  auto ends_with = [&](const char* suf) {
    const std::size_t n = std::strlen(suf);
    return path.size() >= n && path.compare(path.size() - n, n, suf) == 0;
  };
  if (ends_with(".png"))
    write_file(path, encode_png(img));
  else if (ends_with(".ppm"))
    write_file(path, encode_ppm(img));
  else
    throw IOError(path + ": unknown image extension (use .png or .ppm)");
}

}  // namespace enrest
