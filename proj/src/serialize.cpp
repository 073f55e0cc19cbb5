#include "enrest/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "enrest/error.hpp"

// Payloads are written as raw in-memory IEEE values, which is only a valid
// little-endian file on a little-endian host.
static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; raw payload writes need an LE host");

namespace enrest::io {

namespace {
constexpr char kTensorMagic[4] = {'E', 'R', 'T', 'F'};
constexpr std::uint8_t kTensorVersion = 1;
}  // namespace

void write_bytes(std::ostream& s, const void* p, std::size_t n) {
  s.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!s) throw IOError("write failed");
}

void write_u8(std::ostream& s, std::uint8_t v) { write_bytes(s, &v, 1); }

void write_u16(std::ostream& s, std::uint16_t v) {
  const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
  write_bytes(s, b, 2);
}

void write_u32(std::ostream& s, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  write_bytes(s, b, 4);
}

void write_u64(std::ostream& s, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  write_bytes(s, b, 8);
}

void write_f64(std::ostream& s, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  write_u64(s, u);
}

void read_bytes(std::istream& s, void* p, std::size_t n) {
  s.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(s.gcount()) != n) throw IOError("unexpected end of stream");
}

std::uint8_t read_u8(std::istream& s) {
  std::uint8_t v;
  read_bytes(s, &v, 1);
  return v;
}

std::uint16_t read_u16(std::istream& s) {
  std::uint8_t b[2];
  read_bytes(s, b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& s) {
  std::uint8_t b[4];
  read_bytes(s, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& s) {
  std::uint8_t b[8];
  read_bytes(s, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& s) {
  const std::uint64_t u = read_u64(s);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

void save_tensor(std::ostream& s, const Tensor& t) {
  if (!t.defined()) throw IOError("save_tensor: undefined tensor");
  write_bytes(s, kTensorMagic, 4);
  write_u8(s, kTensorVersion);
  write_u8(s, static_cast<std::uint8_t>(t.dtype()));
  write_u8(s, static_cast<std::uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_u32(s, static_cast<std::uint32_t>(t.dim(i)));
  const std::size_t bytes = static_cast<std::size_t>(t.numel()) * dtype_size(t.dtype());
  if (t.dtype() == DType::F32)
    write_bytes(s, t.f32(), bytes);
  else
    write_bytes(s, t.f64(), bytes);
}

Tensor load_tensor(std::istream& s) {
  char magic[4];
  read_bytes(s, magic, 4);
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw IOError("load_tensor: bad magic");
  const std::uint8_t ver = read_u8(s);
  if (ver != kTensorVersion)
    throw IOError("load_tensor: unsupported version " + std::to_string(ver));
  const std::uint8_t dt_tag = read_u8(s);
  if (dt_tag > 1) throw IOError("load_tensor: bad dtype tag " + std::to_string(dt_tag));
  const DType dt = static_cast<DType>(dt_tag);
  const std::uint8_t rank = read_u8(s);
  if (rank > 8) throw IOError("load_tensor: bad rank " + std::to_string(rank));
  Shape shape(rank);
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::uint32_t e = read_u32(s);
    if (e == 0) throw IOError("load_tensor: zero extent");
    shape[i] = static_cast<std::int64_t>(e);
  }
  Tensor t = Tensor::zeros(shape, dt);
  const std::size_t bytes = static_cast<std::size_t>(t.numel()) * dtype_size(dt);
  if (dt == DType::F32)
    read_bytes(s, t.f32(), bytes);
  else
    read_bytes(s, t.f64(), bytes);
  return t;
}

void save_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path + " for writing");
  save_tensor(f, t);
  f.flush();
  if (!f) throw IOError("write failed: " + path);
}

Tensor load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path);
  return load_tensor(f);
}

}  // namespace enrest::io
