// Dataset plumbing: noise, patch sampling, flips, synthetic degradations and
// directory loading. Everything that draws randomness takes the caller's Rng
// so runs stay reproducible from a single seed.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "enrest/data.hpp"
#include "enrest/error.hpp"

namespace enrest {

namespace {

// symmetric reflection with edge repeat: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
std::int64_t sym(std::int64_t i, std::int64_t n) {
  const std::int64_t p = 2 * n;
  i = ((i % p) + p) % p;
  return i < n ? i : p - 1 - i;
}

void check_image(const Tensor& img, const char* who) {
  if (img.rank() != 4) throw ShapeError(std::string(who) + ": expected rank-4 image tensor");
}

double rd(const Tensor& t, std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
  return t.at(t.offset(n, c, y, x));
}

void wr(Tensor& t, std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x, double v) {
  t.set(t.offset(n, c, y, x), v);
}

// separable horizontal blur with reflect boundary; used for the photosite views
Tensor hblur(const Tensor& img, const double* k, int taps, int center) {
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  Tensor out = Tensor::zeros(img.shape(), img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int t = 0; t < taps; ++t) acc += k[t] * rd(img, ni, ci, y, sym(x + t - center, w));
          wr(out, ni, ci, y, x, acc);
        }
  return out;
}

// box average by an integer factor; trailing rows/cols beyond the last full
// cell are folded in by reflection so any extent works
Tensor box_down(const Tensor& img, int f) {
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::int64_t oh = (h + f - 1) / f, ow = (w + f - 1) / f;
  Tensor out = Tensor::zeros({n, c, oh, ow}, img.dtype());
  const double inv = 1.0 / (f * f);
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx)
              acc += rd(img, ni, ci, sym(y * f + dy, h), sym(x * f + dx, w));
          wr(out, ni, ci, y, x, acc * inv);
        }
  return out;
}

// plain bilinear 2x upscale (align_corners=false sampling), loops only
Tensor bilin_up2(const Tensor& img) {
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::int64_t oh = h * 2, ow = w * 2;
  Tensor out = Tensor::zeros({n, c, oh, ow}, img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) / 2.0 - 0.5;
        if (sy < 0.0) sy = 0.0;
        const std::int64_t y0 = std::min<std::int64_t>(static_cast<std::int64_t>(sy), h - 1);
        const std::int64_t y1 = std::min<std::int64_t>(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double sx = (ox + 0.5) / 2.0 - 0.5;
          if (sx < 0.0) sx = 0.0;
          const std::int64_t x0 = std::min<std::int64_t>(static_cast<std::int64_t>(sx), w - 1);
          const std::int64_t x1 = std::min<std::int64_t>(x0 + 1, w - 1);
          const double fx = sx - static_cast<double>(x0);
          const double top = rd(img, ni, ci, y0, x0) * (1 - fx) + rd(img, ni, ci, y0, x1) * fx;
          const double bot = rd(img, ni, ci, y1, x0) * (1 - fx) + rd(img, ni, ci, y1, x1) * fx;
          wr(out, ni, ci, oy, ox, top * (1 - fy) + bot * fy);
        }
      }
  return out;
}

}  // namespace

Tensor add_gaussian_noise(const Tensor& img, double sigma255, Rng& rng) {
  check_image(img, "add_gaussian_noise");
  const double sigma = sigma255 / 255.0;
  Tensor out = Tensor::zeros(img.shape(), img.dtype());
  const std::int64_t n = img.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    double v = img.at(i) + sigma * rng.normal();
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    out.set(i, v);
  }
  return out;
}

PatchRect draw_patch_rect(std::int64_t h, std::int64_t w, std::int64_t size, Rng& rng) {
  if (size < 1) throw ShapeError("draw_patch_rect: size must be positive");
  PatchRect r;
  r.size = size;
  r.y = h > size ? rng.index(h - size + 1) : 0;
  r.x = w > size ? rng.index(w - size + 1) : 0;
  return r;
}

Tensor crop_patch(const Tensor& img, const PatchRect& r) {
  check_image(img, "crop_patch");
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  Tensor out = Tensor::zeros({n, c, r.size, r.size}, img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < r.size; ++y)
        for (std::int64_t x = 0; x < r.size; ++x)
          wr(out, ni, ci, y, x, rd(img, ni, ci, sym(r.y + y, h), sym(r.x + x, w)));
  return out;
}

Tensor flip_h(const Tensor& img) {
  check_image(img, "flip_h");
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  Tensor out = Tensor::zeros(img.shape(), img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) wr(out, ni, ci, y, x, rd(img, ni, ci, y, w - 1 - x));
  return out;
}

Tensor flip_v(const Tensor& img) {
  check_image(img, "flip_v");
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  Tensor out = Tensor::zeros(img.shape(), img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) wr(out, ni, ci, y, x, rd(img, ni, ci, h - 1 - y, x));
  return out;
}

Tensor dual_pixel_concat(const Tensor& left, const Tensor& right) {
  check_image(left, "dual_pixel_concat");
  if (left.shape() != right.shape() || left.dtype() != right.dtype())
    throw ShapeError("dual_pixel_concat: views must match in shape and dtype");
  const std::int64_t n = left.dim(0), c = left.dim(1), h = left.dim(2), w = left.dim(3);
  Tensor out = Tensor::zeros({n, 2 * c, h, w}, left.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          wr(out, ni, ci, y, x, rd(left, ni, ci, y, x));
          wr(out, ni, c + ci, y, x, rd(right, ni, ci, y, x));
        }
  return out;
}

Tensor pad_to_multiple(const Tensor& img, int multiple) {
  check_image(img, "pad_to_multiple");
  if (multiple < 1) throw ShapeError("pad_to_multiple: multiple must be positive");
  const std::int64_t n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::int64_t m = multiple;
  const std::int64_t ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  if (ph == h && pw == w) return img;
  Tensor out = Tensor::zeros({n, c, ph, pw}, img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < ph; ++y)
        for (std::int64_t x = 0; x < pw; ++x)
          wr(out, ni, ci, y, x, rd(img, ni, ci, sym(y, h), sym(x, w)));
  return out;
}

Tensor crop_to(const Tensor& img, std::int64_t h, std::int64_t w) {
  check_image(img, "crop_to");
  if (h > img.dim(2) || w > img.dim(3)) throw ShapeError("crop_to: window exceeds image");
  const std::int64_t n = img.dim(0), c = img.dim(1);
  Tensor out = Tensor::zeros({n, c, h, w}, img.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) wr(out, ni, ci, y, x, rd(img, ni, ci, y, x));
  return out;
}

const char* task_name(Task t) {
  switch (t) {
    case Task::Denoise: return "denoise";
    case Task::DeblurDp: return "deblur_dp";
    case Task::Sr: return "sr";
    case Task::Enhance: return "enhance";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "denoise") return Task::Denoise;
  if (s == "deblur_dp") return Task::DeblurDp;
  if (s == "sr") return Task::Sr;
  if (s == "enhance") return Task::Enhance;
  throw ConfigError("unknown task '" + s + "' (denoise, deblur_dp, sr, enhance)");
}

Tensor synth_degrade(const Tensor& clean, const SynthSpec& spec, Rng& rng) {
  check_image(clean, "synth_degrade");
  switch (spec.task) {
    case Task::Denoise:
      return add_gaussian_noise(clean, spec.noise_sigma, rng);
    case Task::DeblurDp: {
      // asymmetric horizontal kernels approximate the left/right photosite
      // point spread of a defocused dual-pixel sensor
      static const double kl[5] = {0.4, 0.3, 0.2, 0.1, 0.0};
      static const double kr[5] = {0.0, 0.1, 0.2, 0.3, 0.4};
      const Tensor left = add_gaussian_noise(hblur(clean, kl, 5, 2), 2.0, rng);
      const Tensor right = add_gaussian_noise(hblur(clean, kr, 5, 2), 2.0, rng);
      return dual_pixel_concat(left, right);
    }
    case Task::Sr: {
      if (spec.sr_factor != 2 && spec.sr_factor != 4)
        throw ConfigError("sr_factor must be 2 or 4");
      // decimate, then bilinear back to size: same-extent pair with lost detail
      Tensor low = box_down(clean, spec.sr_factor);
      Tensor up = bilin_up2(low);
      if (spec.sr_factor == 4) up = bilin_up2(up);
      return crop_to(up, clean.dim(2), clean.dim(3));
    }
    case Task::Enhance: {
      // underexposure: gamma curve plus gain drop, with mild sensor noise
      Tensor dark = Tensor::zeros(clean.shape(), clean.dtype());
      const std::int64_t n = clean.numel();
      for (std::int64_t i = 0; i < n; ++i)
        dark.set(i, std::pow(clean.at(i), 2.2) * 0.4);
      return add_gaussian_noise(dark, 5.0, rng);
    }
  }
  throw ConfigError("synth_degrade: bad task");
}

Dataset load_dataset(const DatasetSpec& spec, Rng& rng) {
  namespace fs = std::filesystem;
  auto list_images = [](const std::string& dir) {
    if (!fs::is_directory(dir)) throw IOError(dir + ": not a directory");
    std::map<std::string, std::string> stems;  // stem -> path, sorted by stem
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string ext = e.path().extension().string();
      if (ext != ".png" && ext != ".ppm") continue;
      stems[e.path().stem().string()] = e.path().string();
    }
    if (stems.empty()) throw IOError(dir + ": no .png or .ppm files");
    return stems;
  };

  Dataset ds;
  const auto targets = list_images(spec.target_dir);
  if (spec.input_dir.empty()) {
    for (const auto& [stem, path] : targets) {
      ImagePair p;
      p.stem = stem;
      p.target = load_image(path, spec.dt);
      p.input = synth_degrade(p.target, spec.synth, rng);
      ds.pairs.push_back(std::move(p));
    }
  } else {
    const auto inputs = list_images(spec.input_dir);
    for (const auto& [stem, path] : targets) {
      const auto it = inputs.find(stem);
      if (it == inputs.end()) throw IOError(spec.input_dir + ": no input image for stem '" + stem + "'");
      ImagePair p;
      p.stem = stem;
      p.target = load_image(path, spec.dt);
      p.input = load_image(it->second, spec.dt);
      if (p.input.dim(2) != p.target.dim(2) || p.input.dim(3) != p.target.dim(3))
        throw IOError("size mismatch for stem '" + stem + "'");
      ds.pairs.push_back(std::move(p));
    }
  }
  return ds;
}

Tensor synth_clean_image(std::int64_t h, std::int64_t w, std::uint64_t seed, DType dt) {
  Rng rng(seed);
  Tensor img = Tensor::zeros({1, 3, h, w}, dt);
  // shaded background: per-channel sinusoid field
  double fy[3], fx[3], ph[3], base[3];
  for (int c = 0; c < 3; ++c) {
    fy[c] = rng.uniform(1.0, 4.0);
    fx[c] = rng.uniform(1.0, 4.0);
    ph[c] = rng.uniform(0.0, 6.283185307179586);
    base[c] = rng.uniform(0.35, 0.65);
  }
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const double v = base[c] +
                         0.22 * std::sin(fy[c] * 6.283185307179586 * y / static_cast<double>(h) + ph[c]) *
                             std::cos(fx[c] * 6.283185307179586 * x / static_cast<double>(w));
        wr(img, 0, c, y, x, v);
      }
  // foreground shapes: solid rectangles and disks give sharp edges for the
  // restoration tasks to recover
  const int shapes = 6;
  for (int s = 0; s < shapes; ++s) {
    const bool disk = rng.uniform(0.0, 1.0) < 0.5;
    const std::int64_t cy = rng.index(h);
    const std::int64_t cx = rng.index(w);
    const std::int64_t r = 2 + rng.index(std::max<std::int64_t>(2, std::min(h, w) / 5));
    double col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform(0.08, 0.92);
    const std::int64_t y0 = std::max<std::int64_t>(0, cy - r), y1 = std::min(h - 1, cy + r);
    const std::int64_t x0 = std::max<std::int64_t>(0, cx - r), x1 = std::min(w - 1, cx + r);
    for (std::int64_t y = y0; y <= y1; ++y)
      for (std::int64_t x = x0; x <= x1; ++x) {
        if (disk && (y - cy) * (y - cy) + (x - cx) * (x - cx) > r * r) continue;
        for (int c = 0; c < 3; ++c) wr(img, 0, c, y, x, col[c]);
      }
  }
  return img;
}

}  // namespace enrest
