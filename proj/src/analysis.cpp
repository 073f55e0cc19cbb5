#include "enrest/analysis.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <vector>

#include "enrest/error.hpp"

namespace enrest {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  check_same_shape(a, b, "psnr");
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = a.at(i) - b.at(i);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double mae(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mae");
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) acc += std::abs(a.at(i) - b.at(i));
  return acc / static_cast<double>(a.numel());
}

namespace {

void gauss11(double g[11]) {
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
    sum += g[i];
  }
  for (int i = 0; i < 11; ++i) g[i] /= sum;
}

// valid-mode separable 11-tap blur: horizontal then vertical
std::vector<double> blur_valid(const std::vector<double>& src, std::int64_t h, std::int64_t w,
                               const double g[11]) {
  const std::int64_t wv = w - 10;
  const std::int64_t hv = h - 10;
  std::vector<double> tmp(static_cast<std::size_t>(h * wv));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int j = 0; j < 11; ++j) acc += g[j] * src[static_cast<std::size_t>(y * w + x + j)];
      tmp[static_cast<std::size_t>(y * wv + x)] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(hv * wv));
  for (std::int64_t y = 0; y < hv; ++y)
    for (std::int64_t x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 11; ++i) acc += g[i] * tmp[static_cast<std::size_t>((y + i) * wv + x)];
      out[static_cast<std::size_t>(y * wv + x)] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  if (a.rank() != 4 || (a.dim(1) != 1 && a.dim(1) != 3) || a.dim(2) < 11 || a.dim(3) < 11)
    throw ShapeError("ssim: needs [N,{1|3},H,W] with H,W >= 11, got " + shape_str(a.shape()));
  const std::int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[11];
  gauss11(g);

  double batch_acc = 0.0;
  for (std::int64_t ni = 0; ni < n; ++ni) {
    const std::size_t plane = static_cast<std::size_t>(h * w);
    std::vector<double> ya(plane), yb(plane), paa(plane), pbb(plane), pab(plane);
    for (std::int64_t hi = 0; hi < h; ++hi)
      for (std::int64_t wi = 0; wi < w; ++wi) {
        const std::size_t i = static_cast<std::size_t>(hi * w + wi);
        double va, vb;
        if (c == 1) {
          va = a.at(a.offset(ni, 0, hi, wi));
          vb = b.at(b.offset(ni, 0, hi, wi));
        } else {
          va = 0.299 * a.at(a.offset(ni, 0, hi, wi)) + 0.587 * a.at(a.offset(ni, 1, hi, wi)) +
               0.114 * a.at(a.offset(ni, 2, hi, wi));
          vb = 0.299 * b.at(b.offset(ni, 0, hi, wi)) + 0.587 * b.at(b.offset(ni, 1, hi, wi)) +
               0.114 * b.at(b.offset(ni, 2, hi, wi));
        }
        ya[i] = va;
        yb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
      }
    const std::vector<double> mu_a = blur_valid(ya, h, w, g);
    const std::vector<double> mu_b = blur_valid(yb, h, w, g);
    const std::vector<double> e_aa = blur_valid(paa, h, w, g);
    const std::vector<double> e_bb = blur_valid(pbb, h, w, g);
    const std::vector<double> e_ab = blur_valid(pab, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double sa = e_aa[i] - mu_a[i] * mu_a[i];
      const double sb = e_bb[i] - mu_b[i] * mu_b[i];
      const double sab = e_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * sab + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (sa + sb + c2));
    }
    batch_acc += acc / static_cast<double>(mu_a.size());
  }
  return batch_acc / static_cast<double>(n);
}

namespace {

// Mirrors the forward pass shape-for-shape. Stride is 1 and padding k/2
// everywhere, so convolutions preserve spatial extents.
struct CostWalker {
  const ParamStore& ps;
  CostReport r;
  std::set<int> seen;

  explicit CostWalker(const ParamStore& s) : ps(s) {}

  void param(int idx) {
    if (idx >= 0 && seen.insert(idx).second) r.params += ps.tensor(idx).numel();
  }

  // one produced element costing `flops_per` non-mac flops
  void elem(std::int64_t count, std::int64_t flops_per = 1) {
    r.other_flops += count * flops_per;
    r.activations += count;
  }

  void conv_raw(int widx, int bidx, std::int64_t h, std::int64_t w) {
    const Tensor& wt = ps.tensor(widx);
    const std::int64_t out = wt.dim(0) * h * w;
    r.macs += out * wt.dim(1) * wt.dim(2) * wt.dim(3);
    r.activations += out;
    r.conv_count += 1;
    param(widx);
    if (bidx >= 0) {
      r.other_flops += out;
      param(bidx);
    }
  }

  void conv(const ConvSpec& cs, std::int64_t h, std::int64_t w) { conv_raw(cs.w, cs.b, h, w); }

  void skff(const SkffSpec& s, std::int64_t h, std::int64_t w) {
    const std::int64_t c = s.channels, n = s.n_inputs;
    elem((n - 1) * c * h * w);                 // stream sum
    elem(c, h * w + 1);                        // pooled statistics: adds and one divide per channel
    conv_raw(s.down_w, -1, 1, 1);
    for (int i = 0; i < n; ++i) conv_raw(s.up_w[static_cast<std::size_t>(i)], -1, 1, 1);
    r.activations += n * c;                    // stacked logits
    elem(n * c, 4);                            // stream softmax
    elem(n * c * h * w);                       // attention-weighted streams
    elem((n - 1) * c * h * w);                 // their sum
  }

  void fusion(const FusionSpec& f, int n_inputs, std::int64_t c, std::int64_t h, std::int64_t w) {
    switch (f.mode) {
      case FusionMode::Skff:
        skff(f.skff, h, w);
        break;
      case FusionMode::Sum:
        elem((n_inputs - 1) * c * h * w);
        break;
      case FusionMode::Concat:
        r.activations += n_inputs * c * h * w;
        conv(f.concat_proj, h, w);
        break;
    }
  }

  void rcb(const RcbSpec& s, std::int64_t h, std::int64_t w) {
    const std::int64_t c = s.channels;
    conv(s.g1, h, w);
    elem(c * h * w);  // relu
    conv(s.g2, h, w);
    conv(s.mask, h, w);
    elem(h * w, 4);   // spatial softmax
    r.macs += c * h * w;  // attention pooling
    r.activations += c;
    conv(s.t1, 1, 1);
    elem(c / 4);      // relu
    conv(s.t2, 1, 1);
    elem(c * h * w);  // descriptor broadcast add
    conv(s.last, h, w);
    elem(c * h * w);  // skip
  }

  void down(const ResampleSpec& s, std::int64_t cin, std::int64_t h, std::int64_t w) {
    elem(cin * (h / 2) * (w / 2), 4);  // 2x2 mean
    conv_raw(s.proj, -1, h / 2, w / 2);
  }

  void up(const ResampleSpec& s, std::int64_t h, std::int64_t w) {
    conv_raw(s.proj, -1, h, w);  // project at source resolution
    const std::int64_t cout = ps.tensor(s.proj).dim(0);
    elem(cout * 2 * h * 2 * w, 9);  // bilinear interpolation
  }

  void mrb(const MrbSpec& s, std::int64_t h, std::int64_t w) {
    const int n = static_cast<int>(s.channels.size());
    for (int k = 1; k < n; ++k)
      down(s.entry_down[static_cast<std::size_t>(k - 1)], s.channels[static_cast<std::size_t>(k - 1)],
           h >> (k - 1), w >> (k - 1));
    for (const MrbColumn& col : s.cols) {
      for (int k = 0; k < n; ++k) rcb(col.rcbs[static_cast<std::size_t>(k)], h >> k, w >> k);
      for (int k = n - 2; k >= 0; --k) {
        up(col.casc_up[static_cast<std::size_t>(k)], h >> (k + 1), w >> (k + 1));
        fusion(col.casc_fuse[static_cast<std::size_t>(k)], 2, s.channels[static_cast<std::size_t>(k)],
               h >> k, w >> k);
      }
    }
    if (n > 1) {
      for (int k = 1; k < n; ++k) {
        int lvl = k;
        for (const ResampleSpec& rs : s.final_up[static_cast<std::size_t>(k)]) {
          up(rs, h >> lvl, w >> lvl);
          --lvl;
        }
      }
      fusion(s.final_fuse, n, s.channels[0], h, w);
    }
    elem(s.channels[0] * h * w);  // block skip
  }

  void rrg(const RrgSpec& s, std::int64_t c0, std::int64_t h, std::int64_t w) {
    for (const MrbSpec& mb : s.mrbs) mrb(mb, h, w);
    conv(s.tail, h, w);
    elem(c0 * h * w);  // group skip
  }
};

}  // namespace

CostReport count_costs(const Model& m, std::int64_t height, std::int64_t width) {
  const int mult = m.cfg.required_multiple();
  if (height < 1 || width < 1 || height % mult != 0 || width % mult != 0)
    throw ShapeError("count_costs: extents must be positive multiples of " + std::to_string(mult));
  CostWalker cw(m.ps);
  cw.r.height = height;
  cw.r.width = width;
  cw.conv(m.head, height, width);
  for (const RrgSpec& rrg : m.rrgs) cw.rrg(rrg, m.cfg.channels[0], height, width);
  cw.conv(m.tail, height, width);
  if (m.cfg.in_channels != m.cfg.out_channels)
    cw.elem(m.cfg.out_channels * height * width, 2);  // view average
  cw.elem(m.cfg.out_channels * height * width);       // residual add
  return cw.r;
}

void print_cost_report(std::ostream& os, const CostReport& r) {
  os << "input " << r.height << "x" << r.width << "\n"
     << "params " << r.params << "\n"
     << "conv_applications " << r.conv_count << "\n"
     << "macs " << r.macs << "\n"
     << "other_flops " << r.other_flops << "\n"
     << "total_flops " << r.flops() << "\n"
     << "activations " << r.activations << "\n";
}

}  // namespace enrest
