#include "enrest/reference.hpp"

#include <cmath>
#include <vector>

#include "enrest/error.hpp"

namespace enrest::ref {

namespace {

// NCHW read/write helpers on top of the dtype-agnostic accessors
double rd(const Tensor& t, std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
  return t.at(t.offset(n, c, h, w));
}

void wr(Tensor& t, std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, double v) {
  t.set(t.offset(n, c, h, w), v);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, int groups) {
  const std::int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const std::int64_t co = w.dim(0), k = w.dim(2);
  const std::int64_t cig = ci / groups, cog = co / groups;
  const std::int64_t ho = (h + 2 * pad - k) / stride + 1;
  const std::int64_t wo = (ww + 2 * pad - k) / stride + 1;
  Tensor y = Tensor::zeros({n, co, ho, wo}, x.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t c = 0; c < co; ++c)
      for (std::int64_t oh = 0; oh < ho; ++oh)
        for (std::int64_t ow = 0; ow < wo; ++ow) {
          double acc = b.defined() ? b.at(c) : 0.0;
          for (std::int64_t ig = 0; ig < cig; ++ig) {
            const std::int64_t cc = (c / cog) * cig + ig;
            for (std::int64_t kh = 0; kh < k; ++kh)
              for (std::int64_t kw = 0; kw < k; ++kw) {
                const std::int64_t ih = oh * stride + kh - pad;
                const std::int64_t iw = ow * stride + kw - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= ww) continue;
                acc += w.at(((c * cig + ig) * k + kh) * k + kw) * rd(x, ni, cc, ih, iw);
              }
          }
          wr(y, ni, c, oh, ow, acc);
        }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  for (std::int64_t i = 0; i < x.numel(); ++i) y.set(i, std::max(x.at(i), 0.0));
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y = Tensor::zeros({n, c, 1, 1}, x.dtype());
  for (std::int64_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < hw; ++j) acc += x.at(i * hw + j);
    y.set(i, acc / static_cast<double>(hw));
  }
  return y;
}

Tensor avg_pool2x2(const Tensor& x) {
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y = Tensor::zeros({n, c, h / 2, w / 2}, x.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t oh = 0; oh < h / 2; ++oh)
        for (std::int64_t ow = 0; ow < w / 2; ++ow) {
          const double s = rd(x, ni, ci, 2 * oh, 2 * ow) + rd(x, ni, ci, 2 * oh, 2 * ow + 1) +
                           rd(x, ni, ci, 2 * oh + 1, 2 * ow) + rd(x, ni, ci, 2 * oh + 1, 2 * ow + 1);
          wr(y, ni, ci, oh, ow, s / 4.0);
        }
  return y;
}

Tensor bilinear_up2x(const Tensor& x) {
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y = Tensor::zeros({n, c, 2 * h, 2 * w}, x.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t oy = 0; oy < 2 * h; ++oy)
        for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
          double sy = (static_cast<double>(oy) + 0.5) / 2.0 - 0.5;
          double sx = (static_cast<double>(ox) + 0.5) / 2.0 - 0.5;
          if (sy < 0) sy = 0;
          if (sx < 0) sx = 0;
          const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
          const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
          const std::int64_t y1 = std::min(y0 + 1, h - 1);
          const std::int64_t x1 = std::min(x0 + 1, w - 1);
          const double fy = sy - static_cast<double>(y0);
          const double fx = sx - static_cast<double>(x0);
          const double v = rd(x, ni, ci, y0, x0) * (1 - fy) * (1 - fx) +
                           rd(x, ni, ci, y0, x1) * (1 - fy) * fx +
                           rd(x, ni, ci, y1, x0) * fy * (1 - fx) +
                           rd(x, ni, ci, y1, x1) * fy * fx;
          wr(y, ni, ci, oy, ox, v);
        }
  return y;
}

Tensor downsample2x(const Tensor& x, const Tensor& proj) {
  return conv2d(ref::avg_pool2x2(x), proj, Tensor(), 1, 0, 1);
}

Tensor upsample2x(const Tensor& x, const Tensor& proj) {
  return conv2d(ref::bilinear_up2x(x), proj, Tensor(), 1, 0, 1);
}

Tensor skff_forward(const ParamStore& ps, const SkffSpec& spec,
                    const std::vector<Tensor>& inputs) {
  const Tensor& first = inputs.at(0);
  const std::int64_t n = first.dim(0), c = first.dim(1), h = first.dim(2), w = first.dim(3);
  const std::int64_t r = spec.reduction;
  const Tensor& dw = ps.tensor(spec.down_w);

  Tensor out = Tensor::zeros(first.shape(), first.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni) {
    // channel statistics of the stream sum
    std::vector<double> stat(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi) {
          double s = 0.0;
          for (const Tensor& in : inputs) s += rd(in, ni, ci, hi, wi);
          acc += s;
        }
      stat[static_cast<std::size_t>(ci)] = acc / static_cast<double>(h * w);
    }
    std::vector<double> z(static_cast<std::size_t>(r), 0.0);
    for (std::int64_t ri = 0; ri < r; ++ri) {
      double acc = 0.0;
      for (std::int64_t ci = 0; ci < c; ++ci)
        acc += dw.at(ri * c + ci) * stat[static_cast<std::size_t>(ci)];
      z[static_cast<std::size_t>(ri)] = acc;
    }
    for (std::int64_t ci = 0; ci < c; ++ci) {
      // per-channel logits across streams, then a softmax over the streams
      std::vector<double> logit(inputs.size(), 0.0);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& uw = ps.tensor(spec.up_w[i]);
        double acc = 0.0;
        for (std::int64_t ri = 0; ri < r; ++ri)
          acc += uw.at(ci * r + ri) * z[static_cast<std::size_t>(ri)];
        logit[i] = acc;
      }
      double mx = logit[0];
      for (double v : logit) mx = std::max(mx, v);
      double denom = 0.0;
      for (double& v : logit) {
        v = std::exp(v - mx);
        denom += v;
      }
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi) {
          double acc = 0.0;
          for (std::size_t i = 0; i < inputs.size(); ++i)
            acc += (logit[i] / denom) * rd(inputs[i], ni, ci, hi, wi);
          wr(out, ni, ci, hi, wi, acc);
        }
    }
  }
  return out;
}

Tensor fusion_forward(const ParamStore& ps, const FusionSpec& spec,
                      const std::vector<Tensor>& inputs) {
  if (spec.mode == FusionMode::Skff) return ref::skff_forward(ps, spec.skff, inputs);
  if (spec.mode == FusionMode::Sum) {
    Tensor out = inputs.at(0).clone();
    for (std::size_t i = 1; i < inputs.size(); ++i)
      for (std::int64_t e = 0; e < out.numel(); ++e) out.set(e, out.at(e) + inputs[i].at(e));
    return out;
  }
  // concat then 1x1 projection
  const Tensor& first = inputs.at(0);
  const std::int64_t n = first.dim(0), c = first.dim(1), h = first.dim(2), w = first.dim(3);
  Tensor cat = Tensor::zeros({n, c * static_cast<std::int64_t>(inputs.size()), h, w}, first.dtype());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t hi = 0; hi < h; ++hi)
          for (std::int64_t wi = 0; wi < w; ++wi)
            wr(cat, ni, static_cast<std::int64_t>(i) * c + ci, hi, wi,
               rd(inputs[i], ni, ci, hi, wi));
  return conv2d(cat, ps.tensor(spec.concat_proj.w), Tensor(), 1, 0, 1);
}

Tensor rcb_forward(const ParamStore& ps, const RcbSpec& spec, const Tensor& x) {
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor fb = conv2d(ref::relu(conv2d(x, ps.tensor(spec.g1.w), Tensor(), 1, 1, spec.g1.groups)),
                     ps.tensor(spec.g2.w), Tensor(), 1, 1, spec.g2.groups);
  Tensor mask = conv2d(fb, ps.tensor(spec.mask.w), Tensor(), 1, 0, 1);  // [N,1,H,W]

  Tensor fe = Tensor::zeros({n, c, 1, 1}, x.dtype());
  const std::int64_t cq = c / 4;
  const Tensor& t1 = ps.tensor(spec.t1.w);
  const Tensor& t2 = ps.tensor(spec.t2.w);
  for (std::int64_t ni = 0; ni < n; ++ni) {
    // softmax over all positions of the mask plane
    double mx = rd(mask, ni, 0, 0, 0);
    for (std::int64_t hi = 0; hi < h; ++hi)
      for (std::int64_t wi = 0; wi < w; ++wi) mx = std::max(mx, rd(mask, ni, 0, hi, wi));
    double denom = 0.0;
    for (std::int64_t hi = 0; hi < h; ++hi)
      for (std::int64_t wi = 0; wi < w; ++wi) denom += std::exp(rd(mask, ni, 0, hi, wi) - mx);
    std::vector<double> fd(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi)
          acc += rd(fb, ni, ci, hi, wi) * (std::exp(rd(mask, ni, 0, hi, wi) - mx) / denom);
      fd[static_cast<std::size_t>(ci)] = acc;
    }
    std::vector<double> mid(static_cast<std::size_t>(cq), 0.0);
    for (std::int64_t q = 0; q < cq; ++q) {
      double acc = 0.0;
      for (std::int64_t ci = 0; ci < c; ++ci)
        acc += t1.at(q * c + ci) * fd[static_cast<std::size_t>(ci)];
      mid[static_cast<std::size_t>(q)] = std::max(acc, 0.0);
    }
    for (std::int64_t ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (std::int64_t q = 0; q < cq; ++q)
        acc += t2.at(ci * cq + q) * mid[static_cast<std::size_t>(q)];
      wr(fe, ni, ci, 0, 0, acc);
    }
  }

  Tensor cm = Tensor::zeros(fb.shape(), fb.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi)
          wr(cm, ni, ci, hi, wi, rd(fb, ni, ci, hi, wi) + rd(fe, ni, ci, 0, 0));

  Tensor mixed = conv2d(cm, ps.tensor(spec.last.w), Tensor(), 1, 0, 1);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  for (std::int64_t e = 0; e < out.numel(); ++e) out.set(e, x.at(e) + mixed.at(e));
  return out;
}

Tensor mrb_forward(const ParamStore& ps, const MrbSpec& spec, const Tensor& x) {
  const int n = static_cast<int>(spec.channels.size());
  std::vector<Tensor> s(static_cast<std::size_t>(n));
  s[0] = x;
  for (int k = 1; k < n; ++k)
    s[static_cast<std::size_t>(k)] =
        ref::downsample2x(s[static_cast<std::size_t>(k - 1)],
                     ps.tensor(spec.entry_down[static_cast<std::size_t>(k - 1)].proj));
  for (const MrbColumn& col : spec.cols) {
    for (int k = 0; k < n; ++k)
      s[static_cast<std::size_t>(k)] =
          ref::rcb_forward(ps, col.rcbs[static_cast<std::size_t>(k)], s[static_cast<std::size_t>(k)]);
    for (int k = n - 2; k >= 0; --k) {
      Tensor lifted = ref::upsample2x(s[static_cast<std::size_t>(k + 1)],
                                 ps.tensor(col.casc_up[static_cast<std::size_t>(k)].proj));
      s[static_cast<std::size_t>(k)] = ref::fusion_forward(
          ps, col.casc_fuse[static_cast<std::size_t>(k)], {s[static_cast<std::size_t>(k)], lifted});
    }
  }
  Tensor fused;
  if (n == 1) {
    fused = s[0];
  } else {
    std::vector<Tensor> feats;
    for (int k = 0; k < n; ++k) {
      Tensor f = s[static_cast<std::size_t>(k)];
      for (const ResampleSpec& rs : spec.final_up[static_cast<std::size_t>(k)])
        f = ref::upsample2x(f, ps.tensor(rs.proj));
      feats.push_back(f);
    }
    fused = ref::fusion_forward(ps, spec.final_fuse, feats);
  }
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  for (std::int64_t e = 0; e < out.numel(); ++e) out.set(e, fused.at(e) + x.at(e));
  return out;
}

Tensor rrg_forward(const ParamStore& ps, const RrgSpec& spec, const Tensor& x) {
  Tensor y = x;
  for (const MrbSpec& mrb : spec.mrbs) y = ref::mrb_forward(ps, mrb, y);
  y = conv2d(y, ps.tensor(spec.tail.w), ps.tensor(spec.tail.b), 1, 1, 1);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  for (std::int64_t e = 0; e < out.numel(); ++e) out.set(e, y.at(e) + x.at(e));
  return out;
}

Tensor model_forward(const Model& m, const Tensor& x) {
  Tensor y = conv2d(x, m.ps.tensor(m.head.w), m.ps.tensor(m.head.b), 1, 1, 1);
  for (const RrgSpec& rrg : m.rrgs) y = ref::rrg_forward(m.ps, rrg, y);
  Tensor res = conv2d(y, m.ps.tensor(m.tail.w), m.ps.tensor(m.tail.b), 1, 1, 1);
  const std::int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::int64_t co = m.cfg.out_channels;
  Tensor out = Tensor::zeros({n, co, h, w}, x.dtype());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < co; ++ci)
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi) {
          double base = m.cfg.in_channels == co
                            ? rd(x, ni, ci, hi, wi)
                            : 0.5 * (rd(x, ni, ci, hi, wi) + rd(x, ni, ci + co, hi, wi));
          wr(out, ni, ci, hi, wi, base + rd(res, ni, ci, hi, wi));
        }
  return out;
}

namespace {

// 11-tap Gaussian, sigma 1.5, normalized
void gauss11(double g[11]) {
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
    sum += g[i];
  }
  for (int i = 0; i < 11; ++i) g[i] /= sum;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  if (a.rank() != 4 || (a.dim(1) != 1 && a.dim(1) != 3) || a.dim(2) < 11 || a.dim(3) < 11)
    throw ShapeError("ssim: needs [N,{1|3},H,W] with H,W >= 11, got " + shape_str(a.shape()));
  const std::int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // K1, K2 squared at unit dynamic range
  double g[11];
  gauss11(g);

  double batch_acc = 0.0;
  for (std::int64_t ni = 0; ni < n; ++ni) {
    // luma planes
    std::vector<double> ya(static_cast<std::size_t>(h * w)), yb(static_cast<std::size_t>(h * w));
    for (std::int64_t hi = 0; hi < h; ++hi)
      for (std::int64_t wi = 0; wi < w; ++wi) {
        const std::size_t idx = static_cast<std::size_t>(hi * w + wi);
        if (c == 1) {
          ya[idx] = rd(a, ni, 0, hi, wi);
          yb[idx] = rd(b, ni, 0, hi, wi);
        } else {
          ya[idx] = 0.299 * rd(a, ni, 0, hi, wi) + 0.587 * rd(a, ni, 1, hi, wi) +
                    0.114 * rd(a, ni, 2, hi, wi);
          yb[idx] = 0.299 * rd(b, ni, 0, hi, wi) + 0.587 * rd(b, ni, 1, hi, wi) +
                    0.114 * rd(b, ni, 2, hi, wi);
        }
      }
    double acc = 0.0;
    std::int64_t cnt = 0;
    for (std::int64_t cy = 0; cy + 11 <= h; ++cy)
      for (std::int64_t cx = 0; cx + 11 <= w; ++cx) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double wgt = g[i] * g[j];
            const double va = ya[static_cast<std::size_t>((cy + i) * w + (cx + j))];
            const double vb = yb[static_cast<std::size_t>((cy + i) * w + (cx + j))];
            mu_a += wgt * va;
            mu_b += wgt * vb;
            aa += wgt * va * va;
            bb += wgt * vb * vb;
            ab += wgt * va * vb;
          }
        const double sa = aa - mu_a * mu_a;
        const double sb = bb - mu_b * mu_b;
        const double sab = ab - mu_a * mu_b;
        acc += ((2 * mu_a * mu_b + c1) * (2 * sab + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (sa + sb + c2));
        ++cnt;
      }
    batch_acc += acc / static_cast<double>(cnt);
  }
  return batch_acc / static_cast<double>(n);
}

}  // namespace enrest::ref
