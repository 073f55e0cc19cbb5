#include "enrest/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "enrest/error.hpp"
#include "enrest/ops.hpp"
#include "kern.hpp"

namespace enrest {

namespace {

struct ConvGeom {
  std::int64_t n, ci, h, w;    // input
  std::int64_t co, k, ho, wo;  // filters / output
  std::int64_t s, p, g;
  std::int64_t cig() const { return ci / g; }
  std::int64_t cog() const { return co / g; }
};

ConvGeom conv_geom(const Tensor& x, const ConvParams& p) {
  if (x.rank() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (p.weight.rank() != 4)
    throw ShapeError("conv2d: weight must be [Cout,Cin/g,k,k], got " + shape_str(p.weight.shape()));
  check_same_dtype(x, p.weight, "conv2d");
  ConvGeom gm;
  gm.n = x.dim(0);
  gm.ci = x.dim(1);
  gm.h = x.dim(2);
  gm.w = x.dim(3);
  gm.co = p.weight.dim(0);
  gm.k = p.weight.dim(2);
  gm.s = p.stride;
  gm.p = p.pad;
  gm.g = p.groups;
  if (p.weight.dim(3) != gm.k || (gm.k != 1 && gm.k != 3))
    throw ShapeError("conv2d: kernel must be square with size 1 or 3, got " +
                     shape_str(p.weight.shape()));
  if (gm.s < 1 || gm.p < 0 || gm.g < 1) throw ShapeError("conv2d: bad stride/pad/groups");
  if (gm.ci % gm.g != 0 || gm.co % gm.g != 0)
    throw ShapeError("conv2d: channels " + std::to_string(gm.ci) + "->" + std::to_string(gm.co) +
                     " not divisible by groups " + std::to_string(gm.g));
  if (p.weight.dim(1) != gm.cig())
    throw ShapeError("conv2d: weight expects " + std::to_string(p.weight.dim(1)) +
                     " input channels per group, input has " + std::to_string(gm.cig()));
  if (p.bias.defined()) {
    check_same_dtype(x, p.bias, "conv2d");
    if (p.bias.rank() != 1 || p.bias.dim(0) != gm.co)
      throw ShapeError("conv2d: bias must be [Cout], got " + shape_str(p.bias.shape()));
  }
  const std::int64_t eh = gm.h + 2 * gm.p - gm.k;
  const std::int64_t ew = gm.w + 2 * gm.p - gm.k;
  if (eh < 0 || ew < 0 || eh % gm.s != 0 || ew % gm.s != 0)
    throw ShapeError("conv2d: input " + std::to_string(gm.h) + "x" + std::to_string(gm.w) +
                     " incompatible with k=" + std::to_string(gm.k) + " s=" + std::to_string(gm.s) +
                     " p=" + std::to_string(gm.p));
  gm.ho = eh / gm.s + 1;
  gm.wo = ew / gm.s + 1;
  return gm;
}

// Each output element accumulates bias first, then taps in (cig, kh, kw)
// order. The stride-1 path hoists the padding test out of the inner loop but
// keeps that order, so both paths and both execution modes agree bitwise.
template <class T>
void conv_fwd_kern(const T* x, const T* w, const T* b, T* y, const ConvGeom& gm, bool par_ok) {
  const std::int64_t cig = gm.cig(), cog = gm.cog();
#pragma omp parallel for if (par_ok) collapse(3) schedule(static)
  for (std::int64_t n = 0; n < gm.n; ++n) {
    for (std::int64_t co = 0; co < gm.co; ++co) {
      for (std::int64_t oh = 0; oh < gm.ho; ++oh) {
        const std::int64_t grp = co / cog;
        const T* wf = w + co * cig * gm.k * gm.k;
        const T bv = b ? b[co] : T(0);
        T* yrow = y + ((n * gm.co + co) * gm.ho + oh) * gm.wo;
        for (std::int64_t ow = 0; ow < gm.wo; ++ow) yrow[ow] = bv;
        for (std::int64_t c = 0; c < cig; ++c) {
          const T* xpl = x + (n * gm.ci + grp * cig + c) * gm.h * gm.w;
          for (std::int64_t kh = 0; kh < gm.k; ++kh) {
            const std::int64_t ih = oh * gm.s + kh - gm.p;
            if (ih < 0 || ih >= gm.h) continue;
            const T* xrow = xpl + ih * gm.w;
            const T* wrow = wf + (c * gm.k + kh) * gm.k;
            if (gm.s == 1) {
              for (std::int64_t kw = 0; kw < gm.k; ++kw) {
                const T wv = wrow[kw];
                const std::int64_t lo = std::max<std::int64_t>(0, gm.p - kw);
                const std::int64_t hi = std::min(gm.wo, gm.w + gm.p - kw);
                const T* xoff = xrow + kw - gm.p;
                for (std::int64_t ow = lo; ow < hi; ++ow) yrow[ow] += wv * xoff[ow];
              }
            } else {
              for (std::int64_t kw = 0; kw < gm.k; ++kw) {
                const T wv = wrow[kw];
                for (std::int64_t ow = 0; ow < gm.wo; ++ow) {
                  const std::int64_t iw = ow * gm.s + kw - gm.p;
                  if (iw >= 0 && iw < gm.w) yrow[ow] += wv * xrow[iw];
                }
              }
            }
          }
        }
      }
    }
  }
}

// Gather form of the input gradient: each (n,ci,ih,iw) sums its own taps in
// (co-within-group, kh, kw) order, so threads never share an accumulator.
template <class T>
void conv_bwd_x_kern(const T* w, const T* gy, T* gx, const ConvGeom& gm, bool par_ok) {
  const std::int64_t cig = gm.cig(), cog = gm.cog();
#pragma omp parallel for if (par_ok) collapse(3) schedule(static)
  for (std::int64_t n = 0; n < gm.n; ++n) {
    for (std::int64_t ci = 0; ci < gm.ci; ++ci) {
      for (std::int64_t ih = 0; ih < gm.h; ++ih) {
        const std::int64_t grp = ci / cig;
        const std::int64_t c = ci - grp * cig;
        T* gxrow = gx + ((n * gm.ci + ci) * gm.h + ih) * gm.w;
        for (std::int64_t iw = 0; iw < gm.w; ++iw) {
          T acc = 0;
          for (std::int64_t cg = 0; cg < cog; ++cg) {
            const std::int64_t co = grp * cog + cg;
            const T* wf = w + (co * cig + c) * gm.k * gm.k;
            const T* gpl = gy + (n * gm.co + co) * gm.ho * gm.wo;
            for (std::int64_t kh = 0; kh < gm.k; ++kh) {
              const std::int64_t ohn = ih + gm.p - kh;
              if (ohn < 0 || ohn % gm.s != 0) continue;
              const std::int64_t oh = ohn / gm.s;
              if (oh >= gm.ho) continue;
              for (std::int64_t kw = 0; kw < gm.k; ++kw) {
                const std::int64_t own = iw + gm.p - kw;
                if (own < 0 || own % gm.s != 0) continue;
                const std::int64_t ow = own / gm.s;
                if (ow >= gm.wo) continue;
                acc += wf[kh * gm.k + kw] * gpl[oh * gm.wo + ow];
              }
            }
          }
          gxrow[iw] = acc;
        }
      }
    }
  }
}

// Gather form of the weight gradient: one task per filter tap, summing over
// (n, oh, ow) in that order.
template <class T>
void conv_bwd_w_kern(const T* x, const T* gy, T* gw, const ConvGeom& gm, bool par_ok) {
  const std::int64_t cig = gm.cig(), cog = gm.cog();
#pragma omp parallel for if (par_ok) collapse(4) schedule(static)
  for (std::int64_t co = 0; co < gm.co; ++co) {
    for (std::int64_t c = 0; c < cig; ++c) {
      for (std::int64_t kh = 0; kh < gm.k; ++kh) {
        for (std::int64_t kw = 0; kw < gm.k; ++kw) {
          const std::int64_t ci = (co / cog) * cig + c;
          T acc = 0;
          for (std::int64_t n = 0; n < gm.n; ++n) {
            const T* xpl = x + (n * gm.ci + ci) * gm.h * gm.w;
            const T* gpl = gy + (n * gm.co + co) * gm.ho * gm.wo;
            for (std::int64_t oh = 0; oh < gm.ho; ++oh) {
              const std::int64_t ih = oh * gm.s + kh - gm.p;
              if (ih < 0 || ih >= gm.h) continue;
              for (std::int64_t ow = 0; ow < gm.wo; ++ow) {
                const std::int64_t iw = ow * gm.s + kw - gm.p;
                if (iw >= 0 && iw < gm.w) acc += xpl[ih * gm.w + iw] * gpl[oh * gm.wo + ow];
              }
            }
          }
          gw[((co * cig + c) * gm.k + kh) * gm.k + kw] = acc;
        }
      }
    }
  }
}

template <class T>
void conv_bwd_b_kern(const T* gy, T* gb, const ConvGeom& gm, bool par_ok) {
#pragma omp parallel for if (par_ok) schedule(static)
  for (std::int64_t co = 0; co < gm.co; ++co) {
    T acc = 0;
    for (std::int64_t n = 0; n < gm.n; ++n) {
      const T* gpl = gy + (n * gm.co + co) * gm.ho * gm.wo;
      for (std::int64_t i = 0; i < gm.ho * gm.wo; ++i) acc += gpl[i];
    }
    gb[co] = acc;
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  const ConvGeom gm = conv_geom(x, p);
  Tensor out = Tensor::zeros({gm.n, gm.co, gm.ho, gm.wo}, x.dtype());
  const std::int64_t work = gm.n * gm.co * gm.ho * gm.wo * gm.cig() * gm.k * gm.k;
  const bool par_ok = kern::go_par(work);
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    conv_fwd_kern<T>(detail::cdata<T>(x), detail::cdata<T>(p.weight),
                     p.bias.defined() ? detail::cdata<T>(p.bias) : nullptr, detail::data<T>(out),
                     gm, par_ok);
  });
  kern::maybe_record(
      out, {&x, &p.weight, &p.bias},
      [x, w = p.weight, gm, par_ok](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
        detail::dispatch(x.dtype(), [&](auto tag) {
          using T = decltype(tag);
          if (ids[0] >= 0) {
            Tensor gx = Tensor::zeros(x.shape(), x.dtype());
            conv_bwd_x_kern<T>(detail::cdata<T>(w), detail::cdata<T>(g), detail::data<T>(gx), gm,
                               par_ok);
            t.accumulate(ids[0], gx);
          }
          if (ids[1] >= 0) {
            Tensor gw = Tensor::zeros(w.shape(), w.dtype());
            conv_bwd_w_kern<T>(detail::cdata<T>(x), detail::cdata<T>(g), detail::data<T>(gw), gm,
                               par_ok);
            t.accumulate(ids[1], gw);
          }
          if (ids[2] >= 0) {
            Tensor gb = Tensor::zeros({gm.co}, x.dtype());
            conv_bwd_b_kern<T>(detail::cdata<T>(g), detail::data<T>(gb), gm, par_ok);
            t.accumulate(ids[2], gb);
          }
        });
      });
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    T* po = detail::data<T>(out);
    const std::int64_t n = x.numel();
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  });
  kern::maybe_record(out, {&x}, [x](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
    Tensor dx = Tensor::zeros(x.shape(), x.dtype());
    detail::dispatch(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* px = detail::cdata<T>(x);
      const T* pg = detail::cdata<T>(g);
      T* pd = detail::data<T>(dx);
      const std::int64_t n = x.numel();
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
      for (std::int64_t i = 0; i < n; ++i) pd[i] = px[i] > T(0) ? pg[i] : T(0);
    });
    t.accumulate(ids[0], dx);
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool: expected [N,C,H,W], got " + shape_str(x.shape()));
  const std::int64_t nc = x.dim(0) * x.dim(1);
  const std::int64_t hw = x.dim(2) * x.dim(3);
  Tensor out = Tensor::zeros({x.dim(0), x.dim(1), 1, 1}, x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    T* po = detail::data<T>(out);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
    for (std::int64_t i = 0; i < nc; ++i) {
      T acc = 0;
      for (std::int64_t j = 0; j < hw; ++j) acc += px[i * hw + j];
      po[i] = acc / static_cast<T>(hw);
    }
  });
  kern::maybe_record(out, {&x},
                     [xs = x.shape(), nc, hw](Tape& t, const Tensor& g,
                                              const std::vector<std::int32_t>& ids) {
                       Tensor dx = Tensor::zeros(xs, g.dtype());
                       detail::dispatch(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         const T* pg = detail::cdata<T>(g);
                         T* pd = detail::data<T>(dx);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
                         for (std::int64_t i = 0; i < nc; ++i) {
                           const T v = pg[i] / static_cast<T>(hw);
                           for (std::int64_t j = 0; j < hw; ++j) pd[i * hw + j] = v;
                         }
                       });
                       t.accumulate(ids[0], dx);
                     });
  return out;
}

Tensor avg_pool2x2(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
    throw ShapeError("avg_pool2x2: needs [N,C,H,W] with even H,W, got " + shape_str(x.shape()));
  const std::int64_t nc = x.dim(0) * x.dim(1);
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const std::int64_t ho = h / 2, wo = w / 2;
  Tensor out = Tensor::zeros({x.dim(0), x.dim(1), ho, wo}, x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    T* po = detail::data<T>(out);
#pragma omp parallel for if (kern::go_par(nc * h * w)) schedule(static)
    for (std::int64_t i = 0; i < nc; ++i) {
      const T* pl = px + i * h * w;
      T* ol = po + i * ho * wo;
      for (std::int64_t oh = 0; oh < ho; ++oh) {
        for (std::int64_t ow = 0; ow < wo; ++ow) {
          const T* p0 = pl + 2 * oh * w + 2 * ow;
          ol[oh * wo + ow] = (p0[0] + p0[1] + p0[w] + p0[w + 1]) * T(0.25);
        }
      }
    }
  });
  kern::maybe_record(out, {&x},
                     [xs = x.shape(), nc, h, w, ho, wo](Tape& t, const Tensor& g,
                                                        const std::vector<std::int32_t>& ids) {
                       Tensor dx = Tensor::zeros(xs, g.dtype());
                       detail::dispatch(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         const T* pg = detail::cdata<T>(g);
                         T* pd = detail::data<T>(dx);
#pragma omp parallel for if (kern::go_par(nc * h * w)) schedule(static)
                         for (std::int64_t i = 0; i < nc; ++i) {
                           const T* gl = pg + i * ho * wo;
                           T* dl = pd + i * h * w;
                           for (std::int64_t ih = 0; ih < h; ++ih)
                             for (std::int64_t iw = 0; iw < w; ++iw)
                               dl[ih * w + iw] = gl[(ih / 2) * wo + iw / 2] * T(0.25);
                         }
                       });
                       t.accumulate(ids[0], dx);
                     });
  return out;
}

namespace {

// Source index pair and blend weight for each destination coordinate along
// one axis, half-pixel convention with edge clamping.
template <class T>
void up2x_axis(std::int64_t src, std::vector<std::int64_t>& i0, std::vector<std::int64_t>& i1,
               std::vector<T>& frac) {
  const std::int64_t dst = src * 2;
  i0.resize(static_cast<std::size_t>(dst));
  i1.resize(static_cast<std::size_t>(dst));
  frac.resize(static_cast<std::size_t>(dst));
  for (std::int64_t o = 0; o < dst; ++o) {
    const double s = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
    const double fl = std::floor(s);
    std::int64_t lo = static_cast<std::int64_t>(fl);
    double f = s - fl;
    if (lo < 0) {
      lo = 0;
      f = 0.0;  // clamped: both taps read row 0
    }
    std::int64_t hi = lo + 1;
    if (hi > src - 1) {
      hi = src - 1;
      if (lo > src - 1) lo = src - 1;
      if (lo == hi) f = 0.0;
    }
    i0[static_cast<std::size_t>(o)] = lo;
    i1[static_cast<std::size_t>(o)] = hi;
    frac[static_cast<std::size_t>(o)] = static_cast<T>(f);
  }
}

}  // namespace

Tensor bilinear_up2x(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("bilinear_up2x: expected [N,C,H,W], got " + shape_str(x.shape()));
  const std::int64_t nc = x.dim(0) * x.dim(1);
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const std::int64_t h2 = h * 2, w2 = w * 2;
  Tensor out = Tensor::zeros({x.dim(0), x.dim(1), h2, w2}, x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    std::vector<std::int64_t> y0, y1, x0, x1;
    std::vector<T> fy, fx;
    up2x_axis<T>(h, y0, y1, fy);
    up2x_axis<T>(w, x0, x1, fx);
    const T* px = detail::cdata<T>(x);
    T* po = detail::data<T>(out);
#pragma omp parallel for if (kern::go_par(nc * h2 * w2)) schedule(static)
    for (std::int64_t i = 0; i < nc; ++i) {
      const T* pl = px + i * h * w;
      T* ol = po + i * h2 * w2;
      for (std::int64_t oy = 0; oy < h2; ++oy) {
        const T* r0 = pl + y0[static_cast<std::size_t>(oy)] * w;
        const T* r1 = pl + y1[static_cast<std::size_t>(oy)] * w;
        const T wy = fy[static_cast<std::size_t>(oy)];
        for (std::int64_t ox = 0; ox < w2; ++ox) {
          const std::int64_t a = x0[static_cast<std::size_t>(ox)];
          const std::int64_t b = x1[static_cast<std::size_t>(ox)];
          const T wx = fx[static_cast<std::size_t>(ox)];
          const T top = r0[a] + wx * (r0[b] - r0[a]);
          const T bot = r1[a] + wx * (r1[b] - r1[a]);
          ol[oy * w2 + ox] = top + wy * (bot - top);
        }
      }
    }
  });
  kern::maybe_record(
      out, {&x},
      [xs = x.shape(), nc, h, w, h2, w2](Tape& t, const Tensor& g,
                                         const std::vector<std::int32_t>& ids) {
        Tensor dx = Tensor::zeros(xs, g.dtype());
        detail::dispatch(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          std::vector<std::int64_t> y0, y1, x0, x1;
          std::vector<T> fy, fx;
          up2x_axis<T>(h, y0, y1, fy);
          up2x_axis<T>(w, x0, x1, fx);
          const T* pg = detail::cdata<T>(g);
          T* pd = detail::data<T>(dx);
// scatter stays inside one (n,c) plane, so planes parallelize cleanly
#pragma omp parallel for if (kern::go_par(nc * h2 * w2)) schedule(static)
          for (std::int64_t i = 0; i < nc; ++i) {
            const T* gl = pg + i * h2 * w2;
            T* dl = pd + i * h * w;
            for (std::int64_t oy = 0; oy < h2; ++oy) {
              const std::int64_t ya = y0[static_cast<std::size_t>(oy)];
              const std::int64_t yb = y1[static_cast<std::size_t>(oy)];
              const T wy = fy[static_cast<std::size_t>(oy)];
              for (std::int64_t ox = 0; ox < w2; ++ox) {
                const std::int64_t xa = x0[static_cast<std::size_t>(ox)];
                const std::int64_t xb = x1[static_cast<std::size_t>(ox)];
                const T wx = fx[static_cast<std::size_t>(ox)];
                const T gv = gl[oy * w2 + ox];
                dl[ya * w + xa] += gv * (T(1) - wy) * (T(1) - wx);
                dl[ya * w + xb] += gv * (T(1) - wy) * wx;
                dl[yb * w + xa] += gv * wy * (T(1) - wx);
                dl[yb * w + xb] += gv * wy * wx;
              }
            }
          }
        });
        t.accumulate(ids[0], dx);
      });
  return out;
}

Tensor weighted_spatial_pool(const Tensor& x, const Tensor& w) {
  if (x.rank() != 4) throw ShapeError("weighted_spatial_pool: x must be [N,C,H,W], got " +
                                      shape_str(x.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t hw = x.dim(2) * x.dim(3);
  check_same_dtype(x, w, "weighted_spatial_pool");
  if (w.rank() != 2 || w.dim(0) != n || w.dim(1) != hw)
    throw ShapeError("weighted_spatial_pool: weights must be [N,H*W]=[" + std::to_string(n) + "," +
                     std::to_string(hw) + "], got " + shape_str(w.shape()));
  Tensor out = Tensor::zeros({n, c, 1, 1}, x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    const T* pw = detail::cdata<T>(w);
    T* po = detail::data<T>(out);
#pragma omp parallel for if (kern::go_par(n * c * hw)) collapse(2) schedule(static)
    for (std::int64_t ni = 0; ni < n; ++ni) {
      for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* pl = px + (ni * c + ci) * hw;
        const T* wl = pw + ni * hw;
        T acc = 0;
        for (std::int64_t j = 0; j < hw; ++j) acc += pl[j] * wl[j];
        po[ni * c + ci] = acc;
      }
    }
  });
  kern::maybe_record(
      out, {&x, &w}, [x, w, n, c, hw](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
        detail::dispatch(x.dtype(), [&](auto tag) {
          using T = decltype(tag);
          const T* pg = detail::cdata<T>(g);
          if (ids[0] >= 0) {
            Tensor dx = Tensor::zeros(x.shape(), x.dtype());
            const T* pw = detail::cdata<T>(w);
            T* pd = detail::data<T>(dx);
#pragma omp parallel for if (kern::go_par(n * c * hw)) collapse(2) schedule(static)
            for (std::int64_t ni = 0; ni < n; ++ni)
              for (std::int64_t ci = 0; ci < c; ++ci) {
                const T gv = pg[ni * c + ci];
                T* dl = pd + (ni * c + ci) * hw;
                const T* wl = pw + ni * hw;
                for (std::int64_t j = 0; j < hw; ++j) dl[j] = gv * wl[j];
              }
            t.accumulate(ids[0], dx);
          }
          if (ids[1] >= 0) {
            Tensor dw = Tensor::zeros(w.shape(), w.dtype());
            const T* px = detail::cdata<T>(x);
            T* pd = detail::data<T>(dw);
#pragma omp parallel for if (kern::go_par(n * c * hw)) collapse(2) schedule(static)
            for (std::int64_t ni = 0; ni < n; ++ni)
              for (std::int64_t j = 0; j < hw; ++j) {
                T acc = 0;
                for (std::int64_t ci = 0; ci < c; ++ci) acc += pg[ni * c + ci] * px[(ni * c + ci) * hw + j];
                pd[ni * hw + j] = acc;
              }
            t.accumulate(ids[1], dw);
          }
        });
      });
  return out;
}

Tensor downsample2x(const Tensor& x, const ResampleParams& p) {
  ConvParams proj;
  proj.weight = p.proj;
  return conv2d(avg_pool2x2(x), proj);
}

Tensor upsample2x(const Tensor& x, const ResampleParams& p) {
  ConvParams proj;
  proj.weight = p.proj;
  return bilinear_up2x(conv2d(x, proj));
}

}  // namespace enrest
