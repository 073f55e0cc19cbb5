#include "enrest/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "enrest/error.hpp"
#include "kern.hpp"

namespace enrest {

namespace {

template <class T, class F>
void ew2(const Tensor& a, const Tensor& b, Tensor& out, F f) {
  const T* pa = detail::cdata<T>(a);
  const T* pb = detail::cdata<T>(b);
  T* po = detail::data<T>(out);
  const std::int64_t n = out.numel();
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
}

template <class T, class F>
void ew1(const Tensor& a, Tensor& out, F f) {
  const T* pa = detail::cdata<T>(a);
  T* po = detail::data<T>(out);
  const std::int64_t n = out.numel();
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
}

void check_binary(const Tensor& a, const Tensor& b, const char* op) {
  check_same_dtype(a, b, op);
  check_same_shape(a, b, op);
}

// C[i,j] = sum_t A'(i,t) * B'(t,j). `ta` means `a` holds A' transposed,
// i.e. is stored [K,M]; likewise `tb` means `b` is stored [N,K].
template <class T>
void matmul_kern(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
                 bool ta, bool tb) {
#pragma omp parallel for if (kern::go_par(m * n * k)) schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::int64_t t = 0; t < k; ++t) {
        const T av = ta ? a[t * m + i] : a[i * k + t];
        const T bv = tb ? b[j * k + t] : b[t * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

void check_axis(const Tensor& x, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(x.rank()))
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(x.rank()));
}

// Splits a shape around `axis` into (outer, n, inner) extents.
void axis_split(const Shape& s, int axis, std::int64_t& outer, std::int64_t& n,
                std::int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
  n = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

void check_nc11(const Tensor& x, const Tensor& s, const char* op) {
  check_same_dtype(x, s, op);
  if (x.rank() != 4 || s.rank() != 4 || s.dim(2) != 1 || s.dim(3) != 1 || s.dim(0) != x.dim(0) ||
      s.dim(1) != x.dim(1))
    throw ShapeError(std::string(op) + ": expected x [N,C,H,W] with s [N,C,1,1], got " +
                     shape_str(x.shape()) + " and " + shape_str(s.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "add");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  detail::dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    ew2<T>(a, b, out, [](T x, T y) { return x + y; });
  });
  kern::maybe_record(out, {&a, &b}, [](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
    if (ids[0] >= 0) t.accumulate(ids[0], g);
    if (ids[1] >= 0) t.accumulate(ids[1], g);
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  detail::dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    ew2<T>(a, b, out, [](T x, T y) { return x - y; });
  });
  kern::maybe_record(out, {&a, &b}, [](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
    if (ids[0] >= 0) t.accumulate(ids[0], g);
    if (ids[1] >= 0) t.accumulate(ids[1], scale(g, -1.0));
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  detail::dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    ew2<T>(a, b, out, [](T x, T y) { return x * y; });
  });
  kern::maybe_record(out, {&a, &b},
                     [a, b](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       if (ids[0] >= 0) t.accumulate(ids[0], mul(g, b));
                       if (ids[1] >= 0) t.accumulate(ids[1], mul(g, a));
                     });
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  detail::dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T sv = static_cast<T>(s);
    ew1<T>(a, out, [sv](T x) { return x * sv; });
  });
  kern::maybe_record(out, {&a}, [s](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
    if (ids[0] >= 0) t.accumulate(ids[0], scale(g, s));
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n}, a.dtype());
  detail::dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    matmul_kern<T>(detail::cdata<T>(a), detail::cdata<T>(b), detail::data<T>(out), m, k, n, false,
                   false);
  });
  kern::maybe_record(out, {&a, &b},
                     [a, b, m, k, n](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       detail::dispatch(a.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         if (ids[0] >= 0) {
                           Tensor da = Tensor::zeros({m, k}, a.dtype());
                           matmul_kern<T>(detail::cdata<T>(g), detail::cdata<T>(b),
                                          detail::data<T>(da), m, n, k, false, true);
                           t.accumulate(ids[0], da);
                         }
                         if (ids[1] >= 0) {
                           Tensor db = Tensor::zeros({k, n}, a.dtype());
                           matmul_kern<T>(detail::cdata<T>(a), detail::cdata<T>(g),
                                          detail::data<T>(db), k, m, n, true, false);
                           t.accumulate(ids[1], db);
                         }
                       });
                     });
  return out;
}

namespace {

template <class T>
void softmax_kern(const Tensor& x, Tensor& out, std::int64_t outer, std::int64_t n,
                  std::int64_t inner) {
  const T* px = detail::cdata<T>(x);
  T* po = detail::data<T>(out);
#pragma omp parallel for if (kern::go_par(outer * inner * n)) collapse(2) schedule(static)
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      T mx = px[base];
      for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, px[base + i * inner]);
      double sum = 0.0;  // accumulated wide so the weights sum to 1 tightly
      for (std::int64_t i = 0; i < n; ++i) {
        const T e = std::exp(px[base + i * inner] - mx);
        po[base + i * inner] = e;
        sum += static_cast<double>(e);
      }
      for (std::int64_t i = 0; i < n; ++i)
        po[base + i * inner] = static_cast<T>(static_cast<double>(po[base + i * inner]) / sum);
    }
  }
}

template <class T>
void softmax_back_kern(const Tensor& y, const Tensor& g, Tensor& dx, std::int64_t outer,
                       std::int64_t n, std::int64_t inner) {
  const T* py = detail::cdata<T>(y);
  const T* pg = detail::cdata<T>(g);
  T* pd = detail::data<T>(dx);
#pragma omp parallel for if (kern::go_par(outer * inner * n)) collapse(2) schedule(static)
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double dot = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        dot += static_cast<double>(pg[base + i * inner]) * static_cast<double>(py[base + i * inner]);
      for (std::int64_t i = 0; i < n; ++i)
        pd[base + i * inner] = static_cast<T>(
            static_cast<double>(py[base + i * inner]) *
            (static_cast<double>(pg[base + i * inner]) - dot));
    }
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  check_axis(x, axis, "softmax");
  std::int64_t outer, n, inner;
  axis_split(x.shape(), axis, outer, n, inner);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    softmax_kern<T>(x, out, outer, n, inner);
  });
  kern::maybe_record(
      out, {&x}, [out, outer, n, inner](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
        Tensor dx = Tensor::zeros(out.shape(), out.dtype());
        detail::dispatch(out.dtype(), [&](auto tag) {
          using T = decltype(tag);
          softmax_back_kern<T>(out, g, dx, outer, n, inner);
        });
        t.accumulate(ids[0], dx);
      });
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::zeros({1}, x.dtype());
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    T acc = 0;
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += px[i];
    detail::data<T>(out)[0] = acc;
  });
  kern::maybe_record(out, {&x},
                     [shape = x.shape(), dt = x.dtype()](Tape& t, const Tensor& g,
                                                         const std::vector<std::int32_t>& ids) {
                       t.accumulate(ids[0], Tensor::full(shape, g.at(0), dt));
                     });
  return out;
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  Tensor out = x.view(shape);
  kern::maybe_record(out, {&x},
                     [xs = x.shape()](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       t.accumulate(ids[0], g.view(xs));
                     });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = parts.front();
  check_axis(first, axis, "concat");
  Shape out_shape = first.shape();
  std::int64_t axis_total = 0;
  for (const Tensor& p : parts) {
    check_same_dtype(first, p, "concat");
    if (p.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < first.rank(); ++d) {
      if (d != axis && p.dim(d) != first.dim(d))
        throw ShapeError("concat: shape mismatch at " + shape_str(p.shape()) + " vs " +
                         shape_str(first.shape()));
    }
    axis_total += p.dim(axis);
  }
  out_shape[static_cast<std::size_t>(axis)] = axis_total;
  Tensor out = Tensor::zeros(out_shape, first.dtype());

  std::int64_t outer, n_out, inner;
  axis_split(out_shape, axis, outer, n_out, inner);
  detail::dispatch(first.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* po = detail::data<T>(out);
    std::int64_t off = 0;
    for (const Tensor& p : parts) {
      const T* pp = detail::cdata<T>(p);
      const std::int64_t pn = p.dim(axis);
      const std::int64_t block = pn * inner;
#pragma omp parallel for if (kern::go_par(outer * block)) schedule(static)
      for (std::int64_t o = 0; o < outer; ++o)
        std::memcpy(po + (o * n_out + off) * inner, pp + o * block,
                    static_cast<std::size_t>(block) * sizeof(T));
      off += pn;
    }
  });

  std::vector<const Tensor*> ins;
  ins.reserve(parts.size());
  for (const Tensor& p : parts) ins.push_back(&p);
  Tape* tp = Tape::active();
  if (tp && !tp->spent() && !Tape::sweeping()) {
    std::vector<std::int32_t> ids;
    std::vector<std::int64_t> lens;
    bool any = false;
    for (const Tensor& p : parts) {
      ids.push_back(tp->node_of(p));
      lens.push_back(p.dim(axis));
      any = any || ids.back() >= 0;
    }
    if (any) {
      tp->record(out, [ids, lens, axis](Tape& t, const Tensor& g) {
        std::int64_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (ids[i] >= 0) t.accumulate(ids[i], slice(g, axis, off, lens[i]));
          off += lens[i];
        }
      });
    }
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len) {
  check_axis(x, axis, "slice");
  const std::int64_t extent = x.dim(axis);
  if (len < 1 || start < 0 || start + len > extent)
    throw ShapeError("slice: window [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of range for extent " + std::to_string(extent));
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  std::int64_t outer, n_in, inner;
  axis_split(x.shape(), axis, outer, n_in, inner);
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    T* po = detail::data<T>(out);
    const std::int64_t block = len * inner;
#pragma omp parallel for if (kern::go_par(outer * block)) schedule(static)
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(po + o * block, px + (o * n_in + start) * inner,
                  static_cast<std::size_t>(block) * sizeof(T));
  });
  kern::maybe_record(out, {&x},
                     [xs = x.shape(), axis, start, len, outer, n_in, inner](
                         Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       Tensor dx = Tensor::zeros(xs, g.dtype());
                       detail::dispatch(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         const T* pg = detail::cdata<T>(g);
                         T* pd = detail::data<T>(dx);
                         const std::int64_t block = len * inner;
                         for (std::int64_t o = 0; o < outer; ++o)
                           std::memcpy(pd + (o * n_in + start) * inner, pg + o * block,
                                       static_cast<std::size_t>(block) * sizeof(T));
                       });
                       t.accumulate(ids[0], dx);
                     });
  return out;
}

namespace {

template <class T>
void bcast_sum_kern(const Tensor& g, Tensor& ds) {
  const T* pg = detail::cdata<T>(g);
  T* pd = detail::data<T>(ds);
  const std::int64_t nc = g.dim(0) * g.dim(1);
  const std::int64_t hw = g.dim(2) * g.dim(3);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
  for (std::int64_t i = 0; i < nc; ++i) {
    T acc = 0;
    for (std::int64_t j = 0; j < hw; ++j) acc += pg[i * hw + j];
    pd[i] = acc;
  }
}

template <class T>
void bcast_mul_sum_kern(const Tensor& g, const Tensor& x, Tensor& ds) {
  const T* pg = detail::cdata<T>(g);
  const T* px = detail::cdata<T>(x);
  T* pd = detail::data<T>(ds);
  const std::int64_t nc = g.dim(0) * g.dim(1);
  const std::int64_t hw = g.dim(2) * g.dim(3);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
  for (std::int64_t i = 0; i < nc; ++i) {
    T acc = 0;
    for (std::int64_t j = 0; j < hw; ++j) acc += pg[i * hw + j] * px[i * hw + j];
    pd[i] = acc;
  }
}

}  // namespace

Tensor broadcast_add(const Tensor& x, const Tensor& s) {
  check_nc11(x, s, "broadcast_add");
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  const std::int64_t hw = x.dim(2) * x.dim(3);
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    const T* ps = detail::cdata<T>(s);
    T* po = detail::data<T>(out);
    const std::int64_t nc = x.dim(0) * x.dim(1);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
    for (std::int64_t i = 0; i < nc; ++i) {
      const T sv = ps[i];
      for (std::int64_t j = 0; j < hw; ++j) po[i * hw + j] = px[i * hw + j] + sv;
    }
  });
  kern::maybe_record(out, {&x, &s},
                     [ss = s.shape()](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       if (ids[0] >= 0) t.accumulate(ids[0], g);
                       if (ids[1] >= 0) {
                         Tensor ds = Tensor::zeros(ss, g.dtype());
                         detail::dispatch(g.dtype(), [&](auto tag) {
                           using T = decltype(tag);
                           bcast_sum_kern<T>(g, ds);
                         });
                         t.accumulate(ids[1], ds);
                       }
                     });
  return out;
}

Tensor broadcast_mul(const Tensor& x, const Tensor& s) {
  check_nc11(x, s, "broadcast_mul");
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  const std::int64_t hw = x.dim(2) * x.dim(3);
  detail::dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = detail::cdata<T>(x);
    const T* ps = detail::cdata<T>(s);
    T* po = detail::data<T>(out);
    const std::int64_t nc = x.dim(0) * x.dim(1);
#pragma omp parallel for if (kern::go_par(nc * hw)) schedule(static)
    for (std::int64_t i = 0; i < nc; ++i) {
      const T sv = ps[i];
      for (std::int64_t j = 0; j < hw; ++j) po[i * hw + j] = px[i * hw + j] * sv;
    }
  });
  kern::maybe_record(out, {&x, &s},
                     [x, s](Tape& t, const Tensor& g, const std::vector<std::int32_t>& ids) {
                       if (ids[0] >= 0) t.accumulate(ids[0], broadcast_mul(g, s));
                       if (ids[1] >= 0) {
                         Tensor ds = Tensor::zeros(s.shape(), g.dtype());
                         detail::dispatch(g.dtype(), [&](auto tag) {
                           using T = decltype(tag);
                           bcast_mul_sum_kern<T>(g, x, ds);
                         });
                         t.accumulate(ids[1], ds);
                       }
                     });
  return out;
}

}  // namespace enrest
