// Charbonnier loss, Adam, the two schedules and the training loop.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "enrest/analysis.hpp"
#include "enrest/error.hpp"
#include "enrest/ops.hpp"
#include "enrest/serialize.hpp"
#include "enrest/train.hpp"
#include "kern.hpp"

namespace enrest {

namespace {

constexpr double kPi = 3.14159265358979323846;

double rd4(const Tensor& t, std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
  return t.at(t.offset(n, c, y, x));
}

bool all_finite(const Tensor& t) {
  const std::int64_t n = t.numel();
  bool ok = true;
  detail::dispatch(t.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* p = detail::cdata<T>(t);
    for (std::int64_t i = 0; i < n; ++i)
      if (!std::isfinite(static_cast<double>(p[i]))) {
        ok = false;
        return;
      }
  });
  return ok;
}

Tensor clamp01(const Tensor& t) {
  Tensor out = Tensor::zeros(t.shape(), t.dtype());
  const std::int64_t n = t.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    double v = t.at(i);
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    out.set(i, v);
  }
  return out;
}

}  // namespace

const char* charbonnier_mode_name(CharbonnierMode m) {
  return m == CharbonnierMode::PerPixelMean ? "per_pixel_mean" : "global_norm";
}

CharbonnierMode parse_charbonnier_mode(const std::string& s) {
  if (s == "per_pixel_mean") return CharbonnierMode::PerPixelMean;
  if (s == "global_norm") return CharbonnierMode::GlobalNorm;
  throw ConfigError("unknown charbonnier mode '" + s + "' (per_pixel_mean, global_norm)");
}

Tensor charbonnier_loss(const Tensor& pred, const Tensor& target, double eps,
                        CharbonnierMode mode) {
  check_same_dtype(pred, target, "charbonnier_loss");
  check_same_shape(pred, target, "charbonnier_loss");
  if (eps <= 0.0) throw ConfigError("charbonnier_loss: eps must be positive");
  const std::int64_t n = pred.numel();
  const double eps2 = eps * eps;

  // accumulate in double regardless of tensor dtype; the loss is one number
  // and its precision gates the whole optimization
  double value = 0.0;
  detail::dispatch(pred.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* p = detail::cdata<T>(pred);
    const T* q = detail::cdata<T>(target);
    double acc = 0.0;
    if (mode == CharbonnierMode::PerPixelMean) {
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(q[i]);
        acc += std::sqrt(d * d + eps2);
      }
      value = acc / static_cast<double>(n);
    } else {
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(q[i]);
        acc += d * d;
      }
      value = std::sqrt(acc + eps2);
    }
  });

  Tensor out = Tensor::zeros({1}, pred.dtype());
  out.set(0, value);
  kern::maybe_record(out, {&pred, &target},
                     [pred, target, eps2, mode, value, n](Tape& t, const Tensor& g,
                                                          const std::vector<std::int32_t>& ids) {
                       const double g0 = g.at(0);
                       Tensor dp = Tensor::zeros(pred.shape(), pred.dtype());
                       detail::dispatch(pred.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         const T* p = detail::cdata<T>(pred);
                         const T* q = detail::cdata<T>(target);
                         T* o = detail::data<T>(dp);
                         if (mode == CharbonnierMode::PerPixelMean) {
                           const double s = g0 / static_cast<double>(n);
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
                           for (std::int64_t i = 0; i < n; ++i) {
                             const double d =
                                 static_cast<double>(p[i]) - static_cast<double>(q[i]);
                             o[i] = static_cast<T>(s * d / std::sqrt(d * d + eps2));
                           }
                         } else {
                           const double s = g0 / value;
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
                           for (std::int64_t i = 0; i < n; ++i) {
                             const double d =
                                 static_cast<double>(p[i]) - static_cast<double>(q[i]);
                             o[i] = static_cast<T>(s * d);
                           }
                         }
                       });
                       if (ids[0] >= 0) t.accumulate(ids[0], dp);
                       if (ids[1] >= 0) t.accumulate(ids[1], scale(dp, -1.0));
                     });
  return out;
}

void TrainConfig::validate(int multiple) const {
  if (total_iters < 0) throw ConfigError("total_iters must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (lr_init <= 0.0 || lr_min <= 0.0 || lr_min > lr_init)
    throw ConfigError("need 0 < lr_min <= lr_init");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("betas must lie in [0, 1)");
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
  if (charbonnier_eps <= 0.0) throw ConfigError("charbonnier eps must be positive");
  if (val_every < 0) throw ConfigError("val_every must be non-negative");
  if (patch_schedule.empty()) throw ConfigError("patch schedule is empty");
  if (patch_schedule.front().start_frac != 0.0)
    throw ConfigError("patch schedule must start at fraction 0");
  for (std::size_t i = 0; i < patch_schedule.size(); ++i) {
    const PatchStage& st = patch_schedule[i];
    if (st.size < 1) throw ConfigError("patch sizes must be positive");
    if (multiple > 0 && st.size % multiple != 0)
      throw ConfigError("patch size " + std::to_string(st.size) + " not divisible by " +
                        std::to_string(multiple));
    if (i > 0) {
      if (st.start_frac <= patch_schedule[i - 1].start_frac)
        throw ConfigError("patch schedule fractions must be strictly increasing");
      if (st.size <= patch_schedule[i - 1].size)
        throw ConfigError("patch sizes must be strictly increasing");
    }
    if (st.start_frac < 0.0 || st.start_frac >= 1.0)
      throw ConfigError("patch schedule fractions must lie in [0, 1)");
  }
}

double cosine_lr(std::int64_t t, std::int64_t total_iters, double lr_init, double lr_min) {
  if (total_iters < 1) throw ConfigError("cosine_lr: total_iters must be positive");
  if (t < 0 || t > total_iters)
    throw ConfigError("cosine_lr: iteration " + std::to_string(t) + " outside [0, " +
                      std::to_string(total_iters) + "]");
  if (t == 0) return lr_init;
  if (t == total_iters) return lr_min;
  const double c = std::cos(kPi * static_cast<double>(t) / static_cast<double>(total_iters));
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + c);
}

int progressive_patch(std::int64_t t, const TrainConfig& cfg) {
  if (cfg.patch_schedule.empty()) throw ConfigError("progressive_patch: empty schedule");
  int size = cfg.patch_schedule.front().size;
  for (const PatchStage& st : cfg.patch_schedule)
    if (st.start_frac * static_cast<double>(cfg.total_iters) <= static_cast<double>(t))
      size = st.size;
  return size;
}

TrainState make_train_state(const Model& model) {
  TrainState st;
  st.m.reserve(model.ps.size());
  st.v.reserve(model.ps.size());
  for (int i = 0; i < model.ps.size(); ++i) {
    st.m.push_back(Tensor::zeros(model.ps.tensor(i).shape(), model.ps.dtype()));
    st.v.push_back(Tensor::zeros(model.ps.tensor(i).shape(), model.ps.dtype()));
  }
  return st;
}

void adam_step(Model& model, const Tape& tape, TrainState& st, const TrainConfig& cfg,
               double lr) {
  if (lr <= 0.0) throw ConfigError("adam_step: lr must be positive");
  ParamStore& ps = model.ps;
  if (static_cast<int>(st.m.size()) != ps.size() || static_cast<int>(st.v.size()) != ps.size())
    throw ConfigError("adam_step: state does not match the parameter store");

  // gather and vet every gradient before touching any parameter, so a bad
  // step aborts cleanly instead of half-updating the model
  std::vector<Tensor> grads;
  grads.reserve(ps.size());
  for (int i = 0; i < ps.size(); ++i) {
    Tensor g = tape.grad(ps.tensor(i));
    if (!all_finite(g))
      throw NumericError("non-finite gradient for parameter '" + ps.name(i) + "'");
    grads.push_back(std::move(g));
  }

  const std::int64_t step = st.iter + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (int i = 0; i < ps.size(); ++i) {
    const Tensor& theta = ps.tensor(i);
    const std::int64_t n = theta.numel();
    Tensor nm = Tensor::zeros(theta.shape(), theta.dtype());
    Tensor nv = Tensor::zeros(theta.shape(), theta.dtype());
    Tensor nt = Tensor::zeros(theta.shape(), theta.dtype());
    detail::dispatch(theta.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* pg = detail::cdata<T>(grads[static_cast<std::size_t>(i)]);
      const T* pt = detail::cdata<T>(theta);
      const T* pm = detail::cdata<T>(st.m[static_cast<std::size_t>(i)]);
      const T* pv = detail::cdata<T>(st.v[static_cast<std::size_t>(i)]);
      T* om = detail::data<T>(nm);
      T* ov = detail::data<T>(nv);
      T* ot = detail::data<T>(nt);
#pragma omp parallel for if (kern::go_par(n)) schedule(static)
      for (std::int64_t j = 0; j < n; ++j) {
        const double g = static_cast<double>(pg[j]);
        const double m2 = cfg.beta1 * static_cast<double>(pm[j]) + (1.0 - cfg.beta1) * g;
        const double v2 = cfg.beta2 * static_cast<double>(pv[j]) + (1.0 - cfg.beta2) * g * g;
        om[j] = static_cast<T>(m2);
        ov[j] = static_cast<T>(v2);
        const double upd = lr * (m2 / bc1) / (std::sqrt(v2 / bc2) + cfg.adam_eps);
        ot[j] = static_cast<T>(static_cast<double>(pt[j]) - upd);
      }
    });
    st.m[static_cast<std::size_t>(i)] = std::move(nm);
    st.v[static_cast<std::size_t>(i)] = std::move(nv);
    ps.set(i, std::move(nt));
  }
  st.iter = step;
  st.lr = lr;
}

void save_train_state(const Model& model, const TrainState& st, const std::string& path) {
  const ParamStore& ps = model.ps;
  if (static_cast<int>(st.m.size()) != ps.size() || static_cast<int>(st.v.size()) != ps.size())
    throw ConfigError("save_train_state: state does not match the parameter store");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path + " for writing");
  io::write_bytes(f, "ERST", 4);
  io::write_u8(f, 1);
  io::write_u64(f, static_cast<std::uint64_t>(st.iter));
  io::write_f64(f, st.lr);
  io::write_u32(f, static_cast<std::uint32_t>(st.patch));
  io::write_u32(f, static_cast<std::uint32_t>(st.rng_state.size()));
  io::write_bytes(f, st.rng_state.data(), st.rng_state.size());
  io::write_u32(f, static_cast<std::uint32_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) {
    const std::string& name = ps.name(i);
    io::write_u16(f, static_cast<std::uint16_t>(name.size()));
    io::write_bytes(f, name.data(), name.size());
    io::save_tensor(f, st.m[static_cast<std::size_t>(i)]);
    io::save_tensor(f, st.v[static_cast<std::size_t>(i)]);
  }
  f.flush();
  if (!f) throw IOError("write failed: " + path);
}

void load_train_state(const Model& model, TrainState& st, const std::string& path) {
  const ParamStore& ps = model.ps;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path);
  char magic[4];
  io::read_bytes(f, magic, 4);
  if (std::memcmp(magic, "ERST", 4) != 0) throw IOError(path + ": not a train-state file");
  if (io::read_u8(f) != 1) throw IOError(path + ": unsupported version");
  TrainState fresh;
  fresh.iter = static_cast<std::int64_t>(io::read_u64(f));
  fresh.lr = io::read_f64(f);
  fresh.patch = static_cast<int>(io::read_u32(f));
  const std::uint32_t rl = io::read_u32(f);
  fresh.rng_state.resize(rl);
  io::read_bytes(f, fresh.rng_state.data(), rl);
  const std::uint32_t count = io::read_u32(f);
  if (count != static_cast<std::uint32_t>(ps.size()))
    throw IOError(path + ": parameter count mismatch");
  fresh.m.reserve(count);
  fresh.v.reserve(count);
  for (int i = 0; i < ps.size(); ++i) {
    const std::uint16_t nl = io::read_u16(f);
    std::string name(nl, '\0');
    io::read_bytes(f, name.data(), nl);
    if (name != ps.name(i))
      throw IOError(path + ": parameter order mismatch at '" + name + "'");
    Tensor m = io::load_tensor(f);
    Tensor v = io::load_tensor(f);
    if (m.shape() != ps.tensor(i).shape() || v.shape() != ps.tensor(i).shape())
      throw IOError(path + ": moment shape mismatch for '" + name + "'");
    if (m.dtype() != ps.dtype() || v.dtype() != ps.dtype())
      throw IOError(path + ": moment dtype mismatch for '" + name + "'");
    fresh.m.push_back(std::move(m));
    fresh.v.push_back(std::move(v));
  }
  st = std::move(fresh);
}

double validate_psnr(const Model& model, const Dataset& ds) {
  if (ds.pairs.empty()) throw ConfigError("validate_psnr: empty dataset");
  double acc = 0.0;
  for (const ImagePair& p : ds.pairs) {
    const Tensor in = pad_to_multiple(p.input, model.cfg.required_multiple());
    Tensor out = model_forward(model, in);
    out = crop_to(out, p.target.dim(2), p.target.dim(3));
    acc += psnr(clamp01(out), p.target, 1.0);
  }
  return acc / static_cast<double>(ds.pairs.size());
}

double input_psnr(const Dataset& ds) {
  if (ds.pairs.empty()) throw ConfigError("input_psnr: empty dataset");
  double acc = 0.0;
  for (const ImagePair& p : ds.pairs) {
    Tensor in = p.input;
    if (in.dim(1) == 2 * p.target.dim(1)) {
      // paired photosite views: the trivial restoration is their average
      const std::int64_t c = p.target.dim(1), h = in.dim(2), w = in.dim(3);
      Tensor avg = Tensor::zeros(p.target.shape(), in.dtype());
      for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x)
            avg.set(avg.offset(0, ci, y, x),
                    0.5 * (rd4(in, 0, ci, y, x) + rd4(in, 0, c + ci, y, x)));
      in = avg;
    }
    acc += psnr(in, p.target, 1.0);
  }
  return acc / static_cast<double>(ds.pairs.size());
}

TrainRun train_loop(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                    const Dataset& train, const Dataset& val, const TrainPaths& paths,
                    DType dt) {
  model_cfg.validate();
  train_cfg.validate(model_cfg.required_multiple());
  if (train.pairs.empty()) throw ConfigError("train_loop: empty training set");
  for (const ImagePair& p : train.pairs) {
    if (p.input.dim(1) != model_cfg.in_channels || p.target.dim(1) != model_cfg.out_channels)
      throw ConfigError("train_loop: dataset channels do not match the model");
  }

  TrainRun run{build_model(model_cfg, dt)};
  Rng rng(train_cfg.seed);
  init_params(run.model, rng);
  TrainState st = make_train_state(run.model);

  std::ofstream log;
  if (!paths.metrics_log.empty()) {
    log.open(paths.metrics_log);
    if (!log) throw IOError("cannot open " + paths.metrics_log + " for writing");
    log << "# iter\tlr\tpatch\tloss\tval_psnr\n";
  }
  const std::int64_t ve = train_cfg.val_every > 0
                              ? train_cfg.val_every
                              : std::max<std::int64_t>(train_cfg.total_iters / 20, 1);

  std::vector<std::size_t> order(train.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = order.size();  // first draw reshuffles
  auto next_pair = [&]() -> const ImagePair& {
    if (pos >= order.size()) {
      rng.shuffle(order);
      pos = 0;
    }
    return train.pairs[order[pos++]];
  };

  const std::int64_t bsz = train_cfg.batch_size;
  run.final_loss = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t it = 0; it < train_cfg.total_iters; ++it) {
    const double lr = cosine_lr(it, train_cfg.total_iters, train_cfg.lr_init, train_cfg.lr_min);
    const int patch = progressive_patch(it, train_cfg);

    Tensor xb = Tensor::zeros({bsz, model_cfg.in_channels, patch, patch}, dt);
    Tensor yb = Tensor::zeros({bsz, model_cfg.out_channels, patch, patch}, dt);
    for (std::int64_t b = 0; b < bsz; ++b) {
      const ImagePair& p = next_pair();
      const PatchRect r = draw_patch_rect(p.target.dim(2), p.target.dim(3), patch, rng);
      Tensor xi = crop_patch(p.input, r);
      Tensor yi = crop_patch(p.target, r);
      if (rng.uniform() < 0.5) {
        xi = flip_h(xi);
        yi = flip_h(yi);
      }
      if (rng.uniform() < 0.5) {
        xi = flip_v(xi);
        yi = flip_v(yi);
      }
      const std::int64_t xn = xi.numel(), yn = yi.numel();
      for (std::int64_t i = 0; i < xn; ++i) xb.set(b * xn + i, xi.at(i));
      for (std::int64_t i = 0; i < yn; ++i) yb.set(b * yn + i, yi.at(i));
    }

    Tape tape;
    watch_params(run.model, tape);
    const Tensor out = model_forward(run.model, xb);
    const Tensor loss =
        charbonnier_loss(out, yb, train_cfg.charbonnier_eps, train_cfg.charbonnier_mode);
    const double lv = loss.at(0);
    if (!std::isfinite(lv))
      throw NumericError("non-finite loss at iteration " + std::to_string(it + 1));
    tape.backward(loss);
    adam_step(run.model, tape, st, train_cfg, lr);
    st.patch = patch;
    run.final_loss = lv;

    const bool do_val = !val.pairs.empty() &&
                        ((it + 1) % ve == 0 || it + 1 == train_cfg.total_iters);
    double vp = 0.0;
    if (do_val) vp = validate_psnr(run.model, val);
    if (log.is_open()) {
      char buf[192];
      std::snprintf(buf, sizeof buf, "%lld\t%.9e\t%d\t%.9e\t", static_cast<long long>(it + 1),
                    lr, patch, lv);
      log << buf;
      if (do_val) {
        std::snprintf(buf, sizeof buf, "%.6f", vp);
        log << buf;
      } else {
        log << "-";
      }
      log << "\n";
    }
  }

  run.iters = train_cfg.total_iters;
  st.rng_state = rng.save_state();
  if (log.is_open()) {
    log.flush();
    if (!log) throw IOError("write failed: " + paths.metrics_log);
  }
  if (!paths.checkpoint.empty()) save_checkpoint(run.model, paths.checkpoint);
  if (!paths.state.empty()) save_train_state(run.model, st, paths.state);
  run.val_psnr = val.pairs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : validate_psnr(run.model, val);
  run.noisy_psnr = val.pairs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : input_psnr(val);
  return run;
}

}  // namespace enrest
