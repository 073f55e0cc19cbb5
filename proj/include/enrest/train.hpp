// Loss, optimizer, schedules and the training loop.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enrest/blocks.hpp"
#include "enrest/data.hpp"
#include "enrest/rng.hpp"
#include "enrest/tape.hpp"
#include "enrest/tensor.hpp"

namespace enrest {

// per_pixel_mean: mean of sqrt(d^2 + eps^2) over elements (default, scales
// the same across patch sizes); global_norm: sqrt(|d|^2 + eps^2) over the
// whole tensor. Both smooth at d = 0.
enum class CharbonnierMode : std::uint8_t { PerPixelMean = 0, GlobalNorm = 1 };
const char* charbonnier_mode_name(CharbonnierMode m);
CharbonnierMode parse_charbonnier_mode(const std::string& s);

Tensor charbonnier_loss(const Tensor& pred, const Tensor& target, double eps = 1e-3,
                        CharbonnierMode mode = CharbonnierMode::PerPixelMean);

struct PatchStage {
  double start_frac = 0.0;
  int size = 0;
};

struct TrainConfig {
  std::int64_t total_iters = 300000;
  double lr_init = 2e-4;
  double lr_min = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  std::vector<PatchStage> patch_schedule = {{0.0, 128}, {0.25, 144}, {0.5, 192}, {0.75, 224}};
  CharbonnierMode charbonnier_mode = CharbonnierMode::PerPixelMean;
  double charbonnier_eps = 1e-3;
  std::uint64_t seed = 1;
  std::int64_t val_every = 0;  // 0: max(total_iters/20, 1)

  // ConfigError unless stages start at fraction 0 with strictly increasing
  // fractions and sizes, and every size is divisible by `multiple`
  void validate(int multiple) const;
};

struct TrainState {
  std::int64_t iter = 0;  // optimizer steps taken; also the bias-correction power
  double lr = 0.0;
  int patch = 0;
  std::vector<Tensor> m;  // parallel to the parameter store
  std::vector<Tensor> v;
  std::string rng_state;
};

TrainState make_train_state(const Model& model);

// lr(t) = lr_min + (lr_init - lr_min)(1 + cos(pi t / total)) / 2, with the
// endpoints returned exactly; ConfigError outside [0, total]
double cosine_lr(std::int64_t t, std::int64_t total_iters, double lr_init, double lr_min);

// size of the last stage whose start fraction of total has been reached
int progressive_patch(std::int64_t t, const TrainConfig& cfg);

// One Adam update over every parameter, gradients read from `tape` (which
// must have completed a backward sweep). Scans all gradients first and
// throws NumericError before touching any parameter if one is non-finite.
void adam_step(Model& model, const Tape& tape, TrainState& st, const TrainConfig& cfg, double lr);

// Optimizer/rng state records ("ERST"): iteration, lr, patch, rng state
// string, then per-parameter moment tensor pairs keyed by name.
void save_train_state(const Model& model, const TrainState& st, const std::string& path);
void load_train_state(const Model& model, TrainState& st, const std::string& path);

struct TrainPaths {
  std::string checkpoint;   // final weights; empty skips the save
  std::string metrics_log;  // tab-separated text log; empty skips it
  std::string state;        // optimizer/rng state; empty skips it
};

struct TrainRun {
  Model model;
  std::int64_t iters = 0;
  double final_loss = 0.0;
  double val_psnr = 0.0;    // trained model on `val`; NaN when val is empty
  double noisy_psnr = 0.0;  // the val inputs themselves, same baseline
};

// Builds and initializes the model, then iterates: sample a batch of paired
// patches at the scheduled size, flip-augment, forward, Charbonnier loss,
// backward, Adam step at the cosine lr. Logs one line per iteration and
// appends validation PSNR on the val_every cadence.
TrainRun train_loop(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                    const Dataset& train, const Dataset& val, const TrainPaths& paths,
                    DType dt = DType::F32);

// Mean per-image PSNR of model outputs against targets; inputs are padded to
// the model's required multiple, outputs cropped back and clamped to [0,1].
double validate_psnr(const Model& model, const Dataset& ds);

// PSNR of the inputs themselves (paired views averaged down when the input
// carries them); the do-nothing baseline a trained model must beat.
double input_psnr(const Dataset& ds);

}  // namespace enrest
