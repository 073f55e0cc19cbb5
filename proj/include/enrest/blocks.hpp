// Model description and forward passes. A model is a flat named parameter
// store plus a tree of lightweight specs that reference parameters by index,
// so weight sharing is explicit (two specs holding the same index) and
// optimizers and serialization only ever deal with the store.
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "enrest/nn_ops.hpp"
#include "enrest/rng.hpp"
#include "enrest/tape.hpp"
#include "enrest/tensor.hpp"

namespace enrest {

enum class FusionMode : std::uint8_t { Skff = 0, Sum = 1, Concat = 2 };

const char* fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

struct ModelConfig {
  int in_channels = 3;
  int out_channels = 3;
  int n_rrg = 4;
  int n_mrb = 2;
  int n_streams = 3;
  std::vector<int> channels = {80, 120, 180};  // per stream, full resolution first
  int n_cols = 2;
  int groups = 2;
  FusionMode fusion = FusionMode::Skff;

  void validate() const;  // ConfigError on inconsistent settings
  // inputs must be divisible by this so every stream sees even extents
  int required_multiple() const;
  bool operator==(const ModelConfig&) const = default;
};

// bottleneck width of the stream attention: C/8, floored at 4
int skff_reduction(int channels);

// Named parameter tensors in creation order. intern() returns the existing
// index when the name is already present (that is how columns share their
// filter banks) and verifies the caller agrees on shape and fan-in.
class ParamStore {
 public:
  explicit ParamStore(DType dt = DType::F32) : dt_(dt) {}

  int intern(const std::string& name, Shape shape, std::int64_t fan_in);
  int find(const std::string& name) const;  // -1 when absent

  const Tensor& tensor(int idx) const;
  void set(int idx, Tensor t);  // shape and dtype must match the slot
  const std::string& name(int idx) const;
  std::int64_t fan_in(int idx) const;  // 0 marks a bias

  int size() const { return static_cast<int>(tensors_.size()); }
  std::int64_t total_elements() const;
  DType dtype() const { return dt_; }

 private:
  DType dt_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::vector<std::int64_t> fan_ins_;
  std::unordered_map<std::string, int> index_;
};

struct ConvSpec {
  int w = -1;
  int b = -1;  // -1 for the bias-free layers
  int stride = 1;
  int pad = 0;
  int groups = 1;
};

struct SkffSpec {
  int n_inputs = 0;
  int channels = 0;
  int reduction = 0;
  int down_w = -1;          // [r, C, 1, 1]
  std::vector<int> up_w;    // per input, [C, r, 1, 1]
};

struct FusionSpec {
  FusionMode mode = FusionMode::Skff;
  SkffSpec skff;         // Skff mode
  ConvSpec concat_proj;  // Concat mode: 1x1, n*C -> C
};

// Residual contextual block: two grouped 3x3 convs, a spatial-attention
// context branch, a 1x1 mix and the outer skip.
struct RcbSpec {
  int channels = 0;
  ConvSpec g1, g2;    // grouped 3x3, no bias
  ConvSpec mask;      // C -> 1, 1x1
  ConvSpec t1, t2;    // C -> C/4 -> C, 1x1
  ConvSpec last;      // C -> C, 1x1
};

struct ResampleSpec {
  int proj = -1;  // 1x1 projection weight
};

struct MrbColumn {
  std::vector<RcbSpec> rcbs;            // one per stream; tensors shared between columns
  std::vector<ResampleSpec> casc_up;    // k: stream k+1 lifted into stream k
  std::vector<FusionSpec> casc_fuse;    // k: 2-input fusion at channels[k]
};

struct MrbSpec {
  std::vector<int> channels;
  std::vector<ResampleSpec> entry_down;           // chained k-1 -> k
  std::vector<MrbColumn> cols;
  std::vector<std::vector<ResampleSpec>> final_up;  // per stream, chained ups to full res
  FusionSpec final_fuse;                          // n-input at channels[0]; absent for 1 stream
};

struct RrgSpec {
  std::vector<MrbSpec> mrbs;
  ConvSpec tail;  // 3x3 with bias
};

struct Model {
  ModelConfig cfg;
  ParamStore ps;
  ConvSpec head;  // 3x3 with bias, in_channels -> channels[0]
  std::vector<RrgSpec> rrgs;
  ConvSpec tail;  // 3x3 with bias, channels[0] -> out_channels
};

Model build_model(const ModelConfig& cfg, DType dt = DType::F32);

// Uniform He-style init, U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
// Convs that end a residual branch (rcb last, rrg tail, model tail) start
// at zero so the freshly built model is the identity map. One stream of
// draws over the store in creation order; the zeroed slots consume none.
void init_params(Model& m, Rng& rng);
void zero_params(Model& m);

void watch_params(const Model& m, Tape& tape);

Tensor conv_apply(const ParamStore& ps, const ConvSpec& cs, const Tensor& x);

// `attention` (optional) receives the stream softmax [N, n_inputs, C].
Tensor skff_forward(const ParamStore& ps, const SkffSpec& spec, const std::vector<Tensor>& inputs,
                    Tensor* attention = nullptr);
Tensor fusion_forward(const ParamStore& ps, const FusionSpec& spec,
                      const std::vector<Tensor>& inputs, Tensor* attention = nullptr);

// `attention` (optional) receives the spatial softmax [N, H*W].
Tensor rcb_forward(const ParamStore& ps, const RcbSpec& spec, const Tensor& x,
                   Tensor* attention = nullptr);

Tensor mrb_forward(const ParamStore& ps, const MrbSpec& spec, const Tensor& x);
Tensor rrg_forward(const ParamStore& ps, const RrgSpec& spec, const Tensor& x);
Tensor model_forward(const Model& m, const Tensor& x);

// Checkpoint files: "ERCK", version, the config, then every parameter as a
// named tensor record in store order.
void save_checkpoint(const Model& m, const std::string& path);
void load_checkpoint(Model& m, const std::string& path);

// the config embedded in a checkpoint, without loading any tensors
ModelConfig read_checkpoint_config(const std::string& path);
// builds the model a checkpoint describes, then fills it in
Model load_checkpoint_model(const std::string& path, DType dt = DType::F32);

}  // namespace enrest
