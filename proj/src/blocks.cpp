#include "enrest/blocks.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "enrest/error.hpp"
#include "enrest/ops.hpp"
#include "enrest/serialize.hpp"

namespace enrest {

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Skff: return "skff";
    case FusionMode::Sum: return "sum";
    case FusionMode::Concat: return "concat";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "skff") return FusionMode::Skff;
  if (s == "sum") return FusionMode::Sum;
  if (s == "concat") return FusionMode::Concat;
  throw ConfigError("unknown fusion mode '" + s + "' (expected skff, sum or concat)");
}

int skff_reduction(int channels) { return std::max(channels / 8, 4); }

int ModelConfig::required_multiple() const { return 1 << (n_streams - 1); }

void ModelConfig::validate() const {
  auto bad = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (in_channels < 1 || out_channels < 1) bad("channel counts must be positive");
  if (in_channels != out_channels && in_channels != 2 * out_channels)
    bad("in_channels must equal out_channels, or twice it when the input holds two views");
  if (n_rrg < 1 || n_mrb < 1 || n_cols < 1 || n_streams < 1) bad("block counts must be positive");
  if (n_streams > 6) bad("more than 6 streams is unsupported");
  if (groups < 1) bad("groups must be positive");
  if (static_cast<int>(channels.size()) != n_streams)
    bad("channels lists " + std::to_string(channels.size()) + " widths for " +
        std::to_string(n_streams) + " streams");
  for (int c : channels) {
    if (c < 4 || c % 4 != 0)
      bad("stream width " + std::to_string(c) + " must be a positive multiple of 4");
    if (c % groups != 0)
      bad("stream width " + std::to_string(c) + " not divisible by groups " +
          std::to_string(groups));
  }
}

int ParamStore::intern(const std::string& name, Shape shape, std::int64_t fan_in) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    const int idx = it->second;
    if (tensors_[static_cast<std::size_t>(idx)].shape() != shape ||
        fan_ins_[static_cast<std::size_t>(idx)] != fan_in)
      throw ShapeError("parameter '" + name + "' reused with a different shape");
    return idx;
  }
  const int idx = size();
  names_.push_back(name);
  tensors_.push_back(Tensor::zeros(std::move(shape), dt_));
  fan_ins_.push_back(fan_in);
  index_.emplace(name, idx);
  return idx;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

const Tensor& ParamStore::tensor(int idx) const {
  if (idx < 0 || idx >= size()) throw ShapeError("param index " + std::to_string(idx) + " out of range");
  return tensors_[static_cast<std::size_t>(idx)];
}

void ParamStore::set(int idx, Tensor t) {
  const Tensor& cur = tensor(idx);
  if (t.shape() != cur.shape() || t.dtype() != dt_)
    throw ShapeError("set: tensor does not match slot '" + names_[static_cast<std::size_t>(idx)] +
                     "' " + shape_str(cur.shape()));
  tensors_[static_cast<std::size_t>(idx)] = std::move(t);
}

const std::string& ParamStore::name(int idx) const {
  tensor(idx);  // bounds check
  return names_[static_cast<std::size_t>(idx)];
}

std::int64_t ParamStore::fan_in(int idx) const {
  tensor(idx);
  return fan_ins_[static_cast<std::size_t>(idx)];
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const Tensor& t : tensors_) n += t.numel();
  return n;
}

namespace {

ConvSpec make_conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k, int groups,
                   bool bias) {
  ConvSpec cs;
  cs.w = ps.intern(prefix + ".w", {cout, cin / groups, k, k},
                   static_cast<std::int64_t>(cin / groups) * k * k);
  if (bias) cs.b = ps.intern(prefix + ".b", {cout}, 0);
  cs.stride = 1;
  cs.pad = k / 2;
  cs.groups = groups;
  return cs;
}

SkffSpec make_skff(ParamStore& ps, const std::string& prefix, int n, int c) {
  SkffSpec s;
  s.n_inputs = n;
  s.channels = c;
  s.reduction = skff_reduction(c);
  s.down_w = ps.intern(prefix + ".down.w", {s.reduction, c, 1, 1}, c);
  for (int i = 0; i < n; ++i)
    s.up_w.push_back(
        ps.intern(prefix + ".up" + std::to_string(i) + ".w", {c, s.reduction, 1, 1}, s.reduction));
  return s;
}

FusionSpec make_fusion(ParamStore& ps, const std::string& prefix, int n, int c, FusionMode mode) {
  FusionSpec f;
  f.mode = mode;
  if (mode == FusionMode::Skff)
    f.skff = make_skff(ps, prefix + ".skff", n, c);
  else if (mode == FusionMode::Concat)
    f.concat_proj = make_conv(ps, prefix + ".proj", n * c, c, 1, 1, false);
  return f;
}

RcbSpec make_rcb(ParamStore& ps, const std::string& prefix, int c, int groups) {
  RcbSpec r;
  r.channels = c;
  r.g1 = make_conv(ps, prefix + ".g1", c, c, 3, groups, false);
  r.g2 = make_conv(ps, prefix + ".g2", c, c, 3, groups, false);
  r.mask = make_conv(ps, prefix + ".mask", c, 1, 1, 1, false);
  r.t1 = make_conv(ps, prefix + ".t1", c, c / 4, 1, 1, false);
  r.t2 = make_conv(ps, prefix + ".t2", c / 4, c, 1, 1, false);
  r.last = make_conv(ps, prefix + ".last", c, c, 1, 1, false);
  return r;
}

ResampleSpec make_resample(ParamStore& ps, const std::string& prefix, int cin, int cout) {
  ResampleSpec r;
  r.proj = ps.intern(prefix + ".proj", {cout, cin, 1, 1}, cin);
  return r;
}

MrbSpec make_mrb(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg) {
  MrbSpec ms;
  ms.channels = cfg.channels;
  const int n = cfg.n_streams;
  for (int k = 1; k < n; ++k)
    ms.entry_down.push_back(make_resample(ps, prefix + ".down" + std::to_string(k),
                                          cfg.channels[static_cast<std::size_t>(k - 1)],
                                          cfg.channels[static_cast<std::size_t>(k)]));
  for (int col = 0; col < cfg.n_cols; ++col) {
    MrbColumn mc;
    // same prefix every column: the filter banks are shared between columns
    for (int k = 0; k < n; ++k)
      mc.rcbs.push_back(make_rcb(ps, prefix + ".s" + std::to_string(k) + ".rcb",
                                 cfg.channels[static_cast<std::size_t>(k)], cfg.groups));
    const std::string cp = prefix + ".col" + std::to_string(col);
    for (int k = 0; k + 1 < n; ++k) {
      mc.casc_up.push_back(make_resample(ps, cp + ".up" + std::to_string(k),
                                         cfg.channels[static_cast<std::size_t>(k + 1)],
                                         cfg.channels[static_cast<std::size_t>(k)]));
      mc.casc_fuse.push_back(make_fusion(ps, cp + ".fuse" + std::to_string(k), 2,
                                         cfg.channels[static_cast<std::size_t>(k)], cfg.fusion));
    }
    ms.cols.push_back(std::move(mc));
  }
  ms.final_up.resize(static_cast<std::size_t>(n));
  if (n > 1) {
    for (int k = 1; k < n; ++k)
      for (int m = 0; m < k; ++m)
        ms.final_up[static_cast<std::size_t>(k)].push_back(
            make_resample(ps, prefix + ".final.s" + std::to_string(k) + ".up" + std::to_string(m),
                          cfg.channels[static_cast<std::size_t>(k - m)],
                          cfg.channels[static_cast<std::size_t>(k - m - 1)]));
    ms.final_fuse = make_fusion(ps, prefix + ".final", n, cfg.channels[0], cfg.fusion);
  }
  return ms;
}

}  // namespace

Model build_model(const ModelConfig& cfg, DType dt) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.ps = ParamStore(dt);
  m.head = make_conv(m.ps, "head", cfg.in_channels, cfg.channels[0], 3, 1, true);
  for (int i = 0; i < cfg.n_rrg; ++i) {
    const std::string rp = "rrg" + std::to_string(i);
    RrgSpec rrg;
    for (int j = 0; j < cfg.n_mrb; ++j)
      rrg.mrbs.push_back(make_mrb(m.ps, rp + ".mrb" + std::to_string(j), cfg));
    rrg.tail = make_conv(m.ps, rp + ".tail", cfg.channels[0], cfg.channels[0], 3, 1, true);
    m.rrgs.push_back(std::move(rrg));
  }
  m.tail = make_conv(m.ps, "tail", cfg.channels[0], cfg.out_channels, 3, 1, true);
  return m;
}

namespace {

// convs whose output is added back onto a skip path; starting them at zero
// makes every block (and the whole model) begin as the identity map, which
// keeps the first iterations near the input instead of fighting a huge
// random residual
bool ends_residual(const std::string& name) {
  auto has_suffix = [&](const char* s) {
    const std::size_t n = std::strlen(s);
    return name.size() >= n && name.compare(name.size() - n, n, s) == 0;
  };
  return name == "tail.w" || has_suffix(".tail.w") || has_suffix(".last.w");
}

}  // namespace

void init_params(Model& m, Rng& rng) {
  for (int i = 0; i < m.ps.size(); ++i) {
    const Tensor& cur = m.ps.tensor(i);
    Tensor t = Tensor::zeros(cur.shape(), cur.dtype());
    const std::int64_t fan = m.ps.fan_in(i);
    if (fan > 0 && !ends_residual(m.ps.name(i))) {
      const double b = std::sqrt(6.0 / static_cast<double>(fan));
      for (std::int64_t e = 0; e < t.numel(); ++e) t.set(e, rng.uniform(-b, b));
    }
    m.ps.set(i, std::move(t));
  }
}

void zero_params(Model& m) {
  for (int i = 0; i < m.ps.size(); ++i)
    m.ps.set(i, Tensor::zeros(m.ps.tensor(i).shape(), m.ps.dtype()));
}

void watch_params(const Model& m, Tape& tape) {
  for (int i = 0; i < m.ps.size(); ++i) tape.watch(m.ps.tensor(i));
}

Tensor conv_apply(const ParamStore& ps, const ConvSpec& cs, const Tensor& x) {
  ConvParams p;
  p.weight = ps.tensor(cs.w);
  if (cs.b >= 0) p.bias = ps.tensor(cs.b);
  p.stride = cs.stride;
  p.pad = cs.pad;
  p.groups = cs.groups;
  return conv2d(x, p);
}

Tensor skff_forward(const ParamStore& ps, const SkffSpec& spec, const std::vector<Tensor>& inputs,
                    Tensor* attention) {
  if (static_cast<int>(inputs.size()) != spec.n_inputs || spec.n_inputs < 2)
    throw ShapeError("skff_forward: expected " + std::to_string(spec.n_inputs) + " inputs, got " +
                     std::to_string(inputs.size()));
  const Tensor& first = inputs[0];
  if (first.rank() != 4 || first.dim(1) != spec.channels)
    throw ShapeError("skff_forward: inputs must be [N," + std::to_string(spec.channels) +
                     ",H,W], got " + shape_str(first.shape()));
  for (const Tensor& in : inputs) {
    check_same_dtype(first, in, "skff_forward");
    check_same_shape(first, in, "skff_forward");
  }
  const std::int64_t n = first.dim(0);
  const std::int64_t c = first.dim(1);

  Tensor total = inputs[0];
  for (std::size_t i = 1; i < inputs.size(); ++i) total = add(total, inputs[i]);
  Tensor stat = global_avg_pool(total);  // [N,C,1,1]

  ConvParams down;
  down.weight = ps.tensor(spec.down_w);
  Tensor z = conv2d(stat, down);  // [N,r,1,1], deliberately no activation

  std::vector<Tensor> logits;
  logits.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ConvParams up;
    up.weight = ps.tensor(spec.up_w[i]);
    logits.push_back(reshape(conv2d(z, up), {n, 1, c}));
  }
  // softmax across the input streams, independently per (sample, channel)
  Tensor att = softmax(concat(logits, 1), 1);  // [N, n_inputs, C]
  if (attention) *attention = att;

  Tensor out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor ai = reshape(slice(att, 1, static_cast<std::int64_t>(i), 1), {n, c, 1, 1});
    Tensor weighted = broadcast_mul(inputs[i], ai);
    out = i == 0 ? weighted : add(out, weighted);
  }
  return out;
}

Tensor fusion_forward(const ParamStore& ps, const FusionSpec& spec,
                      const std::vector<Tensor>& inputs, Tensor* attention) {
  if (inputs.empty()) throw ShapeError("fusion_forward: no inputs");
  switch (spec.mode) {
    case FusionMode::Skff:
      return skff_forward(ps, spec.skff, inputs, attention);
    case FusionMode::Sum: {
      Tensor out = inputs[0];
      for (std::size_t i = 1; i < inputs.size(); ++i) out = add(out, inputs[i]);
      return out;
    }
    case FusionMode::Concat:
      return conv_apply(ps, spec.concat_proj, concat(inputs, 1));
  }
  throw ShapeError("fusion_forward: bad mode");
}

Tensor rcb_forward(const ParamStore& ps, const RcbSpec& spec, const Tensor& x, Tensor* attention) {
  if (x.rank() != 4 || x.dim(1) != spec.channels)
    throw ShapeError("rcb_forward: expected [N," + std::to_string(spec.channels) + ",H,W], got " +
                     shape_str(x.shape()));
  Tensor fb = conv_apply(ps, spec.g2, relu(conv_apply(ps, spec.g1, x)));

  // context branch: one spatial softmax pools fb into a per-channel
  // descriptor, a bottleneck transforms it, and it is added back everywhere
  Tensor mask = conv_apply(ps, spec.mask, fb);  // [N,1,H,W]
  Tensor att = softmax(reshape(mask, {fb.dim(0), fb.dim(2) * fb.dim(3)}), 1);
  if (attention) *attention = att;
  Tensor fd = weighted_spatial_pool(fb, att);
  Tensor fe = conv_apply(ps, spec.t2, relu(conv_apply(ps, spec.t1, fd)));
  Tensor cm = broadcast_add(fb, fe);

  return add(x, conv_apply(ps, spec.last, cm));
}

Tensor mrb_forward(const ParamStore& ps, const MrbSpec& spec, const Tensor& x) {
  const int n = static_cast<int>(spec.channels.size());
  std::vector<Tensor> s(static_cast<std::size_t>(n));
  s[0] = x;
  for (int k = 1; k < n; ++k) {
    ResampleParams rp{ps.tensor(spec.entry_down[static_cast<std::size_t>(k - 1)].proj)};
    s[static_cast<std::size_t>(k)] = downsample2x(s[static_cast<std::size_t>(k - 1)], rp);
  }
  for (const MrbColumn& col : spec.cols) {
    for (int k = 0; k < n; ++k)
      s[static_cast<std::size_t>(k)] =
          rcb_forward(ps, col.rcbs[static_cast<std::size_t>(k)], s[static_cast<std::size_t>(k)]);
    // lift each coarser stream into the next finer one, coarsest pair first,
    // so the already-fused coarse result feeds the next fusion up
    for (int k = n - 2; k >= 0; --k) {
      ResampleParams rp{ps.tensor(col.casc_up[static_cast<std::size_t>(k)].proj)};
      Tensor lifted = upsample2x(s[static_cast<std::size_t>(k + 1)], rp);
      s[static_cast<std::size_t>(k)] = fusion_forward(
          ps, col.casc_fuse[static_cast<std::size_t>(k)], {s[static_cast<std::size_t>(k)], lifted});
    }
  }
  Tensor fused;
  if (n == 1) {
    fused = s[0];
  } else {
    std::vector<Tensor> feats;
    feats.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      Tensor f = s[static_cast<std::size_t>(k)];
      for (const ResampleSpec& rs : spec.final_up[static_cast<std::size_t>(k)])
        f = upsample2x(f, ResampleParams{ps.tensor(rs.proj)});
      feats.push_back(f);
    }
    fused = fusion_forward(ps, spec.final_fuse, feats);
  }
  return add(fused, x);
}

Tensor rrg_forward(const ParamStore& ps, const RrgSpec& spec, const Tensor& x) {
  Tensor y = x;
  for (const MrbSpec& mrb : spec.mrbs) y = mrb_forward(ps, mrb, y);
  y = conv_apply(ps, spec.tail, y);
  return add(y, x);
}

Tensor model_forward(const Model& m, const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != m.cfg.in_channels)
    throw ShapeError("model_forward: expected [N," + std::to_string(m.cfg.in_channels) +
                     ",H,W], got " + shape_str(x.shape()));
  if (x.dtype() != m.ps.dtype())
    throw ShapeError(std::string("model_forward: ") + dtype_name(x.dtype()) + " input into " +
                     dtype_name(m.ps.dtype()) + " model");
  const int mult = m.cfg.required_multiple();
  if (x.dim(2) % mult != 0 || x.dim(3) % mult != 0)
    throw ShapeError("model_forward: H and W must be multiples of " + std::to_string(mult) +
                     ", got " + shape_str(x.shape()));
  Tensor y = conv_apply(m.ps, m.head, x);
  for (const RrgSpec& rrg : m.rrgs) y = rrg_forward(m.ps, rrg, y);
  Tensor res = conv_apply(m.ps, m.tail, y);
  Tensor base = x;
  if (m.cfg.in_channels != m.cfg.out_channels) {
    // paired-view input: the restored image rides on the view average
    Tensor a = slice(x, 1, 0, m.cfg.out_channels);
    Tensor b = slice(x, 1, m.cfg.out_channels, m.cfg.out_channels);
    base = scale(add(a, b), 0.5);
  }
  return add(base, res);
}

namespace {

constexpr char kCkptMagic[4] = {'E', 'R', 'C', 'K'};
constexpr std::uint8_t kCkptVersion = 1;

void write_config(std::ostream& s, const ModelConfig& c) {
  io::write_u32(s, static_cast<std::uint32_t>(c.in_channels));
  io::write_u32(s, static_cast<std::uint32_t>(c.out_channels));
  io::write_u32(s, static_cast<std::uint32_t>(c.n_rrg));
  io::write_u32(s, static_cast<std::uint32_t>(c.n_mrb));
  io::write_u32(s, static_cast<std::uint32_t>(c.n_streams));
  io::write_u32(s, static_cast<std::uint32_t>(c.n_cols));
  io::write_u32(s, static_cast<std::uint32_t>(c.groups));
  io::write_u8(s, static_cast<std::uint8_t>(c.fusion));
  io::write_u32(s, static_cast<std::uint32_t>(c.channels.size()));
  for (int ch : c.channels) io::write_u32(s, static_cast<std::uint32_t>(ch));
}

ModelConfig read_config(std::istream& s) {
  ModelConfig c;
  c.in_channels = static_cast<int>(io::read_u32(s));
  c.out_channels = static_cast<int>(io::read_u32(s));
  c.n_rrg = static_cast<int>(io::read_u32(s));
  c.n_mrb = static_cast<int>(io::read_u32(s));
  c.n_streams = static_cast<int>(io::read_u32(s));
  c.n_cols = static_cast<int>(io::read_u32(s));
  c.groups = static_cast<int>(io::read_u32(s));
  const std::uint8_t fm = io::read_u8(s);
  if (fm > 2) throw IOError("checkpoint: bad fusion mode tag");
  c.fusion = static_cast<FusionMode>(fm);
  const std::uint32_t nch = io::read_u32(s);
  if (nch == 0 || nch > 64) throw IOError("checkpoint: bad channel list");
  c.channels.clear();
  for (std::uint32_t i = 0; i < nch; ++i) c.channels.push_back(static_cast<int>(io::read_u32(s)));
  return c;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path + " for writing");
  io::write_bytes(f, kCkptMagic, 4);
  io::write_u8(f, kCkptVersion);
  write_config(f, m.cfg);
  io::write_u32(f, static_cast<std::uint32_t>(m.ps.size()));
  for (int i = 0; i < m.ps.size(); ++i) {
    const std::string& nm = m.ps.name(i);
    io::write_u16(f, static_cast<std::uint16_t>(nm.size()));
    io::write_bytes(f, nm.data(), nm.size());
    io::save_tensor(f, m.ps.tensor(i));
  }
  f.flush();
  if (!f) throw IOError("write failed: " + path);
}

void load_checkpoint(Model& m, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path);
  char magic[4];
  io::read_bytes(f, magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0) throw IOError("not a checkpoint file: " + path);
  const std::uint8_t ver = io::read_u8(f);
  if (ver != kCkptVersion)
    throw IOError("checkpoint version " + std::to_string(ver) + " unsupported");
  const ModelConfig fc = read_config(f);
  if (!(fc == m.cfg))
    throw IOError("checkpoint " + path + " was written for a different architecture");
  const std::uint32_t count = io::read_u32(f);
  if (static_cast<int>(count) != m.ps.size())
    throw IOError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                  std::to_string(m.ps.size()));
  std::vector<char> seen(static_cast<std::size_t>(m.ps.size()), 0);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint16_t len = io::read_u16(f);
    std::string nm(len, '\0');
    io::read_bytes(f, nm.data(), len);
    const int idx = m.ps.find(nm);
    if (idx < 0) throw IOError("checkpoint parameter '" + nm + "' not in this model");
    if (seen[static_cast<std::size_t>(idx)]) throw IOError("duplicate parameter '" + nm + "'");
    seen[static_cast<std::size_t>(idx)] = 1;
    Tensor t = io::load_tensor(f);
    if (t.dtype() != m.ps.dtype()) t = t.astype(m.ps.dtype());
    if (t.shape() != m.ps.tensor(idx).shape())
      throw IOError("checkpoint parameter '" + nm + "' has shape " + shape_str(t.shape()) +
                    ", expected " + shape_str(m.ps.tensor(idx).shape()));
    m.ps.set(idx, std::move(t));
  }
}

ModelConfig read_checkpoint_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOError("cannot open " + path);
  char magic[4];
  io::read_bytes(f, magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0) throw IOError("not a checkpoint file: " + path);
  const std::uint8_t ver = io::read_u8(f);
  if (ver != kCkptVersion)
    throw IOError("checkpoint version " + std::to_string(ver) + " unsupported");
  ModelConfig cfg = read_config(f);
  cfg.validate();
  return cfg;
}

Model load_checkpoint_model(const std::string& path, DType dt) {
  Model m = build_model(read_checkpoint_config(path), dt);
  load_checkpoint(m, path);
  return m;
}

}  // namespace enrest
