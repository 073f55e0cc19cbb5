#include <cctype>
#include <fstream>
#include <sstream>

#include "enrest/config.hpp"
#include "enrest/error.hpp"

namespace enrest {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::int64_t parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::int64_t i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing junk");
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

}  // namespace

bool KeyValues::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string KeyValues::str(const std::string& key, const std::string& dflt) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  used_.insert(key);
  return it->second;
}

std::int64_t KeyValues::integer(const std::string& key, std::int64_t dflt) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  used_.insert(key);
  return parse_integer(key, it->second);
}

double KeyValues::number(const std::string& key, double dflt) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  used_.insert(key);
  return parse_number(key, it->second);
}

std::vector<int> KeyValues::int_list(const std::string& key, std::vector<int> dflt) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  used_.insert(key);
  std::vector<int> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<int>(parse_integer(key, trim(tok))));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

void KeyValues::finish() const {
  for (const auto& [key, value] : kv_)
    if (!used_.count(key)) throw ConfigError("unknown key '" + key + "'");
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int ln = 0;
  while (std::getline(ss, line)) {
    ++ln;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(ln) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(ln) + ": empty key");
    if (!kv.kv_.emplace(key, val).second)
      throw ConfigError("line " + std::to_string(ln) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<PatchStage> parse_patch_schedule(const std::string& s) {
  std::vector<PatchStage> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    const std::size_t colon = tok.find(':');
    if (colon == std::string::npos)
      throw ConfigError("key 'train.patch_schedule': expected frac:size, got '" + tok + "'");
    PatchStage st;
    st.start_frac = parse_number("train.patch_schedule", trim(tok.substr(0, colon)));
    st.size = static_cast<int>(parse_integer("train.patch_schedule", trim(tok.substr(colon + 1))));
    out.push_back(st);
  }
  if (out.empty()) throw ConfigError("key 'train.patch_schedule': empty schedule");
  return out;
}

RunConfig make_run_config(KeyValues& kv) {
  RunConfig rc;
  rc.seed = static_cast<std::uint64_t>(kv.integer("seed", 1));

  rc.data.synth.task = parse_task(kv.str("data.task", "denoise"));
  rc.data.synth.noise_sigma = kv.number("data.noise_sigma", 25.0);
  rc.data.synth.sr_factor = static_cast<int>(kv.integer("data.sr_factor", 2));
  rc.data.target_dir = kv.str("data.target_dir", "");
  rc.data.input_dir = kv.str("data.input_dir", "");
  rc.val = rc.data;
  rc.val.target_dir = kv.str("val.target_dir", "");
  rc.val.input_dir = kv.str("val.input_dir", "");

  const bool dual = rc.data.synth.task == Task::DeblurDp;
  rc.model.in_channels = static_cast<int>(kv.integer("model.in_channels", dual ? 6 : 3));
  rc.model.out_channels = static_cast<int>(kv.integer("model.out_channels", 3));
  rc.model.n_rrg = static_cast<int>(kv.integer("model.n_rrg", 4));
  rc.model.n_mrb = static_cast<int>(kv.integer("model.n_mrb", 2));
  rc.model.channels = kv.int_list("model.channels", {80, 120, 180});
  // stream count follows the channel list unless pinned explicitly
  rc.model.n_streams = static_cast<int>(
      kv.integer("model.n_streams", static_cast<std::int64_t>(rc.model.channels.size())));
  rc.model.n_cols = static_cast<int>(kv.integer("model.n_cols", 2));
  rc.model.groups = static_cast<int>(kv.integer("model.groups", 2));
  rc.model.fusion = parse_fusion_mode(kv.str("model.fusion", "skff"));

  rc.train.total_iters = kv.integer("train.total_iters", 300000);
  rc.train.batch_size = static_cast<int>(kv.integer("train.batch_size", 64));
  rc.train.lr_init = kv.number("train.lr_init", 2e-4);
  rc.train.lr_min = kv.number("train.lr_min", 1e-6);
  rc.train.beta1 = kv.number("train.beta1", 0.9);
  rc.train.beta2 = kv.number("train.beta2", 0.999);
  rc.train.adam_eps = kv.number("train.adam_eps", 1e-8);
  rc.train.patch_schedule =
      parse_patch_schedule(kv.str("train.patch_schedule", "0:128,0.25:144,0.5:192,0.75:224"));
  rc.train.charbonnier_mode =
      parse_charbonnier_mode(kv.str("train.charbonnier_mode", "per_pixel_mean"));
  rc.train.charbonnier_eps = kv.number("train.charbonnier_eps", 1e-3);
  rc.train.val_every = kv.integer("train.val_every", 0);
  rc.train.seed = rc.seed;

  rc.out_dir = kv.str("out.dir", "run");

  kv.finish();
  rc.model.validate();
  rc.train.validate(rc.model.required_multiple());
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  KeyValues kv = parse_config_file(path);
  return make_run_config(kv);
}

}  // namespace enrest
