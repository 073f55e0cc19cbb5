// Run configuration: line-oriented `section.key = value` text. Chosen over
// flag soup so a run is reproducible from one checked-in file.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "enrest/blocks.hpp"
#include "enrest/data.hpp"
#include "enrest/train.hpp"

namespace enrest {

// Parsed key=value pairs. Typed getters mark keys consumed; finish() rejects
// whatever is left so a misspelled key fails loudly instead of silently
// falling back to a default.
class KeyValues {
 public:
  bool has(const std::string& key) const;

  std::string str(const std::string& key, const std::string& dflt);
  std::int64_t integer(const std::string& key, std::int64_t dflt);
  double number(const std::string& key, double dflt);
  std::vector<int> int_list(const std::string& key, std::vector<int> dflt);

  void finish() const;  // ConfigError naming any unconsumed key

 private:
  friend KeyValues parse_config_text(const std::string& text);
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  DatasetSpec val;  // empty target_dir: no held-out set
  std::string out_dir = "run";
  std::uint64_t seed = 1;
};

// "0:128,0.25:144,0.5:192,0.75:224"
std::vector<PatchStage> parse_patch_schedule(const std::string& s);

RunConfig make_run_config(KeyValues& kv);
RunConfig load_run_config(const std::string& path);

}  // namespace enrest
