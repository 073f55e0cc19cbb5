#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace enrest {

// Deterministic RNG used everywhere randomness is needed; identical seeds
// give identical draw streams within one build. Distributions are derived
// from raw engine words by hand so no implementation-defined <random>
// distribution sneaks into checkpointable state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the second value of each pair is cached
  double normal();

  // uniform index in [0, n)
  std::int64_t index(std::int64_t n);

  bool coin() { return (eng_() & 1ull) != 0; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(index(static_cast<std::int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const;
  void load_state(const std::string& s);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace enrest
