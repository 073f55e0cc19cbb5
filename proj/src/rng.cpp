#include "enrest/rng.hpp"

#include <cmath>
#include <sstream>

#include "enrest/error.hpp"

namespace enrest {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::int64_t Rng::index(std::int64_t n) {
  // multiply-shift keeps the draw count fixed (no rejection loop)
  auto wide = static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(n);
  return static_cast<std::int64_t>(wide >> 64);
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
  os.precision(17);
  os << spare_;
  return os.str();
}

void Rng::load_state(const std::string& s) {
  std::istringstream is(s);
  int spare_flag = 0;
  if (!(is >> eng_ >> spare_flag >> spare_)) throw IOError("rng: unreadable state string");
  has_spare_ = spare_flag != 0;
}

}  // namespace enrest
