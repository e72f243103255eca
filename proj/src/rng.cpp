#include "attnpose/rng.hpp"

#include <sstream>

namespace attnpose {

// mt19937_64's text representation is fixed by the standard, so this state
// string round-trips across runs. The Box-Muller spare is appended because
// the normal() stream position depends on it.
std::string Rng::state() const {
  std::ostringstream ss;
  ss << engine_ << ' ' << (have_spare_ ? 1 : 0) << ' ';
  ss.precision(17);
  ss << spare_;
  return ss.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream ss(s);
  int spare_flag = 0;
  ss >> engine_ >> spare_flag >> spare_;
  have_spare_ = spare_flag != 0;
}

}  // namespace attnpose
