#ifndef TDSEG_COMMON_HPP
#define TDSEG_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace tdseg {

// Error with a short machine-parsable code ("shape", "io", "config", "data",
// "nan", "usage") plus a human message. The CLI prints "error[<code>]: msg"
// and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

inline void require(bool cond, const std::string& code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

// All randomness flows through std::mt19937 so a run is a pure function of
// its seed within one build.
using Rng = std::mt19937;

inline float uniform_real(Rng& rng, float lo, float hi) {
  std::uniform_real_distribution<float> d(lo, hi);
  return d(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

inline float normal_real(Rng& rng, float mean, float stddev) {
  std::normal_distribution<float> d(mean, stddev);
  return d(rng);
}

// splitmix64-style mix for deriving stream seeds (per sample, per epoch)
// from one master seed without correlated streams.
inline std::uint32_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return static_cast<std::uint32_t>(z ^ (z >> 32));
}

}  // namespace tdseg

#endif
