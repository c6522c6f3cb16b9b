#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace seqdiff {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Explicit random stream. Streams derived with `derive` are independent of
/// how many draws the parent has made, so per-sequence and per-frame noise
/// is reproducible under any batching.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(splitmix64(splitmix64(seed ^ splitmix64(a + 1)) ^ splitmix64(b + 0x51ed27ULL)));
  }
  Rng derive(std::uint64_t a, std::uint64_t b = 0) const { return stream(seed_, a, b); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  std::string save() const {
    std::ostringstream os;
    os << seed_ << ' ' << engine_ << ' ' << normal_ << ' ' << uniform_;
    return os.str();
  }
  void load(const std::string& s) {
    std::istringstream is(s);
    is >> seed_ >> engine_ >> normal_ >> uniform_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace seqdiff
