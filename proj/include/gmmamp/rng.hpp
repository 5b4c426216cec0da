#pragma once

// Deterministic random streams. std::normal_distribution is
// implementation-defined, so Gaussians come from an explicit Box-Muller
// transform on top of mt19937_64; a given seed produces the same stream on
// every platform and standard library.
//
// Sub-streams are derived by hashing (master seed, tag, index). Everything
// that consumes randomness independently (each noise column, each Monte
// Carlo chunk, each restart) gets its own derived seed, which is what makes
// results independent of scheduling and worker count.

#include <Eigen/Core>

#include <cstdint>
#include <cmath>
#include <random>

namespace gmmamp {

inline constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Fixed tags for the independent streams derived from one master seed.
enum StreamTag : std::uint64_t {
  kStreamCenters = 1,
  kStreamLabels = 2,
  kStreamNoiseColumn = 3,
  kStreamAmpInit = 4,
  kStreamMcChunk = 5,
  kStreamKmeans = 6,
  kStreamMatrixSe = 7,
  kStreamBethe = 8,
  kStreamGaussianAmpInit = 9,
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  return mix64(mix64(master, tag), index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    const int k = static_cast<int>(uniform01() * n);
    return k < n ? k : n - 1;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline void fill_normal(Rng& rng, Eigen::Ref<Eigen::MatrixXd> out) {
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = rng.normal();
}

}  // namespace gmmamp
