#pragma once

// Random streams used everywhere in the library.
//
// Generator: xoshiro256** (Blackman & Vigna), with its 256-bit state filled
// by SplitMix64 from a key derived from (seed, stream). Every derived
// quantity (bounded integers, uniforms, normals) is computed in-repo so a
// given RngSpec yields the same sequence on every platform; the standard
// <random> distributions are implementation-defined and are not used.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

namespace rerand {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a ^ (b * 0xd1b54a32d192ed03ULL);
  std::uint64_t out = splitmix64(s);
  return out ^ splitmix64(s);
}

/// Seed record: identical (seed, stream) pairs give identical sequences.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Independent sub-stream for replication or worker `index`.
  constexpr RngSpec child(std::uint64_t index) const noexcept {
    return RngSpec{seed, mix64(stream + 0x632be59bd9b4e019ULL, index + 1)};
  }

  friend constexpr bool operator==(const RngSpec&, const RngSpec&) = default;
};

inline void to_json(nlohmann::json& j, const RngSpec& spec) {
  j = nlohmann::json{{"seed", spec.seed}, {"stream", spec.stream}, {"generator", "xoshiro256**/splitmix64"}};
}

inline void from_json(const nlohmann::json& j, RngSpec& spec) {
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.stream = j.value("stream", std::uint64_t{0});
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(RngSpec spec = {}) : spec_(spec) {
    std::uint64_t key = mix64(spec.seed, spec.stream);
    for (auto& word : state_) {
      word = splitmix64(key);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  const RngSpec& spec() const noexcept { return spec_; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-and-reject).
  std::uint64_t bounded(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal deviate (Box-Muller, both values used).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Student t deviate with integer degrees of freedom.
  double student_t(int dof) noexcept {
    const double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / dof);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  RngSpec spec_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rerand
