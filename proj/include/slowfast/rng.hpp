#pragma once

// Counter-based Philox4x64-10 generator and a standard-normal stream built
// on it. A stream is addressed by (master seed, stream index), so every
// trial of an ensemble draws the same numbers regardless of scheduling.

#include <array>
#include <cmath>
#include <cstdint>

namespace slowfast::rng {

class Philox4x64 {
 public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter c, Key k) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += kWeyl0;
        k[1] += kWeyl1;
      }
      std::uint64_t hi0, lo0, hi1, lo1;
      mulhilo(kMul0, c[0], hi0, lo0);
      mulhilo(kMul1, c[2], hi1, lo1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
  }

 private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
  }
};

class NormalStream {
 public:
  static constexpr std::uint64_t kKeyTag = 0x736C6F7766617374ULL;

  NormalStream(std::uint64_t master_seed, std::uint64_t stream)
      : key_{master_seed, kKeyTag}, stream_(stream) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (used_ == 4) refill();
    return to_unit(block_[std::size_t(used_++)]);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t blocks_used() const { return counter_; }

 private:
  static double to_unit(std::uint64_t u) {
    return (double(u >> 11) + 0.5) * 0x1.0p-53;
  }
  void refill() {
    block_ = Philox4x64::block({counter_++, stream_, 0, 0}, key_);
    used_ = 0;
  }

  Philox4x64::Key key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Philox4x64::Counter block_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace slowfast::rng
