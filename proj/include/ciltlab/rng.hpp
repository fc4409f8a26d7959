#pragma once

#include <cmath>
#include <cstdint>

namespace ciltlab {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

// Marsaglia-Tsang ziggurat tables (128 layers) for the standard normal.
struct NormalTables {
  uint32_t kn[128];
  double wn[128];
  double fn[128];
  NormalTables() {
    const double m1 = 2147483648.0;
    double dn = 3.442619855899;
    double tn = dn;
    const double vn = 9.91256303526217e-3;
    double q = vn / std::exp(-0.5 * dn * dn);
    kn[0] = static_cast<uint32_t>((dn / q) * m1);
    kn[1] = 0;
    wn[0] = q / m1;
    wn[127] = dn / m1;
    fn[0] = 1.0;
    fn[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = static_cast<uint32_t>((dn / tn) * m1);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m1;
    }
  }
};

inline const NormalTables& normal_tables() {
  static const NormalTables t;
  return t;
}

}  // namespace detail

// xoshiro256++ with ziggurat Gaussians. Streams are derived from
// (seed, stream index) so any parallel schedule draws the same numbers.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) {
    uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in (0,1); never returns 0.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double gaussian() {
    const auto& t = detail::normal_tables();
    const double r = 3.442619855899;
    for (;;) {
      int32_t hz = static_cast<int32_t>(next_u64() & 0xffffffffULL);
      uint32_t iz = static_cast<uint32_t>(hz) & 127u;
      uint32_t ahz = hz < 0 ? static_cast<uint32_t>(-static_cast<int64_t>(hz))
                            : static_cast<uint32_t>(hz);
      if (ahz < t.kn[iz]) return hz * t.wn[iz];
      double x = hz * t.wn[iz];
      if (iz == 0) {
        // tail beyond r
        double xx, yy;
        do {
          xx = -std::log(uniform()) / r;
          yy = -std::log(uniform());
        } while (yy + yy < xx * xx);
        return hz > 0 ? r + xx : -(r + xx);
      }
      if (t.fn[iz] + uniform() * (t.fn[iz - 1] - t.fn[iz]) <
          std::exp(-0.5 * x * x))
        return x;
      // reject and redraw
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace ciltlab
