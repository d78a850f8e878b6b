#include "dhns/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace dhns {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : state_) {
    word = mix64(x);
    x += 0x9e3779b97f4a7c15ULL;
  }
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = std::rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below: empty range");
  if (n == 1) return 0;
  const int bits = std::bit_width(n - 1);
  for (;;) {
    const std::uint64_t x = next_u64() >> (64 - bits);
    if (x < n) return x;
  }
}

namespace {

constexpr int kLayers = 256;
constexpr double kTailStart = 3.6541528853610088;
constexpr double kLayerArea = 0.00492867323399;

struct Ziggurat {
  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  Ziggurat() {
    double f = std::exp(-0.5 * kTailStart * kTailStart);
    x[0] = kLayerArea / f;
    x[1] = kTailStart;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const Ziggurat& ziggurat() {
  static const Ziggurat z;
  return z;
}

}  // namespace

double Rng::normal() {
  const Ziggurat& z = ziggurat();
  for (;;) {
    const std::uint64_t bits = next_u64();
    const auto layer = static_cast<int>(bits & 0xff);
    // Signed uniform in (-1, 1) from the top 53 bits.
    const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    if (std::abs(u) < z.ratio[layer]) return u * z.x[layer];
    if (layer == 0) {
      double a, b;
      do {
        a = -std::log(1.0 - uniform()) / kTailStart;
        b = -std::log(1.0 - uniform());
      } while (b + b < a * a);
      return u < 0.0 ? -kTailStart - a : kTailStart + a;
    }
    const double cand = u * z.x[layer];
    const double f0 = std::exp(-0.5 * (z.x[layer] * z.x[layer] - cand * cand));
    const double f1 = std::exp(-0.5 * (z.x[layer + 1] * z.x[layer + 1] - cand * cand));
    if (f1 + uniform() * (f0 - f1) < 1.0) return cand;
  }
}

Vec Rng::normal_vec(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Rng Rng::substream(std::uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(tag + 1))); }

Rng Rng::substream(std::uint64_t tag_a, std::uint64_t tag_b) const {
  return substream(tag_a).substream(tag_b);
}

Rng Rng::substream(std::uint64_t tag_a, std::uint64_t tag_b, std::uint64_t tag_c) const {
  return substream(tag_a).substream(tag_b).substream(tag_c);
}

}  // namespace dhns
