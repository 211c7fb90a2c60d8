// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qoicheck/error.hpp"

namespace qoicheck {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::kParameterDomain, std::string(what) + " must be finite");
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SeedStream::SeedStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::uint64_t sm = mix64(master_seed) ^ mix64(stream_id + 0x632be59bd9b4e019ULL);
  for (auto& word : s_) {
    sm += 0x9e3779b97f4a7c15ULL;
    word = mix64(sm);
  }
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

SeedStream SeedStream::derive(std::uint64_t tag) const {
  return SeedStream(mix64(master_seed_ ^ mix64(stream_id_)), tag);
}

std::uint64_t SeedStream::next_u64() noexcept {
  ++draws_;
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeedStream::uniform01() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t SeedStream::uniform_index(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless bounded integer.
  __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double sample_normal(double mean, double sd, SeedStream& stream) {
  require_finite(mean, "normal mean");
  if (!std::isfinite(sd) || sd <= 0.0) fail(ErrorCode::kParameterDomain, "normal sd must be finite and > 0");
  const double u1 = stream.uniform01();
  const double u2 = stream.uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + sd * z;
}

double sample_truncated_normal_positive(double loc, double sd, SeedStream& stream, int max_attempts) {
  require_finite(loc, "truncated normal location");
  if (!std::isfinite(sd) || sd <= 0.0) fail(ErrorCode::kParameterDomain, "truncated normal sd must be finite and > 0");
  for (int i = 0; i < max_attempts; ++i) {
    const double v = sample_normal(loc, sd, stream);
    if (v > 0.0) return v;
  }
  fail(ErrorCode::kTruncationInfeasible,
       "no positive draw from Normal(" + std::to_string(loc) + ", " + std::to_string(sd) + "^2) after " +
           std::to_string(max_attempts) + " attempts");
}

double sample_gamma(double shape, SeedStream& stream) {
  if (!std::isfinite(shape) || shape <= 0.0) fail(ErrorCode::kParameterDomain, "gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost the shape and correct with U^(1/shape).
    const double g = sample_gamma(shape + 1.0, stream);
    return g * std::pow(stream.uniform01(), 1.0 / shape);
  }
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_normal(0.0, 1.0, stream);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = stream.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_beta_mean_precision(double mu, double phi, SeedStream& stream) {
  if (!(mu > 0.0 && mu < 1.0)) fail(ErrorCode::kParameterDomain, "beta mean must lie in (0,1)");
  if (!std::isfinite(phi) || phi <= 0.0) fail(ErrorCode::kParameterDomain, "beta precision must be > 0");
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  for (;;) {
    const double ga = sample_gamma(a, stream);
    const double gb = sample_gamma(b, stream);
    const double v = ga / (ga + gb);
    if (v > 0.0 && v < 1.0) return v;
  }
}

double sample_uniform(double a, double b, SeedStream& stream) {
  require_finite(a, "uniform lower bound");
  require_finite(b, "uniform upper bound");
  if (!(a < b)) fail(ErrorCode::kParameterDomain, "uniform requires a < b");
  return a + (b - a) * stream.uniform01();
}

std::vector<int> sample_group_assignment(int n, int g, SeedStream& stream) {
  if (n < 1 || g < 1) fail(ErrorCode::kParameterDomain, "group assignment requires N >= 1 and G >= 1");
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& level : out) level = 1 + static_cast<int>(stream.uniform_index(static_cast<std::uint64_t>(g)));
  return out;
}

}  // namespace qoicheck
