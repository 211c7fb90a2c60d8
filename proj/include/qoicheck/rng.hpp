// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams and the sampling distributions used by the
// simulation studies. Everything here is hand-rolled so that a given
// (master_seed, stream_id) produces the same bits with any standard library.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qoicheck {

/// 64-bit finalizer from splitmix64.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a hash, used to turn purpose labels into stream ids.
std::uint64_t hash_label(std::string_view label) noexcept;

/// A reproducible random stream identified by (master_seed, stream_id).
///
/// The generator state is xoshiro256** seeded by splitmix64 from a mixing
/// hash of both ids, so streams with distinct ids are independent and a
/// stream's output never depends on which thread or in which order it is
/// consumed.
class SeedStream {
 public:
  SeedStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream for a sub-purpose; depends only on this stream's ids.
  SeedStream derive(std::uint64_t tag) const;
  SeedStream derive(std::string_view label) const { return derive(hash_label(label)); }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1); 53 bits of resolution.
  double uniform01() noexcept;
  /// Uniform integer in [0, n). n must be >= 1.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  std::uint64_t raw_draws() const noexcept { return draws_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t draws_ = 0;
};

/// Normal(mean, sd^2) via Box-Muller; consumes exactly two raw draws.
double sample_normal(double mean, double sd, SeedStream& stream);

/// Normal(loc, sd^2) conditioned on (0, inf), by rejection.
double sample_truncated_normal_positive(double loc, double sd, SeedStream& stream,
                                        int max_attempts = 100000);

double sample_gamma(double shape, SeedStream& stream);

/// Beta with shapes (mu*phi, (1-mu)*phi); result strictly inside (0, 1).
double sample_beta_mean_precision(double mu, double phi, SeedStream& stream);

double sample_uniform(double a, double b, SeedStream& stream);

/// N independent uniform level ids in {1..G}.
std::vector<int> sample_group_assignment(int n, int g, SeedStream& stream);

inline double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace qoicheck
