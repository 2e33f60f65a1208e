#pragma once

#include "drmmesh/sim.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Timing harness for the delegation pipeline on a production-grade backend.
// The transparent backend is refused outright: it models group arithmetic
// with plain integers, so timing it would only produce flattering nonsense.

// Hard budget on the headline re-encryption step, and the stretch target
// that is reported alongside but never enforced.
inline constexpr double kReencryptMedianBudgetMs = 302.0;
inline constexpr double kReencryptP95TargetMs = 20.0;

struct BenchStat {
  std::string op;
  size_t iterations = 0;
  double median_ms = 0;
  double p95_ms = 0;
  double mean_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  json to_json() const;
};

struct BenchReport {
  std::string backend;
  size_t order_bits = 0;
  size_t iterations = 0;
  std::vector<BenchStat> stats;

  const BenchStat& stat(const std::string& op) const;  // throws on unknown op
  json to_json() const;
};

// Times keygen, rekeygen, second-level encryption, re-encryption, and
// first-level decryption on raw key material, then a full client execution
// against a simulated deployment.  Every timed operation self-checks, so a
// backend cannot look fast by being wrong.  Requires >= 100 iterations so
// the percentiles mean something.
BenchReport run_bench(const SystemParams& params, uint64_t seed,
                      size_t iterations = 100);

}  // namespace drmmesh
