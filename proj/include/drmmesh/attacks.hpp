#pragma once

#include "drmmesh/sim.hpp"

namespace drmmesh {

// ---------------------------------------------------------------------------
// Adversarial scenarios driven against fresh simulated deployments.  Each
// scenario plays a named cheat — replayed credentials, forged identities,
// double-spent payments, reused key material — and reports whether every
// illegitimate step was refused.  A scenario is also required to leave the
// deployment healthy: where cheap to check, a legitimate operation still
// succeeds afterwards.

struct AttackOutcome {
  std::string name;
  std::string description;  // what the adversary attempts, one line
  bool rejected = false;    // true when every illegitimate step was refused
  std::string detail;       // refusal reasons observed, or what got through
};

// Scenario names in suite order.
std::vector<std::string> attack_names();

// Runs one scenario on its own world; throws Error for an unknown name.
AttackOutcome run_attack(const std::string& name, const SystemParams& params,
                         uint64_t seed);

// Runs every scenario.
std::vector<AttackOutcome> run_attack_suite(const SystemParams& params, uint64_t seed);

// ---------------------------------------------------------------------------
// Protocol behaviour matrix: happy-path probes plus the attack suite,
// reduced to name -> pass rows.  Two backends implementing the same
// protocol must produce identical matrices.

struct MatrixRow {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<MatrixRow> run_protocol_matrix(const SystemParams& params, uint64_t seed);

}  // namespace drmmesh
