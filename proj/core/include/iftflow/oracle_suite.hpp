#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iftflow {

struct OracleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Closed-form and brute-force consistency checks: interpolation decay law,
/// Euler convergence and decay rate, QP solver vs grid search, witness gradient
/// vs finite differences. Deterministic given `seed`.
std::vector<OracleCheck> run_oracle_suite(std::uint64_t seed = 20240601);

}  // namespace iftflow
