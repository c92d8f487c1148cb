#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pointattn::selfcheck {

struct CheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 1e-4;
    bool pass = false;
};

// Finite-difference battery: every differentiable op against central
// differences plus the full network loss on a micro configuration.
std::vector<CheckResult> gradient_checks(std::uint64_t seed = 7);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace pointattn::selfcheck
