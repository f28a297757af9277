#pragma once

#include "lrlab/series.hpp"

#include <string>
#include <vector>

namespace lrlab {

// One inequality lhs <= rhs + slack.
struct AuditRow {
    std::string check;
    int n = 0;
    int ell = 0;
    int sample = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = kSlack;
    std::string note;

    bool pass() const { return lhs <= rhs + slack; }
    double margin() const { return rhs - lhs; }
};

inline bool all_pass(const std::vector<AuditRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass()) return false;
    return true;
}

}  // namespace lrlab
