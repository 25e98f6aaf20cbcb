#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace aos {

struct VerifyCheck {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    std::int64_t horizon = 100'000;
    int replications = 4;
};

/// Invariant suite over every module. Output depends only on the options.
std::vector<VerifyCheck> run_verify_suite(const VerifyOptions& options = {});

/// name,value,reference,tolerance,passed
void write_verify_csv(std::ostream& out, const std::vector<VerifyCheck>& checks);

}  // namespace aos
