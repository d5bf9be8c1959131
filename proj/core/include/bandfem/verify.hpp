#ifndef BANDFEM_VERIFY_HPP
#define BANDFEM_VERIFY_HPP

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace bandfem {

struct VerifyLine {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
};

// Runs the invariant suite of one module ("levelset", "phasefield",
// "mesh", "band", "fem", "linalg", "errors", "stepper") or "all".
// Failures are report entries, not exceptions. Throws ConfigError for an
// unknown selector.
std::vector<VerifyLine> run_verify(const std::string& selector, std::uint64_t seed = 0);

// One line per invariant: "PASS|FAIL <name> measured=<v> bound=<b>".
void print_verify_report(const std::vector<VerifyLine>& lines, std::ostream& os);

}  // namespace bandfem

#endif
