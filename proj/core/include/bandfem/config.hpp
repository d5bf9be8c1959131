#ifndef BANDFEM_CONFIG_HPP
#define BANDFEM_CONFIG_HPP

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bandfem/stepper.hpp"

namespace bandfem {

// Flat key-value configuration with [section] headers. Keys are addressed
// as "section.key". Unknown keys are rejected so typos surface early.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse(std::istream& is, const std::string& origin = "<stream>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    std::optional<std::string> maybe_string(const std::string& key) const;
    std::optional<double> maybe_double(const std::string& key) const;
    std::optional<std::int64_t> maybe_int(const std::string& key) const;
    std::optional<bool> maybe_bool(const std::string& key) const;

    const std::map<std::string, std::pair<std::string, int>>& entries() const { return values_; }
    void require_known_keys(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::pair<std::string, int>> values_;  // key -> (value, line)
    std::string origin_;
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
};

// Run configuration from a parsed config; problem.id is mandatory.
RunConfig run_config_from(const Config& cfg);

struct StudyLevel {
    std::int64_t cells = 0;
    double eps = 0.0;
};

struct StudySpec {
    ProblemId id = ProblemId::Ex1;
    std::vector<StudyLevel> levels;
    RunConfig base;  // resolution fields are overwritten per level
};

// Default (h, eps) ladder reproducing the benchmark tables: eps in
// {0.4, 0.2 sqrt 2, 0.2, 0.1 sqrt 2, 0.1}, grid resolution chosen so that
// the element diameter is as close as the lattice allows to eps / ratio.
std::vector<StudyLevel> default_ladder(ProblemId id, int n_levels, double eps_to_h);

StudySpec study_spec_from(const Config& cfg, int levels_override = 0);

struct StudyResult {
    ConvergenceTable table;
    std::vector<TrajectorySummary> summaries;  // empty entries for failed levels
};

template <int D>
StudyResult run_study(std::shared_ptr<const LevelSetProblem<D>> problem, const StudySpec& spec);

// Dimension-dispatching front end.
StudyResult run_study(const StudySpec& spec);
TrajectorySummary run_single(const RunConfig& config);

void write_diagnostics_csv(const TrajectorySummary& summary, std::ostream& os);
void write_summary(const TrajectorySummary& summary, std::ostream& os);

extern template StudyResult run_study<2>(std::shared_ptr<const LevelSetProblem<2>>,
                                         const StudySpec&);
extern template StudyResult run_study<3>(std::shared_ptr<const LevelSetProblem<3>>,
                                         const StudySpec&);

}  // namespace bandfem

#endif
