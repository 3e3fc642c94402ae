#pragma once

#include "kamstab/nls.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kamstab::exp {

/// One checked property with its worst observed violation.
struct CheckRow {
    std::string name;
    double value = 0;      ///< worst violation, or the measured quantity
    double tolerance = 0;  ///< pass iff value <= tolerance
    bool pass = true;
    std::string detail;
};

struct SuiteReport {
    std::vector<CheckRow> rows;
    bool ok() const;
    void add(std::string name, double value, double tol, std::string detail = {});
};

struct BracketSuiteOptions {
    int triples = 200;
    int exact_triples = 40;
    int flow_points = 20;
    std::uint64_t seed = 1;
    BracketVariant variant = BracketVariant::Standard;
};
SuiteReport bracket_suite(const BracketSuiteOptions& opt);

struct NormSuiteOptions {
    int rows = 100;
    int samples = 1000;
    std::uint64_t seed = 1;
    std::uint64_t second_seed = 2;
};
struct NormRow {
    int index = 0;
    double submult_angle = 0, submult_xy = 0;  ///< rhs - lhs
    double cauchy_x = 0, cauchy_y = 0;         ///< rhs - lhs
    double gauge_identity = 0;                 ///< |symmetrized - closed form| / closed form
    double sup_vs_tame = 0;                    ///< tame upper - sampled sup
    double bracket_ratio = 0;                  ///< lower({U,V}) / (max(1/sigma, r/sigma') upper(U) upper(V))
    double smoothing = 0;                      ///< rhs - lhs of the tail gauge inequality
};
struct NormSuiteResult {
    std::vector<NormRow> rows;
    double bracket_constant = 0, bracket_constant_second = 0;
    SuiteReport report;
};
NormSuiteResult norm_suite(const NormSuiteOptions& opt);

/// Three-parameter box xi_j in [1,2]/j with omega = 1 + xi_1, Omega_j = j^2 + xi_j (j = 2, 3).
ParameterFamily nls_box_family();
/// omega = xi_1 on [1,2], one normal mode with Omega = 1.5.
ParameterFamily planted_strip_family();

struct MeasureOptions {
    std::vector<double> etas{0.4, 0.2, 0.1, 0.05};
    long samples = 100000;
    int Kmax = 3;
    int Ncut = 1;
    int M = 1;
    double tau = 2.0;
    std::uint64_t seed = 1;
    bool planted = false;
};
struct MeasureRow {
    double eta = 0;
    std::string query;  ///< "union" for the union row
    MeasureResult mc;
    double bound = 0;
};
struct MeasureExperiment {
    std::vector<MeasureRow> rows;
    std::vector<MeasureRow> unions;  ///< one per eta
    double slope = 0;                ///< log fraction against log eta
    SuiteReport report;
};
MeasureExperiment measure_experiment(const MeasureOptions& opt);

struct KamRunOptions {
    IterationSchedule schedule;
    int steps = 6;
};

/// KAM then the partial normal form; logs are "kam" records followed by M "pnf" records.
NormalFormState nls_normal_form(const NlsConfig& cfg, const KamRunOptions& kam, const PnfOptions& pnf);

/// Number of leading log records giving the order-M tube coordinates.
std::size_t log_prefix_for_order(const NormalFormState& st, int M);

struct StabilityExperiment {
    std::vector<int> orders{0, 1, 2};
    std::vector<StabilityResult> results;  ///< one per order
    SuiteReport report;
};
StabilityExperiment stability_experiment(const NlsConfig& cfg, const NormalFormState& st,
                                         const std::vector<int>& orders, const StabilityOptions& opt);

// ---- configuration ------------------------------------------------------

struct RunConfig {
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string source = "nls";  ///< nls | random | file
    TruncationSpec trunc{1, 4, 6, 4, 5};
    FrequencySet freq;
    std::string hamiltonian_file;
    double perturbation = 1e-3;  ///< scale of the low-order random part
    DomainSpec domain;
    NlsConfig nls;
    KamRunOptions kam;
    PnfOptions pnf;
    std::string state_dir;  ///< pnf: resume from a saved KAM state
    BracketSuiteOptions bracket;
    NormSuiteOptions norms;
    SimOptions sim;
    std::string initial_file;  ///< mode amplitudes "j re im" per line
    double initial_normal = 0.01;
    int initial_mode = 2;
    StabilityOptions stability;
    std::vector<int> stability_orders{0, 1, 2};
    MeasureOptions measure;
    nlohmann::json raw;
    std::filesystem::path base_dir;
};

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

/// FNV-1a 64 of the canonical JSON dump.
std::uint64_t config_hash(const nlohmann::json& j);

/// Builds N and R from the configured source.
NormalFormState initial_state(const RunConfig& cfg);

std::vector<cplx> read_modes(const std::filesystem::path& file, int J);

}  // namespace kamstab::exp
