#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpim/reliability.hpp"
#include "mpim/tmr.hpp"

namespace mpim {

inline constexpr std::string_view kVersion = "1.0.0";

/// Column order of the experiment CSV; the JSON mirror uses the same keys.
inline constexpr std::array<std::string_view, 14> kCsvColumns = {
    "experiment", "mode",   "voting", "bit_width", "p_gate", "p_input", "trials",
    "failures",   "p_hat",  "ci_lo",  "ci_hi",     "cycles", "area_cells", "seed"};

/// One result row. Analytic experiments (nn, degradation) carry the model value
/// in p_hat with ci_lo == ci_hi == p_hat; degradation rows put T in `trials`.
struct ExperimentRow {
    std::string experiment;
    std::string mode;
    std::string voting;
    std::uint32_t bit_width = 0;
    double p_gate = 0.0;
    double p_input = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t failures = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::uint64_t cycles = 0;
    std::uint64_t area_cells = 0;
    std::uint64_t seed = 0;
};

ExperimentRow to_row(const MonteCarloResult& r, std::string experiment);

/// Fixed-format number rendering shared by all writers (%.6e).
std::string format_real(double v);

/// `comments` are emitted first, one `# ` line each.
void write_csv(std::ostream& os, std::span<const ExperimentRow> rows, std::span<const std::string> comments);
void write_json(std::ostream& os, std::span<const ExperimentRow> rows, std::span<const std::string> comments);

/// Parses what write_csv produced; `#` lines are skipped and the header must
/// match kCsvColumns.
std::vector<ExperimentRow> read_csv(std::istream& is);

struct TmrSweepConfig {
    std::uint32_t bit_width = 8;
    std::vector<double> p_gates;
    std::vector<TmrMode> modes;
    std::vector<Voting> votings = {Voting::Min3};
    std::uint64_t trials = 20000;
    std::uint64_t seed = 1;
    std::uint32_t batch_rows = 256;
};

/// Rows in grid order: p_gate outermost, then mode, then voting. Mode `none`
/// produces one row per p_gate (voting column "none"). Every point reuses the
/// run seed, so modes see common operands and copy faults.
std::vector<ExperimentRow> tmr_sweep(const TmrSweepConfig& cfg, int jobs = 1);

/// Maps multiplication-failure rows (p_hat = p_mult, e.g. from a tmr-sweep)
/// to network-failure rows. Every column is carried over except `experiment`
/// and the estimate columns, which become p_net at p_hat and at the interval
/// ends (the formula is monotone).
std::vector<ExperimentRow> nn_sweep(const NnModelParams& params, std::span<const ExperimentRow> p_mult_rows);

struct DegradationSweepConfig {
    NnModelParams params;
    std::vector<double> p_inputs;
    std::vector<double> batches;
    std::vector<EccScheme> schemes = {EccScheme::None};
};
std::vector<ExperimentRow> degradation_sweep(const DegradationSweepConfig& cfg);

std::string_view to_string(EccScheme s);
EccScheme parse_ecc_scheme(std::string_view s);

/// 64-bit FNV-1a, used for the config hash embedded in output headers.
std::uint64_t fnv1a(std::string_view data);

}  // namespace mpim
