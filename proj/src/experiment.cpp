#include "mpim/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <sstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace mpim {

std::string_view to_string(EccScheme s) { return s == EccScheme::None ? "none" : "diagonal"; }

EccScheme parse_ecc_scheme(std::string_view s) {
    if (s == "none" || s == "baseline") return EccScheme::None;
    if (s == "diagonal" || s == "ecc") return EccScheme::Diagonal;
    throw std::invalid_argument("unknown ECC scheme '" + std::string(s) + "'");
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

ExperimentRow to_row(const MonteCarloResult& r, std::string experiment) {
    ExperimentRow row;
    row.experiment = std::move(experiment);
    row.mode = to_string(r.plan.mode);
    row.voting = r.plan.mode == TmrMode::None ? "none" : std::string(to_string(r.plan.voting));
    row.bit_width = r.bit_width;
    row.p_gate = r.p_gate;
    row.trials = r.trials;
    row.failures = r.failures;
    row.p_hat = r.p_mult_hat;
    row.ci_lo = r.ci95.lo;
    row.ci_hi = r.ci95.hi;
    row.cycles = r.cycles;
    row.area_cells = r.area_cells;
    row.seed = r.seed;
    return row;
}

void write_csv(std::ostream& os, std::span<const ExperimentRow> rows, std::span<const std::string> comments) {
    for (const auto& c : comments) os << "# " << c << "\n";
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) os << (i ? "," : "") << kCsvColumns[i];
    os << "\n";
    for (const auto& r : rows) {
        os << r.experiment << ',' << r.mode << ',' << r.voting << ',' << r.bit_width << ',' << format_real(r.p_gate)
           << ',' << format_real(r.p_input) << ',' << r.trials << ',' << r.failures << ',' << format_real(r.p_hat)
           << ',' << format_real(r.ci_lo) << ',' << format_real(r.ci_hi) << ',' << r.cycles << ','
           << r.area_cells << ',' << r.seed << "\n";
    }
}

void write_json(std::ostream& os, std::span<const ExperimentRow> rows, std::span<const std::string> comments) {
    nlohmann::ordered_json doc;
    doc["meta"] = nlohmann::ordered_json::array();
    for (const auto& c : comments) doc["meta"].push_back(c);
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["experiment"] = r.experiment;
        j["mode"] = r.mode;
        j["voting"] = r.voting;
        j["bit_width"] = r.bit_width;
        j["p_gate"] = r.p_gate;
        j["p_input"] = r.p_input;
        j["trials"] = r.trials;
        j["failures"] = r.failures;
        j["p_hat"] = r.p_hat;
        j["ci_lo"] = r.ci_lo;
        j["ci_hi"] = r.ci_hi;
        j["cycles"] = r.cycles;
        j["area_cells"] = r.area_cells;
        j["seed"] = r.seed;
        doc["rows"].push_back(std::move(j));
    }
    os << doc.dump(2) << "\n";
}

std::vector<ExperimentRow> read_csv(std::istream& is) {
    std::vector<ExperimentRow> rows;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (!header) {
            if (f.size() != kCsvColumns.size() || !std::equal(f.begin(), f.end(), kCsvColumns.begin())) {
                throw std::runtime_error("CSV header does not match the experiment schema");
            }
            header = true;
            continue;
        }
        if (f.size() != kCsvColumns.size()) {
            throw std::runtime_error("CSV line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(kCsvColumns.size()) + " fields");
        }
        try {
            ExperimentRow r;
            r.experiment = f[0];
            r.mode = f[1];
            r.voting = f[2];
            r.bit_width = static_cast<std::uint32_t>(std::stoul(f[3]));
            r.p_gate = std::stod(f[4]);
            r.p_input = std::stod(f[5]);
            r.trials = std::stoull(f[6]);
            r.failures = std::stoull(f[7]);
            r.p_hat = std::stod(f[8]);
            r.ci_lo = std::stod(f[9]);
            r.ci_hi = std::stod(f[10]);
            r.cycles = std::stoull(f[11]);
            r.area_cells = std::stoull(f[12]);
            r.seed = std::stoull(f[13]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::runtime_error("CSV line " + std::to_string(lineno) + ": malformed number");
        }
    }
    if (!header) throw std::runtime_error("CSV has no header");
    return rows;
}

namespace {

void check_probabilities(const std::vector<double>& ps, const char* name) {
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument(std::string(name) + " grid value " + format_real(p) + " outside [0, 1]");
        }
    }
}

}  // namespace

std::vector<ExperimentRow> tmr_sweep(const TmrSweepConfig& cfg, int jobs) {
    check_probabilities(cfg.p_gates, "p_gate");
    std::vector<ExperimentRow> rows;
    for (double p : cfg.p_gates) {
        for (auto mode : cfg.modes) {
            const std::size_t votes = mode == TmrMode::None ? 1 : cfg.votings.size();
            for (std::size_t v = 0; v < votes; ++v) {
                MonteCarloConfig mc;
                mc.bit_width = cfg.bit_width;
                mc.p_gate = p;
                mc.trials = cfg.trials;
                mc.seed = cfg.seed;
                mc.batch_rows = cfg.batch_rows;
                mc.plan.mode = mode;
                mc.plan.voting = mode == TmrMode::None ? Voting::Min3 : cfg.votings[v];
                const auto r = jobs > 1 ? estimate_p_mult_parallel(mc, jobs) : estimate_p_mult(mc);
                rows.push_back(to_row(r, "tmr-sweep"));
            }
        }
    }
    return rows;
}

std::vector<ExperimentRow> nn_sweep(const NnModelParams& params, std::span<const ExperimentRow> p_mult_rows) {
    params.validate();
    std::vector<ExperimentRow> rows;
    for (const auto& in : p_mult_rows) {
        auto r = in;
        r.experiment = "nn";
        r.p_hat = nn_failure_probability(params, in.p_hat);
        r.ci_lo = nn_failure_probability(params, in.ci_lo);
        r.ci_hi = nn_failure_probability(params, in.ci_hi);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ExperimentRow> degradation_sweep(const DegradationSweepConfig& cfg) {
    check_probabilities(cfg.p_inputs, "p_input");
    for (double t : cfg.batches) {
        if (!(t > 0)) throw std::invalid_argument("T grid values must be positive");
    }
    std::vector<ExperimentRow> rows;
    for (double p : cfg.p_inputs) {
        for (double t : cfg.batches) {
            for (auto scheme : cfg.schemes) {
                auto params = cfg.params;
                params.p_input = p;
                params.batches = t;
                ExperimentRow r;
                r.experiment = "degradation";
                r.mode = to_string(scheme);
                r.voting = "none";
                r.bit_width = params.bits_per_weight;
                r.p_input = p;
                r.trials = static_cast<std::uint64_t>(t);
                r.p_hat = weight_degradation(params, scheme);
                r.ci_lo = r.ci_hi = r.p_hat;
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

}  // namespace mpim
