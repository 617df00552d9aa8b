#include "mpim/reliability.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "mpim/crossbar.hpp"
#include "mpim/microcode.hpp"

namespace mpim {

Interval wilson_interval(std::uint64_t failures, std::uint64_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(failures) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {std::max(0.0, std::min(center - half, p)), std::min(1.0, std::max(center + half, p))};
}

void MonteCarloConfig::validate() const {
    if (bit_width < 1 || bit_width > 32) throw std::invalid_argument("bit_width must be in [1, 32]");
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (batch_rows < 1) throw std::invalid_argument("batch_rows must be at least 1");
    FaultConfig fc;
    fc.p_gate = p_gate;
    fc.p_write = p_write;
    fc.validate();
}

namespace {

constexpr std::uint64_t kOperandSalt = 0x6f706572616e6473ull;

struct BatchOutcome {
    std::uint64_t failures = 0;
    std::uint64_t cycles = 0;
    std::uint64_t area = 0;
};

BatchOutcome run_batch(const MonteCarloConfig& cfg, const MicroProgram& prog, std::uint64_t batch) {
    const auto first = batch * cfg.batch_rows;
    const auto rows = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg.batch_rows, cfg.trials - first));
    std::vector<std::uint32_t> lanes(rows);
    std::iota(lanes.begin(), lanes.end(), 0u);

    const auto fp = footprint(prog, cfg.plan, lanes);
    Crossbar xbar(fp.rows, fp.cols);

    std::mt19937_64 operands(derive_seed(cfg.seed ^ kOperandSalt, batch));
    const std::uint64_t mask = cfg.bit_width == 64 ? ~0ull : (1ull << cfg.bit_width) - 1;
    const auto& a_port = prog.input("a");
    const auto& b_port = prog.input("b");
    std::vector<std::uint64_t> expected(rows);
    for (std::uint32_t r = 0; r < rows; ++r) {
        const auto a = operands() & mask;
        const auto b = operands() & mask;
        load_word(xbar, r, a_port, a);
        load_word(xbar, r, b_port, b);
        expected[r] = a * b;
    }

    FaultConfig fc;
    fc.p_gate = cfg.p_gate;
    fc.p_write = cfg.p_write;
    fc.seed = cfg.seed;
    FaultInjector faults(fc, batch);
    const auto res = run_tmr(prog, xbar, lanes, &faults, cfg.plan);

    BatchOutcome out;
    for (std::uint32_t r = 0; r < rows; ++r) {
        if (res.word(prog, r) != expected[r]) ++out.failures;
    }
    out.cycles = res.cycles;
    out.area = res.area_cells;
    return out;
}

MonteCarloResult summarize(const MonteCarloConfig& cfg, std::uint64_t failures, const BatchOutcome& first) {
    MonteCarloResult r;
    r.p_gate = cfg.p_gate;
    r.trials = cfg.trials;
    r.failures = failures;
    r.p_mult_hat = static_cast<double>(failures) / static_cast<double>(cfg.trials);
    r.ci95 = wilson_interval(failures, cfg.trials);
    r.plan = cfg.plan;
    r.bit_width = cfg.bit_width;
    r.cycles = first.cycles;
    r.area_cells = first.area;
    r.seed = cfg.seed;
    return r;
}

std::uint64_t batch_count(const MonteCarloConfig& cfg) {
    return (cfg.trials + cfg.batch_rows - 1) / cfg.batch_rows;
}

}  // namespace

MonteCarloResult estimate_p_mult(const MonteCarloConfig& cfg) {
    cfg.validate();
    const auto prog = build_multiplier(cfg.bit_width);
    const auto batches = batch_count(cfg);
    std::uint64_t failures = 0;
    BatchOutcome first;
    for (std::uint64_t b = 0; b < batches; ++b) {
        const auto o = run_batch(cfg, prog, b);
        if (b == 0) first = o;
        failures += o.failures;
    }
    return summarize(cfg, failures, first);
}

MonteCarloResult estimate_p_mult_parallel(const MonteCarloConfig& cfg, int jobs) {
    cfg.validate();
    if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    const auto prog = build_multiplier(cfg.bit_width);
    const auto batches = static_cast<std::int64_t>(batch_count(cfg));
    std::uint64_t failures = 0;
    BatchOutcome first;
    std::exception_ptr error;

#pragma omp parallel for schedule(dynamic) reduction(+ : failures) num_threads(jobs)
    for (std::int64_t b = 0; b < batches; ++b) {
        try {
            const auto o = run_batch(cfg, prog, static_cast<std::uint64_t>(b));
            failures += o.failures;
            if (b == 0) first = o;
        } catch (...) {
#pragma omp critical
            error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return summarize(cfg, failures, first);
}

void NnModelParams::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
    };
    prob(p_mask, "p_mask");
    prob(p_input, "p_input");
    if (!(multiplications > 0)) throw std::invalid_argument("M must be positive");
    if (!(weights > 0)) throw std::invalid_argument("W must be positive");
    if (!(batches > 0)) throw std::invalid_argument("T must be positive");
    if (bits_per_weight < 1) throw std::invalid_argument("bits_per_weight must be positive");
    if (block < 2) throw std::invalid_argument("block must be at least 2");
}

PowResult complement_pow(double p, double k) {
    if (p <= 0.0 || k == 0.0) return {1.0, false};
    if (p >= 1.0) return {0.0, false};
    const double v = std::exp(k * std::log1p(-p));
    if (v < 1e-300) return {0.0, true};
    return {v, false};
}

double one_minus_complement_pow(double p, double k) {
    if (p <= 0.0 || k == 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    return -std::expm1(k * std::log1p(-p));
}

double nn_failure_probability(const NnModelParams& params, double p_mult) {
    params.validate();
    if (!(p_mult >= 0.0 && p_mult <= 1.0)) throw std::invalid_argument("p_mult must be in [0, 1]");
    return one_minus_complement_pow(params.p_mask * p_mult, params.multiplications);
}

double weight_corruption_per_batch(const NnModelParams& params, EccScheme ecc) {
    params.validate();
    const double p = params.p_input;
    const double bits = params.bits_per_weight;
    if (ecc == EccScheme::None) return one_minus_complement_pow(p, bits);
    const double block_cells = static_cast<double>(params.block) * params.block;
    const double q = bits * p * (block_cells - 1.0) * p + bits * (bits - 1.0) / 2.0 * p * p;
    return std::min(1.0, q);
}

double weight_degradation(const NnModelParams& params, EccScheme ecc) {
    const double q = weight_corruption_per_batch(params, ecc);
    return params.weights * one_minus_complement_pow(q, params.batches);
}

}  // namespace mpim
