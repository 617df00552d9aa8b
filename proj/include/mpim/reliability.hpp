#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpim/fault.hpp"
#include "mpim/tmr.hpp"

namespace mpim {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for `failures` out of `trials`.
Interval wilson_interval(std::uint64_t failures, std::uint64_t trials, double z = kZ95);

struct MonteCarloConfig {
    std::uint32_t bit_width = 8;
    double p_gate = 0.0;
    double p_write = 0.0;
    std::uint64_t trials = 20000;
    TmrPlan plan;
    std::uint64_t seed = 1;
    std::uint32_t batch_rows = 256;  ///< trials run row-parallel in one crossbar

    void validate() const;
};

struct MonteCarloResult {
    double p_gate = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t failures = 0;
    double p_mult_hat = 0.0;
    Interval ci95;
    TmrPlan plan;
    std::uint32_t bit_width = 0;
    std::uint64_t cycles = 0;
    std::uint64_t area_cells = 0;
    std::uint64_t seed = 0;
};

/// Fault-injected multiplications on uniform random operands; a trial fails
/// when the (voted) product differs from the true product.
///
/// Trials are grouped into batches of `batch_rows` rows; batch b draws its
/// operands and faults from sub-streams derived from (seed, b), so the result
/// does not depend on how batches are scheduled.
MonteCarloResult estimate_p_mult(const MonteCarloConfig& cfg);

/// Same estimate with batches spread over `jobs` OpenMP threads.
MonteCarloResult estimate_p_mult_parallel(const MonteCarloConfig& cfg, int jobs);

/// Closed-form neural-network case-study parameters.
struct NnModelParams {
    double p_mask = 3e-4;
    double multiplications = 612e6;  ///< M, per sample
    double weights = 62.4e6;         ///< W
    double batches = 1.0;            ///< T
    double p_input = 0.0;
    std::uint32_t bits_per_weight = 32;
    std::uint32_t block = 16;  ///< ECC block side m

    void validate() const;
};

/// (1 - p)^k evaluated as exp(k * log1p(-p)); values under 1e-300 clamp to 0.
struct PowResult {
    double value = 0.0;
    bool clamped = false;
};
PowResult complement_pow(double p, double k);

/// 1 - (1 - p)^k without cancellation for tiny p.
double one_minus_complement_pow(double p, double k);

/// 1 - (1 - p_mask * p_mult)^M
double nn_failure_probability(const NnModelParams& params, double p_mult);

enum class EccScheme : std::uint8_t { None, Diagonal };

/// Probability that one batch corrupts a given weight.
///
/// Without ECC any flipped bit of the weight corrupts it. With diagonal ECC
/// a single flip per block is repaired on access, so corruption needs a flip
/// in the weight plus another in the same m x m block:
/// bits*p*(m^2 - 1)*p + C(bits, 2)*p^2.
double weight_corruption_per_batch(const NnModelParams& params, EccScheme ecc);

/// Expected corrupted weights after T batches: W * (1 - (1 - q)^T).
double weight_degradation(const NnModelParams& params, EccScheme ecc);

}  // namespace mpim
