#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mpim/crossbar.hpp"
#include "mpim/microcode.hpp"

namespace mpim {

class FaultInjector;

enum class TmrMode : std::uint8_t { None, Serial, Parallel, SemiParallel };
enum class Voting : std::uint8_t { Min3, Ideal };

std::string_view to_string(TmrMode m);
std::string_view to_string(Voting v);
TmrMode parse_tmr_mode(std::string_view s);
Voting parse_voting(std::string_view s);

/// How a function is triplicated and voted.
///
/// - serial: one segment, intermediates re-used, three output copies.
/// - parallel: three partition segments run in lockstep, nothing shared.
/// - semi_parallel: three row groups, no partitions, throughput / 3.
struct TmrPlan {
    TmrMode mode = TmrMode::None;
    Voting voting = Voting::Min3;

    double latency_multiplier() const { return mode == TmrMode::Serial ? 3.0 : 1.0; }
    double area_multiplier() const {
        return mode == TmrMode::Parallel || mode == TmrMode::SemiParallel ? 3.0 : 1.0;
    }
    double throughput_divisor() const { return mode == TmrMode::SemiParallel ? 3.0 : 1.0; }
};

/// Latency factor of voting through the crossbar periphery one row at a time.
inline double periphery_latency_multiplier(std::size_t rows) { return static_cast<double>(rows); }

/// Three equally shaped copies voted bit by bit into `out`.
///
/// For in-row voting the entries of `copies`/`out` are columns and `lanes`
/// are rows; for in-column voting they are rows and `lanes` are columns.
/// `scratch` holds the minority before it is inverted into `out`.
struct VoteSpec {
    Orientation orientation = Orientation::InRow;
    std::array<std::vector<std::uint32_t>, 3> copies;
    std::vector<std::uint32_t> out;
    std::uint32_t scratch = 0;
    std::vector<std::uint32_t> lanes;
};

/// out := NOT MIN3(c0, c1, c2) per bit, all lanes in parallel; 4 cycles per
/// bit including INITs. Ideal voting costs the same but never faults.
std::uint64_t vote_min3(Crossbar& xbar, const VoteSpec& spec, FaultInjector* faults, Voting voting);

/// Word-level reference: the value at least two copies agree on.
std::optional<std::uint64_t> vote_per_element_reference(std::span<const std::uint64_t, 3> copies);

/// Bitwise majority of three words.
inline std::uint64_t vote_per_bit(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return (a & b) | (a & c) | (b & c);
}

struct TmrResult : ExecutionResult {
    std::uint64_t program_cycles = 0;  ///< L: triplicated computation
    std::uint64_t vote_cycles = 0;     ///< V: voting, including partition merge
    std::array<BitMatrix, 3> copies;   ///< per-copy outputs before voting
    std::uint64_t vote_faults = 0;     ///< gate faults drawn during voting
};

/// Cells per row and rows a plan needs for `lanes` result rows.
struct TmrFootprint {
    std::uint32_t cols = 0;
    std::uint32_t rows = 0;
};
TmrFootprint footprint(const MicroProgram& prog, const TmrPlan& plan, std::span<const std::uint32_t> lanes);

/// Runs `prog` under `plan` with inputs pre-loaded at `base` in each lane.
/// Output lands in the program's own output cells. With faults disabled the
/// result equals a plain execute.
TmrResult run_tmr(const MicroProgram& prog, Crossbar& xbar, std::span<const std::uint32_t> lanes,
                  FaultInjector* faults, const TmrPlan& plan, std::uint32_t base = 0);

}  // namespace mpim
