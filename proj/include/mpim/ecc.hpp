#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mpim/crossbar.hpp"
#include "mpim/microcode.hpp"

namespace mpim {

/// Tiling of a rows x cols crossbar into m x m parity blocks.
struct BlockGeometry {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t m = 16;

    BlockGeometry() = default;
    BlockGeometry(std::size_t n, std::size_t block) : BlockGeometry(n, n, block) {}
    BlockGeometry(std::size_t r, std::size_t c, std::size_t block);

    std::size_t block_rows() const { return rows / m; }
    std::size_t block_cols() const { return cols / m; }
    std::size_t blocks() const { return block_rows() * block_cols(); }
    std::size_t block_of(std::size_t r, std::size_t c) const { return (r / m) * block_cols() + c / m; }
};

/// Wrap-around diagonal parity of a cell at block-local (i, j).
inline std::size_t leading_index(std::size_t i, std::size_t j, std::size_t m) { return (j + m - i % m) % m; }
inline std::size_t counter_index(std::size_t i, std::size_t j, std::size_t m) { return (i + j) % m; }

/// Check bits held in the memristive extension next to the data crossbar.
///
/// Per block: `leading[d]` is the XOR of cells with (col - row) mod m = d,
/// `counter[d]` of cells with (col + row) mod m = d, and with three banks
/// `row_aux[i]` of block row i. The row bank disambiguates the two positions
/// (i, j) and (i + m/2, j + m/2) that share both diagonals when m is even.
struct ParityBanks {
    BlockGeometry geom;
    int banks = 3;
    std::vector<std::uint8_t> leading;
    std::vector<std::uint8_t> counter;
    std::vector<std::uint8_t> row_aux;

    std::uint8_t& lead(std::size_t block, std::size_t d) { return leading[block * geom.m + d]; }
    std::uint8_t& ctr(std::size_t block, std::size_t d) { return counter[block * geom.m + d]; }
    std::uint8_t& aux(std::size_t block, std::size_t i) { return row_aux[block * geom.m + i]; }

    bool operator==(const ParityBanks& o) const {
        return banks == o.banks && leading == o.leading && counter == o.counter && row_aux == o.row_aux;
    }
};

ParityBanks encode(const Crossbar& xbar, const BlockGeometry& geom, int banks = 3);

/// A cell rewritten by one parallel step.
struct Change {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::uint8_t old_bit = 0;
    std::uint8_t new_bit = 0;
};

/// Cycle prices of the parity-maintenance datapath.
struct EccCycleModel {
    std::uint64_t snapshot = 2;  ///< INIT + NOT copy of the old column to scratch
    std::uint64_t xor_gate = 8;  ///< 4-NOR XOR netlist with its INITs
    std::uint64_t shift = 1;     ///< one barrel-shifter alignment

    /// Snapshot, delta = old ^ new, align, fold into the bank. All blocks and
    /// banks proceed concurrently, so this does not depend on n.
    std::uint64_t diagonal_update() const { return snapshot + xor_gate + shift + xor_gate; }
    /// One delta bit folded into one horizontal check bit.
    std::uint64_t naive_per_bit() const { return snapshot + xor_gate + xor_gate; }
    /// Syndrome recomputation folds the m columns of every block in parallel.
    std::uint64_t verify(std::size_t m) const { return m * (shift + xor_gate); }
};

/// XORs (old ^ new) into every affected check bit; returns the cycle cost.
/// Changes must come from one parallel step: all in one column (in-row gate)
/// or all in one row (in-column gate).
std::uint64_t update_incremental(ParityBanks& banks, std::span<const Change> changes,
                                 const EccCycleModel& model = {});

/// Baseline horizontal scheme: one check bit per `group` consecutive cells of a
/// row. The default group is the whole row.
struct NaiveParity {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t group = 0;
    std::vector<std::uint8_t> bits;  ///< rows x (cols / group)

    std::uint8_t& at(std::size_t r, std::size_t g) { return bits[r * (cols / group) + g]; }
    bool operator==(const NaiveParity&) const = default;
};

NaiveParity encode_naive(const Crossbar& xbar, std::size_t group = 0);

struct NaiveUpdate {
    std::uint64_t cycles = 0;
    std::size_t parity_flips = 0;
};

/// Check bits absorb one delta bit per update round, so the cost is the
/// largest number of changes landing on a single check bit: 1 for an in-row
/// step, the row width for an in-column step.
NaiveUpdate update_naive_horizontal(NaiveParity& parity, std::span<const Change> changes,
                                    const EccCycleModel& model = {});

struct Syndrome {
    std::vector<std::uint32_t> leading;
    std::vector<std::uint32_t> counter;
    std::vector<std::uint32_t> row_aux;

    bool clean() const { return leading.empty() && counter.empty() && row_aux.empty(); }
};

Syndrome syndrome(const Crossbar& xbar, const ParityBanks& banks, std::size_t block);

enum class BlockStatus : std::uint8_t { Clean, Corrected, Uncorrectable };
std::string_view to_string(BlockStatus s);

struct Cell {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    bool operator==(const Cell&) const = default;
};

struct BlockReport {
    std::size_t block_row = 0;
    std::size_t block_col = 0;
    BlockStatus status = BlockStatus::Clean;
    std::vector<Cell> corrected;
    std::vector<Cell> candidates;  ///< equally consistent single-flip positions
};

struct EccReport {
    std::vector<BlockReport> blocks;  ///< every block inspected
    std::uint64_t cycles = 0;

    std::size_t count(BlockStatus s) const;
    bool uncorrectable() const { return count(BlockStatus::Uncorrectable) > 0; }
};

/// Checks every block intersecting `region`. Blocks with exactly one flip are
/// repaired in place; anything inconsistent with a single flip is reported.
EccReport verify_and_correct(Crossbar& xbar, const ParityBanks& banks, const Rect& region,
                             const EccCycleModel& model = {});

struct EccOptions {
    EccCycleModel model;
    bool faulty_check_bits = false;  ///< parity updates draw gate faults too
};

struct EccExecution {
    ExecutionResult exec;
    EccReport verify;
    std::uint64_t update_cycles = 0;
    bool aborted = false;

    std::uint64_t total_cycles() const { return exec.cycles + update_cycles + verify.cycles; }
    double overhead_ratio() const {
        return exec.cycles == 0 ? 0.0
                                : static_cast<double>(update_cycles + verify.cycles) / exec.cycles;
    }
};

/// Verify the program's input blocks, run it, then fold each step's output
/// writes into the banks. Execution is skipped when an input block is
/// uncorrectable.
EccExecution run_with_ecc(const MicroProgram& prog, Crossbar& xbar, std::span<const std::uint32_t> lanes,
                          ParityBanks& banks, FaultInjector* faults = nullptr, std::uint32_t base = 0,
                          const EccOptions& opts = {});

}  // namespace mpim
