#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpim {

class FaultInjector;

/// Thrown for malformed gate steps, partitions and out-of-range accesses.
class CrossbarError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stateful gate set. `Init` is the output pre-set (cell := 1) that MAGIC-style
/// gates require; it takes no inputs and is priced like any other step.
enum class GateKind : std::uint8_t { Init, Not, Nor2, Nand2, Or2, Min3 };

enum class Orientation : std::uint8_t { InRow, InColumn };

std::size_t arity(GateKind g);
std::string_view to_string(GateKind g);
std::string_view to_string(Orientation o);
GateKind parse_gate(std::string_view s);
Orientation parse_orientation(std::string_view s);

/// Boolean function of a gate over `arity(g)` inputs.
std::uint8_t evaluate(GateKind g, std::span<const std::uint8_t> in);

/// One stateful gate applied to every lane in parallel.
///
/// For an in-row step the offsets are column indices and `lanes` are the rows
/// the wordline voltages reach; for an in-column step the roles swap.
struct GateStep {
    GateKind gate = GateKind::Not;
    Orientation orientation = Orientation::InRow;
    std::vector<std::uint32_t> inputs;
    std::uint32_t output = 0;
    std::vector<std::uint32_t> lanes;
};

struct Rect {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Dense row-major bit matrix used for region reads/writes.
struct BitMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> bits;

    BitMatrix() = default;
    BitMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 0) {}

    std::uint8_t& at(std::size_t r, std::size_t c) { return bits[r * cols + c]; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * cols + c]; }
    bool operator==(const BitMatrix&) const = default;
};

/// Bit-level memristive crossbar with stateful gates, partitions and
/// cycle/area counters.
///
/// Cells are stored column-major so that an in-row step over many rows walks
/// contiguous memory. A crossbar is not thread-safe; distinct instances share
/// nothing.
class Crossbar {
public:
    explicit Crossbar(std::size_t n) : Crossbar(n, n) {}
    Crossbar(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::uint8_t get(std::size_t r, std::size_t c) const { return cells_[index(r, c)]; }

    /// Loader backdoor: sets a cell without advancing the cycle counter.
    void set(std::size_t r, std::size_t c, std::uint8_t v) { cells_[index(r, c)] = v & 1u; }
    void flip(std::size_t r, std::size_t c) { cells_[index(r, c)] ^= 1u; }

    /// Applies one gate step to all lanes; +1 cycle regardless of lane count.
    /// Faults (direct and indirect) are drawn per lane when `faults` is set.
    void apply(const GateStep& step, FaultInjector* faults = nullptr);

    /// Applies steps that occupy pairwise-disjoint partition segments in a
    /// single cycle. An empty list is a no-op.
    void apply_parallel(std::span<const GateStep> steps, FaultInjector* faults = nullptr);

    /// Replaces the partition configuration. `row_partitions` are column
    /// boundaries splitting each row; `col_partitions` are row boundaries.
    void set_partitions(std::vector<std::uint32_t> row_partitions,
                        std::vector<std::uint32_t> col_partitions);

    const std::vector<std::uint32_t>& row_partitions() const { return row_partitions_; }
    const std::vector<std::uint32_t>& col_partitions() const { return col_partitions_; }

    /// Segment index of `offset` along a line of the given orientation.
    std::size_t segment_of(Orientation o, std::uint32_t offset) const;

    BitMatrix read_region(const Rect& rect) const;

    /// Row-parallel write: one cycle per written column.
    void write_region(const Rect& rect, const BitMatrix& bits);

    std::uint64_t cycle_count() const { return cycles_; }
    void add_cycles(std::uint64_t c) { cycles_ += c; }

    std::uint64_t partition_cost() const { return partition_cost_; }
    void set_partition_cost(std::uint64_t c) { partition_cost_ = c; }

    /// Number of distinct cells any step has read or written.
    std::size_t cells_touched() const { return touched_count_; }
    bool touched(std::size_t r, std::size_t c) const { return touched_[index(r, c)] != 0; }

    /// Checks a step against bounds, arity and partition segments without
    /// applying it.
    void check_step(const GateStep& step) const;

private:
    std::size_t index(std::size_t r, std::size_t c) const { return c * rows_ + r; }
    void mark(std::size_t r, std::size_t c);
    void execute(const GateStep& step, FaultInjector* faults);
    std::size_t segment_id(const GateStep& step) const;

    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::uint8_t> cells_;
    std::vector<std::uint8_t> touched_;
    std::size_t touched_count_ = 0;
    std::vector<std::uint32_t> row_partitions_;
    std::vector<std::uint32_t> col_partitions_;
    std::uint64_t cycles_ = 0;
    std::uint64_t partition_cost_ = 1;
};

}  // namespace mpim
