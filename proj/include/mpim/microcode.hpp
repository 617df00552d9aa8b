#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mpim/crossbar.hpp"

namespace mpim {

class FaultInjector;

/// A gate of a micro-program; offsets are relative to the program's base cell.
struct ProgramStep {
    GateKind gate = GateKind::Not;
    std::vector<std::uint32_t> inputs;
    std::uint32_t output = 0;
};

/// Named word of cells, least-significant bit first.
struct Port {
    std::string name;
    std::vector<std::uint32_t> offsets;
};

/// Arithmetic function mapped to a single row (or column) of stateful gates.
/// Immutable once built; shareable across threads.
struct MicroProgram {
    std::string name;
    std::uint32_t bit_width = 0;
    std::vector<ProgramStep> steps;
    std::vector<Port> inputs;
    std::vector<Port> outputs;
    std::uint32_t cells_per_row = 0;

    const Port& input(std::string_view port) const;
    const Port& output(std::string_view port) const;
    std::size_t output_bits() const;
    std::size_t gate_count() const;
    /// One past the highest offset referenced.
    std::uint32_t extent() const;
};

/// Allocates cells left to right and auto-inserts an INIT before every gate.
class ProgramBuilder {
public:
    ProgramBuilder(std::string name, std::uint32_t bit_width);

    std::uint32_t alloc();
    std::vector<std::uint32_t> alloc(std::size_t count);
    std::vector<std::uint32_t> add_input(std::string name, std::size_t width);
    void add_output(std::string name, std::vector<std::uint32_t> offsets);

    void init(std::uint32_t cell);
    void gate(GateKind g, std::vector<std::uint32_t> inputs, std::uint32_t output);

    MicroProgram build() &&;

private:
    MicroProgram prog_;
    std::uint32_t next_ = 0;
};

struct FullAdderCells {
    std::uint32_t not_cin;
    std::uint32_t min_abc;
    std::uint32_t min_ab_ncin;
};

/// carry = NOT MIN3(a,b,cin); sum = MIN3(carry, NOT cin, MIN3(a,b,NOT cin)).
/// Five gates, ten cycles with INITs. Scratch cells may be shared across calls.
void emit_full_adder(ProgramBuilder& b, std::uint32_t a, std::uint32_t bb, std::uint32_t cin,
                     std::uint32_t sum, std::uint32_t carry, const FullAdderCells& scratch);

MicroProgram build_full_adder();

/// Unsigned `bit_width` x `bit_width` -> 2*bit_width shift-and-add multiplier
/// in one row: AND partial products via NOR of complements, ripple-carry rows
/// of full adders.
MicroProgram build_multiplier(std::uint32_t bit_width);

struct Diagnostic {
    std::size_t step = 0;
    std::string message;
};

/// Static checks: arity, operand aliasing, reads of uninitialized cells,
/// steps crossing one of `partitions` (relative offsets), unwritten outputs.
std::vector<Diagnostic> validate(const MicroProgram& prog,
                                 std::span<const std::uint32_t> partitions = {});

/// Where and how a program runs on a crossbar.
struct Placement {
    std::uint32_t base = 0;
    Orientation orientation = Orientation::InRow;
};

struct ExecutionResult {
    BitMatrix outputs;  ///< one row per lane, output ports concatenated
    std::uint64_t cycles = 0;
    std::uint64_t area_cells = 0;
    std::uint64_t setup_cycles = 0;

    /// Output port `port_index` of lane `lane` as an integer.
    std::uint64_t word(const MicroProgram& prog, std::size_t lane, std::size_t port_index = 0) const;
};

/// Hook around every step of `execute`; used by the ECC wrapper to snapshot
/// and fold output changes.
class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void before(const GateStep& /*step*/, const Crossbar& /*xbar*/) {}
    virtual void after(const GateStep& /*step*/, const Crossbar& /*xbar*/) {}
};

/// Runs `prog` over all `lanes` at once; cycles equal the step count whatever
/// the number of lanes. Inputs must already be loaded.
ExecutionResult execute(const MicroProgram& prog, Crossbar& xbar,
                        std::span<const std::uint32_t> lanes, FaultInjector* faults = nullptr,
                        Placement where = {}, StepObserver* observer = nullptr);

/// Extracts the output ports of `prog` for each lane.
BitMatrix read_outputs(const MicroProgram& prog, const Crossbar& xbar,
                       std::span<const std::uint32_t> lanes, Placement where = {});

void load_word(Crossbar& xbar, std::uint32_t lane, const Port& port, std::uint64_t value,
               Placement where = {});
std::uint64_t read_word(const Crossbar& xbar, std::uint32_t lane, const Port& port,
                        Placement where = {});

/// Line-oriented netlist: `STEP <gate> <orientation> in=<offsets> out=<offset>`
/// preceded by `#` comment, `PROGRAM`, `INPUT` and `OUTPUT` header lines.
void write_netlist(std::ostream& os, const MicroProgram& prog);
MicroProgram read_netlist(std::istream& is);

}  // namespace mpim
