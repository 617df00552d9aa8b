#include "mpim/tmr.hpp"

#include <algorithm>
#include <stdexcept>

#include "mpim/fault.hpp"

namespace mpim {

std::string_view to_string(TmrMode m) {
    switch (m) {
        case TmrMode::None: return "none";
        case TmrMode::Serial: return "serial";
        case TmrMode::Parallel: return "parallel";
        case TmrMode::SemiParallel: return "semi";
    }
    return "?";
}

std::string_view to_string(Voting v) { return v == Voting::Min3 ? "min3" : "ideal"; }

TmrMode parse_tmr_mode(std::string_view s) {
    if (s == "none") return TmrMode::None;
    if (s == "serial") return TmrMode::Serial;
    if (s == "parallel") return TmrMode::Parallel;
    if (s == "semi" || s == "semi_parallel") return TmrMode::SemiParallel;
    throw std::invalid_argument("unknown TMR mode '" + std::string(s) + "'");
}

Voting parse_voting(std::string_view s) {
    if (s == "min3") return Voting::Min3;
    if (s == "ideal") return Voting::Ideal;
    throw std::invalid_argument("unknown voting mode '" + std::string(s) + "'");
}

std::optional<std::uint64_t> vote_per_element_reference(std::span<const std::uint64_t, 3> c) {
    if (c[0] == c[1] || c[0] == c[2]) return c[0];
    if (c[1] == c[2]) return c[1];
    return std::nullopt;
}

std::uint64_t vote_min3(Crossbar& xbar, const VoteSpec& spec, FaultInjector* faults, Voting voting) {
    const auto bits = spec.out.size();
    for (const auto& c : spec.copies) {
        if (c.size() != bits) throw CrossbarError("vote copies and output differ in shape");
    }
    FaultInjector* f = voting == Voting::Ideal ? nullptr : faults;
    const auto start = xbar.cycle_count();
    GateStep step;
    step.orientation = spec.orientation;
    step.lanes = spec.lanes;
    for (std::size_t b = 0; b < bits; ++b) {
        step.gate = GateKind::Init;
        step.inputs.clear();
        step.output = spec.scratch;
        xbar.apply(step, f);
        step.gate = GateKind::Min3;
        step.inputs = {spec.copies[0][b], spec.copies[1][b], spec.copies[2][b]};
        xbar.apply(step, f);

        step.gate = GateKind::Init;
        step.inputs.clear();
        step.output = spec.out[b];
        xbar.apply(step, f);
        step.gate = GateKind::Not;
        step.inputs = {spec.scratch};
        xbar.apply(step, f);
    }
    return xbar.cycle_count() - start;
}

namespace {

std::vector<std::uint32_t> output_cells(const MicroProgram& prog, std::uint32_t base) {
    std::vector<std::uint32_t> cells;
    for (const auto& p : prog.outputs) {
        for (auto off : p.offsets) cells.push_back(base + off);
    }
    return cells;
}

/// Same program with its output word moved to [first, first + output_bits).
MicroProgram with_outputs_at(const MicroProgram& prog, std::uint32_t first) {
    MicroProgram out = prog;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> map;
    std::uint32_t next = first;
    for (auto& p : out.outputs) {
        for (auto& off : p.offsets) {
            map.emplace_back(off, next);
            off = next++;
        }
    }
    auto remap = [&](std::uint32_t& off) {
        for (const auto& [from, to] : map) {
            if (off == from) {
                off = to;
                return;
            }
        }
    };
    for (auto& s : out.steps) {
        for (auto& in : s.inputs) remap(in);
        remap(s.output);
    }
    return out;
}

std::uint64_t gate_faults(const FaultInjector* f) {
    return f == nullptr ? 0 : f->fault_count(FaultInjector::Channel::Gate);
}

/// NOT-NOT copy of `cells` from `src` to each of `dsts` via `scratch`, all
/// lanes in parallel. Returns cycles spent.
std::uint64_t replicate(Crossbar& xbar, Orientation o, std::span<const std::uint32_t> lanes, std::uint32_t src,
                        std::uint32_t scratch, std::span<const std::uint32_t> dsts, FaultInjector* faults) {
    const auto start = xbar.cycle_count();
    GateStep step;
    step.orientation = o;
    step.lanes.assign(lanes.begin(), lanes.end());
    auto emit = [&](GateKind g, std::vector<std::uint32_t> in, std::uint32_t out) {
        step.gate = g;
        step.inputs = std::move(in);
        step.output = out;
        xbar.apply(step, faults);
    };
    emit(GateKind::Init, {}, scratch);
    emit(GateKind::Not, {src}, scratch);
    for (auto d : dsts) {
        emit(GateKind::Init, {}, d);
        emit(GateKind::Not, {scratch}, d);
    }
    return xbar.cycle_count() - start;
}

void require_one_segment(const Crossbar& xbar, std::uint32_t lo, std::uint32_t hi_exclusive) {
    if (hi_exclusive > xbar.cols() ||
        xbar.segment_of(Orientation::InRow, lo) != xbar.segment_of(Orientation::InRow, hi_exclusive - 1)) {
        throw CrossbarError("TMR layout needs " + std::to_string(hi_exclusive - lo) +
                            " cells in one partition segment");
    }
}

}  // namespace

TmrFootprint footprint(const MicroProgram& prog, const TmrPlan& plan, std::span<const std::uint32_t> lanes) {
    const auto e = prog.extent();
    const auto o = static_cast<std::uint32_t>(prog.output_bits());
    std::uint32_t hi_row = 0, lo_row = UINT32_MAX;
    for (auto l : lanes) {
        hi_row = std::max(hi_row, l);
        lo_row = std::min(lo_row, l);
    }
    const auto rows = lanes.empty() ? 0u : hi_row + 1;
    switch (plan.mode) {
        case TmrMode::None: return {e, rows};
        case TmrMode::Serial: return {e + 2 * o + 1, rows};
        case TmrMode::Parallel: return {3 * (e + 1), rows};
        case TmrMode::SemiParallel: {
            const auto g = lanes.empty() ? 0u : hi_row - lo_row + 1;
            return {e, lanes.empty() ? 0u : lo_row + 3 * g + 1};
        }
    }
    return {};
}

TmrResult run_tmr(const MicroProgram& prog, Crossbar& xbar, std::span<const std::uint32_t> lanes,
                  FaultInjector* faults, const TmrPlan& plan, std::uint32_t base) {
    TmrResult res;
    const auto e = prog.extent();
    const auto o = static_cast<std::uint32_t>(prog.output_bits());
    const std::uint64_t steps = prog.steps.size();

    switch (plan.mode) {
        case TmrMode::None: {
            static_cast<ExecutionResult&>(res) = execute(prog, xbar, lanes, faults, {base});
            res.program_cycles = res.cycles;
            return res;
        }

        case TmrMode::Serial: {
            const auto scratch = base + e + 2 * o;
            require_one_segment(xbar, base, scratch + 1);
            const MicroProgram copy[3] = {prog, with_outputs_at(prog, e), with_outputs_at(prog, e + o)};
            VoteSpec vote;
            vote.lanes.assign(lanes.begin(), lanes.end());
            vote.scratch = scratch;
            for (int k = 0; k < 3; ++k) {
                res.copies[k] = execute(copy[k], xbar, lanes, faults, {base}).outputs;
                vote.copies[k] = output_cells(copy[k], base);
            }
            vote.out = vote.copies[0];
            res.program_cycles = 3 * steps;
            const auto before = gate_faults(faults);
            res.vote_cycles = vote_min3(xbar, vote, faults, plan.voting);
            res.vote_faults = gate_faults(faults) - before;
            res.area_cells = prog.cells_per_row + 2ull * o + 1;
            break;
        }

        case TmrMode::Parallel: {
            const auto seg = e + 1;
            const auto scratch = base + e;
            require_one_segment(xbar, base, base + 3 * seg);
            const auto saved_rows = xbar.row_partitions();
            const auto saved_cols = xbar.col_partitions();

            const auto setup_start = xbar.cycle_count();
            for (const auto& p : prog.inputs) {
                for (auto off : p.offsets) {
                    const std::uint32_t dsts[2] = {base + seg + off, base + 2 * seg + off};
                    replicate(xbar, Orientation::InRow, lanes, base + off, scratch, dsts, faults);
                }
            }
            auto split = saved_rows;
            split.push_back(base + seg);
            split.push_back(base + 2 * seg);
            std::sort(split.begin(), split.end());
            xbar.set_partitions(split, saved_cols);
            res.setup_cycles = xbar.cycle_count() - setup_start;

            std::array<GateStep, 3> lockstep;
            for (auto& s : lockstep) s.lanes.assign(lanes.begin(), lanes.end());
            for (const auto& ps : prog.steps) {
                for (std::uint32_t k = 0; k < 3; ++k) {
                    auto& s = lockstep[k];
                    const auto shift = base + k * seg;
                    s.gate = ps.gate;
                    s.inputs.resize(ps.inputs.size());
                    for (std::size_t i = 0; i < ps.inputs.size(); ++i) s.inputs[i] = shift + ps.inputs[i];
                    s.output = shift + ps.output;
                }
                xbar.apply_parallel(lockstep, faults);
            }
            res.program_cycles = steps;

            VoteSpec vote;
            vote.lanes.assign(lanes.begin(), lanes.end());
            vote.scratch = scratch;
            for (std::uint32_t k = 0; k < 3; ++k) {
                res.copies[k] = read_outputs(prog, xbar, lanes, {base + k * seg});
                vote.copies[k] = output_cells(prog, base + k * seg);
            }
            vote.out = vote.copies[0];
            const auto vote_start = xbar.cycle_count();
            xbar.set_partitions(saved_rows, saved_cols);
            const auto before = gate_faults(faults);
            vote_min3(xbar, vote, faults, plan.voting);
            res.vote_faults = gate_faults(faults) - before;
            res.vote_cycles = xbar.cycle_count() - vote_start;
            res.area_cells = 3ull * prog.cells_per_row + 1;
            break;
        }

        case TmrMode::SemiParallel: {
            if (lanes.empty()) throw CrossbarError("semi-parallel TMR needs at least one lane");
            const auto [lo_it, hi_it] = std::minmax_element(lanes.begin(), lanes.end());
            const auto lo = *lo_it;
            const auto group = *hi_it - lo + 1;
            const auto scratch_row = lo + 3 * group;
            if (scratch_row >= xbar.rows()) {
                throw CrossbarError("semi-parallel TMR needs " + std::to_string(scratch_row + 1) + " rows");
            }
            std::vector<std::uint32_t> input_cols;
            for (const auto& p : prog.inputs) {
                for (auto off : p.offsets) input_cols.push_back(base + off);
            }
            const auto setup_start = xbar.cycle_count();
            for (auto r : lanes) {
                const std::uint32_t dsts[2] = {r + group, r + 2 * group};
                replicate(xbar, Orientation::InColumn, input_cols, r, scratch_row, dsts, faults);
            }
            res.setup_cycles = xbar.cycle_count() - setup_start;

            std::array<std::vector<std::uint32_t>, 3> rows;
            for (std::uint32_t k = 0; k < 3; ++k) {
                for (auto r : lanes) rows[k].push_back(r + k * group);
            }
            std::vector<std::uint32_t> all;
            for (const auto& r : rows) all.insert(all.end(), r.begin(), r.end());
            execute(prog, xbar, all, faults, {base});
            res.program_cycles = steps;
            for (int k = 0; k < 3; ++k) res.copies[k] = read_outputs(prog, xbar, rows[k], {base});

            VoteSpec vote;
            vote.orientation = Orientation::InColumn;
            vote.copies = rows;
            vote.out = rows[0];
            vote.scratch = scratch_row;
            vote.lanes = output_cells(prog, base);
            const auto before = gate_faults(faults);
            res.vote_cycles = vote_min3(xbar, vote, faults, plan.voting);
            res.vote_faults = gate_faults(faults) - before;
            res.area_cells = 3ull * prog.cells_per_row;
            break;
        }
    }

    res.cycles = res.program_cycles + res.vote_cycles;
    res.outputs = read_outputs(prog, xbar, lanes, {base});
    return res;
}

}  // namespace mpim
