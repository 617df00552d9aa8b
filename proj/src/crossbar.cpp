#include "mpim/crossbar.hpp"

#include <algorithm>
#include <array>

#include "mpim/fault.hpp"

namespace mpim {

std::size_t arity(GateKind g) {
    switch (g) {
        case GateKind::Init: return 0;
        case GateKind::Not: return 1;
        case GateKind::Nor2:
        case GateKind::Nand2:
        case GateKind::Or2: return 2;
        case GateKind::Min3: return 3;
    }
    return 0;
}

std::string_view to_string(GateKind g) {
    switch (g) {
        case GateKind::Init: return "INIT";
        case GateKind::Not: return "NOT";
        case GateKind::Nor2: return "NOR2";
        case GateKind::Nand2: return "NAND2";
        case GateKind::Or2: return "OR2";
        case GateKind::Min3: return "MIN3";
    }
    return "?";
}

std::string_view to_string(Orientation o) {
    return o == Orientation::InRow ? "row" : "col";
}

GateKind parse_gate(std::string_view s) {
    for (auto g : {GateKind::Init, GateKind::Not, GateKind::Nor2, GateKind::Nand2, GateKind::Or2,
                   GateKind::Min3}) {
        if (to_string(g) == s) return g;
    }
    throw CrossbarError("unknown gate '" + std::string(s) + "'");
}

Orientation parse_orientation(std::string_view s) {
    if (s == "row") return Orientation::InRow;
    if (s == "col") return Orientation::InColumn;
    throw CrossbarError("unknown orientation '" + std::string(s) + "'");
}

std::uint8_t evaluate(GateKind g, std::span<const std::uint8_t> in) {
    if (in.size() != arity(g)) throw CrossbarError("gate arity mismatch");
    switch (g) {
        case GateKind::Init: return 1;
        case GateKind::Not: return in[0] ^ 1u;
        case GateKind::Nor2: return (in[0] | in[1]) ^ 1u;
        case GateKind::Nand2: return (in[0] & in[1]) ^ 1u;
        case GateKind::Or2: return in[0] | in[1];
        case GateKind::Min3: return (in[0] + in[1] + in[2]) < 2 ? 1 : 0;
    }
    return 0;
}

Crossbar::Crossbar(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), cells_(rows * cols, 0), touched_(rows * cols, 0) {
    if (rows == 0 || cols == 0) throw CrossbarError("crossbar dimensions must be positive");
}

void Crossbar::mark(std::size_t r, std::size_t c) {
    auto& t = touched_[index(r, c)];
    if (!t) {
        t = 1;
        ++touched_count_;
    }
}

std::size_t Crossbar::segment_of(Orientation o, std::uint32_t offset) const {
    const auto& bounds = o == Orientation::InRow ? row_partitions_ : col_partitions_;
    return static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), offset) -
                                    bounds.begin());
}

void Crossbar::check_step(const GateStep& step) const {
    if (step.inputs.size() != arity(step.gate)) {
        throw CrossbarError("gate " + std::string(to_string(step.gate)) + " expects " +
                            std::to_string(arity(step.gate)) + " inputs, got " +
                            std::to_string(step.inputs.size()));
    }
    const bool in_row = step.orientation == Orientation::InRow;
    const std::size_t line = in_row ? cols_ : rows_;
    const std::size_t lanes = in_row ? rows_ : cols_;
    if (step.output >= line) throw CrossbarError("output offset out of range");
    for (std::size_t i = 0; i < step.inputs.size(); ++i) {
        if (step.inputs[i] >= line) throw CrossbarError("input offset out of range");
        if (step.inputs[i] == step.output) throw CrossbarError("input offset equals output offset");
        for (std::size_t j = 0; j < i; ++j) {
            if (step.inputs[j] == step.inputs[i]) throw CrossbarError("duplicate input offset");
        }
    }
    for (auto l : step.lanes) {
        if (l >= lanes) throw CrossbarError("lane index out of range");
    }
    const std::size_t seg = segment_of(step.orientation, step.output);
    for (auto in : step.inputs) {
        if (segment_of(step.orientation, in) != seg) {
            throw CrossbarError("gate step crosses a partition boundary");
        }
    }
}

std::size_t Crossbar::segment_id(const GateStep& step) const {
    return segment_of(step.orientation, step.output);
}

void Crossbar::execute(const GateStep& step, FaultInjector* faults) {
    const bool in_row = step.orientation == Orientation::InRow;
    const std::size_t n_in = step.inputs.size();
    const std::size_t n_lanes = step.lanes.size();
    auto cell = [&](std::uint32_t lane, std::uint32_t offset) -> std::size_t {
        return in_row ? index(lane, offset) : index(offset, lane);
    };

    if (faults != nullptr && n_in > 0) {
        faults->for_each_fault(FaultInjector::Channel::Input, n_lanes * n_in, [&](std::size_t i) {
            cells_[cell(step.lanes[i / n_in], step.inputs[i % n_in])] ^= 1u;
        });
    }

    std::array<std::uint8_t, 3> in{};
    for (auto lane : step.lanes) {
        for (std::size_t k = 0; k < n_in; ++k) in[k] = cells_[cell(lane, step.inputs[k])];
        cells_[cell(lane, step.output)] = evaluate(step.gate, std::span(in.data(), n_in));
    }

    if (faults != nullptr) {
        const auto ch = step.gate == GateKind::Init ? FaultInjector::Channel::Write
                                                    : FaultInjector::Channel::Gate;
        faults->for_each_fault(ch, n_lanes, [&](std::size_t i) {
            cells_[cell(step.lanes[i], step.output)] ^= 1u;
        });
    }

    for (auto lane : step.lanes) {
        if (in_row) {
            mark(lane, step.output);
            for (std::size_t k = 0; k < n_in; ++k) mark(lane, step.inputs[k]);
        } else {
            mark(step.output, lane);
            for (std::size_t k = 0; k < n_in; ++k) mark(step.inputs[k], lane);
        }
    }
}

void Crossbar::apply(const GateStep& step, FaultInjector* faults) {
    check_step(step);
    execute(step, faults);
    ++cycles_;
}

void Crossbar::apply_parallel(std::span<const GateStep> steps, FaultInjector* faults) {
    if (steps.empty()) return;
    std::vector<std::size_t> used;
    for (const auto& s : steps) {
        check_step(s);
        if (s.orientation != steps.front().orientation) {
            throw CrossbarError("parallel partition steps must share an orientation");
        }
        const auto seg = segment_id(s);
        if (std::find(used.begin(), used.end(), seg) != used.end()) {
            throw CrossbarError("two parallel steps target the same partition segment");
        }
        used.push_back(seg);
    }
    for (const auto& s : steps) execute(s, faults);
    ++cycles_;
}

void Crossbar::set_partitions(std::vector<std::uint32_t> row_partitions,
                              std::vector<std::uint32_t> col_partitions) {
    auto check = [](const std::vector<std::uint32_t>& b, std::size_t n, const char* what) {
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (b[i] < 1 || b[i] > n - 1) {
                throw CrossbarError(std::string(what) + " boundary " + std::to_string(b[i]) +
                                    " outside [1, " + std::to_string(n - 1) + "]");
            }
            if (i > 0 && b[i] <= b[i - 1]) {
                throw CrossbarError(std::string(what) + " boundaries must be strictly increasing");
            }
        }
    };
    check(row_partitions, cols_, "row partition");
    check(col_partitions, rows_, "column partition");
    row_partitions_ = std::move(row_partitions);
    col_partitions_ = std::move(col_partitions);
    cycles_ += partition_cost_;
}

BitMatrix Crossbar::read_region(const Rect& rect) const {
    if (rect.row + rect.rows > rows_ || rect.col + rect.cols > cols_) {
        throw CrossbarError("read region out of bounds");
    }
    BitMatrix out(rect.rows, rect.cols);
    for (std::size_t r = 0; r < rect.rows; ++r) {
        for (std::size_t c = 0; c < rect.cols; ++c) out.at(r, c) = get(rect.row + r, rect.col + c);
    }
    return out;
}

void Crossbar::write_region(const Rect& rect, const BitMatrix& bits) {
    if (rect.row + rect.rows > rows_ || rect.col + rect.cols > cols_) {
        throw CrossbarError("write region out of bounds");
    }
    if (bits.rows != rect.rows || bits.cols != rect.cols) {
        throw CrossbarError("write data shape does not match region");
    }
    for (std::size_t r = 0; r < rect.rows; ++r) {
        for (std::size_t c = 0; c < rect.cols; ++c) {
            set(rect.row + r, rect.col + c, bits.at(r, c));
            mark(rect.row + r, rect.col + c);
        }
    }
    cycles_ += rect.cols;
}

}  // namespace mpim
