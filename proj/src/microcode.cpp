#include "mpim/microcode.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mpim/fault.hpp"

namespace mpim {

const Port& MicroProgram::input(std::string_view port) const {
    for (const auto& p : inputs) {
        if (p.name == port) return p;
    }
    throw std::out_of_range("no input port '" + std::string(port) + "' in " + name);
}

const Port& MicroProgram::output(std::string_view port) const {
    for (const auto& p : outputs) {
        if (p.name == port) return p;
    }
    throw std::out_of_range("no output port '" + std::string(port) + "' in " + name);
}

std::size_t MicroProgram::output_bits() const {
    std::size_t n = 0;
    for (const auto& p : outputs) n += p.offsets.size();
    return n;
}

std::uint32_t MicroProgram::extent() const {
    std::uint32_t hi = 0;
    auto bump = [&](std::uint32_t o) { hi = std::max(hi, o + 1); };
    for (const auto& p : inputs) std::for_each(p.offsets.begin(), p.offsets.end(), bump);
    for (const auto& p : outputs) std::for_each(p.offsets.begin(), p.offsets.end(), bump);
    for (const auto& s : steps) {
        std::for_each(s.inputs.begin(), s.inputs.end(), bump);
        bump(s.output);
    }
    return hi;
}

std::size_t MicroProgram::gate_count() const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const auto& s) {
        return s.gate != GateKind::Init;
    }));
}

ProgramBuilder::ProgramBuilder(std::string name, std::uint32_t bit_width) {
    prog_.name = std::move(name);
    prog_.bit_width = bit_width;
}

std::uint32_t ProgramBuilder::alloc() { return next_++; }

std::vector<std::uint32_t> ProgramBuilder::alloc(std::size_t count) {
    std::vector<std::uint32_t> cells(count);
    for (auto& c : cells) c = alloc();
    return cells;
}

std::vector<std::uint32_t> ProgramBuilder::add_input(std::string name, std::size_t width) {
    auto cells = alloc(width);
    prog_.inputs.push_back({std::move(name), cells});
    return cells;
}

void ProgramBuilder::add_output(std::string name, std::vector<std::uint32_t> offsets) {
    prog_.outputs.push_back({std::move(name), std::move(offsets)});
}

void ProgramBuilder::init(std::uint32_t cell) {
    prog_.steps.push_back({GateKind::Init, {}, cell});
}

void ProgramBuilder::gate(GateKind g, std::vector<std::uint32_t> inputs, std::uint32_t output) {
    init(output);
    prog_.steps.push_back({g, std::move(inputs), output});
}

MicroProgram ProgramBuilder::build() && {
    std::set<std::uint32_t> used;
    for (const auto& p : prog_.inputs) used.insert(p.offsets.begin(), p.offsets.end());
    for (const auto& p : prog_.outputs) used.insert(p.offsets.begin(), p.offsets.end());
    for (const auto& s : prog_.steps) {
        used.insert(s.inputs.begin(), s.inputs.end());
        used.insert(s.output);
    }
    prog_.cells_per_row = static_cast<std::uint32_t>(used.size());
    return std::move(prog_);
}

void emit_full_adder(ProgramBuilder& b, std::uint32_t a, std::uint32_t bb, std::uint32_t cin,
                     std::uint32_t sum, std::uint32_t carry, const FullAdderCells& s) {
    b.gate(GateKind::Not, {cin}, s.not_cin);
    b.gate(GateKind::Min3, {a, bb, cin}, s.min_abc);
    b.gate(GateKind::Not, {s.min_abc}, carry);
    b.gate(GateKind::Min3, {a, bb, s.not_cin}, s.min_ab_ncin);
    b.gate(GateKind::Min3, {carry, s.not_cin, s.min_ab_ncin}, sum);
}

MicroProgram build_full_adder() {
    ProgramBuilder b("full_adder", 1);
    const auto a = b.add_input("a", 1)[0];
    const auto bb = b.add_input("b", 1)[0];
    const auto cin = b.add_input("cin", 1)[0];
    FullAdderCells s{b.alloc(), b.alloc(), b.alloc()};
    const auto carry = b.alloc();
    const auto sum = b.alloc();
    emit_full_adder(b, a, bb, cin, sum, carry, s);
    b.add_output("sum", {sum});
    b.add_output("carry", {carry});
    return std::move(b).build();
}

MicroProgram build_multiplier(std::uint32_t w) {
    if (w == 0) throw std::invalid_argument("multiplier bit_width must be at least 1");
    if (w > 32) throw std::invalid_argument("multiplier bit_width must be at most 32");
    ProgramBuilder b("mult" + std::to_string(w), w);
    const auto a = b.add_input("a", w);
    const auto bv = b.add_input("b", w);
    const auto na = b.alloc(w);
    const auto nb = b.alloc(w);
    const auto pp = b.alloc(w);
    const std::vector<std::uint32_t> buf[2] = {b.alloc(w), b.alloc(w)};
    const std::uint32_t carry[2] = {b.alloc(), b.alloc()};
    const FullAdderCells fa{b.alloc(), b.alloc(), b.alloc()};
    const auto one = b.alloc();
    const auto zero = b.alloc();
    const auto out = b.alloc(2 * w);

    for (std::uint32_t i = 0; i < w; ++i) b.gate(GateKind::Not, {a[i]}, na[i]);
    for (std::uint32_t i = 0; i < w; ++i) b.gate(GateKind::Not, {bv[i]}, nb[i]);
    b.init(one);
    b.gate(GateKind::Not, {one}, zero);

    // window[k] holds accumulator position j + k after row j - 1
    std::vector<std::uint32_t> window(w);
    b.gate(GateKind::Nor2, {na[0], nb[0]}, out[0]);
    for (std::uint32_t i = 1; i < w; ++i) {
        const auto dst = w == 1 ? out[i] : buf[0][i - 1];
        b.gate(GateKind::Nor2, {na[i], nb[0]}, dst);
        window[i - 1] = dst;
    }
    if (w == 1) {
        b.gate(GateKind::Not, {one}, out[1]);
    } else {
        window[w - 1] = zero;
    }

    for (std::uint32_t j = 1; j < w; ++j) {
        const bool last = j == w - 1;
        const auto& next_buf = buf[j % 2];
        std::vector<std::uint32_t> next(w);
        for (std::uint32_t i = 0; i < w; ++i) b.gate(GateKind::Nor2, {na[i], nb[j]}, pp[i]);
        std::uint32_t cin = zero;
        for (std::uint32_t k = 0; k < w; ++k) {
            const auto sum = k == 0 ? out[j] : (last ? out[j + k] : next_buf[k - 1]);
            std::uint32_t cout;
            if (k == w - 1) {
                cout = last ? out[j + w] : next_buf[w - 1];
            } else {
                cout = carry[k % 2];
            }
            emit_full_adder(b, window[k], pp[k], cin, sum, cout, fa);
            if (k > 0) next[k - 1] = sum;
            cin = cout;
        }
        next[w - 1] = cin;
        window = std::move(next);
    }

    b.add_output("p", out);
    return std::move(b).build();
}

std::vector<Diagnostic> validate(const MicroProgram& prog, std::span<const std::uint32_t> partitions) {
    std::vector<Diagnostic> diags;
    std::set<std::uint32_t> ready;
    std::set<std::uint32_t> written;
    for (const auto& p : prog.inputs) ready.insert(p.offsets.begin(), p.offsets.end());

    auto segment = [&](std::uint32_t off) {
        return std::upper_bound(partitions.begin(), partitions.end(), off) - partitions.begin();
    };

    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        const auto& s = prog.steps[i];
        if (s.inputs.size() != arity(s.gate)) {
            diags.push_back({i, "gate " + std::string(to_string(s.gate)) + " has " +
                                    std::to_string(s.inputs.size()) + " inputs"});
        }
        for (std::size_t k = 0; k < s.inputs.size(); ++k) {
            const auto in = s.inputs[k];
            if (in == s.output) diags.push_back({i, "input aliases output cell " + std::to_string(in)});
            if (std::find(s.inputs.begin(), s.inputs.begin() + static_cast<std::ptrdiff_t>(k), in) !=
                s.inputs.begin() + static_cast<std::ptrdiff_t>(k)) {
                diags.push_back({i, "duplicate input cell " + std::to_string(in)});
            }
            if (!ready.contains(in)) {
                diags.push_back({i, "reads uninitialized cell " + std::to_string(in)});
            }
            if (segment(in) != segment(s.output)) {
                diags.push_back({i, "crosses a partition boundary"});
            }
        }
        ready.insert(s.output);
        if (s.gate != GateKind::Init) written.insert(s.output);
    }
    for (const auto& p : prog.outputs) {
        for (auto off : p.offsets) {
            if (!written.contains(off)) {
                diags.push_back({prog.steps.size(),
                                 "output " + p.name + " cell " + std::to_string(off) + " never written"});
            }
        }
    }
    return diags;
}

namespace {

void set_cell(Crossbar& xbar, Placement where, std::uint32_t lane, std::uint32_t off, std::uint8_t v) {
    if (where.orientation == Orientation::InRow) {
        xbar.set(lane, where.base + off, v);
    } else {
        xbar.set(where.base + off, lane, v);
    }
}

std::uint8_t get_cell(const Crossbar& xbar, Placement where, std::uint32_t lane, std::uint32_t off) {
    return where.orientation == Orientation::InRow ? xbar.get(lane, where.base + off)
                                                   : xbar.get(where.base + off, lane);
}

}  // namespace

std::uint64_t ExecutionResult::word(const MicroProgram& prog, std::size_t lane,
                                    std::size_t port_index) const {
    std::size_t col = 0;
    for (std::size_t p = 0; p < port_index; ++p) col += prog.outputs[p].offsets.size();
    std::uint64_t v = 0;
    const auto width = prog.outputs[port_index].offsets.size();
    for (std::size_t k = 0; k < width; ++k) {
        v |= static_cast<std::uint64_t>(outputs.at(lane, col + k)) << k;
    }
    return v;
}

BitMatrix read_outputs(const MicroProgram& prog, const Crossbar& xbar,
                       std::span<const std::uint32_t> lanes, Placement where) {
    BitMatrix out(lanes.size(), prog.output_bits());
    for (std::size_t l = 0; l < lanes.size(); ++l) {
        std::size_t col = 0;
        for (const auto& p : prog.outputs) {
            for (auto off : p.offsets) out.at(l, col++) = get_cell(xbar, where, lanes[l], off);
        }
    }
    return out;
}

ExecutionResult execute(const MicroProgram& prog, Crossbar& xbar, std::span<const std::uint32_t> lanes,
                        FaultInjector* faults, Placement where, StepObserver* observer) {
    const std::size_t line = where.orientation == Orientation::InRow ? xbar.cols() : xbar.rows();
    const auto span = prog.extent();
    if (span == 0 || where.base + span > line ||
        xbar.segment_of(where.orientation, where.base) !=
            xbar.segment_of(where.orientation, where.base + span - 1)) {
        throw CrossbarError("program " + prog.name + " does not fit in one partition segment");
    }
    if (auto diags = validate(prog); !diags.empty()) {
        throw CrossbarError("program " + prog.name + " step " + std::to_string(diags.front().step) +
                            ": " + diags.front().message);
    }

    GateStep step;
    step.orientation = where.orientation;
    step.lanes.assign(lanes.begin(), lanes.end());
    for (const auto& ps : prog.steps) {
        step.gate = ps.gate;
        step.inputs.resize(ps.inputs.size());
        for (std::size_t k = 0; k < ps.inputs.size(); ++k) step.inputs[k] = where.base + ps.inputs[k];
        step.output = where.base + ps.output;
        if (observer) observer->before(step, xbar);
        xbar.apply(step, faults);
        if (observer) observer->after(step, xbar);
    }

    ExecutionResult r;
    r.outputs = read_outputs(prog, xbar, lanes, where);
    r.cycles = prog.steps.size();
    r.area_cells = prog.cells_per_row;
    return r;
}

void load_word(Crossbar& xbar, std::uint32_t lane, const Port& port, std::uint64_t value,
               Placement where) {
    for (std::size_t k = 0; k < port.offsets.size(); ++k) {
        set_cell(xbar, where, lane, port.offsets[k], static_cast<std::uint8_t>((value >> k) & 1u));
    }
}

std::uint64_t read_word(const Crossbar& xbar, std::uint32_t lane, const Port& port, Placement where) {
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < port.offsets.size(); ++k) {
        v |= static_cast<std::uint64_t>(get_cell(xbar, where, lane, port.offsets[k])) << k;
    }
    return v;
}

namespace {

std::string join(const std::vector<std::uint32_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::uint32_t> split_offsets(std::string_view s) {
    std::vector<std::uint32_t> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string_view::npos) comma = s.size();
        out.push_back(static_cast<std::uint32_t>(std::stoul(std::string(s.substr(pos, comma - pos)))));
        pos = comma + 1;
    }
    return out;
}

std::string_view after_prefix(std::string_view tok, std::string_view prefix, std::size_t line) {
    if (tok.substr(0, prefix.size()) != prefix) {
        throw std::runtime_error("netlist line " + std::to_string(line) + ": expected '" +
                                 std::string(prefix) + "'");
    }
    return tok.substr(prefix.size());
}

}  // namespace

void write_netlist(std::ostream& os, const MicroProgram& prog) {
    os << "# " << prog.name << ": " << prog.steps.size() << " steps, " << prog.gate_count()
       << " gates, " << prog.cells_per_row << " cells per row\n";
    os << "PROGRAM " << prog.name << " bits=" << prog.bit_width << "\n";
    for (const auto& p : prog.inputs) os << "INPUT " << p.name << " " << join(p.offsets) << "\n";
    for (const auto& p : prog.outputs) os << "OUTPUT " << p.name << " " << join(p.offsets) << "\n";
    for (const auto& s : prog.steps) {
        os << "STEP " << to_string(s.gate) << " row in=" << join(s.inputs) << " out=" << s.output
           << "\n";
    }
}

MicroProgram read_netlist(std::istream& is) {
    MicroProgram prog;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        if (raw.empty() || raw[0] == '#') continue;
        std::istringstream ls(raw);
        std::string kind;
        ls >> kind;
        if (kind == "PROGRAM") {
            std::string bits;
            ls >> prog.name >> bits;
            prog.bit_width = static_cast<std::uint32_t>(std::stoul(std::string(after_prefix(bits, "bits=", lineno))));
        } else if (kind == "INPUT" || kind == "OUTPUT") {
            Port p;
            std::string offs;
            ls >> p.name >> offs;
            p.offsets = split_offsets(offs);
            (kind == "INPUT" ? prog.inputs : prog.outputs).push_back(std::move(p));
        } else if (kind == "STEP") {
            std::string gate, orient, in, out;
            ls >> gate >> orient >> in >> out;
            if (parse_orientation(orient) != Orientation::InRow) {
                throw std::runtime_error("netlist line " + std::to_string(lineno) +
                                         ": programs are row-oriented");
            }
            ProgramStep s;
            s.gate = parse_gate(gate);
            s.inputs = split_offsets(after_prefix(in, "in=", lineno));
            s.output = static_cast<std::uint32_t>(std::stoul(std::string(after_prefix(out, "out=", lineno))));
            prog.steps.push_back(std::move(s));
        } else {
            throw std::runtime_error("netlist line " + std::to_string(lineno) + ": unknown record '" +
                                     kind + "'");
        }
    }
    std::set<std::uint32_t> used;
    for (const auto& p : prog.inputs) used.insert(p.offsets.begin(), p.offsets.end());
    for (const auto& p : prog.outputs) used.insert(p.offsets.begin(), p.offsets.end());
    for (const auto& s : prog.steps) {
        used.insert(s.inputs.begin(), s.inputs.end());
        used.insert(s.output);
    }
    prog.cells_per_row = static_cast<std::uint32_t>(used.size());
    return prog;
}

}  // namespace mpim
