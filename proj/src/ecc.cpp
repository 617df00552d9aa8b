#include "mpim/ecc.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "mpim/fault.hpp"

namespace mpim {

BlockGeometry::BlockGeometry(std::size_t r, std::size_t c, std::size_t block) : rows(r), cols(c), m(block) {
    if (m < 2) throw std::invalid_argument("block side m must be at least 2");
    if (rows == 0 || cols == 0 || rows % m != 0 || cols % m != 0) {
        throw std::invalid_argument("block side m=" + std::to_string(m) + " must divide crossbar " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
}

ParityBanks encode(const Crossbar& xbar, const BlockGeometry& geom, int banks) {
    if (banks != 2 && banks != 3) throw std::invalid_argument("banks must be 2 or 3");
    if (xbar.rows() != geom.rows || xbar.cols() != geom.cols) {
        throw std::invalid_argument("geometry does not match crossbar");
    }
    ParityBanks pb;
    pb.geom = geom;
    pb.banks = banks;
    const auto size = geom.blocks() * geom.m;
    pb.leading.assign(size, 0);
    pb.counter.assign(size, 0);
    pb.row_aux.assign(banks == 3 ? size : 0, 0);
    const auto m = geom.m;
    for (std::size_t r = 0; r < geom.rows; ++r) {
        for (std::size_t c = 0; c < geom.cols; ++c) {
            if (!xbar.get(r, c)) continue;
            const auto b = geom.block_of(r, c);
            const auto i = r % m;
            const auto j = c % m;
            pb.lead(b, leading_index(i, j, m)) ^= 1u;
            pb.ctr(b, counter_index(i, j, m)) ^= 1u;
            if (banks == 3) pb.aux(b, i) ^= 1u;
        }
    }
    return pb;
}

namespace {

void check_single_line(std::span<const Change> changes) {
    if (changes.size() < 2) return;
    const bool same_col = std::all_of(changes.begin(), changes.end(),
                                      [&](const Change& c) { return c.col == changes[0].col; });
    const bool same_row = std::all_of(changes.begin(), changes.end(),
                                      [&](const Change& c) { return c.row == changes[0].row; });
    if (!same_col && !same_row) {
        throw std::invalid_argument("change list mixes rows and columns; not a single parallel step");
    }
}

}  // namespace

std::uint64_t update_incremental(ParityBanks& banks, std::span<const Change> changes,
                                 const EccCycleModel& model) {
    check_single_line(changes);
    if (changes.empty()) return 0;
    const auto m = banks.geom.m;
    for (const auto& ch : changes) {
        if (ch.row >= banks.geom.rows || ch.col >= banks.geom.cols) {
            throw std::out_of_range("change outside the protected crossbar");
        }
        if (((ch.old_bit ^ ch.new_bit) & 1u) == 0) continue;
        const auto b = banks.geom.block_of(ch.row, ch.col);
        const auto i = ch.row % m;
        const auto j = ch.col % m;
        banks.lead(b, leading_index(i, j, m)) ^= 1u;
        banks.ctr(b, counter_index(i, j, m)) ^= 1u;
        if (banks.banks == 3) banks.aux(b, i) ^= 1u;
    }
    return model.diagonal_update();
}

NaiveParity encode_naive(const Crossbar& xbar, std::size_t group) {
    NaiveParity p;
    p.rows = xbar.rows();
    p.cols = xbar.cols();
    p.group = group == 0 ? xbar.cols() : group;
    if (p.cols % p.group != 0) throw std::invalid_argument("parity group must divide the row width");
    p.bits.assign(p.rows * (p.cols / p.group), 0);
    for (std::size_t r = 0; r < p.rows; ++r) {
        for (std::size_t c = 0; c < p.cols; ++c) p.at(r, c / p.group) ^= xbar.get(r, c);
    }
    return p;
}

NaiveUpdate update_naive_horizontal(NaiveParity& parity, std::span<const Change> changes,
                                    const EccCycleModel& model) {
    check_single_line(changes);
    NaiveUpdate u;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> load;
    std::size_t worst = 0;
    for (const auto& ch : changes) {
        const auto key = std::make_pair<std::size_t, std::size_t>(ch.row, ch.col / parity.group);
        worst = std::max(worst, ++load[key]);
        if ((ch.old_bit ^ ch.new_bit) & 1u) {
            parity.at(key.first, key.second) ^= 1u;
            ++u.parity_flips;
        }
    }
    u.cycles = worst * model.naive_per_bit();
    return u;
}

Syndrome syndrome(const Crossbar& xbar, const ParityBanks& banks, std::size_t block) {
    const auto& g = banks.geom;
    const auto m = g.m;
    const auto r0 = (block / g.block_cols()) * m;
    const auto c0 = (block % g.block_cols()) * m;
    std::vector<std::uint8_t> lead(m, 0), ctr(m, 0), aux(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!xbar.get(r0 + i, c0 + j)) continue;
            lead[leading_index(i, j, m)] ^= 1u;
            ctr[counter_index(i, j, m)] ^= 1u;
            aux[i] ^= 1u;
        }
    }
    Syndrome s;
    for (std::size_t d = 0; d < m; ++d) {
        if (lead[d] != banks.leading[block * m + d]) s.leading.push_back(static_cast<std::uint32_t>(d));
        if (ctr[d] != banks.counter[block * m + d]) s.counter.push_back(static_cast<std::uint32_t>(d));
        if (banks.banks == 3 && aux[d] != banks.row_aux[block * m + d]) {
            s.row_aux.push_back(static_cast<std::uint32_t>(d));
        }
    }
    return s;
}

std::string_view to_string(BlockStatus s) {
    switch (s) {
        case BlockStatus::Clean: return "clean";
        case BlockStatus::Corrected: return "corrected";
        case BlockStatus::Uncorrectable: return "uncorrectable";
    }
    return "?";
}

std::size_t EccReport::count(BlockStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(blocks.begin(), blocks.end(), [s](const BlockReport& b) { return b.status == s; }));
}

namespace {

BlockReport decode_block(Crossbar& xbar, const ParityBanks& banks, std::size_t block) {
    const auto& g = banks.geom;
    const auto m = g.m;
    BlockReport rep;
    rep.block_row = block / g.block_cols();
    rep.block_col = block % g.block_cols();
    const auto r0 = rep.block_row * m;
    const auto c0 = rep.block_col * m;

    const auto s = syndrome(xbar, banks, block);
    if (s.clean()) return rep;
    rep.status = BlockStatus::Uncorrectable;
    if (s.leading.size() != 1 || s.counter.size() != 1) return rep;

    const auto d = s.leading[0];
    const auto c = s.counter[0];
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = (d + i) % m;
        if (counter_index(i, j, m) != c) continue;
        if (banks.banks == 3 && (s.row_aux.size() != 1 || s.row_aux[0] != i)) continue;
        rep.candidates.push_back({static_cast<std::uint32_t>(r0 + i), static_cast<std::uint32_t>(c0 + j)});
    }
    if (banks.banks == 3 && s.row_aux.size() != 1) {
        rep.candidates.clear();
        return rep;
    }
    if (rep.candidates.size() == 1) {
        const auto cell = rep.candidates.front();
        xbar.flip(cell.row, cell.col);
        rep.corrected.push_back(cell);
        rep.candidates.clear();
        rep.status = BlockStatus::Corrected;
    }
    return rep;
}

}  // namespace

EccReport verify_and_correct(Crossbar& xbar, const ParityBanks& banks, const Rect& region,
                             const EccCycleModel& model) {
    const auto& g = banks.geom;
    if (region.row + region.rows > g.rows || region.col + region.cols > g.cols) {
        throw std::out_of_range("verify region outside the protected crossbar");
    }
    EccReport rep;
    if (region.rows == 0 || region.cols == 0) return rep;
    const auto br0 = region.row / g.m;
    const auto br1 = (region.row + region.rows - 1) / g.m;
    const auto bc0 = region.col / g.m;
    const auto bc1 = (region.col + region.cols - 1) / g.m;
    for (auto br = br0; br <= br1; ++br) {
        for (auto bc = bc0; bc <= bc1; ++bc) rep.blocks.push_back(decode_block(xbar, banks, br * g.block_cols() + bc));
    }
    rep.cycles = model.verify(g.m) + (rep.count(BlockStatus::Corrected) > 0 ? 1 : 0);
    return rep;
}

namespace {

class ParityTracker : public StepObserver {
public:
    ParityTracker(ParityBanks& banks, FaultInjector* faults, const EccOptions& opts)
        : banks_(banks), faults_(faults), opts_(opts) {}

    void before(const GateStep& step, const Crossbar& xbar) override {
        old_.resize(step.lanes.size());
        for (std::size_t l = 0; l < step.lanes.size(); ++l) old_[l] = cell(step, xbar, l);
    }

    void after(const GateStep& step, const Crossbar& xbar) override {
        changes_.clear();
        for (std::size_t l = 0; l < step.lanes.size(); ++l) {
            const bool row = step.orientation == Orientation::InRow;
            changes_.push_back({row ? step.lanes[l] : step.output, row ? step.output : step.lanes[l], old_[l],
                                cell(step, xbar, l)});
        }
        cycles += update_incremental(banks_, changes_, opts_.model);
        if (opts_.faulty_check_bits && faults_ != nullptr) {
            const auto m = banks_.geom.m;
            for (const auto& ch : changes_) {
                const auto b = banks_.geom.block_of(ch.row, ch.col);
                const auto i = ch.row % m;
                const auto j = ch.col % m;
                banks_.lead(b, leading_index(i, j, m)) = faults_->maybe_corrupt_gate(banks_.lead(b, leading_index(i, j, m)));
                banks_.ctr(b, counter_index(i, j, m)) = faults_->maybe_corrupt_gate(banks_.ctr(b, counter_index(i, j, m)));
                if (banks_.banks == 3) banks_.aux(b, i) = faults_->maybe_corrupt_gate(banks_.aux(b, i));
            }
        }
    }

    std::uint64_t cycles = 0;

private:
    static std::uint8_t cell(const GateStep& step, const Crossbar& xbar, std::size_t l) {
        return step.orientation == Orientation::InRow ? xbar.get(step.lanes[l], step.output)
                                                      : xbar.get(step.output, step.lanes[l]);
    }

    ParityBanks& banks_;
    FaultInjector* faults_;
    const EccOptions& opts_;
    std::vector<std::uint8_t> old_;
    std::vector<Change> changes_;
};

}  // namespace

EccExecution run_with_ecc(const MicroProgram& prog, Crossbar& xbar, std::span<const std::uint32_t> lanes,
                          ParityBanks& banks, FaultInjector* faults, std::uint32_t base,
                          const EccOptions& opts) {
    EccExecution out;
    if (!lanes.empty()) {
        std::uint32_t lo_col = UINT32_MAX, hi_col = 0;
        for (const auto& p : prog.inputs) {
            for (auto off : p.offsets) {
                lo_col = std::min(lo_col, base + off);
                hi_col = std::max(hi_col, base + off);
            }
        }
        const auto [lo_row, hi_row] = std::minmax_element(lanes.begin(), lanes.end());
        if (lo_col <= hi_col) {
            const Rect region{*lo_row, lo_col, static_cast<std::size_t>(*hi_row - *lo_row + 1),
                              static_cast<std::size_t>(hi_col - lo_col + 1)};
            out.verify = verify_and_correct(xbar, banks, region, opts.model);
        }
    }
    if (out.verify.uncorrectable()) {
        out.aborted = true;
        return out;
    }
    ParityTracker tracker(banks, faults, opts);
    out.exec = execute(prog, xbar, lanes, faults, Placement{base, Orientation::InRow}, &tracker);
    out.update_cycles = tracker.cycles;
    return out;
}

}  // namespace mpim
