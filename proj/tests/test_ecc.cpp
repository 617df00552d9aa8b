#include <doctest.h>

#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "mpim/ecc.hpp"
#include "mpim/fault.hpp"

using namespace mpim;

namespace {

void randomize(Crossbar& x, std::mt19937_64& rng) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) x.set(r, c, static_cast<std::uint8_t>(rng() & 1u));
    }
}

std::vector<std::uint32_t> iota_lanes(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
}

}  // namespace

TEST_CASE("encode small examples") {
    Crossbar zero(16);
    const auto pz = encode(zero, BlockGeometry(16, 16));
    CHECK(std::all_of(pz.leading.begin(), pz.leading.end(), [](auto b) { return b == 0; }));
    CHECK(std::all_of(pz.counter.begin(), pz.counter.end(), [](auto b) { return b == 0; }));

    Crossbar one(16);
    one.set(0, 0, 1);
    auto p1 = encode(one, BlockGeometry(16, 16));
    CHECK(p1.lead(0, 0) == 1);
    CHECK(p1.ctr(0, 0) == 1);
    CHECK(p1.aux(0, 0) == 1);
    CHECK(std::accumulate(p1.leading.begin(), p1.leading.end(), 0) == 1);
    CHECK(std::accumulate(p1.counter.begin(), p1.counter.end(), 0) == 1);

    Crossbar x(32);
    x.set(3, 5, 1);
    x.set(20, 17, 1);
    auto p = encode(x, BlockGeometry(32, 16));
    CHECK(p.lead(0, 2) == 1);
    CHECK(p.ctr(0, 8) == 1);
    CHECK(p.lead(3, (1 + 16 - 4) % 16) == 1);
    CHECK(p.ctr(3, 5) == 1);
}

TEST_CASE("encode agrees with a direct recomputation") {
    std::mt19937_64 rng(8);
    Crossbar x(32);
    randomize(x, rng);
    const std::size_t m = 8;
    auto p = encode(x, BlockGeometry(32, m));
    for (std::size_t b = 0; b < 16; ++b) {
        const auto r0 = (b / 4) * m, c0 = (b % 4) * m;
        for (std::size_t d = 0; d < m; ++d) {
            int lead = 0, ctr = 0, row = 0;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    const int v = x.get(r0 + i, c0 + j);
                    if ((j + m - i) % m == d) lead ^= v;
                    if ((i + j) % m == d) ctr ^= v;
                    if (i == d) row ^= v;
                }
            }
            CHECK(p.lead(b, d) == lead);
            CHECK(p.ctr(b, d) == ctr);
            CHECK(p.aux(b, d) == row);
        }
    }
}

TEST_CASE("geometry validation") {
    CHECK_THROWS_AS(BlockGeometry(64, 1), std::invalid_argument);
    CHECK_THROWS_AS(BlockGeometry(64, 10), std::invalid_argument);
    CHECK_NOTHROW(BlockGeometry(48, 16));
    Crossbar x(32);
    CHECK_THROWS_AS(encode(x, BlockGeometry(64, 16)), std::invalid_argument);
}

TEST_CASE("incremental updates equal re-encoding") {
    std::mt19937_64 rng(17);
    Crossbar x(64);
    randomize(x, rng);
    const BlockGeometry g(64, 16);
    auto banks = encode(x, g);
    for (int step = 0; step < 1000; ++step) {
        std::vector<Change> changes;
        const bool in_row = rng() & 1u;
        const auto line = static_cast<std::uint32_t>(rng() % 64);
        for (std::uint32_t k = 0; k < 64; ++k) {
            if (rng() % 4) continue;
            const auto r = in_row ? k : line;
            const auto c = in_row ? line : k;
            const auto old_bit = x.get(r, c);
            const auto new_bit = static_cast<std::uint8_t>(rng() & 1u);
            x.set(r, c, new_bit);
            changes.push_back({r, c, old_bit, new_bit});
        }
        update_incremental(banks, changes);
    }
    CHECK(banks == encode(x, g));
}

TEST_CASE("no two cells of a block share both diagonals and the row") {
    for (std::size_t m : {3u, 4u, 16u, 17u}) {
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> signatures;
        std::set<std::pair<std::size_t, std::size_t>> diagonal_only;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                signatures.insert({leading_index(i, j, m), counter_index(i, j, m), i});
                diagonal_only.insert({leading_index(i, j, m), counter_index(i, j, m)});
            }
        }
        CHECK(signatures.size() == m * m);
        // odd m: two diagonals suffice; even m: exactly half the pairs collide
        CHECK(diagonal_only.size() == (m % 2 ? m * m : m * m / 2));
    }
}

TEST_CASE("every single flip in a block is corrected") {
    std::mt19937_64 rng(3);
    Crossbar x(16);
    randomize(x, rng);
    const auto banks = encode(x, BlockGeometry(16, 16));
    const auto golden = x.read_region({0, 0, 16, 16});
    for (std::uint32_t r = 0; r < 16; ++r) {
        for (std::uint32_t c = 0; c < 16; ++c) {
            x.flip(r, c);
            const auto rep = verify_and_correct(x, banks, {0, 0, 16, 16});
            REQUIRE(rep.blocks.size() == 1);
            CHECK(rep.blocks[0].status == BlockStatus::Corrected);
            CHECK(rep.blocks[0].corrected == std::vector<Cell>{{r, c}});
            CHECK(x.read_region({0, 0, 16, 16}) == golden);
            CHECK(rep.cycles == 16 * 9 + 1);
        }
    }
    const auto clean = verify_and_correct(x, banks, {0, 0, 16, 16});
    CHECK(clean.count(BlockStatus::Clean) == 1);
    CHECK(clean.cycles == 16 * 9);
}

TEST_CASE("single flips are corrected for odd and small block sides") {
    for (std::size_t m : {3u, 5u, 17u}) {
        std::mt19937_64 rng(m);
        Crossbar x(2 * m);
        randomize(x, rng);
        const auto banks = encode(x, BlockGeometry(2 * m, m));
        for (int t = 0; t < 50; ++t) {
            const auto r = static_cast<std::uint32_t>(rng() % (2 * m));
            const auto c = static_cast<std::uint32_t>(rng() % (2 * m));
            x.flip(r, c);
            const auto rep = verify_and_correct(x, banks, {0, 0, 2 * m, 2 * m});
            CHECK(rep.count(BlockStatus::Corrected) == 1);
            CHECK(rep.count(BlockStatus::Clean) == 3);
            CHECK(syndrome(x, banks, BlockGeometry(2 * m, m).block_of(r, c)).clean());
        }
    }
}

TEST_CASE("two flips in one block are detected, not miscorrected") {
    Crossbar x(16);
    const auto banks = encode(x, BlockGeometry(16, 16));
    x.flip(0, 0);
    x.flip(8, 8);
    const auto before = x.read_region({0, 0, 16, 16});
    const auto rep = verify_and_correct(x, banks, {0, 0, 16, 16});
    CHECK(rep.uncorrectable());
    CHECK(rep.blocks[0].corrected.empty());
    CHECK(x.read_region({0, 0, 16, 16}) == before);

    std::mt19937_64 rng(12);
    int miscorrected = 0;
    for (int t = 0; t < 500; ++t) {
        Crossbar y(16);
        const auto b = encode(y, BlockGeometry(16, 16));
        const auto r1 = rng() % 16, c1 = rng() % 16;
        auto r2 = rng() % 16, c2 = rng() % 16;
        if (r1 == r2 && c1 == c2) continue;
        y.flip(r1, c1);
        y.flip(r2, c2);
        const auto rp = verify_and_correct(y, b, {0, 0, 16, 16});
        miscorrected += rp.blocks[0].status != BlockStatus::Uncorrectable;
    }
    CHECK(miscorrected == 0);
}

TEST_CASE("two banks leave an even-m ambiguity that the row bank resolves") {
    Crossbar x(16);
    const auto two = encode(x, BlockGeometry(16, 16), 2);
    const auto three = encode(x, BlockGeometry(16, 16), 3);
    x.flip(2, 5);
    const auto amb = verify_and_correct(x, two, {0, 0, 16, 16});
    CHECK(amb.blocks[0].status == BlockStatus::Uncorrectable);
    std::set<std::pair<std::uint32_t, std::uint32_t>> cand;
    for (auto c : amb.blocks[0].candidates) cand.insert({c.row, c.col});
    CHECK(cand == std::set<std::pair<std::uint32_t, std::uint32_t>>{{2, 5}, {10, 13}});
    CHECK(x.get(2, 5) == 1);

    const auto fixed = verify_and_correct(x, three, {0, 0, 16, 16});
    CHECK(fixed.blocks[0].status == BlockStatus::Corrected);
    CHECK(x.get(2, 5) == 0);

    Crossbar odd(15);
    const auto odd_two = encode(odd, BlockGeometry(15, 15), 2);
    odd.flip(2, 5);
    CHECK(verify_and_correct(odd, odd_two, {0, 0, 15, 15}).blocks[0].status == BlockStatus::Corrected);
}

TEST_CASE("verify only inspects blocks intersecting the region") {
    Crossbar x(64);
    const auto banks = encode(x, BlockGeometry(64, 16));
    x.flip(40, 40);
    const auto rep = verify_and_correct(x, banks, {0, 0, 20, 20});
    CHECK(rep.blocks.size() == 4);
    CHECK_FALSE(rep.uncorrectable());
    CHECK(rep.count(BlockStatus::Corrected) == 0);
    CHECK(x.get(40, 40) == 1);
    CHECK_THROWS_AS(verify_and_correct(x, banks, {60, 0, 8, 8}), std::out_of_range);
}

TEST_CASE("diagonal update cost is constant in n, naive cost grows with n") {
    const EccCycleModel model;
    std::vector<std::uint64_t> diag, naive_col, naive_row;
    for (std::size_t n : {16u, 32u, 64u}) {
        Crossbar x(n);
        auto banks = encode(x, BlockGeometry(n, 16));
        auto naive = encode_naive(x);

        std::vector<Change> column;  // in-row gate: one column, all rows
        std::vector<Change> row;     // in-column gate: one row, all columns
        for (std::uint32_t k = 0; k < n; ++k) {
            column.push_back({k, 3, 0, 1});
            row.push_back({3, k, 0, 1});
        }
        diag.push_back(update_incremental(banks, column, model));
        CHECK(update_incremental(banks, row, model) == diag.back());
        naive_row.push_back(update_naive_horizontal(naive, column, model).cycles);
        naive_col.push_back(update_naive_horizontal(naive, row, model).cycles);
    }
    CHECK(diag == std::vector<std::uint64_t>(3, model.diagonal_update()));
    CHECK(model.diagonal_update() == 19);
    CHECK(naive_row == std::vector<std::uint64_t>(3, model.naive_per_bit()));
    CHECK(naive_col[0] == 16 * model.naive_per_bit());
    CHECK(static_cast<double>(naive_col[2]) / naive_col[0] == doctest::Approx(4.0).epsilon(0.05));

    ParityBanks b = encode(Crossbar(16), BlockGeometry(16, 16));
    CHECK(update_incremental(b, std::span<const Change>{}) == 0);
    const std::vector<Change> mixed = {{0, 0, 0, 1}, {1, 1, 0, 1}};
    CHECK_THROWS_AS(update_incremental(b, mixed), std::invalid_argument);
}

TEST_CASE("naive parity tracks the data") {
    std::mt19937_64 rng(4);
    Crossbar x(32);
    randomize(x, rng);
    auto naive = encode_naive(x, 8);
    CHECK(naive.bits.size() == 32 * 4);
    std::vector<Change> changes;
    for (std::uint32_t c = 0; c < 32; ++c) {
        const auto old_bit = x.get(5, c);
        x.set(5, c, static_cast<std::uint8_t>(old_bit ^ (c % 3 == 0)));
        changes.push_back({5, c, old_bit, x.get(5, c)});
    }
    const auto u = update_naive_horizontal(naive, changes);
    CHECK(naive == encode_naive(x, 8));
    CHECK(u.cycles == 8 * EccCycleModel{}.naive_per_bit());
    CHECK_THROWS_AS(encode_naive(x, 7), std::invalid_argument);
}

TEST_CASE("protected execution") {
    const auto prog = build_multiplier(4);
    const std::size_t n = 64;
    auto load = [&](Crossbar& x) {
        for (std::uint32_t r = 0; r < 16; ++r) {
            load_word(x, r, prog.input("a"), r);
            load_word(x, r, prog.input("b"), 15 - r);
        }
    };
    const auto lanes = iota_lanes(16);

    SUBCASE("fault-free run keeps parities consistent") {
        Crossbar x(n);
        load(x);
        auto banks = encode(x, BlockGeometry(n, 16));
        const auto res = run_with_ecc(prog, x, lanes, banks);
        CHECK_FALSE(res.aborted);
        CHECK(banks == encode(x, BlockGeometry(n, 16)));
        for (std::uint32_t r = 0; r < 16; ++r) CHECK(res.exec.word(prog, r) == r * (15 - r));
        CHECK(res.update_cycles == prog.steps.size() * 19);
        CHECK(res.total_cycles() == res.exec.cycles + res.update_cycles + res.verify.cycles);
        CHECK(res.overhead_ratio() > 0.0);
    }
    SUBCASE("a flipped input bit is repaired before use") {
        Crossbar x(n);
        load(x);
        auto banks = encode(x, BlockGeometry(n, 16));
        x.flip(3, prog.input("a").offsets[1]);
        const auto res = run_with_ecc(prog, x, lanes, banks);
        CHECK_FALSE(res.aborted);
        CHECK(res.verify.count(BlockStatus::Corrected) == 1);
        CHECK(res.exec.word(prog, 3) == 3 * 12);
    }
    SUBCASE("two flips in one input block abort the run") {
        Crossbar x(n);
        load(x);
        auto banks = encode(x, BlockGeometry(n, 16));
        x.flip(3, prog.input("a").offsets[0]);
        x.flip(4, prog.input("a").offsets[2]);
        const auto before = x.cycle_count();
        const auto res = run_with_ecc(prog, x, lanes, banks);
        CHECK(res.aborted);
        CHECK(res.verify.uncorrectable());
        CHECK(x.cycle_count() == before);
    }
    SUBCASE("faulty check bits can desynchronise the banks") {
        Crossbar x(n);
        load(x);
        auto banks = encode(x, BlockGeometry(n, 16));
        FaultConfig c;
        c.p_gate = 0.05;
        c.seed = 2;
        FaultInjector f(c);
        EccOptions opts;
        opts.faulty_check_bits = true;
        run_with_ecc(prog, x, lanes, banks, &f, 0, opts);
        CHECK_FALSE(banks == encode(x, BlockGeometry(n, 16)));
    }
}
