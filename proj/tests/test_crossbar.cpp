#include <doctest.h>

#include <numeric>
#include <random>

#include "mpim/crossbar.hpp"

using namespace mpim;

namespace {

std::vector<std::uint32_t> iota_lanes(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
}

GateStep row_step(GateKind g, std::vector<std::uint32_t> in, std::uint32_t out, std::vector<std::uint32_t> lanes) {
    return GateStep{g, Orientation::InRow, std::move(in), out, std::move(lanes)};
}

// Boolean definitions written independently of evaluate().
int reference(GateKind g, int a, int b, int c) {
    switch (g) {
        case GateKind::Not: return !a;
        case GateKind::Nor2: return !(a || b);
        case GateKind::Nand2: return !(a && b);
        case GateKind::Or2: return a || b;
        case GateKind::Min3: return !((a && b) || (a && c) || (b && c));
        case GateKind::Init: return 1;
    }
    return -1;
}

}  // namespace

TEST_CASE("gate truth tables are exhaustive and exact on the crossbar") {
    for (auto g : {GateKind::Not, GateKind::Nor2, GateKind::Nand2, GateKind::Or2, GateKind::Min3}) {
        const auto k = arity(g);
        const std::size_t cases = 1u << k;
        Crossbar xbar(cases, 4);
        for (std::size_t r = 0; r < cases; ++r) {
            for (std::size_t i = 0; i < k; ++i) xbar.set(r, i, (r >> i) & 1u);
        }
        std::vector<std::uint32_t> in(k);
        std::iota(in.begin(), in.end(), 0u);
        xbar.apply(row_step(g, in, 3, iota_lanes(cases)));
        for (std::size_t r = 0; r < cases; ++r) {
            CHECK(xbar.get(r, 3) == reference(g, r & 1, (r >> 1) & 1, (r >> 2) & 1));
        }
    }
}

TEST_CASE("NOR2 and MIN3 examples") {
    Crossbar xbar(8, 8);
    for (std::uint32_t r = 0; r < 8; ++r) {
        xbar.set(r, 0, 1);
        xbar.set(r, 1, 0);
    }
    xbar.apply(row_step(GateKind::Nor2, {0, 1}, 2, iota_lanes(8)));
    for (std::uint32_t r = 0; r < 8; ++r) CHECK(xbar.get(r, 2) == 0);

    const std::uint8_t a[] = {1, 1, 0};
    const std::uint8_t b[] = {1, 0, 0};
    CHECK(evaluate(GateKind::Min3, a) == 0);
    CHECK(evaluate(GateKind::Min3, b) == 1);
}

TEST_CASE("an in-row gate over 1024 rows costs one cycle") {
    Crossbar xbar(1024, 4);
    xbar.apply(row_step(GateKind::Nor2, {0, 1}, 2, iota_lanes(1024)));
    CHECK(xbar.cycle_count() == 1);
    for (std::uint32_t r = 0; r < 1024; ++r) CHECK(xbar.get(r, 2) == 1);
}

TEST_CASE("gate step errors") {
    Crossbar xbar(4, 8);
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Nor2, {0, 9}, 2, {0})), CrossbarError);
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Nor2, {0}, 2, {0})), CrossbarError);
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Min3, {0, 1}, 2, {0})), CrossbarError);
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Nor2, {0, 2}, 2, {0})), CrossbarError);
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Nor2, {0, 1}, 2, {4})), CrossbarError);
    xbar.set_partitions({4}, {});
    CHECK_THROWS_AS(xbar.apply(row_step(GateKind::Nor2, {3, 4}, 5, {0})), CrossbarError);
    CHECK_NOTHROW(xbar.apply(row_step(GateKind::Nor2, {4, 5}, 6, {0})));
}

TEST_CASE("parallel partition steps") {
    Crossbar xbar(2, 12);
    xbar.set_partitions({4, 8}, {});
    const auto base = xbar.cycle_count();
    std::vector<GateStep> steps;
    for (std::uint32_t p = 0; p < 3; ++p) steps.push_back(row_step(GateKind::Nor2, {4 * p, 4 * p + 1}, 4 * p + 2, {0}));
    xbar.apply_parallel(steps);
    CHECK(xbar.cycle_count() - base == 1);
    for (std::uint32_t p = 0; p < 3; ++p) CHECK(xbar.get(0, 4 * p + 2) == 1);

    SUBCASE("empty list is a no-op") {
        const auto before = xbar.read_region({0, 0, 2, 12});
        const auto c = xbar.cycle_count();
        xbar.apply_parallel({});
        CHECK(xbar.cycle_count() == c);
        CHECK(xbar.read_region({0, 0, 2, 12}) == before);
    }
    SUBCASE("two steps in the same segment conflict") {
        std::vector<GateStep> clash = {row_step(GateKind::Not, {0}, 1, {0}), row_step(GateKind::Not, {2}, 3, {0})};
        CHECK_THROWS_AS(xbar.apply_parallel(clash), CrossbarError);
    }
}

TEST_CASE("set_partitions") {
    Crossbar xbar(1024);
    xbar.set_partitions({341, 682}, {});
    CHECK(xbar.cycle_count() == 1);
    CHECK(xbar.segment_of(Orientation::InRow, 0) == 0);
    CHECK(xbar.segment_of(Orientation::InRow, 340) == 0);
    CHECK(xbar.segment_of(Orientation::InRow, 341) == 1);
    CHECK(xbar.segment_of(Orientation::InRow, 682) == 2);
    CHECK(xbar.segment_of(Orientation::InRow, 1023) == 2);

    xbar.set_partitions({}, {});
    CHECK(xbar.segment_of(Orientation::InRow, 1023) == 0);

    CHECK_THROWS_AS(xbar.set_partitions({0}, {}), CrossbarError);
    CHECK_THROWS_AS(xbar.set_partitions({1024}, {}), CrossbarError);
    CHECK_THROWS_AS(xbar.set_partitions({500, 400}, {}), CrossbarError);
    CHECK_THROWS_AS(xbar.set_partitions({}, {7, 7}), CrossbarError);

    xbar.set_partition_cost(5);
    const auto c = xbar.cycle_count();
    xbar.set_partitions({512}, {});
    CHECK(xbar.cycle_count() - c == 5);
}

TEST_CASE("region write and read") {
    Crossbar xbar(16);
    CHECK(xbar.read_region({3, 3, 4, 4}) == BitMatrix(4, 4));

    BitMatrix block(4, 4);
    for (std::size_t i = 0; i < 16; ++i) block.bits[i] = (i * 7 + 3) % 3 == 0;
    xbar.write_region({2, 5, 4, 4}, block);
    CHECK(xbar.read_region({2, 5, 4, 4}) == block);
    CHECK(xbar.cycle_count() == 4);

    Crossbar wide(16);
    wide.write_region({0, 0, 16, 8}, BitMatrix(16, 8));
    CHECK(wide.cycle_count() == 8);

    CHECK_THROWS_AS(xbar.read_region({14, 0, 4, 4}), CrossbarError);
    CHECK_THROWS_AS(xbar.write_region({0, 14, 4, 4}, block), CrossbarError);
}

TEST_CASE("row-parallel step equals sequential single-row steps") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Crossbar par(64, 8), seq(64, 8);
        for (std::size_t r = 0; r < 64; ++r) {
            for (std::size_t c = 0; c < 8; ++c) {
                const auto v = static_cast<std::uint8_t>(rng() & 1u);
                par.set(r, c, v);
                seq.set(r, c, v);
            }
        }
        std::vector<std::uint32_t> mask;
        for (std::uint32_t r = 0; r < 64; ++r) {
            if (rng() & 1u) mask.push_back(r);
        }
        par.apply(row_step(GateKind::Min3, {0, 3, 5}, 6, mask));
        for (auto r : mask) seq.apply(row_step(GateKind::Min3, {0, 3, 5}, 6, {r}));
        CHECK(par.read_region({0, 0, 64, 8}) == seq.read_region({0, 0, 64, 8}));
        CHECK(par.cycle_count() == 1);
        CHECK(seq.cycle_count() == mask.size());
    }
}

TEST_CASE("in-column program on the transpose equals the transposed in-row result") {
    std::mt19937_64 rng(5);
    const std::size_t rows = 12, cols = 9;
    Crossbar a(rows, cols), t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto v = static_cast<std::uint8_t>(rng() & 1u);
            a.set(r, c, v);
            t.set(c, r, v);
        }
    }
    const GateKind kinds[] = {GateKind::Not, GateKind::Nor2, GateKind::Nand2, GateKind::Or2, GateKind::Min3,
                              GateKind::Init};
    for (int s = 0; s < 50; ++s) {
        const auto g = kinds[rng() % 6];
        std::vector<std::uint32_t> offs(cols);
        std::iota(offs.begin(), offs.end(), 0u);
        std::shuffle(offs.begin(), offs.end(), rng);
        std::vector<std::uint32_t> in(offs.begin(), offs.begin() + static_cast<std::ptrdiff_t>(arity(g)));
        const auto out = offs[arity(g)];
        std::vector<std::uint32_t> lanes;
        for (std::uint32_t r = 0; r < rows; ++r) {
            if (rng() % 3) lanes.push_back(r);
        }
        a.apply({g, Orientation::InRow, in, out, lanes});
        t.apply({g, Orientation::InColumn, in, out, lanes});
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) CHECK(a.get(r, c) == t.get(c, r));
    }
    CHECK(a.cycle_count() == t.cycle_count());
}

TEST_CASE("cycle count tracks apply calls, not n or mask size") {
    for (std::size_t n : {8u, 64u, 256u}) {
        Crossbar xbar(n);
        for (std::size_t k = 1; k <= n; k *= 2) xbar.apply(row_step(GateKind::Not, {0}, 1, iota_lanes(k)));
        std::size_t calls = 0;
        for (std::size_t k = 1; k <= n; k *= 2) ++calls;
        CHECK(xbar.cycle_count() == calls);
    }
}

TEST_CASE("area accounting counts touched cells") {
    Crossbar xbar(8);
    xbar.apply(row_step(GateKind::Nor2, {0, 1}, 2, {0, 1, 2}));
    CHECK(xbar.cells_touched() == 9);
    xbar.apply(row_step(GateKind::Not, {2}, 0, {0, 1, 2}));
    CHECK(xbar.cells_touched() == 9);
    CHECK(xbar.touched(1, 2));
    CHECK_FALSE(xbar.touched(3, 2));
}
