#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <set>

#include "varsa/rng.hpp"
#include "varsa/stats.hpp"

using namespace varsa;

TEST_CASE("philox block matches the Random123 known answers")
{
    auto const zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});

    auto const pi = Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                      {0xa4093822, 0x299f31d0});
    CHECK(pi == std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct")
{
    Rng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        auto const x = a();
        CHECK(x == b());
        seen.insert(x);
        seen.insert(c());
        seen.insert(d());
    }
    CHECK(seen.size() == 300);
}

TEST_CASE("split depends only on the parent identity")
{
    Rng fresh(11, 5);
    Rng used(11, 5);
    for (int i = 0; i < 37; ++i) {
        used();
    }
    Rng s1 = fresh.split(2);
    Rng s2 = used.split(2);
    Rng s3 = fresh.split(3);
    for (int i = 0; i < 10; ++i) {
        auto const x = s1();
        CHECK(x == s2());
        CHECK(x != s3());
    }
}

TEST_CASE("discard skips whole blocks")
{
    Rng a(1, 1), b(1, 1);
    for (int i = 0; i < 6; ++i) {
        a();
    }
    b.discard_blocks(3);
    CHECK(a() == b());
}

TEST_CASE("replication streams differ by index and seed")
{
    CHECK(replication_stream(1, 0)() != replication_stream(1, 1)());
    CHECK(replication_stream(1, 0)() != replication_stream(2, 0)());
    CHECK(replication_stream(9, 4)() == replication_stream(9, 4)());
}

TEST_CASE("uniform and normal draws have the right moments")
{
    Rng rng(42, 0);
    MomentAccumulator u, z;
    int const n = 200000;
    for (int i = 0; i < n; ++i) {
        double const x = uniform01(rng);
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        u(x);
        z(standard_normal(rng));
    }
    auto const mu = u.moments();
    CHECK(mu.mean == Catch::Approx(0.5).margin(4.0 * std::sqrt(1.0 / 12 / n)));
    CHECK(mu.variance == Catch::Approx(1.0 / 12).epsilon(0.01));
    auto const mz = z.moments();
    CHECK(std::abs(mz.mean) < 4.0 / std::sqrt(n));
    CHECK(mz.variance == Catch::Approx(1.0).epsilon(0.015));
    CHECK(std::abs(mz.skewness) < 4.0 * std::sqrt(6.0 / n));
    CHECK(std::abs(mz.excess_kurtosis) < 4.0 * std::sqrt(24.0 / n));
}

TEST_CASE("moment accumulator reports excess kurtosis and degeneracy")
{
    MomentAccumulator c;
    for (int i = 0; i < 10; ++i) {
        c(3.0);
    }
    auto const m = c.moments();
    CHECK(m.variance == 0.0);
    CHECK(std::isnan(m.skewness));
    CHECK(std::isnan(m.excess_kurtosis));

    // Two-point symmetric law: excess kurtosis -2, skewness 0.
    MomentAccumulator t;
    for (int i = 0; i < 1000; ++i) {
        t(i % 2 == 0 ? -1.0 : 1.0);
    }
    auto const mt = t.moments();
    CHECK(mt.excess_kurtosis == Catch::Approx(-2.0).margin(1e-12));
    CHECK(mt.skewness == Catch::Approx(0.0).margin(1e-12));
    CHECK(mt.variance == Catch::Approx(1000.0 / 999.0).epsilon(1e-12));
}
