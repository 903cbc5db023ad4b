#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mvmc/particles.hpp"
#include "mvmc/random.hpp"
#include "mvmc/stats.hpp"

using namespace mvmc;

TEST_CASE("philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("stream tags are order dependent and distinct") {
    CHECK(stream_tag({1, 2}) != stream_tag({2, 1}));
    CHECK(stream_tag({1, 2}) == stream_tag({1, 2}));
    std::set<std::uint64_t> tags;
    for (std::uint64_t a = 0; a < 50; ++a)
        for (std::uint64_t b = 0; b < 50; ++b) tags.insert(stream_tag({a, b}));
    CHECK(tags.size() == 2500);
}

TEST_CASE("streams are reproducible and independent of consumption order") {
    RandomStream a(42, 7), b(42, 7), c(42, 8);
    std::vector<double> xa, xb;
    for (int i = 0; i < 100; ++i) xa.push_back(a.normal());
    for (int i = 0; i < 100; ++i) xb.push_back(b.normal());
    CHECK(xa == xb);
    CHECK(c.normal() != xa[0]);
}

TEST_CASE("uniform and normal draws have the right first two moments") {
    RandomStream s(3, 11);
    RunningStats u, n;
    for (int i = 0; i < 200000; ++i) {
        const double x = s.uniform();
        CHECK_UNARY(x > 0.0);
        CHECK_UNARY(x < 1.0);
        u.add(x);
        n.add(s.normal());
    }
    CHECK(u.mean() == doctest::Approx(0.5).epsilon(0.01));
    CHECK(u.variance() == doctest::Approx(1.0 / 12.0).epsilon(0.02));
    CHECK(std::abs(n.mean()) < 0.01);
    CHECK(n.variance() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("subrange and permutation address the parent sub-streams") {
    const RandomBlock block(9, 1, 8, 4);
    const RandomBlock tail = block.subrange(4, 4);
    const RandomBlock perm = block.permuted({7, 6, 5, 4, 3, 2, 1, 0});
    for (std::size_t p = 0; p < 4; ++p) {
        auto s1 = block.stream(4 + p, StreamRole::increments);
        auto s2 = tail.stream(p, StreamRole::increments);
        CHECK(s1.next_u64() == s2.next_u64());
    }
    auto s1 = block.stream(0, StreamRole::initial_state);
    auto s2 = perm.stream(7, StreamRole::initial_state);
    CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("coarse increments are block sums of base-resolution draws") {
    std::vector<double> fine(8), coarse(4), coarser(1);
    RandomStream a(5, 5), b(5, 5), c(5, 5);
    draw_increments(a, 8, 8, 1, 1.0, fine);
    draw_increments(b, 8, 4, 1, 1.0, coarse);
    draw_increments(c, 8, 1, 1, 1.0, coarser);
    for (std::size_t k = 0; k < 4; ++k) CHECK(coarse[k] == fine[2 * k] + fine[2 * k + 1]);
    double total = 0.0;
    for (double x : fine) total += x;
    CHECK(coarser[0] == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("increments have variance dt") {
    RunningStats s;
    for (std::uint64_t k = 0; k < 20000; ++k) {
        RandomStream r(1, k);
        std::vector<double> dw(4);
        draw_increments(r, 16, 4, 1, 2.0, dw);
        for (double x : dw) s.add(x);
    }
    CHECK(s.variance() == doctest::Approx(0.5).epsilon(0.02));
}
