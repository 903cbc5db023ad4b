#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvmc/control.hpp"
#include "mvmc/estimators.hpp"
#include "mvmc/stats.hpp"

using namespace mvmc;

namespace {

double se(const LevelStats& s) { return std::sqrt(s.estimator_variance()); }

ModelSpec degenerate_kuramoto() {
    return with_fixed_initial_state(with_fixed_coefficient(with_constant_diffusion(kuramoto_model(), 0.0), 0.0),
                                    0.3);
}

}  // namespace

TEST_CASE("hierarchy sizes") {
    const Hierarchy h;
    CHECK(h.particles(0) == 5);
    CHECK(h.steps(0) == 4);
    CHECK(h.particles(3) == 40);
    CHECK(h.steps(5) == 128);
    Hierarchy bad;
    bad.tau = 1;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("sampler names round trip") {
    for (Sampler s : {Sampler::naive, Sampler::antithetic}) CHECK(sampler_from_string(to_string(s)) == s);
    CHECK_THROWS(sampler_from_string("bogus"));
}

TEST_CASE("level cost") {
    CHECK(level_cost(5, 4, 10, 3) == 10.0 * 25 * 4 + 10.0 * 3 * 5 * 4);
}

TEST_CASE("constant observable is estimated exactly") {
    const LevelStats s =
        dlmc(kuramoto_model(), constant_observable(2.0), ControlField::zero(), 5, 4, 1.0, 20, 10, 1);
    CHECK(s.mean == 2.0);
    CHECK(s.V1 == 0.0);
    CHECK(s.V2 == 0.0);
    CHECK(s.cost == level_cost(5, 4, 20, 10));
}

TEST_CASE("single evaluation is flagged degenerate") {
    const LevelStats s = dlmc(kuramoto_model(), cos_observable(), ControlField::zero(), 5, 4, 1.0, 1, 1, 1);
    CHECK(s.degenerate);
    CHECK(s.V1 == 0.0);
    CHECK(s.V2 == 0.0);
}

TEST_CASE("degenerate randomness gives zero variance components") {
    const ModelSpec m = degenerate_kuramoto();
    const Hierarchy h;
    for (Sampler sampler : {Sampler::naive, Sampler::antithetic}) {
        const LevelStats s = estimate_level(m, cos_observable(), ControlField::zero(), h, sampler, 2, 5, 5, 3);
        CHECK(s.V1 == doctest::Approx(0.0).epsilon(1e-24));
        CHECK(s.V2 == doctest::Approx(0.0).epsilon(1e-24));
        // Synchronised particles never move, so fine and coarse agree.
        CHECK(s.mean == 0.0);
    }
    const LevelStats s0 = estimate_level(m, cos_observable(), ControlField::zero(), h, Sampler::antithetic, 0, 5, 5, 3);
    CHECK(s0.mean == doctest::Approx(std::cos(0.3)).epsilon(1e-14));
}

TEST_CASE("variance components of synthetic tables") {
    const std::vector<double> constant(12, 1.5);
    auto [a, b] = variance_components(constant, 3, 4);
    CHECK(a == 0.0);
    CHECK(b == 0.0);
    // Row means 1, 2, 3 with inner spread +-1.
    const std::vector<double> t = {0, 2, 1, 3, 2, 4};
    auto [v1, v2] = variance_components(t, 3, 2);
    CHECK(v1 == doctest::Approx(1.0));
    CHECK(v2 == doctest::Approx(2.0));
}

TEST_CASE("i.i.d. samples independent of the law: V2 is the variance, V1 is V2 over M2") {
    RandomStream r(1, 2);
    const std::size_t M1 = 2000, M2 = 20;
    std::vector<double> t(M1 * M2);
    for (double& x : t) x = 3.0 * r.normal();
    auto [v1, v2] = variance_components(t, M1, M2);
    CHECK(v2 == doctest::Approx(9.0).epsilon(0.03));
    CHECK(v1 == doctest::Approx(9.0 / M2).epsilon(0.1));
}

TEST_CASE("estimate_variances rejects counts below two") {
    CHECK_THROWS(estimate_variances(kuramoto_model(), cos_observable(), ControlField::zero(), Hierarchy{},
                                    Sampler::antithetic, 1, 1, 10, 1));
}

TEST_CASE("results do not depend on the worker count") {
    const Hierarchy h;
    OfflineControlOptions co;
    co.particles = 100;
    const ControlField zeta = solve_offline_control(kuramoto_model(), psi_observable(2.5), co, false).field;
    EstimatorOptions one, four;
    four.workers = 4;
    const LevelStats a = estimate_level(kuramoto_model(), psi_observable(2.5), zeta, h, Sampler::antithetic, 2, 24,
                                        16, 77, one);
    const LevelStats b = estimate_level(kuramoto_model(), psi_observable(2.5), zeta, h, Sampler::antithetic, 2, 24,
                                        16, 77, four);
    CHECK(a.mean == b.mean);
    CHECK(a.V1 == b.V1);
    CHECK(a.V2 == b.V2);
    CHECK(a.outer_variance == b.outer_variance);
}

TEST_CASE("antithetic group permutation leaves the coarse average unchanged") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const RandomBlock block = level_randomness(h, 3, 5, 0);
    const LevelLaws laws = build_level_laws(m, h, Sampler::antithetic, 3, block);
    REQUIRE(laws.coarse.size() == 2);
    const std::vector<EmpiricalLaw> swapped = {laws.coarse[1], laws.coarse[0]};
    for (std::uint64_t j = 0; j < 20; ++j) {
        const DecoupledDraw d = decoupled_randomness(m, h, 3, 5, 0, j);
        const InnerSample a = level_difference_sample(m, cos_observable(), ControlField::zero(), *laws.fine, laws.coarse, d);
        const InnerSample b = level_difference_sample(m, cos_observable(), ControlField::zero(), *laws.fine, swapped, d);
        CHECK(a.coarse == b.coarse);
        CHECK(a.difference == b.difference);
    }
    // The groups are the two halves of the fine block.
    const EmpiricalLaw second = simulate_particle_system(m, h.particles(2), h.steps(2), 1.0, block.subrange(20, 20));
    CHECK(second.states() == laws.coarse[1].states());
}

TEST_CASE("naive coarse law uses the first sub-streams") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const RandomBlock block = level_randomness(h, 2, 5, 3);
    const LevelLaws laws = build_level_laws(m, h, Sampler::naive, 2, block);
    REQUIRE(laws.coarse.size() == 1);
    CHECK(laws.coarse[0].states() ==
          simulate_particle_system(m, h.particles(1), h.steps(1), 1.0, block.subrange(0, 10)).states());
}

TEST_CASE("cos: plain DLMC agrees with a reference run at ten times the samples") {
    const ModelSpec m = kuramoto_model();
    const LevelStats a = dlmc(m, cos_observable(), ControlField::zero(), 64, 64, 1.0, 100, 100, 1);
    const LevelStats b = dlmc(m, cos_observable(), ControlField::zero(), 64, 64, 1.0, 1000, 100, 2);
    CHECK(pooled_z(a.mean, se(a), b.mean, se(b)) < 3.0);
}

TEST_CASE("coarse surrogate is unbiased for the coarser level") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const LevelStats diff = level_difference_antithetic(m, cos_observable(), ControlField::zero(), h, 2, 2000, 20, 4);
    // Plain DLMC at (P_1, N_1).
    const LevelStats direct = dlmc(m, cos_observable(), ControlField::zero(), h.particles(1), h.steps(1), 1.0, 2000, 20, 5);
    const double se_coarse = std::sqrt(diff.outer_variance / diff.M1);
    CHECK(pooled_z(diff.coarse_mean, se_coarse, direct.mean, se(direct)) < 3.0);
}

TEST_CASE("telescoping: the level sum matches direct DLMC at level L") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const int L = 2;
    double sum = 0.0, var = 0.0;
    for (int l = 0; l <= L; ++l) {
        const LevelStats s =
            estimate_level(m, cos_observable(), ControlField::zero(), h, Sampler::antithetic, l, 1500, 20, 10 + l);
        sum += s.mean;
        var += s.estimator_variance();
    }
    const LevelStats direct = dlmc(m, cos_observable(), ControlField::zero(), h.particles(L), h.steps(L), 1.0, 3000, 20, 9);
    CHECK(pooled_z(sum, std::sqrt(var), direct.mean, se(direct)) < 3.0);
}

TEST_CASE("naive and antithetic level means agree") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const LevelStats a = level_difference_antithetic(m, cos_observable(), ControlField::zero(), h, 2, 1500, 20, 1);
    const LevelStats n = level_difference_naive(m, cos_observable(), ControlField::zero(), h, 2, 1500, 20, 2);
    CHECK(pooled_z(a.mean, se(a), n.mean, se(n)) < 3.0);
}

TEST_CASE("importance sampling preserves level-difference means") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    OfflineControlOptions co;
    co.particles = 200;
    const ControlField zeta = solve_offline_control(m, psi_observable(2.5), co, false).field;
    for (int l : {0, 2}) {
        const LevelStats plain = estimate_level(m, psi_observable(2.5), ControlField::zero(), h, Sampler::antithetic, l,
                                                1000, 200, 41);
        const LevelStats is = estimate_level(m, psi_observable(2.5), zeta, h, Sampler::antithetic, l, 1000, 200, 42);
        CHECK(pooled_z(plain.mean, se(plain), is.mean, se(is)) < 3.0);
    }
}

TEST_CASE("estimator variance matches V1/M1 + V2/(M1 M2)") {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    const std::size_t M1 = 10, M2 = 10;
    RunningStats means;
    for (std::uint64_t rep = 0; rep < 300; ++rep)
        means.add(estimate_level(m, cos_observable(), ControlField::zero(), h, Sampler::antithetic, 0, M1, M2, 100 + rep)
                      .mean);
    const LevelStats big = estimate_level(m, cos_observable(), ControlField::zero(), h, Sampler::antithetic, 0, 2000,
                                          50, 7);
    const double predicted = big.V1 / M1 + big.V2 / (M1 * M2);
    CHECK(means.variance() == doctest::Approx(predicted).epsilon(0.25));
}
