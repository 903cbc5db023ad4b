#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvmc/decoupled.hpp"
#include "mvmc/stats.hpp"

using namespace mvmc;

namespace {

ControlField constant_control(double c) {
    return ControlField(1.0, 1, -50.0, 50.0, 1, std::vector<double>(4, c));
}

EmpiricalLaw law_for(const ModelSpec& m, std::size_t P, std::size_t N, std::uint64_t seed = 5) {
    return simulate_particle_system(m, P, N, 1.0, RandomBlock(seed, 9, P, N));
}

}  // namespace

TEST_CASE("zero control gives likelihood exactly one") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 10, 8);
    RandomStream r(1, 1);
    const WienerPath w = WienerPath::generate(r, 8, 1, 1.0);
    const double x0 = 0.1;
    const PathOutcome out = simulate_decoupled_path(m, law, ControlField::zero(), w, 0.05, StateView(&x0, 1));
    CHECK(out.likelihood == 1.0);
    CHECK(out.log_likelihood == 0.0);
    CHECK(out.max_control == 0.0);
}

TEST_CASE("one step with a constant control") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 3, 1);
    const double c = 0.7, w = 0.3, x0 = 0.2;
    const WienerPath path(1, 1, 1.0, {w});
    const PathOutcome out = simulate_decoupled_path(m, law, constant_control(c), path, 0.1, StateView(&x0, 1));
    CHECK(out.likelihood == doctest::Approx(std::exp(-0.5 * c * c - w * c)));
    const double kbar = law.kernel_average(m, KernelId::kappa1, StateView(&x0, 1), 0);
    CHECK(out.terminal[0] == doctest::Approx(x0 + 0.1 + kbar + 0.4 * c + 0.4 * w));
}

TEST_CASE("log likelihood is the sum of per-step exponents") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 6, 16);
    RandomStream r(8, 2);
    const WienerPath w = WienerPath::generate(r, 16, 1, 1.0);
    const double x0 = 0.0;
    const PathOutcome out = simulate_decoupled_path(m, law, constant_control(1.3), w, 0.0, StateView(&x0, 1));
    double expected = 0.0;
    for (std::size_t n = 0; n < 16; ++n) expected += -0.5 * w.dt() * 1.69 - w.increment(n)[0] * 1.3;
    CHECK(out.log_likelihood == doctest::Approx(expected).epsilon(1e-12));
    CHECK(out.likelihood > 0.0);
}

TEST_CASE("coarsening sums consecutive increments bit-wise") {
    RandomStream r(2, 2);
    const WienerPath w = WienerPath::generate(r, 12, 1, 1.0);
    const WienerPath c = w.coarsen(3);
    CHECK(c.steps() == 4);
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(c.increment(k)[0] == w.increment(3 * k)[0] + w.increment(3 * k + 1)[0] + w.increment(3 * k + 2)[0]);
    CHECK_THROWS(w.coarsen(5));
}

TEST_CASE("coarsened increments have variance tau dt") {
    RunningStats s;
    for (std::uint64_t k = 0; k < 20000; ++k) {
        RandomStream r(4, k);
        const WienerPath c = WienerPath::generate(r, 8, 1, 1.0).coarsen(2);
        for (double x : c.increments()) s.add(x);
    }
    CHECK(s.variance() == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("coupled pair with factor one and identical laws is identical") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 8, 8);
    RandomStream r(3, 3);
    const WienerPath w = WienerPath::generate(r, 8, 1, 1.0);
    const double x0 = -0.3;
    const auto [f, c] = coupled_pair(m, law, law, constant_control(0.5), w, 0.02, StateView(&x0, 1));
    CHECK(f.terminal[0] == c.terminal[0]);
    CHECK(f.likelihood == c.likelihood);
}

TEST_CASE("coupled pair rejects mismatched resolutions") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw fine = law_for(m, 8, 8), coarse = law_for(m, 4, 3);
    RandomStream r(3, 3);
    const WienerPath w = WienerPath::generate(r, 8, 1, 1.0);
    const double x0 = 0.0;
    CHECK_THROWS(coupled_pair(m, fine, coarse, ControlField::zero(), w, 0.0, StateView(&x0, 1)));
    CHECK_THROWS(simulate_decoupled_path(m, coarse, ControlField::zero(), w, 0.0, StateView(&x0, 1)));
}

TEST_CASE("deterministic fine and coarse paths differ by Euler truncation") {
    const ModelSpec m = with_constant_diffusion(kuramoto_model(), 0.0);
    const double x0 = 0.4;
    auto gap = [&](std::size_t N) {
        const EmpiricalLaw fine = law_for(m, 16, 2 * N), coarse = law_for(m, 16, N);
        const WienerPath w(2 * N, 1, 1.0, std::vector<double>(2 * N, 0.0));
        const auto [f, c] = coupled_pair(m, fine, coarse, ControlField::zero(), w, 0.1, StateView(&x0, 1));
        return std::abs(f.terminal[0] - c.terminal[0]);
    };
    // Same particle streams at both resolutions, so the law difference is pure time discretisation.
    const double g1 = gap(32), g2 = gap(64);
    CHECK(g1 / g2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("held control: evaluated on the coarse grid, weight still exact") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 6, 8);
    RandomStream r(6, 6);
    const WienerPath w = WienerPath::generate(r, 8, 1, 1.0);
    const double x0 = 0.0;
    const PathOutcome held = simulate_decoupled_path(m, law, constant_control(0.9), w, 0.0, StateView(&x0, 1), 2);
    const PathOutcome plain = simulate_decoupled_path(m, law, constant_control(0.9), w, 0.0, StateView(&x0, 1), 1);
    // A constant field is unaffected by holding.
    CHECK(held.terminal[0] == plain.terminal[0]);
    CHECK(held.likelihood == plain.likelihood);
    CHECK_THROWS(simulate_decoupled_path(m, law, constant_control(0.9), w, 0.0, StateView(&x0, 1), 3));
}

TEST_CASE("importance sampling is unbiased for a fixed law") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 20, 16);
    // A space-time varying control: zeta = 0.5 + 0.5 x on [-3, 3].
    std::vector<double> v;
    for (int n = 0; n <= 1; ++n)
        for (double x : {-3.0, 3.0}) v.push_back(0.5 + 0.5 * x);
    const ControlField zeta(1.0, 1, -3.0, 3.0, 1, v);
    const Observable g = cos_observable();
    for (std::size_t hold : {1, 2}) {
        RunningStats plain, is;
        for (std::uint64_t k = 0; k < 100000; ++k) {
            RandomStream r(21, k);
            const double x0 = std::sqrt(0.2) * r.normal();
            const double xi = r.uniform(-0.2, 0.2);
            const WienerPath w = WienerPath::generate(r, 16, 1, 1.0);
            plain.add(g(simulate_decoupled_path(m, law, ControlField::zero(), w, xi, StateView(&x0, 1)).state()));
            const PathOutcome o = simulate_decoupled_path(m, law, zeta, w, xi, StateView(&x0, 1), hold);
            is.add(g(o.state()) * o.likelihood);
        }
        CHECK(pooled_z(plain.mean(), std::sqrt(plain.variance() / 1e5), is.mean(), std::sqrt(is.variance() / 1e5)) <
              3.0);
    }
}

TEST_CASE("measure change for one linear step, second-degree test functions") {
    // Zero interaction (single particle at x0, xi = 0): X = x0 + sigma (c dt + dW).
    const ModelSpec m = with_fixed_coefficient(kuramoto_model(), 0.0);
    const double x0 = 0.0, c = 0.8, dt = 0.25;
    const EmpiricalLaw law = simulate_particle_system(with_fixed_initial_state(m, x0), 1, 1, dt,
                                                      RandomBlock(1, 1, 1, 1));
    RunningStats f1, f2;
    for (std::uint64_t k = 0; k < 200000; ++k) {
        RandomStream r(33, k);
        const WienerPath w = WienerPath::generate(r, 1, 1, dt);
        const PathOutcome o = simulate_decoupled_path(m, law, constant_control(c), w, 0.0, StateView(&x0, 1));
        const double x = o.terminal[0];
        f1.add(x * o.likelihood);
        f2.add(x * x * o.likelihood);
    }
    // Uncontrolled: X ~ N(x0, sigma^2 dt), so E[X] = 0 and E[X^2] = 0.04.
    CHECK(std::abs(f1.mean()) < 3.0 * std::sqrt(f1.variance() / 2e5));
    CHECK(std::abs(f2.mean() - 0.16 * dt) < 3.0 * std::sqrt(f2.variance() / 2e5));
}

TEST_CASE("repeated calls are bit-identical") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = law_for(m, 6, 8);
    RandomStream r(7, 7);
    const WienerPath w = WienerPath::generate(r, 8, 1, 1.0);
    const double x0 = 0.3;
    const PathOutcome a = simulate_decoupled_path(m, law, constant_control(0.4), w, 0.1, StateView(&x0, 1));
    const PathOutcome b = simulate_decoupled_path(m, law, constant_control(0.4), w, 0.1, StateView(&x0, 1));
    CHECK(a.terminal[0] == b.terminal[0]);
    CHECK(a.log_likelihood == b.log_likelihood);
}
