#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mvmc/control.hpp"
#include "mvmc/stats.hpp"

using namespace mvmc;

namespace {

ModelSpec brownian(double sigma) {
    ModelSpec m = with_fixed_coefficient(with_constant_diffusion(kuramoto_model(), sigma), 0.0);
    m.drift = [](StateView, double, double, StateOut out) { out[0] = 0.0; };
    return m;
}

EmpiricalLaw small_law(const ModelSpec& m, std::size_t steps) {
    return simulate_particle_system(m, 8, steps, 1.0, RandomBlock(3, 3, 8, steps));
}

std::vector<double> terminal_row(const SpatialGrid& g, double (*f)(double)) {
    std::vector<double> row(g.nodes());
    for (std::size_t j = 0; j < g.nodes(); ++j) row[j] = f(g.node(j));
    return row;
}

double interpolate(const ValueGrid& v, std::size_t n, double x) {
    const double u = (x - v.grid.x_min) / v.grid.dx();
    const auto j = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(j);
    return (1.0 - f) * v.at(n, j) + f * v.at(n, j + 1);
}

}  // namespace

TEST_CASE("heat equation closed form at the default grid") {
    const double sigma = 0.4;
    const ModelSpec m = brownian(sigma);
    const EmpiricalLaw law = small_law(m, 100);
    KbeOptions opts;
    opts.grid = default_grid(cos_observable());
    const double exact = std::exp(-0.5 * sigma * sigma);
    // Signed terminal data: the backward solve is linear.
    const ValueGrid v = solve_backward(m, law, terminal_row(opts.grid, [](double x) { return std::cos(x); }), opts);
    for (double x : {0.0, 0.5, -1.0})
        CHECK(std::abs(interpolate(v, 0, x) - std::cos(x) * exact) < 1e-3);
}

TEST_CASE("heat equation error shrinks under refinement") {
    const double sigma = 0.4;
    const ModelSpec m = brownian(sigma);
    const double exact = std::exp(-0.5 * sigma * sigma);
    auto err = [&](std::size_t steps) {
        const EmpiricalLaw law = small_law(m, steps);
        KbeOptions opts;
        opts.grid = default_grid(cos_observable(), 4000);
        const ValueGrid v = solve_backward(m, law, terminal_row(opts.grid, [](double x) { return std::cos(x); }), opts);
        return std::abs(interpolate(v, 0, 0.0) - exact);
    };
    const double e1 = err(25), e2 = err(50);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("MC oracle for the pure Brownian case") {
    const double sigma = 0.4;
    const ModelSpec m = brownian(sigma);
    const EmpiricalLaw law = small_law(m, 100);
    KbeOptions opts;
    opts.grid = default_grid(cos_observable());
    const ValueGrid v = solve_kbe(m, law, cos_observable(), opts);
    RandomStream r(17, 1);
    RunningStats s;
    for (int i = 0; i < 1000000; ++i) s.add(std::abs(std::cos(sigma * r.normal())));
    CHECK(std::abs(interpolate(v, 0, 0.0) - s.mean()) < 3.0 * std::sqrt(s.variance() / 1e6) + 2e-4);
}

TEST_CASE("constants are preserved exactly") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = small_law(m, 20);
    KbeOptions opts;
    opts.grid = default_grid(constant_observable(2.5), 400);
    const ValueGrid v = solve_kbe(m, law, constant_observable(2.5), opts);
    for (double x : v.values) CHECK(x == doctest::Approx(2.5).epsilon(1e-12));
    const ControlField f = control_from_value(m, law, v, 1e-12);
    for (double z : f.values()) CHECK(std::abs(z) < 1e-12);
}

TEST_CASE("no transport and no diffusion leaves the terminal data in place") {
    ModelSpec m = brownian(0.0);
    const EmpiricalLaw law = small_law(m, 10);
    KbeOptions opts;
    opts.grid = SpatialGrid{-2.0, 2.0, 200};
    const ValueGrid v = solve_kbe(m, law, psi_observable(0.0), opts);
    for (std::size_t j = 0; j < opts.grid.nodes(); ++j) CHECK(v.at(0, j) == v.at(10, j));
}

TEST_CASE("zero observable is rejected") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = small_law(m, 5);
    KbeOptions opts;
    opts.grid = SpatialGrid{-2.0, 2.0, 100};
    CHECK_THROWS(solve_kbe(m, law, constant_observable(0.0), opts));
}

TEST_CASE("control of a log-linear value is sigma times the slope") {
    const ModelSpec m = with_constant_diffusion(kuramoto_model(), 0.4);
    const EmpiricalLaw law = small_law(m, 4);
    ValueGrid v;
    v.grid = SpatialGrid{-1.0, 1.0, 40};
    v.steps = 4;
    v.horizon = 1.0;
    for (std::size_t n = 0; n <= 4; ++n)
        for (std::size_t j = 0; j < v.grid.nodes(); ++j) v.values.push_back(std::exp(1.5 * v.grid.node(j)));
    const ControlField f = control_from_value(m, law, v, 1e-300);
    for (std::size_t j = 1; j < v.grid.intervals; ++j) CHECK(f.at(2, j) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(f(0.3, 0.123) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("flooring bounds the control where v vanishes") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = small_law(m, 10);
    KbeOptions opts;
    opts.grid = default_grid(psi_observable(2.5), 400);
    const ValueGrid v = solve_kbe(m, law, psi_observable(2.5), opts);
    const ControlField f = control_from_value(m, law, v, 1e-12);
    for (double z : f.values()) CHECK(std::isfinite(z));
    // Exactly zero where both neighbours sit at the floor.
    CHECK(f.at(10, 0) == 0.0);
}

TEST_CASE("scaling the observable leaves the control unchanged") {
    const ModelSpec m = kuramoto_model();
    const EmpiricalLaw law = small_law(m, 20);
    KbeOptions opts;
    opts.grid = default_grid(psi_observable(2.5), 400);
    const Observable g = psi_observable(2.5);
    Observable scaled = g;
    scaled.evaluate = [g](StateView x) { return 7.0 * g(x); };
    const ControlField a = control_from_value(m, law, solve_kbe(m, law, g, opts), 1e-12);
    const ControlField b = control_from_value(m, law, solve_kbe(m, law, scaled, opts), 7e-12);
    REQUIRE(a.values().size() == b.values().size());
    for (std::size_t i = 0; i < a.values().size(); ++i)
        CHECK(b.values()[i] == doctest::Approx(a.values()[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("offline control for the rare event pushes toward the threshold") {
    OfflineControlOptions opts;
    opts.particles = 200;
    const OfflineControl oc = solve_offline_control(kuramoto_model(), psi_observable(2.5), opts, true);
    for (double t : {0.5, 0.9, 0.99})
        for (double x = 0.0; x < 2.0; x += 0.25) CHECK(oc.field(t, x) >= 0.0);
    CHECK(oc.refinement_gap < 1e-2);
    const OfflineControl again = solve_offline_control(kuramoto_model(), psi_observable(2.5), opts, false);
    CHECK(oc.field == again.field);
    for (double z : solve_offline_control(kuramoto_model(), constant_observable(1.0), opts, false).field.values())
        CHECK(std::abs(z) < 1e-12);
}

TEST_CASE("bilinear interpolation and clamping") {
    // zeta(t, x) = t + 2x on a 2 x 2 grid.
    const ControlField f(1.0, 2, 0.0, 1.0, 2, {0.0, 1.0, 2.0, 0.5, 1.5, 2.5, 1.0, 2.0, 3.0});
    CHECK(f(0.25, 0.25) == doctest::Approx(0.75));
    CHECK(f(1.0, 1.0) == doctest::Approx(3.0));
    CHECK(f(0.5, -4.0) == doctest::Approx(0.5));
    CHECK(f(0.5, 9.0) == doctest::Approx(2.5));
    CHECK(ControlField::zero()(0.3, 1.0) == 0.0);
    CHECK_THROWS(ControlField(1.0, 1, 0.0, 1.0, 1, {0.0, NAN, 0.0, 0.0}));
}

TEST_CASE("save and load round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mvmc_control_test";
    std::filesystem::create_directories(dir);
    const ControlField f(1.0, 2, -1.0, 1.0, 3, std::vector<double>(12, 0.25));
    f.save(dir / "f.bin");
    CHECK(std::filesystem::file_size(dir / "f.bin") == ControlField::kHeaderBytes + 12 * 8);
    CHECK(ControlField::load(dir / "f.bin") == f);
    ControlField::zero().save(dir / "z.bin");
    CHECK(ControlField::load(dir / "z.bin").is_zero());
    {
        std::ofstream(dir / "bad.bin") << "garbage";
    }
    CHECK_THROWS(ControlField::load(dir / "bad.bin"));
    std::filesystem::remove_all(dir);
}
