#include "helpers.hpp"

#include "prlm/reference_solver.hpp"
#include "prlm/splitting.hpp"

#include <catch_amalgamated.hpp>

using namespace prlm;
using namespace testing_util;
using Catch::Matchers::WithinAbs;

namespace {

double energy(const SystemNode& nd, const GridTrajectory& x, Index j) {
    const Vector v = x.row(j).transpose();
    return v.dot(nd.H() * v);
}

GridTrajectory closed_ports(const TimeGrid& g, const SystemNode& nd) {
    return GridTrajectory(g, Sampling::Midpoint, nd.m());
}

}  // namespace

TEST_CASE("wave1d", "[models]") {
    const TimeGrid g(2.0, 200);
    SECTION("undamped: skew in the energy inner product, energy conserved") {
        for (auto mode : {models::WavePortMode::VelocityInForceOut, models::WavePortMode::ForceInVelocityOut}) {
            models::Wave1dParams p;
            p.cells = 12;
            p.rho = {2.0};
            p.tension = {0.5};
            const SystemNode nd = models::build_wave1d(p, mode);
            CHECK(check_dissipativity(nd).max_sym_eig <= 1e-12);
            const Matrix S = nd.H() * nd.A() + nd.A().transpose() * nd.H();
            CHECK(S.cwiseAbs().maxCoeff() <= 1e-12);
            const GridTrajectory x = simulate(nd, models::wave1d_bump(p, nd), closed_ports(g, nd));
            const double e0 = energy(nd, x, 0);
            CHECK(e0 > 0.0);
            for (Index j = 0; j <= g.steps(); ++j) CHECK_THAT(energy(nd, x, j), WithinAbs(e0, 1e-12 * (1.0 + e0)));
        }
    }
    SECTION("damped: strict energy decay") {
        models::Wave1dParams p;
        p.cells = 12;
        p.damping = {1.0};
        const SystemNode nd = models::build_wave1d(p, models::WavePortMode::VelocityInForceOut);
        CHECK(check_dissipativity(nd).is_dissipative);
        const GridTrajectory x = simulate(nd, models::wave1d_bump(p, nd), closed_ports(g, nd));
        for (Index j = 0; j < g.steps(); ++j) CHECK(energy(nd, x, j + 1) < energy(nd, x, j));
    }
    SECTION("variable coefficients stay dissipative") {
        models::Wave1dParams p;
        p.cells = 5;
        p.rho = {1.0, 2.0, 3.0, 0.5, 1.5};
        p.tension = {1.0, 0.2, 4.0, 1.0, 2.0};
        p.damping = {0.0, 0.0, 1.0, 0.0, 0.3};
        CHECK(check_dissipativity(models::build_wave1d(p, models::WavePortMode::VelocityInForceOut)).is_dissipative);
    }
    SECTION("bad parameters") {
        models::Wave1dParams p;
        p.cells = 1;
        try {
            models::build_wave1d(p, models::WavePortMode::VelocityInForceOut);
            FAIL("expected BadParams");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BadParams);
        }
        p.cells = 4;
        p.rho = {1.0, -1.0, 1.0, 1.0};
        CHECK_THROWS_AS(models::build_wave1d(p, models::WavePortMode::VelocityInForceOut), Error);
        p.rho = {1.0};
        p.damping = {-0.1};
        CHECK_THROWS_AS(models::build_wave1d(p, models::WavePortMode::VelocityInForceOut), Error);
        p.damping = {0.0, 0.0};
        CHECK_THROWS_AS(models::build_wave1d(p, models::WavePortMode::VelocityInForceOut), Error);
    }
    SECTION("port layout") {
        models::Wave1dParams p;
        p.cells = 6;
        auto nd = models::build_wave1d(p, models::WavePortMode::VelocityInForceOut);
        CHECK(nd.m_ext() == 0);
        CHECK(nd.m_int() == 1);
        p.left_end = models::WaveLeftEnd::ExternalForce;
        nd = models::build_wave1d(p, models::WavePortMode::VelocityInForceOut);
        CHECK(nd.m_ext() == 1);
        CHECK(nd.m_int() == 1);
    }
}

TEST_CASE("heat with memory", "[models]") {
    SECTION("dissipative at several resolutions") {
        for (Index n : {8, 32}) {
            models::HeatCGParams p;
            p.nodes = n;
            const SystemNode nd = models::build_heat_cg1d(p);
            CHECK(nd.n() == 2 * n);
            CHECK(nd.m_int() == 1);
            CHECK(check_dissipativity(nd).max_sym_eig <= 1e-10);
        }
        models::HeatCGParams p;
        p.nodes = 1;
        CHECK_THROWS_AS(models::build_heat_cg1d(p), Error);
    }
    SECTION("kernel has unit mass") {
        CHECK(models::kernel_total_mass(models::MemoryKernel::Exponential) == 1.0);
    }
    const TimeGrid g(4.0, 400);
    models::HeatCGParams p;
    p.nodes = 16;
    const SystemNode nd = models::build_heat_cg1d(p);
    SECTION("zero input from rest stays at rest") {
        const GridTrajectory x = simulate(nd, Vector::Zero(nd.n()), closed_ports(g, nd));
        CHECK(x.values().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("constant flux input") {
        GridTrajectory u(g, Sampling::Midpoint, 1);
        u.values().setOnes();
        const GridTrajectory x = simulate(nd, Vector::Zero(nd.n()), u);
        const auto bal = discrete_energy_balance(nd, x, u);
        CHECK(bal.passed);
        // stored minus supplied energy only ever decreases
        for (std::size_t j = 0; j + 1 < bal.residual.size(); ++j) CHECK(bal.residual[j + 1] <= bal.residual[j] + 1e-14);
        CHECK(bal.residual.back() < 0.0);
        // boundary temperature rises and its increments shrink
        const auto w0 = [&](Index j) { return x.values()(j, 0); };
        CHECK(w0(g.steps()) > 0.0);
        const double early = w0(100) - w0(50);
        const double late = w0(400) - w0(350);
        CHECK(late >= 0.0);
        CHECK(late < early);
    }
    SECTION("free decay of the initial profile") {
        const GridTrajectory x = simulate(nd, models::heat_profile(p), closed_ports(g, nd));
        for (Index j = 0; j < g.steps(); ++j) CHECK(energy(nd, x, j + 1) <= energy(nd, x, j) + 1e-15);
        CHECK(energy(nd, x, g.steps()) < 0.5 * energy(nd, x, 0));
    }
}

TEST_CASE("wave2d rectangle", "[models]") {
    SECTION("4 x 8 undamped: dissipative and conserving") {
        models::Wave2dParams p;
        p.nx = 4;
        p.ny = 8;
        p.height = 2.0;
        const SystemNode nd = models::build_wave2d_rect(p);
        CHECK(nd.m() == 0);
        CHECK(check_dissipativity(nd).max_sym_eig <= 1e-12);
        const TimeGrid g(1.0, 100);
        const GridTrajectory x = simulate(nd, models::wave2d_bump(p, nd, 0.5, 1.0, 0.3), closed_ports(g, nd));
        const double e0 = energy(nd, x, 0);
        CHECK(e0 > 0.0);
        for (Index j = 0; j <= g.steps(); ++j) CHECK_THAT(energy(nd, x, j), WithinAbs(e0, 1e-12 * (1.0 + e0)));
    }
    SECTION("port dimension equals the number of port faces") {
        auto [a, b] = models::lshape_params(3);
        const SystemNode na = models::build_wave2d_rect(a);
        const SystemNode nb = models::build_wave2d_rect(b);
        CHECK(na.m_ext() == static_cast<Index>(models::port_faces(a, true).size()));
        CHECK(na.m_ext() == 3);
        CHECK(na.m_int() == 3);
        CHECK(nb.m_ext() == 0);
        CHECK(nb.m_int() == 3);
        CHECK(check_dissipativity(na).is_dissipative);
        CHECK(check_dissipativity(nb).is_dissipative);
    }
    SECTION("damping on one domain") {
        auto [a, b] = models::lshape_params(2);
        a.damping = {0.7};
        CHECK(check_dissipativity(models::build_wave2d_rect(a)).is_dissipative);
        CHECK(estimate_psop_epsilon(models::build_wave2d_rect(a)).epsilon > 0.0);
    }
    SECTION("invalid grids") {
        models::Wave2dParams p;
        p.nx = 1;
        CHECK_THROWS_AS(models::build_wave2d_rect(p), Error);
        p.nx = 4;
        p.top.assign(3, models::EdgeKind::Clamped);
        CHECK_THROWS_AS(models::build_wave2d_rect(p), Error);
    }
}

TEST_CASE("wave-heat problem", "[models]") {
    const TimeGrid g(2.0, 200);
    SECTION("default demo passes the certificates") {
        const auto p = wave_heat_problem(g);
        CHECK(p.components().size() == 2);
        CHECK(check_dissipativity(p.node()).is_dissipative);
        CHECK(check_coupling_monotone(p.coupling()));
        const Matrix Nc = models::wave_heat_coupling();
        CHECK((Nc + Nc.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(check_discrete_monotonicity(p, 100, 1).min_slack >= -1e-12);
        const TrajPair ref = solve_monolithic(p);
        CHECK(closed_loop_residual(p, ref) <= 1e-10);
    }
    SECTION("zero data gives the zero solution") {
        const auto p = wave_heat_problem(g, 16, 0.0, true, true);
        const TrajPair ref = solve_monolithic(p);
        CHECK(ref.x.values().cwiseAbs().maxCoeff() == 0.0);
        CHECK(ref.u.values().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("the symmetric coupling is rejected") {
        const auto s = wave_heat_setup(8);
        Matrix flipped(2, 2);
        flipped << 0, 1, 1, 0;
        CHECK_FALSE(check_coupling_monotone(CouplingOperator(flipped)));
        std::vector<SystemNode> parts{s.wn, s.hn};
        try {
            CoupledProblem(parts, CouplingOperator(flipped), g, s.x0, GridTrajectory(g, Sampling::Midpoint, 0));
            FAIL("expected CouplingNotMonotone");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CouplingNotMonotone);
        }
    }
    SECTION("monolithic solution satisfies every component balance") {
        const auto p = wave_heat_problem(g, 16, 0.5, true);
        const TrajPair ref = solve_monolithic(p);
        for (const auto& r : component_energy_balance(p, ref)) CHECK(r.passed);
    }
}

TEST_CASE("L-shape problem", "[models]") {
    const TimeGrid g(1.0, 100);
    SECTION("default geometry passes the certificates") {
        const auto p = lshape_problem(g, 4);
        CHECK(p.node().m_int() == 8);
        CHECK(p.m_ext() == 4);
        CHECK(check_dissipativity(p.node()).is_dissipative);
        CHECK(check_coupling_monotone(p.coupling()));
        const Matrix Nc = models::lshape_coupling(4);
        CHECK((Nc + Nc.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(check_discrete_monotonicity(p, 100, 2).min_slack >= -1e-12);
        CHECK(closed_loop_residual(p, solve_monolithic(p)) <= 1e-10);
    }
    SECTION("zero data gives the zero solution") {
        const auto p = lshape_problem(g, 4, 0.0, true);
        const TrajPair ref = solve_monolithic(p);
        CHECK(ref.x.values().cwiseAbs().maxCoeff() == 0.0);
        CHECK(ref.u.values().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("nonconforming interfaces are rejected") {
        auto [a, b] = models::lshape_params(4);
        auto [a3, b3] = models::lshape_params(3);
        const Index n = models::build_wave2d_rect(a).n() + models::build_wave2d_rect(b3).n();
        const GridTrajectory u(g, Sampling::Midpoint, 4);
        try {
            models::build_lshape_problem(a, b3, g, Vector::Zero(n), u);
            FAIL("expected NonconformingInterface");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonconformingInterface);
        }
        auto shifted = b;
        shifted.origin_y = 0.5;
        CHECK_THROWS_AS(models::build_lshape_problem(a, shifted, g, Vector::Zero(n), u), Error);
    }
    SECTION("refined geometry: iteration still monotone") {
        const auto p = lshape_problem(g, 8);
        const TrajPair ref = solve_monolithic(p);
        StopCriteria stop;
        stop.max_iter = 40;
        const auto rep = run(p, 1.0, default_omega(g), stop, ref);
        for (const auto& r : rep.rows) {
            CHECK(r.monotone_ok);
            CHECK(r.domination_ok);
        }
    }
}

TEST_CASE("scalar demo matches the closed-form recursion", "[models]") {
    for (Index nt : {10, 100, 1000}) {
        const TimeGrid g(1.0, nt);
        const auto p = models::build_scalar_demo(g, 1.5);
        const TrajPair q = solve_monolithic(p);
        const double r = (1.0 - g.tau()) / (1.0 + g.tau());
        for (Index j = 0; j <= nt; ++j) {
            const double x = 1.5 * std::pow(r, static_cast<double>(j));
            CHECK_THAT(q.x.values()(j, 0), WithinAbs(x, 1e-12));
        }
        for (Index j = 0; j < nt; ++j) {
            const double xm = 0.75 * (std::pow(r, static_cast<double>(j)) + std::pow(r, static_cast<double>(j + 1)));
            CHECK_THAT(q.u.values()(j, 0), WithinAbs(-xm, 1e-12));
        }
    }
}
