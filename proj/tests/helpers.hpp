#pragma once

#include "prlm/discrete_operator.hpp"
#include "prlm/models.hpp"

#include <vector>

namespace testing_util {

using namespace prlm;

/// x' = a x + b_int u (+ b_ext v), y = c_int x (+ c_ext x), H = [h].
inline SystemNode scalar_node(double a, double b_int = 1.0, double c_int = 1.0, double h = 1.0) {
    NodeBlocks b{1, 0, 1, Matrix::Constant(1, 1, a), Matrix(), Matrix::Constant(1, 1, b_int), Matrix(),
                 Matrix::Constant(1, 1, c_int), Matrix()};
    return assemble_node(b, Matrix::Constant(1, 1, h));
}

inline SystemNode scalar_ext_node(double a) {
    NodeBlocks b{1, 1, 0, Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, 1.0), Matrix(),
                 Matrix::Constant(1, 1, 1.0), Matrix(), Matrix()};
    return assemble_node(b, Matrix::Identity(1, 1));
}

inline CoupledProblem scalar_problem(const TimeGrid& g, double x0, double a = -1.0, bool checked = true) {
    std::vector<SystemNode> parts{scalar_node(a)};
    const auto uext = GridTrajectory(g, Sampling::Midpoint, 0);
    const auto cp = CouplingOperator(Matrix::Constant(1, 1, -1.0));
    if (!checked) return CoupledProblem::unchecked(parts, cp, g, Vector::Constant(1, x0), uext);
    return CoupledProblem(parts, cp, g, Vector::Constant(1, x0), uext);
}

struct WaveHeat {
    models::Wave1dParams wave;
    models::HeatCGParams heat;
    SystemNode wn;
    SystemNode hn;
    Vector x0;
};

inline WaveHeat wave_heat_setup(Index cells = 16, double damping = 0.0, bool external = false) {
    models::Wave1dParams w;
    w.cells = cells;
    w.damping = {damping};
    if (external) w.left_end = models::WaveLeftEnd::ExternalForce;
    models::HeatCGParams h;
    h.nodes = cells;
    auto wn = models::build_wave1d(w, models::WavePortMode::VelocityInForceOut);
    auto hn = models::build_heat_cg1d(h);
    Vector x0(wn.n() + hn.n());
    x0 << models::wave1d_bump(w, wn), models::heat_profile(h);
    return {w, h, wn, hn, x0};
}

inline CoupledProblem wave_heat_problem(const TimeGrid& g, Index cells = 16, double damping = 0.0,
                                        bool external = false, bool zero_data = false) {
    const WaveHeat s = wave_heat_setup(cells, damping, external);
    GridTrajectory u(g, Sampling::Midpoint, external ? 1 : 0);
    if (external && !zero_data)
        for (Index j = 0; j < g.steps(); ++j) u.values()(j, 0) = std::sin(3.0 * g.mid_time(j));
    const Vector x0 = zero_data ? Vector(Vector::Zero(s.x0.size())) : s.x0;
    return models::build_wave_heat_problem(s.wave, s.heat, g, x0, u);
}

inline CoupledProblem lshape_problem(const TimeGrid& g, Index n = 4, double damping = 0.0, bool zero_data = false) {
    auto [a, b] = models::lshape_params(n);
    a.damping = {damping};
    b.damping = {damping};
    const auto na = models::build_wave2d_rect(a);
    const auto nb = models::build_wave2d_rect(b);
    Vector x0 = Vector::Zero(na.n() + nb.n());
    if (!zero_data) x0.head(na.n()) = models::wave2d_bump(a, na, 0.5, 1.0, 0.3);
    GridTrajectory u(g, Sampling::Midpoint, na.m_ext());
    if (!zero_data)
        for (Index j = 0; j < g.steps(); ++j) u.row(j).setConstant(0.5 * std::sin(4.0 * g.mid_time(j)));
    return models::build_lshape_problem(a, b, g, x0, u);
}

}  // namespace testing_util
