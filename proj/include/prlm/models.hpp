#pragma once

// Discretized passive models:
//  - 1D wave on (-1, 0), staggered grid (momentum p = rho v_t at cell centers,
//    strain q = v_zeta at faces), clamped or force-driven at zeta = -1, one port at zeta = 0;
//  - 1D heat conduction on (0, 1) with Coleman-Gurtin memory, kernel g(s) = exp(-s),
//    realized through m(t) = int_0^inf exp(-s) w(t - s) ds, m' = w - m;
//  - 2D wave on a rectangle with per-face boundary roles;
//  - the coupled wave-heat and L-shaped domain decomposition problems.

#include "prlm/discrete_operator.hpp"
#include "prlm/system_node.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace prlm::models {

namespace detail {

inline double cell_value(const std::vector<double>& v, Index j) {
    return v.size() == 1 ? v[0] : v[static_cast<std::size_t>(j)];
}

inline void check_field(const std::vector<double>& v, Index cells, const char* name, bool allow_zero) {
    if (v.size() != 1 && static_cast<Index>(v.size()) != cells) {
        throw Error(ErrorCode::BadParams, std::string(name) + " must have 1 or one-per-cell entries");
    }
    for (double x : v) {
        if (!std::isfinite(x) || x < 0.0 || (!allow_zero && x == 0.0)) {
            throw Error(ErrorCode::BadParams, std::string(name) + (allow_zero ? " must be >= 0" : " must be > 0"));
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1D wave

enum class WavePortMode { VelocityInForceOut, ForceInVelocityOut };
enum class WaveLeftEnd { Clamped, ExternalForce };

struct Wave1dParams {
    Index cells = 16;
    std::vector<double> rho{1.0};
    std::vector<double> tension{1.0};
    std::vector<double> damping{0.0};
    /// Clamped: v(-1) = 0. ExternalForce: external port (stress in, velocity out) at -1.
    WaveLeftEnd left_end = WaveLeftEnd::Clamped;
};

/// State layout: p_0..p_{N-1}, then the strain faces that carry state, left to right.
inline SystemNode build_wave1d(const Wave1dParams& prm, WavePortMode mode) {
    const Index N = prm.cells;
    if (N < 2) throw Error(ErrorCode::BadParams, "wave1d needs at least 2 cells");
    detail::check_field(prm.rho, N, "rho", false);
    detail::check_field(prm.tension, N, "tension", false);
    detail::check_field(prm.damping, N, "damping", true);

    const double h = 1.0 / static_cast<double>(N);
    const bool left_state = prm.left_end == WaveLeftEnd::Clamped;
    const bool right_state = mode == WavePortMode::VelocityInForceOut;

    // face index -> state index (or -1)
    std::vector<Index> face(static_cast<std::size_t>(N + 1), -1);
    Index n = N;
    for (Index i = 0; i <= N; ++i) {
        const bool state = (i > 0 && i < N) || (i == 0 && left_state) || (i == N && right_state);
        if (state) face[static_cast<std::size_t>(i)] = n++;
    }
    const auto rho = [&](Index j) { return detail::cell_value(prm.rho, j); };
    const auto tf = [&](Index i) {
        if (i == 0) return detail::cell_value(prm.tension, 0);
        if (i == N) return detail::cell_value(prm.tension, N - 1);
        return 0.5 * (detail::cell_value(prm.tension, i - 1) + detail::cell_value(prm.tension, i));
    };

    const Index me = left_state ? 0 : 1;
    NodeBlocks b{n, me, 1, Matrix::Zero(n, n), Matrix::Zero(n, me), Matrix::Zero(n, 1),
                 Matrix::Zero(me, n), Matrix::Zero(1, n), Matrix()};
    Matrix H = Matrix::Zero(n, n);

    for (Index j = 0; j < N; ++j) {
        H(j, j) = h / rho(j);
        b.A(j, j) -= detail::cell_value(prm.damping, j) / rho(j);
    }
    for (Index i = 0; i <= N; ++i) {
        const Index f = face[static_cast<std::size_t>(i)];
        if (f < 0) continue;
        const double t = tf(i);
        if (i > 0 && i < N) {
            H(f, f) = h * t;
            b.A(i - 1, f) += t / h;
            b.A(i, f) -= t / h;
            b.A(f, i) += 1.0 / (h * rho(i));
            b.A(f, i - 1) -= 1.0 / (h * rho(i - 1));
        } else {
            // boundary half cell; outward normal s, adjacent cell c
            const double s = i == 0 ? -1.0 : 1.0;
            const Index c = i == 0 ? 0 : N - 1;
            H(f, f) = 0.5 * h * t;
            b.A(c, f) += s * t / h;
            b.A(f, c) -= s * 2.0 / (h * rho(c));
            if (i == N) {  // velocity input at zeta = 0, force output
                b.B_int(f, 0) = 2.0 / h;
                b.C_int(0, f) = t;
            }
        }
    }
    if (!left_state) {  // external stress input at zeta = -1, velocity output
        b.B_ext(0, 0) = 1.0 / h;
        b.C_ext(0, 0) = 1.0 / rho(0);
    }
    if (!right_state) {  // force input at zeta = 0, velocity output
        b.B_int(N - 1, 0) = 1.0 / h;
        b.C_int(0, N - 1) = 1.0 / rho(N - 1);
    }
    return assemble_node(b, H);
}

/// Smooth initial momentum bump centered at zeta = -1/2, zero strain.
inline Vector wave1d_bump(const Wave1dParams& prm, const SystemNode& node, double amplitude = 1.0) {
    Vector x = Vector::Zero(node.n());
    const double h = 1.0 / static_cast<double>(prm.cells);
    for (Index j = 0; j < prm.cells; ++j) {
        const double zeta = -1.0 + (static_cast<double>(j) + 0.5) * h;
        const double r = (zeta + 0.5) / 0.15;
        x(j) = amplitude * detail::cell_value(prm.rho, j) * std::exp(-r * r);
    }
    return x;
}

// ---------------------------------------------------------------------------
// 1D heat with Coleman-Gurtin memory

enum class MemoryKernel { Exponential };

struct HeatCGParams {
    Index nodes = 16;
    MemoryKernel kernel = MemoryKernel::Exponential;
};

/// Total mass of g; for mu(s) = exp(-s), g(s) = int_s^inf mu = exp(-s) and int_0^inf g = 1.
inline double kernel_total_mass(MemoryKernel k) {
    switch (k) {
        case MemoryKernel::Exponential: return 1.0;
    }
    return 0.0;
}

/// Lumped-mass finite differences on nodes zeta_i = i h, i = 0..N-1, h = 1/N, with
/// w(1) = m(1) = 0. State (w, m):
///   M w' = -K (w + m) + e_0 u,   m' = w - m,   y = w_0,
/// M = diag(h/2, h, ..., h), K = h G^T G (G the cell gradient). Energy weight diag(M, K)
/// gives the storage |w|^2/2 + |m_zeta|^2/2.
inline SystemNode build_heat_cg1d(const HeatCGParams& prm) {
    const Index N = prm.nodes;
    if (N < 2) throw Error(ErrorCode::BadParams, "heat model needs at least 2 nodes");
    const double h = 1.0 / static_cast<double>(N);
    Vector mass = Vector::Constant(N, h);
    mass(0) = 0.5 * h;
    Matrix G = Matrix::Zero(N, N);
    for (Index c = 0; c < N; ++c) {
        G(c, c) = -1.0 / h;
        if (c + 1 < N) G(c, c + 1) = 1.0 / h;
    }
    const Matrix K = h * G.transpose() * G;
    const Matrix MinvK = mass.cwiseInverse().asDiagonal() * K;

    const Index n = 2 * N;
    NodeBlocks b{n, 0, 1, Matrix::Zero(n, n), Matrix(), Matrix::Zero(n, 1), Matrix(),
                 Matrix::Zero(1, n), Matrix()};
    b.A.topLeftCorner(N, N) = -MinvK;
    b.A.topRightCorner(N, N) = -MinvK;
    b.A.bottomLeftCorner(N, N) = Matrix::Identity(N, N);
    b.A.bottomRightCorner(N, N) = -Matrix::Identity(N, N);
    b.B_int(0, 0) = 1.0 / mass(0);
    b.C_int(0, 0) = 1.0;
    Matrix H = Matrix::Zero(n, n);
    H.topLeftCorner(N, N) = mass.asDiagonal();
    H.bottomRightCorner(N, N) = K;
    return assemble_node(b, H);
}

/// w(zeta) = amplitude * cos(pi zeta / 2) (vanishes at zeta = 1), no memory.
inline Vector heat_profile(const HeatCGParams& prm, double amplitude = 1.0) {
    Vector x = Vector::Zero(2 * prm.nodes);
    const double h = 1.0 / static_cast<double>(prm.nodes);
    for (Index i = 0; i < prm.nodes; ++i) x(i) = amplitude * std::cos(0.5 * M_PI * static_cast<double>(i) * h);
    return x;
}

// ---------------------------------------------------------------------------
// 2D wave on a rectangle

enum class EdgeKind {
    Clamped,            ///< z_t = 0
    ExternalStress,     ///< external port: normal stress in, velocity out
    InterfaceStress,    ///< internal port: normal stress in, velocity out
    InterfaceVelocity,  ///< internal port: velocity in, normal stress out
};

struct Wave2dParams {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double width = 1.0;
    double height = 1.0;
    Index nx = 4;
    Index ny = 4;
    /// Per cell (index j * nx + i) or a single value.
    std::vector<double> rho{1.0};
    std::vector<double> tension{1.0};
    std::vector<double> damping{0.0};
    /// One entry per boundary face, ordered by increasing coordinate; empty means clamped.
    std::vector<EdgeKind> left, right, bottom, top;
};

/// Boundary face carrying a port, in port order.
struct PortFace {
    EdgeKind kind;
    double x0, y0, x1, y1;
};

namespace detail {

enum class Side { Left, Right, Bottom, Top };

inline const std::vector<EdgeKind>& side_kinds(const Wave2dParams& p, Side s) {
    switch (s) {
        case Side::Left: return p.left;
        case Side::Right: return p.right;
        case Side::Bottom: return p.bottom;
        case Side::Top: return p.top;
    }
    return p.left;
}

inline EdgeKind edge_kind(const Wave2dParams& p, Side s, Index k) {
    const auto& v = side_kinds(p, s);
    return v.empty() ? EdgeKind::Clamped : v[static_cast<std::size_t>(k)];
}

inline bool is_external(EdgeKind k) { return k == EdgeKind::ExternalStress; }
inline bool is_internal(EdgeKind k) {
    return k == EdgeKind::InterfaceStress || k == EdgeKind::InterfaceVelocity;
}
inline bool face_is_state(EdgeKind k) {
    return k == EdgeKind::Clamped || k == EdgeKind::InterfaceVelocity;
}

inline void validate(const Wave2dParams& p) {
    if (p.nx < 2 || p.ny < 2) throw Error(ErrorCode::BadParams, "wave2d needs at least 2x2 cells");
    if (!(p.width > 0.0) || !(p.height > 0.0)) throw Error(ErrorCode::BadParams, "rectangle extent must be positive");
    const Index cells = p.nx * p.ny;
    check_field(p.rho, cells, "rho", false);
    check_field(p.tension, cells, "tension", false);
    check_field(p.damping, cells, "damping", true);
    const auto sized = [](const std::vector<EdgeKind>& v, Index n) {
        return v.empty() || static_cast<Index>(v.size()) == n;
    };
    if (!sized(p.left, p.ny) || !sized(p.right, p.ny) || !sized(p.bottom, p.nx) || !sized(p.top, p.nx)) {
        throw Error(ErrorCode::BadParams, "edge designation sizes must match the face counts");
    }
}

/// Visit boundary faces in port order: left, right (by j), bottom, top (by i).
template <class F>
void for_each_boundary_face(const Wave2dParams& p, F&& f) {
    for (Side s : {Side::Left, Side::Right})
        for (Index j = 0; j < p.ny; ++j) f(s, j);
    for (Side s : {Side::Bottom, Side::Top})
        for (Index i = 0; i < p.nx; ++i) f(s, i);
}

}  // namespace detail

inline std::vector<PortFace> port_faces(const Wave2dParams& p, bool external) {
    detail::validate(p);
    const double hx = p.width / static_cast<double>(p.nx), hy = p.height / static_cast<double>(p.ny);
    std::vector<PortFace> out;
    detail::for_each_boundary_face(p, [&](detail::Side s, Index k) {
        const EdgeKind kind = detail::edge_kind(p, s, k);
        if (external ? !detail::is_external(kind) : !detail::is_internal(kind)) return;
        const double kk = static_cast<double>(k);
        switch (s) {
            case detail::Side::Left:
                out.push_back({kind, p.origin_x, p.origin_y + kk * hy, p.origin_x, p.origin_y + (kk + 1) * hy});
                break;
            case detail::Side::Right:
                out.push_back({kind, p.origin_x + p.width, p.origin_y + kk * hy, p.origin_x + p.width,
                               p.origin_y + (kk + 1) * hy});
                break;
            case detail::Side::Bottom:
                out.push_back({kind, p.origin_x + kk * hx, p.origin_y, p.origin_x + (kk + 1) * hx, p.origin_y});
                break;
            case detail::Side::Top:
                out.push_back({kind, p.origin_x + kk * hx, p.origin_y + p.height, p.origin_x + (kk + 1) * hx,
                               p.origin_y + p.height});
                break;
        }
    });
    return out;
}

/// Staggered acoustic grid: p at cell centers, q_x on vertical faces, q_y on horizontal
/// faces. Port signals are scaled by sqrt(face length) so that u^T y is the boundary power.
/// State layout: cells (j * nx + i), then x-faces, then y-faces that carry state.
inline SystemNode build_wave2d_rect(const Wave2dParams& p) {
    using detail::Side;
    detail::validate(p);
    const Index nx = p.nx, ny = p.ny, cells = nx * ny;
    const double hx = p.width / static_cast<double>(nx), hy = p.height / static_cast<double>(ny);
    const double area = hx * hy;
    const auto cell = [&](Index i, Index j) { return j * nx + i; };
    const auto rho = [&](Index c) { return detail::cell_value(p.rho, c); };
    const auto ten = [&](Index c) { return detail::cell_value(p.tension, c); };

    // enumerate state faces
    std::vector<Index> xface(static_cast<std::size_t>((nx + 1) * ny), -1);
    std::vector<Index> yface(static_cast<std::size_t>(nx * (ny + 1)), -1);
    Index n = cells;
    for (Index j = 0; j < ny; ++j)
        for (Index i = 0; i <= nx; ++i) {
            bool state = i > 0 && i < nx;
            if (i == 0) state = detail::face_is_state(detail::edge_kind(p, Side::Left, j));
            if (i == nx) state = detail::face_is_state(detail::edge_kind(p, Side::Right, j));
            if (state) xface[static_cast<std::size_t>(j * (nx + 1) + i)] = n++;
        }
    for (Index j = 0; j <= ny; ++j)
        for (Index i = 0; i < nx; ++i) {
            bool state = j > 0 && j < ny;
            if (j == 0) state = detail::face_is_state(detail::edge_kind(p, Side::Bottom, i));
            if (j == ny) state = detail::face_is_state(detail::edge_kind(p, Side::Top, i));
            if (state) yface[static_cast<std::size_t>(j * nx + i)] = n++;
        }
    const Index me = static_cast<Index>(port_faces(p, true).size());
    const Index mi = static_cast<Index>(port_faces(p, false).size());

    NodeBlocks b{n, me, mi, Matrix::Zero(n, n), Matrix::Zero(n, me), Matrix::Zero(n, mi),
                 Matrix::Zero(me, n), Matrix::Zero(mi, n), Matrix()};
    Matrix H = Matrix::Zero(n, n);

    for (Index c = 0; c < cells; ++c) {
        H(c, c) = area / rho(c);
        b.A(c, c) -= detail::cell_value(p.damping, c) / rho(c);
    }
    const auto interior = [&](Index f, Index c_lo, Index c_hi, double hperp) {
        const double t = 0.5 * (ten(c_lo) + ten(c_hi));
        H(f, f) = area * t;
        b.A(c_lo, f) += t / hperp;
        b.A(c_hi, f) -= t / hperp;
        b.A(f, c_hi) += 1.0 / (hperp * rho(c_hi));
        b.A(f, c_lo) -= 1.0 / (hperp * rho(c_lo));
    };
    for (Index j = 0; j < ny; ++j)
        for (Index i = 1; i < nx; ++i) interior(xface[static_cast<std::size_t>(j * (nx + 1) + i)], cell(i - 1, j), cell(i, j), hx);
    for (Index j = 1; j < ny; ++j)
        for (Index i = 0; i < nx; ++i) interior(yface[static_cast<std::size_t>(j * nx + i)], cell(i, j - 1), cell(i, j), hy);

    Index ext = 0, intl = 0;
    detail::for_each_boundary_face(p, [&](Side s, Index k) {
        const EdgeKind kind = detail::edge_kind(p, s, k);
        Index c = 0, f = -1;
        double sign = 1.0, hperp = hx, len = hy;
        switch (s) {
            case Side::Left: c = cell(0, k); f = xface[static_cast<std::size_t>(k * (nx + 1))]; sign = -1.0; break;
            case Side::Right: c = cell(nx - 1, k); f = xface[static_cast<std::size_t>(k * (nx + 1) + nx)]; break;
            case Side::Bottom: c = cell(k, 0); f = yface[static_cast<std::size_t>(k)]; sign = -1.0; hperp = hy; len = hx; break;
            case Side::Top: c = cell(k, ny - 1); f = yface[static_cast<std::size_t>(ny * nx + k)]; hperp = hy; len = hx; break;
        }
        const double sl = std::sqrt(len);
        if (detail::face_is_state(kind)) {
            const double t = ten(c);
            H(f, f) = 0.5 * area * t;
            b.A(c, f) += sign * t / hperp;
            b.A(f, c) -= sign * 2.0 / (hperp * rho(c));
            if (kind == EdgeKind::InterfaceVelocity) {
                b.B_int(f, intl) = sign * 2.0 / (hperp * sl);
                b.C_int(intl, f) = sign * sl * t;
                ++intl;
            }
        } else {
            Matrix& B = kind == EdgeKind::ExternalStress ? b.B_ext : b.B_int;
            Matrix& C = kind == EdgeKind::ExternalStress ? b.C_ext : b.C_int;
            Index& port = kind == EdgeKind::ExternalStress ? ext : intl;
            B(c, port) = 1.0 / (hperp * sl);
            C(port, c) = sl / rho(c);
            ++port;
        }
    });
    return assemble_node(b, H);
}

/// Gaussian momentum bump at (cx, cy) with the given width; zero strain.
inline Vector wave2d_bump(const Wave2dParams& p, const SystemNode& node, double cx, double cy,
                          double width, double amplitude = 1.0) {
    Vector x = Vector::Zero(node.n());
    const double hx = p.width / static_cast<double>(p.nx), hy = p.height / static_cast<double>(p.ny);
    for (Index j = 0; j < p.ny; ++j)
        for (Index i = 0; i < p.nx; ++i) {
            const double xc = p.origin_x + (static_cast<double>(i) + 0.5) * hx;
            const double yc = p.origin_y + (static_cast<double>(j) + 0.5) * hy;
            const double r2 = ((xc - cx) * (xc - cx) + (yc - cy) * (yc - cy)) / (width * width);
            x(j * p.nx + i) = amplitude * detail::cell_value(p.rho, j * p.nx + i) * std::exp(-r2);
        }
    return x;
}

// ---------------------------------------------------------------------------
// Coupled problems

/// y = N_c u for (wave, heat) with u_1 = y_2, u_2 = -y_1.
inline Matrix wave_heat_coupling() {
    Matrix Nc(2, 2);
    Nc << 0.0, -1.0, 1.0, 0.0;
    return Nc;
}

/// Wave (velocity in / force out at zeta = 0) coupled to the heat model at zeta = 0.
/// An external port exists iff wave.left_end == ExternalForce.
inline CoupledProblem build_wave_heat_problem(const Wave1dParams& wave, const HeatCGParams& heat,
                                              const TimeGrid& grid, Vector x0, GridTrajectory u_ext) {
    std::vector<SystemNode> parts{build_wave1d(wave, WavePortMode::VelocityInForceOut), build_heat_cg1d(heat)};
    return CoupledProblem(std::move(parts), CouplingOperator(wave_heat_coupling()), grid, std::move(x0),
                          std::move(u_ext));
}

/// Default L-shape designations: Omega_1 = (0,1)x(0,2) with n x 2n cells, Omega_2 = (1,2)x(0,1)
/// with n x n cells; external stress port on the top of Omega_1, interface {1} x (0,1).
inline std::pair<Wave2dParams, Wave2dParams> lshape_params(Index n) {
    Wave2dParams a;
    a.origin_x = 0.0; a.origin_y = 0.0; a.width = 1.0; a.height = 2.0;
    a.nx = n; a.ny = 2 * n;
    a.top.assign(static_cast<std::size_t>(n), EdgeKind::ExternalStress);
    a.right.assign(static_cast<std::size_t>(2 * n), EdgeKind::Clamped);
    for (Index j = 0; j < n; ++j) a.right[static_cast<std::size_t>(j)] = EdgeKind::InterfaceStress;

    Wave2dParams b;
    b.origin_x = 1.0; b.origin_y = 0.0; b.width = 1.0; b.height = 1.0;
    b.nx = n; b.ny = n;
    b.left.assign(static_cast<std::size_t>(n), EdgeKind::InterfaceVelocity);
    return {a, b};
}

/// u_1 = -y_2, u_2 = y_1 on the interface, i.e. N_c = [[0, I], [-I, 0]].
inline Matrix lshape_coupling(Index interface_ports) {
    const Index k = interface_ports;
    Matrix Nc = Matrix::Zero(2 * k, 2 * k);
    Nc.topRightCorner(k, k) = Matrix::Identity(k, k);
    Nc.bottomLeftCorner(k, k) = -Matrix::Identity(k, k);
    return Nc;
}

inline CoupledProblem build_lshape_problem(const Wave2dParams& omega1, const Wave2dParams& omega2,
                                           const TimeGrid& grid, Vector x0, GridTrajectory u_ext) {
    const auto f1 = port_faces(omega1, false);
    const auto f2 = port_faces(omega2, false);
    if (f1.size() != f2.size()) {
        throw Error(ErrorCode::NonconformingInterface, "interface face counts differ: " + std::to_string(f1.size())
                                                           + " vs " + std::to_string(f2.size()));
    }
    for (std::size_t i = 0; i < f1.size(); ++i) {
        const auto& a = f1[i];
        const auto& c = f2[i];
        const double d = std::abs(a.x0 - c.x0) + std::abs(a.y0 - c.y0) + std::abs(a.x1 - c.x1) + std::abs(a.y1 - c.y1);
        if (a.kind != EdgeKind::InterfaceStress || c.kind != EdgeKind::InterfaceVelocity || d > 1e-12) {
            throw Error(ErrorCode::NonconformingInterface, "interface faces do not match", i);
        }
    }
    std::vector<SystemNode> parts{build_wave2d_rect(omega1), build_wave2d_rect(omega2)};
    const Index k = static_cast<Index>(f1.size());
    return CoupledProblem(std::move(parts), CouplingOperator(lshape_coupling(k)), grid, std::move(x0),
                          std::move(u_ext));
}

/// x' = -x + u, y = x, closed by u = -y: the midpoint solution is x_j = ((1 - tau)/(1 + tau))^j x0.
inline CoupledProblem build_scalar_demo(const TimeGrid& grid, double x0 = 1.0) {
    NodeBlocks b{1, 0, 1, Matrix::Constant(1, 1, -1.0), Matrix(), Matrix::Constant(1, 1, 1.0), Matrix(),
                 Matrix::Constant(1, 1, 1.0), Matrix()};
    std::vector<SystemNode> parts{assemble_node(b, Matrix::Identity(1, 1))};
    return CoupledProblem(std::move(parts), CouplingOperator(Matrix::Constant(1, 1, -1.0)), grid,
                          Vector::Constant(1, x0), GridTrajectory(grid, Sampling::Midpoint, 0));
}

}  // namespace prlm::models
