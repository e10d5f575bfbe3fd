#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "otconv/core/error.hpp"
#include "otconv/core/lcg.hpp"
#include "otconv/grid/fft.hpp"
#include "otconv/grid/grid.hpp"
#include "otconv/grid/io.hpp"

// Cross-Burgers equation  d_t B + d_s B x B = d_ss B  for B(s) in R^3, s in
// [0, 2 pi) periodic, and its skew-matrix form  d_t B + [d_s B, B] = d_ss B.
// Profiles are stored as fields on the 1D unit torus; node j sits at
// s = 2 pi j / n.

namespace otconv {

enum class CBScheme { IntegratingFactorRK4, ExplicitRK2 };

inline CBScheme parse_cb_scheme(const std::string& s) {
    if (s == "ifrk4" || s == "imex") return CBScheme::IntegratingFactorRK4;
    if (s == "rk2") return CBScheme::ExplicitRK2;
    throw InvalidArgument("unknown crossburgers scheme '" + s + "' (expected ifrk4|rk2)");
}

inline const char* to_string(CBScheme s) { return s == CBScheme::IntegratingFactorRK4 ? "ifrk4" : "rk2"; }

struct CBOptions {
    CBScheme scheme = CBScheme::IntegratingFactorRK4;
    bool cross_term = true;
    bool viscous = true;
};

struct CrossBurgersState {
    Field B;  // rank 3
    double t = 0.0;
};

namespace cb_detail {

using fft::Complex;

inline Grid profile_grid(int n) {
    require(n >= 8 && is_power_of_two(n), "crossburgers: n_s must be a power of two >= 8");
    return Grid::torus(1, n);
}

inline double ds(int n) { return 2.0 * std::numbers::pi / n; }

// full |k|^2, Nyquist included, for the diffusion
inline double k2(int j, int n) {
    const int k = j <= n / 2 ? j : j - n;
    return double(k) * double(k);
}

template <class Op>
Field map_spectra(const Field& f, Op op) {
    const int n = f.grid().n();
    Field out(f.grid(), f.rank());
    std::vector<Complex> buf(n);
    for (int c = 0; c < f.rank(); ++c) {
        for (int j = 0; j < n; ++j) buf[j] = f(j, c);
        fft::forward(1, n, buf);
        for (int j = 0; j < n; ++j) buf[j] = op(j, buf[j]);
        fft::inverse(1, n, buf);
        for (int j = 0; j < n; ++j) out(j, c) = buf[j].real();
    }
    return out;
}

inline Field d_s(const Field& f) {
    const int n = f.grid().n();
    return map_spectra(f, [n](int j, Complex z) { return Complex(0.0, fft::wavenumber(j, n)) * z; });
}

inline Field d_ss(const Field& f) {
    const int n = f.grid().n();
    return map_spectra(f, [n](int j, Complex z) { return -k2(j, n) * z; });
}

/// exp(tau d_ss)
inline Field heat(const Field& f, double tau) {
    const int n = f.grid().n();
    return map_spectra(f, [n, tau](int j, Complex z) { return std::exp(-tau * k2(j, n)) * z; });
}

inline Field axpy(const Field& x, double a, const Field& y) {
    Field out = x;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += a * y.data()[i];
    return out;
}

inline double sum_sq(const Field& f) {
    double s = 0.0;
    for (double x : f.data()) s += x * x;
    return s;
}

inline bool all_finite(const Field& f) {
    for (double x : f.data())
        if (!std::isfinite(x)) return false;
    return true;
}

// -(d_s B x B), pointwise
inline Field cross_term(const Field& B) {
    const Field dB = d_s(B);
    Field out(B.grid(), 3);
    for (std::size_t j = 0; j < B.nodes(); ++j) {
        const double a0 = dB(j, 0), a1 = dB(j, 1), a2 = dB(j, 2);
        const double b0 = B(j, 0), b1 = B(j, 1), b2 = B(j, 2);
        out(j, 0) = -(a1 * b2 - a2 * b1);
        out(j, 1) = -(a2 * b0 - a0 * b2);
        out(j, 2) = -(a0 * b1 - a1 * b0);
    }
    return out;
}

inline int matrix_dim(const Field& B) {
    const int d = int(std::lround(std::sqrt(double(B.rank()))));
    require(d >= 1 && d * d == B.rank(), "bracket: field rank must be d*d");
    return d;
}

// -[d_s B, B], pointwise, row-major d x d
inline Field bracket_term(const Field& B) {
    const int d = matrix_dim(B);
    const Field A = d_s(B);
    Field out(B.grid(), B.rank());
    for (std::size_t node = 0; node < B.nodes(); ++node) {
        const auto a = A.at(node);
        const auto b = B.at(node);
        auto o = out.at(node);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double ab = 0.0, ba = 0.0;
                for (int k = 0; k < d; ++k) {
                    ab += a[i * d + k] * b[k * d + j];
                    ba += b[i * d + k] * a[k * d + j];
                }
                o[i * d + j] = -(ab - ba);
            }
    }
    return out;
}

inline Field zero_like(const Field& f) { return Field(f.grid(), f.rank()); }

using Nonlinear = std::function<Field(const Field&)>;

inline Field ifrk4(const Field& u, double dt, const Nonlinear& N, bool viscous) {
    auto H = [&](const Field& f, double tau) { return viscous ? heat(f, tau) : f; };
    const Field k1 = N(u);
    const Field k2 = N(H(axpy(u, dt / 2, k1), dt / 2));
    const Field Hh_u = H(u, dt / 2);
    const Field k3 = N(axpy(Hh_u, dt / 2, k2));
    const Field H_u = H(u, dt);
    const Field k4 = N(axpy(H_u, dt, H(k3, dt / 2)));
    Field mid = k2;
    for (std::size_t i = 0; i < mid.data().size(); ++i) mid.data()[i] += k3.data()[i];
    const Field Hk1 = H(k1, dt), Hmid = H(mid, dt / 2);
    Field out = H_u;
    for (std::size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] += dt / 6 * (Hk1.data()[i] + 2.0 * Hmid.data()[i] + k4.data()[i]);
    return out;
}

inline Field rk2(const Field& u, double dt, const Nonlinear& N, bool viscous) {
    if (viscous) {
        const double kmax = u.grid().n() / 2.0;
        if (dt * kmax * kmax > 2.0)
            throw CflError("crossburgers rk2: dt*(n_s/2)^2 = " + format_real(dt * kmax * kmax) +
                           " exceeds the stability limit 2");
    }
    auto F = [&](const Field& f) {
        Field r = N(f);
        if (viscous) {
            const Field lap = d_ss(f);
            for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += lap.data()[i];
        }
        return r;
    };
    const Field f1 = F(u);
    const Field f2 = F(axpy(u, dt, f1));
    Field out = u;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += dt / 2 * (f1.data()[i] + f2.data()[i]);
    return out;
}

inline Field advance(const Field& u, double dt, const Nonlinear& N, const CBOptions& opt) {
    require(dt > 0.0 && std::isfinite(dt), "crossburgers: dt must be positive");
    Field next = opt.scheme == CBScheme::IntegratingFactorRK4 ? ifrk4(u, dt, N, opt.viscous) : rk2(u, dt, N, opt.viscous);
    const double before = std::sqrt(sum_sq(u)), after = std::sqrt(sum_sq(next));
    if (!all_finite(next) || (before > 0.0 && after > 10.0 * before) || (before == 0.0 && after > 0.0))
        throw SolverError("crossburgers: instability detected (norm " + format_real(before) + " -> " +
                          format_real(after) + " in one step)");
    return next;
}

}  // namespace cb_detail

inline CrossBurgersState make_cb_state(int n, const std::function<std::array<double, 3>(double)>& B0) {
    const Grid g = cb_detail::profile_grid(n);
    Field B(g, 3);
    for (int j = 0; j < n; ++j) {
        const auto b = B0(j * cb_detail::ds(n));
        for (int c = 0; c < 3; ++c) B(j, c) = b[c];
    }
    for (double x : B.data()) require(std::isfinite(x), "crossburgers: initial profile must be finite");
    return {std::move(B), 0.0};
}

inline CrossBurgersState cb_pde_step(const CrossBurgersState& s, double dt, const CBOptions& opt = {}) {
    require(s.B.rank() == 3, "cb_pde_step: B must have 3 components");
    cb_detail::profile_grid(s.B.grid().n());
    const cb_detail::Nonlinear N = opt.cross_term ? cb_detail::Nonlinear(cb_detail::cross_term)
                                                  : cb_detail::Nonlinear(cb_detail::zero_like);
    return {cb_detail::advance(s.B, dt, N, opt), s.t + dt};
}

// --- special family B = (alpha cos s, alpha sin s, beta - 1) ---

struct SpecialSolutionState {
    double alpha = 1.0;
    double beta = 0.0;
    double t = 0.0;
};

inline double first_integral(const SpecialSolutionState& s) { return s.alpha * s.alpha + s.beta * s.beta; }

inline SpecialSolutionState cb_ode_step(const SpecialSolutionState& s, double dt) {
    require(s.alpha >= 0.0, "cb_ode_step: alpha must be >= 0");
    auto f = [](double a, double b) { return std::pair{-b * a, a * a}; };
    const auto [a1, b1] = f(s.alpha, s.beta);
    const auto [a2, b2] = f(s.alpha + dt / 2 * a1, s.beta + dt / 2 * b1);
    const auto [a3, b3] = f(s.alpha + dt / 2 * a2, s.beta + dt / 2 * b2);
    const auto [a4, b4] = f(s.alpha + dt * a3, s.beta + dt * b3);
    SpecialSolutionState out;
    out.alpha = std::max(0.0, s.alpha + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4));
    out.beta = s.beta + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    out.t = s.t + dt;
    return out;
}

inline Field family_profile(int n, const SpecialSolutionState& s) {
    return make_cb_state(n, [&](double x) {
               return std::array<double, 3>{s.alpha * std::cos(x), s.alpha * std::sin(x), s.beta - 1.0};
           }).B;
}

/// lambda = log alpha, lambda' = -beta.
struct LambdaState {
    double lambda = 0.0;
    double rate = 0.0;
    double t = 0.0;
};

inline double lambda_energy(const LambdaState& s) { return 0.5 * s.rate * s.rate + 0.5 * std::exp(2.0 * s.lambda); }

/// Velocity Verlet for lambda'' = -exp(2 lambda).
inline LambdaState lambda_form_step(const LambdaState& s, double dt) {
    LambdaState out;
    const double half = s.rate - dt / 2 * std::exp(2.0 * s.lambda);
    out.lambda = s.lambda + dt * half;
    out.rate = half - dt / 2 * std::exp(2.0 * out.lambda);
    out.t = s.t + dt;
    return out;
}

inline LambdaState to_lambda(const SpecialSolutionState& s) {
    require(s.alpha > 0.0, "lambda form needs alpha > 0");
    return {std::log(s.alpha), -s.beta, s.t};
}

inline SpecialSolutionState from_lambda(const LambdaState& l) { return {std::exp(l.lambda), -l.rate, l.t}; }

// --- bracket form on skew matrices ---

inline constexpr double kSkewTolerance = 1e-12;

inline void require_skew(const Field& B) {
    const int d = cb_detail::matrix_dim(B);
    for (std::size_t node = 0; node < B.nodes(); ++node) {
        const auto b = B.at(node);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                if (std::abs(b[i * d + j] + b[j * d + i]) > kSkewTolerance)
                    throw InvalidArgument("bracket_step: sample " + std::to_string(node) + " is not skew (entry " +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

inline Field bracket_step(const Field& B, double dt, const CBOptions& opt = {}) {
    cb_detail::profile_grid(B.grid().n());
    require_skew(B);
    const cb_detail::Nonlinear N = opt.cross_term ? cb_detail::Nonlinear(cb_detail::bracket_term)
                                                  : cb_detail::Nonlinear(cb_detail::zero_like);
    return cb_detail::advance(B, dt, N, opt);
}

/// hat(v) w = v x w
inline Field skew_from_vector(const Field& v) {
    require(v.rank() == 3, "skew_from_vector: expected rank 3");
    Field out(v.grid(), 9);
    for (std::size_t j = 0; j < v.nodes(); ++j) {
        auto m = out.at(j);
        m[1] = -v(j, 2), m[2] = v(j, 1);
        m[3] = v(j, 2), m[5] = -v(j, 0);
        m[6] = -v(j, 1), m[7] = v(j, 0);
    }
    return out;
}

inline Field vector_from_skew(const Field& m) {
    require(m.rank() == 9, "vector_from_skew: expected 3x3 matrices");
    Field out(m.grid(), 3);
    for (std::size_t j = 0; j < m.nodes(); ++j) {
        out(j, 0) = m(j, 7);
        out(j, 1) = m(j, 2);
        out(j, 2) = m(j, 3);
    }
    return out;
}

inline double max_skew_defect(const Field& B) {
    const int d = cb_detail::matrix_dim(B);
    double worst = 0.0;
    for (std::size_t node = 0; node < B.nodes(); ++node) {
        const auto b = B.at(node);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) worst = std::max(worst, std::abs(b[i * d + j] + b[j * d + i]));
    }
    return worst;
}

// --- diagnostics and runs ---

/// int |B|^2 ds
inline double cb_l2_squared(const Field& B) { return cb_detail::sum_sq(B) * cb_detail::ds(B.grid().n()); }

/// int |d_s B|^2 ds
inline double cb_dissipation(const Field& B) { return cb_l2_squared(cb_detail::d_s(B)); }

/// ||a - b|| / ||b|| in L^2(ds)
inline double relative_l2(const Field& a, const Field& b) {
    require(a.grid() == b.grid() && a.rank() == b.rank(), "relative_l2: shape mismatch");
    double num = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) num += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    const double den = cb_detail::sum_sq(b);
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

struct CBRunConfig {
    int n = 128;
    double dt = 1e-4;
    double T = 1.0;
    std::string initial = "family";  // family | constant | mode | random
    double alpha0 = 1.0;
    double beta0 = 0.0;
    double amplitude = 1.0;  // constant: B = (0,0,amplitude); mode/random: scale
    int mode = 1;
    std::uint64_t seed = 1;
    CBOptions options;
    int output_stride = 1;
};

inline CrossBurgersState make_cb_initial(const CBRunConfig& cfg) {
    const double A = cfg.amplitude;
    if (cfg.initial == "family") {
        require(cfg.alpha0 >= 0.0, "crossburgers: alpha0 must be >= 0");
        const double a = cfg.alpha0, b = cfg.beta0;
        return make_cb_state(cfg.n, [&](double s) {
            return std::array<double, 3>{a * std::cos(s), a * std::sin(s), b - 1.0};
        });
    }
    if (cfg.initial == "constant")
        return make_cb_state(cfg.n, [&](double) { return std::array<double, 3>{0.0, 0.0, A}; });
    if (cfg.initial == "mode") {
        require(cfg.mode >= 0 && 2 * cfg.mode < cfg.n, "crossburgers: mode must lie below the Nyquist index");
        const double k = cfg.mode;
        return make_cb_state(cfg.n, [&](double s) {
            return std::array<double, 3>{A * std::cos(k * s), A * std::sin(k * s), 0.0};
        });
    }
    if (cfg.initial == "random") {
        // a few smooth modes, coefficients ~ 1/k^2
        Lcg64 rng(cfg.seed);
        std::array<std::array<double, 8>, 3> coef{};
        for (auto& c : coef)
            for (double& x : c) x = rng.uniform(-1.0, 1.0);
        return make_cb_state(cfg.n, [&](double s) {
            std::array<double, 3> b{};
            for (int c = 0; c < 3; ++c)
                for (int k = 1; k <= 4; ++k)
                    b[c] += A / (k * k) * (coef[c][2 * k - 2] * std::cos(k * s) + coef[c][2 * k - 1] * std::sin(k * s));
            return b;
        });
    }
    throw InvalidArgument("unknown crossburgers initial preset '" + cfg.initial +
                          "' (expected family|constant|mode|random)");
}

struct CBDiagnostics {
    double t = 0.0;
    double l2 = 0.0;
    double decay_residual = std::numeric_limits<double>::quiet_NaN();  // dE/dt + D, trapezoid in t
    double err_vs_family = std::numeric_limits<double>::quiet_NaN();
};

inline const char* cb_csv_header() { return "t,l2,decay_residual,err_vs_family"; }

inline void write_csv_row(std::ostream& os, const CBDiagnostics& r) {
    auto opt = [&](double x) {
        if (!std::isnan(x)) os << format_real(x);
    };
    os << format_real(r.t) << ',' << format_real(r.l2) << ',';
    opt(r.decay_residual);
    os << ',';
    opt(r.err_vs_family);
    os << '\n';
}

struct CBRunResult {
    std::vector<CBDiagnostics> rows;
    CrossBurgersState final_state;
    SpecialSolutionState family;  // meaningful when tracks_family
    bool tracks_family = false;
    double max_decay_residual = 0.0;
    double max_err_vs_family = std::numeric_limits<double>::quiet_NaN();
};

/// Steps to T. Rows are emitted every `output_stride` steps and at the end;
/// the residual and family error are monitored at every step.
inline CBRunResult cb_run(const CBRunConfig& cfg, std::ostream* csv = nullptr,
                          const std::function<void(const CrossBurgersState&)>& observer = {}) {
    require(cfg.dt > 0.0 && cfg.T >= 0.0, "crossburgers: dt must be > 0 and T >= 0");
    require(cfg.output_stride >= 1, "crossburgers: output stride must be >= 1");
    CrossBurgersState s = make_cb_initial(cfg);
    const bool family = cfg.initial == "family" && cfg.options.cross_term && cfg.options.viscous;
    SpecialSolutionState fam{cfg.alpha0, cfg.beta0, 0.0};
    const long steps = std::lround(cfg.T / cfg.dt);
    const double visc = cfg.options.viscous ? 1.0 : 0.0;

    CBRunResult res{{}, s, fam, family, 0.0, family ? 0.0 : std::numeric_limits<double>::quiet_NaN()};
    double E = 0.5 * cb_l2_squared(s.B), D = cb_dissipation(s.B);
    CBDiagnostics r0{0.0, std::sqrt(2.0 * E)};
    if (family) r0.err_vs_family = relative_l2(s.B, family_profile(cfg.n, fam));
    res.rows.push_back(r0);
    if (csv) *csv << cb_csv_header() << '\n', write_csv_row(*csv, r0);
    if (observer) observer(s);

    for (long k = 1; k <= steps; ++k) {
        s = cb_pde_step(s, cfg.dt, cfg.options);
        const double E1 = 0.5 * cb_l2_squared(s.B), D1 = cb_dissipation(s.B);
        CBDiagnostics r{s.t, std::sqrt(2.0 * E1)};
        r.decay_residual = (E1 - E) / cfg.dt + visc * 0.5 * (D + D1);
        res.max_decay_residual = std::max(res.max_decay_residual, std::abs(r.decay_residual));
        E = E1, D = D1;
        if (family) {
            fam = cb_ode_step(fam, cfg.dt);
            r.err_vs_family = relative_l2(s.B, family_profile(cfg.n, fam));
            res.max_err_vs_family = std::max(res.max_err_vs_family, r.err_vs_family);
        }
        if (k % cfg.output_stride == 0 || k == steps) {
            res.rows.push_back(r);
            if (csv) write_csv_row(*csv, r);
            if (observer) observer(s);
        }
    }
    res.final_state = s;
    res.family = fam;
    return res;
}

}  // namespace otconv
