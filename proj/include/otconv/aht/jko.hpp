#pragma once

#include <vector>

#include "otconv/rearrange/rearrange.hpp"

namespace otconv {

// Minimizing-movement discretization of the Lagrangian AHT flow on uniform
// atoms. X is a permutation: the atom a_i currently sits at a_{X(i)}.
struct JKOState {
    LagrangianCloud data;  // atoms a_i with the values y0_i
    Permutation X;
    double h = 0.1;
    std::size_t n = 0;
};

inline JKOState make_jko_state(LagrangianCloud y0, double h) {
    require(y0.value_dim() == y0.dim(), "jko: atoms and y0 values must live in the same space");
    require(h > 0.0 && std::isfinite(h), "jko: step h must be positive");
    const std::size_t n = y0.size();
    return {std::move(y0), Permutation::identity(n), h, 0};
}

/// (1/N) sum_i |a_X(i) - a_Xprev(i)|^2 / (2h) + |a_X(i) - y0_i|^2 / 2
inline double jko_objective(const JKOState& prev, const Permutation& X) {
    const auto& c = prev.data;
    require(X.size() == c.size(), "jko_objective: permutation size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto ax = c.atom(X[i]);
        s += squared_distance(ax, c.atom(prev.X[i])) / (2.0 * prev.h) + 0.5 * squared_distance(ax, c.value(i));
    }
    return s / static_cast<double>(c.size());
}

/// (1/N) sum_i |a_X(i) - y0_i|^2 / 2
inline double jko_energy(const JKOState& s) {
    const auto& c = s.data;
    double e = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) e += 0.5 * squared_distance(c.atom(s.X[i]), c.value(i));
    return e / static_cast<double>(c.size());
}

/// Values z_i = (a_Xprev(i) + h y0_i) / (1 + h) on the atoms.
inline LagrangianCloud jko_target(const JKOState& s) {
    const auto& c = s.data;
    const int d = c.dim();
    std::vector<double> z(c.size() * d);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto ax = c.atom(s.X[i]);
        const auto y = c.value(i);
        for (int a = 0; a < d; ++a) z[i * d + a] = (ax[a] + s.h * y[a]) / (1.0 + s.h);
    }
    return c.with_values(std::move(z));
}

/// X_new is the measure-preserving factor of the polar factorization of z.
/// The two forms of the objective agree only up to rounding; should the
/// factor evaluate above X_prev in floating point, X_prev is kept.
inline JKOState jko_aht_step(const JKOState& s, const RearrangeOptions& opt = {}) {
    auto pf = polar_factorize(jko_target(s), opt);
    JKOState out{s.data, std::move(pf.X), s.h, s.n + 1};
    if (jko_objective(s, out.X) > jko_objective(s, s.X)) out.X = s.X;
    return out;
}

}  // namespace otconv
