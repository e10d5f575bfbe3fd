#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "otconv/core/lcg.hpp"
#include "otconv/grid/grid.hpp"

namespace otconv {

enum class ForcingKind { Hookean, Model1, Model2, Model3, Custom };

inline std::string_view to_string(ForcingKind k) {
    switch (k) {
        case ForcingKind::Hookean: return "hookean";
        case ForcingKind::Model1: return "model1";
        case ForcingKind::Model2: return "model2";
        case ForcingKind::Model3: return "model3";
        case ForcingKind::Custom: return "custom";
    }
    return "?";
}

inline ForcingKind parse_forcing_kind(std::string_view s) {
    if (s == "hookean") return ForcingKind::Hookean;
    if (s == "model1") return ForcingKind::Model1;
    if (s == "model2") return ForcingKind::Model2;
    if (s == "model3") return ForcingKind::Model3;
    if (s == "custom") return ForcingKind::Custom;
    throw InvalidArgument("unknown forcing kind '" + std::string(s) + "' (expected hookean|model1|model2|model3)");
}

/// Density on labels a in D: 1 + contrast * prod_k cos(2 pi a_k). Its grid
/// quadrature is exactly 1 on both grid kinds, and |contrast| <= 1 keeps it
/// non-negative.
struct LabelDensity {
    double contrast = 0.0;

    double operator()(std::span<const double> a) const {
        double c = 1.0;
        for (double x : a) c *= std::cos(2 * std::numbers::pi * x);
        return 1.0 + contrast * c;
    }
    double max() const { return 1.0 + std::abs(contrast); }
    /// Lipschitz constant in the Euclidean norm (bounded by 2 pi |contrast| sqrt(d)).
    double lipschitz(int d) const { return 2 * std::numbers::pi * std::abs(contrast) * std::sqrt(double(d)); }
};

/// Carrier velocity W(a) = w + omega * J (a - 1/2) (omega only in 2D).
struct CarrierVelocity {
    std::array<double, 2> w{0.0, 0.0};
    double omega = 0.0;
};

using CustomForcing = std::function<void(double t, std::span<const double> x, std::span<const double> y,
                                         std::span<double> F, std::span<double> G)>;

/// F and G of the generalized Boussinesq system.
///   hookean  (m = d)   F = kappa (y - x),                 G = 0
///   model1   (m = 2d)  F = -lambda(yh) kappa (x - yt),    G = (W(yh), 0)
///   model2   (m = 2d)  F as model1,                       G = (-mu(yh) kappa (yt - x), 0)
///   model3   (m = 2d)  F as model1,                       G = (J mu(yh) kappa (yt - x), 0), d = 2
/// with y = (yt, yh). Spring elongations are clipped to length r_clip and
/// F, G to length kappa r_clip, so the presets are globally Lipschitz.
struct ForcingSpec {
    ForcingKind kind = ForcingKind::Hookean;
    double kappa = 1.0;
    /// <= 0 selects 10 domain diameters (10 sqrt(d)).
    double r_clip = 0.0;
    LabelDensity lambda{};
    LabelDensity mu{};
    CarrierVelocity carrier{};
    CustomForcing custom{};
    int custom_value_dim = 0;

    double clip_radius(int d) const { return r_clip > 0.0 ? r_clip : 10.0 * std::sqrt(double(d)); }
};

inline int forcing_value_dim(const ForcingSpec& s, int d) {
    switch (s.kind) {
        case ForcingKind::Hookean: return d;
        case ForcingKind::Custom:
            require(s.custom_value_dim >= 1, "forcing: custom forcing needs custom_value_dim");
            return s.custom_value_dim;
        default: return 2 * d;
    }
}

inline void validate_forcing(const ForcingSpec& s, int d) {
    require(d == 1 || d == 2, "forcing: d must be 1 or 2");
    require(s.kappa > 0.0 && std::isfinite(s.kappa), "forcing: spring stiffness kappa must be positive");
    require(std::abs(s.lambda.contrast) <= 1.0, "forcing: lambda contrast must lie in [-1, 1] (lambda >= 0)");
    require(std::abs(s.mu.contrast) <= 1.0, "forcing: mu contrast must lie in [-1, 1] (mu >= 0)");
    require(!(s.kind == ForcingKind::Model3 && d != 2), "forcing: model3 needs d = 2 (J is the rotation by pi/2)");
    require(s.kind != ForcingKind::Custom || bool(s.custom), "forcing: custom kind without a function");
}

namespace forcing_detail {

inline void clip(std::span<double> v, double r) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 > r * r) {
        const double s = r / std::sqrt(n2);
        for (double& x : v) x *= s;
    }
}

}  // namespace forcing_detail

/// Evaluates F (d entries) and G (m entries) at one point.
inline void evaluate_forcing(const ForcingSpec& s, double t, std::span<const double> x, std::span<const double> y,
                             std::span<double> F, std::span<double> G) {
    const int d = int(x.size());
    const int m = forcing_value_dim(s, d);
    require(int(y.size()) == m && int(F.size()) == d && int(G.size()) == m, "evaluate_forcing: size mismatch");
    std::fill(F.begin(), F.end(), 0.0);
    std::fill(G.begin(), G.end(), 0.0);
    const double R = s.clip_radius(d);
    std::array<double, 2> e{};
    const std::span<double> el(e.data(), std::size_t(d));

    switch (s.kind) {
        case ForcingKind::Custom:
            s.custom(t, x, y, F, G);
            return;
        case ForcingKind::Hookean:
            for (int a = 0; a < d; ++a) el[a] = y[a] - x[a];
            forcing_detail::clip(el, R);
            for (int a = 0; a < d; ++a) F[a] = s.kappa * el[a];
            break;
        case ForcingKind::Model1:
        case ForcingKind::Model2:
        case ForcingKind::Model3: {
            require(!(s.kind == ForcingKind::Model3 && d != 2), "evaluate_forcing: model3 needs d = 2");
            const auto yt = y.subspan(0, d), yh = y.subspan(d, d);
            for (int a = 0; a < d; ++a) el[a] = x[a] - yt[a];
            forcing_detail::clip(el, R);
            const double lam = s.lambda(yh);
            for (int a = 0; a < d; ++a) F[a] = -lam * s.kappa * el[a];
            if (s.kind == ForcingKind::Model1) {
                const auto& W = s.carrier;
                G[0] = W.w[0];
                if (d == 2) {
                    G[1] = W.w[1];
                    G[0] += -W.omega * (yh[1] - 0.5);
                    G[1] += W.omega * (yh[0] - 0.5);
                }
            } else {
                // k(yt - x) = -k(x - yt) for the odd Hookean spring
                const double mu = s.mu(yh);
                if (s.kind == ForcingKind::Model2) {
                    for (int a = 0; a < d; ++a) G[a] = mu * s.kappa * el[a];
                } else {
                    const double k0 = -mu * s.kappa * el[0], k1 = -mu * s.kappa * el[1];
                    G[0] = -k1;
                    G[1] = k0;
                }
            }
            break;
        }
    }
    forcing_detail::clip(F, s.kappa * R);
    forcing_detail::clip(G.subspan(0, std::min(m, d)), s.kappa * R);
}

/// Analytic Lipschitz bound of (F, G) in the joint Euclidean norm of (x, y).
/// Equals kappa (1 + max(lambda, mu)) for uniform densities.
inline double forcing_lipschitz_bound(const ForcingSpec& s, int d) {
    const double k = s.kappa;
    switch (s.kind) {
        case ForcingKind::Hookean: return std::sqrt(2.0) * k;
        case ForcingKind::Model1: {
            const double cw = s.carrier.omega;
            return std::sqrt(2.0) * k * s.lambda.max() + k * s.clip_radius(d) * s.lambda.lipschitz(d) + std::abs(cw);
        }
        case ForcingKind::Model2:
        case ForcingKind::Model3: {
            const double a = std::sqrt(2.0) * k * std::hypot(s.lambda.max(), s.mu.max());
            const double b = k * s.clip_radius(d) * std::hypot(s.lambda.lipschitz(d), s.mu.lipschitz(d));
            return a + b;
        }
        case ForcingKind::Custom: break;
    }
    throw InvalidArgument("forcing_lipschitz_bound: not available for custom forcing");
}

/// Largest |(F,G)(p) - (F,G)(q)| / |p - q| over random pairs drawn from
/// [-spread, 1 + spread]^(d+m).
inline double sampled_lipschitz(const ForcingSpec& s, int d, std::size_t samples, std::uint64_t seed,
                                double spread = 1.0) {
    const int m = forcing_value_dim(s, d);
    Lcg64 rng(seed);
    std::vector<double> p(d + m), q(d + m), Fp(d), Fq(d), Gp(m), Gq(m);
    double worst = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        for (int i = 0; i < d + m; ++i) {
            p[i] = rng.uniform(-spread, 1.0 + spread);
            // half the pairs are close, to probe the local slope
            q[i] = (k % 2 == 0) ? rng.uniform(-spread, 1.0 + spread) : p[i] + rng.uniform(-1e-3, 1e-3);
        }
        evaluate_forcing(s, 0.0, std::span(p).subspan(0, d), std::span(p).subspan(d), Fp, Gp);
        evaluate_forcing(s, 0.0, std::span(q).subspan(0, d), std::span(q).subspan(d), Fq, Gq);
        double num = 0.0, den = 0.0;
        for (int a = 0; a < d; ++a) num += (Fp[a] - Fq[a]) * (Fp[a] - Fq[a]);
        for (int c = 0; c < m; ++c) num += (Gp[c] - Gq[c]) * (Gp[c] - Gq[c]);
        for (int i = 0; i < d + m; ++i) den += (p[i] - q[i]) * (p[i] - q[i]);
        if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
    }
    return worst;
}

}  // namespace otconv
