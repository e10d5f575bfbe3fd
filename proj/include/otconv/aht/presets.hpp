#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "otconv/core/lcg.hpp"
#include "otconv/grid/grid.hpp"

namespace otconv {

// Initial data y0 for the Eulerian solvers.
//
//   darcy         y = (0, -g theta), theta = (x2 - 1/2) + perturbation * cos(pi x1) sin(pi x2)
//                 (top-heavy: the heavy fluid sits on top)
//   gradient      y = amplitude * grad phi, phi = sin(2 pi x1)/(2 pi) - cos(4 pi x2)/(4 pi);
//                 the potential is not convex, and since phi is separable the
//                 discrete box projection also sees an exact gradient
//   random_smooth windowed random band-limited field; the window vanishes
//                 outside [0.15, 0.85]^d so nothing sits on the torus seam
//   mode          amplitude * (-sin(2 pi k x2), 0), divergence free
//   identity      y = x
//   zero
struct YPreset {
    std::string name = "random_smooth";
    double amplitude = 1.0;
    double gravity = 1.0;
    double perturbation = 0.1;
    int max_mode = 2;
    int mode = 1;
    std::uint64_t seed = 1;
};

inline const std::vector<std::string>& y_preset_names() {
    static const std::vector<std::string> names{"darcy", "gradient", "random_smooth", "mode", "identity", "zero"};
    return names;
}

namespace preset_detail {

inline double window_1d(double x) {
    constexpr double lo = 0.15, hi = 0.85;
    if (x <= lo || x >= hi) return 0.0;
    const double s = std::sin(std::numbers::pi * (x - lo) / (hi - lo));
    return s * s * s * s;
}

struct Mode {
    int k0, k1;
    double a, b;
};

// Random coefficients drawn in a fixed order: for each component, for k0 then
// k1 in [-K, K] (k1 only in 2D), skipping (0, 0), draw a then b in [-1, 1).
inline std::vector<std::vector<Mode>> random_modes(int dim, int kmax, std::uint64_t seed) {
    Lcg64 rng(seed);
    std::vector<std::vector<Mode>> out(dim);
    const int k1max = dim == 2 ? kmax : 0;
    for (int c = 0; c < dim; ++c)
        for (int k0 = -kmax; k0 <= kmax; ++k0)
            for (int k1 = -k1max; k1 <= k1max; ++k1) {
                if (k0 == 0 && k1 == 0) continue;
                const double a = rng.uniform(-1.0, 1.0);
                const double b = rng.uniform(-1.0, 1.0);
                out[c].push_back({k0, k1, a, b});
            }
    return out;
}

}  // namespace preset_detail

inline VectorField make_initial_y(const Grid& g, const YPreset& p) {
    using std::numbers::pi;
    const int d = g.dim();
    const std::string_view name = p.name;
    if (name == "zero") return VectorField(g, d);
    if (name == "identity")
        return Field::from_function(g, d, [&](auto x, std::span<double> o) {
            for (int a = 0; a < d; ++a) o[a] = x[a];
        });
    if (name == "darcy") {
        require(d == 2, "preset darcy: needs a 2D grid");
        return Field::from_function(g, 2, [&](auto x, std::span<double> o) {
            const double theta = (x[1] - 0.5) + p.perturbation * std::cos(pi * x[0]) * std::sin(pi * x[1]);
            o[0] = 0.0;
            o[1] = -p.gravity * theta;
        });
    }
    if (name == "gradient")
        return Field::from_function(g, d, [&](auto x, std::span<double> o) {
            o[0] = p.amplitude * std::cos(2 * pi * x[0]);
            if (d == 2) o[1] = p.amplitude * std::sin(4 * pi * x[1]);
        });
    if (name == "mode") {
        require(d == 2, "preset mode: needs a 2D grid");
        require(p.mode >= 1, "preset mode: wavenumber must be >= 1");
        return Field::from_function(g, 2, [&](auto x, std::span<double> o) {
            o[0] = -p.amplitude * std::sin(2 * pi * p.mode * x[1]);
            o[1] = 0.0;
        });
    }
    if (name == "random_smooth") {
        require(p.max_mode >= 1, "preset random_smooth: max_mode must be >= 1");
        const auto modes = preset_detail::random_modes(d, p.max_mode, p.seed);
        return Field::from_function(g, d, [&](auto x, std::span<double> o) {
            double w = preset_detail::window_1d(x[0]);
            if (d == 2) w *= preset_detail::window_1d(x[1]);
            for (int c = 0; c < d; ++c) {
                double s = 0.0;
                for (const auto& m : modes[c]) {
                    const double ph = 2 * pi * (m.k0 * x[0] + m.k1 * (d == 2 ? x[1] : 0.0));
                    s += m.a * std::cos(ph) + m.b * std::sin(ph);
                }
                o[c] = p.amplitude * w * s / std::sqrt(double(modes[c].size()));
            }
        });
    }
    throw InvalidArgument("unknown y0 preset '" + p.name + "'");
}

}  // namespace otconv
