#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "otconv/grid/grid.hpp"

namespace otconv {

inline constexpr double kCflWarn = 0.5;
inline constexpr double kCflMax = 1.0;

/// max |v| dt / h over the grid.
inline double cfl_number(const VectorField& v, double dt) {
    return max_norm(v) * std::abs(dt) / v.grid().spacing();
}

namespace advect_detail {

// Bilinear sampling at an arbitrary point. Periodic wrap on the torus; on the
// box the point is clamped to the hull of the cell centres, so the value is
// always a convex combination of node values.
class Sampler {
public:
    explicit Sampler(const Grid& g) : g_(g) {}

    struct Stencil {
        std::size_t idx[4];
        double w[4];
        int count;
    };

    Stencil stencil(std::array<double, 2> x) const {
        Stencil s{};
        int i0[2] = {0, 0}, i1[2] = {0, 0};
        double f[2] = {0.0, 0.0};
        for (int a = 0; a < g_.dim(); ++a) axis(x[a], i0[a], i1[a], f[a]);
        if (g_.dim() == 1) {
            s.count = 2;
            s.idx[0] = std::size_t(i0[0]);
            s.idx[1] = std::size_t(i1[0]);
            s.w[0] = 1.0 - f[0];
            s.w[1] = f[0];
            return s;
        }
        s.count = 4;
        s.idx[0] = g_.index(i0[0], i0[1]);
        s.idx[1] = g_.index(i1[0], i0[1]);
        s.idx[2] = g_.index(i0[0], i1[1]);
        s.idx[3] = g_.index(i1[0], i1[1]);
        s.w[0] = (1.0 - f[0]) * (1.0 - f[1]);
        s.w[1] = f[0] * (1.0 - f[1]);
        s.w[2] = (1.0 - f[0]) * f[1];
        s.w[3] = f[0] * f[1];
        return s;
    }

    /// Interpolates component c with the result clamped to the stencil hull.
    double sample(const Field& f, const Stencil& s, int c) const {
        double acc = 0.0, lo = f(s.idx[0], c), hi = lo;
        for (int k = 0; k < s.count; ++k) {
            const double val = f(s.idx[k], c);
            acc += s.w[k] * val;
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
        return std::clamp(acc, lo, hi);
    }

private:
    void axis(double x, int& i0, int& i1, double& frac) const {
        const int n = g_.n();
        const double h = g_.spacing();
        if (g_.is_torus()) {
            double s = x / h;
            const double fl = std::floor(s);
            frac = s - fl;
            long long k = static_cast<long long>(fl) % n;
            if (k < 0) k += n;
            i0 = int(k);
            i1 = (i0 + 1) % n;
        } else {
            double s = x / h - 0.5;
            s = std::clamp(s, 0.0, double(n - 1));
            const double fl = std::floor(s);
            i0 = int(fl);
            frac = s - fl;
            if (i0 >= n - 1) {
                i0 = n - 1;
                frac = 0.0;
            }
            i1 = std::min(i0 + 1, n - 1);
        }
    }

    const Grid& g_;
};

}  // namespace advect_detail

/// Semi-Lagrangian transport of f by v over dt: f'(x) = f(x - dt v(x_mid))
/// with the midpoint x_mid = x - dt/2 v(x) (second-order back-trace) and
/// bilinear interpolation. Throws CflError when the CFL number exceeds 1.
inline Field advect(const Field& f, const VectorField& v, double dt) {
    const Grid& g = f.grid();
    require(v.grid() == g, "advect: field and velocity live on different grids");
    require(v.rank() == g.dim(), "advect: velocity must have d components");
    const double cfl = cfl_number(v, dt);
    if (cfl > kCflMax) {
        std::ostringstream os;
        os << "advect: CFL number " << cfl << " exceeds " << kCflMax;
        throw CflError(os.str());
    }
    advect_detail::Sampler sampler(g);
    Field out(g, f.rank());
    const int d = g.dim();
    for (std::size_t node = 0; node < g.size(); ++node) {
        const auto x = g.point(node);
        std::array<double, 2> mid = x;
        for (int a = 0; a < d; ++a) mid[a] = x[a] - 0.5 * dt * v(node, a);
        const auto sm = sampler.stencil(mid);
        std::array<double, 2> dep = x;
        for (int a = 0; a < d; ++a) dep[a] = x[a] - dt * sampler.sample(v, sm, a);
        const auto sd = sampler.stencil(dep);
        for (int c = 0; c < f.rank(); ++c) {
            double acc = 0.0;
            for (int k = 0; k < sd.count; ++k) acc += sd.w[k] * f(sd.idx[k], c);
            out(node, c) = acc;
        }
    }
    return out;
}

}  // namespace otconv
