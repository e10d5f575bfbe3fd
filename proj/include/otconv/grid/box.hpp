#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "otconv/grid/grid.hpp"
#include "otconv/grid/spectral.hpp"

namespace otconv {

struct NeumannOptions {
    double rel_tol = 1e-13;
    int max_iterations = 0;  // 0: 20 * number of cells
};

/// Face-staggered result of the box projection. Face velocities are the
/// primary discrete object: u_x lives on vertical faces ((n+1) x n, first axis
/// fastest), u_y on horizontal faces (n x (n+1)). Boundary faces carry zero
/// normal flux.
struct BoxProjection {
    VectorField v;     // cell-centred average of the face velocities
    ScalarField p;     // zero-mean cell pressure
    std::vector<double> face_x;
    std::vector<double> face_y;
    double max_divergence = 0.0;
    double max_boundary_flux = 0.0;
    int iterations = 0;
};

namespace box_detail {

// Applies A = -L where L is the 5-point Neumann Laplacian on cell centres
// (only interior faces couple cells). A is symmetric positive semidefinite
// with the constants as kernel.
inline void apply_neg_laplacian(int n, double h, const std::vector<double>& p, std::vector<double>& out) {
    const double inv_h2 = 1.0 / (h * h);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = std::size_t(i) + std::size_t(n) * j;
            double s = 0.0;
            if (i > 0) s += p[c] - p[c - 1];
            if (i + 1 < n) s += p[c] - p[c + 1];
            if (j > 0) s += p[c] - p[c - n];
            if (j + 1 < n) s += p[c] - p[c + n];
            out[c] = s * inv_h2;
        }
}

inline void remove_mean(std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    for (double& v : x) v -= m;
}

}  // namespace box_detail

/// Helmholtz decomposition on the unit square with v.n = 0 on the boundary:
/// solves the Neumann problem lap p = div y (compatibility enforced by
/// projecting out constants) with conjugate gradients and sets v = y - grad p
/// on the faces. `warm_start` may hold a previous pressure to seed CG.
inline BoxProjection neumann_poisson_project(const VectorField& y, const NeumannOptions& opt = {},
                                             const ScalarField* warm_start = nullptr) {
    const Grid& g = y.grid();
    require(g.is_box() && g.dim() == 2, "neumann_poisson_project: field must live on a 2D box grid");
    require(y.rank() == 2, "neumann_poisson_project: expected a vector field");
    const int n = g.n();
    const double h = g.spacing();
    const std::size_t N = g.size();

    // Face values of y on interior faces by averaging the adjacent cells.
    std::vector<double> yx((n + 1) * std::size_t(n), 0.0), yy(std::size_t(n) * (n + 1), 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i)
            yx[std::size_t(i) + std::size_t(n + 1) * j] =
                0.5 * (y(g.index(i - 1, j), 0) + y(g.index(i, j), 0));
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i)
            yy[std::size_t(i) + std::size_t(n) * j] = 0.5 * (y(g.index(i, j - 1), 1) + y(g.index(i, j), 1));

    // rhs b = -div(y_faces); solve A p = b with A = -lap.
    std::vector<double> b(N);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double div = (yx[std::size_t(i + 1) + std::size_t(n + 1) * j] - yx[std::size_t(i) + std::size_t(n + 1) * j] +
                                yy[std::size_t(i) + std::size_t(n) * (j + 1)] - yy[std::size_t(i) + std::size_t(n) * j]) /
                               h;
            b[g.index(i, j)] = -div;
        }
    box_detail::remove_mean(b);

    std::vector<double> p(N, 0.0);
    if (warm_start) {
        require(warm_start->grid() == g && warm_start->rank() == 1, "neumann_poisson_project: warm start shape");
        p = warm_start->data();
        box_detail::remove_mean(p);
    }

    std::vector<double> r(N), d(N), Ad(N);
    box_detail::apply_neg_laplacian(n, h, p, Ad);
    double bnorm2 = 0.0;
    for (std::size_t c = 0; c < N; ++c) {
        r[c] = b[c] - Ad[c];
        bnorm2 += b[c] * b[c];
    }
    box_detail::remove_mean(r);
    d = r;
    double rr = 0.0;
    for (double x : r) rr += x * x;
    const double target = opt.rel_tol * opt.rel_tol * std::max(bnorm2, 1e-300);
    const int max_it = opt.max_iterations > 0 ? opt.max_iterations : int(20 * N);
    int it = 0;
    while (rr > target && bnorm2 > 0.0) {
        if (it >= max_it) {
            std::ostringstream os;
            os << "neumann_poisson_project: CG did not converge after " << it
               << " iterations (relative residual " << std::sqrt(rr / bnorm2) << ")";
            throw SolverError(os.str());
        }
        box_detail::apply_neg_laplacian(n, h, d, Ad);
        double dAd = 0.0;
        for (std::size_t c = 0; c < N; ++c) dAd += d[c] * Ad[c];
        const double alpha = rr / dAd;
        for (std::size_t c = 0; c < N; ++c) {
            p[c] += alpha * d[c];
            r[c] -= alpha * Ad[c];
        }
        double rr_new = 0.0;
        for (double x : r) rr_new += x * x;
        const double beta = rr_new / rr;
        for (std::size_t c = 0; c < N; ++c) d[c] = r[c] + beta * d[c];
        rr = rr_new;
        ++it;
    }
    box_detail::remove_mean(p);

    BoxProjection out{VectorField(g, 2), ScalarField(g, 1, p), std::vector<double>((n + 1) * std::size_t(n), 0.0),
                      std::vector<double>(std::size_t(n) * (n + 1), 0.0), 0.0, 0.0, it};
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            const std::size_t f = std::size_t(i) + std::size_t(n + 1) * j;
            out.face_x[f] = yx[f] - (p[g.index(i, j)] - p[g.index(i - 1, j)]) / h;
        }
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t f = std::size_t(i) + std::size_t(n) * j;
            out.face_y[f] = yy[f] - (p[g.index(i, j)] - p[g.index(i, j - 1)]) / h;
        }
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = g.index(i, j);
            const double ux0 = out.face_x[std::size_t(i) + std::size_t(n + 1) * j];
            const double ux1 = out.face_x[std::size_t(i + 1) + std::size_t(n + 1) * j];
            const double uy0 = out.face_y[std::size_t(i) + std::size_t(n) * j];
            const double uy1 = out.face_y[std::size_t(i) + std::size_t(n) * (j + 1)];
            out.v(c, 0) = 0.5 * (ux0 + ux1);
            out.v(c, 1) = 0.5 * (uy0 + uy1);
            out.max_divergence = std::max(out.max_divergence, std::abs((ux1 - ux0 + uy1 - uy0) / h));
        }
    for (int j = 0; j < n; ++j) {
        out.max_boundary_flux = std::max({out.max_boundary_flux, std::abs(out.face_x[std::size_t(n + 1) * j]),
                                          std::abs(out.face_x[std::size_t(n) + std::size_t(n + 1) * j])});
    }
    for (int i = 0; i < n; ++i) {
        out.max_boundary_flux = std::max({out.max_boundary_flux, std::abs(out.face_y[std::size_t(i)]),
                                          std::abs(out.face_y[std::size_t(i) + std::size_t(n) * n])});
    }
    return out;
}

}  // namespace otconv
