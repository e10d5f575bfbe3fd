#pragma once

#include <array>
#include <numbers>
#include <vector>

#include "otconv/grid/fft.hpp"
#include "otconv/grid/grid.hpp"

namespace otconv {

/// Velocity / pressure pair returned by the projections.
struct Projection {
    VectorField v;
    ScalarField p;
};

namespace spectral {

using fft::Complex;

inline void require_torus(const Grid& g, const char* op) {
    if (!g.is_torus()) throw InvalidArgument(std::string(op) + ": field must live on a torus grid");
}

/// 2*pi*k for every spectral index and axis (k = 0 on the second axis in 1D).
struct WaveVectors {
    std::vector<std::array<double, 2>> k;
    std::vector<char> nyquist;  // some axis index is n/2

    explicit WaveVectors(const Grid& g) : k(g.size()), nyquist(g.size(), 0) {
        const double two_pi = 2.0 * std::numbers::pi;
        for (std::size_t node = 0; node < g.size(); ++node) {
            for (int a = 0; a < g.dim(); ++a)
                if (g.n() % 2 == 0 && 2 * g.axis_index(node, a) == g.n()) nyquist[node] = 1;
            k[node][0] = two_pi * fft::wavenumber(g.axis_index(node, 0), g.n());
            k[node][1] = g.dim() == 2 ? two_pi * fft::wavenumber(g.axis_index(node, 1), g.n()) : 0.0;
        }
    }

    double norm2(std::size_t i) const { return k[i][0] * k[i][0] + k[i][1] * k[i][1]; }
};

inline std::vector<std::vector<Complex>> transform_components(const Field& f) {
    std::vector<std::vector<Complex>> out;
    out.reserve(f.rank());
    for (int c = 0; c < f.rank(); ++c) {
        const auto comp = f.component(c);
        out.push_back(fft::forward_real(f.grid().dim(), f.grid().n(), comp));
    }
    return out;
}

inline Field field_from_spectra(const Grid& g, std::vector<std::vector<Complex>> spectra) {
    Field out(g, static_cast<int>(spectra.size()));
    for (std::size_t c = 0; c < spectra.size(); ++c) {
        out.set_component(int(c), fft::inverse_real(g.dim(), g.n(), std::move(spectra[c])));
    }
    return out;
}

}  // namespace spectral

/// Spectral gradient of a scalar field on the torus.
inline VectorField gradient(const ScalarField& p) {
    const Grid& g = p.grid();
    spectral::require_torus(g, "gradient");
    require(p.rank() == 1, "gradient: expected a scalar field");
    const spectral::WaveVectors wv(g);
    const auto ph = fft::forward_real(g.dim(), g.n(), p.data());
    std::vector<std::vector<fft::Complex>> out(g.dim(), std::vector<fft::Complex>(g.size()));
    const fft::Complex I(0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int a = 0; a < g.dim(); ++a) out[a][i] = I * wv.k[i][a] * ph[i];
    return spectral::field_from_spectra(g, std::move(out));
}

/// Spectral divergence of a vector field on the torus.
inline ScalarField divergence(const VectorField& v) {
    const Grid& g = v.grid();
    spectral::require_torus(g, "divergence");
    require(v.rank() == g.dim(), "divergence: expected a vector field");
    const spectral::WaveVectors wv(g);
    const auto vh = spectral::transform_components(v);
    std::vector<std::vector<fft::Complex>> out(1, std::vector<fft::Complex>(g.size()));
    const fft::Complex I(0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        fft::Complex s = 0.0;
        for (int a = 0; a < g.dim(); ++a) s += I * wv.k[i][a] * vh[a][i];
        out[0][i] = s;
    }
    return spectral::field_from_spectra(g, std::move(out));
}

/// Spectral Laplacian, componentwise; consistent with divergence(gradient(.)).
inline Field laplacian(const Field& f) {
    const Grid& g = f.grid();
    spectral::require_torus(g, "laplacian");
    const spectral::WaveVectors wv(g);
    auto fh = spectral::transform_components(f);
    for (auto& comp : fh)
        for (std::size_t i = 0; i < g.size(); ++i) comp[i] *= -wv.norm2(i);
    return spectral::field_from_spectra(g, std::move(fh));
}

/// Helmholtz decomposition y = v + grad p on the torus with div v = 0.
/// The mean of y is assigned to v and p has zero mean. Nyquist modes are
/// dropped.
inline Projection leray_project(const VectorField& y) {
    const Grid& g = y.grid();
    spectral::require_torus(g, "leray_project");
    require(y.rank() == g.dim(), "leray_project: expected a vector field");
    const spectral::WaveVectors wv(g);
    auto yh = spectral::transform_components(y);
    std::vector<std::vector<fft::Complex>> ph(1, std::vector<fft::Complex>(g.size()));
    const fft::Complex I(0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double k2 = wv.norm2(i);
        if (wv.nyquist[i]) {
            // no consistent divergence there; drop it like the derivatives do
            for (int a = 0; a < g.dim(); ++a) yh[a][i] = 0.0;
            continue;
        }
        if (k2 == 0.0) continue;
        fft::Complex kdot = 0.0;
        for (int a = 0; a < g.dim(); ++a) kdot += wv.k[i][a] * yh[a][i];
        // grad p = k (k.y)/|k|^2 in Fourier space, i.e. p_hat = -i (k.y)/|k|^2
        ph[0][i] = -I * kdot / k2;
        for (int a = 0; a < g.dim(); ++a) yh[a][i] -= wv.k[i][a] * kdot / k2;
    }
    return {spectral::field_from_spectra(g, std::move(yh)), spectral::field_from_spectra(g, std::move(ph))};
}

/// Periodic Stokes solve -lap v + grad p = y - mean(y), div v = 0, mean v = 0.
inline Projection stokes_project(const VectorField& y) {
    const Grid& g = y.grid();
    spectral::require_torus(g, "stokes_project");
    require(y.rank() == g.dim(), "stokes_project: expected a vector field");
    const spectral::WaveVectors wv(g);
    auto yh = spectral::transform_components(y);
    std::vector<std::vector<fft::Complex>> ph(1, std::vector<fft::Complex>(g.size()));
    const fft::Complex I(0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double k2 = wv.norm2(i);
        if (k2 == 0.0 || wv.nyquist[i]) {
            for (int a = 0; a < g.dim(); ++a) yh[a][i] = 0.0;
            continue;
        }
        fft::Complex kdot = 0.0;
        for (int a = 0; a < g.dim(); ++a) kdot += wv.k[i][a] * yh[a][i];
        ph[0][i] = -I * kdot / k2;
        for (int a = 0; a < g.dim(); ++a) yh[a][i] = (yh[a][i] - wv.k[i][a] * kdot / k2) / k2;
    }
    return {spectral::field_from_spectra(g, std::move(yh)), spectral::field_from_spectra(g, std::move(ph))};
}

/// Solves (alpha - beta lap) u = f componentwise on the torus. Requires
/// alpha > 0, or alpha == 0 with the mean mode of u set to zero.
inline Field solve_helmholtz(const Field& f, double alpha, double beta) {
    const Grid& g = f.grid();
    spectral::require_torus(g, "solve_helmholtz");
    const spectral::WaveVectors wv(g);
    auto fh = spectral::transform_components(f);
    for (auto& comp : fh)
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double denom = alpha + beta * wv.norm2(i);
            comp[i] = denom == 0.0 ? fft::Complex(0.0) : comp[i] / denom;
        }
    return spectral::field_from_spectra(g, std::move(fh));
}

/// integral of |grad v|^2, summed over components.
inline double gradient_energy(const Field& v) {
    const Grid& g = v.grid();
    spectral::require_torus(g, "gradient_energy");
    double s = 0.0;
    for (int c = 0; c < v.rank(); ++c) {
        const auto comp = v.component(c);
        const auto gc = gradient(ScalarField(g, 1, comp));
        for (double x : gc.data()) s += x * x;
    }
    return s * g.cell_volume();
}

}  // namespace otconv
