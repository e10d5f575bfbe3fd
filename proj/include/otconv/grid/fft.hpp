#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "otconv/core/error.hpp"

namespace otconv::fft {

using Complex = std::complex<double>;

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    ~PlanPair() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

// Planner calls are not thread-safe in FFTW; execution through the new-array
// interface is. Plans are created once per shape under this lock and reused.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

inline const PlanPair& plans(int dim, int n) {
    static std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto& slot = cache[{dim, n}];
    if (!slot) {
        slot = std::make_unique<PlanPair>();
        const int total = dim == 1 ? n : n * n;
        fftw_complex* buf = fftw_alloc_complex(total);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        if (dim == 1) {
            slot->forward = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, flags);
            slot->backward = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, flags);
        } else {
            // FFTW is row-major: the last index is contiguous, which is our axis 0.
            slot->forward = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, flags);
            slot->backward = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, flags);
        }
        fftw_free(buf);
        if (!slot->forward || !slot->backward) throw SolverError("FFTW planner failed");
    }
    return *slot;
}

}  // namespace detail

/// Unnormalized forward DFT in place (dim 1 or 2, n points per axis).
inline void forward(int dim, int n, std::span<Complex> data) {
    const auto& p = detail::plans(dim, n);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p.forward, ptr, ptr);
}

/// Inverse DFT in place, normalized so that inverse(forward(x)) == x.
inline void inverse(int dim, int n, std::span<Complex> data) {
    const auto& p = detail::plans(dim, n);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p.backward, ptr, ptr);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& z : data) z *= scale;
}

inline std::vector<Complex> forward_real(int dim, int n, std::span<const double> values) {
    std::vector<Complex> out(values.begin(), values.end());
    forward(dim, n, out);
    return out;
}

inline std::vector<double> inverse_real(int dim, int n, std::vector<Complex> spectrum) {
    inverse(dim, n, spectrum);
    std::vector<double> out(spectrum.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectrum[i].real();
    return out;
}

/// Signed wavenumber of DFT index j. The Nyquist index maps to 0 so that
/// spectral derivatives of real fields stay real.
inline int wavenumber(int j, int n) {
    if (2 * j < n) return j;
    if (2 * j == n) return 0;
    return j - n;
}

}  // namespace otconv::fft
