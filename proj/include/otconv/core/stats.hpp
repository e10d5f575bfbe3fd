#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "otconv/core/error.hpp"

namespace otconv {

/// Ranks starting at 1, tied entries share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(n);
    for (std::size_t k = 0; k < n;) {
        std::size_t e = k + 1;
        while (e < n && x[idx[e]] == x[idx[k]]) ++e;
        const double avg = 0.5 * double(k + e - 1) + 1.0;
        for (std::size_t q = k; q < e; ++q) r[idx[q]] = avg;
        k = e;
    }
    return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "pearson: need two equal-length samples of size >= 2");
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Spearman rank correlation; 0 when either sample is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x), ry = average_ranks(y);
    return pearson(rx, ry);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need at least two points");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] > 0.0 && y[i] > 0.0, "loglog_slope: samples must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double n = double(x.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    require(sxx > 0.0, "loglog_slope: abscissae must not all coincide");
    return sxy / sxx;
}

}  // namespace otconv
