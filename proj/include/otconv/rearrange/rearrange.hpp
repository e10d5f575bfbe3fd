#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "otconv/core/lcg.hpp"
#include "otconv/rearrange/assignment.hpp"
#include "otconv/rearrange/cloud.hpp"

namespace otconv {

/// The monotone rearrangement on a 1D atom grid: the values sorted ascending.
inline std::vector<double> sort_rearrange_1d(std::span<const double> values) {
    for (double x : values) require(std::isfinite(x), "sort_rearrange_1d: non-finite value");
    std::vector<double> out(values.begin(), values.end());
    std::sort(out.begin(), out.end());
    return out;
}

enum class AssignMethod { Auto, Exact, Auction };

struct RearrangeOptions {
    AssignMethod method = AssignMethod::Auto;
    AuctionOptions auction{};
};

/// Auto uses the Hungarian oracle up to its size cap and an exactly polished
/// auction above it.
inline TransportAssignment solve_assignment(const LagrangianCloud& cloud, const RearrangeOptions& opt = {}) {
    switch (opt.method) {
        case AssignMethod::Exact: return assign_exact(cloud);
        case AssignMethod::Auction: return assign_auction(cloud, opt.auction);
        case AssignMethod::Auto:
            if (cloud.size() <= kExactSizeCap) return assign_exact(cloud);
            {
                AuctionOptions a = opt.auction;
                a.exact_polish = true;
                return assign_auction(cloud, a);
            }
    }
    return assign_exact(cloud);
}

struct Rearrangement {
    LagrangianCloud cloud;  // atom i carries the value sigma(i) of the input
    TransportAssignment assignment;
};

inline Rearrangement rearrange(const LagrangianCloud& cloud, const RearrangeOptions& opt = {}) {
    require(cloud.value_dim() == cloud.dim(), "convex_rearrange: values and atoms must live in the same space");
    auto assignment = solve_assignment(cloud, opt);
    auto out = cloud.reindexed(assignment.sigma);
    return {std::move(out), std::move(assignment)};
}

/// y -> y*: the cloud re-indexed so that the atom/value pairing is optimal
/// for the quadratic cost, i.e. cyclically monotone. The multiset of values
/// is unchanged.
inline LagrangianCloud convex_rearrange(const LagrangianCloud& cloud, const RearrangeOptions& opt = {}) {
    return rearrange(cloud, opt).cloud;
}

struct PolarFactorization {
    LagrangianCloud rearranged;
    /// Measure-preserving factor: value i of the input sits on atom X[i] of
    /// the rearranged cloud, so y_i = y*_{X(i)}.
    Permutation X;
    TransportAssignment assignment;
};

inline PolarFactorization polar_factorize(const LagrangianCloud& cloud, const RearrangeOptions& opt = {}) {
    auto r = rearrange(cloud, opt);
    auto X = r.assignment.sigma.inverse();
    return {std::move(r.cloud), std::move(X), std::move(r.assignment)};
}

struct MonotonicityReport {
    /// max(0, -min over checked cycles of sum_k a_k . (y_k - y_next(k)))
    double worst_violation = 0.0;
    std::size_t cycles_checked = 0;
    bool passed = true;
};

/// Samples `trials` random index cycles of length 2..cycle_len and checks
/// sum_k a_{i_k} . (y_{i_k} - y_{i_{k+1}}) >= -tol along each. Clouds with at
/// most `exhaustive_pairs_up_to` atoms additionally have every 2-cycle checked.
inline MonotonicityReport cyclical_monotonicity_check(const LagrangianCloud& cloud, std::size_t trials,
                                                      std::size_t cycle_len, double tol = 1e-12,
                                                      std::uint64_t seed = 1,
                                                      std::size_t exhaustive_pairs_up_to = 256) {
    require(cloud.value_dim() == cloud.dim(), "cyclical_monotonicity_check: requires m = d");
    MonotonicityReport rep;
    const std::size_t n = cloud.size();
    if (n < 2) return rep;
    double worst = std::numeric_limits<double>::infinity();
    auto record = [&](double s) {
        worst = std::min(worst, s);
        ++rep.cycles_checked;
    };
    if (n <= exhaustive_pairs_up_to) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double s = dot(cloud.atom(i), cloud.value(i)) - dot(cloud.atom(i), cloud.value(j)) +
                                 dot(cloud.atom(j), cloud.value(j)) - dot(cloud.atom(j), cloud.value(i));
                record(s);
            }
    }
    Lcg64 rng(seed);
    std::vector<std::size_t> pool(n);
    const std::size_t max_len = std::clamp<std::size_t>(cycle_len, 2, n);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t len = 2 + rng.below(max_len - 1);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t k = 0; k < len; ++k) std::swap(pool[k], pool[k + rng.below(n - k)]);
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const std::size_t i = pool[k], next = pool[(k + 1) % len];
            s += dot(cloud.atom(i), cloud.value(i)) - dot(cloud.atom(i), cloud.value(next));
        }
        record(s);
    }
    rep.worst_violation = std::max(0.0, -worst);
    rep.passed = rep.worst_violation <= tol;
    return rep;
}

}  // namespace otconv
