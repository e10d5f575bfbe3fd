#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <vector>

#include "otconv/rearrange/cloud.hpp"

namespace otconv {

/// Optimal (or eps-optimal) pairing of atoms with values for the cost
/// c(i, j) = |a_i - y_j|^2. sigma[i] is the value index assigned to atom i.
/// The duals satisfy u_i + w_j <= c(i, j) for all pairs and
/// u_i + w_sigma(i) >= c(i, sigma(i)) - epsilon on matched pairs.
struct TransportAssignment {
    Permutation sigma;
    double cost = 0.0;  // sum_i c(i, sigma(i))
    std::vector<double> atom_potential;
    std::vector<double> value_potential;
    double epsilon = 0.0;
};

inline constexpr std::size_t kExactSizeCap = 512;

/// Dense cost matrix c(i, j) = |a_i - y_j|^2, row-major over atoms.
class CostMatrix {
public:
    CostMatrix(const LagrangianCloud& cloud) : n_(cloud.size()), c_(n_ * n_) {
        require(cloud.value_dim() == cloud.dim(), "assignment: values and atoms must live in the same space (m = d)");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) c_[i * n_ + j] = squared_distance(cloud.atom(i), cloud.value(j));
    }

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return c_[i * n_ + j]; }

    double spread() const {
        const auto [lo, hi] = std::minmax_element(c_.begin(), c_.end());
        return *hi - *lo;
    }

    double total(const Permutation& sigma) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, sigma[i]);
        return s;
    }

private:
    std::size_t n_;
    std::vector<double> c_;
};

namespace assign_detail {

// Shortest-augmenting-path Hungarian method (potentials form). Rows are atoms,
// columns values; arrays are 1-based with index 0 as the virtual source.
// Works from any dual-feasible start (u_i + v_j <= c_ij) in which the matched
// pairs in `col_owner` are tight, so it serves both as the cold solver and as
// the repair pass after the auction. Strict comparisons give lowest-index
// tie-breaking.
inline void hungarian_insert(const CostMatrix& c, std::vector<double>& u, std::vector<double>& v,
                             std::vector<std::size_t>& col_owner, const std::vector<std::size_t>& free_rows) {
    const std::size_t n = c.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> minv(n + 1);
    std::vector<std::size_t> way(n + 1);
    std::vector<char> used(n + 1);
    for (std::size_t row : free_rows) {
        col_owner[0] = row;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = col_owner[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (col_owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }
}

inline TransportAssignment finish(const CostMatrix& c, const std::vector<std::size_t>& col_owner,
                                  const std::vector<double>& u, const std::vector<double>& v, double eps) {
    const std::size_t n = c.size();
    std::vector<int> sigma(n);
    for (std::size_t j = 1; j <= n; ++j) sigma[col_owner[j] - 1] = int(j - 1);
    TransportAssignment out;
    out.sigma = Permutation(std::move(sigma));
    out.cost = c.total(out.sigma);
    out.atom_potential.assign(u.begin() + 1, u.end());
    out.value_potential.assign(v.begin() + 1, v.end());
    out.epsilon = eps;
    return out;
}

}  // namespace assign_detail

/// Exact minimizer of sum_i |a_i - y_sigma(i)|^2 by the Hungarian method.
/// O(N^3); refuses clouds with more than kExactSizeCap atoms.
inline TransportAssignment assign_exact(const LagrangianCloud& cloud) {
    if (cloud.size() > kExactSizeCap) {
        std::ostringstream os;
        os << "assign_exact: " << cloud.size() << " atoms exceeds the exact-solver cap of " << kExactSizeCap
           << "; use assign_auction";
        throw InvalidArgument(os.str());
    }
    const CostMatrix c(cloud);
    const std::size_t n = c.size();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> owner(n + 1, 0), rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i + 1;
    assign_detail::hungarian_insert(c, u, v, owner, rows);
    return assign_detail::finish(c, owner, u, v, 0.0);
}

struct AuctionOptions {
    /// Final epsilon; <= 0 selects spread * 1e-9 / N.
    double epsilon_final = 0.0;
    /// Multiplier applied to epsilon between scaling phases.
    double scale_factor = 0.25;
    /// Bids allowed per phase before giving up; <= 0 selects 200 N^2.
    long long max_bids_per_phase = 0;
    /// Repair the eps-optimal result into an exact optimum with a warm-started
    /// Hungarian pass over the rows whose reduced cost is not zero.
    bool exact_polish = false;
};

/// Forward auction with epsilon scaling and Jacobi (synchronous) bidding.
/// Starts at spread/8 and shrinks epsilon by scale_factor until epsilon_final; the result is within N * epsilon_final of optimal.
inline TransportAssignment assign_auction(const LagrangianCloud& cloud, const AuctionOptions& opt = {}) {
    const CostMatrix c(cloud);
    const std::size_t n = c.size();
    const double spread = c.spread();
    const double eps_final = opt.epsilon_final > 0.0 ? opt.epsilon_final
                                                     : std::max(spread, 1e-300) * 1e-9 / static_cast<double>(n);
    require(opt.scale_factor > 0.0 && opt.scale_factor < 1.0, "assign_auction: scale factor must lie in (0, 1)");
    const long long max_bids =
        opt.max_bids_per_phase > 0 ? opt.max_bids_per_phase : 200LL * static_cast<long long>(n) * static_cast<long long>(n) + 1000;

    std::vector<double> price(n, 0.0);
    std::vector<long> owner(n, -1), assigned(n, -1);
    double eps = std::max(spread / 8.0, eps_final);
    for (;;) {
        // Pairs that still satisfy eps-complementary slackness at the new
        // epsilon are kept; every other atom re-enters the bidding.
        std::deque<std::size_t> queue;
        for (std::size_t i = 0; i < n; ++i) {
            if (assigned[i] >= 0) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j) m = std::min(m, c(i, j) + price[j]);
                if (c(i, std::size_t(assigned[i])) + price[assigned[i]] <= m + eps) continue;
                owner[assigned[i]] = -1;
                assigned[i] = -1;
            }
            queue.push_back(i);
        }
        // Jacobi rounds: every unassigned atom bids against the same prices and
        // each object goes to its highest bidder (lowest index on ties).
        long long bids = 0;
        std::vector<double> bid(n);
        std::vector<long> bidder(n);
        while (!queue.empty()) {
            std::fill(bidder.begin(), bidder.end(), -1);
            for (std::size_t i : queue) {
                if (++bids > max_bids) {
                    std::ostringstream os;
                    os << "assign_auction: bid cap reached at epsilon " << eps << " with " << queue.size()
                       << " unassigned atoms";
                    throw SolverError(os.str());
                }
                double best = std::numeric_limits<double>::infinity(), second = best;
                std::size_t jbest = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double val = c(i, j) + price[j];
                    if (val < best) {
                        second = best;
                        best = val;
                        jbest = j;
                    } else if (val < second) {
                        second = val;
                    }
                }
                const double incr = n > 1 ? (second - best) + eps : eps;
                if (bidder[jbest] < 0 || incr > bid[jbest]) {
                    bidder[jbest] = long(i);
                    bid[jbest] = incr;
                }
            }
            std::deque<std::size_t> next;
            for (std::size_t j = 0; j < n; ++j) {
                if (bidder[j] < 0) continue;
                price[j] += bid[j];
                if (owner[j] >= 0) {
                    assigned[owner[j]] = -1;
                    next.push_back(std::size_t(owner[j]));
                }
                owner[j] = bidder[j];
                assigned[bidder[j]] = long(j);
            }
            for (std::size_t i : queue)
                if (assigned[i] < 0) next.push_back(i);
            std::sort(next.begin(), next.end());
            queue.swap(next);
        }
        if (eps <= eps_final) break;
        eps = std::max(eps * opt.scale_factor, eps_final);
    }

    // Duals: w_j = -price_j, u_i = min_j (c_ij + price_j).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> col_owner(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        v[j + 1] = -price[j];
        col_owner[j + 1] = std::size_t(owner[j]) + 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) m = std::min(m, c(i, j) + price[j]);
        u[i + 1] = m;
    }
    if (!opt.exact_polish) return assign_detail::finish(c, col_owner, u, v, eps);

    std::vector<std::size_t> free_rows;
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t row = col_owner[j];
        if (c(row - 1, j - 1) - u[row] - v[j] != 0.0) {
            free_rows.push_back(row);
            col_owner[j] = 0;
        }
    }
    std::sort(free_rows.begin(), free_rows.end());
    // Re-derive u of the freed rows so the start is dual feasible.
    for (std::size_t row : free_rows) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 1; j <= n; ++j) m = std::min(m, c(row - 1, j - 1) - v[j]);
        u[row] = m;
    }
    assign_detail::hungarian_insert(c, u, v, col_owner, free_rows);
    return assign_detail::finish(c, col_owner, u, v, 0.0);
}

}  // namespace otconv
