#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "otconv/core/error.hpp"
#include "otconv/grid/grid.hpp"

namespace otconv {

/// A bijection of {0, ..., N-1}.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<int> map) : map_(std::move(map)) {
        std::vector<char> seen(map_.size(), 0);
        for (int k : map_) {
            require(k >= 0 && std::size_t(k) < map_.size() && !seen[k], "permutation: not a bijection");
            seen[k] = 1;
        }
    }

    static Permutation identity(std::size_t n) {
        std::vector<int> m(n);
        std::iota(m.begin(), m.end(), 0);
        return Permutation(std::move(m));
    }

    std::size_t size() const { return map_.size(); }
    int operator[](std::size_t i) const { return map_[i]; }
    const std::vector<int>& map() const { return map_; }

    Permutation inverse() const {
        std::vector<int> inv(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = int(i);
        return Permutation(std::move(inv));
    }

    /// (this o other)(i) = this[other[i]]
    Permutation compose(const Permutation& other) const {
        require(other.size() == size(), "permutation: size mismatch in compose");
        std::vector<int> m(size());
        for (std::size_t i = 0; i < size(); ++i) m[i] = map_[other[i]];
        return Permutation(std::move(m));
    }

    bool is_identity() const {
        for (std::size_t i = 0; i < map_.size(); ++i)
            if (map_[i] != int(i)) return false;
        return true;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<int> map_;
};

/// Fixed atoms a_i of D, each of mass 1/N, paired with values Y_i in R^m.
/// Atoms and values are stored row-wise (atom i occupies [i*d, (i+1)*d)).
class LagrangianCloud {
public:
    LagrangianCloud(int dim, std::vector<double> atoms, int value_dim, std::vector<double> values)
        : d_(dim), m_(value_dim), atoms_(std::move(atoms)), values_(std::move(values)) {
        require(d_ >= 1 && m_ >= 1, "cloud: dimensions must be positive");
        require(!atoms_.empty() && atoms_.size() % d_ == 0, "cloud: atom array size must be a positive multiple of d");
        require(values_.size() == size() * m_, "cloud: values do not match atom count");
        for (double x : atoms_) require(std::isfinite(x), "cloud: non-finite atom");
        check_finite();
    }

    /// Atoms at the cell centres of a box grid.
    static LagrangianCloud on_box(const Grid& g, int value_dim, std::vector<double> values) {
        require(g.is_box(), "cloud: atoms must come from a box grid");
        std::vector<double> atoms(g.size() * g.dim());
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < g.dim(); ++a) atoms[i * g.dim() + a] = g.coord(i, a);
        return LagrangianCloud(g.dim(), std::move(atoms), value_dim, std::move(values));
    }

    /// Cloud whose values equal the atoms.
    static LagrangianCloud identity_on_box(const Grid& g) {
        std::vector<double> atoms(g.size() * g.dim());
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < g.dim(); ++a) atoms[i * g.dim() + a] = g.coord(i, a);
        auto values = atoms;
        return LagrangianCloud(g.dim(), std::move(atoms), g.dim(), std::move(values));
    }

    int dim() const { return d_; }
    int value_dim() const { return m_; }
    std::size_t size() const { return atoms_.size() / d_; }

    std::span<const double> atom(std::size_t i) const { return {atoms_.data() + i * d_, std::size_t(d_)}; }
    std::span<const double> value(std::size_t i) const { return {values_.data() + i * m_, std::size_t(m_)}; }
    std::span<double> value(std::size_t i) { return {values_.data() + i * m_, std::size_t(m_)}; }

    const std::vector<double>& atoms() const { return atoms_; }
    const std::vector<double>& values() const { return values_; }

    /// Replaces the values; atoms never change.
    LagrangianCloud with_values(std::vector<double> values) const {
        return LagrangianCloud(d_, atoms_, m_, std::move(values));
    }

    /// Cloud whose atom i carries value perm[i] of this cloud.
    LagrangianCloud reindexed(const Permutation& perm) const {
        require(perm.size() == size(), "cloud: permutation size mismatch");
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < size(); ++i)
            std::copy_n(values_.begin() + std::ptrdiff_t(perm[i]) * m_, m_, v.begin() + std::ptrdiff_t(i) * m_);
        return with_values(std::move(v));
    }

    /// sqrt(mean |Y_i|^2): the L^2(D) norm of the map a -> Y(a).
    double l2_norm() const {
        double s = 0.0;
        for (double x : values_) s += x * x;
        return std::sqrt(s / static_cast<double>(size()));
    }

    double l2_distance(const LagrangianCloud& o) const {
        require(o.values_.size() == values_.size(), "cloud: size mismatch");
        double s = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            const double d = values_[k] - o.values_[k];
            s += d * d;
        }
        return std::sqrt(s / static_cast<double>(size()));
    }

    /// True when two values coincide exactly (the discrete map is degenerate).
    bool has_repeated_values() const {
        std::vector<std::size_t> idx(size());
        std::iota(idx.begin(), idx.end(), 0);
        auto less = [&](std::size_t a, std::size_t b) {
            return std::lexicographical_compare(value(a).begin(), value(a).end(), value(b).begin(), value(b).end());
        };
        std::sort(idx.begin(), idx.end(), less);
        for (std::size_t k = 1; k < idx.size(); ++k)
            if (std::equal(value(idx[k]).begin(), value(idx[k]).end(), value(idx[k - 1]).begin())) return true;
        return false;
    }

private:
    void check_finite() const {
        for (double x : values_) require(std::isfinite(x), "cloud: non-finite value");
    }

    int d_;
    int m_;
    std::vector<double> atoms_;
    std::vector<double> values_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

}  // namespace otconv
