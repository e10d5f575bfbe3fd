#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otconv/core/error.hpp"

namespace otconv {

enum class DomainKind { Torus, Box };

enum class DissipationKind { None, Identity, NegLaplacian };

inline std::string_view to_string(DomainKind k) {
    return k == DomainKind::Torus ? "torus" : "box";
}

inline std::string_view to_string(DissipationKind k) {
    switch (k) {
        case DissipationKind::None: return "none";
        case DissipationKind::Identity: return "identity";
        case DissipationKind::NegLaplacian: return "neg_laplacian";
    }
    return "?";
}

inline DissipationKind parse_dissipation(std::string_view s) {
    if (s == "none") return DissipationKind::None;
    if (s == "identity") return DissipationKind::Identity;
    if (s == "neg_laplacian") return DissipationKind::NegLaplacian;
    throw InvalidArgument("unknown dissipation kind '" + std::string(s) + "'");
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Uniform grid on the unit torus [0,1)^d (nodes x_j = j h) or on the unit
/// box [0,1]^d (cell centres x_j = (j + 1/2) h). Nodes are stored with the
/// first axis fastest: node = i0 + n * i1.
class Grid {
public:
    static Grid torus(int dim, int n) {
        require(dim == 1 || dim == 2, "torus grid: dimension must be 1 or 2");
        require(n >= 8 && is_power_of_two(n), "torus grid: n must be a power of two >= 8");
        return Grid(DomainKind::Torus, dim, n);
    }

    static Grid box(int dim, int n) {
        require(dim == 1 || dim == 2, "box grid: dimension must be 1 or 2");
        require(n >= 1, "box grid: n must be >= 1");
        return Grid(DomainKind::Box, dim, n);
    }

    DomainKind kind() const { return kind_; }
    bool is_torus() const { return kind_ == DomainKind::Torus; }
    bool is_box() const { return kind_ == DomainKind::Box; }
    int dim() const { return dim_; }
    int n() const { return n_; }
    double spacing() const { return 1.0 / n_; }
    std::size_t size() const { return dim_ == 1 ? std::size_t(n_) : std::size_t(n_) * n_; }
    /// Quadrature weight of one node (the Lebesgue measure of D is 1).
    double cell_volume() const { return 1.0 / static_cast<double>(size()); }

    std::size_t index(int i0, int i1 = 0) const { return std::size_t(i0) + std::size_t(n_) * i1; }
    int axis_index(std::size_t node, int axis) const {
        return axis == 0 ? int(node % n_) : int(node / n_);
    }

    double coord_1d(int j) const {
        return is_torus() ? j * spacing() : (j + 0.5) * spacing();
    }
    double coord(std::size_t node, int axis) const { return coord_1d(axis_index(node, axis)); }

    std::array<double, 2> point(std::size_t node) const {
        std::array<double, 2> p{coord(node, 0), 0.0};
        if (dim_ == 2) p[1] = coord(node, 1);
        return p;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Grid(DomainKind kind, int dim, int n) : kind_(kind), dim_(dim), n_(n) {}

    DomainKind kind_;
    int dim_;
    int n_;
};

/// Samples of a rank-r quantity on a grid, components interleaved per node.
class Field {
public:
    Field(Grid grid, int rank) : grid_(grid), rank_(rank), data_(grid.size() * rank, 0.0) {
        require(rank >= 1, "field rank must be >= 1");
    }

    Field(Grid grid, int rank, std::vector<double> data)
        : grid_(grid), rank_(rank), data_(std::move(data)) {
        require(rank >= 1, "field rank must be >= 1");
        require(data_.size() == grid.size() * rank, "field data size does not match grid and rank");
    }

    static Field scalar(Grid grid) { return Field(grid, 1); }
    static Field vector(Grid grid) { return Field(grid, grid.dim()); }

    /// Fills a field from f(point, out) where out has `rank` entries.
    template <class F>
    static Field from_function(Grid grid, int rank, F&& f) {
        Field out(grid, rank);
        std::vector<double> buf(rank);
        for (std::size_t node = 0; node < grid.size(); ++node) {
            f(grid.point(node), std::span<double>(buf));
            for (int c = 0; c < rank; ++c) out(node, c) = buf[c];
        }
        return out;
    }

    const Grid& grid() const { return grid_; }
    int rank() const { return rank_; }
    std::size_t nodes() const { return grid_.size(); }

    double& operator()(std::size_t node, int c) { return data_[node * rank_ + c]; }
    double operator()(std::size_t node, int c) const { return data_[node * rank_ + c]; }

    std::span<double> at(std::size_t node) { return {data_.data() + node * rank_, std::size_t(rank_)}; }
    std::span<const double> at(std::size_t node) const {
        return {data_.data() + node * rank_, std::size_t(rank_)};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> component(int c) const {
        std::vector<double> out(nodes());
        for (std::size_t i = 0; i < nodes(); ++i) out[i] = (*this)(i, c);
        return out;
    }

    void set_component(int c, std::span<const double> values) {
        require(values.size() == nodes(), "component size mismatch");
        for (std::size_t i = 0; i < nodes(); ++i) (*this)(i, c) = values[i];
    }

    Field& operator+=(const Field& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }

    /// a += s * b
    void axpy(double s, const Field& b) {
        check_compatible(b);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * b.data_[i];
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    void check_compatible(const Field& o) const {
        require(grid_ == o.grid_ && rank_ == o.rank_, "field shape mismatch");
    }

private:
    Grid grid_;
    int rank_;
    std::vector<double> data_;
};

using ScalarField = Field;
using VectorField = Field;

// Norms and moments use the quadrature of the grid (each node carries the
// measure 1/N), so they approximate integrals over D.

inline double max_abs(const Field& f) {
    double m = 0.0;
    for (double x : f.data()) m = std::max(m, std::abs(x));
    return m;
}

/// max over nodes of the Euclidean norm of the node vector.
inline double max_norm(const Field& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        double s = 0.0;
        for (double x : f.at(i)) s += x * x;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

inline double l2_norm(const Field& f) {
    double s = 0.0;
    for (double x : f.data()) s += x * x;
    return std::sqrt(s * f.grid().cell_volume());
}

inline double l2_distance(const Field& a, const Field& b) {
    a.check_compatible(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s * a.grid().cell_volume());
}

inline double inner(const Field& a, const Field& b) {
    a.check_compatible(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    return s * a.grid().cell_volume();
}

inline std::vector<double> component_means(const Field& f) {
    std::vector<double> m(f.rank(), 0.0);
    for (std::size_t i = 0; i < f.nodes(); ++i)
        for (int c = 0; c < f.rank(); ++c) m[c] += f(i, c);
    for (double& x : m) x /= static_cast<double>(f.nodes());
    return m;
}

/// Mean of |f|^2 over the domain.
inline double second_moment(const Field& f) {
    double s = 0.0;
    for (double x : f.data()) s += x * x;
    return s / static_cast<double>(f.nodes());
}

}  // namespace otconv
