#pragma once

// Dense exterior algebra over R^d.
//
// Every k-form is stored in the lexicographic multi-index basis
// dx_{i1} ^ ... ^ dx_{ik}, i1 < ... < ik.  Axes are numbered from zero; for the
// Heisenberg group R^{2n+1} the axis order is x_1..x_n, y_1..y_n, t.

#include <heisen/error.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace heisen {

std::size_t binomial(int n, int k);

/// Strictly increasing index tuples of length `degree` drawn from [0, dim), in
/// lexicographic order.  Instances are interned; use `MultiIndexBasis::get`.
class MultiIndexBasis {
public:
    static std::shared_ptr<const MultiIndexBasis> get(int dim, int degree);

    int dim() const noexcept { return dim_; }
    int degree() const noexcept { return degree_; }
    std::size_t size() const noexcept { return masks_.size(); }

    std::uint32_t mask(std::size_t i) const { return masks_[i]; }
    std::vector<int> indices(std::size_t i) const;

    /// Position of the tuple with the given bit mask, or npos.
    std::size_t find(std::uint32_t mask) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    MultiIndexBasis(int dim, int degree);

private:
    int dim_;
    int degree_;
    std::vector<std::uint32_t> masks_;
    std::vector<std::uint32_t> lookup_; // mask -> position + 1, 0 if absent
};

/// Sign of the permutation sorting the concatenation (a, b) of two disjoint
/// increasing tuples given as masks.
int concat_sign(std::uint32_t a, std::uint32_t b);

/// A constant k-covector on R^d.
class ConstForm {
public:
    ConstForm() = default;
    ConstForm(int dim, int degree);
    ConstForm(int dim, int degree, std::vector<double> coeffs);

    static ConstForm scalar(int dim, double value);
    /// Basis element dx_{i1}^...^dx_{ik}; indices need not be sorted (the
    /// permutation sign is applied).
    static ConstForm basis_element(int dim, std::initializer_list<int> axes);
    static ConstForm basis_element(int dim, std::span<const int> axes);

    int dim() const noexcept { return basis_ ? basis_->dim() : 0; }
    int degree() const noexcept { return basis_ ? basis_->degree() : 0; }
    const MultiIndexBasis& basis() const { return *basis_; }
    std::shared_ptr<const MultiIndexBasis> basis_ptr() const { return basis_; }

    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::span<double> coeffs() noexcept { return coeffs_; }
    double operator[](std::size_t i) const { return coeffs_[i]; }
    double& operator[](std::size_t i) { return coeffs_[i]; }

    /// Coefficient of dx_{axes...} with the permutation sign of `axes` applied.
    double coefficient(std::initializer_list<int> axes) const;

    double max_abs() const;
    double norm2() const;

    ConstForm& operator+=(const ConstForm& o);
    ConstForm& operator-=(const ConstForm& o);
    ConstForm& operator*=(double s);

private:
    std::shared_ptr<const MultiIndexBasis> basis_;
    std::vector<double> coeffs_;
};

ConstForm operator+(ConstForm a, const ConstForm& b);
ConstForm operator-(ConstForm a, const ConstForm& b);
ConstForm operator*(double s, ConstForm a);

/// Table of nonzero products between two bases; interned per (d, ka, kb).
struct WedgeTable {
    struct Term {
        std::uint32_t a;
        std::uint32_t b;
        std::uint32_t out;
        double sign;
    };
    int dim = 0;
    int deg_a = 0;
    int deg_b = 0;
    std::vector<Term> terms;

    static std::shared_ptr<const WedgeTable> get(int dim, int deg_a, int deg_b);

    void apply(std::span<const double> a, std::span<const double> b, std::span<double> out) const;
};

ConstForm wedge(const ConstForm& a, const ConstForm& b);

// ---------------------------------------------------------------------------
// Uniform Cartesian grids

class GridSpec {
public:
    GridSpec() = default;
    GridSpec(std::vector<double> lo, std::vector<double> hi, std::vector<int> points);

    /// Cube [lo, hi]^dim with `points` nodes per axis.
    static GridSpec cube(int dim, double lo, double hi, int points);
    /// Grid with the given spacing whose nodes include the origin, covering [-half_width, half_width]^dim.
    static GridSpec centered(int dim, double half_width, double spacing);

    int dim() const noexcept { return static_cast<int>(points_.size()); }
    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }
    const std::vector<int>& points() const noexcept { return points_; }
    double spacing(int axis) const { return spacing_[axis]; }
    double max_spacing() const;
    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t stride(int axis) const { return strides_[axis]; }

    std::size_t linear_index(std::span<const int> idx) const;
    void multi_index(std::size_t linear, std::span<int> idx) const;
    void node_point(std::size_t linear, std::span<double> x) const;
    double coordinate(int axis, int i) const { return lo_[axis] + i * spacing_[axis]; }

    /// True if node i lies in the outermost `layers` layers along some axis.
    bool near_boundary(std::size_t linear, int layers) const;

    bool contains(std::span<const double> x, double tol = 0.0) const;
    bool same_as(const GridSpec& o) const;

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<int> points_;
    std::vector<double> spacing_;
    std::vector<std::size_t> strides_;
    std::size_t node_count_ = 0;
};

// ---------------------------------------------------------------------------
// Form-valued functions and grid fields

/// A k-form on R^dim given pointwise.  The callback writes the coefficients
/// of the form at `p` into `out`.
struct FormFunction {
    int dim = 0;
    int degree = 0;
    std::function<void(std::span<const double> p, std::span<double> out)> eval;

    static FormFunction constant(const ConstForm& c);
};

/// k-form with coefficients sampled at the nodes of a grid over R^dim.
/// Storage is node-major (row-major over the grid, axis 0 slowest) with the
/// lexicographic basis index fastest.
class FormField {
public:
    FormField() = default;
    FormField(GridSpec grid, int degree, bool compact = false);
    FormField(GridSpec grid, int degree, std::vector<double> coeffs, bool compact = false);

    static FormField sample(const GridSpec& grid, const FormFunction& f, bool compact = false);

    const GridSpec& grid() const noexcept { return grid_; }
    int dim() const noexcept { return grid_.dim(); }
    int degree() const noexcept { return basis_->degree(); }
    const MultiIndexBasis& basis() const { return *basis_; }
    std::size_t components() const noexcept { return basis_->size(); }
    bool compact() const noexcept { return compact_; }
    void set_compact(bool c) noexcept { compact_ = c; }

    std::span<const double> data() const noexcept { return coeffs_; }
    std::span<double> data() noexcept { return coeffs_; }
    std::span<const double> node(std::size_t i) const { return {coeffs_.data() + i * components(), components()}; }
    std::span<double> node(std::size_t i) { return {coeffs_.data() + i * components(), components()}; }
    ConstForm node_form(std::size_t i) const;

    /// Multilinear interpolation.  Outside the grid: zero for compactly
    /// supported fields, Domain error otherwise.
    void evaluate(std::span<const double> p, std::span<double> out) const;
    ConstForm evaluate(std::span<const double> p) const;
    FormFunction as_function() const;

    /// Largest absolute coefficient over all nodes.
    double sup_norm() const;
    /// True if every coefficient on the outer `layers` node layers is zero.
    bool vanishes_near_boundary(int layers = 2) const;

    FormField& operator+=(const FormField& o);
    FormField& operator*=(double s);

private:
    GridSpec grid_;
    std::shared_ptr<const MultiIndexBasis> basis_;
    std::vector<double> coeffs_;
    bool compact_ = false;
};

FormField wedge_field(const FormField& a, const FormField& b);

/// Finite-difference exterior derivative: central differences on interior
/// nodes, second-order one-sided stencils on boundary nodes (skipped, i.e.
/// taken as zero, for compactly supported fields).
FormField exterior_derivative(const FormField& a);

/// Values and Jacobians of a map sampled at the nodes of its source grid.
/// Jacobians are row-major target_dim x source_dim.
struct JetField {
    GridSpec grid;
    int target_dim = 0;
    std::vector<double> values;
    std::vector<double> jacobians;

    std::span<const double> value(std::size_t i) const { return {values.data() + i * target_dim, static_cast<std::size_t>(target_dim)}; }
    std::span<const double> jacobian(std::size_t i) const
    {
        const std::size_t s = static_cast<std::size_t>(target_dim) * grid.dim();
        return {jacobians.data() + i * s, s};
    }
};

/// A differentiable map given by a callback producing value and Jacobian.
struct SmoothMap {
    int source_dim = 0;
    int target_dim = 0;
    std::function<void(std::span<const double> x, std::span<double> value, std::span<double> jacobian)> eval;

    JetField sample(const GridSpec& grid) const;
};

/// Pointwise pullback: coefficients of a at f(x) contracted with the k x k
/// minors of Df(x).
FormField pullback(const JetField& f, const FormFunction& a);
ConstForm pullback(std::span<const double> jacobian, int target_dim, int source_dim, const ConstForm& a);

struct Ball {
    std::vector<double> center;
    double radius = 1.0;
};
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
};
struct WholeGrid {};
using Domain = std::variant<WholeGrid, Ball, Box>;

bool domain_contains(const Domain& d, std::span<const double> x);

/// Midpoint rule over grid cells of the top-degree coefficient; a cell counts
/// when its center lies in the domain.  Summation runs in cell order.
double integrate_top(const FormField& a, const Domain& domain = WholeGrid{});

/// Measure of the cells integrate_top would count.
double domain_cell_volume(const GridSpec& grid, const Domain& domain);

} // namespace heisen
