#pragma once

// Symplectic Lefschetz map omega ^ . : L^{n-1}(R^{2n})* -> L^{n+1}(R^{2n})* and
// the contact splitting kappa = alpha ^ beta + d alpha ^ delta of
// (n+1)-forms on H^n.

#include <heisen/forms.hpp>
#include <heisen/heisenberg.hpp>

#include <Eigen/Dense>

namespace heisen {

/// Largest basis size accepted by lefschetz_matrix.
inline constexpr std::size_t kLefschetzBudget = 10000;

/// omega = sum_j dx_j ^ dy_j on R^{2n}.
ConstForm symplectic_form(int n);

struct LefschetzMatrix {
    int n = 0;
    /// Column e holds the coefficients of omega ^ e; rows index the
    /// lexicographic basis of L^{n+1}(R^{2n}), columns that of L^{n-1}(R^{2n}).
    Eigen::MatrixXd matrix;
};

LefschetzMatrix lefschetz_matrix(int n);

/// Unique preimage of `target` (degree n+1 on R^{2n}) under omega ^ . .
ConstForm lefschetz_invert(int n, const ConstForm& target);

/// beta (degree n) and delta (degree n-1) on R^{2n+1}, both free of dt.
struct ContactDecomposition {
    ConstForm beta;
    ConstForm delta;
    /// ||alpha ^ beta + d alpha ^ delta - kappa|| / ||kappa|| (0 when kappa = 0).
    double residual = 0.0;
};

/// alpha(p) ^ beta + d alpha ^ delta.
ConstForm contact_reconstruct(const ConstForm& beta, const ConstForm& delta, std::span<const double> p, int n);

/// Pointwise splitting of an (n+1)-covector at p.  kappa is first expanded in
/// the basis {dx_I ^ dy_J} u {alpha(p) ^ dx_I' ^ dy_J'}; the dt-free part eta
/// gives delta = L^{-1}(eta / 4), the factor 4 coming from d alpha = 4 omega.
ContactDecomposition decompose_pointwise(const ConstForm& kappa, const HPoint& p);
ContactDecomposition decompose_pointwise(const ConstForm& kappa, std::span<const double> p);

struct ContactDecompositionField {
    FormField beta;
    FormField delta;
    FormField d_delta;
    double max_residual = 0.0;
};

/// decompose_pointwise at every node of a compactly supported field on
/// R^{2n+1}; d_delta is the finite-difference exterior derivative of delta.
ContactDecompositionField decompose_field(const FormField& kappa);

/// Largest |coefficient| of any multi-index containing the t axis.
double dt_component_max(const ConstForm& f, int t_axis);
double dt_component_max(const FormField& f, int t_axis);

} // namespace heisen
