#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace mdbsde {

/// Monomials of x = w / sqrt(t) up to `degree`; only the constant at t = 0.
Eigen::MatrixXd polynomial_basis(const Eigen::Ref<const Eigen::ArrayXd>& w, double t, int degree);
Eigen::RowVectorXd polynomial_basis(double w, double t, int degree);

/// Least-squares projection on the columns of X through the normal equations.
/// Falls back to ridge regularization when the Gram matrix is numerically singular.
class Projection {
public:
    explicit Projection(const Eigen::MatrixXd& design);

    /// Coefficients, one column per target column.
    Eigen::MatrixXd coefficients(const Eigen::MatrixXd& targets) const;

    double condition() const { return condition_; }
    bool ridge() const { return ridge_; }

private:
    const Eigen::MatrixXd& design_;
    Eigen::LDLT<Eigen::MatrixXd> solver_;
    double condition_ = 1.0;
    bool ridge_ = false;
};

}  // namespace mdbsde
