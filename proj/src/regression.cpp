#include "mdbsde/regression.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace mdbsde {

Eigen::MatrixXd polynomial_basis(const Eigen::Ref<const Eigen::ArrayXd>& w, double t, int degree) {
    const int d = t > 0.0 ? degree + 1 : 1;
    Eigen::MatrixXd x(w.size(), d);
    x.col(0).setOnes();
    if (d > 1) {
        const Eigen::ArrayXd z = w / std::sqrt(t);
        for (int c = 1; c < d; ++c) x.col(c) = x.col(c - 1).array() * z;
    }
    return x;
}

Eigen::RowVectorXd polynomial_basis(double w, double t, int degree) {
    Eigen::ArrayXd one(1);
    one[0] = w;
    return polynomial_basis(one, t, degree).row(0);
}

Projection::Projection(const Eigen::MatrixXd& design) : design_(design) {
    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(condition_ < 1e12)) {
        ridge_ = true;
        const double eps = 1e-10 * std::max(gram.trace() / static_cast<double>(gram.rows()), 1e-300);
        gram.diagonal().array() += eps;
    }
    solver_.compute(gram);
}

Eigen::MatrixXd Projection::coefficients(const Eigen::MatrixXd& targets) const {
    return solver_.solve(design_.transpose() * targets);
}

}  // namespace mdbsde
