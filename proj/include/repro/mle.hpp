#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "repro/core.hpp"
#include "repro/lasso.hpp"
#include "repro/stats.hpp"

namespace repro {

/// Low-dimensional logistic fit on a support.
struct MleFit {
    Vector coef;
    double loglik = 0.0;
    Matrix hessian;  // negative curvature of the log-likelihood at coef
    bool separated = false;
    bool converged = false;
    int iterations = 0;
};

inline double log_likelihood(const Vector& eta, const Vector& signs) {
    double l = 0.0;
    for (Index i = 0; i < eta.size(); ++i) l -= logistic_loss(signs[i] * eta[i]);
    return l;
}

namespace detail {

constexpr double kNewtonGradTol = 1e-8;
constexpr double kNewtonJitter = 1e-8;
constexpr double kSeparationNorm = 1e3;
constexpr int kNewtonMaxIter = 100;
constexpr int kMaxHalvings = 30;

/// Newton-Raphson with step halving for max_b l(offset + z b).
inline MleFit newton_logistic(const Matrix& z, const Vector& signs, const Vector& offset, Vector b) {
    const Index n = z.rows();
    const Index k = z.cols();
    MleFit fit;
    Vector eta = offset + z * b;
    double l = log_likelihood(eta, signs);
    Vector q(n), grad(k);
    Matrix h(k, k);
    auto curvature = [&] {
        for (Index i = 0; i < n; ++i) q[i] = logistic_tail(signs[i] * eta[i]);
        grad.noalias() = z.transpose() * (signs.array() * q.array()).matrix();
        const Vector wts = (q.array() * (1.0 - q.array())).matrix();
        h.noalias() = z.transpose() * wts.asDiagonal() * z;
    };
    int it = 0;
    for (; it < kNewtonMaxIter; ++it) {
        curvature();
        if (grad.lpNorm<Eigen::Infinity>() < kNewtonGradTol) {
            fit.converged = true;
            break;
        }
        Matrix hj = h;
        hj.diagonal().array() += kNewtonJitter;
        const Vector step = hj.ldlt().solve(grad);
        double t = 1.0;
        bool improved = false;
        for (int half = 0; half <= kMaxHalvings; ++half) {
            const Vector b_try = b + t * step;
            const Vector eta_try = offset + z * b_try;
            const double l_try = log_likelihood(eta_try, signs);
            if (l_try >= l - 1e-12 * std::abs(l)) {
                b = b_try;
                eta = eta_try;
                improved = l_try > l;
                l = l_try;
                break;
            }
            t *= 0.5;
        }
        if (b.norm() > kSeparationNorm) {
            fit.separated = true;
            ++it;
            break;
        }
        if (!improved && t < std::ldexp(1.0, -kMaxHalvings)) break;
    }
    if (!fit.converged && !fit.separated && it >= kNewtonMaxIter) fit.separated = true;
    curvature();
    if (!fit.converged && grad.lpNorm<Eigen::Infinity>() < kNewtonGradTol) fit.converged = true;
    fit.coef = std::move(b);
    fit.loglik = l;
    fit.hessian = h;
    fit.iterations = it;
    return fit;
}

/// True when every observation is strictly on the right side: the MLE does
/// not exist.
inline bool completely_separated(const Vector& eta, const Vector& signs) {
    for (Index i = 0; i < eta.size(); ++i)
        if (signs[i] * eta[i] <= 0.0) return false;
    return true;
}

}  // namespace detail

/// Unconstrained logistic MLE on the columns in support (no intercept).
inline MleFit mle_logistic(const Dataset& data, const SupportSet& support,
                           const std::optional<Vector>& start = std::nullopt) {
    support.check_range(data.p());
    if (static_cast<Index>(support.size()) > data.n()) throw validation_error("support larger than sample size");
    const Vector s = data.signs();
    if (support.empty()) {
        MleFit fit;
        fit.coef = Vector(0);
        fit.loglik = -static_cast<double>(data.n()) * std::log(2.0);
        fit.hessian = Matrix(0, 0);
        fit.converged = true;
        return fit;
    }
    const Matrix z = restrict_columns(data.x(), support);
    Vector b0 = start ? *start : Vector::Zero(z.cols());
    MleFit fit = detail::newton_logistic(z, s, Vector::Zero(data.n()), std::move(b0));
    if (!fit.separated && detail::completely_separated(z * fit.coef, s)) fit.separated = true;
    return fit;
}

/// Affine parametrization {b : A b = t} = {b_particular + N v}.
struct AffineConstraint {
    Vector particular;
    Matrix null_basis;  // columns: orthonormal basis of null(A)
    Index rank = 0;
};

/// Least-squares particular solution and null space from the SVD. Returns
/// nothing when A b = t has no solution.
inline std::optional<AffineConstraint> solve_affine(const Matrix& a, const Vector& t, double tol_scale = 1e-10) {
    const Index k = a.cols();
    AffineConstraint c;
    if (k == 0) {
        if (t.norm() > 1e-8 * (1.0 + t.norm())) return std::nullopt;
        c.particular = Vector(0);
        c.null_basis = Matrix(0, 0);
        return c;
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = sv.size() && sv[0] > 0.0
        ? tol_scale * static_cast<double>(std::max(a.rows(), a.cols())) * sv[0] : kInf;
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cut) ++r;
    c.rank = r;
    const Matrix& u = svd.matrixU();
    const Matrix& v = svd.matrixV();
    c.particular = Vector::Zero(k);
    for (Index i = 0; i < r; ++i) c.particular += v.col(i) * (u.col(i).dot(t) / sv[i]);
    const double resid = (a * c.particular - t).norm();
    if (resid > 1e-8 * (1.0 + t.norm())) return std::nullopt;
    c.null_basis = v.rightCols(k - r);
    return c;
}

/// Logistic MLE on support subject to a_restricted * b = t, fitted by Newton
/// in null-space coordinates. Returns nothing for an incompatible target.
inline std::optional<MleFit> try_mle_logistic_constrained(const Dataset& data, const SupportSet& support,
                                                          const Matrix& a_restricted, const Vector& t,
                                                          const std::optional<Vector>& start = std::nullopt) {
    if (a_restricted.rows() == 0) return mle_logistic(data, support, start);
    if (a_restricted.cols() != static_cast<Index>(support.size()))
        throw validation_error("dimension mismatch: restricted target columns differ from support size");
    if (t.size() != a_restricted.rows()) throw validation_error("dimension mismatch: target value length");
    auto affine = solve_affine(a_restricted, t);
    if (!affine) return std::nullopt;
    const Vector s = data.signs();
    if (support.empty()) {
        MleFit fit;
        fit.coef = Vector(0);
        fit.loglik = -static_cast<double>(data.n()) * std::log(2.0);
        fit.hessian = Matrix(0, 0);
        fit.converged = true;
        return fit;
    }
    const Matrix z = restrict_columns(data.x(), support);
    const Vector offset = z * affine->particular;
    const Matrix& nb = affine->null_basis;
    if (nb.cols() == 0) {
        MleFit fit;
        fit.coef = affine->particular;
        fit.loglik = log_likelihood(offset, s);
        Vector q(data.n());
        for (Index i = 0; i < data.n(); ++i) q[i] = logistic_tail(s[i] * offset[i]);
        fit.hessian = z.transpose() * (q.array() * (1.0 - q.array())).matrix().asDiagonal() * z;
        fit.converged = true;
        return fit;
    }
    const Matrix zn = z * nb;
    Vector v0 = start ? Vector(nb.transpose() * (*start - affine->particular)) : Vector::Zero(nb.cols());
    MleFit inner = detail::newton_logistic(zn, s, offset, std::move(v0));
    MleFit fit;
    fit.coef = affine->particular + nb * inner.coef;
    fit.loglik = inner.loglik;
    fit.separated = inner.separated;
    fit.converged = inner.converged;
    fit.iterations = inner.iterations;
    const Vector eta = z * fit.coef;
    Vector q(data.n());
    for (Index i = 0; i < data.n(); ++i) q[i] = logistic_tail(s[i] * eta[i]);
    fit.hessian = z.transpose() * (q.array() * (1.0 - q.array())).matrix().asDiagonal() * z;
    return fit;
}

inline MleFit mle_logistic_constrained(const Dataset& data, const SupportSet& support,
                                       const Matrix& a_restricted, const Vector& t) {
    auto fit = try_mle_logistic_constrained(data, support, a_restricted, t);
    if (!fit) throw validation_error("incompatible target");
    return *fit;
}

}  // namespace repro
