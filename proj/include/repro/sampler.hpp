#pragma once

#include <cmath>

#include "repro/core.hpp"
#include "repro/rng.hpp"

namespace repro {

/// Inverse CDF of the standard logistic distribution.
inline double logistic_quantile(double u) { return std::log(u / (1.0 - u)); }

/// n i.i.d. standard logistic draws.
inline Vector draw_logistic(RngStream stream, Index n) {
    if (n < 1) throw validation_error("draw_logistic needs n >= 1");
    Vector e(n);
    for (Index i = 0; i < n; ++i) e[i] = logistic_quantile(stream.uniform());
    return e;
}

/// Labels 1{x_tau' beta + eps > 0}; a sum of exactly zero maps to 0.
inline Eigen::VectorXi synth_response(const Matrix& x, const ThetaPoint& theta, const Vector& eps) {
    if (eps.size() != x.rows()) throw validation_error("dimension mismatch: noise length differs from row count");
    theta.support.check_range(x.cols());
    const Vector eta = theta.linear_predictor(x);
    Eigen::VectorXi y(x.rows());
    for (Index i = 0; i < x.rows(); ++i) y[i] = (eta[i] + eps[i] > 0.0) ? 1 : 0;
    return y;
}

/// Rows from N(0, Sigma) with Sigma_ij = rho^|i-j|, built column by column via
/// the AR(1) recursion X_j = rho X_{j-1} + sqrt(1 - rho^2) Z_j.
inline Matrix draw_ar_gaussian(RngStream stream, Index n, Index p, double rho) {
    if (!(std::abs(rho) < 1.0)) throw validation_error("AR coefficient must satisfy |rho| < 1");
    Matrix x(n, p);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Index i = 0; i < n; ++i) {
        double prev = stream.normal();
        x(i, 0) = prev;
        for (Index j = 1; j < p; ++j) {
            prev = rho * prev + innov * stream.normal();
            x(i, j) = prev;
        }
    }
    return x;
}

/// Simulated logistic data with the realized noise kept for oracle checks.
struct SimulatedData {
    Dataset data;
    ThetaPoint truth;
    Vector realized_noise;
};

inline SimulatedData simulate_logistic(std::uint64_t seed, Index n, Index p, const ThetaPoint& truth, double rho) {
    Matrix x = draw_ar_gaussian(RngStream(seed, streams::design), n, p, rho);
    Vector eps = draw_logistic(RngStream(seed, streams::realized_noise), n);
    auto y = synth_response(x, truth, eps);
    return {validate_dataset(std::move(x), std::move(y)), truth, std::move(eps)};
}

}  // namespace repro
