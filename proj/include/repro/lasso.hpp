#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "repro/core.hpp"

namespace repro {

/// log(1 + exp(-t)) without overflow.
inline double logistic_loss(double t) {
    return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

/// 1 / (1 + exp(t)), i.e. minus the derivative of logistic_loss.
inline double logistic_tail(double t) {
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

struct LassoSolveOptions {
    double kkt_tol = 1e-8;   // on the mean-loss gradient scale
    int max_outer = 200;
    int max_inner_sweeps = 2000;
};

/// Proximal Newton (IRLS + coordinate descent) for
///   (1/n) sum_i log(1 + exp(-s_i x_i'b)) + lambda * sum_j w_j |b_j|.
/// Coordinates with w_j == 0 are unpenalized. The solver keeps its iterate
/// between calls so that a decreasing lambda sequence is warm-started.
class LogisticL1Solver {
public:
    LogisticL1Solver(const Matrix& x, const Vector& signs, Vector weights, LassoSolveOptions opt = {})
        : x_(x), s_(signs), w_(std::move(weights)), opt_(opt),
          beta_(Vector::Zero(x.cols())), eta_(Vector::Zero(x.rows())),
          grad_(Vector::Zero(x.cols())), in_active_(static_cast<std::size_t>(x.cols()), 0) {
        if (w_.size() != x.cols()) throw validation_error("dimension mismatch: penalty weights");
        for (Index j = 0; j < w_.size(); ++j) {
            if (!(w_[j] >= 0.0)) throw validation_error("penalty weights must be nonnegative");
            if (w_[j] == 0.0) activate(j);
        }
        update_gradient();
    }

    const Vector& beta() const noexcept { return beta_; }
    const Vector& gradient() const noexcept { return grad_; }
    const Vector& linear_predictor() const noexcept { return eta_; }

    void set_beta(const Vector& b) {
        beta_ = b;
        eta_ = x_ * beta_;
        for (Index j = 0; j < beta_.size(); ++j)
            if (beta_[j] != 0.0) activate(j);
        update_gradient();
    }

    double mean_loss() const {
        double f = 0.0;
        for (Index i = 0; i < eta_.size(); ++i) f += logistic_loss(s_[i] * eta_[i]);
        return f / static_cast<double>(eta_.size());
    }

    double penalty(double lambda) const {
        double pen = 0.0;
        for (Index j = 0; j < beta_.size(); ++j)
            if (beta_[j] != 0.0) pen += w_[j] * std::abs(beta_[j]);
        return lambda * pen;
    }

    double objective(double lambda) const { return mean_loss() + penalty(lambda); }

    /// Smallest lambda at which every penalized coefficient is zero, after
    /// fitting the unpenalized coordinates alone.
    double lambda_max() {
        beta_.setZero();
        eta_.setZero();
        std::fill(in_active_.begin(), in_active_.end(), 0);
        active_.clear();
        for (Index j = 0; j < w_.size(); ++j)
            if (w_[j] == 0.0) activate(j);
        update_gradient();
        if (!active_.empty()) solve(std::numeric_limits<double>::max());
        double lmax = 0.0;
        for (Index j = 0; j < w_.size(); ++j)
            if (w_[j] > 0.0 && std::isfinite(w_[j])) lmax = std::max(lmax, std::abs(grad_[j]) / w_[j]);
        return lmax;
    }

    /// Largest KKT residual at the current iterate.
    double kkt_residual(double lambda) const {
        double worst = 0.0;
        for (Index j = 0; j < beta_.size(); ++j) {
            const double g = grad_[j];
            const double lw = lambda * w_[j];
            double r;
            if (beta_[j] != 0.0) r = std::abs(g + lw * (beta_[j] > 0.0 ? 1.0 : -1.0));
            else r = std::max(0.0, std::abs(g) - lw);
            worst = std::max(worst, r);
        }
        return worst;
    }

    /// Strong-rule screening before moving from prev_lambda to lambda.
    void screen(double lambda, double prev_lambda) {
        for (Index j = 0; j < w_.size(); ++j)
            if (std::isfinite(w_[j]) && std::abs(grad_[j]) >= w_[j] * (2.0 * lambda - prev_lambda)) activate(j);
    }

    /// Returns true on convergence to the KKT tolerance.
    bool solve(double lambda) {
        const Index n = x_.rows();
        const double inv_n = 1.0 / static_cast<double>(n);
        Vector wts(n), u(n), hdiag;
        for (int outer = 0; outer < opt_.max_outer; ++outer) {
            // add KKT violators among inactive coordinates
            bool added = false;
            for (Index j = 0; j < w_.size(); ++j) {
                if (!in_active_[static_cast<std::size_t>(j)] && std::abs(grad_[j]) > lambda * w_[j] + 0.5 * opt_.kkt_tol) {
                    activate(j);
                    added = true;
                }
            }
            if (!added && kkt_residual(lambda) <= opt_.kkt_tol) return true;

            for (Index i = 0; i < n; ++i) {
                const double q = logistic_tail(s_[i] * eta_[i]);
                wts[i] = std::max(q * (1.0 - q), 1e-10);
            }
            const auto na = active_.size();
            hdiag.resize(static_cast<Index>(na));
            for (std::size_t a = 0; a < na; ++a) {
                const Index j = active_[a];
                hdiag[static_cast<Index>(a)] = (x_.col(j).array().square() * wts.array()).sum() * inv_n;
            }
            // inner coordinate descent on the quadratic model; u = X * delta
            u.setZero();
            Vector delta = Vector::Zero(static_cast<Index>(na));
            for (int sweep = 0; sweep < opt_.max_inner_sweeps; ++sweep) {
                double max_change = 0.0;
                for (std::size_t a = 0; a < na; ++a) {
                    const Index j = active_[a];
                    const double h = hdiag[static_cast<Index>(a)];
                    if (h <= 0.0) continue;
                    const double gm = grad_[j] + (x_.col(j).array() * wts.array() * u.array()).sum() * inv_n;
                    const double bj = beta_[j] + delta[static_cast<Index>(a)];
                    const double z = h * bj - gm;
                    const double lw = lambda * w_[j];
                    const double bnew = z > lw ? (z - lw) / h : (z < -lw ? (z + lw) / h : 0.0);
                    const double d = bnew - bj;
                    if (d != 0.0) {
                        delta[static_cast<Index>(a)] += d;
                        u.noalias() += d * x_.col(j);
                        max_change = std::max(max_change, h * std::abs(d));
                    }
                }
                if (max_change < 0.05 * opt_.kkt_tol) break;
            }
            if (delta.cwiseAbs().maxCoeff() == 0.0) {
                // the model step is null: current point is optimal for the active set
                if (kkt_residual(lambda) <= opt_.kkt_tol) return true;
                if (!added) return false;
                continue;
            }
            // backtracking on the true objective
            const double f0 = objective(lambda);
            double descent = 0.0, pen_new = 0.0, pen_old = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                const Index j = active_[a];
                const double bn = beta_[j] + delta[static_cast<Index>(a)];
                descent += grad_[j] * delta[static_cast<Index>(a)];
                if (bn != 0.0) pen_new += w_[j] * std::abs(bn);
                if (beta_[j] != 0.0) pen_old += w_[j] * std::abs(beta_[j]);
            }
            descent += lambda * (pen_new - pen_old);
            double t = 1.0;
            const Vector beta_old = beta_;
            const Vector eta_old = eta_;
            bool accepted = false;
            for (int half = 0; half < 40; ++half) {
                for (std::size_t a = 0; a < na; ++a) {
                    const Index j = active_[a];
                    beta_[j] = beta_old[j] + t * delta[static_cast<Index>(a)];
                }
                eta_ = eta_old + t * u;
                const double f1 = objective(lambda);
                if (f1 <= f0 + 1e-4 * t * std::min(descent, 0.0) || f1 <= f0 - 1e-15 * std::abs(f0)) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) {
                beta_ = beta_old;
                eta_ = eta_old;
                update_gradient();
                return kkt_residual(lambda) <= opt_.kkt_tol;
            }
            // exact zeros for coordinates that were soft-thresholded at t = 1
            if (t == 1.0) {
                for (std::size_t a = 0; a < na; ++a) {
                    const Index j = active_[a];
                    if (std::abs(beta_[j]) < 1e-300) beta_[j] = 0.0;
                }
            }
            update_gradient();
        }
        return kkt_residual(lambda) <= opt_.kkt_tol;
    }

private:
    void activate(Index j) {
        auto& flag = in_active_[static_cast<std::size_t>(j)];
        if (!flag) {
            flag = 1;
            active_.push_back(j);
        }
    }

    void update_gradient() {
        const Index n = x_.rows();
        Vector r(n);
        for (Index i = 0; i < n; ++i) r[i] = s_[i] * logistic_tail(s_[i] * eta_[i]);
        grad_.noalias() = -(x_.transpose() * r) / static_cast<double>(n);
    }

    const Matrix& x_;
    const Vector& s_;
    Vector w_;
    LassoSolveOptions opt_;
    Vector beta_, eta_, grad_;
    std::vector<Index> active_;
    std::vector<char> in_active_;
};

/// Solutions of the L1-penalized logistic problem over a decreasing grid.
struct LassoPath {
    std::vector<double> lambdas;
    std::vector<Vector> betas;
    std::vector<SupportSet> supports;
    std::vector<bool> converged;

    std::size_t size() const noexcept { return lambdas.size(); }
};

struct PathOptions {
    std::size_t n_lambda = 100;
    double min_ratio = 1e-3;
    std::optional<Vector> weights;
    /// Stop once a support grows beyond this size (the point is kept).
    std::optional<std::size_t> stop_above_support;
    LassoSolveOptions solver;
};

/// Warm-started coordinate-descent path on a log-spaced grid from lambda_max
/// down to lambda_max * min_ratio.
inline LassoPath logistic_lasso_path(const Matrix& x, const Eigen::VectorXi& y, const PathOptions& opt = {}) {
    if (opt.n_lambda < 2) throw validation_error("lasso path needs at least two lambda values");
    const auto ones = y.sum();
    if (ones == 0 || ones == y.size()) throw validation_error("degenerate labels");
    Vector s(y.size());
    for (Index i = 0; i < y.size(); ++i) s[i] = y[i] == 1 ? 1.0 : -1.0;
    Vector w = opt.weights ? *opt.weights : Vector::Ones(x.cols());
    LogisticL1Solver solver(x, s, w, opt.solver);
    double lmax = solver.lambda_max();
    if (!(lmax > 0.0)) lmax = 1e-12;

    LassoPath path;
    const double step = std::log(opt.min_ratio) / static_cast<double>(opt.n_lambda - 1);
    double prev = lmax;
    for (std::size_t k = 0; k < opt.n_lambda; ++k) {
        const double lam = k == 0 ? lmax : lmax * std::exp(step * static_cast<double>(k));
        if (k > 0) solver.screen(lam, prev);
        const bool ok = solver.solve(lam);
        prev = lam;
        path.lambdas.push_back(lam);
        path.betas.push_back(solver.beta());
        path.supports.push_back(SupportSet::from_nonzeros(solver.beta()));
        path.converged.push_back(ok);
        if (opt.stop_above_support && path.supports.back().size() > *opt.stop_above_support) break;
    }
    return path;
}

inline LassoPath logistic_lasso_path(const Dataset& data, const PathOptions& opt = {}) {
    return logistic_lasso_path(data.x(), data.y(), opt);
}

/// Support of the path point with the largest cardinality not exceeding k;
/// ties go to the larger lambda.
inline SupportSet support_at_cardinality(const LassoPath& path, std::size_t k) {
    SupportSet best;
    bool found = false;
    for (const auto& s : path.supports) {  // lambdas are decreasing
        if (s.size() <= k && (!found || s.size() > best.size())) {
            best = s;
            found = true;
        }
    }
    return best;
}

}  // namespace repro
