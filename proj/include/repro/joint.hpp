#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "repro/core.hpp"
#include "repro/lasso.hpp"
#include "repro/rng.hpp"
#include "repro/stats.hpp"

namespace repro {

/// Penalized fit of (beta, sigma) against a fixed noise vector.
struct JointFit {
    Vector beta;
    double sigma = 0.0;
    double objective = 0.0;  // loss sum plus penalty, unsmoothed
    bool converged = false;
    double lambda = 0.0;

    SupportSet support() const { return SupportSet::from_nonzeros(beta); }
};

inline double hinge_loss(double u) { return u < 1.0 ? 1.0 - u : 0.0; }

/// Hinge with a quadratic piece of width delta below the kink.
inline double smooth_hinge(double u, double delta) {
    if (u >= 1.0) return 0.0;
    if (u > 1.0 - delta) return (1.0 - u) * (1.0 - u) / (2.0 * delta);
    return 1.0 - u - 0.5 * delta;
}

inline double smooth_hinge_deriv(double u, double delta) {
    if (u >= 1.0) return 0.0;
    if (u > 1.0 - delta) return -(1.0 - u) / delta;
    return -1.0;
}

inline double margin_loss(Loss loss, double u) {
    return loss == Loss::logistic ? logistic_loss(u) : hinge_loss(u);
}

/// s_i * (x_i' beta + sigma * eps_i).
inline Vector joint_margins(const Dataset& data, const Vector& eps, const Vector& beta, double sigma) {
    Vector eta = data.x() * beta + sigma * eps;
    return (eta.array() * data.signs().array()).matrix();
}

inline double joint_loss_sum(Loss loss, const Vector& margins) {
    double f = 0.0;
    for (Index i = 0; i < margins.size(); ++i) f += margin_loss(loss, margins[i]);
    return f;
}

/// Analytic gradient of sum_i L(margin_i) in (beta, sigma); the hinge is
/// smoothed with the given width.
inline Vector joint_loss_gradient(const Dataset& data, const Vector& eps, Loss loss, const Vector& beta,
                                  double sigma, double delta = 1e-4) {
    const Vector m = joint_margins(data, eps, beta, sigma);
    const Vector s = data.signs();
    Vector r(data.n());
    for (Index i = 0; i < data.n(); ++i)
        r[i] = s[i] * (loss == Loss::logistic ? -logistic_tail(m[i]) : smooth_hinge_deriv(m[i], delta));
    Vector g(data.p() + 1);
    g.head(data.p()) = data.x().transpose() * r;
    g[data.p()] = eps.dot(r);
    return g;
}

inline double smooth_joint_loss_sum(Loss loss, const Vector& margins, double delta) {
    if (loss == Loss::logistic) return joint_loss_sum(loss, margins);
    double f = 0.0;
    for (Index i = 0; i < margins.size(); ++i) f += smooth_hinge(margins[i], delta);
    return f;
}

/// Per-coefficient penalty weights for the adaptive fit: a single global
/// weight 1/||pilot||_1, or 1/|pilot_j| per coordinate. Unpenalized columns
/// get weight 0; per-coordinate weights of zero pilot entries are infinite.
inline Vector adaptive_penalty_weights(const Vector& pilot_beta, AdaptiveWeights mode,
                                       const std::vector<Index>& unpenalized = {}) {
    const double l1 = pilot_beta.lpNorm<1>();
    if (!(l1 > 0.0)) throw numeric_error("degenerate pilot");
    Vector w(pilot_beta.size());
    for (Index j = 0; j < w.size(); ++j) {
        if (mode == AdaptiveWeights::global) w[j] = 1.0 / l1;
        else w[j] = pilot_beta[j] != 0.0 ? 1.0 / std::abs(pilot_beta[j]) : kInf;
    }
    for (Index j : unpenalized) {
        if (j < 0 || j >= w.size()) throw validation_error("unpenalized index out of range");
        w[j] = 0.0;
    }
    return w;
}

struct JointSolveOptions {
    LassoSolveOptions logistic;
    std::vector<double> hinge_widths{1e-1, 1e-2, 1e-3, 1e-4};
    double hinge_rel_tol = 1e-5;
    int hinge_max_sweeps = 10000;
    int hinge_exact_sweeps = 5;
};

namespace detail {

/// Coordinate descent for sum_i h_delta(z_i' c) + lambda * sum_j w_j |c_j|,
/// each coordinate minimized exactly by a safeguarded Newton search on the
/// piecewise-linear derivative.
class SmoothHingeCD {
public:
    SmoothHingeCD(Matrix z, Vector w) : z_(std::move(z)), w_(std::move(w)),
        c_(Vector::Zero(z_.cols())), m_(Vector::Zero(z_.rows())),
        in_active_(static_cast<std::size_t>(z_.cols()), 0) {
        for (Index j = 0; j < w_.size(); ++j)
            if (w_[j] == 0.0) activate(j);
    }

    const Vector& coef() const noexcept { return c_; }
    const Vector& margins() const noexcept { return m_; }
    const Matrix& design() const noexcept { return z_; }
    const Vector& weights() const noexcept { return w_; }

    void set_coef(const Vector& c) {
        c_ = c;
        m_ = z_ * c_;
        for (Index j = 0; j < c_.size(); ++j)
            if (c_[j] != 0.0) activate(j);
    }

    double penalty(double lambda) const {
        double pen = 0.0;
        for (Index j = 0; j < c_.size(); ++j)
            if (c_[j] != 0.0) pen += w_[j] * std::abs(c_[j]);
        return lambda * pen;
    }

    double smooth_objective(double lambda, double delta) const {
        double f = 0.0;
        for (Index i = 0; i < m_.size(); ++i) f += smooth_hinge(m_[i], delta);
        return f + penalty(lambda);
    }

    double hinge_objective(double lambda) const {
        double f = 0.0;
        for (Index i = 0; i < m_.size(); ++i) f += hinge_loss(m_[i]);
        return f + penalty(lambda);
    }

    Vector gradient(double delta) const {
        Vector r(m_.size());
        for (Index i = 0; i < m_.size(); ++i) r[i] = smooth_hinge_deriv(m_[i], delta);
        return z_.transpose() * r;
    }

    /// Exact minimizer along coordinate j.
    void update(Index j, double lambda, double delta) {
        const auto a = z_.col(j);
        const double b0 = c_[j];
        const double pen = lambda * w_[j];
        const Index n = z_.rows();
        auto eval = [&](double b, double& slope) {
            const double d = b - b0;
            double g = 0.0, sl = 0.0;
            for (Index i = 0; i < n; ++i) {
                const double ai = a[i];
                if (ai == 0.0) continue;
                const double u = m_[i] + ai * d;
                if (u >= 1.0) continue;
                if (u > 1.0 - delta) {
                    g -= ai * (1.0 - u) / delta;
                    sl += ai * ai / delta;
                } else {
                    g -= ai;
                }
            }
            slope = sl;
            return g;
        };
        double lo_bp = kInf, hi_bp = -kInf, scale = pen;
        for (Index i = 0; i < n; ++i) {
            const double ai = a[i];
            if (ai == 0.0) continue;
            scale += std::abs(ai);
            const double b1 = b0 + (1.0 - m_[i]) / ai;
            const double b2 = b0 + (1.0 - delta - m_[i]) / ai;
            lo_bp = std::min({lo_bp, b1, b2});
            hi_bp = std::max({hi_bp, b1, b2});
        }
        if (!(scale > 0.0) || lo_bp == kInf) {
            set(j, 0.0);
            return;
        }
        const double tol = 1e-13 * scale;
        double slope = 0.0;
        double target_shift;  // root of D(b) + target_shift
        double lo, hi;
        if (!std::isfinite(pen)) {
            set(j, 0.0);
            return;
        }
        if (pen > 0.0) {
            const double d0 = eval(0.0, slope);
            if (std::abs(d0) <= pen) {
                set(j, 0.0);
                return;
            }
            if (d0 < -pen) {
                target_shift = pen;
                lo = 0.0;
                hi = std::max(hi_bp, 0.0);
            } else {
                target_shift = -pen;
                lo = std::min(lo_bp, 0.0);
                hi = 0.0;
            }
        } else {
            target_shift = 0.0;
            lo = lo_bp;
            hi = hi_bp;
        }
        double x = std::clamp(b0, lo, hi);
        for (int it = 0; it < 200; ++it) {
            const double g = eval(x, slope) + target_shift;
            if (std::abs(g) <= tol) break;
            if (g < 0.0) lo = x; else hi = x;
            if (hi - lo <= 1e-15 * (1.0 + std::abs(x))) break;
            double next = slope > 0.0 ? x - g / slope : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            x = next;
        }
        set(j, x);
    }

    /// Exact minimizer along coordinate j of the unsmoothed hinge objective:
    /// walk the sorted kinks of the piecewise-linear 1-D function until the
    /// slope turns nonnegative.
    void update_exact(Index j, double lambda) {
        const auto a = z_.col(j);
        const double b0 = c_[j];
        const double pen = lambda * w_[j];
        if (!std::isfinite(pen)) {
            set(j, 0.0);
            return;
        }
        kinks_.clear();
        double slope = -pen;
        for (Index i = 0; i < z_.rows(); ++i) {
            const double ai = a[i];
            if (ai == 0.0) continue;
            kinks_.push_back({b0 + (1.0 - m_[i]) / ai, std::abs(ai)});
            if (ai > 0.0) slope -= ai;
        }
        if (pen > 0.0) kinks_.push_back({0.0, 2.0 * pen});
        if (kinks_.empty()) return;
        std::sort(kinks_.begin(), kinks_.end());
        if (slope >= 0.0) {
            set(j, std::min(b0, kinks_.front().first));
            return;
        }
        for (std::size_t k = 0; k < kinks_.size(); ++k) {
            slope += kinks_[k].second;
            if (slope >= -1e-12 * (1.0 + pen)) {
                const double left = kinks_[k].first;
                if (slope > 1e-12 * (1.0 + pen) || k + 1 == kinks_.size()) {
                    set(j, left);
                } else {
                    set(j, std::clamp(b0, left, kinks_[k + 1].first));
                }
                return;
            }
        }
    }

    /// Exact coordinate passes on the unsmoothed objective; each pass can only
    /// lower it.
    void polish_exact(double lambda, int max_sweeps) {
        double prev = hinge_objective(lambda);
        for (int s = 0; s < max_sweeps; ++s) {
            for (Index j : active_) update_exact(j, lambda);
            const double cur = hinge_objective(lambda);
            if (prev - cur <= 1e-12 * std::max(1.0, std::abs(cur))) break;
            prev = cur;
        }
    }

    /// Minimizes the smoothed objective at one width. Returns true when the
    /// KKT check passes on every coordinate.
    bool solve(double lambda, double delta, double rel_tol, int max_sweeps) {
        int sweeps = 0;
        for (int outer = 0; outer < 100; ++outer) {
            double prev = smooth_objective(lambda, delta);
            while (sweeps < max_sweeps) {
                for (Index j : active_) update(j, lambda, delta);
                ++sweeps;
                const double cur = smooth_objective(lambda, delta);
                const bool small = std::abs(prev - cur) <= rel_tol * std::max(1.0, std::abs(cur));
                prev = cur;
                if (small) break;
            }
            const Vector g = gradient(delta);
            bool added = false;
            for (Index j = 0; j < g.size(); ++j) {
                if (in_active_[static_cast<std::size_t>(j)]) continue;
                if (std::abs(g[j]) > lambda * w_[j] * (1.0 + 1e-9) + 1e-9) {
                    activate(j);
                    added = true;
                }
            }
            if (!added) return sweeps < max_sweeps;
        }
        return false;
    }

    /// Shrinks every coefficient by 1 / (smallest margin) when all margins
    /// exceed one, keeping the hinge loss at zero and lowering the penalty.
    void rescale_margins(double lambda) {
        if (m_.size() == 0) return;
        const double mmin = m_.minCoeff();
        if (!(mmin > 1.0)) return;
        const double before = hinge_objective(lambda);
        const Vector c_old = c_, m_old = m_;
        c_ /= mmin;
        m_ /= mmin;
        if (hinge_objective(lambda) > before) {
            c_ = c_old;
            m_ = m_old;
        }
    }

    void reset_active() {
        std::fill(in_active_.begin(), in_active_.end(), 0);
        active_.clear();
        for (Index j = 0; j < w_.size(); ++j)
            if (w_[j] == 0.0 || c_[j] != 0.0) activate(j);
    }

private:
    void set(Index j, double b) {
        const double d = b - c_[j];
        if (d != 0.0) {
            m_.noalias() += d * z_.col(j);
            c_[j] = b;
        }
    }

    void activate(Index j) {
        auto& f = in_active_[static_cast<std::size_t>(j)];
        if (!f) {
            f = 1;
            active_.push_back(j);
        }
    }

    Matrix z_;
    Vector w_;
    Vector c_, m_;
    std::vector<std::pair<double, double>> kinks_;
    std::vector<Index> active_;
    std::vector<char> in_active_;
};

/// [X, eps] with rows multiplied by the label signs.
inline Matrix signed_augmented(const Dataset& data, const Vector& eps) {
    const Vector s = data.signs();
    Matrix z(data.n(), data.p() + 1);
    z.leftCols(data.p()) = s.asDiagonal() * data.x();
    z.col(data.p()) = (s.array() * eps.array()).matrix();
    return z;
}

}  // namespace detail

/// Weighted-L1 joint problem over (beta, sigma),
///   sum_i L(s_i (x_i' beta + sigma eps_i)) + lambda * sum_j w_j |beta_j|,
/// kept warm between calls so a decreasing lambda sweep is cheap.
class JointL1Problem {
public:
    JointL1Problem(const Dataset& data, const Vector& eps, Loss loss, Vector weights, JointSolveOptions opt = {})
        : loss_(loss), n_(data.n()), p_(data.p()), opt_(std::move(opt)) {
        if (eps.size() != data.n()) throw validation_error("dimension mismatch: noise length differs from row count");
        if (weights.size() != data.p()) throw validation_error("dimension mismatch: penalty weights");
        Vector w(p_ + 1);
        w.head(p_) = weights;
        w[p_] = 0.0;
        if (loss_ == Loss::logistic) {
            xa_.resize(n_, p_ + 1);
            xa_.leftCols(p_) = data.x();
            xa_.col(p_) = eps;
            s_ = data.signs();
            logit_.emplace(xa_, s_, w, opt_.logistic);
        } else {
            hinge_.emplace(detail::signed_augmented(data, eps), w);
        }
    }

    JointL1Problem(const JointL1Problem&) = delete;
    JointL1Problem& operator=(const JointL1Problem&) = delete;

    /// Smallest lambda with beta = 0, after fitting sigma alone.
    double lambda_max() {
        if (logit_) return static_cast<double>(n_) * logit_->lambda_max();
        auto& h = *hinge_;
        h.set_coef(Vector::Zero(p_ + 1));
        h.reset_active();
        for (double delta : opt_.hinge_widths) h.solve(kInf, delta, opt_.hinge_rel_tol, opt_.hinge_max_sweeps);
        const Vector g = h.gradient(opt_.hinge_widths.back());
        double lmax = 0.0;
        for (Index j = 0; j < p_; ++j)
            if (h.weights()[j] > 0.0 && std::isfinite(h.weights()[j])) lmax = std::max(lmax, std::abs(g[j]) / h.weights()[j]);
        return lmax;
    }

    /// Solves at lambda from the current iterate.
    JointFit solve(double lambda, bool continuation = true) {
        if (!(lambda >= 0.0)) throw validation_error("lambda must be nonnegative");
        JointFit fit;
        fit.lambda = lambda;
        if (logit_) {
            auto& sv = *logit_;
            fit.converged = sv.solve(lambda / static_cast<double>(n_));
            fit.beta = sv.beta().head(p_);
            fit.sigma = sv.beta()[p_];
            fit.objective = static_cast<double>(n_) * sv.objective(lambda / static_cast<double>(n_));
            last_lambda_ = lambda;
            return fit;
        }
        auto& h = *hinge_;
        const auto& widths = opt_.hinge_widths;
        const std::size_t first = continuation || widths.size() < 3 ? 0 : widths.size() - 3;
        bool ok = true;
        for (std::size_t k = first; k < widths.size(); ++k)
            ok = h.solve(lambda, widths[k], opt_.hinge_rel_tol, opt_.hinge_max_sweeps);
        h.polish_exact(lambda, opt_.hinge_exact_sweeps);
        h.rescale_margins(lambda);
        fit.converged = ok;
        fit.beta = h.coef().head(p_);
        fit.sigma = h.coef()[p_];
        fit.objective = h.hinge_objective(lambda);
        last_lambda_ = lambda;
        return fit;
    }

    /// Moves to lambda from prev_lambda with strong-rule screening.
    void prepare(double lambda, double prev_lambda) {
        if (logit_) logit_->screen(lambda / static_cast<double>(n_), prev_lambda / static_cast<double>(n_));
    }

    void warm_start(const Vector& beta, double sigma) {
        Vector c(p_ + 1);
        c.head(p_) = beta;
        c[p_] = sigma;
        if (logit_) logit_->set_beta(c);
        else hinge_->set_coef(c);
    }

private:
    Loss loss_;
    Index n_, p_;
    JointSolveOptions opt_;
    Matrix xa_;
    Vector s_;
    std::optional<LogisticL1Solver> logit_;
    std::optional<detail::SmoothHingeCD> hinge_;
    double last_lambda_ = 0.0;
};

/// One adaptive-penalty fit at lambda:
///   sum_i L(...) + lambda * ||beta||_1 / ||pilot.beta||_1
/// (or per-coordinate weights).
inline JointFit fit_adaptive_joint(const Dataset& data, const Vector& eps, Loss loss, double lambda,
                                   const JointFit& pilot, AdaptiveWeights mode = AdaptiveWeights::global,
                                   const std::vector<Index>& unpenalized = {}, JointSolveOptions opt = {}) {
    if (pilot.beta.size() != data.p()) throw validation_error("dimension mismatch: pilot length");
    JointL1Problem prob(data, eps, loss, adaptive_penalty_weights(pilot.beta, mode, unpenalized), std::move(opt));
    return prob.solve(lambda);
}

struct SweepOptions {
    std::size_t n_lambda = 30;
    double min_ratio = 1e-2;
    /// Stop once a support grows beyond this size (the point is kept).
    std::optional<std::size_t> stop_above_support;
    JointSolveOptions solver;
};

/// Warm-started fits along a log-spaced grid from lambda_max down to
/// lambda_max * min_ratio.
inline std::vector<JointFit> adaptive_joint_sweep(const Dataset& data, const Vector& eps, Loss loss,
                                                  const Vector& weights, const SweepOptions& opt = {}) {
    if (opt.n_lambda < 1) throw validation_error("sweep needs at least one lambda");
    JointL1Problem prob(data, eps, loss, weights, opt.solver);
    double lmax = prob.lambda_max();
    if (!(lmax > 0.0)) lmax = 1e-12;
    std::vector<JointFit> out;
    out.reserve(opt.n_lambda);
    const double step = opt.n_lambda > 1 ? std::log(opt.min_ratio) / static_cast<double>(opt.n_lambda - 1) : 0.0;
    double prev = lmax;
    for (std::size_t k = 0; k < opt.n_lambda; ++k) {
        const double lam = lmax * std::exp(step * static_cast<double>(k));
        if (k > 0) prob.prepare(lam, prev);
        out.push_back(prob.solve(lam, k == 0));
        prev = lam;
        if (opt.stop_above_support && out.back().support().size() > *opt.stop_above_support) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ridge pilot: sum_i L(...) + lambda * ||beta||_2 with lambda chosen by CV.

struct RidgeOptions {
    std::optional<std::vector<double>> grid;  // explicit lambda grid
    std::size_t n_grid = 10;
    double top_fraction = 0.9;  // grid starts at this fraction of lambda_max
    double min_ratio = 1e-3;
    std::size_t folds = 3;
    std::uint64_t fold_seed = 0;
    int max_iter = 300;
    double rel_tol = 1e-6;
    double hinge_width = 1e-2;
};

struct RidgeFit {
    JointFit fit;
    std::vector<double> grid;
    std::vector<double> cv_loss;
    std::size_t selected = 0;
};

namespace detail {

inline double loss_deriv(Loss loss, double u, double delta) {
    return loss == Loss::logistic ? -logistic_tail(u) : smooth_hinge_deriv(u, delta);
}

/// Largest eigenvalue of z'z by power iteration.
inline double spectral_norm_sq(const Matrix& z) {
    Vector v = Vector::Ones(z.cols()) / std::sqrt(static_cast<double>(z.cols()));
    double est = 0.0;
    for (int it = 0; it < 50; ++it) {
        Vector w = z.transpose() * (z * v);
        const double nw = w.norm();
        if (!(nw > 0.0)) return 0.0;
        const double next = v.dot(w);
        v = w / nw;
        if (std::abs(next - est) <= 1e-6 * next) {
            est = next;
            break;
        }
        est = next;
    }
    return est * 1.01;
}

/// FISTA with adaptive restart for the group-ridge joint problem on signed
/// augmented design z (last column is the unpenalized sigma).
inline Vector fista_group_ridge(const Matrix& z, Loss loss, double lambda, double delta, double lip,
                                Vector c, int max_iter, double rel_tol, bool* converged = nullptr) {
    const Index k = z.cols();
    const Index pb = k - 1;
    auto objective = [&](const Vector& cc) {
        const Vector m = z * cc;
        return smooth_joint_loss_sum(loss, m, delta) + lambda * cc.head(pb).norm();
    };
    auto grad = [&](const Vector& cc) {
        const Vector m = z * cc;
        Vector r(m.size());
        for (Index i = 0; i < m.size(); ++i) r[i] = loss_deriv(loss, m[i], delta);
        return Vector(z.transpose() * r);
    };
    const double step = 1.0 / lip;
    auto prox = [&](Vector v) {
        const double nb = v.head(pb).norm();
        const double thr = step * lambda;
        if (nb <= thr) v.head(pb).setZero();
        else v.head(pb) *= (1.0 - thr / nb);
        return v;
    };
    Vector y = c;
    double t = 1.0;
    double f_prev = objective(c);
    bool ok = false;
    for (int it = 0; it < max_iter; ++it) {
        Vector c_new = prox(y - step * grad(y));
        const double f_new = objective(c_new);
        if (f_new > f_prev) {
            // restart momentum
            t = 1.0;
            y = c;
            continue;
        }
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = c_new + ((t - 1.0) / t_new) * (c_new - c);
        c = std::move(c_new);
        t = t_new;
        const bool small = std::abs(f_prev - f_new) <= rel_tol * std::max(1.0, std::abs(f_new));
        f_prev = f_new;
        if (small) {
            ok = true;
            break;
        }
    }
    if (converged) *converged = ok;
    return c;
}

inline double ridge_lambda_max(const Matrix& z, Loss loss, double delta, double lip) {
    const Index pb = z.cols() - 1;
    Vector c = fista_group_ridge(z, loss, kInf, delta, lip, Vector::Zero(z.cols()), 2000, 1e-12);
    const Vector m = z * c;
    Vector r(m.size());
    for (Index i = 0; i < m.size(); ++i) r[i] = loss_deriv(loss, m[i], delta);
    return (z.leftCols(pb).transpose() * r).norm();
}

inline std::vector<double> log_grid(double top, double ratio, std::size_t count) {
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k)
        g[k] = count == 1 ? top : top * std::exp(std::log(ratio) * static_cast<double>(k) / static_cast<double>(count - 1));
    return g;
}

}  // namespace detail

/// Deterministic fold labels in [0, folds) from a seeded permutation.
inline std::vector<std::size_t> cv_fold_labels(Index n, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(seed, streams::cv_folds);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::size_t> label(perm.size());
    for (std::size_t r = 0; r < perm.size(); ++r) label[perm[r]] = r % folds;
    return label;
}

/// Group-ridge pilot fit with lambda chosen by K-fold CV on held-out mean
/// (unsmoothed) loss, refit on all rows at the chosen value.
inline RidgeFit fit_ridge_joint(const Dataset& data, const Vector& eps, Loss loss, const RidgeOptions& opt = {}) {
    const Index n = data.n();
    if (n < 3) throw validation_error("ridge pilot needs at least three rows");
    if (eps.size() != n) throw validation_error("dimension mismatch: noise length differs from row count");
    if (opt.folds < 2) throw validation_error("cross-validation needs at least two folds");
    const double delta = opt.hinge_width;
    const double curv = loss == Loss::logistic ? 0.25 : 1.0 / delta;
    const Matrix z = detail::signed_augmented(data, eps);
    const double lip_full = std::max(curv * detail::spectral_norm_sq(z), 1e-12);

    RidgeFit out;
    if (opt.grid) {
        out.grid = *opt.grid;
        if (out.grid.empty()) throw validation_error("empty ridge grid");
        std::sort(out.grid.begin(), out.grid.end(), std::greater<>());
    } else {
        const double lmax = detail::ridge_lambda_max(z, loss, delta, lip_full);
        out.grid = detail::log_grid(opt.top_fraction * std::max(lmax, 1e-12), opt.min_ratio, opt.n_grid);
    }
    const std::size_t g = out.grid.size();
    out.cv_loss.assign(g, 0.0);
    if (g > 1) {
        const auto label = cv_fold_labels(n, opt.folds, opt.fold_seed);
        for (std::size_t f = 0; f < opt.folds; ++f) {
            std::vector<Index> tr, te;
            for (Index i = 0; i < n; ++i) (label[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
            if (te.empty() || tr.empty()) continue;
            Matrix ztr(static_cast<Index>(tr.size()), z.cols()), zte(static_cast<Index>(te.size()), z.cols());
            for (std::size_t r = 0; r < tr.size(); ++r) ztr.row(static_cast<Index>(r)) = z.row(tr[r]);
            for (std::size_t r = 0; r < te.size(); ++r) zte.row(static_cast<Index>(r)) = z.row(te[r]);
            const double lip = std::max(curv * detail::spectral_norm_sq(ztr), 1e-12);
            Vector c = Vector::Zero(z.cols());
            for (std::size_t k = 0; k < g; ++k) {
                c = detail::fista_group_ridge(ztr, loss, out.grid[k], delta, lip, c, opt.max_iter, opt.rel_tol);
                const Vector m = zte * c;
                out.cv_loss[k] += joint_loss_sum(loss, m);
            }
        }
        for (auto& v : out.cv_loss) v /= static_cast<double>(n);
        out.selected = static_cast<std::size_t>(
            std::min_element(out.cv_loss.begin(), out.cv_loss.end()) - out.cv_loss.begin());
    }
    const double lam = out.grid[out.selected];
    Vector c = Vector::Zero(z.cols());
    bool ok = false;
    for (std::size_t k = 0; k <= out.selected; ++k)
        c = detail::fista_group_ridge(z, loss, out.grid[k], delta, lip_full, c, opt.max_iter, opt.rel_tol, &ok);
    out.fit.beta = c.head(data.p());
    out.fit.sigma = c[data.p()];
    out.fit.lambda = lam;
    out.fit.converged = ok;
    out.fit.objective = joint_loss_sum(loss, z * c) + lam * out.fit.beta.norm();
    return out;
}

}  // namespace repro
