#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "repro/core.hpp"
#include "repro/lasso.hpp"
#include "repro/mle.hpp"
#include "repro/parallel.hpp"
#include "repro/stats.hpp"

namespace repro {

namespace detail {

// Log-likelihood used on either side of the ratio. A separated fit has no
// finite maximizer; its supremum is 0.
inline double capped_loglik(const MleFit& fit) { return fit.separated ? 0.0 : std::min(fit.loglik, 0.0); }

}  // namespace detail

/// -2 (l(constrained) - l(unconstrained)) on support tau for A_tau b = t,
/// clamped at 0. +inf when the system is inconsistent or the constrained
/// fit is itself separated.
inline double lrt_stat(const Dataset& data, const SupportSet& tau, const LinearTarget& a, const Vector& t,
                       const std::optional<MleFit>& unconstrained = std::nullopt) {
    if (a.p() != data.p()) throw validation_error("dimension mismatch: target columns differ from p");
    if (t.size() != a.q()) throw validation_error("dimension mismatch: target value length");
    const MleFit full = unconstrained ? *unconstrained : mle_logistic(data, tau);
    const Matrix ar = a.restricted(tau);
    const auto null = try_mle_logistic_constrained(data, tau, ar, t, full.coef);
    if (!null || null->separated) return kInf;
    return std::max(0.0, -2.0 * (detail::capped_loglik(*null) - detail::capped_loglik(full)));
}

struct CandidateDiagnostic {
    SupportSet tau;
    double stat = kInf;
    Index rank = 0;
    double quantile = 0.0;
    bool consistent = false;
    bool accepted = false;
};

struct MembershipResult {
    bool accepted = false;
    std::vector<CandidateDiagnostic> per_candidate;
};

/// Confidence region for A beta as a membership predicate: t is accepted
/// iff some candidate has a consistent system with LRT statistic strictly
/// below its chi-square quantile. Const queries are thread-safe.
class RegionHandle {
public:
    RegionHandle(Dataset data, const CandidateSet& cands, LinearTarget target, double alpha)
        : data_(std::move(data)), target_(std::move(target)), alpha_(alpha) {
        if (cands.empty()) throw validation_error("candidate set is empty");
        if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("alpha must lie in (0,1)");
        if (target_.p() != data_.p()) throw validation_error("dimension mismatch: target columns differ from p");
        for (const auto& tau : cands.models()) {
            Entry e;
            e.tau = tau;
            e.fit = mle_logistic(data_, tau);
            e.rank = tau.empty() ? 0 : numerical_rank(target_.restricted(tau));
            e.quantile = e.rank > 0 ? chi2_quantile(static_cast<int>(e.rank), alpha_) : 0.0;
            entries_.push_back(std::move(e));
        }
    }

    const Dataset& data() const noexcept { return data_; }
    const LinearTarget& target() const noexcept { return target_; }
    double alpha() const noexcept { return alpha_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const SupportSet& candidate(std::size_t i) const { return entries_.at(i).tau; }
    const MleFit& unconstrained_fit(std::size_t i) const { return entries_.at(i).fit; }

    CandidateDiagnostic evaluate(std::size_t i, const Vector& t) const {
        const Entry& e = entries_.at(i);
        CandidateDiagnostic d;
        d.tau = e.tau;
        d.rank = e.rank;
        d.quantile = e.quantile;
        d.stat = lrt_stat(data_, e.tau, target_, t, e.fit);
        d.consistent = std::isfinite(d.stat);
        // rank 0 and consistent: the constraint is vacuous
        d.accepted = d.consistent && (e.rank == 0 || d.stat < e.quantile);
        return d;
    }

    bool contains(const Vector& t) const {
        check_length(t);
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (evaluate(i, t).accepted) return true;
        return false;
    }

    MembershipResult diagnose(const Vector& t, std::size_t threads = 1) const {
        check_length(t);
        MembershipResult r;
        r.per_candidate.resize(entries_.size());
        parallel_for(entries_.size(), threads, [&](std::size_t i) { r.per_candidate[i] = evaluate(i, t); });
        for (const auto& d : r.per_candidate) r.accepted = r.accepted || d.accepted;
        return r;
    }

private:
    struct Entry {
        SupportSet tau;
        MleFit fit;
        Index rank = 0;
        double quantile = 0.0;
    };

    void check_length(const Vector& t) const {
        if (t.size() != target_.q()) throw validation_error("dimension mismatch: target value length");
    }

    Dataset data_;
    LinearTarget target_;
    double alpha_;
    std::vector<Entry> entries_;
};

inline RegionHandle region_abeta(const Dataset& data, const CandidateSet& cands, const LinearTarget& a,
                                 double alpha) {
    return RegionHandle(data, cands, a, alpha);
}

struct CiOptions {
    double stat_tol = 1e-4;
    double max_width = 1e3;  // bracket expansion stops at this distance from the MLE
    std::size_t max_bisections = 200;
};

namespace detail {

// Boundary of {b : stat(b) < q} on one side of the MLE coordinate.
template <class Stat>
double profile_endpoint(const Stat& stat, double center, double dir, double step0, double q, const CiOptions& opt) {
    double inside = 0.0, step = std::min(step0, opt.max_width);
    for (;;) {
        if (!(stat(center + dir * step) < q)) break;
        inside = step;
        if (step >= opt.max_width) return center + dir * opt.max_width;
        step = std::min(2.0 * step, opt.max_width);
    }
    double lo = inside, hi = step, mid = hi;
    for (std::size_t it = 0; it < opt.max_bisections; ++it) {
        mid = 0.5 * (lo + hi);
        const double s = stat(center + dir * mid);
        if (std::abs(s - q) <= opt.stat_tol) break;
        if (s < q) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-14 * std::max(1.0, std::abs(center) + hi)) break;
    }
    return center + dir * mid;
}

}  // namespace detail

/// LRT confidence set for a single coefficient, as a union over candidates.
/// Non-augmented candidates without j contribute the point 0; augmented mode
/// adds j to every candidate first.
inline IntervalUnion ci_single_coef(const Dataset& data, const CandidateSet& cands, Index j, double alpha,
                                    bool augmented = false, const CiOptions& opt = {}) {
    if (j < 0 || j >= data.p()) throw validation_error("coefficient index out of range");
    if (cands.empty()) throw validation_error("candidate set is empty");
    if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("alpha must lie in (0,1)");
    const double q = chi2_quantile(1, alpha);
    const LinearTarget ej = LinearTarget::unit(data.p(), j);
    std::vector<IntervalUnion::Interval> raw;
    bool zero = false;
    std::vector<SupportSet> seen;
    for (const auto& model : cands.models()) {
        if (!augmented && !model.contains(j)) {
            zero = true;
            continue;
        }
        const SupportSet tau = augmented ? model.with(j) : model;
        if (std::find(seen.begin(), seen.end(), tau) != seen.end()) continue;
        seen.push_back(tau);
        const MleFit full = mle_logistic(data, tau);
        const auto pos = static_cast<Index>(*tau.position(j));
        const double center = full.coef[pos];
        double se = 1.0;
        if (full.hessian.rows() == static_cast<Index>(tau.size())) {
            const Matrix cov = full.hessian.ldlt().solve(Matrix::Identity(full.hessian.rows(), full.hessian.cols()));
            const double v = cov(pos, pos);
            if (std::isfinite(v) && v > 0.0) se = std::sqrt(v);
        }
        auto stat = [&](double b) { return lrt_stat(data, tau, ej, Vector::Constant(1, b), full); };
        if (!(stat(center) < q)) continue;  // separated fit: no finite MLE to expand around
        const double lo = detail::profile_endpoint(stat, center, -1.0, se, q, opt);
        const double hi = detail::profile_endpoint(stat, center, 1.0, se, q, opt);
        raw.emplace_back(lo, hi);
    }
    IntervalUnion u = merge_intervals(std::move(raw));
    if (zero) u.add_point_zero();
    return u;
}

inline double sigmoid(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

inline double logit(double pi) {
    if (!(pi > 0.0 && pi < 1.0)) throw validation_error("invalid probability");
    return std::log(pi / (1.0 - pi));
}

/// Region for the case probabilities sigmoid(x_new beta). Probability
/// vectors are tested through their logits.
class CaseProbRegion {
public:
    CaseProbRegion(const Dataset& data, const CandidateSet& cands, const Matrix& x_new, double alpha)
        : region_(data, cands, check_new(data, x_new), alpha) {}

    const RegionHandle& region() const noexcept { return region_; }
    Index n_new() const noexcept { return region_.target().q(); }

    Vector probabilities_at(const Vector& beta) const {
        const Vector eta = region_.target().matrix() * beta;
        return eta.unaryExpr([](double v) { return sigmoid(v); });
    }

    bool contains_probabilities(const Vector& pi) const { return region_.contains(logits(pi)); }
    MembershipResult diagnose_probabilities(const Vector& pi, std::size_t threads = 1) const {
        return region_.diagnose(logits(pi), threads);
    }

private:
    static LinearTarget check_new(const Dataset& data, const Matrix& x_new) {
        if (x_new.cols() != data.p()) throw validation_error("dimension mismatch: x_new columns differ from p");
        return LinearTarget(x_new);
    }

    Vector logits(const Vector& pi) const {
        if (pi.size() != n_new()) throw validation_error("dimension mismatch: probability vector length");
        return pi.unaryExpr([](double v) { return logit(v); });
    }

    RegionHandle region_;
};

inline CaseProbRegion region_case_probs(const Dataset& data, const CandidateSet& cands, const Matrix& x_new,
                                        double alpha) {
    return CaseProbRegion(data, cands, x_new, alpha);
}

}  // namespace repro
