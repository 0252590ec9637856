#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "repro/core.hpp"

namespace repro {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log Gamma(x) for x > 0 via the Lanczos approximation (g = 7, 9 terms).
inline double log_gamma(double x) {
    static constexpr std::array<double, 9> c{
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double pi = 3.14159265358979323846;
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.5) {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(pi / std::sin(pi * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double a = c[0];
    const double t = z + 7.5;
    for (int i = 1; i < 9; ++i) a += c[static_cast<std::size_t>(i)] / (z + i);
    return 0.91893853320467274178 + (z + 0.5) * std::log(t) - t + std::log(a);
}

/// log of the binomial coefficient C(n, k).
inline double log_binomial(double n, double k) {
    if (k < 0 || k > n) return -kInf;
    if (k == 0 || k == n) return 0.0;
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

/// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    const double log_prefix = a * std::log(x) - x - log_gamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a, sum = term;
        for (int k = 1; k < 10000; ++k) {
            term *= x / (a + k);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-17) break;
        }
        return std::min(1.0, sum * std::exp(log_prefix));
    }
    // continued fraction for Q(a,x), modified Lentz
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-17) break;
    }
    return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi2_cdf(double x, double df) { return regularized_gamma_p(0.5 * df, 0.5 * x); }

inline double chi2_pdf(double x, double df) {
    if (x <= 0.0) return 0.0;
    const double k = 0.5 * df;
    return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - log_gamma(k));
}

/// alpha-quantile of chi-squared with df degrees of freedom. Newton steps
/// kept inside a shrinking bisection bracket.
inline double chi2_quantile(int df, double alpha) {
    if (df < 1) throw validation_error("chi-squared quantile needs df >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("chi-squared quantile needs alpha in (0,1)");
    const double k = static_cast<double>(df);
    double lo = 0.0, hi = std::max(1.0, k);
    while (chi2_cdf(hi, k) < alpha) {
        lo = hi;
        hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_cdf(x, k) - alpha;
        if (f == 0.0) return x;
        if (f < 0.0) lo = x; else hi = x;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
        const double dens = chi2_pdf(x, k);
        double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-14 * std::max(1.0, x)) return next;
        x = next;
    }
    return 0.5 * (lo + hi);
}

/// A finite union of closed intervals, possibly together with the isolated
/// point 0 (the contribution of candidate models that exclude a coefficient).
class IntervalUnion {
public:
    using Interval = std::pair<double, double>;

    IntervalUnion() = default;

    const std::vector<Interval>& intervals() const noexcept { return iv_; }
    bool contains_point_zero() const noexcept { return zero_; }
    bool empty() const noexcept { return iv_.empty() && !zero_; }

    double measure() const {
        double m = 0.0;
        for (const auto& [lo, hi] : iv_) m += hi - lo;
        return m;
    }

    bool contains(double t) const {
        if (zero_ && t == 0.0) return true;
        auto it = std::upper_bound(iv_.begin(), iv_.end(), t,
                                   [](double v, const Interval& iv) { return v < iv.first; });
        if (it == iv_.begin()) return false;
        --it;
        return t <= it->second;
    }

    void add_point_zero() { zero_ = true; }

    friend IntervalUnion merge_intervals(std::vector<Interval> raw);

    IntervalUnion unite(const IntervalUnion& o) const;

private:
    std::vector<Interval> iv_;
    bool zero_ = false;
};

/// Sorted disjoint union; overlapping or touching intervals are merged.
inline IntervalUnion merge_intervals(std::vector<IntervalUnion::Interval> raw) {
    for (const auto& [lo, hi] : raw) {
        if (std::isnan(lo) || std::isnan(hi)) throw validation_error("interval endpoint is NaN");
        if (lo > hi) throw validation_error("interval with lo > hi");
    }
    std::sort(raw.begin(), raw.end());
    IntervalUnion u;
    for (const auto& iv : raw) {
        if (!u.iv_.empty() && iv.first <= u.iv_.back().second) {
            u.iv_.back().second = std::max(u.iv_.back().second, iv.second);
        } else {
            u.iv_.push_back(iv);
        }
    }
    return u;
}

inline IntervalUnion IntervalUnion::unite(const IntervalUnion& o) const {
    auto all = iv_;
    all.insert(all.end(), o.iv_.begin(), o.iv_.end());
    auto u = merge_intervals(std::move(all));
    u.zero_ = zero_ || o.zero_;
    return u;
}

/// Number of singular values above tol_scale * max(rows, cols) * sigma_max.
inline Index numerical_rank(const Matrix& a, double tol_scale = 1e-10) {
    if (a.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    const double cut = tol_scale * static_cast<double>(std::max(a.rows(), a.cols())) * s[0];
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s[i] > cut) ++r;
    return r;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (divisor n-1); zero for fewer than two values.
inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Mean and sd over replications, keyed by (scenario, method, metric).
class SummaryTable {
public:
    struct Key {
        std::string scenario, method, metric;
        friend auto operator<=>(const Key&, const Key&) = default;
    };
    struct Cell {
        double mean = 0.0;
        double sd = 0.0;
        std::size_t n = 0;
    };

    void add(const std::string& scenario, const std::string& method, const std::string& metric, double v) {
        values_[Key{scenario, method, metric}].push_back(v);
    }

    std::vector<std::pair<Key, Cell>> rows() const {
        std::vector<std::pair<Key, Cell>> out;
        for (const auto& [k, v] : values_) out.push_back({k, Cell{mean_of(v), sd_of(v), v.size()}});
        return out;
    }

    std::optional<Cell> cell(const std::string& scenario, const std::string& method, const std::string& metric) const {
        auto it = values_.find(Key{scenario, method, metric});
        if (it == values_.end()) return std::nullopt;
        return Cell{mean_of(it->second), sd_of(it->second), it->second.size()};
    }

    bool empty() const noexcept { return values_.empty(); }

private:
    std::map<Key, std::vector<double>> values_;
};

}  // namespace repro
