#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "repro/core.hpp"

namespace repro {

struct NelderMeadOptions {
    std::size_t max_evals = 200;
    double initial_step = 0.1;  // relative to max(1, |x_k|)
    double f_tol = 0.0;         // stop when the simplex spread falls below this
};

struct NelderMeadResult {
    Vector x;
    double value = 0.0;
    std::size_t evaluations = 0;
};

/// Derivative-free simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). The best point
/// ever evaluated is returned, so the result never exceeds f(x0).
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                                    const NelderMeadOptions& opt = {}) {
    const Index k = x0.size();
    NelderMeadResult best{x0, 0.0, 0};
    auto eval = [&](const Vector& x) {
        const double v = f(x);
        ++best.evaluations;
        if (best.evaluations == 1 || v < best.value) {
            best.value = v;
            best.x = x;
        }
        return v;
    };
    const double f0 = eval(x0);
    if (k == 0 || opt.max_evals <= 1) return best;

    std::vector<Vector> pts{x0};
    std::vector<double> vals{f0};
    for (Index i = 0; i < k && best.evaluations < opt.max_evals; ++i) {
        Vector x = x0;
        x[i] += opt.initial_step * std::max(1.0, std::abs(x0[i]));
        pts.push_back(x);
        vals.push_back(eval(x));
    }
    if (static_cast<Index>(pts.size()) < k + 1) return best;

    std::vector<std::size_t> order(pts.size());
    while (best.evaluations < opt.max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t lo = order.front(), hi = order.back(), nh = order[order.size() - 2];
        if (vals[hi] - vals[lo] <= opt.f_tol && opt.f_tol > 0.0) break;
        Vector centroid = Vector::Zero(k);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
        centroid /= static_cast<double>(k);

        const Vector xr = centroid + (centroid - pts[hi]);
        const double fr = eval(xr);
        if (fr < vals[lo]) {
            if (best.evaluations >= opt.max_evals) break;
            const Vector xe = centroid + 2.0 * (centroid - pts[hi]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[hi] = xe;
                vals[hi] = fe;
            } else {
                pts[hi] = xr;
                vals[hi] = fr;
            }
            continue;
        }
        if (fr < vals[nh]) {
            pts[hi] = xr;
            vals[hi] = fr;
            continue;
        }
        if (best.evaluations >= opt.max_evals) break;
        const bool outside = fr < vals[hi];
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[hi] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[hi])) {
            pts[hi] = xc;
            vals[hi] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size() && best.evaluations < opt.max_evals; ++i) {
            if (i == lo) continue;
            pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
            vals[i] = eval(pts[i]);
        }
    }
    return best;
}

}  // namespace repro
