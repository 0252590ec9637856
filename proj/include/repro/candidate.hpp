#pragma once

#include <cmath>
#include <vector>

#include "repro/core.hpp"
#include "repro/joint.hpp"
#include "repro/parallel.hpp"
#include "repro/rng.hpp"
#include "repro/sampler.hpp"
#include "repro/stats.hpp"

namespace repro {

struct EbicConfig {
    std::vector<double> xi_grid{0.0, 0.25, 0.5, 0.75, 1.0};

    void validate() const {
        if (xi_grid.empty()) throw validation_error("xi grid is empty");
        for (double xi : xi_grid)
            if (!(xi >= 0.0 && xi <= 1.0)) throw validation_error("xi must lie in [0,1]");
    }
};

/// 2 * loss + |support| log n + 2 xi log C(p, |support|); lower is better.
inline double ebic_score(const Dataset& data, const JointFit& fit, const Vector& eps, double xi, Loss loss) {
    const double k = static_cast<double>(fit.support().size());
    const double lsum = joint_loss_sum(loss, joint_margins(data, eps, fit.beta, fit.sigma));
    return 2.0 * lsum + k * std::log(static_cast<double>(data.n())) +
           2.0 * xi * log_binomial(static_cast<double>(data.p()), k);
}

struct CandidateOptions {
    SweepOptions sweep;
    /// Fit the ridge pilot even when its norm only rescales the lambda grid
    /// (global weights). Per-coordinate weights always fit it.
    bool force_pilot = false;
    RidgeOptions ridge;
};

/// Models selected from one repro draw, one per xi (in grid order).
struct DrawSelection {
    std::vector<SupportSet> per_xi;
    bool failed = false;
};

inline Vector repro_noise(std::uint64_t seed, std::size_t draw, Index n) {
    return draw_logistic(RngStream(seed, streams::candidate_base + draw), n);
}

/// Pilot, adaptive sweep and EBIC choice for draw j. Only sweep points whose
/// support fits under the cap are eligible.
inline DrawSelection select_for_draw(const Dataset& data, const InferenceConfig& config, const EbicConfig& ebic,
                                     const CandidateOptions& opt, std::size_t draw) {
    const Index n = data.n(), p = data.p();
    const std::size_t cap = config.support_cap(n, p);
    const Vector eps = repro_noise(config.seed, draw, n);
    Vector weights;
    if (config.adaptive_weights == AdaptiveWeights::per_coordinate || opt.force_pilot) {
        RidgeOptions ro = opt.ridge;
        ro.fold_seed = derive_seed(config.seed, draw);
        const RidgeFit pilot = fit_ridge_joint(data, eps, config.loss, ro);
        weights = adaptive_penalty_weights(pilot.fit.beta, config.adaptive_weights, config.unpenalized);
    } else {
        weights = Vector::Ones(p);
        for (Index j : config.unpenalized) {
            if (j < 0 || j >= p) throw validation_error("unpenalized index out of range");
            weights[j] = 0.0;
        }
    }
    SweepOptions so = opt.sweep;
    so.stop_above_support = cap;
    const auto path = adaptive_joint_sweep(data, eps, config.loss, weights, so);

    DrawSelection out;
    const double logn = std::log(static_cast<double>(n));
    std::vector<double> loss2(path.size());
    std::vector<SupportSet> supp(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        supp[k] = path[k].support();
        loss2[k] = 2.0 * joint_loss_sum(config.loss, joint_margins(data, eps, path[k].beta, path[k].sigma));
    }
    for (double xi : ebic.xi_grid) {
        double best = kInf;
        std::size_t arg = path.size();
        for (std::size_t k = 0; k < path.size(); ++k) {
            if (supp[k].size() > cap) continue;
            const double sz = static_cast<double>(supp[k].size());
            const double score = loss2[k] + sz * logn + 2.0 * xi * log_binomial(static_cast<double>(p), sz);
            if (score < best) {
                best = score;
                arg = k;
            }
        }
        if (arg < path.size()) out.per_xi.push_back(supp[arg]);
    }
    return out;
}

/// Candidate set from config.d repro draws. Draws run in parallel and are
/// merged in draw order, then in xi order.
inline CandidateSet build_candidate_set(const Dataset& data, const InferenceConfig& config,
                                        const EbicConfig& ebic = {}, const CandidateOptions& opt = {}) {
    if (config.d < 1) throw validation_error("d must be at least 1");
    ebic.validate();
    std::vector<DrawSelection> sel(config.d);
    parallel_for(config.d, config.threads, [&](std::size_t j) {
        try {
            sel[j] = select_for_draw(data, config, ebic, opt, j);
        } catch (const std::exception&) {
            sel[j].failed = true;
        }
    });
    CandidateSet cands;
    for (std::size_t j = 0; j < config.d; ++j) {
        if (sel[j].failed) {
            ++cands.failed_draws;
            continue;
        }
        for (std::size_t k = 0; k < sel[j].per_xi.size(); ++k)
            cands.add(sel[j].per_xi[k], Provenance{j, ebic.xi_grid[k]});
    }
    if (cands.failed_draws == config.d) throw numeric_error("every repro draw failed");
    return cands;
}

}  // namespace repro
