#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "repro/candidate.hpp"
#include "repro/core.hpp"
#include "repro/lasso.hpp"
#include "repro/mle.hpp"
#include "repro/nelder_mead.hpp"
#include "repro/parallel.hpp"
#include "repro/rng.hpp"
#include "repro/sampler.hpp"

namespace repro {

struct SelectorOptions {
    PathOptions path;
    /// The path is cut once its support exceeds k + slack; later points
    /// rarely shrink back to size <= k.
    std::size_t support_slack = 3;
};

/// Largest lasso-path model with at most k columns (ties: larger lambda).
/// Degenerate labels give the empty model.
inline SupportSet model_selector_tilde_tau(const Matrix& x, const Eigen::VectorXi& y, std::size_t k,
                                           const SelectorOptions& opt = {}) {
    if (k == 0) return {};
    const auto ones = y.sum();
    if (ones == 0 || ones == y.size()) return {};
    PathOptions po = opt.path;
    po.stop_above_support = k + opt.support_slack;
    return support_at_cardinality(logistic_lasso_path(x, y, po), k);
}

/// The m synthetic noise vectors shared by every candidate model and every
/// profile iteration (common random numbers). Column j is stream
/// nuclear_base + j.
class NoiseBank {
public:
    NoiseBank(std::uint64_t seed, Index n, std::size_t m) : e_(n, static_cast<Index>(m)) {
        if (m < 1) throw validation_error("m must be at least 1");
        for (std::size_t j = 0; j < m; ++j)
            e_.col(static_cast<Index>(j)) = draw_logistic(RngStream(seed, streams::nuclear_base + j), n);
    }

    std::size_t m() const noexcept { return static_cast<std::size_t>(e_.cols()); }
    Index n() const noexcept { return e_.rows(); }
    Vector draw(std::size_t j) const { return e_.col(static_cast<Index>(j)); }

private:
    Matrix e_;
};

struct NuclearReport {
    SupportSet tau;
    double t_hat = 0.0;
    ThetaPoint beta_used;
    SupportSet tilde_tau_obs;
    std::map<SupportSet, std::size_t> frequency;
    BetaMode mode = BetaMode::mle;
    bool separated = false;
    std::size_t evaluations = 1;
};

struct NuclearOptions {
    SelectorOptions selector;
    std::size_t threads = 1;
};

/// Monte-Carlo nuclear statistic at one theta: the share of synthetic draws
/// whose selected model is strictly more frequent than the model selected
/// on the observed labels.
inline NuclearReport nuclear_stat(const Dataset& data, const ThetaPoint& theta, const NoiseBank& bank,
                                  const NuclearOptions& opt = {},
                                  const std::optional<SupportSet>& tilde_obs = std::nullopt) {
    if (bank.n() != data.n()) throw validation_error("dimension mismatch: noise bank rows");
    theta.support.check_range(data.p());
    const std::size_t m = bank.m();
    const std::size_t k = theta.support.size();
    NuclearReport rep;
    rep.tau = theta.support;
    rep.beta_used = theta;
    rep.tilde_tau_obs = tilde_obs ? *tilde_obs : model_selector_tilde_tau(data.x(), data.y(), k, opt.selector);
    std::vector<SupportSet> sel(m);
    if (k > 0) {
        parallel_for(m, opt.threads, [&](std::size_t j) {
            const auto ystar = synth_response(data.x(), theta, bank.draw(j));
            sel[j] = model_selector_tilde_tau(data.x(), ystar, k, opt.selector);
        });
    }
    for (const auto& s : sel) ++rep.frequency[s];
    const auto it = rep.frequency.find(rep.tilde_tau_obs);
    const std::size_t obs_count = it == rep.frequency.end() ? 0 : it->second;
    std::size_t above = 0;
    for (const auto& s : sel)
        if (rep.frequency.at(s) > obs_count) ++above;
    rep.t_hat = static_cast<double>(above) / static_cast<double>(m);
    return rep;
}

inline NuclearReport nuclear_stat(const Dataset& data, const ThetaPoint& theta, std::size_t m, std::uint64_t seed,
                                  const NuclearOptions& opt = {}) {
    return nuclear_stat(data, theta, NoiseBank(seed, data.n(), m), opt);
}

struct ModelConfidenceResult {
    std::vector<SupportSet> models;
    std::vector<NuclearReport> reports;  // one per candidate, in candidate order
};

/// Keeps each candidate whose nuclear statistic is below alpha. beta comes
/// from the MLE on the candidate, or from a bounded simplex search that
/// minimizes the statistic starting at the MLE.
inline ModelConfidenceResult model_confidence_set(const Dataset& data, const CandidateSet& cands,
                                                  const InferenceConfig& config, const SelectorOptions& sel = {}) {
    if (cands.empty()) throw validation_error("candidate set is empty");
    if (config.m < 1) throw validation_error("m must be at least 1");
    const NoiseBank bank(config.seed, data.n(), config.m);
    NuclearOptions nopt{sel, config.threads};
    std::map<std::size_t, SupportSet> obs_cache;
    ModelConfidenceResult out;
    for (const auto& tau : cands.models()) {
        const std::size_t k = tau.size();
        auto oc = obs_cache.find(k);
        if (oc == obs_cache.end())
            oc = obs_cache.emplace(k, model_selector_tilde_tau(data.x(), data.y(), k, sel)).first;
        const MleFit mle = mle_logistic(data, tau);
        Vector coef = mle.coef;
        if (!coef.allFinite()) coef = Vector::Zero(static_cast<Index>(k));
        NuclearReport rep = nuclear_stat(data, ThetaPoint(tau, coef), bank, nopt, oc->second);
        rep.separated = mle.separated;
        rep.mode = config.beta_mode;
        if (config.beta_mode == BetaMode::profile && k > 0 && rep.t_hat > 0.0) {
            NelderMeadOptions nm;
            nm.max_evals = config.profile_max_evals;
            std::optional<NuclearReport> best;
            auto objective = [&](const Vector& b) {
                if (!b.allFinite()) return kInf;
                NuclearReport r = nuclear_stat(data, ThetaPoint(tau, b), bank, nopt, oc->second);
                const double v = r.t_hat;
                if (!best || v < best->t_hat) best = std::move(r);
                return v;
            };
            const auto res = nelder_mead(objective, coef, nm);
            if (best && best->t_hat < rep.t_hat) {
                best->separated = mle.separated;
                best->mode = BetaMode::profile;
                rep = std::move(*best);
            }
            rep.evaluations = res.evaluations;
        }
        if (rep.t_hat < config.alpha) out.models.push_back(tau);
        out.reports.push_back(std::move(rep));
    }
    return out;
}

}  // namespace repro
