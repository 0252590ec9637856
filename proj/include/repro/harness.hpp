#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "repro/candidate.hpp"
#include "repro/coef_inference.hpp"
#include "repro/core.hpp"
#include "repro/csv.hpp"
#include "repro/json_io.hpp"
#include "repro/model_confidence.hpp"
#include "repro/parallel.hpp"
#include "repro/rng.hpp"
#include "repro/sampler.hpp"
#include "repro/stats.hpp"

namespace repro {

struct Scenario {
    std::string name;
    Index n = 0;
    Index p = 0;
    std::size_t d = 100;
    std::size_t m = 100;
    Vector beta_nonzero;
    double rho = 0.2;      // training design
    double rho_new = 0.3;  // new observations
    Index n_new = 2;
    std::size_t replications = 1;
    double alpha = 0.95;
    bool augmented = false;  // also report augmented single-coefficient sets

    Index s() const noexcept { return beta_nonzero.size(); }

    void validate() const {
        if (name.empty()) throw validation_error("scenario needs a name");
        if (n < 2 || p < 1) throw validation_error("scenario needs n >= 2 and p >= 1");
        if (s() > p) throw validation_error("scenario has s > p");
        if (!beta_nonzero.allFinite()) throw validation_error("non-finite true coefficient");
        if (d < 1 || m < 1 || replications < 1) throw validation_error("d, m and replications must be at least 1");
        if (n_new < 1) throw validation_error("n_new must be at least 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("alpha must lie in (0,1)");
        if (!(std::abs(rho) < 1.0 && std::abs(rho_new) < 1.0)) throw validation_error("AR parameter must lie in (-1,1)");
    }

    ThetaPoint truth() const { return ThetaPoint(SupportSet::first_k(s()), beta_nonzero); }
};

inline Vector coef_list(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

/// Scaled presets end in "s"; the others use the full published sizes.
inline bool is_full_preset(const std::string& name) { return !name.empty() && name.back() != 's'; }

inline std::vector<std::string> preset_names() {
    return {"M1s", "M2s", "M3s", "M4s", "M5s", "M1", "M2", "M3", "M4", "M5"};
}

inline Scenario preset(const std::string& name) {
    Scenario sc;
    sc.name = name;
    const auto strong = coef_list({5, 4, 3, 2});
    const auto weaker = coef_list({5, 4, 3, 1});
    const auto weak = coef_list({5, 4, 3, 1, 0.5, 0.2});
    auto set = [&](Index n, Index p, std::size_t d, const Vector& b, std::size_t reps) {
        sc.n = n;
        sc.p = p;
        sc.d = d;
        sc.beta_nonzero = b;
        sc.replications = reps;
    };
    if (name == "M1") set(400, 1000, 4000, strong, 100);
    else if (name == "M2") set(500, 1000, 2000, strong, 100);
    else if (name == "M3") set(700, 1000, 10000, weaker, 100);
    else if (name == "M4") set(900, 1000, 10000, weaker, 100);
    else if (name == "M5") set(300, 500, 10000, weak, 100);
    else if (name == "M1s") set(240, 150, 100, strong, 50);
    else if (name == "M2s") set(300, 150, 100, strong, 50);
    else if (name == "M3s") set(420, 150, 100, weaker, 50);
    else if (name == "M4s") set(540, 150, 100, weaker, 50);
    else if (name == "M5s") set(300, 150, 100, weak, 50);
    else throw validation_error("unknown scenario '" + name + "'");
    sc.augmented = name == "M5" || name == "M5s";
    return sc;
}

struct HarnessOptions {
    std::vector<std::string> methods{"repro-logistic", "repro-hinge", "oracle"};
    bool all_j = false;            // single-coefficient sets for every noise index
    std::size_t noise_indices = 20;
    bool full_rank_case = true;    // compare the case-probability test at n_new = p + 10 with the joint test
    bool write_files = true;
    CandidateOptions candidate;
    SelectorOptions selector;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<Json> records;  // ordered by replication
    SummaryTable summary;
};

inline std::vector<Index> sample_noise_indices(std::uint64_t rep_seed, Index s, Index p, std::size_t count) {
    std::vector<Index> pool;
    for (Index j = s; j < p; ++j) pool.push_back(j);
    RngStream rng(rep_seed, streams::index_sample);
    const std::size_t k = std::min(count, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t r = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[r]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

namespace detail {

struct CoefSummary {
    double cov_signal = 0, len_signal = 0, cov_noise = 0, len_noise = 0;
    Json detail = Json::array();
};

inline CoefSummary coef_sets(const Dataset& data, const CandidateSet& cands, const ThetaPoint& truth,
                             const std::vector<Index>& noise, double alpha, bool augmented) {
    CoefSummary out;
    const Vector beta = truth.dense(data.p());
    std::size_t ns = 0, nn = 0;
    auto one = [&](Index j, bool signal) {
        const IntervalUnion u = ci_single_coef(data, cands, j, alpha, augmented);
        const bool cov = u.contains(beta[j]);
        (signal ? out.cov_signal : out.cov_noise) += cov ? 1.0 : 0.0;
        (signal ? out.len_signal : out.len_noise) += u.measure();
        ++(signal ? ns : nn);
        Json d = to_json(u);
        d["j"] = j;
        d["covered"] = cov;
        out.detail.push_back(std::move(d));
    };
    for (Index j : truth.support) one(j, true);
    for (Index j : noise) one(j, false);
    if (ns) out.cov_signal /= static_cast<double>(ns), out.len_signal /= static_cast<double>(ns);
    if (nn) out.cov_noise /= static_cast<double>(nn), out.len_noise /= static_cast<double>(nn);
    return out;
}

inline Vector sigmoid_of(const Vector& eta) { return eta.unaryExpr([](double v) { return sigmoid(v); }); }

struct ReplicationInputs {
    SimulatedData sim;
    Matrix x_new;
    Matrix x_full;
    std::vector<Index> noise;
    std::uint64_t rep_seed = 0;
};

// Region-based metrics shared by every method once its candidate set exists.
inline void region_metrics(const ReplicationInputs& in, const CandidateSet& cands, double alpha, bool augmented,
                           bool full_rank, Json& metrics, Json& details) {
    const Dataset& data = in.sim.data;
    const ThetaPoint& truth = in.sim.truth;
    const Vector beta = truth.dense(data.p());
    auto cs = coef_sets(data, cands, truth, in.noise, alpha, false);
    metrics["coef_coverage_signal"] = cs.cov_signal;
    metrics["coef_length_signal"] = cs.len_signal;
    if (!in.noise.empty()) {
        metrics["coef_coverage_noise"] = cs.cov_noise;
        metrics["coef_length_noise"] = cs.len_noise;
    }
    details["coef"] = std::move(cs.detail);
    if (augmented) {
        auto as = coef_sets(data, cands, truth, in.noise, alpha, true);
        metrics["aug_coef_coverage_signal"] = as.cov_signal;
        metrics["aug_coef_length_signal"] = as.len_signal;
        if (!in.noise.empty()) {
            metrics["aug_coef_coverage_noise"] = as.cov_noise;
            metrics["aug_coef_length_noise"] = as.len_noise;
        }
        details["aug_coef"] = std::move(as.detail);
    }
    const RegionHandle joint = region_abeta(data, cands, LinearTarget::identity(data.p()), alpha);
    const bool joint_in = joint.contains(beta);
    metrics["joint_coverage"] = joint_in ? 1.0 : 0.0;
    const CaseProbRegion cp = region_case_probs(data, cands, in.x_new, alpha);
    metrics["case_coverage"] = cp.contains_probabilities(sigmoid_of(in.x_new * beta)) ? 1.0 : 0.0;
    if (full_rank) {
        const CaseProbRegion full = region_case_probs(data, cands, in.x_full, alpha);
        const bool full_in = full.region().contains(in.x_full * beta);
        metrics["case_full_rank_agree"] = full_in == joint_in ? 1.0 : 0.0;
    }
}

}  // namespace detail

/// One replication of a scenario; the record holds scalar metrics per method
/// plus the selected models and interval details.
inline Json run_replication(const Scenario& sc, const InferenceConfig& base, std::size_t r,
                            const HarnessOptions& opt) {
    detail::ReplicationInputs in;
    in.rep_seed = derive_seed(base.seed, r);
    in.sim = simulate_logistic(in.rep_seed, sc.n, sc.p, sc.truth(), sc.rho);
    in.x_new = draw_ar_gaussian(RngStream(in.rep_seed, streams::new_design), sc.n_new, sc.p, sc.rho_new);
    if (opt.full_rank_case)
        in.x_full = draw_ar_gaussian(RngStream(in.rep_seed, streams::new_design_full), sc.p + 10, sc.p, sc.rho_new);
    if (opt.all_j) {
        for (Index j = sc.s(); j < sc.p; ++j) in.noise.push_back(j);
    } else {
        in.noise = sample_noise_indices(in.rep_seed, sc.s(), sc.p, opt.noise_indices);
    }
    const Dataset& data = in.sim.data;
    const SupportSet tau0 = in.sim.truth.support;

    Json rec;
    rec["scenario"] = sc.name;
    rec["seed"] = base.seed;
    rec["r"] = r;
    rec["rep_seed"] = in.rep_seed;
    rec["n"] = sc.n;
    rec["p"] = sc.p;
    rec["positives"] = data.y().sum();
    rec["noise_indices"] = in.noise;
    Json methods = Json::object();
    for (const auto& method : opt.methods) {
        Json metrics = Json::object(), details = Json::object();
        CandidateSet cands;
        if (method == "oracle") {
            cands.add(tau0, std::nullopt);
            // with the true support known, noise coefficients are tested under tau0 + {j}
            auto cs = detail::coef_sets(data, cands, in.sim.truth, in.noise, sc.alpha, true);
            detail::region_metrics(in, cands, sc.alpha, false, opt.full_rank_case, metrics, details);
            metrics["coef_coverage_signal"] = cs.cov_signal;
            metrics["coef_length_signal"] = cs.len_signal;
            if (!in.noise.empty()) {
                metrics["coef_coverage_noise"] = cs.cov_noise;
                metrics["coef_length_noise"] = cs.len_noise;
            }
            details["coef"] = std::move(cs.detail);
        } else if (method == "repro-logistic" || method == "repro-hinge") {
            InferenceConfig c = base;
            c.loss = method == "repro-logistic" ? Loss::logistic : Loss::hinge;
            c.seed = in.rep_seed;
            c.alpha = sc.alpha;
            c.d = sc.d;
            c.m = sc.m;
            c.threads = 1;
            cands = build_candidate_set(data, c, EbicConfig{}, opt.candidate);
            metrics["candidate_coverage"] = cands.contains(tau0) ? 1.0 : 0.0;
            metrics["candidate_cardinality"] = static_cast<double>(cands.size());
            metrics["failed_draws"] = static_cast<double>(cands.failed_draws);
            const auto mcs = model_confidence_set(data, cands, c, opt.selector);
            bool within = true, covered = false;
            for (const auto& g : mcs.models) {
                within = within && cands.contains(g);
                covered = covered || g == tau0;
            }
            metrics["confidence_coverage"] = covered ? 1.0 : 0.0;
            metrics["confidence_cardinality"] = static_cast<double>(mcs.models.size());
            metrics["confidence_within_candidates"] = within ? 1.0 : 0.0;
            Json cj = Json::array();
            for (std::size_t i = 0; i < cands.size(); ++i)
                cj.push_back({{"tau", to_json(cands.models()[i])},
                              {"t_hat", mcs.reports[i].t_hat},
                              {"kept", mcs.reports[i].t_hat < c.alpha}});
            details["candidates"] = std::move(cj);
            detail::region_metrics(in, cands, sc.alpha, sc.augmented, opt.full_rank_case, metrics, details);
        } else {
            throw validation_error("unknown method '" + method + "'");
        }
        methods[method] = {{"metrics", std::move(metrics)}, {"details", std::move(details)}};
    }
    rec["methods"] = std::move(methods);
    return rec;
}

inline SummaryTable summarize(const std::vector<Json>& records) {
    SummaryTable t;
    for (const auto& rec : records) {
        const std::string sc = rec.at("scenario").get<std::string>();
        for (const auto& [method, body] : rec.at("methods").items())
            for (const auto& [metric, v] : body.at("metrics").items()) t.add(sc, method, metric, v.get<double>());
    }
    return t;
}

namespace detail {

using RecordKey = std::tuple<std::string, std::uint64_t, std::size_t>;

inline RecordKey key_of(const Json& rec) {
    return {rec.at("scenario").get<std::string>(), rec.at("seed").get<std::uint64_t>(), rec.at("r").get<std::size_t>()};
}

// Complete records already on disk. A trailing partial line from an
// interrupted run is dropped and the file rewritten without it.
inline std::vector<Json> load_records(const std::filesystem::path& file) {
    std::vector<Json> out;
    if (!std::filesystem::exists(file)) return out;
    const std::string text = read_text_file(file.string());
    std::istringstream in(text);
    std::string line, kept;
    bool dropped = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("scenario") || !j.contains("seed") || !j.contains("r")) {
            dropped = true;
            continue;
        }
        kept += line + '\n';
        out.push_back(std::move(j));
    }
    if (dropped || (!text.empty() && text.back() != '\n')) write_text_file(file.string(), kept);
    return out;
}

}  // namespace detail

inline std::string report_tables(const SummaryTable& t, const std::string& style);

/// Runs every replication not yet recorded in out_dir/records.jsonl,
/// appending records in replication order, then writes summary.csv.
inline RunReport run_scenario(const Scenario& sc, const InferenceConfig& config, const std::string& out_dir,
                              const HarnessOptions& opt = {}) {
    sc.validate();
    config.validate();
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    const fs::path rec_file = dir / "records.jsonl";
    std::vector<Json> existing;
    if (opt.write_files) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw io_error("cannot create output directory " + out_dir);
        existing = detail::load_records(rec_file);
    }
    std::set<detail::RecordKey> done;
    std::map<std::size_t, Json> mine;
    for (const auto& rec : existing) {
        const auto key = detail::key_of(rec);
        if (std::get<0>(key) == sc.name && std::get<1>(key) == config.seed && std::get<2>(key) < sc.replications) {
            done.insert(key);
            mine.emplace(std::get<2>(key), rec);
        }
    }
    std::vector<std::size_t> todo;
    for (std::size_t r = 0; r < sc.replications; ++r)
        if (!done.count({sc.name, config.seed, r})) todo.push_back(r);

    std::ofstream out;
    if (opt.write_files && !todo.empty()) {
        out.open(rec_file, std::ios::app | std::ios::binary);
        if (!out) throw io_error("cannot write " + rec_file.string());
    }
    // single writer: records are flushed strictly in replication order
    std::mutex mu;
    std::vector<std::optional<Json>> slots(todo.size());
    std::size_t next_write = 0;
    parallel_for(todo.size(), config.threads, [&](std::size_t i) {
        Json rec = run_replication(sc, config, todo[i], opt);
        std::lock_guard<std::mutex> lock(mu);
        slots[i] = std::move(rec);
        while (next_write < slots.size() && slots[next_write]) {
            if (out.is_open()) {
                out << json_line(*slots[next_write]);
                out.flush();
                if (!out) throw io_error("write failure on " + rec_file.string());
            }
            ++next_write;
        }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) mine.emplace(todo[i], std::move(*slots[i]));

    RunReport rep;
    rep.scenario = sc.name;
    rep.seed = config.seed;
    for (auto& [r, rec] : mine) rep.records.push_back(std::move(rec));
    rep.summary = summarize(rep.records);
    if (opt.write_files) write_text_file((dir / "summary.csv").string(), report_tables(rep.summary, "csv"));
    return rep;
}

/// Summary rendered as csv (scenario,method,metric,mean,std,n_reps), a
/// json array, or a markdown table of mean(std) cells per method and metric.
inline std::string report_tables(const SummaryTable& t, const std::string& style) {
    if (t.empty()) throw validation_error("empty report");
    const auto rows = t.rows();
    if (style == "csv") {
        std::string s = "scenario,method,metric,mean,std,n_reps\n";
        for (const auto& [k, c] : rows)
            s += csv_quote(k.scenario) + ',' + csv_quote(k.method) + ',' + csv_quote(k.metric) + ',' +
                 format_double(c.mean) + ',' + format_double(c.sd) + ',' + std::to_string(c.n) + '\n';
        return s;
    }
    if (style == "json") {
        Json a = Json::array();
        for (const auto& [k, c] : rows)
            a.push_back({{"scenario", k.scenario}, {"method", k.method}, {"metric", k.metric},
                         {"mean", c.mean}, {"std", c.sd}, {"n_reps", c.n}});
        return a.dump(2) + '\n';
    }
    if (style == "markdown") {
        std::vector<std::string> metrics;
        std::map<std::pair<std::string, std::string>, std::map<std::string, SummaryTable::Cell>> grid;
        for (const auto& [k, c] : rows) {
            if (std::find(metrics.begin(), metrics.end(), k.metric) == metrics.end()) metrics.push_back(k.metric);
            grid[{k.scenario, k.method}][k.metric] = c;
        }
        std::sort(metrics.begin(), metrics.end());
        std::ostringstream s;
        s << "| scenario | method |";
        for (const auto& m : metrics) s << ' ' << m << " |";
        s << "\n|---|---|";
        for (std::size_t i = 0; i < metrics.size(); ++i) s << "---|";
        s << '\n';
        s << std::fixed << std::setprecision(3);
        for (const auto& [key, cells] : grid) {
            s << "| " << key.first << " | " << key.second << " |";
            for (const auto& m : metrics) {
                auto it = cells.find(m);
                if (it == cells.end()) s << "  |";
                else s << ' ' << it->second.mean << '(' << it->second.sd << ") |";
            }
            s << '\n';
        }
        return s.str();
    }
    throw validation_error("unknown report style '" + style + "'");
}

inline std::string report_tables(const RunReport& r, const std::string& style) {
    return report_tables(r.summary, style);
}

}  // namespace repro
