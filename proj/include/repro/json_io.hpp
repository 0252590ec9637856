#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "repro/coef_inference.hpp"
#include "repro/core.hpp"
#include "repro/model_confidence.hpp"
#include "repro/stats.hpp"

namespace repro {

using Json = nlohmann::json;

inline Json to_json(const SupportSet& s) { return Json(s.indices()); }

inline Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

/// {"intervals": [[lo,hi],...], "point_zero": bool, "measure": m}
inline Json to_json(const IntervalUnion& u) {
    Json iv = Json::array();
    for (const auto& [lo, hi] : u.intervals()) iv.push_back({lo, hi});
    return {{"intervals", iv}, {"point_zero", u.contains_point_zero()}, {"measure", u.measure()}};
}

inline Json to_json(const CandidateDiagnostic& d) {
    return {{"tau", to_json(d.tau)},
            {"stat", std::isfinite(d.stat) ? Json(d.stat) : Json("inf")},
            {"rank", d.rank},
            {"quantile", d.quantile},
            {"consistent", d.consistent},
            {"accepted", d.accepted}};
}

inline Json to_json(const MembershipResult& r) {
    Json per = Json::array();
    for (const auto& d : r.per_candidate) per.push_back(to_json(d));
    return {{"accepted", r.accepted}, {"candidates", per}};
}

inline Json to_json(const NuclearReport& r) {
    Json freq = Json::array();
    for (const auto& [s, c] : r.frequency) freq.push_back({{"model", to_json(s)}, {"count", c}});
    return {{"tau", to_json(r.tau)},
            {"t_hat", r.t_hat},
            {"beta", to_json(r.beta_used.coef)},
            {"selected_observed", to_json(r.tilde_tau_obs)},
            {"frequency", freq},
            {"beta_mode", to_string(r.mode)},
            {"separated", r.separated},
            {"evaluations", r.evaluations}};
}

inline Json provenance_json(const std::vector<Provenance>& pv) {
    Json a = Json::array();
    for (const auto& p : pv) a.push_back({{"draw", p.draw}, {"xi", p.xi}});
    return a;
}

inline Json to_json(const CandidateSet& c) {
    Json models = Json::array(), prov = Json::array();
    for (std::size_t i = 0; i < c.size(); ++i) {
        models.push_back(to_json(c.models()[i]));
        prov.push_back(provenance_json(c.provenance()[i]));
    }
    return {{"models", models}, {"provenance", prov}, {"failed_draws", c.failed_draws}};
}

/// One compact line per record.
inline std::string json_line(const Json& j) { return j.dump() + '\n'; }

}  // namespace repro
