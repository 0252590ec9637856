#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "repro/repro.hpp"

using namespace repro;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    double alpha = 0.95;
    std::string loss = "logistic";
    std::optional<std::size_t> d;
    std::optional<std::size_t> m;
    std::string beta_mode = "mle";
    std::size_t threads = 1;
    std::string out;
};

// Where the dataset comes from: a labelled CSV or one simulated replication.
struct DataSource {
    std::string csv;
    std::string label = "y";
    std::string scenario = "M2s";
    std::size_t rep = 0;
    bool full = false;
};

Scenario checked_preset(const std::string& name, bool full) {
    if (is_full_preset(name) && !full) throw validation_error("full-size scenario '" + name + "' needs --full");
    return preset(name);
}

struct Loaded {
    Dataset data;
    std::optional<SimulatedData> sim;
    std::uint64_t rep_seed = 0;
    Scenario scenario;
};

Loaded load_data(const DataSource& src, const Globals& g) {
    Loaded l;
    if (!src.csv.empty()) {
        l.data = read_dataset_csv(src.csv, src.label);
        return l;
    }
    l.scenario = checked_preset(src.scenario, src.full);
    l.rep_seed = derive_seed(g.seed, src.rep);
    l.sim = simulate_logistic(l.rep_seed, l.scenario.n, l.scenario.p, l.scenario.truth(), l.scenario.rho);
    l.data = l.sim->data;
    return l;
}

InferenceConfig make_config(const Globals& g, const Loaded& l) {
    InferenceConfig c;
    c.alpha = g.alpha;
    c.loss = parse_loss(g.loss);
    c.beta_mode = parse_beta_mode(g.beta_mode);
    c.threads = g.threads;
    c.seed = l.sim ? l.rep_seed : g.seed;
    if (l.sim) {
        c.d = l.scenario.d;
        c.m = l.scenario.m;
    }
    if (g.d) c.d = *g.d;
    if (g.m) c.m = *g.m;
    c.validate();
    return c;
}

class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw io_error("cannot write " + path);
        }
    }
    void line(const Json& j) {
        std::ostream& os = file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout;
        os << json_line(j);
        if (!os) throw io_error("write failure");
    }

private:
    std::ofstream file_;
};

void add_source(CLI::App* sub, DataSource& src) {
    sub->add_option("--data", src.csv, "labelled CSV input");
    sub->add_option("--label", src.label, "label column name")->capture_default_str();
    sub->add_option("--scenario", src.scenario, "simulate data from this preset instead")->capture_default_str();
    sub->add_option("--rep", src.rep, "replication index for simulated data")->capture_default_str();
    sub->add_flag("--full", src.full, "allow full-size presets");
}

int run(int argc, char** argv) {
    CLI::App app{"Repro-samples inference for sparse logistic models"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--alpha", g.alpha, "confidence level")->capture_default_str();
    app.add_option("--loss", g.loss, "candidate loss")->check(CLI::IsMember({"logistic", "hinge"}))->capture_default_str();
    app.add_option("--d", g.d, "number of repro draws");
    app.add_option("--m", g.m, "Monte-Carlo draws for the nuclear statistic");
    app.add_option("--beta-mode", g.beta_mode, "coefficient for synthetic labels")
        ->check(CLI::IsMember({"mle", "profile"}))
        ->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", g.out, "output path ('-' or empty for stdout; a directory for simulate)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a scenario and write records plus a summary");
    std::string sc_name = "M2s", style = "markdown", dump;
    std::optional<std::size_t> reps;
    std::size_t dump_rep = 0;
    bool full = false, all_j = false;
    std::vector<std::string> methods{"repro-logistic", "repro-hinge", "oracle"};
    sim->add_option("--scenario", sc_name, "preset name")->capture_default_str();
    sim->add_option("--reps", reps, "replications");
    sim->add_flag("--full", full, "allow full-size presets");
    sim->add_flag("--all-j", all_j, "single-coefficient sets for every noise index");
    sim->add_option("--methods", methods, "methods to run")
        ->check(CLI::IsMember({"repro-logistic", "repro-hinge", "oracle"}));
    sim->add_option("--report-style", style, "summary printed to stdout")
        ->check(CLI::IsMember({"csv", "json", "markdown"}))
        ->capture_default_str();
    sim->add_option("--dump-data", dump, "only write the simulated dataset of --rep to this CSV");
    sim->add_option("--rep", dump_rep, "replication used by --dump-data");

    // candidates / model-ci / coef-ci / case-prob
    DataSource src;
    auto* cand = app.add_subcommand("candidates", "build the model candidate set");
    add_source(cand, src);
    auto* mci = app.add_subcommand("model-ci", "model confidence set");
    add_source(mci, src);
    auto* cci = app.add_subcommand("coef-ci", "single-coefficient confidence sets");
    add_source(cci, src);
    std::vector<Index> coef_j;
    bool augmented = false;
    cci->add_option("--j", coef_j, "coefficient indices (default: all)");
    cci->add_flag("--augmented", augmented, "add the tested index to every candidate");
    auto* cpr = app.add_subcommand("case-prob", "case-probability region");
    add_source(cpr, src);
    std::string x_new_csv, query_csv;
    Index n_new = 2;
    cpr->add_option("--x-new", x_new_csv, "CSV of new covariate rows");
    cpr->add_option("--n-new", n_new, "rows drawn for x_new when --x-new is absent")->capture_default_str();
    cpr->add_option("--query", query_csv, "CSV of probability vectors to test, one per row");

    // ingest
    auto* ing = app.add_subcommand("ingest", "filter and standardize a labelled CSV");
    std::string in_csv, label = "label", delim = ",";
    std::optional<double> zero_thr, top_var;
    bool no_std = false;
    ing->add_option("--in", in_csv, "input CSV")->required();
    ing->add_option("--label", label, "label column")->capture_default_str();
    ing->add_option("--delimiter", delim, "field delimiter")->capture_default_str();
    ing->add_option("--zero-threshold", zero_thr, "drop columns with a larger share of zeros (e.g. 0.8)");
    ing->add_option("--top-variance", top_var, "keep this share of highest-variance columns (e.g. 0.1)");
    ing->add_flag("--no-standardize", no_std, "keep raw scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*sim) {
        Scenario sc = checked_preset(sc_name, full);
        if (!dump.empty()) {
            const auto rs = derive_seed(g.seed, dump_rep);
            const auto s = simulate_logistic(rs, sc.n, sc.p, sc.truth(), sc.rho);
            write_text_file(dump, dataset_to_csv(s.data, default_column_names(sc.p)));
            return 0;
        }
        if (reps) sc.replications = *reps;
        if (g.d) sc.d = *g.d;
        if (g.m) sc.m = *g.m;
        sc.alpha = g.alpha;
        InferenceConfig c;
        c.seed = g.seed;
        c.alpha = g.alpha;
        c.beta_mode = parse_beta_mode(g.beta_mode);
        c.threads = g.threads;
        HarnessOptions opt;
        opt.methods = methods;
        opt.all_j = all_j;
        const std::string dir = g.out.empty() || g.out == "-" ? "runs/" + sc.name : g.out;
        const RunReport rep = run_scenario(sc, c, dir, opt);
        const std::string table = report_tables(rep, style);
        write_text_file(dir + "/summary.md", report_tables(rep, "markdown"));
        std::cout << table;
        return 0;
    }

    if (*ing) {
        if (delim.size() != 1) throw validation_error("delimiter must be one character");
        IngestOptions io;
        io.max_zero_fraction = zero_thr;
        io.top_variance_fraction = top_var;
        io.standardize = !no_std;
        const IngestResult r = ingest_csv(in_csv, label, delim[0], io);
        const std::string text = dataset_to_csv(r.data, r.columns, "y");
        if (g.out.empty() || g.out == "-") std::cout << text;
        else write_text_file(g.out, text);
        Json info = {{"n", r.data.n()}, {"p", r.data.p()}, {"columns", r.columns}, {"source_columns", r.source_columns}};
        std::cerr << info.dump() << '\n';
        return 0;
    }

    const Loaded l = load_data(src, g);
    const InferenceConfig c = make_config(g, l);
    Sink out(g.out);
    const CandidateSet cands = build_candidate_set(l.data, c);

    if (*cand) {
        for (std::size_t i = 0; i < cands.size(); ++i)
            out.line({{"index", i}, {"tau", to_json(cands.models()[i])}, {"provenance", provenance_json(cands.provenance()[i])}});
        return 0;
    }
    if (*mci) {
        const auto res = model_confidence_set(l.data, cands, c);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            Json j = to_json(res.reports[i]);
            j["index"] = i;
            j["kept"] = res.reports[i].t_hat < c.alpha;
            out.line(j);
        }
        return 0;
    }
    if (*cci) {
        if (coef_j.empty())
            for (Index j = 0; j < l.data.p(); ++j) coef_j.push_back(j);
        for (Index j : coef_j) {
            Json line = to_json(ci_single_coef(l.data, cands, j, c.alpha, augmented));
            line["j"] = j;
            line["augmented"] = augmented;
            out.line(line);
        }
        return 0;
    }
    if (*cpr) {
        Matrix x_new;
        if (!x_new_csv.empty()) x_new = read_matrix_csv(x_new_csv);
        else x_new = draw_ar_gaussian(RngStream(c.seed, streams::new_design), n_new, l.data.p(), 0.3);
        const CaseProbRegion region = region_case_probs(l.data, cands, x_new, c.alpha);
        for (std::size_t i = 0; i < region.region().size(); ++i) {
            const auto& tau = region.region().candidate(i);
            const Vector at = region.probabilities_at(ThetaPoint(tau, region.region().unconstrained_fit(i).coef).dense(l.data.p()));
            out.line({{"candidate", i}, {"tau", to_json(tau)}, {"probabilities_at_mle", to_json(at)}});
        }
        if (!query_csv.empty()) {
            const Matrix q = read_matrix_csv(query_csv);
            for (Index r = 0; r < q.rows(); ++r) {
                Json j = to_json(region.diagnose_probabilities(q.row(r).transpose()));
                j["query"] = r;
                out.line(j);
            }
        }
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::io ? 3 : e.kind() == ErrorKind::validation ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
