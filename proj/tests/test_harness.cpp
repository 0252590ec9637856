#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "repro/repro.hpp"

using namespace repro;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path p = fs::temp_directory_path() /
                 ("repro_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + tag + "_" +
                  std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Scenario tiny(std::size_t reps = 1) {
    Scenario sc;
    sc.name = "tiny";
    sc.n = 80;
    sc.p = 20;
    sc.beta_nonzero = coef_list({3.0, -2.0});
    sc.d = 5;
    sc.m = 20;
    sc.replications = reps;
    return sc;
}

HarnessOptions fast_methods() {
    HarnessOptions o;
    o.methods = {"repro-logistic", "oracle"};
    return o;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(REPRO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Csv, QuotedFieldsAndLineEndings) {
    const auto r = parse_csv_records("a,\"b,c\",\"d\"\"e\"\r\n\"two\nlines\",x,\n\n");
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0], (std::vector<std::string>{"a", "b,c", "d\"e"}));
    EXPECT_EQ(r[1], (std::vector<std::string>{"two\nlines", "x", ""}));
}

TEST(Csv, OtherDelimiter) {
    const auto r = parse_csv_records("g1;g2\n1,5;2\n", ';');
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[1], (std::vector<std::string>{"1,5", "2"}));
    EXPECT_THROW(parse_csv_records("a,\"open\n"), Error);
}

TEST(Csv, QuoteRoundTrip) {
    for (const std::string s : {"plain", "with,comma", "with\"quote", "multi\nline"})
        EXPECT_EQ(parse_csv_records(csv_quote(s) + ",z\n").at(0).at(0), s);
}

TEST(Json, CandidateSetLayout) {
    CandidateSet c;
    c.add(SupportSet{0, 3}, Provenance{0, 0.5});
    c.add(SupportSet{0, 3}, Provenance{2, 0.0});
    c.add(SupportSet{}, std::nullopt);
    const Json j = to_json(c);
    EXPECT_EQ(j.at("models"), Json::parse("[[0,3],[]]"));
    EXPECT_EQ(j.at("provenance").at(0).size(), 2u);
    EXPECT_EQ(j.at("provenance").at(0).at(1).at("draw"), 2);
    EXPECT_TRUE(j.at("provenance").at(1).empty());
}

TEST(Ingest, ThreeRows) {
    const auto dir = scratch_dir("a");
    const auto f = (dir / "in.csv").string();
    write_text_file(f, "g1,g2,label\n1.0,2.0,0\n2.0,0.5,1\n3.0,1.0,1\n");
    const auto res = ingest_csv(f, "label");
    EXPECT_EQ(res.data.n(), 3);
    EXPECT_EQ(res.data.p(), 2);
    EXPECT_EQ(res.columns, (std::vector<std::string>{"g1", "g2"}));
    EXPECT_EQ(res.data.y(), (Eigen::VectorXi(3) << 0, 1, 1).finished());
    // standardized: centered columns
    EXPECT_NEAR(res.data.x().col(0).mean(), 0.0, 1e-12);
    EXPECT_NEAR(res.data.x().col(1).mean(), 0.0, 1e-12);
}

TEST(Ingest, MostlyZeroColumnDropped) {
    const auto dir = scratch_dir("a");
    const auto f = (dir / "in.csv").string();
    std::string text = "sparse,dense,y\n";
    for (int i = 0; i < 20; ++i)
        text += std::to_string(i < 18 ? 0 : i) + "," + std::to_string(i + 1) + "," + std::to_string(i % 2) + "\n";
    write_text_file(f, text);
    IngestOptions opt;
    opt.max_zero_fraction = 0.8;
    const auto res = ingest_csv(f, "y", ',', opt);
    EXPECT_EQ(res.columns, std::vector<std::string>{"dense"});
    EXPECT_EQ(res.source_columns, std::vector<std::size_t>{1});
    EXPECT_EQ(ingest_csv(f, "y").data.p(), 2);  // filters are opt-in
}

TEST(Ingest, TopVarianceTenPercent) {
    const auto dir = scratch_dir("a");
    const auto f = (dir / "in.csv").string();
    std::string text;
    for (int j = 0; j < 100; ++j) text += "c" + std::to_string(j) + ",";
    text += "y\n";
    for (int i = 0; i < 30; ++i) {
        // column j has spread proportional to (j * 37) % 100 + 1, so the ranking is scrambled
        for (int j = 0; j < 100; ++j) text += std::to_string(((j * 37) % 100 + 1) * ((i % 5) - 2.0)) + ",";
        text += std::to_string(i % 2) + "\n";
    }
    write_text_file(f, text);
    IngestOptions opt;
    opt.top_variance_fraction = 0.1;
    const auto res = ingest_csv(f, "y", ',', opt);
    ASSERT_EQ(res.data.p(), 10);
    for (std::size_t c : res.source_columns) EXPECT_GE((static_cast<int>(c) * 37) % 100 + 1, 91) << c;
}

TEST(Ingest, Errors) {
    const auto dir = scratch_dir("a");
    const auto f = (dir / "in.csv").string();
    write_text_file(f, "g1,g2,label\n1,2,0\n2,3,1\n");
    EXPECT_THROW(ingest_csv(f, "class"), Error);
    write_text_file(f, "g1,g2,label\n1,2,0\n2,3,2\n");
    EXPECT_THROW(ingest_csv(f, "label"), Error);
    write_text_file(f, "g1,g2,label\n1,oops,0\n2,3,1\n");
    try {
        ingest_csv(f, "label");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::validation);
        EXPECT_NE(std::string(e.what()).find("unparseable cell"), std::string::npos);
    }
    try {
        ingest_csv((dir / "absent.csv").string(), "label");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(Scenario, PresetsAndValidation) {
    const Scenario m2 = preset("M2s");
    EXPECT_EQ(m2.n, 300);
    EXPECT_EQ(m2.p, 150);
    EXPECT_EQ(m2.d, 100u);
    EXPECT_EQ(m2.beta_nonzero, coef_list({5, 4, 3, 2}));
    EXPECT_EQ(m2.truth().support, SupportSet::first_k(4));
    EXPECT_EQ(preset("M1").p, 1000);
    EXPECT_TRUE(preset("M5s").augmented);
    EXPECT_THROW(preset("M9"), Error);
    Scenario bad = tiny();
    bad.beta_nonzero = Vector::Ones(21);
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(run_scenario(bad, InferenceConfig{}, scratch_dir("a").string()), Error);
}

TEST(Harness, TinySmoke) {
    const auto dir = scratch_dir("a");
    InferenceConfig c;
    c.seed = 4;
    const auto rep = run_scenario(tiny(), c, dir.string());
    ASSERT_EQ(rep.records.size(), 1u);
    const auto lines = lines_of(read_text_file((dir / "records.jsonl").string()));
    ASSERT_EQ(lines.size(), 1u);
    const Json rec = Json::parse(lines[0]);
    EXPECT_EQ(rec, rep.records[0]);
    EXPECT_EQ(rec.at("r"), 0);
    EXPECT_EQ(rec.at("noise_indices").size(), 18u);
    for (const std::string method : {"repro-logistic", "repro-hinge", "oracle"}) {
        const auto& m = rec.at("methods").at(method).at("metrics");
        for (const std::string key : {"coef_coverage_signal", "coef_length_signal", "coef_coverage_noise",
                                      "coef_length_noise", "joint_coverage", "case_coverage", "case_full_rank_agree"})
            ASSERT_TRUE(m.contains(key)) << method << " " << key;
        for (const auto& [k, v] : m.items()) EXPECT_TRUE(std::isfinite(v.get<double>())) << method << " " << k;
        if (method != "oracle") {
            for (const std::string key : {"candidate_coverage", "candidate_cardinality", "confidence_coverage",
                                          "confidence_cardinality", "confidence_within_candidates"})
                EXPECT_TRUE(m.contains(key)) << method << " " << key;
            EXPECT_EQ(m.at("confidence_within_candidates"), 1.0);
        }
        for (const auto& [k, v] : m.items())
            if (k.find("coverage") != std::string::npos || k.find("agree") != std::string::npos) {
                EXPECT_GE(v.get<double>(), 0.0);
                EXPECT_LE(v.get<double>(), 1.0);
            }
    }
    const auto summary = read_text_file((dir / "summary.csv").string());
    EXPECT_EQ(summary.substr(0, summary.find('\n')), "scenario,method,metric,mean,std,n_reps");
}

TEST(Harness, SameSeedSameBytes) {
    const auto a = scratch_dir("a"), b = scratch_dir("b"), c4 = scratch_dir("c");
    InferenceConfig c;
    c.seed = 9;
    run_scenario(tiny(3), c, a.string(), fast_methods());
    run_scenario(tiny(3), c, b.string(), fast_methods());
    c.threads = 4;
    run_scenario(tiny(3), c, c4.string(), fast_methods());
    const auto ra = read_text_file((a / "records.jsonl").string());
    EXPECT_EQ(lines_of(ra).size(), 3u);
    EXPECT_EQ(ra, read_text_file((b / "records.jsonl").string()));
    EXPECT_EQ(ra, read_text_file((c4 / "records.jsonl").string()));
    EXPECT_EQ(read_text_file((a / "summary.csv").string()), read_text_file((c4 / "summary.csv").string()));
}

TEST(Harness, ResumeSkipsCompletedReplications) {
    const auto dir = scratch_dir("a");
    const auto file = (dir / "records.jsonl").string();
    InferenceConfig c;
    c.seed = 12;
    run_scenario(tiny(3), c, dir.string(), fast_methods());
    const std::string full = read_text_file(file);
    auto lines = lines_of(full);
    ASSERT_EQ(lines.size(), 3u);

    // interrupted mid-write of the third record
    write_text_file(file, lines[0] + "\n" + lines[1] + "\n" + lines[2].substr(0, lines[2].size() / 2));
    const auto rep = run_scenario(tiny(3), c, dir.string(), fast_methods());
    EXPECT_EQ(read_text_file(file), full);
    EXPECT_EQ(rep.records.size(), 3u);

    // a completed record is kept as is, not recomputed
    Json first = Json::parse(lines[0]);
    first["positives"] = -1;
    write_text_file(file, first.dump() + "\n" + lines[1] + "\n");
    const auto again = run_scenario(tiny(3), c, dir.string(), fast_methods());
    EXPECT_EQ(again.records[0].at("positives"), -1);
    EXPECT_EQ(lines_of(read_text_file(file)).size(), 3u);
    EXPECT_EQ(lines_of(read_text_file(file))[2], lines[2]);

    // a different seed is a different key
    c.seed = 13;
    run_scenario(tiny(1), c, dir.string(), fast_methods());
    EXPECT_EQ(lines_of(read_text_file(file)).size(), 4u);
}

TEST(Harness, SummaryRecomputableFromRecords) {
    const auto dir = scratch_dir("a");
    InferenceConfig c;
    c.seed = 21;
    run_scenario(tiny(4), c, dir.string(), fast_methods());

    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> values;
    for (const auto& line : lines_of(read_text_file((dir / "records.jsonl").string()))) {
        const Json rec = Json::parse(line);
        for (const auto& [method, body] : rec.at("methods").items())
            for (const auto& [metric, v] : body.at("metrics").items())
                values[{rec.at("scenario"), method, metric}].push_back(v.get<double>());
    }
    const auto rows = parse_csv_records(read_text_file((dir / "summary.csv").string()));
    ASSERT_EQ(rows.size(), values.size() + 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto it = values.find({row[0], row[1], row[2]});
        ASSERT_NE(it, values.end()) << row[2];
        const auto& v = it->second;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        EXPECT_NEAR(std::stod(row[3]), mean, 1e-12) << row[1] << " " << row[2];
        EXPECT_NEAR(std::stod(row[4]), sd, 1e-12) << row[1] << " " << row[2];
        EXPECT_EQ(std::stoul(row[5]), v.size());
    }
}

TEST(Report, Styles) {
    SummaryTable one;
    one.add("S", "repro-logistic", "candidate_coverage", 1.0);
    one.add("S", "repro-logistic", "coef_length_signal", 0.75);
    one.add("S", "oracle", "joint_coverage", 1.0);
    for (const auto& [k, cell] : one.rows()) EXPECT_EQ(cell.sd, 0.0);

    const std::string csv = report_tables(one, "csv");
    EXPECT_NE(csv.find("S,repro-logistic,coef_length_signal,0.75,0,1"), std::string::npos);

    const Json js = Json::parse(report_tables(one, "json"));
    ASSERT_EQ(js.size(), 3u);
    for (const auto& row : js) EXPECT_EQ(row.at("std"), 0.0);

    const std::string md = report_tables(one, "markdown");
    const auto header = parse_csv_records(md.substr(0, md.find('\n')), '|').at(0);
    std::vector<std::string> names;
    for (const auto& cell : header) {
        const auto b = cell.find_first_not_of(' '), e = cell.find_last_not_of(' ');
        if (b != std::string::npos) names.push_back(cell.substr(b, e - b + 1));
    }
    EXPECT_EQ(names, (std::vector<std::string>{"scenario", "method", "candidate_coverage", "coef_length_signal",
                                               "joint_coverage"}));
    EXPECT_NE(md.find("0.750(0.000)"), std::string::npos);

    EXPECT_THROW(report_tables(SummaryTable{}, "csv"), Error);
    EXPECT_THROW(report_tables(one, "html"), Error);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("a");
    const auto f = (dir / "in.csv").string();
    write_text_file(f, "g1,g2,label\n1.0,2.0,0\n2.0,0.5,1\n3.0,1.0,1\n");
    EXPECT_EQ(run_cli("ingest --in " + f + " --label label --out " + (dir / "out.csv").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out.csv"));
    EXPECT_EQ(run_cli("ingest --in " + f + " --label missing"), 2);
    EXPECT_EQ(run_cli("--loss ridge simulate"), 2);
    EXPECT_EQ(run_cli("--alpha 1.5 --out " + (dir / "run").string() + " simulate --scenario M1s --reps 1"), 2);
    EXPECT_EQ(run_cli("simulate --scenario M2"), 2);  // full preset needs --full
    EXPECT_EQ(run_cli("ingest --in " + (dir / "absent.csv").string()), 3);
}
