#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "hiermem/harness.hpp"
#include "hiermem/synthworld.hpp"

using namespace hiermem;
namespace fs = std::filesystem;

namespace {

// scratch directory shared by the whole binary, wiped lazily per run
const fs::path& scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("hiermem_harness_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// run the installed binary; returns the exit code, captures output
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(HIERMEM_CLI_PATH) + " " + args + " >" +
                            log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json build_config(const fs::path& dir) {
    write_text_file((dir / "doc.txt").string(),
                    "alpha beta gamma delta epsilon zeta eta theta iota kappa "
                    "lambda mu nu xi omicron pi rho sigma tau upsilon\n");
    return json{
        {"input",
         {{"kind", "files"},
          {"paths", {(dir / "doc.txt").string()}},
          {"extractor", "chunk"},
          {"chunk_tokens", 2}}},
        {"embed_dim", 64},
        {"seed", 3},
        {"context_tokens", 12},
        {"levels",
         {{{"grouping", {{"kind", "kmeans"}, {"k", 4}}}, {"rho", {{"kind", "concat"}}}},
          {{"grouping", {{"kind", "kmeans"}, {"k", 2}}}, {"rho", {{"kind", "concat"}}}}}}};
}

json experiment_config() {
    return json{{"corpus", {{"kind", "preset"}, {"preset", "ct-fixture"}}},
                {"groupings", {{{"kind", "truth"}}}},
                {"rhos", {{{"kind", "concat"}}, {{"kind", "label"}}}},
                {"taus", {"topdown", "collapsed"}},
                {"budget_fractions", {0.25, 0.5}},
                {"seeds", {1}},
                {"k", 3}};
}

}  // namespace

TEST_CASE("build pipeline end to end, in process") {
    const fs::path dir = scratch() / "build_api";
    fs::create_directories(dir);
    const BuildOutputs out = run_build(build_config(dir), std::nullopt);

    REQUIRE(out.hierarchy.depth() == 2);
    CHECK(out.report.level_sizes == std::vector<std::size_t>{10, 4, 2});
    CHECK(validate_hierarchy(out.hierarchy).empty());
    CHECK_FALSE(out.report.lines.empty());
    CHECK(out.report.gammas.size() == 2);

    // save / load keeps the whole structure
    const fs::path hpath = dir / "h.json";
    save_hierarchy(out.hierarchy, hpath.string());
    const Hierarchy back = load_hierarchy(hpath.string());
    CHECK(back.depth() == 2);
    CHECK(back.level(0).size() == 10);

    SECTION("every algorithm answers within budget") {
        for (const std::string algo : {"topdown", "collapsed", "navigate", "multiview"}) {
            const json r = run_query(back, json{{"text", "alpha beta"},
                                                {"budget", 6},
                                                {"algorithm", algo},
                                                {"k", 2}});
            CHECK(r.at("algorithm") == algo);
            CHECK(r.at("tokens_used").get<std::size_t>() <= 6);
            CHECK(r.at("relevance_evals").get<std::size_t>() >= 1);
        }
        CHECK_THROWS_AS(run_query(back, json{{"algorithm", "best-first"}}), UnknownAlgorithm);
    }
}

TEST_CASE("build config validation") {
    const fs::path dir = scratch() / "build_bad";
    fs::create_directories(dir);

    json cfg = build_config(dir);
    cfg.erase("levels");
    CHECK_THROWS_AS(run_build(cfg, std::nullopt), ConfigError);

    cfg = build_config(dir);
    cfg["rep_embed"] = "centroids";  // typo
    CHECK_THROWS_AS(run_build(cfg, std::nullopt), ConfigError);

    cfg = build_config(dir);
    cfg["embed_dim"] = "sixty-four";  // wrong type surfaces as config error
    CHECK_THROWS_AS(run_build(cfg, std::nullopt), ConfigError);

    cfg = build_config(dir);
    cfg["levels"][0]["grouping"] = {{"kind", "truth"}};  // files have no planted truth
    CHECK_THROWS_AS(run_build(cfg, std::nullopt), ConfigError);
}

TEST_CASE("preset corpora build with centroid representatives") {
    const json cfg{{"input",
                    {{"kind", "preset"},
                     {"preset", "two-block"},
                     {"blocks", 2},
                     {"units_per_block", 6},
                     {"dim", 8},
                     {"noise", 0.05}}},
                   {"seed", 9},
                   {"rep_embed", "centroid"},
                   {"levels", {{{"grouping", {{"kind", "kmeans"}, {"k", 2}}}}}}};
    const BuildOutputs out = run_build(cfg, std::nullopt);
    REQUIRE(out.hierarchy.depth() == 1);
    CHECK(out.hierarchy.level(1).size() == 2);
    // centroid embedding keeps representatives in the planted space
    for (const Unit& u : out.hierarchy.level(1).units()) {
        REQUIRE(u.embedding.size() == 8);
        double norm = 0.0;
        for (double x : u.embedding) norm += x * x;
        CHECK(norm > 0.5);
    }
}

TEST_CASE("experiment grids are exhaustive and deterministic") {
    const json spec = experiment_config();
    const ExperimentOutputs a = run_experiment(spec, std::nullopt);
    const ExperimentOutputs b = run_experiment(spec, std::nullopt);

    CHECK(a.cells.size() == 2 * 2 * 2);  // rhos x taus x budgets
    CHECK(a.csv == b.csv);
    CHECK(a.csv.rfind("rho,tau,budget,recall,precision,tokens_used,relevance_evals\n", 0) == 0);

    // spec order: rho-major, then tau, then budget
    CHECK(a.cells[0].rho == "concat");
    CHECK(a.cells[0].tau == "topdown");
    CHECK(a.cells[2].tau == "collapsed");
    CHECK(a.cells[4].rho == "label");

    // the fixture's coupling shows up in the summary
    REQUIRE(a.summary.contains("per_budget"));
    for (const auto& entry : a.summary.at("per_budget")) {
        CHECK(entry.at("high_ss_prefers_collapsed").get<bool>());
        CHECK(entry.at("low_ss_needs_topdown").get<bool>());
    }
    CHECK(a.summary.contains("wall_time_seconds"));
    CHECK(a.csv.find("wall") == std::string::npos);  // timing never enters the csv

    SECTION("empty grids are rejected") {
        json bad = experiment_config();
        bad["taus"] = json::array();
        CHECK_THROWS_AS(run_experiment(bad, std::nullopt), ConfigError);
        bad = experiment_config();
        bad["budget_fractions"] = json::array();
        bad["budgets"] = json::array();
        CHECK_THROWS_AS(run_experiment(bad, std::nullopt), ConfigError);
    }
}

TEST_CASE("measure runs assemble the requested report sections") {
    const json cfg{{"world",
                    {{"arities", {2, 2}}, {"branchings", {2}}, {"emission_entropy", 0.0},
                     {"seed", 7}}},
                   {"fano", {{"b_bits", 3}, {"epsilon", 0.2}}},
                   {"routing", {{"n_k", 8}, {"bits", 3}, {"noise", 0.1}}},
                   {"branching", {{"n_atoms", 1000}}},
                   {"depth", {{"n_tokens", 100000}, {"c_tokens", 1000}, {"ratio", 10}}}};
    const MeasureOutputs out = run_measure(cfg, std::nullopt);
    CHECK(out.ok);
    CHECK(out.report.at("ok").get<bool>());
    CHECK(out.report.at("monotonicity").at("entropy_ok").get<bool>());
    CHECK(out.report.at("monotonicity").at("dpi_ok").get<bool>());
    CHECK(out.report.at("fano").at("max_groups").get<double>() == Catch::Approx(32.0));
    CHECK(out.report.at("routing").at("consistent").get<bool>());
    CHECK(out.report.at("branching").at("b_star").get<int>() == 3);
    CHECK(out.report.at("branching").at("l_star").get<int>() == 7);
    CHECK(out.report.at("depth").at("min_depth").get<int>() == 2);

    SECTION("world seeds flow through the override") {
        const MeasureOutputs a = run_measure(cfg, 123);
        const MeasureOutputs b = run_measure(cfg, 123);
        CHECK(a.report == b.report);
    }
    SECTION("a config with no subject is refused") {
        CHECK_THROWS_AS(run_measure(json{{"fano", {{"b_bits", 3}}}}, std::nullopt),
                        ConfigError);
    }
    SECTION("external tables load, bad ones carry diagnostics") {
        const fs::path dir = scratch() / "measure_api";
        fs::create_directories(dir);
        const JointTable t = gen_routing_task(4, 2).table;
        save_joint_table(t, (dir / "t.tsv").string());
        const json tcfg{{"table", (dir / "t.tsv").string()},
                        {"maps", {{{"kind", "group_first"}, {"groups", {{0}}}}}},
                        {"query_vars", {"Z"}}};
        const MeasureOutputs got = run_measure(tcfg, std::nullopt);
        CHECK(got.ok);

        write_text_file((dir / "bad.tsv").string(), "0\t0.5\n1\t0.4\n");
        CHECK_THROWS_AS(
            run_measure(json{{"table", (dir / "bad.tsv").string()}}, std::nullopt),
            InvalidTable);
    }
}

TEST_CASE("command line contract") {
    const fs::path dir = scratch() / "cli";
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";

    write_text_file((dir / "build.json").string(), build_config(dir).dump(2));
    write_text_file((dir / "query.json").string(),
                    json{{"text", "alpha beta"}, {"budget", 8}, {"algorithm", "collapsed"},
                         {"k", 2}}
                        .dump(2));
    write_text_file((dir / "exp.json").string(), experiment_config().dump(2));

    SECTION("happy paths exit zero and write their artifacts") {
        CHECK(run_cli("build --config " + (dir / "build.json").string() + " --out " +
                          (dir / "h.json").string(),
                      log) == 0);
        CHECK(fs::exists(dir / "h.json"));
        CHECK(slurp(log).find("level") != std::string::npos);

        CHECK(run_cli("query --hierarchy " + (dir / "h.json").string() + " --query " +
                          (dir / "query.json").string() + " --out " +
                          (dir / "result.json").string(),
                      log) == 0);
        const json result = load_json_file((dir / "result.json").string());
        CHECK(result.at("algorithm") == "collapsed");
        CHECK(result.at("tokens_used").get<std::size_t>() <= 8);

        fs::create_directories(dir / "exp1");
        fs::create_directories(dir / "exp2");
        CHECK(run_cli("experiment --config " + (dir / "exp.json").string() + " --out " +
                          (dir / "exp1").string(),
                      log) == 0);
        CHECK(run_cli("experiment --config " + (dir / "exp.json").string() + " --out " +
                          (dir / "exp2").string(),
                      log) == 0);
        CHECK(slurp(dir / "exp1" / "metrics.csv") == slurp(dir / "exp2" / "metrics.csv"));
        CHECK(fs::exists(dir / "exp1" / "summary.json"));
    }
    SECTION("usage and config problems exit one") {
        CHECK(run_cli("", log) == 1);                       // missing subcommand
        CHECK(run_cli("build", log) == 1);                  // missing --config
        CHECK(run_cli("--help", log) == 0);

        write_text_file((dir / "broken.json").string(), "{not json");
        CHECK(run_cli("build --config " + (dir / "broken.json").string(), log) == 1);

        json cfg = build_config(dir);
        cfg["rep_embed"] = 12;
        write_text_file((dir / "badtype.json").string(), cfg.dump());
        CHECK(run_cli("build --config " + (dir / "badtype.json").string(), log) == 1);

        // unknown traversal algorithm is a usage problem, not a crash
        run_cli("build --config " + (dir / "build.json").string() + " --out " +
                    (dir / "h.json").string(),
                log);
        write_text_file((dir / "badalgo.json").string(),
                        json{{"text", "alpha"}, {"algorithm", "best-first"}}.dump());
        CHECK(run_cli("query --hierarchy " + (dir / "h.json").string() + " --query " +
                          (dir / "badalgo.json").string(),
                      log) == 1);
    }
    SECTION("failed validation exits two") {
        // tampered hierarchy: break a token count, reload must fail
        run_cli("build --config " + (dir / "build.json").string() + " --out " +
                    (dir / "h.json").string(),
                log);
        json h = load_json_file((dir / "h.json").string());
        h.at("levels")[0].at("units")[0]["token_count"] = 9999;
        write_text_file((dir / "tampered.json").string(), h.dump());
        CHECK(run_cli("query --hierarchy " + (dir / "tampered.json").string() + " --query " +
                          (dir / "query.json").string(),
                      log) == 2);

        // shipped fixture whose mass sums to 0.9
        const std::string corrupt = std::string(HIERMEM_SOURCE_DIR) + "/fixtures/corrupted_table.tsv";
        write_text_file((dir / "m_corrupt.json").string(),
                        json{{"table", corrupt}}.dump());
        CHECK(run_cli("measure --config " + (dir / "m_corrupt.json").string(), log) == 2);
        CHECK(slurp(log).find("0.9") != std::string::npos);
    }
    SECTION("measure happy path writes a report") {
        write_text_file((dir / "m.json").string(),
                        json{{"world", {{"arities", {2, 2}}, {"branchings", {2}}}},
                             {"branching", {{"n_atoms", 81.0}}}}
                            .dump());
        CHECK(run_cli("measure --config " + (dir / "m.json").string() + " --out " +
                          (dir / "report.json").string(),
                      log) == 0);
        const json rep = load_json_file((dir / "report.json").string());
        CHECK(rep.at("ok").get<bool>());
        CHECK(rep.at("branching").at("b_star").get<int>() == 3);
        CHECK(rep.at("branching").at("l_star").get<int>() == 4);
    }
}
