// hiermem command line: build a hierarchy, run queries against it, sweep
// experiment grids, and check the measurement suite's invariants.
//
// exit codes: 0 ok, 1 usage/config problems, 2 failed validation or assertion.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hiermem/harness.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_seed_flag(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t s) { args.seed = s; },
        "override the config's seed");
}

int run_build_cmd(const CommonArgs& args) {
    const hiermem::json cfg = hiermem::load_json_file(args.config);
    hiermem::BuildOutputs out = hiermem::run_build(cfg, args.seed);
    for (const auto& line : out.report.lines) std::cout << line << "\n";
    const auto violations = hiermem::validate_hierarchy(out.hierarchy);
    for (const auto& v : violations) {
        std::cerr << "invariant violated at level " << v.level << " node '" << v.node_id
                  << "': " << v.message << "\n";
    }
    if (!args.out.empty()) hiermem::save_hierarchy(out.hierarchy, args.out);
    return violations.empty() ? 0 : 2;
}

int run_query_cmd(const std::string& hierarchy_path, const std::string& query_path,
                  const std::string& out_path) {
    const hiermem::Hierarchy h = hiermem::load_hierarchy(hierarchy_path);
    const hiermem::json q = hiermem::load_json_file(query_path);
    const hiermem::json result = hiermem::run_query(h, q);
    const std::string text = result.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        hiermem::write_text_file(out_path, text);
    }
    return 0;
}

int run_experiment_cmd(const CommonArgs& args) {
    const hiermem::json spec = hiermem::load_json_file(args.config);
    hiermem::ExperimentOutputs out = hiermem::run_experiment(spec, args.seed);
    const std::string dir = args.out.empty() ? spec.value("out_dir", std::string(".")) : args.out;
    hiermem::write_text_file(dir + "/metrics.csv", out.csv);
    hiermem::write_text_file(dir + "/summary.json", out.summary.dump(2) + "\n");
    std::cout << "wrote " << out.cells.size() << " cells to " << dir << "/metrics.csv\n";
    return 0;
}

int run_measure_cmd(const CommonArgs& args) {
    const hiermem::json cfg = hiermem::load_json_file(args.config);
    hiermem::MeasureOutputs out = hiermem::run_measure(cfg, args.seed);
    const std::string text = out.report.dump(2) + "\n";
    if (args.out.empty()) {
        std::cout << text;
    } else {
        hiermem::write_text_file(args.out, text);
    }
    return out.ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical memory engine"};
    app.require_subcommand(1);

    CommonArgs build_args, exp_args, measure_args;
    std::string hierarchy_path, query_path, query_out;

    CLI::App* build = app.add_subcommand("build", "extract, coarsen, and save a hierarchy");
    build->add_option("--config", build_args.config, "build config (json)")->required();
    build->add_option("--out", build_args.out, "hierarchy output path (json)");
    add_seed_flag(build, build_args);

    CLI::App* query = app.add_subcommand("query", "run one query against a saved hierarchy");
    query->add_option("--hierarchy", hierarchy_path, "hierarchy file from 'build'")->required();
    query->add_option("--query", query_path, "query file (json)")->required();
    query->add_option("--out", query_out, "result output path (default: stdout)");

    CLI::App* experiment = app.add_subcommand("experiment", "sweep rho x tau x budget grids");
    experiment->add_option("--config", exp_args.config, "experiment spec (json)")->required();
    experiment->add_option("--out", exp_args.out, "output directory");
    add_seed_flag(experiment, exp_args);

    CLI::App* measure = app.add_subcommand("measure", "information-theoretic checks");
    measure->add_option("--config", measure_args.config, "measure config (json)")->required();
    measure->add_option("--out", measure_args.out, "report output path (default: stdout)");
    add_seed_flag(measure, measure_args);

    try {
        app.parse(argc, argv);
        if (build->parsed()) return run_build_cmd(build_args);
        if (query->parsed()) return run_query_cmd(hierarchy_path, query_path, query_out);
        if (experiment->parsed()) return run_experiment_cmd(exp_args);
        if (measure->parsed()) return run_measure_cmd(measure_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the message; 0 for --help
        return code == 0 ? 0 : 1;
    } catch (const hiermem::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const hiermem::UnknownAlgorithm& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const hiermem::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
