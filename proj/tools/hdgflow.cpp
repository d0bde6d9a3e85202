/** \file hdgflow.cpp
 * \brief Command-line front end: `solve` runs one case, `converge` runs an
 *        h-convergence study, `flux-table` prints the trace-flux
 *        decomposition at a sampled interface state.
 *
 * Exit codes: 0 success / converged; 1 usage, configuration or mesh errors;
 * 2 non-physical state abort; 3 iteration budget exhausted; 4 convergence
 * study finished but missed its rate thresholds.
 */
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hdgflow/hdgflow.hpp>

namespace {

int run_solve(const std::string& path, int threads) {
    hdgflow::RunConfig cfg = hdgflow::parse_config_file(path);
    cfg.time.threads = threads;
    const hdgflow::CaseResult r = hdgflow::run_case(cfg, std::cout);
    return r.status;
}

int run_converge(const std::string& path, int threads) {
    hdgflow::RunConfig cfg = hdgflow::parse_config_file(path);
    cfg.time.threads = threads;
    const hdgflow::StudyResult r =
        hdgflow::run_convergence_study(cfg, std::cerr);
    std::cout << r.csv;
    return r.pass ? 0 : 4;
}

int run_flux_table(const std::string& scheme, const std::vector<double>& v) {
    const hdgflow::Vec4 uhat(v[0], v[1], v[2], v[3]);
    const hdgflow::Vec4 ue(v[4], v[5], v[6], v[7]);
    const hdgflow::Vec2 n(v[8], v[9]);
    hdgflow::flux_table(scheme, uhat, ue, n, hdgflow::GasModel{}, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "hdgflow: high-order hybridisable DG solver for 2D steady "
        "compressible flow"};
    app.require_subcommand(1);

    int threads = 1;
    unsigned long seed = 0;
    app.add_option("--threads", threads,
                   "worker threads for the element loops")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed,
                   "reserved; affects nothing physical")
        ->capture_default_str();

    std::string solve_cfg, conv_cfg, scheme;
    std::vector<double> sample;

    CLI::App* solve = app.add_subcommand("solve", "run one case to steady state");
    solve->add_option("config", solve_cfg, "JSON case file")->required();

    CLI::App* conv =
        app.add_subcommand("converge", "run an h-convergence study");
    conv->add_option("config", conv_cfg, "JSON case file with a study block")
        ->required();

    CLI::App* ft = app.add_subcommand(
        "flux-table", "print the trace-flux decomposition at one state");
    ft->add_option("scheme", scheme, "lf | roe[:delta] | hll | hlle | hllem[:theta0]")
        ->required();
    ft->add_option("values", sample,
                   "10 numbers: uhat (4), element state (4), normal (2)")
        ->expected(10);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return run_solve(solve_cfg, threads);
        if (conv->parsed()) return run_converge(conv_cfg, threads);
        return run_flux_table(scheme, sample);
    } catch (const hdgflow::NonPhysicalState& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hdgflow::exit_non_physical;
    } catch (const hdgflow::MaxIterations& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hdgflow::exit_not_converged;
    } catch (const hdgflow::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hdgflow::exit_usage;
    }
}
