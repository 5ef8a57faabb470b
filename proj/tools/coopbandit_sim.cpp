// Command-line driver for cooperative bandit sweeps.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "coopbandit/experiment.hpp"
#include "coopbandit/verify.hpp"

namespace {

int run_verify(const coopbandit::ExperimentSpec& spec)
{
    const auto results = coopbandit::run_verification(spec.seed);
    coopbandit::write_verification_summary(std::cout, results);
    std::filesystem::create_directories(spec.out);
    std::ofstream csv(std::filesystem::path(spec.out) / "verification.csv");
    if (!csv) {
        throw std::runtime_error("cannot write to output directory " + spec.out);
    }
    coopbandit::write_verification_csv(csv, results);
    for (const auto& r : results) {
        if (r.failures != 0) {
            return 1;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cooperative bandits on agent networks with feedback graphs"};
    app.option_defaults()->always_capture_default(false);

    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "key=value settings file; flags override it")->check(CLI::ExistingFile);

    std::map<std::string, std::string> values;
    const std::map<std::string, std::string> described{
        {"agents", "number of agents A"},
        {"arms", "number of arms K"},
        {"horizon", "rounds T"},
        {"q-grid", "comma-separated activation probabilities"},
        {"pnet-grid", "comma-separated edge probabilities of the agent network"},
        {"pfeed-grid", "comma-separated edge probabilities of the feedback graph"},
        {"n-delay", "communication radius n"},
        {"f-delay", "feedback radius f"},
        {"reps", "repetitions per cell"},
        {"seed", "master seed"},
        {"eta-policy", "fixed:<eta> | tuned | doubling | doubling-reset"},
        {"out", "output directory"},
        {"losses", "CSV loss table (rows = rounds) replacing the stochastic losses"},
        {"exact-limit", "largest graph solved exactly for independence numbers"},
        {"threads", "worker threads (0 = hardware concurrency)"},
        {"trace-stride", "write every k-th round to the trace files"},
    };
    for (const auto& [key, help] : described) {
        app.add_option_function<std::string>(
            "--" + key, [&values, key = key](const std::string& v) { values[key] = v; }, help);
    }
    const std::map<std::string, std::string> flags{
        {"baseline-only", "run only the non-cooperative baseline"},
        {"coop-only", "run only the cooperative algorithm"},
        {"verify", "run the inequality and unbiasedness suites instead of a sweep"},
    };
    for (const auto& [key, help] : flags) {
        app.add_flag_callback("--" + key, [&values, key = key] { values[key] = "true"; }, help);
    }
    app.get_option("--baseline-only")->excludes("--coop-only");

    CLI11_PARSE(app, argc, argv);

    try {
        const coopbandit::ExperimentSpec spec = coopbandit::parse_config(config_path, values);
        if (spec.verify) {
            return run_verify(spec);
        }
        coopbandit::run_experiment(spec, &std::cerr);
        std::cout << "wrote " << (std::filesystem::path(spec.out) / "summary.csv").string() << '\n';
    } catch (const coopbandit::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
