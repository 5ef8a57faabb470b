#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coopbandit/environment.hpp"
#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/independence.hpp"
#include "coopbandit/rng.hpp"
#include "coopbandit/simulator.hpp"

namespace coopbandit {

/// Bad configuration key or value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { both, coop_only, baseline_only };

/// A sweep over activation probability q and Erdős–Rényi densities of the
/// communication and feedback graphs. Defaults reproduce the reference
/// study: T = 10000, K = 20, A = 20, unit delays, 20 repetitions.
struct ExperimentSpec {
    std::size_t agents = 20;
    std::size_t arms = 20;
    Round horizon = 10000;
    std::vector<double> q_grid{0.05, 0.5, 1.0};
    std::vector<double> pnet_grid{0.2, 0.8};
    std::vector<double> pfeed_grid{0.2, 0.8};
    std::size_t n_delay = 1;
    std::size_t f_delay = 1;
    std::size_t reps = 20;
    std::uint64_t seed = 1;
    EtaPolicy eta = EtaPolicy::doubling(false);
    RunMode mode = RunMode::both;
    std::string out = "results";
    bool verify = false;
    /// Optional CSV loss file replacing the stochastic benchmark.
    std::string losses;
    std::size_t exact_limit = kDefaultExactLimit;
    std::size_t threads = 0;
    /// Write every trace_stride-th round to the trace files (the last round
    /// is always written).
    std::size_t trace_stride = 1;
    bool write_traces = true;

    void validate() const
    {
        auto check_grid = [](const std::vector<double>& g, const char* key) {
            if (g.empty()) {
                throw ConfigError(std::string(key) + ": grid is empty");
            }
            for (double x : g) {
                if (!(x >= 0.0 && x <= 1.0)) {
                    throw ConfigError(std::string(key) + ": value " + format_double(x) + " outside [0, 1]");
                }
            }
        };
        check_grid(q_grid, "q-grid");
        check_grid(pnet_grid, "pnet-grid");
        check_grid(pfeed_grid, "pfeed-grid");
        for (double q : q_grid) {
            if (!(q > 0.0)) {
                throw ConfigError("q-grid: activation probability must be positive");
            }
        }
        if (agents < 1) {
            throw ConfigError("agents: must be at least 1");
        }
        if (arms < 2) {
            throw ConfigError("arms: must be at least 2");
        }
        if (horizon < 1) {
            throw ConfigError("horizon: must be at least 1");
        }
        if (reps < 1) {
            throw ConfigError("reps: must be at least 1");
        }
        if (trace_stride < 1) {
            throw ConfigError("trace-stride: must be at least 1");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return {};
    }
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v.front() == '-') {
            throw std::invalid_argument("negative");
        }
        x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw ConfigError(key + ": expected a nonnegative integer, got \"" + v + "\"");
    }
    return x;
}

inline double parse_real(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw ConfigError(key + ": expected a number, got \"" + v + "\"");
    }
    return x;
}

inline std::vector<double> parse_grid(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(parse_real(key, trim(cell)));
    }
    if (out.empty()) {
        throw ConfigError(key + ": empty list");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v.empty()) {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(key + ": expected true or false, got \"" + v + "\"");
}

inline std::string grid_string(const std::vector<double>& g)
{
    std::string s;
    for (std::size_t k = 0; k < g.size(); ++k) {
        s += (k ? "," : "") + format_double(g[k]);
    }
    return s;
}

} // namespace detail

/// Keys accepted in config files and as --flags.
inline const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys{
        "agents",  "arms",      "horizon", "q-grid", "pnet-grid",    "pfeed-grid",  "n-delay",     "f-delay",
        "reps",    "seed",      "eta-policy", "baseline-only", "coop-only", "out", "verify", "losses",
        "exact-limit", "threads", "trace-stride"};
    return keys;
}

/// Applies key=value settings on top of `spec`.
inline ExperimentSpec apply_settings(ExperimentSpec spec, const std::map<std::string, std::string>& kv)
{
    using namespace detail;
    for (const auto& [key, value] : kv) {
        if (key == "agents") {
            spec.agents = parse_unsigned(key, value);
        } else if (key == "arms") {
            spec.arms = parse_unsigned(key, value);
        } else if (key == "horizon") {
            spec.horizon = static_cast<Round>(parse_unsigned(key, value));
        } else if (key == "q-grid") {
            spec.q_grid = parse_grid(key, value);
        } else if (key == "pnet-grid") {
            spec.pnet_grid = parse_grid(key, value);
        } else if (key == "pfeed-grid") {
            spec.pfeed_grid = parse_grid(key, value);
        } else if (key == "n-delay") {
            spec.n_delay = parse_unsigned(key, value);
        } else if (key == "f-delay") {
            spec.f_delay = parse_unsigned(key, value);
        } else if (key == "reps") {
            spec.reps = parse_unsigned(key, value);
        } else if (key == "seed") {
            spec.seed = parse_unsigned(key, value);
        } else if (key == "eta-policy") {
            try {
                spec.eta = EtaPolicy::parse(value);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key + ": " + e.what());
            }
        } else if (key == "baseline-only") {
            if (parse_bool(key, value)) {
                spec.mode = RunMode::baseline_only;
            } else if (spec.mode == RunMode::baseline_only) {
                spec.mode = RunMode::both;
            }
        } else if (key == "coop-only") {
            if (parse_bool(key, value)) {
                spec.mode = RunMode::coop_only;
            } else if (spec.mode == RunMode::coop_only) {
                spec.mode = RunMode::both;
            }
        } else if (key == "out") {
            if (value.empty()) {
                throw ConfigError("out: empty path");
            }
            spec.out = value;
        } else if (key == "verify") {
            spec.verify = parse_bool(key, value);
        } else if (key == "losses") {
            spec.losses = value;
        } else if (key == "exact-limit") {
            spec.exact_limit = parse_unsigned(key, value);
        } else if (key == "threads") {
            spec.threads = parse_unsigned(key, value);
        } else if (key == "trace-stride") {
            spec.trace_stride = parse_unsigned(key, value);
        } else {
            throw ConfigError("unknown key \"" + key + "\"");
        }
    }
    if (kv.count("baseline-only") && kv.count("coop-only") && parse_bool("baseline-only", kv.at("baseline-only"))
        && parse_bool("coop-only", kv.at("coop-only"))) {
        throw ConfigError("baseline-only and coop-only are mutually exclusive");
    }
    spec.validate();
    return spec;
}

/// Flat key=value file. Blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> read_config_file(std::istream& in)
{
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": missing key");
        }
        const auto& keys = config_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
        }
        kv[key] = value;
    }
    return kv;
}

/// Settings from an optional file, overridden by flags.
inline ExperimentSpec parse_config(const std::optional<std::string>& path,
                                   const std::map<std::string, std::string>& flags = {})
{
    std::map<std::string, std::string> kv;
    if (path) {
        std::ifstream in(*path);
        if (!in) {
            throw ConfigError("cannot open config file " + *path);
        }
        kv = read_config_file(in);
    }
    for (const auto& [k, v] : flags) {
        kv[k] = v;
    }
    return apply_settings(ExperimentSpec{}, kv);
}

/// All settings as a config file that parse_config reads back unchanged.
inline void write_config(std::ostream& out, const ExperimentSpec& spec)
{
    out << "agents=" << spec.agents << '\n'
        << "arms=" << spec.arms << '\n'
        << "horizon=" << spec.horizon << '\n'
        << "q-grid=" << detail::grid_string(spec.q_grid) << '\n'
        << "pnet-grid=" << detail::grid_string(spec.pnet_grid) << '\n'
        << "pfeed-grid=" << detail::grid_string(spec.pfeed_grid) << '\n'
        << "n-delay=" << spec.n_delay << '\n'
        << "f-delay=" << spec.f_delay << '\n'
        << "reps=" << spec.reps << '\n'
        << "seed=" << spec.seed << '\n'
        << "eta-policy=" << spec.eta.to_string() << '\n'
        << "baseline-only=" << (spec.mode == RunMode::baseline_only ? "true" : "false") << '\n'
        << "coop-only=" << (spec.mode == RunMode::coop_only ? "true" : "false") << '\n'
        << "out=" << spec.out << '\n'
        << "verify=" << (spec.verify ? "true" : "false") << '\n';
    if (!spec.losses.empty()) {
        out << "losses=" << spec.losses << '\n';
    }
    out << "exact-limit=" << spec.exact_limit << '\n' << "trace-stride=" << spec.trace_stride << '\n';
}

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mean and sample standard deviation, summed in order.
inline Moments moments(const std::vector<double>& xs)
{
    Moments m;
    if (xs.empty()) {
        return m;
    }
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    m.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - m.mean) * (x - m.mean);
        }
        m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

struct CellResult {
    std::size_t index = 0;
    double q = 0.0;
    double p_net = 0.0;
    double p_feed = 0.0;
    double mass = 0.0;
    std::size_t alpha_net = 0;
    std::size_t alpha_feed = 0;
    /// Final R_T / Q per repetition.
    std::vector<double> coop_final;
    std::vector<double> base_final;
    std::size_t clamp_hits = 0;

    Moments coop() const { return moments(coop_final); }
    Moments base() const { return moments(base_final); }
};

inline constexpr std::string_view kSummaryHeader =
    "cell,q,p_net,p_feed,Q,alpha_net,alpha_feed,reps,coop_mean,coop_std,base_mean,base_std";

inline std::string cell_directory_name(const CellResult& c)
{
    return "cell_" + std::to_string(c.index) + "_q" + format_double(c.q) + "_pn" + format_double(c.p_net) + "_pf"
           + format_double(c.p_feed);
}

namespace detail {

/// Runs body(0..count-1) on up to `threads` workers.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body)
{
    if (threads == 0) {
        threads = std::max(1U, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) {
            body(k);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            (void)w;
            for (std::size_t k = next++; k < count && !failed; k = next++) {
                try {
                    body(k);
                } catch (...) {
                    if (!failed.exchange(true)) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

inline void write_traces(const std::filesystem::path& file, const std::vector<RegretTrace>& traces, double mass,
                         std::size_t stride)
{
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    out << kTraceHeader << '\n';
    for (std::size_t rep = 0; rep < traces.size(); ++rep) {
        if (stride == 1) {
            write_trace_rows(out, rep, traces[rep], mass);
            continue;
        }
        const auto& tr = traces[rep];
        for (std::size_t idx = 0; idx < tr.active.size(); ++idx) {
            if ((idx + 1) % stride != 0 && idx + 1 != tr.active.size()) {
                continue;
            }
            out << rep << ',' << (idx + 1) << ',' << tr.active[idx] << ',' << format_double(tr.incurred_cum[idx])
                << ',' << format_double(tr.regret_cum[idx]) << ',' << format_double(tr.regret_cum[idx] / mass)
                << '\n';
        }
    }
    if (!out) {
        throw std::runtime_error("error writing " + file.string());
    }
}

} // namespace detail

/// Graphs for a cell: N depends only on p_net's grid index and F only on
/// p_feed's, so each realization is reused across the whole sweep.
inline Graph experiment_network(const ExperimentSpec& spec, std::size_t pnet_index)
{
    Rng rng(stream_key(spec.seed, "network", pnet_index));
    return gen_erdos_renyi(spec.agents, spec.pnet_grid.at(pnet_index), rng);
}

inline Graph experiment_feedback(const ExperimentSpec& spec, std::size_t pfeed_index)
{
    Rng rng(stream_key(spec.seed, "feedback", pfeed_index));
    return gen_erdos_renyi(spec.arms, spec.pfeed_grid.at(pfeed_index), rng);
}

/// Losses shared by every cell: loaded from spec.losses or drawn from the
/// stochastic benchmark.
inline LossTable experiment_losses(const ExperimentSpec& spec)
{
    if (!spec.losses.empty()) {
        std::ifstream in(spec.losses);
        if (!in) {
            throw ConfigError("losses: cannot open " + spec.losses);
        }
        LossTable t = read_loss_table(in);
        if (t.rounds() != spec.horizon || t.arms() != spec.arms) {
            throw ConfigError("losses: file is " + std::to_string(t.rounds()) + " x " + std::to_string(t.arms())
                              + ", expected horizon x arms = " + std::to_string(spec.horizon) + " x "
                              + std::to_string(spec.arms));
        }
        return t;
    }
    Rng rng(stream_key(spec.seed, "losses"));
    return stochastic_bernoulli_losses(spec.arms, spec.horizon, rng);
}

inline ActivationSchedule experiment_activations(const ExperimentSpec& spec, std::size_t q_index)
{
    Rng rng(stream_key(spec.seed, "activations", q_index));
    return sample_activations(std::vector<double>(spec.agents, spec.q_grid.at(q_index)), spec.horizon, rng);
}

inline std::uint64_t repetition_key(const ExperimentSpec& spec, std::size_t rep)
{
    return stream_key(spec.seed, "algorithm", rep);
}

/// Runs the sweep. Cells are ordered q-major, then p_net, then p_feed.
/// With spec.write_traces, writes <out>/config.txt, <out>/summary.csv and a
/// directory per cell holding the graphs and traces_coop.csv /
/// traces_base.csv.
inline std::vector<CellResult> run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr)
{
    namespace fs = std::filesystem;
    spec.validate();
    const fs::path root(spec.out);
    std::ofstream summary;
    if (spec.write_traces) {
        std::error_code ec;
        fs::create_directories(root, ec);
        if (ec || !fs::is_directory(root)) {
            throw std::runtime_error("cannot create output directory " + root.string());
        }
        std::ofstream cfg(root / "config.txt");
        if (!cfg) {
            throw std::runtime_error("cannot write to output directory " + root.string());
        }
        write_config(cfg, spec);
        summary.open(root / "summary.csv");
        if (!summary) {
            throw std::runtime_error("cannot write " + (root / "summary.csv").string());
        }
        summary << kSummaryHeader << '\n';
    }

    const LossTable losses = experiment_losses(spec);
    std::vector<Graph> nets;
    std::vector<std::size_t> alpha_nets;
    for (std::size_t a = 0; a < spec.pnet_grid.size(); ++a) {
        nets.push_back(experiment_network(spec, a));
        alpha_nets.push_back(independence_number(power(nets.back(), spec.n_delay), spec.exact_limit).lower);
    }
    std::vector<Graph> feeds;
    std::vector<std::size_t> alpha_feeds;
    for (std::size_t b = 0; b < spec.pfeed_grid.size(); ++b) {
        feeds.push_back(experiment_feedback(spec, b));
        alpha_feeds.push_back(independence_number(power(feeds.back(), spec.f_delay), spec.exact_limit).lower);
    }

    const bool run_coop = spec.mode != RunMode::baseline_only;
    const bool run_base = spec.mode != RunMode::coop_only;
    // The baseline ignores N, so its traces are shared by all p_net cells.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<RegretTrace>> baseline_cache;

    std::vector<CellResult> results;
    std::size_t cell_index = 0;
    for (std::size_t c = 0; c < spec.q_grid.size(); ++c) {
        const ActivationSchedule activations = experiment_activations(spec, c);
        for (std::size_t a = 0; a < spec.pnet_grid.size(); ++a) {
            for (std::size_t b = 0; b < spec.pfeed_grid.size(); ++b) {
                CellResult cell;
                cell.index = cell_index++;
                cell.q = spec.q_grid[c];
                cell.p_net = spec.pnet_grid[a];
                cell.p_feed = spec.pfeed_grid[b];
                cell.mass = activations.total_mass();
                cell.alpha_net = alpha_nets[a];
                cell.alpha_feed = alpha_feeds[b];

                SimConfig config;
                config.net = nets[a];
                config.feed = feeds[b];
                config.n_delay = spec.n_delay;
                config.f_delay = spec.f_delay;
                config.q = activations.q();
                config.horizon = spec.horizon;
                config.seed = spec.seed;
                config.repetitions = spec.reps;
                config.exact_limit = spec.exact_limit;
                config.eta = spec.eta;

                std::vector<RegretTrace> coop;
                if (run_coop) {
                    SimConfig resolved = config;
                    if (config.eta.kind == EtaPolicy::Kind::tuned) {
                        resolved.eta = EtaPolicy::fixed(resolve_learning_rate(config).fixed_eta);
                    }
                    coop.resize(spec.reps);
                    detail::parallel_for(spec.reps, spec.threads, [&](std::size_t r) {
                        coop[r] = run_simulation(resolved, losses, activations, repetition_key(spec, r));
                    });
                }
                const std::vector<RegretTrace>* base = nullptr;
                if (run_base) {
                    auto key = std::make_pair(c, b);
                    auto it = baseline_cache.find(key);
                    if (it == baseline_cache.end()) {
                        SimConfig isolated = config;
                        isolated.net = gen_edgeless(spec.agents);
                        if (config.eta.kind == EtaPolicy::Kind::tuned) {
                            isolated.eta = EtaPolicy::fixed(resolve_learning_rate(isolated).fixed_eta);
                        }
                        std::vector<RegretTrace> traces(spec.reps);
                        detail::parallel_for(spec.reps, spec.threads, [&](std::size_t r) {
                            traces[r] = run_simulation(isolated, losses, activations, repetition_key(spec, r));
                        });
                        it = baseline_cache.emplace(key, std::move(traces)).first;
                    }
                    base = &it->second;
                }

                for (const auto& tr : coop) {
                    cell.coop_final.push_back(compute_regret(tr, cell.mass).average);
                    cell.clamp_hits += tr.clamp_hits;
                }
                if (base) {
                    for (const auto& tr : *base) {
                        cell.base_final.push_back(compute_regret(tr, cell.mass).average);
                        cell.clamp_hits += tr.clamp_hits;
                    }
                }

                if (spec.write_traces) {
                    const fs::path dir = root / cell_directory_name(cell);
                    fs::create_directories(dir);
                    {
                        std::ofstream g(dir / "net.txt");
                        write_graph(g, config.net);
                        std::ofstream h(dir / "feed.txt");
                        write_graph(h, config.feed);
                    }
                    if (run_coop) {
                        detail::write_traces(dir / "traces_coop.csv", coop, cell.mass, spec.trace_stride);
                    }
                    if (base) {
                        detail::write_traces(dir / "traces_base.csv", *base, cell.mass, spec.trace_stride);
                    }
                    const Moments cm = cell.coop();
                    const Moments bm = cell.base();
                    summary << cell.index << ',' << format_double(cell.q) << ',' << format_double(cell.p_net) << ','
                            << format_double(cell.p_feed) << ',' << format_double(cell.mass) << ',' << cell.alpha_net
                            << ',' << cell.alpha_feed << ',' << spec.reps << ','
                            << (run_coop ? format_double(cm.mean) : "") << ','
                            << (run_coop ? format_double(cm.stddev) : "") << ','
                            << (run_base ? format_double(bm.mean) : "") << ','
                            << (run_base ? format_double(bm.stddev) : "") << '\n';
                    summary.flush();
                }
                if (log) {
                    *log << "cell " << cell.index << " q=" << format_double(cell.q) << " p_net="
                         << format_double(cell.p_net) << " p_feed=" << format_double(cell.p_feed);
                    if (run_coop) {
                        *log << " coop R/Q=" << format_double(cell.coop().mean);
                    }
                    if (run_base) {
                        *log << " base R/Q=" << format_double(cell.base().mean);
                    }
                    *log << '\n';
                }
                results.push_back(std::move(cell));
            }
        }
        // Baseline traces for this q are no longer needed.
        for (auto it = baseline_cache.begin(); it != baseline_cache.end();) {
            it = it->first.first == c ? baseline_cache.erase(it) : std::next(it);
        }
    }
    if (spec.write_traces && !summary) {
        throw std::runtime_error("error writing summary.csv");
    }
    return results;
}

} // namespace coopbandit
