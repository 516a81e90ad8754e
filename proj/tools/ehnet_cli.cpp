// ehnet: solve, simulate, sweep and export energy-harvesting network models.

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ehnet/ehnet.hpp"

namespace fs = std::filesystem;
using namespace ehnet;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kRefused = 4, kInterrupted = 130 };

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

Scenario load(const Common& c) {
    Scenario sc = c.config.empty() ? parse_scenario_text("", c.overrides) : load_scenario(c.config, c.overrides);
    if (c.seed) sc.sim.seed = *c.seed;
    if (c.trials) sc.sim.trials = *c.trials;
    sc.validate();
    return sc;
}

fs::path out_dir(const Common& c) {
    fs::path dir = c.out;
    if (dir.empty()) {
        const char* env = std::getenv("EHNET_OUT_DIR");
        dir = env && *env ? env : ".";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

void close_out(std::ofstream& os, const fs::path& path) {
    os.close();
    if (!os) throw IoError("write failed: " + path.string());
}

std::string artifact_tag(const Scenario& sc) {
    return "config_hash=" + hex64(sc.hash()) + " seed=" + std::to_string(sc.sim.seed);
}

std::vector<PolicyKind> parse_policies(const std::vector<std::string>& names) {
    std::vector<PolicyKind> out;
    for (const std::string& n : names) {
        auto k = parse_policy_kind(n);
        if (!k) {
            std::string valid;
            for (std::string_view p : kPolicyNames) valid += (valid.empty() ? "" : ", ") + std::string(p);
            throw ConfigError("unknown policy '" + n + "' (valid: " + valid + ")", "--policies");
        }
        out.push_back(*k);
    }
    if (out.empty()) throw ConfigError("policy list is empty", "--policies");
    return out;
}

/// START:END:STEP (inclusive) or a comma-separated list.
std::vector<double> parse_values(const std::string& text) {
    auto number = [](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v))
            throw ConfigError("bad number '" + s + "'", "--values");
        return v;
    };
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("range must be START:END:STEP", "--values");
        const double lo = number(parts[0]), hi = number(parts[1]), step = number(parts[2]);
        if (!(step > 0.0) || hi < lo) throw ConfigError("range needs STEP > 0 and END >= START", "--values");
        const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        if (n > 100000) throw ConfigError("range has too many points", "--values");
        for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');)
            if (!p.empty()) out.push_back(number(p));
    }
    if (out.empty()) throw ConfigError("value list is empty", "--values");
    return out;
}

int cmd_solve(const Common& c) {
    const Scenario sc = load(c);
    const fs::path dir = out_dir(c);
    const NetworkModel model(sc.stations, {}, ModelLimits{sc.solver.max_states});
    const SolveResult res = value_iterate(model, sc.solver);

    const fs::path policy_path = dir / "policy.txt";
    std::ofstream pol = open_out(policy_path);
    write_policy(pol, res.policy, model, sc.solver.gamma, artifact_tag(sc));
    close_out(pol, policy_path);

    const fs::path log_path = dir / "convergence.csv";
    std::ofstream log = open_out(log_path);
    write_convergence_csv(log, res.log, "ehnet solve " + artifact_tag(sc));
    close_out(log, log_path);

    const double last = res.log.empty() ? 0.0 : res.log.back().residual;
    std::printf("states=%d iterations=%zu alphas=%zu residual=%.3g converged=%s\n", model.num_states(),
                res.log.size(), res.policy.alphas.size(), last, res.converged ? "yes" : "no");
    std::printf("wrote %s and %s\n", policy_path.string().c_str(), log_path.string().c_str());
    return kOk;
}

int cmd_simulate(const Common& c, const std::vector<std::string>& policy_names, bool trace) {
    Scenario sc = load(c);
    const std::vector<PolicyKind> kinds =
        parse_policies(policy_names.empty() ? std::vector<std::string>{sc.sim.policy} : policy_names);
    const fs::path dir = out_dir(c);
    const NetworkModel model(sc.stations);

    const fs::path path = dir / "simulate.csv";
    std::ofstream os = open_out(path);
    os << "# ehnet simulate " << artifact_tag(sc) << '\n';
    os << "policy,trial,n_success,n_t,eta_a,feasible_slots,belief_resets\n";

    for (PolicyKind kind : kinds) {
        std::optional<PolicySet> alphas;
        if (kind == PolicyKind::Pomdp) {
            if (model.num_states() > sc.solver.max_states)
                throw SolverRefusal("state space of " + std::to_string(model.num_states()) +
                                    " exceeds solver.max_states; use the energy-based policy instead");
            alphas = value_iterate(model, sc.solver).policy;
        }
        std::vector<double> ms;
        const auto results = run_trials(model, kind, alphas ? &*alphas : nullptr, sc.sim.n_t, sc.sim.trials,
                                        sc.sim.seed, sc.sim.threads, &g_interrupted, &ms);
        for (std::size_t k = 0; k < results.size(); ++k) {
            const TrialResult& r = results[k];
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s,%zu,%lld,%lld,%.10g,%lld,%d\n", std::string(to_string(kind)).c_str(),
                          k, static_cast<long long>(r.n_success), static_cast<long long>(r.n_t), r.eta_a,
                          static_cast<long long>(r.feasible_slots), r.belief_resets);
            os << buf;
        }
        os.flush();
        if (g_interrupted.load()) {
            os << "# truncated: interrupted\n";
            close_out(os, path);
            std::fprintf(stderr, "interrupted; partial results in %s\n", path.string().c_str());
            return kInterrupted;
        }
        const PolicyStats st = summarize(results, ms);
        std::printf("%-8s trials=%d mean_eta_a=%.6f std=%.6f se=%.6f\n", std::string(to_string(kind)).c_str(),
                    st.trials, st.mean_eta_a, st.std_eta_a, st.standard_error());

        if (trace) {
            TrialOptions opt;
            opt.n_t = sc.sim.n_t;
            opt.seed = trial_seed(sc.sim.seed, 0);
            opt.record_trace = true;
            const TrialResult r = run_trial(model, kind, alphas ? &*alphas : nullptr, opt);
            const fs::path tp = dir / ("trace_" + std::string(to_string(kind)) + ".csv");
            std::ofstream ts = open_out(tp);
            ts << "# ehnet trace policy=" << to_string(kind) << " trial=0 " << artifact_tag(sc) << '\n';
            write_trace_csv(ts, r, model.num_stations());
            close_out(ts, tp);
        }
    }
    close_out(os, path);
    std::printf("wrote %s\n", path.string().c_str());
    return kOk;
}

int cmd_sweep(const Common& c, const std::string& param, const std::string& values_text,
              const std::vector<std::string>& policy_names) {
    const Scenario sc = load(c);
    const std::vector<double> values = parse_values(values_text);
    const std::vector<PolicyKind> kinds = parse_policies(policy_names);
    {
        Scenario probe = sc;
        apply_sweep_value(probe, param, values.front());
    }
    const fs::path dir = out_dir(c);
    const fs::path path = dir / "sweep.csv";
    std::ofstream os = open_out(path);
    write_sweep_header(os, sc);
    os.flush();

    SweepOptions opt;
    opt.cancel = &g_interrupted;
    opt.on_row = [&](const SweepRow& r) {
        write_sweep_row(os, r);
        os.flush();
        std::printf("%s=%g %-8s mean_eta_a=%.6f std=%.6f\n", r.param.c_str(), r.value, r.policy.c_str(),
                    r.mean_eta_a, r.std_eta_a);
        std::fflush(stdout);
    };
    const SweepResult res = run_sweep(sc, param, values, kinds, opt);
    for (const std::string& n : res.notices) std::fprintf(stderr, "note: %s\n", n.c_str());
    if (res.truncated) {
        os << "# truncated: interrupted after " << res.rows.size() << " rows\n";
        close_out(os, path);
        std::fprintf(stderr, "interrupted; partial results in %s\n", path.string().c_str());
        return kInterrupted;
    }
    close_out(os, path);
    std::printf("wrote %s (%zu rows)\n", path.string().c_str(), res.rows.size());
    return kOk;
}

int cmd_export(const Common& c, const std::string& file) {
    const Scenario sc = load(c);
    const NetworkModel model(sc.stations);
    const fs::path path = file.empty() ? out_dir(c) / "model.pomdp" : fs::path(file);
    std::ofstream os = open_out(path);
    export_flat_pomdp(os, model, sc.solver.gamma, "ehnet model " + artifact_tag(sc));
    close_out(os, path);
    std::printf("wrote %s (states=%d actions=%d observations=%d)\n", path.string().c_str(), model.num_states(),
                model.num_actions(), model.max_observations());
    return kOk;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Scenario file (INI)")->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "Output directory (default: $EHNET_OUT_DIR or .)");
    sub->add_option("--set", c.overrides, "Override, e.g. --set bs.lambda=0.6 (repeatable)");
    sub->add_option("--seed", c.seed, "Base random seed");
    sub->add_option("--trials", c.trials, "Trials per cell");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting multi-station access: POMDP solver and simulator"};
    app.require_subcommand(1);

    Common common;
    std::vector<std::string> policies;
    std::string param, values, export_file;
    bool trace = false;

    auto* solve = app.add_subcommand("solve", "Solve the POMDP; write policy.txt and convergence.csv");
    add_common(solve, common);

    auto* simulate = app.add_subcommand("simulate", "Run trials; write simulate.csv");
    add_common(simulate, common);
    simulate->add_option("--policies", policies, "Comma-separated policies")->delimiter(',');
    simulate->add_flag("--trace", trace, "Also write a per-slot trace of trial 0");

    auto* sweep = app.add_subcommand("sweep", "Sweep a parameter across policies; write sweep.csv");
    add_common(sweep, common);
    sweep->add_option("--param", param, "lambda or mu_s")->required();
    sweep->add_option("--values", values, "START:END:STEP or comma list")->required();
    sweep->add_option("--policies", policies, "Comma-separated policies")
        ->delimiter(',')
        ->default_str("pomdp,eb,csma_cd,csma_ca,random");

    auto* exp = app.add_subcommand("export", "Write the model in flat POMDP text format");
    add_common(exp, common);
    exp->add_option("--file", export_file, "Output file (default: <out>/model.pomdp)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    std::signal(SIGINT, on_sigint);
    try {
        if (*solve) return cmd_solve(common);
        if (*simulate) return cmd_simulate(common, policies, trace);
        if (*sweep) {
            if (policies.empty()) policies = {"pomdp", "eb", "csma_cd", "csma_ca", "random"};
            return cmd_sweep(common, param, values, policies);
        }
        if (*exp) return cmd_export(common, export_file);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kIo;
    } catch (const SolverRefusal& e) {
        std::fprintf(stderr, "solver refused: %s\n", e.what());
        return kRefused;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kOk;
}
