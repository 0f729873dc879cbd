// Experiment runner: one subcommand per verification pipeline.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mlnl/experiments.hpp"

namespace fs = std::filesystem;
using namespace mlnl;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2 };

using Runner = RunResult (*)(const Config&, ArtifactSink&);

const std::vector<std::pair<std::string, Runner>>& runners() {
    static const std::vector<std::pair<std::string, Runner>> r = {
        {"verify-lemma61", run_verify_expansion}, {"counterexample", run_counterexample}, {"solve", run_solve},
        {"barriers", run_barriers},             {"norms", run_norms}};
    return r;
}

void apply_override(Config& cfg, const std::string& item) {
    auto eq = item.find('=');
    auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("--set expects section.key=value, got '" + item + "'");
    std::string text = "[" + item.substr(0, dot) + "]\n" + item.substr(dot + 1, eq - dot - 1) + " = " + item.substr(eq + 1) + "\n";
    Config one = parse_config_text(text, "--set");
    const std::string sec = item.substr(0, dot), key = detail::trim(item.substr(dot + 1, eq - dot - 1));
    cfg[sec][key] = one[sec][key];
}

void list_cases(const std::string& cmd, const Config& cfg) {
    RunResult scratch;
    if (cmd == "verify-lemma61") {
        for (const auto& c : expansion_cases(cfg.at(cmd), scratch))
            std::printf("s=%s alpha=%s j=%d\n", c.order.str().c_str(), format_value(c.atom.alpha).c_str(), c.atom.j);
    } else if (cmd == "counterexample") {
        const auto& sec = cfg.at(cmd);
        for (double x : geometric_points(sec.at("x_lo").get<double>(), sec.at("x_hi").get<double>(), sec.at("points").get<int>()))
            std::printf("%.17g\n", x);
    } else if (cmd == "barriers") {
        for (double l : parse_doubles(cfg.at(cmd).at("lambdas").get<std::string>(), "barriers.lambdas")) std::printf("lambda=%g\n", l);
        for (const auto& o : split_list(cfg.at(cmd).at("distance_orders").get<std::string>())) std::printf("distance s=%s\n", o.c_str());
    } else if (cmd == "solve") {
        for (const auto& n : coefficient_names()) std::printf("coefficient %s\n", n.c_str());
        for (const auto& [n, f] : kernel_registry()) std::printf("kernel %s\n", n.c_str());
    } else if (cmd == "norms") {
        std::printf("weighted Poisson, f=%s, per_side=%d and %d\n", cfg.at(cmd).at("f").get<std::string>().c_str(),
                    cfg.at(cmd).at("per_side").get<int>(), 2 * cfg.at(cmd).at("per_side").get<int>());
    } else {
        for (const auto& [n, r] : runners()) std::printf("%s\n", n.c_str());
    }
}

void print_summary(const RunResult& r) {
    std::printf("== %s\n", r.command.c_str());
    for (const auto& n : r.notices) std::printf("note: %s\n", n.c_str());
    for (const auto& c : r.checks) {
        if (c.relation == "flag")
            std::printf("%s  %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str());
        else
            std::printf("%s  %s = %.6g (%s %.3g)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(), c.bound);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed local-nonlocal operator toolkit"};
    app.set_version_flag("--version", kToolkitVersion);
    std::string config_path, out_dir = "mlnl_out";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool as_json = false, list = false, print_defaults = false;
    app.add_option("--config", config_path, "config file (key = value sections, or JSON)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "seed for randomized checks");
    app.add_option("--set", overrides, "override one key: section.key=value");
    app.add_flag("--json", as_json, "print the manifest as JSON");
    app.add_flag("--list", list, "list the cases a command would run");
    app.add_flag("--print-defaults", print_defaults, "print the default config and exit");
    std::vector<std::string> names;
    for (const auto& [n, r] : runners()) names.push_back(n);
    names.push_back("all");
    for (const auto& n : names) app.add_subcommand(n, "run " + n)->fallthrough();
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }
    if (print_defaults) {
        std::cout << to_config_text(default_config());
        return kPass;
    }
    if (app.get_subcommands().empty()) {
        if (list) {
            list_cases("", default_config());
            return kPass;
        }
        std::cerr << "a command is required; see --help\n";
        return kUsage;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    Config cfg;
    try {
        cfg = config_path.empty() ? default_config() : load_config(config_path);
        for (const auto& o : overrides) apply_override(cfg, o);
        if (seed) cfg["solve"]["seed"] = *seed;
        if (list) {
            list_cases(cmd, cfg);
            return kPass;
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    }

    std::vector<std::pair<std::string, Runner>> todo;
    for (const auto& r : runners())
        if (cmd == "all" || cmd == r.first) todo.push_back(r);

    bool all_pass = true;
    nlohmann::json combined = nlohmann::json::array();
    const std::uint64_t used_seed = cfg["solve"]["seed"].get<std::uint64_t>();
    for (const auto& [name, run] : todo) {
        const fs::path dir = cmd == "all" ? fs::path(out_dir) / name : fs::path(out_dir);
        auto t0 = std::chrono::steady_clock::now();
        RunResult res;
        try {
            ArtifactSink sink(dir);
            res = run(cfg, sink);
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            nlohmann::json m = manifest(res, cfg, used_seed, wall);
            std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
            if (as_json) std::cout << m.dump(2) << '\n';
            else print_summary(res);
            combined.push_back({{"command", name}, {"pass", res.pass()}});
        } catch (const ConfigError& e) {
            std::cerr << name << ": config error: " << e.what() << '\n';
            return kUsage;
        } catch (const ModelError& e) {
            std::cerr << name << ": model error: " << e.what() << '\n';
            return kUsage;
        } catch (const std::exception& e) {
            std::cerr << name << ": failed: " << e.what() << '\n';
            combined.push_back({{"command", name}, {"pass", false}, {"error", e.what()}});
            all_pass = false;
            continue;
        }
        all_pass = all_pass && res.pass();
    }
    if (cmd == "all") {
        std::ofstream(fs::path(out_dir) / "manifest.json")
            << nlohmann::json{{"toolkit", "mlnl"}, {"version", kToolkitVersion}, {"config_hash", config_hash(cfg)},
                              {"pass", all_pass}, {"commands", combined}}.dump(2)
            << '\n';
    }
    return all_pass ? kPass : kFail;
}
