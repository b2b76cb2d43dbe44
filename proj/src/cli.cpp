#include "maccm/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace maccm {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw, const char* type_name) {
    T value{};
    const char* begin = raw.data();
    const char* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || raw.empty()) {
        throw ConfigError(key + ": expected " + type_name + ", got '" + raw + "'");
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ConfigError(key + ": expected boolean (true/false), got '" + raw + "'");
}

void require(bool ok, const std::string& key, const std::string& constraint) {
    if (!ok) throw ConfigError(key + ": must satisfy " + constraint);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"n", [](auto& c, auto& k, auto& v) { c.n = parse_number<int>(k, v, "integer"); }},
        {"d", [](auto& c, auto& k, auto& v) { c.d = parse_number<int>(k, v, "integer"); }},
        {"delta", [](auto& c, auto& k, auto& v) { c.delta = parse_number<double>(k, v, "number"); }},
        {"Delta", [](auto& c, auto& k, auto& v) { c.Delta = parse_number<double>(k, v, "number"); }},
        {"c_min", [](auto& c, auto& k, auto& v) { c.c_min = parse_number<double>(k, v, "number"); }},
        {"K", [](auto& c, auto& k, auto& v) { c.K = parse_number<int>(k, v, "integer"); }},
        {"lambda", [](auto& c, auto& k, auto& v) { c.lambda = parse_number<double>(k, v, "number"); }},
        {"B", [](auto& c, auto& k, auto& v) {
             c.B = v == "auto" ? 0.0 : parse_number<double>(k, v, "number or 'auto'");
         }},
        {"conf_delta", [](auto& c, auto& k, auto& v) { c.conf_delta = parse_number<double>(k, v, "number"); }},
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v, "unsigned integer"); }},
        {"runs", [](auto& c, auto& k, auto& v) { c.runs = parse_number<int>(k, v, "integer"); }},
        {"step_cap", [](auto& c, auto& k, auto& v) {
             c.step_cap = v == "auto" ? 0 : parse_number<int>(k, v, "integer or 'auto'");
         }},
        {"oracle_T_max", [](auto& c, auto& k, auto& v) {
             c.oracle_T_max = v == "auto" ? 0 : parse_number<int>(k, v, "integer or 'auto'");
         }},
        {"clip_renormalize", [](auto& c, auto& k, auto& v) { c.clip_renormalize = parse_bool(k, v); }},
        // Parsed after the loop, once n and d are known.
        {"theta_star_signs", [](auto&, auto&, auto&) {}},
        {"output", [](auto& c, auto&, auto& v) { c.output = v; }},
        {"regret_baseline", [](auto& c, auto& k, auto& v) {
             if (v == "exact_vi") c.regret_baseline = RegretBaseline::ExactVI;
             else if (v == "departure") c.regret_baseline = RegretBaseline::Departure;
             else throw ConfigError(k + ": expected 'exact_vi' or 'departure', got '" + v + "'");
         }},
        {"oracle_costs", [](auto& c, auto& k, auto& v) {
             if (v == "alpha") c.oracle_costs = OracleCosts::Alpha;
             else if (v == "realized") c.oracle_costs = OracleCosts::Realized;
             else throw ConfigError(k + ": expected 'alpha' or 'realized', got '" + v + "'");
         }},
        {"mixing_matrix", [](auto& c, auto&, auto& v) { c.mixing_matrix = v; }},
        {"kappa", [](auto& c, auto& k, auto& v) { c.kappa = parse_number<double>(k, v, "number"); }},
        {"policy", [](auto& c, auto& k, auto& v) {
             if (v == "minmax") c.policy = BehaviorPolicy::MinMax;
             else if (v == "random") c.policy = BehaviorPolicy::UniformRandom;
             else throw ConfigError(k + ": expected 'minmax' or 'random', got '" + v + "'");
         }},
        {"total_steps", [](auto& c, auto& k, auto& v) {
             c.total_steps = parse_number<std::int64_t>(k, v, "integer");
         }},
    };
    return table;
}

void check_ranges(const ExperimentConfig& c) {
    require(c.n >= 1 && c.n <= 8, "n", "1 <= n <= 8");
    require(c.d >= 2 && c.d <= 8, "d", "2 <= d <= 8");
    require(c.n * (c.d - 1) <= 16, "d", "n*(d-1) <= 16 (parameter grid size)");
    require(c.delta > 0.0 && c.delta < 1.0, "delta", "0 < delta < 1");
    require(c.Delta > 0.0 && c.Delta < 1.0, "Delta", "0 < Delta < 1");
    require(c.c_min > 0.0 && c.c_min < 1.0, "c_min", "0 < c_min < 1");
    require(c.K >= 1, "K", "K >= 1");
    require(c.lambda >= 1.0, "lambda", "lambda >= 1");
    require(c.B == 0.0 || c.B >= 1.0, "B", "B >= 1 or auto");
    require(c.conf_delta > 0.0 && c.conf_delta < 1.0, "conf_delta", "0 < conf_delta < 1");
    require(c.runs >= 1, "runs", "runs >= 1");
    require(c.step_cap >= 0, "step_cap", "step_cap >= 1 or auto");
    require(c.oracle_T_max >= 0, "oracle_T_max", "oracle_T_max >= 1 or auto");
    require(c.kappa > 0.0 && c.kappa < 1.0, "kappa", "0 < kappa < 1");
    require(c.total_steps >= 0, "total_steps", "total_steps >= 0");
    require(!c.output.empty(), "output", "non-empty path");
    // Dense tables: pairs × nd × 2^n doubles.
    const double pairs = std::pow(1.0 + std::ldexp(1.0, c.d - 1), c.n);
    require(pairs * c.n * c.d * std::ldexp(1.0, c.n) <= 2e7, "n", "dense feature tables below 2e7 entries");
}

}  // namespace

EnvLookup process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* value = std::getenv(name.c_str())) return std::string(value);
        return std::nullopt;
    };
}

std::vector<std::vector<int>> parse_theta_signs(const std::string& text, int n, int d) {
    std::vector<std::vector<int>> out;
    std::stringstream in(text);
    std::string group;
    while (std::getline(in, group, ',')) {
        group = trim(group);
        std::vector<int> signs;
        for (char ch : group) {
            if (ch == '+') signs.push_back(1);
            else if (ch == '-') signs.push_back(-1);
            else throw ConfigError("theta_star_signs: expected '+' or '-', got '" + std::string(1, ch) + "'");
        }
        if (static_cast<int>(signs.size()) != d - 1) {
            throw ConfigError("theta_star_signs: each group needs d-1 = " + std::to_string(d - 1) + " signs");
        }
        out.push_back(std::move(signs));
    }
    if (static_cast<int>(out.size()) != n) {
        throw ConfigError("theta_star_signs: need n = " + std::to_string(n) + " comma-separated groups");
    }
    return out;
}

ExperimentConfig parse_config(const std::string& source, const EnvLookup& lookup) {
    std::map<std::string, std::string> raw;
    std::istringstream in(source);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!setters().contains(key)) throw ConfigError(key + ": unknown key");
        raw[key] = trim(line.substr(eq + 1));
    }
    if (lookup) {
        for (const auto& [key, setter] : setters()) {
            if (auto value = lookup("MACCM_" + key)) raw[key] = trim(*value);
        }
    }

    ExperimentConfig config;
    for (const auto& [key, value] : raw) setters().at(key)(config, key, value);
    check_ranges(config);
    if (const auto it = raw.find("theta_star_signs"); it != raw.end()) {
        config.theta_star_signs = parse_theta_signs(it->second, config.n, config.d);
    }
    validate_instance_constraints(config);
    return config;
}

ExperimentConfig load_config(const std::string& path, const EnvLookup& lookup) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str(), lookup);
}

EnvParams env_params(const ExperimentConfig& config) {
    EnvParams params;
    params.dims = Dims{config.n, config.d};
    params.delta = config.delta;
    params.Delta = config.Delta;
    params.c_min = config.c_min;
    params.clip_renormalize = config.clip_renormalize;
    params.theta_signs = config.theta_star_signs;
    return params;
}

void validate_instance_constraints(const ExperimentConfig& config) {
    const Dims dims{config.n, config.d};
    const FeatureTable features(dims, config.delta);
    std::vector<ModelParams> thetas;
    if (config.theta_star_signs) {
        thetas.push_back(theta_from_signs(dims, config.Delta, *config.theta_star_signs));
    } else {
        thetas = enumerate_theta_grid(dims, config.Delta);
    }
    for (const auto& theta : thetas) {
        const ThetaValidation check = validate_theta(theta, features, config.clip_renormalize);
        if (!check.valid) {
            throw ConfigError("delta/Delta: parameters do not define a valid transition kernel (" +
                              check.first_violation->describe(features.space()) +
                              "); need Delta <= min(delta, 1-delta)/2^(n-1) or clip_renormalize = true");
        }
    }
    if (!config.mixing_matrix.empty()) {
        try {
            load_consensus_matrix(config.mixing_matrix, config.n, config.kappa);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("mixing_matrix: ") + e.what());
        }
    }
}

OracleSummary compute_oracle(const ExperimentConfig& config) {
    OracleSummary out;
    out.departure = optimal_value_estimate(config.oracle_T_max, config.n, config.c_min, config.delta, config.Delta);
    out.B = config.B > 0.0 ? config.B : std::max(1.0, 2.0 * out.departure.value);
    return out;
}

MaccmConfig maccm_config(const ExperimentConfig& config, double B, double v_star) {
    MaccmConfig mc;
    mc.K = config.K;
    mc.lambda = config.lambda;
    mc.B = B;
    mc.conf_delta = config.conf_delta;
    mc.step_cap = config.step_cap;
    mc.max_total_steps = config.total_steps;
    mc.v_star = v_star;
    mc.policy = config.policy;
    if (!config.mixing_matrix.empty()) mc.mixing = load_consensus_matrix(config.mixing_matrix, config.n, config.kappa);
    return mc;
}

RunOutcome run_single(const ExperimentConfig& config, const OracleSummary& oracle, std::uint64_t seed,
                      bool test_mode) {
    Rng rng(seed);
    const EnvInstance env = EnvInstance::create(env_params(config), rng);
    const Eigen::VectorXd costs = config.oracle_costs == OracleCosts::Alpha
                                      ? alpha_mean_costs(env.features(), config.c_min)
                                      : realized_mean_costs(env);
    RunOutcome out;
    out.seed = seed;
    out.v_star_exact = brute_force_value_iteration(env, costs).v[0];
    out.v_star = config.regret_baseline == RegretBaseline::ExactVI ? out.v_star_exact : oracle.departure.value;
    MaccmConfig mc = maccm_config(config, oracle.B, out.v_star);
    mc.check_optimism = test_mode;
    out.result = run(env, mc, rng);
    return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, bool test_mode) {
    ExperimentOutcome outcome;
    outcome.oracle = compute_oracle(config);
    outcome.runs.resize(static_cast<std::size_t>(config.runs));
    std::vector<std::exception_ptr> errors(outcome.runs.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t r = cursor++; r < outcome.runs.size(); r = cursor++) {
            try {
                outcome.runs[r] = run_single(config, outcome.oracle, config.seed + r, test_mode);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t threads =
        std::min<std::size_t>(outcome.runs.size(), std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return outcome;
}

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::string episode_csv(const RunOutcome& run) {
    std::string out = "episode,steps,true_cost_sum,est_cost_sum,episode_regret,cum_regret,avg_regret,evi_calls,truncated\n";
    double cumulative = 0.0;
    for (const auto& ep : run.result.episodes) {
        double true_sum = 0.0, est_sum = 0.0;
        for (double c : ep.true_costs) true_sum += c;
        for (double c : ep.est_costs) est_sum += c;
        cumulative += ep.regret;
        out += std::to_string(ep.episode) + ',' + std::to_string(ep.steps) + ',' + format_number(true_sum) + ',' +
               format_number(est_sum) + ',' + format_number(ep.regret) + ',' + format_number(cumulative) + ',' +
               format_number(cumulative / ep.episode) + ',' + std::to_string(ep.evi_calls) + ',' +
               (ep.truncated ? "1" : "0") + '\n';
    }
    return out;
}

namespace {

std::vector<double> average_regret_curve(const RunOutcome& run) {
    std::vector<double> curve;
    double cumulative = 0.0;
    for (const auto& ep : run.result.episodes) {
        cumulative += ep.regret;
        curve.push_back(cumulative / ep.episode);
    }
    return curve;
}

}  // namespace

std::string aggregate_csv(const ExperimentOutcome& outcome) {
    std::vector<std::vector<double>> curves;
    std::size_t length = 0;
    for (const auto& run : outcome.runs) {
        curves.push_back(average_regret_curve(run));
        length = std::max(length, curves.back().size());
    }
    std::string out = "episode,mean_avg_regret,stderr\n";
    for (std::size_t e = 0; e < length; ++e) {
        double sum = 0.0, sq = 0.0;
        int count = 0;
        for (const auto& curve : curves) {
            if (e >= curve.size()) continue;
            sum += curve[e];
            sq += curve[e] * curve[e];
            ++count;
        }
        const double mean = sum / count;
        const double var = count > 1 ? std::max(0.0, (sq - count * mean * mean) / (count - 1)) : 0.0;
        out += std::to_string(e + 1) + ',' + format_number(mean) + ',' + format_number(std::sqrt(var / count)) + '\n';
    }
    return out;
}

std::string summary_text(const ExperimentConfig& config, const ExperimentOutcome& outcome) {
    std::ostringstream out;
    const auto& dep = outcome.oracle.departure;
    out << "n = " << config.n << "\nd = " << config.d << "\ndelta = " << format_number(config.delta)
        << "\nDelta = " << format_number(config.Delta) << "\nc_min = " << format_number(config.c_min)
        << "\nK = " << config.K << "\nruns = " << config.runs << "\nseed = " << config.seed
        << "\nclip_renormalize = " << (config.clip_renormalize ? "true" : "false")
        << "\nregret_baseline = " << (config.regret_baseline == RegretBaseline::ExactVI ? "exact_vi" : "departure")
        << "\nB = " << format_number(outcome.oracle.B) << "\nv_star_T = " << format_number(dep.value)
        << "\nv_star_T_mass = " << format_number(dep.mass) << "\nv_star_T_horizon = " << dep.horizon << '\n';
    double final_sum = 0.0;
    for (const auto& run : outcome.runs) {
        const auto& diag = run.result.diagnostics;
        double cumulative = 0.0;
        int truncated = 0;
        for (const auto& ep : run.result.episodes) {
            cumulative += ep.regret;
            truncated += ep.truncated ? 1 : 0;
        }
        const auto episodes = run.result.episodes.size();
        const double avg = episodes ? cumulative / static_cast<double>(episodes) : 0.0;
        final_sum += avg;
        out << "run " << run.seed << ": v_star = " << format_number(run.v_star)
            << ", v_star_exact = " << format_number(run.v_star_exact) << ", cum_regret = " << format_number(cumulative)
            << ", avg_regret = " << format_number(avg) << ", steps = " << diag.total_steps
            << ", evi_calls = " << diag.total_evi_calls << ", call_budget = " << format_number(diag.budget)
            << ", filter_hits = " << diag.filter_hits << "/" << diag.epochs << ", truncated = " << truncated << '\n';
    }
    if (!outcome.runs.empty()) {
        out << "mean_final_avg_regret = " << format_number(final_sum / static_cast<double>(outcome.runs.size()))
            << '\n';
    }
    return out.str();
}

std::string departure_table(const ExperimentConfig& config, const OracleSummary& oracle, int max_rows) {
    std::string out = "t,sequence,source,probability,cost\n";
    const double alpha = departure_alpha(config.c_min);
    const int rows = std::min(oracle.departure.horizon, max_rows);
    for (int t = 1; t <= rows; ++t) {
        const auto [seq, floor_used] = value_sequence(config.n, t, config.c_min);
        std::string xs;
        for (std::size_t j = 0; j < seq.x.size(); ++j) xs += (j ? " " : "") + std::to_string(seq.x[j]);
        const auto p = departure_probability(seq, config.n, config.delta, config.Delta);
        out += std::to_string(t) + ',' + xs + ',' + (floor_used ? "floor" : "integer") + ',' + format_number(p.value) +
               ',' + format_number(departure_cost(seq, alpha, config.c_min, config.n)) + '\n';
    }
    return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    file << contents;
}

}  // namespace

void write_outputs(const std::string& dir, const ExperimentConfig& config, const ExperimentOutcome& outcome) {
    std::filesystem::create_directories(dir);
    for (const auto& run : outcome.runs) {
        write_file(std::filesystem::path(dir) / ("run_" + std::to_string(run.seed) + ".csv"), episode_csv(run));
    }
    write_file(std::filesystem::path(dir) / "aggregate.csv", aggregate_csv(outcome));
    write_file(std::filesystem::path(dir) / "summary.txt", summary_text(config, outcome));
}

void write_oracle_outputs(const std::string& dir, const ExperimentConfig& config, const OracleSummary& oracle) {
    std::filesystem::create_directories(dir);
    const auto& dep = oracle.departure;
    std::ostringstream text;
    text << "v_star_T = " << format_number(dep.value) << "\nmass = " << format_number(dep.mass)
         << "\nhorizon = " << dep.horizon << "\ninteger_fallback_horizons = " << dep.fallback_count
         << "\nout_of_range_horizons = " << dep.out_of_range_count << "\nB = " << format_number(oracle.B) << '\n';
    write_file(std::filesystem::path(dir) / "oracle.txt", text.str());
    write_file(std::filesystem::path(dir) / "departures.csv", departure_table(config, oracle, 1000));
}

}  // namespace maccm
