#include "robscat/config.hpp"

#include <fstream>
#include <sstream>

#include "robscat/csv.hpp"
#include "robscat/stable_metric.hpp"

namespace robscat {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + v +
                          "'");
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not a key = value pair");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config: empty key or value at line " + std::to_string(lineno));

        if (key == "kind") cfg.kind = val;
        else if (key == "p") cfg.p = static_cast<int>(parse_long(key, val));
        else if (key == "n") cfg.n = static_cast<int>(parse_long(key, val));
        else if (key == "tau") cfg.tau = val;
        else if (key == "signal_scale") cfg.signal_scale = parse_double(key, val);
        else if (key == "mixing_normalize") cfg.mixing_normalize = parse_bool(key, val);
        else if (key == "moment_draws") cfg.moment_draws = parse_long(key, val);
        else if (key == "data") cfg.data = val;
        else if (key == "moments_c") cfg.moments_c = val;
        else if (key == "moments_mu") cfg.moments_mu = val;
        else if (key == "weight") cfg.weight = val;
        else if (key == "gamma") cfg.gamma = parse_double(key, val);
        else if (key == "u_route") cfg.u_route = val;
        else if (key == "grid_min") cfg.grid_min = parse_double(key, val);
        else if (key == "grid_max") cfg.grid_max = parse_double(key, val);
        else if (key == "grid_points") cfg.grid_points = static_cast<int>(parse_long(key, val));
        else if (key == "grid_eps") cfg.grid_eps = parse_double(key, val);
        else if (key == "z_probe") cfg.z_probe = parse_double(key, val);
        else if (key == "trials") cfg.trials = static_cast<int>(parse_long(key, val));
        else if (key == "seed") cfg.seed = parse_u64(key, val);
        else if (key == "out") cfg.out = val;
        else if (key == "threads") cfg.threads = static_cast<int>(parse_long(key, val));
        else if (key == "tol") cfg.tol = parse_double(key, val);
        else if (key == "max_iter") cfg.max_iter = static_cast<int>(parse_long(key, val));
        else if (key == "with_signal") cfg.with_signal = parse_bool(key, val);
        else if (key == "alignment") cfg.alignment = parse_bool(key, val);
        else if (key == "concentration_study") cfg.concentration_study = parse_bool(key, val);
        else if (key == "mc_scales") cfg.mc_scales = val;
        else
            throw ConfigError("config: unknown key '" + key + "' at line " +
                              std::to_string(lineno));
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str());
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
    add("kind", kind);
    add("p", std::to_string(p));
    add("n", std::to_string(n));
    add("tau", tau);
    add("signal_scale", format_g17(signal_scale));
    add("mixing_normalize", mixing_normalize ? "true" : "false");
    add("moment_draws", std::to_string(moment_draws));
    add("data", data);
    add("moments_c", moments_c);
    add("moments_mu", moments_mu);
    add("weight", weight);
    add("gamma", format_g17(gamma));
    add("u_route", u_route);
    add("grid_min", format_g17(grid_min));
    add("grid_max", format_g17(grid_max));
    add("grid_points", std::to_string(grid_points));
    add("grid_eps", format_g17(grid_eps));
    add("z_probe", format_g17(z_probe));
    add("trials", std::to_string(trials));
    add("seed", std::to_string(seed));
    add("out", out);
    add("threads", std::to_string(threads));
    add("tol", format_g17(tol));
    add("max_iter", std::to_string(max_iter));
    add("with_signal", with_signal ? "true" : "false");
    add("alignment", alignment ? "true" : "false");
    add("concentration_study", concentration_study ? "true" : "false");
    add("mc_scales", mc_scales);
    return kv;
}

std::string ExperimentConfig::echo_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : echo()) os << k << " = " << v << '\n';
    return os.str();
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
    // splitmix64 step keyed by the trial index
    std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(trial) + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

GeneratorSpec ExperimentConfig::generator(int trial) const {
    GeneratorSpec spec;
    if (kind == "gaussian") spec.kind = GeneratorSpec::Kind::gaussian;
    else if (kind == "sin_correlated") spec.kind = GeneratorSpec::Kind::sin_correlated;
    else if (kind == "custom_lipschitz")
        throw ConfigError("config: custom_lipschitz generators need an embedded column map and "
                          "are not addressable from a config file");
    else
        throw ConfigError("config: unknown generator kind '" + kind + "'");
    spec.p = p;
    spec.n = n;
    spec.tau_law = parse_tau_law(tau);
    spec.signal_scale = signal_scale;
    spec.normalize_mixing = mixing_normalize;
    spec.seed = (trial == 0) ? seed : trial_seed(seed, trial);
    return spec;
}

void ExperimentConfig::validate(bool needs_grid) const {
    if (weight.empty()) throw ConfigError("config: 'weight' is required");
    try {
        (void)make_weight(weight);
    } catch (const ConfigError&) {
        throw;
    }
    if (!std::isfinite(gamma) || !(gamma > 0.0))
        throw ConfigError("config: 'gamma' is required and must be positive");
    if (external_data()) {
        if (moments_c.empty() && needs_grid)
            throw ConfigError("config: external data needs 'moments_c' (moments are never "
                              "estimated from the analyzed sample itself)");
    } else {
        if (p < 1 || n < 1) throw ConfigError("config: p and n must be >= 1");
        (void)generator(0);  // validates kind and tau law
    }
    if (needs_grid) {
        if (!std::isfinite(grid_min) || !std::isfinite(grid_max) || grid_points < 1)
            throw ConfigError("config: density grid needs grid_min, grid_max, grid_points >= 1");
        if (grid_points > 1 && !(grid_max > grid_min))
            throw ConfigError("config: grid_max must exceed grid_min");
        if (std::isfinite(grid_eps) && !(grid_eps > 0.0))
            throw ConfigError("config: grid_eps must be positive");
    }
    if (trials < 1) throw ConfigError("config: trials must be >= 1");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("config: tol must be positive");
    if (max_iter < 1) throw ConfigError("config: max_iter must be >= 1");
    if (u_route != "via_tilde_d" && u_route != "direct")
        throw ConfigError("config: u_route must be 'via_tilde_d' or 'direct'");
}

}  // namespace robscat
