#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robscat/datagen.hpp"

namespace robscat {

/// Flat key -> value experiment configuration. The file format is one
/// `key = value` pair per line, `#` comments, unknown keys rejected. The
/// canonical echo of a parsed config is sufficient to re-run the experiment
/// and is the content that gets hashed into every summary.
struct ExperimentConfig {
    // synthetic generator (used when data is empty)
    std::string kind = "gaussian";  // gaussian | sin_correlated
    int p = 0, n = 0;
    std::string tau = "constant(1)";
    double signal_scale = 0.0;
    bool mixing_normalize = true;
    long moment_draws = -1;  // default p*p

    // external data (columns = samples); moments must be supplied alongside
    std::string data;        // p x n numeric csv
    std::string moments_c;   // p x p second-moment csv
    std::string moments_mu;  // optional p x 1 mean csv

    std::string weight;             // registry name, required
    double gamma = std::numeric_limits<double>::quiet_NaN();  // required
    std::string u_route = "via_tilde_d";  // or "direct"

    // density grid
    double grid_min = std::numeric_limits<double>::quiet_NaN();
    double grid_max = std::numeric_limits<double>::quiet_NaN();
    int grid_points = 0;
    double grid_eps = std::numeric_limits<double>::quiet_NaN();  // auto when NaN
    double z_probe = 1.0;  // real shift for the trace-error diagnostic

    int trials = 1;
    std::uint64_t seed = 0;
    std::string out = "out";
    int threads = 1;
    double tol = 1e-12;
    int max_iter = 5000;

    bool with_signal = true;
    bool alignment = false;
    bool concentration_study = false;
    std::string mc_scales = "1,4";  // mc-study size multipliers

    static ExperimentConfig from_file(const std::filesystem::path& path);
    static ExperimentConfig from_string(const std::string& text);

    /// Canonical ordered key=value echo (every effective setting).
    std::vector<std::pair<std::string, std::string>> echo() const;
    std::string echo_text() const;

    bool external_data() const { return !data.empty(); }

    /// Generator spec for a given trial (trial-decorrelated seed).
    GeneratorSpec generator(int trial = 0) const;

    /// Mode-specific validation; throws ConfigError with a reason.
    void validate(bool needs_grid) const;
};

/// Trial-decorrelated seed stream (splitmix step of the base seed).
std::uint64_t trial_seed(std::uint64_t base, int trial);

}  // namespace robscat
