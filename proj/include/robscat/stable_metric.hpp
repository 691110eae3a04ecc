#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "robscat/diagonal.hpp"

namespace robscat {

/// Semi-metric d(a,b) = max_i |a_i - b_i| / sqrt(a_i b_i) on positive diagonals.
/// Invariant under joint scaling and inversion; it is not a metric (no
/// triangle inequality).
double stable_distance(const DiagonalWeights& a, const DiagonalWeights& b);

/// Scalar version (positive reals seen as 1x1 diagonals).
double stable_distance(double a, double b);

/// Raw-array version used by solvers on already-validated data.
double stable_distance_raw(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

/// Log-spaced probe grid, endpoints included. Default span matches the
/// certification grid used across the library.
Eigen::ArrayXd log_grid(double lo = 1e-6, double hi = 1e6, int points = 4096);

struct StabilityReport {
    bool is_stable = false;
    // First adjacent grid pair at which a monotonicity requirement fails.
    std::optional<std::pair<double, double>> first_violation;
};

/// Scalar stability check on a finite grid: t*f(t) must be non-decreasing and
/// f(t)/t non-increasing across consecutive probes (relative tolerance 1e-12).
/// Throws DomainError (carrying the offending probe) if f produces a value
/// that is not strictly positive and finite.
StabilityReport check_stable_on_grid(const std::function<double(double)>& f,
                                     const Eigen::ArrayXd& grid);

/// A candidate weight map u together with its declared bounds and the probe
/// grid on which those declarations are certified. The bounds are metadata:
/// analytic suprema cannot be recovered from an opaque map, so callers declare
/// them and verify_weight_admissibility cross-checks on the grid.
struct WeightFunction {
    std::function<double(double)> eval;
    double u_sup = std::numeric_limits<double>::infinity();        // sup u
    double u_times_sup = std::numeric_limits<double>::infinity();  // sup t*u(t)
    Eigen::ArrayXd admissibility_grid = log_grid();
    std::string name = "custom";

    /// Evaluate at strictly positive t; arguments <= 0 are rejected rather
    /// than extended by limit (stable maps need not have a limit at 0).
    double operator()(double t) const;

    /// Entrywise application.
    Eigen::ArrayXd apply(const Eigen::ArrayXd& t) const;
};

struct AdmissibilityReport {
    bool bounded = false;            // u <= u_sup on grid, u_sup finite
    bool stable = false;             // grid monotonicity of t*u and u/t
    bool u_times_below_one = false;  // t*u(t) <= u_times_sup < 1 on grid
    bool prediction_mode = false;

    bool admissible() const {
        return bounded && stable && (!prediction_mode || u_times_below_one);
    }
    std::string describe() const;
};

/// Certify the declared bounds and the stable-class membership of u on its
/// grid. Report-only: never throws for an inadmissible function.
AdmissibilityReport verify_weight_admissibility(const WeightFunction& u, bool prediction_mode);

// ---- built-in registry ----------------------------------------------------

/// t -> min(t, 1/(1+a*t)); bounded, stable, and t*u(t) -> 1/a at infinity.
WeightFunction min_lin_inv(double a);

/// t -> max(sqrt(t), 1/t); stable but unbounded near 0.
WeightFunction tent_max();

/// t -> 1/sqrt(t); stable but fails both boundedness requirements.
WeightFunction inv_sqrt();

/// Resolve a registry name of the form "min_lin_inv(5)", "tent_max" or
/// "inv_sqrt". Throws ConfigError for unknown names or malformed parameters.
WeightFunction make_weight(const std::string& spec);

}  // namespace robscat
