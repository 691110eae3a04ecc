#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "robscat/diagonal.hpp"

namespace robscat {

/// A self-map of the positive diagonal cone together with the iteration
/// budget. Damping is applied multiplicatively in log-space (geometric
/// interpolation between the current iterate and its image) so iterates stay
/// strictly positive by construction. damping = 1 is pure Picard.
struct FixedPointProblem {
    std::function<DiagonalWeights(const DiagonalWeights&)> map;
    DiagonalWeights init;
    double tol = 1e-12;   // stopping tolerance on the stable semi-metric step
    int max_iter = 1000;
    double damping = 1.0;  // in (0, 1]
};

struct FixedPointSolution {
    DiagonalWeights point;
    int iterations = 0;
    double final_step = 0.0;      // stable-distance between the last two iterates
    double final_step_sup = 0.0;  // same step in sup-norm, recorded for reporting
    std::vector<double> steps;            // per-iteration stable-distance steps
    std::vector<double> observed_rates;   // step ratios step_{k+1}/step_k
    bool converged = false;

    FixedPointSolution() : point(DiagonalWeights::ones(1)) {}
};

/// Picard iteration under the stable semi-metric. Stops when the damped step
/// falls below tol or the budget is exhausted; running out of budget yields
/// converged = false rather than an exception. A non-finite or nonpositive
/// image raises DivergenceError carrying the last valid iterate.
FixedPointSolution solve(const FixedPointProblem& problem);

/// Envelope factors from the iterate-boundedness bound: every Picard iterate
/// of a rate-contracting map lies in
///   [lower * first_iterate_i, upper * first_iterate_i]
/// with (lower, upper) = exp(-+ rate * first_step / (2 (1 - rate))).
std::pair<double, double> iterate_bounds(double first_step, double rate);

/// Damped Picard iteration for complex diagonal systems (the complex-shift
/// extension used by the spectrum solvers; convergence is judged on a
/// scale-free step, callers must verify the defining residual themselves).
struct ComplexFixedPointResult {
    Eigen::ArrayXcd point;
    int iterations = 0;
    double final_step = 0.0;
    bool converged = false;
};

ComplexFixedPointResult solve_complex_diagonal(
    const std::function<Eigen::ArrayXcd(const Eigen::ArrayXcd&)>& map,
    const Eigen::ArrayXcd& init, double tol = 1e-13, int max_iter = 20000,
    double damping = 0.5);

}  // namespace robscat
