#include "robscat/fixed_point.hpp"

#include <cmath>

namespace robscat {

namespace {

bool valid_positive(const Eigen::ArrayXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]) || v[i] <= 0.0) return false;
    return true;
}

}  // namespace

FixedPointSolution solve(const FixedPointProblem& problem) {
    if (!(problem.tol > 0.0)) throw DomainError("fixed_point::solve: tol must be positive");
    if (problem.max_iter < 1) throw DomainError("fixed_point::solve: max_iter must be >= 1");
    if (!(problem.damping > 0.0) || problem.damping > 1.0)
        throw DomainError("fixed_point::solve: damping must lie in (0, 1]");

    const double alpha = problem.damping;
    Eigen::ArrayXd x = problem.init.array();

    FixedPointSolution sol;
    sol.steps.reserve(static_cast<size_t>(problem.max_iter));

    for (int k = 0; k < problem.max_iter; ++k) {
        Eigen::ArrayXd y = problem.map(DiagonalWeights(x)).array();
        if (y.size() != x.size())
            throw DimensionError("fixed_point::solve: map changed the dimension");
        if (!valid_positive(y))
            throw DivergenceError("fixed_point::solve: map produced a non-finite or "
                                  "nonpositive iterate",
                                  std::vector<double>(x.data(), x.data() + x.size()));

        Eigen::ArrayXd next =
            (alpha == 1.0) ? y : Eigen::ArrayXd((x.log() * (1.0 - alpha) + y.log() * alpha).exp());

        const double step = stable_distance_raw(next, x);
        const double step_sup = (next - x).abs().maxCoeff();
        if (!sol.steps.empty() && sol.steps.back() > 0.0)
            sol.observed_rates.push_back(step / sol.steps.back());
        sol.steps.push_back(step);

        x = std::move(next);
        sol.iterations = k + 1;
        sol.final_step = step;
        sol.final_step_sup = step_sup;
        if (step <= problem.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.point = DiagonalWeights(x);
    return sol;
}

std::pair<double, double> iterate_bounds(double first_step, double rate) {
    if (first_step < 0.0) throw DomainError("iterate_bounds: first_step must be >= 0");
    if (rate < 0.0 || rate >= 1.0) throw DomainError("iterate_bounds: rate must lie in [0, 1)");
    const double e = rate * first_step / (2.0 * (1.0 - rate));
    return {std::exp(-e), std::exp(e)};
}

ComplexFixedPointResult solve_complex_diagonal(
    const std::function<Eigen::ArrayXcd(const Eigen::ArrayXcd&)>& map,
    const Eigen::ArrayXcd& init, double tol, int max_iter, double damping) {
    ComplexFixedPointResult res;
    Eigen::ArrayXcd x = init;
    for (int k = 0; k < max_iter; ++k) {
        Eigen::ArrayXcd y = map(x);
        Eigen::ArrayXcd next = x + damping * (y - x);
        // scale-free step: |next - x| relative to the local magnitude
        double step = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double scale = std::max({std::abs(x[i]), std::abs(next[i]), 1e-300});
            step = std::max(step, std::abs(next[i] - x[i]) / scale);
            if (!std::isfinite(next[i].real()) || !std::isfinite(next[i].imag())) {
                res.point = x;
                res.iterations = k + 1;
                res.final_step = std::numeric_limits<double>::infinity();
                return res;
            }
        }
        x = std::move(next);
        res.iterations = k + 1;
        res.final_step = step;
        if (step <= tol) {
            res.converged = true;
            break;
        }
    }
    res.point = std::move(x);
    return res;
}

}  // namespace robscat
