#include "robscat/stable_metric.hpp"

#include <cmath>
#include <sstream>

namespace robscat {

double stable_distance_raw(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    return ((a - b).abs() / (a * b).sqrt()).maxCoeff();
}

double stable_distance(const DiagonalWeights& a, const DiagonalWeights& b) {
    if (a.size() != b.size()) throw DimensionError("stable_distance: length mismatch");
    return stable_distance_raw(a.array(), b.array());
}

double stable_distance(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw DomainError("stable_distance: arguments must be strictly positive finite reals");
    return std::abs(a - b) / std::sqrt(a * b);
}

Eigen::ArrayXd log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo)) throw DomainError("log_grid: need 0 < lo < hi");
    if (points < 2) throw DomainError("log_grid: need at least two points");
    Eigen::ArrayXd g(points);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < points; ++i)
        g[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / (points - 1));
    return g;
}

StabilityReport check_stable_on_grid(const std::function<double(double)>& f,
                                     const Eigen::ArrayXd& grid) {
    constexpr double kRelTol = 1e-12;
    StabilityReport report;
    if (grid.size() < 2) throw DomainError("check_stable_on_grid: grid too small");

    double prev_t = grid[0];
    double prev_f = f(prev_t);
    if (!std::isfinite(prev_f) || prev_f <= 0.0) {
        std::ostringstream msg;
        msg << "check_stable_on_grid: f(" << prev_t << ") = " << prev_f
            << " is not strictly positive finite";
        throw DomainError(msg.str());
    }
    for (Eigen::Index k = 1; k < grid.size(); ++k) {
        const double t = grid[k];
        const double ft = f(t);
        if (!std::isfinite(ft) || ft <= 0.0) {
            std::ostringstream msg;
            msg << "check_stable_on_grid: f(" << t << ") = " << ft
                << " is not strictly positive finite";
            throw DomainError(msg.str());
        }
        const double prod_prev = prev_t * prev_f, prod = t * ft;
        const double quot_prev = prev_f / prev_t, quot = ft / t;
        const bool prod_ok = prod >= prod_prev - kRelTol * std::abs(prod_prev);
        const bool quot_ok = quot <= quot_prev + kRelTol * std::abs(quot_prev);
        if (!prod_ok || !quot_ok) {
            report.is_stable = false;
            report.first_violation = {prev_t, t};
            return report;
        }
        prev_t = t;
        prev_f = ft;
    }
    report.is_stable = true;
    return report;
}

double WeightFunction::operator()(double t) const {
    if (!(t > 0.0) || !std::isfinite(t))
        throw DomainError("WeightFunction: argument must be strictly positive finite");
    return eval(t);
}

Eigen::ArrayXd WeightFunction::apply(const Eigen::ArrayXd& t) const {
    Eigen::ArrayXd out(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = (*this)(t[i]);
    return out;
}

std::string AdmissibilityReport::describe() const {
    std::ostringstream os;
    os << "bounded=" << (bounded ? "yes" : "no")
       << " stable=" << (stable ? "yes" : "no")
       << " u_times_below_one=" << (u_times_below_one ? "yes" : "no")
       << " -> " << (admissible() ? "admissible" : "inadmissible")
       << (prediction_mode ? " (prediction mode)" : "");
    return os.str();
}

AdmissibilityReport verify_weight_admissibility(const WeightFunction& u, bool prediction_mode) {
    constexpr double kRelTol = 1e-12;
    if (u.admissibility_grid.size() < 2)
        throw DomainError("verify_weight_admissibility: empty admissibility grid");

    AdmissibilityReport report;
    report.prediction_mode = prediction_mode;

    const Eigen::ArrayXd& grid = u.admissibility_grid;
    bool bounded = std::isfinite(u.u_sup);
    bool times_ok = std::isfinite(u.u_times_sup) && u.u_times_sup < 1.0;
    bool positive_ok = true;

    double prev_t = 0.0, prev_prod = 0.0, prev_quot = 0.0;
    bool stable = true;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double ut = u.eval(t);
        if (!std::isfinite(ut) || ut < 0.0) {
            positive_ok = false;
            break;
        }
        if (bounded && ut > u.u_sup * (1.0 + kRelTol)) bounded = false;
        if (times_ok && t * ut > u.u_times_sup * (1.0 + kRelTol)) times_ok = false;
        if (stable) {
            if (ut <= 0.0) {
                stable = false;  // stable class maps into strictly positive reals
            } else if (k > 0) {
                const double prod = t * ut, quot = ut / t;
                if (prod < prev_prod - kRelTol * std::abs(prev_prod) ||
                    quot > prev_quot + kRelTol * std::abs(prev_quot))
                    stable = false;
                prev_prod = prod;
                prev_quot = quot;
            } else {
                prev_prod = t * ut;
                prev_quot = ut / t;
            }
        }
        prev_t = t;
    }
    (void)prev_t;

    report.bounded = positive_ok && bounded;
    report.stable = positive_ok && stable;
    report.u_times_below_one = positive_ok && times_ok;
    return report;
}

WeightFunction min_lin_inv(double a) {
    if (!(a > 0.0)) throw ConfigError("min_lin_inv: parameter must be positive");
    WeightFunction w;
    w.eval = [a](double t) { return std::min(t, 1.0 / (1.0 + a * t)); };
    // Peak at the branch crossing t*(1+a t*) = 1; tail supremum of t*u is 1/a.
    const double t_star = (-1.0 + std::sqrt(1.0 + 4.0 * a)) / (2.0 * a);
    w.u_sup = t_star;
    w.u_times_sup = 1.0 / a;
    std::ostringstream name;
    name << "min_lin_inv(" << a << ")";
    w.name = name.str();
    return w;
}

WeightFunction tent_max() {
    WeightFunction w;
    w.eval = [](double t) { return std::max(std::sqrt(t), 1.0 / t); };
    w.u_sup = std::numeric_limits<double>::infinity();
    w.u_times_sup = std::numeric_limits<double>::infinity();
    w.name = "tent_max";
    return w;
}

WeightFunction inv_sqrt() {
    WeightFunction w;
    w.eval = [](double t) { return 1.0 / std::sqrt(t); };
    w.u_sup = std::numeric_limits<double>::infinity();
    w.u_times_sup = std::numeric_limits<double>::infinity();
    w.name = "inv_sqrt";
    return w;
}

WeightFunction make_weight(const std::string& spec) {
    const auto open = spec.find('(');
    std::string name = (open == std::string::npos) ? spec : spec.substr(0, open);
    std::vector<double> params;
    if (open != std::string::npos) {
        const auto close = spec.rfind(')');
        if (close == std::string::npos || close < open)
            throw ConfigError("make_weight: unbalanced parentheses in '" + spec + "'");
        std::string args = spec.substr(open + 1, close - open - 1);
        std::istringstream is(args);
        std::string tok;
        while (std::getline(is, tok, ',')) {
            try {
                size_t pos = 0;
                params.push_back(std::stod(tok, &pos));
            } catch (const std::exception&) {
                throw ConfigError("make_weight: bad parameter '" + tok + "' in '" + spec + "'");
            }
        }
    }

    if (name == "min_lin_inv") {
        if (params.size() != 1)
            throw ConfigError("make_weight: min_lin_inv takes exactly one parameter");
        return min_lin_inv(params[0]);
    }
    if (name == "tent_max") {
        if (!params.empty()) throw ConfigError("make_weight: tent_max takes no parameters");
        return tent_max();
    }
    if (name == "inv_sqrt") {
        if (!params.empty()) throw ConfigError("make_weight: inv_sqrt takes no parameters");
        return inv_sqrt();
    }
    throw ConfigError("make_weight: unknown weight function '" + name + "'");
}

}  // namespace robscat
