#include "robscat/deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace robscat {

namespace {

std::vector<double> to_std(const Eigen::ArrayXd& a) {
    return {a.data(), a.data() + a.size()};
}
std::vector<double> to_std(const Eigen::ArrayXcd& a) {
    std::vector<double> v;
    v.reserve(static_cast<size_t>(2 * a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        v.push_back(a[i].real());
        v.push_back(a[i].imag());
    }
    return v;
}

void check_weights(const Eigen::ArrayXd& w, const char* what) {
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!std::isfinite(w[i]) || w[i] < 0.0)
            throw DomainError(std::string(what) + ": weights must be finite and nonnegative");
}

}  // namespace

double eta(const WeightFunction& u, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("eta: x must be strictly positive");

    auto residual = [&](double e) { return std::abs(e * (1.0 / x + u(e)) - 1.0); };
    constexpr double kTol = 1e-12;

    // Picard on e -> x / (1 + x u(e)); contracts when u is bounded with
    // moderate sup, stalls for large x (handled by the bisection below).
    double e = x;
    double best = x, best_res = residual(x);
    for (int k = 0; k < 400; ++k) {
        const double next = x / (1.0 + x * u(e));
        if (!(next > 0.0) || !std::isfinite(next)) break;
        e = next;
        const double r = residual(e);
        if (r < best_res) {
            best_res = r;
            best = e;
        }
        if (r <= 0.1 * kTol) break;
    }
    if (best_res <= kTol) return best;

    // g(t) = t/x + t u(t) - 1 is strictly increasing for grid-stable u
    // (t u(t) non-decreasing), so log-space bisection is exact and safe.
    auto g = [&](double t) { return t / x + t * u(t) - 1.0; };
    double hi = x;
    if (g(hi) < 0.0)
        throw NonConvergenceError("eta: defining function negative at its upper bracket", {x});
    double lo = x;
    bool bracketed = false;
    for (int k = 0; k < 2200; ++k) {
        lo *= 0.5;
        if (lo < 1e-300) break;
        if (g(lo) < 0.0) {
            bracketed = true;
            break;
        }
        hi = lo;
    }
    if (!bracketed) {
        if (std::abs(g(hi)) <= kTol) return hi;  // u(x) == 0: eta(x) = x
        throw DomainError("eta: the defining equation has no positive solution "
                          "(t u(t) does not fall below 1)");
    }
    for (int k = 0; k < 260; ++k) {
        const double mid = std::sqrt(lo * hi);
        if (g(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-17 * hi) break;
    }
    const double root = 0.5 * (lo + hi);
    if (residual(root) > kTol)
        throw NonConvergenceError("eta: residual tolerance not reached", {root});
    return root;
}

Eigen::ArrayXd eta_tau(const WeightFunction& u, const TauSplit& split, const Eigen::ArrayXd& x) {
    if (x.size() != split.tau_under.size()) throw DimensionError("eta_tau: length mismatch");
    Eigen::ArrayXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out[i] = eta(u, split.tau_under[i] * x[i]) / split.tau_under[i];
    return out;
}

Eigen::ArrayXd lambda_fixed_point(const MomentFamily& fam, const Eigen::ArrayXd& delta, double z,
                                  const LambdaOptions& opts) {
    if (!(z > 0.0)) throw DomainError("lambda_fixed_point: real shift must be positive");
    check_weights(delta, "lambda_fixed_point");

    Eigen::ArrayXd lam =
        opts.warm_real ? *opts.warm_real : Eigen::ArrayXd(fam.trace_means() / z);
    lam = lam.max(1e-300);
    double res = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opts.max_iter; ++k) {
        const Eigen::ArrayXd cw = delta / (1.0 + delta * lam);
        Eigen::ArrayXd next = fam.traces(cw, z);
        res = (next - lam).abs().maxCoeff();
        lam = std::move(next);
        if (res <= opts.tol) return lam;
    }
    throw NonConvergenceError("lambda_fixed_point: no convergence at real shift (residual " +
                                  std::to_string(res) + ")",
                              to_std(lam));
}

namespace {

double lambda_residual(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                       const Eigen::ArrayXcd& lam, Complex z) {
    const Eigen::ArrayXcd cw = delta.cast<Complex>() / (1.0 + delta.cast<Complex>() * lam);
    return (fam.traces(cw, z) - lam).abs().maxCoeff();
}

}  // namespace

Eigen::ArrayXcd lambda_fixed_point(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                   Complex z, const LambdaOptions& opts) {
    if (z.imag() == 0.0 && z.real() <= 0.0)
        throw DomainError("lambda_fixed_point: shift on the closed negative real axis");
    check_weights(delta, "lambda_fixed_point");

    const Eigen::ArrayXcd deltac = delta.cast<Complex>();
    auto map = [&](const Eigen::ArrayXcd& lam) {
        const Eigen::ArrayXcd cw = deltac / (1.0 + deltac * lam);
        return Eigen::ArrayXcd(fam.traces(cw, z));
    };

    Eigen::ArrayXcd lam;
    if (opts.warm) {
        lam = *opts.warm;
    } else {
        lam = (fam.trace_means().cast<Complex>() / z);
        if (z.imag() != 0.0) {
            // continuation from a strongly damped imaginary part toward z
            for (double mult : {8.0, 4.0, 2.0}) {
                const Complex zc(z.real(), z.imag() * mult);
                auto mapc = [&](const Eigen::ArrayXcd& l) {
                    const Eigen::ArrayXcd cw = deltac / (1.0 + deltac * l);
                    return Eigen::ArrayXcd(fam.traces(cw, zc));
                };
                auto stage = solve_complex_diagonal(mapc, lam, 1e-11, opts.max_iter / 8,
                                                    opts.damping);
                if (stage.converged) lam = stage.point;
            }
        }
    }

    for (double damping : {opts.damping, 0.5 * opts.damping, 0.2 * opts.damping}) {
        auto result = solve_complex_diagonal(map, lam, 1e-15, opts.max_iter, damping);
        if (result.point.allFinite()) lam = result.point;
        double res = lambda_residual(fam, delta, lam, z);
        // a couple of residual-driven polish rounds
        for (int round = 0; round < 3 && res > opts.tol; ++round) {
            auto extra = solve_complex_diagonal(map, lam, 1e-16, opts.max_iter, damping);
            if (!extra.point.allFinite()) break;
            lam = extra.point;
            res = lambda_residual(fam, delta, lam, z);
        }
        if (res <= opts.tol) return lam;
    }
    throw NonConvergenceError("lambda_fixed_point: no convergence at complex shift (residual " +
                                  std::to_string(lambda_residual(fam, delta, lam, z)) + ")",
                              to_std(lam));
}

Eigen::ArrayXd lambda_fixed_point(const PopulationModel& model, const Eigen::ArrayXd& delta,
                                  double z, const LambdaOptions& opts) {
    return lambda_fixed_point(*model.plain(), delta, z, opts);
}
Eigen::ArrayXcd lambda_fixed_point(const PopulationModel& model, const Eigen::ArrayXd& delta,
                                   Complex z, const LambdaOptions& opts) {
    return lambda_fixed_point(*model.plain(), delta, z, opts);
}

Eigen::MatrixXd deterministic_resolvent(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                        const Eigen::ArrayXd& lambda, double z) {
    if (!(z > 0.0)) throw DomainError("deterministic_resolvent: real shift must be positive");
    const Eigen::ArrayXd cw = delta / (1.0 + delta * lambda);
    return fam.resolvent_matrix(cw, z);
}

Eigen::MatrixXcd deterministic_resolvent(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                         const Eigen::ArrayXcd& lambda, Complex z) {
    const Eigen::ArrayXcd cw = delta.cast<Complex>() / (1.0 + delta.cast<Complex>() * lambda);
    return fam.resolvent_matrix(cw, z);
}

namespace {

void require_prediction_admissible(const WeightFunction& u, const char* what) {
    const AdmissibilityReport rep = verify_weight_admissibility(u, /*prediction_mode=*/true);
    if (!rep.admissible())
        throw DomainError(std::string(what) + ": weight function '" + u.name +
                          "' is not admissible for prediction (" + rep.describe() + ")");
}

}  // namespace

DiagonalSolve solve_tilde_D(const PopulationModel& model, const WeightFunction& u,
                            bool with_signal, const SolveOptions& opts) {
    require_prediction_admissible(u, "solve_tilde_D");
    const auto fam = model.barred(with_signal);
    const TauSplit& split = model.tau_split();
    const double gamma = model.gamma();
    const Eigen::Index n = model.n();

    std::optional<Eigen::ArrayXd> warm;
    auto F = [&](const Eigen::ArrayXd& d) {
        LambdaOptions lo;
        lo.tol = std::min(1e-13, 0.05 * opts.tol);
        lo.warm_real = warm;
        Eigen::ArrayXd lam = lambda_fixed_point(*fam, u_tau(u, split, d), gamma, lo);
        warm = lam;
        return eta_tau(u, split, lam);
    };

    Eigen::ArrayXd d = Eigen::ArrayXd::Ones(n);
    double res = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        Eigen::ArrayXd next = F(d);
        res = (next - d).abs().maxCoeff();
        d = std::move(next);
        if (res <= opts.tol) break;
    }
    if (res > opts.tol)
        throw NonConvergenceError("solve_tilde_D: residual tolerance not reached (residual " +
                                      std::to_string(res) + ")",
                                  to_std(d));

    DiagonalSolve sol;
    sol.value = DiagonalWeights(d);
    sol.residual = res;
    sol.iterations = it + 1;
    // positivity bracket from the trace floor and the assembly norm control
    const double assembly_bound =
        (fam->norm_bounds() * split.tau_under).sum() / static_cast<double>(n) * u.u_sup;
    const double lam_floor = fam->trace_means().minCoeff() / (gamma + assembly_bound);
    sol.bracket_lo = (1.0 - u.u_times_sup) * lam_floor;
    sol.bracket_hi = fam->trace_means().maxCoeff() / gamma;
    if (d.minCoeff() < sol.bracket_lo * (1.0 - 1e-9) ||
        d.maxCoeff() > sol.bracket_hi * (1.0 + 1e-9))
        throw NumericalError("solve_tilde_D: solution escaped its positivity bracket");
    return sol;
}

DiagonalSolve solve_U(const PopulationModel& model, const WeightFunction& u, URoute route,
                      const SolveOptions& opts) {
    require_prediction_admissible(u, "solve_U");
    const auto fam = model.plain();
    const TauSplit& split = model.tau_split();
    const Eigen::ArrayXd& tau = model.tau();
    const double gamma = model.gamma();
    const Eigen::Index n = model.n();

    std::optional<Eigen::ArrayXd> warm;
    auto direct_map = [&](const Eigen::ArrayXd& U) {
        LambdaOptions lo;
        lo.tol = std::min(1e-13, 0.05 * opts.tol);
        lo.warm_real = warm;
        Eigen::ArrayXd lam = lambda_fixed_point(*fam, U, gamma, lo);
        warm = lam;
        Eigen::ArrayXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = tau[i] * u(eta(u, tau[i] * lam[i]));
        return out;
    };

    Eigen::ArrayXd U;
    int iters = 0;
    if (route == URoute::via_tilde_d) {
        DiagonalSolve dm = solve_tilde_D(model, u, /*with_signal=*/false, opts);
        U = tau * u.apply(split.tau_under * dm.value.array());
        iters = dm.iterations;
    } else {
        U = tau * u.apply(split.tau_under);
        double step = std::numeric_limits<double>::infinity();
        for (; iters < opts.max_iter; ++iters) {
            Eigen::ArrayXd next = direct_map(U);
            step = (next - U).abs().maxCoeff();
            U = std::move(next);
            if (step <= 0.5 * opts.tol) break;
        }
        if (step > 0.5 * opts.tol)
            throw NonConvergenceError("solve_U: direct route did not converge", to_std(U));
    }

    // Both routes answer the same equation; measure (and if needed polish)
    // the defect of U = tau (u o eta)(tau Lambda_gamma(U)).
    double res = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100; ++k) {
        const Eigen::ArrayXd next = direct_map(U);
        res = (next - U).abs().maxCoeff();
        if (res <= opts.tol) break;
        U = next;
        ++iters;
    }
    if (res > opts.tol)
        throw NonConvergenceError("solve_U: residual tolerance not reached (residual " +
                                      std::to_string(res) + ")",
                                  to_std(U));

    DiagonalSolve sol;
    sol.value = DiagonalWeights(U);
    sol.residual = res;
    sol.iterations = iters;
    return sol;
}

Complex predicted_stieltjes(const PopulationModel& model, const DiagonalWeights& U, Complex z,
                            const LambdaOptions& opts) {
    const auto fam = model.plain();
    const Eigen::ArrayXd& uw = U.array();
    if (z.imag() == 0.0 && z.real() > 0.0 && !opts.warm) {
        LambdaOptions lo = opts;
        const Eigen::ArrayXd lam = lambda_fixed_point(*fam, uw, z.real(), lo);
        const Eigen::ArrayXd cw = uw / (1.0 + uw * lam);
        return Complex(fam->trace_inverse(cw, z.real()) / static_cast<double>(model.p()), 0.0);
    }
    const Eigen::ArrayXcd lam = lambda_fixed_point(*fam, uw, z, opts);
    const Eigen::ArrayXcd cw = uw.cast<Complex>() / (1.0 + uw.cast<Complex>() * lam);
    return fam->trace_inverse(cw, z) / static_cast<double>(model.p());
}

DensityResult predicted_density(const PopulationModel& model, const DiagonalWeights& U,
                                const Eigen::ArrayXd& grid, double eps) {
    if (!(eps > 0.0)) throw DomainError("predicted_density: eps must be positive");
    if (grid.size() < 1) throw DomainError("predicted_density: empty grid");

    std::vector<Eigen::Index> order(static_cast<size_t>(grid.size()));
    for (Eigen::Index i = 0; i < grid.size(); ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return grid[a] > grid[b]; });

    const auto fam = model.plain();
    const Eigen::ArrayXd& uw = U.array();
    const double p = static_cast<double>(model.p());

    DensityResult out;
    out.samples.resize(static_cast<size_t>(grid.size()));
    out.stieltjes.resize(static_cast<size_t>(grid.size()));

    LambdaOptions lo;
    lo.tol = 1e-11;
    std::optional<Eigen::ArrayXcd> warm;
    for (Eigen::Index idx : order) {
        const double x = grid[idx];
        const Complex w(x, eps);
        const Complex z = -w;
        lo.warm = warm;
        const Eigen::ArrayXcd lam = lambda_fixed_point(*fam, uw, z, lo);
        warm = lam;
        const Eigen::ArrayXcd cw = uw.cast<Complex>() / (1.0 + uw.cast<Complex>() * lam);
        const Complex m = fam->trace_inverse(cw, z) / p;
        const double density = std::max(0.0, m.imag() / std::numbers::pi);
        out.samples[static_cast<size_t>(idx)] = {x, density};
        out.stieltjes[static_cast<size_t>(idx)] = {x, eps, m};
    }

    double mass = 0.0;
    for (size_t i = 1; i < out.samples.size(); ++i) {
        const auto& [x0, d0] = out.samples[i - 1];
        const auto& [x1, d1] = out.samples[i];
        mass += 0.5 * (d0 + d1) * (x1 - x0);
    }
    out.integral = mass;
    out.coverage_warning = std::abs(mass - 1.0) > 0.1;
    return out;
}

std::optional<ContourSpec> detect_spike(const Eigen::ArrayXd& sorted_eigs) {
    const Eigen::Index k = sorted_eigs.size();
    if (k < 3) return std::nullopt;
    std::vector<double> spacings(static_cast<size_t>(k - 2));
    for (Eigen::Index i = 0; i + 2 < k; ++i)
        spacings[static_cast<size_t>(i)] = sorted_eigs[i + 1] - sorted_eigs[i];
    std::sort(spacings.begin(), spacings.end());
    const double median = spacings[spacings.size() / 2];
    const double gap = sorted_eigs[k - 1] - sorted_eigs[k - 2];
    if (!(gap > 5.0 * median)) return std::nullopt;
    ContourSpec spec;
    spec.center = sorted_eigs[k - 1];
    spec.radius = 0.5 * gap;
    spec.nodes = 256;
    return spec;
}

AlignmentResult predicted_alignment(const PopulationModel& model, const WeightFunction& u,
                                    const DiagonalWeights& tilde_d, const Eigen::VectorXd& m,
                                    const ContourSpec& contour) {
    if (m.size() != model.p()) throw DimensionError("predicted_alignment: signal size mismatch");
    if (m.squaredNorm() == 0.0) return {0.0, 0.0};
    if (!(contour.radius > 0.0)) throw DomainError("predicted_alignment: radius must be positive");
    if (contour.nodes < 8) throw DomainError("predicted_alignment: need at least 8 nodes");

    const auto fam = model.barred(/*with_signal=*/true);
    const Eigen::ArrayXd wbar = u_tau(u, model.tau_split(), tilde_d.array());

    // Trapezoid quadrature of (1/2 pi i) contour-integral of m^T Qtilde_{-z} m.
    // Node angles are offset half a step so no shift lands exactly on the real
    // axis; each node is solved independently (warm-started from its
    // neighbor) so the imaginary residue is a genuine quality signal.
    const int N = contour.nodes;
    Complex acc(0.0, 0.0);
    LambdaOptions lo;
    lo.tol = 1e-11;
    std::optional<Eigen::ArrayXcd> warm;
    for (int k = 0; k < N; ++k) {
        const double theta = 2.0 * std::numbers::pi * (k + 0.5) / N;
        const Complex phase(std::cos(theta), std::sin(theta));
        const Complex zc = contour.center + contour.radius * phase;
        lo.warm = warm;
        const Eigen::ArrayXcd lam = lambda_fixed_point(*fam, wbar, -zc, lo);
        warm = lam;
        const Eigen::ArrayXcd cw =
            wbar.cast<Complex>() / (1.0 + wbar.cast<Complex>() * lam);
        acc += fam->quad_form(m, cw, -zc) * phase;
    }
    acc *= contour.radius / static_cast<double>(N);

    AlignmentResult res;
    res.value = -acc.real();
    res.imaginary_residue = std::abs(acc.imag());
    if (res.imaginary_residue > 1e-3)
        throw ContourQualityError("predicted_alignment: imaginary residue " +
                                  std::to_string(res.imaginary_residue) +
                                  " exceeds the contour quality gate");
    return res;
}

}  // namespace robscat
