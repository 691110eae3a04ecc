#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <vector>

#include "robscat/estimator.hpp"

namespace robscat {

using Complex = std::complex<double>;

/// Entrywise factorization tau = tau_bar * tau_under with tau_under >= 1 and
/// tau_bar <= 1; splits the scalings into a bounded part and a >= 1 part so
/// the rescaled fixed points stay of order one.
struct TauSplit {
    Eigen::ArrayXd tau_under;  // max(tau, 1)
    Eigen::ArrayXd tau_bar;    // min(tau, 1)

    static TauSplit from(const Eigen::ArrayXd& tau);
};

/// t_under * u(t_under * d), entrywise: the rescaled weight map acting on the
/// bounded fixed-point variable.
Eigen::ArrayXd u_tau(const WeightFunction& u, const TauSplit& split, const Eigen::ArrayXd& d);

/// A family of symmetric PSD second-moment matrices with the trace
/// functionals needed by the diagonal fixed points. Two storage modes:
///   - structured: C_i = alpha_i * C + V B_i V^T with a shared C (given once,
///     eigendecomposed at construction) and a shared low-rank frame V; all
///     functionals run in O(p) per evaluation;
///   - dense: an explicit member list, used for small or heterogeneous
///     families.
class MomentFamily {
public:
    static MomentFamily structured(const Eigen::MatrixXd& C, Eigen::ArrayXd alpha,
                                   Eigen::MatrixXd V, std::vector<Eigen::MatrixXd> B);
    static MomentFamily dense(std::vector<Eigen::MatrixXd> members);

    Eigen::Index count() const { return n_; }
    Eigen::Index dim() const { return p_; }

    const Eigen::ArrayXd& trace_means() const { return trace_means_; }  // (1/n) tr C_i
    const Eigen::ArrayXd& norm_bounds() const { return norm_bounds_; }  // >= ||C_i||

    // With A(c) = (1/n) sum_j c_j C_j, the functionals of (A(c) + z I)^{-1}:
    Eigen::ArrayXd traces(const Eigen::ArrayXd& cw, double z) const;   // (1/n) tr(C_i .)
    Eigen::ArrayXcd traces(const Eigen::ArrayXcd& cw, Complex z) const;
    double trace_inverse(const Eigen::ArrayXd& cw, double z) const;    // tr(.)
    Complex trace_inverse(const Eigen::ArrayXcd& cw, Complex z) const;
    double quad_form(const Eigen::VectorXd& v, const Eigen::ArrayXd& cw, double z) const;
    Complex quad_form(const Eigen::VectorXd& v, const Eigen::ArrayXcd& cw, Complex z) const;
    Eigen::MatrixXd resolvent_matrix(const Eigen::ArrayXd& cw, double z) const;
    Eigen::MatrixXcd resolvent_matrix(const Eigen::ArrayXcd& cw, Complex z) const;

private:
    MomentFamily() = default;
    template <typename Scalar>
    friend struct FamilyKernel;

    bool structured_ = false;
    Eigen::Index n_ = 0, p_ = 0;
    Eigen::ArrayXd trace_means_, norm_bounds_;
    // structured mode
    Eigen::ArrayXd eigc_;       // eigenvalues of C
    Eigen::MatrixXd eigvec_;    // eigenvectors of C
    Eigen::ArrayXd alpha_;
    Eigen::MatrixXd V_, W_;     // frame and its eigenbasis image W = Q^T V
    std::vector<Eigen::MatrixXd> B_;
    double c_norm_ = 0.0, frame_norm_ = 0.0;
    // dense mode
    std::vector<Eigen::MatrixXd> members_;
};

/// Per-sample second moments C_i = E[z_i z_i^T], scalings tau, signal m and
/// the regularizer. Supplies the plain family (C_i) and the barred ones built
/// from the rescaled data columns: tau_bar_i Sigma_i + mbar_i mbar_i^T with
/// the signal folded in, or tau_bar_i C_i without it.
class PopulationModel {
public:
    static PopulationModel shared(Eigen::MatrixXd C, Eigen::ArrayXd tau, Eigen::VectorXd m,
                                  double gamma,
                                  std::optional<Eigen::VectorXd> mu = std::nullopt);
    static PopulationModel general(std::vector<Eigen::MatrixXd> C, Eigen::ArrayXd tau,
                                   Eigen::VectorXd m, double gamma);

    Eigen::Index n() const { return tau_.size(); }
    Eigen::Index p() const { return m_.size(); }
    const Eigen::ArrayXd& tau() const { return tau_; }
    const TauSplit& tau_split() const { return split_; }
    const Eigen::VectorXd& m() const { return m_; }
    const Eigen::VectorXd& mu() const { return mu_; }
    double gamma() const { return gamma_; }
    bool has_shared_moments() const { return shared_; }

    std::shared_ptr<const MomentFamily> plain() const;
    std::shared_ptr<const MomentFamily> barred(bool with_signal) const;

private:
    PopulationModel() = default;
    bool shared_ = false;
    Eigen::MatrixXd C_;                    // shared mode
    std::vector<Eigen::MatrixXd> C_list_;  // general mode
    Eigen::ArrayXd tau_;
    TauSplit split_;
    Eigen::VectorXd m_, mu_;
    double gamma_ = 1.0;
    mutable std::shared_ptr<const MomentFamily> plain_, barred_signal_, barred_plain_;
};

// ---- scalar link function --------------------------------------------------

/// The unique positive solution of eta = 1 / (1/x + u(eta)). Picard first,
/// with a monotone bisection fallback (t (1/x + u(t)) is strictly increasing
/// for grid-stable u); the defining residual is driven below 1e-12.
double eta(const WeightFunction& u, double x);

/// Entrywise eta(tau_under * x) / tau_under.
Eigen::ArrayXd eta_tau(const WeightFunction& u, const TauSplit& split, const Eigen::ArrayXd& x);

// ---- diagonal fixed points --------------------------------------------------

struct LambdaOptions {
    double tol = 1e-12;         // sup-norm residual of the defining equations
    int max_iter = 200000;
    double damping = 0.5;       // complex path only; real shifts use pure Picard
    std::optional<Eigen::ArrayXcd> warm;
    std::optional<Eigen::ArrayXd> warm_real;
};

/// Lambda_z(delta) for a real shift z > 0: the unique positive solution of
///   Lambda_i = (1/n) tr(C_i ((1/n) sum_j C_j delta_j / (1 + delta_j Lambda_j) + z I)^{-1}).
Eigen::ArrayXd lambda_fixed_point(const MomentFamily& fam, const Eigen::ArrayXd& delta, double z,
                                  const LambdaOptions& opts = {});

/// Complex-shift extension (z off the negative real axis), damped iteration
/// with imaginary-part continuation when started cold.
Eigen::ArrayXcd lambda_fixed_point(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                   Complex z, const LambdaOptions& opts = {});

/// Convenience overloads on the model's plain family.
Eigen::ArrayXd lambda_fixed_point(const PopulationModel& model, const Eigen::ArrayXd& delta,
                                  double z, const LambdaOptions& opts = {});
Eigen::ArrayXcd lambda_fixed_point(const PopulationModel& model, const Eigen::ArrayXd& delta,
                                   Complex z, const LambdaOptions& opts = {});

/// ((1/n) sum_i delta_i C_i / (1 + delta_i lambda_i) + z I)^{-1} for a lambda
/// consistent with lambda_fixed_point at (delta, z).
Eigen::MatrixXd deterministic_resolvent(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                        const Eigen::ArrayXd& lambda, double z);
Eigen::MatrixXcd deterministic_resolvent(const MomentFamily& fam, const Eigen::ArrayXd& delta,
                                         const Eigen::ArrayXcd& lambda, Complex z);

struct DiagonalSolve {
    DiagonalWeights value;
    double residual = 0.0;
    int iterations = 0;
    double bracket_lo = 0.0, bracket_hi = 0.0;  // positivity bracket (tilde_d only)

    DiagonalSolve() : value(DiagonalWeights::ones(1)) {}
};

struct SolveOptions {
    double tol = 1e-12;
    int max_iter = 2000;
};

/// The rescaled deterministic weight profile: the unique solution of
///   D = eta_tau(Lambda^{barred}_gamma(u_tau(D))),
/// built on the signal-aware barred family (with_signal) or the signal-free
/// one. Requires u bounded, stable and with sup t u(t) < 1.
DiagonalSolve solve_tilde_D(const PopulationModel& model, const WeightFunction& u,
                            bool with_signal, const SolveOptions& opts = {});

enum class URoute { direct, via_tilde_d };

/// The deterministic weights U of the spectral equivalent, solving
///   U = tau . (u o eta)(tau . Lambda_gamma(U))
/// either by direct iteration or through the signal-free profile
/// (U = tau . u(tau_under . D_noSignal)); the two routes agree and the
/// returned residual is always measured against the direct equation.
DiagonalSolve solve_U(const PopulationModel& model, const WeightFunction& u,
                      URoute route = URoute::via_tilde_d, const SolveOptions& opts = {});

// ---- spectral predictions ---------------------------------------------------

/// (1/p) tr of the deterministic resolvent of the scatter equivalent at shift
/// z: the prediction of (1/p) tr (z I + scatter)^{-1}. The Stieltjes
/// transform of the spectral measure at w is this function evaluated at
/// z = -w.
Complex predicted_stieltjes(const PopulationModel& model, const DiagonalWeights& U, Complex z,
                            const LambdaOptions& opts = {});

struct DensityResult {
    std::vector<std::pair<double, double>> samples;   // (x, density)
    std::vector<std::tuple<double, double, Complex>> stieltjes;  // (x, eps, m(x + i eps))
    double integral = 0.0;     // trapezoid mass of the clipped density
    bool coverage_warning = false;  // grid too coarse / support not covered
};

/// Spectral density on a real grid from the smoothed Stieltjes transform
/// (1/pi) Im m(x + i eps), clipped at zero; the grid is swept from the
/// largest point toward the support with warm-started fixed points.
DensityResult predicted_density(const PopulationModel& model, const DiagonalWeights& U,
                                const Eigen::ArrayXd& grid, double eps);

struct ContourSpec {
    double center = 0.0;
    double radius = 0.0;
    int nodes = 256;
};

/// Circle around the top eigenvalue when it is isolated: gap to the next
/// eigenvalue above 5x the median consecutive spacing. Input must be sorted
/// ascending with null eigenvalues already removed.
std::optional<ContourSpec> detect_spike(const Eigen::ArrayXd& sorted_eigs);

struct AlignmentResult {
    double value = 0.0;
    double imaginary_residue = 0.0;  // quadrature quality metric
};

/// Squared signal projection on the isolated eigenvector, predicted by the
/// contour integral of the signal-aware deterministic resolvent around the
/// spike. tilde_d is the signal-aware profile from solve_tilde_D.
AlignmentResult predicted_alignment(const PopulationModel& model, const WeightFunction& u,
                                    const DiagonalWeights& tilde_d, const Eigen::VectorXd& m,
                                    const ContourSpec& contour);

}  // namespace robscat
