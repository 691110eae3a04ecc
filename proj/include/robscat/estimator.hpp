#pragma once

#include <optional>
#include <vector>

#include "robscat/fixed_point.hpp"
#include "robscat/stable_metric.hpp"

namespace robscat {

/// A family S_1..S_n of symmetric p x p matrices. Two representations:
/// an explicit list, or the rank-one view (x_i x_i^T)_i over a data matrix
/// whose columns are the samples — the latter is never materialized densely
/// and all products run on the cheaper of the Gram (n x n) and direct (p x p)
/// sides.
class SymmetricFamily {
public:
    /// Explicit members. Each is symmetrized to (S + S^T)/2 after passing a
    /// 1e-10 relative symmetry gate.
    static SymmetricFamily dense(std::vector<Eigen::MatrixXd> members);

    /// Rank-one family over X (p x n, columns are samples).
    static SymmetricFamily rank_one(Eigen::MatrixXd X);

    Eigen::Index count() const { return n_; }  // number of members
    Eigen::Index dim() const { return p_; }    // matrix side

    bool is_rank_one() const { return X_.size() != 0; }
    const Eigen::MatrixXd& data() const;                   // rank-one only
    const Eigen::MatrixXd& gram() const;                   // rank-one only
    const std::vector<Eigen::MatrixXd>& members() const;   // dense only

    /// (1/n) sum_i w_i S_i (weights may carry zeros; sizes must match).
    Eigen::MatrixXd weighted_sum(const Eigen::ArrayXd& w) const;

    /// (1/n) || sum_i S_i ||, the norm entering the contraction-rate bounds.
    double family_norm() const;

private:
    SymmetricFamily() = default;
    Eigen::Index n_ = 0, p_ = 0;
    Eigen::MatrixXd X_;     // p x n when rank-one
    Eigen::MatrixXd gram_;  // X^T X cached for the Gram side
    std::vector<Eigen::MatrixXd> members_;
};

/// Resolvent ((1/n) sum_i delta_i S_i + gamma I)^{-1}. Symmetric with
/// spectral norm at most 1/gamma for PSD families.
Eigen::MatrixXd resolvent(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma);

/// Trace map: entry i is (1/n) tr(S_i Q_gamma(S, delta)); for the rank-one
/// view this is (1/n) x_i^T Q x_i.
DiagonalWeights trace_map(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma);

/// Same map on raw nonnegative weights (zeros allowed); used by the robust
/// solver where u may vanish.
Eigen::ArrayXd trace_map_raw(const SymmetricFamily& S, const Eigen::ArrayXd& weights,
                             double gamma);

/// Spectral norm of I - gamma Q_gamma(S, delta): the per-evaluation
/// contraction factor of the trace map under the stable semi-metric.
double contraction_factor(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma);

struct RobustEstimate {
    DiagonalWeights delta_hat;   // fixed point of delta -> I^X(u(delta))
    Eigen::MatrixXd scatter;     // (1/n) X u(delta_hat) X^T
    double residual = 0.0;       // sup-norm defect of the fixed-point equation
    double gamma = 0.0;
    double contraction_bound = 0.0;  // ||I - gamma Q|| at the solution weights
    int iterations = 0;
    std::vector<double> observed_rates;  // stable-distance step ratios
    std::optional<Eigen::ArrayXd> d_hat;  // delta_hat / max(tau, 1) when tau known

    RobustEstimate() : delta_hat(DiagonalWeights::ones(1)) {}
};

struct RobustOptions {
    double tol = 1e-12;       // sup-norm residual target
    int max_iter = 5000;
    std::optional<Eigen::ArrayXd> tau;      // enables the d_hat diagnostic
    std::optional<DiagonalWeights> init;    // override the default start
};

/// Solve delta = I^X(u(delta)) and assemble the scatter estimate. u must be
/// bounded and stable on its grid; the start point is one application of the
/// trace map to the constant-u(1) weights.
RobustEstimate solve_robust(const Eigen::MatrixXd& X, const WeightFunction& u, double gamma,
                            const RobustOptions& opts = {});

/// Eigenvalues of a symmetric matrix, nondecreasing. With drop_null set,
/// eigenvalues below 1e-10 times the largest magnitude are removed.
Eigen::ArrayXd empirical_spectrum(const Eigen::MatrixXd& scatter, bool drop_null = false);

/// Squared projection (v_max . m)^2 of a vector on the unit top eigenvector.
/// Requires a simple top eigenvalue (gap above 1e-12 of the spectral scale).
double empirical_alignment(const Eigen::MatrixXd& scatter, const Eigen::VectorXd& m);

}  // namespace robscat
