#include "robscat/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace robscat {

namespace {

constexpr double kSymmetryGate = 1e-10;
constexpr double kConditionGate = 1e15;

void check_symmetric(const Eigen::MatrixXd& A, const char* what) {
    if (A.rows() != A.cols()) throw DomainError(std::string(what) + ": matrix is not square");
    const double scale = A.cwiseAbs().maxCoeff();
    const double defect = (A - A.transpose()).cwiseAbs().maxCoeff();
    if (defect > kSymmetryGate * std::max(scale, 1e-300))
        throw DomainError(std::string(what) + ": matrix fails the symmetry gate");
}

void check_condition(double assembly_norm, double gamma) {
    if ((gamma + assembly_norm) / gamma > kConditionGate) {
        std::ostringstream msg;
        msg << "resolvent assembly is ill-conditioned (estimate "
            << (gamma + assembly_norm) / gamma << ")";
        throw NumericalError(msg.str());
    }
}

}  // namespace

SymmetricFamily SymmetricFamily::dense(std::vector<Eigen::MatrixXd> members) {
    if (members.empty()) throw DimensionError("SymmetricFamily: empty family");
    SymmetricFamily fam;
    fam.n_ = static_cast<Eigen::Index>(members.size());
    fam.p_ = members.front().rows();
    for (auto& S : members) {
        if (S.rows() != fam.p_ || S.cols() != fam.p_)
            throw DimensionError("SymmetricFamily: inconsistent member sizes");
        check_symmetric(S, "SymmetricFamily");
        S = ((S + S.transpose()) * 0.5).eval();
    }
    fam.members_ = std::move(members);
    return fam;
}

SymmetricFamily SymmetricFamily::rank_one(Eigen::MatrixXd X) {
    if (X.rows() < 1 || X.cols() < 1) throw DimensionError("SymmetricFamily: empty data matrix");
    if (!X.allFinite()) throw DomainError("SymmetricFamily: data matrix has non-finite entries");
    SymmetricFamily fam;
    fam.p_ = X.rows();
    fam.n_ = X.cols();
    fam.gram_ = X.transpose() * X;
    fam.X_ = std::move(X);
    return fam;
}

const Eigen::MatrixXd& SymmetricFamily::data() const {
    if (!is_rank_one()) throw DomainError("SymmetricFamily: not a rank-one family");
    return X_;
}

const Eigen::MatrixXd& SymmetricFamily::gram() const {
    if (!is_rank_one()) throw DomainError("SymmetricFamily: not a rank-one family");
    return gram_;
}

const std::vector<Eigen::MatrixXd>& SymmetricFamily::members() const {
    if (is_rank_one()) throw DomainError("SymmetricFamily: rank-one family has no member list");
    return members_;
}

Eigen::MatrixXd SymmetricFamily::weighted_sum(const Eigen::ArrayXd& w) const {
    if (w.size() != n_) throw DimensionError("SymmetricFamily: weight length mismatch");
    const double inv_n = 1.0 / static_cast<double>(n_);
    if (is_rank_one()) {
        Eigen::MatrixXd Xw = X_;
        for (Eigen::Index i = 0; i < n_; ++i) Xw.col(i) *= w[i] * inv_n;
        return X_ * Xw.transpose();
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p_, p_);
    for (Eigen::Index i = 0; i < n_; ++i) M.noalias() += (w[i] * inv_n) * members_[i];
    return M;
}

double SymmetricFamily::family_norm() const {
    const Eigen::MatrixXd M = weighted_sum(Eigen::ArrayXd::Ones(n_));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// Gram-side kernel for rank-one families with n < p. Returns the diagonal of
// the trace map without touching any p x p object.
Eigen::ArrayXd trace_map_gram(const SymmetricFamily& S, const Eigen::ArrayXd& w, double gamma) {
    const Eigen::Index n = S.count();
    const Eigen::MatrixXd& G = S.gram();
    const Eigen::ArrayXd ws = w.sqrt();

    Eigen::MatrixXd A = G;  // rows scaled by sqrt(w): A = W^{1/2} G
    for (Eigen::Index i = 0; i < n; ++i) A.row(i) *= ws[i];

    Eigen::MatrixXd K = A;  // W^{1/2} G W^{1/2} / gamma + n I
    for (Eigen::Index j = 0; j < n; ++j) K.col(j) *= ws[j] / gamma;
    check_condition(K.norm() * gamma / static_cast<double>(n), gamma);
    K.diagonal().array() += static_cast<double>(n);

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericalError("trace_map: Gram-side factorization failed");
    const Eigen::MatrixXd V = llt.matrixL().solve(A);  // L^{-1} W^{1/2} G

    Eigen::ArrayXd t(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = G(i, i) / gamma - V.col(i).squaredNorm() / (gamma * gamma);
        t[i] = q * inv_n;
    }
    return t;
}

}  // namespace

Eigen::ArrayXd trace_map_raw(const SymmetricFamily& S, const Eigen::ArrayXd& w, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("trace_map: gamma must be positive");
    if (w.size() != S.count()) throw DimensionError("trace_map: weight length mismatch");
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!std::isfinite(w[i]) || w[i] < 0.0)
            throw DomainError("trace_map: weights must be finite and nonnegative");

    const Eigen::Index n = S.count(), p = S.dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    if (S.is_rank_one() && n < p) return trace_map_gram(S, w, gamma);

    Eigen::MatrixXd A = S.weighted_sum(w);
    check_condition(A.norm(), gamma);
    A.diagonal().array() += gamma;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("trace_map: resolvent factorization failed");

    Eigen::ArrayXd t(n);
    if (S.is_rank_one()) {
        const Eigen::MatrixXd Y = ldlt.solve(S.data());
        for (Eigen::Index i = 0; i < n; ++i)
            t[i] = S.data().col(i).dot(Y.col(i)) * inv_n;
    } else {
        const Eigen::MatrixXd Q = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
        for (Eigen::Index i = 0; i < n; ++i)
            t[i] = (S.members()[i].cwiseProduct(Q)).sum() * inv_n;
    }
    return t;
}

DiagonalWeights trace_map(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma) {
    return DiagonalWeights(trace_map_raw(S, delta.array(), gamma));
}

Eigen::MatrixXd resolvent(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("resolvent: gamma must be positive");
    if (delta.size() != S.count()) throw DimensionError("resolvent: weight length mismatch");

    Eigen::MatrixXd A = S.weighted_sum(delta.array());
    check_condition(A.norm(), gamma);
    A.diagonal().array() += gamma;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("resolvent: factorization failed");
    Eigen::MatrixXd Q = ldlt.solve(Eigen::MatrixXd::Identity(S.dim(), S.dim()));
    return ((Q + Q.transpose()) * 0.5).eval();
}

double contraction_factor(const SymmetricFamily& S, const DiagonalWeights& delta, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("contraction_factor: gamma must be positive");
    if (delta.size() != S.count())
        throw DimensionError("contraction_factor: weight length mismatch");

    // Eigenvalues of I - gamma Q are mu/(mu + gamma) over the spectrum of the
    // weighted assembly; use the cheaper Gram side for rank-one families.
    Eigen::ArrayXd eigs;
    const Eigen::Index n = S.count(), p = S.dim();
    if (S.is_rank_one() && n < p) {
        const Eigen::ArrayXd ws = delta.array().sqrt();
        Eigen::MatrixXd K = S.gram();
        for (Eigen::Index i = 0; i < n; ++i) K.row(i) *= ws[i];
        for (Eigen::Index j = 0; j < n; ++j) K.col(j) *= ws[j];
        K /= static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
        eigs = es.eigenvalues().array();
    } else {
        Eigen::MatrixXd M = S.weighted_sum(delta.array());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        eigs = es.eigenvalues().array();
    }
    double phi = 0.0;
    for (Eigen::Index i = 0; i < eigs.size(); ++i)
        phi = std::max(phi, std::abs(eigs[i] / (eigs[i] + gamma)));
    return phi;
}

RobustEstimate solve_robust(const Eigen::MatrixXd& X, const WeightFunction& u, double gamma,
                            const RobustOptions& opts) {
    if (!(gamma > 0.0)) throw DomainError("solve_robust: gamma must be positive");
    if (!X.allFinite()) throw DomainError("solve_robust: data matrix has non-finite entries");
    for (Eigen::Index i = 0; i < X.cols(); ++i)
        if (X.col(i).squaredNorm() == 0.0)
            throw DomainError("solve_robust: column " + std::to_string(i) +
                              " is zero; its weight equation has no positive solution");

    const AdmissibilityReport rep = verify_weight_admissibility(u, /*prediction_mode=*/false);
    if (!rep.admissible())
        throw DomainError("solve_robust: weight function '" + u.name +
                          "' is not admissible (" + rep.describe() + ")");
    if (opts.tau && opts.tau->size() != X.cols())
        throw DimensionError("solve_robust: tau length mismatch");

    const SymmetricFamily fam = SymmetricFamily::rank_one(X);
    const Eigen::Index n = fam.count();

    auto map = [&](const DiagonalWeights& d) {
        return DiagonalWeights(trace_map_raw(fam, u.apply(d.array()), gamma));
    };

    DiagonalWeights init = opts.init
        ? *opts.init
        : DiagonalWeights(trace_map_raw(
              fam, Eigen::ArrayXd::Constant(n, u(1.0)), gamma));

    FixedPointProblem problem{map, init, opts.tol, opts.max_iter, 1.0};
    FixedPointSolution sol = solve(problem);

    // Stopping above was on the stable semi-metric; polish with plain Picard
    // until the defining equation holds at the sup-norm tolerance.
    Eigen::ArrayXd x = sol.point.array();
    Eigen::ArrayXd fx = trace_map_raw(fam, u.apply(x), gamma);
    int iters = sol.iterations;
    double residual = (x - fx).abs().maxCoeff();
    while (residual > opts.tol && iters < opts.max_iter) {
        x = fx;
        fx = trace_map_raw(fam, u.apply(x), gamma);
        residual = (x - fx).abs().maxCoeff();
        ++iters;
    }
    if (residual > opts.tol)
        throw NonConvergenceError(
            "solve_robust: fixed point did not reach the residual tolerance (residual " +
                std::to_string(residual) + ")",
            std::vector<double>(x.data(), x.data() + x.size()));

    RobustEstimate est;
    est.delta_hat = DiagonalWeights(x);
    const Eigen::ArrayXd w = u.apply(x);
    est.scatter = fam.weighted_sum(w);
    est.scatter = ((est.scatter + est.scatter.transpose()) * 0.5).eval();
    est.residual = residual;
    est.gamma = gamma;
    est.iterations = iters;
    est.observed_rates = sol.observed_rates;
    {
        // contraction factor at the solution weights; zero weights are valid here
        bool any_zero = (w <= 0.0).any();
        if (!any_zero) {
            est.contraction_bound = contraction_factor(fam, DiagonalWeights(w), gamma);
        } else {
            Eigen::MatrixXd M = fam.weighted_sum(w);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
            const double mu = es.eigenvalues().cwiseAbs().maxCoeff();
            est.contraction_bound = mu / (mu + gamma);
        }
    }
    if (opts.tau) est.d_hat = x / opts.tau->max(1.0);
    return est;
}

Eigen::ArrayXd empirical_spectrum(const Eigen::MatrixXd& scatter, bool drop_null) {
    check_symmetric(scatter, "empirical_spectrum");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        ((scatter + scatter.transpose()) * 0.5).eval(), Eigen::EigenvaluesOnly);
    Eigen::ArrayXd eigs = es.eigenvalues().array();
    if (!drop_null) return eigs;
    const double scale = eigs.abs().maxCoeff();
    std::vector<double> kept;
    kept.reserve(static_cast<size_t>(eigs.size()));
    for (Eigen::Index i = 0; i < eigs.size(); ++i)
        if (eigs[i] >= 1e-10 * scale) kept.push_back(eigs[i]);
    return Eigen::Map<Eigen::ArrayXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

double empirical_alignment(const Eigen::MatrixXd& scatter, const Eigen::VectorXd& m) {
    check_symmetric(scatter, "empirical_alignment");
    if (m.size() != scatter.rows()) throw DimensionError("empirical_alignment: size mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        ((scatter + scatter.transpose()) * 0.5).eval());
    const Eigen::ArrayXd eigs = es.eigenvalues().array();
    const Eigen::Index p = eigs.size();
    const double scale = std::max(eigs.abs().maxCoeff(), 1e-300);
    if (p >= 2 && eigs[p - 1] - eigs[p - 2] <= 1e-12 * scale)
        throw MultiplicityError("empirical_alignment: top eigenvalue is not simple");
    const double proj = es.eigenvectors().col(p - 1).dot(m);
    return proj * proj;
}

}  // namespace robscat
