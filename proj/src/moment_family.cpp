#include <Eigen/Eigenvalues>
#include <cmath>

#include "robscat/deterministic.hpp"

namespace robscat {

namespace {

void check_symmetric_psd(const Eigen::MatrixXd& A, const char* what, bool require_psd) {
    if (A.rows() != A.cols()) throw DomainError(std::string(what) + ": matrix not square");
    const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DomainError(std::string(what) + ": matrix fails the symmetry gate");
    if (require_psd) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8 * scale)
            throw DomainError(std::string(what) + ": matrix is not positive semidefinite");
    }
}

}  // namespace

TauSplit TauSplit::from(const Eigen::ArrayXd& tau) {
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        if (!(tau[i] > 0.0) || !std::isfinite(tau[i]))
            throw DomainError("TauSplit: tau must be strictly positive finite");
    TauSplit s;
    s.tau_under = tau.max(1.0);
    s.tau_bar = tau.min(1.0);
    return s;
}

Eigen::ArrayXd u_tau(const WeightFunction& u, const TauSplit& split, const Eigen::ArrayXd& d) {
    if (d.size() != split.tau_under.size()) throw DimensionError("u_tau: length mismatch");
    Eigen::ArrayXd out(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        out[i] = split.tau_under[i] * u(split.tau_under[i] * d[i]);
    return out;
}

MomentFamily MomentFamily::structured(const Eigen::MatrixXd& C, Eigen::ArrayXd alpha,
                                      Eigen::MatrixXd V, std::vector<Eigen::MatrixXd> B) {
    check_symmetric_psd(C, "MomentFamily::structured", /*require_psd=*/true);
    MomentFamily fam;
    fam.structured_ = true;
    fam.p_ = C.rows();
    fam.n_ = alpha.size();
    if (fam.n_ < 1) throw DimensionError("MomentFamily::structured: empty family");
    const Eigen::Index k = V.size() == 0 ? 0 : V.cols();
    if (k > 0 && V.rows() != fam.p_)
        throw DimensionError("MomentFamily::structured: frame row count mismatch");
    if (k > 0 && static_cast<Eigen::Index>(B.size()) != fam.n_)
        throw DimensionError("MomentFamily::structured: need one coefficient block per member");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success)
        throw NumericalError("MomentFamily::structured: eigendecomposition failed");
    fam.eigc_ = es.eigenvalues().array().max(0.0);
    fam.eigvec_ = es.eigenvectors();
    fam.c_norm_ = fam.eigc_.maxCoeff();
    fam.alpha_ = std::move(alpha);
    fam.V_ = std::move(V);
    fam.B_ = std::move(B);
    if (k > 0) fam.W_ = fam.eigvec_.transpose() * fam.V_;

    const double trC = fam.eigc_.sum();
    double vtv_norm = 0.0;
    Eigen::MatrixXd VtV;
    if (k > 0) {
        VtV = fam.V_.transpose() * fam.V_;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ev(VtV, Eigen::EigenvaluesOnly);
        vtv_norm = ev.eigenvalues().cwiseAbs().maxCoeff();
        fam.frame_norm_ = vtv_norm;
    }

    fam.trace_means_.resize(fam.n_);
    fam.norm_bounds_.resize(fam.n_);
    const double inv_n = 1.0 / static_cast<double>(fam.n_);
    for (Eigen::Index i = 0; i < fam.n_; ++i) {
        double tm = fam.alpha_[i] * trC;
        double nb = fam.alpha_[i] * fam.c_norm_;
        if (k > 0) {
            tm += (fam.B_[i].cwiseProduct(VtV)).sum();
            nb += fam.B_[i].norm() * vtv_norm;  // Frobenius bound on the block norm
        }
        fam.trace_means_[i] = tm * inv_n;
        fam.norm_bounds_[i] = nb;
        if (!(fam.trace_means_[i] > 0.0))
            throw DomainError("MomentFamily::structured: member " + std::to_string(i) +
                              " has nonpositive normalized trace");
    }
    return fam;
}

MomentFamily MomentFamily::dense(std::vector<Eigen::MatrixXd> members) {
    if (members.empty()) throw DimensionError("MomentFamily::dense: empty family");
    MomentFamily fam;
    fam.structured_ = false;
    fam.n_ = static_cast<Eigen::Index>(members.size());
    fam.p_ = members.front().rows();
    fam.trace_means_.resize(fam.n_);
    fam.norm_bounds_.resize(fam.n_);
    const double inv_n = 1.0 / static_cast<double>(fam.n_);
    for (Eigen::Index i = 0; i < fam.n_; ++i) {
        Eigen::MatrixXd& M = members[static_cast<size_t>(i)];
        if (M.rows() != fam.p_ || M.cols() != fam.p_)
            throw DimensionError("MomentFamily::dense: inconsistent member sizes");
        check_symmetric_psd(M, "MomentFamily::dense", /*require_psd=*/true);
        M = ((M + M.transpose()) * 0.5).eval();
        fam.trace_means_[i] = M.trace() * inv_n;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        fam.norm_bounds_[i] = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!(fam.trace_means_[i] > 0.0))
            throw DomainError("MomentFamily::dense: member " + std::to_string(i) +
                              " has nonpositive normalized trace");
    }
    fam.members_ = std::move(members);
    return fam;
}

// One (cw, z) evaluation; precomputes the shared pieces every functional needs.
template <typename Scalar>
struct FamilyKernel {
    using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    const MomentFamily& F;
    Scalar z;
    // structured pieces
    ArrayX r;          // 1/(a c_l + z)
    Scalar tr_R{};     // sum r_l
    Scalar tr_CR{};    // sum c_l r_l
    MatrixX T;         // Bbar (I + P Bbar)^{-1}
    MatrixX P;         // W^T diag(r) W
    MatrixX Pc;        // W^T diag(c r^2) W
    MatrixX Pr2;       // W^T diag(r^2) W
    Eigen::Index k = 0;
    // dense pieces
    MatrixX inv;

    FamilyKernel(const MomentFamily& fam, const ArrayX& cw, Scalar shift) : F(fam), z(shift) {
        if (cw.size() != fam.count()) throw DimensionError("MomentFamily: weight length mismatch");
        const double inv_n = 1.0 / static_cast<double>(fam.count());
        if (fam.structured_) {
            k = fam.W_.size() == 0 ? 0 : fam.W_.cols();
            Scalar a = (cw * fam.alpha_.template cast<Scalar>()).sum() * inv_n;
            r.resize(fam.eigc_.size());
            for (Eigen::Index l = 0; l < fam.eigc_.size(); ++l) {
                const Scalar den = a * fam.eigc_[l] + z;
                if (std::abs(den) < 1e-300)
                    throw NumericalError("MomentFamily: singular resolvent assembly");
                r[l] = Scalar(1.0) / den;
            }
            tr_R = r.sum();
            tr_CR = (r * fam.eigc_.template cast<Scalar>()).sum();
            if (k > 0) {
                MatrixX Bbar = MatrixX::Zero(k, k);
                for (Eigen::Index j = 0; j < fam.count(); ++j)
                    Bbar += cw[j] * fam.B_[static_cast<size_t>(j)].template cast<Scalar>();
                Bbar *= Scalar(inv_n);
                const MatrixX Wc = fam.W_.template cast<Scalar>();
                P = Wc.transpose() * (r.matrix().asDiagonal() * Wc);
                Pc = Wc.transpose() *
                     ((r * r * fam.eigc_.template cast<Scalar>()).matrix().asDiagonal() * Wc);
                Pr2 = Wc.transpose() * ((r * r).matrix().asDiagonal() * Wc);
                MatrixX M = MatrixX::Identity(k, k) + P * Bbar;
                T = Bbar * M.fullPivLu().solve(MatrixX::Identity(k, k));
            }
        } else {
            MatrixX M = MatrixX::Zero(fam.dim(), fam.dim());
            for (Eigen::Index j = 0; j < fam.count(); ++j)
                M += (cw[j] * Scalar(inv_n)) *
                     fam.members_[static_cast<size_t>(j)].template cast<Scalar>();
            M.diagonal().array() += z;
            Eigen::PartialPivLU<MatrixX> lu(M);
            inv = lu.solve(MatrixX::Identity(fam.dim(), fam.dim()));
            if (!inv.allFinite())
                throw NumericalError("MomentFamily: singular resolvent assembly");
        }
    }

    Scalar tr_C_inv() const {  // tr(C (A + zI)^{-1}) for the shared base
        if (k == 0) return tr_CR;
        return tr_CR - (T * Pc).trace();
    }

    MatrixX frame_inv() const {  // V^T (A + zI)^{-1} V
        return P - P * T * P;
    }

    ArrayX traces() const {
        const double inv_n = 1.0 / static_cast<double>(F.count());
        ArrayX t(F.count());
        if (F.structured_) {
            const Scalar base = tr_C_inv();
            MatrixX Vinv;
            if (k > 0) Vinv = frame_inv();
            for (Eigen::Index i = 0; i < F.count(); ++i) {
                Scalar val = Scalar(F.alpha_[i]) * base;
                if (k > 0)
                    val += (F.B_[static_cast<size_t>(i)].template cast<Scalar>().cwiseProduct(
                                Vinv))
                               .sum();
                t[i] = val * Scalar(inv_n);
            }
        } else {
            for (Eigen::Index i = 0; i < F.count(); ++i)
                t[i] = (F.members_[static_cast<size_t>(i)].template cast<Scalar>().cwiseProduct(
                            inv))
                           .sum() *
                       Scalar(inv_n);
        }
        return t;
    }

    Scalar trace_inverse() const {
        if (!F.structured_) return inv.trace();
        if (k == 0) return tr_R;
        return tr_R - (T * Pr2).trace();
    }

    Scalar quad_form(const Eigen::VectorXd& v) const {
        if (v.size() != F.dim()) throw DimensionError("MomentFamily::quad_form: size mismatch");
        if (!F.structured_) {
            const VectorX vc = v.template cast<Scalar>();
            return (vc.transpose() * inv * vc)(0, 0);
        }
        const Eigen::VectorXd wv = F.eigvec_.transpose() * v;
        const ArrayX wva = wv.array().template cast<Scalar>();
        Scalar vRv = (r * wva * wva).sum();
        if (k == 0) return vRv;
        const typename Eigen::Matrix<Scalar, 1, Eigen::Dynamic> vRV =
            (r * wva).matrix().transpose() * F.W_.template cast<Scalar>();
        return vRv - (vRV * T * vRV.transpose())(0, 0);
    }

    MatrixX resolvent() const {
        if (!F.structured_) return inv;
        const MatrixX Qc = F.eigvec_.template cast<Scalar>();
        MatrixX R = Qc * r.matrix().asDiagonal() * Qc.transpose();
        if (k == 0) return R;
        const MatrixX RV = Qc * (r.matrix().asDiagonal() * F.W_.template cast<Scalar>());
        return R - RV * T * RV.transpose();
    }
};

Eigen::ArrayXd MomentFamily::traces(const Eigen::ArrayXd& cw, double z) const {
    return FamilyKernel<double>(*this, cw, z).traces();
}
Eigen::ArrayXcd MomentFamily::traces(const Eigen::ArrayXcd& cw, Complex z) const {
    return FamilyKernel<Complex>(*this, cw, z).traces();
}
double MomentFamily::trace_inverse(const Eigen::ArrayXd& cw, double z) const {
    return FamilyKernel<double>(*this, cw, z).trace_inverse();
}
Complex MomentFamily::trace_inverse(const Eigen::ArrayXcd& cw, Complex z) const {
    return FamilyKernel<Complex>(*this, cw, z).trace_inverse();
}
double MomentFamily::quad_form(const Eigen::VectorXd& v, const Eigen::ArrayXd& cw,
                               double z) const {
    return FamilyKernel<double>(*this, cw, z).quad_form(v);
}
Complex MomentFamily::quad_form(const Eigen::VectorXd& v, const Eigen::ArrayXcd& cw,
                                Complex z) const {
    return FamilyKernel<Complex>(*this, cw, z).quad_form(v);
}
Eigen::MatrixXd MomentFamily::resolvent_matrix(const Eigen::ArrayXd& cw, double z) const {
    return FamilyKernel<double>(*this, cw, z).resolvent();
}
Eigen::MatrixXcd MomentFamily::resolvent_matrix(const Eigen::ArrayXcd& cw, Complex z) const {
    return FamilyKernel<Complex>(*this, cw, z).resolvent();
}

PopulationModel PopulationModel::shared(Eigen::MatrixXd C, Eigen::ArrayXd tau, Eigen::VectorXd m,
                                        double gamma, std::optional<Eigen::VectorXd> mu) {
    if (!(gamma > 0.0)) throw DomainError("PopulationModel: gamma must be positive");
    check_symmetric_psd(C, "PopulationModel", /*require_psd=*/true);
    if (m.size() != C.rows()) throw DimensionError("PopulationModel: signal length mismatch");
    if (!m.allFinite()) throw DomainError("PopulationModel: signal has non-finite entries");

    PopulationModel model;
    model.shared_ = true;
    model.split_ = TauSplit::from(tau);
    model.tau_ = std::move(tau);
    model.m_ = std::move(m);
    model.mu_ = mu ? *mu : Eigen::VectorXd::Zero(C.rows());
    if (model.mu_.size() != C.rows())
        throw DimensionError("PopulationModel: mean length mismatch");
    if (model.mu_.squaredNorm() > 0.0) {
        // the centered covariance must stay PSD for the barred family
        check_symmetric_psd(C - model.mu_ * model.mu_.transpose(), "PopulationModel(centered)",
                            true);
    }
    const double tm = C.trace() / static_cast<double>(model.tau_.size());
    if (!(tm > 0.0)) throw DomainError("PopulationModel: normalized trace of C must be positive");
    model.C_ = std::move(C);
    model.gamma_ = gamma;
    return model;
}

PopulationModel PopulationModel::general(std::vector<Eigen::MatrixXd> C, Eigen::ArrayXd tau,
                                         Eigen::VectorXd m, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("PopulationModel: gamma must be positive");
    if (C.size() != static_cast<size_t>(tau.size()))
        throw DimensionError("PopulationModel: need one C_i per sample");
    PopulationModel model;
    model.shared_ = false;
    model.split_ = TauSplit::from(tau);
    model.tau_ = std::move(tau);
    model.m_ = std::move(m);
    if (!C.empty() && model.m_.size() != C.front().rows())
        throw DimensionError("PopulationModel: signal length mismatch");
    model.mu_ = Eigen::VectorXd::Zero(model.m_.size());
    model.C_list_ = std::move(C);
    model.gamma_ = gamma;
    return model;
}

std::shared_ptr<const MomentFamily> PopulationModel::plain() const {
    if (!plain_) {
        if (shared_) {
            plain_ = std::make_shared<MomentFamily>(MomentFamily::structured(
                C_, Eigen::ArrayXd::Ones(n()), Eigen::MatrixXd(), {}));
        } else {
            plain_ = std::make_shared<MomentFamily>(MomentFamily::dense(C_list_));
        }
    }
    return plain_;
}

std::shared_ptr<const MomentFamily> PopulationModel::barred(bool with_signal) const {
    auto& cache = with_signal ? barred_signal_ : barred_plain_;
    if (cache) return cache;

    const Eigen::ArrayXd& tb = split_.tau_bar;
    const Eigen::ArrayXd& tu = split_.tau_under;
    const bool has_m = m_.squaredNorm() > 0.0;
    const bool has_mu = mu_.squaredNorm() > 0.0;

    if (shared_) {
        if (!with_signal || (!has_m && !has_mu)) {
            // tau_bar-scaled plain moments
            cache = std::make_shared<MomentFamily>(
                MomentFamily::structured(C_, tb, Eigen::MatrixXd(), {}));
            return cache;
        }
        // tau_bar_i C + sqrt(tau_bar/tau_under)(mu m^T + m mu^T) + m m^T / tau_under
        Eigen::Index k = (has_m ? 1 : 0) + (has_mu ? 1 : 0);
        Eigen::MatrixXd V(p(), k);
        Eigen::Index col = 0;
        const Eigen::Index m_col = has_m ? col++ : -1;
        const Eigen::Index mu_col = has_mu ? col++ : -1;
        if (has_m) V.col(m_col) = m_;
        if (has_mu) V.col(mu_col) = mu_;
        std::vector<Eigen::MatrixXd> B(static_cast<size_t>(n()));
        for (Eigen::Index i = 0; i < n(); ++i) {
            Eigen::MatrixXd Bi = Eigen::MatrixXd::Zero(k, k);
            if (has_m) Bi(m_col, m_col) = 1.0 / tu[i];
            if (has_m && has_mu) {
                const double cross = std::sqrt(tb[i] / tu[i]);
                Bi(m_col, mu_col) = cross;
                Bi(mu_col, m_col) = cross;
            }
            B[static_cast<size_t>(i)] = Bi;
        }
        cache = std::make_shared<MomentFamily>(MomentFamily::structured(C_, tb, V, std::move(B)));
        return cache;
    }

    std::vector<Eigen::MatrixXd> members(static_cast<size_t>(n()));
    for (Eigen::Index i = 0; i < n(); ++i) {
        Eigen::MatrixXd M = tb[i] * C_list_[static_cast<size_t>(i)];
        if (with_signal && has_m) M += (m_ * m_.transpose()) / tu[i];
        members[static_cast<size_t>(i)] = std::move(M);
    }
    cache = std::make_shared<MomentFamily>(MomentFamily::dense(std::move(members)));
    return cache;
}

}  // namespace robscat
