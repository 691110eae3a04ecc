#include "robscat/datagen.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace robscat {

namespace {

constexpr std::uint64_t kDomainColumn = 0;
constexpr std::uint64_t kDomainTau = 1;
constexpr std::uint64_t kDomainMixing = 2;
constexpr std::uint64_t kDomainMoments = 3;

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

SubstreamRng::SubstreamRng(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
    std::seed_seq seq{lo32(seed), hi32(seed), lo32(domain), hi32(domain),
                      lo32(index), hi32(index)};
    engine_.seed(seq);
}

double SubstreamRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SubstreamRng::uniform_positive() {
    double u;
    do { u = uniform(); } while (u == 0.0);
    return u;
}

double SubstreamRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

double SubstreamRng::cauchy() {
    return std::tan(std::numbers::pi * (uniform_positive() - 0.5));
}

double SubstreamRng::gamma(double shape) {
    if (!(shape > 0.0)) throw DomainError("SubstreamRng::gamma: shape must be positive");
    if (shape < 1.0) {
        // boost: Gamma(a) = Gamma(a+1) * U^{1/a}
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform_positive(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_positive();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double SubstreamRng::student_t(double nu) {
    if (!(nu > 0.0)) throw DomainError("SubstreamRng::student_t: nu must be positive");
    if (nu == 1.0) return cauchy();
    const double z = normal();
    const double chi2 = 2.0 * gamma(nu / 2.0);
    return z / std::sqrt(chi2 / nu);
}

double SubstreamRng::pareto(double alpha) {
    if (!(alpha > 0.0)) throw DomainError("SubstreamRng::pareto: alpha must be positive");
    return std::pow(uniform_positive(), -1.0 / alpha);
}

TauLaw parse_tau_law(const std::string& spec) {
    const auto open = spec.find('(');
    const std::string name = (open == std::string::npos) ? spec : spec.substr(0, open);
    double param = std::numeric_limits<double>::quiet_NaN();
    bool has_param = false;
    if (open != std::string::npos) {
        const auto close = spec.rfind(')');
        if (close == std::string::npos || close < open)
            throw ConfigError("parse_tau_law: unbalanced parentheses in '" + spec + "'");
        try {
            param = std::stod(spec.substr(open + 1, close - open - 1));
            has_param = true;
        } catch (const std::exception&) {
            throw ConfigError("parse_tau_law: bad parameter in '" + spec + "'");
        }
    }
    if (name == "constant") return TauConstant{has_param ? param : 1.0};
    if (name == "student_abs") return TauStudentAbs{has_param ? param : 1.0};
    if (name == "pareto") return TauPareto{has_param ? param : 2.0};
    throw ConfigError("parse_tau_law: unknown law '" + name + "'");
}

std::string tau_law_name(const TauLaw& law) {
    std::ostringstream os;
    if (const auto* c = std::get_if<TauConstant>(&law)) os << "constant(" << c->value << ")";
    if (const auto* s = std::get_if<TauStudentAbs>(&law)) os << "student_abs(" << s->nu << ")";
    if (const auto* p = std::get_if<TauPareto>(&law)) os << "pareto(" << p->alpha << ")";
    return os.str();
}

Eigen::MatrixXd mixing_matrix(const GeneratorSpec& spec) {
    Eigen::MatrixXd A;
    if (spec.mixing) {
        A = *spec.mixing;
        if (A.rows() != spec.p || A.cols() != spec.p)
            throw ConfigError("mixing_matrix: A must be p x p");
    } else {
        A.resize(spec.p, spec.p);
        SubstreamRng rng(spec.seed, kDomainMixing, 0);
        for (int j = 0; j < spec.p; ++j)
            for (int i = 0; i < spec.p; ++i) A(i, j) = rng.normal();
    }
    if (spec.normalize_mixing) {
        // unit spectral norm via power iteration on A^T A
        Eigen::VectorXd v = Eigen::VectorXd::Ones(spec.p).normalized();
        double norm2 = 0.0;
        for (int it = 0; it < 200; ++it) {
            v = A.transpose() * (A * v);
            norm2 = v.norm();
            if (norm2 == 0.0) break;
            v /= norm2;
        }
        const double norm = std::sqrt(norm2);
        if (norm > 0.0) A /= norm;
    }
    return A;
}

Eigen::VectorXd sample_Z_column(const GeneratorSpec& spec, int column,
                                const Eigen::MatrixXd* mixing) {
    if (column < 0) throw DomainError("sample_Z_column: negative column index");
    SubstreamRng rng(spec.seed, kDomainColumn, static_cast<std::uint64_t>(column));
    Eigen::VectorXd g(spec.p);
    for (int i = 0; i < spec.p; ++i) g[i] = rng.normal();

    switch (spec.kind) {
        case GeneratorSpec::Kind::gaussian:
            return g;
        case GeneratorSpec::Kind::sin_correlated: {
            Eigen::MatrixXd local;
            if (mixing == nullptr) {
                local = mixing_matrix(spec);
                mixing = &local;
            }
            return (*mixing * g).array().sin().matrix();
        }
        case GeneratorSpec::Kind::custom_lipschitz: {
            if (!spec.lipschitz_map)
                throw ConfigError("sample_Z_column: custom_lipschitz needs a column map");
            Eigen::VectorXd z = spec.lipschitz_map(g);
            if (z.size() != spec.p)
                throw ConfigError("sample_Z_column: custom map returned a wrong size");
            return z;
        }
    }
    throw ConfigError("sample_Z_column: unknown generator kind");
}

Eigen::MatrixXd sample_Z(const GeneratorSpec& spec) {
    if (spec.p < 1 || spec.n < 1) throw ConfigError("sample_Z: p and n must be >= 1");
    std::optional<Eigen::MatrixXd> A;
    const Eigen::MatrixXd* mix = nullptr;
    if (spec.kind == GeneratorSpec::Kind::sin_correlated) {
        A = mixing_matrix(spec);
        mix = &*A;
    }
    Eigen::MatrixXd Z(spec.p, spec.n);
    for (int j = 0; j < spec.n; ++j) Z.col(j) = sample_Z_column(spec, j, mix);
    return Z;
}

Eigen::ArrayXd sample_tau(const GeneratorSpec& spec) {
    Eigen::ArrayXd tau(spec.n);
    for (int j = 0; j < spec.n; ++j) {
        SubstreamRng rng(spec.seed, kDomainTau, static_cast<std::uint64_t>(j));
        if (const auto* c = std::get_if<TauConstant>(&spec.tau_law)) {
            if (!(c->value > 0.0)) throw ConfigError("sample_tau: constant must be positive");
            tau[j] = c->value;
        } else if (const auto* s = std::get_if<TauStudentAbs>(&spec.tau_law)) {
            double t;
            do { t = std::abs(rng.student_t(s->nu)); } while (t == 0.0);
            tau[j] = t;
        } else if (const auto* par = std::get_if<TauPareto>(&spec.tau_law)) {
            tau[j] = rng.pareto(par->alpha);
        }
    }
    return tau;
}

Eigen::VectorXd signal(const GeneratorSpec& spec) {
    return Eigen::VectorXd::Constant(spec.p, spec.signal_scale / std::sqrt(double(spec.p)));
}

Eigen::MatrixXd assemble_dataset(const Eigen::MatrixXd& Z, const Eigen::ArrayXd& tau,
                                 const Eigen::VectorXd& m) {
    if (tau.size() != Z.cols()) throw DimensionError("assemble_dataset: tau length mismatch");
    if (m.size() != Z.rows()) throw DimensionError("assemble_dataset: signal length mismatch");
    for (Eigen::Index j = 0; j < tau.size(); ++j)
        if (!(tau[j] > 0.0) || !std::isfinite(tau[j]))
            throw DomainError("assemble_dataset: tau must be strictly positive finite");
    Eigen::MatrixXd X(Z.rows(), Z.cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
        X.col(j) = std::sqrt(tau[j]) * Z.col(j) + m;
    return X;
}

MomentEstimate estimate_population_moments(const GeneratorSpec& spec, long draws, int threads) {
    if (draws <= 0) draws = static_cast<long>(spec.p) * static_cast<long>(spec.p);
    if (threads < 1) threads = 1;

    std::optional<Eigen::MatrixXd> A;
    const Eigen::MatrixXd* mix = nullptr;
    if (spec.kind == GeneratorSpec::Kind::sin_correlated) {
        A = mixing_matrix(spec);
        mix = &*A;
    }

    constexpr long kBlock = 128;
    const long blocks = (draws + kBlock - 1) / kBlock;

    std::vector<Eigen::MatrixXd> c_part(static_cast<size_t>(blocks));
    std::vector<Eigen::VectorXd> mu_part(static_cast<size_t>(blocks));

    auto run_block = [&](long b) {
        const long lo = b * kBlock;
        const long hi = std::min(lo + kBlock, draws);
        Eigen::MatrixXd Zb(spec.p, hi - lo);
        for (long d = lo; d < hi; ++d) {
            SubstreamRng rng(spec.seed, kDomainMoments, static_cast<std::uint64_t>(d));
            Eigen::VectorXd g(spec.p);
            for (int i = 0; i < spec.p; ++i) g[i] = rng.normal();
            switch (spec.kind) {
                case GeneratorSpec::Kind::gaussian:
                    Zb.col(d - lo) = g;
                    break;
                case GeneratorSpec::Kind::sin_correlated:
                    Zb.col(d - lo) = (*mix * g).array().sin().matrix();
                    break;
                case GeneratorSpec::Kind::custom_lipschitz:
                    if (!spec.lipschitz_map)
                        throw ConfigError("estimate_population_moments: missing column map");
                    Zb.col(d - lo) = spec.lipschitz_map(g);
                    break;
            }
        }
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(spec.p, spec.p);
        C.selfadjointView<Eigen::Lower>().rankUpdate(Zb, 1.0);
        c_part[static_cast<size_t>(b)] = C;
        mu_part[static_cast<size_t>(b)] = Zb.rowwise().sum();
    };

    if (threads == 1 || blocks == 1) {
        for (long b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::atomic<long> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const long b = next.fetch_add(1);
                    if (b >= blocks) return;
                    try {
                        run_block(b);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    // fixed-order reduction: identical result for any worker count
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(spec.p, spec.p);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(spec.p);
    for (long b = 0; b < blocks; ++b) {
        C += c_part[static_cast<size_t>(b)];
        mu += mu_part[static_cast<size_t>(b)];
    }
    C /= static_cast<double>(draws);
    mu /= static_cast<double>(draws);

    MomentEstimate est;
    est.C = C.selfadjointView<Eigen::Lower>();
    est.mu = mu;
    est.draws = draws;
    return est;
}

}  // namespace robscat
