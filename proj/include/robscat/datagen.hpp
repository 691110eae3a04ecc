#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <variant>

#include <Eigen/Dense>

#include "robscat/errors.hpp"

namespace robscat {

/// Deterministic generator keyed by (seed, domain, index). Every column,
/// scaling draw and moment draw owns a disjoint substream, so any single
/// piece can be regenerated in isolation, bit-exactly, and reductions do not
/// depend on worker count. All transforms (normal, cauchy, gamma, ...) are
/// implemented on top of the engine's raw 64-bit output so results do not
/// depend on the standard library's unspecified distribution algorithms.
class SubstreamRng {
public:
    SubstreamRng(std::uint64_t seed, std::uint64_t domain, std::uint64_t index);

    double uniform();                 // [0, 1), 53-bit
    double uniform_positive();        // (0, 1)
    double normal();                  // Box-Muller
    double cauchy();                  // standard Cauchy
    double gamma(double shape);       // unit scale, Marsaglia-Tsang
    double student_t(double nu);
    double pareto(double alpha);      // minimum 1

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct TauConstant { double value = 1.0; };
struct TauStudentAbs { double nu = 1.0; };
struct TauPareto { double alpha = 2.0; };
using TauLaw = std::variant<TauConstant, TauStudentAbs, TauPareto>;

/// Parse "constant(c)", "student_abs(nu)" or "pareto(alpha)".
TauLaw parse_tau_law(const std::string& spec);
std::string tau_law_name(const TauLaw& law);

struct GeneratorSpec {
    enum class Kind { gaussian, sin_correlated, custom_lipschitz };

    Kind kind = Kind::gaussian;
    int p = 1, n = 1;
    std::optional<Eigen::MatrixXd> mixing;  // A for sin_correlated; drawn from seed if absent
    bool normalize_mixing = true;           // rescale A to unit spectral norm
    TauLaw tau_law = TauConstant{1.0};
    double signal_scale = 0.0;              // m = scale * (1,...,1)/sqrt(p)
    std::uint64_t seed = 0;
    // custom_lipschitz: user-supplied column map applied to a standard normal
    // vector; the caller is responsible for its Lipschitz constant.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> lipschitz_map;
};

/// The mixing matrix actually used for sin_correlated columns: the supplied
/// one, or a seeded draw with i.i.d. standard normal entries; normalized to
/// unit spectral norm unless disabled.
Eigen::MatrixXd mixing_matrix(const GeneratorSpec& spec);

/// One data column; columns are independent across substreams.
Eigen::VectorXd sample_Z_column(const GeneratorSpec& spec, int column,
                                const Eigen::MatrixXd* mixing = nullptr);

/// Full p x n draw.
Eigen::MatrixXd sample_Z(const GeneratorSpec& spec);

/// Per-sample positive scalings.
Eigen::ArrayXd sample_tau(const GeneratorSpec& spec);

/// The planted signal m = signal_scale * (1,...,1)/sqrt(p).
Eigen::VectorXd signal(const GeneratorSpec& spec);

/// X with column i equal to sqrt(tau_i) z_i + m.
Eigen::MatrixXd assemble_dataset(const Eigen::MatrixXd& Z, const Eigen::ArrayXd& tau,
                                 const Eigen::VectorXd& m);

struct MomentEstimate {
    Eigen::MatrixXd C;   // average of z z^T over the draws
    Eigen::VectorXd mu;  // average of z
    long draws = 0;
};

/// Monte Carlo second moments of the column law from fresh draws (default
/// budget p^2 when draws <= 0). The reduction runs over fixed-size blocks
/// combined in index order, so the result is identical for any thread count.
MomentEstimate estimate_population_moments(const GeneratorSpec& spec, long draws = -1,
                                           int threads = 1);

}  // namespace robscat
