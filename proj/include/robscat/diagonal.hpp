#pragma once

#include <Eigen/Dense>
#include <vector>

#include "robscat/errors.hpp"

namespace robscat {

/// An element of the cone of strictly positive diagonal matrices, stored as
/// its diagonal. Entries are validated once at construction and the value is
/// immutable afterwards, so instances can be shared across threads freely.
class DiagonalWeights {
public:
    explicit DiagonalWeights(Eigen::ArrayXd entries) : v_(std::move(entries)) {
        if (v_.size() < 1) throw DimensionError("DiagonalWeights: need at least one entry");
        for (Eigen::Index i = 0; i < v_.size(); ++i) {
            if (!std::isfinite(v_[i]) || v_[i] <= 0.0)
                throw DomainError("DiagonalWeights: entry " + std::to_string(i) +
                                  " is not strictly positive and finite");
        }
    }

    static DiagonalWeights constant(Eigen::Index n, double value) {
        return DiagonalWeights(Eigen::ArrayXd::Constant(n, value));
    }
    static DiagonalWeights ones(Eigen::Index n) { return constant(n, 1.0); }

    Eigen::Index size() const { return v_.size(); }
    double operator[](Eigen::Index i) const { return v_[i]; }
    const Eigen::ArrayXd& array() const { return v_; }

    double min() const { return v_.minCoeff(); }
    double max() const { return v_.maxCoeff(); }

    std::vector<double> to_vector() const { return {v_.data(), v_.data() + v_.size()}; }

private:
    Eigen::ArrayXd v_;
};

/// Sup-norm distance between two diagonals of equal length.
inline double sup_distance(const DiagonalWeights& a, const DiagonalWeights& b) {
    if (a.size() != b.size()) throw DimensionError("sup_distance: length mismatch");
    return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace robscat
