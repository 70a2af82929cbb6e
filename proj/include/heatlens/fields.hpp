#pragma once

#include "heatlens/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>

namespace heatlens {

using ScalarField = Eigen::VectorXd;    // one value per node
using CovectorField = Eigen::MatrixXd;  // node_count x n, orthonormal frame components

inline int sym_size(int n) { return n * (n + 1) / 2; }

// Column of entry (i, j) in upper-triangular row-major storage.
inline int sym_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
}

// Symmetric 2-tensor field in orthonormal frames. Carries its quadrature
// weights so integrals and distances need no other context.
struct TensorField {
    int dim = 1;
    Eigen::MatrixXd entries;  // node_count x sym_size(dim)
    std::shared_ptr<const Eigen::VectorXd> weights;

    std::size_t node_count() const { return static_cast<std::size_t>(entries.rows()); }

    Eigen::MatrixXd at(std::size_t node) const {
        Eigen::MatrixXd m(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m(i, j) = entries(static_cast<Eigen::Index>(node), sym_index(i, j, dim));
        return m;
    }
};

inline TensorField make_tensor_field(int dim, std::shared_ptr<const Eigen::VectorXd> weights) {
    TensorField t;
    t.dim = dim;
    t.weights = std::move(weights);
    t.entries = Eigen::MatrixXd::Zero(t.weights->size(), sym_size(dim));
    return t;
}

inline TensorField identity_tensor(int dim, std::shared_ptr<const Eigen::VectorXd> weights) {
    TensorField t = make_tensor_field(dim, std::move(weights));
    for (int i = 0; i < dim; ++i) t.entries.col(sym_index(i, i, dim)).setOnes();
    return t;
}

inline void require_same_grid(const TensorField& a, const TensorField& b) {
    if (a.dim != b.dim || a.entries.rows() != b.entries.rows())
        throw shape_error("tensor fields live on different grids or have different ranks");
    if (a.weights != b.weights && (!a.weights || !b.weights || *a.weights != *b.weights))
        throw shape_error("tensor fields carry different quadrature weights");
}

// Pointwise <A, B> = sum_ij A_ij B_ij.
inline ScalarField contract(const TensorField& a, const TensorField& b) {
    require_same_grid(a, b);
    ScalarField out = ScalarField::Zero(a.entries.rows());
    for (int i = 0; i < a.dim; ++i)
        for (int j = i; j < a.dim; ++j) {
            int c = sym_index(i, j, a.dim);
            out += (i == j ? 1.0 : 2.0) * a.entries.col(c).cwiseProduct(b.entries.col(c));
        }
    return out;
}

// Pointwise T(alpha, beta) = sum_ij T_ij alpha_i beta_j.
inline ScalarField contract(const TensorField& t, const CovectorField& alpha, const CovectorField& beta) {
    if (alpha.rows() != t.entries.rows() || beta.rows() != t.entries.rows() || alpha.cols() != t.dim || beta.cols() != t.dim)
        throw shape_error("covector fields do not match the tensor field");
    ScalarField out = ScalarField::Zero(t.entries.rows());
    for (int i = 0; i < t.dim; ++i)
        for (int j = 0; j < t.dim; ++j)
            out += t.entries.col(sym_index(i, j, t.dim)).cwiseProduct(alpha.col(i).cwiseProduct(beta.col(j)));
    return out;
}

// Pointwise T applied to a covector: (T alpha)_i = sum_j T_ij alpha_j.
inline CovectorField apply(const TensorField& t, const CovectorField& alpha) {
    CovectorField out = CovectorField::Zero(alpha.rows(), alpha.cols());
    for (int i = 0; i < t.dim; ++i)
        for (int j = 0; j < t.dim; ++j) out.col(i) += t.entries.col(sym_index(i, j, t.dim)).cwiseProduct(alpha.col(j));
    return out;
}

// Pointwise squared Hilbert-Schmidt norm.
inline ScalarField hs_norm_squared(const TensorField& t) { return contract(t, t); }

inline TensorField operator-(const TensorField& a, const TensorField& b) {
    require_same_grid(a, b);
    TensorField c = a;
    c.entries -= b.entries;
    return c;
}

inline TensorField operator*(double s, const TensorField& a) {
    TensorField c = a;
    c.entries *= s;
    return c;
}

inline TensorField scale_pointwise(const TensorField& a, const ScalarField& s) {
    if (s.size() != a.entries.rows()) throw shape_error("scalar field does not match the tensor field");
    TensorField c = a;
    c.entries = s.asDiagonal() * a.entries;
    return c;
}

}  // namespace heatlens
