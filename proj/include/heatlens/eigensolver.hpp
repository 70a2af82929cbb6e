#pragma once

#include "heatlens/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace heatlens {

struct EigenSolverOptions {
    std::size_t block_size = 8;
    double tolerance = 1e-8;        // ‖Op y - θ y‖ <= tolerance * θ for every returned pair
    std::size_t dense_limit = 600;  // below this size use a dense solver
    std::uint64_t seed = 0x5eed;
};

// Columns of `vectors` are mass-orthonormal: vᵀ diag(mass) v = I.
struct EigenResult {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    double max_residual = 0.0;  // max ‖S v - λ M v‖ / max(1, λ)
};

namespace detail {

// Platform-independent Gaussian samples (mt19937_64 + Box-Muller).
inline Eigen::MatrixXd gaussian_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto uniform = [&gen] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            double u1 = uniform(), u2 = uniform();
            m(i, j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }
    return m;
}

// Orthonormalizes the columns of X against basis(:, 0:used) and each other,
// appending them after column `used`. Columns that vanish are replaced by
// fresh random directions.
inline void orthonormalize_block(Eigen::MatrixXd& basis, Eigen::Index used, Eigen::MatrixXd X, std::uint64_t& seed) {
    const Eigen::Index n = X.rows();
    Eigen::VectorXd before = X.colwise().norm().transpose();
    for (int pass = 0; pass < 2; ++pass)
        if (used > 0) X -= basis.leftCols(used) * (basis.leftCols(used).transpose() * X);
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        Eigen::VectorXd v = X.col(c);
        double ref = std::max(before(c), 1e-300);
        for (int attempt = 0; attempt < 4; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                if (c > 0) v -= basis.middleCols(used, c) * (basis.middleCols(used, c).transpose() * v);
                if (attempt > 0 && used > 0) v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
            }
            if (v.norm() > 1e-10 * ref) break;
            v = gaussian_block(n, 1, seed++).col(0);
            ref = v.norm();
        }
        basis.col(used + c) = v.normalized();
    }
}

inline void finalize_pairs(const Eigen::SparseMatrix<double>& S, const Eigen::VectorXd& mass, EigenResult& r) {
    const Eigen::Index k = r.values.size();
    // Sort ascending.
    std::vector<Eigen::Index> order(k);
    for (Eigen::Index i = 0; i < k; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return r.values(a) < r.values(b); });
    Eigen::VectorXd vals(k);
    Eigen::MatrixXd vecs(r.vectors.rows(), k);
    for (Eigen::Index i = 0; i < k; ++i) {
        vals(i) = r.values(order[i]);
        vecs.col(i) = r.vectors.col(order[i]);
    }
    // Re-orthonormalize numerically degenerate clusters in index order.
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i - 1; j >= 0; --j) {
            if (std::abs(vals(i) - vals(j)) >= 1e-8 * std::max(std::abs(vals(i)), 1e-12)) break;
            vecs.col(i) -= vecs.col(j) * (vecs.col(j).dot(mass.asDiagonal() * vecs.col(i)));
        }
        vecs.col(i) /= std::sqrt(vecs.col(i).dot(mass.asDiagonal() * vecs.col(i)));
        Eigen::Index arg;
        vecs.col(i).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, i) < 0) vecs.col(i) = -vecs.col(i);
    }
    double res = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::VectorXd rr = S * vecs.col(i) - vals(i) * mass.asDiagonal() * vecs.col(i);
        res = std::max(res, std::sqrt(rr.dot(mass.cwiseInverse().asDiagonal() * rr)) / std::max(1.0, std::abs(vals(i))));
    }
    r.values = vals;
    r.vectors = vecs;
    r.max_residual = res;
}

}  // namespace detail

// Smallest k eigenpairs of S v = λ diag(mass) v, S symmetric positive
// semidefinite. Shift-invert block Lanczos with full reorthogonalization.
inline EigenResult smallest_eigenpairs(const Eigen::SparseMatrix<double>& S, const Eigen::VectorXd& mass, std::size_t k,
                                       const EigenSolverOptions& opt = {}) {
    const Eigen::Index n = S.rows();
    if (S.cols() != n || mass.size() != n) throw invalid_parameter("stiffness and mass sizes disagree");
    if (k == 0 || static_cast<Eigen::Index>(k) > n)
        throw invalid_parameter("requested " + std::to_string(k) + " eigenpairs from a system of size " + std::to_string(n));
    if ((mass.array() <= 0.0).any()) throw invalid_parameter("mass must be positive");
    const Eigen::VectorXd isq = mass.cwiseSqrt().cwiseInverse();
    EigenResult out;

    if (n <= static_cast<Eigen::Index>(opt.dense_limit)) {
        Eigen::MatrixXd A = isq.asDiagonal() * Eigen::MatrixXd(S) * isq.asDiagonal();
        A = 0.5 * (A + A.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        if (es.info() != Eigen::Success) throw solver_error("dense eigensolver failed", INFINITY);
        out.values = es.eigenvalues().head(k);
        out.vectors = isq.asDiagonal() * es.eigenvectors().leftCols(k);
        detail::finalize_pairs(S, mass, out);
        return out;
    }

    const double sigma = -1e-4 * std::max(S.diagonal().sum() / mass.sum(), 1e-12);
    Eigen::SparseMatrix<double> K = S;
    for (Eigen::Index i = 0; i < n; ++i) K.coeffRef(i, i) -= sigma * mass(i);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw solver_error("factorization of the shifted stiffness failed", INFINITY);
    const Eigen::VectorXd sq = mass.cwiseSqrt();
    auto op = [&](const Eigen::MatrixXd& Y) -> Eigen::MatrixXd {
        Eigen::MatrixXd rhs = sq.asDiagonal() * Y;
        return sq.asDiagonal() * ldlt.solve(rhs);
    };

    const Eigen::Index b = static_cast<Eigen::Index>(std::max<std::size_t>(opt.block_size, 1));
    Eigen::Index dim = std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(k) + 2 * b, static_cast<Eigen::Index>(k) + 4 * b);
    dim = std::min(n, ((dim + b - 1) / b) * b);
    std::uint64_t seed = opt.seed;
    // Q holds one block more than W so the recurrence can always continue.
    Eigen::MatrixXd Q(n, dim + b), W(n, dim);
    Eigen::Index used = std::min(b, dim), filled = 0;
    detail::orthonormalize_block(Q, 0, detail::gaussian_block(n, used, seed++), seed);
    double worst = INFINITY;
    for (int round = 0; round < 12; ++round) {
        // Extend the block Krylov basis: W_j = Op(Q_j), Q_{j+1} = orth(W_j).
        while (filled < dim) {
            Eigen::Index width = std::min({b, dim - filled, used - filled});
            if (width <= 0) break;
            W.middleCols(filled, width) = op(Q.middleCols(filled, width));
            Eigen::Index next = std::min(width, n - used);
            if (next > 0) {
                detail::orthonormalize_block(Q, used, W.middleCols(filled, next), seed);
                used += next;
            }
            filled += width;
        }
        Eigen::MatrixXd H = Q.leftCols(filled).transpose() * W.leftCols(filled);
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (es.info() != Eigen::Success) throw solver_error("projected eigenproblem failed", INFINITY);
        // Largest θ are the smallest λ.
        Eigen::VectorXd theta = es.eigenvalues().reverse().head(k);
        Eigen::MatrixXd C = es.eigenvectors().rowwise().reverse().leftCols(k);
        Eigen::MatrixXd Y = Q.leftCols(filled) * C;
        Eigen::MatrixXd R = W.leftCols(filled) * C - Y * theta.asDiagonal();
        worst = 0.0;
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i)
            worst = std::max(worst, R.col(i).norm() / std::abs(theta(i)));
        if (worst <= opt.tolerance || filled == n) {
            out.values = (theta.cwiseInverse().array() + sigma).matrix();
            out.vectors = isq.asDiagonal() * Y;
            detail::finalize_pairs(S, mass, out);
            return out;
        }
        Eigen::Index grown = std::min(n, ((dim + dim / 4 + b - 1) / b) * b);
        Q.conservativeResize(Eigen::NoChange, grown + b);
        W.conservativeResize(Eigen::NoChange, grown);
        dim = grown;
    }
    throw solver_error("block Lanczos did not converge; worst relative residual " + std::to_string(worst), worst);
}

}  // namespace heatlens
