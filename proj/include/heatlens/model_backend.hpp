#pragma once

#include "heatlens/fields.hpp"
#include "heatlens/spaces.hpp"
#include "heatlens/trig.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

namespace heatlens {

// Spectral calculus on a uniform periodic grid of a model space. Modes are
// trigonometric sums evaluated exactly at nodes through phase lookup tables:
// on the grid, w_j x_j = 2 pi i_j / M independently of L_j.
class ModelBackend {
public:
    using Mode = TrigMode;
    static constexpr bool pointwise_calculus = true;

    ModelBackend(ModelSpace space, std::size_t points_per_axis)
        : space_(std::move(space)), grid_(make_grid(space_, points_per_axis)),
          weights_(std::make_shared<const Eigen::VectorXd>(grid_.weights)) {
        const std::size_t M = grid_.points_per_axis;
        cos_table_.resize(M);
        sin_table_.resize(M);
        for (std::size_t m = 0; m < M; ++m) {
            double a = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);
            cos_table_[m] = std::cos(a);
            sin_table_[m] = std::sin(a);
        }
        index_.resize(grid_.node_count() * dim());
        for (std::size_t i = 0; i < grid_.node_count(); ++i)
            for (int j = 0; j < dim(); ++j) index_[i * dim() + j] = static_cast<long>(grid_.axis_index(i, j));
        for (int j = 0; j < dim(); ++j) omega_.push_back(2.0 * std::numbers::pi / space_.lengths()[j]);
        if (space_.weighted()) {
            grad_log_density_ = CovectorField(grid_.node_count(), 1);
            for (std::size_t i = 0; i < grid_.node_count(); ++i)
                grad_log_density_(i, 0) = space_.log_density_derivative(grid_.nodes(i, 0), 1);
        } else {
            grad_log_density_ = CovectorField::Zero(grid_.node_count(), dim());
        }
    }

    const ModelSpace& space() const { return space_; }
    const QuadratureGrid& grid() const { return grid_; }
    int dim() const { return space_.dimension(); }
    std::size_t node_count() const { return grid_.node_count(); }
    const std::shared_ptr<const Eigen::VectorXd>& weights() const { return weights_; }
    const SpaceMetadata& metadata() const { return space_.metadata(); }
    double total_measure() const { return weights_->sum(); }
    double integrate(const ScalarField& f) const {
        check(f);
        return weights_->dot(f);
    }

    ScalarField values(const Mode& mode) const {
        ScalarField out = ScalarField::Zero(node_count());
        for (const auto& term : mode.terms)
            for (std::size_t i = 0; i < node_count(); ++i) {
                std::size_t m = phase(term, i);
                out(i) += term.cos_coeff * cos_table_[m] + term.sin_coeff * sin_table_[m];
            }
        return out;
    }

    CovectorField gradient(const Mode& mode) const {
        CovectorField out = CovectorField::Zero(node_count(), dim());
        for (const auto& term : mode.terms) {
            for (std::size_t i = 0; i < node_count(); ++i) {
                std::size_t m = phase(term, i);
                double d = -term.cos_coeff * sin_table_[m] + term.sin_coeff * cos_table_[m];
                for (int j = 0; j < dim(); ++j) out(i, j) += omega_[j] * term.frequency[j] * d;
            }
        }
        return out;
    }

    // node_count x sym_size(n), upper-triangular storage.
    Eigen::MatrixXd hessian(const Mode& mode) const {
        const int n = dim();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(node_count(), sym_size(n));
        for (const auto& term : mode.terms) {
            for (std::size_t i = 0; i < node_count(); ++i) {
                std::size_t m = phase(term, i);
                double v = term.cos_coeff * cos_table_[m] + term.sin_coeff * sin_table_[m];
                for (int a = 0; a < n; ++a)
                    for (int b = a; b < n; ++b)
                        out(i, sym_index(a, b, n)) -= omega_[a] * omega_[b] * term.frequency[a] * term.frequency[b] * v;
            }
        }
        return out;
    }

    double value_at(const Mode& mode, std::size_t node) const {
        double v = 0.0;
        for (const auto& term : mode.terms) {
            std::size_t m = phase(term, node);
            v += term.cos_coeff * cos_table_[m] + term.sin_coeff * sin_table_[m];
        }
        return v;
    }

    // Evaluation at an arbitrary point (coordinates, one per axis).
    double value_at(const Mode& mode, const double* x) const {
        double v = 0.0;
        for (const auto& term : mode.terms) {
            double a = 0.0;
            for (int j = 0; j < dim(); ++j) a += omega_[j] * term.frequency[j] * x[j];
            v += term.cos_coeff * std::cos(a) + term.sin_coeff * std::sin(a);
        }
        return v;
    }

    // Spectral derivative of a sampled field along one axis. The Nyquist
    // coefficient is dropped.
    ScalarField differentiate(const ScalarField& f, int axis) const {
        check(f);
        const std::size_t M = grid_.points_per_axis;
        std::size_t stride = 1;
        for (int j = dim() - 1; j > axis; --j) stride *= M;
        ScalarField out(f.size());
        Eigen::FFT<double> fft;
        std::vector<std::complex<double>> line(M), spec(M);
        for (std::size_t start = 0; start < node_count(); ++start) {
            if (grid_.axis_index(start, axis) != 0) continue;
            for (std::size_t i = 0; i < M; ++i) line[i] = f(start + i * stride);
            fft.fwd(spec, line);
            for (std::size_t q = 0; q < M; ++q) {
                long k = q < (M + 1) / 2 ? static_cast<long>(q) : static_cast<long>(q) - static_cast<long>(M);
                if (M % 2 == 0 && q == M / 2) k = 0;
                spec[q] *= std::complex<double>(0.0, omega_[axis] * static_cast<double>(k));
            }
            fft.inv(line, spec);
            for (std::size_t i = 0; i < M; ++i) out(start + i * stride) = line[i].real();
        }
        return out;
    }

    CovectorField gradient_of(const ScalarField& f) const {
        CovectorField g(node_count(), dim());
        for (int j = 0; j < dim(); ++j) g.col(j) = differentiate(f, j);
        return g;
    }

    // Divergence with respect to the reference measure: the negative adjoint
    // of the gradient in L^2(m).
    ScalarField divergence(const CovectorField& v) const {
        ScalarField d = ScalarField::Zero(node_count());
        for (int j = 0; j < dim(); ++j) d += differentiate(v.col(j), j);
        return d - (v.cwiseProduct(grad_log_density_)).rowwise().sum();
    }

    // Generator of the Dirichlet form applied to a sampled field.
    ScalarField laplacian_of(const ScalarField& f) const { return divergence(gradient_of(f)); }

    const CovectorField& log_density_gradient() const { return grad_log_density_; }

    // dm / dH^n at every node.
    ScalarField density_field() const {
        ScalarField d(node_count());
        for (std::size_t i = 0; i < node_count(); ++i) {
            Eigen::RowVectorXd x = grid_.nodes.row(static_cast<Eigen::Index>(i));
            d(static_cast<Eigen::Index>(i)) = space_.density(x.data());
        }
        return d;
    }

    // Constant covector field e_axis.
    CovectorField frame_covector(int axis) const {
        CovectorField e = CovectorField::Zero(node_count(), dim());
        e.col(axis).setOnes();
        return e;
    }

    TensorField canonical_metric() const { return identity_tensor(dim(), weights_); }

    void check(const ScalarField& f) const {
        if (static_cast<std::size_t>(f.size()) != node_count()) throw shape_error("field does not match the grid");
    }

private:
    std::size_t phase(const TrigTerm& term, std::size_t node) const {
        const long M = static_cast<long>(grid_.points_per_axis);
        long s = 0;
        const long* idx = &index_[node * dim()];
        for (int j = 0; j < dim(); ++j) s += term.frequency[j] * idx[j];
        s %= M;
        if (s < 0) s += M;
        return static_cast<std::size_t>(s);
    }

    ModelSpace space_;
    QuadratureGrid grid_;
    std::shared_ptr<const Eigen::VectorXd> weights_;
    std::vector<double> cos_table_, sin_table_, omega_;
    std::vector<long> index_;
    CovectorField grad_log_density_;
};

}  // namespace heatlens
