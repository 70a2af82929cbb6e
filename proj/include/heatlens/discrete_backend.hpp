#pragma once

#include "heatlens/discrete_space.hpp"
#include "heatlens/fields.hpp"

#include <Eigen/Dense>

#include <memory>

namespace heatlens {

// Calculus on a DiscreteSpace. Gradients of nodal functions are constant on
// cells (faces or path edges); there is no pointwise Hessian.
class DiscreteBackend {
public:
    using Mode = Eigen::VectorXd;  // nodal values
    static constexpr bool pointwise_calculus = false;

    explicit DiscreteBackend(std::shared_ptr<const DiscreteSpace> space)
        : space_(std::move(space)), weights_(std::make_shared<const Eigen::VectorXd>(space_->mass)) {
        const auto& s = *space_;
        const Eigen::Index cells = static_cast<Eigen::Index>(s.cell_count());
        const int per = s.kind == DiscreteKind::triangle_mesh ? 3 : 2;
        cell_nodes_.resize(cells, per);
        for (Eigen::Index c = 0; c < cells; ++c) {
            if (s.kind == DiscreteKind::triangle_mesh) cell_nodes_.row(c) = s.faces.row(c);
            else cell_nodes_.row(c) << static_cast<int>(c), static_cast<int>((c + 1) % s.node_count());
        }
        // Node share of each cell: cell weight split evenly among its nodes.
        share_ = Eigen::VectorXd::Zero(s.node_count());
        for (Eigen::Index c = 0; c < cells; ++c)
            for (int k = 0; k < per; ++k) share_(cell_nodes_(c, k)) += s.cell_weights(c) / per;
    }

    const DiscreteSpace& space() const { return *space_; }
    int dim() const { return space_->metadata.n; }
    int ambient() const { return space_->ambient; }
    std::size_t node_count() const { return space_->node_count(); }
    std::size_t cell_count() const { return space_->cell_count(); }
    const std::shared_ptr<const Eigen::VectorXd>& weights() const { return weights_; }
    const SpaceMetadata& metadata() const { return space_->metadata; }
    double total_measure() const { return weights_->sum(); }
    double integrate(const ScalarField& f) const {
        if (static_cast<std::size_t>(f.size()) != node_count()) throw shape_error("field does not match the node count");
        return weights_->dot(f);
    }

    ScalarField values(const Mode& mode) const { return mode; }
    double value_at(const Mode& mode, std::size_t node) const { return mode(static_cast<Eigen::Index>(node)); }

    // cell_count x ambient.
    Eigen::MatrixXd cell_gradient(const Mode& mode) const {
        Eigen::VectorXd g = space_->gradient * mode;
        return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            g.data(), static_cast<Eigen::Index>(cell_count()), ambient());
    }

    // Averages per-cell ambient tensors (cells x ambient^2, row-major) to
    // nodes and projects them to each node's orthonormal tangent frame.
    TensorField cells_to_nodes(const Eigen::MatrixXd& cell_tensors) const {
        const auto& s = *space_;
        const int a = ambient(), n = dim();
        Eigen::MatrixXd node_tensors = Eigen::MatrixXd::Zero(node_count(), a * a);
        for (Eigen::Index c = 0; c < cell_nodes_.rows(); ++c)
            for (int k = 0; k < cell_nodes_.cols(); ++k)
                node_tensors.row(cell_nodes_(c, k)) += (s.cell_weights(c) / cell_nodes_.cols()) * cell_tensors.row(c);
        TensorField out = make_tensor_field(n, weights_);
        for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(node_count()); ++v) {
            const Eigen::RowVectorXd row = node_tensors.row(v) / share_(v);
            const Eigen::Map<const Eigen::MatrixXd> T(row.data(), a, a);
            Eigen::MatrixXd F(a, n);
            if (s.kind == DiscreteKind::triangle_mesh) {
                F.col(0) = s.frames.row(v).head(3).transpose();
                F.col(1) = s.frames.row(v).tail(3).transpose();
            } else {
                F.setIdentity();
            }
            Eigen::MatrixXd P = F.transpose() * T * F;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) out.entries(v, sym_index(i, j, n)) = 0.5 * (P(i, j) + P(j, i));
        }
        return out;
    }

    TensorField canonical_metric() const { return identity_tensor(dim(), weights_); }

    // dm / dH^n at every node: 1 on meshes (mass is area), the sampled
    // weight on periodic paths.
    ScalarField density_field() const {
        const auto& s = *space_;
        ScalarField d = ScalarField::Ones(static_cast<Eigen::Index>(node_count()));
        if (s.kind == DiscreteKind::periodic_path)
            for (Eigen::Index j = 0; j < d.size(); ++j) d(j) = s.source_model->density(s.positions(j, 0));
        return d;
    }

private:
    std::shared_ptr<const DiscreteSpace> space_;
    std::shared_ptr<const Eigen::VectorXd> weights_;
    Eigen::MatrixXi cell_nodes_;
    Eigen::VectorXd share_;
};

}  // namespace heatlens
