#pragma once

#include "polykin/gas_model.hpp"
#include "polykin/quadrature.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace polykin {

/// Orthonormal probabilists' Hermite values psi_0..psi_n at x (unit Gaussian measure).
void hermite_values(int n, double x, double* out);

/// Orthonormal generalized Laguerre values ell_0..ell_n at x for the measure
/// x^a e^{-x} / Gamma(a+1).
void laguerre_values(int n, double a, double x, double* out);

/**
 * Tensor Gauss-Hermite (per velocity axis) x generalized Gauss-Laguerre (in I)
 * node set. Node index n = ((a*n_v + b)*n_v + c)*n_i + j.
 */
struct PhaseGrid {
    ModelParams params;
    int n_v = 0;
    int n_i = 0;
    Rule v_rule;
    Rule i_rule;

    std::size_t size() const { return std::size_t(n_v) * n_v * n_v * n_i; }
    Eigen::Vector3d velocity(std::size_t n) const;
    double energy(std::size_t n) const { return i_rule.nodes[n % n_i]; }
    PhasePoint point(std::size_t n) const { return {velocity(n), energy(n)}; }
    /// Weight such that sum_n quad_weight(n) g(x_n) approximates the dv dI integral of g.
    double quad_weight(std::size_t n) const;
    /// Largest node speed.
    double velocity_radius() const;
};

PhaseGrid make_phase_grid(const ModelParams& params, int n_v, int n_i);

/// Sampled distribution (or perturbation) over optional torus cells x phase nodes.
struct DistributionGrid {
    PhaseGrid phase;
    int n_x = 0; ///< 0 for a spatially homogeneous grid, else lattice size per axis
    std::vector<double> values;
    double time = 0.0;

    std::size_t cells() const { return n_x == 0 ? 1 : std::size_t(n_x) * n_x * n_x; }
    /// Volume of one cell of the torus [0, 2 pi)^3 (1 for homogeneous grids).
    double cell_volume() const;
    /// Position of the lower corner node of cell c.
    Eigen::Vector3d cell_position(std::size_t c) const;
    double* cell(std::size_t c) { return values.data() + c * phase.size(); }
    const double* cell(std::size_t c) const { return values.data() + c * phase.size(); }
};

DistributionGrid make_homogeneous(const PhaseGrid& phase, const std::function<double(const PhasePoint&)>& F);
DistributionGrid make_lattice(const PhaseGrid& phase, int n_x,
                              const std::function<double(const Eigen::Vector3d&, const PhasePoint&)>& F);

/// (int (F-M), int v (F-M), int (|v|^2+2I)(F-M)) over x, v, I.
DefectMoments defect_moments(const DistributionGrid& F, const ModelParams& params);

/**
 * Full tensor polynomial space attached to a phase grid.
 *
 * A distribution is represented as F = M * phi with phi = sum_k c_k p_k, where
 * p_k are products of orthonormal Hermite and Laguerre polynomials. Because
 * the grid is a Gauss tensor rule, nodal values and coefficients are in
 * one-to-one correspondence.
 */
class TensorModal {
public:
    explicit TensorModal(const PhaseGrid& grid);

    std::size_t size() const { return nb_; }
    const PhaseGrid& grid() const { return grid_; }

    /// Coefficients of phi = F/M from nodal values of F.
    Eigen::VectorXd to_modal(const double* F) const;
    /// Nodal values of F = M phi.
    void to_nodal(const Eigen::VectorXd& c, double* F) const;
    /// phi(v, I) for coefficient vector c.
    double phi(const Eigen::VectorXd& c, const Eigen::Vector3d& v, double i) const;
    /// All basis polynomial values p_k(v, I).
    void basis_values(const Eigen::Vector3d& v, double i, double* out) const;
    /// Value of M at each node.
    const std::vector<double>& node_maxwellian() const { return m_nodes_; }

private:
    PhaseGrid grid_;
    std::size_t nb_;
    Eigen::MatrixXd nodal_;      ///< nodal_(n, k) = p_k(x_n)
    std::vector<double> m_nodes_;
    std::vector<double> qm_;     ///< quad_weight * M at nodes
};

/// Phase function evaluating F = M phi from modal coefficients (continuous up to I = 0).
PhaseFunction modal_function(const TensorModal& modal, const Eigen::VectorXd& c);

} // namespace polykin
