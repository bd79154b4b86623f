#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "shapeservo/errors.hpp"

namespace shapeservo {

// One radial-basis-function network approximating one row of the combined
// Jacobian: row(q) = (weights * activation(q))^T.
struct RbfNetwork {
    Eigen::MatrixXd weights;  // n x k
    Eigen::MatrixXd centers;  // n x k, column j is the j-th neuron center
    Eigen::VectorXd widths;   // k, strictly positive
};

struct BankDims {
    int m = 0;  // feature dimension / network count
    int n = 0;  // actuator count
    int k = 0;  // neurons per network

    int weight_count() const { return m * n * k; }
};

struct RbfBank {
    std::vector<RbfNetwork> nets;
    BankDims dims;
};

// Component j = exp(-|q - mu_j|^2 / sigma_j^2), all in (0, 1].
Eigen::VectorXd rbf_activation(const RbfNetwork& net, const Eigen::VectorXd& q);

// m x n estimate with row i = (W_i theta_i(q))^T.
Eigen::MatrixXd estimate_jacobian(const RbfBank& bank, const Eigen::VectorXd& q);

// Regressor M (m x kmn) with M * vectorize_weights(bank) = J_hat(q) * qdot.
// Built from the Kronecker structure; the kmn x kmn block-diagonal form is
// never materialized.
Eigen::MatrixXd build_parameterization(const RbfBank& bank, const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& qdot);

// Column-major grouping [W_11^T ... W_1k^T W_21^T ... W_mk^T]^T, where W_ij
// is the j-th column of net i. Round-trips losslessly.
Eigen::VectorXd vectorize_weights(const RbfBank& bank);
void set_weights_from_vector(RbfBank& bank, const Eigen::VectorXd& w);

// Fresh bank: shared basis centers covering [q_min, q_max] (tensor grid when
// k is a perfect power of n, center-plus-axis-extremes star when k = 2n + 1,
// scrambled Weyl lattice otherwise), independently permuted per network so
// the estimated Jacobian rows start linearly independent. Weights are
// zero-mean with std sqrt(2/k) * weight_scale.
RbfBank init_bank(const BankDims& dims, const Eigen::VectorXd& q_min,
                  const Eigen::VectorXd& q_max, std::uint64_t seed,
                  double weight_scale = 0.1);

// JSON persistence for warm starts; `oracle` marks least-squares oracle
// weights rather than online-learned ones.
std::string bank_to_json(const RbfBank& bank, bool oracle = false);
RbfBank bank_from_json(const std::string& text, bool* oracle = nullptr);
void save_bank(const RbfBank& bank, const std::string& path, bool oracle = false);
RbfBank load_bank(const std::string& path, bool* oracle = nullptr);

}  // namespace shapeservo
