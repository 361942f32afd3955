#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "carbonlace/case.hpp"

namespace carbonlace::net {

// Partition of the load buses used for layer masks and J regularization.
struct ClusterPartition {
  int count = 0;
  std::vector<int> assignment;  // load index -> cluster
  bool operator==(const ClusterPartition&) const = default;
  void validate(int n_loads) const;
};

// Feedforward ReLU network with a scaled-sigmoid output layer and optional
// block masks on the first and last weight matrices. Input is normalized
// per-entry by input_scale.
struct Network {
  std::vector<int> layer_sizes;           // [D, hidden..., out]
  std::vector<Eigen::MatrixXd> weights;   // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::optional<Eigen::MatrixXd> mask_first;
  std::optional<Eigen::MatrixXd> mask_last;
  Eigen::VectorXd input_scale;            // D entries, > 0
  double output_scale = 1.0;              // tCO2e/MWh
  double dropout_rate = 0.0;

  int depth() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int parameter_count() const;  // unmasked trainable entries
  void apply_masks();
  void validate() const;
};

Network make_network(const std::vector<int>& layer_sizes, const Eigen::VectorXd& input_scale,
                     double output_scale, double dropout_rate, std::uint64_t seed);

// hidden dropout masks for one sample; entry l covers hidden layer l+1
// (0-based; only layers 2..L-1 may carry non-trivial masks)
using DropoutMasks = std::vector<Eigen::VectorXd>;
DropoutMasks sample_dropout(const Network& net, std::uint64_t seed);

struct ForwardTrace {
  std::vector<Eigen::VectorXd> z;          // z[0] = scaled input, z[L] = lambda_hat
  std::vector<Eigen::VectorXd> a;          // a[l] = pre-activation of layer l+1
  std::vector<Eigen::VectorXd> act_deriv;  // hidden ReLU' (with dropout factor)
  Eigen::VectorXd sigma;                   // sigmoid(a[L-1])
  Eigen::VectorXd sigma_prime;
};

ForwardTrace forward_trace(const Network& net, const Eigen::VectorXd& d,
                           const DropoutMasks* dropout = nullptr);
Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& d);

struct JacobianTrace {
  std::vector<Eigen::MatrixXd> r;  // r[l] = dz^l/dd, l = 0..L-1
  Eigen::MatrixXd u;               // W^L r[L-1]
  Eigen::MatrixXd j;               // out x D
};

JacobianTrace jacobian_trace(const Network& net, const ForwardTrace& tr);
Eigen::MatrixXd input_jacobian(const Network& net, const Eigen::VectorXd& d);

// projection of lambda_hat onto the balance hyperplane d'lambda = E
Eigen::VectorXd project_balance(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& d, double E);
double balance_loss(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& d, double E);
Eigen::VectorXd sensitivity_estimate(const Eigen::VectorXd& lambda_hat, const Eigen::MatrixXd& J,
                                     const Eigen::VectorXd& d);
double sensitivity_loss(const Eigen::VectorXd& mu_hat, const Eigen::VectorXd& mu);
double regularizer_bd(const Eigen::MatrixXd& J, const ClusterPartition& partition);
double regularizer_dd(const Eigen::MatrixXd& J, double epsilon);

struct LossBreakdown {
  double balance = 0.0;     // L_lambda
  double sensitivity = 0.0; // L_mu
  double primary = 0.0;     // L = L_lambda + L_mu
  double block_diag = 0.0;  // L_bd (zonal: |J - M (.) J|_1)
  double diag_dom = 0.0;    // L_d
  double total = 0.0;       // L + g1 L_bd + g2 L_d
  double gamma1 = 0.0, gamma2 = 0.0, epsilon = 0.0;
};

struct Prediction {
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd lambda_tilde;
  Eigen::VectorXd mu_hat;
  Eigen::MatrixXd jacobian;
};

struct Scenario {
  Eigen::VectorXd d;
  double total_emissions = 0.0;
  Eigen::VectorXd mu;
};

Prediction predict(const Network& net, const Eigen::VectorXd& d, double total_emissions);

LossBreakdown total_loss(const Network& net, const Scenario& s, double gamma1, double gamma2,
                         double epsilon, const ClusterPartition& partition);

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  void setZero(const Network& net);
  void axpy(double alpha, const Gradients& other);
};

// Training stages: Anchor fits the ACE broadcast; later stages add loss terms.
enum class Stage { Anchor, Primary, BlockDiag, Full };

struct SampleGrad {
  LossBreakdown loss;
  double stage_objective = 0.0;
  double anchor = 0.0;  // sum_i (lambda_hat_i - eta)^2
  Gradients grads;
};

// Exact gradients of the staged objective w.r.t. all unmasked parameters,
// including the terms through the input Jacobian (the layer-product is
// differentiated in closed form; ReLU masks contribute zero a.e., the output
// sigmoid curvature is backpropagated).
SampleGrad staged_loss_and_gradients(const Network& net, const Scenario& s, Stage stage,
                                     double gamma1, double gamma2, double epsilon,
                                     const ClusterPartition& partition,
                                     const DropoutMasks* dropout = nullptr);

// convenience wrapper: gradients of the full (stage-4) objective
Gradients parameter_gradients(const Network& net, const Scenario& s, double gamma1, double gamma2,
                              double epsilon, const ClusterPartition& partition);

// ---------------------------------------------------------------------------
// Zonal model (output dimension K)
// ---------------------------------------------------------------------------

struct ZonalEval {
  Eigen::VectorXd zonal_load;      // M d
  Eigen::VectorXd lambda_hat;      // K
  Eigen::VectorXd lambda_tilde;    // K
  Eigen::VectorXd mu_hat;          // K, load-weighted aggregation
  Eigen::VectorXd mu_label;        // K, ZMCE from nodal mu
  Eigen::MatrixXd jacobian;        // K x D
  LossBreakdown loss;              // gamma1 slot carries gamma3
};

Eigen::VectorXd zmce_labels(const Eigen::VectorXd& d, const Eigen::VectorXd& mu, const ZoneMap& zones);

ZonalEval zonal_forward_and_losses(const Network& net, const Eigen::VectorXd& d, const ZoneMap& zones,
                                   double total_emissions, const Eigen::VectorXd& mu_nodal,
                                   double gamma3);

SampleGrad zonal_staged_loss_and_gradients(const Network& net, const Scenario& s, const ZoneMap& zones,
                                           Stage stage, double gamma3,
                                           const DropoutMasks* dropout = nullptr);

// checkpoint round-trip (bit-exact weights)
std::string checkpoint_to_json(const Network& net, const std::string& metadata_json = "{}");
Network checkpoint_from_json(const std::string& text, std::string* metadata_json = nullptr);
void save_checkpoint(const Network& net, const std::string& path, const std::string& metadata_json = "{}");
Network load_checkpoint(const std::string& path, std::string* metadata_json = nullptr);

}  // namespace carbonlace::net
