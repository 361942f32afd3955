#include "carbonlace/net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace carbonlace::net {

using nlohmann::json;

void ClusterPartition::validate(int n_loads) const {
  if (static_cast<int>(assignment.size()) != n_loads)
    throw Error(Error::Kind::Config, "cluster assignment does not cover all loads");
  std::vector<int> seen(count, 0);
  for (int c : assignment) {
    if (c < 0 || c >= count) throw Error(Error::Kind::Config, "cluster index out of range");
    seen[c] = 1;
  }
  for (int k = 0; k < count; ++k)
    if (!seen[k]) throw Error(Error::Kind::Config, "cluster " + std::to_string(k) + " is empty");
}

int Network::parameter_count() const {
  int count = 0;
  for (int l = 0; l < depth(); ++l) {
    if (l == 0 && mask_first) count += static_cast<int>(mask_first->sum());
    else if (l == depth() - 1 && mask_last) count += static_cast<int>(mask_last->sum());
    else count += static_cast<int>(weights[l].size());
    count += static_cast<int>(biases[l].size());
  }
  return count;
}

void Network::apply_masks() {
  if (mask_first) weights.front() = weights.front().cwiseProduct(*mask_first);
  if (mask_last) weights.back() = weights.back().cwiseProduct(*mask_last);
}

void Network::validate() const {
  if (layer_sizes.size() < 2) throw Error(Error::Kind::Config, "network needs input and output layers");
  if (static_cast<int>(weights.size()) != depth() || static_cast<int>(biases.size()) != depth())
    throw Error(Error::Kind::Config, "layer count mismatch");
  for (int l = 0; l < depth(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l])
      throw Error(Error::Kind::Config, "weight shape mismatch at layer " + std::to_string(l));
    if (biases[l].size() != layer_sizes[l + 1])
      throw Error(Error::Kind::Config, "bias shape mismatch at layer " + std::to_string(l));
  }
  if (input_scale.size() != input_dim()) throw Error(Error::Kind::Config, "input scale dimension mismatch");
  if ((input_scale.array() <= 0).any()) throw Error(Error::Kind::Config, "input scale must be positive");
  if (output_scale <= 0) throw Error(Error::Kind::Config, "output scale must be positive");
  if (dropout_rate < 0 || dropout_rate >= 1) throw Error(Error::Kind::Config, "dropout rate out of range");
  if (mask_first && (mask_first->rows() != weights.front().rows() || mask_first->cols() != weights.front().cols()))
    throw Error(Error::Kind::Config, "first-layer mask shape mismatch");
  if (mask_last && (mask_last->rows() != weights.back().rows() || mask_last->cols() != weights.back().cols()))
    throw Error(Error::Kind::Config, "last-layer mask shape mismatch");
}

Network make_network(const std::vector<int>& layer_sizes, const Eigen::VectorXd& input_scale,
                     double output_scale, double dropout_rate, std::uint64_t seed) {
  Network net;
  net.layer_sizes = layer_sizes;
  net.input_scale = input_scale;
  net.output_scale = output_scale;
  net.dropout_rate = dropout_rate;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    int rows = layer_sizes[l + 1], cols = layer_sizes[l];
    double limit = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  net.validate();
  return net;
}

DropoutMasks sample_dropout(const Network& net, std::uint64_t seed) {
  DropoutMasks masks(net.depth() - 1);
  if (net.dropout_rate <= 0) return masks;
  Rng rng(seed);
  double keep = 1.0 - net.dropout_rate;
  // hidden layers 2..L-1 only; the first hidden layer is never dropped
  for (int l = 1; l <= net.depth() - 2; ++l) {
    Eigen::VectorXd m(net.layer_sizes[l + 1]);
    for (int i = 0; i < m.size(); ++i) m[i] = (rng.next_double() < keep) ? 1.0 / keep : 0.0;
    masks[l] = std::move(m);
  }
  return masks;
}

ForwardTrace forward_trace(const Network& net, const Eigen::VectorXd& d, const DropoutMasks* dropout) {
  if (d.size() != net.input_dim()) throw Error(Error::Kind::Config, "input dimension mismatch");
  const int L = net.depth();
  ForwardTrace tr;
  tr.z.resize(L + 1);
  tr.a.resize(L);
  tr.act_deriv.resize(L - 1);
  tr.z[0] = d.cwiseQuotient(net.input_scale);
  for (int l = 0; l < L - 1; ++l) {
    tr.a[l] = net.weights[l] * tr.z[l] + net.biases[l];
    Eigen::VectorXd h = tr.a[l].cwiseMax(0.0);
    Eigen::VectorXd deriv = (tr.a[l].array() > 0.0).cast<double>().matrix();
    if (dropout && l < static_cast<int>(dropout->size()) && (*dropout)[l].size() > 0) {
      h = h.cwiseProduct((*dropout)[l]);
      deriv = deriv.cwiseProduct((*dropout)[l]);
    }
    tr.z[l + 1] = std::move(h);
    tr.act_deriv[l] = std::move(deriv);
  }
  tr.a[L - 1] = net.weights[L - 1] * tr.z[L - 1] + net.biases[L - 1];
  tr.sigma = (1.0 / (1.0 + (-tr.a[L - 1].array()).exp())).matrix();
  tr.sigma_prime = (tr.sigma.array() * (1.0 - tr.sigma.array())).matrix();
  tr.z[L] = net.output_scale * tr.sigma;
  return tr;
}

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& d) {
  return forward_trace(net, d).z.back();
}

JacobianTrace jacobian_trace(const Network& net, const ForwardTrace& tr) {
  const int L = net.depth();
  const int D = net.input_dim();
  JacobianTrace jt;
  jt.r.resize(L);
  jt.r[0] = Eigen::MatrixXd(net.input_scale.cwiseInverse().asDiagonal());
  (void)D;
  for (int l = 1; l < L; ++l)
    jt.r[l] = tr.act_deriv[l - 1].asDiagonal() * (net.weights[l - 1] * jt.r[l - 1]);
  jt.u = net.weights[L - 1] * jt.r[L - 1];
  jt.j = net.output_scale * (tr.sigma_prime.asDiagonal() * jt.u);
  return jt;
}

Eigen::MatrixXd input_jacobian(const Network& net, const Eigen::VectorXd& d) {
  ForwardTrace tr = forward_trace(net, d);
  return jacobian_trace(net, tr).j;
}

Eigen::VectorXd project_balance(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& d, double E) {
  double nd2 = d.squaredNorm();
  if (nd2 <= 0) throw Error(Error::Kind::Config, "projection undefined for zero load vector");
  return lambda_hat - ((d.dot(lambda_hat) - E) / nd2) * d;
}

double balance_loss(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& d, double E) {
  double nd2 = d.squaredNorm();
  if (nd2 <= 0) throw Error(Error::Kind::Config, "balance loss undefined for zero load vector");
  double gap = d.dot(lambda_hat) - E;
  return gap * gap / nd2;
}

Eigen::VectorXd sensitivity_estimate(const Eigen::VectorXd& lambda_hat, const Eigen::MatrixXd& J,
                                     const Eigen::VectorXd& d) {
  if (J.rows() != d.size() || lambda_hat.size() != d.size())
    throw Error(Error::Kind::Config, "sensitivity estimate needs a nodal (square-Jacobian) model");
  return lambda_hat + J.transpose() * d;
}

double sensitivity_loss(const Eigen::VectorXd& mu_hat, const Eigen::VectorXd& mu) {
  if (mu_hat.size() != mu.size()) throw Error(Error::Kind::Config, "sensitivity loss dimension mismatch");
  return (mu_hat - mu).squaredNorm();
}

double regularizer_bd(const Eigen::MatrixXd& J, const ClusterPartition& partition) {
  if (J.rows() != J.cols()) throw Error(Error::Kind::Config, "block-diagonal regularizer needs a square Jacobian");
  partition.validate(static_cast<int>(J.rows()));
  double sum = 0.0;
  for (int i = 0; i < J.rows(); ++i)
    for (int j = 0; j < J.cols(); ++j)
      if (partition.assignment[i] != partition.assignment[j]) sum += std::abs(J(i, j));
  return sum;
}

double regularizer_dd(const Eigen::MatrixXd& J, double epsilon) {
  if (epsilon < 0) throw Error(Error::Kind::Config, "epsilon must be nonnegative");
  double sum = 0.0;
  for (int i = 0; i < J.rows(); ++i)
    for (int j = 0; j < J.cols(); ++j)
      if (i != j) sum += std::max(std::abs(J(i, j)) - epsilon, 0.0);
  return sum;
}

Prediction predict(const Network& net, const Eigen::VectorXd& d, double total_emissions) {
  ForwardTrace tr = forward_trace(net, d);
  JacobianTrace jt = jacobian_trace(net, tr);
  Prediction p;
  p.lambda_hat = tr.z.back();
  p.lambda_tilde = project_balance(p.lambda_hat, d, total_emissions);
  p.jacobian = jt.j;
  if (net.output_dim() == net.input_dim())
    p.mu_hat = sensitivity_estimate(p.lambda_hat, p.jacobian, d);
  return p;
}

void Gradients::setZero(const Network& net) {
  w.clear();
  b.clear();
  for (int l = 0; l < net.depth(); ++l) {
    w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
}

void Gradients::axpy(double alpha, const Gradients& other) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] += alpha * other.w[l];
    b[l] += alpha * other.b[l];
  }
}

namespace {

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Exact parameter gradients of F(lambda_hat, J) given dF/dlambda_hat and dF/dJ.
// J = c diag(sigma') W^L D_{L-1} W^{L-1} ... D_1 W^1 diag(1/s); ReLU masks are
// piecewise constant (zero contribution a.e.), the sigmoid factor is smooth and
// its curvature is backpropagated through a^L.
Gradients backprop_with_jacobian(const Network& net, const ForwardTrace& tr, const JacobianTrace& jt,
                                 const Eigen::VectorXd& g_lambda, const Eigen::MatrixXd& g_j,
                                 bool has_jacobian_term) {
  const int L = net.depth();
  const double c = net.output_scale;
  Gradients g;
  g.setZero(net);

  Eigen::VectorXd delta;  // dF/da at the current layer
  if (has_jacobian_term) {
    // direct occurrences of W^l inside the layer product
    Eigen::MatrixXd a_l = c * tr.sigma_prime.asDiagonal();  // dlambda/da^L
    for (int l = L - 1; l >= 0; --l) {
      g.w[l] += a_l.transpose() * g_j * jt.r[l].transpose();
      if (l > 0) a_l = a_l * net.weights[l] * tr.act_deriv[l - 1].asDiagonal();
    }
    // smooth dependence through sigma'(a^L)
    Eigen::VectorXd sigma_dd = (tr.sigma_prime.array() * (1.0 - 2.0 * tr.sigma.array())).matrix();
    Eigen::VectorXd row_dot = (g_j.array() * jt.u.array()).rowwise().sum().matrix();
    delta = c * sigma_dd.cwiseProduct(row_dot);
  } else {
    delta = Eigen::VectorXd::Zero(net.output_dim());
  }
  delta += c * tr.sigma_prime.cwiseProduct(g_lambda);

  for (int l = L - 1; l >= 0; --l) {
    g.w[l] += delta * tr.z[l].transpose();
    g.b[l] += delta;
    if (l > 0) delta = tr.act_deriv[l - 1].cwiseProduct(net.weights[l].transpose() * delta);
  }
  if (net.mask_first) g.w.front() = g.w.front().cwiseProduct(*net.mask_first);
  if (net.mask_last) g.w.back() = g.w.back().cwiseProduct(*net.mask_last);
  return g;
}

LossBreakdown nodal_breakdown(const Eigen::VectorXd& lambda_hat, const Eigen::MatrixXd& j,
                              const Scenario& s, double gamma1, double gamma2, double epsilon,
                              const ClusterPartition& partition) {
  LossBreakdown lb;
  lb.gamma1 = gamma1;
  lb.gamma2 = gamma2;
  lb.epsilon = epsilon;
  lb.balance = balance_loss(lambda_hat, s.d, s.total_emissions);
  Eigen::VectorXd mu_hat = sensitivity_estimate(lambda_hat, j, s.d);
  lb.sensitivity = sensitivity_loss(mu_hat, s.mu);
  lb.primary = lb.balance + lb.sensitivity;
  lb.block_diag = regularizer_bd(j, partition);
  lb.diag_dom = regularizer_dd(j, epsilon);
  lb.total = lb.primary + gamma1 * lb.block_diag + gamma2 * lb.diag_dom;
  return lb;
}

}  // namespace

LossBreakdown total_loss(const Network& net, const Scenario& s, double gamma1, double gamma2,
                         double epsilon, const ClusterPartition& partition) {
  ForwardTrace tr = forward_trace(net, s.d);
  JacobianTrace jt = jacobian_trace(net, tr);
  return nodal_breakdown(tr.z.back(), jt.j, s, gamma1, gamma2, epsilon, partition);
}

SampleGrad staged_loss_and_gradients(const Network& net, const Scenario& s, Stage stage,
                                     double gamma1, double gamma2, double epsilon,
                                     const ClusterPartition& partition, const DropoutMasks* dropout) {
  ForwardTrace tr = forward_trace(net, s.d, dropout);
  JacobianTrace jt = jacobian_trace(net, tr);
  const Eigen::VectorXd& lambda_hat = tr.z.back();
  const Eigen::MatrixXd& j = jt.j;

  SampleGrad out;
  out.loss = nodal_breakdown(lambda_hat, j, s, gamma1, gamma2, epsilon, partition);
  double total_load = s.d.sum();
  if (total_load <= 0) throw Error(Error::Kind::Config, "scenario has zero total load");
  double eta = s.total_emissions / total_load;
  Eigen::VectorXd anchor_resid = lambda_hat.array() - eta;
  out.anchor = anchor_resid.squaredNorm();

  Eigen::VectorXd mu_hat = sensitivity_estimate(lambda_hat, j, s.d);
  Eigen::VectorXd mu_resid = mu_hat - s.mu;
  double kappa = (s.d.dot(lambda_hat) - s.total_emissions) / s.d.squaredNorm();

  Eigen::VectorXd g_lambda;
  Eigen::MatrixXd g_j;
  bool with_j = stage != Stage::Anchor;
  switch (stage) {
    case Stage::Anchor:
      g_lambda = 2.0 * anchor_resid;
      out.stage_objective = out.anchor;
      break;
    case Stage::Primary:
      out.stage_objective = out.loss.primary;
      break;
    case Stage::BlockDiag:
      out.stage_objective = out.loss.primary + gamma1 * out.loss.block_diag;
      break;
    case Stage::Full:
      out.stage_objective = out.loss.total;
      break;
  }
  if (with_j) {
    g_lambda = 2.0 * kappa * s.d + 2.0 * mu_resid;
    g_j = s.d * (2.0 * mu_resid).transpose();
    if (stage == Stage::BlockDiag || stage == Stage::Full) {
      for (int r = 0; r < j.rows(); ++r)
        for (int cidx = 0; cidx < j.cols(); ++cidx)
          if (partition.assignment[r] != partition.assignment[cidx])
            g_j(r, cidx) += gamma1 * sgn(j(r, cidx));
    }
    if (stage == Stage::Full) {
      for (int r = 0; r < j.rows(); ++r)
        for (int cidx = 0; cidx < j.cols(); ++cidx)
          if (r != cidx && std::abs(j(r, cidx)) > epsilon) g_j(r, cidx) += gamma2 * sgn(j(r, cidx));
    }
  } else {
    g_j = Eigen::MatrixXd::Zero(j.rows(), j.cols());
  }
  out.grads = backprop_with_jacobian(net, tr, jt, g_lambda, g_j, with_j);
  return out;
}

Gradients parameter_gradients(const Network& net, const Scenario& s, double gamma1, double gamma2,
                              double epsilon, const ClusterPartition& partition) {
  return staged_loss_and_gradients(net, s, Stage::Full, gamma1, gamma2, epsilon, partition).grads;
}

// ---------------------------------------------------------------------------
// Zonal path
// ---------------------------------------------------------------------------

Eigen::VectorXd zmce_labels(const Eigen::VectorXd& d, const Eigen::VectorXd& mu, const ZoneMap& zones) {
  zones.validate(static_cast<int>(d.size()));
  Eigen::VectorXd zonal_load = Eigen::VectorXd::Zero(zones.K);
  for (int i = 0; i < d.size(); ++i) zonal_load[zones.assignment[i]] += d[i];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(zones.K);
  for (int i = 0; i < d.size(); ++i) {
    int k = zones.assignment[i];
    if (zonal_load[k] <= 0) throw Error(Error::Kind::Config, "zone " + std::to_string(k) + " has zero load");
    out[k] += (d[i] / zonal_load[k]) * mu[i];
  }
  return out;
}

namespace {

struct ZonalParts {
  Eigen::VectorXd zonal_load;  // K
  Eigen::VectorXd weight;      // D, d_i / zonal_load(zone(i))
};

ZonalParts zonal_parts(const Eigen::VectorXd& d, const ZoneMap& zones) {
  ZonalParts p;
  p.zonal_load = Eigen::VectorXd::Zero(zones.K);
  for (int i = 0; i < d.size(); ++i) p.zonal_load[zones.assignment[i]] += d[i];
  for (int k = 0; k < zones.K; ++k)
    if (p.zonal_load[k] <= 0) throw Error(Error::Kind::Config, "zone " + std::to_string(k) + " has zero load");
  p.weight.resize(d.size());
  for (int i = 0; i < d.size(); ++i) p.weight[i] = d[i] / p.zonal_load[zones.assignment[i]];
  return p;
}

}  // namespace

ZonalEval zonal_forward_and_losses(const Network& net, const Eigen::VectorXd& d, const ZoneMap& zones,
                                   double total_emissions, const Eigen::VectorXd& mu_nodal,
                                   double gamma3) {
  if (net.output_dim() != zones.K) throw Error(Error::Kind::Config, "zonal model output dim must equal K");
  ZonalParts parts = zonal_parts(d, zones);
  ForwardTrace tr = forward_trace(net, d);
  JacobianTrace jt = jacobian_trace(net, tr);

  ZonalEval ev;
  ev.zonal_load = parts.zonal_load;
  ev.lambda_hat = tr.z.back();
  ev.lambda_tilde = project_balance(ev.lambda_hat, parts.zonal_load, total_emissions);
  ev.jacobian = jt.j;
  ev.mu_label = zmce_labels(d, mu_nodal, zones);

  Eigen::VectorXd q = jt.j.transpose() * parts.zonal_load;  // D
  ev.mu_hat = ev.lambda_hat;
  for (int i = 0; i < d.size(); ++i) ev.mu_hat[zones.assignment[i]] += parts.weight[i] * q[i];

  LossBreakdown lb;
  lb.gamma1 = gamma3;
  lb.epsilon = 0.0;
  lb.balance = balance_loss(ev.lambda_hat, parts.zonal_load, total_emissions);
  lb.sensitivity = (ev.mu_hat - ev.mu_label).squaredNorm();
  lb.primary = lb.balance + lb.sensitivity;
  double reg = 0.0;
  for (int k = 0; k < zones.K; ++k)
    for (int i = 0; i < d.size(); ++i)
      if (zones.assignment[i] != k) reg += std::abs(jt.j(k, i));
  lb.block_diag = reg;
  lb.total = lb.primary + gamma3 * reg;
  ev.loss = lb;
  return ev;
}

SampleGrad zonal_staged_loss_and_gradients(const Network& net, const Scenario& s, const ZoneMap& zones,
                                           Stage stage, double gamma3, const DropoutMasks* dropout) {
  if (net.output_dim() != zones.K) throw Error(Error::Kind::Config, "zonal model output dim must equal K");
  ZonalParts parts = zonal_parts(s.d, zones);
  ForwardTrace tr = forward_trace(net, s.d, dropout);
  JacobianTrace jt = jacobian_trace(net, tr);
  const Eigen::VectorXd& lambda_hat = tr.z.back();
  const Eigen::MatrixXd& j = jt.j;

  Eigen::VectorXd mu_label = zmce_labels(s.d, s.mu, zones);
  Eigen::VectorXd q = j.transpose() * parts.zonal_load;
  Eigen::VectorXd mu_hat = lambda_hat;
  for (int i = 0; i < s.d.size(); ++i) mu_hat[zones.assignment[i]] += parts.weight[i] * q[i];
  Eigen::VectorXd mu_resid = mu_hat - mu_label;

  SampleGrad out;
  LossBreakdown& lb = out.loss;
  lb.gamma1 = gamma3;
  lb.balance = balance_loss(lambda_hat, parts.zonal_load, s.total_emissions);
  lb.sensitivity = mu_resid.squaredNorm();
  lb.primary = lb.balance + lb.sensitivity;
  double reg = 0.0;
  for (int k = 0; k < zones.K; ++k)
    for (int i = 0; i < s.d.size(); ++i)
      if (zones.assignment[i] != k) reg += std::abs(j(k, i));
  lb.block_diag = reg;
  lb.total = lb.primary + gamma3 * reg;

  double total_load = s.d.sum();
  double eta = s.total_emissions / total_load;
  Eigen::VectorXd anchor_resid = lambda_hat.array() - eta;
  out.anchor = anchor_resid.squaredNorm();

  double kappa = (parts.zonal_load.dot(lambda_hat) - s.total_emissions) / parts.zonal_load.squaredNorm();

  Eigen::VectorXd g_lambda;
  Eigen::MatrixXd g_j = Eigen::MatrixXd::Zero(j.rows(), j.cols());
  bool with_j = stage != Stage::Anchor;
  if (stage == Stage::Anchor) {
    g_lambda = 2.0 * anchor_resid;
    out.stage_objective = out.anchor;
  } else {
    g_lambda = 2.0 * kappa * parts.zonal_load + 2.0 * mu_resid;
    Eigen::VectorXd t(s.d.size());
    for (int i = 0; i < s.d.size(); ++i) t[i] = 2.0 * mu_resid[zones.assignment[i]] * parts.weight[i];
    g_j = parts.zonal_load * t.transpose();
    bool with_reg = stage == Stage::BlockDiag || stage == Stage::Full;
    if (with_reg) {
      for (int k = 0; k < zones.K; ++k)
        for (int i = 0; i < s.d.size(); ++i)
          if (zones.assignment[i] != k) g_j(k, i) += gamma3 * sgn(j(k, i));
      out.stage_objective = lb.total;
    } else {
      out.stage_objective = lb.primary;
    }
  }
  out.grads = backprop_with_jacobian(net, tr, jt, g_lambda, g_j, with_j);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  int rows = static_cast<int>(j.size());
  int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string checkpoint_to_json(const Network& net, const std::string& metadata_json) {
  json j;
  j["format"] = "carbonlace-model";
  j["version"] = 1;
  j["layer_sizes"] = net.layer_sizes;
  j["output_scale"] = net.output_scale;
  j["dropout_rate"] = net.dropout_rate;
  j["input_scale"] = vector_to_json(net.input_scale);
  j["weights"] = json::array();
  j["biases"] = json::array();
  for (int l = 0; l < net.depth(); ++l) {
    j["weights"].push_back(matrix_to_json(net.weights[l]));
    j["biases"].push_back(vector_to_json(net.biases[l]));
  }
  if (net.mask_first) j["mask_first"] = matrix_to_json(*net.mask_first);
  if (net.mask_last) j["mask_last"] = matrix_to_json(*net.mask_last);
  j["metadata"] = json::parse(metadata_json);
  return j.dump(1) + "\n";
}

Network checkpoint_from_json(const std::string& text, std::string* metadata_json) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Parse, std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", std::string()) != "carbonlace-model")
    throw Error(Error::Kind::Parse, "not a carbonlace model checkpoint");
  Network net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  net.output_scale = j.at("output_scale").get<double>();
  net.dropout_rate = j.at("dropout_rate").get<double>();
  net.input_scale = vector_from_json(j.at("input_scale"));
  for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(vector_from_json(b));
  if (j.contains("mask_first")) net.mask_first = matrix_from_json(j["mask_first"]);
  if (j.contains("mask_last")) net.mask_last = matrix_from_json(j["mask_last"]);
  if (metadata_json) *metadata_json = j.value("metadata", json::object()).dump();
  net.validate();
  return net;
}

void save_checkpoint(const Network& net, const std::string& path, const std::string& metadata_json) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Error::Kind::Io, "cannot write checkpoint: " + path);
    out << checkpoint_to_json(net, metadata_json);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error(Error::Kind::Io, "cannot move checkpoint into place: " + path);
}

Network load_checkpoint(const std::string& path, std::string* metadata_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Error::Kind::Io, "cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str(), metadata_json);
}

}  // namespace carbonlace::net
