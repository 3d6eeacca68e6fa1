// Small dense networks with hand-written backprop, an AdamW optimizer and a
// flat-binary checkpoint format shared by the RL and imitation learners.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pickbench/rng.hpp"

namespace pickbench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Linear {
  MatrixXd W;  // in x out
  VectorXd b;  // out
};

// Fully connected net, tanh activations between layers, linear output head.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& layer_sizes, uint64_t seed);

  int input_dim() const { return layers.empty() ? 0 : layers.front().W.rows(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().W.cols(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  // X: batch x in, returns batch x out.
  MatrixXd forward(const MatrixXd& X) const;

  struct Cache {
    std::vector<MatrixXd> acts;  // acts[l] = input to layer l
  };
  MatrixXd forward(const MatrixXd& X, Cache& cache) const;

  // Accumulates parameter gradients into `grads` (same topology) and
  // returns the gradient w.r.t. the input batch.
  MatrixXd backward(const Cache& cache, const MatrixXd& d_out, Mlp& grads) const;

  Mlp zeros_like() const;
  void set_zero();
  int num_params() const;
  VectorXd flatten() const;
  void unflatten(const VectorXd& v);

  std::vector<Linear> layers;

 private:
  std::vector<int> sizes_;
};

class AdamW {
 public:
  AdamW(int num_params, double learning_rate, double weight_decay,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(VectorXd& params, const VectorXd& grads);
  long long steps_taken() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long long t_ = 0;
  VectorXd m_, v_;
};

// Checkpoints: <dir>/manifest.json (shapes, offsets, arbitrary config) plus
// <dir>/params.bin (little-endian float64, column-major per tensor).
void save_checkpoint(const std::string& dir,
                     const std::map<std::string, MatrixXd>& tensors,
                     const nlohmann::json& config);
std::pair<std::map<std::string, MatrixXd>, nlohmann::json> load_checkpoint(
    const std::string& dir);

// Central finite differences of a scalar function at x, for gradient tests.
VectorXd finite_difference_gradient(const std::function<double(const VectorXd&)>& f,
                                    const VectorXd& x, double eps);
double max_relative_error(const VectorXd& analytic, const VectorXd& numeric);

}  // namespace pickbench
