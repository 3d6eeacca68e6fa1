#include "pickbench/net.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "pickbench/util.hpp"

namespace pickbench {

Mlp::Mlp(const std::vector<int>& layer_sizes, uint64_t seed) : sizes_(layer_sizes) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("mlp needs at least input and output sizes");
  }
  Rng rng(mix64(seed));
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    Linear layer;
    layer.W.resize(in, out);
    const double s = std::sqrt(6.0 / (in + out));  // Xavier uniform
    for (int j = 0; j < out; ++j) {
      for (int i = 0; i < in; ++i) layer.W(i, j) = rng.uniform(-s, s);
    }
    layer.b = VectorXd::Zero(out);
    layers.push_back(std::move(layer));
  }
}

MatrixXd Mlp::forward(const MatrixXd& X) const {
  MatrixXd a = X;
  for (size_t l = 0; l < layers.size(); ++l) {
    a = (a * layers[l].W).rowwise() + layers[l].b.transpose();
    if (l + 1 < layers.size()) a = a.array().tanh();
  }
  return a;
}

MatrixXd Mlp::forward(const MatrixXd& X, Cache& cache) const {
  cache.acts.clear();
  cache.acts.reserve(layers.size());
  MatrixXd a = X;
  for (size_t l = 0; l < layers.size(); ++l) {
    cache.acts.push_back(a);
    a = (a * layers[l].W).rowwise() + layers[l].b.transpose();
    if (l + 1 < layers.size()) a = a.array().tanh();
  }
  return a;
}

MatrixXd Mlp::backward(const Cache& cache, const MatrixXd& d_out, Mlp& grads) const {
  if (cache.acts.size() != layers.size()) {
    throw std::logic_error("backward called without a matching forward cache");
  }
  if (grads.layers.size() != layers.size()) {
    throw std::invalid_argument("gradient net topology mismatch");
  }
  MatrixXd d = d_out;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    grads.layers[l].W += cache.acts[l].transpose() * d;
    grads.layers[l].b += d.colwise().sum().transpose();
    d = d * layers[l].W.transpose();
    if (l > 0) {
      // acts[l] is the post-tanh output of layer l-1
      d = d.cwiseProduct((1.0 - cache.acts[l].array().square()).matrix());
    }
  }
  return d;
}

Mlp Mlp::zeros_like() const {
  Mlp z = *this;
  z.set_zero();
  return z;
}

void Mlp::set_zero() {
  for (auto& l : layers) {
    l.W.setZero();
    l.b.setZero();
  }
}

int Mlp::num_params() const {
  int n = 0;
  for (const auto& l : layers) n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

VectorXd Mlp::flatten() const {
  VectorXd v(num_params());
  int k = 0;
  for (const auto& l : layers) {
    std::memcpy(v.data() + k, l.W.data(), l.W.size() * sizeof(double));
    k += static_cast<int>(l.W.size());
    std::memcpy(v.data() + k, l.b.data(), l.b.size() * sizeof(double));
    k += static_cast<int>(l.b.size());
  }
  return v;
}

void Mlp::unflatten(const VectorXd& v) {
  if (v.size() != num_params()) throw std::invalid_argument("flat size mismatch");
  int k = 0;
  for (auto& l : layers) {
    std::memcpy(l.W.data(), v.data() + k, l.W.size() * sizeof(double));
    k += static_cast<int>(l.W.size());
    std::memcpy(l.b.data(), v.data() + k, l.b.size() * sizeof(double));
    k += static_cast<int>(l.b.size());
  }
}

AdamW::AdamW(int num_params, double learning_rate, double weight_decay, double beta1,
             double beta2, double eps)
    : lr_(learning_rate),
      wd_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(VectorXd::Zero(num_params)),
      v_(VectorXd::Zero(num_params)) {}

void AdamW::step(VectorXd& params, const VectorXd& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adamw size mismatch");
  }
  t_ += 1;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grads.array().square().matrix();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  // decoupled weight decay
  params -= (lr_ / bc1) * (m_.array() / ((v_ / bc2).array().sqrt() + eps_)).matrix();
  params -= lr_ * wd_ * params;
}

void save_checkpoint(const std::string& dir,
                     const std::map<std::string, MatrixXd>& tensors,
                     const nlohmann::json& config) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "pickbench-checkpoint-v1";
  manifest["scalar"] = "f64";
  manifest["config"] = config;
  auto& entries = manifest["tensors"] = nlohmann::json::array();

  std::string blob;
  for (const auto& [name, m] : tensors) {  // std::map: deterministic order
    entries.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"offset", blob.size()}});
    const size_t bytes = m.size() * sizeof(double);
    const size_t old = blob.size();
    blob.resize(old + bytes);
    std::memcpy(blob.data() + old, m.data(), bytes);
  }
  write_file_atomic(dir + "/params.bin", blob);
  write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::pair<std::map<std::string, MatrixXd>, nlohmann::json> load_checkpoint(
    const std::string& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
  if (manifest.at("format") != "pickbench-checkpoint-v1" ||
      manifest.at("scalar") != "f64") {
    throw std::runtime_error("unsupported checkpoint format in " + dir);
  }
  const std::string blob = read_file(dir + "/params.bin");
  std::map<std::string, MatrixXd> tensors;
  for (const auto& e : manifest.at("tensors")) {
    const std::string name = e.at("name").get<std::string>();
    const long rows = e.at("rows").get<long>();
    const long cols = e.at("cols").get<long>();
    const size_t offset = e.at("offset").get<size_t>();
    const size_t bytes = static_cast<size_t>(rows) * cols * sizeof(double);
    if (offset + bytes > blob.size()) {
      throw std::runtime_error("checkpoint blob too short for tensor " + name);
    }
    MatrixXd m(rows, cols);
    std::memcpy(m.data(), blob.data() + offset, bytes);
    tensors.emplace(name, std::move(m));
  }
  return {std::move(tensors), manifest.at("config")};
}

VectorXd finite_difference_gradient(const std::function<double(const VectorXd&)>& f,
                                    const VectorXd& x, double eps) {
  VectorXd g(x.size());
  VectorXd p = x;
  for (int i = 0; i < x.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double hi = f(p);
    p[i] = orig - eps;
    const double lo = f(p);
    p[i] = orig;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

double max_relative_error(const VectorXd& analytic, const VectorXd& numeric) {
  double worst = 0.0;
  for (int i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace pickbench
