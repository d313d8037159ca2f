#include "gnncomp/optim.hpp"

#include <cmath>

namespace gnncomp {

void OptimConfig::validate() const {
  if (!(lr > 0)) throw Error("optim: lr must be positive");
  if (weight_decay < 0) throw Error("optim: weight_decay must be >= 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw Error("optim: betas must lie in [0,1)");
  if (!(eps > 0)) throw Error("optim: eps must be positive");
}

int adam_step(std::vector<Parameter*>& params, std::vector<AdamMoments>& moments,
              const OptimConfig& config, int step, float lr) {
  const float bc1 = 1.0f - std::pow(config.beta1, static_cast<float>(step));
  const float bc2 = 1.0f - std::pow(config.beta2, static_cast<float>(step));
  int skipped = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& w = p.var.mutable_value();
    Matrix g = p.var.has_grad() ? p.var.grad() : Matrix::Zero(w.rows(), w.cols());
    if (p.prunable && p.weight_decay && config.weight_decay > 0) g += config.weight_decay * w;
    if (g.hasNaN()) {
      ++skipped;
      continue;
    }
    AdamMoments& mom = moments[i];
    if (mom.m.size() == 0) {
      mom.m = Matrix::Zero(w.rows(), w.cols());
      mom.v = Matrix::Zero(w.rows(), w.cols());
    }
    mom.m = config.beta1 * mom.m + (1.0f - config.beta1) * g;
    mom.v = config.beta2 * mom.v + (1.0f - config.beta2) * g.cwiseAbs2();
    w.array() -= lr * (mom.m.array() / bc1) / ((mom.v.array() / bc2).sqrt() + config.eps);
    p.apply_mask();
  }
  return skipped;
}

Adam::Adam(std::vector<Parameter*> params, OptimConfig config) : config_(config) {
  config_.validate();
  Group g;
  g.moments.resize(params.size());
  g.params = std::move(params);
  groups_.push_back(std::move(g));
}

void Adam::add_group(std::vector<Parameter*> params, float lr) {
  for (auto* p : params) p->weight_decay = false;
  Group g;
  g.moments.resize(params.size());
  g.params = std::move(params);
  g.lr = lr;
  g.own_lr = true;
  groups_.push_back(std::move(g));
}

void Adam::step() {
  ++step_;
  for (auto& g : groups_) {
    nan_skipped_ += adam_step(g.params, g.moments, config_, step_, g.own_lr ? g.lr : config_.lr);
  }
}

void Adam::zero_grad() {
  for (auto& g : groups_) {
    for (auto* p : g.params) p->var.zero_grad();
  }
}

}  // namespace gnncomp
