#include "gnncomp/quant.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>

namespace gnncomp {

QuantParams compute_qparams(float lo, float hi, int bits, bool symmetric) {
  if (bits < 1 || bits > 16) throw Error("quant: bit-width must lie in [1, 16]");
  if (lo > hi) std::swap(lo, hi);
  if (!symmetric) {
    // Zero must be representable, otherwise the clamped zero point shifts the grid.
    lo = std::min(lo, 0.0f);
    hi = std::max(hi, 0.0f);
  }
  if (lo == hi) {
    lo -= 1e-8f;
    hi += 1e-8f;
  }
  QuantParams qp;
  qp.bits = bits;
  if (symmetric) {
    qp.qmin = -(1 << (bits - 1));
    qp.qmax = (1 << (bits - 1)) - 1;
    const float m = std::max(std::abs(lo), std::abs(hi));
    qp.scale = m / static_cast<float>(std::max(qp.qmax, 1));
    qp.zero_point = 0;
  } else {
    qp.qmin = 0;
    qp.qmax = (1 << bits) - 1;
    qp.scale = (hi - lo) / static_cast<float>(qp.qmax - qp.qmin);
    const float z = std::nearbyint(static_cast<float>(qp.qmin) - lo / qp.scale);
    qp.zero_point = static_cast<int>(std::clamp(z, static_cast<float>(qp.qmin), static_cast<float>(qp.qmax)));
  }
  if (!(qp.scale > 0.0f)) qp.scale = 1e-8f;
  return qp;
}

std::string to_string(BackwardMode m) { return m == BackwardMode::STE ? "ste" : "gc"; }

std::string to_string(ObserverKind k) {
  switch (k) {
    case ObserverKind::Abs: return "abs";
    case ObserverKind::Momentum: return "mom";
    case ObserverKind::Percentile: return "per";
  }
  return "abs";
}

std::string to_string(QuantMode m) {
  switch (m) {
    case QuantMode::FP32: return "fp32";
    case QuantMode::QAT: return "qat";
    case QuantMode::DQ: return "dq";
    case QuantMode::A2Q: return "a2q";
  }
  return "fp32";
}

BackwardMode backward_mode_from_string(const std::string& s) {
  if (s == "ste") return BackwardMode::STE;
  if (s == "gc") return BackwardMode::GC;
  throw Error("unknown backward mode: " + s);
}

ObserverKind observer_kind_from_string(const std::string& s) {
  if (s == "abs") return ObserverKind::Abs;
  if (s == "mom" || s == "momentum") return ObserverKind::Momentum;
  if (s == "per" || s == "percentile") return ObserverKind::Percentile;
  throw Error("unknown observer: " + s);
}

QuantMode quant_mode_from_string(const std::string& s) {
  if (s == "fp32" || s == "none") return QuantMode::FP32;
  if (s == "qat") return QuantMode::QAT;
  if (s == "dq") return QuantMode::DQ;
  if (s == "a2q") return QuantMode::A2Q;
  throw Error("unknown quantization mode: " + s);
}

Matrix fake_quant_backward(const Matrix& upstream, const Matrix& x, const QuantParams& qp, BackwardMode mode) {
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) throw ShapeError("fake_quant_backward: shape mismatch");
  if (mode == BackwardMode::STE) return upstream;
  return quant_in_range(x, qp).select(upstream, Matrix::Zero(x.rows(), x.cols()));
}

ad::Var fake_quant(const ad::Var& x, const QuantParams& qp, BackwardMode mode) {
  return ad::make_op(fake_quant(x.value(), qp), {x}, [qp, mode](ad::Node& self) {
    ad::Node& in = *self.parents[0];
    in.accumulate(fake_quant_backward(self.grad, in.value, qp, mode));
  });
}

float nearest_rank_percentile(std::vector<float> values, float p) {
  if (values.empty()) throw Error("percentile of an empty set");
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(static_cast<double>(p) / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  auto it = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), it, values.end());
  return *it;
}

void Observer::observe(const Matrix& x) {
  if (x.size() == 0) return;
  float lo = 0.0f;
  float hi = 0.0f;
  if (kind_ == ObserverKind::Percentile) {
    std::vector<float> v(x.data(), x.data() + x.size());
    lo = nearest_rank_percentile(v, 100.0f - percentile_);
    hi = nearest_rank_percentile(std::move(v), percentile_);
  } else {
    lo = x.minCoeff();
    hi = x.maxCoeff();
  }
  if (!initialized_) {
    min_ = lo;
    max_ = hi;
    initialized_ = true;
    return;
  }
  if (kind_ == ObserverKind::Abs) {
    min_ = std::min(min_, lo);
    max_ = std::max(max_, hi);
  } else {
    min_ = momentum_ * min_ + (1.0f - momentum_) * lo;
    max_ = momentum_ * max_ + (1.0f - momentum_) * hi;
  }
}

void QuantConfig::validate() const {
  if (bits != 32 && (bits < 2 || bits > 8)) throw Error("quant: bits must be in [2, 8] or 32");
  if (!(dq_pmin >= 0.0f && dq_pmax <= 1.0f && dq_pmin <= dq_pmax)) {
    throw Error("quant: DQ probabilities need 0 <= p_min <= p_max <= 1");
  }
  if (a2q_lambda < 0.0f) throw Error("quant: A2Q memory weight must be >= 0");
  if (a2q_init_bits < 2.0f || a2q_init_bits > 8.0f) throw Error("quant: A2Q initial bits must lie in [2, 8]");
}

std::string QuantConfig::label() const {
  char buf[128];
  switch (mode) {
    case QuantMode::FP32: return "fp32";
    case QuantMode::QAT:
      std::snprintf(buf, sizeof buf, "qat-int%d-%s-%s", bits, to_string(backward).c_str(), to_string(observer).c_str());
      return buf;
    case QuantMode::DQ:
      std::snprintf(buf, sizeof buf, "dq-int%d-%s-%s-p%g-%g", bits, to_string(backward).c_str(),
                    to_string(observer).c_str(), dq_pmin, dq_pmax);
      return buf;
    case QuantMode::A2Q:
      std::snprintf(buf, sizeof buf, "a2q-l%g-%s-%s", a2q_lambda, to_string(backward).c_str(),
                    to_string(observer).c_str());
      return buf;
  }
  return "fp32";
}

QuantConfig quant_config_from_label(const std::string& label) {
  // Split on '-', gluing exponent signs back on ("1e-05").
  std::vector<std::string> tok;
  std::string cur;
  auto exponent_pending = [&cur] {
    return cur.size() > 1 && cur.back() == 'e' && std::isdigit(static_cast<unsigned char>(cur[cur.size() - 2]));
  };
  for (std::size_t i = 0; i <= label.size(); ++i) {
    if (i == label.size() || (label[i] == '-' && !exponent_pending())) {
      tok.push_back(cur);
      cur.clear();
    } else {
      cur += label[i];
    }
  }
  auto number = [&label](const std::string& s) {
    std::size_t used = 0;
    float v = 0;
    try {
      v = std::stof(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error("bad number in quantization label: " + label);
    return v;
  };
  QuantConfig c;
  c.mode = quant_mode_from_string(tok.at(0));
  std::size_t i = 1;
  if (c.mode == QuantMode::FP32) {
    c.bits = 32;
  } else if (c.mode == QuantMode::A2Q) {
    if (i < tok.size() && tok[i].starts_with("l")) c.a2q_lambda = number(tok[i++].substr(1));
  } else if (i < tok.size() && tok[i].starts_with("int")) {
    c.bits = static_cast<int>(number(tok[i++].substr(3)));
  }
  if (i < tok.size() && (tok[i] == "ste" || tok[i] == "gc")) c.backward = backward_mode_from_string(tok[i++]);
  if (i < tok.size() && (tok[i] == "abs" || tok[i] == "mom" || tok[i] == "per")) c.observer = observer_kind_from_string(tok[i++]);
  if (c.mode == QuantMode::DQ && i < tok.size() && tok[i].starts_with("p")) {
    c.dq_pmin = number(tok[i++].substr(1));
    if (i < tok.size()) c.dq_pmax = number(tok[i++]);
  }
  if (i != tok.size()) throw Error("unrecognised quantization label: " + label);
  c.validate();
  return c;
}

std::vector<float> degree_quant_protect(const Graph& graph, float p_min, float p_max) {
  if (p_min > p_max) throw Error("degree_quant_protect: p_min > p_max");
  const Index n = graph.num_nodes;
  std::vector<float> probs(static_cast<std::size_t>(n), p_max);
  if (n <= 1) return probs;
  const auto deg = graph.degrees();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&deg](Index a, Index b) {
    return deg[static_cast<std::size_t>(a)] < deg[static_cast<std::size_t>(b)];
  });
  for (Index rank = 0; rank < n; ++rank) {
    probs[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] =
        p_min + (p_max - p_min) * static_cast<float>(rank) / static_cast<float>(n - 1);
  }
  return probs;
}

std::vector<bool> sample_mask(const std::vector<float>& probs, std::mt19937_64& rng) {
  std::vector<bool> out(probs.size());
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = u(rng) < probs[i];
  return out;
}

QuantContext::QuantContext(QuantConfig config) : config_(config), dq_rng_(config.seed) { config_.validate(); }

QuantContext::Site& QuantContext::site(const std::string& name, bool is_weight, Index count) {
  auto it = sites_.find(name);
  if (it != sites_.end()) return it->second;
  Site s;
  s.is_weight = is_weight;
  s.count = count;
  s.observer = Observer(is_weight ? ObserverKind::Abs : config_.observer);
  if (config_.mode == QuantMode::A2Q) {
    Parameter beta;
    beta.name = name + ".bits";
    beta.var = ad::leaf(Matrix::Constant(1, 1, config_.a2q_init_bits));
    beta.shape = {1};
    beta.weight_decay = false;
    s.beta = std::move(beta);
  }
  order_.push_back(name);
  return sites_.emplace(name, std::move(s)).first->second;
}

int QuantContext::bits_of(const Site& s) const {
  if (config_.mode != QuantMode::A2Q) return config_.bits;
  const float beta = s.beta ? s.beta->var.value()(0, 0) : config_.a2q_init_bits;
  return std::clamp(static_cast<int>(std::nearbyint(beta)), 2, 8);
}

ad::Var QuantContext::quantize(Site& s, const ad::Var& x, const QuantParams& qp) {
  if (config_.mode != QuantMode::A2Q || config_.a2q_freeze_bits || !s.beta) return fake_quant(x, qp, config_.backward);

  // Learnable bits: the rounding of beta is straight-through, and the output
  // depends on bits through the scale. k is the number of magnitude bits.
  const int k = s.is_weight ? qp.bits - 1 : qp.bits;
  const float two_k = std::ldexp(1.0f, k);
  const float ds_db = -qp.scale * std::log(2.0f) * two_k / (two_k - 1.0f);
  const BackwardMode mode = config_.backward;
  return ad::make_op(fake_quant(x.value(), qp), {x, s.beta->var}, [qp, mode, ds_db](ad::Node& self) {
    ad::Node& in = *self.parents[0];
    ad::Node& beta = *self.parents[1];
    if (in.requires_grad) in.accumulate(fake_quant_backward(self.grad, in.value, qp, mode));
    if (beta.requires_grad) {
      // d x_hat / d s: round(x/s) - x/s inside the range, (q - z) where clamped.
      const float z = static_cast<float>(qp.zero_point);
      const Matrix dxs = in.value.unaryExpr([&qp, z](float v) {
        const float level = quantize_level(v, qp);
        if (level < static_cast<float>(qp.qmin)) return static_cast<float>(qp.qmin) - z;
        if (level > static_cast<float>(qp.qmax)) return static_cast<float>(qp.qmax) - z;
        return (level - z) - v / qp.scale;
      });
      beta.accumulate(Matrix::Constant(1, 1, self.grad.cwiseProduct(dxs).sum() * ds_db));
    }
  });
}

void QuantContext::attach(GnnModel& model, const Dataset& ds, const Split& split) {
  if (!enabled()) return;
  // Raw inputs are quantized unless they are already 0/1 indicator features.
  quantize_input_ = false;
  for (const auto& g : ds.graphs) {
    if (((g.node_features.array() != 0.0f) && (g.node_features.array() != 1.0f)).any()) {
      quantize_input_ = true;
      break;
    }
  }
  discovering_ = true;
  ForwardContext ctx{false, nullptr, this};
  try {
    model.evaluate(ds, split, SplitPart::Val, ctx);
  } catch (...) {
    discovering_ = false;
    throw;
  }
  discovering_ = false;
}

ad::Var QuantContext::weight(const std::string& name, const ad::Var& w, bool) {
  if (!enabled()) return w;
  Site& s = site(name, true, w.value().size());
  if (discovering_) return w;
  // Weights are seen in full every step, so the range is simply the current one.
  s.observer.reset();
  s.observer.observe(w.value());
  const QuantParams qp = compute_qparams(s.observer.running_min(), s.observer.running_max(), bits_of(s), true);
  return quantize(s, w, qp);
}

ad::Var QuantContext::activation(const std::string& name, const ad::Var& x, bool node_level, bool train) {
  if (!enabled()) return x;
  Site& s = site(name, false, x.value().size());
  if (discovering_) return x;
  // Frozen in evaluation, except that a never-trained site takes its first batch.
  if (train || !s.observer.initialized()) s.observer.observe(x.value());
  const QuantParams qp = compute_qparams(s.observer.running_min(), s.observer.running_max(), bits_of(s), false);
  ad::Var q = quantize(s, x, qp);
  if (!(train && node_level && protect_active_) || static_cast<Index>(protected_rows_.size()) != x.rows()) return q;

  Matrix out = q.value();
  for (Index r = 0; r < x.rows(); ++r) {
    if (protected_rows_[static_cast<std::size_t>(r)]) out.row(r) = x.value().row(r);
  }
  auto rows = std::make_shared<std::vector<bool>>(protected_rows_);
  return ad::make_op(std::move(out), {x, q}, [rows](ad::Node& self) {
    Matrix direct = Matrix::Zero(self.grad.rows(), self.grad.cols());
    Matrix through = self.grad;
    for (Index r = 0; r < self.grad.rows(); ++r) {
      if ((*rows)[static_cast<std::size_t>(r)]) {
        direct.row(r) = self.grad.row(r);
        through.row(r).setZero();
      }
    }
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(direct);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(through);
  });
}

void QuantContext::begin_batch(std::span<const Graph* const> graphs, bool train) {
  protect_active_ = false;
  if (config_.mode != QuantMode::DQ || !train || discovering_ || !enabled()) return;
  protected_rows_.clear();
  for (const Graph* g : graphs) {
    auto it = dq_probs_.find(g);
    if (it == dq_probs_.end()) it = dq_probs_.emplace(g, degree_quant_protect(*g, config_.dq_pmin, config_.dq_pmax)).first;
    const auto mask = sample_mask(it->second, dq_rng_);
    protected_rows_.insert(protected_rows_.end(), mask.begin(), mask.end());
  }
  protect_active_ = true;
}

ad::Var QuantContext::penalty() {
  if (config_.mode != QuantMode::A2Q || config_.a2q_freeze_bits || config_.a2q_lambda == 0.0f || sites_.empty()) {
    return {};
  }
  double total = 0;
  for (const auto& [name, s] : sites_) total += static_cast<double>(s.count);
  ad::Var pen;
  for (const auto& name : order_) {
    const Site& s = sites_.at(name);
    const auto w = static_cast<float>(config_.a2q_lambda * static_cast<double>(s.count) / (total * 32.0));
    ad::Var term = ad::scale(s.beta->var, w);
    pen = pen ? ad::add(pen, term) : term;
  }
  return pen;
}

std::vector<Parameter*> QuantContext::extra_parameters() {
  std::vector<Parameter*> out;
  if (config_.mode != QuantMode::A2Q || config_.a2q_freeze_bits) return out;
  for (const auto& name : order_) out.push_back(&*sites_.at(name).beta);
  return out;
}

void QuantContext::after_step() {
  if (config_.mode != QuantMode::A2Q) return;
  for (auto& [name, s] : sites_) {
    if (s.beta) {
      float& b = s.beta->var.mutable_value()(0, 0);
      b = std::clamp(b, 2.0f, 8.0f);
    }
  }
}

int QuantContext::site_bits(const std::string& name) const {
  if (!enabled()) return 32;
  auto it = sites_.find(name);
  return it == sites_.end() ? 32 : bits_of(it->second);
}

std::map<std::string, int> QuantContext::bit_map() const {
  std::map<std::string, int> out;
  for (const auto& [name, s] : sites_) out[name] = enabled() ? bits_of(s) : 32;
  return out;
}

double QuantContext::memory_fraction() const {
  double num = 0;
  double den = 0;
  for (const auto& [name, s] : sites_) {
    double bits = 32.0;
    if (enabled()) bits = s.beta ? s.beta->var.value()(0, 0) : bits_of(s);
    num += static_cast<double>(s.count) * bits;
    den += static_cast<double>(s.count) * 32.0;
  }
  return den == 0 ? 1.0 : num / den;
}

std::vector<std::string> QuantContext::weight_sites() const {
  std::vector<std::string> out;
  for (const auto& name : order_) {
    if (sites_.at(name).is_weight) out.push_back(name);
  }
  return out;
}

TrainResult qat_train(GnnModel& model, const Dataset& ds, const Split& split, QuantContext& quant,
                      const TrainOptions& options) {
  if (quant.config().mode == QuantMode::A2Q) throw Error("qat_train: use a2q_train for learnable bit-widths");
  TrainOptions o = options;
  o.hooks = &quant;
  return train(model, ds, split, o);
}

TrainResult a2q_train(GnnModel& model, const Dataset& ds, const Split& split, QuantContext& quant,
                      const TrainOptions& options) {
  if (quant.config().mode != QuantMode::A2Q) throw Error("a2q_train: configuration is not in A2Q mode");
  TrainOptions o = options;
  o.hooks = &quant;
  return train(model, ds, split, o);
}

}  // namespace gnncomp
