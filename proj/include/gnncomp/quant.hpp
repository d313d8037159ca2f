#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "gnncomp/training.hpp"

namespace gnncomp {

struct QuantParams {
  float scale = 1.0f;
  int zero_point = 0;
  int qmin = 0;
  int qmax = 255;
  int bits = 8;
};

/// Affine parameters for the range [lo, hi]. Asymmetric maps onto
/// [0, 2^b - 1] after stretching the range to contain 0; symmetric onto
/// [-2^(b-1), 2^(b-1) - 1] with zero point 0. A degenerate range is widened
/// by 1e-8 on each side.
QuantParams compute_qparams(float lo, float hi, int bits, bool symmetric);

template <typename Scalar>
Scalar quantize_level(Scalar x, const QuantParams& qp) {
  const Scalar q = std::nearbyint(x / static_cast<Scalar>(qp.scale)) + static_cast<Scalar>(qp.zero_point);
  return q;
}

template <typename Scalar>
Scalar fake_quant_value(Scalar x, const QuantParams& qp) {
  const Scalar q = std::clamp(quantize_level(x, qp), static_cast<Scalar>(qp.qmin), static_cast<Scalar>(qp.qmax));
  return (q - static_cast<Scalar>(qp.zero_point)) * static_cast<Scalar>(qp.scale);
}

/// (clamp(round(x/s) + z, qmin, qmax) - z) * s, elementwise.
template <typename Derived>
MatrixX<typename Derived::Scalar> fake_quant(const Eigen::MatrixBase<Derived>& x, const QuantParams& qp) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([&qp](Scalar v) { return fake_quant_value(v, qp); });
}

/// true where round(x/s) + z lies inside [qmin, qmax], i.e. the clamp is inactive.
template <typename Derived>
MatrixX<bool> quant_in_range(const Eigen::MatrixBase<Derived>& x, const QuantParams& qp) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([&qp](Scalar v) {
    const Scalar q = quantize_level(v, qp);
    return q >= static_cast<Scalar>(qp.qmin) && q <= static_cast<Scalar>(qp.qmax);
  });
}

enum class BackwardMode { STE, GC };
enum class ObserverKind { Abs, Momentum, Percentile };
enum class QuantMode { FP32, QAT, DQ, A2Q };

std::string to_string(BackwardMode m);
std::string to_string(ObserverKind k);
std::string to_string(QuantMode m);
BackwardMode backward_mode_from_string(const std::string& s);
ObserverKind observer_kind_from_string(const std::string& s);
QuantMode quant_mode_from_string(const std::string& s);

/// STE passes `upstream` unchanged; GC zeroes it where the forward clamp saturated.
Matrix fake_quant_backward(const Matrix& upstream, const Matrix& x, const QuantParams& qp, BackwardMode mode);

/// Differentiable fake-quant node.
ad::Var fake_quant(const ad::Var& x, const QuantParams& qp, BackwardMode mode);

class Observer {
 public:
  explicit Observer(ObserverKind kind = ObserverKind::Abs, float momentum = 0.9f, float percentile = 99.9f)
      : kind_(kind), momentum_(momentum), percentile_(percentile) {}

  /// Folds one batch into the running range. Empty input is ignored.
  void observe(const Matrix& x);
  void reset() { initialized_ = false; }

  ObserverKind kind() const { return kind_; }
  bool initialized() const { return initialized_; }
  float running_min() const { return min_; }
  float running_max() const { return max_; }

 private:
  ObserverKind kind_;
  float momentum_;
  float percentile_;
  float min_ = 0.0f;
  float max_ = 0.0f;
  bool initialized_ = false;
};

/// Nearest-rank percentile (p in (0, 100]) of `values`: the ceil(p/100 * n)-th smallest.
float nearest_rank_percentile(std::vector<float> values, float p);

struct QuantConfig {
  QuantMode mode = QuantMode::QAT;
  int bits = 8;  // 32 disables quantization
  BackwardMode backward = BackwardMode::STE;
  ObserverKind observer = ObserverKind::Abs;
  float dq_pmin = 0.0f;
  float dq_pmax = 0.1f;
  float a2q_lambda = 0.0f;
  float a2q_init_bits = 4.0f;
  float a2q_bit_lr = 0.05f;
  bool a2q_freeze_bits = false;
  std::uint64_t seed = 0;  // drives DQ protection sampling only

  void validate() const;
  /// Compact knob label, e.g. "qat-int8-ste-abs" or "a2q-l0.01".
  std::string label() const;
};

/// Inverse of QuantConfig::label; omitted trailing fields keep their defaults.
QuantConfig quant_config_from_label(const std::string& label);

/// Protection probability per node: p_min + (p_max - p_min) * rank / (n - 1),
/// rank ascending by degree with ties by node index; p_max when n = 1.
std::vector<float> degree_quant_protect(const Graph& graph, float p_min, float p_max);
std::vector<bool> sample_mask(const std::vector<float>& probs, std::mt19937_64& rng);

/// Fake-quantizes every weight and hooked activation of a model. Weights use
/// a symmetric range taken from the current tensor; activations use an
/// asymmetric range from a per-site observer that updates in training only.
class QuantContext : public ForwardHooks {
 public:
  explicit QuantContext(QuantConfig config);

  void attach(GnnModel& model, const Dataset& ds, const Split& split) override;
  ad::Var weight(const std::string& site, const ad::Var& w, bool train) override;
  ad::Var activation(const std::string& site, const ad::Var& x, bool node_level, bool train) override;
  void begin_batch(std::span<const Graph* const> graphs, bool train) override;
  ad::Var penalty() override;
  std::vector<Parameter*> extra_parameters() override;
  float extra_lr() const override { return config_.a2q_bit_lr; }
  void after_step() override;
  bool quantize_raw_input() const override { return quantize_input_; }

  const QuantConfig& config() const { return config_; }
  /// Effective bit-width of a site (32 when the site is not quantized).
  int site_bits(const std::string& site) const;
  /// Site name -> effective bits, weight sites and activation sites alike.
  std::map<std::string, int> bit_map() const;
  /// Memory proxy sum(count * beta) / sum(count * 32) over all sites.
  double memory_fraction() const;
  std::vector<std::string> weight_sites() const;

 private:
  struct Site {
    bool is_weight = false;
    Index count = 0;
    Observer observer;
    std::optional<Parameter> beta;  // A2Q only
  };

  bool enabled() const {
    return config_.mode == QuantMode::A2Q || (config_.mode != QuantMode::FP32 && config_.bits < 32);
  }
  Site& site(const std::string& name, bool is_weight, Index count);
  int bits_of(const Site& s) const;
  ad::Var quantize(Site& s, const ad::Var& x, const QuantParams& qp);

  QuantConfig config_;
  std::map<std::string, Site> sites_;
  std::vector<std::string> order_;
  bool discovering_ = false;
  bool quantize_input_ = false;
  std::mt19937_64 dq_rng_;
  std::unordered_map<const Graph*, std::vector<float>> dq_probs_;
  std::vector<bool> protected_rows_;
  bool protect_active_ = false;
};

/// Trains with QAT or DQ fake quantization (mode QAT/DQ/FP32).
TrainResult qat_train(GnnModel& model, const Dataset& ds, const Split& split, QuantContext& quant,
                      const TrainOptions& options);
/// Trains with learnable bit-widths (mode A2Q).
TrainResult a2q_train(GnnModel& model, const Dataset& ds, const Split& split, QuantContext& quant,
                      const TrainOptions& options);

}  // namespace gnncomp
