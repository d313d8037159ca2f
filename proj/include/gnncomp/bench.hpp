#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gnncomp/config.hpp"
#include "gnncomp/pruning.hpp"
#include "gnncomp/quant.hpp"

namespace gnncomp {

/// One aggregated cell of a sweep (all seeds of one knob value).
struct BenchRecord {
  std::string task;
  std::string dataset;
  std::string method;
  std::string knob;
  int seed_count = 0;
  double acc_mean = 0;
  double acc_std = 0;
  double train_s = 0;
  double infer_mean = 0;
  double infer_std = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t total_bytes = 0;
  std::optional<std::uint64_t> peak_rss;

  /// Not serialized: per-seed accuracies and, for A2Q, the learned bits.
  std::vector<double> seed_acc;
  std::map<std::string, int> bit_map;
  std::string error;

  bool failed() const { return !std::isfinite(acc_mean); }
  std::string key() const { return task + '|' + dataset + '|' + method + '|' + knob; }
};

inline constexpr const char* kBenchCsvHeader =
    "task,dataset,method,knob,seed_count,acc_mean,acc_std,train_s,infer_mean,infer_std,payload_bytes,total_bytes,"
    "peak_rss";

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out);
std::vector<BenchRecord> read_csv(std::istream& in);
void write_markdown(const std::vector<BenchRecord>& records, std::ostream& out);
/// Writes CSV or Markdown according to the extension (.md -> Markdown).
void emit(const std::vector<BenchRecord>& records, const std::filesystem::path& path);

/// Sample mean and (n - 1) standard deviation; std is 0 for n <= 1.
std::pair<double, double> mean_std(const std::vector<double>& xs);

struct InferenceTiming {
  double mean = 0;
  double std = 0;
  std::vector<double> samples;
};

/// Wall-clock time of a full test-split evaluation, after two warm-up passes.
InferenceTiming measure_inference(GnnModel& model, const Dataset& ds, const Split& split, int repeats = 10,
                                  ForwardHooks* hooks = nullptr);

enum class MeterKind { None, RssSampler, External };

struct MeterSample {
  std::chrono::steady_clock::time_point timestamp;
  std::uint64_t rss_bytes = 0;
};

/// Current resident set size, or nullopt where /proc is unavailable.
std::optional<std::uint64_t> current_rss_bytes();

/// Background thread sampling resident memory every `period`.
class RssSampler {
 public:
  explicit RssSampler(std::chrono::milliseconds period = std::chrono::milliseconds(50));
  ~RssSampler();
  RssSampler(const RssSampler&) = delete;
  RssSampler& operator=(const RssSampler&) = delete;

  bool available() const { return available_; }
  /// Highest sample taken within [from, to], including one taken now.
  std::optional<std::uint64_t> peak_between(std::chrono::steady_clock::time_point from,
                                            std::chrono::steady_clock::time_point to);
  std::vector<MeterSample> samples() const;

 private:
  void sample();

  std::chrono::milliseconds period_;
  bool available_ = false;
  mutable std::mutex mu_;
  std::vector<MeterSample> samples_;
  std::jthread thread_;
};

/// Runs fn(0..n-1) on up to `workers` threads; the first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);
/// Hardware threads minus one, at least one.
int default_workers();

/// Dataset names: cora, proteins, bbbp (files under data_dir), synth,
/// synth-proteins, synth-bbbp (generated). `task` = "link" turns a node
/// dataset into link prediction.
struct LoadedData {
  Dataset dataset;
  Split split;
  std::string source;  // "files:<path>" or "synthetic"
};

LoadedData load_named_dataset(const std::string& name, const std::filesystem::path& data_dir,
                              const std::string& task = "auto", std::uint64_t split_seed = 7);
/// 0.6/0.2/0.2 for node classification, 0.8/0.1/0.1 otherwise.
SplitRatios default_split_ratios(Task task);
/// Per-task training defaults (epochs, lr, L2).
OptimConfig default_optim(Task task);

struct BenchConfig {
  std::string dataset = "synth";
  std::string task = "auto";
  std::filesystem::path data_dir;
  int seeds = 3;
  std::uint64_t split_seed = 7;
  int epochs = 0;             // 0: task default
  double lr = 0.0;            // 0: task default
  double weight_decay = -1;   // <0: task default
  int workers = 0;            // 0: default_workers()
  bool timing = true;         // false zeroes all timing/memory columns (golden runs)
  int infer_repeats = 10;
  std::filesystem::path out;

  std::string method = "global";
  bool finetune = false;
  int finetune_epochs = 50;
  std::vector<double> sparsities = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> lambdas = default_lambda_grid();
  std::vector<std::string> quant_configs = {"fp32", "qat-int8-ste-abs", "qat-int4-ste-abs", "dq-int8-ste-abs",
                                            "dq-int4-ste-abs", "a2q-l0.01-ste-abs"};

  /// Applies keys from a TOML document ([bench], [prune], [reg], [quant]).
  void apply(const TomlDocument& doc);
  TrainOptions train_options(Task task, std::uint64_t seed) const;
};

/// Sweeps. `existing` holds records from a previous partial run; any cell
/// found there with a finite accuracy is reused instead of recomputed.
std::vector<BenchRecord> run_prune_sweep(const BenchConfig& config, const LoadedData& data,
                                         const std::vector<BenchRecord>& existing = {});
std::vector<BenchRecord> run_reg_sweep(const BenchConfig& config, const LoadedData& data,
                                       const std::vector<BenchRecord>& existing = {});
std::vector<BenchRecord> run_quant_sweep(const BenchConfig& config, const LoadedData& data,
                                         const std::vector<BenchRecord>& existing = {});

enum class SweepKind { Prune, Reg, Quant };

/// Loads config.out if present, runs the missing cells, rewrites config.out.
std::vector<BenchRecord> run_resumable(SweepKind kind, const BenchConfig& config, const LoadedData& data);

}  // namespace gnncomp
