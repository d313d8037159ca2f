#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "gnncomp/bench.hpp"
#include "gnncomp/sparse_ckpt.hpp"

using namespace gnncomp;

namespace {

struct Flags {
  std::string config;
  std::string dataset;
  std::string task;
  std::string data_dir;
  std::string method;
  double sparsity = -1;
  bool finetune = false;
  int seeds = 0;
  int epochs = 0;
  int workers = 0;
  bool no_timing = false;
  std::string out;
  std::string checkpoint;
  int rounds = 5;

  std::string quant;
  int bits = 0;
  std::string backward;
  std::string observer;
  double dq_pmin = -1;
  double dq_pmax = -1;
  double a2q_lambda = -1;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "TOML config file");
  cmd->add_option("--dataset", f.dataset, "cora|proteins|bbbp|synth|synth-proteins|synth-bbbp");
  cmd->add_option("--task", f.task, "auto|node|graph|link");
  cmd->add_option("--data-dir", f.data_dir, "Dataset root (default: $GNNCOMP_DATA_DIR)");
  cmd->add_option("--seeds", f.seeds, "Seeds per cell");
  cmd->add_option("--epochs", f.epochs, "Training epochs (0: task default)");
  cmd->add_option("--workers", f.workers, "Worker threads (0: cores - 1)");
  cmd->add_flag("--no-timing", f.no_timing, "Zero timing and memory columns");
  cmd->add_option("--out", f.out, "Output path (.csv or .md)");
}

void add_quant_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--quant", f.quant, "fp32|qat|dq|a2q");
  cmd->add_option("--bits", f.bits, "Bit-width")->check(CLI::Range(2, 32));
  cmd->add_option("--backward", f.backward, "ste|gc");
  cmd->add_option("--observer", f.observer, "abs|mom|per");
  cmd->add_option("--dq-pmin", f.dq_pmin, "Degree-Quant minimum protection probability");
  cmd->add_option("--dq-pmax", f.dq_pmax, "Degree-Quant maximum protection probability");
  cmd->add_option("--a2q-lambda", f.a2q_lambda, "A2Q memory penalty weight");
}

BenchConfig make_config(const Flags& f) {
  BenchConfig c;
  if (const char* env = std::getenv("GNNCOMP_DATA_DIR")) c.data_dir = env;
  if (!f.config.empty()) c.apply(load_toml(f.config));
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.task.empty()) c.task = f.task;
  if (!f.data_dir.empty()) c.data_dir = f.data_dir;
  if (f.seeds > 0) c.seeds = f.seeds;
  if (f.epochs > 0) c.epochs = f.epochs;
  if (f.workers > 0) c.workers = f.workers;
  if (f.no_timing) c.timing = false;
  if (!f.out.empty()) c.out = f.out;
  if (!f.method.empty()) c.method = f.method;
  if (f.finetune) c.finetune = true;
  if (f.sparsity >= 0) c.sparsities = {f.sparsity};
  return c;
}

// A single quant config from flags, when any quant flag is given.
std::optional<QuantConfig> quant_from_flags(const Flags& f) {
  if (f.quant.empty() && f.bits == 0 && f.backward.empty() && f.observer.empty() && f.dq_pmin < 0 && f.dq_pmax < 0 &&
      f.a2q_lambda < 0) {
    return std::nullopt;
  }
  QuantConfig q;
  if (!f.quant.empty()) q.mode = quant_mode_from_string(f.quant);
  if (f.bits > 0) q.bits = f.bits;
  if (!f.backward.empty()) q.backward = backward_mode_from_string(f.backward);
  if (!f.observer.empty()) q.observer = observer_kind_from_string(f.observer);
  if (f.dq_pmin >= 0) q.dq_pmin = static_cast<float>(f.dq_pmin);
  if (f.dq_pmax >= 0) q.dq_pmax = static_cast<float>(f.dq_pmax);
  if (f.a2q_lambda >= 0) q.a2q_lambda = static_cast<float>(f.a2q_lambda);
  q.validate();
  return q;
}

LoadedData load(const BenchConfig& c) {
  LoadedData d = load_named_dataset(c.dataset, c.data_dir, c.task, c.split_seed);
  std::cerr << "dataset " << d.dataset.name << " (" << to_string(d.dataset.task) << ", " << d.source << ")\n";
  return d;
}

void report(const std::vector<BenchRecord>& records, const BenchConfig& c) {
  if (c.out.empty()) write_markdown(records, std::cout);
  for (const auto& r : records) {
    if (!r.error.empty()) std::cerr << "cell " << r.knob << " failed: " << r.error << '\n';
    if (!r.bit_map.empty()) {
      std::cerr << r.knob << " bits:";
      for (const auto& [site, b] : r.bit_map) std::cerr << ' ' << site << '=' << b;
      std::cerr << '\n';
    }
  }
}

int cmd_train(const Flags& f) {
  const BenchConfig c = make_config(f);
  const LoadedData d = load(c);
  const ModelSpec spec = ModelSpec::for_dataset(d.dataset);
  std::vector<double> accs;
  for (int seed = 1; seed <= c.seeds; ++seed) {
    auto model = make_model(spec, static_cast<std::uint64_t>(seed));
    const TrainResult r = train(*model, d.dataset, d.split, c.train_options(d.dataset.task, seed));
    accs.push_back(r.test_metric);
    std::printf("seed %d: test %.4f (best val %.4f at epoch %d, %.2f s)\n", seed, r.test_metric, r.best_val,
                r.best_epoch, r.train_seconds);
    if (seed == 1 && !f.checkpoint.empty()) write_file(dense_checkpoint(model->state()), f.checkpoint);
  }
  const auto [mean, sd] = mean_std(accs);
  std::printf("%s %s: %.4f ± %.4f over %d seeds\n", to_string(spec.kind).c_str(), d.dataset.name.c_str(), mean, sd,
              c.seeds);
  return 0;
}

int cmd_prune(const Flags& f) {
  const BenchConfig c = make_config(f);
  const LoadedData d = load(c);
  if (!f.checkpoint.empty()) {
    const ModelSpec spec = ModelSpec::for_dataset(d.dataset);
    auto model = make_model(spec, 1);
    const TrainOptions options = c.train_options(d.dataset.task, 1);
    train(*model, d.dataset, d.split, options);
    const PruneMask mask = magnitude_prune(*model, prune_method_from_string(c.method), c.sparsities.front());
    if (c.finetune) {
      FineTuneOptions ft;
      ft.epochs = c.finetune_epochs;
      fine_tune(*model, mask, d.dataset, d.split, options, ft);
    } else {
      apply_mask(*model, mask);
    }
    write_file(compress_state(model->state()), f.checkpoint);
    write_sparsity_csv(sparsity_report(*model), std::cout);
    return 0;
  }
  report(run_resumable(SweepKind::Prune, c, d), c);
  return 0;
}

int cmd_reg(const Flags& f) {
  const BenchConfig c = make_config(f);
  report(run_resumable(SweepKind::Reg, c, load(c)), c);
  return 0;
}

int cmd_quant(const Flags& f) {
  BenchConfig c = make_config(f);
  if (auto q = quant_from_flags(f)) c.quant_configs = {q->label()};
  report(run_resumable(SweepKind::Quant, c, load(c)), c);
  return 0;
}

int cmd_ltq(const Flags& f) {
  const BenchConfig c = make_config(f);
  const LoadedData d = load(c);
  const double s = f.sparsity >= 0 ? f.sparsity : 0.8;
  const ModelSpec spec = ModelSpec::for_dataset(d.dataset);
  std::printf("seed,dense_acc,winning_ticket_acc,finetune_acc,round_rate,achieved_sparsity\n");
  for (int seed = 1; seed <= c.seeds; ++seed) {
    const auto useed = static_cast<std::uint64_t>(seed);
    FineTuneOptions ft;
    ft.epochs = c.finetune_epochs;
    const LotteryResult r = lottery_ticket_experiment([&] { return make_model(spec, useed); }, d.dataset, d.split, s,
                                                      f.rounds, c.train_options(d.dataset.task, useed), ft);
    std::printf("%d,%.4f,%.4f,%.4f,%.4f,%.4f\n", seed, r.dense_acc, r.winning_ticket_acc, r.finetune_acc, r.round_rate,
                r.achieved_sparsity);
  }
  return 0;
}

int cmd_bench(const Flags& f) {
  BenchConfig c = make_config(f);
  std::vector<std::string> sweeps = {"prune", "reg", "quant"};
  std::filesystem::path out_dir = c.out.empty() ? std::filesystem::path("results") : c.out;
  if (!f.config.empty()) {
    const TomlDocument doc = load_toml(f.config);
    sweeps = doc.get_string_array("bench.sweeps", sweeps);
    if (f.out.empty()) out_dir = doc.get_string("bench.out_dir", out_dir.string());
  }
  if (auto q = quant_from_flags(f)) c.quant_configs = {q->label()};
  std::filesystem::create_directories(out_dir);
  const LoadedData d = load(c);
  for (const auto& name : sweeps) {
    SweepKind kind;
    if (name == "prune") {
      kind = SweepKind::Prune;
    } else if (name == "reg") {
      kind = SweepKind::Reg;
    } else if (name == "quant") {
      kind = SweepKind::Quant;
    } else {
      throw Error("unknown sweep '" + name + "' (prune|reg|quant)");
    }
    c.out = out_dir / (name + ".csv");
    const auto records = run_resumable(kind, c, d);
    emit(records, out_dir / (name + ".md"));
    std::cerr << name << ": " << records.size() << " rows -> " << c.out.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees many mid-sized matrices per step; keep them
  // on the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"GNN pruning, quantization and sparse checkpoint toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* train_cmd = app.add_subcommand("train", "Train a model per seed and report test accuracy");
  add_common(train_cmd, f);
  train_cmd->add_option("--checkpoint", f.checkpoint, "Write the seed-1 model as a dense checkpoint");

  auto* prune_cmd = app.add_subcommand("prune", "Magnitude pruning sweep");
  add_common(prune_cmd, f);
  prune_cmd->add_option("--method", f.method, "global|layerwise");
  prune_cmd->add_option("--sparsity", f.sparsity, "Single sparsity instead of the grid")->check(CLI::Range(0.0, 1.0));
  prune_cmd->add_flag("--finetune", f.finetune, "Fine-tune after masking");
  prune_cmd->add_option("--checkpoint", f.checkpoint, "Prune one seed-1 model and write a sparse checkpoint");

  auto* reg_cmd = app.add_subcommand("reg", "L2 regularization sweep");
  add_common(reg_cmd, f);

  auto* quant_cmd = app.add_subcommand("quant", "Quantization-aware training sweep");
  add_common(quant_cmd, f);
  add_quant_flags(quant_cmd, f);

  auto* ltq_cmd = app.add_subcommand("ltq", "Lottery ticket experiment");
  add_common(ltq_cmd, f);
  ltq_cmd->add_option("--sparsity", f.sparsity, "Final sparsity (default 0.8)")->check(CLI::Range(0.0, 0.999));
  ltq_cmd->add_option("--rounds", f.rounds, "Pruning rounds")->check(CLI::PositiveNumber);

  auto* bench_cmd = app.add_subcommand("bench", "Run the sweeps listed in the config into --out (a directory)");
  add_common(bench_cmd, f);
  bench_cmd->add_option("--method", f.method, "global|layerwise");
  bench_cmd->add_flag("--finetune", f.finetune, "Fine-tune after masking");
  add_quant_flags(bench_cmd, f);

  std::string in_path;
  std::string out_path;
  auto* compress_cmd = app.add_subcommand("compress", "Rewrite a checkpoint with sparse storage");
  compress_cmd->add_option("in", in_path)->required();
  compress_cmd->add_option("out", out_path)->required();
  auto* decompress_cmd = app.add_subcommand("decompress", "Rewrite a checkpoint with dense storage");
  decompress_cmd->add_option("in", in_path)->required();
  decompress_cmd->add_option("out", out_path)->required();
  auto* ratio_cmd = app.add_subcommand("ratio", "Size ratio of a pruned checkpoint against its base");
  ratio_cmd->add_option("base", in_path)->required();
  ratio_cmd->add_option("pruned", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(f);
    if (*prune_cmd) return cmd_prune(f);
    if (*reg_cmd) return cmd_reg(f);
    if (*quant_cmd) return cmd_quant(f);
    if (*ltq_cmd) return cmd_ltq(f);
    if (*bench_cmd) return cmd_bench(f);
    if (*compress_cmd || *decompress_cmd) {
      const SparseCheckpoint in = read_file(in_path);
      const ModelState state = decompress_state(in);
      SparseCheckpoint out = *compress_cmd ? compress_state(state) : dense_checkpoint(state);
      out.metadata = in.metadata;
      write_file(out, out_path);
      return 0;
    }
    if (*ratio_cmd) {
      const auto r = size_ratio(decompress_state(read_file(in_path)), decompress_state(read_file(out_path)));
      std::printf("dense_bytes %llu\npayload_bytes %llu\ntotal_bytes %llu\npayload_ratio %.4f\ntotal_ratio %.4f\n",
                  static_cast<unsigned long long>(r.dense_bytes), static_cast<unsigned long long>(r.payload_bytes),
                  static_cast<unsigned long long>(r.total_bytes), r.payload_ratio, r.total_ratio);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
