#include "gnncomp/bench.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include "gnncomp/sparse_ckpt.hpp"
#include "gnncomp/synthetic.hpp"

namespace gnncomp {

namespace {

using Clock = std::chrono::steady_clock;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("csv: bad number '" + s + "'", line);
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line) {
  Int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("csv: bad integer '" + s + "'", line);
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quote", lineno);
  out.push_back(std::move(cur));
  return out;
}

std::string knob_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    out << csv_field(r.task) << ',' << csv_field(r.dataset) << ',' << csv_field(r.method) << ',' << csv_field(r.knob)
        << ',' << r.seed_count << ',' << format_double(r.acc_mean) << ',' << format_double(r.acc_std) << ','
        << format_double(r.train_s) << ',' << format_double(r.infer_mean) << ',' << format_double(r.infer_std) << ','
        << r.payload_bytes << ',' << r.total_bytes << ',';
    if (r.peak_rss) out << *r.peak_rss;
    out << '\n';
  }
}

std::vector<BenchRecord> read_csv(std::istream& in) {
  std::vector<BenchRecord> out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return out;
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBenchCsvHeader) throw ParseError("csv: unexpected header", 1);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line, lineno);
    if (f.size() != 13) throw ParseError("csv: expected 13 fields, found " + std::to_string(f.size()), lineno);
    BenchRecord r;
    r.task = f[0];
    r.dataset = f[1];
    r.method = f[2];
    r.knob = f[3];
    r.seed_count = parse_int<int>(f[4], lineno);
    r.acc_mean = parse_double(f[5], lineno);
    r.acc_std = parse_double(f[6], lineno);
    r.train_s = parse_double(f[7], lineno);
    r.infer_mean = parse_double(f[8], lineno);
    r.infer_std = parse_double(f[9], lineno);
    r.payload_bytes = parse_int<std::uint64_t>(f[10], lineno);
    r.total_bytes = parse_int<std::uint64_t>(f[11], lineno);
    if (!f[12].empty()) r.peak_rss = parse_int<std::uint64_t>(f[12], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void write_markdown(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << "| Task | Dataset | Method | Knob | Seeds | Accuracy | Train (s) | Inference (s) | Payload (B) | Total (B) | "
         "Peak RSS (MB) |\n";
  out << "|---|---|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f | %.2f | %.4f ± %.4f", r.acc_mean, r.acc_std, r.train_s, r.infer_mean,
                  r.infer_std);
    out << "| " << r.task << " | " << r.dataset << " | " << r.method << " | " << r.knob << " | " << r.seed_count
        << " | " << buf << " | " << r.payload_bytes << " | " << r.total_bytes << " | ";
    if (r.peak_rss) {
      std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(*r.peak_rss) / (1024.0 * 1024.0));
      out << buf;
    } else {
      out << '-';
    }
    out << " |\n";
  }
}

void emit(const std::vector<BenchRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (path.extension() == ".md") {
    write_markdown(records, out);
  } else {
    write_csv(records, out);
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

InferenceTiming measure_inference(GnnModel& model, const Dataset& ds, const Split& split, int repeats,
                                  ForwardHooks* hooks) {
  if (repeats < 1) throw Error("measure_inference: repeats must be >= 1");
  model.prepare(ds, split);
  ForwardContext ctx{false, nullptr, hooks};
  for (int i = 0; i < 2; ++i) model.evaluate(ds, split, SplitPart::Test, ctx);
  InferenceTiming t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = Clock::now();
    model.evaluate(ds, split, SplitPart::Test, ctx);
    t.samples.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  std::tie(t.mean, t.std) = mean_std(t.samples);
  return t;
}

std::optional<std::uint64_t> current_rss_bytes() {
  std::ifstream statm("/proc/self/statm");
  std::uint64_t size = 0;
  std::uint64_t resident = 0;
  if (!(statm >> size >> resident)) return std::nullopt;
  return resident * static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
}

RssSampler::RssSampler(std::chrono::milliseconds period) : period_(period) {
  available_ = current_rss_bytes().has_value();
  if (!available_) return;
  sample();
  thread_ = std::jthread([this](std::stop_token st) {
    while (!st.stop_requested()) {
      std::this_thread::sleep_for(period_);
      sample();
    }
  });
}

RssSampler::~RssSampler() {
  if (thread_.joinable()) {
    thread_.request_stop();
    thread_.join();
  }
}

void RssSampler::sample() {
  if (auto rss = current_rss_bytes()) {
    std::lock_guard lock(mu_);
    samples_.push_back({Clock::now(), *rss});
  }
}

std::optional<std::uint64_t> RssSampler::peak_between(Clock::time_point from, Clock::time_point to) {
  if (!available_) return std::nullopt;
  sample();
  std::lock_guard lock(mu_);
  std::optional<std::uint64_t> peak;
  for (const auto& s : samples_) {
    if (s.timestamp >= from && (s.timestamp <= to || &s == &samples_.back())) {
      peak = std::max(peak.value_or(0), s.rss_bytes);
    }
  }
  return peak;
}

std::vector<MeterSample> RssSampler::samples() const {
  std::lock_guard lock(mu_);
  return samples_;
}

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 1 ? static_cast<int>(hw) - 1 : 1;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(workers));
    for (std::size_t w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

SplitRatios default_split_ratios(Task task) {
  if (task == Task::NodeClassification) return {0.6, 0.2, 0.2};
  return {0.8, 0.1, 0.1};
}

OptimConfig default_optim(Task task) {
  OptimConfig o;
  o.lr = 0.01f;
  switch (task) {
    case Task::NodeClassification:
      o.weight_decay = 5e-4f;
      o.max_epochs = 200;
      break;
    case Task::LinkPrediction:
      o.max_epochs = 200;
      break;
    case Task::GraphClassification:
      o.max_epochs = 100;
      break;
  }
  return o;
}

LoadedData load_named_dataset(const std::string& name, const std::filesystem::path& data_dir, const std::string& task,
                              std::uint64_t split_seed) {
  namespace fs = std::filesystem;
  LoadedData out;
  auto first_existing = [](std::initializer_list<fs::path> paths) -> fs::path {
    for (const auto& p : paths) {
      if (fs::exists(p)) return p;
    }
    return {};
  };
  if (name == "cora") {
    const fs::path dir = first_existing({data_dir / "cora", data_dir / "Cora", data_dir});
    if (dir.empty() || !fs::exists(dir / "cora.content")) {
      throw Error("cora: cora.content/cora.cites not found under " + data_dir.string());
    }
    out.dataset = load_cora(dir / "cora.content", dir / "cora.cites");
    out.source = "files:" + dir.string();
  } else if (name == "proteins") {
    const fs::path dir = first_existing({data_dir / "PROTEINS", data_dir / "proteins"});
    if (dir.empty()) throw Error("proteins: PROTEINS directory not found under " + data_dir.string());
    out.dataset = load_tu(dir);
    out.source = "files:" + dir.string();
  } else if (name == "bbbp") {
    const fs::path csv = first_existing({data_dir / "BBBP.csv", data_dir / "bbbp.csv"});
    if (csv.empty()) throw Error("bbbp: BBBP.csv not found under " + data_dir.string());
    out.dataset = load_bbbp(csv);
    out.source = "files:" + csv.string();
  } else if (name == "synth") {
    out.dataset = make_citation_dataset(CitationConfig{}, 1);
    out.source = "synthetic";
  } else if (name == "synth-proteins") {
    out.dataset = make_protein_dataset(ProteinConfig{}, 1);
    out.source = "synthetic";
  } else if (name == "synth-bbbp") {
    out.dataset = make_molecule_dataset(MoleculeConfig{}, 1);
    out.source = "synthetic";
  } else {
    throw Error("unknown dataset '" + name + "' (cora|proteins|bbbp|synth|synth-proteins|synth-bbbp)");
  }
  if (task == "link") {
    if (out.dataset.task != Task::NodeClassification || out.dataset.graphs.size() != 1) {
      throw Error("link prediction needs a single-graph dataset");
    }
    out.dataset.task = Task::LinkPrediction;
  } else if (task == "node" && out.dataset.task != Task::NodeClassification) {
    throw Error(name + " is not a node classification dataset");
  } else if (task == "graph" && out.dataset.task != Task::GraphClassification) {
    throw Error(name + " is not a graph classification dataset");
  } else if (task != "auto" && task != "node" && task != "graph") {
    throw Error("unknown task '" + task + "' (auto|node|graph|link)");
  }
  out.split = make_splits(out.dataset, default_split_ratios(out.dataset.task), split_seed);
  return out;
}

void BenchConfig::apply(const TomlDocument& doc) {
  dataset = doc.get_string("bench.dataset", dataset);
  task = doc.get_string("bench.task", task);
  data_dir = doc.get_string("bench.data_dir", data_dir.string());
  seeds = static_cast<int>(doc.get_int("bench.seeds", seeds));
  split_seed = static_cast<std::uint64_t>(doc.get_int("bench.split_seed", static_cast<std::int64_t>(split_seed)));
  epochs = static_cast<int>(doc.get_int("bench.epochs", epochs));
  lr = doc.get_double("bench.lr", lr);
  weight_decay = doc.get_double("bench.weight_decay", weight_decay);
  workers = static_cast<int>(doc.get_int("bench.workers", workers));
  timing = doc.get_bool("bench.timing", timing);
  infer_repeats = static_cast<int>(doc.get_int("bench.infer_repeats", infer_repeats));
  out = doc.get_string("bench.out", out.string());
  method = doc.get_string("prune.method", method);
  finetune = doc.get_bool("prune.finetune", finetune);
  finetune_epochs = static_cast<int>(doc.get_int("prune.finetune_epochs", finetune_epochs));
  sparsities = doc.get_double_array("prune.sparsities", sparsities);
  lambdas = doc.get_double_array("reg.lambdas", lambdas);
  quant_configs = doc.get_string_array("quant.configs", quant_configs);
  if (seeds < 1) throw Error("bench: seeds must be >= 1");
}

TrainOptions BenchConfig::train_options(Task t, std::uint64_t seed) const {
  TrainOptions o;
  o.optim = default_optim(t);
  if (epochs > 0) o.optim.max_epochs = epochs;
  if (lr > 0) o.optim.lr = static_cast<float>(lr);
  if (weight_decay >= 0) o.optim.weight_decay = static_cast<float>(weight_decay);
  o.seed = seed;
  return o;
}

namespace {

// Result of one (knob, seed) cell.
struct Cell {
  double acc = std::numeric_limits<double>::quiet_NaN();
  double train_s = 0;
  InferenceTiming infer;
  std::uint64_t payload = 0;
  std::uint64_t total = 0;
  Clock::time_point start;
  Clock::time_point end;
  std::map<std::string, int> bits;
  std::string error;
};

struct SweepFrame {
  const BenchConfig& config;
  const LoadedData& data;
  std::string method;
  std::vector<std::string> knobs;
  std::map<std::string, BenchRecord> reuse;

  SweepFrame(const BenchConfig& c, const LoadedData& d, std::string m, std::vector<std::string> k,
             const std::vector<BenchRecord>& existing)
      : config(c), data(d), method(std::move(m)), knobs(std::move(k)) {
    for (const auto& r : existing) {
      if (!r.failed()) reuse.emplace(r.key(), r);
    }
  }

  BenchRecord blank(const std::string& knob) const {
    BenchRecord r;
    r.task = to_string(data.dataset.task);
    r.dataset = data.dataset.name;
    r.method = method;
    r.knob = knob;
    r.seed_count = config.seeds;
    return r;
  }

  std::vector<std::size_t> missing() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < knobs.size(); ++k) {
      if (!reuse.count(blank(knobs[k]).key())) out.push_back(k);
    }
    return out;
  }

  int workers() const { return config.workers > 0 ? config.workers : default_workers(); }

  // Runs cell(k, seed) for every missing knob and seed, then aggregates in grid order.
  std::vector<BenchRecord> run(const std::function<void(std::size_t, std::uint64_t, Cell&)>& cell) {
    const auto todo = missing();
    const auto seeds = static_cast<std::size_t>(config.seeds);
    std::vector<Cell> cells(todo.size() * seeds);
    std::optional<RssSampler> sampler;
    if (config.timing) sampler.emplace();
    parallel_for(cells.size(), workers(), [&](std::size_t i) {
      Cell& c = cells[i];
      c.start = Clock::now();
      try {
        cell(todo[i / seeds], static_cast<std::uint64_t>(i % seeds) + 1, c);
      } catch (const std::exception& e) {
        c.acc = std::numeric_limits<double>::quiet_NaN();
        c.error = e.what();
      }
      c.end = Clock::now();
    });

    std::vector<BenchRecord> out;
    std::size_t t = 0;
    for (std::size_t k = 0; k < knobs.size(); ++k) {
      BenchRecord r = blank(knobs[k]);
      if (t >= todo.size() || todo[t] != k) {
        out.push_back(reuse.at(r.key()));
        continue;
      }
      std::vector<double> accs;
      std::vector<double> train;
      std::vector<double> infer;
      Clock::time_point from = Clock::time_point::max();
      Clock::time_point to = Clock::time_point::min();
      for (std::size_t s = 0; s < seeds; ++s) {
        const Cell& c = cells[t * seeds + s];
        accs.push_back(c.acc);
        train.push_back(c.train_s);
        infer.insert(infer.end(), c.infer.samples.begin(), c.infer.samples.end());
        from = std::min(from, c.start);
        to = std::max(to, c.end);
        if (!c.error.empty() && r.error.empty()) r.error = c.error;
      }
      const Cell& first = cells[t * seeds];
      r.seed_acc = accs;
      std::tie(r.acc_mean, r.acc_std) = mean_std(accs);
      if (config.timing) {
        r.train_s = mean_std(train).first;
        if (!infer.empty()) std::tie(r.infer_mean, r.infer_std) = mean_std(infer);
        r.peak_rss = sampler->peak_between(from, to);
      }
      r.payload_bytes = first.payload;
      r.total_bytes = first.total;
      r.bit_map = first.bits;
      out.push_back(std::move(r));
      ++t;
    }
    return out;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::vector<BenchRecord> run_prune_sweep(const BenchConfig& config, const LoadedData& data,
                                         const std::vector<BenchRecord>& existing) {
  const PruneMethod method = prune_method_from_string(config.method);
  std::vector<std::string> knobs;
  for (double s : config.sparsities) knobs.push_back(knob_label(s));
  SweepFrame frame(config, data, to_string(method) + (config.finetune ? "+ft" : ""), knobs, existing);
  const ModelSpec spec = ModelSpec::for_dataset(data.dataset);

  // Base models are trained once per seed and shared by every sparsity.
  struct Base {
    ModelState state;
    double train_s = 0;
  };
  std::vector<Base> bases(static_cast<std::size_t>(config.seeds));
  if (!frame.missing().empty()) {
    parallel_for(bases.size(), frame.workers(), [&](std::size_t i) {
      const auto seed = static_cast<std::uint64_t>(i) + 1;
      auto model = make_model(spec, seed);
      const auto t0 = Clock::now();
      train(*model, data.dataset, data.split, config.train_options(data.dataset.task, seed));
      bases[i].train_s = seconds_since(t0);
      bases[i].state = model->state();
    });
  }

  return frame.run([&](std::size_t k, std::uint64_t seed, Cell& c) {
    const Base& base = bases[seed - 1];
    auto model = make_model(spec, seed);
    model->load_state(base.state);
    const PruneMask mask = magnitude_prune(*model, method, config.sparsities[k]);
    apply_mask(*model, mask);
    c.train_s = base.train_s;
    if (config.finetune) {
      const auto t0 = Clock::now();
      FineTuneOptions ft;
      ft.epochs = config.finetune_epochs;
      c.acc = fine_tune(*model, mask, data.dataset, data.split, config.train_options(data.dataset.task, seed), ft)
                  .test_metric;
      c.train_s += seconds_since(t0);
    } else {
      c.acc = evaluate_test(*model, data.dataset, data.split);
    }
    if (config.timing) c.infer = measure_inference(*model, data.dataset, data.split, config.infer_repeats);
    const auto ratio = size_ratio(base.state, model->state());
    c.payload = ratio.payload_bytes;
    c.total = ratio.total_bytes;
  });
}

std::vector<BenchRecord> run_reg_sweep(const BenchConfig& config, const LoadedData& data,
                                       const std::vector<BenchRecord>& existing) {
  std::vector<std::string> knobs;
  for (double l : config.lambdas) knobs.push_back(knob_label(l));
  SweepFrame frame(config, data, "l2", knobs, existing);
  const ModelSpec spec = ModelSpec::for_dataset(data.dataset);
  return frame.run([&](std::size_t k, std::uint64_t seed, Cell& c) {
    auto model = make_model(spec, seed);
    TrainOptions options = config.train_options(data.dataset.task, seed);
    options.optim.weight_decay = static_cast<float>(config.lambdas[k]);
    const auto t0 = Clock::now();
    const TrainResult r = train(*model, data.dataset, data.split, options);
    c.train_s = seconds_since(t0);
    if (r.diverged) throw Error("diverged");
    c.acc = r.test_metric;
    if (config.timing) c.infer = measure_inference(*model, data.dataset, data.split, config.infer_repeats);
    const ModelState state = model->state();
    const auto ratio = size_ratio(state, state);
    c.payload = ratio.payload_bytes;
    c.total = ratio.total_bytes;
  });
}

std::vector<BenchRecord> run_quant_sweep(const BenchConfig& config, const LoadedData& data,
                                         const std::vector<BenchRecord>& existing) {
  std::vector<QuantConfig> configs;
  std::vector<std::string> knobs;
  for (const auto& label : config.quant_configs) {
    configs.push_back(quant_config_from_label(label));
    knobs.push_back(configs.back().label());
  }
  // Methods differ per row, so each knob carries its own method id.
  std::vector<BenchRecord> out;
  const ModelSpec spec = ModelSpec::for_dataset(data.dataset);
  for (std::size_t q = 0; q < configs.size(); ++q) {
    SweepFrame frame(config, data, to_string(configs[q].mode), {knobs[q]}, existing);
    auto rows = frame.run([&](std::size_t, std::uint64_t seed, Cell& c) {
      QuantConfig qc = configs[q];
      qc.seed = seed;
      QuantContext quant(qc);
      auto model = make_model(spec, seed);
      const TrainOptions options = config.train_options(data.dataset.task, seed);
      const auto t0 = Clock::now();
      const TrainResult r = qc.mode == QuantMode::A2Q ? a2q_train(*model, data.dataset, data.split, quant, options)
                                                      : qat_train(*model, data.dataset, data.split, quant, options);
      c.train_s = seconds_since(t0);
      if (r.diverged) throw Error("diverged");
      c.acc = r.test_metric;
      if (config.timing) c.infer = measure_inference(*model, data.dataset, data.split, config.infer_repeats, &quant);

      // Quantized weights count at their bit-width; everything else stays f32.
      const ModelState state = model->state();
      std::uint64_t dense_values = 0;
      for (const auto& [name, t] : state) {
        const auto n = static_cast<std::uint64_t>(t.numel());
        dense_values += 4 * n;
        const int bits = quant.site_bits(name);
        c.payload += bits < 32 ? (n * static_cast<std::uint64_t>(bits) + 7) / 8 : 4 * n;
      }
      c.total = serialize(dense_checkpoint(state)).size() - dense_values + c.payload;
      if (qc.mode == QuantMode::A2Q) c.bits = quant.bit_map();
    });
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

std::vector<BenchRecord> run_resumable(SweepKind kind, const BenchConfig& config, const LoadedData& data) {
  std::vector<BenchRecord> existing;
  if (!config.out.empty() && std::filesystem::exists(config.out) && config.out.extension() != ".md") {
    std::ifstream in(config.out);
    existing = read_csv(in);
  }
  std::vector<BenchRecord> records;
  switch (kind) {
    case SweepKind::Prune: records = run_prune_sweep(config, data, existing); break;
    case SweepKind::Reg: records = run_reg_sweep(config, data, existing); break;
    case SweepKind::Quant: records = run_quant_sweep(config, data, existing); break;
  }
  if (!config.out.empty()) emit(records, config.out);
  return records;
}

}  // namespace gnncomp
