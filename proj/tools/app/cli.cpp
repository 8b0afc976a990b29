#include "nlrcnn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "nlrcnn/checkpoint.hpp"
#include "nlrcnn/config.hpp"
#include "nlrcnn/cp.hpp"
#include "nlrcnn/error.hpp"
#include "nlrcnn/metrics.hpp"
#include "nlrcnn/nlr.hpp"
#include "nlrcnn/synth.hpp"
#include "nlrcnn/tensor.hpp"
#include "nlrcnn/training.hpp"

namespace nlrcnn::cli {
namespace {

constexpr const char* kVersion = "0.1.0";

// Bad invocation that CLI11 cannot detect on its own.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

SplitSpec parse_split(const std::string& text) {
  SplitSpec spec;
  double* slots[] = {&spec.train, &spec.validation, &spec.test};
  std::istringstream in(text);
  std::string part;
  std::size_t n = 0;
  while (std::getline(in, part, ':')) {
    if (n == 3) throw UsageError("--split expects three ratios a:b:c, got '" + text + "'");
    try {
      std::size_t used = 0;
      *slots[n] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--split expects three ratios a:b:c, got '" + text + "'");
    }
    ++n;
  }
  if (n != 3) throw UsageError("--split expects three ratios a:b:c, got '" + text + "'");
  return spec;
}

std::string format_split(const SplitSpec& s) {
  return format_value(s.train) + ":" + format_value(s.validation) + ":" + format_value(s.test);
}

Dims parse_dims(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      sizes.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--dims expects I,J,K, got '" + text + "'");
    }
  }
  if (sizes.size() != 3) throw UsageError("--dims expects I,J,K, got '" + text + "'");
  return {sizes[0], sizes[1], sizes[2]};
}

// Normalized-scale predictions from a checkpoint's parameters.
class Predictor {
 public:
  explicit Predictor(const Checkpoint& c) : factors_(c.factors) {
    if (c.model() == ModelKind::nlr_cnn) nlr_ = c.nlr_model();
  }

  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return nlr_ ? model_predict(*nlr_, i, j, k) : cpd_predict(factors_, i, j, k);
  }

 private:
  FactorModel factors_;
  std::optional<NlrModel> nlr_;
};

void require_compatible(const Labels& checkpoint, const Labels& data) {
  const auto compare = [](const std::vector<std::string>& want, const std::vector<std::string>& got,
                          const char* dimension) {
    if (want == got) return;
    std::ostringstream msg;
    msg << "dataset is incompatible with the checkpoint: " << dimension << " set differs (checkpoint has "
        << want.size() << ", dataset has " << got.size() << ")";
    const std::size_t n = std::min(want.size(), got.size());
    for (std::size_t p = 0; p < n; ++p) {
      if (want[p] != got[p]) {
        msg << "; first difference at index " << p << ": '" << want[p] << "' vs '" << got[p] << "'";
        break;
      }
    }
    throw DataError(msg.str());
  };
  compare(checkpoint.stations, data.stations, "station");
  compare(checkpoint.parameters, data.parameters, "parameter");
  compare(checkpoint.timestamps, data.timestamps, "timestamp");
}

std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path);
  if (!file) throw DataError("cannot write " + path);
  return file;
}

std::vector<Prediction> predict_all(const Predictor& predict, std::span<const Entry> entries) {
  std::vector<Prediction> out;
  out.reserve(entries.size());
  for (const Entry& e : entries) out.push_back({e, predict(e.i, e.j, e.k)});
  return out;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string input;
  std::string out;
  std::string trace;
  std::string config;
  std::string model = "nlr-cnn";
  std::optional<std::size_t> rank, window, conv3, conv2, conv1, epochs, batch;
  std::optional<double> lr, tol, lambda;
  std::optional<std::string> optimizer, split;
  std::optional<bool> nonneg;
  std::uint64_t seed = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--input", a.input, "Observations CSV (station_id,parameter,timestamp,value)");
  app.add_option("--out", a.out, "Checkpoint path");
  app.add_option("--trace", a.trace, "Trace CSV path (default: checkpoint path with .trace.csv)");
  app.add_option("--config", a.config, "key=value file; command-line flags take precedence");
  app.add_option("--model", a.model, "cp or nlr-cnn")->capture_default_str();
  app.add_option("--rank", a.rank, "CP rank R");
  app.add_option("--window", a.window, "Temporal encoder taps");
  app.add_option("--conv3", a.conv3, "Channels of the 3x3 input convolution");
  app.add_option("--conv2", a.conv2, "Channels of the 3x3 convolution after pooling");
  app.add_option("--conv1", a.conv1, "Channels of the final 2x2 convolution");
  app.add_option("--lr", a.lr, "Learning rate");
  app.add_option("--epochs", a.epochs, "Epoch cap");
  app.add_option("--tol", a.tol, "Early-stop tolerance on validation RMSE");
  app.add_option("--batch", a.batch, "Minibatch size");
  app.add_option("--lambda", a.lambda, "L2 weight");
  app.add_option("--optimizer", a.optimizer, "adam or sgd");
  app.add_flag("--nonneg", a.nonneg, "Project CP factors onto the nonnegative orthant");
  app.add_option("--split", a.split, "train:validation:test ratios");
  app.add_option("--seed", a.seed, "Seed for the split, initialisation and shuffling")->capture_default_str();
}

TrainConfig build_config(const TrainArgs& a) {
  TrainConfig c = TrainConfig::defaults_for(parse_model_kind(a.model));
  if (a.rank) c.rank = *a.rank;
  if (a.window) c.window = *a.window;
  if (a.conv3) c.conv3_channels = *a.conv3;
  if (a.conv2) c.conv2_channels = *a.conv2;
  if (a.conv1) c.conv1_channels = *a.conv1;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.epochs) c.max_epochs = *a.epochs;
  if (a.tol) c.tolerance = *a.tol;
  if (a.batch) c.batch_size = *a.batch;
  if (a.lambda) c.l2 = *a.lambda;
  if (a.optimizer) c.optimizer = parse_optimizer_kind(*a.optimizer);
  if (a.nonneg) c.nonnegative = *a.nonneg;
  if (a.split) c.split = parse_split(*a.split);
  c.seed = a.seed;
  c.split.seed = a.seed;
  c.validate();
  return c;
}

std::string default_trace_path(const std::string& checkpoint) {
  std::filesystem::path p(checkpoint);
  p.replace_extension(".trace.csv");
  return p.string();
}

void write_trace(const TrainTrace& trace, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw DataError("cannot write " + path);
  trace.write_csv(file);
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig config = build_config(a);
  if (a.input.empty()) throw UsageError("train: --input is required");
  if (a.out.empty()) throw UsageError("train: --out is required");
  const std::string trace_path = a.trace.empty() ? default_trace_path(a.out) : a.trace;

  const SparseTensor raw = ingest_csv(a.input);
  const Partition partition = split(raw, config.split);
  Normalized norm = normalize(raw, partition);
  for (const auto& w : norm.warnings) err << "warning: " << w << '\n';
  const auto train = gather(norm.tensor, partition.train);
  const auto validation = gather(norm.tensor, partition.validation);
  if (train.empty() || validation.empty()) {
    throw DataError("split left an empty training or validation partition (" +
                    std::to_string(raw.size()) + " observed entries)");
  }

  Checkpoint c;
  c.labels = raw.labels();
  c.scaler = norm.scaler;
  c.config = config;
  TrainTrace trace;
  try {
    if (config.model == ModelKind::cp) {
      CpResult r = cp_train(train, validation, raw.dims(), config);
      c.factors = std::move(r.model);
      trace = std::move(r.trace);
    } else {
      NlrResult r = train_nlr(train, validation, raw.dims(), config);
      c.factors = std::move(r.model.factors);
      c.encoder = std::move(r.model.encoder);
      c.net = std::move(r.model.net);
      trace = std::move(r.trace);
    }
  } catch (const DivergenceError& e) {
    write_trace(e.trace(), trace_path);
    err << "trace of the diverged run written to " << trace_path << '\n';
    throw;
  }
  c.trace = TraceSummary::from(trace);
  save_checkpoint(c, a.out);
  write_trace(trace, trace_path);

  const EvalReport report = score(predict_all(Predictor(c), validation), std::string(to_string(config.model)));
  out << "validation report\n"
      << report.text_block() << "epochs:  " << trace.epochs() << " (stopped: " << to_string(trace.stop)
      << ", best epoch " << trace.best_epoch << ")\n"
      << "split:   " << format_split(config.split) << " seed " << config.split.seed << " -> "
      << partition.train.size() << '/' << partition.validation.size() << '/' << partition.test.size() << '\n'
      << "checkpoint written to " << a.out << '\n'
      << "trace written to " << trace_path << '\n';
  return kSuccess;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  bool raw = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Checkpoint c = load_checkpoint(a.checkpoint);
  const SparseTensor data = ingest_csv(a.input);
  require_compatible(c.labels, data.labels());

  const Partition partition = split(data, c.config.split);
  const SparseTensor normalized = apply_scaler(data, c.scaler);
  const Predictor predict(c);
  const std::string model(to_string(c.model()));

  std::vector<Prediction> preds;
  preds.reserve(partition.test.size());
  for (const std::size_t p : partition.test) {
    Entry e = a.raw ? data.entries()[p] : normalized.entries()[p];
    double z = predict(e.i, e.j, e.k);
    if (a.raw) z = c.scaler.denormalize(e.j, z);
    preds.push_back({e, z});
  }
  const EvalReport report = score(preds, model, a.raw ? "raw" : "normalized");
  out << "test report\n"
      << report.text_block() << "test partition: " << partition.test.size() << " of " << data.size()
      << " observed entries (split " << format_split(c.config.split) << ", seed " << c.config.split.seed
      << ")\n";
  if (!a.out.empty()) {
    std::ofstream file(a.out);
    if (!file) throw DataError("cannot write " + a.out);
    file << EvalReport::csv_header() << '\n' << report.csv_record() << '\n';
    out << "report written to " << a.out << '\n';
  }
  return kSuccess;
}

// ---- impute --------------------------------------------------------------

struct ImputeArgs {
  std::string checkpoint;
  std::string query;
  std::string input;
  std::string out;
  bool all_missing = false;
  bool skip_unknown = false;
};

class LabelIndex {
 public:
  explicit LabelIndex(const Labels& labels) {
    for (std::size_t n = 0; n < labels.stations.size(); ++n) stations_.emplace(labels.stations[n], n);
    for (std::size_t n = 0; n < labels.parameters.size(); ++n) parameters_.emplace(labels.parameters[n], n);
    for (std::size_t n = 0; n < labels.timestamps.size(); ++n) {
      stamps_.emplace(labels.timestamps[n], n);
      if (const auto t = parse_timestamp(labels.timestamps[n])) instants_.emplace(*t, n);
    }
  }

  std::optional<std::size_t> station(const std::string& id) const { return find(stations_, id); }
  std::optional<std::size_t> parameter(const std::string& name) const { return find(parameters_, name); }
  // Exact label first, then any spelling of the same instant.
  std::optional<std::size_t> time(const std::string& stamp) const {
    if (auto k = find(stamps_, stamp)) return k;
    const auto t = parse_timestamp(stamp);
    if (!t) return std::nullopt;
    const auto it = instants_.find(*t);
    if (it == instants_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static std::optional<std::size_t> find(const std::unordered_map<std::string, std::size_t>& m,
                                         const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  std::unordered_map<std::string, std::size_t> stations_, parameters_, stamps_;
  std::map<Instant, std::size_t> instants_;
};

std::vector<Index3> read_query(const std::string& path, const LabelIndex& index,
                               std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Index3> cells;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    std::vector<std::string> f;
    try {
      f = parse_csv_record(line);
    } catch (const DataError& e) {
      errors.push_back(where + e.what());
      continue;
    }
    if (!header) {
      const bool three = f.size() == 3;
      if ((f.size() != 3 && f.size() != 4) || f[0] != "station_id" || f[1] != "parameter" ||
          f[2] != "timestamp" || (!three && f[3] != "value")) {
        throw DataError(where + "expected header 'station_id,parameter,timestamp[,value]'");
      }
      header = true;
      continue;
    }
    if (f.size() != 3 && f.size() != 4) {
      errors.push_back(where + "expected 3 or 4 columns, got " + std::to_string(f.size()));
      continue;
    }
    const auto i = index.station(f[0]);
    const auto j = index.parameter(f[1]);
    const auto k = index.time(f[2]);
    std::string problems;
    const auto note = [&](const std::string& msg) { problems += (problems.empty() ? "" : "; ") + msg; };
    if (!i) note("unknown station '" + f[0] + "'");
    if (!j) note("unknown parameter '" + f[1] + "'");
    if (!k) note("unknown timestamp '" + f[2] + "'");
    if (!problems.empty()) {
      errors.push_back(where + problems);
      continue;
    }
    cells.push_back({*i, *j, *k});
  }
  if (!header) throw DataError(path + ": empty query file");
  return cells;
}

int cmd_impute(const ImputeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.all_missing == !a.query.empty()) throw UsageError("impute: give exactly one of --query or --all-missing");
  if (a.all_missing && a.input.empty()) throw UsageError("impute: --all-missing needs --input");

  const Checkpoint c = load_checkpoint(a.checkpoint);
  std::vector<Index3> cells;
  std::vector<std::string> errors;
  if (a.all_missing) {
    const SparseTensor data = ingest_csv(a.input);
    require_compatible(c.labels, data.labels());
    cells = data.unknown();
  } else {
    cells = read_query(a.query, LabelIndex(c.labels), errors);
  }
  for (const auto& e : errors) err << (a.skip_unknown ? "skipped " : "error: ") << e << '\n';
  if (!errors.empty() && !a.skip_unknown) {
    err << errors.size() << " query row(s) rejected; pass --skip-unknown to impute the rest\n";
    return kFailure;
  }

  const Predictor predict(c);
  std::ofstream file;
  std::ostream& sink = open_output(a.out, file, out);
  sink << "station_id,parameter,timestamp,value\n";
  for (const Index3& x : cells) {
    const double value = c.scaler.denormalize(x.j, predict(x.i, x.j, x.k));
    sink << csv_field(c.labels.stations[x.i]) << ',' << csv_field(c.labels.parameters[x.j]) << ','
         << csv_field(c.labels.timestamps[x.k]) << ',' << format_value(value) << '\n';
  }
  if (&sink == &file) out << cells.size() << " predictions written to " << a.out << '\n';
  return kSuccess;
}

// ---- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
  std::string model = "nlr-cnn";
  GradcheckOptions options;
  std::optional<std::size_t> rank;
  std::string corrupt;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const ModelKind kind = parse_model_kind(a.model);
  GradcheckReport report;
  if (kind == ModelKind::cp) {
    if (!a.corrupt.empty()) throw UsageError("gradcheck: --corrupt applies to nlr-cnn only");
    const GradcheckOptions& o = a.options;
    report = cp_gradcheck(o.dims, a.rank.value_or(4), o.entries, o.l2, o.seed, o.step, o.threshold);
  } else {
    GradcheckOptions o = a.options;
    if (a.rank) o.rank = *a.rank;
    if (!a.corrupt.empty()) o.corrupt = a.corrupt;
    report = gradcheck(o);
  }
  for (const auto& g : report.groups) {
    out << "  " << std::left << std::setw(16) << g.name << std::scientific << std::setprecision(3)
        << g.max_relative_error << std::defaultfloat << "  checked " << g.checked << (g.passed ? "" : "  FAIL")
        << '\n';
  }
  std::ostringstream max;
  max << std::scientific << std::setprecision(3) << report.max_relative_error();
  if (report.passed) {
    out << "PASS max relative error " << max.str() << '\n';
    return kSuccess;
  }
  out << "FAIL";
  for (const auto& layer : report.failed_layers()) out << ' ' << layer;
  out << " (max relative error " << max.str() << ")\n";
  return kFailure;
}

// ---- inspect -------------------------------------------------------------

// TrainConfig as config-file lines, so the output can be fed back via --config.
void write_config(const TrainConfig& c, std::ostream& out) {
  out << "model=" << to_string(c.model) << '\n'
      << "rank=" << c.rank << '\n'
      << "window=" << c.window << '\n'
      << "conv3=" << c.conv3_channels << '\n'
      << "conv2=" << c.conv2_channels << '\n'
      << "conv1=" << c.conv1_channels << '\n'
      << "lr=" << format_value(c.learning_rate) << '\n'
      << "epochs=" << c.max_epochs << '\n'
      << "tol=" << format_value(c.tolerance) << '\n'
      << "batch=" << c.batch_size << '\n'
      << "lambda=" << format_value(c.l2) << '\n'
      << "optimizer=" << to_string(c.optimizer) << '\n'
      << "nonneg=" << (c.nonnegative ? "true" : "false") << '\n'
      << "split=" << format_split(c.split) << '\n'
      << "seed=" << c.seed << '\n';
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const Checkpoint c = load_checkpoint(path);
  const Dims d = c.dims();
  const TraceSummary& t = c.trace;
  out << "# checkpoint format " << c.version << ", tensor " << d.stations << " x " << d.parameters << " x "
      << d.times << '\n'
      << "# trained " << t.epochs << " epochs (stopped: " << to_string(t.stop) << "), best epoch "
      << t.best_epoch << ", validation RMSE " << format_value(t.initial_val_rmse) << " -> "
      << format_value(t.best_val_rmse) << '\n';
  write_config(c.config, out);
  return kSuccess;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::string dims = "20,10,30";
  std::string out;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("synth: --out is required");
  a.spec.dims = parse_dims(a.dims);
  const SynthData d = synth_generate(a.spec);
  export_csv(d.tensor, a.out);
  out << d.tensor.size() << " of " << a.spec.dims.volume() << " cells written to " << a.out << '\n';
  return kSuccess;
}

// Splices a --config file's settings in front of the remaining train flags so
// that explicit flags, parsed later, win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& train) {
  const auto sub = std::find(args.begin(), args.end(), "train");
  if (sub == args.end()) return args;
  std::optional<std::string> path;
  for (auto it = sub + 1; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
    if (it->rfind("--config=", 0) == 0) path = it->substr(9);
  }
  if (!path) return args;
  const std::vector<std::string> injected = config_arguments(*path);
  for (const auto& arg : injected) {
    const std::string key = arg.substr(0, arg.find('='));
    if (key == "--config" || train.get_option_no_throw(key) == nullptr) {
      throw UsageError(*path + ": unknown key '" + key.substr(2) + "'");
    }
  }
  std::vector<std::string> expanded(args.begin(), sub + 1);
  expanded.insert(expanded.end(), injected.begin(), injected.end());
  expanded.insert(expanded.end(), sub + 1, args.end());
  return expanded;
}

}  // namespace

std::vector<std::string> config_arguments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(text.substr(0, eq));
    if (key.empty()) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    args.push_back("--" + key + "=" + trim(text.substr(eq + 1)));
  }
  return args;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse water-quality tensor imputation with CP and NLR-CNN models", "nlrcnn"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Fit a model and write a checkpoint and trace");
  add_train(*train, train_args);

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test partition of a dataset");
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")->required();
  evaluate->add_option("--input", eval_args.input, "Dataset CSV the checkpoint was trained on")->required();
  evaluate->add_option("--out", eval_args.out, "Also write the report as CSV");
  evaluate->add_flag("--raw", eval_args.raw, "Score on the raw measurement scale");

  ImputeArgs impute_args;
  CLI::App* impute = app.add_subcommand("impute", "Predict values for queried or all unobserved cells");
  impute->add_option("--checkpoint", impute_args.checkpoint, "Checkpoint path")->required();
  impute->add_option("--query", impute_args.query, "CSV of station_id,parameter,timestamp rows");
  impute->add_flag("--all-missing", impute_args.all_missing, "Predict every unobserved cell of --input");
  impute->add_option("--input", impute_args.input, "Dataset CSV for --all-missing");
  impute->add_option("--out", impute_args.out, "Output CSV (default: stdout)");
  impute->add_flag("--skip-unknown", impute_args.skip_unknown, "Skip rows with unknown identifiers");

  GradcheckArgs grad_args;
  GradcheckOptions& g = grad_args.options;
  CLI::App* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad->add_option("--model", grad_args.model, "cp or nlr-cnn")->capture_default_str();
  grad->add_option("--rank", grad_args.rank, "Rank (default 10 for nlr-cnn, 4 for cp)");
  grad->add_option("--window", g.window, "Temporal encoder taps")->capture_default_str();
  grad->add_option("--conv3", g.conv3_channels)->capture_default_str();
  grad->add_option("--conv2", g.conv2_channels)->capture_default_str();
  grad->add_option("--conv1", g.conv1_channels)->capture_default_str();
  grad->add_option("--entries", g.entries, "Observed entries in the random instance")->capture_default_str();
  grad->add_option("--step", g.step, "Central-difference step")->capture_default_str();
  grad->add_option("--threshold", g.threshold, "Maximum relative error")->capture_default_str();
  grad->add_option("--seed", g.seed)->capture_default_str();
  grad->add_option("--corrupt", grad_args.corrupt, "Transpose this layer's analytic gradient (self-test)");

  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect", "Print a checkpoint's training configuration");
  inspect->add_option("checkpoint", inspect_path, "Checkpoint path")->required();

  SynthArgs synth_args;
  SynthSpec& s = synth_args.spec;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic low-rank dataset CSV");
  synth->add_option("--out", synth_args.out, "CSV path");
  synth->add_option("--dims", synth_args.dims, "Stations,parameters,times")->capture_default_str();
  synth->add_option("--rank", s.rank, "Rank of the ground truth")->capture_default_str();
  synth->add_option("--fraction", s.observed_fraction, "Observed fraction of cells")->capture_default_str();
  synth->add_option("--noise", s.noise, "Gaussian noise standard deviation")->capture_default_str();
  synth->add_flag("--nonlinear", s.nonlinear, "Sigmoid of temporally smoothed CP truth");
  synth->add_option("--seed", s.seed)->capture_default_str();

  try {
    std::vector<std::string> argv = expand_config(args, *train);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_args, out, err);
    if (*evaluate) return cmd_evaluate(eval_args, out);
    if (*impute) return cmd_impute(impute_args, out, err);
    if (*grad) return cmd_gradcheck(grad_args, out);
    if (*inspect) return cmd_inspect(inspect_path, out);
    if (*synth) return cmd_synth(synth_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kFailure;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace nlrcnn::cli
