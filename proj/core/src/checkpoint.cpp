#include "nlrcnn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "nlrcnn/error.hpp"

namespace nlrcnn {

namespace {

constexpr std::string_view kMagic = "NLRCNNCK";

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void doubles(std::span<const double> values) {
    size(values.size());
    for (const double v : values) f64(v);
  }
  void strings(const std::vector<std::string>& values) {
    size(values.size());
    for (const auto& s : values) text(s);
  }
  void matrix(const Matrix& m) {
    size(m.rows());
    size(m.cols());
    for (const double v : m.values()) f64(v);
  }
  void raw(std::string_view bytes) { out_.append(bytes); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(u8()) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(u8()) << (8 * b);
    return v;
  }
  std::size_t size() {
    const std::uint64_t v = u64();
    // Every counted item takes at least one byte.
    if (v > bytes_.size()) fail("implausible length");
    return static_cast<std::size_t>(v);
  }
  // A plain value, not an element count.
  std::size_t scalar() {
    const std::uint64_t v = u64();
    if (v > std::numeric_limits<std::size_t>::max()) fail("value out of range");
    return static_cast<std::size_t>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    const auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }
  std::string text() { return std::string(bytes(u32())); }
  std::vector<double> doubles() {
    const std::size_t n = size();
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<std::string> strings() {
    const std::size_t n = size();
    std::vector<std::string> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back(text());
    return v;
  }
  Matrix matrix() {
    const std::size_t rows = size();
    const std::size_t cols = size();
    if (cols != 0 && rows > bytes_.size() / cols) fail("implausible matrix shape");
    Matrix m(rows, cols);
    for (double& v : m.values()) v = f64();
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }
  void expect_done() {
    if (!done()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint " + context_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

void write_conv(Writer& w, const Conv2d& c) {
  w.size(c.in_channels);
  w.size(c.out_channels);
  w.size(c.kernel);
  w.doubles(c.weights);
  w.doubles(c.bias);
}

Conv2d read_conv(Reader& r) {
  Conv2d c;
  c.in_channels = r.scalar();
  c.out_channels = r.scalar();
  c.kernel = r.scalar();
  c.weights = r.doubles();
  c.bias = r.doubles();
  return c;
}

void write_config(Writer& w, const TrainConfig& c) {
  w.u8(static_cast<std::uint8_t>(c.model));
  w.size(c.rank);
  w.size(c.window);
  w.size(c.conv3_channels);
  w.size(c.conv2_channels);
  w.size(c.conv1_channels);
  w.f64(c.learning_rate);
  w.size(c.max_epochs);
  w.f64(c.tolerance);
  w.size(c.batch_size);
  w.f64(c.l2);
  w.u8(static_cast<std::uint8_t>(c.optimizer));
  w.u8(c.nonnegative ? 1 : 0);
  w.u64(c.seed);
  w.f64(c.split.train);
  w.f64(c.split.validation);
  w.f64(c.split.test);
  w.u64(c.split.seed);
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  const auto model = r.u8();
  if (model > 1) r.fail("unknown model kind");
  c.model = static_cast<ModelKind>(model);
  c.rank = r.scalar();
  c.window = r.scalar();
  c.conv3_channels = r.scalar();
  c.conv2_channels = r.scalar();
  c.conv1_channels = r.scalar();
  c.learning_rate = r.f64();
  c.max_epochs = r.scalar();
  c.tolerance = r.f64();
  c.batch_size = r.scalar();
  c.l2 = r.f64();
  const auto optimizer = r.u8();
  if (optimizer > 1) r.fail("unknown optimizer kind");
  c.optimizer = static_cast<OptimizerKind>(optimizer);
  const auto nonneg = r.u8();
  if (nonneg > 1) r.fail("bad nonnegative flag");
  c.nonnegative = nonneg == 1;
  c.seed = r.u64();
  c.split.train = r.f64();
  c.split.validation = r.f64();
  c.split.test = r.f64();
  c.split.seed = r.u64();
  return c;
}

}  // namespace

TraceSummary TraceSummary::from(const TrainTrace& trace) {
  TraceSummary s;
  s.epochs = trace.epochs();
  s.stop = trace.stop;
  s.best_epoch = trace.best_epoch;
  s.best_val_rmse = trace.best_val_rmse;
  s.initial_val_rmse = trace.initial_val_rmse;
  s.final_train_loss = trace.train_loss.empty() ? trace.initial_loss : trace.train_loss.back();
  return s;
}

NlrModel Checkpoint::nlr_model() const {
  if (!encoder || !net) throw DataError("checkpoint holds a " + std::string(to_string(model())) + " model");
  return {factors, *encoder, *net};
}

double Checkpoint::predict(std::size_t i, std::size_t j, std::size_t k) const {
  if (model() == ModelKind::cp) return cpd_predict(factors, i, j, k);
  return model_predict(NlrModel{factors, *encoder, *net}, i, j, k);
}

void Checkpoint::validate() const {
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const Dims d = dims();
  if (labels.stations.size() != d.stations || labels.parameters.size() != d.parameters ||
      labels.timestamps.size() != d.times) {
    throw DataError("checkpoint index maps do not match factor dims");
  }
  if (scaler.ranges().size() != d.parameters) throw DataError("checkpoint scaler does not match parameter count");
  if (factors.rank() != config.rank) throw DataError("checkpoint factor rank does not match config");
  try {
    factors.validate();
    if (model() == ModelKind::nlr_cnn) {
      if (!encoder || !net) throw DataError("nlr-cnn checkpoint lacks encoder or network sections");
      nlr_model().validate();
    } else if (encoder || net) {
      throw DataError("cp checkpoint carries network sections");
    }
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const NumericError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  checkpoint.validate();
  std::vector<std::pair<std::string, std::string>> sections;
  const auto add = [&](std::string name, const auto& fill) {
    Writer w;
    fill(w);
    sections.emplace_back(std::move(name), w.take());
  };
  const Dims d = checkpoint.dims();
  add("meta", [&](Writer& w) {
    w.u8(static_cast<std::uint8_t>(checkpoint.model()));
    w.size(d.stations);
    w.size(d.parameters);
    w.size(d.times);
  });
  add("labels", [&](Writer& w) {
    w.strings(checkpoint.labels.stations);
    w.strings(checkpoint.labels.parameters);
    w.strings(checkpoint.labels.timestamps);
  });
  add("scaler", [&](Writer& w) {
    w.size(checkpoint.scaler.ranges().size());
    for (const auto& r : checkpoint.scaler.ranges()) {
      w.f64(r.min);
      w.f64(r.max);
    }
  });
  add("config", [&](Writer& w) { write_config(w, checkpoint.config); });
  add("S", [&](Writer& w) { w.matrix(checkpoint.factors.stations); });
  add("U", [&](Writer& w) { w.matrix(checkpoint.factors.parameters); });
  add("V", [&](Writer& w) { w.matrix(checkpoint.factors.times); });
  if (checkpoint.model() == ModelKind::nlr_cnn) {
    add("encoder", [&](Writer& w) {
      w.matrix(checkpoint.encoder->weights);
      w.doubles(checkpoint.encoder->bias);
    });
    add("conv3", [&](Writer& w) { write_conv(w, checkpoint.net->conv3); });
    add("conv2", [&](Writer& w) { write_conv(w, checkpoint.net->conv2); });
    add("conv1", [&](Writer& w) { write_conv(w, checkpoint.net->conv1); });
    add("head", [&](Writer& w) {
      w.doubles(checkpoint.net->head_weights);
      w.f64(checkpoint.net->head_bias);
    });
  }
  add("trace", [&](Writer& w) {
    const TraceSummary& t = checkpoint.trace;
    w.size(t.epochs);
    w.u8(static_cast<std::uint8_t>(t.stop));
    w.size(t.best_epoch);
    w.f64(t.best_val_rmse);
    w.f64(t.initial_val_rmse);
    w.f64(t.final_train_loss);
  });

  Writer out;
  out.raw(kMagic);
  out.u32(checkpoint.version);
  out.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    out.text(name);
    out.size(payload.size());
    out.raw(payload);
  }
  return out.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader header(bytes, "header");
  if (bytes.size() < kMagic.size() || header.bytes(kMagic.size()) != kMagic) {
    header.fail("not a checkpoint file");
  }
  Checkpoint c;
  c.version = header.u32();
  if (c.version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = header.u32();
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t n = 0; n < count; ++n) {
    std::string name = header.text();
    const std::size_t length = header.size();
    const auto payload = header.bytes(length);
    if (!sections.emplace(name, payload).second) header.fail("duplicate section '" + name + "'");
  }
  header.expect_done();

  std::size_t used = 0;
  const auto section = [&](const std::string& name) {
    const auto it = sections.find(name);
    if (it == sections.end()) throw DataError("checkpoint: missing section '" + name + "'");
    ++used;
    return Reader(it->second, "section '" + name + "'");
  };

  Reader meta = section("meta");
  const auto kind = meta.u8();
  Dims dims;
  dims.stations = meta.scalar();
  dims.parameters = meta.scalar();
  dims.times = meta.scalar();
  meta.expect_done();

  Reader labels = section("labels");
  c.labels.stations = labels.strings();
  c.labels.parameters = labels.strings();
  c.labels.timestamps = labels.strings();
  labels.expect_done();

  Reader scaler = section("scaler");
  std::vector<ParameterRange> ranges(scaler.size());
  for (auto& r : ranges) {
    r.min = scaler.f64();
    r.max = scaler.f64();
  }
  scaler.expect_done();
  c.scaler = Scaler(std::move(ranges));

  Reader config = section("config");
  c.config = read_config(config);
  config.expect_done();
  if (static_cast<std::uint8_t>(c.config.model) != kind) throw DataError("checkpoint: model kind mismatch");

  for (auto [name, target] : {std::pair{"S", &c.factors.stations}, std::pair{"U", &c.factors.parameters},
                              std::pair{"V", &c.factors.times}}) {
    Reader r = section(name);
    *target = r.matrix();
    r.expect_done();
  }
  if (c.dims() != dims) throw DataError("checkpoint: factor shapes disagree with recorded dims");

  if (c.model() == ModelKind::nlr_cnn) {
    Reader enc = section("encoder");
    TemporalEncoder encoder;
    encoder.weights = enc.matrix();
    encoder.bias = enc.doubles();
    enc.expect_done();
    c.encoder = std::move(encoder);

    InteractionCNN net;
    for (auto [name, target] : {std::pair{"conv3", &net.conv3}, std::pair{"conv2", &net.conv2},
                                std::pair{"conv1", &net.conv1}}) {
      Reader r = section(name);
      *target = read_conv(r);
      r.expect_done();
    }
    Reader head = section("head");
    net.head_weights = head.doubles();
    net.head_bias = head.f64();
    head.expect_done();
    c.net = std::move(net);
  }

  Reader trace = section("trace");
  c.trace.epochs = trace.scalar();
  const auto stop = trace.u8();
  if (stop > 2) trace.fail("unknown stop reason");
  c.trace.stop = static_cast<StopReason>(stop);
  c.trace.best_epoch = trace.scalar();
  c.trace.best_val_rmse = trace.f64();
  c.trace.initial_val_rmse = trace.f64();
  c.trace.final_train_loss = trace.f64();
  trace.expect_done();

  if (used != sections.size()) throw DataError("checkpoint: unexpected sections");
  c.validate();
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace nlrcnn
