#include "nlrcnn/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nlrcnn/error.hpp"
#include "nlrcnn/random.hpp"

namespace nlrcnn {

namespace {

constexpr std::string_view kHeader = "station_id,parameter,timestamp,value";

std::string describe(const Index3& index) {
  std::ostringstream out;
  out << "(" << index.i << "," << index.j << "," << index.k << ")";
  return out.str();
}

// Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool done() const { return pos_ == text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }
  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  std::optional<unsigned> digits(std::size_t count) {
    if (pos_ + count > text_.size()) return std::nullopt;
    unsigned value = 0;
    for (std::size_t n = 0; n < count; ++n) {
      const char c = text_[pos_ + n];
      if (c < '0' || c > '9') return std::nullopt;
      value = value * 10 + static_cast<unsigned>(c - '0');
    }
    pos_ += count;
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_fields(std::string_view line, bool& ok) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  ok = true;
  for (std::size_t p = 0; p < line.size(); ++p) {
    const char c = line[p];
    if (quoted) {
      if (c == '"') {
        if (p + 1 < line.size() && line[p + 1] == '"') {
          current.push_back('"');
          ++p;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(c);
    }
  }
  if (quoted) ok = false;
  fields.push_back(std::move(current));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string quote_if_needed(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos && trim(field) == field) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

SparseTensor::SparseTensor(Dims dims, std::vector<Entry> entries, Labels labels)
    : dims_(dims), entries_(std::move(entries)), labels_(std::move(labels)) {
  if (labels_.stations.size() != dims_.stations || labels_.parameters.size() != dims_.parameters ||
      labels_.timestamps.size() != dims_.times) {
    throw DataError("label counts do not match tensor dims");
  }
  for (const Entry& e : entries_) {
    if (!dims_.contains(e.i, e.j, e.k)) {
      throw DataError("entry " + describe(e.index()) + " outside tensor dims");
    }
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.index() < b.index(); });
  const auto dup = std::adjacent_find(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.index() == b.index();
  });
  if (dup != entries_.end()) {
    throw DataError("duplicate entry " + describe(dup->index()));
  }
  build_lookup();
}

void SparseTensor::build_lookup() {
  const auto fill = [](auto& lookup, const std::vector<std::string>& names, const char* what) {
    lookup.reserve(names.size());
    for (std::size_t n = 0; n < names.size(); ++n) {
      if (!lookup.emplace(names[n], n).second) {
        throw DataError(std::string("duplicate ") + what + " label '" + names[n] + "'");
      }
    }
  };
  fill(station_lookup_, labels_.stations, "station");
  fill(parameter_lookup_, labels_.parameters, "parameter");
  fill(time_lookup_, labels_.timestamps, "timestamp");
}

namespace {
std::optional<std::size_t> lookup(const std::unordered_map<std::string, std::size_t>& map,
                                  std::string_view key) {
  const auto it = map.find(std::string(key));
  if (it == map.end()) return std::nullopt;
  return it->second;
}
}  // namespace

std::optional<std::size_t> SparseTensor::find_station(std::string_view id) const {
  return lookup(station_lookup_, id);
}
std::optional<std::size_t> SparseTensor::find_parameter(std::string_view name) const {
  return lookup(parameter_lookup_, name);
}
std::optional<std::size_t> SparseTensor::find_timestamp(std::string_view stamp) const {
  return lookup(time_lookup_, stamp);
}

bool SparseTensor::observed(const Index3& index) const {
  return std::binary_search(entries_.begin(), entries_.end(), Entry{index.i, index.j, index.k, 0.0},
                            [](const Entry& a, const Entry& b) { return a.index() < b.index(); });
}

std::vector<Index3> SparseTensor::unknown() const {
  std::vector<Index3> out;
  out.reserve(dims_.volume() - entries_.size());
  auto next = entries_.begin();
  for (std::size_t i = 0; i < dims_.stations; ++i) {
    for (std::size_t j = 0; j < dims_.parameters; ++j) {
      for (std::size_t k = 0; k < dims_.times; ++k) {
        const Index3 index{i, j, k};
        if (next != entries_.end() && next->index() == index) {
          ++next;
        } else {
          out.push_back(index);
        }
      }
    }
  }
  return out;
}

SparseTensor SparseTensor::with_values(std::span<const double> values) const {
  if (values.size() != entries_.size()) throw DataError("value count does not match entry count");
  SparseTensor copy = *this;
  for (std::size_t n = 0; n < values.size(); ++n) copy.entries_[n].value = values[n];
  return copy;
}

std::optional<Instant> parse_timestamp(std::string_view text) {
  Cursor c(trim(text));
  const auto year = c.digits(4);
  if (!year || !c.accept('-')) return std::nullopt;
  const auto month = c.digits(2);
  if (!month || !c.accept('-')) return std::nullopt;
  const auto day = c.digits(2);
  if (!day || *month < 1 || *month > 12 || *day < 1 || *day > days_in_month(*year, *month)) {
    return std::nullopt;
  }
  std::int64_t seconds = days_from_civil(*year, *month, *day) * 86400;
  std::int64_t nanos = 0;
  if (c.done()) return Instant{seconds, 0};

  if (!c.accept('T') && !c.accept(' ')) return std::nullopt;
  const auto hour = c.digits(2);
  if (!hour || *hour > 23 || !c.accept(':')) return std::nullopt;
  const auto minute = c.digits(2);
  if (!minute || *minute > 59) return std::nullopt;
  unsigned second = 0;
  if (c.accept(':')) {
    const auto s = c.digits(2);
    if (!s || *s > 59) return std::nullopt;
    second = *s;
    if (c.accept('.') || c.accept(',')) {
      std::int64_t scale = 100'000'000;
      bool any = false;
      while (c.peek() >= '0' && c.peek() <= '9') {
        const auto d = c.digits(1);
        nanos += static_cast<std::int64_t>(*d) * scale;
        scale /= 10;
        any = true;
      }
      if (!any) return std::nullopt;
    }
  }
  seconds += *hour * 3600 + *minute * 60 + second;
  if (c.accept('Z')) {
    // UTC
  } else if (c.peek() == '+' || c.peek() == '-') {
    const int sign = c.peek() == '+' ? 1 : -1;
    c.accept(c.peek());
    const auto oh = c.digits(2);
    if (!oh || *oh > 23) return std::nullopt;
    c.accept(':');
    const auto om = c.digits(2);
    if (!om || *om > 59) return std::nullopt;
    seconds -= sign * static_cast<std::int64_t>(*oh * 3600 + *om * 60);
  }
  if (!c.done()) return std::nullopt;
  return Instant{seconds, nanos};
}

SparseTensor read_csv(std::istream& in, std::string_view source) {
  const std::string where(source);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  struct Raw {
    std::size_t station;
    std::size_t parameter;
    std::size_t stamp;  // position in first-seen timestamp list
    double value;
    std::size_t line;
  };
  std::vector<Raw> rows;
  std::vector<std::string> stations;
  std::vector<std::string> parameters;
  std::vector<std::string> stamps;
  std::vector<Instant> instants;
  std::unordered_map<std::string, std::size_t> station_ids;
  std::unordered_map<std::string, std::size_t> parameter_ids;
  std::unordered_map<std::string, std::size_t> stamp_ids;
  std::map<Instant, std::size_t> instant_ids;

  const auto intern = [](auto& ids, std::vector<std::string>& names, std::string_view key) {
    const auto [it, inserted] = ids.emplace(std::string(key), names.size());
    if (inserted) names.emplace_back(key);
    return it->second;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    bool ok = true;
    auto fields = split_fields(view, ok);
    if (!have_header) {
      std::string joined;
      for (std::size_t n = 0; n < fields.size(); ++n) {
        if (n) joined += ',';
        joined += trim(fields[n]);
      }
      if (!ok || joined != kHeader) {
        throw DataError(where + ":" + std::to_string(line_no) + ": expected header '" +
                        std::string(kHeader) + "'");
      }
      have_header = true;
      continue;
    }
    if (!ok || fields.size() != 4) {
      throw DataError(where + ":" + std::to_string(line_no) + ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    }
    const std::string_view station = trim(fields[0]);
    const std::string_view parameter = trim(fields[1]);
    const std::string_view stamp = trim(fields[2]);
    if (station.empty() || parameter.empty()) {
      throw DataError(where + ":" + std::to_string(line_no) + ": empty station or parameter");
    }
    const auto instant = parse_timestamp(stamp);
    if (!instant) {
      throw DataError(where + ":" + std::to_string(line_no) + ": unparseable timestamp '" +
                      std::string(stamp) + "'");
    }
    const auto value = parse_double(fields[3]);
    if (!value) {
      throw DataError(where + ":" + std::to_string(line_no) + ": unparseable value '" +
                      std::string(trim(fields[3])) + "'");
    }
    const std::size_t stamp_id = intern(stamp_ids, stamps, stamp);
    if (stamp_id == instants.size()) {
      const auto [it, inserted] = instant_ids.emplace(*instant, stamp_id);
      if (!inserted) {
        throw DataError(where + ":" + std::to_string(line_no) + ": timestamp '" + std::string(stamp) +
                        "' denotes the same instant as '" + stamps[it->second] + "'");
      }
      instants.push_back(*instant);
    }
    rows.push_back({intern(station_ids, stations, station), intern(parameter_ids, parameters, parameter),
                    stamp_id, *value, line_no});
  }
  if (rows.empty()) throw DataError(where + ": no records");

  // Chronological time index.
  std::vector<std::size_t> time_of_stamp(stamps.size());
  Labels labels{std::move(stations), std::move(parameters), {}};
  labels.timestamps.reserve(stamps.size());
  for (const auto& [instant, stamp_id] : instant_ids) {
    time_of_stamp[stamp_id] = labels.timestamps.size();
    labels.timestamps.push_back(stamps[stamp_id]);
  }

  std::map<Index3, std::size_t> seen;
  std::vector<Entry> entries;
  entries.reserve(rows.size());
  for (const Raw& r : rows) {
    const Index3 index{r.station, r.parameter, time_of_stamp[r.stamp]};
    const auto [it, inserted] = seen.emplace(index, r.line);
    if (!inserted) {
      throw DataError(where + ":" + std::to_string(r.line) + ": duplicate key (" +
                      labels.stations[index.i] + ", " + labels.parameters[index.j] + ", " +
                      labels.timestamps[index.k] + ") first seen on line " + std::to_string(it->second));
    }
    entries.push_back({index.i, index.j, index.k, r.value});
  }
  const Dims dims{labels.stations.size(), labels.parameters.size(), labels.timestamps.size()};
  return SparseTensor(dims, std::move(entries), std::move(labels));
}

SparseTensor ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, path.string());
}

std::vector<std::string> parse_csv_record(std::string_view line) {
  bool ok = true;
  auto fields = split_fields(trim(line), ok);
  if (!ok) throw DataError("unterminated quote in CSV record");
  for (auto& f : fields) f = std::string(trim(f));
  return fields;
}

std::string csv_field(const std::string& field) { return quote_if_needed(field); }

std::string format_value(double value) {
  char buffer[32];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

void write_csv(const SparseTensor& tensor, std::ostream& out) {
  const Labels& labels = tensor.labels();
  out << kHeader << '\n';
  for (const Entry& e : tensor.entries()) {
    out << quote_if_needed(labels.stations[e.i]) << ',' << quote_if_needed(labels.parameters[e.j]) << ','
        << quote_if_needed(labels.timestamps[e.k]) << ',' << format_value(e.value) << '\n';
  }
}

void export_csv(const SparseTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(tensor, out);
}

Scaler::Scaler(std::vector<ParameterRange> ranges) : ranges_(std::move(ranges)) {
  for (const auto& r : ranges_) {
    if (!(r.max >= r.min)) throw DataError("scaler range with max < min");
  }
}

double Scaler::normalize(std::size_t parameter, double value) const {
  const ParameterRange& r = ranges_.at(parameter);
  if (r.degenerate()) return 0.5;
  return std::clamp((value - r.min) / (r.max - r.min), 0.0, 1.0);
}

double Scaler::denormalize(std::size_t parameter, double value) const {
  const ParameterRange& r = ranges_.at(parameter);
  if (r.degenerate()) return r.min;
  return r.min + value * (r.max - r.min);
}

Partition split(const SparseTensor& tensor, const SplitSpec& spec) {
  const double ratios[3] = {spec.train, spec.validation, spec.test};
  for (const double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ConfigError("split ratios must all be positive");
    }
  }
  const std::size_t n = tensor.size();
  if (n < 10) throw DataError("split needs at least 10 entries, got " + std::to_string(n));

  const double total = ratios[0] + ratios[1] + ratios[2];
  std::size_t sizes[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = static_cast<double>(n) * ratios[p] / total;
    sizes[p] = static_cast<std::size_t>(std::floor(exact));
    remainders[p] = exact - static_cast<double>(sizes[p]);
    assigned += sizes[p];
  }
  // Largest remainder; ties go to the earlier partition.
  while (assigned < n) {
    int best = 0;
    for (int p = 1; p < 3; ++p) {
      if (remainders[p] > remainders[best]) best = p;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  Partition part;
  const auto take = [&](std::vector<std::size_t>& dst, std::size_t from, std::size_t count) {
    dst.assign(order.begin() + static_cast<std::ptrdiff_t>(from),
               order.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(dst.begin(), dst.end());
  };
  take(part.train, 0, sizes[0]);
  take(part.validation, sizes[0], sizes[1]);
  take(part.test, sizes[0] + sizes[1], sizes[2]);
  return part;
}

Scaler fit_scaler(const SparseTensor& tensor, std::span<const std::size_t> train,
                  std::vector<std::string>* warnings) {
  const std::size_t count = tensor.dims().parameters;
  std::vector<ParameterRange> ranges(count);
  std::vector<bool> seen(count, false);
  const auto entries = tensor.entries();
  for (const std::size_t pos : train) {
    const Entry& e = entries[pos];
    if (!seen[e.j]) {
      ranges[e.j] = {e.value, e.value};
      seen[e.j] = true;
    } else {
      ranges[e.j].min = std::min(ranges[e.j].min, e.value);
      ranges[e.j].max = std::max(ranges[e.j].max, e.value);
    }
  }
  for (std::size_t j = 0; j < count; ++j) {
    if (seen[j] && ranges[j].degenerate() && warnings) {
      warnings->push_back("parameter '" + tensor.labels().parameters[j] +
                          "' has a constant training range; its values map to 0.5");
    }
  }
  return Scaler(std::move(ranges));
}

SparseTensor apply_scaler(const SparseTensor& tensor, const Scaler& scaler) {
  std::vector<double> values;
  values.reserve(tensor.size());
  for (const Entry& e : tensor.entries()) values.push_back(scaler.normalize(e.j, e.value));
  return tensor.with_values(values);
}

Normalized normalize(const SparseTensor& tensor, const Partition& partition) {
  if (partition.train.empty()) throw DataError("training partition is empty");
  std::vector<bool> trained(tensor.dims().parameters, false);
  const auto entries = tensor.entries();
  for (const std::size_t pos : partition.train) trained[entries[pos].j] = true;
  for (const auto* held_out : {&partition.validation, &partition.test}) {
    for (const std::size_t pos : *held_out) {
      if (!trained[entries[pos].j]) {
        throw DataError("parameter '" + tensor.labels().parameters[entries[pos].j] +
                        "' has no training entries");
      }
    }
  }
  Normalized out;
  out.scaler = fit_scaler(tensor, partition.train, &out.warnings);
  out.tensor = apply_scaler(tensor, out.scaler);
  return out;
}

std::vector<Entry> gather(const SparseTensor& tensor, std::span<const std::size_t> positions) {
  std::vector<Entry> out;
  out.reserve(positions.size());
  const auto entries = tensor.entries();
  for (const std::size_t pos : positions) {
    if (pos >= entries.size()) throw DataError("entry position " + std::to_string(pos) + " out of range");
    out.push_back(entries[pos]);
  }
  return out;
}

}  // namespace nlrcnn
