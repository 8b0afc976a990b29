#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nlrcnn {

// Mode sizes of a station x parameter x time tensor.
struct Dims {
  std::size_t stations = 0;
  std::size_t parameters = 0;
  std::size_t times = 0;

  std::size_t volume() const { return stations * parameters * times; }
  bool contains(std::size_t i, std::size_t j, std::size_t k) const {
    return i < stations && j < parameters && k < times;
  }
  bool operator==(const Dims&) const = default;
};

struct Index3 {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;

  auto operator<=>(const Index3&) const = default;
};

// One observed cell: station i, parameter j, time slot k.
struct Entry {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double value = 0.0;

  Index3 index() const { return {i, j, k}; }
  bool operator==(const Entry&) const = default;
};

// Raw identifiers for each dense index, in index order.
struct Labels {
  std::vector<std::string> stations;
  std::vector<std::string> parameters;
  std::vector<std::string> timestamps;

  bool operator==(const Labels&) const = default;
};

// Sparse COO tensor of observed records. Entries are kept sorted by (i, j, k)
// and are unique; everything not listed is the unknown set.
class SparseTensor {
 public:
  SparseTensor() = default;
  // Throws DataError on out-of-range or duplicate indices or label counts
  // that disagree with dims.
  SparseTensor(Dims dims, std::vector<Entry> entries, Labels labels);

  const Dims& dims() const { return dims_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Labels& labels() const { return labels_; }

  std::optional<std::size_t> find_station(std::string_view id) const;
  std::optional<std::size_t> find_parameter(std::string_view name) const;
  std::optional<std::size_t> find_timestamp(std::string_view stamp) const;

  bool observed(const Index3& index) const;
  // Fewer observed than unknown cells.
  bool high_dimensional_sparse() const { return 2 * entries_.size() < dims_.volume(); }
  // Every unobserved index triple, in row-major order.
  std::vector<Index3> unknown() const;

  // Same structure with replaced values (same order as entries()).
  SparseTensor with_values(std::span<const double> values) const;

  bool operator==(const SparseTensor& other) const {
    return dims_ == other.dims_ && entries_ == other.entries_ && labels_ == other.labels_;
  }

 private:
  void build_lookup();

  Dims dims_;
  std::vector<Entry> entries_;
  Labels labels_;
  std::unordered_map<std::string, std::size_t> station_lookup_;
  std::unordered_map<std::string, std::size_t> parameter_lookup_;
  std::unordered_map<std::string, std::size_t> time_lookup_;
};

// An ISO-8601 instant normalised to UTC.
struct Instant {
  std::int64_t seconds = 0;
  std::int64_t nanos = 0;

  auto operator<=>(const Instant&) const = default;
};

// Accepts YYYY-MM-DD and YYYY-MM-DD[T ]hh:mm[:ss[.fraction]][Z|+hh:mm|-hh:mm].
std::optional<Instant> parse_timestamp(std::string_view text);

// Reads `station_id,parameter,timestamp,value` with a header row. Stations and
// parameters are indexed in first-seen order, time slots by ascending instant.
SparseTensor read_csv(std::istream& in, std::string_view source = "<stream>");
SparseTensor ingest_csv(const std::filesystem::path& path);

// Writes the ingestion schema, rows ordered by dense (station, parameter, time).
void write_csv(const SparseTensor& tensor, std::ostream& out);
void export_csv(const SparseTensor& tensor, const std::filesystem::path& path);

// One CSV record split into trimmed fields; double quotes escape commas.
// Throws DataError on an unterminated quote.
std::vector<std::string> parse_csv_record(std::string_view line);
// The field quoted when it would not survive parse_csv_record unchanged.
std::string csv_field(const std::string& field);

// Shortest text that parses back to the same double.
std::string format_value(double value);

// Per-parameter range fitted on training entries.
struct ParameterRange {
  double min = 0.0;
  double max = 0.0;

  bool degenerate() const { return max == min; }
  bool operator==(const ParameterRange&) const = default;
};

class Scaler {
 public:
  Scaler() = default;
  explicit Scaler(std::vector<ParameterRange> ranges);

  // (x - min) / (max - min) clamped to [0, 1]; 0.5 for a degenerate range.
  double normalize(std::size_t parameter, double value) const;
  // Inverse map; a degenerate range maps everything back to its single value.
  double denormalize(std::size_t parameter, double value) const;

  std::span<const ParameterRange> ranges() const { return ranges_; }
  bool operator==(const Scaler&) const = default;

 private:
  std::vector<ParameterRange> ranges_;
};

struct SplitSpec {
  double train = 1.0;
  double validation = 2.0;
  double test = 7.0;
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

// Positions into SparseTensor::entries() for each partition, each sorted.
struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  bool operator==(const Partition&) const = default;
};

// Uniform random partition of the observed entries. Sizes follow the
// largest-remainder rounding of the normalised ratios.
Partition split(const SparseTensor& tensor, const SplitSpec& spec);

struct Normalized {
  SparseTensor tensor;
  Scaler scaler;
  std::vector<std::string> warnings;
};

Scaler fit_scaler(const SparseTensor& tensor, std::span<const std::size_t> train,
                  std::vector<std::string>* warnings = nullptr);
SparseTensor apply_scaler(const SparseTensor& tensor, const Scaler& scaler);

// Fits the scaler on the training partition and applies it to every entry.
// Throws DataError when a parameter in validation/test has no training entry.
Normalized normalize(const SparseTensor& tensor, const Partition& partition);

std::vector<Entry> gather(const SparseTensor& tensor, std::span<const std::size_t> positions);

}  // namespace nlrcnn
