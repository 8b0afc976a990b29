#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "nlrcnn/config.hpp"
#include "nlrcnn/cp.hpp"
#include "nlrcnn/nlr.hpp"
#include "nlrcnn/tensor.hpp"
#include "nlrcnn/trace.hpp"

namespace nlrcnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TraceSummary {
  std::size_t epochs = 0;
  StopReason stop = StopReason::cap;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
  double initial_val_rmse = 0.0;
  double final_train_loss = 0.0;

  static TraceSummary from(const TrainTrace& trace);
  bool operator==(const TraceSummary&) const = default;
};

// Everything needed to evaluate or impute without the training data.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Labels labels;
  Scaler scaler;
  TrainConfig config;
  FactorModel factors;
  // Present exactly when config.model is nlr-cnn.
  std::optional<TemporalEncoder> encoder;
  std::optional<InteractionCNN> net;
  TraceSummary trace;

  ModelKind model() const { return config.model; }
  Dims dims() const { return factors.dims(); }
  NlrModel nlr_model() const;

  // Prediction on the normalized scale.
  double predict(std::size_t i, std::size_t j, std::size_t k) const;

  // Throws DataError if the sections disagree with each other.
  void validate() const;

  bool operator==(const Checkpoint&) const = default;
};

// Little-endian binary: 8-byte magic "NLRCNNCK", u32 version, u32 section
// count, then named sections (u32 name length, name, u64 payload length,
// payload) in a fixed order. Doubles are stored as IEEE-754 bit patterns.
std::string encode_checkpoint(const Checkpoint& checkpoint);
// Rejects other versions and malformed input with DataError.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nlrcnn
