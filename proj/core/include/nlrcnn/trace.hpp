#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "nlrcnn/error.hpp"

namespace nlrcnn {

enum class StopReason : std::uint8_t { cap = 0, tolerance = 1, divergence = 2 };

std::string_view to_string(StopReason reason);

// Per-epoch history. Index 0 of the vectors is epoch 1; the state before any
// update is kept separately as the initial values.
struct TrainTrace {
  double initial_loss = 0.0;
  double initial_val_rmse = 0.0;
  std::vector<double> train_loss;
  std::vector<double> val_rmse;
  StopReason stop = StopReason::cap;
  std::size_t best_epoch = 0;  // 0 = the initial parameters
  double best_val_rmse = 0.0;

  std::size_t epochs() const { return train_loss.size(); }

  // `epoch,train_loss,val_rmse`, starting with the epoch-0 row.
  void write_csv(std::ostream& out) const;

  bool operator==(const TrainTrace&) const = default;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, TrainTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

}  // namespace nlrcnn
