#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "nlrcnn/tensor.hpp"

namespace nlrcnn {

struct Prediction {
  Entry entry;
  double predicted = 0.0;
};

// Held-out accuracy of one model. `scale` records whether the errors are on
// the normalized [0, 1] scale or the raw measurement scale.
struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
  std::string model;
  std::string scale = "normalized";

  // "RMSE 0.0203, MAE 0.0135"
  std::string summary() const;
  static std::string csv_header();
  // model,scale,count,rmse,mae with round-trip precision.
  std::string csv_record() const;
  std::string text_block() const;
};

// RMSE and MAE over the predictions. Errors are summed in sorted order, so the
// result does not depend on the input order. Throws DataError when empty.
EvalReport score(std::span<const Prediction> predictions, std::string model = {},
                 std::string scale = "normalized");

}  // namespace nlrcnn
