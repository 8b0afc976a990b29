#include "nlrcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "nlrcnn/error.hpp"

namespace nlrcnn {

namespace {

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum;
}

std::string fixed4(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.4f", value);
  return buffer;
}

}  // namespace

EvalReport score(std::span<const Prediction> predictions, std::string model, std::string scale) {
  if (predictions.empty()) throw DataError("cannot score an empty prediction set");
  std::vector<double> squared;
  std::vector<double> absolute;
  squared.reserve(predictions.size());
  absolute.reserve(predictions.size());
  for (const Prediction& p : predictions) {
    const double diff = p.entry.value - p.predicted;
    squared.push_back(diff * diff);
    absolute.push_back(std::abs(diff));
  }
  const double n = static_cast<double>(predictions.size());
  EvalReport report;
  report.count = predictions.size();
  report.mae = sorted_sum(absolute) / n;
  // Equal errors can round the root mean square an ulp below the mean.
  report.rmse = std::max(std::sqrt(sorted_sum(squared) / n), report.mae);
  report.model = std::move(model);
  report.scale = std::move(scale);
  return report;
}

std::string EvalReport::summary() const { return "RMSE " + fixed4(rmse) + ", MAE " + fixed4(mae); }

std::string EvalReport::csv_header() { return "model,scale,count,rmse,mae"; }

std::string EvalReport::csv_record() const {
  return model + "," + scale + "," + std::to_string(count) + "," + format_value(rmse) + "," + format_value(mae);
}

std::string EvalReport::text_block() const {
  std::ostringstream out;
  out << "model:   " << (model.empty() ? "-" : model) << '\n'
      << "entries: " << count << '\n'
      << "scale:   " << scale << '\n'
      << summary() << '\n';
  return out.str();
}

}  // namespace nlrcnn
