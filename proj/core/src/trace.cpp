#include "nlrcnn/trace.hpp"

#include <ostream>

#include "nlrcnn/tensor.hpp"

namespace nlrcnn {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::cap:
      return "cap";
    case StopReason::tolerance:
      return "tolerance";
    case StopReason::divergence:
      return "divergence";
  }
  return "?";
}

void TrainTrace::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_rmse\n";
  out << 0 << ',' << format_value(initial_loss) << ',' << format_value(initial_val_rmse) << '\n';
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << e + 1 << ',' << format_value(train_loss[e]) << ',' << format_value(val_rmse[e]) << '\n';
  }
}

}  // namespace nlrcnn
