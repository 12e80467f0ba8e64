#include "pixelseq/optimizer.hpp"

#include <cmath>

#include "pixelseq/errors.hpp"
#include "pixelseq/mask.hpp"

namespace pixelseq {

void RmsProp::step(std::span<Parameter* const> params, double learning_rate, double decay,
                   double epsilon) {
  if (learning_rate < 0.0 || decay <= 0.0 || decay >= 1.0 || epsilon <= 0.0) {
    throw ConfigError("RmsProp: need lr >= 0, 0 < decay < 1, epsilon > 0");
  }
  if (acc_.empty()) {
    acc_.reserve(params.size());
    for (const Parameter* p : params) acc_.emplace_back(p->value.shape);
  }
  if (acc_.size() != params.size()) throw ConfigError("RmsProp: parameter set changed");

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& acc = acc_[i];
    if (!p.grad.all_finite()) {
      throw NumericError("RmsProp: non-finite gradient in " + p.name);
    }
    for (int j = 0; j < p.value.numel(); ++j) {
      const double g = p.grad[j];
      acc[j] = decay * acc[j] + (1.0 - decay) * g * g;
      p.value[j] -= learning_rate * g / std::sqrt(acc[j] + epsilon);
    }
    apply_mask(p);
  }
}

}  // namespace pixelseq
