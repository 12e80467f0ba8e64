#pragma once

#include <span>
#include <vector>

#include "pixelseq/parameter.hpp"
#include "pixelseq/tensor.hpp"

namespace pixelseq {

// RMSProp: acc <- rho * acc + (1 - rho) * g^2,
//          theta <- theta - lr * g / sqrt(acc + eps),
// followed by mask re-application on every masked parameter, so masked
// positions hold exact zeros outside the interior of a step.
class RmsProp {
 public:
  void step(std::span<Parameter* const> params, double learning_rate, double decay,
            double epsilon);

  const std::vector<Tensor>& accumulators() const { return acc_; }

 private:
  std::vector<Tensor> acc_;
};

}  // namespace pixelseq
