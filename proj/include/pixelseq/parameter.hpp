#pragma once

#include <memory>
#include <string>
#include <utility>

#include "pixelseq/mask.hpp"
#include "pixelseq/tensor.hpp"

namespace pixelseq {

// A named learnable tensor with a gradient accumulator and an optional
// causality mask that is re-applied after every optimizer update.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  std::shared_ptr<const MaskSpec> mask;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace pixelseq
