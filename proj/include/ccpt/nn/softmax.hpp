#pragma once

#include <span>
#include <vector>

namespace ccpt::nn {

// Numerically stable softmax of one row of logits.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double entropy(std::span<const double> probs);

}  // namespace ccpt::nn
