#pragma once

#include <map>
#include <string>

#include "travelgan/tensor.hpp"

namespace travelgan {

// Named parameter storage. std::map keeps iteration order lexicographic by
// path, which every consumer (checkpointing, Adam, gradient checks) relies
// on for determinism.
template <typename T>
using ParameterSet = std::map<std::string, Tensor<T>>;

template <typename T>
using GradientSet = std::map<std::string, Tensor<T>>;

template <typename T>
int64_t parameter_count(const ParameterSet<T>& params) {
  int64_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace travelgan
