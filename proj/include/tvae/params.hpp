#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tvae/tensor.hpp"

namespace tvae {

/// Values of one trainable array.
struct ParamBlock {
  Shape shape;
  std::vector<double> values;
};

/// All trainable arrays of a model, keyed by variable name. Ordered, so
/// iteration (and therefore optimizer updates and serialization) is stable.
using ParamSet = std::map<std::string, ParamBlock>;

/// Graph leaves for one forward pass.
using LeafMap = std::map<std::string, Tensor>;

/// Variables for every block except the frozen ones, which become constants.
LeafMap make_leaves(const ParamSet& params, const std::set<std::string>& frozen = {});

const Tensor& leaf(const LeafMap& leaves, const std::string& name);

}  // namespace tvae
