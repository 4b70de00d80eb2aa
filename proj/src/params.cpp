#include "tvae/params.hpp"

#include "tvae/errors.hpp"

namespace tvae {

LeafMap make_leaves(const ParamSet& params, const std::set<std::string>& frozen) {
  LeafMap leaves;
  for (const auto& [name, block] : params) {
    leaves.emplace(name, frozen.contains(name) ? Tensor::constant(block.shape, block.values)
                                               : Tensor::variable(name, block.shape, block.values));
  }
  return leaves;
}

const Tensor& leaf(const LeafMap& leaves, const std::string& name) {
  auto it = leaves.find(name);
  if (it == leaves.end()) throw ContractError("missing parameter '" + name + "'");
  return it->second;
}

}  // namespace tvae
