#include "lgn/params.hpp"

namespace lgn {

Parameter& ParameterCollection::add(std::string name, Tensor tensor) {
  if (name.empty()) {
    throw ConfigError("parameter name must be non-empty");
  }
  if (index_.count(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  if (!tensor.requires_grad()) {
    throw ConfigError("parameter '" + name + "' must require gradients");
  }
  index_.emplace(name, items_.size());
  items_.push_back(Parameter{std::move(name), std::move(tensor), true, {}});
  return items_.back();
}

Parameter& ParameterCollection::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown parameter: " + name);
  }
  return items_[it->second];
}

const Parameter& ParameterCollection::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown parameter: " + name);
  }
  return items_[it->second];
}

bool ParameterCollection::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::size_t ParameterCollection::total_elements() const {
  std::size_t n = 0;
  for (const Parameter& p : items_) n += p.tensor.size();
  return n;
}

void ParameterCollection::zero_grad() {
  for (Parameter& p : items_) p.tensor.zero_grad();
}

}  // namespace lgn
