#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgn/tensor.hpp"

namespace lgn {

// A named trainable tensor. `trainable` gates optimizer updates for the
// whole tensor (pretrained tables); `frozen_rows` pins individual rows of a
// rank-2 parameter (the pad embedding row).
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
  std::vector<std::size_t> frozen_rows;
};

// Ordered, uniquely named parameter set. Registration order defines the
// checkpoint manifest order.
class ParameterCollection {
 public:
  Parameter& add(std::string name, Tensor tensor);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<Parameter> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lgn
