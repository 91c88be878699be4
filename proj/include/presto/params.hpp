#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "presto/tensor.hpp"

namespace presto {

// Ordered named-tensor map; insertion order is the serialization order, so a
// load/save round-trip is byte-identical.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("param exists: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no param: " + name);
    return items_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no param: " + name);
    return items_[it->second].second;
  }

  size_t size() const { return items_.size(); }
  const std::pair<std::string, Tensor>& item(size_t i) const { return items_[i]; }
  std::pair<std::string, Tensor>& item(size_t i) { return items_[i]; }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& [_, t] : items_) n += t.numel();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace presto
