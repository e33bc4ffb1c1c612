#include "mouthtrace/nn/params.hpp"

namespace mouthtrace::nn {

const char* partition_prefix(Partition p) {
  switch (p) {
    case Partition::feature_extractor: return "extractor";
    case Partition::temporal_net: return "tcn";
    case Partition::lipread_head: return "lipread_head";
    case Partition::forgery_head: return "forgery_head";
  }
  return "?";
}

Partition partition_of(const std::string& full_name) {
  const auto slash = full_name.find('/');
  if (slash == std::string::npos) throw ShapeError("parameter name without partition prefix: " + full_name);
  const std::string prefix = full_name.substr(0, slash);
  for (auto p : kAllPartitions)
    if (prefix == partition_prefix(p)) return p;
  throw ShapeError("unknown partition prefix in parameter name: " + full_name);
}

Tensor& ParameterStore::add_parameter(const std::string& full_name, Tensor init) {
  auto [it, inserted] = entries_.emplace(full_name, Entry{std::move(init), partition_of(full_name), false});
  if (!inserted) throw ShapeError("parameter registered twice: " + full_name);
  return it->second.value;
}

Tensor& ParameterStore::add_buffer(const std::string& full_name, Tensor init) {
  auto [it, inserted] = entries_.emplace(full_name, Entry{std::move(init), partition_of(full_name), true});
  if (!inserted) throw ShapeError("buffer registered twice: " + full_name);
  return it->second.value;
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& full_name) const {
  auto it = entries_.find(full_name);
  if (it == entries_.end()) throw ShapeError("unknown parameter: " + full_name);
  return it->second;
}

const Tensor& ParameterStore::get(const std::string& full_name) const { return entry(full_name).value; }

Tensor& ParameterStore::get(const std::string& full_name) {
  return const_cast<Entry&>(entry(full_name)).value;
}

std::vector<std::string> ParameterStore::parameter_names(Partition p) const {
  std::vector<std::string> names;
  for (const auto& [name, e] : entries_)
    if (!e.buffer && e.partition == p) names.push_back(name);
  return names;
}

std::vector<std::string> ParameterStore::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& [name, e] : entries_)
    if (!e.buffer) names.push_back(name);
  return names;
}

std::int64_t ParameterStore::parameter_count(Partition p) const {
  std::int64_t n = 0;
  for (const auto& [name, e] : entries_)
    if (!e.buffer && e.partition == p) n += e.value.numel();
  return n;
}

TensorMap ParameterStore::to_map() const {
  TensorMap map;
  for (const auto& [name, e] : entries_) map.emplace(name, e.value);
  return map;
}

void ParameterStore::load(const TensorMap& map, const std::vector<Partition>& partitions) {
  for (auto& [name, e] : entries_) {
    bool wanted = false;
    for (auto p : partitions) wanted = wanted || p == e.partition;
    if (!wanted) continue;
    auto it = map.find(name);
    if (it == map.end()) throw DataError("checkpoint is missing " + name);
    if (it->second.shape() != e.value.shape()) {
      throw ConfigError("checkpoint/config shape mismatch for " + name + ": checkpoint " +
                       shape_string(it->second.shape()) + " vs model " + shape_string(e.value.shape()));
    }
    e.value = it->second;
  }
}

Var ParamBinder::operator()(const std::string& full_name) {
  auto it = bound_.find(full_name);
  if (it != bound_.end()) return it->second;
  const auto& e = store_.entry(full_name);
  const bool grad = record_ && !e.buffer && store_.trainable(e.partition);
  Var v = Var::leaf(e.value, grad);
  bound_.emplace(full_name, v);
  return v;
}

std::map<std::string, Tensor> ParamBinder::gradients() const {
  std::map<std::string, Tensor> grads;
  for (const auto& [name, v] : bound_)
    if (v.requires_grad()) grads.emplace(name, v.grad());
  return grads;
}

}  // namespace mouthtrace::nn
