#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mouthtrace/checkpoint.hpp"
#include "mouthtrace/nn/autodiff.hpp"

namespace mouthtrace::nn {

/// The four disjoint weight groups of the detector.
enum class Partition { feature_extractor = 0, temporal_net = 1, lipread_head = 2, forgery_head = 3 };

inline constexpr std::array<Partition, 4> kAllPartitions{Partition::feature_extractor, Partition::temporal_net,
                                                         Partition::lipread_head, Partition::forgery_head};

/// Name prefix used in checkpoints: "extractor", "tcn", "lipread_head", "forgery_head".
const char* partition_prefix(Partition p);
Partition partition_of(const std::string& full_name);

/// Named, partitioned weights plus non-trainable buffers (batch-norm running
/// statistics). Names look like "tcn/block0.branch1.conv0.weight".
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Partition partition;
    bool buffer = false;
  };

  Tensor& add_parameter(const std::string& full_name, Tensor init);
  Tensor& add_buffer(const std::string& full_name, Tensor init);

  bool contains(const std::string& full_name) const { return entries_.count(full_name) != 0; }
  const Tensor& get(const std::string& full_name) const;
  Tensor& get(const std::string& full_name);
  const Entry& entry(const std::string& full_name) const;

  bool trainable(Partition p) const { return trainable_[static_cast<std::size_t>(p)]; }
  void set_trainable(Partition p, bool on) { trainable_[static_cast<std::size_t>(p)] = on; }

  /// Trainable-parameter names in a partition (buffers excluded).
  std::vector<std::string> parameter_names(Partition p) const;
  std::vector<std::string> parameter_names() const;
  std::int64_t parameter_count(Partition p) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

  TensorMap to_map() const;
  /// Overwrites the listed partitions from a checkpoint. Each of their
  /// entries must be present with the registered shape; other names are
  /// ignored.
  void load(const TensorMap& map, const std::vector<Partition>& partitions);

 private:
  std::map<std::string, Entry> entries_;
  std::array<bool, 4> trainable_{true, true, true, true};
};

/// Per-forward view of a ParameterStore as graph leaves. Leaves require a
/// gradient only when recording is on and their partition is trainable.
class ParamBinder {
 public:
  ParamBinder(ParameterStore& store, bool record) : store_(store), record_(record) {}

  Var operator()(const std::string& full_name);
  Tensor* buffer(const std::string& full_name) { return &store_.get(full_name); }
  bool recording() const { return record_; }

  /// Gradients of every bound leaf that required one.
  std::map<std::string, Tensor> gradients() const;

 private:
  ParameterStore& store_;
  bool record_;
  std::map<std::string, Var> bound_;
};

}  // namespace mouthtrace::nn
