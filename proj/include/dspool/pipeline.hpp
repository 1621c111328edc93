#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dspool/cluster_pool.hpp"
#include "dspool/hierarchy.hpp"
#include "dspool/types.hpp"

namespace dspool {

struct ObjectExample {
  std::string id;
  int label = 0;
  Matrix features;  // views x channels
};

struct Dataset {
  int classes = 0;
  std::vector<ObjectExample> objects;

  Index views() const;
  Index channels() const;
  void validate() const;
};

struct SynthGroup {
  Cluster views;
  bool class_signal = true;   // false: prototype shared across classes
  double noise_scale = 1.0;   // multiplies noise_sigma for this group
};

struct SynthConfig {
  int classes = 4;
  int objects_per_class = 40;
  Index views = 12;
  Index channels = 64;
  std::vector<SynthGroup> groups;  // empty: one group holding every view
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  double prototype_min = 0.5;
  double prototype_max = 1.5;
  double baseline = 0.0;           // added to every prototype channel
  bool orthogonal_groups = true;   // one channel block per group
};

/// Deterministic synthetic dataset: view i of an object with label c is
/// clamp(prototype[c][group(i)] + noise_scale * N(0, sigma^2), >= 0).
Dataset generate_synthetic(const SynthConfig& cfg);

/// First `per_class_train` objects of each class go to train, rest to test.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int per_class_train);

struct ClassifierConfig {
  double learning_rate = 0.5;
  int epochs = 300;
  double l2 = 1e-4;
};

/// L2-regularized softmax linear classifier, full-batch gradient descent.
struct LinearClassifier {
  Matrix weights;  // classes x channels
  Vector bias;     // classes
  ClassifierConfig config;

  Vector scores(const RowVector& x) const;
  int predict(const RowVector& x) const;  // argmax, smallest class on ties
};

LinearClassifier train_classifier(const Matrix& examples,
                                  const std::vector<int>& labels, int classes,
                                  const ClassifierConfig& cfg = {});

/// Per-view linear map with a nonnegativity clamp, applied before pooling.
struct FrontEnd {
  Matrix weights;   // d_in x d_out
  RowVector bias;   // d_out

  static FrontEnd identity(Index channels);
  Matrix apply(const Matrix& views) const;
};

struct FastTrainResult {
  ClusteringHierarchy hierarchy;
  LinearClassifier classifier;
  Matrix pooled;  // one row per training object
  std::vector<std::string> warnings;
};

/// Build the universal hierarchy, pool every training object through it,
/// and fit the classifier on the pooled vectors. No front-end learning.
FastTrainResult fast_train(const Dataset& train, const PoolStructure& structure,
                           const ClassifierConfig& classifier_cfg = {},
                           const ReplicatorConfig& replicator_cfg = {});

struct EndToEndConfig {
  double learning_rate = 0.05;
  int epochs = 200;
  double l2 = 1e-4;
  bool train_front_end = true;
};

struct EndToEndResult {
  FrontEnd front_end;
  LinearClassifier classifier;
  std::vector<double> loss_history;  // cross-entropy before each update
};

/// Joint full-batch training of front end and classifier through the
/// pooling layer, with the clustering hierarchy fixed throughout.
EndToEndResult end_to_end_train(const Dataset& train,
                                const ClusteringHierarchy& hierarchy,
                                const EndToEndConfig& cfg = {});

/// Fraction of argmax-correct labels; ties broken by smallest class index.
double evaluate(const Dataset& test, const ClusteringHierarchy& hierarchy,
                const FrontEnd* front_end, const LinearClassifier& classifier);

}  // namespace dspool
