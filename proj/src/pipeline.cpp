#include "dspool/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dspool/affinity.hpp"

namespace dspool {

namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double shift = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - shift).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

void require_labels(const std::vector<int>& labels, int classes) {
  if (classes < 1) throw ValidationError("need at least one class");
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw ValidationError("label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Index Dataset::views() const {
  if (objects.empty()) throw ValidationError("dataset is empty");
  return objects.front().features.rows();
}

Index Dataset::channels() const {
  if (objects.empty()) throw ValidationError("dataset is empty");
  return objects.front().features.cols();
}

void Dataset::validate() const {
  if (classes < 1) throw ValidationError("dataset needs at least one class");
  if (objects.empty()) throw ValidationError("dataset has no objects");
  const Index v = objects.front().features.rows();
  const Index d = objects.front().features.cols();
  for (const ObjectExample& obj : objects) {
    if (obj.label < 0 || obj.label >= classes) {
      throw ValidationError("object '" + obj.id + "' has label " +
                            std::to_string(obj.label) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    if (obj.features.rows() != v || obj.features.cols() != d) {
      throw ValidationError("object '" + obj.id +
                            "' breaks the shared views-by-channels shape");
    }
    validate_features(obj.features);
  }
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  if (cfg.classes < 1) throw ValidationError("need at least one class");
  if (cfg.objects_per_class < 1) {
    throw ValidationError("need at least one object per class");
  }
  if (cfg.views < 1 || cfg.channels < 1) {
    throw ValidationError("need at least one view and one channel");
  }
  if (cfg.noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  if (cfg.prototype_min > cfg.prototype_max) {
    throw ValidationError("prototype range is inverted");
  }

  std::vector<SynthGroup> groups = cfg.groups;
  if (groups.empty()) {
    SynthGroup all;
    all.views.resize(static_cast<std::size_t>(cfg.views));
    for (Index i = 0; i < cfg.views; ++i) {
      all.views[static_cast<std::size_t>(i)] = i;
    }
    groups.push_back(std::move(all));
  }
  {
    // The groups must tile the views exactly; a partition check is the
    // same obligation, so reuse it.
    Partition as_partition;
    for (const SynthGroup& g : groups) as_partition.clusters.push_back(g.views);
    as_partition.validate(cfg.views);
    for (const SynthGroup& g : groups) {
      if (g.noise_scale < 0.0) {
        throw ValidationError("group noise scale must be >= 0");
      }
    }
  }
  const Index G = static_cast<Index>(groups.size());
  if (cfg.orthogonal_groups && cfg.channels < G) {
    throw ValidationError("need at least one channel per group");
  }

  // Channel block per group: contiguous, near-equal, remainder to the front.
  std::vector<std::pair<Index, Index>> block(static_cast<std::size_t>(G));
  if (cfg.orthogonal_groups) {
    const Index base = cfg.channels / G;
    const Index rem = cfg.channels % G;
    Index offset = 0;
    for (Index g = 0; g < G; ++g) {
      const Index width = base + (g < rem ? 1 : 0);
      block[static_cast<std::size_t>(g)] = {offset, width};
      offset += width;
    }
  } else {
    for (Index g = 0; g < G; ++g) {
      block[static_cast<std::size_t>(g)] = {0, cfg.channels};
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> proto_dist(cfg.prototype_min,
                                                    cfg.prototype_max);
  std::normal_distribution<double> unit_noise(0.0, 1.0);

  // Draw order is pinned so a seed always yields the same dataset:
  // prototypes group by group (classes ascending within a class-signal
  // group), then objects class by class, each row-major.
  std::vector<std::vector<RowVector>> prototypes(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    auto& per_class = prototypes[static_cast<std::size_t>(g)];
    const auto [offset, width] = block[static_cast<std::size_t>(g)];
    const int variants = groups[static_cast<std::size_t>(g)].class_signal
                             ? cfg.classes
                             : 1;
    for (int c = 0; c < variants; ++c) {
      RowVector proto = RowVector::Constant(cfg.channels, cfg.baseline);
      for (Index ch = 0; ch < width; ++ch) {
        proto(offset + ch) += proto_dist(rng);
      }
      per_class.push_back(std::move(proto));
    }
  }

  std::vector<Index> group_of(static_cast<std::size_t>(cfg.views));
  for (Index g = 0; g < G; ++g) {
    for (Index view : groups[static_cast<std::size_t>(g)].views) {
      group_of[static_cast<std::size_t>(view)] = g;
    }
  }

  Dataset ds;
  ds.classes = cfg.classes;
  for (int c = 0; c < cfg.classes; ++c) {
    for (int o = 0; o < cfg.objects_per_class; ++o) {
      ObjectExample obj;
      obj.id = "obj_" + std::to_string(c) + "_" + std::to_string(o);
      obj.label = c;
      obj.features.resize(cfg.views, cfg.channels);
      for (Index i = 0; i < cfg.views; ++i) {
        const Index g = group_of[static_cast<std::size_t>(i)];
        const SynthGroup& group = groups[static_cast<std::size_t>(g)];
        const auto& per_class = prototypes[static_cast<std::size_t>(g)];
        const RowVector& proto =
            per_class[group.class_signal ? static_cast<std::size_t>(c) : 0];
        const double sigma = cfg.noise_sigma * group.noise_scale;
        for (Index ch = 0; ch < cfg.channels; ++ch) {
          obj.features(i, ch) =
              std::max(0.0, proto(ch) + sigma * unit_noise(rng));
        }
      }
      ds.objects.push_back(std::move(obj));
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          int per_class_train) {
  ds.validate();
  if (per_class_train < 1) {
    throw ValidationError("need at least one training object per class");
  }
  Dataset train, test;
  train.classes = test.classes = ds.classes;
  std::vector<int> taken(static_cast<std::size_t>(ds.classes), 0);
  for (const ObjectExample& obj : ds.objects) {
    int& count = taken[static_cast<std::size_t>(obj.label)];
    (count < per_class_train ? train : test).objects.push_back(obj);
    ++count;
  }
  for (int c = 0; c < ds.classes; ++c) {
    if (taken[static_cast<std::size_t>(c)] < per_class_train) {
      throw ValidationError("class " + std::to_string(c) + " has only " +
                            std::to_string(taken[static_cast<std::size_t>(c)]) +
                            " objects, need " + std::to_string(per_class_train));
    }
  }
  return {std::move(train), std::move(test)};
}

Vector LinearClassifier::scores(const RowVector& x) const {
  if (x.size() != weights.cols()) {
    throw ValidationError("classifier expects " +
                          std::to_string(weights.cols()) + " channels, got " +
                          std::to_string(x.size()));
  }
  return weights * x.transpose() + bias;
}

int LinearClassifier::predict(const RowVector& x) const {
  const Vector s = scores(x);
  int best = 0;
  for (Index c = 1; c < s.size(); ++c) {
    if (s(c) > s(best)) best = static_cast<int>(c);  // ties keep smallest
  }
  return best;
}

LinearClassifier train_classifier(const Matrix& examples,
                                  const std::vector<int>& labels, int classes,
                                  const ClassifierConfig& cfg) {
  if (examples.rows() < 1 || examples.cols() < 1) {
    throw ValidationError("need at least one example and one channel");
  }
  if (static_cast<Index>(labels.size()) != examples.rows()) {
    throw ValidationError("one label per example required");
  }
  require_labels(labels, classes);
  if (!examples.allFinite()) {
    throw ValidationError("examples contain non-finite values");
  }
  if (cfg.learning_rate < 0.0) throw ValidationError("learning rate must be >= 0");
  if (cfg.epochs < 0) throw ValidationError("epoch count must be >= 0");
  if (cfg.l2 < 0.0) throw ValidationError("l2 strength must be >= 0");

  const Index N = examples.rows();
  const Index d = examples.cols();

  Matrix onehot = Matrix::Zero(N, classes);
  for (Index i = 0; i < N; ++i) {
    onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  }

  LinearClassifier clf;
  clf.config = cfg;
  clf.weights = Matrix::Zero(classes, d);
  clf.bias = Vector::Zero(classes);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix logits =
        (examples * clf.weights.transpose()).rowwise() + clf.bias.transpose();
    const Matrix delta =
        (softmax_rows(logits) - onehot) / static_cast<double>(N);
    clf.weights -= cfg.learning_rate *
                   (delta.transpose() * examples + cfg.l2 * clf.weights);
    clf.bias -= cfg.learning_rate * delta.colwise().sum().transpose();
    if (!clf.weights.allFinite() || !clf.bias.allFinite()) {
      throw NumericalError("classifier diverged at epoch " +
                           std::to_string(epoch));
    }
  }
  return clf;
}

FrontEnd FrontEnd::identity(Index channels) {
  if (channels < 1) throw ValidationError("need at least one channel");
  FrontEnd fe;
  fe.weights = Matrix::Identity(channels, channels);
  fe.bias = RowVector::Zero(channels);
  return fe;
}

Matrix FrontEnd::apply(const Matrix& views) const {
  if (views.cols() != weights.rows()) {
    throw ValidationError("front end expects " + std::to_string(weights.rows()) +
                          " input channels, got " + std::to_string(views.cols()));
  }
  return ((views * weights).rowwise() + bias).cwiseMax(0.0);
}

FastTrainResult fast_train(const Dataset& train, const PoolStructure& structure,
                           const ClassifierConfig& classifier_cfg,
                           const ReplicatorConfig& replicator_cfg) {
  train.validate();

  FastTrainResult result;
  {
    std::set<int> present;
    for (const ObjectExample& obj : train.objects) present.insert(obj.label);
    for (int c = 0; c < train.classes; ++c) {
      if (!present.count(c)) {
        result.warnings.push_back("class " + std::to_string(c) +
                                  " has no training objects");
      }
    }
    if (present.size() == 1 && train.classes > 1) {
      result.warnings.push_back(
          "all training objects share one label; the classifier cannot "
          "separate anything");
    }
  }

  std::vector<Matrix> features;
  features.reserve(train.objects.size());
  for (const ObjectExample& obj : train.objects) {
    features.push_back(obj.features);
  }
  result.hierarchy =
      build_universal_hierarchy(features, structure, replicator_cfg);

  result.pooled.resize(static_cast<Index>(train.objects.size()),
                       train.channels());
  std::vector<int> labels;
  labels.reserve(train.objects.size());
  for (std::size_t i = 0; i < train.objects.size(); ++i) {
    result.pooled.row(static_cast<Index>(i)) =
        apply_hierarchy(train.objects[i].features, result.hierarchy).pooled;
    labels.push_back(train.objects[i].label);
  }

  result.classifier =
      train_classifier(result.pooled, labels, train.classes, classifier_cfg);
  return result;
}

EndToEndResult end_to_end_train(const Dataset& train,
                                const ClusteringHierarchy& hierarchy,
                                const EndToEndConfig& cfg) {
  train.validate();
  hierarchy.validate_structure();
  if (hierarchy.views_per_object != train.views()) {
    throw ValidationError("hierarchy expects " +
                          std::to_string(hierarchy.views_per_object) +
                          " views, dataset has " + std::to_string(train.views()));
  }
  if (cfg.learning_rate < 0.0) throw ValidationError("learning rate must be >= 0");
  if (cfg.epochs < 0) throw ValidationError("epoch count must be >= 0");
  if (cfg.l2 < 0.0) throw ValidationError("l2 strength must be >= 0");

  const Index N = static_cast<Index>(train.objects.size());
  const Index d = train.channels();
  const int C = train.classes;

  Matrix onehot = Matrix::Zero(N, C);
  for (Index i = 0; i < N; ++i) {
    onehot(i, train.objects[static_cast<std::size_t>(i)].label) = 1.0;
  }

  EndToEndResult result;
  result.front_end = FrontEnd::identity(d);
  result.classifier.config = {cfg.learning_rate, cfg.epochs, cfg.l2};
  result.classifier.weights = Matrix::Zero(C, d);
  result.classifier.bias = Vector::Zero(C);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Forward every object through the front end and the frozen hierarchy,
    // keeping the traces so the pooled gradient can be routed back.
    Matrix pooled(N, d);
    std::vector<Matrix> pre_acts;
    std::vector<RecurrenceTrace> traces;
    pre_acts.reserve(static_cast<std::size_t>(N));
    traces.reserve(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) {
      const Matrix& V = train.objects[static_cast<std::size_t>(i)].features;
      Matrix pre = (V * result.front_end.weights).rowwise() +
                   result.front_end.bias;
      ForwardResult fwd = forward(pre.cwiseMax(0.0), PoolStructure{}, &hierarchy);
      pooled.row(i) = fwd.pooled;
      pre_acts.push_back(std::move(pre));
      traces.push_back(std::move(fwd.trace));
    }

    const Matrix logits =
        (pooled * result.classifier.weights.transpose()).rowwise() +
        result.classifier.bias.transpose();
    const Matrix probs = softmax_rows(logits);

    double loss = 0.0;
    for (Index i = 0; i < N; ++i) {
      loss -= std::log(std::max(
          probs(i, train.objects[static_cast<std::size_t>(i)].label), 1e-300));
    }
    loss /= static_cast<double>(N);
    if (!std::isfinite(loss)) {
      throw NumericalError("training loss became non-finite at epoch " +
                           std::to_string(epoch));
    }
    result.loss_history.push_back(loss);

    const Matrix delta = (probs - onehot) / static_cast<double>(N);
    const Matrix grad_w =
        delta.transpose() * pooled + cfg.l2 * result.classifier.weights;
    const Vector grad_b = delta.colwise().sum().transpose();
    const Matrix grad_pooled = delta * result.classifier.weights;  // N x d

    if (cfg.train_front_end) {
      Matrix grad_few = Matrix::Zero(d, d);
      RowVector grad_feb = RowVector::Zero(d);
      for (Index i = 0; i < N; ++i) {
        const Matrix grad_views =
            backward(grad_pooled.row(i), traces[static_cast<std::size_t>(i)]);
        // The clamp passes gradient only where the pre-activation was
        // strictly positive.
        const Matrix grad_pre =
            ((pre_acts[static_cast<std::size_t>(i)].array() > 0.0)
                 .cast<double>() *
             grad_views.array())
                .matrix();
        grad_few += train.objects[static_cast<std::size_t>(i)]
                        .features.transpose() *
                    grad_pre;
        grad_feb += grad_pre.colwise().sum();
      }
      result.front_end.weights -= cfg.learning_rate * grad_few;
      result.front_end.bias -= cfg.learning_rate * grad_feb;
    }

    result.classifier.weights -= cfg.learning_rate * grad_w;
    result.classifier.bias -= cfg.learning_rate * grad_b;

    if (!result.classifier.weights.allFinite() ||
        !result.front_end.weights.allFinite()) {
      throw NumericalError("parameters diverged at epoch " +
                           std::to_string(epoch));
    }
  }
  return result;
}

double evaluate(const Dataset& test, const ClusteringHierarchy& hierarchy,
                const FrontEnd* front_end, const LinearClassifier& classifier) {
  test.validate();
  Index correct = 0;
  for (const ObjectExample& obj : test.objects) {
    const Matrix mapped =
        front_end != nullptr ? front_end->apply(obj.features) : obj.features;
    const RowVector pooled = apply_hierarchy(mapped, hierarchy).pooled;
    if (classifier.predict(pooled) == obj.label) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(test.objects.size());
}

}  // namespace dspool
