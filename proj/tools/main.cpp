// dspool: clustering, pooling, gradient checking, and the training pipeline
// behind one deterministic command-line front.
//
// Exit codes: 0 success, 1 usage error, 2 validation or numerical error
// (gradcheck also exits 2 when the measured error crosses the threshold).

#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dspool/affinity.hpp"
#include "dspool/cluster_pool.hpp"
#include "dspool/domset.hpp"
#include "dspool/hierarchy.hpp"
#include "dspool/io.hpp"
#include "dspool/pipeline.hpp"
#include "dspool/types.hpp"

namespace {

using dspool::Index;
using dspool::Matrix;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitSuccess = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

// Every subcommand funnels its result through here so "output goes to the
// given path, or stdout, and nowhere else" holds globally.
void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
  } else {
    dspool::write_text_file(path, text);
  }
}

ordered_json replicator_json(const dspool::ReplicatorConfig& cfg) {
  return {{"tol", cfg.tol},
          {"max_iter", cfg.max_iter},
          {"support_threshold", cfg.support_threshold}};
}

void add_replicator_options(CLI::App* cmd, dspool::ReplicatorConfig& cfg) {
  cmd->add_option("--tol", cfg.tol,
                  "Replicator stopping tolerance (L1 change between iterates)")
      ->capture_default_str();
  cmd->add_option("--max-iter", cfg.max_iter, "Replicator iteration cap")
      ->capture_default_str();
  cmd->add_option("--support-threshold", cfg.support_threshold,
                  "Characteristic-vector cutoff for cluster membership")
      ->capture_default_str();
}

ordered_json partition_json(const dspool::Partition& p) {
  ordered_json clusters = ordered_json::array();
  for (const auto& cluster : p.clusters) clusters.push_back(cluster);
  return clusters;
}

// Deterministic nonnegative feature matrix for self-contained gradient
// checks: entries U(0.5, 1.5), ties having probability zero.
Matrix seeded_features(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  Matrix X(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) X(i, j) = dist(rng);
  }
  return X;
}

struct ClusterArgs {
  std::string input;
  std::string output;
  bool affinity_input = false;
  dspool::ReplicatorConfig replicator;
};

int run_cluster(const ClusterArgs& args) {
  const Matrix A = args.affinity_input
                       ? dspool::load_affinity_file(args.input)
                       : dspool::build_affinity(
                             dspool::load_feature_file(args.input));
  const dspool::Partition partition =
      dspool::peel_partition(A, args.replicator);

  ordered_json doc;
  doc["config"] = replicator_json(args.replicator);
  doc["config"]["input"] = args.input;
  doc["config"]["input_kind"] = args.affinity_input ? "affinity" : "features";
  doc["clusters"] = partition_json(partition);
  emit(doc.dump(2) + "\n", args.output);
  return kExitSuccess;
}

struct PoolArgs {
  std::string input;
  std::string output;
  std::string trace_path;
  std::string hierarchy_path;
  std::string structure = "ds-alt-f-max";
  int depth = 4;
  dspool::ReplicatorConfig replicator;
};

int run_pool(const PoolArgs& args) {
  const Matrix X = dspool::load_feature_file(args.input);
  const dspool::PoolStructure structure =
      dspool::PoolStructure::from_name(args.structure, args.depth);

  std::optional<dspool::ClusteringHierarchy> hierarchy;
  if (!args.hierarchy_path.empty()) {
    hierarchy = dspool::load_hierarchy(args.hierarchy_path, args.depth);
  }
  const dspool::ForwardResult result = dspool::forward(
      X, structure, hierarchy ? &*hierarchy : nullptr, args.replicator);

  emit(dspool::matrix_to_text(result.pooled), args.output);
  if (!args.trace_path.empty()) {
    ordered_json doc;
    doc["config"] = replicator_json(args.replicator);
    doc["config"]["input"] = args.input;
    doc["config"]["structure"] = args.structure;
    doc["config"]["depth"] = args.depth;
    doc["config"]["hierarchy"] = args.hierarchy_path;
    doc["trace"] = ordered_json::parse(dspool::trace_to_json(result.trace));
    dspool::write_text_file(args.trace_path, doc.dump(2) + "\n");
  }
  return kExitSuccess;
}

struct GradcheckArgs {
  std::string input;
  std::string output;
  std::string hierarchy_path;
  std::string structure = "ds-alt-f-max";
  int depth = 4;
  Index rows = 8;
  Index channels = 16;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  double tie_margin = -1.0;
  double threshold = 1e-4;
  dspool::ReplicatorConfig replicator;
};

int run_gradcheck(const GradcheckArgs& args) {
  const Matrix X = args.input.empty()
                       ? seeded_features(args.rows, args.channels, args.seed)
                       : dspool::load_feature_file(args.input);
  const dspool::PoolStructure structure =
      dspool::PoolStructure::from_name(args.structure, args.depth);

  // The check needs frozen cluster assignments; without a supplied
  // hierarchy, freeze the one this input induces on its own.
  dspool::ClusteringHierarchy hierarchy;
  if (args.hierarchy_path.empty()) {
    hierarchy = dspool::build_universal_hierarchy({X}, structure,
                                                  args.replicator);
  } else {
    hierarchy = dspool::load_hierarchy(args.hierarchy_path, args.depth);
  }

  const dspool::GradientCheckResult result =
      dspool::gradient_check(X, hierarchy, args.eps, args.tie_margin);
  const bool pass = result.max_relative_error < args.threshold;

  ordered_json doc;
  doc["config"] = replicator_json(args.replicator);
  doc["config"]["structure"] = args.structure;
  doc["config"]["depth"] = args.depth;
  doc["config"]["eps"] = args.eps;
  doc["config"]["tie_margin"] = args.tie_margin;
  doc["config"]["threshold"] = args.threshold;
  doc["config"]["input"] =
      args.input.empty() ? "seed:" + std::to_string(args.seed) : args.input;
  doc["max_relative_error"] = result.max_relative_error;
  doc["excluded_channels"] = result.excluded_channels;
  doc["checked_entries"] = result.checked_entries;
  doc["pass"] = pass;
  emit(doc.dump(2) + "\n", args.output);
  return pass ? kExitSuccess : kExitFailure;
}

struct HierarchyArgs {
  std::string manifest;
  std::string output;
  std::string structure = "ds-alt-f-max";
  int depth = 4;
  dspool::ReplicatorConfig replicator;
};

int run_hierarchy(const HierarchyArgs& args) {
  const dspool::Dataset ds = dspool::load_manifest(args.manifest);
  std::vector<Matrix> features;
  features.reserve(ds.objects.size());
  for (const auto& obj : ds.objects) features.push_back(obj.features);

  const dspool::ClusteringHierarchy hierarchy = dspool::build_universal_hierarchy(
      features, dspool::PoolStructure::from_name(args.structure, args.depth),
      args.replicator);

  // The file keeps the bare load/save schema; the provenance summary goes
  // to stdout instead so round-trips stay lossless.
  dspool::save_hierarchy(hierarchy, args.output);
  ordered_json doc;
  doc["config"] = replicator_json(args.replicator);
  doc["config"]["manifest"] = args.manifest;
  doc["config"]["structure"] = args.structure;
  doc["config"]["depth"] = args.depth;
  doc["levels"] = hierarchy.levels.size();
  doc["final_nodes"] = hierarchy.final_node_count();
  doc["output"] = args.output;
  std::cout << doc.dump(2) << "\n";
  return kExitSuccess;
}

struct SynthArgs {
  std::string output_dir;
  dspool::SynthConfig cfg;
  std::vector<std::string> signal_groups;
  std::vector<std::string> distractor_groups;
  double distractor_noise_scale = 1.0;
};

dspool::Cluster parse_view_list(const std::string& text) {
  dspool::Cluster views;
  std::istringstream is(text);
  std::string token;
  while (std::getline(is, token, ',')) {
    try {
      views.push_back(std::stoll(token));
    } catch (const std::exception&) {
      throw dspool::ValidationError("cannot parse view index '" + token + "'");
    }
  }
  return views;
}

int run_synth(const SynthArgs& args) {
  dspool::SynthConfig cfg = args.cfg;
  for (const std::string& text : args.signal_groups) {
    cfg.groups.push_back({parse_view_list(text), true, 1.0});
  }
  for (const std::string& text : args.distractor_groups) {
    cfg.groups.push_back(
        {parse_view_list(text), false, args.distractor_noise_scale});
  }
  const dspool::Dataset ds = dspool::generate_synthetic(cfg);
  dspool::save_dataset(ds, args.output_dir);

  ordered_json doc;
  doc["config"] = {{"classes", cfg.classes},
                   {"objects_per_class", cfg.objects_per_class},
                   {"views", cfg.views},
                   {"channels", cfg.channels},
                   {"noise_sigma", cfg.noise_sigma},
                   {"seed", cfg.seed},
                   {"groups", cfg.groups.size()},
                   {"distractor_noise_scale", args.distractor_noise_scale}};
  doc["objects"] = ds.objects.size();
  doc["manifest"] = args.output_dir + "/manifest.json";
  std::cout << doc.dump(2) << "\n";
  return kExitSuccess;
}

struct TrainArgs {
  std::string manifest;
  std::string mode = "fast";
  std::string structure = "ds-alt-f-max";
  int depth = 4;
  std::string hierarchy_in;
  std::string hierarchy_out;
  std::string classifier_out;
  std::string front_end_out;
  double learning_rate = -1.0;  // sentinel: mode default
  int epochs = -1;              // sentinel: mode default
  double l2 = 1e-4;
  bool freeze_front_end = false;
  dspool::ReplicatorConfig replicator;
};

int run_train(const TrainArgs& args) {
  const dspool::Dataset train = dspool::load_manifest(args.manifest);
  const dspool::PoolStructure structure =
      dspool::PoolStructure::from_name(args.structure, args.depth);

  ordered_json doc;
  doc["config"] = replicator_json(args.replicator);
  doc["config"]["manifest"] = args.manifest;
  doc["config"]["mode"] = args.mode;
  doc["config"]["structure"] = args.structure;
  doc["config"]["depth"] = args.depth;
  doc["config"]["l2"] = args.l2;

  if (args.mode == "fast") {
    dspool::ClassifierConfig cfg;
    cfg.l2 = args.l2;
    if (args.learning_rate >= 0.0) cfg.learning_rate = args.learning_rate;
    if (args.epochs >= 0) cfg.epochs = args.epochs;
    doc["config"]["learning_rate"] = cfg.learning_rate;
    doc["config"]["epochs"] = cfg.epochs;

    const dspool::FastTrainResult result =
        dspool::fast_train(train, structure, cfg, args.replicator);
    for (const std::string& w : result.warnings) {
      std::cerr << "warning: " << w << "\n";
    }
    if (!args.hierarchy_out.empty()) {
      dspool::save_hierarchy(result.hierarchy, args.hierarchy_out);
    }
    if (!args.classifier_out.empty()) {
      dspool::save_classifier(result.classifier, args.classifier_out);
    }
    doc["warnings"] = result.warnings;
    doc["train_accuracy"] =
        dspool::evaluate(train, result.hierarchy, nullptr, result.classifier);
    doc["objects"] = train.objects.size();
    std::cout << doc.dump(2) << "\n";
    return kExitSuccess;
  }
  if (args.mode != "e2e") {
    throw dspool::ValidationError("unknown training mode '" + args.mode +
                                  "' (expected fast or e2e)");
  }

  dspool::ClusteringHierarchy hierarchy;
  if (args.hierarchy_in.empty()) {
    std::vector<Matrix> features;
    features.reserve(train.objects.size());
    for (const auto& obj : train.objects) features.push_back(obj.features);
    hierarchy =
        dspool::build_universal_hierarchy(features, structure, args.replicator);
  } else {
    hierarchy = dspool::load_hierarchy(args.hierarchy_in, args.depth);
  }

  dspool::EndToEndConfig cfg;
  cfg.l2 = args.l2;
  cfg.train_front_end = !args.freeze_front_end;
  if (args.learning_rate >= 0.0) cfg.learning_rate = args.learning_rate;
  if (args.epochs >= 0) cfg.epochs = args.epochs;
  doc["config"]["learning_rate"] = cfg.learning_rate;
  doc["config"]["epochs"] = cfg.epochs;
  doc["config"]["train_front_end"] = cfg.train_front_end;

  const dspool::EndToEndResult result =
      dspool::end_to_end_train(train, hierarchy, cfg);
  if (!args.hierarchy_out.empty()) {
    dspool::save_hierarchy(hierarchy, args.hierarchy_out);
  }
  if (!args.classifier_out.empty()) {
    dspool::save_classifier(result.classifier, args.classifier_out);
  }
  if (!args.front_end_out.empty()) {
    dspool::save_front_end(result.front_end, args.front_end_out);
  }
  doc["initial_loss"] =
      result.loss_history.empty() ? 0.0 : result.loss_history.front();
  doc["final_loss"] =
      result.loss_history.empty() ? 0.0 : result.loss_history.back();
  doc["loss_decreased"] = !result.loss_history.empty() &&
                          result.loss_history.back() <
                              result.loss_history.front();
  doc["train_accuracy"] = dspool::evaluate(train, hierarchy,
                                           &result.front_end,
                                           result.classifier);
  doc["objects"] = train.objects.size();
  std::cout << doc.dump(2) << "\n";
  return kExitSuccess;
}

struct EvalArgs {
  std::string manifest;
  std::string hierarchy_path;
  std::string classifier_path;
  std::string front_end_path;
  int depth = 4;
};

int run_eval(const EvalArgs& args) {
  const dspool::Dataset test = dspool::load_manifest(args.manifest);
  const dspool::ClusteringHierarchy hierarchy =
      dspool::load_hierarchy(args.hierarchy_path, args.depth);
  const dspool::LinearClassifier classifier =
      dspool::load_classifier(args.classifier_path);
  std::optional<dspool::FrontEnd> front_end;
  if (!args.front_end_path.empty()) {
    front_end = dspool::load_front_end(args.front_end_path);
  }

  ordered_json doc;
  doc["config"] = {{"manifest", args.manifest},
                   {"hierarchy", args.hierarchy_path},
                   {"classifier", args.classifier_path},
                   {"front_end", args.front_end_path}};
  doc["accuracy"] = dspool::evaluate(test, hierarchy,
                                     front_end ? &*front_end : nullptr,
                                     classifier);
  doc["objects"] = test.objects.size();
  std::cout << doc.dump(2) << "\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dspool: recurrent dominant-set clustering and pooling for multi-view "
      "features"};
  app.require_subcommand(1);

  ClusterArgs cluster_args;
  CLI::App* cluster = app.add_subcommand(
      "cluster", "Partition a graph (or a feature file's similarity graph) "
                 "into dominant sets");
  cluster->add_option("-i,--input", cluster_args.input,
                      "Feature file, or affinity file with --affinity")
      ->required();
  cluster->add_flag("--affinity", cluster_args.affinity_input,
                    "Treat the input as an affinity matrix (square, 'n n' "
                    "header)");
  cluster->add_option("-o,--output", cluster_args.output,
                      "Partition JSON path (default: stdout)");
  add_replicator_options(cluster, cluster_args.replicator);

  PoolArgs pool_args;
  CLI::App* pool = app.add_subcommand(
      "pool", "Run the recurrent cluster-and-pool layer over one feature file");
  pool->add_option("-i,--input", pool_args.input, "Feature file (views x channels)")
      ->required();
  pool->add_option("-s,--structure", pool_args.structure,
                   "f-max | ds-avg-f-max | ds-max-f-avg | ds-alt-f-max")
      ->capture_default_str();
  pool->add_option("--depth", pool_args.depth, "Recurrence budget for ds-alt")
      ->capture_default_str();
  pool->add_option("--hierarchy", pool_args.hierarchy_path,
                   "Replay this hierarchy instead of clustering the input");
  pool->add_option("-o,--output", pool_args.output,
                   "Pooled vector path (default: stdout)");
  pool->add_option("--trace", pool_args.trace_path,
                   "Also write the forward trace as JSON");
  add_replicator_options(pool, pool_args.replicator);

  GradcheckArgs grad_args;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck",
      "Compare the exact backward pass against central finite differences");
  gradcheck->add_option("-i,--input", grad_args.input,
                        "Feature file (default: a seeded random matrix)");
  gradcheck->add_option("--rows", grad_args.rows,
                        "Rows of the seeded matrix when no input is given")
      ->capture_default_str();
  gradcheck->add_option("--channels", grad_args.channels,
                        "Channels of the seeded matrix when no input is given")
      ->capture_default_str();
  gradcheck->add_option("--seed", grad_args.seed, "Seed for the generated input")
      ->capture_default_str();
  gradcheck->add_option("-s,--structure", grad_args.structure,
                        "f-max | ds-avg-f-max | ds-max-f-avg | ds-alt-f-max")
      ->capture_default_str();
  gradcheck->add_option("--depth", grad_args.depth, "Recurrence budget for ds-alt")
      ->capture_default_str();
  gradcheck->add_option("--hierarchy", grad_args.hierarchy_path,
                        "Freeze clustering to this hierarchy (default: the "
                        "input's own)");
  gradcheck->add_option("--eps", grad_args.eps, "Central-difference step")
      ->capture_default_str();
  gradcheck->add_option("--tie-margin", grad_args.tie_margin,
                        "Top-2 gap below which a max channel is excluded "
                        "(-1: twice eps)")
      ->capture_default_str();
  gradcheck->add_option("--threshold", grad_args.threshold,
                        "Exit nonzero when the max relative error reaches this")
      ->capture_default_str();
  gradcheck->add_option("-o,--output", grad_args.output,
                        "Report JSON path (default: stdout)");
  add_replicator_options(gradcheck, grad_args.replicator);

  HierarchyArgs hierarchy_args;
  CLI::App* hierarchy = app.add_subcommand(
      "hierarchy", "Build the shared clustering hierarchy from a dataset");
  hierarchy->add_option("-m,--manifest", hierarchy_args.manifest,
                        "Dataset manifest JSON")
      ->required();
  hierarchy->add_option("-s,--structure", hierarchy_args.structure,
                        "f-max | ds-avg-f-max | ds-max-f-avg | ds-alt-f-max")
      ->capture_default_str();
  hierarchy->add_option("--depth", hierarchy_args.depth,
                        "Recurrence budget for ds-alt")
      ->capture_default_str();
  hierarchy->add_option("-o,--output", hierarchy_args.output,
                        "Hierarchy JSON path")
      ->required();
  add_replicator_options(hierarchy, hierarchy_args.replicator);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a deterministic synthetic multi-view dataset");
  synth->add_option("-o,--output-dir", synth_args.output_dir,
                    "Directory for feature files and manifest.json")
      ->required();
  synth->add_option("--classes", synth_args.cfg.classes, "Number of classes")
      ->capture_default_str();
  synth->add_option("--objects-per-class", synth_args.cfg.objects_per_class,
                    "Objects per class")
      ->capture_default_str();
  synth->add_option("--views", synth_args.cfg.views, "Views per object")
      ->capture_default_str();
  synth->add_option("--channels", synth_args.cfg.channels, "Feature channels")
      ->capture_default_str();
  synth->add_option("--noise-sigma", synth_args.cfg.noise_sigma,
                    "Gaussian noise level")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.cfg.seed, "Dataset seed")
      ->capture_default_str();
  synth->add_option("--baseline", synth_args.cfg.baseline,
                    "Constant added to every prototype channel")
      ->capture_default_str();
  synth->add_option("--proto-min", synth_args.cfg.prototype_min,
                    "Prototype entry lower bound")
      ->capture_default_str();
  synth->add_option("--proto-max", synth_args.cfg.prototype_max,
                    "Prototype entry upper bound")
      ->capture_default_str();
  synth->add_option("--group", synth_args.signal_groups,
                    "Comma-separated view indices forming one class-signal "
                    "view-group (repeatable; default: all views in one group)");
  synth->add_option("--distractor-group", synth_args.distractor_groups,
                    "View-group whose prototype is shared across classes "
                    "(repeatable)");
  synth->add_option("--distractor-noise-scale",
                    synth_args.distractor_noise_scale,
                    "Noise multiplier for distractor groups")
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Train on a dataset manifest (fast: hierarchy + classifier; "
               "e2e: front end + classifier through a fixed hierarchy)");
  train->add_option("-m,--manifest", train_args.manifest, "Training manifest")
      ->required();
  train->add_option("--mode", train_args.mode, "fast | e2e")
      ->capture_default_str();
  train->add_option("-s,--structure", train_args.structure,
                    "f-max | ds-avg-f-max | ds-max-f-avg | ds-alt-f-max")
      ->capture_default_str();
  train->add_option("--depth", train_args.depth, "Recurrence budget for ds-alt")
      ->capture_default_str();
  train->add_option("--hierarchy", train_args.hierarchy_in,
                    "e2e: reuse this hierarchy instead of building one");
  train->add_option("--hierarchy-out", train_args.hierarchy_out,
                    "Write the hierarchy JSON here");
  train->add_option("--classifier-out", train_args.classifier_out,
                    "Write the classifier JSON here");
  train->add_option("--front-end-out", train_args.front_end_out,
                    "e2e: write the trained front end JSON here");
  train->add_option("--learning-rate", train_args.learning_rate,
                    "Step size (default: 0.5 fast, 0.05 e2e)");
  train->add_option("--epochs", train_args.epochs,
                    "Full-batch epochs (default: 300 fast, 200 e2e)");
  train->add_option("--l2", train_args.l2, "L2 strength on classifier weights")
      ->capture_default_str();
  train->add_flag("--freeze-front-end", train_args.freeze_front_end,
                  "e2e: keep the front end at identity");
  add_replicator_options(train, train_args.replicator);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a trained classifier on a dataset manifest");
  eval->add_option("-m,--manifest", eval_args.manifest, "Test manifest")
      ->required();
  eval->add_option("--hierarchy", eval_args.hierarchy_path, "Hierarchy JSON")
      ->required();
  eval->add_option("--classifier", eval_args.classifier_path, "Classifier JSON")
      ->required();
  eval->add_option("--front-end", eval_args.front_end_path,
                   "Optional front end JSON");
  eval->add_option("--depth", eval_args.depth,
                   "Recurrence budget used to validate the hierarchy")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0 through CLI11; real parse problems are usage
    // errors regardless of CLI11's own code.
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cluster->parsed()) return run_cluster(cluster_args);
    if (pool->parsed()) return run_pool(pool_args);
    if (gradcheck->parsed()) return run_gradcheck(grad_args);
    if (hierarchy->parsed()) return run_hierarchy(hierarchy_args);
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
  } catch (const dspool::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const dspool::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
