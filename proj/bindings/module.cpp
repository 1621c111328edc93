// Python bindings for the core operations: affinity construction,
// dominant-set extraction, recurrent cluster-pooling with gradients,
// shared hierarchies, and the training pipeline.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dspool/affinity.hpp"
#include "dspool/cluster_pool.hpp"
#include "dspool/domset.hpp"
#include "dspool/hierarchy.hpp"
#include "dspool/io.hpp"
#include "dspool/partition.hpp"
#include "dspool/pipeline.hpp"
#include "dspool/types.hpp"

namespace py = pybind11;
using namespace dspool;

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Differentiable recurrent dominant-set clustering and pooling for "
      "multi-view features";

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  py::enum_<PoolMode>(m, "PoolMode")
      .value("MAX", PoolMode::Max)
      .value("AVERAGE", PoolMode::Average);

  // ----- partitions ---------------------------------------------------
  py::class_<Partition>(m, "Partition")
      .def(py::init<>())
      .def(py::init([](std::vector<Cluster> clusters) {
             Partition p;
             p.clusters = std::move(clusters);
             return p;
           }),
           py::arg("clusters"))
      .def_readwrite("clusters", &Partition::clusters)
      .def("node_count", &Partition::node_count)
      .def("all_singletons", &Partition::all_singletons)
      .def("validate", &Partition::validate, py::arg("n"))
      .def("__len__", [](const Partition& p) { return p.clusters.size(); })
      .def("__repr__", [](const Partition& p) {
        std::string s = "Partition([";
        for (std::size_t k = 0; k < p.clusters.size(); ++k) {
          s += k == 0 ? "[" : ", [";
          for (std::size_t i = 0; i < p.clusters[k].size(); ++i) {
            if (i > 0) s += ", ";
            s += std::to_string(p.clusters[k][i]);
          }
          s += "]";
        }
        return s + "])";
      });

  // ----- affinity -----------------------------------------------------
  m.def("validate_features", &validate_features, py::arg("features"),
        "Raise ValidationError unless the matrix is nonempty, finite, and "
        "nonnegative (one view per row).");
  m.def("validate_affinity", &validate_affinity, py::arg("affinity"),
        "Raise ValidationError unless square, symmetric, zero-diagonal, "
        "finite, and nonnegative.");
  m.def("build_affinity", &build_affinity, py::arg("features"),
        "Inner-product view similarity graph with a zero diagonal.");
  m.def("average_affinities", &average_affinities, py::arg("affinities"),
        "Entrywise mean of same-sized affinity matrices.");

  // ----- dominant sets ------------------------------------------------
  py::class_<ReplicatorConfig>(m, "ReplicatorConfig")
      .def(py::init([](double tol, int max_iter, double support_threshold) {
             ReplicatorConfig cfg;
             cfg.tol = tol;
             cfg.max_iter = max_iter;
             cfg.support_threshold = support_threshold;
             return cfg;
           }),
           py::arg("tol") = 1e-8, py::arg("max_iter") = 10000,
           py::arg("support_threshold") = 1e-5)
      .def_readwrite("tol", &ReplicatorConfig::tol)
      .def_readwrite("max_iter", &ReplicatorConfig::max_iter)
      .def_readwrite("support_threshold", &ReplicatorConfig::support_threshold);

  py::class_<DominantSetResult>(m, "DominantSetResult")
      .def_readonly("support", &DominantSetResult::support)
      .def_readonly("characteristic", &DominantSetResult::characteristic)
      .def_readonly("cohesiveness", &DominantSetResult::cohesiveness)
      .def_readonly("iterations", &DominantSetResult::iterations);

  py::class_<DominantSetCheck>(m, "DominantSetCheck")
      .def_readonly("ok", &DominantSetCheck::ok)
      .def_readonly("violation", &DominantSetCheck::violation);

  m.def("subset_weight", &subset_weight, py::arg("members"), py::arg("vertex"),
        py::arg("affinity"), py::arg("size_cap") = kWeightSizeCap,
        "Recursive vertex weight w_S(i); 1 for a singleton set.");
  m.def("total_weight", &total_weight, py::arg("members"), py::arg("affinity"),
        py::arg("size_cap") = kWeightSizeCap,
        "Total weight W(S), the sum of member weights.");
  m.def("check_dominant_set", &check_dominant_set, py::arg("members"),
        py::arg("affinity"), py::arg("tol"),
        py::arg("size_cap") = kWeightSizeCap,
        "Definition check; on failure the result names the violated "
        "condition.");
  m.def("verify_dominant_set", &verify_dominant_set, py::arg("members"),
        py::arg("affinity"), py::arg("tol"),
        py::arg("size_cap") = kWeightSizeCap);
  m.def("brute_force_dominant_sets", &brute_force_dominant_sets,
        py::arg("affinity"), py::arg("tol") = 1e-6,
        "Every subset passing the dominant-set check (graphs up to 10 "
        "vertices).");
  m.def("replicator_step", &replicator_step, py::arg("x"), py::arg("affinity"),
        "One multiplicative update; None when the payoff is zero.");
  m.def("extract_dominant_set", &extract_dominant_set, py::arg("affinity"),
        py::arg("config") = ReplicatorConfig{},
        "Replicator dynamics from the barycenter.");
  m.def("peel_partition", &peel_partition, py::arg("affinity"),
        py::arg("config") = ReplicatorConfig{},
        "Extract, remove, and repeat until every vertex is assigned.");
  m.def("induced_subgraph", &induced_subgraph, py::arg("affinity"),
        py::arg("vertices"));

  // ----- pooling structures and the recurrent layer --------------------
  py::class_<PoolStructure>(m, "PoolStructure")
      .def(py::init<>())
      .def_static("from_name", &PoolStructure::from_name, py::arg("name"),
                  py::arg("depth") = 4,
                  "One of: f-max, ds-avg-f-max, ds-max-f-avg, ds-alt-f-max.")
      .def_readwrite("max_recurrence_depth",
                     &PoolStructure::max_recurrence_depth)
      .def("recurrence_budget", &PoolStructure::recurrence_budget)
      .def("mode_at", &PoolStructure::mode_at, py::arg("level"))
      .def("final_mode", &PoolStructure::final_mode)
      .def("name", &PoolStructure::name)
      .def("__repr__", [](const PoolStructure& s) {
        return "PoolStructure('" + s.name() + "')";
      });

  py::class_<LevelTrace>(m, "LevelTrace")
      .def_readonly("node_count", &LevelTrace::node_count)
      .def_readonly("partition", &LevelTrace::partition)
      .def_readonly("mode", &LevelTrace::mode)
      .def_readonly("argmax", &LevelTrace::argmax);

  py::class_<RecurrenceTrace>(m, "RecurrenceTrace")
      .def_readonly("input_rows", &RecurrenceTrace::input_rows)
      .def_readonly("channels", &RecurrenceTrace::channels)
      .def_readonly("levels", &RecurrenceTrace::levels)
      .def_readonly("final_mode", &RecurrenceTrace::final_mode)
      .def_readonly("final_rows", &RecurrenceTrace::final_rows)
      .def_readonly("final_argmax", &RecurrenceTrace::final_argmax)
      .def("to_json", &trace_to_json);

  py::class_<ForwardResult>(m, "ForwardResult")
      .def_readonly("pooled", &ForwardResult::pooled)
      .def_readonly("trace", &ForwardResult::trace);

  py::class_<GradientCheckResult>(m, "GradientCheckResult")
      .def_readonly("max_relative_error",
                    &GradientCheckResult::max_relative_error)
      .def_readonly("excluded_channels",
                    &GradientCheckResult::excluded_channels)
      .def_readonly("checked_entries", &GradientCheckResult::checked_entries);

  // ----- shared hierarchies --------------------------------------------
  py::class_<HierarchyLevel>(m, "HierarchyLevel")
      .def(py::init<>())
      .def(py::init([](Partition partition, PoolMode mode) {
             return HierarchyLevel{std::move(partition), mode};
           }),
           py::arg("partition"), py::arg("mode"))
      .def_readwrite("partition", &HierarchyLevel::partition)
      .def_readwrite("mode", &HierarchyLevel::mode);

  py::class_<ClusteringHierarchy>(m, "ClusteringHierarchy")
      .def(py::init<>())
      .def_readwrite("views_per_object", &ClusteringHierarchy::views_per_object)
      .def_readwrite("structure_name", &ClusteringHierarchy::structure_name)
      .def_readwrite("levels", &ClusteringHierarchy::levels)
      .def_readwrite("final_mode", &ClusteringHierarchy::final_mode)
      .def("final_node_count", &ClusteringHierarchy::final_node_count)
      .def("validate_structure", &ClusteringHierarchy::validate_structure)
      .def("validate_termination", &ClusteringHierarchy::validate_termination,
           py::arg("max_depth") = 4)
      .def("to_json", &hierarchy_to_json)
      .def_static("from_json", &hierarchy_from_json, py::arg("text"),
                  py::arg("max_depth") = 4);

  m.def(
      "forward",
      [](const Matrix& X0, const PoolStructure& structure,
         const ClusteringHierarchy* hierarchy, const ReplicatorConfig& cfg) {
        return forward(X0, structure, hierarchy, cfg);
      },
      py::arg("features"), py::arg("structure") = PoolStructure{},
      py::arg("hierarchy") = static_cast<const ClusteringHierarchy*>(nullptr),
      py::arg("config") = ReplicatorConfig{},
      "Recurrent clustering and pooling of one object's view matrix; with a "
      "hierarchy, its recorded partitions are replayed instead.");
  m.def("backward", &backward, py::arg("grad_pooled"), py::arg("trace"),
        "Gradient of the pooled row with respect to the input views.");
  m.def("gradient_check", &gradient_check, py::arg("features"),
        py::arg("hierarchy"), py::arg("eps") = 1e-5,
        py::arg("tie_margin") = -1.0,
        "Central differences against backward(); tie-ambiguous max channels "
        "are excluded and reported.");

  m.def("build_universal_hierarchy", &build_universal_hierarchy,
        py::arg("objects"), py::arg("structure"),
        py::arg("config") = ReplicatorConfig{},
        "Shared clustering scheme: per recurrence, average the per-object "
        "affinities, partition the average, pool every object with it.");
  m.def("apply_hierarchy", &apply_hierarchy, py::arg("features"),
        py::arg("hierarchy"),
        "forward() with clustering frozen to the hierarchy.");
  m.def("save_hierarchy", &save_hierarchy, py::arg("hierarchy"),
        py::arg("path"));
  m.def("load_hierarchy", &load_hierarchy, py::arg("path"),
        py::arg("max_depth") = 4);

  // ----- training pipeline ---------------------------------------------
  py::class_<ObjectExample>(m, "ObjectExample")
      .def(py::init<>())
      .def(py::init([](std::string id, int label, Matrix features) {
             return ObjectExample{std::move(id), label, std::move(features)};
           }),
           py::arg("id"), py::arg("label"), py::arg("features"))
      .def_readwrite("id", &ObjectExample::id)
      .def_readwrite("label", &ObjectExample::label)
      .def_readwrite("features", &ObjectExample::features);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def(py::init([](int classes, std::vector<ObjectExample> objects) {
             return Dataset{classes, std::move(objects)};
           }),
           py::arg("classes"), py::arg("objects"))
      .def_readwrite("classes", &Dataset::classes)
      .def_readwrite("objects", &Dataset::objects)
      .def("views", &Dataset::views)
      .def("channels", &Dataset::channels)
      .def("validate", &Dataset::validate)
      .def("__len__", [](const Dataset& ds) { return ds.objects.size(); });

  py::class_<SynthGroup>(m, "SynthGroup")
      .def(py::init([](Cluster views, bool class_signal, double noise_scale) {
             return SynthGroup{std::move(views), class_signal, noise_scale};
           }),
           py::arg("views"), py::arg("class_signal") = true,
           py::arg("noise_scale") = 1.0)
      .def_readwrite("views", &SynthGroup::views)
      .def_readwrite("class_signal", &SynthGroup::class_signal)
      .def_readwrite("noise_scale", &SynthGroup::noise_scale);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("classes", &SynthConfig::classes)
      .def_readwrite("objects_per_class", &SynthConfig::objects_per_class)
      .def_readwrite("views", &SynthConfig::views)
      .def_readwrite("channels", &SynthConfig::channels)
      .def_readwrite("groups", &SynthConfig::groups)
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("prototype_min", &SynthConfig::prototype_min)
      .def_readwrite("prototype_max", &SynthConfig::prototype_max)
      .def_readwrite("baseline", &SynthConfig::baseline)
      .def_readwrite("orthogonal_groups", &SynthConfig::orthogonal_groups);

  m.def("generate_synthetic", &generate_synthetic, py::arg("config"),
        "Deterministic synthetic multi-view dataset.");
  m.def("split_dataset", &split_dataset, py::arg("dataset"),
        py::arg("per_class_train"),
        "First objects of each class to train, the rest to test.");

  py::class_<ClassifierConfig>(m, "ClassifierConfig")
      .def(py::init([](double learning_rate, int epochs, double l2) {
             return ClassifierConfig{learning_rate, epochs, l2};
           }),
           py::arg("learning_rate") = 0.5, py::arg("epochs") = 300,
           py::arg("l2") = 1e-4)
      .def_readwrite("learning_rate", &ClassifierConfig::learning_rate)
      .def_readwrite("epochs", &ClassifierConfig::epochs)
      .def_readwrite("l2", &ClassifierConfig::l2);

  py::class_<LinearClassifier>(m, "LinearClassifier")
      .def_readonly("weights", &LinearClassifier::weights)
      .def_readonly("bias", &LinearClassifier::bias)
      .def_readonly("config", &LinearClassifier::config)
      .def("scores", &LinearClassifier::scores, py::arg("pooled"))
      .def("predict", &LinearClassifier::predict, py::arg("pooled"));

  m.def("train_classifier", &train_classifier, py::arg("examples"),
        py::arg("labels"), py::arg("classes"),
        py::arg("config") = ClassifierConfig{},
        "L2-regularized softmax regression by full-batch gradient descent.");

  py::class_<FrontEnd>(m, "FrontEnd")
      .def(py::init<>())
      .def_static("identity", &FrontEnd::identity, py::arg("channels"))
      .def_readwrite("weights", &FrontEnd::weights)
      .def_readwrite("bias", &FrontEnd::bias)
      .def("apply", &FrontEnd::apply, py::arg("views"),
           "Per-view linear map with a nonnegativity clamp.");

  py::class_<FastTrainResult>(m, "FastTrainResult")
      .def_readonly("hierarchy", &FastTrainResult::hierarchy)
      .def_readonly("classifier", &FastTrainResult::classifier)
      .def_readonly("pooled", &FastTrainResult::pooled)
      .def_readonly("warnings", &FastTrainResult::warnings);

  m.def("fast_train", &fast_train, py::arg("train"), py::arg("structure"),
        py::arg("classifier_config") = ClassifierConfig{},
        py::arg("replicator_config") = ReplicatorConfig{},
        "Build the shared hierarchy, pool the training set, fit the "
        "classifier on the pooled vectors.");

  py::class_<EndToEndConfig>(m, "EndToEndConfig")
      .def(py::init([](double learning_rate, int epochs, double l2,
                       bool train_front_end) {
             return EndToEndConfig{learning_rate, epochs, l2, train_front_end};
           }),
           py::arg("learning_rate") = 0.05, py::arg("epochs") = 200,
           py::arg("l2") = 1e-4, py::arg("train_front_end") = true)
      .def_readwrite("learning_rate", &EndToEndConfig::learning_rate)
      .def_readwrite("epochs", &EndToEndConfig::epochs)
      .def_readwrite("l2", &EndToEndConfig::l2)
      .def_readwrite("train_front_end", &EndToEndConfig::train_front_end);

  py::class_<EndToEndResult>(m, "EndToEndResult")
      .def_readonly("front_end", &EndToEndResult::front_end)
      .def_readonly("classifier", &EndToEndResult::classifier)
      .def_readonly("loss_history", &EndToEndResult::loss_history);

  m.def("end_to_end_train", &end_to_end_train, py::arg("train"),
        py::arg("hierarchy"), py::arg("config") = EndToEndConfig{},
        "Joint training of front end and classifier through the pooling "
        "layer, hierarchy fixed.");
  m.def(
      "evaluate",
      [](const Dataset& test, const ClusteringHierarchy& hierarchy,
         const LinearClassifier& classifier, const FrontEnd* front_end) {
        return evaluate(test, hierarchy, front_end, classifier);
      },
      py::arg("test"), py::arg("hierarchy"), py::arg("classifier"),
      py::arg("front_end") = static_cast<const FrontEnd*>(nullptr),
      "Fraction of correctly classified objects; ties break to the smallest "
      "class index.");

  // ----- file formats shared with the command-line tool -----------------
  m.def("load_feature_file", &load_feature_file, py::arg("path"));
  m.def("load_affinity_file", &load_affinity_file, py::arg("path"));
  m.def("save_matrix_text", &save_matrix_text, py::arg("matrix"),
        py::arg("path"));
  m.def("load_manifest", &load_manifest, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"),
        py::arg("directory"), py::arg("manifest_name") = "manifest.json");
  m.def("save_classifier", &save_classifier, py::arg("classifier"),
        py::arg("path"));
  m.def("load_classifier", &load_classifier, py::arg("path"));
  m.def("save_front_end", &save_front_end, py::arg("front_end"),
        py::arg("path"));
  m.def("load_front_end", &load_front_end, py::arg("path"));
}
