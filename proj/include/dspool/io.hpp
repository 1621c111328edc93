#pragma once

#include <string>

#include "dspool/partition.hpp"
#include "dspool/pipeline.hpp"
#include "dspool/types.hpp"

namespace dspool {

/// Text matrix format: header "rows cols", then one whitespace-separated
/// row of decimal floats per line.
Matrix load_matrix_text(const std::string& path);
void save_matrix_text(const Matrix& m, const std::string& path);
std::string matrix_to_text(const Matrix& m);

/// load_matrix_text plus the respective invariant checks. Affinity files
/// must carry an "n n" header.
Matrix load_feature_file(const std::string& path);
Matrix load_affinity_file(const std::string& path);

std::string partition_to_json(const Partition& p);
Partition partition_from_json(const std::string& text);

/// Manifest {"classes": C, "objects": [{"id", "label", "features"}]};
/// feature paths are resolved relative to the manifest's directory.
Dataset load_manifest(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& directory,
                  const std::string& manifest_name = "manifest.json");

std::string classifier_to_json(const LinearClassifier& clf);
LinearClassifier classifier_from_json(const std::string& text);
void save_classifier(const LinearClassifier& clf, const std::string& path);
LinearClassifier load_classifier(const std::string& path);

std::string front_end_to_json(const FrontEnd& fe);
FrontEnd front_end_from_json(const std::string& text);
void save_front_end(const FrontEnd& fe, const std::string& path);
FrontEnd load_front_end(const std::string& path);

std::string trace_to_json(const RecurrenceTrace& trace);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace dspool
