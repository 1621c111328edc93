#include "dspool/io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dspool/affinity.hpp"

namespace dspool {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& what) {
  throw ValidationError(what);
}

ordered_json parse_json(const std::string& text, const char* what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("malformed ") + what + ": " + e.what());
  }
}

ordered_json matrix_to_json_rows(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json_rows(const ordered_json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) {
    malformed(std::string(what) + " must be a nonempty array of rows");
  }
  const Index r = static_cast<Index>(rows.size());
  if (!rows[0].is_array() || rows[0].empty()) {
    malformed(std::string(what) + " rows must be nonempty arrays");
  }
  const Index c = static_cast<Index>(rows[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) {
      malformed(std::string(what) + " rows must all have the same length");
    }
    for (Index j = 0; j < c; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) malformed(std::string(what) + " entries must be numbers");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

void require_safe_id(const std::string& id) {
  if (id.empty()) throw ValidationError("object id must not be empty");
  for (char ch : id) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' &&
        ch != '-' && ch != '.') {
      throw ValidationError("object id '" + id +
                            "' is not filename-safe (use [A-Za-z0-9._-])");
    }
  }
}

}  // namespace

std::string matrix_to_text(const Matrix& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << m.rows() << " " << m.cols() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << " ";
      os << m(i, j);
    }
    os << "\n";
  }
  return os.str();
}

void save_matrix_text(const Matrix& m, const std::string& path) {
  write_text_file(path, matrix_to_text(m));
}

Matrix load_matrix_text(const std::string& path) {
  std::istringstream is(read_text_file(path));
  long long rows = 0;
  long long cols = 0;
  if (!(is >> rows >> cols) || rows < 1 || cols < 1) {
    throw ValidationError(path + ": expected a 'rows cols' header with "
                          "positive counts");
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!(is >> m(i, j))) {
        throw ValidationError(path + ": expected " + std::to_string(rows * cols) +
                              " values, ran out at row " + std::to_string(i));
      }
    }
  }
  std::string extra;
  if (is >> extra) {
    throw ValidationError(path + ": trailing content after the declared " +
                          std::to_string(rows * cols) + " values");
  }
  return m;
}

Matrix load_feature_file(const std::string& path) {
  Matrix m = load_matrix_text(path);
  try {
    validate_features(m);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return m;
}

Matrix load_affinity_file(const std::string& path) {
  Matrix m = load_matrix_text(path);
  try {
    if (m.rows() != m.cols()) {
      throw ValidationError("affinity files need an 'n n' square header");
    }
    validate_affinity(m);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return m;
}

std::string partition_to_json(const Partition& p) {
  ordered_json clusters = ordered_json::array();
  for (const Cluster& cluster : p.clusters) clusters.push_back(cluster);
  ordered_json doc;
  doc["clusters"] = std::move(clusters);
  return doc.dump() + "\n";
}

Partition partition_from_json(const std::string& text) {
  const ordered_json doc = parse_json(text, "partition");
  if (!doc.is_object() || !doc.contains("clusters") ||
      !doc["clusters"].is_array()) {
    malformed("partition must be an object with a 'clusters' array");
  }
  Partition p;
  for (const auto& cluster : doc["clusters"]) {
    if (!cluster.is_array()) malformed("clusters must be arrays of indices");
    Cluster members;
    for (const auto& v : cluster) {
      if (!v.is_number_integer()) malformed("vertex indices must be integers");
      members.push_back(v.get<Index>());
    }
    std::sort(members.begin(), members.end());
    p.clusters.push_back(std::move(members));
  }
  return p;
}

Dataset load_manifest(const std::string& path) {
  const ordered_json doc = parse_json(read_text_file(path), "manifest");
  if (!doc.is_object() || !doc.contains("classes") || !doc.contains("objects") ||
      !doc["classes"].is_number_integer() || !doc["objects"].is_array()) {
    malformed(path + ": manifest needs an integer 'classes' and an "
                     "'objects' array");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  Dataset ds;
  ds.classes = doc["classes"].get<int>();
  for (const auto& entry : doc["objects"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("label") ||
        !entry.contains("features") || !entry["id"].is_string() ||
        !entry["label"].is_number_integer() || !entry["features"].is_string()) {
      malformed(path + ": each object needs 'id', 'label', and a 'features' "
                       "path");
    }
    ObjectExample obj;
    obj.id = entry["id"].get<std::string>();
    obj.label = entry["label"].get<int>();
    const std::filesystem::path rel = entry["features"].get<std::string>();
    obj.features =
        load_feature_file((rel.is_absolute() ? rel : base / rel).string());
    ds.objects.push_back(std::move(obj));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& directory,
                  const std::string& manifest_name) {
  ds.validate();
  for (const ObjectExample& obj : ds.objects) require_safe_id(obj.id);
  {
    std::vector<std::string> ids;
    for (const ObjectExample& obj : ds.objects) ids.push_back(obj.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw ValidationError("object ids must be unique to form file names");
    }
  }

  const std::filesystem::path base = directory;
  std::filesystem::create_directories(base);

  ordered_json doc;
  doc["classes"] = ds.classes;
  doc["objects"] = ordered_json::array();
  for (const ObjectExample& obj : ds.objects) {
    const std::string file = obj.id + ".txt";
    save_matrix_text(obj.features, (base / file).string());
    ordered_json entry;
    entry["id"] = obj.id;
    entry["label"] = obj.label;
    entry["features"] = file;
    doc["objects"].push_back(std::move(entry));
  }
  write_text_file((base / manifest_name).string(), doc.dump(2) + "\n");
}

std::string classifier_to_json(const LinearClassifier& clf) {
  ordered_json doc;
  doc["weights"] = matrix_to_json_rows(clf.weights);
  doc["bias"] = std::vector<double>(clf.bias.data(),
                                    clf.bias.data() + clf.bias.size());
  doc["config"] = {{"learning_rate", clf.config.learning_rate},
                   {"epochs", clf.config.epochs},
                   {"l2", clf.config.l2}};
  return doc.dump(2) + "\n";
}

LinearClassifier classifier_from_json(const std::string& text) {
  const ordered_json doc = parse_json(text, "classifier");
  if (!doc.is_object() || !doc.contains("weights") || !doc.contains("bias") ||
      !doc["bias"].is_array()) {
    malformed("classifier needs 'weights' rows and a 'bias' array");
  }
  LinearClassifier clf;
  clf.weights = matrix_from_json_rows(doc["weights"], "classifier weights");
  clf.bias.resize(static_cast<Index>(doc["bias"].size()));
  for (Index i = 0; i < clf.bias.size(); ++i) {
    const auto& v = doc["bias"][static_cast<std::size_t>(i)];
    if (!v.is_number()) malformed("classifier bias entries must be numbers");
    clf.bias(i) = v.get<double>();
  }
  if (clf.bias.size() != clf.weights.rows()) {
    malformed("classifier bias length must match the weight rows");
  }
  if (doc.contains("config") && doc["config"].is_object()) {
    const auto& c = doc["config"];
    if (c.contains("learning_rate")) {
      clf.config.learning_rate = c["learning_rate"].get<double>();
    }
    if (c.contains("epochs")) clf.config.epochs = c["epochs"].get<int>();
    if (c.contains("l2")) clf.config.l2 = c["l2"].get<double>();
  }
  return clf;
}

void save_classifier(const LinearClassifier& clf, const std::string& path) {
  write_text_file(path, classifier_to_json(clf));
}

LinearClassifier load_classifier(const std::string& path) {
  return classifier_from_json(read_text_file(path));
}

std::string front_end_to_json(const FrontEnd& fe) {
  ordered_json doc;
  doc["weights"] = matrix_to_json_rows(fe.weights);
  doc["bias"] = std::vector<double>(fe.bias.data(),
                                    fe.bias.data() + fe.bias.size());
  return doc.dump(2) + "\n";
}

FrontEnd front_end_from_json(const std::string& text) {
  const ordered_json doc = parse_json(text, "front end");
  if (!doc.is_object() || !doc.contains("weights") || !doc.contains("bias") ||
      !doc["bias"].is_array()) {
    malformed("front end needs 'weights' rows and a 'bias' array");
  }
  FrontEnd fe;
  fe.weights = matrix_from_json_rows(doc["weights"], "front end weights");
  fe.bias.resize(static_cast<Index>(doc["bias"].size()));
  for (Index i = 0; i < fe.bias.size(); ++i) {
    const auto& v = doc["bias"][static_cast<std::size_t>(i)];
    if (!v.is_number()) malformed("front end bias entries must be numbers");
    fe.bias(i) = v.get<double>();
  }
  if (fe.bias.size() != fe.weights.cols()) {
    malformed("front end bias length must match the weight columns");
  }
  return fe;
}

void save_front_end(const FrontEnd& fe, const std::string& path) {
  write_text_file(path, front_end_to_json(fe));
}

FrontEnd load_front_end(const std::string& path) {
  return front_end_from_json(read_text_file(path));
}

std::string trace_to_json(const RecurrenceTrace& trace) {
  ordered_json doc;
  doc["input_rows"] = trace.input_rows;
  doc["channels"] = trace.channels;
  doc["levels"] = ordered_json::array();
  for (const LevelTrace& level : trace.levels) {
    ordered_json entry;
    entry["node_count"] = level.node_count;
    entry["partition"] = ordered_json::array();
    for (const Cluster& cluster : level.partition.clusters) {
      entry["partition"].push_back(cluster);
    }
    entry["mode"] = to_string(level.mode);
    entry["argmax"] = level.argmax;
    doc["levels"].push_back(std::move(entry));
  }
  doc["final_mode"] = to_string(trace.final_mode);
  doc["final_rows"] = trace.final_rows;
  doc["final_argmax"] = trace.final_argmax;
  return doc.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw ValidationError("failed while reading '" + path + "'");
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw ValidationError("failed while writing '" + path + "'");
}

}  // namespace dspool
