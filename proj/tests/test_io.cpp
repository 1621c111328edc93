#include "dspool/io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "dspool/cluster_pool.hpp"
#include "dspool/pipeline.hpp"
#include "dspool/types.hpp"
#include "test_util.hpp"

using dspool::Cluster;
using dspool::Dataset;
using dspool::FrontEnd;
using dspool::Index;
using dspool::LinearClassifier;
using dspool::Matrix;
using dspool::ObjectExample;
using dspool::Partition;
using dspool::PoolStructure;
using dspool::RowVector;
using dspool::ValidationError;
using dspool::Vector;

namespace {

std::uint64_t bits_of(double v) {
  std::uint64_t out;
  std::memcpy(&out, &v, sizeof(out));
  return out;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (bits_of(a(i, j)) != bits_of(b(i, j))) return false;
    }
  }
  return true;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("matrix text round-trips bitwise, including extreme values") {
  TempDir dir("dspool_io_matrix");

  Matrix m(3, 4);
  m << 0.0, 1.0 / 3.0, -2.5, 3.141592653589793,
      1e-300, 1e300, std::numeric_limits<double>::denorm_min(),
      std::numeric_limits<double>::max(),
      std::numeric_limits<double>::min(), -0.0, 123456789.123456789,
      -1.7e-12;
  dspool::save_matrix_text(m, dir.file("m.txt"));
  const Matrix back = dspool::load_matrix_text(dir.file("m.txt"));
  CHECK(bitwise_equal(m, back));
  CHECK(std::signbit(back(2, 1)));  // negative zero survives

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix r = testutil::random_features(6, 7, 3000 + seed);
    dspool::save_matrix_text(r, dir.file("r.txt"));
    CHECK(bitwise_equal(r, dspool::load_matrix_text(dir.file("r.txt"))));
  }

  const std::string text = dspool::matrix_to_text(m);
  CHECK(text.substr(0, 4) == "3 4\n");
}

TEST_CASE("matrix text loading rejects every malformed layout") {
  TempDir dir("dspool_io_badmatrix");

  dspool::write_text_file(dir.file("nohdr.txt"), "a b\n1 2\n");
  CHECK_THROWS_AS(dspool::load_matrix_text(dir.file("nohdr.txt")),
                  ValidationError);

  dspool::write_text_file(dir.file("zero.txt"), "0 3\n");
  CHECK_THROWS_AS(dspool::load_matrix_text(dir.file("zero.txt")),
                  ValidationError);

  dspool::write_text_file(dir.file("short.txt"), "2 2\n1 2 3\n");
  CHECK_THROWS_WITH_AS(dspool::load_matrix_text(dir.file("short.txt")),
                       doctest::Contains("ran out"), ValidationError);

  dspool::write_text_file(dir.file("long.txt"), "2 2\n1 2\n3 4\n5\n");
  CHECK_THROWS_WITH_AS(dspool::load_matrix_text(dir.file("long.txt")),
                       doctest::Contains("trailing"), ValidationError);

  CHECK_THROWS_WITH_AS(dspool::load_matrix_text(dir.file("absent.txt")),
                       doctest::Contains("cannot open"), ValidationError);
}

TEST_CASE("feature and affinity loaders enforce their invariants") {
  TempDir dir("dspool_io_checked");

  dspool::write_text_file(dir.file("neg.txt"), "2 2\n1 2\n-1 4\n");
  CHECK_THROWS_WITH_AS(dspool::load_feature_file(dir.file("neg.txt")),
                       doctest::Contains("neg.txt"), ValidationError);

  dspool::write_text_file(dir.file("ok.txt"), "2 2\n1 2\n0 4\n");
  CHECK(dspool::load_feature_file(dir.file("ok.txt"))(1, 1) == 4.0);

  dspool::write_text_file(dir.file("rect.txt"), "2 3\n0 1 2\n1 0 3\n");
  CHECK_THROWS_WITH_AS(dspool::load_affinity_file(dir.file("rect.txt")),
                       doctest::Contains("square"), ValidationError);

  dspool::write_text_file(dir.file("asym.txt"), "2 2\n0 1\n2 0\n");
  CHECK_THROWS_AS(dspool::load_affinity_file(dir.file("asym.txt")),
                  ValidationError);

  dspool::write_text_file(dir.file("diag.txt"), "2 2\n1 1\n1 0\n");
  CHECK_THROWS_AS(dspool::load_affinity_file(dir.file("diag.txt")),
                  ValidationError);

  dspool::write_text_file(dir.file("aff.txt"), "2 2\n0 0.5\n0.5 0\n");
  CHECK(dspool::load_affinity_file(dir.file("aff.txt"))(0, 1) == 0.5);
}

TEST_CASE("partitions round-trip through their JSON object form") {
  Partition p;
  p.clusters = {{0, 2, 5}, {1, 3}, {4}};
  const std::string text = dspool::partition_to_json(p);
  CHECK(text.find("\"clusters\"") != std::string::npos);
  CHECK(text.back() == '\n');

  const Partition back = dspool::partition_from_json(text);
  CHECK(back.clusters == p.clusters);

  const Partition unsorted =
      dspool::partition_from_json(R"({"clusters": [[5, 0, 2], [3, 1], [4]]})");
  CHECK(unsorted.clusters == p.clusters);

  CHECK_THROWS_AS(dspool::partition_from_json("[[0, 1]]"), ValidationError);
  CHECK_THROWS_AS(dspool::partition_from_json(R"({"clusters": [0, 1]})"),
                  ValidationError);
  CHECK_THROWS_AS(dspool::partition_from_json(R"({"clusters": [[0.5]]})"),
                  ValidationError);
  CHECK_THROWS_AS(dspool::partition_from_json("{"), ValidationError);
}

TEST_CASE("datasets round-trip through a manifest directory bitwise") {
  TempDir dir("dspool_io_dataset");

  Dataset ds;
  ds.classes = 2;
  for (int i = 0; i < 4; ++i) {
    ObjectExample obj;
    obj.id = "sample-" + std::to_string(i);
    obj.label = i % 2;
    obj.features = testutil::random_features(
        3, 5, 4000 + static_cast<std::uint64_t>(i));
    ds.objects.push_back(std::move(obj));
  }

  dspool::save_dataset(ds, dir.file("data"));
  CHECK(std::filesystem::exists(dir.path / "data" / "manifest.json"));
  CHECK(std::filesystem::exists(dir.path / "data" / "sample-0.txt"));

  const Dataset back = dspool::load_manifest(dir.file("data/manifest.json"));
  CHECK(back.classes == ds.classes);
  REQUIRE(back.objects.size() == ds.objects.size());
  for (std::size_t i = 0; i < ds.objects.size(); ++i) {
    CHECK(back.objects[i].id == ds.objects[i].id);
    CHECK(back.objects[i].label == ds.objects[i].label);
    CHECK(bitwise_equal(back.objects[i].features, ds.objects[i].features));
  }
}

TEST_CASE("dataset saving rejects unsafe and duplicate ids") {
  TempDir dir("dspool_io_badids");
  Dataset ds;
  ds.classes = 1;
  ObjectExample a;
  a.id = "ok";
  a.label = 0;
  a.features = testutil::random_features(2, 2, 1);
  ds.objects.push_back(a);

  Dataset unsafe = ds;
  unsafe.objects[0].id = "../escape";
  CHECK_THROWS_WITH_AS(dspool::save_dataset(unsafe, dir.file("d1")),
                       doctest::Contains("filename-safe"), ValidationError);

  Dataset dup = ds;
  dup.objects.push_back(a);
  CHECK_THROWS_WITH_AS(dspool::save_dataset(dup, dir.file("d2")),
                       doctest::Contains("unique"), ValidationError);
}

TEST_CASE("manifest loading reports structural problems") {
  TempDir dir("dspool_io_badmanifest");

  dspool::write_text_file(dir.file("m1.json"), "{}");
  CHECK_THROWS_AS(dspool::load_manifest(dir.file("m1.json")), ValidationError);

  dspool::write_text_file(
      dir.file("m2.json"),
      R"({"classes": 1, "objects": [{"id": "a", "label": 0}]})");
  CHECK_THROWS_AS(dspool::load_manifest(dir.file("m2.json")), ValidationError);

  // Feature paths resolve relative to the manifest's own directory.
  dspool::write_text_file(dir.file("feat.txt"), "1 2\n0.5 1.5\n");
  dspool::write_text_file(
      dir.file("m3.json"),
      R"({"classes": 1,
          "objects": [{"id": "a", "label": 0, "features": "feat.txt"}]})");
  const Dataset ds = dspool::load_manifest(dir.file("m3.json"));
  CHECK(ds.objects[0].features(0, 1) == 1.5);
}

TEST_CASE("classifier JSON round-trips weights, bias, and config bitwise") {
  TempDir dir("dspool_io_clf");

  LinearClassifier clf;
  clf.weights = testutil::random_features(3, 6, 71);
  clf.weights(0, 0) = -1e-300;  // serialization must not lose range
  clf.bias = Vector::LinSpaced(3, -0.5, 2.5);
  clf.config.learning_rate = 0.125;
  clf.config.epochs = 77;
  clf.config.l2 = 3e-4;

  dspool::save_classifier(clf, dir.file("clf.json"));
  const LinearClassifier back = dspool::load_classifier(dir.file("clf.json"));
  CHECK(bitwise_equal(back.weights, clf.weights));
  for (Index i = 0; i < 3; ++i) {
    CHECK(bits_of(back.bias(i)) == bits_of(clf.bias(i)));
  }
  CHECK(back.config.learning_rate == 0.125);
  CHECK(back.config.epochs == 77);
  CHECK(back.config.l2 == 3e-4);

  CHECK_THROWS_AS(
      dspool::classifier_from_json(R"({"weights": [[1, 2]], "bias": [0, 0]})"),
      ValidationError);
  CHECK_THROWS_AS(dspool::classifier_from_json(R"({"bias": [0]})"),
                  ValidationError);
  CHECK_THROWS_AS(
      dspool::classifier_from_json(R"({"weights": [[1], [1, 2]], "bias": [0, 0]})"),
      ValidationError);
}

TEST_CASE("front end JSON round-trips bitwise and checks bias length") {
  TempDir dir("dspool_io_fe");

  FrontEnd fe;
  fe.weights = testutil::random_features(4, 3, 81);
  fe.bias = RowVector::LinSpaced(3, -1.0, 1.0);
  dspool::save_front_end(fe, dir.file("fe.json"));
  const FrontEnd back = dspool::load_front_end(dir.file("fe.json"));
  CHECK(bitwise_equal(back.weights, fe.weights));
  for (Index i = 0; i < 3; ++i) {
    CHECK(bits_of(back.bias(i)) == bits_of(fe.bias(i)));
  }

  CHECK_THROWS_AS(
      dspool::front_end_from_json(R"({"weights": [[1, 2]], "bias": [0]})"),
      ValidationError);
}

TEST_CASE("trace serialization exposes the recorded routing as JSON") {
  const Matrix X = testutil::random_features(5, 3, 90, 0.1, 1.0);
  const auto r = dspool::forward(X, PoolStructure::from_name("ds-alt-f-max"));
  const std::string text = dspool::trace_to_json(r.trace);

  const auto doc = nlohmann::json::parse(text);
  CHECK(doc["input_rows"].get<Index>() == 5);
  CHECK(doc["channels"].get<Index>() == 3);
  CHECK(doc["final_rows"].get<Index>() == r.trace.final_rows);
  CHECK(doc["final_mode"].get<std::string>() == "max");
  CHECK(doc["levels"].size() == r.trace.levels.size());
  if (!r.trace.levels.empty()) {
    CHECK(doc["levels"][0]["node_count"].get<Index>() == 5);
    CHECK(doc["levels"][0].contains("partition"));
    CHECK(doc["levels"][0].contains("argmax"));
  }
}

TEST_CASE("raw text files round-trip bytes exactly") {
  TempDir dir("dspool_io_raw");
  const std::string content = "line one\nline two\n\ttabbed\n";
  dspool::write_text_file(dir.file("t.txt"), content);
  CHECK(dspool::read_text_file(dir.file("t.txt")) == content);
  CHECK_THROWS_AS(dspool::read_text_file(dir.file("missing.txt")),
                  ValidationError);
}
