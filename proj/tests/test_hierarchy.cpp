#include "dspool/hierarchy.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "dspool/cluster_pool.hpp"
#include "dspool/types.hpp"
#include "test_util.hpp"

using dspool::Cluster;
using dspool::ClusteringHierarchy;
using dspool::ForwardResult;
using dspool::HierarchyLevel;
using dspool::Index;
using dspool::Matrix;
using dspool::Partition;
using dspool::PoolMode;
using dspool::PoolStructure;
using dspool::ValidationError;

namespace {

// Partition equality as a set of sets, ignoring cluster order.
std::set<std::set<Index>> as_sets(const Partition& p) {
  std::set<std::set<Index>> out;
  for (const Cluster& c : p.clusters) out.insert({c.begin(), c.end()});
  return out;
}

bool same_partition_sequence(const ClusteringHierarchy& a,
                             const ClusteringHierarchy& b) {
  if (a.levels.size() != b.levels.size()) return false;
  for (std::size_t t = 0; t < a.levels.size(); ++t) {
    if (a.levels[t].mode != b.levels[t].mode) return false;
    if (a.levels[t].partition.clusters != b.levels[t].partition.clusters) {
      return false;
    }
  }
  return true;
}

nlohmann::ordered_json minimal_doc() {
  nlohmann::ordered_json doc;
  doc["n"] = 4;
  doc["structure"] = "";
  doc["levels"] = nlohmann::ordered_json::array();
  doc["levels"].push_back(
      {{"partition", {{0, 1}, {2, 3}}}, {"mode", "average"}});
  doc["levels"].push_back({{"partition", {{0, 1}}}, {"mode", "max"}});
  doc["final_mode"] = "max";
  return doc;
}

}  // namespace

TEST_CASE("a one-object dataset reproduces that object's own clustering") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix X = testutil::random_features(9, 6, 700 + seed, 0.1, 1.0);
    const PoolStructure alt = PoolStructure::from_name("ds-alt-f-max");

    const ClusteringHierarchy h = dspool::build_universal_hierarchy({X}, alt);
    const ForwardResult own = dspool::forward(X, alt);

    REQUIRE(h.levels.size() == own.trace.levels.size());
    for (std::size_t t = 0; t < h.levels.size(); ++t) {
      CHECK(h.levels[t].partition.clusters ==
            own.trace.levels[t].partition.clusters);
      CHECK(h.levels[t].mode == own.trace.levels[t].mode);
    }

    const ForwardResult shared = dspool::apply_hierarchy(X, h);
    REQUIRE(shared.pooled.size() == own.pooled.size());
    for (Index c = 0; c < shared.pooled.size(); ++c) {
      CHECK(shared.pooled(c) == own.pooled(c));  // bitwise
    }
  }
}

TEST_CASE("duplicating an object does not change the shared scheme") {
  const Matrix X = testutil::random_features(8, 5, 42, 0.1, 1.0);
  const PoolStructure alt = PoolStructure::from_name("ds-alt-f-max");
  const ClusteringHierarchy one = dspool::build_universal_hierarchy({X}, alt);
  const ClusteringHierarchy two = dspool::build_universal_hierarchy({X, X}, alt);
  CHECK(same_partition_sequence(one, two));
  CHECK(one.final_mode == two.final_mode);
}

TEST_CASE("shared block structure across objects is recovered exactly") {
  // Both objects: views 0,1 live on channels 0-2, views 2,3 on channels 3-5,
  // with different magnitudes per object and per group.
  const auto block_object = [](double strong, double weak) {
    Matrix X = Matrix::Zero(4, 6);
    for (Index c = 0; c < 3; ++c) {
      X(0, c) = strong;
      X(1, c) = strong * 1.05;
      X(2, 3 + c) = weak;
      X(3, 3 + c) = weak * 1.1;
    }
    return X;
  };
  const std::vector<Matrix> objects = {block_object(2.0, 1.0),
                                       block_object(2.2, 0.9)};
  const ClusteringHierarchy h = dspool::build_universal_hierarchy(
      objects, PoolStructure::from_name("ds-alt-f-max"));
  REQUIRE(!h.levels.empty());
  CHECK(as_sets(h.levels[0].partition) ==
        std::set<std::set<Index>>{{0, 1}, {2, 3}});
}

TEST_CASE("object order does not change the shared partitions") {
  std::vector<Matrix> objects;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    objects.push_back(testutil::random_features(7, 5, 900 + seed, 0.1, 1.0));
  }
  std::vector<Matrix> shuffled = {objects[2], objects[0], objects[3],
                                  objects[1]};
  const PoolStructure alt = PoolStructure::from_name("ds-alt-f-max");
  const ClusteringHierarchy a = dspool::build_universal_hierarchy(objects, alt);
  const ClusteringHierarchy b = dspool::build_universal_hierarchy(shuffled, alt);
  CHECK(same_partition_sequence(a, b));
}

TEST_CASE("an all-singleton scheme with a max finish is the channel-wise max") {
  const Matrix X = testutil::random_features(5, 7, 31);
  ClusteringHierarchy h;
  h.views_per_object = 5;
  h.levels.push_back(
      {Partition{{{0}, {1}, {2}, {3}, {4}}}, PoolMode::Max});
  h.final_mode = PoolMode::Max;
  h.validate_structure();
  h.validate_termination();

  const ForwardResult r = dspool::apply_hierarchy(X, h);
  for (Index c = 0; c < X.cols(); ++c) {
    CHECK(r.pooled(c) == X.col(c).maxCoeff());
  }
}

TEST_CASE("f-max scheme records no levels and terminates by budget") {
  const Matrix X = testutil::random_features(6, 4, 8);
  const ClusteringHierarchy h = dspool::build_universal_hierarchy(
      {X}, PoolStructure::from_name("f-max"));
  CHECK(h.levels.empty());
  CHECK(h.final_node_count() == 6);
  CHECK_NOTHROW(h.validate_termination());
}

TEST_CASE("final node count follows the last recorded level") {
  ClusteringHierarchy h;
  h.views_per_object = 4;
  CHECK(h.final_node_count() == 4);
  h.levels.push_back({Partition{{{0, 1}, {2, 3}}}, PoolMode::Average});
  CHECK(h.final_node_count() == 2);
  h.levels.push_back({Partition{{{0, 1}}}, PoolMode::Max});
  CHECK(h.final_node_count() == 1);
}

TEST_CASE("structure validation rejects unchained and no-op levels") {
  ClusteringHierarchy h;
  h.views_per_object = 4;
  h.levels.push_back({Partition{{{0, 1}, {2, 3}}}, PoolMode::Max});
  h.levels.push_back({Partition{{{0}, {1}, {2}}}, PoolMode::Max});  // covers 3
  CHECK_THROWS_AS(h.validate_structure(), ValidationError);

  ClusteringHierarchy noop;
  noop.views_per_object = 3;
  noop.levels.push_back({Partition{{{0}, {1}, {2}}}, PoolMode::Max});
  noop.levels.push_back({Partition{{{0, 1}, {2}}}, PoolMode::Average});
  CHECK_THROWS_AS(noop.validate_structure(), ValidationError);
}

TEST_CASE("termination validation covers every accepting and rejecting case") {
  ClusteringHierarchy h;
  h.views_per_object = 1;
  CHECK_NOTHROW(h.validate_termination());  // single view, nothing to do

  h.views_per_object = 6;
  h.structure_name = "f-max";
  CHECK_NOTHROW(h.validate_termination());  // zero budget, zero levels

  ClusteringHierarchy avg;
  avg.views_per_object = 4;
  avg.structure_name = "ds-avg-f-max";
  avg.levels.push_back({Partition{{{0, 1}, {2, 3}}}, PoolMode::Average});
  CHECK_NOTHROW(avg.validate_termination());  // budget spent with 2 nodes left

  avg.levels.push_back({Partition{{{0, 1}}}, PoolMode::Average});
  CHECK_THROWS_AS(avg.validate_termination(), ValidationError);  // over budget

  ClusteringHierarchy alt;
  alt.views_per_object = 4;
  alt.structure_name = "ds-alt-f-max";
  alt.levels.push_back({Partition{{{0, 1}, {2, 3}}}, PoolMode::Max});
  alt.levels.push_back({Partition{{{0}, {1}}}, PoolMode::Average});
  CHECK_NOTHROW(alt.validate_termination(4));  // ends all-singleton

  ClusteringHierarchy early;
  early.views_per_object = 6;
  early.levels.push_back({Partition{{{0, 1, 2}, {3, 4}, {5}}}, PoolMode::Max});
  CHECK_THROWS_AS(early.validate_termination(4), ValidationError);
  CHECK_NOTHROW(early.validate_termination(1));  // budget 1 is spent

  ClusteringHierarchy root;
  root.views_per_object = 3;
  root.levels.push_back({Partition{{{0, 1, 2}}}, PoolMode::Max});
  CHECK_NOTHROW(root.validate_termination(4));  // one node left
}

TEST_CASE("hierarchies round-trip through JSON text and files") {
  std::vector<Matrix> objects;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    objects.push_back(testutil::random_features(8, 6, 1000 + seed, 0.1, 1.0));
  }
  const ClusteringHierarchy h = dspool::build_universal_hierarchy(
      objects, PoolStructure::from_name("ds-alt-f-max"));

  const std::string text = dspool::hierarchy_to_json(h);
  const ClusteringHierarchy back = dspool::hierarchy_from_json(text);
  CHECK(back.views_per_object == h.views_per_object);
  CHECK(back.structure_name == h.structure_name);
  CHECK(back.final_mode == h.final_mode);
  CHECK(same_partition_sequence(h, back));
  CHECK(dspool::hierarchy_to_json(back) == text);  // canonical form is stable

  const auto path =
      std::filesystem::temp_directory_path() / "dspool_test_hierarchy.json";
  dspool::save_hierarchy(h, path.string());
  const ClusteringHierarchy loaded = dspool::load_hierarchy(path.string());
  CHECK(dspool::hierarchy_to_json(loaded) == text);
  std::filesystem::remove(path);
}

TEST_CASE("loading tolerates unsorted members and normalizes them") {
  auto doc = minimal_doc();
  doc["levels"][0]["partition"] = {{1, 0}, {3, 2}};
  const ClusteringHierarchy h = dspool::hierarchy_from_json(doc.dump());
  CHECK(h.levels[0].partition.clusters[0] == Cluster{0, 1});
  CHECK(h.levels[0].partition.clusters[1] == Cluster{2, 3});
}

TEST_CASE("loading rejects malformed and inconsistent descriptions") {
  CHECK_THROWS_WITH_AS(dspool::hierarchy_from_json("not json"),
                       doctest::Contains("malformed hierarchy"),
                       ValidationError);
  CHECK_THROWS_AS(dspool::hierarchy_from_json("[1,2,3]"), ValidationError);

  {
    auto doc = minimal_doc();
    doc.erase("final_mode");
    CHECK_THROWS_WITH_AS(dspool::hierarchy_from_json(doc.dump()),
                         doctest::Contains("final_mode"), ValidationError);
  }
  {
    auto doc = minimal_doc();
    doc["levels"][0]["mode"] = "median";
    CHECK_THROWS_AS(dspool::hierarchy_from_json(doc.dump()), ValidationError);
  }
  {
    auto doc = minimal_doc();
    doc["levels"][0]["partition"] = {{0, 1}, {1, 2}};  // overlap at node 1
    CHECK_THROWS_WITH_AS(dspool::hierarchy_from_json(doc.dump()),
                         doctest::Contains("overlap"), ValidationError);
  }
  {
    auto doc = minimal_doc();
    doc["levels"][1]["partition"] = {{0}, {1}, {2}};  // expects 2 nodes
    CHECK_THROWS_AS(dspool::hierarchy_from_json(doc.dump()), ValidationError);
  }
  {
    auto doc = minimal_doc();
    doc["structure"] = "ds-avg-f-max";  // budget 1, but two levels recorded
    CHECK_THROWS_WITH_AS(dspool::hierarchy_from_json(doc.dump()),
                         doctest::Contains("allows 1"), ValidationError);
  }
  {
    auto doc = minimal_doc();
    CHECK_THROWS_AS(dspool::hierarchy_from_json(doc.dump(), 1),
                    ValidationError);  // depth cap below recorded levels
  }
}

TEST_CASE("building rejects empty, ragged, and negative datasets") {
  const PoolStructure alt = PoolStructure::from_name("ds-alt-f-max");
  CHECK_THROWS_AS(dspool::build_universal_hierarchy({}, alt), ValidationError);

  const Matrix a = testutil::random_features(4, 3, 1);
  const Matrix b = testutil::random_features(5, 3, 2);
  CHECK_THROWS_AS(dspool::build_universal_hierarchy({a, b}, alt),
                  ValidationError);

  Matrix neg = a;
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(dspool::build_universal_hierarchy({neg}, alt),
                  ValidationError);
}
