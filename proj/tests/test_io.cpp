#include "smbcsp/io.hpp"

#include <string>

#include "doctest.h"
#include "smbcsp/error.hpp"
#include "smbcsp/instance.hpp"
#include "test_util.hpp"

using namespace smbcsp;
using namespace smbcsp::testing;

TEST_CASE("algebra json round trip") {
  auto alg = make_chain3();
  std::string text = algebra_to_json_text(*alg);
  CHECK(text.find("\"blocks\"") != std::string::npos);
  auto back = algebra_from_json_text(text);
  CHECK(back->same_tables(*alg));
  CHECK(back->name() == "chain3");

  // Output is byte-stable.
  CHECK(algebra_to_json_text(*alg) == text);
}

TEST_CASE("algebra json validation") {
  CHECK(error_code_of([] { algebra_from_json_text("{"); }) ==
        ErrorCode::invalid_input);
  CHECK(error_code_of([] { algebra_from_json_text("{\"name\":\"a\"}"); }) ==
        ErrorCode::invalid_input);
  CHECK(error_code_of([] {
          algebra_from_json_text(
              R"({"name":"a","size":2,"meet":[[0,0]],"maltsev":[]})");
        }) == ErrorCode::invalid_input);

  // Wrong blocks are rejected; right blocks are accepted.
  std::string good = R"({
    "name": "pair",
    "size": 2,
    "meet": [[0, 0], [1, 1]],
    "maltsev": [[[0, 1], [1, 0]], [[1, 0], [0, 1]]],
    "blocks": [[0, 1]]
  })";
  CHECK(algebra_from_json_text(good)->same_tables(*make_xor2()));
  std::string bad = good;
  bad.replace(bad.find("[[0, 1]]"), 8, "[[0],[1]]");
  CHECK(error_code_of([&] { algebra_from_json_text(bad); }) ==
        ErrorCode::invalid_input);
}

TEST_CASE("instance json round trip") {
  const std::string text = R"({
    "algebras": {
      "M2": {
        "name": "pair",
        "size": 2,
        "meet": [[0, 0], [1, 1]],
        "maltsev": [[[0, 1], [1, 0]], [[1, 0], [0, 1]]]
      }
    },
    "variables": ["x", "y", "z"],
    "domains": {
      "x": {"algebra": "M2", "subuniverse": [0, 1]},
      "y": {"algebra": "M2"},
      "z": {"algebra": "M2", "subuniverse": [1]}
    },
    "constraints": [
      {"scope": ["y", "x"], "tuples": [[0, 1], [1, 0]]},
      {"scope": ["y", "z"], "tuples": [[0, 1], [1, 1]]}
    ]
  })";
  Instance p = instance_from_json_text(text);
  CHECK(p.num_variables() == 3);
  CHECK(p.domain(1).elements == std::vector<int>{0, 1});  // defaulted
  CHECK(p.domain(2).elements == std::vector<int>{1});
  REQUIRE(p.constraints().size() == 2);
  // Scope ["y","x"] is canonicalised to indices {0,1} with swapped tuples.
  CHECK(p.constraints()[0].scope == std::vector<int>{0, 1});
  CHECK(p.constraints()[0].tuples ==
        std::vector<std::vector<int>>{{0, 1}, {1, 0}});

  std::string out = instance_to_json_text(p);
  Instance q = instance_from_json_text(out);
  CHECK(canonical_key(p) == canonical_key(q));
  CHECK(q.names() == p.names());
  CHECK(instance_to_json_text(q) == out);
}

TEST_CASE("instance json validation") {
  CHECK(error_code_of([] { instance_from_json_text("[]"); }) ==
        ErrorCode::invalid_input);
  const std::string base = R"({
    "algebras": {"M2": {"name": "pair", "size": 2,
      "meet": [[0, 0], [1, 1]],
      "maltsev": [[[0, 1], [1, 0]], [[1, 0], [0, 1]]]}},
    "variables": ["x"],
    "domains": {"x": {"algebra": "M2"}},
    "constraints": []
  })";
  CHECK(instance_from_json_text(base).num_variables() == 1);

  auto with = [&base](const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  // Unknown algebra id.
  CHECK(error_code_of([&] {
          instance_from_json_text(with("\"algebra\": \"M2\"", "\"algebra\": \"XX\""));
        }) == ErrorCode::invalid_input);
  // Missing domain.
  CHECK(error_code_of([&] {
          instance_from_json_text(with("\"domains\": {\"x\": {\"algebra\": \"M2\"}}",
                                       "\"domains\": {}"));
        }) == ErrorCode::invalid_input);
  // Unknown scope variable.
  CHECK(error_code_of([&] {
          instance_from_json_text(
              with("\"constraints\": []",
                   "\"constraints\": [{\"scope\": [\"q\"], \"tuples\": []}]"));
        }) == ErrorCode::invalid_input);
}

TEST_CASE("solution json") {
  Instance p = instance_from_json_text(R"({
    "algebras": {"M2": {"name": "pair", "size": 2,
      "meet": [[0, 0], [1, 1]],
      "maltsev": [[[0, 1], [1, 0]], [[1, 0], [0, 1]]]}},
    "variables": ["x", "y"],
    "domains": {"x": {"algebra": "M2"}, "y": {"algebra": "M2"}},
    "constraints": []
  })");
  std::string sat = solution_json_text(p, true, {1, 0});
  CHECK(sat.find("\"sat\"") != std::string::npos);
  CHECK(sat.find("\"x\": 1") != std::string::npos);
  std::string unsat = solution_json_text(p, false, {});
  CHECK(unsat.find("\"unsat\"") != std::string::npos);
  CHECK(unsat.find("assignment") == std::string::npos);
}
