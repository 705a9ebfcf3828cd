#pragma once

#include <string>
#include <vector>

#include "smbcsp/algebra.hpp"
#include "smbcsp/instance.hpp"

namespace smbcsp {

// JSON shape of an algebra:
//   {"name": str, "size": n, "meet": n x n, "maltsev": n x n x n,
//    "blocks": [[...], ...]?}
// "blocks" is optional on input and validated against detection; output
// includes it whenever the algebra has a block structure.
AlgebraPtr algebra_from_json_text(const std::string& text);
std::string algebra_to_json_text(const FiniteAlgebra& alg, int indent = 2);

// JSON shape of an instance:
//   {"algebras": {id: algebra, ...},
//    "variables": [name, ...],
//    "domains": {name: {"algebra": id, "subuniverse": [..]?}, ...},
//    "constraints": [{"scope": [name, ...], "tuples": [[..], ...]}, ...]}
// A missing "subuniverse" means the full universe.
Instance instance_from_json_text(const std::string& text);
std::string instance_to_json_text(const Instance& p, int indent = 2);

AlgebraPtr load_algebra(const std::string& path);
Instance load_instance(const std::string& path);

// {"status": "sat"|"unsat", "assignment": {name: value, ...}?}
std::string solution_json_text(const Instance& p, bool sat,
                               const std::vector<int>& witness, int indent = 2);

}  // namespace smbcsp
