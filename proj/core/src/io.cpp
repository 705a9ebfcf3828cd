#include "smbcsp/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "smbcsp/error.hpp"
#include "smbcsp/smb.hpp"

namespace smbcsp {

namespace {

using nlohmann::json;

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    // Drop the "[json.exception...]" tag; keep the line/column diagnostics.
    if (auto pos = msg.find("] "); pos != std::string::npos) msg.erase(0, pos + 2);
    throw Error(ErrorCode::invalid_input, msg);
  }
}

int require_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) {
    throw Error(ErrorCode::invalid_input, what + " must be an integer");
  }
  return j.get<int>();
}

std::string require_string(const json& j, const std::string& what) {
  if (!j.is_string()) {
    throw Error(ErrorCode::invalid_input, what + " must be a string");
  }
  return j.get<std::string>();
}

const json& require_field(const json& j, const std::string& key,
                          const std::string& what) {
  auto it = j.find(key);
  if (!j.is_object() || it == j.end()) {
    throw Error(ErrorCode::invalid_input, what + " lacks field '" + key + "'");
  }
  return *it;
}

AlgebraPtr algebra_from_json(const json& j) {
  const std::string name = require_string(require_field(j, "name", "algebra"), "name");
  const int n = require_int(require_field(j, "size", "algebra"), "size");
  if (n <= 0) throw Error(ErrorCode::invalid_input, "algebra size must be positive");

  const json& meet = require_field(j, "meet", "algebra");
  const json& mal = require_field(j, "maltsev", "algebra");
  std::vector<int> mt, dt;
  if (!meet.is_array() || static_cast<int>(meet.size()) != n) {
    throw Error(ErrorCode::invalid_input, "meet must be an n x n array");
  }
  for (const json& row : meet) {
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw Error(ErrorCode::invalid_input, "meet must be an n x n array");
    }
    for (const json& v : row) mt.push_back(require_int(v, "meet entry"));
  }
  if (!mal.is_array() || static_cast<int>(mal.size()) != n) {
    throw Error(ErrorCode::invalid_input, "maltsev must be an n x n x n array");
  }
  for (const json& plane : mal) {
    if (!plane.is_array() || static_cast<int>(plane.size()) != n) {
      throw Error(ErrorCode::invalid_input, "maltsev must be an n x n x n array");
    }
    for (const json& row : plane) {
      if (!row.is_array() || static_cast<int>(row.size()) != n) {
        throw Error(ErrorCode::invalid_input, "maltsev must be an n x n x n array");
      }
      for (const json& v : row) dt.push_back(require_int(v, "maltsev entry"));
    }
  }
  auto alg = std::make_shared<FiniteAlgebra>(name, n, std::move(mt), std::move(dt));

  if (auto it = j.find("blocks"); it != j.end()) {
    std::vector<std::vector<int>> blocks;
    if (!it->is_array()) {
      throw Error(ErrorCode::invalid_input, "blocks must be an array of arrays");
    }
    for (const json& blk : *it) {
      std::vector<int> b;
      for (const json& v : blk) b.push_back(require_int(v, "block entry"));
      blocks.push_back(std::move(b));
    }
    const Partition given = Partition::from_blocks(n, blocks);
    std::string why;
    auto s = try_detect_smb(*alg, &why);
    if (!s) {
      throw Error(ErrorCode::invalid_input,
                  "blocks given but " + name + " has no block structure: " + why);
    }
    if (s->sim != given) {
      throw Error(ErrorCode::invalid_input,
                  "blocks given for " + name + " do not match the detected blocks");
    }
  }
  return alg;
}

json algebra_to_json(const FiniteAlgebra& alg) {
  json j;
  j["name"] = alg.name();
  const int n = alg.size();
  j["size"] = n;
  json meet = json::array();
  for (int a = 0; a < n; ++a) {
    json row = json::array();
    for (int b = 0; b < n; ++b) row.push_back(alg.meet(a, b));
    meet.push_back(std::move(row));
  }
  j["meet"] = std::move(meet);
  json mal = json::array();
  for (int a = 0; a < n; ++a) {
    json plane = json::array();
    for (int b = 0; b < n; ++b) {
      json row = json::array();
      for (int c = 0; c < n; ++c) row.push_back(alg.d(a, b, c));
      plane.push_back(std::move(row));
    }
    mal.push_back(std::move(plane));
  }
  j["maltsev"] = std::move(mal);
  if (auto s = try_detect_smb(alg)) {
    j["blocks"] = s->sim.blocks();
  }
  return j;
}

Instance instance_from_json(const json& j) {
  const json& algs = require_field(j, "algebras", "instance");
  if (!algs.is_object()) {
    throw Error(ErrorCode::invalid_input, "algebras must be an object");
  }
  std::map<std::string, AlgebraPtr> registry;
  for (auto it = algs.begin(); it != algs.end(); ++it) {
    registry[it.key()] = algebra_from_json(it.value());
  }

  const json& vars = require_field(j, "variables", "instance");
  if (!vars.is_array()) {
    throw Error(ErrorCode::invalid_input, "variables must be an array");
  }
  std::vector<std::string> names;
  for (const json& v : vars) names.push_back(require_string(v, "variable name"));

  const json& doms = require_field(j, "domains", "instance");
  if (!doms.is_object()) {
    throw Error(ErrorCode::invalid_input, "domains must be an object");
  }
  std::vector<VarDomain> domains;
  for (const std::string& nm : names) {
    auto it = doms.find(nm);
    if (it == doms.end()) {
      throw Error(ErrorCode::invalid_input, "no domain for variable '" + nm + "'");
    }
    VarDomain d;
    d.algebra_id = require_string(require_field(*it, "algebra", "domain"), "algebra id");
    auto rit = registry.find(d.algebra_id);
    if (rit == registry.end()) {
      throw Error(ErrorCode::invalid_input, "unknown algebra id '" + d.algebra_id + "'");
    }
    d.algebra = rit->second;
    if (auto sit = it->find("subuniverse"); sit != it->end()) {
      for (const json& e : *sit) d.elements.push_back(require_int(e, "domain element"));
    } else {
      d.elements.resize(d.algebra->size());
      for (int e = 0; e < d.algebra->size(); ++e) d.elements[e] = e;
    }
    domains.push_back(std::move(d));
  }

  std::vector<Constraint> constraints;
  if (auto cit = j.find("constraints"); cit != j.end()) {
    if (!cit->is_array()) {
      throw Error(ErrorCode::invalid_input, "constraints must be an array");
    }
    for (const json& c : *cit) {
      Constraint nc;
      const json& scope = require_field(c, "scope", "constraint");
      for (const json& s : scope) {
        const std::string nm = require_string(s, "scope variable");
        auto pos = std::find(names.begin(), names.end(), nm);
        if (pos == names.end()) {
          throw Error(ErrorCode::invalid_input, "unknown scope variable '" + nm + "'");
        }
        nc.scope.push_back(static_cast<int>(pos - names.begin()));
      }
      const json& tuples = require_field(c, "tuples", "constraint");
      for (const json& t : tuples) {
        std::vector<int> tup;
        for (const json& v : t) tup.push_back(require_int(v, "tuple entry"));
        nc.tuples.push_back(std::move(tup));
      }
      constraints.push_back(std::move(nc));
    }
  }
  return Instance(std::move(names), std::move(domains), std::move(constraints));
}

json instance_to_json(const Instance& p) {
  json j;
  json algs = json::object();
  for (const auto& [id, alg] : p.algebras()) algs[id] = algebra_to_json(*alg);
  j["algebras"] = std::move(algs);
  j["variables"] = p.names();
  json doms = json::object();
  for (int v = 0; v < p.num_variables(); ++v) {
    json d;
    d["algebra"] = p.domain(v).algebra_id;
    d["subuniverse"] = p.domain(v).elements;
    doms[p.names()[v]] = std::move(d);
  }
  j["domains"] = std::move(doms);
  json cs = json::array();
  for (const Constraint& c : p.constraints()) {
    json jc;
    json scope = json::array();
    for (int v : c.scope) scope.push_back(p.names()[v]);
    jc["scope"] = std::move(scope);
    jc["tuples"] = c.tuples;
    cs.push_back(std::move(jc));
  }
  j["constraints"] = std::move(cs);
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

AlgebraPtr algebra_from_json_text(const std::string& text) {
  return algebra_from_json(parse(text));
}

std::string algebra_to_json_text(const FiniteAlgebra& alg, int indent) {
  return algebra_to_json(alg).dump(indent);
}

Instance instance_from_json_text(const std::string& text) {
  return instance_from_json(parse(text));
}

std::string instance_to_json_text(const Instance& p, int indent) {
  return instance_to_json(p).dump(indent);
}

AlgebraPtr load_algebra(const std::string& path) {
  return algebra_from_json_text(read_file(path));
}

Instance load_instance(const std::string& path) {
  return instance_from_json_text(read_file(path));
}

std::string solution_json_text(const Instance& p, bool sat,
                               const std::vector<int>& witness, int indent) {
  json j;
  j["status"] = sat ? "sat" : "unsat";
  if (sat) {
    json a = json::object();
    for (int v = 0; v < p.num_variables(); ++v) a[p.names()[v]] = witness[v];
    j["assignment"] = std::move(a);
  }
  return j.dump(indent);
}

}  // namespace smbcsp
