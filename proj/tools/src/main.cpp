#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"
#include "smbcsp/gen.hpp"
#include "smbcsp/graphs.hpp"
#include "smbcsp/instance.hpp"
#include "smbcsp/io.hpp"
#include "smbcsp/malcev.hpp"
#include "smbcsp/poly.hpp"
#include "smbcsp/smb.hpp"
#include "smbcsp/solvers.hpp"

namespace {

using nlohmann::json;
using namespace smbcsp;

void write_text(const std::string& path, const std::string& text) {
  std::string body = text;
  if (body.empty() || body.back() != '\n') body += '\n';
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::invalid_input, "cannot write file: " + path);
  out << body;
}

json stats_to_json(const SolveStats& st) {
  json j;
  j["decide_calls"] = st.decide_calls;
  j["memo_hits"] = st.memo_hits;
  j["malcev_calls"] = st.malcev_calls;
  j["restarts"] = st.restarts;
  j["size_recursions"] = st.size_recursions;
  j["coherent_checks"] = st.coherent_checks;
  j["eliminations"] = st.eliminations;
  j["least_block_tightenings"] = st.least_block_tightenings;
  j["strand_tightenings"] = st.strand_tightenings;
  j["max_depth"] = st.max_depth;
  j["size_history"] = st.size_history;
  return j;
}

struct MethodResult {
  bool sat = false;
  std::optional<std::vector<int>> witness;
  json trace;
};

MethodResult run_method(const std::string& method, const Instance& p,
                        bool want_witness, bool audit) {
  MethodResult r;
  if (method == "bruteforce") {
    BruteForceResult b = brute_force(p);
    r.sat = b.sat;
    if (b.sat && want_witness) r.witness = b.witness;
    r.trace = json{{"nodes", b.nodes}};
    return r;
  }
  if (method == "malcev") {
    MalcevResult m = malcev_solve(p);
    r.sat = m.sat;
    if (m.sat && want_witness) r.witness = m.witness;
    r.trace = json{{"exhaustive_fallback", m.exhaustive_fallback}};
    return r;
  }
  SolveStats st;
  SolveOptions opts;
  opts.extract_witness = want_witness;
  opts.audit = audit;
  opts.stats = &st;
  SolveOutcome out;
  if (method == "auto") {
    out = solve_auto(p, opts);
  } else if (method == "linear") {
    out = solve_linear(p, opts);
  } else if (method == "flat") {
    out = solve_flat(p, opts);
  } else if (method == "general") {
    out = solve_general(p, opts);
  } else {
    throw Error(ErrorCode::invalid_input, "unknown method: " + method);
  }
  r.sat = out.sat;
  r.witness = out.witness;
  r.trace = stats_to_json(st);
  return r;
}

// Witness entries ordered by variable name so reports are reproducible.
std::vector<std::pair<std::string, int>> named_assignment(
    const Instance& p, const std::vector<int>& witness) {
  std::vector<std::pair<std::string, int>> out;
  for (int v = 0; v < p.num_variables(); ++v)
    out.emplace_back(p.names()[v], witness[v]);
  std::sort(out.begin(), out.end());
  return out;
}

int run_solve(const std::string& file, const std::string& method,
              bool want_witness, bool audit, const std::string& format,
              const std::string& out_path, const std::string& trace_path) {
  Instance p = load_instance(file);
  MethodResult r = run_method(method, p, want_witness, audit);
  if (r.witness && !p.satisfies(*r.witness))
    throw Error(ErrorCode::internal, "witness failed re-verification");

  json rep;
  rep["command"] = "solve";
  rep["input"] = file;
  rep["method"] = method;
  rep["status"] = r.sat ? "sat" : "unsat";
  if (r.witness) {
    json a = json::object();
    for (const auto& [name, val] : named_assignment(p, *r.witness))
      a[name] = val;
    rep["assignment"] = a;
  }
  rep["trace"] = r.trace;
  if (!trace_path.empty()) write_text(trace_path, r.trace.dump(2));

  if (format == "json") {
    write_text(out_path, rep.dump(2));
  } else {
    std::ostringstream os;
    os << "status: " << (r.sat ? "sat" : "unsat") << "\n";
    os << "method: " << method << "\n";
    if (r.witness) {
      os << "witness:\n";
      for (const auto& [name, val] : named_assignment(p, *r.witness))
        os << "  " << name << " = " << val << "\n";
    }
    os << "trace: " << r.trace.dump() << "\n";
    write_text(out_path, os.str());
  }
  return r.sat ? 0 : 1;
}

json partition_blocks_json(const Partition& part) {
  return json(part.blocks());
}

int run_check_algebra(const std::string& file, const std::string& format,
                      const std::string& out_path,
                      const std::string& emit_path) {
  AlgebraPtr alg = load_algebra(file);
  std::string failure;
  std::optional<SmbStructure> s = try_detect_smb(*alg, &failure);

  json rep;
  rep["command"] = "check-algebra";
  rep["input"] = file;
  rep["name"] = alg->name();
  rep["size"] = alg->size();
  rep["smb"] = s.has_value();
  if (!s) {
    rep["witness"] = failure;
    if (format == "json") {
      write_text(out_path, rep.dump(2));
    } else {
      std::ostringstream os;
      os << "algebra: " << alg->name() << " (size " << alg->size() << ")\n";
      os << "block structure: none (" << failure << ")\n";
      write_text(out_path, os.str());
    }
    return 2;
  }

  rep["blocks"] = json(s->blocks);
  rep["order_shape"] = order_shape_name(s->shape);
  rep["least_block"] = json(s->blocks[s->least_block]);
  if (s->unit)
    rep["unit"] = *s->unit;
  else
    rep["unit"] = nullptr;
  rep["least_block_collapse"] =
      partition_blocks_json(least_block_collapse(*alg, *s));

  auto failures = regular_identity_failures(*alg, *s);
  json idents = json::array();
  for (int id = 1; id <= 5; ++id) {
    json e;
    e["identity"] = id;
    auto hit = std::find_if(failures.begin(), failures.end(),
                            [id](const IdentityFailure& f) {
                              return f.identity == id;
                            });
    e["pass"] = hit == failures.end();
    if (hit != failures.end()) {
      e["args"] = json(hit->args);
      e["detail"] = hit->detail;
    }
    idents.push_back(e);
  }
  rep["identities"] = idents;
  rep["regular"] = failures.empty();

  RegularizationResult reg = regularize(*alg, *s);
  rep["regularization"] = json{{"changed", reg.changed}};
  if (reg.changed) {
    auto residual = regular_identity_failures(*reg.algebra, reg.structure);
    rep["regularization"]["residual_failures"] =
        static_cast<int>(residual.size());
  }
  if (!emit_path.empty()) write_text(emit_path, algebra_to_json_text(*reg.algebra));

  if (format == "json") {
    write_text(out_path, rep.dump(2));
  } else {
    std::ostringstream os;
    os << "algebra: " << alg->name() << " (size " << alg->size() << ")\n";
    os << "blocks: " << json(s->blocks).dump() << "\n";
    os << "order shape: " << order_shape_name(s->shape) << "\n";
    if (s->unit)
      os << "unit: " << *s->unit << "\n";
    else
      os << "unit: none\n";
    os << "least block: " << json(s->blocks[s->least_block]).dump() << "\n";
    os << "least-block collapse: "
       << partition_blocks_json(least_block_collapse(*alg, *s)).dump() << "\n";
    os << "identities:\n";
    for (const auto& e : idents) {
      os << "  " << e["identity"].get<int>() << ": "
         << (e["pass"].get<bool>() ? "pass" : "fail");
      if (!e["pass"].get<bool>())
        os << " at " << e["args"].dump() << " (" << e["detail"].get<std::string>()
           << ")";
      os << "\n";
    }
    os << "regular: " << (failures.empty() ? "yes" : "no") << "\n";
    os << "regularization: " << (reg.changed ? "changed" : "unchanged") << "\n";
    write_text(out_path, os.str());
  }
  return 0;
}

// Each analysis renders independently; sections whose structural
// preconditions fail report the reason instead of aborting the rest.
template <typename Fn>
json guarded_section(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::precondition ||
        e.code() == ErrorCode::no_least_block)
      return json{{"error", e.what()}};
    throw;
  }
}

int run_analyze(const std::string& file, bool want_strands, bool want_coh,
                bool want_links, bool want_cycles, bool want_graphs,
                const std::string& format, const std::string& out_path) {
  Instance p = regularize_templates(load_instance(file));
  p = enforce_kl_minimality(p, 2, 3);

  if (!(want_strands || want_coh || want_links || want_cycles || want_graphs))
    want_strands = want_coh = want_links = want_cycles = want_graphs = true;

  if (format == "dot") {
    std::ostringstream os;
    os << scope_graph_dot(p) << microstructure_dot(p);
    write_text(out_path, os.str());
    return 0;
  }

  json rep;
  rep["command"] = "analyze";
  rep["input"] = file;
  rep["variables"] = json(p.names());
  rep["trivially_unsat"] = p.any_domain_empty() || p.any_constraint_empty();

  if (want_strands) {
    rep["strands"] = guarded_section([&] {
      StrandDecomposition sd = compute_strands(p);
      json pairs = json::array();
      for (const auto& [v, b] : sd.pairs)
        pairs.push_back(json{{"variable", p.names()[v]}, {"block", b}});
      json prec = json::array();
      int np = static_cast<int>(sd.pairs.size());
      for (int a = 0; a < np; ++a)
        for (int b = 0; b < np; ++b)
          if (a != b && sd.before[a][b]) prec.push_back(json{a, b});
      json strands = json::array();
      for (const auto& st : sd.strands) {
        json members = json::array();
        for (const auto& [v, b] : st.members)
          members.push_back(json{{"variable", p.names()[v]}, {"block", b}});
        strands.push_back(json{{"members", members}});
      }
      return json{{"pairs", pairs}, {"precedence", prec}, {"strands", strands}};
    });
  }

  if (want_coh) {
    rep["coherent_sets"] = guarded_section([&] {
      CoverIndex idx = cover_index(p);
      json covers = json::array();
      for (const auto& e : idx.entries) {
        const auto& da = idx.domains[e.variable];
        auto relabel = [&](const Partition& part) {
          json blocks = json::array();
          for (const auto& blk : part.blocks()) {
            std::vector<int> vals;
            for (int x : blk) vals.push_back(da.image.to_old[x]);
            std::sort(vals.begin(), vals.end());
            blocks.push_back(json(vals));
          }
          return blocks;
        };
        covers.push_back(json{{"variable", p.names()[e.variable]},
                              {"alpha", relabel(e.alpha)},
                              {"beta", relabel(e.beta)}});
      }
      json sets = json::array();
      for (const auto& w : coherent_sets(p, idx)) {
        json names = json::array();
        for (int v : w) names.push_back(p.names()[v]);
        sets.push_back(names);
      }
      return json{{"covers", covers}, {"sets", sets}};
    });
  }

  if (want_links) {
    rep["link_partitions"] = guarded_section([&] {
      Microstructure micro = microstructure(p);
      auto split = split_by_microstructure(p);
      json classes = json::array();
      if (split) {
        for (const auto& cls : split->classes) {
          json doms = json::object();
          for (int v = 0; v < p.num_variables(); ++v)
            doms[p.names()[v]] = cls[v];
          classes.push_back(doms);
        }
      }
      return json{{"components", micro.num_components},
                  {"splits", split.has_value()},
                  {"classes", classes}};
    });
  }

  if (want_cycles) {
    rep["cycle_consistency"] = guarded_section([&] {
      auto bad = find_cycle_inconsistency(p);
      json j;
      j["consistent"] = !bad.has_value();
      if (bad) {
        json cyc = json::array();
        for (int v : bad->cycle) cyc.push_back(p.names()[v]);
        j["witness"] = json{{"cycle", cyc}, {"value", bad->value}};
      }
      return j;
    });
  }

  if (want_graphs) {
    rep["graphs"] = json{{"scope_graph_dot", scope_graph_dot(p)},
                         {"microstructure_dot", microstructure_dot(p)}};
  }

  write_text(out_path, rep.dump(2));
  return 0;
}

int run_minimize(const std::string& file, int k, int l,
                 const std::string& out_path) {
  Instance p = load_instance(file);
  Instance q = enforce_kl_minimality(p, k, l);
  write_text(out_path, instance_to_json_text(q));
  if (q.any_domain_empty() || q.any_constraint_empty())
    std::cerr << "note: minimized instance is trivially unsatisfiable\n";
  return 0;
}

OrderShape shape_from_name(const std::string& name) {
  if (name == "malcev") return OrderShape::malcev;
  if (name == "linear") return OrderShape::linear;
  if (name == "flat") return OrderShape::flat;
  if (name == "tree") return OrderShape::tree;
  if (name == "general") return OrderShape::general;
  throw Error(ErrorCode::invalid_input, "unknown order shape: " + name);
}

int run_gen_algebra(const AlgebraGenParams& params, std::uint64_t seed,
                    const std::string& out_path) {
  AlgebraPtr alg = random_smb_algebra(params, seed);
  write_text(out_path, algebra_to_json_text(*alg));
  return 0;
}

int run_gen_instance(const InstanceGenParams& params,
                     const std::vector<std::string>& template_files,
                     std::uint64_t seed, const std::string& out_path) {
  std::vector<AlgebraPtr> templates;
  for (const auto& f : template_files) templates.push_back(load_algebra(f));
  Instance p = random_instance(params, templates, seed);
  write_text(out_path, instance_to_json_text(p));
  return 0;
}

struct CompareRow {
  std::map<std::string, std::string> status;  // method -> sat/unsat/skipped
  std::vector<std::string> problems;
};

CompareRow compare_one(const InstanceGenParams& gp,
                       const std::vector<AlgebraPtr>& templates,
                       std::uint64_t seed,
                       const std::vector<std::string>& methods,
                       bool check_witness, bool audit) {
  CompareRow row;
  Instance p = random_instance(gp, templates, seed);
  if (p.domain_space() > caps().oracle)
    throw Error(ErrorCode::cap_exceeded,
                "instance too large for brute-force comparison");
  BruteForceResult truth = brute_force(p);
  row.status["bruteforce"] = truth.sat ? "sat" : "unsat";
  for (const auto& m : methods) {
    if (m == "bruteforce") continue;
    try {
      MethodResult r = run_method(m, p, check_witness, audit);
      row.status[m] = r.sat ? "sat" : "unsat";
      if (r.sat != truth.sat)
        row.problems.push_back(m + " disagrees with brute force");
      if (r.witness && !p.satisfies(*r.witness))
        row.problems.push_back(m + " produced an invalid witness");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::precondition) {
        row.status[m] = "skipped";
      } else {
        row.status[m] = "error";
        row.problems.push_back(m + " failed: " + e.what());
      }
    }
  }
  return row;
}

int run_compare(int count, std::uint64_t seed, const std::string& methods_csv,
                int threads, const std::vector<std::string>& template_files,
                const InstanceGenParams& gp, bool check_witness, bool audit,
                const std::string& format, const std::string& out_path) {
  std::vector<std::string> methods;
  if (methods_csv == "all") {
    methods = {"auto", "linear", "flat", "general", "malcev", "bruteforce"};
  } else {
    std::istringstream is(methods_csv);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      if (tok.empty()) continue;
      static const std::vector<std::string> known = {
          "auto", "linear", "flat", "general", "malcev", "bruteforce"};
      if (std::find(known.begin(), known.end(), tok) == known.end())
        throw Error(ErrorCode::invalid_input, "unknown method: " + tok);
      methods.push_back(tok);
    }
  }
  if (methods.empty())
    throw Error(ErrorCode::invalid_input, "no comparison methods given");

  std::vector<AlgebraPtr> templates;
  if (template_files.empty()) {
    AlgebraGenParams ap;
    ap.blocks = 2;
    ap.shape = OrderShape::linear;
    templates.push_back(random_smb_algebra(ap, seed + 1000));
    ap.blocks = 3;
    ap.shape = OrderShape::flat;
    templates.push_back(random_smb_algebra(ap, seed + 1001));
    ap.blocks = 3;
    ap.shape = OrderShape::tree;
    templates.push_back(random_smb_algebra(ap, seed + 1002));
  } else {
    for (const auto& f : template_files) templates.push_back(load_algebra(f));
  }

  if (count <= 0)
    throw Error(ErrorCode::invalid_input, "count must be positive");
  std::vector<CompareRow> rows(count);
  std::vector<std::string> failures(count);
  std::atomic<int> next{0};
  int nthreads = threads;
  if (nthreads <= 0) {
    unsigned hc = std::thread::hardware_concurrency();
    nthreads = static_cast<int>(hc == 0 ? 1 : hc);
  }
  nthreads = std::min(nthreads, count);
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        rows[i] =
            compare_one(gp, templates, seed + static_cast<std::uint64_t>(i),
                        methods, check_witness, audit);
      } catch (const Error& e) {
        failures[i] = std::string(error_code_name(e.code())) + ": " + e.what();
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Aggregation reads rows in index order, so the report does not depend on
  // how instances were distributed over the workers.
  std::map<std::string, std::map<std::string, int>> tally;
  json problems = json::array();
  for (int i = 0; i < count; ++i) {
    std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    if (!failures[i].empty()) {
      problems.push_back(json{{"seed", s}, {"detail", failures[i]}});
      continue;
    }
    for (const auto& [m, st] : rows[i].status) ++tally[m][st];
    for (const auto& pr : rows[i].problems)
      problems.push_back(json{{"seed", s}, {"detail", pr}});
  }

  json rep;
  rep["command"] = "compare";
  rep["count"] = count;
  rep["seed"] = seed;
  rep["methods"] = json(methods);
  json tj = json::object();
  for (const auto& [m, st] : tally) {
    json e = json::object();
    for (const auto& [k, v] : st) e[k] = v;
    tj[m] = e;
  }
  rep["tally"] = tj;
  rep["problems"] = problems;
  bool ok = problems.empty();
  rep["agreement"] = ok;

  if (format == "json") {
    write_text(out_path, rep.dump(2));
  } else {
    std::ostringstream os;
    os << "instances: " << count << " (seed " << seed << ")\n";
    for (const auto& [m, st] : tally) {
      os << m << ":";
      for (const auto& [k, v] : st) os << " " << k << "=" << v;
      os << "\n";
    }
    if (ok) {
      os << "agreement: yes\n";
    } else {
      os << "agreement: NO\n";
      for (const auto& pr : problems)
        os << "  seed " << pr["seed"].get<std::uint64_t>() << ": "
           << pr["detail"].get<std::string>() << "\n";
    }
    write_text(out_path, os.str());
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSP solver for semilattices of Mal'cev blocks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string caps_spec;
  app.add_option("--caps", caps_spec,
                 "cap overrides, e.g. closure=500000,oracle=2000000");

  // solve
  std::string solve_file, solve_method = "auto", solve_format = "text";
  std::string solve_out, solve_trace;
  bool solve_witness = false, solve_audit = false;
  auto* solve_cmd = app.add_subcommand("solve", "decide an instance");
  solve_cmd->fallthrough();
  solve_cmd->add_option("file", solve_file, "instance file")->required();
  solve_cmd->add_option("--method", solve_method, "solving method")
      ->check(CLI::IsMember(
          {"auto", "linear", "flat", "general", "malcev", "bruteforce"}));
  solve_cmd->add_flag("--witness,-w", solve_witness, "extract a solution");
  solve_cmd->add_flag("--audit", solve_audit,
                      "cross-check runtime invariants against brute force");
  solve_cmd->add_option("--format", solve_format, "report format")
      ->check(CLI::IsMember({"text", "json"}));
  solve_cmd->add_option("--out,-o", solve_out, "report file (default stdout)");
  solve_cmd->add_option("--trace", solve_trace, "write the trace JSON here");

  // check-algebra
  std::string chk_file, chk_format = "text", chk_out, chk_emit;
  auto* chk_cmd =
      app.add_subcommand("check-algebra", "validate an algebra table");
  chk_cmd->fallthrough();
  chk_cmd->add_option("file", chk_file, "algebra file")->required();
  chk_cmd->add_option("--format", chk_format, "report format")
      ->check(CLI::IsMember({"text", "json"}));
  chk_cmd->add_option("--out,-o", chk_out, "report file (default stdout)");
  chk_cmd->add_option("--emit-regularized", chk_emit,
                      "write the regularized algebra here");

  // analyze
  std::string ana_file, ana_format = "json", ana_out;
  bool ana_strands = false, ana_coh = false, ana_links = false;
  bool ana_cycles = false, ana_graphs = false;
  auto* ana_cmd = app.add_subcommand(
      "analyze", "structural reports on a (2,3)-minimized instance");
  ana_cmd->fallthrough();
  ana_cmd->add_option("file", ana_file, "instance file")->required();
  ana_cmd->add_flag("--strands", ana_strands, "strand decomposition");
  ana_cmd->add_flag("--coherent-sets", ana_coh,
                    "cover index and coherent variable sets");
  ana_cmd->add_flag("--link-partitions", ana_links,
                    "microstructure component classes");
  ana_cmd->add_flag("--cycle-consistency", ana_cycles,
                    "binary-projection cycle check");
  ana_cmd->add_flag("--graphs", ana_graphs, "scope and microstructure graphs");
  ana_cmd->add_option("--format", ana_format, "report format")
      ->check(CLI::IsMember({"json", "dot"}));
  ana_cmd->add_option("--out,-o", ana_out, "report file (default stdout)");

  // minimize
  std::string min_file, min_out;
  int min_k = 2, min_l = 3;
  auto* min_cmd =
      app.add_subcommand("minimize", "write the (k,l)-minimized instance");
  min_cmd->fallthrough();
  min_cmd->add_option("file", min_file, "instance file")->required();
  min_cmd->add_option("--k", min_k, "pin size");
  min_cmd->add_option("--l", min_l, "witness scope size");
  min_cmd->add_option("--out,-o", min_out, "output file (default stdout)");

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate algebras and instances");
  gen_cmd->fallthrough();
  gen_cmd->require_subcommand(1);

  AlgebraGenParams ga;
  std::string ga_shape = "linear", ga_out;
  std::uint64_t ga_seed = 0;
  auto* gen_alg = gen_cmd->add_subcommand("algebra", "generate an algebra");
  gen_alg->fallthrough();
  gen_alg->add_option("--blocks", ga.blocks, "number of blocks");
  gen_alg->add_option("--min-size", ga.min_block_size, "smallest block size");
  gen_alg->add_option("--max-size", ga.max_block_size, "largest block size");
  gen_alg->add_option("--shape", ga_shape, "block order shape")
      ->check(CLI::IsMember({"malcev", "linear", "flat", "tree", "general"}));
  gen_alg->add_option("--retries", ga.retries, "draw retry budget");
  gen_alg->add_option("--name", ga.name, "algebra name");
  gen_alg->add_option("--seed", ga_seed, "generator seed")->required();
  gen_alg->add_option("--out,-o", ga_out, "output file (default stdout)");

  InstanceGenParams gi;
  std::vector<std::string> gi_templates;
  std::string gi_out;
  std::uint64_t gi_seed = 0;
  auto* gen_inst = gen_cmd->add_subcommand("instance", "generate an instance");
  gen_inst->fallthrough();
  gen_inst->add_option("--template", gi_templates, "template algebra file")
      ->required();
  gen_inst->add_option("--variables", gi.variables, "number of variables");
  gen_inst->add_option("--constraints", gi.constraints,
                       "number of constraints");
  gen_inst->add_option("--min-arity", gi.min_arity, "smallest scope size");
  gen_inst->add_option("--max-arity", gi.max_arity, "largest scope size");
  gen_inst->add_option("--seed-tuples", gi.seed_tuples,
                       "random tuples per constraint before closure");
  gen_inst->add_flag("--plant,!--no-plant", gi.plant_solution,
                     "seed every constraint with one shared solution");
  gen_inst->add_option("--seed", gi_seed, "generator seed")->required();
  gen_inst->add_option("--out,-o", gi_out, "output file (default stdout)");

  // compare
  int cmp_count = 100, cmp_threads = 0;
  std::uint64_t cmp_seed = 0;
  std::string cmp_methods = "auto,general,bruteforce";
  std::string cmp_format = "text", cmp_out;
  std::vector<std::string> cmp_templates;
  InstanceGenParams cmp_gp;
  cmp_gp.plant_solution = false;
  bool cmp_witness = false, cmp_audit = false;
  auto* cmp_cmd = app.add_subcommand(
      "compare", "differential run of several methods on seeded instances");
  cmp_cmd->fallthrough();
  cmp_cmd->add_option("--count", cmp_count, "number of instances");
  cmp_cmd->add_option("--seed", cmp_seed, "base seed")->required();
  cmp_cmd->add_option("--methods", cmp_methods,
                      "comma-separated methods, or 'all'");
  cmp_cmd->add_option("--threads", cmp_threads,
                      "worker threads (default: hardware)");
  cmp_cmd->add_option("--template", cmp_templates,
                      "template algebra file (default: generated mix)");
  cmp_cmd->add_option("--variables", cmp_gp.variables, "variables per instance");
  cmp_cmd->add_option("--constraints", cmp_gp.constraints,
                      "constraints per instance");
  cmp_cmd->add_option("--min-arity", cmp_gp.min_arity, "smallest scope size");
  cmp_cmd->add_option("--max-arity", cmp_gp.max_arity, "largest scope size");
  cmp_cmd->add_option("--seed-tuples", cmp_gp.seed_tuples,
                      "random tuples per constraint before closure");
  cmp_cmd->add_flag("--plant,!--no-plant", cmp_gp.plant_solution,
                    "seed every constraint with one shared solution");
  cmp_cmd->add_flag("--witness,-w", cmp_witness, "extract and verify witnesses");
  cmp_cmd->add_flag("--audit", cmp_audit,
                    "cross-check runtime invariants against brute force");
  cmp_cmd->add_option("--format", cmp_format, "report format")
      ->check(CLI::IsMember({"text", "json"}));
  cmp_cmd->add_option("--out,-o", cmp_out, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!caps_spec.empty()) set_caps_for_testing(parse_caps(caps_spec, caps()));
    if (*solve_cmd)
      return run_solve(solve_file, solve_method, solve_witness, solve_audit,
                       solve_format, solve_out, solve_trace);
    if (*chk_cmd)
      return run_check_algebra(chk_file, chk_format, chk_out, chk_emit);
    if (*ana_cmd)
      return run_analyze(ana_file, ana_strands, ana_coh, ana_links, ana_cycles,
                         ana_graphs, ana_format, ana_out);
    if (*min_cmd) return run_minimize(min_file, min_k, min_l, min_out);
    if (*gen_alg) {
      ga.shape = shape_from_name(ga_shape);
      return run_gen_algebra(ga, ga_seed, ga_out);
    }
    if (*gen_inst) return run_gen_instance(gi, gi_templates, gi_seed, gi_out);
    if (*cmp_cmd)
      return run_compare(cmp_count, cmp_seed, cmp_methods, cmp_threads,
                         cmp_templates, cmp_gp, cmp_witness, cmp_audit,
                         cmp_format, cmp_out);
  } catch (const smbcsp::Error& e) {
    std::cerr << "error (" << error_code_name(e.code()) << "): " << e.what()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
