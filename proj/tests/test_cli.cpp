#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef SMBCSP_CLI_PATH
#error "SMBCSP_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::current_path() / "cli-scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  fs::path cap = scratch() / ("capture" + std::to_string(counter++) + ".txt");
  std::string cmd = std::string(SMBCSP_CLI_PATH) + " " + args + " > " +
                    cap.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (output) *output = slurp(cap);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path gen_linear3() {
  fs::path f = scratch() / "lin3.json";
  if (!fs::exists(f))
    REQUIRE(run_cli("gen algebra --shape linear --blocks 3 --seed 7 -o " +
                    f.string()) == 0);
  return f;
}

fs::path gen_sat_instance() {
  fs::path f = scratch() / "sat.json";
  if (!fs::exists(f)) {
    fs::path flat = scratch() / "flat4.json";
    REQUIRE(run_cli("gen algebra --shape flat --blocks 4 --seed 11 -o " +
                    flat.string()) == 0);
    REQUIRE(run_cli("gen instance --template " + gen_linear3().string() +
                    " --template " + flat.string() +
                    " --variables 5 --constraints 5 --seed 42 -o " +
                    f.string()) == 0);
  }
  return f;
}

}  // namespace

TEST_CASE("generated algebra passes the checker with every identity green") {
  std::string out;
  int rc = run_cli("check-algebra " + gen_linear3().string() + " --format json",
                   &out);
  REQUIRE(rc == 0);
  json rep = json::parse(out);
  CHECK(rep["smb"] == true);
  CHECK(rep["regular"] == true);
  for (const auto& e : rep["identities"]) CHECK(e["pass"] == true);
}

TEST_CASE("generation is byte-identical under the same seed") {
  fs::path a = scratch() / "rep-a.json";
  fs::path b = scratch() / "rep-b.json";
  std::string spec = "gen algebra --shape tree --blocks 4 --seed 3 -o ";
  REQUIRE(run_cli(spec + a.string()) == 0);
  REQUIRE(run_cli(spec + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));

  fs::path ia = scratch() / "inst-a.json";
  fs::path ib = scratch() / "inst-b.json";
  std::string ispec = "gen instance --template " + gen_linear3().string() +
                      " --variables 4 --constraints 3 --seed 9 -o ";
  REQUIRE(run_cli(ispec + ia.string()) == 0);
  REQUIRE(run_cli(ispec + ib.string()) == 0);
  CHECK(slurp(ia) == slurp(ib));
}

TEST_CASE("exit codes separate sat, unsat, and errors") {
  std::string out;
  int rc = run_cli("solve " + gen_sat_instance().string() +
                       " --witness --format json",
                   &out);
  REQUIRE(rc == 0);
  json rep = json::parse(out);
  CHECK(rep["status"] == "sat");
  CHECK(rep["assignment"].size() == 5);

  fs::path unsat = scratch() / "unsat.json";
  REQUIRE(run_cli("gen instance --template " + gen_linear3().string() +
                  " --variables 4 --constraints 4 --no-plant --seed 5 -o " +
                  unsat.string()) == 0);
  CHECK(run_cli("solve " + unsat.string(), &out) == 1);

  CHECK(run_cli("solve " + (scratch() / "missing.json").string(), &out) == 2);

  fs::path broken = scratch() / "broken.json";
  std::ofstream(broken) << "{\"bad json\n";
  CHECK(run_cli("solve " + broken.string(), &out) == 2);
  CHECK(out.find("line") != std::string::npos);
}

TEST_CASE("every method agrees on the solve verdict") {
  fs::path inst = gen_sat_instance();
  for (const char* m : {"auto", "general", "bruteforce"}) {
    std::string out;
    int rc = run_cli("solve " + inst.string() + " --witness --method " + m,
                     &out);
    CHECK(rc == 0);
    CHECK(out.find("status: sat") != std::string::npos);
  }
}

TEST_CASE("solve trace exposes the decision counters") {
  std::string out;
  fs::path trace = scratch() / "trace.json";
  REQUIRE(run_cli("solve " + gen_sat_instance().string() +
                      " --method general --trace " + trace.string(),
                  &out) == 0);
  json t = json::parse(slurp(trace));
  CHECK(t["decide_calls"].get<long long>() >= 1);
  CHECK(t["size_history"].is_array());
  CHECK(t["max_depth"].get<long long>() >= 1);
}

TEST_CASE("analyze emits structural sections and dot graphs") {
  std::string out;
  REQUIRE(run_cli("analyze " + gen_sat_instance().string(), &out) == 0);
  json rep = json::parse(out);
  CHECK(rep.contains("coherent_sets"));
  CHECK(rep.contains("link_partitions"));
  CHECK(rep.contains("cycle_consistency"));
  CHECK(rep["graphs"]["scope_graph_dot"].get<std::string>().find(
            "graph scopes") != std::string::npos);

  REQUIRE(run_cli("analyze " + gen_sat_instance().string() + " --format dot",
                  &out) == 0);
  CHECK(out.find("graph scopes") != std::string::npos);
  CHECK(out.find("graph microstructure") != std::string::npos);
}

TEST_CASE("minimize writes a loadable instance with the same verdict") {
  fs::path minimized = scratch() / "minimized.json";
  REQUIRE(run_cli("minimize " + gen_sat_instance().string() +
                  " --k 2 --l 3 -o " + minimized.string()) == 0);
  CHECK(run_cli("solve " + minimized.string()) == 0);
}

TEST_CASE("compare reports are identical across thread counts") {
  fs::path one = scratch() / "cmp-one.json";
  fs::path many = scratch() / "cmp-many.json";
  std::string base =
      "compare --count 12 --seed 5 --methods all --witness --format json ";
  REQUIRE(run_cli(base + "--threads 1 -o " + one.string()) == 0);
  REQUIRE(run_cli(base + "--threads 4 -o " + many.string()) == 0);
  CHECK(slurp(one) == slurp(many));
  json rep = json::parse(slurp(one));
  CHECK(rep["agreement"] == true);
  CHECK(rep["tally"]["bruteforce"].size() >= 1);
}

TEST_CASE("cap overrides reject oversized work") {
  std::string out;
  int rc = run_cli("solve " + gen_sat_instance().string() +
                       " --caps oracle=1 --method bruteforce",
                   &out);
  CHECK(rc == 2);
  CHECK(out.find("cap_exceeded") != std::string::npos);
}
