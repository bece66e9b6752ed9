// End-to-end checks of the command line tool: pipeline, exit codes, error
// records and payload determinism. Takes the binary path as argv[1].

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define EXPECT(cond, what)                                                      \
  do {                                                                          \
    if (!(cond)) {                                                              \
      std::cerr << "[FAIL] " << __LINE__ << ": " << what << "\n";               \
      ++failures;                                                               \
    }                                                                           \
  } while (0)

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RunResult run(const std::string& command, const fs::path& dir) {
  const fs::path out_path = dir / "stdout.txt";
  const fs::path err_path = dir / "stderr.txt";
  const std::string full = command + " > " + out_path.string() + " 2> " + err_path.string();
  const int status = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

/// Reproducible payload: every line except walltime diagnostics.
std::string payload(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("walltime_ms", 0) == 0) continue;
    out << line << "\n";
  }
  return out.str();
}

double value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) {
      return std::strtod(line.c_str() + key.size() + 1, nullptr);
    }
  }
  return std::nan("");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli_pipeline <osbm binary>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = fs::temp_directory_path() / "osbm_cli_pipeline";
  fs::remove_all(work);
  fs::create_directories(work);

  // config for a well-separated two-block network
  const fs::path cfg = work / "gen.cfg";
  {
    std::ofstream out(cfg);
    out << "osbm-config 1\n"
        << "protocol generate\n"
        << "n 60\n"
        << "q_true 2\n"
        << "lambda 6\n"
        << "balance balanced\n"
        << "epsilon 1\n"
        << "w_star -5.5\n"
        << "seed 11\n";
  }

  // generate
  const fs::path data = work / "data";
  RunResult gen = run(cli + " generate --config " + cfg.string() + " --out " + data.string(), work);
  EXPECT(gen.exit_code == 0, "generate exits 0: " + gen.err);
  EXPECT(fs::exists(data / "graph.edges"), "graph written");
  EXPECT(fs::exists(data / "truth.memb"), "truth written");

  // fit with the true Q
  const fs::path fit_doc = work / "fit.osbm";
  RunResult fit = run(cli + " fit " + (data / "graph.edges").string() +
                          " --q 2 --restarts 3 --seed 5 --out " + fit_doc.string(),
                      work);
  EXPECT(fit.exit_code == 0, "fit exits 0: " + fit.err);
  EXPECT(fs::exists(fit_doc), "fit document written");

  // evaluate against the truth
  const fs::path eval_doc = work / "eval.txt";
  RunResult eval = run(cli + " evaluate " + fit_doc.string() + " --truth " +
                           (data / "truth.memb").string() + " --out " + eval_doc.string(),
                       work);
  EXPECT(eval.exit_code == 0, "evaluate exits 0: " + eval.err);
  const double distance = value_of(slurp(eval_doc), "cluster_distance");
  EXPECT(distance >= 0.0 && distance < 0.1, "pipeline distance below 0.1");

  // DOT export needs the graph
  RunResult dot_missing = run(cli + " evaluate " + fit_doc.string() + " --truth " +
                                  (data / "truth.memb").string() + " --out " +
                                  (work / "e2.txt").string() + " --dot " +
                                  (work / "g.dot").string(),
                              work);
  EXPECT(dot_missing.exit_code == 2, "dot without graph is an input error");
  EXPECT(dot_missing.err.find("\"error\"") != std::string::npos, "error record emitted");

  RunResult dot_ok = run(cli + " evaluate " + fit_doc.string() + " --truth " +
                             (data / "truth.memb").string() + " --out " +
                             (work / "e3.txt").string() + " --dot " + (work / "g.dot").string() +
                             " --graph " + (data / "graph.edges").string(),
                         work);
  EXPECT(dot_ok.exit_code == 0, "dot export works: " + dot_ok.err);
  EXPECT(slurp(work / "g.dot").find("digraph") != std::string::npos, "dot content");

  // select around the true order
  const fs::path sel_doc = work / "select.osbm";
  RunResult sel = run(cli + " select " + (data / "graph.edges").string() +
                          " --q-min 1 --q-max 3 --restarts 2 --seed 9 --out " + sel_doc.string(),
                      work);
  EXPECT(sel.exit_code == 0, "select exits 0: " + sel.err);
  EXPECT(sel.out.find("q_star 2") != std::string::npos, "selects the planted order");

  // determinism: identical seeds give byte-identical payloads
  const fs::path fit_doc2 = work / "fit2.osbm";
  run(cli + " fit " + (data / "graph.edges").string() + " --q 2 --restarts 3 --seed 5 --out " +
          fit_doc2.string(),
      work);
  EXPECT(slurp(fit_doc) == slurp(fit_doc2), "fit reruns are byte-identical");

  const fs::path sel_doc2 = work / "select2.osbm";
  run(cli + " select " + (data / "graph.edges").string() +
          " --q-min 1 --q-max 3 --restarts 2 --seed 9 --out " + sel_doc2.string(),
      work);
  EXPECT(payload(slurp(sel_doc)) == payload(slurp(sel_doc2)),
         "select rerun payloads are byte-identical");

  const fs::path data2 = work / "data2";
  run(cli + " generate --config " + cfg.string() + " --out " + data2.string(), work);
  EXPECT(slurp(data / "graph.edges") == slurp(data2 / "graph.edges"),
         "generate reruns are byte-identical");

  // input error paths
  RunResult missing = run(cli + " fit " + (work / "nope.edges").string() + " --q 2 --out " +
                              (work / "f.osbm").string(),
                          work);
  EXPECT(missing.exit_code == 2, "missing input exits 2");
  EXPECT(missing.err.find("\"error\"") != std::string::npos, "error record on stderr");

  {
    std::ofstream bad(work / "bad.edges");
    bad << "nodes 3\n1 1\n";
  }
  RunResult self_loop = run(cli + " fit " + (work / "bad.edges").string() + " --q 1 --out " +
                                (work / "f.osbm").string(),
                            work);
  EXPECT(self_loop.exit_code == 2, "self loop exits 2");
  EXPECT(self_loop.err.find("SelfLoop") != std::string::npos, "self loop error kind");

  // experiment with zero replicates writes empty tables and exits 0
  const fs::path exp_cfg = work / "exp.cfg";
  {
    std::ofstream out(exp_cfg);
    out << "osbm-config 1\n"
        << "protocol confusion\n"
        << "n 30\n"
        << "q_true 2\n"
        << "lambda 6\n"
        << "balance balanced\n"
        << "networks 0\n"
        << "q_min 2\n"
        << "q_max 3\n"
        << "restarts 1\n"
        << "seed 3\n";
  }
  RunResult exp = run(cli + " experiment --config " + exp_cfg.string() + " --out " +
                          (work / "exp").string(),
                      work);
  EXPECT(exp.exit_code == 0, "zero-replicate experiment exits 0: " + exp.err);
  const std::string confusion_csv = slurp(work / "exp" / "confusion_L6_balanced.csv");
  EXPECT(confusion_csv.rfind("# osbm", 0) == 0, "confusion csv carries provenance");
  EXPECT(confusion_csv.find("q_true,") != std::string::npos, "confusion csv has its header");
  const std::string outcomes_csv = slurp(work / "exp" / "outcomes_L6_balanced.csv");
  EXPECT(outcomes_csv.find("\n2,") == std::string::npos, "no outcome rows for zero replicates");

  if (failures == 0) {
    std::cout << "cli pipeline: all checks passed\n";
    return 0;
  }
  std::cerr << failures << " cli pipeline check(s) failed\n";
  return 1;
}
