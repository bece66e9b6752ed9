// Batch front-end: generate / fit / select / evaluate / experiment.
// Exit codes: 0 success, 2 input error, 3 numerical failure, 4 selection
// failure. Failures also emit a one-line JSON error record on stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "osbm/errors.hpp"
#include "osbm/formats.hpp"
#include "osbm/metrics.hpp"
#include "osbm/parallel.hpp"
#include "osbm/selection.hpp"
#include "osbm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace osbm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSelection = 4;

void emit_error(const std::string& kind, const std::string& message, long line = -1) {
  json record = {{"error", {{"kind", kind}, {"message", message}}}};
  if (line >= 0) record["error"]["line"] = line;
  std::cerr << record.dump() << "\n";
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string digest_of_text(const std::string& text) { return io::hex64(io::fnv1a64(text)); }

Vector alpha_for(const std::string& balance, Index q_true, double geometric_a) {
  if (balance == "geometric") return geometric_alpha(q_true, geometric_a);
  return Vector::Constant(q_true, 1.0 / static_cast<double>(q_true));
}

Balance balance_enum(const std::string& name) {
  return name == "geometric" ? Balance::Geometric : Balance::Balanced;
}

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateArgs& args) {
  io::ExperimentConfig cfg = io::read_experiment_config(args.config);
  if (cfg.q_trues.size() != 1 || cfg.lambdas.size() != 1 || cfg.balances.size() != 1) {
    throw FormatError(FormatError::Kind::BadValue,
                      "generate: q_true, lambda and balance must be single values");
  }
  if (args.seed) cfg.seed = *args.seed;
  const Index q_true = cfg.q_trues[0];
  const OsbmParameters params =
      community_parameters(q_true, cfg.lambdas[0], cfg.epsilon, cfg.w_star,
                           alpha_for(cfg.balances[0], q_true, cfg.geometric_a));
  auto [x, z] = sample_network(params, cfg.n_vertices, cfg.seed);

  const std::string digest = digest_of_text(io::experiment_config_text(cfg));
  const std::vector<std::string> provenance = {
      std::string("osbm generate ") + kVersion, "seed " + std::to_string(cfg.seed),
      "config " + digest};
  fs::create_directories(args.out);
  const std::string graph_path = (fs::path(args.out) / "graph.edges").string();
  const std::string truth_path = (fs::path(args.out) / "truth.memb").string();
  io::write_edge_list(graph_path, x, provenance);
  io::write_memberships(truth_path, z, provenance);
  std::cout << "graph " << graph_path << "\n";
  std::cout << "truth " << truth_path << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string graph;
  Index q = 0;
  std::string out;
  std::uint64_t seed = 1;
  int restarts = 10;
};

int run_fit(const FitArgs& args) {
  const AdjacencyMatrix x = io::read_edge_list(args.graph);
  const Hyperpriors priors = Hyperpriors::defaults(args.q);
  FitResult best = fit_restarts(x, args.q, priors, args.seed, args.restarts);

  io::FitDocument doc;
  doc.tool_version = kVersion;
  doc.seed = args.seed;
  std::ostringstream invocation;
  invocation << "fit graph=" << digest_of_text(read_file_bytes(args.graph)) << " q=" << args.q
             << " seed=" << args.seed << " restarts=" << args.restarts;
  doc.config_digest = digest_of_text(invocation.str());
  doc.result = std::move(best);
  io::write_fit_document(args.out, doc);
  std::cout << "il_osbm " << io::format_double(doc.result.il_osbm) << "\n";
  std::cout << "converged " << (doc.result.converged ? 1 : 0) << "\n";
  std::cout << "iterations " << doc.result.iterations << "\n";
  return kExitOk;
}

struct SelectArgs {
  std::string graph;
  Index q_min = 2;
  Index q_max = 8;
  std::string out;
  std::uint64_t seed = 1;
  int restarts = 10;
  int workers = 1;
};

int run_select(const SelectArgs& args) {
  if (args.q_min < 1 || args.q_max < args.q_min) {
    throw std::invalid_argument("select: require 1 <= q-min <= q-max");
  }
  const AdjacencyMatrix x = io::read_edge_list(args.graph);
  std::vector<Index> q_range;
  for (Index q = args.q_min; q <= args.q_max; ++q) q_range.push_back(q);
  SelectOptions opts;
  opts.restarts = args.restarts;
  opts.workers = resolve_workers(args.workers);
  const SelectionReport report = select_q(x, q_range, PriorConfig{}, args.seed, opts);

  io::SelectionDocument doc;
  doc.tool_version = kVersion;
  doc.seed = args.seed;
  std::ostringstream invocation;
  invocation << "select graph=" << digest_of_text(read_file_bytes(args.graph))
             << " q_min=" << args.q_min << " q_max=" << args.q_max << " seed=" << args.seed
             << " restarts=" << args.restarts;
  doc.config_digest = digest_of_text(invocation.str());
  doc.report = report;
  io::write_selection_document(args.out, doc);
  std::cout << "q_star " << report.q_star << "\n";
  std::cout << "best_il " << io::format_double(report.best_il) << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string fit;
  std::string truth;
  std::string out;
  double threshold = 0.5;
  std::string dot;
  std::string graph;
};

int run_evaluate(const EvaluateArgs& args) {
  const io::FitDocument doc = io::read_fit_document(args.fit);
  const MembershipMatrix truth = io::read_memberships(args.truth);
  const MembershipMatrix z_hat = threshold_memberships(doc.result.state.tau, args.threshold);
  const double distance = cluster_distance(truth, z_hat);
  const io::OverlapSummary summary = io::summarize_memberships(z_hat);
  const std::string digest =
      digest_of_text(read_file_bytes(args.fit) + read_file_bytes(args.truth));
  io::write_eval_report(args.out, summary, distance, args.threshold, kVersion, digest);
  if (!args.dot.empty()) {
    if (args.graph.empty()) {
      throw std::invalid_argument("evaluate: --dot requires --graph");
    }
    const AdjacencyMatrix x = io::read_edge_list(args.graph);
    io::write_dot(args.dot, x, z_hat);
  }
  std::cout << "cluster_distance " << io::format_double(distance) << "\n";
  return kExitOk;
}

struct ExperimentArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int run_experiment(const ExperimentArgs& args) {
  io::ExperimentConfig cfg = io::read_experiment_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (args.workers) cfg.workers = *args.workers;
  if (cfg.protocol == "generate") {
    throw FormatError(FormatError::Kind::BadValue,
                      "experiment: use the generate subcommand for generate configs");
  }
  fs::create_directories(args.out);
  io::write_experiment_config((fs::path(args.out) / "config_used.cfg").string(), cfg);

  PriorConfig priors;
  priors.eta0 = cfg.eta0;
  priors.zeta0 = cfg.zeta0;
  priors.a0 = cfg.a0;
  priors.b0 = cfg.b0;

  const std::string provenance = std::string("osbm ") + kVersion + " seed=" +
                                 std::to_string(cfg.seed) + " config=" +
                                 digest_of_text(io::experiment_config_text(cfg));

  if (cfg.protocol == "coverage") {
    CoverageConfig coverage;
    coverage.n_vertices = cfg.n_vertices;
    coverage.q_true = cfg.q_trues.at(0);
    coverage.lambda = cfg.lambdas.at(0);
    coverage.epsilon = cfg.epsilon;
    coverage.w_star = cfg.w_star;
    coverage.level = cfg.level;
    coverage.threshold = cfg.threshold;
    coverage.restarts = cfg.restarts;
    coverage.workers = resolve_workers(cfg.workers);
    coverage.priors = priors;
    const auto rates = coverage_experiment(coverage, cfg.networks, cfg.seed);
    io::write_coverage_csv((fs::path(args.out) / "coverage.csv").string(), rates, provenance);
    std::cout << "coverage " << (fs::path(args.out) / "coverage.csv").string() << "\n";
    return kExitOk;
  }

  ConfusionConfig confusion;
  confusion.n_vertices = cfg.n_vertices;
  confusion.epsilon = cfg.epsilon;
  confusion.w_star = cfg.w_star;
  confusion.geometric_a = cfg.geometric_a;
  confusion.lambdas = cfg.lambdas;
  confusion.balances.clear();
  for (const std::string& b : cfg.balances) confusion.balances.push_back(balance_enum(b));
  confusion.q_trues = cfg.q_trues;
  confusion.q_min = cfg.q_min;
  confusion.q_max = cfg.q_max;
  confusion.restarts = cfg.restarts;
  confusion.threshold = cfg.threshold;
  confusion.workers = resolve_workers(cfg.workers);
  confusion.priors = priors;
  const std::vector<ConfusionCell> cells = confusion_experiment(confusion, cfg.networks, cfg.seed);

  for (const double lambda : confusion.lambdas) {
    for (const Balance balance : confusion.balances) {
      const std::string tag =
          "L" + io::lambda_tag(lambda) + "_" + balance_name(balance);
      const ConfusionMatrix matrix =
          tally_confusion(cells, lambda, balance, cfg.q_min, cfg.q_max);
      io::write_confusion_csv((fs::path(args.out) / ("confusion_" + tag + ".csv")).string(),
                              matrix, provenance);
      io::write_outcomes_csv((fs::path(args.out) / ("outcomes_" + tag + ".csv")).string(), cells,
                             lambda, balance, provenance);
      io::write_distance_quantiles_csv(
          (fs::path(args.out) / ("distance_quantiles_" + tag + ".csv")).string(), cells, lambda,
          balance, provenance);
      std::cout << "cell " << tag << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlapping stochastic block model toolkit"};
  app.require_subcommand(1);

  GenerateArgs generate_args;
  std::uint64_t generate_seed = 0;
  auto* generate = app.add_subcommand("generate", "Sample a network and its true memberships");
  generate->add_option("--config", generate_args.config, "Config file")->required();
  generate->add_option("--out", generate_args.out, "Output directory")->required();
  auto* generate_seed_opt = generate->add_option("--seed", generate_seed, "Override config seed");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Variational fit for a fixed number of classes");
  fit_cmd->add_option("graph", fit_args.graph, "Edge list")->required();
  fit_cmd->add_option("--q", fit_args.q, "Number of classes")->required();
  fit_cmd->add_option("--out", fit_args.out, "Fit document path")->required();
  fit_cmd->add_option("--seed", fit_args.seed, "Restart seed");
  fit_cmd->add_option("--restarts", fit_args.restarts, "Initializations to try");

  SelectArgs select_args;
  auto* select_cmd = app.add_subcommand("select", "Model-order selection over a Q range");
  select_cmd->add_option("graph", select_args.graph, "Edge list")->required();
  select_cmd->add_option("--q-min", select_args.q_min, "Smallest Q")->required();
  select_cmd->add_option("--q-max", select_args.q_max, "Largest Q")->required();
  select_cmd->add_option("--out", select_args.out, "Selection report path")->required();
  select_cmd->add_option("--seed", select_args.seed, "Restart seed");
  select_cmd->add_option("--restarts", select_args.restarts, "Initializations per Q");
  select_cmd->add_option("--workers", select_args.workers, "Worker threads (0 = all cores)");

  EvaluateArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a fit against true memberships");
  evaluate_cmd->add_option("fit", evaluate_args.fit, "Fit document")->required();
  evaluate_cmd->add_option("--truth", evaluate_args.truth, "True membership file")->required();
  evaluate_cmd->add_option("--out", evaluate_args.out, "Report path")->required();
  evaluate_cmd->add_option("--threshold", evaluate_args.threshold, "Membership threshold");
  evaluate_cmd->add_option("--dot", evaluate_args.dot, "Optional DOT export path");
  evaluate_cmd->add_option("--graph", evaluate_args.graph, "Edge list for the DOT export");

  ExperimentArgs experiment_args;
  std::uint64_t experiment_seed = 0;
  int experiment_workers = 0;
  auto* experiment_cmd =
      app.add_subcommand("experiment", "Run a simulation protocol and write per-cell CSVs");
  experiment_cmd->add_option("--config", experiment_args.config, "Config file")->required();
  experiment_cmd->add_option("--out", experiment_args.out, "Output directory")->required();
  auto* experiment_seed_opt =
      experiment_cmd->add_option("--seed", experiment_seed, "Override config seed");
  auto* experiment_workers_opt =
      experiment_cmd->add_option("--workers", experiment_workers, "Override config workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kExitOk;
    emit_error("UsageError", e.what());
    return kExitInput;
  }

  if (generate_seed_opt->count() > 0) generate_args.seed = generate_seed;
  if (experiment_seed_opt->count() > 0) experiment_args.seed = experiment_seed;
  if (experiment_workers_opt->count() > 0) experiment_args.workers = experiment_workers;

  try {
    if (generate->parsed()) return run_generate(generate_args);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (select_cmd->parsed()) return run_select(select_args);
    if (evaluate_cmd->parsed()) return run_evaluate(evaluate_args);
    if (experiment_cmd->parsed()) return run_experiment(experiment_args);
  } catch (const FormatError& e) {
    emit_error(format_error_kind_name(e.kind), e.what(), e.line);
    return kExitInput;
  } catch (const SelectionFailedError& e) {
    emit_error("SelectionFailed", e.what());
    return kExitSelection;
  } catch (const SingularMatrixError& e) {
    emit_error("SingularMatrix", e.what());
    return kExitNumerical;
  } catch (const NonFiniteError& e) {
    emit_error("NonFinite", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    emit_error("InvalidArgument", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    emit_error("Error", e.what());
    return kExitInput;
  }
  return kExitOk;
}
