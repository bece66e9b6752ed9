#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "osbm/metrics.hpp"

// Plain-text file formats of the command line tool. All floating point values
// are written with "%.17g" so reruns with identical seeds reproduce
// byte-identical numeric payloads; lines starting with "walltime_ms" are
// diagnostics and the only exception.
namespace osbm::io {

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);
std::string format_double(double v);

// --- directed edge lists ---------------------------------------------------
// Optional "nodes N" header, then one "src dst" pair of 0-based ids per line.
// '#' lines are comments. Without a header N = max id + 1. Self loops are
// rejected, duplicate edges are idempotent.
AdjacencyMatrix read_edge_list(std::istream& in, const std::string& name);
AdjacencyMatrix read_edge_list(const std::string& path);
void write_edge_list(std::ostream& out, const AdjacencyMatrix& x,
                     const std::vector<std::string>& comments = {});
void write_edge_list(const std::string& path, const AdjacencyMatrix& x,
                     const std::vector<std::string>& comments = {});

// --- membership matrices ----------------------------------------------------
// Header "memberships N Q", then N rows of Q 0/1 entries.
MembershipMatrix read_memberships(std::istream& in, const std::string& name);
MembershipMatrix read_memberships(const std::string& path);
void write_memberships(std::ostream& out, const MembershipMatrix& z,
                       const std::vector<std::string>& comments = {});
void write_memberships(const std::string& path, const MembershipMatrix& z,
                       const std::vector<std::string>& comments = {});

// --- fit documents (schema "osbm-fit 1") ------------------------------------
// Carries the variational posteriors, criterion value and bound trace; the
// local bound parameters xi are recomputable and not stored.
struct FitDocument {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string config_digest;
  FitResult result;
};

void write_fit_document(std::ostream& out, const FitDocument& doc);
void write_fit_document(const std::string& path, const FitDocument& doc);
FitDocument read_fit_document(std::istream& in, const std::string& name);
FitDocument read_fit_document(const std::string& path);

// --- selection reports (schema "osbm-select 1") ------------------------------
struct SelectionDocument {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string config_digest;
  SelectionReport report;
};

void write_selection_document(std::ostream& out, const SelectionDocument& doc);
void write_selection_document(const std::string& path, const SelectionDocument& doc);
SelectionDocument read_selection_document(std::istream& in, const std::string& name);
SelectionDocument read_selection_document(const std::string& path);

// --- experiment / generation configs (schema "osbm-config 1") ----------------
struct ExperimentConfig {
  std::string protocol = "confusion";  // confusion | coverage | generate
  Index n_vertices = 100;
  std::vector<Index> q_trues{2};
  std::vector<double> lambdas{6.0};
  std::vector<std::string> balances{"balanced"};  // balanced | geometric
  double epsilon = 1.0;
  double w_star = -5.5;
  double geometric_a = 0.7;
  int networks = 20;
  Index q_min = 2;
  Index q_max = 8;
  int restarts = 10;
  double eta0 = 0.5;
  double zeta0 = 0.5;
  double a0 = 1.0;
  double b0 = 1.0;
  double threshold = 0.5;
  double level = 0.99;
  std::uint64_t seed = 1;
  int workers = 1;
};

std::string experiment_config_text(const ExperimentConfig& cfg);
ExperimentConfig read_experiment_config(std::istream& in, const std::string& name);
ExperimentConfig read_experiment_config(const std::string& path);
void write_experiment_config(const std::string& path, const ExperimentConfig& cfg);

// --- evaluation summaries -----------------------------------------------------
struct OverlapSummary {
  Index vertices = 0;
  Index classes = 0;
  Index outliers = 0;           // null component rows
  Index single_membership = 0;
  Index multi_membership = 0;
  std::vector<Index> class_sizes;
  std::vector<std::pair<std::string, Index>> overlap_patterns;  // "0+2" -> count
};

OverlapSummary summarize_memberships(const MembershipMatrix& z);

void write_eval_report(std::ostream& out, const OverlapSummary& summary, double distance,
                       double threshold, const std::string& tool_version,
                       const std::string& inputs_digest);
void write_eval_report(const std::string& path, const OverlapSummary& summary, double distance,
                       double threshold, const std::string& tool_version,
                       const std::string& inputs_digest);

// --- DOT export ----------------------------------------------------------------
// Membership-colored digraph: outliers white, single classes from a fixed
// palette, overlaps drawn wedged with all member colors.
void write_dot(std::ostream& out, const AdjacencyMatrix& x, const MembershipMatrix& z);
void write_dot(const std::string& path, const AdjacencyMatrix& x, const MembershipMatrix& z);

// --- experiment CSV outputs -----------------------------------------------------
std::string lambda_tag(double lambda);  // "3.5" -> "3p5" for filenames

// Each CSV starts with a '#' provenance line (tool version, seed, config digest).
void write_confusion_csv(const std::string& path, const ConfusionMatrix& m,
                         const std::string& provenance);
void write_outcomes_csv(const std::string& path, const std::vector<ConfusionCell>& cells,
                        double lambda, Balance balance, const std::string& provenance);
void write_distance_quantiles_csv(const std::string& path,
                                  const std::vector<ConfusionCell>& cells, double lambda,
                                  Balance balance, const std::string& provenance);
void write_coverage_csv(const std::string& path, const std::vector<ParameterCoverage>& coverage,
                        const std::string& provenance);

}  // namespace osbm::io
