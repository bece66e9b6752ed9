#include "osbm/formats.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "osbm/errors.hpp"
#include "osbm/version.hpp"

namespace osbm {

const char* format_error_kind_name(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::Io: return "Io";
    case FormatError::Kind::MalformedLine: return "MalformedLine";
    case FormatError::Kind::SelfLoop: return "SelfLoop";
    case FormatError::Kind::EmptyGraph: return "EmptyGraph";
    case FormatError::Kind::BadHeader: return "BadHeader";
    case FormatError::Kind::BadValue: return "BadValue";
  }
  return "Unknown";
}

}  // namespace osbm

namespace osbm::io {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

bool is_comment_or_blank(const std::string& line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(ch))) return false;
  }
  return true;
}

long long parse_integer(const std::string& token, const std::string& what, long line) {
  char* end = nullptr;
  const long long v = std::strtoll(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0') {
    throw FormatError(FormatError::Kind::MalformedLine, what + ": not an integer '" + token + "'",
                      line);
  }
  return v;
}

double parse_real(const std::string& token, const std::string& what, long line) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw FormatError(FormatError::Kind::BadValue, what + ": not a number '" + token + "'", line);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& token, const std::string& what, long line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0') {
    throw FormatError(FormatError::Kind::BadValue, what + ": not an unsigned integer", line);
  }
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path);
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// --- edge lists --------------------------------------------------------------

AdjacencyMatrix read_edge_list(std::istream& in, const std::string& name) {
  std::vector<std::pair<long long, long long>> edges;
  long long declared_n = -1;
  long long max_id = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const std::vector<std::string> tokens = tokenize(line);
    if (tokens.size() == 2 && tokens[0] == "nodes") {
      if (declared_n >= 0) {
        throw FormatError(FormatError::Kind::BadHeader, name + ": duplicate nodes header",
                          line_no);
      }
      declared_n = parse_integer(tokens[1], name, line_no);
      if (declared_n < 0) {
        throw FormatError(FormatError::Kind::BadHeader, name + ": negative vertex count", line_no);
      }
      continue;
    }
    if (tokens.size() != 2) {
      throw FormatError(FormatError::Kind::MalformedLine,
                        name + ": expected 'src dst', got '" + line + "'", line_no);
    }
    const long long src = parse_integer(tokens[0], name, line_no);
    const long long dst = parse_integer(tokens[1], name, line_no);
    if (src < 0 || dst < 0) {
      throw FormatError(FormatError::Kind::MalformedLine, name + ": negative vertex id", line_no);
    }
    if (src == dst) {
      throw FormatError(FormatError::Kind::SelfLoop,
                        name + ": self loop at vertex " + std::to_string(src), line_no);
    }
    edges.emplace_back(src, dst);
    max_id = std::max({max_id, src, dst});
  }
  const long long n = declared_n >= 0 ? declared_n : max_id + 1;
  if (n <= 0) {
    throw FormatError(FormatError::Kind::EmptyGraph, name + ": no vertices");
  }
  if (max_id >= n) {
    throw FormatError(FormatError::Kind::MalformedLine,
                      name + ": vertex id " + std::to_string(max_id) + " exceeds declared count");
  }
  AdjacencyMatrix x(static_cast<Index>(n));
  for (const auto& [src, dst] : edges) {
    x.x(static_cast<Index>(src), static_cast<Index>(dst)) = 1;  // duplicates are idempotent
  }
  return x;
}

AdjacencyMatrix read_edge_list(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_edge_list(in, path);
}

void write_edge_list(std::ostream& out, const AdjacencyMatrix& x,
                     const std::vector<std::string>& comments) {
  for (const std::string& comment : comments) out << "# " << comment << "\n";
  out << "nodes " << x.n() << "\n";
  for (Index i = 0; i < x.n(); ++i) {
    for (Index j = 0; j < x.n(); ++j) {
      if (i != j && x.x(i, j) != 0) out << i << " " << j << "\n";
    }
  }
}

void write_edge_list(const std::string& path, const AdjacencyMatrix& x,
                     const std::vector<std::string>& comments) {
  std::ofstream out = open_output(path);
  write_edge_list(out, x, comments);
}

// --- membership matrices ------------------------------------------------------

MembershipMatrix read_memberships(std::istream& in, const std::string& name) {
  std::string line;
  long line_no = 0;
  long long n = -1, q = -1;
  MembershipMatrix z;
  Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const std::vector<std::string> tokens = tokenize(line);
    if (n < 0) {
      if (tokens.size() != 3 || tokens[0] != "memberships") {
        throw FormatError(FormatError::Kind::BadHeader,
                          name + ": expected 'memberships N Q' header", line_no);
      }
      n = parse_integer(tokens[1], name, line_no);
      q = parse_integer(tokens[2], name, line_no);
      if (n < 1 || q < 1) {
        throw FormatError(FormatError::Kind::BadHeader, name + ": bad membership dimensions",
                          line_no);
      }
      z.z.setZero(static_cast<Index>(n), static_cast<Index>(q));
      continue;
    }
    if (row >= n) {
      throw FormatError(FormatError::Kind::MalformedLine, name + ": more rows than declared",
                        line_no);
    }
    if (static_cast<long long>(tokens.size()) != q) {
      throw FormatError(FormatError::Kind::MalformedLine, name + ": wrong number of entries",
                        line_no);
    }
    for (long long c = 0; c < q; ++c) {
      const long long v = parse_integer(tokens[static_cast<std::size_t>(c)], name, line_no);
      if (v != 0 && v != 1) {
        throw FormatError(FormatError::Kind::MalformedLine, name + ": entries must be 0 or 1",
                          line_no);
      }
      z.z(row, static_cast<Index>(c)) = static_cast<int>(v);
    }
    ++row;
  }
  if (n < 0) throw FormatError(FormatError::Kind::BadHeader, name + ": missing header");
  if (row != n) {
    throw FormatError(FormatError::Kind::MalformedLine, name + ": fewer rows than declared");
  }
  return z;
}

MembershipMatrix read_memberships(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_memberships(in, path);
}

void write_memberships(std::ostream& out, const MembershipMatrix& z,
                       const std::vector<std::string>& comments) {
  for (const std::string& comment : comments) out << "# " << comment << "\n";
  out << "memberships " << z.n() << " " << z.q() << "\n";
  for (Index i = 0; i < z.n(); ++i) {
    for (Index c = 0; c < z.q(); ++c) {
      out << (c > 0 ? " " : "") << z.z(i, c);
    }
    out << "\n";
  }
}

void write_memberships(const std::string& path, const MembershipMatrix& z,
                       const std::vector<std::string>& comments) {
  std::ofstream out = open_output(path);
  write_memberships(out, z, comments);
}

// --- fit documents --------------------------------------------------------------

void write_fit_document(std::ostream& out, const FitDocument& doc) {
  const VariationalState& s = doc.result.state;
  const Index n = s.n();
  const Index q = s.q();
  const Index d2 = (q + 1) * (q + 1);
  out << "osbm-fit 1\n";
  out << "version " << doc.tool_version << "\n";
  out << "seed " << doc.seed << "\n";
  out << "config_digest " << doc.config_digest << "\n";
  out << "n " << n << "\n";
  out << "q " << q << "\n";
  out << "converged " << (doc.result.converged ? 1 : 0) << "\n";
  out << "iterations " << doc.result.iterations << "\n";
  out << "il_osbm " << format_double(doc.result.il_osbm) << "\n";
  out << "bound_trace " << doc.result.bound_trace.size();
  for (const double v : doc.result.bound_trace) out << " " << format_double(v);
  out << "\n";
  out << "a_n " << format_double(s.a_n) << "\n";
  out << "b_n " << format_double(s.b_n) << "\n";
  out << "eta_n";
  for (Index c = 0; c < q; ++c) out << " " << format_double(s.eta_n(c));
  out << "\n";
  out << "zeta_n";
  for (Index c = 0; c < q; ++c) out << " " << format_double(s.zeta_n(c));
  out << "\n";
  out << "w_n_vec";
  for (Index k = 0; k < d2; ++k) out << " " << format_double(s.w_n_vec(k));
  out << "\n";
  out << "sigma_n\n";
  for (Index r = 0; r < d2; ++r) {
    for (Index c = 0; c < d2; ++c) {
      out << (c > 0 ? " " : "") << format_double(s.sigma_n(r, c));
    }
    out << "\n";
  }
  out << "tau\n";
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < q; ++c) {
      out << (c > 0 ? " " : "") << format_double(s.tau(i, c));
    }
    out << "\n";
  }
}

void write_fit_document(const std::string& path, const FitDocument& doc) {
  std::ofstream out = open_output(path);
  write_fit_document(out, doc);
}

FitDocument read_fit_document(std::istream& in, const std::string& name) {
  FitDocument doc;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line != "osbm-fit 1") {
    throw FormatError(FormatError::Kind::BadHeader, name + ": expected 'osbm-fit 1' header", 1);
  }
  line_no = 1;
  Index n = -1, q = -1;
  VariationalState& s = doc.result.state;

  auto read_matrix_rows = [&](Matrix& m, Index rows, Index cols, const char* what) {
    m.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) {
        throw FormatError(FormatError::Kind::MalformedLine,
                          name + ": truncated " + what + " block", line_no);
      }
      ++line_no;
      const std::vector<std::string> tokens = tokenize(line);
      if (static_cast<Index>(tokens.size()) != cols) {
        throw FormatError(FormatError::Kind::MalformedLine,
                          name + ": wrong " + std::string(what) + " row width", line_no);
      }
      for (Index c = 0; c < cols; ++c) {
        m(r, c) = parse_real(tokens[static_cast<std::size_t>(c)], what, line_no);
      }
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string key = tokens[0];
    const auto need = [&](std::size_t count) {
      if (tokens.size() != count + 1) {
        throw FormatError(FormatError::Kind::MalformedLine,
                          name + ": key '" + key + "' expects " + std::to_string(count) +
                              " value(s)",
                          line_no);
      }
    };
    if (key == "version") {
      need(1);
      doc.tool_version = tokens[1];
    } else if (key == "seed") {
      need(1);
      doc.seed = parse_u64(tokens[1], name, line_no);
    } else if (key == "config_digest") {
      need(1);
      doc.config_digest = tokens[1];
    } else if (key == "n") {
      need(1);
      n = static_cast<Index>(parse_integer(tokens[1], name, line_no));
    } else if (key == "q") {
      need(1);
      q = static_cast<Index>(parse_integer(tokens[1], name, line_no));
    } else if (key == "converged") {
      need(1);
      doc.result.converged = parse_integer(tokens[1], name, line_no) != 0;
    } else if (key == "iterations") {
      need(1);
      doc.result.iterations = static_cast<int>(parse_integer(tokens[1], name, line_no));
    } else if (key == "il_osbm") {
      need(1);
      doc.result.il_osbm = parse_real(tokens[1], name, line_no);
    } else if (key == "bound_trace") {
      if (tokens.size() < 2) {
        throw FormatError(FormatError::Kind::MalformedLine, name + ": bound_trace needs a count",
                          line_no);
      }
      const long long count = parse_integer(tokens[1], name, line_no);
      if (static_cast<long long>(tokens.size()) != count + 2) {
        throw FormatError(FormatError::Kind::MalformedLine, name + ": bound_trace length mismatch",
                          line_no);
      }
      doc.result.bound_trace.clear();
      for (long long k = 0; k < count; ++k) {
        doc.result.bound_trace.push_back(
            parse_real(tokens[static_cast<std::size_t>(k + 2)], name, line_no));
      }
    } else if (key == "a_n") {
      need(1);
      s.a_n = parse_real(tokens[1], name, line_no);
    } else if (key == "b_n") {
      need(1);
      s.b_n = parse_real(tokens[1], name, line_no);
    } else if (key == "eta_n" || key == "zeta_n" || key == "w_n_vec") {
      Vector v(static_cast<Index>(tokens.size()) - 1);
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        v(static_cast<Index>(k - 1)) = parse_real(tokens[k], name, line_no);
      }
      if (key == "eta_n") {
        s.eta_n = std::move(v);
      } else if (key == "zeta_n") {
        s.zeta_n = std::move(v);
      } else {
        s.w_n_vec = std::move(v);
      }
    } else if (key == "sigma_n") {
      if (q < 0) {
        throw FormatError(FormatError::Kind::MalformedLine, name + ": sigma_n before q", line_no);
      }
      const Index d2 = (q + 1) * (q + 1);
      read_matrix_rows(s.sigma_n, d2, d2, "sigma_n");
    } else if (key == "tau") {
      if (n < 0 || q < 0) {
        throw FormatError(FormatError::Kind::MalformedLine, name + ": tau before n/q", line_no);
      }
      read_matrix_rows(s.tau, n, q, "tau");
    } else {
      throw FormatError(FormatError::Kind::BadValue, name + ": unknown key '" + key + "'",
                        line_no);
    }
  }
  if (n < 1 || q < 1 || s.tau.rows() != n) {
    throw FormatError(FormatError::Kind::MalformedLine, name + ": incomplete fit document");
  }
  // Local bound parameters are not persisted; callers recompute them if needed.
  s.xi.resize(0, 0);
  return doc;
}

FitDocument read_fit_document(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_fit_document(in, path);
}

// --- selection reports ------------------------------------------------------------

void write_selection_document(std::ostream& out, const SelectionDocument& doc) {
  out << "osbm-select 1\n";
  out << "version " << doc.tool_version << "\n";
  out << "seed " << doc.seed << "\n";
  out << "config_digest " << doc.config_digest << "\n";
  out << "q_star " << doc.report.q_star << "\n";
  out << "best_il " << format_double(doc.report.best_il) << "\n";
  out << "cells " << doc.report.cells.size() << "\n";
  for (const SelectionCell& cell : doc.report.cells) {
    out << "cell " << cell.q << " " << (cell.best ? 1 : 0) << " "
        << format_double(cell.best ? cell.best->il_osbm : 0.0) << " " << cell.best_restart
        << "\n";
    for (std::size_t r = 0; r < cell.restarts.size(); ++r) {
      const RestartOutcome& outcome = cell.restarts[r];
      out << "restart " << cell.q << " " << r << " " << outcome.seed << " "
          << (outcome.ok ? 1 : 0) << " " << format_double(outcome.il);
      if (!outcome.error.empty()) out << " " << outcome.error;
      out << "\n";
    }
  }
  // Diagnostics below are excluded from the reproducible payload.
  for (const SelectionCell& cell : doc.report.cells) {
    out << "walltime_ms " << cell.q << " " << format_double(cell.wall_ms) << "\n";
  }
}

void write_selection_document(const std::string& path, const SelectionDocument& doc) {
  std::ofstream out = open_output(path);
  write_selection_document(out, doc);
}

SelectionDocument read_selection_document(std::istream& in, const std::string& name) {
  SelectionDocument doc;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line != "osbm-select 1") {
    throw FormatError(FormatError::Kind::BadHeader, name + ": expected 'osbm-select 1' header", 1);
  }
  line_no = 1;
  std::map<Index, std::size_t> cell_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string key = tokens[0];
    if (key == "version") {
      doc.tool_version = tokens.at(1);
    } else if (key == "seed") {
      doc.seed = parse_u64(tokens.at(1), name, line_no);
    } else if (key == "config_digest") {
      doc.config_digest = tokens.at(1);
    } else if (key == "q_star") {
      doc.report.q_star = static_cast<Index>(parse_integer(tokens.at(1), name, line_no));
    } else if (key == "best_il") {
      doc.report.best_il = parse_real(tokens.at(1), name, line_no);
    } else if (key == "cells") {
      doc.report.cells.reserve(
          static_cast<std::size_t>(parse_integer(tokens.at(1), name, line_no)));
    } else if (key == "cell") {
      SelectionCell cell;
      cell.q = static_cast<Index>(parse_integer(tokens.at(1), name, line_no));
      const bool has_best = parse_integer(tokens.at(2), name, line_no) != 0;
      const double il = parse_real(tokens.at(3), name, line_no);
      cell.best_restart = static_cast<int>(parse_integer(tokens.at(4), name, line_no));
      if (has_best) {
        FitResult best;
        best.il_osbm = il;
        cell.best = std::move(best);  // summary only; full state lives in fit documents
      }
      cell_index[cell.q] = doc.report.cells.size();
      doc.report.cells.push_back(std::move(cell));
    } else if (key == "restart") {
      const Index q = static_cast<Index>(parse_integer(tokens.at(1), name, line_no));
      RestartOutcome outcome;
      outcome.seed = parse_u64(tokens.at(3), name, line_no);
      outcome.ok = parse_integer(tokens.at(4), name, line_no) != 0;
      outcome.il = parse_real(tokens.at(5), name, line_no);
      for (std::size_t k = 6; k < tokens.size(); ++k) {
        outcome.error += (k > 6 ? " " : "") + tokens[k];
      }
      doc.report.cells.at(cell_index.at(q)).restarts.push_back(std::move(outcome));
    } else if (key == "walltime_ms") {
      const Index q = static_cast<Index>(parse_integer(tokens.at(1), name, line_no));
      doc.report.cells.at(cell_index.at(q)).wall_ms = parse_real(tokens.at(2), name, line_no);
    } else {
      throw FormatError(FormatError::Kind::BadValue, name + ": unknown key '" + key + "'",
                        line_no);
    }
  }
  return doc;
}

SelectionDocument read_selection_document(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_selection_document(in, path);
}

// --- experiment configs -----------------------------------------------------------

std::string experiment_config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "osbm-config 1\n";
  out << "protocol " << cfg.protocol << "\n";
  out << "n " << cfg.n_vertices << "\n";
  out << "q_true";
  for (const Index v : cfg.q_trues) out << " " << v;
  out << "\n";
  out << "lambda";
  for (const double v : cfg.lambdas) out << " " << format_double(v);
  out << "\n";
  out << "balance";
  for (const std::string& v : cfg.balances) out << " " << v;
  out << "\n";
  out << "epsilon " << format_double(cfg.epsilon) << "\n";
  out << "w_star " << format_double(cfg.w_star) << "\n";
  out << "geometric_a " << format_double(cfg.geometric_a) << "\n";
  out << "networks " << cfg.networks << "\n";
  out << "q_min " << cfg.q_min << "\n";
  out << "q_max " << cfg.q_max << "\n";
  out << "restarts " << cfg.restarts << "\n";
  out << "eta0 " << format_double(cfg.eta0) << "\n";
  out << "zeta0 " << format_double(cfg.zeta0) << "\n";
  out << "a0 " << format_double(cfg.a0) << "\n";
  out << "b0 " << format_double(cfg.b0) << "\n";
  out << "threshold " << format_double(cfg.threshold) << "\n";
  out << "level " << format_double(cfg.level) << "\n";
  out << "seed " << cfg.seed << "\n";
  out << "workers " << cfg.workers << "\n";
  return out.str();
}

ExperimentConfig read_experiment_config(std::istream& in, const std::string& name) {
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line != "osbm-config 1") {
    throw FormatError(FormatError::Kind::BadHeader, name + ": expected 'osbm-config 1' header", 1);
  }
  line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string key = tokens[0];
    const auto values = [&](std::size_t at_least) {
      if (tokens.size() < at_least + 1) {
        throw FormatError(FormatError::Kind::BadValue, name + ": key '" + key + "' needs a value",
                          line_no);
      }
    };
    if (key == "protocol") {
      values(1);
      cfg.protocol = tokens[1];
      if (cfg.protocol != "confusion" && cfg.protocol != "coverage" &&
          cfg.protocol != "generate") {
        throw FormatError(FormatError::Kind::BadValue, name + ": unknown protocol", line_no);
      }
    } else if (key == "n") {
      values(1);
      cfg.n_vertices = static_cast<Index>(parse_integer(tokens[1], name, line_no));
    } else if (key == "q_true") {
      values(1);
      cfg.q_trues.clear();
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        cfg.q_trues.push_back(static_cast<Index>(parse_integer(tokens[k], name, line_no)));
      }
    } else if (key == "lambda") {
      values(1);
      cfg.lambdas.clear();
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        cfg.lambdas.push_back(parse_real(tokens[k], name, line_no));
      }
    } else if (key == "balance") {
      values(1);
      cfg.balances.clear();
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        if (tokens[k] != "balanced" && tokens[k] != "geometric") {
          throw FormatError(FormatError::Kind::BadValue, name + ": unknown balance", line_no);
        }
        cfg.balances.push_back(tokens[k]);
      }
    } else if (key == "epsilon") {
      values(1);
      cfg.epsilon = parse_real(tokens[1], name, line_no);
    } else if (key == "w_star") {
      values(1);
      cfg.w_star = parse_real(tokens[1], name, line_no);
    } else if (key == "geometric_a") {
      values(1);
      cfg.geometric_a = parse_real(tokens[1], name, line_no);
    } else if (key == "networks") {
      values(1);
      cfg.networks = static_cast<int>(parse_integer(tokens[1], name, line_no));
    } else if (key == "q_min") {
      values(1);
      cfg.q_min = static_cast<Index>(parse_integer(tokens[1], name, line_no));
    } else if (key == "q_max") {
      values(1);
      cfg.q_max = static_cast<Index>(parse_integer(tokens[1], name, line_no));
    } else if (key == "restarts") {
      values(1);
      cfg.restarts = static_cast<int>(parse_integer(tokens[1], name, line_no));
    } else if (key == "eta0") {
      values(1);
      cfg.eta0 = parse_real(tokens[1], name, line_no);
    } else if (key == "zeta0") {
      values(1);
      cfg.zeta0 = parse_real(tokens[1], name, line_no);
    } else if (key == "a0") {
      values(1);
      cfg.a0 = parse_real(tokens[1], name, line_no);
    } else if (key == "b0") {
      values(1);
      cfg.b0 = parse_real(tokens[1], name, line_no);
    } else if (key == "threshold") {
      values(1);
      cfg.threshold = parse_real(tokens[1], name, line_no);
    } else if (key == "level") {
      values(1);
      cfg.level = parse_real(tokens[1], name, line_no);
    } else if (key == "seed") {
      values(1);
      cfg.seed = parse_u64(tokens[1], name, line_no);
    } else if (key == "workers") {
      values(1);
      cfg.workers = static_cast<int>(parse_integer(tokens[1], name, line_no));
    } else {
      throw FormatError(FormatError::Kind::BadValue, name + ": unknown key '" + key + "'",
                        line_no);
    }
  }
  return cfg;
}

ExperimentConfig read_experiment_config(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_experiment_config(in, path);
}

void write_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out = open_output(path);
  out << experiment_config_text(cfg);
}

// --- evaluation summaries -----------------------------------------------------------

OverlapSummary summarize_memberships(const MembershipMatrix& z) {
  OverlapSummary s;
  s.vertices = z.n();
  s.classes = z.q();
  s.class_sizes.assign(static_cast<std::size_t>(z.q()), 0);
  std::map<std::string, Index> patterns;
  for (Index i = 0; i < z.n(); ++i) {
    Index memberships = 0;
    std::string pattern;
    for (Index c = 0; c < z.q(); ++c) {
      if (z.z(i, c) == 0) continue;
      ++memberships;
      s.class_sizes[static_cast<std::size_t>(c)]++;
      if (!pattern.empty()) pattern += "+";
      pattern += std::to_string(c);
    }
    if (memberships == 0) {
      s.outliers++;
    } else if (memberships == 1) {
      s.single_membership++;
    } else {
      s.multi_membership++;
      patterns[pattern]++;
    }
  }
  for (const auto& [pattern, count] : patterns) s.overlap_patterns.emplace_back(pattern, count);
  return s;
}

void write_eval_report(std::ostream& out, const OverlapSummary& summary, double distance,
                       double threshold, const std::string& tool_version,
                       const std::string& inputs_digest) {
  out << "osbm-eval 1\n";
  out << "version " << tool_version << "\n";
  out << "inputs_digest " << inputs_digest << "\n";
  out << "threshold " << format_double(threshold) << "\n";
  out << "cluster_distance " << format_double(distance) << "\n";
  out << "vertices " << summary.vertices << "\n";
  out << "classes " << summary.classes << "\n";
  out << "outliers " << summary.outliers << "\n";
  out << "single_membership " << summary.single_membership << "\n";
  out << "multi_membership " << summary.multi_membership << "\n";
  out << "class_sizes";
  for (const Index v : summary.class_sizes) out << " " << v;
  out << "\n";
  for (const auto& [pattern, count] : summary.overlap_patterns) {
    out << "overlap_pattern " << pattern << " " << count << "\n";
  }
}

void write_eval_report(const std::string& path, const OverlapSummary& summary, double distance,
                       double threshold, const std::string& tool_version,
                       const std::string& inputs_digest) {
  std::ofstream out = open_output(path);
  write_eval_report(out, summary, distance, threshold, tool_version, inputs_digest);
}

// --- DOT export ------------------------------------------------------------------------

namespace {

const char* kPalette[12] = {"#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
                            "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"};

}  // namespace

void write_dot(std::ostream& out, const AdjacencyMatrix& x, const MembershipMatrix& z) {
  if (z.n() != x.n()) throw std::invalid_argument("write_dot: graph/membership size mismatch");
  out << "digraph osbm {\n";
  out << "  node [shape=circle, style=filled];\n";
  for (Index i = 0; i < x.n(); ++i) {
    std::vector<Index> classes;
    for (Index c = 0; c < z.q(); ++c) {
      if (z.z(i, c) != 0) classes.push_back(c);
    }
    if (classes.empty()) {
      out << "  " << i << " [fillcolor=\"white\"];\n";
    } else if (classes.size() == 1) {
      out << "  " << i << " [fillcolor=\"" << kPalette[classes[0] % 12] << "\"];\n";
    } else {
      out << "  " << i << " [style=wedged, fillcolor=\"";
      for (std::size_t k = 0; k < classes.size(); ++k) {
        out << (k > 0 ? ":" : "") << kPalette[classes[k] % 12];
      }
      out << "\"];\n";
    }
  }
  for (Index i = 0; i < x.n(); ++i) {
    for (Index j = 0; j < x.n(); ++j) {
      if (i != j && x.x(i, j) != 0) out << "  " << i << " -> " << j << ";\n";
    }
  }
  out << "}\n";
}

void write_dot(const std::string& path, const AdjacencyMatrix& x, const MembershipMatrix& z) {
  std::ofstream out = open_output(path);
  write_dot(out, x, z);
}

// --- experiment CSV outputs --------------------------------------------------------------

std::string lambda_tag(double lambda) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", lambda);
  std::string tag(buffer);
  std::replace(tag.begin(), tag.end(), '.', 'p');
  std::replace(tag.begin(), tag.end(), '-', 'm');
  return tag;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& m,
                         const std::string& provenance) {
  std::ofstream out = open_output(path);
  out << "# " << provenance << "\n";
  out << "q_true";
  for (Index q = m.q_min; q <= m.q_max; ++q) out << ",q" << q;
  out << ",failures\n";
  for (Index row = 0; row < m.counts.rows(); ++row) {
    out << m.q_true_rows[static_cast<std::size_t>(row)];
    for (Index c = 0; c < m.counts.cols(); ++c) out << "," << m.counts(row, c);
    out << "," << m.failures(row) << "\n";
  }
}

void write_outcomes_csv(const std::string& path, const std::vector<ConfusionCell>& cells,
                        double lambda, Balance balance, const std::string& provenance) {
  std::ofstream out = open_output(path);
  out << "# " << provenance << "\n";
  out << "q_true,network,seed,ok,q_selected,best_il,distance,error\n";
  for (const ConfusionCell& cell : cells) {
    if (cell.lambda != lambda || cell.balance != balance) continue;
    for (std::size_t k = 0; k < cell.outcomes.size(); ++k) {
      const NetworkOutcome& o = cell.outcomes[k];
      out << cell.q_true << "," << k << "," << o.seed << "," << (o.ok ? 1 : 0) << ","
          << o.q_selected << "," << format_double(o.best_il) << "," << format_double(o.distance)
          << "," << o.error << "\n";
    }
  }
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

void write_distance_quantiles_csv(const std::string& path,
                                  const std::vector<ConfusionCell>& cells, double lambda,
                                  Balance balance, const std::string& provenance) {
  std::ofstream out = open_output(path);
  out << "# " << provenance << "\n";
  out << "q_true,count,min,q25,median,q75,max\n";
  for (const ConfusionCell& cell : cells) {
    if (cell.lambda != lambda || cell.balance != balance) continue;
    std::vector<double> distances;
    for (const NetworkOutcome& o : cell.outcomes) {
      if (o.ok) distances.push_back(o.distance);
    }
    std::sort(distances.begin(), distances.end());
    out << cell.q_true << "," << distances.size();
    for (const double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      out << "," << format_double(quantile_sorted(distances, p));
    }
    out << "\n";
  }
}

void write_coverage_csv(const std::string& path, const std::vector<ParameterCoverage>& coverage,
                        const std::string& provenance) {
  std::ofstream out = open_output(path);
  out << "# " << provenance << "\n";
  out << "parameter,hits,total,rate\n";
  for (const ParameterCoverage& p : coverage) {
    out << p.label << "," << p.hits << "," << p.total << "," << format_double(p.rate()) << "\n";
  }
}

}  // namespace osbm::io
