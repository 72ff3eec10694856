#include "hnbr/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "hnbr/error.hpp"

namespace hnbr::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

struct Record {
  std::vector<std::string> fields;
  long line = 0;
};

// Reads one RFC-4180 record; returns false at end of input.
bool next_record(std::istream& in, char delim, long& line, Record& rec, const std::string& source) {
  rec.fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  ++line;
  rec.line = line;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  while (true) {
    const int ci = in.get();
    if (ci == std::char_traits<char>::eof()) {
      if (quoted) {
        throw DataError(source + ": line " + std::to_string(rec.line) + ": unterminated quoted field");
      }
      rec.fields.push_back(was_quoted ? field : trim(field));
      return true;
    }
    const char c = static_cast<char>(ci);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && trim(field).empty() && !was_quoted) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == delim) {
      rec.fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r' && in.peek() == '\n') {
      // swallowed; the '\n' ends the record
    } else if (c == '\n') {
      rec.fields.push_back(was_quoted ? field : trim(field));
      return true;
    } else if (was_quoted) {
      if (c != ' ' && c != '\t') {
        throw DataError(source + ": line " + std::to_string(rec.line) +
                        ": characters after closing quote");
      }
    } else {
      field.push_back(c);
    }
  }
}

bool blank(const Record& r) { return r.fields.size() == 1 && r.fields[0].empty(); }

Index resolve_column(const std::string& ref, const std::vector<std::string>& header, bool has_header,
                     Index width, const std::string& source) {
  if (has_header) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == ref) return static_cast<Index>(j);
    }
  }
  if (all_digits(ref)) {
    const Index idx = std::stol(ref);
    if (idx < width) return idx;
  }
  throw DataError(source + ": column '" + ref + "' not found");
}

std::string line_prefix(const std::string& source, long line) {
  return source + ": line " + std::to_string(line) + ": ";
}

double number_or_nan(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number_or_nan(j[i]);
  return v;
}

Json index_json(const std::vector<Index>& v) {
  Json a = Json::array();
  for (const Index i : v) a.push_back(i);
  return a;
}

std::vector<Index> index_from(const Json& j) {
  std::vector<Index> out;
  for (const auto& e : j) out.push_back(e.get<Index>());
  return out;
}

Json coef_json(const Coefficients& c) {
  return Json{{"theta1", vec_json(c.theta1)},
              {"theta2", vec_json(c.theta2)},
              {"intercept1", c.intercept1},
              {"intercept2", c.intercept2}};
}

Coefficients coef_from(const Json& j) {
  Coefficients c;
  c.theta1 = vec_from(j.at("theta1"));
  c.theta2 = vec_from(j.at("theta2"));
  c.intercept1 = j.at("intercept1").get<double>();
  c.intercept2 = j.at("intercept2").get<double>();
  return c;
}

Json penalty_json(const PenaltyConfig& c) {
  return Json{{"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"tol", c.tol},
              {"tol_kkt", c.tol_kkt},
              {"max_iter", c.max_iter},
              {"step_init", c.step_init},
              {"backtrack_factor", c.backtrack_factor},
              {"unpenalized_intercepts", c.unpenalized_intercepts},
              {"standardize", c.standardize},
              {"extra_starts", c.extra_starts},
              {"seed", c.seed},
              {"clamp", {c.clamp.lower, c.clamp.upper}}};
}

PenaltyConfig penalty_from(const Json& j) {
  PenaltyConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.tol = j.at("tol").get<double>();
  c.tol_kkt = j.at("tol_kkt").get<double>();
  c.max_iter = j.at("max_iter").get<int>();
  c.step_init = j.at("step_init").get<double>();
  c.backtrack_factor = j.at("backtrack_factor").get<double>();
  c.unpenalized_intercepts = j.at("unpenalized_intercepts").get<bool>();
  c.standardize = j.at("standardize").get<bool>();
  c.extra_starts = j.at("extra_starts").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.clamp.lower = j.at("clamp").at(0).get<double>();
  c.clamp.upper = j.at("clamp").at(1).get<double>();
  return c;
}

Json grid_json(const GridOptions& g) {
  return Json{{"ladder_size", g.ladder_size},
              {"min_ratio", g.min_ratio},
              {"ratio_lower", g.ratio_lower},
              {"ratio_upper", g.ratio_upper}};
}

GridOptions grid_from(const Json& j) {
  GridOptions g;
  g.ladder_size = j.at("ladder_size").get<int>();
  g.min_ratio = j.at("min_ratio").get<double>();
  g.ratio_lower = j.at("ratio_lower").get<double>();
  g.ratio_upper = j.at("ratio_upper").get<double>();
  return g;
}

Json solution_json(const Solution& s) {
  return Json{{"coefficients", coef_json(s.theta)},
              {"objective", s.objective},
              {"iterations", s.iterations},
              {"converged", s.converged},
              {"kkt_residual", s.kkt_residual},
              {"multistart_gap", s.multistart_gap},
              {"multistart_objective_gap", s.multistart_objective_gap}};
}

Solution solution_from(const Json& j) {
  Solution s;
  s.theta = coef_from(j.at("coefficients"));
  s.objective = j.at("objective").get<double>();
  s.iterations = j.at("iterations").get<int>();
  s.converged = j.at("converged").get<bool>();
  s.kkt_residual = j.at("kkt_residual").get<double>();
  s.multistart_gap = number_or_nan(j.at("multistart_gap"));
  s.multistart_objective_gap = number_or_nan(j.at("multistart_objective_gap"));
  return s;
}

Json metrics_json(const FitMetrics& m) { return Json{{"fe_signed", m.fe_signed}, {"mae", m.mae}}; }

FitMetrics metrics_from(const Json& j) {
  return FitMetrics{j.at("fe_signed").get<double>(), j.at("mae").get<double>()};
}

Json envelope(const std::string& kind, Json config, Json results, Json metrics) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["config"] = std::move(config);
  j["results"] = std::move(results);
  j["metrics"] = std::move(metrics);
  return j;
}

}  // namespace

void CsvSchema::validate() const {
  if (response_column.empty()) throw ArgumentError("CSV schema needs a response column");
  if (delimiter == '"' || delimiter == '\n' || delimiter == '\r') {
    throw ArgumentError("CSV delimiter cannot be a quote or newline");
  }
  for (const auto& f : feature_columns) {
    if (f == response_column) throw ArgumentError("response column listed as a feature");
  }
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  schema.validate();
  long line = 0;
  Record rec;
  std::vector<std::string> header;
  Index width = -1;
  if (schema.has_header) {
    if (!next_record(in, schema.delimiter, line, rec, source)) throw DataError(source + ": empty file");
    header = rec.fields;
    width = static_cast<Index>(header.size());
  }

  std::vector<Record> rows;
  while (next_record(in, schema.delimiter, line, rec, source)) {
    if (blank(rec)) continue;
    if (width < 0) width = static_cast<Index>(rec.fields.size());
    if (static_cast<Index>(rec.fields.size()) != width) {
      throw DataError(line_prefix(source, rec.line) + "expected " + std::to_string(width) +
                      " fields, found " + std::to_string(rec.fields.size()));
    }
    rows.push_back(rec);
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  const Index resp = resolve_column(schema.response_column, header, schema.has_header, width, source);
  std::vector<Index> feats;
  if (schema.feature_columns.empty()) {
    for (Index j = 0; j < width; ++j) {
      if (j != resp) feats.push_back(j);
    }
  } else {
    for (const auto& f : schema.feature_columns) {
      const Index j = resolve_column(f, header, schema.has_header, width, source);
      if (j == resp) throw DataError(source + ": column '" + f + "' is the response");
      feats.push_back(j);
    }
  }
  if (feats.empty()) throw DataError(source + ": no feature columns");

  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(feats.size());
  Matrix X(n, p);
  std::vector<std::int64_t> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Record& r = rows[static_cast<std::size_t>(i)];
    const std::string& ys = r.fields[static_cast<std::size_t>(resp)];
    std::int64_t yv = 0;
    const auto [yp, yec] = std::from_chars(ys.data(), ys.data() + ys.size(), yv);
    if (yec != std::errc() || yp != ys.data() + ys.size() || yv < 0) {
      throw DataError(line_prefix(source, r.line) + "response '" + ys +
                      "' is not a non-negative integer count");
    }
    y[static_cast<std::size_t>(i)] = yv;
    for (Index j = 0; j < p; ++j) {
      const std::string& fs = r.fields[static_cast<std::size_t>(feats[static_cast<std::size_t>(j)])];
      double v = 0.0;
      const auto [fp, fec] = std::from_chars(fs.data(), fs.data() + fs.size(), v);
      if (fec != std::errc() || fp != fs.data() + fs.size() || !std::isfinite(v)) {
        throw DataError(line_prefix(source, r.line) + "feature value '" + fs + "' is not a finite number");
      }
      X(i, j) = v;
    }
  }

  std::vector<std::string> names;
  for (const Index j : feats) {
    names.push_back(schema.has_header ? header[static_cast<std::size_t>(j)] : "x" + std::to_string(j));
  }
  return Dataset(std::move(X), std::move(y), std::move(names));
}

Dataset read_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return parse_csv(in, schema, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, ptr);
}

namespace {

std::string csv_field(const std::string& s, char delim) {
  if (s.find_first_of(std::string("\"\r\n") + delim) == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data, const std::string& response_name, char delimiter) {
  data.validate();
  out << csv_field(response_name, delimiter);
  for (Index j = 0; j < data.p(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < data.feature_names.size()
                                 ? data.feature_names[static_cast<std::size_t>(j)]
                                 : "x" + std::to_string(j);
    out << delimiter << csv_field(name, delimiter);
  }
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << data.y[static_cast<std::size_t>(i)];
    for (Index j = 0; j < data.p(); ++j) out << delimiter << format_double(data.X(i, j));
    out << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& data, const std::string& response_name,
               char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(out, data, response_name, delimiter);
  if (!out) throw DataError("failed writing '" + path + "'");
}

Fingerprint fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(data.n()));
  feed(static_cast<std::uint64_t>(data.p()));
  for (const auto v : data.y) feed(static_cast<std::uint64_t>(v));
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.p(); ++j) {
      std::uint64_t bits = 0;
      const double x = data.X(i, j);
      std::memcpy(&bits, &x, sizeof bits);
      feed(bits);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return Fingerprint{data.n(), data.p(), buf};
}

FitMetrics fit_metrics(const Dataset& data, const Coefficients& theta, const ClampBox& clamp) {
  data.validate();
  if (theta.p() != data.p()) throw ArgumentError("fit_metrics: dimension mismatch");
  const auto links = linear_predictors(data, theta, clamp);
  FitMetrics m;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double r = static_cast<double>(data.y[i]) - links[i].mu;
    m.fe_signed += r;
    m.mae += std::abs(r);
  }
  m.fe_signed /= static_cast<double>(links.size());
  m.mae /= static_cast<double>(links.size());
  return m;
}

Json to_json(const FitArtifact& a) {
  Json config{{"penalty", penalty_json(a.config)},
              {"auto_grid", a.auto_grid},
              {"grid", grid_json(a.grid)},
              {"timestamp", a.timestamp.empty() ? Json(nullptr) : Json(a.timestamp)},
              {"data", {{"rows", a.data.rows}, {"cols", a.data.cols}, {"hash", a.data.hash}}},
              {"feature_names", a.feature_names}};

  Json trace = Json::array();
  for (const auto& t : a.result.trace) {
    trace.push_back({{"lambda1", t.lambda1},
                     {"lambda2", t.lambda2},
                     {"bic", t.bic},
                     {"support_size", t.support_size},
                     {"converged", t.converged}});
  }
  Json results{{"solution", solution_json(a.result.best)},
               {"best_pair", {a.result.best_pair.lambda1, a.result.best_pair.lambda2}},
               {"support1", index_json(a.result.selected_support1)},
               {"support2", index_json(a.result.selected_support2)},
               {"trace", trace}};
  Json metrics{{"hnbr", metrics_json(a.metrics)},
               {"nbr", a.baseline_metrics ? metrics_json(*a.baseline_metrics) : Json(nullptr)},
               {"rows", a.data.rows}};
  return envelope("fit", std::move(config), std::move(results), std::move(metrics));
}

FitArtifact fit_artifact_from_json(const Json& j) {
  check_envelope(j, "fit");
  try {
    FitArtifact a;
    const Json& c = j.at("config");
    a.config = penalty_from(c.at("penalty"));
    a.auto_grid = c.at("auto_grid").get<bool>();
    a.grid = grid_from(c.at("grid"));
    a.timestamp = c.at("timestamp").is_null() ? std::string() : c.at("timestamp").get<std::string>();
    a.data.rows = c.at("data").at("rows").get<Index>();
    a.data.cols = c.at("data").at("cols").get<Index>();
    a.data.hash = c.at("data").at("hash").get<std::string>();
    a.feature_names = c.at("feature_names").get<std::vector<std::string>>();

    const Json& r = j.at("results");
    a.result.best = solution_from(r.at("solution"));
    a.result.best_pair = {r.at("best_pair").at(0).get<double>(), r.at("best_pair").at(1).get<double>()};
    a.result.selected_support1 = index_from(r.at("support1"));
    a.result.selected_support2 = index_from(r.at("support2"));
    for (const auto& t : r.at("trace")) {
      a.result.trace.push_back(TraceRow{t.at("lambda1").get<double>(), t.at("lambda2").get<double>(),
                                        t.at("bic").get<double>(), t.at("support_size").get<Index>(),
                                        t.at("converged").get<bool>()});
    }
    const Json& m = j.at("metrics");
    a.metrics = metrics_from(m.at("hnbr"));
    if (!m.at("nbr").is_null()) a.baseline_metrics = metrics_from(m.at("nbr"));
    return a;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed fit artifact: ") + e.what());
  }
}

Json to_json(const SimulationReport& r) {
  const SimulationConfig& c = r.config;
  Json config{{"scenario", to_string(c.scenario)},
              {"n", c.n},
              {"p", c.p},
              {"rho", c.rho},
              {"reps", c.reps},
              {"seed", c.seed},
              {"threads", c.threads},
              {"theta_star", coef_json(c.theta_star)},
              {"solver", penalty_json(c.solver)},
              {"grid", grid_json(c.grid)}};
  Json reps = Json::array();
  for (const auto& e : r.per_rep) {
    reps.push_back({{"rep", e.rep},
                    {"ase1", e.ase1},
                    {"ase2", e.ase2},
                    {"ase1_const", e.ase1_const},
                    {"support1", index_json(e.support1)},
                    {"support2", index_json(e.support2)},
                    {"converged", e.converged},
                    {"baseline_converged", e.baseline_converged},
                    {"lambda1", e.lambda1},
                    {"lambda2", e.lambda2},
                    {"error", e.error}});
  }
  const SimulationSummary& s = r.summary;
  Json metrics{{"mean_ase1", s.mean_ase1},
               {"mean_ase2", s.mean_ase2},
               {"mean_ase1_const", s.mean_ase1_const},
               {"selected1", s.selected1},
               {"selected2", s.selected2},
               {"false_selected1", s.false_selected1},
               {"false_selected2", s.false_selected2},
               {"false_selected_total", s.false_selected_total},
               {"nonconverged", s.nonconverged},
               {"failed", s.failed}};
  return envelope("simulation", std::move(config), Json{{"per_rep", reps}}, std::move(metrics));
}

SimulationReport simulation_report_from_json(const Json& j) {
  check_envelope(j, "simulation");
  try {
    SimulationReport r;
    const Json& c = j.at("config");
    r.config.scenario = scenario_from_string(c.at("scenario").get<std::string>());
    r.config.n = c.at("n").get<Index>();
    r.config.p = c.at("p").get<Index>();
    r.config.rho = c.at("rho").get<double>();
    r.config.reps = c.at("reps").get<int>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.config.threads = c.at("threads").get<int>();
    r.config.theta_star = coef_from(c.at("theta_star"));
    r.config.solver = penalty_from(c.at("solver"));
    r.config.grid = grid_from(c.at("grid"));
    for (const auto& e : j.at("results").at("per_rep")) {
      RepRecord rec;
      rec.rep = e.at("rep").get<int>();
      rec.ase1 = number_or_nan(e.at("ase1"));
      rec.ase2 = number_or_nan(e.at("ase2"));
      rec.ase1_const = number_or_nan(e.at("ase1_const"));
      rec.support1 = index_from(e.at("support1"));
      rec.support2 = index_from(e.at("support2"));
      rec.converged = e.at("converged").get<bool>();
      rec.baseline_converged = e.at("baseline_converged").get<bool>();
      rec.lambda1 = e.at("lambda1").get<double>();
      rec.lambda2 = e.at("lambda2").get<double>();
      rec.error = e.at("error").get<std::string>();
      r.per_rep.push_back(std::move(rec));
    }
    const Json& m = j.at("metrics");
    r.summary.mean_ase1 = number_or_nan(m.at("mean_ase1"));
    r.summary.mean_ase2 = number_or_nan(m.at("mean_ase2"));
    r.summary.mean_ase1_const = number_or_nan(m.at("mean_ase1_const"));
    r.summary.selected1 = m.at("selected1").get<std::vector<int>>();
    r.summary.selected2 = m.at("selected2").get<std::vector<int>>();
    r.summary.false_selected1 = m.at("false_selected1").get<double>();
    r.summary.false_selected2 = m.at("false_selected2").get<double>();
    r.summary.false_selected_total = m.at("false_selected_total").get<double>();
    r.summary.nonconverged = m.at("nonconverged").get<int>();
    r.summary.failed = m.at("failed").get<int>();
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed simulation report: ") + e.what());
  }
}

Json theory_envelope(const Json& config, const Json& results, const Json& metrics) {
  return envelope("theory", config, results, metrics);
}

void check_envelope(const Json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw DataError("artifact has no schema_version field");
  }
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw DataError("unsupported artifact schema_version " + v.dump() + " (this build reads version " +
                    std::to_string(kSchemaVersion) + ")");
  }
  if (!j.contains("kind") || j.at("kind") != kind) {
    throw DataError("artifact kind is not '" + kind + "'");
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace hnbr::io
