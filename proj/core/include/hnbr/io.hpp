#pragma once

// CSV ingestion and JSON artifacts for fits, simulation reports and theory checks.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnbr/model.hpp"
#include "hnbr/simulate.hpp"
#include "hnbr/solver.hpp"
#include "hnbr/tuning.hpp"

namespace hnbr::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Column references are header names, or 0-based indices written as digits.
struct CsvSchema {
  std::string response_column = "y";
  /// Empty means every column other than the response.
  std::vector<std::string> feature_columns;
  bool has_header = true;
  char delimiter = ',';

  void validate() const;
};

/// Parses RFC-4180 style CSV. Throws DataError naming the offending line.
Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<stream>");
Dataset read_csv(const std::string& path, const CsvSchema& schema);

/// Writes the response first (column `response_name`), then the features.
void write_csv(std::ostream& out, const Dataset& data, const std::string& response_name = "y",
               char delimiter = ',');
void write_csv(const std::string& path, const Dataset& data, const std::string& response_name = "y",
               char delimiter = ',');

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

struct Fingerprint {
  Index rows = 0;
  Index cols = 0;
  /// 16 hex digits of FNV-1a over the responses and the design bit patterns.
  std::string hash;
};

Fingerprint fingerprint(const Dataset& data);

/// In-sample fitting errors with y_hat = exp(intercept1 + x' theta1).
struct FitMetrics {
  /// n^-1 sum (y_i - y_hat_i), the literal signed definition.
  double fe_signed = 0.0;
  /// n^-1 sum |y_i - y_hat_i|.
  double mae = 0.0;
};

FitMetrics fit_metrics(const Dataset& data, const Coefficients& theta, const ClampBox& clamp = {});

struct FitArtifact {
  int schema_version = kSchemaVersion;
  /// Empty unless explicitly requested; keeps artifacts byte-reproducible.
  std::string timestamp;
  Fingerprint data;
  std::vector<std::string> feature_names;
  PenaltyConfig config;
  bool auto_grid = false;
  GridOptions grid;
  FitResult result;
  FitMetrics metrics;
  /// Constant-dispersion fit on the same data and penalties, for comparison.
  std::optional<FitMetrics> baseline_metrics;
};

Json to_json(const FitArtifact& a);
FitArtifact fit_artifact_from_json(const Json& j);

Json to_json(const SimulationReport& r);
SimulationReport simulation_report_from_json(const Json& j);

/// Generic envelope for theory checks.
Json theory_envelope(const Json& config, const Json& results, const Json& metrics);

/// Throws DataError unless `j` carries the current schema_version and the expected kind.
void check_envelope(const Json& j, const std::string& kind);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);
void write_text(const std::string& path, const std::string& text);
Json read_json(const std::string& path);

}  // namespace hnbr::io
