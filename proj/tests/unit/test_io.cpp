#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "hnbr/error.hpp"
#include "hnbr/io.hpp"

using namespace hnbr;
namespace fs = std::filesystem;

namespace {

Dataset parse(const std::string& text, io::CsvSchema schema = {}) {
  std::istringstream in(text);
  return io::parse_csv(in, schema, "mem.csv");
}

std::string error_of(const std::string& text, io::CsvSchema schema = {}) {
  try {
    parse(text, schema);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Csv, ParsesHeaderQuotesAndCrlf) {
  const Dataset d = parse("a,y,\"b, c\"\r\n1.5,3,-2\r\n\r\n\"0\",0,1e-3\r\n");
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b, c"}));
  EXPECT_EQ(d.y, (std::vector<std::int64_t>{3, 0}));
  EXPECT_DOUBLE_EQ(d.X(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(d.X(1, 1), 1e-3);
}

TEST(Csv, SelectsColumnsByNameOrIndex) {
  io::CsvSchema s;
  s.response_column = "2";
  s.feature_columns = {"b", "0"};
  s.has_header = true;
  const Dataset d = parse("a;b;c\n1;2;3\n4;5;6\n", [&] {
    auto t = s;
    t.delimiter = ';';
    return t;
  }());
  EXPECT_EQ(d.y, (std::vector<std::int64_t>{3, 6}));
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"b", "a"}));
  EXPECT_DOUBLE_EQ(d.X(1, 0), 5.0);
}

TEST(Csv, HeaderlessInput) {
  io::CsvSchema s;
  s.has_header = false;
  s.response_column = "0";
  const Dataset d = parse("2,0.5\n7,1.5\n", s);
  EXPECT_EQ(d.y, (std::vector<std::int64_t>{2, 7}));
  EXPECT_DOUBLE_EQ(d.X(1, 0), 1.5);
}

TEST(Csv, ErrorsNameTheLine) {
  EXPECT_NE(error_of("y,x\n-1,0.5\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,0.5\n2.5,1\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,abc\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,inf\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,0.5,9\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,\"0.5\n").find("unterminated"), std::string::npos);
  EXPECT_NE(error_of("z,x\n1,2\n").find("'y'"), std::string::npos);
  EXPECT_FALSE(error_of("").empty());
  EXPECT_FALSE(error_of("y,x\n").empty());
}

TEST(Csv, SchemaValidation) {
  io::CsvSchema s;
  s.delimiter = '"';
  EXPECT_THROW(s.validate(), ArgumentError);
  s = io::CsvSchema{};
  s.feature_columns = {"y"};
  EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(Csv, RoundTripIsExact) {
  Dataset d = fixtures::random_dataset(50, SimulationConfig::default_truth(4), 3);
  d.X(0, 0) = 0.1 + 0.2;
  d.X(1, 1) = -1e-310;
  d.X(2, 2) = 1.0 / 3.0;
  std::stringstream buf;
  io::write_csv(buf, d);
  const Dataset back = io::parse_csv(buf, io::CsvSchema{});
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.y, d.y);
  EXPECT_EQ(io::fingerprint(back).hash, io::fingerprint(d).hash);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e21, 123456789.125}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
}

TEST(Fingerprint, SensitiveToData) {
  Dataset d = fixtures::random_dataset(20, SimulationConfig::default_truth(3), 1);
  const auto a = io::fingerprint(d);
  EXPECT_EQ(a.hash.size(), 16u);
  EXPECT_EQ(a.rows, 20);
  d.y[3] += 1;
  EXPECT_NE(io::fingerprint(d).hash, a.hash);
}

TEST(FitMetricsTest, SignedAndAbsolute) {
  const Dataset d(Matrix::Zero(3, 1), {0, 1, 5});
  Coefficients c = Coefficients::zeros(1);
  const io::FitMetrics m = io::fit_metrics(d, c);  // y_hat = 1 everywhere
  EXPECT_DOUBLE_EQ(m.fe_signed, (-1.0 + 0.0 + 4.0) / 3.0);
  EXPECT_DOUBLE_EQ(m.mae, (1.0 + 0.0 + 4.0) / 3.0);
}

TEST(Artifact, FitRoundTrip) {
  const Dataset d = fixtures::random_dataset(60, SimulationConfig::default_truth(4), 2);
  io::FitArtifact a;
  a.data = io::fingerprint(d);
  a.feature_names = d.feature_names;
  a.config.lambda1 = 0.05;
  a.config.lambda2 = 0.07;
  a.config.extra_starts = 0;
  a.result.best = fit(d, a.config);
  a.result.best_pair = {0.05, 0.07};
  a.result.selected_support1 = support_of(a.result.best.theta.theta1);
  a.result.trace.push_back({0.05, 0.07, 1.25, 3, true});
  a.metrics = io::fit_metrics(d, a.result.best.theta);
  const std::string text = io::dump(io::to_json(a));
  const io::FitArtifact b = io::fit_artifact_from_json(io::Json::parse(text));
  EXPECT_EQ(io::dump(io::to_json(b)), text);
  EXPECT_EQ(b.result.best.theta.theta1, a.result.best.theta.theta1);
  EXPECT_TRUE(std::isnan(b.result.best.multistart_gap));
  EXPECT_FALSE(b.baseline_metrics.has_value());
  EXPECT_TRUE(b.timestamp.empty());
  EXPECT_EQ(text.back(), '\n');
}

TEST(Artifact, SimulationRoundTrip) {
  SimulationConfig cfg = SimulationConfig::example1(100, 0.0, 3, 5);
  const SimulationReport r = run_simulation(cfg);
  const std::string text = io::dump(io::to_json(r));
  const SimulationReport back = io::simulation_report_from_json(io::Json::parse(text));
  EXPECT_EQ(io::dump(io::to_json(back)), text);
  EXPECT_EQ(back.per_rep.size(), 3u);
  EXPECT_EQ(back.per_rep[1].ase1, r.per_rep[1].ase1);
}

TEST(Artifact, RejectsUnknownVersionOrKind) {
  io::Json j = io::theory_envelope({{"a", 1}}, {}, {});
  EXPECT_NO_THROW(io::check_envelope(j, "theory"));
  EXPECT_THROW(io::check_envelope(j, "fit"), DataError);
  j["schema_version"] = 99;
  try {
    io::check_envelope(j, "theory");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("schema_version"), std::string::npos);
  }
  j.erase("schema_version");
  EXPECT_THROW(io::check_envelope(j, "theory"), DataError);
  EXPECT_THROW(io::fit_artifact_from_json(io::Json{{"schema_version", 1}, {"kind", "fit"}}), DataError);
}

TEST(Artifact, FileHelpers) {
  const fs::path p = fs::temp_directory_path() / "hnbr_io_test.json";
  io::write_text(p.string(), io::dump(io::Json{{"x", 1}}));
  EXPECT_EQ(io::read_json(p.string()).at("x"), 1);
  io::write_text(p.string(), "{not json");
  EXPECT_THROW(io::read_json(p.string()), DataError);
  fs::remove(p);
  EXPECT_THROW(io::read_json(p.string()), DataError);
}
