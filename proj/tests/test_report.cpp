#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <doctest.h>

#include "catdif/report.hpp"

using namespace catdif;
namespace fs = std::filesystem;

namespace {

StudyConfig parse_string(const std::string& json) {
  std::istringstream is(json);
  return parse_config(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

StudyReport tiny_report() {
  std::istringstream is(
      R"({"study":1,"n_replications":1,"n_examinees":200,
          "estimators":["MLE"],"test_lengths":[8],"exposure_rates":[0.33],
          "models":["S1"],"min_item_replications":1,
          "pool":{"n_items":60}})");
  StudyConfig cfg = parse_config(is);
  return run_study(cfg);
}

}  // namespace

TEST_CASE("minimal config fills the documented defaults") {
  StudyConfig cfg = parse_string(R"({"study":1})");
  CHECK(cfg.n_replications == 100);
  CHECK(cfg.n_examinees == 5000);
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.pool.n_items == 800);
  CHECK(enumerate_cells(cfg).size() == 8);
  CHECK(cfg.models == std::vector<std::string>{"M6", "S1", "S2", "S3"});
}

TEST_CASE("invalid configs are rejected with ConfigError") {
  CHECK_THROWS_AS(parse_string(R"({"study":1,"alpha":1.5})"), ConfigError);
  CHECK_THROWS_AS(parse_string(R"({"study":3})"), ConfigError);
  CHECK_THROWS_AS(parse_string(R"({"study":1,"no_such_key":4})"), ConfigError);
  CHECK_THROWS_AS(parse_string(R"({"study":1,"pool":{"bogus":1}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_string("{nonsense"), ConfigError);
  CHECK_THROWS_AS(parse_config_file("/no/such/file.json"), ConfigError);
}

TEST_CASE("configs round-trip through serialization") {
  StudyConfig cfg = parse_string(
      R"({"study":2,"n_replications":7,"n_examinees":1234,
          "estimators":["EAP"],"test_lengths":[35],"exposure_rates":[0.2],
          "dif":{"parameters":["a"],"proportions":[0.4]},
          "models":["M6","S3"],"alpha":0.01,"base_seed":99,
          "pool":{"n_items":150,"p_3pl":0.5}})");
  std::string once = serialize_config(cfg);
  std::istringstream is(once);
  StudyConfig again = parse_config(is);
  CHECK(serialize_config(again) == once);
  CHECK(again.n_replications == 7);
  CHECK(again.base_seed == 99);
  CHECK(again.pool.n_items == 150);
  CHECK(again.dif_parameters == std::vector<char>{'a'});
}

TEST_CASE("emitted tables are stable and structurally consistent") {
  StudyReport report = tiny_report();
  fs::path dir = fs::temp_directory_path() / "catdif_report_test";
  fs::remove_all(dir);

  emit_tables(report, (dir / "a").string());
  emit_plot_data(report, (dir / "a").string());
  emit_tables(report, (dir / "b").string());
  emit_plot_data(report, (dir / "b").string());

  for (const char* f :
       {"precision.csv", "type1.csv", "power.csv", "drops.csv", "fits.csv",
        "type1_by_model.csv", "icc_histogram.csv", "interval_barplot.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(fs::exists(dir / "a" / "meta.json"));

  // study 1: power.csv holds only the header
  std::string power = slurp(dir / "a" / "power.csv");
  CHECK(power.find('\n') == power.size() - 1);

  // one type1_by_model row per (cell, model) plus header
  std::string by_model = slurp(dir / "a" / "type1_by_model.csv");
  std::size_t lines = std::count(by_model.begin(), by_model.end(), '\n');
  CHECK(lines == 1 + report.cells.size() * report.config.models.size());

  // interval counts per item reconcile with the exemplar frame sizes
  std::istringstream bars(slurp(dir / "a" / "interval_barplot.csv"));
  std::map<std::string, int> totals;
  std::string line;
  std::getline(bars, line);  // header
  while (std::getline(bars, line)) {
    std::istringstream ss(line);
    std::string id, j, count;
    std::getline(ss, id, ',');
    std::getline(ss, j, ',');
    std::getline(ss, count, ',');
    totals[id] += std::stoi(count);
  }
  CHECK(totals.size() == report.exemplar_frames.size());
  for (const auto& [id, frame] : report.exemplar_frames)
    CHECK(totals[id] == static_cast<int>(frame.rows.size()));

  fs::remove_all(dir);
}
