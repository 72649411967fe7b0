#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cslight/scenario.hpp"

using namespace cslight;
namespace sc = cslight::scenario;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("cslight_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_scan() {
  return json::parse(R"({
    "name": "small_scan", "kind": "scan",
    "pulse": {"kind": "laser", "bandwidth_MHz": 220},
    "sweep": {"detuning_GHz": {"start": -2, "stop": 2, "step": 1}}
  })");
}

std::string error_of(const std::string& text) {
  try {
    sc::parse_scenario(text, "doc.json");
  } catch (const sc::ScenarioError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("every bundled preset validates", "[scenario]") {
  const auto presets = sc::list_presets();
  CHECK(presets.size() >= 6);
  for (const auto& p : presets) {
    INFO(p.name);
    const auto s = sc::load_scenario(p.path);
    CHECK(s.name == p.name);
    CHECK_FALSE(p.description.empty());
  }
}

TEST_CASE("preset names are stable and aliases resolve", "[scenario]") {
  for (const char* name : {"fig2b_gas", "fig2c_ablation", "fig4e_scan_laser", "fig4e_scan_qd", "fig4f_delay",
                           "fig5b_delay", "figS3_decompose", "lindblad_check", "tune_172ghz"}) {
    INFO(name);
    CHECK(sc::find_preset(name).has_value());
  }
  CHECK(*sc::find_preset("fig4e_scan") == *sc::find_preset("fig4e_scan_laser"));
  CHECK(*sc::find_preset("fig4e_laser") == *sc::find_preset("fig4e_scan_laser"));
  CHECK(*sc::find_preset("fig4e_qd") == *sc::find_preset("fig4e_scan_qd"));
  CHECK_FALSE(sc::find_preset("no_such_preset").has_value());
  CHECK_THROWS_AS(sc::load_document("no_such_preset"), sc::ScenarioError);
}

TEST_CASE("unknown keys are rejected with their path", "[scenario]") {
  auto doc = small_scan();
  doc["pulse"]["bandwith_MHz"] = 100;
  try {
    sc::parse_scenario(doc);
    FAIL("accepted an unknown key");
  } catch (const sc::ScenarioError& e) {
    const std::string what = e.what();
    CHECK(what.find("pulse.bandwith_MHz") != std::string::npos);
    CHECK(what.find("unknown key") != std::string::npos);
  }
  auto top = small_scan();
  top["colour"] = "red";
  CHECK_THROWS_AS(sc::parse_scenario(top), sc::ScenarioError);
}

TEST_CASE("bad values name the offending key", "[scenario]") {
  auto doc = small_scan();
  doc["pulse"]["bandwidth_MHz"] = -5;
  CHECK_THROWS_WITH(sc::parse_scenario(doc), Catch::Matchers::ContainsSubstring("pulse.bandwidth_MHz"));
  doc = small_scan();
  doc["kind"] = "teleport";
  CHECK_THROWS_WITH(sc::parse_scenario(doc), Catch::Matchers::ContainsSubstring("kind"));
  doc = small_scan();
  doc["temperature_C"] = "hot";
  CHECK_THROWS_WITH(sc::parse_scenario(doc), Catch::Matchers::ContainsSubstring("temperature_C"));
  doc = small_scan();
  doc["name"] = "bad name/../x";
  CHECK_THROWS_WITH(sc::parse_scenario(doc), Catch::Matchers::ContainsSubstring("name"));
  doc = small_scan();
  doc["sweep"]["detuning_GHz"]["step"] = 0;
  CHECK_THROWS_AS(sc::parse_scenario(doc), sc::ScenarioError);
}

TEST_CASE("parse errors report line and column", "[scenario]") {
  const std::string text = "{\n  \"name\": \"x\",\n  \"kind\": scan\n}\n";
  const auto what = error_of(text);
  CHECK(what.find("doc.json:3:") != std::string::npos);
  CHECK(what.find("parse error") != std::string::npos);
}

TEST_CASE("malformed scenario through the CLI fails without writing output", "[scenario][cli]") {
  const auto dir = scratch_dir("cli_bad");
  const auto bad = dir / "bad.json";
  {
    auto doc = small_scan();
    doc["sweep"]["detuning_GHz"]["stepp"] = 1;
    std::ofstream(bad) << doc.dump(2);
  }
  const auto out = dir / "out";
  fs::create_directories(out);
  const std::string cmd = "CSLIGHT_OUT_DIR='" + out.string() + "' '" + CSLIGHT_CLI + "' run '" + bad.string() +
                          "' > '" + (dir / "log.txt").string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  CHECK(rc != 0);
  CHECK(fs::is_empty(out));
  CHECK(slurp(dir / "log.txt").find("stepp") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("CLI runs a scan and writes CSV plus manifest", "[scenario][cli]") {
  const auto dir = scratch_dir("cli_ok");
  const std::string cmd = "CSLIGHT_OUT_DIR='" + dir.string() + "' '" + CSLIGHT_CLI +
                          "' scan --start-ghz -1 --stop-ghz 1 --step-ghz 1 --name cli_scan > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  REQUIRE(fs::exists(dir / "cli_scan.csv"));
  const auto csv = slurp(dir / "cli_scan.csv");
  CHECK(csv.rfind("detuning_GHz,transmission,delay_ns,fwhm_ns,multimodal_flag\n", 0) == 0);
  const auto manifest = json::parse(slurp(dir / "cli_scan.manifest.json"));
  CHECK(manifest["kind"] == "scan");
  CHECK(manifest.contains("wall_time_s"));
  CHECK(manifest.contains("inputs"));
  fs::remove_all(dir);
}

TEST_CASE("repeated runs give byte-identical CSV files", "[scenario][property]") {
  for (const auto& doc : {small_scan(), sc::load_document("tune_172ghz")}) {
    const auto s = sc::parse_scenario(doc);
    const auto a = sc::execute(s);
    const auto b = sc::execute(s);
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
      CHECK(a.files[i].name == b.files[i].name);
      CHECK(a.files[i].content == b.files[i].content);
    }
  }
  const auto d1 = scratch_dir("rep1"), d2 = scratch_dir("rep2");
  sc::run_document(small_scan(), d1.string());
  sc::run_document(small_scan(), d2.string());
  CHECK(slurp(d1 / "small_scan.csv") == slurp(d2 / "small_scan.csv"));
  CHECK(fs::exists(d1 / "small_scan.manifest.json"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("output writes leave no temporaries behind", "[scenario]") {
  const auto dir = scratch_dir("atomic");
  sc::RunOutput out;
  out.files = {{"a.csv", "x\n1\n"}, {"b.txt", "hello\n"}};
  sc::write_outputs(dir.string(), out);
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK(e.path().filename().string().front() != '.');
    ++count;
  }
  CHECK(count == 2);
  CHECK(slurp(dir / "b.txt") == "hello\n");
  fs::remove_all(dir);
}

TEST_CASE("numbers are written with nine significant digits", "[scenario]") {
  CHECK(sc::format_number(1.0) == "1");
  CHECK(sc::format_number(0.123456789123) == "0.123456789");
  CHECK(sc::format_number(-2.5e-12) == "-2.5e-12");
  sc::CsvTable t{{"a", "b"}, {}};
  t.add({1.0, 2.0});
  CHECK(t.str() == "a,b\n1,2\n");
}

TEST_CASE("susceptibility table spans the requested grid", "[scenario]") {
  const auto s = sc::parse_scenario(small_scan());
  const auto t = sc::susceptibility_table(s.propagation, -1e9, 1e9, 0.5e9);
  CHECK(t.header.size() == 5);
  CHECK(t.rows.size() == 5);
}

TEST_CASE("histogram CSV reader accepts a header and rejects gaps", "[scenario]") {
  const auto dir = scratch_dir("csv");
  std::ofstream(dir / "ok.csv") << "t,counts\n0.5,1\n1.5,4\n2.5,9\n";
  const auto h = sc::read_histogram_csv((dir / "ok.csv").string());
  CHECK(h.size() == 3);
  CHECK(h.bin_start == 0.0);
  CHECK(h.bin_width == 1.0);
  std::ofstream(dir / "bad.csv") << "0.5,1\n1.5,4\n4.5,9\n";
  CHECK_THROWS_AS(sc::read_histogram_csv((dir / "bad.csv").string()), sc::ScenarioError);
  fs::remove_all(dir);
}
