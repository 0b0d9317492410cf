#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"

#ifndef MGB_CLI_PATH
#error "MGB_CLI_PATH must point at the mgb executable"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("mgb_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run mgb(const TempDir& tmp, const std::string& args) {
  const auto out = tmp.path / "stdout.txt", err = tmp.path / "stderr.txt";
  const std::string cmd = std::string("\"") + MGB_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Three patients, metrics only: band [0, 10] at alpha 0.5, truths 12, 5, 13.
void write_fixture(const fs::path& dir, bool with_truth = true) {
  spit(dir / "cohort.json", R"({"format_version": 1, "patients": [
    {"id": 0, "dir": "patient_0"}, {"id": 1, "dir": "patient_1"}, {"id": 2, "dir": "patient_2"}]})");
  const double truths[] = {12, 5, 13};
  for (int p = 0; p < 3; ++p) {
    std::string csv = "patient_id,recon_id,metric,value\n";
    if (with_truth) csv += std::to_string(p) + ",-1,region_max:heart," + std::to_string(truths[p]) + "\n";
    for (int j = 0; j < 8; ++j) csv += std::to_string(p) + "," + std::to_string(j) + ",region_max:heart," + (j < 4 ? "0" : "10") + "\n";
    spit(dir / ("patient_" + std::to_string(p)) / "metrics.csv", csv);
  }
}

}  // namespace

TEST_CASE("version and help") {
  TempDir tmp;
  const auto v = mgb(tmp, "--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("mgb 1.0.0") != std::string::npos);
  CHECK(v.out.find("volume format 1") != std::string::npos);
  CHECK(mgb(tmp, "simulate --help").code == 0);
  const auto none = mgb(tmp, "");
  CHECK(none.code == 2);
  CHECK(none.err.find("MGB-E02:") != std::string::npos);
}

TEST_CASE("simulate is deterministic and thread independent") {
  TempDir tmp;
  const std::string base = "simulate --patients 2 --recons 2 --dims 8,8,8 --seed 1 --out ";
  REQUIRE(mgb(tmp, base + q(tmp.path / "a")).code == 0);
  REQUIRE(mgb(tmp, base + q(tmp.path / "b")).code == 0);
  REQUIRE(mgb(tmp, base + q(tmp.path / "c") + " --threads 3").code == 0);
  const auto a = tree(tmp.path / "a");
  CHECK(a.count("cohort.json"));
  CHECK(a.count("patient_1/recon_1.vol"));
  CHECK(a == tree(tmp.path / "b"));
  CHECK(a == tree(tmp.path / "c"));
  // rerunning into the same directory overwrites to the same bytes
  REQUIRE(mgb(tmp, base + q(tmp.path / "a")).code == 0);
  CHECK(a == tree(tmp.path / "a"));
}

TEST_CASE("simulate usage errors") {
  TempDir tmp;
  const auto missing = mgb(tmp, "simulate --patients 2");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--out") != std::string::npos);
  CHECK(missing.err.find("MGB-E02:") != std::string::npos);
  const auto recons = mgb(tmp, "simulate --recons 1 --dims 8,8,8 --out " + q(tmp.path / "x"));
  CHECK(recons.code == 2);
  CHECK(recons.err.find("n_recons") != std::string::npos);
  CHECK(mgb(tmp, "simulate --dims 8,8 --out " + q(tmp.path / "x")).code == 2);
  CHECK(mgb(tmp, "simulate --patients abc --out " + q(tmp.path / "x")).code == 2);
  spit(tmp.path / "file", "x");
  const auto io = mgb(tmp, "simulate --patients 1 --recons 2 --dims 16,16,16 --out " + q(tmp.path / "file" / "sub"));
  CHECK(io.code == 3);
  CHECK(io.err.rfind("MGB-E03:", 0) == 0);
}

TEST_CASE("calibrate and predict on the hand-built fixture") {
  TempDir tmp;
  write_fixture(tmp.path / "fx");
  const auto calib = tmp.path / "calib.json";
  REQUIRE(mgb(tmp, "calibrate --cohort " + q(tmp.path / "fx") + " --metric region_max:heart --alpha 0.5 --out " + q(calib)).code == 0);
  const auto c = json::parse(slurp(calib));
  // scores -5, 2, 3; k = ceil(4 * 0.5) = 2
  CHECK(c["q"] == 2.0);
  CHECK(c["n_p"] == 3);
  CHECK(c["unbounded"] == false);
  CHECK(c["scores"] == json::array({-5.0, 2.0, 3.0}));
  CHECK(c["adjusted_level"].get<double>() == doctest::Approx(2.0 / 3.0));

  // hold out patient 2: scores 2, -5 -> q = 2 on n_p = 2
  REQUIRE(mgb(tmp, "calibrate --cohort " + q(tmp.path / "fx") +
                       " --metric region_max:heart --alpha 0.5 --exclude-patient 2 --out " + q(calib)).code == 0);
  CHECK(json::parse(slurp(calib))["q"] == 2.0);
  const auto report = tmp.path / "r.json";
  REQUIRE(mgb(tmp, "predict --cohort " + q(tmp.path / "fx") + " --patient 2 --metric region_max:heart --calib " +
                       q(calib) + " --out " + q(report)).code == 0);
  const auto r = json::parse(slurp(report));
  CHECK(r["interval"]["lb"] == -2.0);
  CHECK(r["interval"]["ub"] == 12.0);
  CHECK(r["lb_index"] == 0);
  CHECK(r["ub_index"] == 4);
  CHECK(r["inliers"].size() == 8);
  CHECK(r["lb_error_pct"].get<double>() == doctest::Approx(100.0 * 2 / 14));
  CHECK(r["ub_error_pct"].get<double>() == doctest::Approx(-100.0 * 2 / 14));
}

TEST_CASE("predict-retrieve partition fixture") {
  TempDir tmp;
  spit(tmp.path / "fx" / "cohort.json", R"({"format_version": 1, "patients": [{"id": 4, "dir": "p"}]})");
  spit(tmp.path / "fx" / "p" / "metrics.csv", "4,0,region_max:heart,1\n4,1,region_max:heart,2\n4,2,region_max:heart,3\n");
  // band of {1, 2, 3} at alpha 0.5 is [1.5, 2.5]
  spit(tmp.path / "calib.json", R"({"alpha": 0.5, "q": 0, "n_p": 5, "adjusted_level": 1, "unbounded": false})");
  const auto out = tmp.path / "r.json";
  REQUIRE(mgb(tmp, "predict-retrieve --cohort " + q(tmp.path / "fx") + " --patient 4 --metric region_max:heart --calib " +
                       q(tmp.path / "calib.json") + " --out " + q(out)).code == 0);
  const auto r = json::parse(slurp(out));
  CHECK(r["inliers"] == json::array({1}));
  CHECK(r["outliers"] == json::array({0, 2}));
  CHECK(r["lb_error_pct"] == -50.0);

  spit(tmp.path / "calib.json", R"({"alpha": 0.5, "q": null, "n_p": 1, "adjusted_level": 2, "unbounded": true})");
  REQUIRE(mgb(tmp, "predict --cohort " + q(tmp.path / "fx") + " --patient 4 --metric region_max:heart --calib " +
                       q(tmp.path / "calib.json") + " --out " + q(out)).code == 0);
  const auto u = json::parse(slurp(out));
  CHECK(u["reason"] == "unbounded");
  CHECK(u["lb_index"].is_null());
  CHECK(u["interval"]["ub"].is_null());
  CHECK(u["inliers"].size() == 3);
}

TEST_CASE("zero-noise cohort through the CLI") {
  TempDir tmp;
  const auto dir = tmp.path / "z";
  REQUIRE(mgb(tmp, "simulate --patients 3 --recons 3 --dims 16,16,16 --seed 9 --noise 0 --shift 0 --jitter 0 --out " + q(dir)).code == 0);
  const auto calib = tmp.path / "c.json";
  REQUIRE(mgb(tmp, "calibrate --cohort " + q(dir) + " --metric d_at_v:35:lung_r --alpha 0.5 --exclude-patient 0 --out " + q(calib)).code == 0);
  const auto c = json::parse(slurp(calib));
  CHECK(c["q"] == 0.0);
  CHECK(c["unbounded"] == false);
  const auto report = tmp.path / "r.json";
  REQUIRE(mgb(tmp, "predict --cohort " + q(dir) + " --patient 0 --metric d_at_v:35:lung_r --calib " + q(calib) +
                       " --out " + q(report)).code == 0);
  const auto r = json::parse(slurp(report));
  CHECK(r["interval"]["lb"] == r["interval"]["ub"]);
  CHECK(r["inliers"].size() == 3);
  CHECK(r["reason"] == "degenerate interval");

  const auto csv = tmp.path / "loo.csv";
  REQUIRE(mgb(tmp, "evaluate --cohort " + q(dir) + " --metric region_max:heart --alpha 0.5 --mode loo --out " + q(csv)).code == 0);
  CHECK(slurp(csv) == "method,metric,alpha,n,covered,coverage_pct,target_pct\nmetric_guided,region_max:heart,0.5,3,3,100,100\n");
  REQUIRE(mgb(tmp, "evaluate --cohort " + q(dir) + " --metric region_max:heart --alpha 0.5 --mode pixelwise --out " + q(csv)).code == 0);
  CHECK(slurp(csv).find("\npixelwise,region_max:heart,0.5,3,3,100,") != std::string::npos);

  // two patients at alpha 0.1: ceil(3 * 0.9) = 3 > 2
  REQUIRE(mgb(tmp, "simulate --patients 2 --recons 2 --dims 8,8,8 --out " + q(tmp.path / "two")).code == 0);
  REQUIRE(mgb(tmp, "calibrate --cohort " + q(tmp.path / "two") + " --metric region_max:heart --alpha 0.1 --out " + q(calib)).code == 0);
  CHECK(json::parse(slurp(calib))["unbounded"] == true);
  CHECK(json::parse(slurp(calib))["q"].is_null());
}

TEST_CASE("evaluate mc mode") {
  TempDir tmp;
  const auto dir = tmp.path / "m";
  REQUIRE(mgb(tmp, "simulate --patients 4 --recons 3 --dims 12,12,12 --seed 2 --out " + q(dir)).code == 0);
  const auto csv = tmp.path / "mc.csv";
  REQUIRE(mgb(tmp, "evaluate --cohort " + q(dir) + " --metric region_max:heart --alpha 0.5 --mode mc --trials 10 --threads 2 --out " + q(csv)).code == 0);
  const auto text = slurp(csv);
  CHECK(text.rfind("method,metric,alpha,n,covered,coverage_pct,target_pct,trials\n", 0) == 0);
  CHECK(text.find(",50,10\n") != std::string::npos);
  const auto again = tmp.path / "mc1.csv";
  REQUIRE(mgb(tmp, "evaluate --cohort " + q(dir) + " --metric region_max:heart --alpha 0.5 --mode mc --trials 10 --out " + q(again)).code == 0);
  CHECK(slurp(again) == text);
  CHECK(mgb(tmp, "evaluate --cohort " + q(dir) + " --metric region_max:heart --mode bogus --out " + q(csv)).code == 2);
}

TEST_CASE("error exit codes") {
  TempDir tmp;
  write_fixture(tmp.path / "fx");
  write_fixture(tmp.path / "notruth", false);
  const auto fx = q(tmp.path / "fx");
  const auto out = q(tmp.path / "o.json");

  auto expect = [&](const std::string& args, int code) {
    CAPTURE(args);
    const auto r = mgb(tmp, args);
    CHECK(r.code == code);
    const std::string prefix = "MGB-E0" + std::to_string(code) + ":";
    CHECK(r.err.find(prefix) != std::string::npos);
    CHECK(r.err.back() == '\n');
  };
  expect("calibrate --cohort " + fx + " --metric region_max --out " + out, 4);
  expect("calibrate --cohort " + fx + " --metric heat_max:heart --out " + out, 4);
  expect("calibrate --cohort " + fx + " --metric region_max:liver --out " + out, 4);
  expect("calibrate --cohort " + fx + " --metric region_max:heart --exclude-patient 9 --out " + out, 4);
  expect("calibrate --cohort " + fx + " --metric region_max:heart --alpha 1.5 --out " + out, 2);
  expect("calibrate --cohort " + q(tmp.path / "notruth") + " --metric region_max:heart --out " + out, 5);
  expect("calibrate --cohort " + q(tmp.path / "nowhere") + " --metric region_max:heart --out " + out, 3);
  expect("predict --cohort " + fx + " --patient 7 --metric region_max:heart --calib " + q(tmp.path / "none.json") + " --out " + out, 3);

  spit(tmp.path / "a.csv", "1\n2\n3\n");
  spit(tmp.path / "b.csv", "1\n2\n3\n");
  spit(tmp.path / "c.csv", "1\n2\n");
  spit(tmp.path / "d.csv", "0\n0\n0\n");
  expect("ttest --a " + q(tmp.path / "a.csv") + " --b " + q(tmp.path / "b.csv") + " --out " + out, 6);
  expect("ttest --a " + q(tmp.path / "a.csv") + " --b " + q(tmp.path / "c.csv") + " --out " + out, 2);
  REQUIRE(mgb(tmp, "ttest --a " + q(tmp.path / "a.csv") + " --b " + q(tmp.path / "d.csv") + " --out " + out).code == 0);
  const auto t = json::parse(slurp(tmp.path / "o.json"));
  CHECK(t["dof"] == 2);
  CHECK(std::abs(t["t_stat"].get<double>() - 3.4641) < 1e-4);
  CHECK(std::abs(t["p_two_sided"].get<double>() - 0.0742) < 1e-4);
}
