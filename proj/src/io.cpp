#include "mgb/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "mgb/error.hpp"
#include "mgb/metrics.hpp"

namespace mgb::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kVolumeMagic[4] = {'M', 'G', 'B', '1'};
constexpr char kMaskMagic[4] = {'M', 'G', 'M', '1'};
constexpr std::size_t kVolumeHeader = 32;
constexpr std::size_t kMaskHeader = 20;

[[noreturn]] void io_error(const std::string& what) { throw Error(ErrorCode::kIo, what); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(std::span<const std::uint8_t> in, std::size_t at) {
  return std::bit_cast<float>(get_u32(in, at));
}

Dims read_header(std::span<const std::uint8_t> bytes, const char (&magic)[4], std::size_t header,
                 const char* kind) {
  if (bytes.size() < header || std::memcmp(bytes.data(), magic, 4) != 0) {
    io_error(std::string("not a ") + kind + " file");
  }
  if (get_u32(bytes, 4) != kVolumeFormatVersion) {
    io_error(std::string("unsupported ") + kind + " format version");
  }
  return {get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) io_error("write failed: " + path.string());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

std::string patient_dir_name(std::uint32_t id) { return "patient_" + std::to_string(id); }

template <typename T>
T parse_field(std::string_view token, const char* what) {
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed ") + what + ": '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = line.find(sep, start);
    parts.push_back(line.substr(start, at == std::string_view::npos ? at : at - start));
    if (at == std::string_view::npos) return parts;
    start = at + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume& v) {
  std::vector<std::uint8_t> out;
  out.reserve(kVolumeHeader + 4 * v.size());
  out.insert(out.end(), kVolumeMagic, kVolumeMagic + 4);
  put_u32(out, kVolumeFormatVersion);
  put_u32(out, v.dims().x);
  put_u32(out, v.dims().y);
  put_u32(out, v.dims().z);
  put_f32(out, v.spacing().x);
  put_f32(out, v.spacing().y);
  put_f32(out, v.spacing().z);
  for (float f : v.data()) put_f32(out, f);
  return out;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  const Dims dims = read_header(bytes, kVolumeMagic, kVolumeHeader, "volume");
  const Spacing spacing{get_f32(bytes, 20), get_f32(bytes, 24), get_f32(bytes, 28)};
  const std::size_t n = dims.count();
  if (bytes.size() != kVolumeHeader + 4 * n) io_error("volume payload length does not match dims");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = get_f32(bytes, kVolumeHeader + 4 * i);
  return Volume(dims, spacing, std::move(data));
}

std::vector<std::uint8_t> encode_mask(const Mask& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kMaskHeader + m.bits().size());
  out.insert(out.end(), kMaskMagic, kMaskMagic + 4);
  put_u32(out, kVolumeFormatVersion);
  put_u32(out, m.dims().x);
  put_u32(out, m.dims().y);
  put_u32(out, m.dims().z);
  out.insert(out.end(), m.bits().begin(), m.bits().end());
  return out;
}

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  const Dims dims = read_header(bytes, kMaskMagic, kMaskHeader, "mask");
  if (bytes.size() != kMaskHeader + dims.count()) io_error("mask payload length does not match dims");
  return Mask(dims, std::vector<std::uint8_t>(bytes.begin() + kMaskHeader, bytes.end()));
}

void write_volume(const fs::path& path, const Volume& v) { write_bytes(path, encode_volume(v)); }
Volume read_volume(const fs::path& path) { return decode_volume(read_bytes(path)); }
void write_mask(const fs::path& path, const Mask& m) { write_bytes(path, encode_mask(m)); }
Mask read_mask(const fs::path& path) { return decode_mask(read_bytes(path)); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out << text;
  if (!out) io_error("write failed: " + path.string());
}

std::string format_metrics_csv(std::span<const MetricRow> rows) {
  std::string out = "patient_id,recon_id,metric,value\n";
  for (const auto& r : rows) {
    out += std::to_string(r.patient_id) + "," + std::to_string(r.recon_id) + "," + r.metric + "," +
           format_number(r.value) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    const auto view = trim(line);
    if (view.empty()) continue;
    if (header) {
      header = false;
      if (view == "patient_id,recon_id,metric,value") continue;
    }
    const auto parts = split(view, ',');
    if (parts.size() != 4) {
      throw Error(ErrorCode::kInvalidArgument, "malformed metrics.csv row: '" + std::string(view) + "'");
    }
    MetricRow row;
    row.patient_id = parse_field<std::uint32_t>(parts[0], "patient_id");
    row.recon_id = parse_field<std::int64_t>(parts[1], "recon_id");
    row.metric = MetricSpec::parse(parts[2]).name();
    row.value = parse_field<double>(parts[3], "metric value");
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const CohortConfig& cfg) {
  return json{
      {"n_patients", cfg.n_patients},
      {"n_recons", cfg.n_recons},
      {"dims", {cfg.dims.x, cfg.dims.y, cfg.dims.z}},
      {"spacing", {cfg.spacing.x, cfg.spacing.y, cfg.spacing.z}},
      {"seed", cfg.seed},
      {"noise_sigma", cfg.noise_sigma},
      {"smoothing_radius", cfg.smoothing_radius},
      {"shift_sigma", cfg.shift_sigma},
      {"intensity_jitter_sigma", cfg.intensity_jitter_sigma},
  };
}

CohortConfig config_from_json(const json& j) {
  CohortConfig cfg;
  cfg.n_patients = j.value("n_patients", cfg.n_patients);
  cfg.n_recons = j.value("n_recons", cfg.n_recons);
  if (j.contains("dims")) {
    const auto& d = j.at("dims");
    cfg.dims = {d.at(0).get<std::uint32_t>(), d.at(1).get<std::uint32_t>(), d.at(2).get<std::uint32_t>()};
  }
  if (j.contains("spacing")) {
    const auto& s = j.at("spacing");
    cfg.spacing = {s.at(0).get<float>(), s.at(1).get<float>(), s.at(2).get<float>()};
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.smoothing_radius = j.value("smoothing_radius", cfg.smoothing_radius);
  cfg.shift_sigma = j.value("shift_sigma", cfg.shift_sigma);
  cfg.intensity_jitter_sigma = j.value("intensity_jitter_sigma", cfg.intensity_jitter_sigma);
  return cfg;
}

void write_cohort(const fs::path& dir, const Cohort& cohort) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) io_error("cannot create " + dir.string() + ": " + ec.message());
  if (fs::exists(dir / "cohort.json")) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("patient_", 0) == 0) {
        fs::remove_all(entry.path(), ec);
        if (ec) io_error("cannot clear " + entry.path().string() + ": " + ec.message());
      }
    }
  }

  json index;
  index["format_version"] = kCohortFormatVersion;
  index["volume_format_version"] = kVolumeFormatVersion;
  index["config"] = to_json(cohort.config);
  index["segmentation"] = json::array();
  for (const auto& rule : cohort.rules) {
    index["segmentation"].push_back({{"organ", rule.organ}, {"lo", rule.lo}, {"hi", rule.hi}});
  }
  index["patients"] = json::array();

  for (const auto& patient : cohort.patients) {
    const std::string name = patient_dir_name(patient.id);
    const fs::path pdir = dir / name;
    fs::create_directories(pdir / "masks", ec);
    fs::create_directories(pdir / "roi", ec);
    if (ec) io_error("cannot create " + pdir.string() + ": " + ec.message());

    json entry{{"id", patient.id}, {"dir", name}};
    if (patient.ground_truth) {
      write_volume(pdir / "gt.vol", *patient.ground_truth);
      entry["ground_truth"] = "gt.vol";
    }
    entry["reconstructions"] = json::array();
    for (std::size_t j = 0; j < patient.reconstructions.size(); ++j) {
      const std::string file = "recon_" + std::to_string(j) + ".vol";
      write_volume(pdir / file, patient.reconstructions[j]);
      entry["reconstructions"].push_back(file);
    }
    entry["masks"] = json::array();
    for (const auto& [organ, mask] : patient.masks) {
      write_mask(pdir / "masks" / (organ + ".msk"), mask);
      entry["masks"].push_back(organ);
    }
    entry["rois"] = json::array();
    for (const auto& [organ, mask] : patient.rois) {
      write_mask(pdir / "roi" / (organ + ".msk"), mask);
      entry["rois"].push_back(organ);
    }

    std::vector<MetricRow> rows;
    for (const auto& [metric, truth] : patient.truths) rows.push_back({patient.id, -1, metric, truth});
    for (const auto& [metric, set] : patient.estimates) {
      for (std::size_t j = 0; j < set.values.size(); ++j) {
        rows.push_back({patient.id, static_cast<std::int64_t>(j), metric, set.values[j]});
      }
    }
    write_text(pdir / "metrics.csv", format_metrics_csv(rows));
    index["patients"].push_back(std::move(entry));
  }
  write_text(dir / "cohort.json", index.dump(2) + "\n");
}

Cohort load_cohort(const fs::path& dir) {
  json index;
  try {
    index = json::parse(read_text(dir / "cohort.json"));
  } catch (const json::exception& e) {
    io_error("malformed cohort.json: " + std::string(e.what()));
  }
  if (index.value("format_version", 0u) != kCohortFormatVersion) {
    io_error("unsupported cohort format version");
  }
  Cohort cohort;
  try {
    cohort.config = config_from_json(index.value("config", json::object()));
    if (index.contains("segmentation")) {
      for (const auto& r : index.at("segmentation")) {
        cohort.rules.push_back({r.at("organ").get<std::string>(), r.at("lo").get<double>(),
                                r.at("hi").get<double>()});
      }
    } else {
      cohort.rules = default_segmentation_rules();
    }

    for (const auto& entry : index.at("patients")) {
      PatientRecord patient;
      patient.id = entry.at("id").get<std::uint32_t>();
      const fs::path pdir = dir / entry.value("dir", patient_dir_name(patient.id));
      if (entry.contains("ground_truth")) {
        patient.ground_truth = read_volume(pdir / entry.at("ground_truth").get<std::string>());
      }
      for (const auto& file : entry.value("reconstructions", json::array())) {
        patient.reconstructions.push_back(read_volume(pdir / file.get<std::string>()));
      }
      for (const auto& organ : entry.value("masks", json::array())) {
        const auto name = organ.get<std::string>();
        patient.masks.emplace(name, read_mask(pdir / "masks" / (name + ".msk")));
      }
      for (const auto& organ : entry.value("rois", json::array())) {
        const auto name = organ.get<std::string>();
        patient.rois.emplace(name, read_mask(pdir / "roi" / (name + ".msk")));
      }

      if (fs::exists(pdir / "metrics.csv")) {
        std::map<std::string, std::map<std::int64_t, double>> per_metric;
        for (const auto& row : parse_metrics_csv(read_text(pdir / "metrics.csv"))) {
          if (row.patient_id != patient.id) {
            throw Error(ErrorCode::kInvalidArgument,
                        "metrics.csv of patient " + std::to_string(patient.id) + " lists patient " +
                            std::to_string(row.patient_id));
          }
          if (row.recon_id < 0) {
            patient.truths[row.metric] = row.value;
          } else {
            per_metric[row.metric][row.recon_id] = row.value;
          }
        }
        for (auto& [metric, by_index] : per_metric) {
          MetricSet set{std::to_string(patient.id), metric, {}};
          for (const auto& [j, value] : by_index) {
            if (j != static_cast<std::int64_t>(set.values.size())) {
              throw Error(ErrorCode::kInvalidArgument,
                          "metrics.csv recon ids for " + metric + " are not dense from 0");
            }
            set.values.push_back(value);
          }
          patient.estimates.emplace(metric, std::move(set));
        }
      }
      cohort.patients.push_back(std::move(patient));
    }
  } catch (const json::exception& e) {
    io_error("malformed cohort.json: " + std::string(e.what()));
  }
  return cohort;
}

json to_json(const CalibrationResult& calib) {
  return json{
      {"alpha", calib.alpha},
      {"q", number_or_null(calib.q)},
      {"n_p", calib.n_p},
      {"adjusted_level", calib.adjusted_level},
      {"unbounded", calib.unbounded},
      {"scores", calib.scores},
  };
}

CalibrationResult calibration_from_json(const json& j) {
  CalibrationResult calib;
  try {
    calib.alpha = j.at("alpha").get<double>();
    calib.unbounded = j.at("unbounded").get<bool>();
    calib.q = number_or(j.at("q"), std::numeric_limits<double>::infinity());
    calib.n_p = j.at("n_p").get<std::size_t>();
    calib.adjusted_level = j.at("adjusted_level").get<double>();
    calib.scores = j.value("scores", std::vector<double>{});
  } catch (const json::exception& e) {
    io_error("malformed calibration file: " + std::string(e.what()));
  }
  validate_alpha(calib.alpha);
  if (calib.unbounded) calib.q = std::numeric_limits<double>::infinity();
  return calib;
}

json to_json(const RetrievalReport& report) {
  json j;
  j["interval"] = {{"lb", number_or_null(report.interval.lb)},
                   {"ub", number_or_null(report.interval.ub)},
                   {"alpha", report.interval.alpha}};
  j["lb_index"] = report.bounds ? json(report.bounds->lb_index) : json(nullptr);
  j["ub_index"] = report.bounds ? json(report.bounds->ub_index) : json(nullptr);
  j["inliers"] = report.partition.inliers;
  j["outliers"] = report.partition.outliers;
  j["lb_error_pct"] = report.lb_error_pct ? json(*report.lb_error_pct) : json(nullptr);
  j["ub_error_pct"] = report.ub_error_pct ? json(*report.ub_error_pct) : json(nullptr);
  if (!report.reason.empty()) j["reason"] = report.reason;
  return j;
}

json to_json(const TTestResult& r) {
  return json{{"n", r.n},           {"mean_diff", r.mean_diff}, {"sd_diff", r.sd_diff},
              {"t_stat", r.t_stat}, {"dof", r.dof},             {"p_two_sided", r.p_two_sided}};
}

std::string coverage_csv_header(bool with_trials) {
  std::string h = "method,metric,alpha,n,covered,coverage_pct,target_pct";
  if (with_trials) h += ",trials";
  return h + "\n";
}

std::string coverage_csv_row(const CoverageReport& r) {
  return to_string(r.method) + "," + r.metric + "," + format_number(r.alpha) + "," +
         std::to_string(r.n_patients) + "," + std::to_string(r.covered) + "," +
         format_number(r.coverage_pct) + "," + format_number(r.adjusted_target_pct) + "\n";
}

std::string coverage_csv_row(const CoverageGridCell& cell, double target_pct) {
  const auto& mc = cell.result;
  return to_string(CoverageMethod::kMetricGuided) + "," + cell.metric + "," + format_number(cell.alpha) +
         "," + std::to_string(mc.trials) + "," + std::to_string(mc.covered) + "," +
         format_number(100.0 * mc.coverage()) + "," + format_number(target_pct) + "," +
         std::to_string(mc.trials) + "\n";
}

std::vector<double> read_column_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<double> values;
  bool first = true;
  while (std::getline(in, line)) {
    const auto view = trim(line);
    if (view.empty()) continue;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), v);
    const bool numeric = ec == std::errc() && ptr == view.data() + view.size();
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorCode::kInvalidArgument,
                  "malformed value in " + path.string() + ": '" + std::string(view) + "'");
    }
    first = false;
    values.push_back(v);
  }
  return values;
}

}  // namespace mgb::io
