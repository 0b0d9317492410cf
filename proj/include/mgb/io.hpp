#pragma once

// On-disk formats.
//
// Volume file (.vol), little-endian:
//   0   4 bytes  magic "MGB1"
//   4   u32      format version (1)
//   8   3 x u32  dims x, y, z
//   20  3 x f32  spacing x, y, z (mm)
//   32  f32[]    voxels, x-fastest, dims.x * dims.y * dims.z values
//
// Mask file (.msk), little-endian:
//   0   4 bytes  magic "MGM1"
//   4   u32      format version (1)
//   8   3 x u32  dims x, y, z
//   20  u8[]     one byte per voxel (0 or 1), x-fastest
//
// Cohort directory:
//   cohort.json                     config echo, segmentation rules, patient index
//   patient_<id>/gt.vol
//   patient_<id>/recon_<j>.vol      j = 0 .. n_recons - 1
//   patient_<id>/masks/<organ>.msk  exact ground-truth organ masks
//   patient_<id>/roi/<organ>.msk    segmentation regions of interest
//   patient_<id>/metrics.csv        patient_id,recon_id,metric,value (recon_id -1 = truth)

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgb/cohort.hpp"
#include "mgb/conformal.hpp"
#include "mgb/evaluation.hpp"
#include "mgb/retrieval.hpp"
#include "mgb/volume.hpp"

namespace mgb::io {

inline constexpr std::uint32_t kVolumeFormatVersion = 1;
inline constexpr std::uint32_t kCohortFormatVersion = 1;

std::vector<std::uint8_t> encode_volume(const Volume& v);
Volume decode_volume(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask(const Mask& m);
Mask decode_mask(std::span<const std::uint8_t> bytes);

void write_volume(const std::filesystem::path& path, const Volume& v);
Volume read_volume(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& m);
Mask read_mask(const std::filesystem::path& path);

struct MetricRow {
  std::uint32_t patient_id = 0;
  std::int64_t recon_id = -1;
  std::string metric;
  double value = 0.0;
};

std::string format_metrics_csv(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

/// Writes cohort.json and every patient directory. Replaces cohort.json and
/// patient_* entries left by an earlier run in the same directory.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort);

/// Loads whatever the layout provides: volumes, masks and ROIs when present,
/// and cached metrics from metrics.csv.
Cohort load_cohort(const std::filesystem::path& dir);

nlohmann::json to_json(const CohortConfig& cfg);
CohortConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CalibrationResult& calib);
CalibrationResult calibration_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RetrievalReport& report);
nlohmann::json to_json(const TTestResult& result);

std::string coverage_csv_header(bool with_trials);
std::string coverage_csv_row(const CoverageReport& report);
std::string coverage_csv_row(const CoverageGridCell& cell, double target_pct);

/// One number per non-empty line; a non-numeric first line is a header.
std::vector<double> read_column_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mgb::io
