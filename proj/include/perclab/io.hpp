#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "perclab/analysis.hpp"
#include "perclab/geometry.hpp"
#include "perclab/pde.hpp"

namespace perclab {

inline constexpr const char* kVersion = "0.1.0";

// 17 significant digits: lossless decimal for binary64
std::string format_g17(double v);

// temp file in the target directory, then rename
void write_atomic(const std::filesystem::path& path, const std::string& content);

// field access with the JSON-pointer-ish path in the error message
const nlohmann::json& require_field(const nlohmann::json& j, const std::string& dotted_path);
double require_double(const nlohmann::json& j, const std::string& dotted_path);
std::uint64_t require_u64(const nlohmann::json& j, const std::string& dotted_path);

nlohmann::json cluster_to_json(const ClusterModel& cluster);
ClusterModel cluster_from_json(const nlohmann::json& j);

nlohmann::json geometry_report_to_json(const GeometryReport& rep);
std::string geometry_sweep_csv(const GeometryReport& rep);

std::string density_csv(const std::vector<const EmpiricalDensity*>& runs);
nlohmann::json covariance_to_json(const CovarianceEstimate& est);
nlohmann::json path_stats_to_json(const PathStats& stats);

std::string clt_csv(const CltSweepResult& result);
nlohmann::json clt_summary_json(const CltSweepResult& result);
std::string holder_rows_csv(const std::vector<HolderRow>& rows);

nlohmann::json harnack_report_to_json(const HarnackReport& rep);
nlohmann::json harnack_study_to_json(const HarnackStudy& study);
std::string oscillation_csv(const OscillationReport& rep);
nlohmann::json oscillation_to_json(const OscillationReport& rep);
std::string poincare_csv(const std::vector<PoincareReport>& reps);

// P5 binary image plus {origin, pitch, shape} sidecar at path + ".json"
void write_pgm(const RasterMask& mask, const std::filesystem::path& path);

// one solution snapshot, linearly mapped to 0..255 over its own range
void write_pgm_field(const HeatField& field, std::size_t snapshot,
                     const std::filesystem::path& path);

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::uint64_t seed, double wall_seconds,
                             const std::vector<std::string>& outputs, int threads);

}  // namespace perclab
