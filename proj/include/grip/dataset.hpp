#pragma once

// On-disk trial records: per-trial directory with meta.json, traj.bin,
// contacts.jsonl and stress.bin, plus a top-level manifest.json.

#include "grip/pipeline.hpp"

#include <filesystem>

namespace grip {

inline constexpr char kTrajMagic[9] = "GRIPTRJ1";
inline constexpr char kStressMagic[9] = "GRIPSTR1";

struct ManifestEntry {
    std::string id;
    std::string verdict;
    std::map<std::string, std::string> sha256;  ///< file name -> hex digest
};

struct Manifest {
    std::vector<ManifestEntry> trials;
    int stable = 0, unstable = 0, sim_failed = 0;
};

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Writes every record and the manifest. Trial directories are written
/// independently; the manifest is merged after all of them.
Manifest emit_dataset(const std::vector<TrialRecord>& records, const std::filesystem::path& out_dir);

std::string manifest_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& out_dir);

/// Reads a trial directory back; arrays round-trip bit-exactly.
TrialRecord load_trial(const std::filesystem::path& trial_dir);

/// Per-trial metric row read from meta.json.
struct MetricRow {
    std::string id, object, kind, verdict;
    double d1 = 0.0, d2 = 0.0, sdf_spacing = 0.0, final_displacement = 0.0;
    int steps = 0;
};
std::vector<MetricRow> load_metrics(const std::filesystem::path& out_dir);
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Aggregate CSV and SVG plots into `report_dir`; returns written file names.
std::vector<std::string> write_report(const std::vector<MetricRow>& rows, const std::filesystem::path& report_dir,
                                      const std::string& bench_csv = "");

}  // namespace grip
