#pragma once

// TOML scene/engine configuration.

#include "grip/pipeline.hpp"

#include <filesystem>

namespace grip {

struct BenchConfig {
    std::vector<int> env_counts = {1, 2, 4, 8, 16, 32, 64};
    int steps = 20;
};

struct EngineConfig {
    std::uint64_t seed = 0;
    bool deterministic = false;
    int envs = 8;                 ///< environments per batch
    std::string output = "out";
    int candidates_per_object = 5;
    int sdf_resolution = 128;
    int metric_samples = 50000;
    SolverParams solver;
    ContactParams contact;
    TrialProtocol protocol;
    ParallelGripperSpec gripper;
    BimanualComposeParams compose;
    BenchConfig bench;
    std::vector<ObjectSpec> objects;
    std::vector<int> object_candidates;  ///< per object; -1 uses candidates_per_object

    void validate() const;
};

/// Bad configuration: carries the offending field and its source line (0 if unknown).
class ConfigError : public Error {
public:
    ConfigError(const std::string& source, int line, const std::string& field, const std::string& message);
    int line = 0;
    std::string field;
};

EngineConfig parse_config(const std::string& text, const std::string& source = "<config>");
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace grip
