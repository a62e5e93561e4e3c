#pragma once

// Config-driven orchestration shared by the CLI and the acceptance checks.

#include "grip/config.hpp"

namespace grip {

struct CandidateYield {
    std::string object;
    int sampled = 0;
    int repaired = 0;   ///< accepted after widening
    int rejected = 0;   ///< discarded as penetrating
};

struct PreparedTrials {
    std::vector<TrialSetup> setups;
    std::vector<CandidateYield> yield;
};

/// Samples, repairs and wraps candidates for every configured object. Meshes
/// and SDFs are shared through the asset cache.
PreparedTrials prepare_trials(const EngineConfig& config, AssetCache& assets);

/// Runs the trials in batches of `config.envs` environments.
std::vector<TrialRecord> run_validation(const std::vector<TrialSetup>& setups, const EngineConfig& config);

/// Small benchmark scene: a soft cube dropped on a plate.
std::unique_ptr<Environment> make_bench_env(int index);

}  // namespace grip
