#pragma once

// Batched execution of independent environments: lockstep time steps,
// per-environment Newton sweeps, convergence freezing and failure quarantine.

#include "grip/solver.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace grip {

enum class EnvStatus { Active, Frozen, Failed, Done };
const char* to_string(EnvStatus s);

struct SchedulerConfig {
    int max_concurrency = 0;  ///< 0: all available threads
    bool deterministic = true;
    std::uint64_t seed = 0;
};

/// Immutable-after-freeze cache of shared assets keyed by content hash.
class AssetCache {
public:
    template <class T>
    std::shared_ptr<const T> get(const std::string& key, const std::function<T()>& load)
    {
        std::lock_guard lock(mutex_);
        auto it = items_.find(key);
        if (it != items_.end()) return std::static_pointer_cast<const T>(it->second);
        if (frozen_) throw Error("AssetCache: frozen, cannot load " + key);
        auto p = std::make_shared<const T>(load());
        items_.emplace(key, p);
        return p;
    }
    void freeze()
    {
        std::lock_guard lock(mutex_);
        frozen_ = true;
    }
    [[nodiscard]] std::size_t size() const
    {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const void>> items_;
    bool frozen_ = false;
};

struct StatusCounts {
    int converged = 0;  ///< stepped and converged this step
    int frozen = 0;     ///< not stepped (done)
    int failed = 0;
};

struct BatchStepReport {
    std::vector<StepReport> reports;    ///< per env; default-initialized for envs not stepped
    std::vector<char> stepped;
    int sweeps = 0;
    double wall_seconds = 0.0;
    StatusCounts counts;
};

class Batch {
public:
    explicit Batch(SchedulerConfig config = {}, std::shared_ptr<AssetCache> assets = nullptr);

    int add(std::unique_ptr<Environment> env);
    [[nodiscard]] int size() const { return static_cast<int>(envs_.size()); }

    /// Throws for quarantined environments (their state has been released).
    Environment& env(int i);
    [[nodiscard]] const Environment& env(int i) const;
    [[nodiscard]] EnvStatus status(int i) const { return status_[i]; }
    [[nodiscard]] FailureReason failure(int i) const { return failure_[i]; }
    [[nodiscard]] const std::string& failure_detail(int i) const { return detail_[i]; }
    void mark_done(int i);
    /// Marks a non-failed env as failed with a caller-provided reason.
    void mark_failed(int i, FailureReason r, std::string detail);
    [[nodiscard]] StatusCounts counts() const;
    [[nodiscard]] const SchedulerConfig& config() const { return config_; }
    [[nodiscard]] AssetCache& assets() { return *assets_; }

    /// One time step for every active env: begin, iteration sweeps with
    /// freezing and quarantine, end.
    BatchStepReport step();

    /// Runs fn(i) for each listed env on the scheduler.
    void for_each(const std::vector<int>& ids, const std::function<void(int)>& fn) const;

    [[nodiscard]] std::vector<int> active_ids() const;
    [[nodiscard]] long newton_iterations(int i) const { return iterations_[i]; }

private:
    void freeze_converged(const std::vector<IterateResult>& results, const std::vector<int>& ids);
    void quarantine_failures(const std::vector<int>& ids);

    SchedulerConfig config_;
    std::shared_ptr<AssetCache> assets_;
    std::vector<std::unique_ptr<Environment>> envs_;
    std::vector<EnvStatus> status_;
    std::vector<FailureReason> failure_;
    std::vector<std::string> detail_;
    std::vector<long> iterations_;
};

/// One JSON-lines record for a step report.
std::string step_report_json(int env, long step, const StepReport& r);

struct SpeedupRow {
    int env_count = 0;
    double batched_seconds = 0.0;
    double sequential_seconds = 0.0;
    double speedup = 1.0;
};

/// Runs `steps` time steps of N copies of a scene batched and sequentially.
std::vector<SpeedupRow> measure_speedup(const std::function<std::unique_ptr<Environment>(int)>& make_env,
                                        const std::vector<int>& env_counts, int steps, SchedulerConfig config);

std::string speedup_csv(const std::vector<SpeedupRow>& rows);
std::string speedup_svg(const std::vector<SpeedupRow>& rows);

}  // namespace grip
