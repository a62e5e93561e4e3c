#include "grip/multienv.hpp"

#include "grip/svg.hpp"

#include <json.hpp>
#include <tbb/parallel_for.h>
#include <tbb/partitioner.h>
#include <tbb/task_arena.h>

#include <chrono>
#include <sstream>

namespace grip {

const char* to_string(EnvStatus s)
{
    switch (s) {
    case EnvStatus::Active: return "active";
    case EnvStatus::Frozen: return "frozen";
    case EnvStatus::Failed: return "failed";
    case EnvStatus::Done: return "done";
    }
    return "?";
}

Batch::Batch(SchedulerConfig config, std::shared_ptr<AssetCache> assets)
    : config_(config), assets_(assets ? std::move(assets) : std::make_shared<AssetCache>())
{
}

int Batch::add(std::unique_ptr<Environment> env)
{
    if (!env) throw Error("Batch::add: null environment");
    envs_.push_back(std::move(env));
    status_.push_back(EnvStatus::Active);
    failure_.push_back(FailureReason::None);
    detail_.emplace_back();
    iterations_.push_back(0);
    return size() - 1;
}

Environment& Batch::env(int i)
{
    if (!envs_.at(i)) throw Error("Batch::env: environment " + std::to_string(i) + " was quarantined");
    return *envs_[i];
}

const Environment& Batch::env(int i) const
{
    if (!envs_.at(i)) throw Error("Batch::env: environment " + std::to_string(i) + " was quarantined");
    return *envs_[i];
}

void Batch::mark_done(int i)
{
    if (status_.at(i) != EnvStatus::Failed) status_[i] = EnvStatus::Done;
}

void Batch::mark_failed(int i, FailureReason r, std::string detail)
{
    if (status_.at(i) == EnvStatus::Failed) return;
    status_[i] = EnvStatus::Failed;
    failure_[i] = r;
    detail_[i] = std::move(detail);
    envs_[i].reset();
}

StatusCounts Batch::counts() const
{
    StatusCounts c;
    for (EnvStatus s : status_) {
        if (s == EnvStatus::Failed) ++c.failed;
        else if (s == EnvStatus::Done) ++c.frozen;
        else ++c.converged;
    }
    return c;
}

std::vector<int> Batch::active_ids() const
{
    std::vector<int> ids;
    for (int i = 0; i < size(); ++i) {
        if (status_[i] == EnvStatus::Active) ids.push_back(i);
    }
    return ids;
}

void Batch::for_each(const std::vector<int>& ids, const std::function<void(int)>& fn) const
{
    if (ids.empty()) return;
    const int threads = config_.max_concurrency > 0 ? config_.max_concurrency : tbb::task_arena::automatic;
    tbb::task_arena arena(threads);
    arena.execute([&] {
        const tbb::blocked_range<std::size_t> range(0, ids.size(), 1);
        auto body = [&](const tbb::blocked_range<std::size_t>& r) {
            for (std::size_t k = r.begin(); k != r.end(); ++k) fn(ids[k]);
        };
        if (config_.deterministic) {
            // Fixed round-robin assignment of envs to workers.
            tbb::parallel_for(range, body, tbb::static_partitioner());
        } else {
            tbb::parallel_for(range, body, tbb::auto_partitioner());
        }
    });
}

void Batch::freeze_converged(const std::vector<IterateResult>& results, const std::vector<int>& ids)
{
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (results[k] == IterateResult::Converged) status_[ids[k]] = EnvStatus::Frozen;
    }
}

void Batch::quarantine_failures(const std::vector<int>& ids)
{
    for (int i : ids) {
        if (!envs_[i] || status_[i] == EnvStatus::Failed) continue;
        const StepReport& r = envs_[i]->current_report();
        if (r.status == StepStatus::Failed) mark_failed(i, r.reason, r.detail);
    }
}

BatchStepReport Batch::step()
{
    const auto t0 = std::chrono::steady_clock::now();
    BatchStepReport rep;
    rep.reports.resize(size());
    rep.stepped.assign(size(), 0);
    const std::vector<int> ids = active_ids();
    for (int i : ids) rep.stepped[i] = 1;

    for_each(ids, [&](int i) { envs_[i]->begin_step(); });

    std::vector<int> running = ids;
    while (!running.empty()) {
        ++rep.sweeps;
        std::vector<IterateResult> results(running.size());
        std::vector<std::size_t> slot(size());
        for (std::size_t k = 0; k < running.size(); ++k) slot[running[k]] = k;
        for_each(running, [&](int i) { results[slot[i]] = envs_[i]->iterate_once(); });
        freeze_converged(results, running);
        std::vector<int> failed_now;
        std::vector<int> next;
        for (std::size_t k = 0; k < running.size(); ++k) {
            if (results[k] == IterateResult::Failed) failed_now.push_back(running[k]);
            else if (results[k] == IterateResult::Continue) next.push_back(running[k]);
        }
        for (int i : failed_now) rep.reports[i] = envs_[i]->end_step();
        quarantine_failures(failed_now);
        running = std::move(next);
    }

    for (int i : ids) {
        if (status_[i] == EnvStatus::Frozen) {
            rep.reports[i] = envs_[i]->end_step();
            status_[i] = EnvStatus::Active;
        }
        iterations_[i] += rep.reports[i].iterations;
    }
    for (int i : ids) {
        if (status_[i] == EnvStatus::Failed) ++rep.counts.failed;
        else ++rep.counts.converged;
    }
    rep.counts.frozen = size() - rep.counts.converged - rep.counts.failed;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::string step_report_json(int env, long step, const StepReport& r)
{
    nlohmann::json j;
    j["env"] = env;
    j["step"] = step;
    j["status"] = r.status == StepStatus::Converged ? "converged" : (r.status == StepStatus::Frozen ? "frozen" : "failed");
    j["reason"] = to_string(r.reason);
    if (!r.detail.empty()) j["detail"] = r.detail;
    j["iterations"] = r.iterations;
    j["residual"] = r.residual;
    j["min_distance"] = std::isfinite(r.min_distance) ? nlohmann::json(r.min_distance) : nlohmann::json(nullptr);
    j["invariant_violations"] = r.invariant_violations;
    j["alpha"] = r.alpha_history;
    return j.dump();
}

std::vector<SpeedupRow> measure_speedup(const std::function<std::unique_ptr<Environment>(int)>& make_env,
                                        const std::vector<int>& env_counts, int steps, SchedulerConfig config)
{
    using clock = std::chrono::steady_clock;
    std::vector<SpeedupRow> rows;
    for (int n : env_counts) {
        if (n < 1) throw Error("measure_speedup: env counts must be >= 1");
        SpeedupRow row;
        row.env_count = n;

        Batch batch(config);
        for (int i = 0; i < n; ++i) batch.add(make_env(i));
        auto t0 = clock::now();
        for (int s = 0; s < steps; ++s) batch.step();
        row.batched_seconds = std::chrono::duration<double>(clock::now() - t0).count();

        if (n == 1) {
            row.sequential_seconds = row.batched_seconds;
            row.speedup = 1.0;
        } else {
            t0 = clock::now();
            for (int i = 0; i < n; ++i) {
                auto env = make_env(i);
                for (int s = 0; s < steps; ++s) {
                    if (env->step().status == StepStatus::Failed) break;
                }
            }
            row.sequential_seconds = std::chrono::duration<double>(clock::now() - t0).count();
            row.speedup = row.sequential_seconds / row.batched_seconds;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string speedup_csv(const std::vector<SpeedupRow>& rows)
{
    std::ostringstream o;
    o << "env_count,batched_s,sequential_s,speedup\n";
    o.precision(9);
    for (const auto& r : rows) {
        o << r.env_count << ',' << r.batched_seconds << ',' << r.sequential_seconds << ',' << r.speedup << '\n';
    }
    return o.str();
}

std::string speedup_svg(const std::vector<SpeedupRow>& rows)
{
    Series s{"speedup", {}, {}};
    for (const auto& r : rows) {
        s.x.push_back(r.env_count);
        s.y.push_back(r.speedup);
    }
    return svg_line_chart("Batched vs sequential", "parallel environments", "speedup", {s}, true);
}

}  // namespace grip
