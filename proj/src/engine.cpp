#include "grip/engine.hpp"

#include "grip/primitives.hpp"

#include <cstdio>

namespace grip {

PreparedTrials prepare_trials(const EngineConfig& c, AssetCache& assets)
{
    PreparedTrials out;
    for (std::size_t i = 0; i < c.objects.size(); ++i) {
        const ObjectSpec& o = c.objects[i];
        const std::string key = o.name + "/" + o.shape + "/" + std::to_string(o.size) + "/" +
                                std::to_string(o.resolution) + "/" + o.mesh_path;
        auto mesh = assets.get<TetMesh>("mesh:" + key, [&] { return make_object_mesh(o); });
        auto sdf = assets.get<Sdf>("sdf:" + key + "/" + std::to_string(c.sdf_resolution),
                                   [&] { return build_sdf(mesh->boundary, c.sdf_resolution); });
        const int n = c.object_candidates[i] >= 0 ? c.object_candidates[i] : c.candidates_per_object;
        ParallelGripperSpec gripper = c.gripper;
        const auto sampled = sample_antipodal(mesh->boundary, gripper, n, c.seed + 7919 * i);
        CandidateYield y;
        y.object = o.name;
        y.sampled = static_cast<int>(sampled.size());
        int k = 0;
        for (const auto& cand : sampled) {
            const auto fixed = repair_penetration(cand, gripper, *sdf, c.contact.dhat);
            if (!fixed.candidate) {
                ++y.rejected;
                continue;
            }
            if (fixed.iterations > 0) ++y.repaired;
            TrialSetup s;
            char id[32];
            std::snprintf(id, sizeof(id), "_%03d", k++);
            s.id = o.name + id;
            s.object = o;
            s.mesh = mesh;
            s.rest_sdf = sdf;
            s.gripper = gripper;
            s.candidate = *fixed.candidate;
            s.protocol = c.protocol;
            s.solver = c.solver;
            s.contact = c.contact;
            s.metric_samples = c.metric_samples;
            out.setups.push_back(std::move(s));
        }
        out.yield.push_back(y);
    }
    return out;
}

std::vector<TrialRecord> run_validation(const std::vector<TrialSetup>& setups, const EngineConfig& c)
{
    SchedulerConfig sc;
    sc.deterministic = c.deterministic;
    sc.seed = c.seed;
    std::vector<TrialRecord> out;
    for (std::size_t first = 0; first < setups.size(); first += c.envs) {
        const std::size_t last = std::min(setups.size(), first + static_cast<std::size_t>(c.envs));
        std::vector<TrialSetup> chunk(setups.begin() + first, setups.begin() + last);
        for (auto& r : run_trials(chunk, sc)) out.push_back(std::move(r));
    }
    return out;
}

std::unique_ptr<Environment> make_bench_env(int index)
{
    auto env = std::make_unique<Environment>();
    MaterialParams m;
    m.young_modulus = 1e5;
    const TetMesh cube = make_box_tets(Vec3::Constant(0.04), {2, 2, 2})
                             .transformed({Mat3::Identity(), Vec3(0.001 * (index % 7), 0.0, 0.0225)});
    env->add_body(make_soft_body("cube", cube, m));
    env->add_body(make_kinematic_body("plate", make_plane_surface(0.1), 0.5));
    env->finalize();
    return env;
}

}  // namespace grip
