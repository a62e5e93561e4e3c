#include "grip/pipeline.hpp"

#include "grip/mesh_io.hpp"
#include "grip/primitives.hpp"

#include <algorithm>
#include <cmath>

namespace grip {

void TrialProtocol::validate() const
{
    if (!(settle_duration > 0) || !(phase_duration > 0) || !(hold_cap > 0) || !(closing_cap > 0)) {
        throw Error("TrialProtocol: durations must be positive");
    }
    if (!(halt_force > 0)) throw Error("TrialProtocol: halt force must be positive");
    if (!(closing_speed > 0)) throw Error("TrialProtocol: closing speed must be positive");
    if (!(gravity >= 0) || !(stability_c > 0) || steady_steps < 1) {
        throw Error("TrialProtocol: gravity >= 0, stability constant > 0 and steady steps >= 1 required");
    }
    // Exactly the six signed axes, each once.
    std::array<bool, 6> seen{};
    for (const Vec3& d : directions) {
        int axis = -1;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(std::abs(d[a]) - 1.0) < 1e-12 && std::abs(d[(a + 1) % 3]) < 1e-12 &&
                std::abs(d[(a + 2) % 3]) < 1e-12) {
                axis = a;
            }
        }
        if (axis < 0) throw Error("TrialProtocol: gravity directions must be axis-aligned unit vectors");
        const int slot = 2 * axis + (d[axis] < 0 ? 1 : 0);
        if (seen[slot]) throw Error("TrialProtocol: gravity directions must cover +-x, +-y, +-z once each");
        seen[slot] = true;
    }
}

int TrialProtocol::steps_for(double duration, double dt) const
{
    return std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-9)));
}

const char* to_string(ObjectKind k) { return k == ObjectKind::Rigid ? "rigid" : "soft"; }

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::SimFailed: return "sim-failed";
    }
    return "?";
}

TetMesh make_object_mesh(const ObjectSpec& s)
{
    if (!(s.size > 0) || s.resolution < 1) throw Error("object '" + s.name + "': size and resolution must be positive");
    if (s.shape == "cube") return make_box_tets(Vec3::Constant(s.size), {s.resolution, s.resolution, s.resolution});
    if (s.shape == "sphere") return make_ball_tets(0.5 * s.size, s.resolution);
    if (s.shape == "mug") return make_mug_tets(0.5 * s.size, 1.2 * s.size, s.resolution);
    if (s.shape == "mesh") {
        if (s.mesh_path.empty()) throw Error("object '" + s.name + "': shape = mesh needs a mesh path");
        return read_tet_mesh(s.mesh_path);
    }
    throw Error("object '" + s.name + "': unknown shape '" + s.shape + "'");
}

// ---------------------------------------------------------------------------
// Forces and metrics

namespace {

std::array<double, 3> link_forces(const Environment& env, const std::vector<ContactStencil>& stencils,
                                  const Positions& x)
{
    std::array<double, 3> f{};
    for (const auto& s : stencils) {
        const double lam = stencil_force(s, x, env.contact_params());
        for (int b : s.bodies) {
            const int l = env.body(b).link;
            if (l >= 0 && l < 3) f[l] += lam;
        }
    }
    return f;
}

}  // namespace

double finger_contact_force(const Environment& env, int link)
{
    bool known = false;
    for (int b = 0; b < env.num_bodies(); ++b) known = known || env.body(b).link == link;
    if (!known) throw Error("finger_contact_force: unknown link " + std::to_string(link));
    const Positions x = env.collision_positions();
    double f = 0.0;
    for (const auto& s : env.active_stencils()) {
        if (env.body(s.bodies[0]).link == link || env.body(s.bodies[1]).link == link) {
            f += stencil_force(s, x, env.contact_params());
        }
    }
    return f;
}

std::vector<Vec3> sample_gripper(const std::vector<TriSurface>& surfaces, int n, std::uint64_t seed)
{
    Positions v(0, 3);
    std::vector<Tri> tris;
    for (const auto& s : surfaces) {
        const int base = static_cast<int>(v.rows());
        v.conservativeResize(base + s.num_vertices(), 3);
        v.bottomRows(s.num_vertices()) = s.vertices;
        for (const Tri& t : s.triangles) tris.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    const TriSurface all = TriSurface::build(v, tris);
    std::vector<Vec3> out;
    out.reserve(n);
    for (const auto& smp : sample_surface(all, n, seed)) out.push_back(smp.position);
    return out;
}

namespace {

double max_inside_depth(const DistanceQuery& sdf, const std::vector<TriSurface>& gripper, int n, std::uint64_t seed)
{
    double m = -std::numeric_limits<double>::infinity();
    for (const Vec3& p : sample_gripper(gripper, n, seed)) m = std::max(m, -sdf(p));
    return m;
}

}  // namespace

double penetration_distance_D1(const DistanceQuery& sdf, const std::vector<TriSurface>& gripper, int n_samples,
                               std::uint64_t seed)
{
    return std::max(0.0, max_inside_depth(sdf, gripper, n_samples, seed));
}

double absolute_distance_D2(const DistanceQuery& sdf, const std::vector<TriSurface>& gripper, int n_samples,
                            std::uint64_t seed)
{
    return std::abs(max_inside_depth(sdf, gripper, n_samples, seed));
}

// ---------------------------------------------------------------------------
// Trial state machine

TrialRunner::TrialRunner(TrialSetup setup) : setup_(std::move(setup))
{
    setup_.protocol.validate();
    setup_.solver.validate();
    setup_.contact.validate();
    if (!setup_.mesh) setup_.mesh = std::make_shared<const TetMesh>(make_object_mesh(setup_.object));
    record_.id = setup_.id;
    record_.object_name = setup_.object.name;
    record_.object_kind = setup_.object.kind;
    record_.candidate = setup_.candidate;
    record_.dt = setup_.solver.dt;
    record_.protocol = setup_.protocol;
    record_.solver = setup_.solver;
    record_.contact = setup_.contact;
    record_.gripper = setup_.gripper;
    record_.sdf_spacing = setup_.rest_sdf ? setup_.rest_sdf->spacing : 0.0;
    record_.displacement_threshold = setup_.protocol.stability_c *
                                     setup_.protocol.steps_for(setup_.protocol.phase_duration, setup_.solver.dt) *
                                     setup_.contact.eps_v * setup_.solver.dt;
    if (setup_.with_gripper) {
        close_dir_ = setup_.candidate.pose.rotation.col(0);
    }
}

std::unique_ptr<Environment> TrialRunner::build_environment() const
{
    auto env = std::make_unique<Environment>(setup_.solver, setup_.contact);
    const auto& obj = setup_.object;
    env->add_body(obj.kind == ObjectKind::Soft ? make_soft_body(obj.name, *setup_.mesh, obj.material)
                                               : make_affine_body(obj.name, *setup_.mesh, obj.material));
    if (setup_.with_gripper) {
        const auto links = gripper_surfaces(setup_.gripper, setup_.candidate);
        const char* names[3] = {"left_finger", "right_finger", "palm"};
        for (int l = 0; l < 3; ++l) {
            Body b = make_kinematic_body(names[l], links[l], setup_.gripper.friction);
            b.link = l;
            env->add_body(std::move(b));
        }
    }
    env->gravity = Vec3::Zero();
    env->finalize();
    return env;
}

void TrialRunner::start_phase(Environment& env, const std::string& name, const Vec3& gravity)
{
    PhaseMarker m;
    m.name = name;
    m.first_step = record_.num_steps();
    m.gravity = gravity;
    m.com_start = env.center_of_mass(object_);
    m.com_end = m.com_start;
    record_.phases.push_back(m);
    env.gravity = gravity;
    phase_steps_ = 0;
}

void TrialRunner::end_phase(Environment& env)
{
    auto& m = record_.phases.back();
    m.num_steps = phase_steps_;
    m.com_end = env.center_of_mass(object_);
}

void TrialRunner::before_step(Environment& env)
{
    if (!started_) {
        started_ = true;
        if (setup_.with_gripper) {
            finger_ = {1, 2};
            for (int f = 0; f < 2; ++f) finger_rest_[f] = env.node_positions(finger_[f]);
        }
        x_prev_ = env.collision_positions();
        start_phase(env, "settle", Vec3::Zero());
    }
    if (phase_ != Phase::Closing) return;
    const double cap = 0.5 * setup_.candidate.opening();
    for (int f = 0; f < 2; ++f) {
        if (halted_[f] || travel_[f] >= cap) continue;
        travel_[f] = std::min(cap, travel_[f] + setup_.protocol.closing_speed * setup_.solver.dt);
        const double sign = f == 0 ? 1.0 : -1.0;
        Positions t = finger_rest_[f];
        t.rowwise() += (sign * travel_[f] * close_dir_).transpose();
        env.set_node_targets(finger_[f], t);
    }
}

void TrialRunner::record_state(Environment& env, const StepReport& report)
{
    const int step = record_.num_steps();
    int nodes = 0;
    for (int b = 0; b < env.num_bodies(); ++b) {
        const Positions x = env.node_positions(b);
        const Positions v = env.node_velocities(b);
        for (int i = 0; i < x.rows(); ++i) {
            for (int k = 0; k < 3; ++k) {
                record_.positions.push_back(x(i, k));
                record_.velocities.push_back(v(i, k));
            }
        }
        nodes += static_cast<int>(x.rows());
    }
    record_.num_nodes = nodes;

    if (setup_.object.kind == ObjectKind::Soft) {
        const auto& material = setup_.object.material;
        const StressField sf = compute_stress(env.body(object_).mesh, env.node_positions(object_),
                                              lame_from_young_poisson(material.young_modulus, material.poisson_ratio));
        record_.num_tets = static_cast<int>(sf.cauchy.size());
        for (std::size_t t = 0; t < sf.cauchy.size(); ++t) {
            const Mat3& s = sf.cauchy[t];
            for (double c : {s(0, 0), s(1, 1), s(2, 2), s(1, 2), s(0, 2), s(0, 1), sf.von_mises[t]}) {
                record_.stress.push_back(c);
            }
        }
    }

    const Positions x = env.collision_positions();
    const auto stencils = env.active_stencils();
    const std::vector<double> unit_mu(env.num_bodies(), 1.0);
    for (const auto& s : stencils) {
        ContactEvent e;
        e.step = step;
        e.kind = s.kind;
        e.v = s.v;
        e.bodies = s.bodies;
        e.distance = s.distance;
        e.lambda = stencil_force(s, x, env.contact_params());
        const auto a = update_friction_anchors({s}, x, env.contact_params(), unit_mu);
        if (!a.empty()) e.slip = anchor_slip(a[0], x, x_prev_).norm();
        record_.contacts.push_back(e);
    }
    const auto f = link_forces(env, stencils, x);
    record_.finger_force.push_back({f[0], f[1]});
    record_.newton_iterations.push_back(report.iterations);
    record_.min_distance = std::min(record_.min_distance, report.min_distance);
    record_.min_volume = std::min(record_.min_volume, report.min_volume);
    x_prev_ = x;
}

void TrialRunner::after_step(Environment& env, const StepReport& report)
{
    if (finished_) throw Error("TrialRunner: trial already finished");
    record_state(env, report);
    ++phase_steps_;
    const auto& p = setup_.protocol;
    const double dt = setup_.solver.dt;
    switch (phase_) {
    case Phase::Settle:
        if (phase_steps_ >= p.steps_for(p.settle_duration, dt)) {
            end_phase(env);
            phase_ = Phase::Closing;
            start_phase(env, "closing", Vec3::Zero());
            if (!setup_.with_gripper) {
                end_phase(env);
                phase_ = Phase::Hold;
                start_phase(env, "hold", Vec3::Zero());
            }
        }
        break;
    case Phase::Closing: {
        const auto& force = record_.finger_force.back();
        const double cap = 0.5 * setup_.candidate.opening();
        bool moving = false;
        for (int f = 0; f < 2; ++f) {
            if (!halted_[f] && force[f] > p.halt_force) {
                halted_[f] = true;
                record_.halt_step[f] = record_.num_steps() - 1;
            }
            moving = moving || (!halted_[f] && travel_[f] < cap);
        }
        if (!moving || phase_steps_ >= p.steps_for(p.closing_cap, dt)) {
            end_phase(env);
            phase_ = Phase::Hold;
            slow_steps_ = 0;
            start_phase(env, "hold", Vec3::Zero());
        }
        break;
    }
    case Phase::Hold:
        slow_steps_ = env.max_speed() < setup_.contact.eps_v ? slow_steps_ + 1 : 0;
        if (slow_steps_ >= p.steady_steps || phase_steps_ >= p.steps_for(p.hold_cap, dt)) {
            end_phase(env);
            phase_ = Phase::Gravity;
            gravity_index_ = 0;
            start_phase(env, "gravity", p.gravity * p.directions[0]);
        }
        break;
    case Phase::Gravity:
        if (phase_steps_ >= p.steps_for(p.phase_duration, dt)) {
            end_phase(env);
            if (++gravity_index_ < 6) {
                start_phase(env, "gravity", p.gravity * p.directions[gravity_index_]);
            } else {
                finish(env);
            }
        }
        break;
    case Phase::Done: break;
    }
}

void TrialRunner::finish(Environment& env)
{
    phase_ = Phase::Done;
    finished_ = true;
    int contacts = 0;
    for (const auto& s : env.active_stencils()) {
        const bool obj = s.bodies[0] == object_ || s.bodies[1] == object_;
        const bool grip = env.body(s.bodies[0]).link >= 0 || env.body(s.bodies[1]).link >= 0;
        if (obj && grip && s.distance < setup_.contact.dhat) ++contacts;
    }
    record_.final_contacts = contacts;
    record_.final_displacement = record_.phases.back().com_displacement();
    record_.verdict = contacts > 0 && record_.final_displacement < record_.displacement_threshold ? Verdict::Stable
                                                                                                 : Verdict::Unstable;
    if (!setup_.with_gripper) return;

    std::vector<TriSurface> gripper;
    for (int b = 1; b < env.num_bodies(); ++b) gripper.push_back(env.body_surface(b));
    DistanceQuery query;
    std::shared_ptr<SignedDistance> exact;
    if (setup_.object.kind == ObjectKind::Rigid && setup_.rest_sdf) {
        // Map world samples back to the rest frame of the affine body.
        const Body& body = env.body(object_);
        const int off = env.body_dof_offset(object_);
        const Vec3 p = env.dofs().segment<3>(off);
        Mat3 a;
        for (int c = 0; c < 3; ++c) a.col(c) = env.dofs().segment<3>(off + 3 + 3 * c);
        const Mat3 a_inv = a.inverse();
        const Vec3 rest_com = row(setup_.mesh->vertices, 0) - body.node_xbar[0];
        const auto sdf = setup_.rest_sdf;
        query = [sdf, a_inv, p, rest_com](const Vec3& x) { return (*sdf)(rest_com + a_inv * (x - p)); };
    } else {
        exact = std::make_shared<SignedDistance>(env.body_surface(object_));
        query = [exact](const Vec3& x) { return (*exact)(x); };
    }
    record_.d1 = penetration_distance_D1(query, gripper, setup_.metric_samples);
    record_.d2 = absolute_distance_D2(query, gripper, setup_.metric_samples);
}

void TrialRunner::fail(FailureReason reason, const std::string& detail)
{
    static const char* names[] = {"settle", "closing", "hold", "gravity", "done"};
    record_.verdict = Verdict::SimFailed;
    record_.failure_phase = names[static_cast<int>(phase_)];
    record_.failure_reason = std::string(to_string(reason)) + (detail.empty() ? "" : ": " + detail);
    phase_ = Phase::Done;
    finished_ = true;
}

TrialRecord run_grasp_trial(const TrialSetup& setup)
{
    TrialRunner runner(setup);
    std::unique_ptr<Environment> env;
    try {
        env = runner.build_environment();
    } catch (const Error& e) {
        runner.fail(FailureReason::None, e.what());
        return runner.take_record();
    }
    while (!runner.finished()) {
        runner.before_step(*env);
        const StepReport r = env->step();
        if (r.status == StepStatus::Failed) {
            runner.fail(r.reason, r.detail);
            break;
        }
        runner.after_step(*env, r);
    }
    return runner.take_record();
}

std::vector<TrialRecord> run_trials(const std::vector<TrialSetup>& setups, const SchedulerConfig& config)
{
    std::vector<TrialRunner> runners;
    runners.reserve(setups.size());
    Batch batch(config);
    std::vector<int> env_of(setups.size(), -1);
    for (std::size_t i = 0; i < setups.size(); ++i) {
        runners.emplace_back(setups[i]);
        try {
            env_of[i] = batch.add(runners.back().build_environment());
        } catch (const Error& e) {
            runners.back().fail(FailureReason::None, e.what());
        }
    }
    while (true) {
        bool any = false;
        for (std::size_t i = 0; i < runners.size(); ++i) {
            if (env_of[i] < 0 || runners[i].finished()) continue;
            runners[i].before_step(batch.env(env_of[i]));
            any = true;
        }
        if (!any) break;
        const BatchStepReport rep = batch.step();
        for (std::size_t i = 0; i < runners.size(); ++i) {
            const int e = env_of[i];
            if (e < 0 || runners[i].finished() || !rep.stepped[e]) continue;
            if (batch.status(e) == EnvStatus::Failed) {
                runners[i].fail(batch.failure(e), batch.failure_detail(e));
                continue;
            }
            runners[i].after_step(batch.env(e), rep.reports[e]);
            if (runners[i].finished()) batch.mark_done(e);
        }
    }
    std::vector<TrialRecord> out;
    for (auto& r : runners) out.push_back(r.take_record());
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate_record(const TrialRecord& r, const TrialProtocol& p, const ContactParams& contact)
{
    std::vector<std::string> bad;
    auto fail = [&](std::string s) { bad.push_back(r.id + ": " + std::move(s)); };
    if (r.verdict == Verdict::SimFailed) {
        if (r.failure_reason.empty()) fail("sim-failed without a reason");
        return bad;
    }
    const int n = r.num_steps();
    if (r.phases.size() != 9) {
        fail("expected 9 phases, found " + std::to_string(r.phases.size()));
        return bad;
    }
    const char* expect[9] = {"settle", "closing", "hold", "gravity", "gravity", "gravity", "gravity", "gravity", "gravity"};
    int next = 0;
    for (int i = 0; i < 9; ++i) {
        const auto& m = r.phases[i];
        if (m.name != expect[i]) fail("phase " + std::to_string(i) + " is " + m.name + ", expected " + expect[i]);
        if (m.first_step != next) fail("phase " + std::to_string(i) + " does not start where the previous ended");
        next = m.first_step + m.num_steps;
    }
    if (next != n) fail("phases do not cover all recorded steps");
    if (r.phases[0].num_steps != p.steps_for(p.settle_duration, r.dt)) fail("settle length");
    if (r.phases[0].gravity != Vec3::Zero() || r.phases[1].gravity != Vec3::Zero() ||
        r.phases[2].gravity != Vec3::Zero()) {
        fail("gravity must be off before the gravity phases");
    }
    const int g_steps = p.steps_for(p.phase_duration, r.dt);
    for (int i = 0; i < 6; ++i) {
        const auto& m = r.phases[3 + i];
        if (m.num_steps != g_steps) fail("gravity phase " + std::to_string(i) + " has " + std::to_string(m.num_steps) + " steps");
        if ((m.gravity - p.gravity * p.directions[i]).norm() > 1e-12) fail("gravity phase " + std::to_string(i) + " direction");
    }
    const auto& closing = r.phases[1];
    for (int f = 0; f < 2; ++f) {
        const int s = r.halt_step[f];
        if (s < 0) continue;
        if (s < closing.first_step || s >= closing.first_step + closing.num_steps) fail("halt outside closing");
        if (!(r.finger_force[s][f] > p.halt_force)) fail("finger " + std::to_string(f) + " halted at or below the threshold");
        if (s > 0 && r.finger_force[s - 1][f] > p.halt_force) fail("finger " + std::to_string(f) + " exceeded the threshold before halting");
    }
    const double thr = p.stability_c * g_steps * contact.eps_v * r.dt;
    if (std::abs(thr - r.displacement_threshold) > 1e-15) fail("displacement threshold");
    if (std::abs(r.phases.back().com_displacement() - r.final_displacement) > 0.0) fail("final displacement");
    const bool stable = r.final_contacts > 0 && r.final_displacement < thr;
    if (stable != (r.verdict == Verdict::Stable)) fail("verdict inconsistent with contact and displacement rule");
    const std::size_t per = static_cast<std::size_t>(n) * r.num_nodes * 3;
    if (r.positions.size() != per || r.velocities.size() != per) fail("trajectory size");
    if (r.stress.size() != static_cast<std::size_t>(n) * r.num_tets * 7) fail("stress size");
    return bad;
}

}  // namespace grip
