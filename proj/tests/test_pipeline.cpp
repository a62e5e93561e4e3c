#include "grip/pipeline.hpp"
#include "grip/primitives.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace grip;

namespace {

TriSurface box_at(const Vec3& size, const Vec3& center)
{
    return make_box_surface(size).transformed({Mat3::Identity(), center});
}

Body labelled_plate(const char* name, const Pose& pose, int link)
{
    Body b = make_kinematic_body(name, make_plane_surface(0.1).transformed(pose));
    b.link = link;
    return b;
}

// Cube of edge 5 cm centered at the origin, fingers closing along x and the
// palm on the -y side, so the final -z gravity phase pulls along the pads.
TrialSetup heavy_cube_setup(double mu)
{
    TrialSetup s;
    s.id = "heavy";
    s.object.name = "cube";
    s.object.shape = "cube";
    s.object.size = 0.05;
    s.object.resolution = 2;
    s.object.material.friction = mu;
    s.object.material.density = 1e6;
    s.mesh = std::make_shared<const TetMesh>(make_object_mesh(s.object));
    s.rest_sdf = std::make_shared<const Sdf>(build_sdf(s.mesh->boundary, 64));
    s.gripper.friction = mu;
    GraspCandidate& c = s.candidate;
    c.pose.rotation.col(0) = Vec3::UnitX();
    c.pose.rotation.col(1) = -Vec3::UnitZ();
    c.pose.rotation.col(2) = Vec3::UnitY();
    c.joints = {0.05 + 2 * s.gripper.clearance};
    c.contacts = {GraspContact{Vec3(-0.025, 0, 0), Vec3::UnitX(), -Vec3::UnitX(), 0},
                  GraspContact{Vec3(0.025, 0, 0), -Vec3::UnitX(), Vec3::UnitX(), 1}};
    s.metric_samples = 5000;
    return s;
}

}  // namespace

TEST(Protocol, DefaultsAndStepCounts)
{
    TrialProtocol p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.steps_for(p.settle_duration, 0.01), 5);
    EXPECT_EQ(p.steps_for(p.phase_duration, 0.01), 10);
    EXPECT_EQ(p.steps_for(0.001, 0.01), 1);
}

TEST(Protocol, RejectsBadValues)
{
    TrialProtocol p;
    p.directions[1] = Vec3::UnitX();
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.directions[0] = Vec3(1, 1, 0).normalized();
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.halt_force = 0;
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.phase_duration = -1;
    EXPECT_THROW(p.validate(), Error);
}

TEST(FingerForce, ZeroWithoutContactAndUnknownLinkThrows)
{
    Environment env;
    env.add_body(make_particle("p", Vec3(0, 0, 0.5), 0.1));
    env.add_body(labelled_plate("finger", {}, 0));
    env.finalize();
    EXPECT_EQ(finger_contact_force(env, 0), 0.0);
    EXPECT_THROW(finger_contact_force(env, 1), Error);
    EXPECT_THROW(finger_contact_force(env, -7), Error);
}

TEST(FingerForce, RestingParticleCarriesItsWeight)
{
    const double m = 0.05;
    Environment env;
    env.add_body(make_particle("p", Vec3(0.01, 0.02, 5e-4), m));
    env.add_body(labelled_plate("finger", {}, 1));
    env.finalize();
    for (int k = 0; k < 80; ++k) ASSERT_EQ(env.step().status, StepStatus::Converged);
    EXPECT_NEAR(finger_contact_force(env, 1), m * 9.8, 0.02 * m * 9.8);
}

TEST(FingerForce, SymmetricClampGivesEqualForces)
{
    Environment env;
    env.gravity = Vec3::Zero();
    env.add_body(make_particle("p", Vec3(0.01, 0.02, 0.0), 0.01));
    Mat3 flip = Mat3::Identity();
    flip(1, 1) = -1;
    flip(2, 2) = -1;
    env.add_body(labelled_plate("left", {Mat3::Identity(), Vec3(0, 0, -5e-4)}, 0));
    env.add_body(labelled_plate("right", {flip, Vec3(0, 0, 5e-4)}, 1));
    env.finalize();
    for (int k = 0; k < 5; ++k) ASSERT_EQ(env.step().status, StepStatus::Converged);
    const double f0 = finger_contact_force(env, 0);
    const double f1 = finger_contact_force(env, 1);
    EXPECT_GT(f0, 0.0);
    EXPECT_NEAR(f0, f1, 1e-6 * f0);
}

TEST(Distances, OutsideGripper)
{
    const SignedDistance sdf(make_box_surface(Vec3(2, 2, 2)));
    const std::vector<TriSurface> g = {box_at(Vec3(0.2, 0.2, 0.2), Vec3(1.5, 0, 0))};
    EXPECT_EQ(penetration_distance_D1(sdf, g, 2000), 0.0);
    EXPECT_NEAR(absolute_distance_D2(sdf, g, 2000), 0.4, 1e-9);
}

TEST(Distances, BuriedGripper)
{
    const TriSurface obj = make_box_surface(Vec3(2, 2, 2));
    const std::vector<TriSurface> g = {box_at(Vec3(0.2, 0.2, 0.2), Vec3(0.5, 0, 0))};
    const SignedDistance exact(obj);
    // Deepest gripper point is the x = 0.4 face, 0.6 below the object surface.
    EXPECT_NEAR(penetration_distance_D1(exact, g, 2000), 0.6, 1e-9);
    EXPECT_NEAR(absolute_distance_D2(exact, g, 2000), 0.6, 1e-9);
    const Sdf grid = build_sdf(obj, 64);
    const DistanceQuery q = [&](const Vec3& p) { return grid(p); };
    EXPECT_NEAR(penetration_distance_D1(q, g, 2000), 0.6, 2 * grid.spacing);
}

TEST(Distances, NestedSpheres)
{
    const Sdf grid = build_sdf(make_icosphere(1.0, 4), 64);
    const DistanceQuery q = [&](const Vec3& p) { return grid(p); };
    EXPECT_NEAR(penetration_distance_D1(q, {make_icosphere(0.6, 4)}, 5000), 0.4, 2 * grid.spacing);
    const TriSurface small = make_icosphere(0.005, 2).transformed({Mat3::Identity(), Vec3(0, 0.6, 0)});
    EXPECT_NEAR(penetration_distance_D1(q, {small}, 5000), 0.4, 2 * grid.spacing);
}

TEST(Distances, TouchingAndNearbyPlates)
{
    const SignedDistance sdf(make_box_surface(Vec3(2, 2, 2)));
    const std::vector<TriSurface> touching = {box_at(Vec3(0.2, 0.2, 0.2), Vec3(1.1, 0, 0))};
    EXPECT_NEAR(absolute_distance_D2(sdf, touching, 2000), 0.0, 1e-12);
    EXPECT_NEAR(penetration_distance_D1(sdf, touching, 2000), 0.0, 1e-12);
    const std::vector<TriSurface> near = {box_at(Vec3(0.01, 0.2, 0.2), Vec3(1.0012 + 0.005, 0, 0))};
    EXPECT_NEAR(absolute_distance_D2(sdf, near, 2000), 1.2e-3, 1e-12);
    EXPECT_EQ(penetration_distance_D1(sdf, near, 2000), 0.0);
}

TEST(Trial, ObjectWithoutGripperFalls)
{
    TrialSetup s = heavy_cube_setup(0.5);
    s.with_gripper = false;
    s.object.material.density = 1000;
    const TrialRecord r = run_grasp_trial(s);
    EXPECT_EQ(r.verdict, Verdict::Unstable);
    EXPECT_EQ(r.final_contacts, 0);
    // Free fall under the last gravity phase; implicit Euler over N steps from
    // the previous phase's velocity moves well past the threshold.
    EXPECT_GT(r.final_displacement, r.displacement_threshold);
}

TEST(Trial, FrictionDecidesTheVerdict)
{
    const TrialSetup grip = heavy_cube_setup(0.5);
    const TrialRecord held = run_grasp_trial(grip);
    EXPECT_EQ(held.verdict, Verdict::Stable);
    EXPECT_GT(held.final_contacts, 0);
    EXPECT_LT(held.final_displacement, 1e-4);
    EXPECT_EQ(held.d1, 0.0);
    EXPECT_TRUE(validate_record(held, grip.protocol, grip.contact).empty());

    const TrialSetup slick = heavy_cube_setup(0.01);
    const TrialRecord slid = run_grasp_trial(slick);
    EXPECT_EQ(slid.verdict, Verdict::Unstable);
    EXPECT_GT(slid.final_displacement, 1e-4);
    for (const auto& e : validate_record(slid, slick.protocol, slick.contact)) ADD_FAILURE() << e;
}

TEST(Trial, ProtocolTimeline)
{
    const TrialSetup s = heavy_cube_setup(0.5);
    const TrialRecord r = run_grasp_trial(s);
    ASSERT_EQ(r.phases.size(), 9u);
    EXPECT_EQ(r.phases[0].name, "settle");
    EXPECT_EQ(r.phases[0].num_steps, 5);
    EXPECT_EQ(r.phases[1].name, "closing");
    EXPECT_EQ(r.phases[2].name, "hold");
    for (int i = 0; i < 6; ++i) {
        const PhaseMarker& p = r.phases[3 + i];
        EXPECT_EQ(p.name, "gravity");
        EXPECT_EQ(p.num_steps, 10);
        EXPECT_LT((p.gravity - 9.8 * s.protocol.directions[i]).norm(), 1e-12);
    }
    for (int f = 0; f < 2; ++f) {
        const int h = r.halt_step[f];
        ASSERT_GT(h, 0);
        EXPECT_GT(r.finger_force[h][f], 50.0);
        EXPECT_LE(r.finger_force[h - 1][f], 50.0);
    }
    EXPECT_EQ(r.positions.size(), static_cast<std::size_t>(r.num_steps()) * r.num_nodes * 3);
    EXPECT_EQ(r.velocities.size(), r.positions.size());
}

TEST(Trial, SoftObjectRecordsStress)
{
    TrialSetup s;
    s.id = "soft";
    s.object.name = "cube";
    s.object.kind = ObjectKind::Soft;
    s.object.size = 0.05;
    s.object.resolution = 2;
    s.mesh = std::make_shared<const TetMesh>(make_object_mesh(s.object));
    s.rest_sdf = std::make_shared<const Sdf>(build_sdf(s.mesh->boundary, 64));
    const auto cs = sample_antipodal(s.mesh->boundary, s.gripper, 1, 3);
    ASSERT_EQ(cs.size(), 1u);
    s.candidate = cs[0];
    s.metric_samples = 5000;
    const TrialRecord r = run_grasp_trial(s);
    ASSERT_NE(r.verdict, Verdict::SimFailed) << r.failure_phase << ": " << r.failure_reason;
    EXPECT_EQ(r.num_tets, static_cast<int>(s.mesh->tets.size()));
    EXPECT_EQ(r.stress.size(), static_cast<std::size_t>(r.num_steps()) * r.num_tets * 7);
    EXPECT_GT(r.min_volume, 0.0);
    EXPECT_EQ(r.d1, 0.0);
    for (const auto& e : validate_record(r, s.protocol, s.contact)) ADD_FAILURE() << e;
}

TEST(Trial, DeterministicAcrossRunsAndBatching)
{
    const TrialSetup a = heavy_cube_setup(0.5);
    TrialSetup b = heavy_cube_setup(0.01);
    b.id = "other";
    const TrialRecord solo = run_grasp_trial(a);
    SchedulerConfig cfg;
    cfg.deterministic = true;
    const auto batch = run_trials({a, b}, cfg);
    ASSERT_EQ(batch.size(), 2u);
    EXPECT_EQ(batch[0].positions, solo.positions);
    EXPECT_EQ(batch[0].velocities, solo.velocities);
    EXPECT_EQ(batch[0].verdict, solo.verdict);
    EXPECT_EQ(batch[1].verdict, Verdict::Unstable);
}
