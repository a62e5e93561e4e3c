#pragma once

// Grasp validation protocol: scene assembly, per-trial state machine,
// finger force readback and gripper/object distance metrics.

#include "grip/multienv.hpp"
#include "grip/sdf.hpp"
#include "grip/synth.hpp"

#include <memory>
#include <optional>

namespace grip {

struct TrialProtocol {
    double settle_duration = 0.05;  ///< s, gravity off
    double closing_speed = 0.05;    ///< m/s per finger
    double halt_force = 50.0;       ///< N
    double gravity = 9.8;           ///< m/s^2
    double phase_duration = 0.1;    ///< s per gravity direction
    std::array<Vec3, 6> directions = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(),
                                      -Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
    double stability_c = 1.0;
    int steady_steps = 5;           ///< consecutive slow steps that end the hold
    double hold_cap = 1.0;          ///< s
    double closing_cap = 2.0;       ///< s

    void validate() const;
    [[nodiscard]] int steps_for(double duration, double dt) const;
};

enum class ObjectKind { Rigid, Soft };
const char* to_string(ObjectKind k);

struct ObjectSpec {
    std::string name = "cube";
    std::string shape = "cube";  ///< cube | sphere | mug | mesh
    double size = 0.05;          ///< m, edge / diameter
    ObjectKind kind = ObjectKind::Rigid;
    int resolution = 4;          ///< cells across
    std::string mesh_path;       ///< for shape = mesh (.msh or .vtk)
    MaterialParams material;
};

/// Tet mesh of an object spec, in its own frame.
TetMesh make_object_mesh(const ObjectSpec& spec);

/// Everything one trial needs. Assets are shared between trials.
struct TrialSetup {
    std::string id;
    ObjectSpec object;
    std::shared_ptr<const TetMesh> mesh;
    std::shared_ptr<const Sdf> rest_sdf;   ///< object SDF in its rest frame
    bool with_gripper = true;
    ParallelGripperSpec gripper;
    GraspCandidate candidate;
    TrialProtocol protocol;
    SolverParams solver;
    ContactParams contact;
    int metric_samples = 50000;
};

enum class Verdict { Stable, Unstable, SimFailed };
const char* to_string(Verdict v);

struct PhaseMarker {
    std::string name;       ///< settle | closing | hold | gravity
    int first_step = 0;     ///< inclusive, 0-based step index
    int num_steps = 0;
    Vec3 gravity = Vec3::Zero();
    Vec3 com_start = Vec3::Zero();
    Vec3 com_end = Vec3::Zero();
    [[nodiscard]] double com_displacement() const { return (com_end - com_start).norm(); }
};

struct ContactEvent {
    int step = 0;
    StencilKind kind = StencilKind::PointTriangle;
    std::array<int, 4> v = {-1, -1, -1, -1};
    std::array<int, 2> bodies = {-1, -1};
    double distance = 0.0;
    double lambda = 0.0;
    double slip = 0.0;
};

struct TrialRecord {
    std::string id;
    std::string object_name;
    ObjectKind object_kind = ObjectKind::Rigid;
    GraspCandidate candidate;
    double dt = 0.01;
    TrialProtocol protocol;
    SolverParams solver;
    ContactParams contact;
    ParallelGripperSpec gripper;

    int num_nodes = 0;                 ///< recorded nodes per step, all bodies
    int num_tets = 0;                  ///< stressed tets per step (soft objects)
    std::vector<double> positions;     ///< steps x num_nodes x 3
    std::vector<double> velocities;    ///< steps x num_nodes x 3
    std::vector<double> stress;        ///< steps x num_tets x 7 (Cauchy xx yy zz yz xz xy, von Mises)
    std::vector<ContactEvent> contacts;
    std::vector<std::array<double, 2>> finger_force;  ///< per step, N
    std::array<int, 2> halt_step = {-1, -1};
    std::vector<PhaseMarker> phases;
    std::vector<int> newton_iterations;

    Verdict verdict = Verdict::SimFailed;
    std::string failure_phase;
    std::string failure_reason;
    int final_contacts = 0;
    double final_displacement = 0.0;
    double displacement_threshold = 0.0;
    double d1 = std::numeric_limits<double>::quiet_NaN();
    double d2 = std::numeric_limits<double>::quiet_NaN();
    double sdf_spacing = 0.0;
    double min_distance = std::numeric_limits<double>::infinity();
    double min_volume = std::numeric_limits<double>::infinity();

    [[nodiscard]] int num_steps() const { return static_cast<int>(finger_force.size()); }
};

/// Sum of barrier force magnitudes over contact stencils touching a body
/// labelled with `link`. Throws for unknown links.
double finger_contact_force(const Environment& env, int link);

/// Area-weighted samples on the union of the gripper surfaces.
std::vector<Vec3> sample_gripper(const std::vector<TriSurface>& surfaces, int n, std::uint64_t seed = 0);

/// max(0, max_p -sdf(p)) over the samples (sdf negative inside).
double penetration_distance_D1(const DistanceQuery& sdf, const std::vector<TriSurface>& gripper,
                               int n_samples = 50000, std::uint64_t seed = 0);
/// |max_p -sdf(p)|.
double absolute_distance_D2(const DistanceQuery& sdf, const std::vector<TriSurface>& gripper,
                            int n_samples = 50000, std::uint64_t seed = 0);

/// Step-by-step driver of one trial on an externally owned environment.
class TrialRunner {
public:
    explicit TrialRunner(TrialSetup setup);

    [[nodiscard]] std::unique_ptr<Environment> build_environment() const;
    /// Sets gravity and kinematic targets for the coming step.
    void before_step(Environment& env);
    /// Records the converged step and advances the protocol.
    void after_step(Environment& env, const StepReport& report);
    /// Ends the trial as sim-failed; the environment is gone.
    void fail(FailureReason reason, const std::string& detail);
    [[nodiscard]] bool finished() const { return finished_; }
    [[nodiscard]] const TrialRecord& record() const { return record_; }
    TrialRecord take_record() { return std::move(record_); }

    enum class Phase { Settle, Closing, Hold, Gravity, Done };
    [[nodiscard]] Phase phase() const { return phase_; }

private:
    void start_phase(Environment& env, const std::string& name, const Vec3& gravity);
    void end_phase(Environment& env);
    void finish(Environment& env);
    void record_state(Environment& env, const StepReport& report);

    TrialSetup setup_;
    TrialRecord record_;
    Phase phase_ = Phase::Settle;
    bool finished_ = false;
    bool started_ = false;
    int object_ = 0;
    std::array<int, 2> finger_ = {-1, -1};
    std::array<Positions, 2> finger_rest_;
    std::array<double, 2> travel_ = {0.0, 0.0};
    std::array<bool, 2> halted_ = {false, false};
    Vec3 close_dir_ = Vec3::UnitX();
    int phase_steps_ = 0;
    int gravity_index_ = 0;
    int slow_steps_ = 0;
    Positions x_prev_;
};

TrialRecord run_grasp_trial(const TrialSetup& setup);

/// Trials mapped 1:1 onto environments of one batch.
std::vector<TrialRecord> run_trials(const std::vector<TrialSetup>& setups, const SchedulerConfig& config);

/// Protocol and verdict consistency checks; returns the violations found.
std::vector<std::string> validate_record(const TrialRecord& r, const TrialProtocol& protocol,
                                         const ContactParams& contact);

}  // namespace grip
