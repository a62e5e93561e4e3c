#pragma once

// Grasp candidate generation and composition for parallel grippers.

#include "grip/mesh.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace grip {

/// Parallel-jaw gripper in its hand frame: fingers close along x, extend
/// along +z from the palm, pads centered at z = 0.
struct ParallelGripperSpec {
    std::string id = "parallel";
    double max_opening = 0.08;       ///< m, inner pad separation
    double finger_width = 0.02;      ///< m, along y
    double finger_length = 0.06;     ///< m, along z
    double finger_thickness = 0.008; ///< m, along x
    double palm_thickness = 0.01;    ///< m, along z
    double palm_gap = 0.002;         ///< m, between finger base and palm
    double clearance = 3e-3;         ///< m, initial pad gap per side
    double friction = 0.5;           ///< cone half-angle atan(mu)

    void validate() const;
};

enum class Provenance { Sampled, Ingested, Composed };
const char* to_string(Provenance p);

struct GraspContact {
    Vec3 position = Vec3::Zero();    ///< world, on the object surface
    Vec3 hand_normal = Vec3::UnitX();   ///< n^h, hand frame, pad normal toward the object
    Vec3 object_normal = Vec3::UnitX(); ///< n^o, world, outward object normal
    int link = 0;                    ///< 0 left finger, 1 right finger
};

struct GraspCandidate {
    std::string gripper_id = "parallel";
    Pose pose;                       ///< hand frame -> world
    std::vector<double> joints;      ///< {opening width}
    std::vector<GraspContact> contacts;
    Provenance provenance = Provenance::Sampled;

    [[nodiscard]] double opening() const { return joints.at(0); }
    [[nodiscard]] Vec3 contact_center() const;
};

enum GripperLink { kLeftFinger = 0, kRightFinger = 1, kPalm = 2 };

/// Closed link surfaces in the hand frame at a given opening, indexed by GripperLink.
std::array<TriSurface, 3> gripper_surfaces(const ParallelGripperSpec& spec, double opening);
/// Same, posed in the world.
std::array<TriSurface, 3> gripper_surfaces(const ParallelGripperSpec& spec, const GraspCandidate& c);

using DistanceQuery = std::function<double(const Vec3&)>;

/// Smallest distance query value over area-weighted samples and vertices of the posed gripper.
double gripper_min_distance(const ParallelGripperSpec& spec, const GraspCandidate& c, const DistanceQuery& sdf,
                            int samples_per_link = 1500, std::array<double, 3>* per_link = nullptr);

std::vector<GraspCandidate> sample_antipodal(const TriSurface& surface, const ParallelGripperSpec& gripper, int n,
                                             std::uint64_t seed);

/// E = sum_i ((R n_i^h) . n_i^o + 1)^2. Throws for non-unit normals.
double normal_alignment_energy(const GraspCandidate& c);

struct RepairResult {
    std::optional<GraspCandidate> candidate;  ///< empty when rejected
    int iterations = 0;
    double min_distance = 0.0;
};

/// Widens the opening by damped least squares until every sampled gripper
/// point is at least `dhat` outside the object (max 20 iterations).
RepairResult repair_penetration(const GraspCandidate& c, const ParallelGripperSpec& spec, const DistanceQuery& sdf,
                                double dhat);

/// || sum_i [n_i ; (x_i - c) x n_i] || with c the contact centroid and n_i inward normals.
double force_closure_metric(const std::vector<Vec3>& points, const std::vector<Vec3>& inward_normals);

struct BimanualComposeParams {
    int k = 26;
    double r1 = 0.25;
    int n_target = 100;

    void validate() const;
};

struct BimanualCandidate {
    int left = -1;
    int right = -1;
    std::vector<GraspContact> contacts;  ///< union, left first
    double metric = 0.0;
    std::array<int, 2> clusters = {-1, -1};
};

struct ComposeResult {
    std::vector<BimanualCandidate> pairs;
    int k_left = 0, k_right = 0;
    double r1 = 0.0, r2 = 0.0;
    int n_target = 0, n_filtered = 0;
    std::vector<std::array<int, 2>> kept_cluster_pairs;  ///< in ranking order
    std::vector<std::string> warnings;
};

/// Lloyd's k-means with k-means++ seeding; returns assignments and centers.
struct KMeansResult {
    std::vector<int> assignment;
    std::vector<Vec3> centers;
    int iterations = 0;
};
KMeansResult kmeans(const std::vector<Vec3>& points, int k, std::uint64_t seed, int max_iters = 100);

ComposeResult compose_bimanual(const std::vector<GraspCandidate>& left, const std::vector<GraspCandidate>& right,
                               const BimanualComposeParams& params, std::uint64_t seed);

// Candidate files (JSON).
std::string candidates_to_json(const std::vector<GraspCandidate>& cs);
std::vector<GraspCandidate> candidates_from_json(const std::string& text);
std::string composed_to_json(const ComposeResult& r);

}  // namespace grip
