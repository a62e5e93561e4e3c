#include "grip/synth.hpp"

#include "grip/bvh.hpp"
#include "grip/primitives.hpp"
#include "grip/sdf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace grip {

void ParallelGripperSpec::validate() const
{
    if (!(max_opening > 0) || !(finger_width > 0) || !(finger_length > 0) || !(finger_thickness > 0) ||
        !(palm_thickness > 0) || palm_gap < 0 || clearance < 0 || friction < 0) {
        throw Error("ParallelGripperSpec: dimensions must be positive");
    }
}

const char* to_string(Provenance p)
{
    switch (p) {
    case Provenance::Sampled: return "sampled";
    case Provenance::Ingested: return "ingested";
    case Provenance::Composed: return "composed";
    }
    return "?";
}

Vec3 GraspCandidate::contact_center() const
{
    Vec3 c = Vec3::Zero();
    for (const auto& k : contacts) c += k.position;
    return contacts.empty() ? c : Vec3(c / static_cast<double>(contacts.size()));
}

std::array<TriSurface, 3> gripper_surfaces(const ParallelGripperSpec& s, double w)
{
    const Vec3 finger(s.finger_thickness, s.finger_width, s.finger_length);
    const TriSurface box = make_box_surface(finger);
    const double x = 0.5 * w + 0.5 * s.finger_thickness;
    const Vec3 palm(s.max_opening + 2.0 * s.finger_thickness, std::max(s.finger_width, 0.03), s.palm_thickness);
    const double zp = -0.5 * s.finger_length - s.palm_gap - 0.5 * s.palm_thickness;
    return {box.transformed({Mat3::Identity(), Vec3(-x, 0, 0)}), box.transformed({Mat3::Identity(), Vec3(x, 0, 0)}),
            make_box_surface(palm).transformed({Mat3::Identity(), Vec3(0, 0, zp)})};
}

std::array<TriSurface, 3> gripper_surfaces(const ParallelGripperSpec& spec, const GraspCandidate& c)
{
    auto s = gripper_surfaces(spec, c.opening());
    for (auto& t : s) t = t.transformed(c.pose);
    return s;
}

double gripper_min_distance(const ParallelGripperSpec& spec, const GraspCandidate& c, const DistanceQuery& sdf,
                            int samples_per_link, std::array<double, 3>* per_link)
{
    const auto links = gripper_surfaces(spec, c);
    double m = std::numeric_limits<double>::infinity();
    for (int l = 0; l < 3; ++l) {
        double ml = std::numeric_limits<double>::infinity();
        for (const auto& smp : sample_surface(links[l], samples_per_link, 1000 + l)) ml = std::min(ml, sdf(smp.position));
        for (int v = 0; v < links[l].num_vertices(); ++v) ml = std::min(ml, sdf(links[l].vertex(v)));
        if (per_link) (*per_link)[l] = ml;
        m = std::min(m, ml);
    }
    return m;
}

namespace {

void orthonormal_basis(const Vec3& a, Vec3& u, Vec3& v)
{
    const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    u = a.cross(helper).normalized();
    v = a.cross(u);
}

}  // namespace

std::vector<GraspCandidate> sample_antipodal(const TriSurface& surface, const ParallelGripperSpec& g, int n,
                                             std::uint64_t seed)
{
    g.validate();
    std::vector<GraspCandidate> out;
    if (n <= 0) return out;
    const SignedDistance sdf(surface);  // throws if not watertight
    const TriangleBvh bvh(surface);
    const double cos_half = std::cos(std::atan(g.friction));
    const double max_sep = g.max_opening - 2.0 * g.clearance;
    constexpr int kApproaches = 30;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int budget = std::max(200, 50 * n);
    const auto samples = sample_surface(surface, budget, seed);
    const double dhat = 1e-3;

    for (const auto& smp : samples) {
        if (static_cast<int>(out.size()) >= n) break;
        const Vec3 p1 = smp.position;
        const Vec3 n1 = surface.face_normal(smp.triangle);
        const auto hit = bvh.raycast(p1 - 1e-9 * n1, -n1);
        if (!hit) continue;
        const Vec3 p2 = p1 - 1e-9 * n1 - hit->t * n1;
        const Vec3 n2 = surface.face_normal(hit->triangle);
        if (!(n1.dot(n2) < -cos_half)) continue;
        const double sep = (p2 - p1).norm();
        if (sep > max_sep || sep <= 0.0) continue;

        const Vec3 xh = (p2 - p1) / sep;
        Vec3 u, v;
        orthonormal_basis(xh, u, v);
        const double offset = unit(rng) * 2.0 * M_PI / kApproaches;
        for (int a = 0; a < kApproaches; ++a) {
            const double th = offset + 2.0 * M_PI * a / kApproaches;
            const Vec3 zh = std::cos(th) * u + std::sin(th) * v;
            GraspCandidate c;
            c.gripper_id = g.id;
            c.pose.rotation.col(0) = xh;
            c.pose.rotation.col(1) = zh.cross(xh);
            c.pose.rotation.col(2) = zh;
            c.pose.translation = 0.5 * (p1 + p2);
            c.joints = {sep + 2.0 * g.clearance};
            c.contacts = {GraspContact{p1, Vec3::UnitX(), n1, kLeftFinger},
                          GraspContact{p2, -Vec3::UnitX(), n2, kRightFinger}};
            c.provenance = Provenance::Sampled;
            if (gripper_min_distance(g, c, sdf, 400) >= dhat) {
                out.push_back(std::move(c));
                break;
            }
        }
    }
    return out;
}

double normal_alignment_energy(const GraspCandidate& c)
{
    double e = 0.0;
    for (const auto& k : c.contacts) {
        if (std::abs(k.hand_normal.norm() - 1.0) > 1e-9 || std::abs(k.object_normal.norm() - 1.0) > 1e-9) {
            throw Error("normal_alignment_energy: normals must be unit length");
        }
        const double d = (c.pose.rotation * k.hand_normal).dot(k.object_normal) + 1.0;
        e += d * d;
    }
    return e;
}

RepairResult repair_penetration(const GraspCandidate& c, const ParallelGripperSpec& spec, const DistanceQuery& sdf,
                                double dhat)
{
    RepairResult r;
    std::array<double, 3> link{};
    r.min_distance = gripper_min_distance(spec, c, sdf, 1500, &link);
    if (r.min_distance >= dhat) {
        r.candidate = c;
        return r;
    }
    GraspCandidate cur = c;
    constexpr double kDamping = 1e-4;
    for (r.iterations = 1; r.iterations <= 20; ++r.iterations) {
        // Finger offsets needed along the object normals, mapped to the
        // opening DOF. The distance of each finger grows at rate 1/2 per unit
        // of opening (finite-difference Jacobian).
        const double w = cur.opening();
        const double h = 1e-5;
        GraspCandidate probe = cur;
        probe.joints[0] = w + h;
        std::array<double, 3> link_h{};
        gripper_min_distance(spec, probe, sdf, 1500, &link_h);
        Eigen::Vector2d res, jac;
        for (int f = 0; f < 2; ++f) {
            res[f] = std::max(0.0, dhat * 1.05 - link[f]);
            jac[f] = (link_h[f] - link[f]) / h;
        }
        if (res.isZero()) break;
        const double dw = jac.dot(res) / (jac.squaredNorm() + kDamping);
        if (!(dw > 0.0)) break;
        cur.joints[0] = std::min(spec.max_opening, w + dw);
        r.min_distance = gripper_min_distance(spec, cur, sdf, 1500, &link);
        if (r.min_distance >= dhat || cur.joints[0] >= spec.max_opening) break;
    }
    r.min_distance = gripper_min_distance(spec, cur, sdf, 1500, &link);
    if (r.min_distance >= dhat) r.candidate = cur;
    return r;
}

double force_closure_metric(const std::vector<Vec3>& points, const std::vector<Vec3>& normals)
{
    if (points.size() < 2 || points.size() != normals.size()) {
        throw Error("force_closure_metric: need >= 2 contacts with one normal each");
    }
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    c /= static_cast<double>(points.size());
    Vec3 f = Vec3::Zero();
    Vec3 t = Vec3::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
        f += normals[i];
        t += (points[i] - c).cross(normals[i]);
    }
    return std::sqrt(f.squaredNorm() + t.squaredNorm());
}

void BimanualComposeParams::validate() const
{
    if (k < 1 || !(r1 > 0.0 && r1 <= 1.0) || n_target < 1) {
        throw Error("BimanualComposeParams: need k >= 1, r1 in (0,1], n_target >= 1");
    }
}

KMeansResult kmeans(const std::vector<Vec3>& pts, int k, std::uint64_t seed, int max_iters)
{
    KMeansResult r;
    const int n = static_cast<int>(pts.size());
    if (n == 0 || k < 1) throw Error("kmeans: need points and k >= 1");
    k = std::min(k, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    r.centers.push_back(pts[std::min(n - 1, static_cast<int>(unit(rng) * n))]);
    std::vector<double> d2(n);
    while (static_cast<int>(r.centers.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : r.centers) best = std::min(best, (pts[i] - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        int pick = 0;
        if (total > 0.0) {
            double u = unit(rng) * total;
            for (pick = 0; pick < n - 1; ++pick) {
                u -= d2[pick];
                if (u < 0.0) break;
            }
        }
        r.centers.push_back(pts[pick]);
    }
    r.assignment.assign(n, -1);
    for (r.iterations = 0; r.iterations < max_iters; ++r.iterations) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (pts[i] - r.centers[c]).squaredNorm();
                if (d < bd) {  // ties keep the lowest index
                    bd = d;
                    best = c;
                }
            }
            if (r.assignment[i] != best) {
                r.assignment[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Vec3> sum(k, Vec3::Zero());
        std::vector<int> cnt(k, 0);
        for (int i = 0; i < n; ++i) {
            sum[r.assignment[i]] += pts[i];
            ++cnt[r.assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (cnt[c] > 0) r.centers[c] = sum[c] / cnt[c];
        }
    }
    return r;
}

ComposeResult compose_bimanual(const std::vector<GraspCandidate>& left, const std::vector<GraspCandidate>& right,
                               const BimanualComposeParams& params, std::uint64_t seed)
{
    params.validate();
    if (left.empty() || right.empty()) throw Error("compose_bimanual: both candidate lists must be non-empty");
    ComposeResult out;
    out.r1 = params.r1;
    out.n_target = params.n_target;

    auto cluster = [&](const std::vector<GraspCandidate>& cs, std::uint64_t s, int& k_eff, const char* side) {
        std::vector<Vec3> centers;
        for (const auto& c : cs) centers.push_back(c.contact_center());
        k_eff = params.k;
        if (static_cast<int>(cs.size()) < params.k) {
            k_eff = static_cast<int>(cs.size());
            out.warnings.push_back(std::string("k clamped to ") + std::to_string(k_eff) + " for " + side +
                                   " candidates");
        }
        return kmeans(centers, k_eff, s);
    };
    const KMeansResult kl = cluster(left, seed, out.k_left, "left");
    const KMeansResult kr = cluster(right, seed ^ 0x9e3779b97f4a7c15ULL, out.k_right, "right");

    // Cluster pair ranking by separation of the mean contact centers.
    struct PairRank {
        double dist;
        int a, b;
    };
    std::vector<PairRank> ranks;
    for (int a = 0; a < out.k_left; ++a)
        for (int b = 0; b < out.k_right; ++b) ranks.push_back({(kl.centers[a] - kr.centers[b]).norm(), a, b});
    std::stable_sort(ranks.begin(), ranks.end(), [](const PairRank& x, const PairRank& y) { return x.dist > y.dist; });
    const int keep = static_cast<int>(std::ceil(params.r1 * static_cast<double>(ranks.size()) - 1e-9));
    ranks.resize(std::max(1, keep));

    std::vector<std::vector<int>> lmem(out.k_left), rmem(out.k_right);
    for (int i = 0; i < static_cast<int>(left.size()); ++i) lmem[kl.assignment[i]].push_back(i);
    for (int j = 0; j < static_cast<int>(right.size()); ++j) rmem[kr.assignment[j]].push_back(j);

    out.n_filtered = 0;
    for (const auto& pr : ranks) {
        out.kept_cluster_pairs.push_back({pr.a, pr.b});
        out.n_filtered += static_cast<int>(lmem[pr.a].size() * rmem[pr.b].size());
    }
    out.r2 = out.n_filtered > 0 ? std::min(1.0, static_cast<double>(params.n_target) / out.n_filtered) : 0.0;

    for (const auto& pr : ranks) {
        std::vector<BimanualCandidate> group;
        for (int i : lmem[pr.a]) {
            for (int j : rmem[pr.b]) {
                BimanualCandidate bc;
                bc.left = i;
                bc.right = j;
                bc.clusters = {pr.a, pr.b};
                bc.contacts = left[i].contacts;
                bc.contacts.insert(bc.contacts.end(), right[j].contacts.begin(), right[j].contacts.end());
                std::vector<Vec3> p, nrm;
                for (const auto& k : bc.contacts) {
                    p.push_back(k.position);
                    nrm.push_back(-k.object_normal);
                }
                bc.metric = p.size() >= 2 ? force_closure_metric(p, nrm) : 0.0;
                group.push_back(std::move(bc));
            }
        }
        std::stable_sort(group.begin(), group.end(),
                         [](const BimanualCandidate& x, const BimanualCandidate& y) { return x.metric < y.metric; });
        const auto n_keep = static_cast<std::size_t>(std::ceil(out.r2 * static_cast<double>(group.size()) - 1e-9));
        group.resize(std::min(group.size(), n_keep));
        for (auto& g : group) out.pairs.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw Error("candidate json: expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json contact_json(const GraspContact& k)
{
    return {{"p", vec(k.position)}, {"n_h", vec(k.hand_normal)}, {"n_o", vec(k.object_normal)}, {"link", k.link}};
}

}  // namespace

std::string candidates_to_json(const std::vector<GraspCandidate>& cs)
{
    json arr = json::array();
    for (const auto& c : cs) {
        const Quat q(c.pose.rotation);
        json j;
        j["gripper_id"] = c.gripper_id;
        j["pose"] = {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"translation", vec(c.pose.translation)}};
        j["joints"] = c.joints;
        j["contacts"] = json::array();
        for (const auto& k : c.contacts) j["contacts"].push_back(contact_json(k));
        j["provenance"] = to_string(c.provenance);
        arr.push_back(j);
    }
    return arr.dump(1);
}

std::vector<GraspCandidate> candidates_from_json(const std::string& text)
{
    std::vector<GraspCandidate> out;
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("candidate json: ") + e.what());
    }
    if (!arr.is_array()) throw Error("candidate json: top level must be an array");
    for (const auto& j : arr) {
        GraspCandidate c;
        c.gripper_id = j.value("gripper_id", "parallel");
        const auto& q = j.at("pose").at("quaternion");
        c.pose.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>())
                              .normalized()
                              .toRotationMatrix();
        c.pose.translation = vec(j.at("pose").at("translation"));
        c.joints = j.at("joints").get<std::vector<double>>();
        for (const auto& k : j.at("contacts")) {
            c.contacts.push_back({vec(k.at("p")), vec(k.at("n_h")), vec(k.at("n_o")), k.value("link", 0)});
        }
        const std::string prov = j.value("provenance", "ingested");
        c.provenance = prov == "sampled" ? Provenance::Sampled
                       : prov == "composed" ? Provenance::Composed
                                            : Provenance::Ingested;
        if (c.joints.empty()) throw Error("candidate json: joints must hold the opening width");
        out.push_back(std::move(c));
    }
    return out;
}

std::string composed_to_json(const ComposeResult& r)
{
    json j;
    j["params"] = {{"k", r.k_left}, {"k_right", r.k_right}, {"r1", r.r1}, {"r2", r.r2}, {"n_target", r.n_target},
                   {"n_filtered", r.n_filtered}};
    j["warnings"] = r.warnings;
    j["pairs"] = json::array();
    for (const auto& p : r.pairs) {
        json c;
        c["left"] = p.left;
        c["right"] = p.right;
        c["metric"] = p.metric;
        c["clusters"] = p.clusters;
        c["contacts"] = json::array();
        for (const auto& k : p.contacts) c["contacts"].push_back(contact_json(k));
        j["pairs"].push_back(c);
    }
    return j.dump(1);
}

}  // namespace grip
