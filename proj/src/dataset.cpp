#include "grip/dataset.hpp"

#include "grip/svg.hpp"

#include <json.hpp>
#include <openssl/evp.h>
#include <tbb/parallel_for.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace grip {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary records are written little-endian");

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return s.str();
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

namespace {

void write_file(const fs::path& path, const std::string& bytes, const std::string& trial)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("trial " + trial + ": cannot write " + path.string());
}

template <class T>
void put(std::string& b, T v)
{
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    b.append(raw, sizeof(T));
}

void put_doubles(std::string& b, const double* p, std::size_t n)
{
    b.append(reinterpret_cast<const char*>(p), n * sizeof(double));
}

class Reader {
public:
    Reader(std::string bytes, std::string what) : b_(std::move(bytes)), what_(std::move(what)) {}
    template <class T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void doubles(std::vector<double>& out, std::size_t n)
    {
        need(n * sizeof(double));
        const std::size_t old = out.size();
        out.resize(old + n);
        std::memcpy(out.data() + old, b_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }
    void magic(const char* m)
    {
        need(8);
        if (b_.compare(pos_, 8, m, 8) != 0) throw Error(what_ + ": bad magic");
        pos_ += 8;
    }
    [[nodiscard]] bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > b_.size()) throw Error(what_ + ": truncated");
    }
    std::string b_;
    std::string what_;
    std::size_t pos_ = 0;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num(const json& j, double missing) { return j.is_null() ? missing : j.get<double>(); }
json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

json meta_json(const TrialRecord& r)
{
    json j;
    j["id"] = r.id;
    j["object"] = {{"name", r.object_name}, {"kind", to_string(r.object_kind)}};
    j["candidate"] = json::parse(candidates_to_json({r.candidate}))[0];
    const auto& p = r.protocol;
    json dirs = json::array();
    for (const auto& d : p.directions) dirs.push_back(vec(d));
    j["params"] = {
        {"dt", r.solver.dt},
        {"rel_tol", r.solver.rel_tol},
        {"max_iters", r.solver.max_iters},
        {"kappa", r.contact.kappa},
        {"dhat", r.contact.dhat},
        {"eps_v", r.contact.eps_v},
        {"protocol",
         {{"settle_duration", p.settle_duration}, {"closing_speed", p.closing_speed}, {"halt_force", p.halt_force},
          {"gravity", p.gravity}, {"phase_duration", p.phase_duration}, {"directions", dirs},
          {"stability_c", p.stability_c}, {"steady_steps", p.steady_steps}, {"hold_cap", p.hold_cap},
          {"closing_cap", p.closing_cap}}},
        {"gripper",
         {{"id", r.gripper.id}, {"max_opening", r.gripper.max_opening}, {"friction", r.gripper.friction},
          {"clearance", r.gripper.clearance}}}};
    j["verdict"] = to_string(r.verdict);
    j["failure_phase"] = r.failure_phase;
    j["failure_reason"] = r.failure_reason;
    j["D1"] = num(r.d1);
    j["D2"] = num(r.d2);
    j["sdf_spacing"] = r.sdf_spacing;
    j["final_contacts"] = r.final_contacts;
    j["final_displacement"] = r.final_displacement;
    j["displacement_threshold"] = r.displacement_threshold;
    j["min_distance"] = num(r.min_distance);
    j["min_volume"] = num(r.min_volume);
    j["num_steps"] = r.num_steps();
    j["num_nodes"] = r.num_nodes;
    j["num_tets"] = r.num_tets;
    j["halt_step"] = r.halt_step;
    j["finger_force"] = r.finger_force;
    j["newton_iterations"] = r.newton_iterations;
    j["phases"] = json::array();
    for (const auto& m : r.phases) {
        j["phases"].push_back({{"name", m.name}, {"first_step", m.first_step}, {"num_steps", m.num_steps},
                               {"gravity", vec(m.gravity)}, {"com_start", vec(m.com_start)},
                               {"com_end", vec(m.com_end)}, {"com_displacement", m.com_displacement()}});
    }
    return j;
}

std::string traj_bin(const TrialRecord& r)
{
    std::string b(kTrajMagic, 8);
    const std::size_t per = static_cast<std::size_t>(r.num_nodes) * 3;
    for (int s = 0; s < r.num_steps(); ++s) {
        put<std::int64_t>(b, s);
        put<std::int64_t>(b, r.num_nodes);
        put_doubles(b, r.positions.data() + s * per, per);
        put_doubles(b, r.velocities.data() + s * per, per);
    }
    return b;
}

std::string stress_bin(const TrialRecord& r)
{
    std::string b(kStressMagic, 8);
    const std::size_t per = static_cast<std::size_t>(r.num_tets) * 7;
    for (int s = 0; s < r.num_steps(); ++s) {
        put<std::int64_t>(b, s);
        put<std::int64_t>(b, r.num_tets);
        put_doubles(b, r.stress.data() + s * per, per);
    }
    return b;
}

std::string contacts_jsonl(const TrialRecord& r)
{
    std::string out;
    for (const auto& e : r.contacts) {
        json j = {{"step", e.step}, {"kind", to_string(e.kind)}, {"v", e.v},        {"bodies", e.bodies},
                  {"d", e.distance}, {"lambda", e.lambda},        {"slip", e.slip}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

StencilKind stencil_kind(const std::string& s)
{
    for (auto k : {StencilKind::PointTriangle, StencilKind::EdgeEdge, StencilKind::PointEdge, StencilKind::PointPoint}) {
        if (s == to_string(k)) return k;
    }
    throw Error("contacts.jsonl: unknown stencil kind " + s);
}

Verdict verdict_of(const std::string& s)
{
    if (s == "stable") return Verdict::Stable;
    if (s == "unstable") return Verdict::Unstable;
    if (s == "sim-failed") return Verdict::SimFailed;
    throw Error("meta.json: unknown verdict " + s);
}

const char* kFiles[] = {"meta.json", "traj.bin", "contacts.jsonl", "stress.bin"};

}  // namespace

Manifest emit_dataset(const std::vector<TrialRecord>& records, const fs::path& out_dir)
{
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (r.id.empty() || r.id.find('/') != std::string::npos || !ids.insert(r.id).second) {
            throw Error("emit_dataset: trial ids must be unique, non-empty path components ('" + r.id + "')");
        }
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("emit_dataset: cannot create " + out_dir.string() + ": " + ec.message());

    Manifest m;
    m.trials.resize(records.size());
    tbb::parallel_for(std::size_t(0), records.size(), [&](std::size_t i) {
        const TrialRecord& r = records[i];
        const fs::path dir = out_dir / r.id;
        std::error_code e2;
        fs::create_directories(dir, e2);
        if (e2) throw Error("trial " + r.id + ": cannot create directory: " + e2.message());
        const std::string bytes[4] = {meta_json(r).dump(1), traj_bin(r), contacts_jsonl(r), stress_bin(r)};
        ManifestEntry& entry = m.trials[i];
        entry.id = r.id;
        entry.verdict = to_string(r.verdict);
        for (int f = 0; f < 4; ++f) {
            write_file(dir / kFiles[f], bytes[f], r.id);
            entry.sha256[kFiles[f]] = sha256_hex(bytes[f]);
        }
    });
    for (const auto& r : records) {
        (r.verdict == Verdict::Stable ? m.stable : r.verdict == Verdict::Unstable ? m.unstable : m.sim_failed)++;
    }
    write_file(out_dir / "manifest.json", manifest_json(m), "manifest");
    return m;
}

std::string manifest_json(const Manifest& m)
{
    json j;
    j["format"] = "grip-dataset";
    j["version"] = 1;
    j["counts"] = {{"trials", m.trials.size()}, {"stable", m.stable}, {"unstable", m.unstable}, {"sim_failed", m.sim_failed}};
    j["trials"] = json::array();
    for (const auto& t : m.trials) j["trials"].push_back({{"id", t.id}, {"verdict", t.verdict}, {"sha256", t.sha256}});
    return j.dump(1) + "\n";
}

Manifest load_manifest(const fs::path& out_dir)
{
    const json j = json::parse(read_file(out_dir / "manifest.json"));
    Manifest m;
    m.stable = j.at("counts").at("stable");
    m.unstable = j.at("counts").at("unstable");
    m.sim_failed = j.at("counts").at("sim_failed");
    for (const auto& t : j.at("trials")) {
        m.trials.push_back({t.at("id"), t.at("verdict"), t.at("sha256").get<std::map<std::string, std::string>>()});
    }
    return m;
}

TrialRecord load_trial(const fs::path& dir)
{
    TrialRecord r;
    const json j = json::parse(read_file(dir / "meta.json"));
    r.id = j.at("id");
    r.object_name = j.at("object").at("name");
    r.object_kind = j.at("object").at("kind") == "soft" ? ObjectKind::Soft : ObjectKind::Rigid;
    r.candidate = candidates_from_json(json::array({j.at("candidate")}).dump()).at(0);
    const auto& pj = j.at("params");
    r.dt = pj.at("dt");
    r.solver.dt = r.dt;
    r.solver.rel_tol = pj.at("rel_tol");
    r.solver.max_iters = pj.at("max_iters");
    r.contact.kappa = pj.at("kappa");
    r.contact.dhat = pj.at("dhat");
    r.contact.eps_v = pj.at("eps_v");
    const auto& pp = pj.at("protocol");
    r.protocol.settle_duration = pp.at("settle_duration");
    r.protocol.closing_speed = pp.at("closing_speed");
    r.protocol.halt_force = pp.at("halt_force");
    r.protocol.gravity = pp.at("gravity");
    r.protocol.phase_duration = pp.at("phase_duration");
    for (int i = 0; i < 6; ++i) r.protocol.directions[i] = vec(pp.at("directions")[i]);
    r.protocol.stability_c = pp.at("stability_c");
    r.protocol.steady_steps = pp.at("steady_steps");
    r.protocol.hold_cap = pp.at("hold_cap");
    r.protocol.closing_cap = pp.at("closing_cap");
    const auto& gj = pj.at("gripper");
    r.gripper.id = gj.at("id");
    r.gripper.max_opening = gj.at("max_opening");
    r.gripper.friction = gj.at("friction");
    r.gripper.clearance = gj.at("clearance");
    r.verdict = verdict_of(j.at("verdict"));
    r.failure_phase = j.at("failure_phase");
    r.failure_reason = j.at("failure_reason");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    r.d1 = num(j.at("D1"), nan);
    r.d2 = num(j.at("D2"), nan);
    r.sdf_spacing = j.at("sdf_spacing");
    r.final_contacts = j.at("final_contacts");
    r.final_displacement = j.at("final_displacement");
    r.displacement_threshold = j.at("displacement_threshold");
    r.min_distance = num(j.at("min_distance"), inf);
    r.min_volume = num(j.at("min_volume"), inf);
    r.num_nodes = j.at("num_nodes");
    r.num_tets = j.at("num_tets");
    r.halt_step = j.at("halt_step");
    r.finger_force = j.at("finger_force").get<std::vector<std::array<double, 2>>>();
    r.newton_iterations = j.at("newton_iterations").get<std::vector<int>>();
    for (const auto& m : j.at("phases")) {
        PhaseMarker p;
        p.name = m.at("name");
        p.first_step = m.at("first_step");
        p.num_steps = m.at("num_steps");
        p.gravity = vec(m.at("gravity"));
        p.com_start = vec(m.at("com_start"));
        p.com_end = vec(m.at("com_end"));
        r.phases.push_back(p);
    }
    const int steps = j.at("num_steps");
    if (static_cast<int>(r.finger_force.size()) != steps) throw Error(r.id + ": finger_force length mismatch");

    Reader traj(read_file(dir / "traj.bin"), r.id + "/traj.bin");
    traj.magic(kTrajMagic);
    const std::size_t per = static_cast<std::size_t>(r.num_nodes) * 3;
    for (int s = 0; s < steps; ++s) {
        if (traj.get<std::int64_t>() != s || traj.get<std::int64_t>() != r.num_nodes) {
            throw Error(r.id + "/traj.bin: bad step header");
        }
        traj.doubles(r.positions, per);
        traj.doubles(r.velocities, per);
    }
    if (!traj.done()) throw Error(r.id + "/traj.bin: trailing bytes");

    Reader stress(read_file(dir / "stress.bin"), r.id + "/stress.bin");
    stress.magic(kStressMagic);
    for (int s = 0; s < steps; ++s) {
        if (stress.get<std::int64_t>() != s || stress.get<std::int64_t>() != r.num_tets) {
            throw Error(r.id + "/stress.bin: bad step header");
        }
        stress.doubles(r.stress, static_cast<std::size_t>(r.num_tets) * 7);
    }
    if (!stress.done()) throw Error(r.id + "/stress.bin: trailing bytes");

    std::istringstream lines(read_file(dir / "contacts.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const json e = json::parse(line);
        ContactEvent c;
        c.step = e.at("step");
        c.kind = stencil_kind(e.at("kind"));
        c.v = e.at("v");
        c.bodies = e.at("bodies");
        c.distance = e.at("d");
        c.lambda = e.at("lambda");
        c.slip = e.at("slip");
        r.contacts.push_back(c);
    }
    return r;
}

std::vector<MetricRow> load_metrics(const fs::path& out_dir)
{
    const Manifest m = load_manifest(out_dir);
    std::vector<MetricRow> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& t : m.trials) {
        const json j = json::parse(read_file(out_dir / t.id / "meta.json"));
        MetricRow r;
        r.id = t.id;
        r.object = j.at("object").at("name");
        r.kind = j.at("object").at("kind");
        r.verdict = j.at("verdict");
        r.d1 = num(j.at("D1"), nan);
        r.d2 = num(j.at("D2"), nan);
        r.sdf_spacing = j.at("sdf_spacing");
        r.final_displacement = j.at("final_displacement");
        r.steps = j.at("num_steps");
        rows.push_back(r);
    }
    return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows)
{
    std::ostringstream s;
    s << std::setprecision(9);
    s << "trial,object,kind,verdict,D1_m,D2_m,sdf_spacing_m,final_displacement_m,steps\n";
    for (const auto& r : rows) {
        s << r.id << ',' << r.object << ',' << r.kind << ',' << r.verdict << ',' << r.d1 << ',' << r.d2 << ','
          << r.sdf_spacing << ',' << r.final_displacement << ',' << r.steps << '\n';
    }
    return s.str();
}

std::vector<std::string> write_report(const std::vector<MetricRow>& rows, const fs::path& dir,
                                      const std::string& bench_csv)
{
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& body) {
        write_file(dir / name, body, "report");
        written.push_back(name);
    };

    struct Agg {
        int trials = 0, stable = 0, unstable = 0, failed = 0, completed = 0, n_d2 = 0;
        double d1_max = 0.0, d2_sum = 0.0;
    };
    std::map<std::string, Agg> by_object;
    std::vector<double> d2_stable;
    for (const auto& r : rows) {
        Agg& a = by_object[r.object + " (" + r.kind + ")"];
        ++a.trials;
        if (r.verdict == "stable") ++a.stable;
        else if (r.verdict == "unstable") ++a.unstable;
        else ++a.failed;
        if (r.verdict != "sim-failed" && std::isfinite(r.d1)) {
            ++a.completed;
            a.d1_max = std::max(a.d1_max, r.d1);
        }
        if (r.verdict == "stable" && std::isfinite(r.d2)) {
            ++a.n_d2;
            a.d2_sum += r.d2;
            d2_stable.push_back(r.d2);
        }
    }
    std::ostringstream csv;
    csv << std::setprecision(9) << "object,trials,stable,unstable,sim_failed,max_D1_m,mean_D2_stable_m\n";
    std::vector<std::string> cats;
    Series st{"stable", {}, {}}, un{"unstable", {}, {}}, fa{"sim-failed", {}, {}};
    for (const auto& [name, a] : by_object) {
        csv << name << ',' << a.trials << ',' << a.stable << ',' << a.unstable << ',' << a.failed << ',' << a.d1_max
            << ',' << (a.n_d2 ? a.d2_sum / a.n_d2 : std::numeric_limits<double>::quiet_NaN()) << '\n';
        cats.push_back(name);
        st.y.push_back(a.stable);
        un.y.push_back(a.unstable);
        fa.y.push_back(a.failed);
    }
    emit("summary.csv", csv.str());
    emit("trials.csv", metrics_csv(rows));
    emit("verdicts.svg", svg_bar_chart("Verdicts per object", cats, {st, un, fa}));
    std::vector<double> d2_mm;
    for (double d : d2_stable) d2_mm.push_back(1e3 * d);
    emit("d2_histogram.svg", svg_histogram("D2 of stable trials", "D2 (mm)", d2_mm, 20, 0.0, 3.0));
    if (!bench_csv.empty()) {
        std::vector<SpeedupRow> speed;
        std::istringstream in(bench_csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            SpeedupRow s;
            char c;
            std::istringstream ls(line);
            ls >> s.env_count >> c >> s.batched_seconds >> c >> s.sequential_seconds >> c >> s.speedup;
            if (!ls) throw Error("report: malformed bench csv line '" + line + "'");
            speed.push_back(s);
        }
        emit("speedup.svg", speedup_svg(speed));
    }
    return written;
}

}  // namespace grip
