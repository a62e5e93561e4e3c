#include "grip/dataset.hpp"
#include "grip/engine.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace grip;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool deterministic = false;
    int envs = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* det_opt = nullptr;
    CLI::Option* envs_opt = nullptr;
};

void apply_globals(EngineConfig& c, const Globals& g)
{
    if (g.seed_opt->count()) c.seed = g.seed;
    if (g.det_opt->count()) c.deterministic = true;
    if (g.envs_opt->count()) c.envs = g.envs;
    c.validate();
}

EngineConfig config_from(const std::string& path, const Globals& g)
{
    EngineConfig c = path.empty() ? EngineConfig{} : load_config(path);
    apply_globals(c, g);
    return c;
}

void write_text(const fs::path& p, const std::string& s)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << s;
    if (!out) throw Error("cannot write " + p.string());
}

int cmd_synth(const Globals& g, const std::string& scene, const std::string& mode, const std::string& only, int n,
              const std::string& out, const std::string& left, const std::string& right, int k, double r1,
              int n_target)
{
    if (mode == "compose") {
        if (left.empty() || right.empty()) throw Error("synth --mode compose needs --left and --right");
        EngineConfig c = config_from(scene, g);
        if (k > 0) c.compose.k = k;
        if (r1 > 0) c.compose.r1 = r1;
        if (n_target > 0) c.compose.n_target = n_target;
        c.compose.validate();
        const auto l = candidates_from_json(read_file(left));
        const auto r = candidates_from_json(read_file(right));
        const ComposeResult res = compose_bimanual(l, r, c.compose, c.seed);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        const std::string path = out.empty() ? "composed.json" : out;
        write_text(path, composed_to_json(res));
        std::cout << "composed " << res.pairs.size() << " bimanual candidates from " << res.n_filtered
                  << " filtered pairs (r2 = " << res.r2 << ") -> " << path << "\n";
        return 0;
    }
    if (mode != "antipodal") throw Error("synth --mode must be antipodal or compose");
    if (scene.empty()) throw Error("synth --mode antipodal needs --scene");
    EngineConfig c = config_from(scene, g);
    const fs::path dir = out.empty() ? fs::path(c.output) / "candidates" : fs::path(out);
    bool any = false;
    for (std::size_t i = 0; i < c.objects.size(); ++i) {
        const ObjectSpec& o = c.objects[i];
        if (!only.empty() && o.name != only) continue;
        any = true;
        const TetMesh mesh = make_object_mesh(o);
        const Sdf sdf = build_sdf(mesh.boundary, c.sdf_resolution);
        const int count = n > 0 ? n : (c.object_candidates[i] >= 0 ? c.object_candidates[i] : c.candidates_per_object);
        std::vector<GraspCandidate> kept;
        int rejected = 0;
        for (const auto& cand : sample_antipodal(mesh.boundary, c.gripper, count, c.seed + 7919 * i)) {
            const auto r = repair_penetration(cand, c.gripper, sdf, c.contact.dhat);
            if (r.candidate) kept.push_back(*r.candidate);
            else ++rejected;
        }
        const fs::path p = dir / (o.name + "_candidates.json");
        write_text(p, candidates_to_json(kept));
        std::cout << o.name << ": " << kept.size() << " candidates, " << rejected << " discarded as penetrating -> "
                  << p.string() << "\n";
    }
    if (!any) throw Error("no object named '" + only + "' in the scene");
    return 0;
}

int cmd_validate(const Globals& g, const std::string& scene, const std::string& out, int candidates)
{
    EngineConfig c = config_from(scene, g);
    if (candidates >= 0) {
        c.candidates_per_object = candidates;
        std::fill(c.object_candidates.begin(), c.object_candidates.end(), -1);
    }
    AssetCache assets;
    const PreparedTrials prep = prepare_trials(c, assets);
    for (const auto& y : prep.yield) {
        std::cout << "object " << y.object << ": sampled " << y.sampled << ", repaired " << y.repaired
                  << ", discarded " << y.rejected << "\n";
    }
    const auto records = run_validation(prep.setups, c);
    const fs::path dir = out.empty() ? fs::path(c.output) : fs::path(out);
    const Manifest m = emit_dataset(records, dir);
    for (const auto& r : records) {
        std::cout << r.id << " " << to_string(r.verdict);
        if (r.verdict == Verdict::SimFailed) std::cout << " (" << r.failure_phase << ": " << r.failure_reason << ")";
        else std::cout << " D1=" << r.d1 << " D2=" << r.d2;
        std::cout << "\n";
    }
    std::cout << "trials " << records.size() << " stable " << m.stable << " unstable " << m.unstable
              << " sim-failed " << m.sim_failed << "\n";
    std::cout << "manifest " << (dir / "manifest.json").string() << " sha256 "
              << sha256_hex(read_file(dir / "manifest.json")) << "\n";
    return 0;
}

int cmd_bench(const Globals& g, const std::string& scene, std::vector<int> counts, int steps, const std::string& out)
{
    EngineConfig c = config_from(scene, g);
    if (counts.empty()) counts = c.bench.env_counts;
    if (steps <= 0) steps = c.bench.steps;
    SchedulerConfig sc;
    sc.deterministic = c.deterministic;
    sc.seed = c.seed;
    const auto rows = measure_speedup(make_bench_env, counts, steps, sc);
    const std::string csv = speedup_csv(rows);
    std::cout << csv;
    if (!out.empty()) {
        write_text(fs::path(out) / "speedup.csv", csv);
        write_text(fs::path(out) / "speedup.svg", speedup_svg(rows));
    }
    return 0;
}

int cmd_metrics(const std::string& dataset, const std::string& out)
{
    const auto rows = load_metrics(dataset);
    const std::string csv = metrics_csv(rows);
    std::cout << csv;
    double d1_max = 0.0, d2_sum = 0.0;
    int completed = 0, stable = 0;
    for (const auto& r : rows) {
        if (r.verdict == "sim-failed") continue;
        ++completed;
        if (std::isfinite(r.d1)) d1_max = std::max(d1_max, r.d1);
        if (r.verdict == "stable" && std::isfinite(r.d2)) {
            ++stable;
            d2_sum += r.d2;
        }
    }
    std::cout << "# completed " << completed << " max D1 " << d1_max << " m, stable " << stable << " mean D2 "
              << (stable ? d2_sum / stable : std::nan("")) << " m\n";
    if (!out.empty()) write_text(out, csv);
    return 0;
}

int cmd_report(const std::string& dataset, const std::string& bench, const std::string& out)
{
    const auto rows = load_metrics(dataset);
    const fs::path dir = out.empty() ? fs::path(dataset) / "report" : fs::path(out);
    const auto files = write_report(rows, dir, bench.empty() ? "" : read_file(bench));
    for (const auto& f : files) std::cout << (dir / f).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Grasp synthesis, validation and dataset tooling on a barrier-contact simulator", "grip-engine"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed (overrides the config)");
    g.det_opt = app.add_flag("--deterministic", g.deterministic, "Deterministic static scheduling");
    g.envs_opt = app.add_option("--envs", g.envs, "Environments per batch")->check(CLI::PositiveNumber);

    std::string scene, out, only, left, right, mode = "antipodal", dataset, bench_csv;
    int n = 0, k = 0, n_target = 0, candidates = -1, steps = 0;
    double r1 = 0.0;
    std::vector<int> counts;

    auto* synth = app.add_subcommand("synth", "Sample antipodal candidates or compose bimanual grasps");
    synth->add_option("--scene,--config", scene, "TOML scene file");
    synth->add_option("--mode", mode, "antipodal | compose")->check(CLI::IsMember({"antipodal", "compose"}));
    synth->add_option("--object", only, "Only this object");
    synth->add_option("-n,--count", n, "Candidates per object");
    synth->add_option("--out", out, "Output directory (antipodal) or file (compose)");
    synth->add_option("--left", left, "Left-hand candidate file");
    synth->add_option("--right", right, "Right-hand candidate file");
    synth->add_option("--k", k, "Cluster count");
    synth->add_option("--r1", r1, "Cluster pair retention fraction");
    synth->add_option("--n-target", n_target, "Desired output count");

    auto* validate = app.add_subcommand("validate", "Run grasp trials and write a dataset");
    validate->add_option("--scene,--config", scene, "TOML scene file")->required();
    validate->add_option("--out", out, "Dataset directory (default: config output)");
    validate->add_option("--candidates", candidates, "Candidates per object");

    auto* bench = app.add_subcommand("bench", "Batched vs sequential speedup table");
    bench->add_option("--scene,--config", scene, "TOML scene file ([bench] section)");
    bench->add_option("--counts", counts, "Environment counts")->delimiter(',');
    bench->add_option("--steps", steps, "Time steps per run");
    bench->add_option("--out", out, "Directory for speedup.csv and speedup.svg");

    auto* metrics = app.add_subcommand("metrics", "D1/D2 table of a dataset");
    metrics->add_option("--dataset", dataset, "Dataset directory")->required();
    metrics->add_option("--out", out, "CSV output file");

    auto* report = app.add_subcommand("report", "Aggregate CSV and SVG plots");
    report->add_option("--dataset", dataset, "Dataset directory")->required();
    report->add_option("--bench", bench_csv, "speedup.csv from bench");
    report->add_option("--out", out, "Report directory (default: <dataset>/report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (synth->parsed()) return cmd_synth(g, scene, mode, only, n, out, left, right, k, r1, n_target);
        if (validate->parsed()) return cmd_validate(g, scene, out, candidates);
        if (bench->parsed()) return cmd_bench(g, scene, counts, steps, out);
        if (metrics->parsed()) return cmd_metrics(dataset, out);
        if (report->parsed()) return cmd_report(dataset, bench_csv, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
