#include "grip/config.hpp"

#include "grip/dataset.hpp"

#include <toml.hpp>

#include <set>

namespace grip {

namespace {

std::string where(const std::string& source, int line)
{
    return line > 0 ? source + ":" + std::to_string(line) : source;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int l, const std::string& f, const std::string& message)
    : Error(where(source, l) + ": " + (f.empty() ? "" : "'" + f + "': ") + message), line(l), field(f)
{
}

void EngineConfig::validate() const
{
    solver.validate();
    contact.validate();
    protocol.validate();
    gripper.validate();
    compose.validate();
    if (envs < 1) throw Error("envs must be >= 1");
    if (candidates_per_object < 0) throw Error("candidates_per_object must be >= 0");
    if (sdf_resolution < 2) throw Error("sdf_resolution must be >= 2");
    if (metric_samples < 1) throw Error("metric_samples must be >= 1");
    if (bench.steps < 1 || bench.env_counts.empty()) throw Error("bench needs steps >= 1 and env counts");
    for (int n : bench.env_counts) {
        if (n < 1) throw Error("bench env counts must be >= 1");
    }
}

namespace {

/// Reads keys of one table, remembering which were consumed.
class Section {
public:
    Section(const toml::table& t, std::string prefix, const std::string& source)
        : t_(t), prefix_(std::move(prefix)), source_(source)
    {
    }

    template <class T>
    void get(const std::string& key, T& out)
    {
        used_.insert(key);
        const toml::node* n = t_.get(key);
        if (!n) return;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = n->value<double>()) {
                out = *v;
                return;
            }
            fail(key, *n, "expected a number");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n->value_exact<bool>()) {
                out = *v;
                return;
            }
            fail(key, *n, "expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = n->value_exact<std::string>()) {
                out = *v;
                return;
            }
            fail(key, *n, "expected a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (auto v = n->value_exact<int64_t>()) {
                if (*v < 0 && std::is_unsigned_v<T>) fail(key, *n, "must be non-negative");
                if (std::is_same_v<T, int> && (*v > INT32_MAX || *v < INT32_MIN)) fail(key, *n, "out of range");
                out = static_cast<T>(*v);
                return;
            }
            fail(key, *n, "expected an integer");
        }
    }

    void get_int_list(const std::string& key, std::vector<int>& out)
    {
        used_.insert(key);
        const toml::node* n = t_.get(key);
        if (!n) return;
        const toml::array* a = n->as_array();
        if (!a) fail(key, *n, "expected an array of integers");
        out.clear();
        for (const auto& e : *a) {
            auto v = e.value_exact<int64_t>();
            if (!v) fail(key, e, "expected an array of integers");
            out.push_back(static_cast<int>(*v));
        }
    }

    [[nodiscard]] const toml::node* node(const std::string& key) const { return t_.get(key); }
    void use(const std::string& key) { used_.insert(key); }

    void finish() const
    {
        for (const auto& [k, v] : t_) {
            const std::string key(k.str());
            if (!used_.count(key)) fail(key, v, "unknown field");
        }
    }

    [[noreturn]] void fail(const std::string& key, const toml::node& n, const std::string& msg) const
    {
        throw ConfigError(source_, static_cast<int>(n.source().begin.line), name(key), msg);
    }
    [[nodiscard]] std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
    [[nodiscard]] int line() const { return static_cast<int>(t_.source().begin.line); }

private:
    const toml::table& t_;
    std::string prefix_;
    const std::string& source_;
    std::set<std::string> used_;
};

template <class Fn>
void with_table(Section& parent, const std::string& key, const std::string& source, Fn&& fn)
{
    parent.use(key);
    const toml::node* n = parent.node(key);
    if (!n) return;
    const toml::table* t = n->as_table();
    if (!t) parent.fail(key, *n, "expected a table");
    Section s(*t, key, source);
    fn(s);
    s.finish();
}

template <class Fn>
void checked(const std::string& source, int line, const std::string& field, Fn&& fn)
{
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(source, line, field, e.what());
    }
}

}  // namespace

EngineConfig parse_config(const std::string& text, const std::string& source)
{
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(source, static_cast<int>(e.source().begin.line), "", std::string(e.description()));
    }
    EngineConfig c;
    Section top(root, "", source);
    top.get("seed", c.seed);
    top.get("deterministic", c.deterministic);
    top.get("envs", c.envs);
    top.get("output", c.output);
    top.get("candidates_per_object", c.candidates_per_object);
    top.get("sdf_resolution", c.sdf_resolution);
    top.get("metric_samples", c.metric_samples);

    with_table(top, "solver", source, [&](Section& s) {
        s.get("dt", c.solver.dt);
        s.get("rel_tol", c.solver.rel_tol);
        s.get("max_iters", c.solver.max_iters);
        s.get("abd_stiffness", c.solver.abd_stiffness);
        std::string kind = c.solver.linear_solver == LinearSolverKind::Direct ? "direct" : "iterative";
        s.get("linear_solver", kind);
        if (kind == "direct") c.solver.linear_solver = LinearSolverKind::Direct;
        else if (kind == "iterative") c.solver.linear_solver = LinearSolverKind::Iterative;
        else s.fail("linear_solver", *s.node("linear_solver"), "expected \"direct\" or \"iterative\"");
        checked(source, s.line(), "solver", [&] { c.solver.validate(); });
    });
    with_table(top, "contact", source, [&](Section& s) {
        s.get("kappa", c.contact.kappa);
        s.get("dhat", c.contact.dhat);
        s.get("eps_v", c.contact.eps_v);
        s.get("friction_iterations", c.contact.friction_iterations);
        checked(source, s.line(), "contact", [&] { c.contact.validate(); });
    });
    with_table(top, "protocol", source, [&](Section& s) {
        auto& p = c.protocol;
        s.get("settle_duration", p.settle_duration);
        s.get("closing_speed", p.closing_speed);
        s.get("halt_force", p.halt_force);
        s.get("gravity", p.gravity);
        s.get("phase_duration", p.phase_duration);
        s.get("stability_c", p.stability_c);
        s.get("steady_steps", p.steady_steps);
        s.get("hold_cap", p.hold_cap);
        s.get("closing_cap", p.closing_cap);
        checked(source, s.line(), "protocol", [&] { p.validate(); });
    });
    with_table(top, "gripper", source, [&](Section& s) {
        auto& g = c.gripper;
        s.get("max_opening", g.max_opening);
        s.get("finger_width", g.finger_width);
        s.get("finger_length", g.finger_length);
        s.get("finger_thickness", g.finger_thickness);
        s.get("palm_thickness", g.palm_thickness);
        s.get("palm_gap", g.palm_gap);
        s.get("clearance", g.clearance);
        s.get("friction", g.friction);
        checked(source, s.line(), "gripper", [&] { g.validate(); });
    });
    with_table(top, "compose", source, [&](Section& s) {
        s.get("k", c.compose.k);
        s.get("r1", c.compose.r1);
        s.get("n_target", c.compose.n_target);
        checked(source, s.line(), "compose", [&] { c.compose.validate(); });
    });
    with_table(top, "bench", source, [&](Section& s) {
        s.get_int_list("env_counts", c.bench.env_counts);
        s.get("steps", c.bench.steps);
    });

    top.use("objects");
    if (const toml::node* n = top.node("objects")) {
        const toml::array* arr = n->as_array();
        if (!arr) top.fail("objects", *n, "expected an array of tables ([[objects]])");
        std::set<std::string> names;
        int i = 0;
        for (const auto& e : *arr) {
            const std::string prefix = "objects[" + std::to_string(i++) + "]";
            const toml::table* t = e.as_table();
            if (!t) throw ConfigError(source, static_cast<int>(e.source().begin.line), prefix, "expected a table");
            Section s(*t, prefix, source);
            ObjectSpec o;
            std::string kind = "rigid";
            int count = -1;
            s.get("name", o.name);
            s.get("shape", o.shape);
            s.get("size", o.size);
            s.get("kind", kind);
            s.get("resolution", o.resolution);
            s.get("mesh", o.mesh_path);
            s.get("young_modulus", o.material.young_modulus);
            s.get("poisson_ratio", o.material.poisson_ratio);
            s.get("density", o.material.density);
            s.get("friction", o.material.friction);
            s.get("candidates", count);
            s.finish();
            if (kind == "rigid") o.kind = ObjectKind::Rigid;
            else if (kind == "soft") o.kind = ObjectKind::Soft;
            else s.fail("kind", *s.node("kind"), "expected \"rigid\" or \"soft\"");
            if (o.shape != "cube" && o.shape != "sphere" && o.shape != "mug" && o.shape != "mesh") {
                s.fail("shape", *s.node("shape"), "expected cube, sphere, mug or mesh");
            }
            if (!names.insert(o.name).second) s.fail("name", *s.node("name"), "duplicate object name");
            checked(source, s.line(), prefix, [&] {
                o.material.validate();
                if (!(o.size > 0) || o.resolution < 1) throw Error("size and resolution must be positive");
                if (o.shape == "mesh" && o.mesh_path.empty()) throw Error("shape = \"mesh\" needs a mesh path");
            });
            c.objects.push_back(o);
            c.object_candidates.push_back(count);
        }
    }
    top.finish();
    checked(source, 0, "", [&] { c.validate(); });
    return c;
}

EngineConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw ConfigError(path.string(), 0, "", e.what());
    }
    EngineConfig c = parse_config(text, path.string());
    // Relative mesh paths resolve against the config file.
    for (auto& o : c.objects) {
        if (!o.mesh_path.empty() && std::filesystem::path(o.mesh_path).is_relative()) {
            o.mesh_path = (path.parent_path() / o.mesh_path).string();
        }
    }
    return c;
}

}  // namespace grip
