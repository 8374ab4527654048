#include "scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rrisk::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw InputError(path + ": " + what); }

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

double number(const json& j, const std::string& path) {
    // "inf" and "+inf" are accepted where infinite exponents make sense
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        fail(path, "expected a number, got \"" + s + "\"");
    }
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

double positive(const json& j, const std::string& path) {
    double v = number(j, path);
    if (!(v > 0.0)) fail(path, "must be > 0");
    return v;
}

std::size_t count(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        fail(path, "expected a non-negative integer");
    return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (!e.is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
        v.push_back(e.get<double>());
    }
    return v;
}

std::vector<std::string> names(const json& j, const std::string& path) {
    if (j.is_string()) return {j.get<std::string>()};
    if (!j.is_array()) fail(path, "expected a string or an array of strings");
    std::vector<std::string> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(text(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

const json& object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    return j;
}

// {kind, params} with the parameters either under "params" or inline
struct Descriptor {
    std::string kind;
    json params;
    std::string params_path;
};

Descriptor descriptor(const json& j, const std::string& path) {
    object(j, path);
    if (!j.contains("kind")) fail(join(path, "kind"), "missing");
    Descriptor d{text(j["kind"], join(path, "kind")), json::object(), join(path, "params")};
    if (j.contains("params")) {
        d.params = object(j["params"], d.params_path);
    } else {
        d.params_path = path;
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "kind" && it.key() != "solidified") d.params[it.key()] = it.value();
    }
    return d;
}

double param(const Descriptor& d, const std::string& key) {
    if (!d.params.contains(key)) fail(join(d.params_path, key), "missing");
    return number(d.params[key], join(d.params_path, key));
}

double param_or(const Descriptor& d, const std::string& key, double fallback) {
    return d.params.contains(key) ? number(d.params[key], join(d.params_path, key)) : fallback;
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) fail(join(path, it.key()), "unknown field");
    }
}

// Library constructors reject bad parameters with std::invalid_argument or
// std::domain_error; both become input errors at the descriptor's path.
template <class F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InputError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    } catch (const std::domain_error& e) {
        fail(path, e.what());
    }
}

std::string slurp(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(what, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& what) {
    std::vector<std::set<std::string>> keys;
    std::string dup;
    json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
        switch (ev) {
            case json::parse_event_t::object_start: keys.emplace_back(); break;
            case json::parse_event_t::object_end:
                if (!keys.empty()) keys.pop_back();
                break;
            case json::parse_event_t::key:
                if (!keys.empty() && !keys.back().insert(parsed.get<std::string>()).second && dup.empty())
                    dup = parsed.get<std::string>();
                break;
            default: break;
        }
        return true;
    };
    json j;
    try {
        j = json::parse(text, cb);
    } catch (const json::parse_error& e) {
        fail(what, std::string("malformed JSON: ") + e.what());
    }
    if (!dup.empty()) fail(what, "duplicate name \"" + dup + "\"");
    return j;
}

json read_json_file(const std::string& path, const std::string& what) {
    return parse_json_text(slurp(path, what), what);
}

Scenario scenario_from_json(const json& j) {
    object(j, "scenario");
    only_keys(j, "", {"space", "positions", "measures"});
    if (!j.contains("space")) fail("space", "missing");
    const auto& sp = object(j["space"], "space");
    only_keys(sp, "space", {"probs"});
    if (!sp.contains("probs")) fail("space.probs", "missing");
    auto probs = numbers(sp["probs"], "space.probs");

    Scenario s;
    s.space = guarded("space.probs", [&] { return make_space(probs); });
    const std::size_t n = s.space->n();

    if (!j.contains("positions")) fail("positions", "missing");
    const auto& pos = object(j["positions"], "positions");
    for (auto it = pos.begin(); it != pos.end(); ++it) {
        const std::string path = "positions." + it.key();
        auto v = numbers(it.value(), path);
        if (v.size() != n) fail(path, "length " + std::to_string(v.size()) + " does not match space size " + std::to_string(n));
        s.positions.emplace(it.key(), guarded(path, [&] { return Position(s.space, v); }));
    }
    if (j.contains("measures")) {
        const auto& ms = object(j["measures"], "measures");
        for (auto it = ms.begin(); it != ms.end(); ++it) {
            const std::string path = "measures." + it.key();
            if (s.positions.count(it.key())) fail(path, "name already used by a position");
            object(it.value(), path);
            only_keys(it.value(), path, {"density"});
            if (!it.value().contains("density")) fail(path + ".density", "missing");
            auto d = numbers(it.value()["density"], path + ".density");
            if (d.size() != n) fail(path + ".density", "length " + std::to_string(d.size()) + " does not match space size " + std::to_string(n));
            s.measures.emplace(it.key(), guarded(path + ".density", [&] { return ScenarioMeasure(s.space, d); }));
        }
    }
    return s;
}

Scenario parse_scenario(const std::string& path) { return scenario_from_json(read_json_file(path, "scenario")); }

RiskFunctional make_rho(const json& j, const std::string& path) {
    auto d = descriptor(j, path);
    const std::string kp = join(path, "kind");
    return guarded(d.params_path, [&]() -> RiskFunctional {
        if (d.kind == "neg_expectation") return neg_expectation();
        if (d.kind == "worst_case") return worst_case();
        if (d.kind == "expectation_floor") return expectation_floor(param(d, "K"));
        if (d.kind == "entropic") return entropic(param(d, "gamma"));
        if (d.kind == "q_entropic") return q_entropic(param(d, "q"), param(d, "beta"));
        if (d.kind == "expected_shortfall") return expected_shortfall(param(d, "alpha"));
        if (d.kind == "certainty_equivalent") {
            std::string loss = d.params.contains("loss") ? text(d.params["loss"], join(d.params_path, "loss"))
                                                         : "exponential";
            if (loss == "exponential") return certainty_equivalent(exponential_loss(param_or(d, "rate", 1.0)));
            if (loss == "identity") return certainty_equivalent(identity_loss());
            if (loss == "exp_linear") return certainty_equivalent(exp_linear_loss());
            fail(join(d.params_path, "loss"), "unknown loss \"" + loss + "\"");
        }
        fail(kp, "unknown risk measure \"" + d.kind + "\"");
    });
}

UncertaintyFamily make_family(const json& j, const std::string& path) {
    auto d = descriptor(j, path);
    const std::string kp = join(path, "kind");
    bool solid = false;
    if (j.contains("solidified")) {
        if (!j["solidified"].is_boolean()) fail(join(path, "solidified"), "expected a boolean");
        solid = j["solidified"].get<bool>();
    }
    auto f = guarded(d.params_path, [&]() -> UncertaintyFamily {
        if (d.kind == "sup_norm_ball") return sup_norm_ball(param(d, "eps"));
        if (d.kind == "p_norm_ball") return p_norm_ball(param(d, "p"), param(d, "eps"));
        if (d.kind == "wasserstein_ball") return wasserstein_ball(param(d, "p"), param(d, "eps"));
        if (d.kind == "level_band" || d.kind == "level_upper_set") {
            if (!d.params.contains("rho1")) fail(join(d.params_path, "rho1"), "missing");
            auto rho1 = make_rho(d.params["rho1"], join(d.params_path, "rho1"));
            double eps = param(d, "eps");
            return d.kind == "level_band" ? level_band(rho1, eps) : level_upper_set(rho1, eps);
        }
        fail(kp, "unknown family \"" + d.kind + "\"");
    });
    return solid ? solidify(f) : f;
}

Axiom axiom_from_string(const std::string& s) {
    for (auto a : {Axiom::Monotone, Axiom::Convex, Axiom::QuasiConvex, Axiom::CashAdditive, Axiom::CashSubadditive,
                   Axiom::LawInvariant, Axiom::ContinuousFromAbove})
        if (to_string(a) == s) return a;
    throw std::invalid_argument("unknown axiom: " + s);
}

RunConfig config_from_json(const json& j) {
    object(j, "config");
    only_keys(j, "", {"rho", "family", "solver", "tolerances", "grid", "seed", "trials", "positions", "level",
                      "aggregate", "partition", "representation", "property", "target"});
    RunConfig c;
    if (j.contains("rho")) {
        make_rho(j["rho"], "rho");  // validate now, build again per run
        c.rho = j["rho"];
    }
    if (j.contains("family")) {
        make_family(j["family"], "family");
        c.family = j["family"];
    }
    if (j.contains("solver")) {
        auto d = descriptor(j["solver"], "solver");
        try {
            c.solver.kind = solver_kind_from_string(d.kind);
        } catch (const std::invalid_argument& e) {
            fail("solver.kind", e.what());
        }
        only_keys(d.params, d.params_path, {"resolution", "budget", "restarts", "max_iterations", "min_step"});
        if (d.params.contains("resolution")) c.solver.resolution = positive(d.params["resolution"], join(d.params_path, "resolution"));
        if (d.params.contains("budget")) c.solver.budget = count(d.params["budget"], join(d.params_path, "budget"));
        if (d.params.contains("restarts")) c.solver.restarts = count(d.params["restarts"], join(d.params_path, "restarts"));
        if (d.params.contains("max_iterations")) c.solver.max_iterations = count(d.params["max_iterations"], join(d.params_path, "max_iterations"));
        if (d.params.contains("min_step")) c.solver.min_step = positive(d.params["min_step"], join(d.params_path, "min_step"));
    }
    if (j.contains("tolerances")) {
        const auto& t = object(j["tolerances"], "tolerances");
        only_keys(t, "tolerances", {"analytic", "grid"});
        if (t.contains("analytic")) c.tol_analytic = positive(t["analytic"], "tolerances.analytic");
        if (t.contains("grid")) c.tol_grid = positive(t["grid"], "tolerances.grid");
    }
    if (j.contains("grid")) {
        const auto& g = object(j["grid"], "grid");
        only_keys(g, "grid", {"simplex_step", "box_bound", "lattice_step"});
        if (g.contains("simplex_step")) c.simplex_step = positive(g["simplex_step"], "grid.simplex_step");
        if (c.simplex_step > 1.0) fail("grid.simplex_step", "must be <= 1");
        if (g.contains("box_bound")) c.box_bound = positive(g["box_bound"], "grid.box_bound");
        if (g.contains("lattice_step")) c.lattice_step = positive(g["lattice_step"], "grid.lattice_step");
    }
    if (j.contains("seed")) c.seed = count(j["seed"], "seed");
    if (j.contains("trials")) c.trials = count(j["trials"], "trials");
    if (j.contains("positions")) c.positions = names(j["positions"], "positions");
    if (j.contains("level")) c.level = number(j["level"], "level");
    if (j.contains("aggregate")) c.aggregate = text(j["aggregate"], "aggregate");
    if (j.contains("partition")) c.partition = names(j["partition"], "partition");
    if (j.contains("representation")) c.representations = names(j["representation"], "representation");
    if (j.contains("property")) c.properties = names(j["property"], "property");
    if (j.contains("target")) {
        c.target = text(j["target"], "target");
        if (c.target != "family" && c.target != "rho" && c.target != "robust")
            fail("target", "expected \"family\", \"rho\" or \"robust\"");
    }
    c.solver.seed = c.seed;
    return c;
}

RunConfig parse_config(const std::string& path) { return config_from_json(read_json_file(path, "config")); }

}  // namespace rrisk::cli
