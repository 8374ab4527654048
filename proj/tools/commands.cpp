#include "commands.hpp"

#include <cmath>

#include "rrisk/acceptance.hpp"
#include "rrisk/allocation.hpp"
#include "rrisk/duality.hpp"
#include "rrisk/robustify.hpp"

namespace rrisk::cli {

namespace {

using Named = std::pair<std::string, Position>;

RiskFunctional need_rho(const RunConfig& c) {
    if (!c.rho) throw InputError("rho: missing");
    return make_rho(*c.rho, "rho");
}

UncertaintyFamily need_family(const RunConfig& c) {
    if (!c.family) throw InputError("family: missing");
    return make_family(*c.family, "family");
}

const Position& position_named(const Scenario& s, const std::string& name, const std::string& path) {
    auto it = s.positions.find(name);
    if (it == s.positions.end()) throw InputError(path + ": unknown position \"" + name + "\"");
    return it->second;
}

std::vector<Named> selected(const RunConfig& c, const Scenario& s) {
    std::vector<Named> out;
    if (c.positions.empty()) {
        for (const auto& [k, v] : s.positions) out.emplace_back(k, v);
    } else {
        for (const auto& k : c.positions) out.emplace_back(k, position_named(s, k, "positions"));
    }
    return out;
}

json measure_json(const ScenarioMeasure& q) {
    return {{"density", to_json(q.density())}, {"probabilities", to_json(q.probabilities())}};
}

json robust_json(const RobustValue& r) {
    json j = {{"value", to_json(r.value)},
              {"solver", to_string(r.solver)},
              {"guarantee", to_string(r.guarantee)},
              {"detail", r.detail}};
    j["witness"] = r.witness ? to_json(r.witness->values()) : json(nullptr);
    return j;
}

SimplexGrid grid_for(const RunConfig& c, const Scenario& s) { return SimplexGrid::make(s.space, c.simplex_step, 2000, c.seed); }

DualOptions dual_options(const RunConfig& c) {
    DualOptions o;
    o.solver = c.solver;
    o.penalty.bound = c.box_bound;
    o.penalty.step = c.lattice_step;
    o.seed = c.seed;
    return o;
}

AcceptanceOptions acceptance_options(const RunConfig& c) {
    AcceptanceOptions o;
    o.solver = c.solver;
    o.seed = c.seed;
    return o;
}

Report eval(const RunConfig& c, const Scenario& s) {
    Report r;
    auto rho = need_rho(c);
    std::optional<UncertaintyFamily> family;
    if (c.family) family = make_family(*c.family, "family");
    r.columns = {"position", "rho"};
    if (family) r.columns.insert(r.columns.end(), {"robust", "guarantee"});
    r.body["rho"] = rho.name();
    if (family) r.body["family"] = family->name();
    json results = json::array();
    for (const auto& [name, x] : selected(c, s)) {
        ExtReal v = rho(x);
        json e = {{"position", name}, {"rho", to_json(v)}};
        std::vector<json> row{name, to_json(v)};
        if (family) {
            auto rv = robust_value(rho, *family, x, c.solver);
            e["robust"] = robust_json(rv);
            row.push_back(to_json(rv.value));
            row.push_back(to_string(rv.guarantee));
        }
        results.push_back(e);
        r.rows.push_back(row);
    }
    r.body["results"] = results;
    return r;
}

Report robustify(const RunConfig& c, const Scenario& s) {
    Report r;
    auto rho = need_rho(c);
    auto family = need_family(c);
    r.columns = {"position", "rho", "robust", "solver", "guarantee"};
    r.body["rho"] = rho.name();
    r.body["family"] = family.name();
    json results = json::array();
    for (const auto& [name, x] : selected(c, s)) {
        auto rv = robust_value(rho, family, x, c.solver);
        json e = robust_json(rv);
        e["position"] = name;
        e["rho"] = to_json(rho(x));
        results.push_back(e);
        r.rows.push_back({name, to_json(rho(x)), to_json(rv.value), to_string(rv.solver), to_string(rv.guarantee)});
    }
    r.body["results"] = results;
    return r;
}

json gap_json(const GapReport& g) {
    json j = {{"representation", g.representation},
              {"primal", to_json(g.primal)},
              {"dual", to_json(g.dual)},
              {"gap", to_json(g.gap)},
              {"tolerance", to_json(g.tolerance())},
              {"within_tolerance", g.within_tolerance()},
              {"step", g.step},
              {"grid_points", g.grid_points},
              {"closed_form", g.closed_form},
              {"primal_guarantee", to_string(g.primal_guarantee)},
              {"note", g.note}};
    j["argmax"] = g.argmax ? measure_json(*g.argmax) : json(nullptr);
    return j;
}

Report dual_check(const RunConfig& c, const Scenario& s) {
    Report r;
    auto rho = need_rho(c);
    std::optional<UncertaintyFamily> family;
    if (c.family) family = make_family(*c.family, "family");
    std::vector<std::string> reps;
    for (const auto& k : c.representations) {
        if (k == "all") {
            reps.insert(reps.end(), {"primal", "robust", "convex_cash_additive", "second_approach"});
            if (family && family->kind() == FamilyKind::WassersteinBall) reps.push_back("wasserstein_bound");
        } else if (k == "primal" || k == "robust" || k == "convex_cash_additive" || k == "second_approach" ||
                   k == "wasserstein_bound") {
            reps.push_back(k);
        } else {
            throw InputError("representation: unknown representation \"" + k + "\"");
        }
    }
    for (const auto& k : reps)
        if (k != "primal" && !family) throw InputError("family: missing (needed by representation " + k + ")");

    const auto grid = grid_for(c, s);
    const auto opts = dual_options(c);
    r.columns = {"position", "representation", "primal", "dual", "gap", "ok"};
    r.body["rho"] = rho.name();
    if (family) r.body["family"] = family->name();
    r.body["simplex_step"] = c.simplex_step;
    json results = json::array();
    for (const auto& [name, x] : selected(c, s)) {
        for (const auto& k : reps) {
            try {
                if (k == "wasserstein_bound") {
                    if (family->kind() != FamilyKind::WassersteinBall || family->solidified())
                        throw HypothesisError("hypothesis violation: wasserstein_bound needs a Wasserstein ball");
                    auto w = wasserstein_bound_check(rho, family->eps(), family->p(), x, grid, c.solver);
                    json e = {{"position", name},
                              {"representation", k},
                              {"lhs", to_json(w.lhs)},
                              {"rhs", to_json(w.rhs)},
                              {"holds", w.holds},
                              {"attained", w.attained},
                              {"lhs_guarantee", to_string(w.lhs_guarantee)},
                              {"note", w.note}};
                    e["q_star"] = w.q_star ? measure_json(*w.q_star) : json(nullptr);
                    results.push_back(e);
                    r.rows.push_back({name, k, to_json(w.lhs), to_json(w.rhs), json(nullptr), w.holds ? "yes" : "NO"});
                    if (!w.holds) r.counterexample = true;
                    continue;
                }
                GapReport g = k == "primal"                 ? verify_primal_dual(rho, x, grid, opts)
                              : k == "robust"               ? verify_robust_dual(rho, *family, x, grid, opts)
                              : k == "convex_cash_additive" ? verify_convex_cash_additive_dual(rho, *family, x, grid, opts)
                                                            : verify_second_approach_dual(rho, *family, x, grid, opts);
                json e = gap_json(g);
                e["position"] = name;
                e["representation"] = k;
                results.push_back(e);
                r.rows.push_back({name, k, to_json(g.primal), to_json(g.dual), to_json(g.gap),
                                  g.within_tolerance() ? "yes" : "NO"});
                if (!g.within_tolerance()) r.counterexample = true;
            } catch (const HypothesisError& e) {
                r.warn(name + "/" + k, e.what());
            }
        }
    }
    r.body["results"] = results;
    return r;
}

Report acceptance(const RunConfig& c, const Scenario& s) {
    Report r;
    auto rho = need_rho(c);
    if (!c.level) throw InputError("level: missing");
    const double m = *c.level;
    std::optional<UncertaintyFamily> family;
    if (c.family) family = make_family(*c.family, "family");
    const auto opts = acceptance_options(c);
    r.columns = {"position", "rho", "acceptable", "level"};
    if (family) r.columns.insert(r.columns.end(), {"robust", "robust_acceptable", "sets_agree", "robust_level"});
    r.body["rho"] = rho.name();
    r.body["level"] = m;
    if (family) r.body["family"] = family->name();
    json results = json::array();
    for (const auto& [name, x] : selected(c, s)) {
        const ExtReal v = rho(x);
        json e = {{"position", name}, {"rho", to_json(v)}, {"acceptable", is_acceptable(rho, x, ExtReal(m))}};
        std::vector<json> row{name, to_json(v), e["acceptable"].get<bool>() ? "yes" : "no"};
        try {
            e["acceptance_level"] = acceptance_level(rho, x);
        } catch (const BracketError& err) {
            e["acceptance_level"] = nullptr;
            r.warn(name + "/acceptance_level", err.what());
        }
        row.push_back(e["acceptance_level"]);
        if (family) {
            try {
                auto ra = robust_acceptance_check(rho, *family, x, ExtReal(m), opts);
                e["robust"] = {{"x_in_robust_set", ra.x_in_robust},
                               {"family_inside_acceptance_set", ra.U_subset_A},
                               {"agree", ra.agree},
                               {"robust_value", to_json(ra.robust)},
                               {"sup_over_family", to_json(ra.sup_over_family)},
                               {"guarantee", to_string(ra.guarantee)}};
                row.push_back(to_json(ra.robust));
                row.push_back(ra.x_in_robust ? "yes" : "no");
                row.push_back(ra.agree ? "yes" : "NO");
                json levels = json::object();
                levels["subsets"] = robust_level_by_sets(rho, *family, x, std::nullopt, opts, LevelForm::Subsets);
                if (rho.flags().cash_additive)
                    levels["shifted_zero_level"] =
                        robust_level_by_sets(rho, *family, x, std::nullopt, opts, LevelForm::ShiftedZeroLevel);
                e["robust"]["level"] = levels;
                row.push_back(levels["subsets"]);
            } catch (const HypothesisError& err) {
                r.warn(name + "/robust", err.what());
            } catch (const BracketError& err) {
                r.warn(name + "/robust_level", err.what());
            }
            while (row.size() < r.columns.size()) row.push_back(nullptr);
        }
        results.push_back(e);
        r.rows.push_back(row);
    }
    r.body["results"] = results;
    return r;
}

Report allocate(const RunConfig& c, const Scenario& s) {
    Report r;
    auto rho = need_rho(c);
    std::optional<UncertaintyFamily> family;
    if (c.family) family = make_family(*c.family, "family");
    const Position& y = position_named(s, c.aggregate, "aggregate");
    std::vector<Named> parts;
    for (const auto& k : c.partition) parts.emplace_back(k, position_named(s, k, "partition"));
    if (!parts.empty()) {
        Position total = Position::constant(s.space, 0.0);
        for (const auto& [k, p] : parts) total += p;
        for (std::size_t i = 0; i < y.n(); ++i)
            if (std::fabs(total[i] - y[i]) > 1e-9 * (1.0 + std::fabs(y[i])))
                throw InputError("partition: parts do not sum to " + c.aggregate);
    }
    r.body["rho"] = rho.name();
    r.body["aggregate"] = c.aggregate;
    if (family) r.body["family"] = family->name();
    r.columns = {"position", "allocation"};
    if (family) r.columns.push_back("robust_allocation");

    const auto grid = grid_for(c, s);
    std::optional<AllocationRule> rule;
    try {
        rule = gradient_car(rho, grid);
    } catch (const HypothesisError& e) {
        r.warn("rule", e.what());
        return r;
    }
    auto slice = *rule->linear(y);
    r.body["rule"] = rule->name();
    r.body["q_star"] = measure_json(slice.q);
    r.body["q_star_attained"] = slice.attained;
    r.body["penalty_constant"] = slice.constant;
    r.body["rho_aggregate"] = to_json(rho(y));

    auto line = [&](const std::string& name, const Position& x) {
        json e = {{"position", name}, {"allocation", to_json((*rule)(x, y))}};
        std::vector<json> row{name, e["allocation"]};
        if (family) {
            auto rv = robust_car(*rule, *family, x, y, c.solver);
            e["robust_allocation"] = robust_json(rv);
            row.push_back(to_json(rv.value));
        }
        r.rows.push_back(row);
        return e;
    };
    r.body["aggregate_allocation"] = line(c.aggregate, y);
    json part_json = json::array();
    ExtReal sum(0.0);
    for (const auto& [k, p] : parts) {
        part_json.push_back(line(k, p));
        sum = sum + (*rule)(p, y);
    }
    r.body["parts"] = part_json;
    if (!parts.empty()) r.body["sum_of_parts"] = to_json(sum);
    if (family) {
        r.body["robust_rho_aggregate"] = robust_json(robust_value(rho, *family, y, c.solver));
        if (!parts.empty()) {
            Partition inst{y, {}};
            for (const auto& [k, p] : parts) inst.parts.push_back(p);
            auto v = check_subadditive_allocation(*rule, *family, {inst}, c.solver, c.seed);
            r.body["sub_allocation"] = to_json(v);
            if (v.is_counterexample()) r.counterexample = true;
            if (v.tag == PropertyVerdict::Tag::Unknown) r.warn("sub_allocation", v.note);
        }
    }
    return r;
}

Report properties(const RunConfig& c, const Scenario& s) {
    (void)s;
    Report r;
    if (c.properties.empty()) throw InputError("property: missing");
    const std::string target = !c.target.empty() ? c.target : (c.family ? "family" : "rho");
    r.body["target"] = target;
    r.body["seed"] = c.seed;
    r.body["trials"] = c.trials;
    r.columns = {"property", "verdict", "trials", "note"};
    json results = json::array();
    for (const auto& name : c.properties) {
        json e;
        PropertyVerdict v;
        if (target == "family") {
            auto family = need_family(c);
            FamilyProperty p;
            try {
                p = family_property_from_string(name);
            } catch (const std::invalid_argument& err) {
                throw InputError(std::string("property: ") + err.what());
            }
            v = check_property(family, p, c.trials, c.seed);
            e = to_json(v);
            e["family"] = family.name();
            if (v.is_counterexample()) e["replays"] = replay_counterexample(family, p, v.witness);
        } else {
            auto rho = need_rho(c);
            Axiom a;
            try {
                a = axiom_from_string(name);
            } catch (const std::invalid_argument& err) {
                throw InputError(std::string("property: ") + err.what());
            }
            if (target == "rho") {
                v = check_axiom(rho, a, c.trials, c.seed, c.tol_analytic);
                e = to_json(v);
                e["declared"] = has_flag(rho.flags(), a);
            } else {
                v = verify_preservation(rho, need_family(c), a, c.trials, c.seed, c.solver);
                e = to_json(v);
                e["family"] = need_family(c).name();
            }
            e["rho"] = rho.name();
        }
        e["property"] = name;
        results.push_back(e);
        r.rows.push_back({name, to_string(v.tag), v.trials, v.note});
        if (v.is_counterexample()) r.counterexample = true;
    }
    r.body["results"] = results;
    return r;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"eval", "robustify", "dual-check", "acceptance", "allocate", "properties"};
    return names;
}

Report run(const std::string& subcommand, const RunConfig& config, const Scenario& scenario) {
    Report r;
    if (subcommand == "eval") r = eval(config, scenario);
    else if (subcommand == "robustify") r = robustify(config, scenario);
    else if (subcommand == "dual-check") r = dual_check(config, scenario);
    else if (subcommand == "acceptance") r = acceptance(config, scenario);
    else if (subcommand == "allocate") r = allocate(config, scenario);
    else if (subcommand == "properties") r = properties(config, scenario);
    else throw InputError("subcommand: unknown subcommand \"" + subcommand + "\"");
    r.command = subcommand;
    return r;
}

}  // namespace rrisk::cli
