#include "traitlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "traitlab/analysis.hpp"
#include "traitlab/assumptions.hpp"
#include "traitlab/config.hpp"
#include "traitlab/ensemble.hpp"
#include "traitlab/errors.hpp"
#include "traitlab/exponent.hpp"
#include "traitlab/hj.hpp"
#include "traitlab/io.hpp"
#include "traitlab/mean_field.hpp"
#include "traitlab/moments.hpp"
#include "traitlab/simulate.hpp"
#include "traitlab/version.hpp"

namespace traitlab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed_override = 0;
    unsigned workers_override = 0;
    std::string out_override;
    bool force = false;
    bool verify = false;
};

struct Context {
    ExperimentConfig cfg;
    OutputMeta meta;
    unsigned workers = 1;
    bool force = false;
    bool verify = false;
    std::string out_dir;
    std::vector<std::string> written;
};

unsigned env_workers() {
    const char* v = std::getenv("TRAITLAB_WORKERS");
    if (!v) return 1;
    int n = std::atoi(v);
    return n > 0 ? static_cast<unsigned>(n) : 1;
}

Context make_context(const CommonArgs& args, const std::string& command) {
    ExperimentConfig cfg = ExperimentConfig::parse_file(args.config_path);
    json doc = cfg.doc();
    if (args.seed_override != 0) doc["run"]["base_seed"] = args.seed_override;
    if (args.workers_override != 0) doc["run"]["workers"] = args.workers_override;
    if (!args.out_override.empty()) doc["outputs"]["dir"] = args.out_override;
    cfg = ExperimentConfig::from_json(std::move(doc));

    Context ctx{std::move(cfg), {}, 1, args.force, args.verify, "", {}};
    ctx.meta.command = command;
    ctx.meta.config_hash = ctx.cfg.hash();
    ctx.meta.base_seed = ctx.cfg.base_seed();
    ctx.workers = ctx.cfg.workers() > 0 ? ctx.cfg.workers() : env_workers();
    ctx.out_dir = ctx.cfg.output_dir();
    return ctx;
}

std::string out_path(const Context& ctx, const std::string& name) {
    return (fs::path(ctx.out_dir) / name).string();
}

int finish(Context& ctx) {
    if (!ctx.verify) return 0;
    bool ok = true;
    for (const auto& f : ctx.written) {
        VerifyResult r = verify_output_file(f, ctx.meta.config_hash);
        std::cout << (r.ok ? "[verified] " : "[VERIFY FAILED] ") << r.detail << "\n";
        ok = ok && r.ok;
    }
    return ok ? 0 : 4;
}

std::optional<RegimeTag> declared_tag(const ExperimentConfig& cfg) {
    std::string r = cfg.declared_regime();
    if (r == "subcritical") return RegimeTag::subcritical;
    if (r == "supercritical") return RegimeTag::supercritical;
    return std::nullopt;
}

AssumptionReport run_check(const ExperimentConfig& cfg, const Model& model) {
    std::vector<double> u0;
    if (cfg.has_u0()) u0 = cfg.u0_samples(model.grid);
    return verify_assumptions(model, u0, declared_tag(cfg));
}

void write_check_report(Context& ctx, const AssumptionReport& rep) {
    JsonlWriter out(out_path(ctx, "check.jsonl"), ctx.meta);
    for (const auto& e : rep.entries) {
        json j{{"id", e.id},       {"pass", e.pass},     {"required", e.required},
               {"measured", e.measured}, {"detail", e.detail}};
        out.record(j.dump());
    }
    json summary{{"regime", regime_name(rep.regime.tag)},
                 {"alpha", rep.regime.alpha},
                 {"lipschitz", rep.lipschitz},
                 {"decay_a1", rep.decay_a1},
                 {"decay_a2", rep.decay_a2},
                 {"growth_a", rep.growth_a},
                 {"growth_b", rep.growth_b},
                 {"c_a", rep.c_a},
                 {"initial_min", rep.initial_min},
                 {"all_required_pass", rep.all_required_pass}};
    out.record(summary.dump());
    out.close();
    ctx.written.push_back(out_path(ctx, "check.jsonl"));
}

// Gate shared by every command except check itself.
void gate_assumptions(Context& ctx, const Model& model) {
    AssumptionReport rep = run_check(ctx.cfg, model);
    if (!rep.all_required_pass && !ctx.force) {
        std::string bad;
        for (const auto& e : rep.entries) {
            if (e.required && !e.pass) bad += " " + e.id;
        }
        throw AssumptionError("required assumptions failed:" + bad +
                              " (run `traitlab check` for details or pass --force)");
    }
}

int cmd_check(const CommonArgs& args) {
    Context ctx = make_context(args, "check");
    Model model = ctx.cfg.model();
    AssumptionReport rep = run_check(ctx.cfg, model);
    for (const auto& e : rep.entries) {
        std::cout << (e.pass ? "[PASS] " : "[FAIL] ") << e.id
                  << (e.required ? "" : " (informational)") << ": " << e.detail << "\n";
    }
    std::cout << "regime: " << regime_name(rep.regime.tag) << " (alpha = " << rep.regime.alpha
              << ")\n";
    write_check_report(ctx, rep);
    int vr = finish(ctx);
    if (vr != 0) return vr;
    return rep.all_required_pass ? 0 : 2;
}

// Collects whole trajectories (small runs only).
struct TrajectoryCollector {
    std::vector<std::pair<std::uint64_t, Trajectory>> rows;
    void merge(const TrajectoryCollector& o) {
        rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    }
};

int cmd_simulate(const CommonArgs& args) {
    Context ctx = make_context(args, "simulate");
    Model model = ctx.cfg.model();
    gate_assumptions(ctx, model);

    std::vector<double> n0 = ctx.cfg.initial_mean(model.grid);
    SimOptions sim;
    sim.observation_times = ctx.cfg.observation_times();
    sim.boundary = ctx.cfg.boundary();
    sim.max_population = ctx.cfg.max_population();
    InitialMode mode = ctx.cfg.initial_mode();
    std::uint64_t reps = ctx.cfg.replicates();
    const std::size_t w = model.width();

    bool cross = w <= 16;
    MomentAccumulator proto(sim.observation_times.size(), w, true, cross);
    auto body = [&](std::uint64_t, std::uint64_t seed, MomentAccumulator& acc) {
        PopulationState st = sample_initial(n0, mode, derive_stream(seed, 0));
        acc.add(simulate_exact(model, st, sim, derive_stream(seed, 1)));
    };
    MomentAccumulator acc =
        run_blocks(reps, ctx.cfg.base_seed(), ctx.workers, 64, body, proto);

    TableWriter table(out_path(ctx, "summary.csv"), ctx.meta,
                      {"time", "site", "x", "mean", "mean_se", "variance", "variance_se"});
    for (std::size_t t = 0; t < sim.observation_times.size(); ++t) {
        for (std::size_t i = 0; i < w; ++i) {
            table.row({sim.observation_times[t], static_cast<double>(model.grid.index_of(i)),
                       model.grid.x_at(i), acc.mean(t, i), acc.mean_se(t, i),
                       acc.variance(t, i), acc.variance_se(t, i)});
        }
    }
    table.close();
    ctx.written.push_back(out_path(ctx, "summary.csv"));

    if (reps <= 64) {
        TrajectoryCollector tproto;
        auto tbody = [&](std::uint64_t rep, std::uint64_t seed, TrajectoryCollector& c) {
            PopulationState st = sample_initial(n0, mode, derive_stream(seed, 0));
            c.rows.emplace_back(rep, simulate_exact(model, st, sim, derive_stream(seed, 1)));
        };
        TrajectoryCollector coll =
            run_blocks(reps, ctx.cfg.base_seed(), ctx.workers, 64, tbody, tproto);
        std::sort(coll.rows.begin(), coll.rows.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        TableWriter traj(out_path(ctx, "trajectories.csv"), ctx.meta,
                         {"replicate", "time", "site", "count"});
        for (const auto& [rep, tr] : coll.rows) {
            for (std::size_t t = 0; t < tr.times.size(); ++t) {
                for (std::size_t i = 0; i < w; ++i) {
                    traj.row({static_cast<double>(rep), tr.times[t],
                              static_cast<double>(model.grid.index_of(i)),
                              static_cast<double>(tr.counts[t][i])});
                }
            }
        }
        traj.close();
        ctx.written.push_back(out_path(ctx, "trajectories.csv"));
    }

    JsonlWriter meta(out_path(ctx, "ensemble.jsonl"), ctx.meta);
    json j{{"replicates", acc.replicates()},
           {"boundary_leak_total", acc.total_boundary_leak()},
           {"sites", w},
           {"observation_times", sim.observation_times}};
    meta.record(j.dump());
    meta.close();
    ctx.written.push_back(out_path(ctx, "ensemble.jsonl"));
    return finish(ctx);
}

int cmd_mean(const CommonArgs& args) {
    Context ctx = make_context(args, "mean");
    Model model = ctx.cfg.model();
    gate_assumptions(ctx, model);

    std::vector<double> n0 = ctx.cfg.initial_mean(model.grid);
    std::vector<double> obs = ctx.cfg.observation_times();
    OdeOptions ode;
    ode.rtol = 1e-8;
    ode.atol = 1e-12;
    MeanFieldResult mf = integrate_mean(model, n0, obs, ode, ctx.cfg.boundary());

    TableWriter mean_csv(out_path(ctx, "mean.csv"), ctx.meta, {"time", "site", "x", "n"});
    for (std::size_t t = 0; t < mf.series.times.size(); ++t) {
        for (std::size_t i = 0; i < model.width(); ++i) {
            mean_csv.row({mf.series.times[t], static_cast<double>(model.grid.index_of(i)),
                          model.grid.x_at(i), mf.series.at(t, i)});
        }
    }
    mean_csv.close();
    ctx.written.push_back(out_path(ctx, "mean.csv"));

    JsonlWriter meta(out_path(ctx, "mean.jsonl"), ctx.meta);
    json j{{"leak_mass", mf.leak_mass}, {"steps_accepted", mf.steps_accepted}};
    meta.record(j.dump());

    if (ctx.cfg.has_u0()) {
        std::vector<double> u0 = ctx.cfg.u0_samples(model.grid);
        std::vector<double> rescaled(obs.size());
        for (std::size_t k = 0; k < obs.size(); ++k) rescaled[k] = obs[k] / model.grid.log_k;
        FieldSeries ue = integrate_exponent(model, u0, rescaled, ode);
        TableWriter ecsv(out_path(ctx, "exponent.csv"), ctx.meta,
                         {"t_rescaled", "site", "x", "u"});
        for (std::size_t t = 0; t < ue.times.size(); ++t) {
            for (std::size_t i = 0; i < model.width(); ++i) {
                ecsv.row({ue.times[t], static_cast<double>(model.grid.index_of(i)),
                          model.grid.x_at(i), ue.at(t, i)});
            }
        }
        ecsv.close();
        ctx.written.push_back(out_path(ctx, "exponent.csv"));
    }

    if (ctx.cfg.with_moments()) {
        MomentOptions mo;
        MomentInitStyle style = ctx.cfg.initial_mode() == InitialMode::poisson
                                    ? MomentInitStyle::poisson
                                    : MomentInitStyle::deterministic;
        MomentSeries ms = integrate_second_moments(model, n0, style, obs, mo);
        TableWriter mcsv(out_path(ctx, "moments.csv"), ctx.meta,
                         {"time", "site", "mean", "variance", "y_norm", "s2_norm"});
        for (std::size_t t = 0; t < ms.times.size(); ++t) {
            for (std::size_t i = 0; i < model.width(); ++i) {
                mcsv.row({ms.times[t], static_cast<double>(model.grid.index_of(i)),
                          ms.m(t, i), ms.variance(t, i), ms.y_norm(t, i), ms.s2_norm(t, i)});
            }
        }
        mcsv.close();
        ctx.written.push_back(out_path(ctx, "moments.csv"));

        Regime reg = classify_regime(model.rates);
        if (reg.tag != RegimeTag::mixed) {
            BoundReport br = reg.tag == RegimeTag::subcritical
                                 ? check_variance_bound_subcritical(model, ms)
                                 : check_variance_bound_supercritical(model, ms,
                                                                      ctx.cfg.a_exponent());
            JsonlWriter bounds(out_path(ctx, "bounds.jsonl"), ctx.meta);
            json hdr{{"kind", br.kind},          {"alpha", br.alpha},
                     {"eps_k", br.eps_k},        {"c_bracket", br.c_bracket},
                     {"initial_sup", br.initial_sup}, {"min_margin", br.min_margin},
                     {"satisfied", br.satisfied()}};
            bounds.record(hdr.dump());
            for (const auto& row : br.rows) {
                json rj{{"t", row.t}, {"site", row.site}, {"lhs", row.lhs},
                        {"rhs", row.rhs}, {"margin", row.margin}};
                bounds.record(rj.dump());
            }
            bounds.close();
            ctx.written.push_back(out_path(ctx, "bounds.jsonl"));
        }
    }
    meta.close();
    ctx.written.push_back(out_path(ctx, "mean.jsonl"));
    return finish(ctx);
}

HjOptions hj_options_from(const ExperimentConfig& cfg) {
    if (!cfg.doc().contains("hj")) throw ConfigError("config: section 'hj' required");
    const json& h = cfg.doc().at("hj");
    HjOptions opt;
    opt.x_lo = h.at("x_lo").get<double>();
    opt.x_hi = h.at("x_hi").get<double>();
    opt.dx = h.value("dx", 0.01);
    opt.out_times = h.at("out_times").get<std::vector<double>>();
    std::string scheme = h.value("scheme", std::string("cross"));
    if (scheme == "cross") opt.scheme = HjScheme::cross_validated;
    else if (scheme == "local") opt.scheme = HjScheme::local_upwind;
    else if (scheme == "nonlocal") opt.scheme = HjScheme::nonlocal_exponential;
    else throw ConfigError("config: hj.scheme must be cross, local or nonlocal");
    opt.ref_tol = h.value("ref_tol", 0.02);
    opt.max_refine = h.value("max_refine", 2);
    opt.pad = h.value("pad", -1.0);
    opt.nl_sharpness = h.value("nl_sharpness", 28.0);
    opt.fixed_dt = h.value("fixed_dt", 0.0);
    return opt;
}

int cmd_hj(const CommonArgs& args) {
    Context ctx = make_context(args, "hj");
    Model model = ctx.cfg.model();
    gate_assumptions(ctx, model);

    HjOptions opt = hj_options_from(ctx.cfg);
    HjProblem pb = make_hj_problem(model, ctx.cfg.u0());
    HjSolution sol = solve_hj(pb, opt);

    TableWriter ucsv(out_path(ctx, "hj.csv"), ctx.meta, {"t", "x", "u"});
    for (std::size_t t = 0; t < sol.times.size(); ++t) {
        for (std::size_t j = 0; j < sol.xs.size(); ++j) {
            ucsv.row({sol.times[t], sol.xs[j], sol.u[t][j]});
        }
    }
    ucsv.close();
    ctx.written.push_back(out_path(ctx, "hj.csv"));

    CutoffSolution cut = apply_cutoff(sol);
    TableWriter ccsv(out_path(ctx, "cutoff.csv"), ctx.meta, {"t", "x", "tag", "value"});
    for (std::size_t t = 0; t < cut.times.size(); ++t) {
        for (std::size_t j = 0; j < cut.xs.size(); ++j) {
            ccsv.row({cut.times[t], cut.xs[j], static_cast<double>(cut.tag[t][j]),
                      cut.tag[t][j] == 0 ? cut.value[t][j] : 0.0});
        }
    }
    ccsv.close();
    ctx.written.push_back(out_path(ctx, "cutoff.csv"));

    LipschitzReport lip = lipschitz_report(pb, sol);
    JsonlWriter meta(out_path(ctx, "hj.jsonl"), ctx.meta);
    json hdr{{"scheme", sol.scheme_tag},
             {"error_estimate", sol.error_estimate},
             {"cross_gap", sol.cross_gap},
             {"refine_deltas_local", sol.refine_deltas_local},
             {"refine_deltas_nonlocal", sol.refine_deltas_nonlocal},
             {"pad", sol.pad},
             {"band_tol", cut.band_tol},
             {"lipschitz_space", lip.space_sup},
             {"lipschitz_time", lip.time_measured},
             {"lipschitz_time_cap", lip.time_cap}};
    meta.record(hdr.dump());
    for (double t : sol.times) {
        SurvivalSet s = survival_set(sol, t);
        json intervals = json::array();
        for (auto& [a, b] : s.intervals) intervals.push_back(json::array({a, b}));
        json rec{{"t", t}, {"survival_intervals", intervals}};
        meta.record(rec.dump());
    }
    meta.close();
    ctx.written.push_back(out_path(ctx, "hj.jsonl"));
    return finish(ctx);
}

// Per-site count collection for the plot bundle.
struct CountsCollector {
    std::vector<std::vector<std::int64_t>> rows;
    void merge(const CountsCollector& o) {
        rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    }
};

int cmd_compare(const CommonArgs& args) {
    Context ctx = make_context(args, "compare");
    Model base_model = ctx.cfg.model();
    gate_assumptions(ctx, base_model);
    if (!ctx.cfg.doc().contains("compare")) {
        throw ConfigError("config: section 'compare' required");
    }
    const json& cj = ctx.cfg.doc().at("compare");
    Regime reg = classify_regime(base_model.rates);

    std::vector<double> ladder;
    if (cj.contains("log_k_list")) ladder = cj.at("log_k_list").get<std::vector<double>>();
    else ladder = {ctx.cfg.log_k()};
    ModelFactory factory = [&](double lk) { return ctx.cfg.model(lk); };

    if (reg.tag == RegimeTag::subcritical) {
        HjOptions hopt = hj_options_from(ctx.cfg);
        HjProblem pb = make_hj_problem(base_model, ctx.cfg.u0());
        HjSolution ref = solve_hj(pb, hopt);

        SurvivalExtinctionParams params;
        params.log_k_list = ladder;
        params.t = cj.value("t", 1.0);
        params.eta = cj.value("eta", 0.15);
        for (auto& c : cj.at("survival_compacts")) {
            params.survival_compacts.push_back({c[0].get<double>(), c[1].get<double>()});
        }
        for (auto& c : cj.at("extinction_compacts")) {
            params.extinction_compacts.push_back({c[0].get<double>(), c[1].get<double>()});
        }
        params.replicates = ctx.cfg.replicates();
        params.base_seed = ctx.cfg.base_seed();
        params.workers = ctx.workers;
        params.initial_mode = ctx.cfg.initial_mode();
        params.max_population = ctx.cfg.max_population();

        ConvergenceReport rep =
            survival_extinction_experiment(factory, ctx.cfg.u0(), ref, params);

        JsonlWriter out(out_path(ctx, "compare.jsonl"), ctx.meta);
        json hdr{{"experiment", "survival-extinction"},
                 {"eta", params.eta},
                 {"t", params.t},
                 {"band_tol", 2.0 * ref.error_estimate},
                 {"survival_failure_nonincreasing", rep.survival_failure_nonincreasing},
                 {"extinction_hit_nondecreasing", rep.extinction_hit_nondecreasing},
                 {"boundary_leak_total", rep.boundary_leak}};
        out.record(hdr.dump());
        for (const auto& c : rep.cells) {
            json rec{{"log_k", c.log_k},     {"t", c.t},
                     {"compact", json::array({c.compact.a, c.compact.b})},
                     {"kind", c.kind},       {"count", c.count},
                     {"replicates", c.replicates}, {"p_hat", c.p_hat},
                     {"wilson_lo", c.ci.lo}, {"wilson_hi", c.ci.hi}};
            out.record(rec.dump());
        }
        out.close();
        ctx.written.push_back(out_path(ctx, "compare.jsonl"));

        // Plot bundle: reference curve with the empirical exponent band.
        RefCurve rc = ref_curve(ref, params.t);
        for (double lk : ladder) {
            Model m = factory(lk);
            std::vector<double> n0(m.width());
            auto u0f = ctx.cfg.u0();
            for (std::size_t i = 0; i < n0.size(); ++i) {
                n0[i] = std::exp(lk * u0f(m.grid.x_at(i)));
            }
            SimOptions sim;
            sim.observation_times = {params.t * lk};
            sim.max_population = params.max_population;
            std::uint64_t r_plot = std::min<std::uint64_t>(params.replicates, 256);
            CountsCollector proto;
            auto body = [&](std::uint64_t, std::uint64_t seed, CountsCollector& cc) {
                PopulationState st =
                    sample_initial(n0, params.initial_mode, derive_stream(seed, 0));
                Trajectory tr = simulate_exact(m, st, sim, derive_stream(seed, 1));
                cc.rows.push_back(tr.counts[0]);
            };
            CountsCollector cc =
                run_blocks(r_plot, params.base_seed, ctx.workers, 16, body, proto);

            std::ostringstream name;
            name << "plot_lnk" << lk << ".csv";
            TableWriter plot(out_path(ctx, name.str()), ctx.meta,
                             {"x", "u_ref", "beta_q10", "beta_q50", "beta_q90",
                              "extinct_frac"});
            std::vector<double> finite;
            for (std::size_t i = 0; i < m.width(); ++i) {
                finite.clear();
                std::size_t extinct = 0;
                for (const auto& row : cc.rows) {
                    if (row[i] == 0) ++extinct;
                    else finite.push_back(std::log(static_cast<double>(row[i])) / lk);
                }
                std::sort(finite.begin(), finite.end());
                auto q = [&](double p) {
                    if (finite.empty()) return 0.0;
                    double idx = p * static_cast<double>(finite.size() - 1);
                    std::size_t j = static_cast<std::size_t>(idx);
                    double f = idx - static_cast<double>(j);
                    return j + 1 < finite.size() ? finite[j] * (1 - f) + finite[j + 1] * f
                                                 : finite[j];
                };
                double x = m.grid.x_at(i);
                plot.row({x, rc.eval(x), q(0.10), q(0.50), q(0.90),
                          static_cast<double>(extinct) / static_cast<double>(cc.rows.size())});
            }
            plot.close();
            ctx.written.push_back(out_path(ctx, name.str()));
        }
        return finish(ctx);
    }

    if (reg.tag == RegimeTag::supercritical) {
        TrackingParams params;
        params.log_k_list = ladder;
        params.a_exponent = cj.value("a", ctx.cfg.a_exponent());
        params.t_horizon = cj.value("t_horizon", 0.5);
        params.d_radius = cj.value("d_radius", 0.5);
        params.eta = cj.value("eta", 0.1);
        params.n_obs = cj.value("n_obs", std::size_t{11});
        params.init_multiplier = cj.value("init_multiplier", 1.0);
        params.replicates = ctx.cfg.replicates();
        params.base_seed = ctx.cfg.base_seed();
        params.workers = ctx.workers;
        params.max_population = ctx.cfg.max_population();

        TrackingReport rep = supercritical_tracking_experiment(factory, params);

        // Fitted envelope constant: C such that the stated bound matches the
        // worst observed cell.
        double c_fit = 0.0;
        for (const auto& c : rep.cells) {
            double dk = 1.0 / (c.log_k * c.log_k);
            double env = params.eta * params.eta * dk *
                         std::exp(0.5 * params.a_exponent * c.log_k);
            c_fit = std::max(c_fit, c.p_hat * env);
        }

        JsonlWriter out(out_path(ctx, "compare.jsonl"), ctx.meta);
        json hdr{{"experiment", "supercritical-tracking"},
                 {"eta", params.eta},
                 {"t_horizon", params.t_horizon},
                 {"d_radius", params.d_radius},
                 {"a", params.a_exponent},
                 {"p_nonincreasing", rep.p_nonincreasing},
                 {"e_s2_ratios", rep.e_s2_ratios},
                 {"envelope_c_fit", c_fit}};
        out.record(hdr.dump());
        for (const auto& c : rep.cells) {
            double dk = 1.0 / (c.log_k * c.log_k);
            double envelope = c_fit / (params.eta * params.eta * dk *
                                       std::exp(0.5 * params.a_exponent * c.log_k));
            json rec{{"log_k", c.log_k},     {"exceed", c.exceed},
                     {"replicates", c.replicates}, {"p_hat", c.p_hat},
                     {"wilson_lo", c.ci.lo}, {"wilson_hi", c.ci.hi},
                     {"max_e_s2", c.max_e_s2}, {"max_e_s2_se", c.max_e_s2_se},
                     {"envelope", envelope}};
            out.record(rec.dump());
        }
        out.close();
        ctx.written.push_back(out_path(ctx, "compare.jsonl"));
        return finish(ctx);
    }
    throw ConfigError("compare: model is in the mixed regime; no experiment applies");
}

int cmd_sweep(const CommonArgs& args) {
    Context ctx = make_context(args, "sweep");
    Model base_model = ctx.cfg.model();
    gate_assumptions(ctx, base_model);
    if (!ctx.cfg.doc().contains("sweep")) throw ConfigError("config: section 'sweep' required");
    const json& sj = ctx.cfg.doc().at("sweep");
    std::vector<double> ladder = sj.at("log_k").get<std::vector<double>>();
    double t = sj.value("t", 1.0);
    const json& cj = sj.at("compact");
    double a = cj[0].get<double>(), b = cj[1].get<double>();

    // One reference solution shared by every cell (it does not depend on K).
    HjOptions hopt = hj_options_from(ctx.cfg);
    HjProblem pb = make_hj_problem(base_model, ctx.cfg.u0());
    HjSolution ref = solve_hj(pb, hopt);
    RefCurve rc = ref_curve(ref, t);

    std::vector<json> cells;
    for (double lk : ladder) {
        std::ostringstream name;
        name << "sweep_cell_lnk" << lk << ".json";
        std::string cell_path = out_path(ctx, name.str());
        if (fs::exists(cell_path) && !ctx.force) {
            std::ifstream in(cell_path);
            json cell = json::parse(std::string((std::istreambuf_iterator<char>(in)),
                                                std::istreambuf_iterator<char>()));
            cells.push_back(cell);
            continue;
        }
        Model m = ctx.cfg.model(lk);
        std::vector<double> u0 = ctx.cfg.u0_samples(m.grid);
        OdeOptions ode;
        ode.rtol = 1e-8;
        ode.atol = 1e-12;
        FieldSeries ue = integrate_exponent(m, u0, {t}, ode);
        double sup = 0.0;
        auto visit = [&](double x) {
            if (x < a || x > b) return;
            // linear interpolation of the exponent field
            double pos = x / m.grid.delta_k - static_cast<double>(m.grid.i_min);
            pos = std::clamp(pos, 0.0, static_cast<double>(m.width() - 1));
            std::size_t j = static_cast<std::size_t>(pos);
            double f = pos - static_cast<double>(j);
            double uk = j + 1 < m.width() ? ue.at(0, j) * (1 - f) + ue.at(0, j + 1) * f
                                          : ue.at(0, j);
            sup = std::max(sup, std::abs(uk - rc.eval(x)));
        };
        visit(a);
        visit(b);
        for (std::size_t i = 0; i < m.width(); ++i) visit(m.grid.x_at(i));
        for (double x : rc.xs) visit(x);

        json cell{{"log_k", lk},
                  {"t", t},
                  {"compact", json::array({a, b})},
                  {"sup_error", sup},
                  {"config_hash", hash_hex(ctx.meta.config_hash)},
                  {"base_seed", ctx.cfg.base_seed()}};
        // durable cell: atomic single-file write, idempotent re-runs skip it
        JsonlWriter cw(cell_path, ctx.meta);
        cw.record(cell.dump());
        cw.close();
        {
            std::ifstream in(cell_path);
            std::string first;
            std::getline(in, first);  // meta line
            std::getline(in, first);
            cells.push_back(json::parse(first));
        }
    }

    bool strictly_decreasing = true;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (!(cells[i].at("sup_error").get<double>() <
              cells[i - 1].at("sup_error").get<double>())) {
            strictly_decreasing = false;
        }
    }
    JsonlWriter out(out_path(ctx, "sweep.jsonl"), ctx.meta);
    json hdr{{"target", "exponent-vs-reference sup error"},
             {"t", t},
             {"compact", json::array({a, b})},
             {"strictly_decreasing", strictly_decreasing},
             {"reference_error_estimate", ref.error_estimate}};
    out.record(hdr.dump());
    for (const auto& c : cells) out.record(c.dump());
    out.close();
    ctx.written.push_back(out_path(ctx, "sweep.jsonl"));
    return finish(ctx);
}

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", args.seed_override, "override run.base_seed");
    sub->add_option("--workers", args.workers_override,
                    "override worker count (default: run.workers, TRAITLAB_WORKERS, or 1)");
    sub->add_option("-o,--out", args.out_override, "override outputs.dir");
    sub->add_flag("--force", args.force, "run even if required assumptions fail");
    sub->add_flag("--verify", args.verify, "re-derive and compare output hashes");
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"traitlab: trait-structured branching simulation and limit numerics"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    CommonArgs args;
    auto* check = app.add_subcommand("check", "validate model assumptions for a config");
    auto* simulate = app.add_subcommand("simulate", "run the stochastic ensemble");
    auto* mean = app.add_subcommand("mean", "integrate mean/exponent/moment systems");
    auto* hj = app.add_subcommand("hj", "solve the limit equation and survival set");
    auto* compare = app.add_subcommand("compare", "stochastic-vs-limit experiments");
    auto* sweep = app.add_subcommand("sweep", "K-ladder sweeps with durable cells");
    for (auto* s : {check, simulate, mean, hj, compare, sweep}) add_common(s, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (check->parsed()) return cmd_check(args);
        if (simulate->parsed()) return cmd_simulate(args);
        if (mean->parsed()) return cmd_mean(args);
        if (hj->parsed()) return cmd_hj(args);
        if (compare->parsed()) return cmd_compare(args);
        if (sweep->parsed()) return cmd_sweep(args);
    } catch (const AssumptionError& e) {
        std::cerr << "assumption failure: " << e.what() << "\n";
        return 2;
    } catch (const NumericsError& e) {
        std::cerr << "numerical diagnostic: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

}  // namespace traitlab
