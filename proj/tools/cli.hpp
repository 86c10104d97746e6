#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "perpetua/perpetua.hpp"

namespace perpetua::cli {

using io::Json;

struct RunConfig {
    std::string model_path;
    std::string start;
    std::size_t n = 100;
    std::size_t horizon = 400;
    std::size_t replicas = 10'000;
    std::size_t samples = 100'000;
    std::uint64_t seed = 0;
    double tol = kDegeneracyTol;
    std::string out_path;
    std::string csv_path;
    int threads = 0;
    std::string z0;
    bool stationary = false;
    bool dual_form = false;
    bool no_validate = false;
    std::vector<std::size_t> checkpoints{100, 1000, 10000};
    double x = 1.0;
    std::size_t max_iter = 200;
    std::size_t max_atoms = std::size_t{1} << 16;
    std::string init;
    std::string petals = "geometric:0.5";
    double p_stay = 0.5;
    std::string example;
    std::string direction = "backward";
    double fp_tol = 1e-6;
};

// A model file, a generator spec, or a built-in model name.
struct Source {
    std::optional<io::LoadedModel> finite;
    std::optional<FlowerParams> flower;
};

inline Source load_source(const std::string& path) {
    if (path.empty()) throw Error(ErrorCode::ParseError, "--model is required");
    Source src;
    if (!std::filesystem::exists(path)) {
        std::string name = std::filesystem::path(path).filename().string();
        if (name.size() > 5 && name.ends_with(".json")) name.resize(name.size() - 5);
        for (const auto& b : builtin::names())
            if (b == name) {
                src.finite = io::LoadedModel{Model::validate(builtin::by_name(name)), std::nullopt};
                return src;
            }
        if (name == "flower") {
            src.flower = FlowerParams{};
            return src;
        }
    }
    const Json j = io::read_json_file(path);
    if (io::is_generator_spec(j)) src.flower = io::flower_from_json(j);
    else src.finite = io::model_from_json(j);
    return src;
}

inline const io::LoadedModel& require_finite(const Source& s) {
    if (!s.finite) throw Error(ErrorCode::PreconditionRegime, "this command needs a finite model, not a generator");
    return *s.finite;
}

inline std::size_t resolve_state(const Model& m, const std::string& ref) {
    if (ref.empty()) return 0;
    if (const auto k = m.index_of(ref)) return *k;
    try {
        std::size_t pos = 0;
        const auto k = std::stoull(ref, &pos);
        if (pos == ref.size() && k < m.size()) return static_cast<std::size_t>(k);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::BadShape, "unknown start state '" + ref + "'");
}

inline InitialLaw resolve_z0(const RunConfig& cfg, const io::LoadedModel& lm) {
    if (!cfg.z0.empty()) return io::initial_law_from_json(io::json_argument(cfg.z0), lm.model.size());
    if (lm.initial_law) return *lm.initial_law;
    return InitialLaw::point(0.0, lm.model.size());
}

inline void write_csv(const std::string& path, const SampleSet& s) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::ParseError, "cannot write '" + path + "'");
    f << "replica,value\n";
    f.precision(17);
    for (std::size_t r = 0; r < s.values.size(); ++r) f << r << ',' << s.values[r] << '\n';
}

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(int argc, const char* const* argv) {
        CLI::App app{"Markov-modulated affine recursions: simulation, classification and limit laws", "perpetua"};
        app.require_subcommand(1);
        build(app);
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out_, err_);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out_, err_);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out_, err_);
            return 1;
        }
        try {
            action_();
            emit();
            return 0;
        } catch (const ModelError& e) {
            Json issues = Json::array();
            for (const auto& is : e.issues()) issues.push_back(Json{{"code", to_string(is.code)}, {"message", is.message}});
            report_ = Json{{"valid", false}, {"issues", issues}};
            emit();
            err_ << "model error: " << e.what() << '\n';
            return 2;
        } catch (const NoConvergenceError& e) {
            err_ << e.what() << '\n';
            return 3;
        } catch (const Error& e) {
            err_ << e.what() << '\n';
            return is_model_error(e.code()) ? 2 : 3;
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << '\n';
            return 1;
        }
    }

private:
    std::ostream& out_;
    std::ostream& err_;
    RunConfig cfg_;
    Json report_;
    std::function<void()> action_;

    void emit() {
        const std::string text = report_.dump(2) + "\n";
        if (cfg_.out_path.empty()) {
            out_ << text;
            return;
        }
        std::ofstream f(cfg_.out_path);
        if (!f) throw Error(ErrorCode::ParseError, "cannot write '" + cfg_.out_path + "'");
        f << text;
    }

    void add_model(CLI::App* c) { c->add_option("--model", cfg_.model_path, "model JSON, generator spec or built-in name")->required(); }
    void add_out(CLI::App* c) { c->add_option("--out", cfg_.out_path, "write the report here instead of stdout"); }
    void add_start(CLI::App* c) { c->add_option("--start", cfg_.start, "start state label or index"); }
    void add_tol(CLI::App* c) { c->add_option("--tol", cfg_.tol, "tolerance")->check(CLI::PositiveNumber); }
    void add_sim(CLI::App* c) {
        c->add_option("--replicas", cfg_.replicas, "number of replicas")->check(CLI::PositiveNumber);
        c->add_option("--seed", cfg_.seed, "random seed");
        c->add_option("--threads", cfg_.threads, "worker threads (0 = all; PERPETUA_THREADS overrides)");
    }
    void on(CLI::App* c, std::function<void()> f) {
        c->callback([this, f] { action_ = f; });
    }

    void build(CLI::App& app) {
        auto* validate = app.add_subcommand("validate", "validate a model file");
        add_model(validate);
        add_out(validate);
        on(validate, [this] { cmd_validate(); });

        auto* stationary = app.add_subcommand("stationary", "stationary law of the driving chain");
        add_model(stationary);
        add_out(stationary);
        on(stationary, [this] { cmd_stationary(); });

        auto* dual = app.add_subcommand("dual", "time-reversed model");
        add_model(dual);
        add_out(dual);
        on(dual, [this] { cmd_dual(); });

        auto* enumerate = app.add_subcommand("enumerate", "exact law of the n-step iteration");
        enumerate->add_option("direction", cfg_.direction, "backward or forward")->check(CLI::IsMember({"backward", "forward"}));
        add_model(enumerate);
        add_start(enumerate);
        add_out(enumerate);
        enumerate->add_option("--n", cfg_.n, "number of steps");
        enumerate->add_option("--z0", cfg_.z0, "initial law (JSON file or inline)");
        enumerate->add_flag("--stationary", cfg_.stationary, "start from the stationary law");
        on(enumerate, [this] { cmd_enumerate(cfg_.direction == "forward"); });

        auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs");
        simulate->require_subcommand(1);
        const std::vector<std::pair<std::string, std::string>> sim_kinds{
            {"backward", "backward iterations at step n"},
            {"forward", "forward iterations at step n"},
            {"excursions", "excursion statistics from the start state"},
            {"perpetuity", "truncated perpetuity samples"},
            {"diverge", "P(|S_n| <= x) at the checkpoints"}};
        for (const auto& [name, help] : sim_kinds) {
            auto* s = simulate->add_subcommand(name, help);
            add_model(s);
            add_start(s);
            add_out(s);
            add_sim(s);
            s->add_option("--n", cfg_.n, "number of steps");
            s->add_option("--horizon", cfg_.horizon, "perpetuity horizon");
            s->add_option("--z0", cfg_.z0, "initial law (JSON file or inline)");
            s->add_option("--csv", cfg_.csv_path, "write raw samples as CSV");
            s->add_option("--checkpoints", cfg_.checkpoints, "divergence checkpoints");
            s->add_option("--x", cfg_.x, "divergence window |S_n| <= x");
            const std::string which = name;
            on(s, [this, which] { cmd_simulate(which); });
        }

        auto* classify_cmd = app.add_subcommand("classify", "trichotomy, homology and moment tests");
        add_model(classify_cmd);
        add_start(classify_cmd);
        add_out(classify_cmd);
        add_sim(classify_cmd);
        on(classify_cmd, [this] { cmd_classify(); });

        auto* degeneracy = app.add_subcommand("degeneracy", "detect degeneracy constants");
        add_model(degeneracy);
        add_start(degeneracy);
        add_out(degeneracy);
        add_tol(degeneracy);
        degeneracy->add_flag("--dual", cfg_.dual_form, "detect the dual form");
        on(degeneracy, [this] { cmd_degeneracy(); });

        auto* limit = app.add_subcommand("limit", "limit law of backward or forward iterations");
        limit->require_subcommand(1);
        for (const char* name : {"backward", "forward"}) {
            auto* s = limit->add_subcommand(name, std::string("limit law of ") + name + " iterations");
            add_model(s);
            add_start(s);
            add_out(s);
            add_sim(s);
            add_tol(s);
            s->add_option("--z0", cfg_.z0, "initial law (JSON file or inline)");
            s->add_option("--horizon", cfg_.horizon, "perpetuity horizon");
            s->add_option("--samples", cfg_.samples, "perpetuity samples")->check(CLI::PositiveNumber);
            s->add_flag("--no-validate", cfg_.no_validate, "skip the simulation check");
            const bool forward = std::string(name) == "forward";
            on(s, [this, forward] { cmd_limit(forward); });
        }

        auto* fp = app.add_subcommand("fixed-point", "fixed points of the kernel map");
        fp->require_subcommand(1);
        auto* fpc = fp->add_subcommand("classify", "which fixed-point case applies");
        add_model(fpc);
        add_out(fpc);
        add_tol(fpc);
        on(fpc, [this] { cmd_fixed_point_classify(); });
        auto* fps = fp->add_subcommand("solve", "iterate the kernel map to a fixed point");
        add_model(fps);
        add_out(fps);
        fps->add_option("--tol", cfg_.fp_tol, "W1 residual tolerance")->check(CLI::PositiveNumber);
        fps->add_option("--init", cfg_.init, "initial law for every state (JSON file or inline)");
        fps->add_option("--max-iter", cfg_.max_iter, "iteration cap");
        fps->add_option("--max-atoms", cfg_.max_atoms, "atoms per state before grid projection");
        on(fps, [this] { cmd_fixed_point_solve(); });

        auto* examples = app.add_subcommand("examples", "write a built-in model");
        std::vector<std::string> names = builtin::names();
        names.push_back("flower");
        examples->add_option("name", cfg_.example, "model name")->required()->check(CLI::IsMember(names));
        examples->add_option("--petals", cfg_.petals, "petal weights for flower: geometric:r or weights:w1,w2,...");
        examples->add_option("--p-stay", cfg_.p_stay, "flower probability of staying at the centre");
        add_out(examples);
        on(examples, [this] { cmd_examples(); });
    }

    // -----------------------------------------------------------------------

    void cmd_validate() {
        const auto src = load_source(cfg_.model_path);
        if (src.flower) {
            flower_generator(*src.flower);
            report_ = Json{{"valid", true}, {"generator", "flower"}};
            return;
        }
        const auto& m = src.finite->model;
        Json states = Json::array();
        for (const auto& l : m.labels()) states.push_back(l);
        report_ = Json{{"valid", true},
                       {"states", states},
                       {"edges", m.edge_list().size()},
                       {"standing_assumption", report::standing(check_standing_assumption(m))}};
    }

    void cmd_stationary() {
        const auto src = load_source(cfg_.model_path);
        const auto& m = require_finite(src).model;
        Json pi = Json::object();
        for (std::size_t i = 0; i < m.size(); ++i) pi[m.label(i)] = m.pi()[i];
        report_ = Json{{"pi", pi}, {"log_drift", io::number(stationary_log_drift(m))}};
    }

    void cmd_dual() {
        const auto src = load_source(cfg_.model_path);
        const auto& m = require_finite(src).model;
        report_ = io::model_to_json(dual(m));
    }

    void cmd_enumerate(bool forward) {
        const auto src = load_source(cfg_.model_path);
        const auto& lm = require_finite(src);
        const auto z0 = resolve_z0(cfg_, lm);
        DiscreteLaw law;
        if (cfg_.stationary)
            law = forward ? enumerate_forward_stationary(lm.model, cfg_.n, z0) : enumerate_backward_stationary(lm.model, cfg_.n, z0);
        else {
            const auto s = resolve_state(lm.model, cfg_.start);
            law = forward ? enumerate_forward(lm.model, s, cfg_.n, z0) : enumerate_backward(lm.model, s, cfg_.n, z0);
        }
        report_ = io::law_to_json(law);
    }

    SimOptions sim_options() const { return SimOptions{cfg_.replicas, cfg_.seed, cfg_.threads}; }

    void cmd_simulate(const std::string& which) {
        const auto src = load_source(cfg_.model_path);
        const auto opt = sim_options();
        if (src.flower) {
            const auto gen = flower_generator(*src.flower);
            if (which == "backward" || which == "forward") {
                const DiscreteLaw z0 = cfg_.z0.empty() ? DiscreteLaw::point(0.0) : io::law_from_json(io::json_argument(cfg_.z0));
                const auto set = which == "backward" ? run_backward(gen, cfg_.n, z0, opt) : run_forward(gen, cfg_.n, z0, opt);
                finish_samples(which, set);
            } else if (which == "excursions") {
                report_ = excursion_report(sample_excursions(gen, gen.start, cfg_.replicas, cfg_.seed, kDefaultStepCap, cfg_.threads));
            } else {
                throw Error(ErrorCode::PreconditionRegime, "'" + which + "' needs a finite model");
            }
            return;
        }
        const auto& lm = *src.finite;
        const auto& m = lm.model;
        const std::size_t start = cfg_.start == "pi" ? kStationaryStart : resolve_state(m, cfg_.start);
        if (which == "backward" || which == "forward") {
            const auto z0 = resolve_z0(cfg_, lm);
            finish_samples(which, which == "backward" ? run_backward(m, start, cfg_.n, z0, opt) : run_forward(m, start, cfg_.n, z0, opt));
        } else if (which == "excursions") {
            report_ = excursion_report(sample_excursions(m, start == kStationaryStart ? 0 : start, cfg_.replicas, cfg_.seed,
                                                         kDefaultStepCap, cfg_.threads));
        } else if (which == "perpetuity") {
            const auto res = perpetuity_samples(m, start, cfg_.replicas, cfg_.horizon, cfg_.seed, cfg_.threads);
            finish_samples(which, res.samples);
            report_["horizon"] = cfg_.horizon;
            report_["max_abs_pi"] = io::number(res.max_abs_pi);
        } else {
            const auto d = divergence_diagnostic(m, cfg_.checkpoints, cfg_.replicas, cfg_.seed, cfg_.x, cfg_.threads);
            Json cps = Json::array();
            for (auto c : d.checkpoints) cps.push_back(c);
            report_ = Json{{"command", "diverge"},
                           {"checkpoints", cps},
                           {"prob_within", report::numbers(d.prob_within)},
                           {"x", d.x},
                           {"replicas", d.replicas},
                           {"seed", d.seed},
                           {"strictly_decreasing", d.strictly_decreasing}};
        }
    }

    void finish_samples(const std::string& which, const SampleSet& set) {
        report_ = Json{{"command", which}};
        report_["summary"] = report::sample_summary(set);
        if (!cfg_.csv_path.empty()) write_csv(cfg_.csv_path, set);
    }

    static Json excursion_report(const ExcursionBatch& b) {
        double tau = 0.0, log_a = 0.0;
        std::size_t unit = 0;
        for (const auto& x : b.samples) {
            tau += static_cast<double>(x.tau);
            log_a += -x.s_tau;
            unit += x.pi_is_one;
        }
        const double n = static_cast<double>(std::max<std::size_t>(1, b.samples.size()));
        Json out{{"command", "excursions"},
                 {"count", b.samples.size()},
                 {"seed", b.seed},
                 {"mean_tau", tau / n},
                 {"mean_log_abs_a", io::number(log_a / n)},
                 {"unit_products", unit}};
        out["hat_tau_index"] = b.hat_tau_index ? Json(*b.hat_tau_index) : Json(nullptr);
        out["hat_tau_steps"] = b.hat_tau_steps ? Json(*b.hat_tau_steps) : Json(nullptr);
        return out;
    }

    void cmd_classify() {
        const auto src = load_source(cfg_.model_path);
        if (src.flower) {
            const auto gen = flower_generator(*src.flower);
            report_ = report::monte_carlo(classify_generator(gen, gen.start, cfg_.replicas, cfg_.seed, kDefaultStepCap, cfg_.threads));
            return;
        }
        const auto& m = src.finite->model;
        report_ = report::classification(classify(m, resolve_state(m, cfg_.start)), m);
    }

    void cmd_degeneracy() {
        const auto src = load_source(cfg_.model_path);
        const auto& m = require_finite(src).model;
        if (!check_standing_assumption(m).a_never_zero)
            throw Error(ErrorCode::PreconditionRegime, "degeneracy needs A != 0 almost surely");
        const auto d = cfg_.dual_form ? detect_dual(m, cfg_.tol) : detect(m, cfg_.tol);
        report_ = report::degeneracy(d, m);
        if (!cfg_.dual_form) {
            const auto s = resolve_state(m, cfg_.start);
            report_["b_excursion_zero"] = report::b_zero(b_excursion_zero_certificate(m, s, cfg_.tol));
            report_["b_excursion_zero"]["state"] = m.label(s);
        }
    }

    void cmd_limit(bool forward) {
        const auto src = load_source(cfg_.model_path);
        const auto& lm = require_finite(src);
        const auto& m = lm.model;
        const auto s = resolve_state(m, cfg_.start);
        const auto z0 = resolve_z0(cfg_, lm);
        LimitOptions lo;
        lo.samples = cfg_.samples;
        lo.horizon = cfg_.horizon;
        lo.seed = cfg_.seed;
        lo.threads = cfg_.threads;
        lo.tol = cfg_.tol;
        const auto l = forward ? forward_limit(m, s, z0, lo) : backward_limit(m, s, z0, lo);
        report_ = Json{{"limit", report::limit(l, m)}, {"z0", io::initial_law_to_json(z0)}};
        if (!cfg_.no_validate)
            report_["validation"] = report::validation(validate_limit(m, z0, l, cfg_.replicas, cfg_.seed, cfg_.threads));
    }

    void cmd_fixed_point_classify() {
        const auto src = load_source(cfg_.model_path);
        const auto& m = require_finite(src).model;
        const auto r = fixed_point_classify(m, cfg_.tol);
        report_ = report::fixed_point(r);
        if (r.exists && (r.degeneracy.degenerate() || r.fp_case == FixedPointCase::C2 || r.fp_case == FixedPointCase::C3)) {
            const DiscreteLaw x = r.fp_case == FixedPointCase::C2 ? DiscreteLaw::point(1.0).symmetrized() : DiscreteLaw::point(0.0);
            const auto rep = r.representative(x);
            report_["representative"] = report::kernel(rep, m);
            report_["representative_residual"] = kernel_distance(psi_apply(m, rep), rep);
        }
    }

    void cmd_fixed_point_solve() {
        const auto src = load_source(cfg_.model_path);
        const auto& m = require_finite(src).model;
        const DiscreteLaw init = cfg_.init.empty() ? DiscreteLaw::point(0.0) : io::law_from_json(io::json_argument(cfg_.init));
        const double tol = cfg_.fp_tol;
        const auto sol = fixed_point_solve(m, Kernel(m.size(), init), cfg_.max_iter, tol, cfg_.max_atoms);
        report_ = Json{{"converged", true},
                       {"iterations", sol.iterations},
                       {"tol", tol},
                       {"residuals", report::numbers(sol.residuals)},
                       {"kernel", report::kernel(sol.kernel, m)}};
    }

    void cmd_examples() {
        if (cfg_.example == "flower") {
            FlowerParams p{cfg_.p_stay, cfg_.petals};
            flower_generator(p);
            report_ = io::flower_to_json(p);
            return;
        }
        report_ = io::model_to_json(Model::validate(builtin::by_name(cfg_.example)));
    }
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return Runner(out, err).run(argc, argv);
}

} // namespace perpetua::cli
