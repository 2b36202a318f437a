// denots: generate | train | attack | verify | sweep
//
// Reproducible runs of the scaled-CDE pipeline and its verification studies.
// Exit codes: 0 ok, 1 validation error, 2 numerical divergence, 3 a study
// assertion failed.

#include "denots/datagen.hpp"
#include "denots/experiment.hpp"
#include "denots/rng.hpp"
#include "denots/serialize.hpp"
#include "denots/theory.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace denots;

namespace {

int g_log_level = 1; // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cout << msg << "\n";
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<double> scale;
    std::optional<std::string> field;
    std::optional<double> rtol;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "experiment config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", flags.seed, "root seed override");
    cmd->add_option("--out", flags.out_dir, "output directory override");
    cmd->add_option("--scale", flags.scale, "time-scale D override");
    cmd->add_option("--field", flags.field, "vector field override");
    cmd->add_option("--rtol", flags.rtol, "solver tolerance override (sets atol too)");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = ExperimentConfig::load(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.scale) cfg.scale_d = *flags.scale;
    if (flags.field) cfg.field = field_kind_from_string(*flags.field);
    if (flags.rtol) {
        cfg.solver.rtol = *flags.rtol;
        cfg.solver.atol = *flags.rtol;
    }
    // Seed overrides re-derive the dataset substream.
    cfg.dataset.seed = splitmix64(cfg.seed ^ fnv1a64("dataset"));
    cfg.validate();
    return cfg;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t count) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < count; ++i) seeds.push_back(base + i);
    return seeds;
}

// ----- verify studies -------------------------------------------------------

struct StudyArgs {
    ExperimentConfig config;
    std::string out_dir;
    std::size_t iterations = 1000;
    std::size_t n_seeds = 3;
    std::size_t n_configs = 100;
    double xi = 0.005;
    double delta = 1.0;
    std::size_t paths = 200;
};

int study_assumption_mc(const StudyArgs& args) {
    const auto report = theory::assumption_test_mc(args.iterations, args.config.seed);
    json summary{{"study", "assumption-mc"},
                 {"iterations", report.iterations},
                 {"failures", report.failures},
                 {"singular_retries", report.singular_retries},
                 {"worst_margin", report.worst_margin},
                 {"pass", report.failures == 0}};
    write_json_file((fs::path(args.out_dir) / "assumption_mc.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return report.failures == 0 ? kExitOk : kExitStudyFailure;
}

int study_iss(const StudyArgs& args) {
    auto rng = substream(args.config.seed, "iss_study");
    std::size_t violations = 0;
    std::ostringstream csv;
    csv << "config,a,b,lip_hidden,lip_input,level,max_norm,ok\n";
    for (std::size_t c = 0; c < args.n_configs; ++c) {
        const auto field = theory::ConstrainedField::random_assumption2(16, 3, rng);
        const double x_max = 2.0;
        const double horizon = 10.0 / (field.b - field.a * field.lip_hidden);
        const auto input = theory::BoundedSignal::random(3, x_max, horizon, rng);
        std::uniform_real_distribution<double> h0_dist(-1.0, 1.0);
        Vec h0(16);
        for (double& x : h0) x = h0_dist(rng);
        const auto report = theory::iss_check(field, input, h0, x_max, horizon);
        if (!report.ok) ++violations;
        csv << c << "," << field.a << "," << field.b << "," << field.lip_hidden << ","
            << field.lip_input << "," << report.level << "," << report.max_norm << ","
            << (report.ok ? 1 : 0) << "\n";
    }
    std::ofstream(fs::path(args.out_dir) / "iss_study.csv") << csv.str();
    json summary{{"study", "iss"},
                 {"configs", args.n_configs},
                 {"violations", violations},
                 {"pass", violations == 0}};
    write_json_file((fs::path(args.out_dir) / "iss_study.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return violations == 0 ? kExitOk : kExitStudyFailure;
}

int study_forgetting(const StudyArgs& args) {
    auto rng = substream(args.config.seed, "forgetting_study");
    std::size_t violations = 0;
    for (std::size_t c = 0; c < args.n_configs; ++c) {
        const auto field = theory::ConstrainedField::random_assumption2(12, 2, rng);
        const double horizon = std::min(3.0 / (field.b - field.a * field.lip_hidden), 50.0);
        const auto input = theory::BoundedSignal::random(2, 1.0, horizon, rng);
        std::vector<double> xbuf(2);
        theory::OdeField f = [&](double t, const Vec& h) {
            input.eval(t, xbuf);
            return field.eval(xbuf, h);
        };
        std::uniform_real_distribution<double> h0_dist(-1.0, 1.0);
        Vec h0(12);
        for (double& x : h0) x = h0_dist(rng);
        const auto report = theory::forgetting_decay(f, h0, c % 12, 1e-4, horizon);
        if (!report.strictly_decreasing) ++violations;
    }
    json summary{{"study", "forgetting"},
                 {"configs", args.n_configs},
                 {"violations", violations},
                 {"pass", violations == 0}};
    write_json_file((fs::path(args.out_dir) / "forgetting_study.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return violations == 0 ? kExitOk : kExitStudyFailure;
}

int study_spline_error(const StudyArgs& args) {
    theory::SplineErrorConfig cfg;
    cfg.xi = args.xi;
    cfg.delta = args.delta;
    cfg.paths = args.paths;
    cfg.seed = args.config.seed;
    const auto report = theory::spline_error_mc(cfg);
    const bool pass = report.rel_error < 0.25;
    json summary{{"study", "spline-error"},
                 {"xi", cfg.xi},
                 {"delta", cfg.delta},
                 {"paths", cfg.paths},
                 {"estimate", report.estimate},
                 {"theory", report.theory},
                 {"theory_constant", theory::kSplineIntervalConstant},
                 {"constant_estimate", report.constant_estimate},
                 {"rel_error", report.rel_error},
                 {"pass", pass}};
    write_json_file((fs::path(args.out_dir) / "spline_error.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return pass ? kExitOk : kExitStudyFailure;
}

int study_robustness(const StudyArgs& args) {
    const auto report = theory::tightness_example(2.0, 1.0, 0.5, 40.0);
    const bool asymptote_ok =
        std::abs(report.final_gap_sq - report.asymptote) <= 0.05 * report.asymptote;
    const bool pass = asymptote_ok && report.within_bound;
    json summary{{"study", "robustness"},
                 {"asymptote", report.asymptote},
                 {"final_gap_sq", report.final_gap_sq},
                 {"max_gap_sq", report.max_gap_sq},
                 {"bound_sq", report.bound_sq},
                 {"within_bound", report.within_bound},
                 {"pass", pass}};
    write_json_file((fs::path(args.out_dir) / "robustness.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return pass ? kExitOk : kExitStudyFailure;
}

int study_norms(const StudyArgs& args) {
    ExperimentConfig cfg = args.config;
    const PreparedData data = prepare_data(cfg);
    const std::vector<TimeSeries> probe(
        data.test.begin(), data.test.begin() + std::min<std::size_t>(data.test.size(), 8));
    const FieldKind kinds[] = {FieldKind::NoNF, FieldKind::SyncNF, FieldKind::AntiNF,
                               FieldKind::MlpTanh, FieldKind::MlpRelu};
    const double d_grid[] = {1.0, cfg.scale_d};
    const auto seeds = seed_list(cfg.seed, args.n_seeds);
    SolverConfig solver = cfg.solver;
    solver.max_steps = 20000;
    const auto rows = theory::trajectory_norm_study(kinds, d_grid, probe, cfg.hidden_dim, seeds,
                                                    data.median_timeframe, solver);
    std::ostringstream csv;
    csv << "field,scale_d,seed,sup_norm_l2,sup_abs_component,diverged\n";
    for (const auto& row : rows) {
        csv << to_string(row.kind) << "," << row.scale_d << "," << row.seed << ","
            << row.sup_norm_l2 << "," << row.sup_abs_component << "," << (row.diverged ? 1 : 0)
            << "\n";
    }
    std::ofstream(fs::path(args.out_dir) / "norm_study.csv") << csv.str();
    log_info("wrote norm_study.csv");
    return kExitOk;
}

int study_sinemix_bench(const StudyArgs& args) {
    const auto seeds = seed_list(args.config.seed, args.n_seeds);
    const auto rows = theory::sinemix_memory_bench(args.config, seeds);
    std::ostringstream csv;
    csv << "backbone,seed,r2,diverged\n";
    json jrows = json::array();
    for (const auto& row : rows) {
        csv << row.backbone << "," << row.seed << "," << row.r2 << "," << (row.diverged ? 1 : 0)
            << "\n";
        jrows.push_back({{"backbone", row.backbone},
                         {"seed", row.seed},
                         {"r2", row.r2},
                         {"diverged", row.diverged}});
    }
    std::ofstream(fs::path(args.out_dir) / "sinemix_bench.csv") << csv.str();
    write_json_file((fs::path(args.out_dir) / "sinemix_bench.json").string(),
                    json{{"study", "sinemix-bench"}, {"rows", jrows}});
    log_info("wrote sinemix_bench.csv");
    return kExitOk;
}

int study_nfe_sweep(const StudyArgs& args) {
    const FieldKind kinds[] = {FieldKind::AntiNF, FieldKind::NoNF};
    const double grid[] = {1.0, 2.0, 5.0, 10.0, 20.0};
    const auto seeds = seed_list(args.config.seed, args.n_seeds);
    const auto result = theory::nfe_metric_study(args.config, "scale", grid, kinds, seeds);
    std::ostringstream csv;
    csv << "field,scale_d,seed,nfe_mean,metric,diverged\n";
    for (const auto& row : result.rows) {
        csv << to_string(row.kind) << "," << row.axis_value << "," << row.seed << ","
            << row.nfe_mean << "," << row.metric_value << "," << (row.diverged ? 1 : 0) << "\n";
    }
    std::ofstream(fs::path(args.out_dir) / "nfe_sweep.csv") << csv.str();
    json jcorr = json::array();
    for (const auto& [kind, pearson, spearman] : result.correlations) {
        jcorr.push_back({{"field", std::string(to_string(kind))},
                         {"pearson", pearson},
                         {"spearman", spearman}});
    }
    write_json_file((fs::path(args.out_dir) / "nfe_sweep.json").string(),
                    json{{"study", "nfe-sweep"}, {"correlations", jcorr}});
    std::cout << jcorr.dump(2) << "\n";
    return kExitOk;
}

int study_l2_vs_scale(const StudyArgs& args) {
    const double grid[] = {1.0, 2.0, 5.0, 10.0, 20.0};
    const auto seeds = seed_list(args.config.seed, args.n_seeds);
    const auto result = theory::weight_norm_study(args.config, grid, seeds);
    std::ostringstream csv;
    csv << "scale_d,seed,l2_norm,val_metric\n";
    for (const auto& row : result.rows) {
        csv << row.scale_d << "," << row.seed << "," << row.l2_norm << "," << row.val_metric
            << "\n";
    }
    std::ofstream(fs::path(args.out_dir) / "l2_vs_scale.csv") << csv.str();
    json summary{{"study", "l2-vs-scale"}, {"spearman_vs_scale", result.spearman_vs_scale}};
    write_json_file((fs::path(args.out_dir) / "l2_vs_scale.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("DENOTS_LOG")) {
        const std::string level = env;
        g_log_level = level == "quiet" ? 0 : (level == "debug" ? 2 : 1);
    }

    CLI::App app{"Scaled neural CDEs with anti-phase negative feedback"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, attack_flags, sweep_flags, verify_flags;

    auto* gen = app.add_subcommand("generate", "write dataset CSV splits and a manifest");
    add_common(gen, gen_flags);

    auto* tr = app.add_subcommand("train", "train one model on a generated dataset");
    add_common(tr, train_flags);

    auto* att = app.add_subcommand("attack", "evaluate a trained model under perturbations");
    add_common(att, attack_flags);
    AttackCommand attack_cmd;
    std::string attack_kind = "drop";
    att->add_option("--attack", attack_kind, "drop | change");
    att->add_option("--fractions", attack_cmd.fractions, "token fractions to perturb");
    att->add_option("--attack-seeds", attack_cmd.n_seeds, "number of attack seeds");
    att->add_option("--model", attack_cmd.model_path, "trained weights (default <out>/model.bin)");
    att->add_flag("--svg", attack_cmd.emit_svg, "also render an SVG curve");

    auto* sw = app.add_subcommand("sweep", "train across a scale or tolerance grid");
    add_common(sw, sweep_flags);
    SweepCommand sweep_cmd;
    sw->add_option("--axis", sweep_cmd.axis, "scale | tolerance")->required();
    sw->add_option("--grid", sweep_cmd.grid, "grid values")->required();
    sw->add_option("--seeds", sweep_cmd.n_seeds, "model seeds per grid point");
    sw->add_flag("--svg", sweep_cmd.emit_svg, "also render an SVG curve");

    auto* ver = app.add_subcommand("verify", "run a theory verification study");
    add_common(ver, verify_flags, false);
    std::string study_name;
    StudyArgs study_args;
    ver->add_option("study", study_name, "study name")->required();
    ver->add_option("--iterations", study_args.iterations, "Monte Carlo iterations");
    ver->add_option("--study-seeds", study_args.n_seeds, "seeds for training-backed studies");
    ver->add_option("--configs", study_args.n_configs, "random configurations to test");
    ver->add_option("--xi", study_args.xi, "quartic spectral xi");
    ver->add_option("--delta", study_args.delta, "grid step for the spline-error study");
    ver->add_option("--paths", study_args.paths, "Monte Carlo paths");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(resolve_config(gen_flags));
        if (tr->parsed()) return cmd_train(resolve_config(train_flags));
        if (att->parsed()) {
            attack_cmd.kind = attack_kind_from_string(attack_kind);
            return cmd_attack(resolve_config(attack_flags), attack_cmd);
        }
        if (sw->parsed()) return cmd_sweep(resolve_config(sweep_flags), sweep_cmd);
        if (ver->parsed()) {
            static const std::map<std::string, int (*)(const StudyArgs&)> studies = {
                {"assumption-mc", study_assumption_mc}, {"iss", study_iss},
                {"forgetting", study_forgetting},       {"spline-error", study_spline_error},
                {"robustness", study_robustness},       {"norm-study", study_norms},
                {"sinemix-bench", study_sinemix_bench}, {"nfe-sweep", study_nfe_sweep},
                {"l2-vs-scale", study_l2_vs_scale}};
            const auto it = studies.find(study_name);
            if (it == studies.end()) {
                std::cerr << "unknown study `" << study_name << "`; available:";
                for (const auto& [name, fn] : studies) std::cerr << " " << name;
                std::cerr << "\n";
                return kExitValidation;
            }
            study_args.config = resolve_config(verify_flags);
            study_args.out_dir =
                verify_flags.out_dir ? *verify_flags.out_dir : study_args.config.out_dir;
            fs::create_directories(study_args.out_dir);
            return it->second(study_args);
        }
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
