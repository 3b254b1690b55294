#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "appsess/error.hpp"
#include "appsess/evaluation.hpp"
#include "appsess/ingest.hpp"
#include "appsess/introspect.hpp"
#include "appsess/run_config.hpp"
#include "appsess/synthgen.hpp"

namespace {

namespace fs = std::filesystem;
using namespace appsess;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> variant;
    std::optional<std::string> fit_scope;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON run config")->required();
    cmd->add_option("--seed", args.seed, "override the root seed");
    cmd->add_option("--out", args.out, "override the output directory");
    cmd->add_option("--variant", args.variant, "override the model variant (full, B1..B6)");
    cmd->add_option("--fit-scope", args.fit_scope, "per_fold or global");
    cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed) {
        cfg.pipeline.seed = *args.seed;
        cfg.synth.seed = *args.seed;
    }
    if (args.out) cfg.paths.out = *args.out;
    if (args.variant) cfg.variant = variant_from_name(*args.variant);
    if (args.fit_scope) cfg.fit_scope = fit_scope_from_name(*args.fit_scope);
    if (args.threads) cfg.pipeline.threads = *args.threads;
    refresh_resolved(cfg);
    return cfg;
}

Cohort load_inputs(const RunConfig& cfg) {
    if (cfg.paths.events.empty() || cfg.paths.labels.empty())
        throw ValidationError("config: paths.events and paths.labels are required");
    std::optional<std::string> cats;
    if (!cfg.paths.category_map.empty()) cats = cfg.paths.category_map;
    return load_cohort(cfg.paths.events, cfg.paths.labels, cats);
}

int cmd_synth(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    const auto generated = generate(cfg.synth);
    write_cohort_files(generated, cfg.paths.out);
    write_manifest(cfg, "synth", cfg.paths.out);
    std::cout << "wrote cohort (" << generated.cohort.subjects.size() << " subjects) to "
              << cfg.paths.out << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    const Cohort cohort = load_inputs(cfg);
    const EvaluationReport report =
        outer_loo(cohort, cfg.variant, cfg.grid, cfg.fit_scope, cfg.pipeline);
    fs::create_directories(cfg.paths.out);
    const auto base = fs::path(cfg.paths.out);
    const std::string name = variant_name(cfg.variant);
    write_report_json(report, (base / ("report_" + name + ".json")).string());
    write_roc_csv(report, (base / ("roc_" + name + ".csv")).string());
    write_manifest(cfg, "evaluate", cfg.paths.out);
    std::cout << "variant " << name << " auroc " << report.auroc << " ("
              << report.runtime_seconds << " s)\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    const Cohort cohort = load_inputs(cfg);
    const auto reports = ablation_table(cohort, cfg.grid, cfg.fit_scope, cfg.pipeline);
    fs::create_directories(cfg.paths.out);
    const auto base = fs::path(cfg.paths.out);
    write_ablation_csv(reports, (base / "ablation.csv").string());
    write_ablation_json(reports, (base / "ablation.json").string());
    for (const auto& r : reports)
        write_report_json(r,
                          (base / ("report_" + std::string(variant_name(r.variant)) + ".json"))
                              .string());
    write_manifest(cfg, "ablate", cfg.paths.out);
    for (const auto& r : reports)
        std::cout << variant_name(r.variant) << " " << r.auroc << "\n";
    std::cout << "chance 0.5\n";
    return 0;
}

int cmd_introspect(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    const Cohort cohort = load_inputs(cfg);
    fs::create_directories(cfg.paths.out);
    const auto base = fs::path(cfg.paths.out);

    // Whole-cohort fit: session-type contribution ranking.
    const FittedPipeline pipeline = fit_full_pipeline(cohort, cfg.grid, cfg.pipeline);
    const auto ranking =
        rank_type_contributions(cohort, pipeline, cfg.introspect.top_n, cfg.introspect.top_m);
    write_type_contributions_json(ranking, (base / "type_contributions.json").string());
    write_type_contributions_csv(ranking, (base / "type_contributions.csv").string());
    write_delta_csv(ranking, (base / "type_app_deltas.csv").string());
    write_features_csv(pipeline.rescaled_features, (base / "features.csv").string());

    // Per-subject top sessions under the LOO fold models.
    std::vector<FoldModel> folds;
    const EvaluationReport report =
        outer_loo(cohort, Variant::full, cfg.grid, cfg.fit_scope, cfg.pipeline, &folds);
    std::vector<TopSessionsResult> tops;
    tops.reserve(cohort.subjects.size());
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i)
        tops.push_back(per_subject_top_sessions(cohort.subjects[i], folds[i],
                                                cfg.introspect.top_sessions,
                                                cfg.pipeline.repr));
    write_top_sessions_json(tops, (base / "top_sessions.json").string());
    write_top_sessions_csv(tops, (base / "top_sessions.csv").string());
    write_report_json(report, (base / "report_full.json").string());
    write_manifest(cfg, "introspect", cfg.paths.out);
    std::cout << "introspection reports written to " << cfg.paths.out << " (loo auroc "
              << report.auroc << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"App-usage session pipeline: synthesize cohorts, evaluate variants, "
                 "inspect the fitted model"};
    app.require_subcommand(1);

    CommonArgs synth_args, eval_args, ablate_args, intro_args;
    add_common(app.add_subcommand("synth", "generate a synthetic cohort"), synth_args);
    add_common(app.add_subcommand("evaluate", "nested leave-one-out evaluation of one variant"),
               eval_args);
    add_common(app.add_subcommand("ablate", "evaluate all seven variants"), ablate_args);
    add_common(app.add_subcommand("introspect", "contribution analyses of the full model"),
               intro_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("synth")) return cmd_synth(synth_args);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(eval_args);
        if (app.got_subcommand("ablate")) return cmd_ablate(ablate_args);
        if (app.got_subcommand("introspect")) return cmd_introspect(intro_args);
    } catch (const appsess::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
