#include "appsess/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "appsess/error.hpp"
#include "appsess/rng.hpp"

namespace appsess {

namespace {

// Pulls known keys out of an object and rejects anything left over.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& obj, std::string context)
        : obj_(obj), context_(std::move(context)) {
        if (!obj.is_object()) throw ValidationError("config: " + context_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        seen_.insert(key);
        try {
            out = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("config: " + context_ + "." + key + " has the wrong type");
        }
    }

    const nlohmann::json* sub(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ValidationError("config: unknown key '" + context_ + "." + it.key() + "'");
    }

private:
    const nlohmann::json& obj_;
    std::string context_;
    std::set<std::string> seen_;
};

std::vector<TemplateSpec> parse_templates(const nlohmann::json& arr, const std::string& ctx) {
    if (!arr.is_array()) throw ValidationError("config: " + ctx + " must be an array");
    std::vector<TemplateSpec> out;
    for (const auto& e : arr) {
        ObjectReader r(e, ctx + "[]");
        TemplateSpec t;
        r.get("apps", t.apps);
        r.get("weight", t.weight);
        r.finish();
        out.push_back(std::move(t));
    }
    return out;
}

GeneratorConfig parse_synth(const nlohmann::json& j, std::uint64_t default_seed) {
    ObjectReader r(j, "synth");
    GeneratorConfig cfg;
    std::string scenario_name;
    r.get("scenario", scenario_name);
    if (!scenario_name.empty()) cfg = scenario(scenario_name);
    cfg.seed = default_seed;

    r.get("n_healthy", cfg.n_healthy);
    r.get("n_symptomatic", cfg.n_symptomatic);
    r.get("days", cfg.days);
    r.get("sessions_per_day", cfg.sessions_per_day);
    r.get("cooccurrence_signal", cfg.cooccurrence_signal);
    r.get("marginal_matched", cfg.marginal_matched);
    r.get("seed", cfg.seed);
    if (const auto* inv = r.sub("app_inventory")) {
        if (!inv->is_array()) throw ValidationError("config: synth.app_inventory must be an array");
        cfg.app_inventory.clear();
        for (const auto& e : *inv) {
            ObjectReader er(e, "synth.app_inventory[]");
            std::string app;
            double weight = 1.0;
            er.get("app", app);
            er.get("weight", weight);
            er.finish();
            if (app.empty()) throw ValidationError("config: synth.app_inventory entry missing app");
            cfg.app_inventory.emplace_back(std::move(app), weight);
        }
    }
    if (const auto* t = r.sub("healthy_templates"))
        cfg.healthy_templates = parse_templates(*t, "synth.healthy_templates");
    if (const auto* t = r.sub("symptomatic_templates"))
        cfg.symptomatic_templates = parse_templates(*t, "synth.symptomatic_templates");
    r.finish();
    return cfg;
}

nlohmann::ordered_json resolve(const RunConfig& c) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json paths;
    paths["events"] = c.paths.events;
    paths["labels"] = c.paths.labels;
    paths["category_map"] = c.paths.category_map;
    paths["out"] = c.paths.out;
    j["paths"] = std::move(paths);
    j["variant"] = variant_name(c.variant);
    nlohmann::ordered_json grid;
    grid["Ks"] = c.grid.Ks;
    grid["Cs"] = c.grid.Cs;
    j["grid"] = std::move(grid);
    nlohmann::ordered_json emb;
    emb["dim"] = c.pipeline.embedding.dim;
    emb["window"] = c.pipeline.embedding.window;
    emb["epochs"] = c.pipeline.embedding.epochs;
    emb["negatives"] = c.pipeline.embedding.negatives;
    emb["lr_start"] = c.pipeline.embedding.lr_start;
    emb["lr_end"] = c.pipeline.embedding.lr_end;
    emb["min_count"] = c.pipeline.embedding.min_count;
    emb["sentence_scope"] =
        c.pipeline.sentence_scope == SentenceScope::user ? "user" : "session";
    j["embedding"] = std::move(emb);
    nlohmann::ordered_json km;
    km["restarts"] = c.pipeline.kmeans.restarts;
    km["max_iters"] = c.pipeline.kmeans.max_iters;
    km["tol"] = c.pipeline.kmeans.tol;
    j["kmeans"] = std::move(km);
    nlohmann::ordered_json feat;
    feat["rescaler_mode"] = c.pipeline.rescale_mode == Rescaler::Mode::per_column
                                ? "per_column"
                                : "global_scalar";
    feat["dedupe_within_session"] = c.pipeline.repr.dedupe_within_session;
    j["features"] = std::move(feat);
    j["fit_scope"] = fit_scope_name(c.fit_scope);
    j["seed"] = c.pipeline.seed;
    j["threads"] = c.pipeline.threads;
    nlohmann::ordered_json intro;
    intro["top_n"] = c.introspect.top_n;
    intro["top_m"] = c.introspect.top_m;
    intro["top_sessions"] = c.introspect.top_sessions;
    j["introspect"] = std::move(intro);
    nlohmann::ordered_json synth;
    synth["n_healthy"] = c.synth.n_healthy;
    synth["n_symptomatic"] = c.synth.n_symptomatic;
    synth["days"] = c.synth.days;
    synth["sessions_per_day"] = c.synth.sessions_per_day;
    synth["cooccurrence_signal"] = c.synth.cooccurrence_signal;
    synth["marginal_matched"] = c.synth.marginal_matched;
    synth["seed"] = c.synth.seed;
    synth["n_inventory_apps"] =
        c.synth.app_inventory.empty() ? default_app_inventory().size()
                                      : c.synth.app_inventory.size();
    synth["n_healthy_templates"] = c.synth.healthy_templates.size();
    synth["n_symptomatic_templates"] = c.synth.symptomatic_templates.size();
    j["synth"] = std::move(synth);
    return j;
}

} // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig c;
    ObjectReader r(j, "config");

    if (const auto* p = r.sub("paths")) {
        ObjectReader pr(*p, "paths");
        pr.get("events", c.paths.events);
        pr.get("labels", c.paths.labels);
        pr.get("category_map", c.paths.category_map);
        pr.get("out", c.paths.out);
        pr.finish();
    }
    std::string variant = "full";
    r.get("variant", variant);
    c.variant = variant_from_name(variant);

    if (const auto* g = r.sub("grid")) {
        ObjectReader gr(*g, "grid");
        gr.get("Ks", c.grid.Ks);
        gr.get("Cs", c.grid.Cs);
        gr.finish();
    }
    if (const auto* e = r.sub("embedding")) {
        ObjectReader er(*e, "embedding");
        er.get("dim", c.pipeline.embedding.dim);
        er.get("window", c.pipeline.embedding.window);
        er.get("epochs", c.pipeline.embedding.epochs);
        er.get("negatives", c.pipeline.embedding.negatives);
        er.get("lr_start", c.pipeline.embedding.lr_start);
        er.get("lr_end", c.pipeline.embedding.lr_end);
        er.get("min_count", c.pipeline.embedding.min_count);
        std::string scope = "user";
        er.get("sentence_scope", scope);
        if (scope == "user")
            c.pipeline.sentence_scope = SentenceScope::user;
        else if (scope == "session")
            c.pipeline.sentence_scope = SentenceScope::session;
        else
            throw ValidationError("config: embedding.sentence_scope must be user or session");
        er.finish();
    }
    if (const auto* k = r.sub("kmeans")) {
        ObjectReader kr(*k, "kmeans");
        kr.get("restarts", c.pipeline.kmeans.restarts);
        kr.get("max_iters", c.pipeline.kmeans.max_iters);
        kr.get("tol", c.pipeline.kmeans.tol);
        kr.finish();
    }
    if (const auto* f = r.sub("features")) {
        ObjectReader fr(*f, "features");
        std::string mode = "per_column";
        fr.get("rescaler_mode", mode);
        if (mode == "per_column")
            c.pipeline.rescale_mode = Rescaler::Mode::per_column;
        else if (mode == "global_scalar")
            c.pipeline.rescale_mode = Rescaler::Mode::global_scalar;
        else
            throw ValidationError(
                "config: features.rescaler_mode must be per_column or global_scalar");
        fr.get("dedupe_within_session", c.pipeline.repr.dedupe_within_session);
        fr.finish();
    }
    std::string scope = "per_fold";
    r.get("fit_scope", scope);
    c.fit_scope = fit_scope_from_name(scope);
    r.get("seed", c.pipeline.seed);
    r.get("threads", c.pipeline.threads);
    if (const auto* i = r.sub("introspect")) {
        ObjectReader ir(*i, "introspect");
        ir.get("top_n", c.introspect.top_n);
        ir.get("top_m", c.introspect.top_m);
        ir.get("top_sessions", c.introspect.top_sessions);
        ir.finish();
    }
    c.synth.seed = c.pipeline.seed;
    if (const auto* s = r.sub("synth")) c.synth = parse_synth(*s, c.pipeline.seed);
    r.finish();

    c.resolved = resolve(c);
    return c;
}

void refresh_resolved(RunConfig& config) { config.resolved = resolve(config); }

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    nlohmann::ordered_json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = config.pipeline.seed;
    const std::string dump = config.resolved.dump();
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump)));
    m["config_hash"] = hex;
    m["config"] = config.resolved;
    std::ofstream out(std::filesystem::path(out_dir) / "manifest.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest under " + out_dir);
    out << m.dump(2) << "\n";
}

} // namespace appsess
