#include "appsess/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "appsess/error.hpp"
#include "appsess/ingest.hpp"
#include "appsess/rng.hpp"

namespace appsess {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;
constexpr std::int64_t kMinSlotMs = 40'000; // room for a window plus slack
constexpr std::int64_t kStudyStartTs = 1'554'000'000'000; // arbitrary fixed origin

const char* kNamedApps[] = {"Messages", "Mail",     "Safari", "Phone",  "Calendar",
                            "Clock",    "Facebook", "Instagram", "Camera", "Settings"};

std::vector<double> cumulative(const std::vector<double>& weights) {
    std::vector<double> cum(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cum[i] = acc;
    }
    return cum;
}

// Expected per-app open count per signal session under a template mixture.
std::map<std::string, double> template_marginals(const std::vector<TemplateSpec>& templates) {
    double total_w = 0.0;
    for (const auto& t : templates) total_w += t.weight;
    std::map<std::string, double> out;
    for (const auto& t : templates)
        for (const auto& app : t.apps) out[app] += t.weight / total_w;
    return out;
}

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

std::map<std::string, std::string> default_categories(
    const std::vector<std::pair<std::string, double>>& inventory) {
    std::map<std::string, std::string> cats;
    const std::map<std::string, std::string> named = {
        {"Messages", "communication"}, {"Phone", "communication"},
        {"Mail", "productivity"},      {"Calendar", "productivity"},
        {"Safari", "utilities"},       {"Clock", "utilities"},
        {"Settings", "utilities"},     {"Camera", "media"},
        {"Facebook", "social"},        {"Instagram", "social"}};
    for (const auto& [app, w] : inventory) {
        auto it = named.find(app);
        if (it != named.end())
            cats[app] = it->second;
        else
            cats[app] = "cat_" + std::to_string(fnv1a64(app) % 6);
    }
    return cats;
}

} // namespace

std::vector<std::pair<std::string, double>> default_app_inventory() {
    std::vector<std::pair<std::string, double>> inv;
    for (int i = 0; i < 40; ++i) {
        std::string name =
            i < 10 ? kNamedApps[i] : "app" + zero_pad(i + 1, 2);
        inv.emplace_back(std::move(name), std::pow(static_cast<double>(i + 1), -1.1));
    }
    return inv;
}

GeneratedCohort generate(const GeneratorConfig& config) {
    if (config.n_healthy < 0 || config.n_symptomatic < 0)
        throw ValidationError("generate: subject counts must be >= 0");
    if (config.days < 1.0) throw ValidationError("generate: days must be >= 1");
    if (!(config.sessions_per_day > 0.0))
        throw ValidationError("generate: sessions_per_day must be > 0");
    if (config.cooccurrence_signal < 0.0 || config.cooccurrence_signal > 1.0)
        throw ValidationError("generate: cooccurrence_signal must be in [0, 1]");

    const auto inventory =
        config.app_inventory.empty() ? default_app_inventory() : config.app_inventory;
    std::vector<double> inv_weights;
    inv_weights.reserve(inventory.size());
    double inv_total = 0.0;
    for (const auto& [app, w] : inventory) {
        if (w < 0.0) throw ValidationError("generate: negative app weight for " + app);
        inv_weights.push_back(w);
        inv_total += w;
    }
    if (inv_total <= 0.0) throw ValidationError("generate: app inventory has zero total weight");
    const auto inv_cum = cumulative(inv_weights);

    auto template_cum = [](const std::vector<TemplateSpec>& templates) {
        std::vector<double> w;
        w.reserve(templates.size());
        for (const auto& t : templates) {
            if (t.weight < 0.0) throw ValidationError("generate: negative template weight");
            if (t.apps.empty()) throw ValidationError("generate: empty template multiset");
            w.push_back(t.weight);
        }
        return cumulative(w);
    };

    const bool uses_templates = config.cooccurrence_signal > 0.0;
    if (uses_templates) {
        if (config.n_healthy > 0 && config.healthy_templates.empty())
            throw ValidationError("generate: healthy templates required when signal > 0");
        if (config.n_symptomatic > 0 && config.symptomatic_templates.empty())
            throw ValidationError("generate: symptomatic templates required when signal > 0");
    }
    const auto healthy_cum =
        config.healthy_templates.empty() ? std::vector<double>{}
                                         : template_cum(config.healthy_templates);
    const auto sympt_cum =
        config.symptomatic_templates.empty() ? std::vector<double>{}
                                             : template_cum(config.symptomatic_templates);

    if (config.marginal_matched && uses_templates && !config.healthy_templates.empty() &&
        !config.symptomatic_templates.empty()) {
        const auto mh = template_marginals(config.healthy_templates);
        const auto ms = template_marginals(config.symptomatic_templates);
        auto keys = mh;
        for (const auto& [k, v] : ms) keys.emplace(k, 0.0);
        for (const auto& [app, unused] : keys) {
            const double a = mh.count(app) ? mh.at(app) : 0.0;
            const double b = ms.count(app) ? ms.at(app) : 0.0;
            if (std::abs(a - b) > 1e-9)
                throw ValidationError("generate: marginal_matched violated for app '" + app +
                                      "' (" + std::to_string(a) + " vs " + std::to_string(b) +
                                      ")");
        }
    }

    const auto span_ms =
        static_cast<std::int64_t>(std::llround(config.days * static_cast<double>(kMsPerDay)));

    GeneratedCohort out;
    out.cohort.category_map = default_categories(inventory);
    out.cohort.has_category_map = true;
    auto subjects_truth = nlohmann::ordered_json::array();

    auto make_subject = [&](Label label, const std::string& id) {
        Rng rng(derive_seed(config.seed, "subject", fnv1a64(id)));
        Subject s;
        s.subject_id = id;
        s.label = label;
        s.days_observed = config.days;

        const std::int64_t n_sessions = rng.poisson(config.days * config.sessions_per_day);
        std::int64_t n_signal = 0;

        if (n_sessions > 0) {
            const std::int64_t slot_ms = span_ms / n_sessions;
            if (slot_ms < kMinSlotMs)
                throw ValidationError(
                    "generate: cannot pack " + std::to_string(n_sessions) +
                    " non-overlapping sessions into the study span; lower sessions_per_day");
            const std::int64_t dur_max = std::min<std::int64_t>(600'000, slot_ms / 2);

            for (std::int64_t k = 0; k < n_sessions; ++k) {
                const std::int64_t slot_start = kStudyStartTs + k * slot_ms;
                const std::int64_t unlock =
                    slot_start + static_cast<std::int64_t>(rng.uniform_int(
                                     static_cast<std::uint64_t>(slot_ms / 4) + 1));
                const std::int64_t dur =
                    dur_max / 2 + static_cast<std::int64_t>(rng.uniform_int(
                                      static_cast<std::uint64_t>(dur_max / 2)));
                const std::int64_t lock = unlock + dur;

                std::vector<std::string> apps;
                const bool signal =
                    uses_templates && rng.uniform01() < config.cooccurrence_signal;
                if (signal) {
                    const auto& templates = label == Label::healthy
                                                ? config.healthy_templates
                                                : config.symptomatic_templates;
                    const auto& cum =
                        label == Label::healthy ? healthy_cum : sympt_cum;
                    apps = templates[rng.pick_cumulative(cum)].apps;
                    ++n_signal;
                } else {
                    const double u = rng.uniform01();
                    const int len = u < 0.5 ? 1 : (u < 0.85 ? 2 : 3);
                    for (int a = 0; a < len; ++a)
                        apps.push_back(inventory[rng.pick_cumulative(inv_cum)].first);
                }
                rng.shuffle(apps);

                LockEvent ul{id, LockEventKind::unlock, unlock};
                s.lock_events.push_back(ul);
                const auto n_apps = static_cast<std::int64_t>(apps.size());
                for (std::int64_t a = 0; a < n_apps; ++a) {
                    const std::int64_t open_ts = unlock + (a + 1) * dur / (n_apps + 1);
                    const std::int64_t close_ts = open_ts + dur / (2 * (n_apps + 1));
                    s.app_events.push_back({id, apps[a], AppEventKind::open, open_ts});
                    s.app_events.push_back({id, apps[a], AppEventKind::close, close_ts});
                }
                LockEvent lk{id, LockEventKind::lock, lock};
                s.lock_events.push_back(lk);
            }
        }

        std::stable_sort(s.app_events.begin(), s.app_events.end(),
                         [](const AppEvent& a, const AppEvent& b) { return a.ts < b.ts; });

        nlohmann::ordered_json truth;
        truth["subject"] = id;
        truth["label"] = to_string(label);
        truth["sessions"] = n_sessions;
        truth["signal_sessions"] = n_signal;
        subjects_truth.push_back(std::move(truth));
        out.cohort.subjects.push_back(std::move(s));
    };

    for (int i = 0; i < config.n_healthy; ++i)
        make_subject(Label::healthy, "H" + zero_pad(i + 1, 3));
    for (int i = 0; i < config.n_symptomatic; ++i)
        make_subject(Label::symptomatic, "S" + zero_pad(i + 1, 3));

    out.ground_truth["seed"] = config.seed;
    out.ground_truth["days"] = config.days;
    out.ground_truth["sessions_per_day"] = config.sessions_per_day;
    out.ground_truth["cooccurrence_signal"] = config.cooccurrence_signal;
    out.ground_truth["subjects"] = std::move(subjects_truth);
    return out;
}

void write_cohort_files(const GeneratedCohort& generated, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);
    save_cohort(generated.cohort, (base / "events.jsonl").string(),
                (base / "labels.csv").string(), (base / "categories.csv").string());
    std::ofstream truth(base / "ground_truth.json", std::ios::binary);
    if (!truth) throw ValidationError("cannot write ground truth under " + dir);
    truth << generated.ground_truth.dump(2) << "\n";
}

GeneratorConfig scenario(const std::string& name) {
    GeneratorConfig cfg;
    cfg.app_inventory = default_app_inventory();

    // Four app groups of five; groups are the unit the signal is built from.
    std::vector<std::vector<std::string>> groups(4);
    for (int g = 0; g < 4; ++g)
        for (int a = 0; a < 5; ++a) groups[g].push_back(cfg.app_inventory[g * 5 + a].first);

    if (name == "E1_strong_cooccurrence") {
        cfg.n_healthy = 40;
        cfg.n_symptomatic = 20;
        cfg.days = 84.0;
        cfg.sessions_per_day = 0.25;
        cfg.cooccurrence_signal = 0.8;
        cfg.marginal_matched = true;
        // Healthy sessions pair apps within a group; symptomatic sessions
        // pair apps across adjacent groups. Per-app marginals match by
        // construction: every app appears in the same share of templates.
        for (int g = 0; g < 4; ++g)
            for (int a = 0; a < 5; ++a)
                for (int b = a + 1; b < 5; ++b)
                    cfg.healthy_templates.push_back({{groups[g][a], groups[g][b]}, 2.5});
        for (int g = 0; g < 4; ++g) {
            const auto& ga = groups[g];
            const auto& gb = groups[(g + 1) % 4];
            for (const auto& a : ga)
                for (const auto& b : gb)
                    cfg.symptomatic_templates.push_back({{a, b}, 1.0});
        }
        return cfg;
    }
    if (name == "E2_null") {
        cfg.n_healthy = 40;
        cfg.n_symptomatic = 40;
        cfg.days = 84.0;
        cfg.sessions_per_day = 0.25;
        cfg.cooccurrence_signal = 0.0;
        cfg.marginal_matched = false;
        return cfg;
    }
    if (name == "E3_marginal_only") {
        cfg.n_healthy = 30;
        cfg.n_symptomatic = 30;
        cfg.days = 84.0;
        cfg.sessions_per_day = 0.25;
        cfg.cooccurrence_signal = 0.8;
        cfg.marginal_matched = false;
        // Single-app sessions only; the classes differ solely in how often
        // each app is opened.
        for (int a = 0; a < 10; ++a) {
            const std::string app = cfg.app_inventory[a].first;
            cfg.healthy_templates.push_back({{app}, 1.0});
            cfg.symptomatic_templates.push_back({{app}, a < 5 ? 3.0 : 1.0 / 3.0});
        }
        return cfg;
    }
    throw ValidationError("unknown scenario '" + name + "'");
}

} // namespace appsess
