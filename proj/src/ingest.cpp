#include "appsess/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "appsess/error.hpp"

namespace appsess {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
    throw ValidationError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

struct LabelRow {
    Label label;
    std::optional<double> days_observed;
};

// Returns labels keyed by subject plus the file order of subject ids.
std::pair<std::unordered_map<std::string, LabelRow>, std::vector<std::string>>
load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open labels file: " + path);

    std::unordered_map<std::string, LabelRow> rows;
    std::vector<std::string> order;
    std::string line;
    std::size_t line_no = 0;
    bool has_days_col = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() < 2 || fields[0] != "subject" || fields[1] != "label")
                line_error(path, line_no, "expected header 'subject,label[,days_observed]'");
            if (fields.size() == 3 && fields[2] == "days_observed")
                has_days_col = true;
            else if (fields.size() > 2)
                line_error(path, line_no, "unexpected header column '" + fields[2] + "'");
            continue;
        }
        if (fields.size() < 2 || fields.size() > (has_days_col ? 3u : 2u))
            line_error(path, line_no, "wrong number of fields");
        const std::string& subject = fields[0];
        if (subject.empty()) line_error(path, line_no, "field 'subject': empty");
        LabelRow row;
        if (fields[1] == "healthy")
            row.label = Label::healthy;
        else if (fields[1] == "symptomatic")
            row.label = Label::symptomatic;
        else
            line_error(path, line_no, "field 'label': unknown label '" + fields[1] + "'");
        if (has_days_col && fields.size() == 3 && !fields[2].empty()) {
            try {
                std::size_t pos = 0;
                row.days_observed = std::stod(fields[2], &pos);
                if (pos != fields[2].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                line_error(path, line_no, "field 'days_observed': not a number");
            }
            if (*row.days_observed < 1.0)
                line_error(path, line_no, "field 'days_observed': must be >= 1");
        }
        if (!rows.emplace(subject, row).second)
            line_error(path, line_no, "duplicate subject '" + subject + "'");
        order.push_back(subject);
    }
    return {std::move(rows), std::move(order)};
}

std::map<std::string, std::string> load_category_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open category map file: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() != 2 || fields[0] != "app" || fields[1] != "category")
                line_error(path, line_no, "expected header 'app,category'");
            continue;
        }
        if (fields.size() != 2) line_error(path, line_no, "wrong number of fields");
        if (fields[0].empty()) line_error(path, line_no, "field 'app': empty");
        if (fields[1].empty()) line_error(path, line_no, "field 'category': empty");
        out[fields[0]] = fields[1];
    }
    return out;
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& path, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end())
        line_error(path, line_no, std::string("field '") + key + "': missing");
    if (!it->is_string())
        line_error(path, line_no, std::string("field '") + key + "': not a string");
    return it->get<std::string>();
}

} // namespace

Cohort load_cohort(const std::string& events_path, const std::string& labels_path,
                   const std::optional<std::string>& category_map_path) {
    auto [labels, order] = load_labels(labels_path);

    Cohort cohort;
    cohort.subjects.reserve(order.size());
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& id : order) {
        Subject s;
        s.subject_id = id;
        s.label = labels[id].label;
        s.days_observed = labels[id].days_observed;
        index.emplace(id, cohort.subjects.size());
        cohort.subjects.push_back(std::move(s));
    }

    std::ifstream in(events_path);
    if (!in) throw ValidationError("cannot open events file: " + events_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            line_error(events_path, line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) line_error(events_path, line_no, "not a JSON object");

        const std::string subject = require_string(obj, "subject", events_path, line_no);
        auto it = index.find(subject);
        if (it == index.end())
            line_error(events_path, line_no,
                       "subject '" + subject + "' present in events but not in labels");
        Subject& s = cohort.subjects[it->second];

        auto ts_it = obj.find("ts");
        if (ts_it == obj.end()) line_error(events_path, line_no, "field 'ts': missing");
        if (!ts_it->is_number_integer())
            line_error(events_path, line_no, "field 'ts': not an integer");
        const std::int64_t ts = ts_it->get<std::int64_t>();
        if (ts < 0) line_error(events_path, line_no, "field 'ts': negative");

        const std::string stream = require_string(obj, "stream", events_path, line_no);
        const std::string kind = require_string(obj, "kind", events_path, line_no);

        if (stream == "app") {
            AppEvent ev;
            ev.subject_id = subject;
            ev.ts = ts;
            ev.app_id = require_string(obj, "app", events_path, line_no);
            if (ev.app_id.empty()) line_error(events_path, line_no, "field 'app': empty");
            if (kind == "open")
                ev.kind = AppEventKind::open;
            else if (kind == "close")
                ev.kind = AppEventKind::close;
            else
                line_error(events_path, line_no,
                           "field 'kind': '" + kind + "' invalid for app stream");
            s.app_events.push_back(std::move(ev));
        } else if (stream == "lock") {
            if (obj.contains("app"))
                line_error(events_path, line_no, "field 'app': not allowed for lock stream");
            LockEvent ev;
            ev.subject_id = subject;
            ev.ts = ts;
            if (kind == "unlock")
                ev.kind = LockEventKind::unlock;
            else if (kind == "lock")
                ev.kind = LockEventKind::lock;
            else
                line_error(events_path, line_no,
                           "field 'kind': '" + kind + "' invalid for lock stream");
            s.lock_events.push_back(std::move(ev));
        } else {
            line_error(events_path, line_no, "field 'stream': unknown value '" + stream + "'");
        }
    }

    for (auto& s : cohort.subjects) {
        std::stable_sort(s.app_events.begin(), s.app_events.end(),
                         [](const AppEvent& a, const AppEvent& b) { return a.ts < b.ts; });
        std::stable_sort(s.lock_events.begin(), s.lock_events.end(),
                         [](const LockEvent& a, const LockEvent& b) { return a.ts < b.ts; });
    }

    if (category_map_path) {
        cohort.category_map = load_category_map(*category_map_path);
        cohort.has_category_map = true;
    }
    return cohort;
}

void save_cohort(const Cohort& cohort, const std::string& events_path,
                 const std::string& labels_path,
                 const std::optional<std::string>& category_map_path) {
    std::ofstream labels(labels_path);
    if (!labels) throw ValidationError("cannot open labels file for writing: " + labels_path);
    labels << "subject,label,days_observed\n";
    for (const auto& s : cohort.subjects) {
        labels << s.subject_id << ',' << to_string(s.label) << ',';
        if (s.days_observed) {
            nlohmann::json d = *s.days_observed;
            labels << d.dump();
        }
        labels << '\n';
    }

    std::ofstream events(events_path);
    if (!events) throw ValidationError("cannot open events file for writing: " + events_path);
    for (const auto& s : cohort.subjects) {
        // Merge the two streams by timestamp so the file reads chronologically.
        std::size_t ai = 0, li = 0;
        auto write_app = [&](const AppEvent& e) {
            nlohmann::ordered_json o;
            o["subject"] = e.subject_id;
            o["ts"] = e.ts;
            o["stream"] = "app";
            o["kind"] = e.kind == AppEventKind::open ? "open" : "close";
            o["app"] = e.app_id;
            events << o.dump() << '\n';
        };
        auto write_lock = [&](const LockEvent& e) {
            nlohmann::ordered_json o;
            o["subject"] = e.subject_id;
            o["ts"] = e.ts;
            o["stream"] = "lock";
            o["kind"] = e.kind == LockEventKind::unlock ? "unlock" : "lock";
            events << o.dump() << '\n';
        };
        while (ai < s.app_events.size() || li < s.lock_events.size()) {
            const bool take_app =
                li == s.lock_events.size() ||
                (ai < s.app_events.size() && s.app_events[ai].ts <= s.lock_events[li].ts);
            if (take_app)
                write_app(s.app_events[ai++]);
            else
                write_lock(s.lock_events[li++]);
        }
    }

    if (category_map_path) {
        std::ofstream cats(*category_map_path);
        if (!cats)
            throw ValidationError("cannot open category file for writing: " + *category_map_path);
        cats << "app,category\n";
        for (const auto& [app, cat] : cohort.category_map) cats << app << ',' << cat << '\n';
    }
}

double derive_days_observed(const Subject& subject) {
    if (subject.days_observed) return *subject.days_observed;
    if (subject.app_events.empty() && subject.lock_events.empty())
        throw ValidationError("subject '" + subject.subject_id +
                              "': no events and no days_observed metadata");
    std::int64_t min_ts = INT64_MAX, max_ts = INT64_MIN;
    for (const auto& e : subject.app_events) {
        min_ts = std::min(min_ts, e.ts);
        max_ts = std::max(max_ts, e.ts);
    }
    for (const auto& e : subject.lock_events) {
        min_ts = std::min(min_ts, e.ts);
        max_ts = std::max(max_ts, e.ts);
    }
    const double span_days =
        static_cast<double>(max_ts - min_ts) / static_cast<double>(kMsPerDay);
    return span_days < 1.0 ? 1.0 : span_days;
}

} // namespace appsess
