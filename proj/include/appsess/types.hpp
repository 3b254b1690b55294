#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace appsess {

enum class AppEventKind { open, close };
enum class LockEventKind { unlock, lock };
enum class Label { healthy, symptomatic };

// Timestamps are integer milliseconds since the Unix epoch (UTC).
// Integer math keeps session segmentation exact.
struct AppEvent {
    std::string subject_id;
    std::string app_id;
    AppEventKind kind = AppEventKind::open;
    std::int64_t ts = 0;
};

struct LockEvent {
    std::string subject_id;
    LockEventKind kind = LockEventKind::unlock;
    std::int64_t ts = 0;
};

struct Subject {
    std::string subject_id;
    Label label = Label::healthy;
    std::optional<double> days_observed; // metadata override; derived from span if absent
    std::vector<AppEvent> app_events;    // sorted by ts, stable on ties
    std::vector<LockEvent> lock_events;  // sorted by ts, stable on ties
};

struct Cohort {
    std::vector<Subject> subjects;
    std::map<std::string, std::string> category_map; // app_id -> category_id
    bool has_category_map = false;
};

// All app openings between one unlock and the next lock.
struct Session {
    std::string subject_id;
    std::int64_t start_ts = 0; // unlock time
    std::int64_t end_ts = 0;   // lock time; opens live in [start_ts, end_ts)
    std::vector<std::string> apps; // in order of opening, repeats kept
};

inline const char* to_string(Label l) {
    return l == Label::healthy ? "healthy" : "symptomatic";
}

} // namespace appsess
