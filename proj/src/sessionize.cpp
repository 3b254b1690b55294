#include "appsess/sessionize.hpp"

namespace appsess {

std::vector<Session> sessionize(const Subject& subject, SessionizeStats* stats) {
    SessionizeStats local;
    SessionizeStats& st = stats ? *stats : local;

    // Pair each unlock with the next lock.
    struct Window {
        std::int64_t start, end;
    };
    std::vector<Window> windows;
    bool open = false;
    std::int64_t open_ts = 0;
    for (const auto& e : subject.lock_events) {
        if (e.kind == LockEventKind::unlock) {
            if (open) {
                ++st.unpaired_unlocks; // first unlock keeps the window
            } else {
                open = true;
                open_ts = e.ts;
            }
        } else {
            if (open) {
                windows.push_back({open_ts, e.ts});
                open = false;
            } else {
                ++st.unpaired_locks;
            }
        }
    }
    if (open) ++st.unpaired_unlocks;

    std::vector<Session> sessions;
    sessions.reserve(windows.size());
    std::size_t w = 0;
    Session cur;
    bool in_window = false;
    auto flush = [&]() {
        sessions.push_back(std::move(cur));
        cur = Session{};
        in_window = false;
    };

    // Both the opens and the windows are sorted; advance in lockstep.
    for (const auto& e : subject.app_events) {
        if (e.kind != AppEventKind::open) continue;
        while (w < windows.size() && e.ts >= windows[w].end) {
            if (in_window)
                flush();
            else
                ++st.empty_windows;
            ++w;
        }
        if (w < windows.size() && e.ts >= windows[w].start) {
            if (!in_window) {
                cur.subject_id = subject.subject_id;
                cur.start_ts = windows[w].start;
                cur.end_ts = windows[w].end;
                in_window = true;
            }
            cur.apps.push_back(e.app_id);
        } else {
            ++st.dropped_opens;
        }
    }
    if (in_window) {
        flush();
        ++w;
    }
    // Remaining windows saw no opens at all.
    st.empty_windows += static_cast<std::int64_t>(windows.size() - w);

    return sessions;
}

std::vector<std::string> corpus_of(const Subject& subject) {
    std::vector<std::string> tokens;
    for (const auto& e : subject.app_events)
        if (e.kind == AppEventKind::open) tokens.push_back(e.app_id);
    return tokens;
}

std::vector<std::vector<std::string>> build_corpora(const std::vector<Subject>& subjects,
                                                    SentenceScope scope,
                                                    SessionizeStats* stats) {
    std::vector<std::vector<std::string>> corpora;
    for (const auto& s : subjects) {
        if (scope == SentenceScope::user) {
            auto sentence = corpus_of(s);
            if (!sentence.empty()) corpora.push_back(std::move(sentence));
        } else {
            SessionizeStats st;
            for (auto& sess : sessionize(s, &st)) corpora.push_back(std::move(sess.apps));
            if (stats) *stats += st;
        }
    }
    return corpora;
}

} // namespace appsess
