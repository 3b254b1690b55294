#pragma once

#include <cstdint>
#include <vector>

#include "appsess/types.hpp"

namespace appsess {

struct SessionizeStats {
    std::int64_t dropped_opens = 0;     // opens outside every unlock/lock window
    std::int64_t unpaired_unlocks = 0;  // extra unlocks inside an open window, or trailing
    std::int64_t unpaired_locks = 0;    // locks with no preceding unlock
    std::int64_t empty_windows = 0;     // windows with zero app opens

    SessionizeStats& operator+=(const SessionizeStats& o) {
        dropped_opens += o.dropped_opens;
        unpaired_unlocks += o.unpaired_unlocks;
        unpaired_locks += o.unpaired_locks;
        empty_windows += o.empty_windows;
        return *this;
    }
};

// Segments a subject's app-open stream into sessions delimited by
// unlock/lock pairs. The lock stream is scanned left to right: the first
// unlock opens a window, the next lock closes it; extra unlocks inside a
// window and locks outside one are skipped (counted). Each app OPEN event
// with start <= ts < end joins that window's session; close events never
// affect membership; opens outside every window are dropped (counted);
// windows with no opens are dropped. Output is sorted by start_ts.
std::vector<Session> sessionize(const Subject& subject, SessionizeStats* stats = nullptr);

// The subject's full app-open token sequence in time order (the per-user
// "sentence"; session boundaries are not inserted).
std::vector<std::string> corpus_of(const Subject& subject);

enum class SentenceScope { user, session };

// Sentences for embedding training: one per subject (default) or one per
// session. Empty sentences are omitted.
std::vector<std::vector<std::string>> build_corpora(const std::vector<Subject>& subjects,
                                                    SentenceScope scope,
                                                    SessionizeStats* stats = nullptr);

} // namespace appsess
