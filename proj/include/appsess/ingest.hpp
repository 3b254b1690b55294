#pragma once

#include <optional>
#include <string>

#include "appsess/types.hpp"

namespace appsess {

// Loads and validates a cohort from the on-disk formats:
//   events:       JSON Lines, one object per line with keys
//                 subject, ts, stream ("app"|"lock"), kind, and app (app stream only)
//   labels:       CSV "subject,label[,days_observed]"
//   category map: CSV "app,category" (optional)
// Streams are sorted by timestamp (stable on ties); duplicates are kept.
// Malformed rows raise ValidationError naming the file, line, and field.
Cohort load_cohort(const std::string& events_path, const std::string& labels_path,
                   const std::optional<std::string>& category_map_path = std::nullopt);

// Writes a cohort back out in the exact load formats. load(save(load(x)))
// equals load(x) field for field.
void save_cohort(const Cohort& cohort, const std::string& events_path,
                 const std::string& labels_path,
                 const std::optional<std::string>& category_map_path = std::nullopt);

// Metadata override if present, else observation span over both streams in
// days, clamped to >= 1. A subject with no events and no metadata is an error.
double derive_days_observed(const Subject& subject);

} // namespace appsess
