#pragma once

#include <string>

namespace cw::wire {

// A filter is well-formed when `#` appears only as the final whole level and
// `+` only occupies whole levels.
bool filter_valid(const std::string& filter);

// Level-wise match: `+` matches exactly one level, `#` the remaining levels
// including the parent level itself ("a/#" matches "a"). Returns false for
// invalid filters; use filter_valid to distinguish.
bool topic_matches(const std::string& filter, const std::string& topic);

} // namespace cw::wire
