#include "wire/topic.hpp"

#include <vector>

namespace cw::wire {

namespace {

std::vector<std::string> split_levels(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t slash = s.find('/', start);
        if (slash == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, slash - start));
        start = slash + 1;
    }
}

} // namespace

bool filter_valid(const std::string& filter) {
    if (filter.empty()) return false;
    auto levels = split_levels(filter);
    for (size_t i = 0; i < levels.size(); ++i) {
        const auto& lv = levels[i];
        if (lv == "#") {
            if (i + 1 != levels.size()) return false;
            continue;
        }
        if (lv == "+") continue;
        if (lv.find('#') != std::string::npos || lv.find('+') != std::string::npos) return false;
    }
    return true;
}

bool topic_matches(const std::string& filter, const std::string& topic) {
    if (!filter_valid(filter) || topic.empty()) return false;
    auto f = split_levels(filter);
    auto t = split_levels(topic);
    size_t i = 0;
    for (; i < f.size(); ++i) {
        if (f[i] == "#") return true; // matches the parent level and below
        if (i >= t.size()) return false;
        if (f[i] == "+") continue;
        if (f[i] != t[i]) return false;
    }
    return i == t.size();
}

} // namespace cw::wire
