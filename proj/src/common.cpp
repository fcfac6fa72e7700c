#include "neuron_margins/common.hpp"

#include <cstdlib>
#include <iostream>

namespace neuron_margins {

namespace log {

namespace {

Level initial_level() {
    const char* env = std::getenv("NEURON_MARGINS_LOG");
    if (!env) return Level::warn;
    std::string v(env);
    if (v == "error") return Level::error;
    if (v == "warn" || v == "warning") return Level::warn;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
}

Level& level_ref() {
    static Level lv = initial_level();
    return lv;
}

const char* name(Level lv) {
    switch (lv) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "?";
}

}  // namespace

Level level() { return level_ref(); }
void set_level(Level lv) { level_ref() = lv; }

void write(Level lv, const std::string& msg) {
    if (static_cast<int>(lv) > static_cast<int>(level())) return;
    std::cerr << "[" << name(lv) << "] " << msg << "\n";
}

}  // namespace log

void emit_warning(std::vector<std::string>* sink, const std::string& msg) {
    if (sink) sink->push_back(msg);
    log::warn(msg);
}

}  // namespace neuron_margins
