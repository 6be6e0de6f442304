#pragma once

// key=value progress lines on stderr. PINA_XMC_LOG selects the level:
// error, warn, info (default) or debug.

#include <cstdlib>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

namespace pina_xmc::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level level_from_env() {
    const char* env = std::getenv("PINA_XMC_LOG");
    if (!env) return Level::info;
    const std::string_view s(env);
    if (s == "error" || s == "quiet") return Level::error;
    if (s == "warn") return Level::warn;
    if (s == "debug") return Level::debug;
    return Level::info;
}

inline Level& current_level() {
    static Level level = level_from_env();
    return level;
}

inline const char* name(Level l) {
    switch (l) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "info";
}

struct Field {
    std::string key;
    std::string value;

    template <class T>
    Field(std::string k, const T& v) : key(std::move(k)) {
        std::ostringstream os;
        os << v;
        value = os.str();
    }
};

inline void emit(Level l, std::string_view event, std::initializer_list<Field> fields = {}) {
    if (static_cast<int>(l) > static_cast<int>(current_level())) return;
    std::string line = std::string("level=") + name(l) + " event=" + std::string(event);
    for (const auto& f : fields) {
        line += ' ' + f.key + '=';
        // quote values that would break the key=value split
        if (f.value.find_first_of(" \t\"=") != std::string::npos || f.value.empty()) {
            line += '"';
            for (char c : f.value) {
                if (c == '"' || c == '\\') line += '\\';
                line += c;
            }
            line += '"';
        } else {
            line += f.value;
        }
    }
    line += '\n';
    std::cerr << line;
}

inline void info(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::info, event, fields); }
inline void debug(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::debug, event, fields); }
inline void warn(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::warn, event, fields); }
inline void error(std::string_view event, std::initializer_list<Field> fields = {}) { emit(Level::error, event, fields); }

}  // namespace pina_xmc::log
