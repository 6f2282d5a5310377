#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace cw::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Threshold comes from CAUSALWRAP_LOG (error|warn|info|debug), default warn.
inline Level threshold() {
    static const Level lvl = [] {
        const char* env = std::getenv("CAUSALWRAP_LOG");
        if (!env) return Level::Warn;
        const std::string s(env);
        if (s == "error") return Level::Error;
        if (s == "warn") return Level::Warn;
        if (s == "info") return Level::Info;
        if (s == "debug") return Level::Debug;
        return Level::Warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[causalwrap:%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void error(const std::string& m) { emit(Level::Error, m); }
inline void warn(const std::string& m) { emit(Level::Warn, m); }
inline void info(const std::string& m) { emit(Level::Info, m); }
inline void debug(const std::string& m) { emit(Level::Debug, m); }

}  // namespace cw::log
