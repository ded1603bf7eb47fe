#include <fimcb/log.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace fimcb {

namespace {

std::atomic<int> g_level{-1};
std::mutex g_mutex;

LogLevel level_from_env() {
    const char* env = std::getenv("FIMCB_LOG");
    if (env == nullptr) {
        return LogLevel::Info;
    }
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Info;
}

void emit(const char* tag, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

} // namespace

LogLevel log_level() {
    int v = g_level.load(std::memory_order_relaxed);
    if (v < 0) {
        v = static_cast<int>(level_from_env());
        g_level.store(v, std::memory_order_relaxed);
    }
    return static_cast<LogLevel>(v);
}

void set_log_level(LogLevel level) {
    g_level.store(static_cast<int>(level), std::memory_order_relaxed);
}

void log_error(const std::string& message) {
    emit("error", message);
}

void log_info(const std::string& message) {
    if (log_level() >= LogLevel::Info) emit("info", message);
}

void log_debug(const std::string& message) {
    if (log_level() >= LogLevel::Debug) emit("debug", message);
}

} // namespace fimcb
