#include "dhn/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "dhn/errors.hpp"

namespace dhn::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("DHN_LOG");
  if (env == nullptr) return Level::Error;
  try {
    return parse_level(env);
  } catch (const Error&) {
    return Level::Error;
  }
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(initial_level())};
  return lvl;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void emit(Level lvl, const char* tag, std::string_view msg) {
  if (static_cast<int>(lvl) > current().load()) return;
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[dhn " << tag << "] " << msg << '\n';
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }

void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

Level parse_level(std::string_view name) {
  if (name == "error") return Level::Error;
  if (name == "info") return Level::Info;
  if (name == "debug") return Level::Debug;
  throw Error("unknown log level '" + std::string(name) + "'");
}

void error(std::string_view msg) { emit(Level::Error, "error", msg); }
void info(std::string_view msg) { emit(Level::Info, "info", msg); }
void debug(std::string_view msg) { emit(Level::Debug, "debug", msg); }

}  // namespace dhn::log
