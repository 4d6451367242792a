#pragma once

#include <string_view>

namespace dhn::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Current threshold; initialized from DHN_LOG (error|info|debug), default error.
Level level();
void set_level(Level level);
/// Parses a level name; throws dhn::Error on unknown names.
Level parse_level(std::string_view name);

void error(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace dhn::log
