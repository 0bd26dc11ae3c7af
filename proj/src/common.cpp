#include "debench/common.hpp"

namespace debench {

LogLevel& log_level() {
  static LogLevel level = LogLevel::Info;
  return level;
}

}  // namespace debench
