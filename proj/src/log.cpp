#include "ltcal/log.hpp"

#include <iostream>

namespace ltcal {

namespace {
bool g_quiet = false;
}

void set_quiet(bool quiet) { g_quiet = quiet; }
bool quiet() { return g_quiet; }

void warn(std::string_view msg) {
  if (!g_quiet) std::cerr << "warning: " << msg << '\n';
}

void info(std::string_view msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

}  // namespace ltcal
