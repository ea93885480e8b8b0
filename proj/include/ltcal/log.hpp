#pragma once

#include <string_view>

namespace ltcal {

/// Process-wide quiet switch (set by the CLI's --quiet).
void set_quiet(bool quiet);
bool quiet();

/// Writes "warning: ..." to stderr unless quiet.
void warn(std::string_view msg);

/// Writes an informational line to stderr unless quiet.
void info(std::string_view msg);

}  // namespace ltcal
