#pragma once

#include <functional>
#include <string>

namespace ergocov {

enum class Verbosity { quiet = 0, info = 1, debug = 2 };

using DiagnosticSink = std::function<void(Verbosity, const std::string&)>;

// The default sink writes to std::clog when the message level is at or below
// the global verbosity (quiet by default).
void set_verbosity(Verbosity level);
Verbosity verbosity();
void set_diagnostic_sink(DiagnosticSink sink);
void diagnose(Verbosity level, const std::string& message);

}  // namespace ergocov
