#include "ergocov/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ergocov {
namespace {

std::atomic<int> g_level{static_cast<int>(Verbosity::quiet)};
std::mutex g_sink_mutex;
DiagnosticSink g_sink;

}  // namespace

void set_verbosity(Verbosity level) { g_level.store(static_cast<int>(level)); }

Verbosity verbosity() { return static_cast<Verbosity>(g_level.load()); }

void set_diagnostic_sink(DiagnosticSink sink) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void diagnose(Verbosity level, const std::string& message) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  if (static_cast<int>(level) <= g_level.load()) std::clog << "[ergocov] " << message << '\n';
}

}  // namespace ergocov
