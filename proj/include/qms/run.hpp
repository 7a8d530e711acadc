#pragma once

// Run orchestration behind the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "qms/config.hpp"

namespace qms {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<Format> format;
  std::optional<std::string> out_dir;
  bool quiet = false;
};

/// Worker cap from QMS_THREADS; hardware concurrency when unset. Throws
/// ConfigError on a malformed value.
std::size_t worker_limit();

/// Executes the protocol and writes every output atomically into the run
/// directory. Summary line on `out`, diagnostics on `err`.
int run(RunConfig config, const RunOverrides& overrides, std::ostream& out, std::ostream& err);

/// Loads a config file, checks it holds the expected protocol (if given) and
/// runs it. Config problems map to kExitConfig.
int run_file(const std::string& path, std::optional<ProtocolKind> expected,
             const RunOverrides& overrides, std::ostream& out, std::ostream& err);

/// Parses and validates only.
int validate_file(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace qms
