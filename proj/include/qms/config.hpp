#pragma once

// Run configuration: a flat INI document.
//
//   [model]    n_sites s beta epsilon l gamma dt noise_amp seed frozen_v
//   [relax]    h_ext max_tau min_tau window tol sample_stride dwell_tau
//              census_threshold initial(vacuum|kink) kink_center kink_width
//   [sweep]    h_max h_min (number or auto) target_winding h_ceiling rate
//              n_cycles settle_tau record_stride phase_stride dwell_tau
//              census_threshold first_direction noise_sign match_tol grid_points
//   [scan]     h_ext (comma list) s_lo s_hi tol max_tau min_tau window
//              steady_tol sample_stride dwell_tau census_threshold
//   [output]   dir name formats (comma list of csv, json)
//
// Exactly one of [relax], [sweep], [scan]. '#' or ';' starts a comment.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qms/lattice.hpp"
#include "qms/protocols.hpp"

namespace qms {

enum class ProtocolKind { relax, sweep, scan };
enum class Format { csv, json };

std::string_view to_string(ProtocolKind k);
std::string_view to_string(Format f);

struct RelaxConfig {
  RelaxOptions options;
  bool kink_initial = false;
  double kink_center = -1.0;  ///< < 0 centers the kink on the chain
  double kink_width = 0.0;    ///< 0 selects beta
};

struct ScanConfig {
  std::vector<double> h_values;
  double s_lo = 0.05;
  double s_hi = 1.0;
  double tol = 0.02;
  RelaxOptions relax;
};

struct RunConfig {
  ModelParams model;
  ProtocolKind protocol = ProtocolKind::relax;
  RelaxConfig relax;
  SweepProtocol sweep;
  ScanConfig scan;
  std::string out_dir = "out";
  std::string name;  ///< file stem; defaults to the protocol name
  std::vector<Format> formats{Format::csv};
};

class ConfigSyntaxError : public std::runtime_error {
 public:
  ConfigSyntaxError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_, column_;
};

/// Every violation found in one pass.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

RunConfig parse_config(std::string_view text);

/// Reads and parses a file; an unreadable file is a ConfigError.
RunConfig load_config(const std::string& path);

}  // namespace qms
