#pragma once

// Serialization of run records. Doubles are written in shortest round-trip
// form, so parse(write(x)) == x bit for bit.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qms/config.hpp"
#include "qms/protocols.hpp"

namespace qms {

inline constexpr std::string_view kRowHeader =
    "tau,h_ext,phi,winding,e_field,e_int,e_qubit,e_total,q_conserved,max_excitation,cycle";
inline constexpr std::string_view kEventHeader =
    "tau,h_ext,winding_before,winding_after,phi_before,phi_after";
inline constexpr std::string_view kLoopHeader = "cycle,branch,h_ext,phi,winding";
inline constexpr std::string_view kScanHeader = "h_ext,s_star";
inline constexpr std::string_view kStateHeader = "site,a,v,c0_re,c0_im,c1_re,c1_im";

std::string_view version();

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Malformed serialized content.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double x);

std::string rows_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> rows_from_csv(std::string_view text);
std::string events_to_csv(const std::vector<TransitionEvent>& events);
std::vector<TransitionEvent> events_from_csv(std::string_view text);

struct LoopPoint {
  int cycle = 0;
  std::string branch;  ///< "descending" or "ascending"
  double h_ext = 0.0;
  double phi = 0.0;
  int winding = 0;
  bool operator==(const LoopPoint&) const = default;
};

std::vector<LoopPoint> loop_points(const LoopSummary& summary);
std::string loop_to_csv(const std::vector<LoopPoint>& points);
std::vector<LoopPoint> loop_from_csv(std::string_view text);

struct ScanPoint {
  double h_ext = 0.0;
  double s_star = 0.0;
  bool operator==(const ScanPoint&) const = default;
};

std::string scan_to_csv(const std::vector<ScanPoint>& points);
std::vector<ScanPoint> scan_from_csv(std::string_view text);

/// Field and amplitudes per site; tau and h_ext travel in the metadata.
std::string state_to_csv(const SystemState& state);
SystemState state_from_csv(std::string_view text, double tau = 0.0, double h_ext = 0.0);

nlohmann::json to_json(const ModelParams& p);
ModelParams model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepRecord& rec);
SweepRecord record_from_json(const nlohmann::json& j);

/// The sidecar written with every run.
nlohmann::json metadata(const ModelParams& params, const nlohmann::json& protocol,
                        const std::string& timestamp);

/// Files staged in memory and committed by write-then-rename. Nothing touches
/// the disk before commit(); a failed commit removes everything it wrote.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& filename, std::string content);
  void commit() const;

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::vector<std::string> names() const;

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Writes <base>.csv and <base>.events.csv (csv) or <base>.json (json).
void write_sweep_record(const SweepRecord& record, Format format,
                        const std::filesystem::path& base);
SweepRecord read_sweep_record(Format format, const std::filesystem::path& base);

/// Atomic single-file write.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace qms
