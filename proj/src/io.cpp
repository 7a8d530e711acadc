#include "qms/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#ifndef QMS_VERSION
#define QMS_VERSION "0.0.0"
#endif

namespace qms {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view version() { return QMS_VERSION; }

IoError::IoError(const fs::path& path, const std::string& what)
    : std::runtime_error(path.string() + ": " + what), path_(path) {}

std::string format_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ec == std::errc{} ? end : buf);
}

namespace {

std::string format_int(long long x) {
  char buf[24];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

// Splits CSV text into data lines after checking the header.
std::vector<std::vector<std::string_view>> split_csv(std::string_view text,
                                                     std::string_view header) {
  std::vector<std::vector<std::string_view>> out;
  std::size_t pos = 0, lineno = 0;
  bool seen_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line != header)
        throw ParseError("csv header mismatch: expected '" + std::string(header) + "', got '" +
                         std::string(line) + "'");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (true) {
      const std::size_t c = line.find(',', f);
      fields.push_back(line.substr(f, c == std::string_view::npos ? line.size() - f : c - f));
      if (c == std::string_view::npos) break;
      f = c + 1;
    }
    const auto want = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    if (fields.size() != want)
      throw ParseError("csv line " + std::to_string(lineno) + ": expected " +
                       std::to_string(want) + " fields, got " + std::to_string(fields.size()));
    out.push_back(std::move(fields));
  }
  if (!seen_header) throw ParseError("csv input is empty");
  return out;
}

template <class T>
T parse_field(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError("malformed csv field '" + std::string(s) + "'");
  return v;
}

double dbl(std::string_view s) { return parse_field<double>(s); }
int integer(std::string_view s) { return parse_field<int>(s); }

}  // namespace

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out(kRowHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.tau) + ',' + format_double(r.h_ext) + ',' + format_double(r.phi) + ',' +
           format_int(r.winding) + ',' + format_double(r.e_field) + ',' + format_double(r.e_int) +
           ',' + format_double(r.e_qubit) + ',' + format_double(r.e_total) + ',' +
           format_double(r.q_conserved) + ',' + format_double(r.max_excitation) + ',' +
           format_int(r.cycle) + '\n';
  }
  return out;
}

std::vector<SweepRow> rows_from_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  for (const auto& f : split_csv(text, kRowHeader))
    rows.push_back({dbl(f[0]), dbl(f[1]), dbl(f[2]), integer(f[3]), dbl(f[4]), dbl(f[5]),
                    dbl(f[6]), dbl(f[7]), dbl(f[8]), dbl(f[9]), integer(f[10])});
  return rows;
}

std::string events_to_csv(const std::vector<TransitionEvent>& events) {
  std::string out(kEventHeader);
  out += '\n';
  for (const auto& e : events)
    out += format_double(e.tau) + ',' + format_double(e.h_ext) + ',' +
           format_int(e.winding_before) + ',' + format_int(e.winding_after) + ',' +
           format_double(e.phi_before) + ',' + format_double(e.phi_after) + '\n';
  return out;
}

std::vector<TransitionEvent> events_from_csv(std::string_view text) {
  std::vector<TransitionEvent> out;
  for (const auto& f : split_csv(text, kEventHeader))
    out.push_back({dbl(f[0]), dbl(f[1]), integer(f[2]), integer(f[3]), dbl(f[4]), dbl(f[5])});
  return out;
}

std::vector<LoopPoint> loop_points(const LoopSummary& summary) {
  std::vector<LoopPoint> out;
  for (const auto& c : summary.cycles) {
    for (const auto* b : {&c.descending, &c.ascending}) {
      const char* name = b == &c.descending ? "descending" : "ascending";
      for (std::size_t k = 0; k < b->h.size(); ++k)
        out.push_back({c.cycle, name, b->h[k], b->phi[k], b->winding[k]});
    }
  }
  return out;
}

std::string loop_to_csv(const std::vector<LoopPoint>& points) {
  std::string out(kLoopHeader);
  out += '\n';
  for (const auto& p : points)
    out += format_int(p.cycle) + ',' + p.branch + ',' + format_double(p.h_ext) + ',' +
           format_double(p.phi) + ',' + format_int(p.winding) + '\n';
  return out;
}

std::vector<LoopPoint> loop_from_csv(std::string_view text) {
  std::vector<LoopPoint> out;
  for (const auto& f : split_csv(text, kLoopHeader)) {
    if (f[1] != "descending" && f[1] != "ascending")
      throw ParseError("unknown branch '" + std::string(f[1]) + "'");
    out.push_back({integer(f[0]), std::string(f[1]), dbl(f[2]), dbl(f[3]), integer(f[4])});
  }
  return out;
}

std::string scan_to_csv(const std::vector<ScanPoint>& points) {
  std::string out(kScanHeader);
  out += '\n';
  for (const auto& p : points) out += format_double(p.h_ext) + ',' + format_double(p.s_star) + '\n';
  return out;
}

std::vector<ScanPoint> scan_from_csv(std::string_view text) {
  std::vector<ScanPoint> out;
  for (const auto& f : split_csv(text, kScanHeader)) out.push_back({dbl(f[0]), dbl(f[1])});
  return out;
}

std::string state_to_csv(const SystemState& st) {
  std::string out(kStateHeader);
  out += '\n';
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto c0 = st.qubits.c0[i], c1 = st.qubits.c1[i];
    out += format_int(static_cast<long long>(i)) + ',' + format_double(st.field.a[i]) + ',' +
           format_double(st.field.v[i]) + ',' + format_double(c0.real()) + ',' +
           format_double(c0.imag()) + ',' + format_double(c1.real()) + ',' +
           format_double(c1.imag()) + '\n';
  }
  return out;
}

SystemState state_from_csv(std::string_view text, double tau, double h_ext) {
  SystemState st;
  st.tau = tau;
  st.h_ext = h_ext;
  std::size_t expect = 0;
  for (const auto& f : split_csv(text, kStateHeader)) {
    if (parse_field<std::size_t>(f[0]) != expect++) throw ParseError("state sites out of order");
    st.field.a.push_back(dbl(f[1]));
    st.field.v.push_back(dbl(f[2]));
    st.qubits.c0.emplace_back(dbl(f[3]), dbl(f[4]));
    st.qubits.c1.emplace_back(dbl(f[5]), dbl(f[6]));
  }
  return st;
}

json to_json(const ModelParams& p) {
  json j;
  j["n_sites"] = p.n_sites;
  j["s"] = p.s;
  j["beta"] = p.beta;
  j["epsilon"] = p.epsilon;
  j["l"] = p.l;
  j["gamma"] = p.gamma;
  j["dt"] = p.dt;
  j["noise_amp"] = p.noise_amp;
  j["rng_seed"] = p.rng_seed;
  j["frozen_v"] = p.frozen_v ? json(*p.frozen_v) : json(nullptr);
  return j;
}

ModelParams model_from_json(const json& j) {
  try {
    ModelParams p;
    p.n_sites = j.at("n_sites").get<std::size_t>();
    p.s = j.at("s").get<double>();
    p.beta = j.at("beta").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    p.l = j.at("l").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.dt = j.at("dt").get<double>();
    p.noise_amp = j.at("noise_amp").get<double>();
    p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (const auto& f = j.at("frozen_v"); !f.is_null()) p.frozen_v = f.get<double>();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model parameters: ") + e.what());
  }
}

json to_json(const SweepRecord& rec) {
  json rows = json::array();
  for (const auto& r : rec.rows)
    rows.push_back({{"tau", r.tau}, {"h_ext", r.h_ext}, {"phi", r.phi}, {"winding", r.winding},
                    {"e_field", r.e_field}, {"e_int", r.e_int}, {"e_qubit", r.e_qubit},
                    {"e_total", r.e_total}, {"q_conserved", r.q_conserved},
                    {"max_excitation", r.max_excitation}, {"cycle", r.cycle}});
  json events = json::array();
  for (const auto& e : rec.events)
    events.push_back({{"tau", e.tau}, {"h_ext", e.h_ext}, {"winding_before", e.winding_before},
                      {"winding_after", e.winding_after}, {"phi_before", e.phi_before},
                      {"phi_after", e.phi_after}});
  return {{"rows", rows}, {"events", events}};
}

SweepRecord record_from_json(const json& j) {
  try {
    SweepRecord rec;
    for (const auto& r : j.at("rows"))
      rec.rows.push_back({r.at("tau").get<double>(), r.at("h_ext").get<double>(),
                          r.at("phi").get<double>(), r.at("winding").get<int>(),
                          r.at("e_field").get<double>(), r.at("e_int").get<double>(),
                          r.at("e_qubit").get<double>(), r.at("e_total").get<double>(),
                          r.at("q_conserved").get<double>(), r.at("max_excitation").get<double>(),
                          r.at("cycle").get<int>()});
    for (const auto& e : j.at("events"))
      rec.events.push_back({e.at("tau").get<double>(), e.at("h_ext").get<double>(),
                            e.at("winding_before").get<int>(), e.at("winding_after").get<int>(),
                            e.at("phi_before").get<double>(), e.at("phi_after").get<double>()});
    return rec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("sweep record: ") + e.what());
  }
}

json metadata(const ModelParams& params, const json& protocol, const std::string& timestamp) {
  return {{"artifact", "qms"},
          {"version", std::string(version())},
          {"timestamp", timestamp},
          {"seed", params.rng_seed},
          {"model", to_json(params)},
          {"protocol", protocol}};
}

void OutputSet::add(const std::string& filename, std::string content) {
  files_.emplace_back(filename, std::move(content));
}

std::vector<std::string> OutputSet::names() const {
  std::vector<std::string> out;
  for (const auto& f : files_) out.push_back(f.first);
  return out;
}

namespace {

void write_raw(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

fs::path temp_name(const fs::path& target) {
  return target.parent_path() / ("." + target.filename().string() + ".tmp");
}

}  // namespace

void OutputSet::commit() const {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError(dir_, "cannot create output directory: " + ec.message());

  std::vector<fs::path> staged;
  std::size_t renamed = 0;
  try {
    for (const auto& [name, content] : files_) {
      staged.push_back(temp_name(dir_ / name));
      write_raw(staged.back(), content);
    }
    for (; renamed < files_.size(); ++renamed) {
      fs::rename(staged[renamed], dir_ / files_[renamed].first, ec);
      if (ec) throw IoError(dir_ / files_[renamed].first, "rename failed: " + ec.message());
    }
  } catch (...) {
    // A half-committed set is worse than none.
    for (std::size_t i = 0; i < renamed; ++i) fs::remove(dir_ / files_[i].first, ec);
    for (const auto& p : staged) fs::remove(p, ec);
    throw;
  }
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp = temp_name(path);
  try {
    write_raw(tmp, content);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(path, "rename failed");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_sweep_record(const SweepRecord& record, Format format, const fs::path& base) {
  if (record.rows.empty()) throw std::invalid_argument("write_sweep_record: record is empty");
  const fs::path dir = base.parent_path().empty() ? fs::path(".") : base.parent_path();
  OutputSet out(dir);
  const std::string stem = base.filename().string();
  if (format == Format::csv) {
    out.add(stem + ".csv", rows_to_csv(record.rows));
    out.add(stem + ".events.csv", events_to_csv(record.events));
  } else {
    out.add(stem + ".json", to_json(record).dump(1) + "\n");
  }
  out.commit();
}

SweepRecord read_sweep_record(Format format, const fs::path& base) {
  const fs::path dir = base.parent_path();
  const std::string stem = base.filename().string();
  if (format == Format::csv) {
    SweepRecord rec;
    rec.rows = rows_from_csv(read_file(dir / (stem + ".csv")));
    rec.events = events_from_csv(read_file(dir / (stem + ".events.csv")));
    return rec;
  }
  try {
    return record_from_json(json::parse(read_file(dir / (stem + ".json"))));
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
}

}  // namespace qms
