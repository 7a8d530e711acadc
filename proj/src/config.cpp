#include "qms/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace qms {

std::string_view to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::relax: return "relax";
    case ProtocolKind::sweep: return "sweep";
    case ProtocolKind::scan: return "scan";
  }
  return "?";
}

std::string_view to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

namespace {

std::string located(std::size_t line, std::size_t col, const std::string& what) {
  std::ostringstream os;
  os << "line " << line << ", column " << col << ": " << what;
  return os.str();
}

std::string join(const std::vector<std::string>& v) {
  std::ostringstream os;
  os << "invalid configuration:";
  for (const auto& m : v) os << "\n  - " << m;
  return os.str();
}

}  // namespace

ConfigSyntaxError::ConfigSyntaxError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error(located(line, column, what)), line_(line), column_(column) {}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

struct Section {
  std::size_t line = 0;
  std::map<std::string, Entry> keys;
};

using Document = std::map<std::string, Section>;

bool ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '-';
}

std::size_t skip_ws(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return i;
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Document tokenize(std::string_view text, std::vector<std::string>& violations) {
  Document doc;
  Section* current = nullptr;
  std::string current_name;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;

    // Comments run to end of line when they start a line or follow whitespace.
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = line.substr(0, i);
        break;
      }
    }
    line = rtrim(line);
    const std::size_t start = skip_ws(line, 0);
    if (start == line.size()) continue;
    const std::size_t col = start + 1;

    if (line[start] == '[') {
      if (line.back() != ']')
        throw ConfigSyntaxError(lineno, line.size() + 1, "expected ']' to close the section header");
      std::string_view name = line.substr(start + 1, line.size() - start - 2);
      const std::size_t a = skip_ws(name, 0);
      name = rtrim(name.substr(a));
      if (name.empty()) throw ConfigSyntaxError(lineno, col + 1, "empty section name");
      for (std::size_t i = 0; i < name.size(); ++i)
        if (!ident_char(name[i]))
          throw ConfigSyntaxError(lineno, start + 2 + a + i, "invalid character in section name");
      current_name = std::string(name);
      auto [it, fresh] = doc.try_emplace(current_name);
      if (fresh) it->second.line = lineno;
      current = &it->second;
      continue;
    }

    const std::size_t eq = line.find('=', start);
    if (eq == std::string_view::npos)
      throw ConfigSyntaxError(lineno, line.size() + 1, "expected '=' after key");
    const std::string_view key = rtrim(line.substr(start, eq - start));
    if (key.empty()) throw ConfigSyntaxError(lineno, col, "missing key before '='");
    for (std::size_t i = 0; i < key.size(); ++i)
      if (!ident_char(key[i])) throw ConfigSyntaxError(lineno, col + i, "invalid character in key");
    const std::size_t vstart = skip_ws(line, eq + 1);
    if (vstart == line.size()) throw ConfigSyntaxError(lineno, eq + 2, "missing value after '='");
    if (!current) throw ConfigSyntaxError(lineno, col, "key outside of any [section]");

    auto [it, fresh] = current->keys.try_emplace(std::string(key));
    if (!fresh) {
      std::ostringstream os;
      os << "[" << current_name << "] " << key << ": duplicate key (lines " << it->second.line
         << " and " << lineno << ")";
      violations.push_back(os.str());
    }
    it->second.value = std::string(line.substr(vstart));
    it->second.line = lineno;
  }
  return doc;
}

class Reader {
 public:
  Reader(Document& doc, std::vector<std::string>& violations) : doc_(doc), out_(violations) {}

  bool has(const std::string& section) const { return doc_.count(section) != 0; }

  const Entry* find(const std::string& section, const std::string& key) {
    auto s = doc_.find(section);
    if (s == doc_.end()) return nullptr;
    auto k = s->second.keys.find(key);
    if (k == s->second.keys.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  void bad(const std::string& section, const std::string& key, const Entry& e,
           const std::string& expected) {
    std::ostringstream os;
    os << "[" << section << "] " << key << ": expected " << expected << ", got '" << e.value
       << "' (line " << e.line << ")";
    out_.push_back(os.str());
  }

  template <class T>
  void number(const std::string& section, const std::string& key, T& target) {
    const Entry* e = find(section, key);
    if (!e) return;
    T value{};
    if (parse(e->value, value)) {
      target = value;
    } else {
      bad(section, key, *e, std::is_floating_point_v<T> ? "a number" : "an integer");
    }
  }

  template <class T>
  void optional_number(const std::string& section, const std::string& key, std::optional<T>& t) {
    T v{};
    if (const Entry* e = find(section, key)) {
      if (parse(e->value, v)) {
        t = v;
      } else {
        bad(section, key, *e, "a number");
      }
    }
  }

  void text(const std::string& section, const std::string& key, std::string& target) {
    if (const Entry* e = find(section, key)) target = e->value;
  }

  void number_list(const std::string& section, const std::string& key, std::vector<double>& t) {
    const Entry* e = find(section, key);
    if (!e) return;
    t.clear();
    std::string_view rest = e->value;
    while (true) {
      const std::size_t comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      item = rtrim(item.substr(skip_ws(item, 0)));
      double v = 0.0;
      if (!parse(item, v)) {
        bad(section, key, *e, "a comma-separated list of numbers");
        return;
      }
      t.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }

  void report_unused() {
    for (const auto& [name, sec] : doc_)
      for (const auto& [key, e] : sec.keys)
        if (!e.used) {
          std::ostringstream os;
          os << "[" << name << "] unknown key '" << key << "' (line " << e.line << ")";
          out_.push_back(os.str());
        }
  }

  template <class T>
  static bool parse(std::string_view s, T& v) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
  }

 private:
  Document& doc_;
  std::vector<std::string>& out_;
};

void read_relax_options(Reader& r, const std::string& sec, RelaxOptions& o, const char* tol_key) {
  r.number(sec, "max_tau", o.max_tau);
  r.number(sec, "min_tau", o.min_tau);
  r.number(sec, "window", o.window);
  r.number(sec, tol_key, o.tol);
  r.number(sec, "sample_stride", o.sample_stride);
  r.number(sec, "dwell_tau", o.dwell_tau);
  r.number(sec, "census_threshold", o.census_threshold);
}

void check_relax_options(const std::string& sec, const RelaxOptions& o,
                         std::vector<std::string>& out) {
  auto add = [&](const char* m) { out.push_back("[" + sec + "] " + m); };
  if (!(o.max_tau > 0.0)) add("max_tau must be > 0");
  if (!(o.min_tau >= 0.0)) add("min_tau must be >= 0");
  if (o.window == 0) add("window must be >= 1");
  if (!(o.tol > 0.0)) add("tol must be > 0");
  if (o.sample_stride == 0) add("sample_stride must be >= 1");
  if (!(o.dwell_tau >= 0.0)) add("dwell_tau must be >= 0");
}

// Accepts a number or the word "auto" (returns true for auto).
bool number_or_auto(Reader& r, const std::string& sec, const std::string& key, double& target) {
  const Entry* e = r.find(sec, key);
  if (!e) return false;
  if (e->value == "auto") return true;
  double v = 0.0;
  if (Reader::parse(e->value, v)) {
    target = v;
  } else {
    r.bad(sec, key, *e, "a number or 'auto'");
  }
  return false;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  std::vector<std::string> out;
  Document doc = tokenize(text, out);
  Reader r(doc, out);
  RunConfig cfg;

  for (const auto& [name, sec] : doc) {
    static const char* known[] = {"model", "relax", "sweep", "scan", "output"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return name == k; }) ==
        std::end(known)) {
      std::ostringstream os;
      os << "unknown section [" << name << "] (line " << sec.line << ")";
      out.push_back(os.str());
      // Its keys are not separately reported.
      for (auto& [k, e] : doc[name].keys) e.used = true;
    }
  }

  if (!r.has("model")) out.emplace_back("missing [model] section");
  auto& m = cfg.model;
  r.number("model", "n_sites", m.n_sites);
  r.number("model", "s", m.s);
  r.number("model", "beta", m.beta);
  r.number("model", "epsilon", m.epsilon);
  r.number("model", "l", m.l);
  r.number("model", "gamma", m.gamma);
  r.number("model", "dt", m.dt);
  r.number("model", "noise_amp", m.noise_amp);
  r.number("model", "seed", m.rng_seed);
  r.optional_number("model", "frozen_v", m.frozen_v);
  for (const auto& v : validate(m)) out.push_back("[model] " + v);

  std::vector<std::string> protocols;
  for (const char* p : {"relax", "sweep", "scan"})
    if (r.has(p)) protocols.emplace_back(p);
  if (protocols.size() != 1) {
    std::string msg = "exactly one protocol section ([relax], [sweep] or [scan]) is required";
    if (!protocols.empty()) {
      msg += ", found";
      for (const auto& p : protocols) msg += " [" + p + "]";
    }
    out.push_back(msg);
  }

  if (r.has("relax")) {
    cfg.protocol = ProtocolKind::relax;
    auto& rc = cfg.relax;
    r.number("relax", "h_ext", rc.options.h_ext);
    read_relax_options(r, "relax", rc.options, "tol");
    std::string initial = "vacuum";
    r.text("relax", "initial", initial);
    if (initial == "kink") {
      rc.kink_initial = true;
    } else if (initial != "vacuum") {
      out.push_back("[relax] initial: expected 'vacuum' or 'kink', got '" + initial + "'");
    }
    r.number("relax", "kink_center", rc.kink_center);
    r.number("relax", "kink_width", rc.kink_width);
    if (!(rc.kink_width >= 0.0)) out.emplace_back("[relax] kink_width must be >= 0");
    check_relax_options("relax", rc.options, out);
  }

  if (r.has("sweep")) {
    cfg.protocol = ProtocolKind::sweep;
    auto& s = cfg.sweep;
    const bool max_auto = number_or_auto(r, "sweep", "h_max", s.h_max);
    const bool min_auto = number_or_auto(r, "sweep", "h_min", s.h_min);
    std::optional<int> target;
    r.optional_number("sweep", "target_winding", target);
    if (max_auto || min_auto) {
      if (!(max_auto && min_auto))
        out.emplace_back("[sweep] h_max and h_min must both be 'auto' or both numbers");
      if (!target) out.emplace_back("[sweep] h_max = auto requires target_winding");
      s.target_winding = target;
    } else if (target) {
      out.emplace_back("[sweep] target_winding is only used with h_max = auto");
    }
    r.number("sweep", "h_ceiling", s.h_ceiling);
    r.number("sweep", "rate", s.rate);
    r.number("sweep", "n_cycles", s.n_cycles);
    r.number("sweep", "settle_tau", s.settle_tau);
    r.number("sweep", "record_stride", s.record_stride);
    r.number("sweep", "phase_stride", s.phase_stride);
    r.number("sweep", "dwell_tau", s.dwell_tau);
    r.number("sweep", "census_threshold", s.census_threshold);
    r.number("sweep", "first_direction", s.first_direction);
    r.number("sweep", "noise_sign", s.noise_sign);
    r.number("sweep", "match_tol", s.match_tol);
    r.number("sweep", "grid_points", s.grid_points);
    for (const auto& v : validate(s)) out.push_back("[sweep] " + v);
  }

  if (r.has("scan")) {
    cfg.protocol = ProtocolKind::scan;
    auto& sc = cfg.scan;
    r.number_list("scan", "h_ext", sc.h_values);
    r.number("scan", "s_lo", sc.s_lo);
    r.number("scan", "s_hi", sc.s_hi);
    r.number("scan", "tol", sc.tol);
    read_relax_options(r, "scan", sc.relax, "steady_tol");
    if (sc.h_values.empty()) out.emplace_back("[scan] h_ext must list at least one field");
    if (!(sc.s_lo > 0.0)) out.emplace_back("[scan] s_lo must be > 0");
    if (!(sc.s_hi >= sc.s_lo)) out.emplace_back("[scan] s_hi must be >= s_lo");
    if (!(sc.tol > 0.0)) out.emplace_back("[scan] tol must be > 0");
    check_relax_options("scan", sc.relax, out);
  }

  r.text("output", "dir", cfg.out_dir);
  r.text("output", "name", cfg.name);
  if (const Entry* e = r.find("output", "formats")) {
    cfg.formats.clear();
    std::string_view rest = e->value;
    while (true) {
      const std::size_t comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      item = rtrim(item.substr(skip_ws(item, 0)));
      if (item == "csv" || item == "json") {
        const Format f = item == "csv" ? Format::csv : Format::json;
        if (std::find(cfg.formats.begin(), cfg.formats.end(), f) == cfg.formats.end())
          cfg.formats.push_back(f);
      } else {
        r.bad("output", "formats", *e, "a list drawn from csv, json");
        break;
      }
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  if (cfg.out_dir.empty()) out.emplace_back("[output] dir must not be empty");
  if (cfg.name.empty()) cfg.name = std::string(to_string(cfg.protocol));
  if (cfg.name.find('/') != std::string::npos) out.emplace_back("[output] name must not contain '/'");

  r.report_unused();
  if (!out.empty()) throw ConfigError(std::move(out));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace qms
