#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "qms/io.hpp"

using namespace qms;
namespace fs = std::filesystem;

namespace {

using lim = std::numeric_limits<double>;

// Awkward doubles every writer must carry through unchanged.
const std::vector<double> kEdgeValues{0.0,         -0.0,        0.1,          1.0 / 3.0,
                                      lim::min(),  lim::denorm_min(), -lim::max(), lim::max(),
                                      lim::epsilon(), 6.02214076e23, -1e-300, 2.5e-4};

bool same_bits(double a, double b) {
  return std::signbit(a) == std::signbit(b) && (a == b || (std::isnan(a) && std::isnan(b)));
}

SweepRecord sample_record(std::size_t rows, unsigned seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-50, 50);
  SweepRecord rec;
  for (std::size_t k = 0; k < rows; ++k) {
    SweepRow r{u(g), u(g), u(g), static_cast<int>(k % 7) - 3, u(g), u(g), u(g), u(g), u(g),
               u(g), static_cast<int>(k / 3)};
    rec.rows.push_back(r);
  }
  rec.events.push_back({u(g), u(g), 1, 3, u(g), u(g)});
  rec.events.push_back({u(g), -0.0, -3, -1, lim::denorm_min(), u(g)});
  return rec;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qms-io-" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

bool has_temporaries(const fs::path& dir) {
  if (!fs::exists(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tmp") return true;
  return false;
}

}  // namespace

TEST_CASE("doubles round-trip bit for bit") {
  for (double x : kEdgeValues) {
    const std::string s = format_double(x);
    SweepRow r;
    r.phi = x;
    const auto back = rows_from_csv(rows_to_csv({r}));
    REQUIRE(back.size() == 1);
    CHECK_MESSAGE(same_bits(back[0].phi, x), s);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "-0");

  SweepRow r;
  r.e_int = lim::quiet_NaN();
  r.e_field = lim::infinity();
  const auto back = rows_from_csv(rows_to_csv({r}))[0];
  CHECK(std::isnan(back.e_int));
  CHECK(back.e_field == lim::infinity());
}

TEST_CASE("three-row record writes a header and three lines") {
  const auto rec = sample_record(3, 1);
  const std::string text = rows_to_csv(rec.rows);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(text.substr(0, text.find('\n')) == kRowHeader);
  CHECK(rows_from_csv(text) == rec.rows);
}

TEST_CASE("headers are exact") {
  CHECK(kRowHeader ==
        "tau,h_ext,phi,winding,e_field,e_int,e_qubit,e_total,q_conserved,max_excitation,cycle");
  CHECK(kEventHeader == "tau,h_ext,winding_before,winding_after,phi_before,phi_after");
  CHECK(events_to_csv({}) == std::string(kEventHeader) + "\n");
}

TEST_CASE("every record type round-trips") {
  const auto rec = sample_record(40, 2);
  CHECK(events_from_csv(events_to_csv(rec.events)) == rec.events);
  CHECK(record_from_json(nlohmann::json::parse(to_json(rec).dump())) == rec);

  std::vector<LoopPoint> loop{{1, "descending", 2.0, 1.5, 1}, {1, "ascending", -0.0, -1e-310, -1}};
  CHECK(loop_from_csv(loop_to_csv(loop)) == loop);

  std::vector<ScanPoint> scan;
  for (double x : kEdgeValues) scan.push_back({x, 1.0 - x});
  CHECK(scan_from_csv(scan_to_csv(scan)) == scan);

  ModelParams p;
  p.n_sites = 17;
  p.rng_seed = std::numeric_limits<std::uint64_t>::max();
  p.epsilon = lim::denorm_min();
  CHECK(model_from_json(nlohmann::json::parse(to_json(p).dump())) == p);
  p.frozen_v = -0.0;
  const auto q = model_from_json(nlohmann::json::parse(to_json(p).dump()));
  REQUIRE(q.frozen_v);
  CHECK(std::signbit(*q.frozen_v));

  SystemState st = init_vacuum(p);
  std::mt19937_64 g(3);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < st.size(); ++i) {
    st.field.a[i] = n01(g);
    st.field.v[i] = n01(g) * 1e-200;
    st.qubits.c0[i] = complex{n01(g), n01(g)};
    st.qubits.c1[i] = complex{-0.0, n01(g)};
  }
  st.tau = 12.5;
  st.h_ext = -0.75;
  CHECK(state_from_csv(state_to_csv(st), st.tau, st.h_ext) == st);
}

TEST_CASE("malformed csv is rejected") {
  CHECK_THROWS_AS(rows_from_csv(""), ParseError);
  CHECK_THROWS_AS(rows_from_csv("tau,h_ext\n"), ParseError);
  const std::string head = std::string(kScanHeader) + "\n";
  CHECK_THROWS_AS(scan_from_csv(head + "1,2,3\n"), ParseError);
  CHECK_THROWS_AS(scan_from_csv(head + "1,abc\n"), ParseError);
  CHECK_THROWS_AS(scan_from_csv(head + "1, 2\n"), ParseError);
  CHECK_THROWS_AS(loop_from_csv(std::string(kLoopHeader) + "\n1,sideways,0,0,0\n"), ParseError);
  CHECK(scan_from_csv(head + "1,2\r\n\n").size() == 1);
}

TEST_CASE("sweep record files") {
  TempDir tmp;
  const auto rec = sample_record(3, 4);
  const fs::path base = tmp.path / "nested" / "run";
  write_sweep_record(rec, Format::csv, base);
  CHECK(fs::exists(tmp.path / "nested" / "run.csv"));
  CHECK(fs::exists(tmp.path / "nested" / "run.events.csv"));
  CHECK_FALSE(has_temporaries(tmp.path / "nested"));
  CHECK(read_sweep_record(Format::csv, base) == rec);

  write_sweep_record(rec, Format::json, base);
  CHECK(read_sweep_record(Format::json, base) == rec);

  // Rewriting replaces the files whole.
  const auto shorter = sample_record(1, 5);
  write_sweep_record(shorter, Format::csv, base);
  CHECK(read_sweep_record(Format::csv, base) == shorter);
}

TEST_CASE("empty record is a precondition error") {
  TempDir tmp;
  CHECK_THROWS_AS(write_sweep_record(SweepRecord{}, Format::csv, tmp.path / "x"),
                  std::invalid_argument);
  CHECK_FALSE(fs::exists(tmp.path));
}

TEST_CASE("io failures name the path") {
  TempDir tmp;
  fs::create_directories(tmp.path);
  write_file_atomic(tmp.path / "blocker", "x");
  // A regular file where a directory is needed.
  OutputSet out(tmp.path / "blocker" / "sub");
  out.add("a.csv", "1");
  try {
    out.commit();
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.path() == tmp.path / "blocker" / "sub");
    CHECK(std::string(e.what()).find("blocker") != std::string::npos);
  }
  CHECK_THROWS_AS(read_file(tmp.path / "missing.csv"), IoError);
  CHECK_THROWS_AS(read_sweep_record(Format::csv, tmp.path / "missing"), IoError);
}

TEST_CASE("failed commit leaves nothing behind") {
  TempDir tmp;
  fs::create_directories(tmp.path / "b.csv");  // rename onto a directory fails
  OutputSet out(tmp.path);
  out.add("a.csv", "1\n");
  out.add("b.csv", "2\n");
  CHECK_THROWS_AS(out.commit(), IoError);
  CHECK_FALSE(has_temporaries(tmp.path));
  CHECK_FALSE(fs::exists(tmp.path / "a.csv"));
  CHECK(out.names() == std::vector<std::string>{"a.csv", "b.csv"});
}

TEST_CASE("metadata carries every model field, seed and version") {
  ModelParams p;
  p.rng_seed = 99;
  const auto m = metadata(p, {{"kind", "relax"}}, "2026-01-01T00:00:00Z");
  CHECK(m.at("seed") == 99);
  CHECK(m.at("version") == std::string(version()));
  CHECK_FALSE(version().empty());
  CHECK(m.at("timestamp") == "2026-01-01T00:00:00Z");
  CHECK(m.at("protocol").at("kind") == "relax");
  for (const char* k :
       {"n_sites", "s", "beta", "epsilon", "l", "gamma", "dt", "noise_amp", "rng_seed", "frozen_v"})
    CHECK_MESSAGE(m.at("model").contains(k), k);
  CHECK(model_from_json(m.at("model")) == p);
}
