#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(QMS_SOURCE_DIR) + "/configs/";

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("qms-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }

  Result qms(const std::string& args, const std::string& env = "") const {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd =
        env + " '" + std::string(QMS_BINARY) + "' " + args + " >'" + o.string() + "' 2>'" +
        e.string() + "'";
    const int raw = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }
};

// Short weak-coupling relaxation on a small chain.
const char* kWeak = R"(
[model]
n_sites = 60
s = 0.1
seed = 5
[relax]
h_ext = 0
max_tau = 200
[output]
name = weak
)";

}  // namespace

TEST_CASE("validate-config accepts the shipped configs") {
  Sandbox sb;
  for (const char* f : {"fig2.cfg", "fig3.cfg", "fig4.cfg", "kink-oracle.cfg"}) {
    const auto r = sb.qms("validate-config --config " + kConfigs + f);
    CHECK_MESSAGE(r.code == 0, f, r.err);
    CHECK(r.out.find("valid") == 0);
  }
}

TEST_CASE("invalid config exits 2 and writes nothing") {
  Sandbox sb;
  const auto cfg = sb.write("bad.cfg", "[model]\ngamm = 0.25\n[relax]\n");
  auto r = sb.qms("validate-config --config " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("gamm") != std::string::npos);

  r = sb.qms("relax --config " + cfg.string() + " --out " + (sb.dir / "out").string());
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(sb.dir / "out"));

  const auto syntax = sb.write("syntax.cfg", "[model]\nn_sites 3\n");
  r = sb.qms("validate-config --config " + syntax.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2, column") != std::string::npos);

  CHECK(sb.qms("relax --config " + (sb.dir / "missing.cfg").string()).code == 2);
  CHECK(sb.qms("frobnicate").code == 2);
  CHECK(sb.qms("relax --config " + cfg.string() + " --format xml").code == 2);
}

TEST_CASE("weak coupling relaxation reports winding 0") {
  Sandbox sb;
  const auto cfg = sb.write("weak.cfg", kWeak);
  const auto out = sb.dir / "run";
  const auto r = sb.qms("relax --config " + cfg.string() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("relax winding=0 ", 0) == 0);
  CHECK(r.out.find("e_total=") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  for (const char* f : {"weak.csv", "weak.events.csv", "weak.state.csv", "weak.meta.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  for (const auto& e : fs::directory_iterator(out)) CHECK(e.path().extension() != ".tmp");

  const auto meta = nlohmann::json::parse(slurp(out / "weak.meta.json"));
  CHECK(meta.at("seed") == 5);
  CHECK(meta.at("model").at("s") == 0.1);
  CHECK(meta.at("model").at("n_sites") == 60);
  CHECK(meta.contains("version"));
  CHECK(meta.contains("timestamp"));
}

TEST_CASE("seed, format and quiet flags") {
  Sandbox sb;
  const auto cfg = sb.write("weak.cfg", kWeak);
  const auto out = sb.dir / "j";
  const auto r =
      sb.qms("relax --config " + cfg.string() + " --out " + out.string() +
             " --format json --seed 77 --quiet");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.err.empty());
  CHECK(fs::exists(out / "weak.json"));
  CHECK_FALSE(fs::exists(out / "weak.csv"));
  CHECK(nlohmann::json::parse(slurp(out / "weak.meta.json")).at("seed") == 77);
}

TEST_CASE("repeated runs are byte-identical") {
  Sandbox sb;
  const auto cfg = sb.write("weak.cfg", kWeak);
  REQUIRE(sb.qms("relax --quiet --config " + cfg.string() + " --out " + (sb.dir / "a").string()).code == 0);
  REQUIRE(sb.qms("relax --quiet --config " + cfg.string() + " --out " + (sb.dir / "b").string()).code == 0);
  for (const char* f : {"weak.csv", "weak.events.csv", "weak.state.csv"})
    CHECK_MESSAGE(slurp(sb.dir / "a" / f) == slurp(sb.dir / "b" / f), f);
  REQUIRE(sb.qms("relax --quiet --seed 6 --config " + cfg.string() + " --out " +
                 (sb.dir / "c").string()).code == 0);
  CHECK(slurp(sb.dir / "a" / "weak.csv") != slurp(sb.dir / "c" / "weak.csv"));
}

TEST_CASE("unstable step exits 1 naming site and tau") {
  Sandbox sb;
  const auto cfg = sb.write("stiff.cfg",
                            "[model]\nn_sites = 40\ndt = 0.1\nfrozen_v = 1000\n"
                            "[relax]\nh_ext = 0.1\nmax_tau = 100\n");
  const auto r = sb.qms("relax --config " + cfg.string() + " --out " + (sb.dir / "o").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("numerical failure") != std::string::npos);
  CHECK(r.err.find("site") != std::string::npos);
  CHECK(r.err.find("tau") != std::string::npos);
  CHECK_FALSE(fs::exists(sb.dir / "o"));
}

TEST_CASE("protocol mismatch and worker cap") {
  Sandbox sb;
  auto r = sb.qms("sweep --config " + kConfigs + "fig2.cfg");
  CHECK(r.code == 2);
  CHECK(r.err.find("relax") != std::string::npos);

  const auto scan = sb.write("scan.cfg",
                             "[model]\nn_sites = 30\n[scan]\nh_ext = 0.1\nmax_tau = 10\n");
  r = sb.qms("scan --config " + scan.string() + " --out " + (sb.dir / "s").string(),
             "QMS_THREADS=many");
  CHECK(r.code == 2);
  CHECK(r.err.find("QMS_THREADS") != std::string::npos);
  r = sb.qms("scan --config " + scan.string() + " --out " + (sb.dir / "s").string(),
             "QMS_THREADS=0");
  CHECK(r.code == 2);
}
