#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "tokenmodel.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = TOKMERGE_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path tmp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tokmerge_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path only_subdir(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) return e.path();
  throw std::runtime_error("no run directory under " + dir.string());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("gen-fixture writes a loadable sequence") {
  const fs::path dir = tmp_dir("gen");
  const fs::path out = dir / "fix.bin";
  CHECK(run("--seed 1 --out " + out.string() +
            " gen-fixture --frames 2 --n-camera 1 --n-register 2 "
            "--grid-h 3 --grid-w 4 --dim 8") == 0);
  tokmerge::TokenSequence seq = tokmerge::load_sequence(out.string());
  CHECK(seq.n_frames == 2);
  CHECK(seq.layout.tokens_per_frame() == 15);
  CHECK(seq.dim() == 8);
}

TEST_CASE("missing seed is a usage error") {
  CHECK(run("bench --frames 2") == 1);
}

TEST_CASE("missing config file exits nonzero with no outputs") {
  const fs::path dir = tmp_dir("noconf");
  CHECK(run("--config " + (dir / "nope.conf").string() +
            " --seed 1 bench --out " + dir.string()) != 0);
  CHECK(!fs::exists(dir / "report.csv"));
}

TEST_CASE("bench grid emits csv and json and is reproducible") {
  const fs::path dir = tmp_dir("bench");
  const std::string args =
      "--seed 3 --out " + dir.string() +
      " bench --frames 2,3 --tokens-per-frame 12 --dim 16 --heads 2 --blocks 2 "
      "--repeats 1 --region-stride 2";
  CHECK(run(args) == 0);
  const fs::path rundir = only_subdir(dir);
  CHECK(fs::exists(rundir / "config.txt"));
  const std::string csv1 = slurp(rundir / "report.csv");
  CHECK(csv1.find("global_attn") != std::string::npos);
  // 2 sizes x 2 modes x 2 blocks x 3 components + header
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 1 + 2 * 2 * 2 * 3);

  // re-run: identical bytes apart from the timing column
  fs::remove_all(rundir);
  CHECK(run(args) == 0);
  const std::string csv2 = slurp(only_subdir(dir));
  auto strip_time = [](const std::string& csv) {
    std::istringstream is(csv);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string field;
      int i = 0;
      while (std::getline(ls, field, ',')) {
        if (i != 6) os << field;  // drop time_ns
        os << '|';
        ++i;
      }
      os << '\n';
    }
    return os.str();
  };
  CHECK(strip_time(slurp(only_subdir(dir) / "report.csv")) == strip_time(csv1));
  (void)csv2;
}

TEST_CASE("ablate emits the full grid with control rows") {
  const fs::path dir = tmp_dir("ablate");
  CHECK(run("--seed 2 --out " + dir.string() +
            " ablate --frames 3 --tokens-per-frame 12 --dim 8 --heads 2 --blocks 4 "
            "--ratios 0.6,0.9 --start-blocks 0,2 --seeds 2") == 0);
  const std::string csv = slurp(only_subdir(dir) / "ablate.csv");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line ==
        "seed,strategy,ratio_param,start_block,effective_src_fraction,"
        "rel_l2_error,total_time_ns");
  int rows = 0, control_zero = 0, control_rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ls(line);
    std::string f[7];
    for (auto& s : f) std::getline(ls, s, ',');
    if (f[3] == "4") {  // start_block == n_blocks control row
      ++control_rows;
      if (std::stod(f[5]) == 0.0) ++control_zero;
    }
  }
  // 2 seeds x 2 ratios x 3 start blocks (incl. control) x 4 strategy rows
  CHECK(rows == 2 * 2 * 3 * 4);
  CHECK(control_rows == control_zero);
  CHECK(control_rows > 0);
}

TEST_CASE("analyze on a constant fixture reports similarity 1") {
  const fs::path dir = tmp_dir("analyze");
  CHECK(run("--seed 4 --out " + dir.string() +
            " analyze --mode constant --frames 2 --tokens-per-frame 9 --dim 16 "
            "--heads 2 --n-blocks 2 --blocks 0,1 --heatmap") == 0);
  const fs::path rundir = only_subdir(dir);
  const auto report = nlohmann::json::parse(slurp(rundir / "redundancy.json"));
  REQUIRE(report.size() == 2);
  CHECK(std::abs(report[0]["row_similarity"]["mean"].get<double>() - 1.0) < 1e-6);
  // heat map is NxN
  const std::string pgm = slurp(rundir / "attn_block0.pgm");
  CHECK(pgm.rfind("P5\n18 18\n255\n", 0) == 0);
}

TEST_CASE("viz-partition exports json and per-frame masks") {
  const fs::path dir = tmp_dir("viz");
  CHECK(run("--seed 5 --out " + dir.string() +
            " viz-partition --frames 2 --tokens-per-frame 12 --dim 8 "
            "--region-stride 2") == 0);
  const fs::path rundir = only_subdir(dir);
  const auto part = nlohmann::json::parse(slurp(rundir / "partition.json"));
  CHECK(part["salient"].size() + part["dst"].size() + part["src"].size() == 24);
  CHECK(fs::exists(rundir / "merge_map.json"));
  CHECK(fs::exists(rundir / "mask_frame0.pgm"));
  CHECK(fs::exists(rundir / "mask_frame1.pgm"));
}
