#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const std::string kCli = KCS_CLI_PATH;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kcs_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("generate --profile bench --normal 3 --kc 2") == 2);  // missing --out
  CHECK(run("train --stage 2 --bench nowhere.tsv --out x") == 2); // missing checkpoint
  CHECK(run("nonsense") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("runtime failures exit with code 1 naming the path") {
  const fs::path dir = temp_dir("fail");
  CHECK(run("eval --checkpoint " + (dir / "missing.ckpt").string() + " --bench " +
            (dir / "missing.tsv").string() + " --out " + (dir / "out").string()) == 1);
}

TEST_CASE("generate is deterministic and honors counts") {
  const fs::path d1 = temp_dir("gen1");
  const fs::path d2 = temp_dir("gen2");
  const std::string common = "generate --profile bench --normal 10 --kc 5 --res 96 --seed 1";
  REQUIRE(run(common + " --out " + d1.string()) == 0);
  REQUIRE(run(common + " --out " + d2.string()) == 0);

  const std::string m1 = file_bytes(d1 / "manifest.tsv");
  CHECK(m1 == file_bytes(d2 / "manifest.tsv"));
  int lines = 0;
  for (const char c : m1) lines += c == '\n';
  CHECK(lines == 15);
  CHECK(fs::exists(d1 / "resolved_config.txt"));

  // image bytes identical too
  CHECK(file_bytes(d1 / "images/b0000_axial.png") == file_bytes(d2 / "images/b0000_axial.png"));
}

TEST_CASE("desk-scale two-stage chain: train, eval, predict, export") {
  const fs::path root = temp_dir("chain");
  const fs::path bench = root / "bench";
  const fs::path hh = root / "hh";
  REQUIRE(run("generate --profile bench --normal 20 --kc 12 --res 128 --seed 3 --out " +
              bench.string()) == 0);
  REQUIRE(run("generate --profile handheld --normal 12 --kc 8 --res 128 --seed 4 --out " +
              hh.string()) == 0);

  const std::string bench_m = (bench / "manifest.tsv").string();
  const std::string hh_m = (hh / "manifest.tsv").string();

  // stage 1 (tiny epoch budget; this is a smoke test of the chain)
  REQUIRE(run("train --stage 1 --bench " + bench_m + " --desk --epochs 2 --seed 5 --out " +
              (root / "s1").string()) == 0);
  REQUIRE(fs::exists(root / "s1/stage1.ckpt"));
  REQUIRE(fs::exists(root / "s1/stage1_log.tsv"));
  {
    std::ifstream log(root / "s1/stage1_log.tsv");
    int lines = 0;
    for (std::string line; std::getline(log, line);) ++lines;
    CHECK(lines == 3);  // header + 2 epochs
  }

  // stage 2 without checkpoint is a usage error
  CHECK(run("train --stage 2 --bench " + bench_m + " --handheld " + hh_m + " --out " +
            (root / "s2bad").string()) == 2);

  REQUIRE(run("train --stage 2 --bench " + bench_m + " --handheld " + hh_m +
              " --from-checkpoint " + (root / "s1/stage1.ckpt").string() +
              " --desk --epochs 2 --seed 5 --out " + (root / "s2").string()) == 0);
  REQUIRE(fs::exists(root / "s2/stage2.ckpt"));

  REQUIRE(run("eval --checkpoint " + (root / "s2/stage2.ckpt").string() + " --bench " + bench_m +
              " --handheld " + hh_m + " --split stage2-test --seed 5 --out " +
              (root / "eval").string()) == 0);
  CHECK(fs::exists(root / "eval/metrics.tsv"));
  CHECK(fs::exists(root / "eval/predictions.tsv"));

  CHECK(run("predict --checkpoint " + (root / "s2/stage2.ckpt").string() + " --manifest " +
            hh_m) == 0);

  REQUIRE(run("export-features --checkpoint " + (root / "s2/stage2.ckpt").string() +
              " --manifest " + hh_m + " --head axial --out " + (root / "feat").string()) == 0);
  CHECK(fs::exists(root / "feat/features.tsv"));

  SUBCASE("eval rerun is idempotent on its outputs") {
    REQUIRE(run("eval --checkpoint " + (root / "s2/stage2.ckpt").string() + " --bench " +
                bench_m + " --handheld " + hh_m + " --split stage2-test --seed 5 --out " +
                (root / "eval2").string()) == 0);
    CHECK(file_bytes(root / "eval/metrics.tsv") == file_bytes(root / "eval2/metrics.tsv"));
    CHECK(file_bytes(root / "eval/predictions.tsv") ==
          file_bytes(root / "eval2/predictions.tsv"));
  }
}

TEST_CASE("ablate on a toy set emits the six-row table") {
  const fs::path root = temp_dir("ablate");
  const fs::path bench = root / "bench";
  const fs::path hh = root / "hh";
  REQUIRE(run("generate --profile bench --normal 10 --kc 8 --res 96 --seed 7 --out " +
              bench.string()) == 0);
  REQUIRE(run("generate --profile handheld --normal 8 --kc 6 --res 96 --seed 8 --out " +
              hh.string()) == 0);

  REQUIRE(run("ablate --bench " + (bench / "manifest.tsv").string() + " --handheld " +
              (hh / "manifest.tsv").string() +
              " --grid table2 --seeds 1 --desk --epochs-stage1 1 --epochs-stage2 1 --seed 9"
              " --config /dev/null --out " +
              (root / "out").string()) == 0);

  std::ifstream in(root / "out/ablation.tsv");
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "cell_id\tseed\tSe\tSp\tAcc\tP_k\tN_k\tP_n\tN_n");
  int per_seed = 0, mean_rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.find("\tmean\t") != std::string::npos)
      ++mean_rows;
    else
      ++per_seed;
  }
  CHECK(per_seed == 6);   // 6 cells x 1 seed
  CHECK(mean_rows == 6);  // one averaged row per cell
}
