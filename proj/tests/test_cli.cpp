#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* path = std::getenv("ACE_CLI");
  REQUIRE(path != nullptr);
  return path;
}

struct run_result {
  int exit_code;
  std::string out;
};

run_result run_cmd(const std::string& args) {
  fs::path out_file = fs::temp_directory_path() / "ace_cli_out.txt";
  std::string full = cli() + " " + args + " > " + out_file.string() + " 2>/dev/null";
  int status = std::system(full.c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("ace_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synth then run produce byte-identical reports under a fixed seed") {
  fs::path dir = scratch("det");
  auto synth = run_cmd("synth --m 4 --n 120 --d 6 --k 3 --seed 9 --out " + (dir / "b").string() +
                       " --label-noise 0,0.1,0.2,0.3 --separations 8,8,8,8");
  REQUIRE(synth.exit_code == 0);

  std::string base = "run --trials " + (dir / "b").string() +
                     " --index silhouette_cosine --seed 42 --dip-replicates 200 --out ";
  REQUIRE(run_cmd(base + (dir / "r1.json").string()).exit_code == 0);
  REQUIRE(run_cmd(base + (dir / "r2.json").string()).exit_code == 0);
  REQUIRE(run_cmd(base + (dir / "r8.json").string() + " --threads 8").exit_code == 0);

  std::string r1 = read_file(dir / "r1.json");
  CHECK(r1 == read_file(dir / "r2.json"));
  CHECK(r1 == read_file(dir / "r8.json"));
  CHECK(!r1.empty());
}

TEST_CASE("unknown index exits 64 with the id list") {
  fs::path dir = scratch("badindex");
  run_cmd("synth --m 2 --n 60 --d 4 --k 2 --seed 1 --out " + (dir / "b").string());
  auto res = run_cmd("run --trials " + (dir / "b").string() + " --index nope");
  CHECK(res.exit_code == 64);
}

TEST_CASE("all-noise bundle exits 2 with a machine-readable reason") {
  fs::path dir = scratch("noise");
  run_cmd("synth --m 3 --n 200 --d 6 --k 2 --seed 3 --out " + (dir / "b").string() +
          " --corrupt 0,1,2");
  auto res = run_cmd("run --trials " + (dir / "b").string() +
                     " --index silhouette_euclidean --seed 5 --dip-replicates 200");
  CHECK(res.exit_code == 2);
  CHECK(res.out.find("no space rejected unimodality") != std::string::npos);
  CHECK(res.out.find("no_retained_spaces") != std::string::npos);
}

TEST_CASE("missing input exits 74") {
  auto res = run_cmd("run --trials /nonexistent/dir --index dunn");
  CHECK(res.exit_code == 74);
}

TEST_CASE("external subcommand prints both measures") {
  fs::path dir = scratch("ext");
  std::ofstream(dir / "a.csv") << "0\n0\n1\n1\n";
  std::ofstream(dir / "b.csv") << "1\n1\n0\n0\n";
  auto res = run_cmd("external --pred " + (dir / "b.csv").string() + " --truth " +
                     (dir / "a.csv").string());
  REQUIRE(res.exit_code == 0);
  CHECK(res.out == "measure,value\nnmi,1\nacc,1\n");
}

TEST_CASE("compare emits the regime table and catches id mismatches") {
  fs::path dir = scratch("cmp");
  run_cmd("synth --m 4 --n 120 --d 6 --k 3 --seed 13 --out " + (dir / "b").string() +
          " --label-noise 0,0.1,0.2,0.35 --separations 9,9,9,9");
  REQUIRE(run_cmd("run --trials " + (dir / "b").string() +
                  " --index calinski_harabasz --seed 7 --dip-replicates 200 --out " +
                  (dir / "r.json").string())
              .exit_code == 0);

  auto res = run_cmd("compare --report " + (dir / "r.json").string() + " --truth " +
                     (dir / "b" / "truth.labels.csv").string());
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("regime,external,r_s,tau_b") == 0);
  CHECK(res.out.find("ace,nmi,") != std::string::npos);
  CHECK(res.out.find("paired,acc,") != std::string::npos);

  // JSON truth with shuffled ids must be rejected
  std::ofstream(dir / "shuffled.json")
      << R"({"ids": ["trial1", "trial0", "trial2", "trial3"], "labels": )"
      << "[" << [&] {
           std::string labels;
           for (int i = 0; i < 120; ++i) labels += (i ? "," : "") + std::to_string(i % 3);
           return labels;
         }() << "]}";
  auto bad = run_cmd("compare --report " + (dir / "r.json").string() + " --truth " +
                     (dir / "shuffled.json").string());
  CHECK(bad.exit_code == 70);
}

TEST_CASE("config file values apply and flags override them") {
  fs::path dir = scratch("cfg");
  run_cmd("synth --m 3 --n 120 --d 6 --k 3 --seed 17 --out " + (dir / "b").string() +
          " --separations 9,9,9");
  std::ofstream(dir / "cfg.json")
      << R"({"index": "davies_bouldin", "seed": 5, "dip_replicates": 200, "link": "hits"})";

  REQUIRE(run_cmd("run --trials " + (dir / "b").string() + " --config " +
                  (dir / "cfg.json").string() + " --out " + (dir / "r.json").string())
              .exit_code == 0);
  std::string report = read_file(dir / "r.json");
  CHECK(report.find("\"index\": \"davies_bouldin\"") != std::string::npos);
  CHECK(report.find("\"link\": \"hits\"") != std::string::npos);
  CHECK(report.find("\"seed\": 5") != std::string::npos);

  REQUIRE(run_cmd("run --trials " + (dir / "b").string() + " --config " +
                  (dir / "cfg.json").string() + " --index dunn --seed 11 --out " +
                  (dir / "r2.json").string())
              .exit_code == 0);
  std::string report2 = read_file(dir / "r2.json");
  CHECK(report2.find("\"index\": \"dunn\"") != std::string::npos);
  CHECK(report2.find("\"seed\": 11") != std::string::npos);
  CHECK(report2.find("\"link\": \"hits\"") != std::string::npos);  // still from config
}

TEST_CASE("run exports the score matrix as CSV on request") {
  fs::path dir = scratch("csv");
  run_cmd("synth --m 3 --n 120 --d 6 --k 3 --seed 23 --out " + (dir / "b").string() +
          " --separations 9,9,9");
  REQUIRE(run_cmd("run --trials " + (dir / "b").string() +
                  " --index dunn --seed 3 --dip-replicates 200 --out " + (dir / "r.json").string() +
                  " --scores-csv " + (dir / "scores.csv").string())
              .exit_code == 0);
  std::string csv = read_file(dir / "scores.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(std::count(csv.begin(), csv.end(), ',') == 6);
}

TEST_CASE("dimdemo prints one row per dimension") {
  auto res = run_cmd("dimdemo --n 40 --dims 2,8 --reps 3 --seed 1");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("p,ratio_median,index_abs_median") == 0);
  CHECK(res.out.find("\n2,") != std::string::npos);
  CHECK(res.out.find("\n8,") != std::string::npos);
}

TEST_CASE("baselines prints the score table") {
  fs::path dir = scratch("base");
  run_cmd("synth --m 3 --n 120 --d 6 --k 3 --seed 19 --out " + (dir / "b").string() +
          " --separations 9,9,9");
  auto res = run_cmd("baselines --trials " + (dir / "b").string() +
                     " --index sdbw --seed 2 --dip-replicates 200");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("trial,raw,paired,pooled") == 0);
  CHECK(res.out.find("trial0,NA,") != std::string::npos);  // synth bundles carry no raw input
}
