#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string out_path = "cli_test_stdout.tmp";
  const std::string cmd = std::string(CURSTAT_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::remove(out_path.c_str());
  return {WEXITSTATUS(raw), ss.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const std::string kRubella = std::string(CURSTAT_DATA_DIR) + "/rubella_style.csv";

}  // namespace

TEST_CASE("cli ci on the bundled data set") {
  auto res = run_cli("ci --input " + kRubella +
                     " --grid 10,25,40 --bandwidth 12 --B 80 --seed 3 --workers 2");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("t,estimate,lower,upper,bandwidth,discarded") != std::string::npos);
  REQUIRE(res.output.find("# seed=3") != std::string::npos);
  // three data rows, all with lower <= upper in [0,1]
  std::istringstream ss(res.output);
  std::string line;
  int rows = 0;
  bool past_header = false;
  while (std::getline(ss, line)) {
    if (line.rfind("t,", 0) == 0) {
      past_header = true;
      continue;
    }
    if (!past_header || line.empty() || line[0] == '#') continue;
    double t, est, lo, hi, h;
    int disc;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%d", &t, &est, &lo, &hi, &h,
                        &disc) == 6);
    REQUIRE(lo <= hi);
    REQUIRE(lo >= 0.0);
    REQUIRE(hi <= 1.0);
    REQUIRE(lo <= est);
    REQUIRE(est <= hi);
    ++rows;
  }
  REQUIRE(rows == 3);
}

TEST_CASE("cli ci with the data-driven rubella recipe (exponent 1/4)") {
  auto res = run_cli("ci --input " + kRubella +
                     " --grid 15,35 --auto-bandwidth --exponent 0.25 --B 60 --b-sub 60 "
                     "--m 50 --seed 11 --workers 2");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("# bandwidth=auto") != std::string::npos);
}

TEST_CASE("cli rejects malformed input with exit 2") {
  write_file("cli_bad.csv", "time,status\nabc,1\n");
  auto res = run_cli("ci --input cli_bad.csv --bandwidth 10 --grid 10,20 --B 40 --seed 1");
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.output.find("line 2") != std::string::npos);
  std::remove("cli_bad.csv");

  auto res2 = run_cli("ci --input does_not_exist.csv --bandwidth 10 --grid 10 --B 40");
  REQUIRE(res2.exit_code == 2);

  auto res3 = run_cli("simulate --model not_a_model --N 2 --B 20");
  REQUIRE(res3.exit_code == 2);

  // m >= n for the bandwidth command
  auto res4 = run_cli("bandwidth --input " + kRubella + " --grid 20 --m 230 --b-sub 20");
  REQUIRE(res4.exit_code == 2);
}

TEST_CASE("cli estimator failures exit with 3") {
  // all statuses zero: the studentized pivot is degenerate everywhere
  std::string csv = "time,status\n";
  for (int i = 1; i <= 40; ++i) csv += std::to_string(i * 0.05) + ",0\n";
  write_file("cli_zeros.csv", csv);
  auto res = run_cli("ci --input cli_zeros.csv --bandwidth 0.5 --grid 1.0 --B 40 --seed 1");
  REQUIRE(res.exit_code == 3);
  std::remove("cli_zeros.csv");
}

TEST_CASE("cli seed determinism produces byte-identical files") {
  const std::string args = "ci --input " + kRubella +
                           " --grid 10,25,40 --bandwidth 12 --B 60 --seed 9 --output ";
  auto a = run_cli(args + "cli_a.csv --workers 1");
  auto b = run_cli(args + "cli_b.csv --workers 4");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(slurp("cli_a.csv") == slurp("cli_b.csv"));
  REQUIRE(!slurp("cli_a.csv").empty());
  std::remove("cli_a.csv");
  std::remove("cli_b.csv");
}

TEST_CASE("cli seed falls back to CURSTAT_SEED") {
  const std::string tail = " --grid 20,30 --bandwidth 12 --B 40 --output ";
  auto a = run_cli("ci --input " + kRubella + tail + "cli_env_a.csv --seed 21");
  REQUIRE(a.exit_code == 0);
  setenv("CURSTAT_SEED", "21", 1);
  auto b = run_cli("ci --input " + kRubella + tail + "cli_env_b.csv");
  unsetenv("CURSTAT_SEED");
  REQUIRE(b.exit_code == 0);
  REQUIRE(slurp("cli_env_a.csv") == slurp("cli_env_b.csv"));
  std::remove("cli_env_a.csv");
  std::remove("cli_env_b.csv");
}

TEST_CASE("cli bandwidth command") {
  auto res = run_cli("bandwidth --input " + kRubella +
                     " --grid 20,40 --m 50 --b-sub 40 --seed 2 --workers 2");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("t,c_opt,flag") != std::string::npos);
}

TEST_CASE("cli simulate smoke runs") {
  auto res = run_cli(
      "simulate --model uniform2 --n 200 --N 4 --B 40 --grid 0.8,1.2 --bandwidth 0.7 "
      "--seed 5 --workers 2");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("t,noncoverage,avg_length,n,N,B,method") != std::string::npos);

  auto reg = run_cli(
      "simulate --model reg_model1 --n 50 --N 2 --B 30 --search-lo -1 --search-hi 2 "
      "--seed 6 --workers 2");
  REQUIRE(reg.exit_code == 0);
  REQUIRE(reg.output.find("stat,value") != std::string::npos);
  REQUIRE(reg.output.find("beta_mean,") != std::string::npos);
}

TEST_CASE("cli regress command") {
  // small synthetic regression data set written on the fly
  std::string csv = "time,covariate,status\n";
  std::uint64_t state = 88172645463325252ULL;
  auto next_uniform = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  };
  for (int i = 0; i < 120; ++i) {
    const double t = 2.0 * next_uniform();
    const double x = 2.0 * next_uniform();
    const double e = 0.375 + 0.25 * next_uniform();
    csv += std::to_string(t) + "," + std::to_string(x) + "," +
           std::to_string(0.5 * x + e <= t ? 1 : 0) + "\n";
  }
  write_file("cli_reg.csv", csv);

  auto res = run_cli(
      "regress --input cli_reg.csv --search-lo -1 --search-hi 2 --B 50 --seed 4 --workers 2");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("beta_hat,lower,upper,no_crossing_count") != std::string::npos);

  // missing covariate column
  write_file("cli_reg_bad.csv", "time,status\n1.0,1\n");
  auto bad = run_cli("regress --input cli_reg_bad.csv --B 20 --seed 4");
  REQUIRE(bad.exit_code == 2);

  // determinism
  auto r1 = run_cli("regress --input cli_reg.csv --B 40 --seed 12 --output cli_r1.csv");
  auto r2 = run_cli("regress --input cli_reg.csv --B 40 --seed 12 --output cli_r2.csv");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(slurp("cli_r1.csv") == slurp("cli_r2.csv"));
  std::remove("cli_r1.csv");
  std::remove("cli_r2.csv");
  std::remove("cli_reg.csv");
  std::remove("cli_reg_bad.csv");
}
