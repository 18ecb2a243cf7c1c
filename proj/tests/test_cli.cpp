#include <gtest/gtest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pdca/io.hpp"

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(PDCA_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& f) { return std::string(PDCA_DATA_DIR) + "/" + f; }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pdca_cli_test_" + name);
}

}  // namespace

TEST(Cli, SolveTinyMatchesReference) {
  const CliRun r = run("solve " + data("tiny3.dat") + " --sln " + data("tiny3.sln"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["status"], "stationary");
  EXPECT_EQ(j["gap_percent"].get<double>(), 0.0);
  EXPECT_EQ(j["objective"].get<double>(), 170.0);
  EXPECT_TRUE(j["rank_one"].get<bool>());
  EXPECT_EQ(j["permutation"].size(), 3u);
  for (const char* key : {"relaxation_value", "rank_ratio", "rho", "time", "outer_iters", "inner_iters"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Cli, RhoZeroReportsOnlyALowerBound) {
  const CliRun r = run("solve " + data("tiny3.dat") + " --rho 0");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["rank_one"].is_null());
  EXPECT_FALSE(j.contains("permutation"));
  EXPECT_LE(j["lower_bound"].get<double>(), 170.0 + 1e-6);
}

TEST(Cli, ErrorsExitOne) {
  EXPECT_EQ(run("solve /nonexistent/file.dat").code, 1);
  EXPECT_EQ(run("solve").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  const auto bad = temp_file("bad.dat");
  std::ofstream(bad) << "2\n0 1\n1 zz\n0 2\n2 0\n";
  EXPECT_EQ(run("solve " + bad.string()).code, 1);
  std::filesystem::remove(bad);
}

TEST(Cli, MaxItersExitsTwoWithOutput) {
  const CliRun r = run("solve " + data("tiny4.dat") + " --rho 0.1 --max-outer 2");
  EXPECT_EQ(r.code, 2);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["status"], "max_iters");
  EXPECT_EQ(j["permutation"].size(), 4u);
}

TEST(Cli, SweepCsv) {
  const auto csv = temp_file("sweep.csv");
  const CliRun r = run("sweep-rho " + data("tiny3.dat") + " --grid 0.1,1,10,100 --out " + csv.string());
  EXPECT_LE(r.code, 2);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "rho,gap_percent,rank,f_rho,time_seconds,status");
  std::vector<double> rhos;
  std::vector<int> ranks;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 6u);
    rhos.push_back(std::stod(cells[0]));
    ranks.push_back(std::stoi(cells[2]));
    EXPECT_NO_THROW(std::stod(cells[1]));
    EXPECT_NO_THROW(std::stod(cells[3]));
  }
  EXPECT_EQ(rhos, (std::vector<double>{0.1, 1, 10, 100}));
  for (std::size_t i = 1; i < ranks.size(); ++i) EXPECT_LE(ranks[i], ranks[i - 1]);
  EXPECT_EQ(ranks.back(), 1);
  std::filesystem::remove(csv);
}

TEST(Cli, SweepSinglePointEqualsSolve) {
  const CliRun sweep = run("sweep-rho " + data("tiny3.dat") + " --grid 10");
  const CliRun solve = run("solve " + data("tiny3.dat") + " --rho 10");
  const auto j = nlohmann::json::parse(solve.out);
  std::stringstream ss(sweep.out);
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(std::stoi(cells[2]), j["trials"][0]["rank"].get<int>());
  EXPECT_EQ(cells[5], j["status"].get<std::string>());
}

TEST(Cli, BenchTableInManifestOrder) {
  const auto manifest = temp_file("manifest.txt");
  std::ofstream(manifest) << "# two instances\n"
                          << data("tiny4.dat") << "," << data("tiny4.sln") << "\n\n"
                          << data("tiny3.dat") << "," << data("tiny3.sln") << "\n";
  const CliRun r = run("bench " + manifest.string() + " --threads 2");
  ASSERT_EQ(r.code, 0) << r.out;
  std::stringstream ss(r.out);
  std::string header, a, b, extra;
  std::getline(ss, header);
  std::getline(ss, a);
  std::getline(ss, b);
  EXPECT_FALSE(std::getline(ss, extra));
  EXPECT_EQ(header.rfind("problem", 0), 0u);
  EXPECT_EQ(a.rfind("tiny4", 0), 0u);
  EXPECT_EQ(b.rfind("tiny3", 0), 0u);
  for (const std::string& row : {a, b}) {
    std::stringstream rs(row);
    std::string name, opt, value, gap, time;
    rs >> name >> opt >> value >> gap >> time;
    EXPECT_EQ(opt, value);
    EXPECT_EQ(gap, "0.00");
    EXPECT_EQ(time.size(), 8u);
  }
  std::filesystem::remove(manifest);
}

TEST(Cli, VerifyPasses) {
  const CliRun r = run("verify --n-max 4 --trials 50 --seed 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("OK", 0), 0u);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const auto cfg = temp_file("cfg.toml");
  std::ofstream(cfg) << "max-outer = 2\nrho = 0.1\n";
  const CliRun from_file = run("--config " + cfg.string() + " solve " + data("tiny4.dat"));
  EXPECT_EQ(from_file.code, 2);
  EXPECT_EQ(nlohmann::json::parse(from_file.out)["outer_iters"], 2);
  const CliRun flag = run("--config " + cfg.string() + " solve " + data("tiny4.dat") + " --max-outer 3");
  EXPECT_EQ(nlohmann::json::parse(flag.out)["outer_iters"], 3);
  const CliRun before = run("--config " + cfg.string() + " --max-outer 3 solve " + data("tiny4.dat"));
  EXPECT_EQ(nlohmann::json::parse(before.out)["outer_iters"], 3);
  std::filesystem::remove(cfg);
}
