#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "tenstream/harness.hpp"
#include "tenstream/io.hpp"

using namespace tenstream;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
  std::map<std::string, std::string> kv;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    auto eq = line.find('=');
    if (eq != std::string::npos && !r.kv.count(line.substr(0, eq))) r.kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tenstream_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen, decompose and eval on noiseless cp") {
  TempDir d;
  Run g = run({"gen", "--model", "cp", "--dims", "12", "13", "14", "--rank", "3", "--seed", "5", "-o", d / "t.tns",
               "--truth", d / "truth"});
  REQUIRE(g.code == 0);
  GenSpec s;
  s.dims = {12, 13, 14};
  s.rank = 3;
  s.seed = 5;
  SparseTensor expect = SparseTensor::from_dense(gen_cp(s).tensor);
  SparseTensor loaded = load_tensor(d / "t.tns");
  CHECK(loaded.shape() == expect.shape());
  CHECK(loaded.indices() == expect.indices());
  CHECK(loaded.values() == expect.values());

  Run dec = run({"decompose", "-i", d / "t.tns", "--rank", "3", "--tol", "1e-12", "--init", "hosvd", "-o", d / "fac"});
  REQUIRE(dec.code == 0);
  CHECK(std::stod(dec.kv["relerr"]) <= 1e-6);
  Run ev = run({"eval", "-i", d / "t.tns", "-f", d / "fac"});
  REQUIRE(ev.code == 0);
  CHECK(ev.kv["relerr"] == dec.kv["relerr"]);
  Run fit = run({"eval", "-i", d / "t.tns", "-f", d / "fac", "--metric", "fitness"});
  CHECK(fit.kv["fitness"] == dec.kv["fitness"]);
  Run f = run({"eval", "--metric", "fms", "-f", d / "fac", "--reference", d / "truth"});
  REQUIRE(f.code == 0);
  CHECK(std::stod(f.kv["fms"]) >= 0.99);
}

TEST_CASE("reports and files are bit-stable across reruns and thread caps") {
  TempDir d;
  REQUIRE(run({"gen", "--dims", "10", "10", "20", "--rank", "2", "--snr", "20", "--seed", "1", "-o", d / "a.tns"}).code == 0);
  REQUIRE(run({"gen", "--dims", "10", "10", "20", "--rank", "2", "--snr", "20", "--seed", "1", "-o", d / "b.tns"}).code == 0);
  CHECK(slurp(d / "a.tns") == slurp(d / "b.tns"));
  std::vector<std::string> dec{"decompose", "-i", d / "a.tns", "--rank", "2", "--seed", "3", "-o"};
  auto with = [](std::vector<std::string> v, std::vector<std::string> extra) {
    v.insert(v.end(), extra.begin(), extra.end());
    return v;
  };
  Run r1 = run(with(dec, {d / "f1"}));
  Run r2 = run(with(dec, {d / "f2", "--threads", "3"}));
  REQUIRE(r1.code == 0);
  CHECK(r1.out == r2.out);
  CHECK(slurp(d / "f1/mode0.csv") == slurp(d / "f2/mode0.csv"));
  std::vector<std::string> st{"stream", "-i", d / "a.tns", "--method", "sambaten", "--rank", "2", "--batch-size", "4",
                              "--seed", "2"};
  Run s1 = run(with(st, {"--metrics", d / "m1.csv"}));
  Run s2 = run(with(st, {"--metrics", d / "m2.csv", "--threads", "1"}));
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s2.out);
  CHECK(slurp(d / "m1.csv") == slurp(d / "m2.csv"));
}

TEST_CASE("stream methods save factors that reproduce the reported error") {
  TempDir d;
  REQUIRE(run({"gen", "--dims", "15", "15", "30", "--rank", "2", "--seed", "7", "-o", d / "cp.tns"}).code == 0);
  REQUIRE(run({"gen", "--model", "btd", "--dims", "10", "10", "30", "--rank", "2", "--block-ranks", "2", "2", "2",
               "--seed", "8", "-o", d / "btd.tns"})
              .code == 0);
  REQUIRE(run({"gen", "--model", "parafac2", "--dims", "8", "10", "30", "--rank", "2", "--seed", "9", "-o",
               d / "pf2.txt"})
              .code == 0);
  struct Case {
    std::string method, input;
    std::vector<std::string> extra;
  };
  std::vector<Case> cases{
      {"sambaten", "cp.tns", {"--init", "hosvd"}},
      {"octen", "cp.tns", {"--q", "12", "--p", "6", "--shared", "3", "--init-frac", "0.3"}},
      {"onlinebtd", "btd.tns", {"--block-ranks", "2", "2", "2"}},
      {"spade", "pf2.txt", {"--init", "hosvd"}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.method);
    std::vector<std::string> args{"stream", "-i", d / c.input, "--method", c.method, "--rank", "2", "--batch-size", "6",
                                  "--metrics", d / (c.method + ".csv"), "-o", d / c.method};
    args.insert(args.end(), c.extra.begin(), c.extra.end());
    Run s = run(args);
    REQUIRE(s.code == 0);
    std::istringstream csv(slurp(d / (c.method + ".csv")));
    std::string header, line, last;
    std::getline(csv, header);
    CHECK(header == "batch,slices,relerr");
    int rows = 0;
    while (std::getline(csv, line)) {
      last = line;
      ++rows;
    }
    CHECK(rows == std::stoi(s.kv["batches"]) + 1);
    CHECK(last.substr(last.rfind(',') + 1) == s.kv["relerr"]);
    Run ev = run({"eval", "-i", d / c.input, "-f", d / c.method});
    REQUIRE(ev.code == 0);
    CHECK(std::abs(std::stod(ev.kv["relerr"]) - std::stod(s.kv["relerr"])) <= 1e-10);
  }
}

TEST_CASE("rank subcommand") {
  TempDir d;
  REQUIRE(run({"gen", "--model", "parafac2", "--dims", "20", "30", "40", "--rank", "5", "--seed", "11", "-o",
               d / "p.txt"})
              .code == 0);
  Run a = run({"rank", "-i", d / "p.txt", "--method", "aptera", "--rmax", "8", "--experiments", "3", "--max-iters",
               "100"});
  REQUIRE(a.code == 0);
  CHECK(a.kv["rank"] == "5");

  REQUIRE(run({"gen", "--dims", "10", "10", "10", "--rank", "2", "--seed", "12", "-o", d / "c.tns"}).code == 0);
  Run g = run({"rank", "-i", d / "c.tns", "--method", "getrank", "--rmax", "4", "--experiments", "3", "--tol", "1e-10",
               "--max-iters", "500"});
  REQUIRE(g.code == 0);
  CHECK(g.kv["rank"] == "2");
}

TEST_CASE("exit codes") {
  TempDir d;
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"decompose", "--rank", "2"}).code == cli::kUsage);
  CHECK(run({"stream", "-i", "x", "--method", "nope", "--rank", "2", "--batch-size", "2"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);

  Run missing = run({"decompose", "-i", d / "missing.tns", "--rank", "2"});
  CHECK(missing.code == cli::kData);
  CHECK(missing.out.empty());

  std::ofstream(d / "dup.tns") << "# shape: 2 2 2\n1 1 1 1\n1 1 1 2\n";
  Run dup = run({"decompose", "-i", d / "dup.tns", "--rank", "1"});
  CHECK(dup.code == cli::kData);
  CHECK(dup.err.find(":3:") != std::string::npos);

  std::ofstream(d / "t.tns") << "# shape: 3 3 3\n1 1 1 1\n2 2 2 1\n";
  CHECK(run({"decompose", "-i", d / "t.tns", "--rank", "1000"}).code == cli::kUsage);

  std::ofstream(d / "zero.tns") << "# shape: 3 3 3\n";
  CHECK(run({"decompose", "-i", d / "zero.tns", "--rank", "1"}).code == cli::kData);

  std::ofstream(d / "big.tns") << "# shape: 2 2 2\n1 1 1 1e300\n2 2 2 -1e300\n1 2 1 3e299\n";
  CHECK(run({"decompose", "-i", d / "big.tns", "--rank", "1"}).code == cli::kNumerical);
}
