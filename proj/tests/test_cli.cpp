#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "helpers.hpp"
#include "plume/cli.hpp"
#include "plume/edge.hpp"
#include "plume/io.hpp"

using namespace plume;

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("plume_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) { return io::read_file(path); }

// Writes the plume plus a three-level feature pyramid derived from it.
struct Fixture {
  TempDir dir;
  std::string img = dir / "plume.pgm";

  Fixture() {
    REQUIRE(run({"synth", "--size", "64", "--out", img}).code == 0);
    REQUIRE(run({"edge", "--in", img, "--out", dir / "e0.pgm", "--out-tensor", dir / "e0.gtsr"}).code == 0);
    REQUIRE(run({"pyramid", "--in", img, "--levels", "3", "--out-prefix", dir / "pyr_", "--seed", "1"}).code == 0);
  }
};

}  // namespace

TEST_SUITE("cli usage") {
  TEST_CASE("help lists every flag of every subcommand") {
    const std::vector<std::pair<std::string, std::vector<std::string>>> flags = {
        {"edge", {"--in", "--out", "--out-tensor", "--alpha", "--component", "--config"}},
        {"pyramid", {"--in", "--levels", "--out-prefix", "--channels", "--config", "--seed"}},
        {"gasblock", {"--in", "--edge", "--alpha-decay", "--out", "--trace-prefix", "--seed"}},
        {"importance", {"--in", "--out", "--seed"}},
        {"route", {"--p3", "--p4", "--p5", "--out-prefix", "--disable-path", "--seed"}},
        {"oracle", {"--size", "--D", "--vx", "--vy", "--t", "--dt", "--tol", "--boundary", "--report"}},
        {"gradcheck", {"--target", "--report", "--seed"}},
        {"erf", {"--net", "--size", "--channels", "--thresholds", "--alpha-decay", "--out", "--seed"}},
        {"synth", {"--size", "--out"}},
    };
    for (const auto& [sub, names] : flags) {
      const auto r = run({sub, "--help"});
      CAPTURE(sub);
      CHECK(r.code == 0);
      for (const auto& f : names) CHECK_MESSAGE(r.out.find(f) != std::string::npos, f);
    }
    const auto top = run({"--help"});
    CHECK(top.code == 0);
    for (const auto& [sub, _] : flags) CHECK(top.out.find(sub) != std::string::npos);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    const auto r = run({"oracle", "--bogus", "1"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK(run({"edge", "--out", "x.pgm"}).code == 2);
    CHECK(run({"gradcheck", "--target", "everything"}).code == 2);
    CHECK(run({"route", "--p3", "a", "--p4", "b", "--p5", "c", "--out-prefix", "p", "--disable-path", "5"}).code == 2);
  }

  TEST_CASE("missing or malformed inputs exit 2") {
    TempDir dir;
    auto r = run({"edge", "--in", dir / "absent.pgm", "--out", dir / "e.pgm"});
    CHECK(r.code == 2);
    CHECK(r.err.find("absent.pgm") != std::string::npos);
    io::write_file_atomic(dir / "junk.pgm", "P5\n4 4\n255\nxx");
    CHECK(run({"edge", "--in", dir / "junk.pgm", "--out", dir / "e.pgm"}).code == 2);
    CHECK(run({"edge", "--in", dir / "junk.pgm", "--out", dir / "e.pgm", "--alpha", "abc"}).code == 2);
    io::write_file_atomic(dir / "bad.cfg", "colour=red\n");
    CHECK(run({"gradcheck", "--target", "ie", "--config", dir / "bad.cfg"}).code == 2);
  }
}

TEST_SUITE("cli oracle") {
  TEST_CASE("stable step passes") {
    const auto r = run({"oracle", "--size", "32", "--D", "0.5", "--vx", "0", "--vy", "0", "--t", "1", "--dt", "0.1"});
    CHECK(r.code == 0);
    CHECK(r.out.find("pass\t1\n") != std::string::npos);
    CHECK(r.out.find("steps\t10\n") != std::string::npos);
  }

  TEST_CASE("unstable step is a check failure naming CFL") {
    const auto r = run({"oracle", "--size", "32", "--D", "0.5", "--vx", "0", "--vy", "0", "--t", "1", "--dt", "0.6"});
    CHECK(r.code == 1);
    CHECK(r.err.find("CFL") != std::string::npos);
  }

  TEST_CASE("tolerance breach exits 1") {
    const auto r = run({"oracle", "--size", "16", "--dt", "0.1", "--tol", "1e-12"});
    CHECK(r.code == 1);
    CHECK(r.out.find("pass\t0\n") != std::string::npos);
  }

  TEST_CASE("report file mirrors stdout") {
    TempDir dir;
    const auto r = run({"oracle", "--size", "16", "--boundary", "reflecting", "--report", dir / "o.txt"});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "o.txt") == r.out);
  }
}

TEST_SUITE("cli gradcheck") {
  TEST_CASE("full suite at seed 7") {
    TempDir dir;
    const auto r = run({"gradcheck", "--target", "all", "--seed", "7", "--report", dir / "g.txt"});
    CHECK(r.code == 0);
    CHECK(r.out.find("failures\t0\n") != std::string::npos);
    CHECK(r.out.find("weights\tseeded-random-untrained\n") != std::string::npos);
    CHECK(r.out.find(" FAIL") == std::string::npos);
    CHECK(slurp(dir / "g.txt") == r.out);
  }

  TEST_CASE("seed from config unless overridden") {
    TempDir dir;
    io::write_file_atomic(dir / "run.cfg", "seed=3\n");
    const auto a = run({"gradcheck", "--target", "aimm", "--config", dir / "run.cfg"});
    const auto b = run({"gradcheck", "--target", "aimm", "--seed", "3"});
    const auto c = run({"gradcheck", "--target", "aimm", "--config", dir / "run.cfg", "--seed", "4"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(c.out != a.out);
    CHECK(c.out.find("seed\t4\n") != std::string::npos);
  }
}

TEST_SUITE("cli edge") {
  TEST_CASE("alpha one equals the gradient component") {
    Fixture f;
    REQUIRE(run({"edge", "--in", f.img, "--alpha", "1.0", "--out", f.dir / "a1.pgm"}).code == 0);
    REQUIRE(run({"edge", "--in", f.img, "--component", "gradient", "--out", f.dir / "g.pgm"}).code == 0);
    CHECK(slurp(f.dir / "a1.pgm") == slurp(f.dir / "g.pgm"));
    REQUIRE(run({"edge", "--in", f.img, "--alpha", "0", "--out", f.dir / "a0.pgm"}).code == 0);
    REQUIRE(run({"edge", "--in", f.img, "--component", "phase", "--out", f.dir / "p.pgm"}).code == 0);
    CHECK(slurp(f.dir / "a0.pgm") == slurp(f.dir / "p.pgm"));
  }

  TEST_CASE("learned-init uses the configured fusion weight") {
    Fixture f;
    io::write_file_atomic(f.dir / "a.cfg", "alpha_fusion_init=0.25\n");
    REQUIRE(run({"edge", "--in", f.img, "--config", f.dir / "a.cfg", "--out", f.dir / "x.pgm", "--out-tensor",
                 f.dir / "x.gtsr"})
                .code == 0);
    const Tensor x = io::read_pgm(f.img);
    const auto banks = edge::EdgeBanks<float>{};
    const Tensor want = edge::agpeo(x, edge::AgpeoParams<float>::with_alpha(0.25), banks).e0;
    CHECK(testing::bitwise_equal(io::read_tensor(f.dir / "x.gtsr"), want));
  }

  TEST_CASE("baseline components run") {
    Fixture f;
    for (const std::string c : {"sobel", "laplacian"}) {
      const auto r = run({"edge", "--in", f.img, "--component", c, "--out", f.dir / (c + ".pgm")});
      CHECK(r.code == 0);
      CHECK(io::read_pgm(f.dir / (c + ".pgm")).shape() == Shape{1, 1, 64, 64});
    }
  }
}

TEST_SUITE("cli pipeline") {
  TEST_CASE("synth reproduces the bundled plume") {
    TempDir dir;
    REQUIRE(run({"synth", "--size", "64", "--out", dir / "p.pgm"}).code == 0);
    CHECK(slurp(dir / "p.pgm") == slurp(std::string(PLUME_DATA_DIR) + "/plume64.pgm"));
  }

  TEST_CASE("pyramid geometry") {
    Fixture f;
    for (int i = 0; i <= 3; ++i) {
      const int n = 64 >> i;
      CHECK(io::read_pgm(f.dir / ("pyr_E" + std::to_string(i) + ".pgm")).shape() == Shape{1, 1, n, n});
      CHECK(io::read_tensor(f.dir / ("pyr_P" + std::to_string(i) + ".gtsr")).shape() == Shape{1, 8, n, n});
    }
  }

  TEST_CASE("gasblock writes output and every trace tensor") {
    Fixture f;
    const auto r = run({"gasblock", "--in", f.dir / "pyr_P1.gtsr", "--edge", f.dir / "pyr_E1.pgm", "--seed", "2",
                        "--alpha-decay", "0.5", "--out", f.dir / "y.gtsr"});
    REQUIRE(r.code == 0);
    CHECK(io::read_tensor(f.dir / "y.gtsr").shape() == Shape{1, 8, 32, 32});
    for (const std::string n : {"x_local", "x_proj", "z", "x_global_pre", "gate", "x_global", "y_pre"})
      CHECK(fs::exists(f.dir / ("y." + n + ".gtsr")));
    CHECK(r.out.find("alpha_decay\t0.5\n") != std::string::npos);
  }

  TEST_CASE("importance map keeps the feature shape and lies in (0, 1)") {
    Fixture f;
    REQUIRE(run({"importance", "--in", f.dir / "pyr_P2.gtsr", "--seed", "3", "--out", f.dir / "i.gtsr"}).code == 0);
    const Tensor i = io::read_tensor(f.dir / "i.gtsr");
    CHECK(i.shape() == Shape{1, 8, 16, 16});
    for (float v : i.data()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }

  TEST_CASE("route is deterministic and honours disabled paths") {
    Fixture f;
    const std::vector<std::string> base = {"route", "--p3", f.dir / "pyr_P1.gtsr", "--p4", f.dir / "pyr_P2.gtsr",
                                           "--p5", f.dir / "pyr_P3.gtsr", "--seed", "5"};
    auto with = [&](std::vector<std::string> extra) {
      auto a = base;
      a.insert(a.end(), extra.begin(), extra.end());
      return a;
    };
    const auto r1 = run(with({"--out-prefix", f.dir / "r1_"}));
    const auto r2 = run(with({"--out-prefix", f.dir / "r2_"}));
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    CHECK(r1.out == r2.out);
    for (const std::string n : {"P3.gtsr", "P4.gtsr", "P5.gtsr", "importance.gtsr", "W1.gtsr", "W4.gtsr", "report.txt"})
      CHECK(slurp(f.dir / ("r1_" + n)) == slurp(f.dir / ("r2_" + n)));
    CHECK(io::read_tensor(f.dir / "r1_P3.gtsr").shape() == Shape{1, 8, 32, 32});
    CHECK(io::read_tensor(f.dir / "r1_P5.gtsr").shape() == Shape{1, 8, 8, 8});

    const auto off = run(with({"--out-prefix", f.dir / "off_", "--disable-path", "2"}));
    REQUIRE(off.code == 0);
    CHECK(off.out.find("path2.enabled\t0\n") != std::string::npos);
    CHECK(off.out.find("path1.enabled\t1\n") != std::string::npos);
    // Path 2 carries the deep level into the shallow one; the mid level is untouched.
    CHECK(slurp(f.dir / "off_P3.gtsr") != slurp(f.dir / "r1_P3.gtsr"));
    CHECK(slurp(f.dir / "off_P4.gtsr") == slurp(f.dir / "r1_P4.gtsr"));
  }

  TEST_CASE("route rejects a mismatched pyramid") {
    Fixture f;
    const auto r = run({"route", "--p3", f.dir / "pyr_P1.gtsr", "--p4", f.dir / "pyr_P1.gtsr", "--p5",
                        f.dir / "pyr_P3.gtsr", "--out-prefix", f.dir / "bad_"});
    CHECK(r.code == 2);
  }

  TEST_CASE("erf map and ratio table") {
    TempDir dir;
    const auto r = run({"erf", "--net", "dwconv", "--size", "32", "--seed", "1", "--thresholds", "0.2,0.3,0.5,0.99",
                        "--out", dir / "erf.pgm"});
    REQUIRE(r.code == 0);
    for (const std::string t : {"ratio@0.2\t", "ratio@0.3\t", "ratio@0.5\t", "ratio@0.99\t"})
      CHECK(r.out.find(t) != std::string::npos);
    CHECK(io::read_pgm(dir / "erf.pgm").shape() == Shape{1, 1, 32, 32});
    const auto g = run({"erf", "--net", "gasblock", "--size", "16", "--seed", "1"});
    CHECK(g.code == 0);
  }
}
