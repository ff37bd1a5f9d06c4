#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "cgp/io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CGP_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " > /dev/null 2> /tmp/cgp_cli_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string last_stderr() {
    std::ifstream in("/tmp/cgp_cli_stderr.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cgp_cli_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("simulate writes instance files and is seed-deterministic") {
    TempDir dir;
    const std::string out1 = (dir.path / "a").string();
    const std::string out2 = (dir.path / "b").string();
    const std::string flags = "simulate --n 20 --clusters 4 --lags 2 --k 60 --seed 7 "
                              "--density 0.08 --out ";
    REQUIRE(run(flags + out1) == 0);
    REQUIRE(run(flags + out2) == 0);
    for (const char* name : {"series.csv", "adjacency_true.csv", "coeffs_true.csv", "meta.json"}) {
        CHECK(fs::exists(fs::path(out1) / name));
        // identical argv modulo --out, identical seed: identical bytes
        if (std::string(name) != "meta.json") {
            std::ifstream f1(fs::path(out1) / name), f2(fs::path(out2) / name);
            std::stringstream s1, s2;
            s1 << f1.rdbuf();
            s2 << f2.rdbuf();
            CHECK(s1.str() == s2.str());
        }
    }
}

TEST_CASE("simulate requires a seed") {
    TempDir dir;
    CHECK(run("simulate --n 10 --k 30 --out " + dir.path.string()) == 2);
}

TEST_CASE("fit consumes simulate output") {
    TempDir dir;
    REQUIRE(run("simulate --n 15 --clusters 3 --lags 2 --k 120 --seed 3 --density 0.1 --out " +
                dir.path.string()) == 0);
    REQUIRE(run("fit --input " + (dir.path / "series.csv").string() +
                " --lags 2 --lambda1 0.001 --out " + (dir.path / "fit").string()) == 0);
    CHECK(fs::exists(dir.path / "fit" / "adjacency.csv"));
    CHECK(fs::exists(dir.path / "fit" / "coeffs.csv"));
    CHECK(fs::exists(dir.path / "fit" / "meta.json"));
}

TEST_CASE("select fails cleanly when the grid holds no peak") {
    TempDir dir;
    REQUIRE(run("simulate --n 10 --clusters 2 --lags 1 --k 80 --seed 5 --density 0.1 --out " +
                dir.path.string()) == 0);
    // a two-point grid cannot contain an interior peak
    const int code = run("select --input " + (dir.path / "series.csv").string() +
                         " --lags 1 --grid-linear 1e6 2e6 1e6 --out " +
                         (dir.path / "sel").string());
    CHECK(code == 1);
    CHECK(last_stderr().find("error: selection:") != std::string::npos);
}

TEST_CASE("unknown flags are usage errors, distinct from runtime failures") {
    CHECK(run("fit --no-such-flag") == 2);
    CHECK(run("fit --input /nonexistent.csv --lags 1 --lambda1 1") == 1);
    CHECK(last_stderr().find("error: io:") != std::string::npos);
}
