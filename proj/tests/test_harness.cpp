#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "rieszfrac/harness.hpp"

using namespace rieszfrac;
namespace h = rieszfrac::harness;
namespace fs = std::filesystem;

namespace {

const h::Json kGolden = h::Json::parse(R"({
  "ambient_dim": 1, "exact": true,
  "maps": [{"ratio": "1/4", "translation": "0"}, {"ratio": "1/2", "translation": "1/2"}]
})");

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rieszfrac-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RIESZFRAC_CLI) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(LoadSystem, GoldenCantor) {
  const auto sys = h::load_system(kGolden);
  EXPECT_TRUE(sys.exact);
  ASSERT_TRUE(sys.line_exact);
  EXPECT_EQ(sys.line_exact->sigma(), Rational(1, 4));
  EXPECT_NEAR(sys.dimension(), 0.694242, 1e-6);
  EXPECT_EQ(sys.sigma_text(), "1/4");
}

TEST(LoadSystem, NumbersSelectFloatingMode) {
  auto cfg = kGolden;
  cfg["maps"][0]["ratio"] = 0.25;
  const auto sys = h::load_system(cfg);
  EXPECT_FALSE(sys.exact);
  EXPECT_TRUE(sys.line_float);
  EXPECT_FALSE(sys.line_exact);
}

TEST(LoadSystem, Errors) {
  auto overlap = kGolden;
  overlap["maps"][0]["ratio"] = "1/2";
  overlap["maps"][1] = h::Json{{"ratio", "2/3"}, {"translation", "1/3"}};
  EXPECT_THROW(h::load_system(overlap), SeparationError);
  auto bad_ratio = kGolden;
  bad_ratio["maps"][0]["ratio"] = "3/2";
  EXPECT_THROW(h::load_system(bad_ratio), ParseError);
  auto unknown = kGolden;
  unknown["colour"] = "red";
  EXPECT_THROW(h::load_system(unknown), ParseError);
  auto short_t = h::Json::parse(R"({"ambient_dim": 2, "maps": [{"ratio": "1/4", "translation": ["0"]},
                                     {"ratio": "1/4", "translation": ["1", "0"]}]})");
  EXPECT_THROW(h::load_system(short_t), ParseError);
  EXPECT_THROW(h::load_system(h::Json::parse(R"({"ambient_dim": 1, "maps": []})")), ParseError);
}

TEST(LoadSystem, IndependentRatiosRefusedForDependentCommands) {
  auto cfg = kGolden;
  cfg["maps"][0]["ratio"] = "1/3";
  const auto sys = h::load_system(cfg);
  EXPECT_THROW(h::require_dependent(sys), DependenceError);
  h::Request req{"zseq", {{"ell", 1}, {"s", 2.0}, {"nmax", 3}, {"restarts", 2}, {"seed", 1}}};
  try {
    h::run(req, &sys, nullptr);
    FAIL() << "expected DependenceError";
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST(LoadSystem, PlaneSystemWithRotation) {
  const auto cfg = h::Json::parse(R"({"ambient_dim": 2, "maps": [
      {"ratio": "1/4", "translation": ["0", "0"], "rotation": [[0, -1], [1, 0]]},
      {"ratio": 0.25, "translation": [0.75, 0]},
      {"ratio": "1/4", "translation": ["0", "3/4"]}], "sigma": "1/4"})");
  const auto sys = h::load_system(cfg);
  EXPECT_EQ(sys.ambient_dim, 2);
  EXPECT_FALSE(sys.exact);
  EXPECT_NEAR(sys.dimension(), std::log(3.0) / std::log(4.0), 1e-12);
}

TEST(Canonical, EquivalentConfigsShareKeys) {
  const auto a = h::load_system(kGolden);
  const auto b = h::load_system(h::Json::parse(R"({
    "maps": [{"translation": "0/7", "ratio": "2/8"}, {"translation": "0.5", "ratio": "1/2"}],
    "exact": true, "ambient_dim": 1})"));
  EXPECT_EQ(a.canonical.dump(), b.canonical.dump());
  const h::Json params{{"n", 5}};
  EXPECT_EQ(h::cache_key(a.canonical, "pack", params), h::cache_key(b.canonical, "pack", params));
  EXPECT_NE(h::cache_key(a.canonical, "pack", params), h::cache_key(a.canonical, "pack", h::Json{{"n", 6}}));
  EXPECT_EQ(h::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Documents, RoundTripAndDeterminism) {
  const auto sys = h::load_system(kGolden);
  const std::vector<h::Request> reqs{
      {"dim", h::Json::object()},
      {"pack", {{"n", 21}}},
      {"pack", {{"t", "1/64"}}},
      {"energy", {{"n", 9}, {"s", 2.0}, {"depth", 6}, {"restarts", 3}, {"seed", 5}}},
      {"zseq", {{"ell", 2}, {"s", 2.0}, {"nmax", 4}, {"restarts", 2}, {"seed", 1}}},
      {"report", {{"nmax", 10}, {"s_list", {8.0, 12.0}}, {"borodachov_nmax", 6}, {"depth", 4}, {"restarts", 2}, {"seed", 1}}},
  };
  for (const auto& req : reqs) {
    const auto a = h::run(req, &sys, nullptr);
    const auto b = h::run(req, &sys, nullptr);
    EXPECT_EQ(a.document.dump(), b.document.dump()) << req.command;
    const auto reparsed = h::Json::parse(a.document.dump(2));
    EXPECT_NO_THROW(h::validate_document(reparsed)) << req.command;
    EXPECT_EQ(reparsed, a.document);
  }
  const h::Request fib{"example-fib", {{"nmax", 12}}};
  const auto doc = h::run(fib, nullptr, nullptr).document;
  EXPECT_TRUE(doc["result"]["all_certified"].get<bool>());
  EXPECT_EQ(doc["result"]["rows"].size(), 10u);
  const h::Request ren{"renewal", {{"f", "1:0.5,2:0.5"}, {"b", {1.0}}, {"nmax", 500}, {"b_tail", 0.0}}};
  const auto rdoc = h::run(ren, nullptr, nullptr).document;
  EXPECT_NEAR(rdoc["result"]["limit"]["value"].get<double>(), 2.0 / 3, 1e-15);
}

TEST(Documents, ValidationRejectsBrokenDocuments) {
  const auto sys = h::load_system(kGolden);
  auto doc = h::run({"dim", h::Json::object()}, &sys, nullptr).document;
  auto ragged = doc;
  ragged["tables"]["dim.csv"] = "a,b\n1\n";
  EXPECT_THROW(h::validate_document(ragged), ParseError);
  auto schema = doc;
  schema["schema"] = "other";
  EXPECT_THROW(h::validate_document(schema), ParseError);
}

TEST(Cache, HitReturnsIdenticalDocument) {
  const h::Cache cache(scratch("cache-hit"));
  const auto sys = h::load_system(kGolden);
  const h::Request req{"report", {{"nmax", 12}, {"s_list", h::Json::array()}, {"borodachov_nmax", 6}, {"depth", 4},
                                  {"restarts", 2}, {"seed", 1}}};
  const auto first = h::run(req, &sys, &cache);
  EXPECT_FALSE(first.cache_hit);
  const auto second = h::run(req, &sys, &cache);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(second.compute_seconds, 0.0);
  EXPECT_EQ(first.document.dump(), second.document.dump());
}

TEST(Cache, SoundOnSeededSpotChecks) {
  const h::Cache cache(scratch("cache-sound"));
  const auto sys = h::load_system(kGolden);
  for (int i = 0; i < 20; ++i) {
    const h::Request req{"energy", {{"n", 4 + i % 7}, {"s", 1.0 + 0.5 * (i % 4)}, {"depth", 6}, {"restarts", 2},
                                    {"seed", 100 + i}}};
    const auto fresh = h::run(req, &sys, nullptr);
    h::run(req, &sys, &cache);
    const auto cached = h::run(req, &sys, &cache);
    ASSERT_TRUE(cached.cache_hit);
    EXPECT_EQ(cached.document.dump(), fresh.document.dump()) << i;
  }
}

TEST(Cache, CorruptEntryIsAMiss) {
  const auto dir = scratch("cache-corrupt");
  const h::Cache cache(dir);
  const auto sys = h::load_system(kGolden);
  const h::Request req{"dim", h::Json::object()};
  const auto first = h::run(req, &sys, &cache);
  std::ofstream(cache.path_of(first.key)) << "{not json";
  const auto again = h::run(req, &sys, &cache);
  EXPECT_FALSE(again.cache_hit);
  EXPECT_TRUE(h::run(req, &sys, &cache).cache_hit);
}

TEST(Cache, GarbageCollection) {
  const auto dir = scratch("cache-gc");
  const h::Cache cache(dir);
  cache.store("k1", h::Json{{"a", 1}});
  cache.store("k2", h::Json{{"a", 2}});
  auto st = cache.gc(std::chrono::hours(24));
  EXPECT_EQ(st.removed, 0u);
  EXPECT_EQ(st.kept, 2u);
  st = cache.gc(std::chrono::hours(24), true);
  EXPECT_EQ(st.removed, 2u);
  EXPECT_FALSE(cache.lookup("k1"));
}

TEST(Outputs, ByteIdenticalAcrossRuns) {
  const auto sys = h::load_system(kGolden);
  const h::Request req{"energy", {{"n", 12}, {"s", 3.0}, {"depth", 7}, {"restarts", 4}, {"seed", 9}}};
  const auto a = scratch("out-a"), b = scratch("out-b");
  h::write_outputs(h::run(req, &sys, nullptr), a);
  h::write_outputs(h::run(req, &sys, nullptr), b);
  for (const char* f : {"energy.csv", "energy.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto run = h::Json::parse(slurp(a / "run.json"));
  EXPECT_FALSE(run["cache_hit"].get<bool>());
  const auto rows = h::parse_csv(slurp(a / "energy.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"N", "s", "depth", "energy_upper", "min_dist"}));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto golden = write_config(dir, "golden.json", kGolden.dump());
  const auto overlap = write_config(dir, "overlap.json", R"({"ambient_dim":1,"exact":true,"maps":[
      {"ratio":"1/2","translation":"0"},{"ratio":"2/3","translation":"1/3"}]})");
  const auto indep = write_config(dir, "indep.json", R"({"ambient_dim":1,"exact":true,"maps":[
      {"ratio":"1/2","translation":"0"},{"ratio":"1/3","translation":"2/3"}]})");
  const auto broken = write_config(dir, "broken.json", "{\"ambient_dim\": 1, \"maps\": [");
  const std::string common = "--no-cache --out " + (dir / "out").string() + " ";
  EXPECT_EQ(run_cli(common + "dim --config " + golden.string()), 0);
  EXPECT_EQ(run_cli(common + "dim --config " + overlap.string()), 3);
  EXPECT_EQ(run_cli(common + "zseq --config " + indep.string() + " --ell 1 --s 2 --nmax 3"), 4);
  EXPECT_EQ(run_cli(common + "dim --config " + broken.string()), 2);
  EXPECT_EQ(run_cli(common + "pack --config " + golden.string()), 2);
  EXPECT_EQ(run_cli(common + "frobnicate"), 2);
  EXPECT_EQ(run_cli(common + "energy --config " + golden.string() + " --n 3 --s 1 --depth 30"), 5);
  EXPECT_EQ(run_cli(common + "example-fib --nmax 12"), 0);
  const auto rows = h::parse_csv(slurp(dir / "out" / "fibonacci.csv"));
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[10][1], "144");
}

TEST(Cli, CacheHitIsReportedAndOutputsMatch) {
  const auto dir = scratch("cli-cache");
  const auto golden = write_config(dir, "golden.json", kGolden.dump());
  const std::string base = "--cache-dir " + (dir / "cache").string() + " ";
  const std::string args = "energy --config " + golden.string() + " --n 10 --s 2 --depth 7 --seed 3";
  ASSERT_EQ(run_cli(base + "--out " + (dir / "a").string() + " " + args), 0);
  ASSERT_EQ(run_cli(base + "--out " + (dir / "b").string() + " " + args), 0);
  EXPECT_FALSE(h::Json::parse(slurp(dir / "a" / "run.json"))["cache_hit"].get<bool>());
  EXPECT_TRUE(h::Json::parse(slurp(dir / "b" / "run.json"))["cache_hit"].get<bool>());
  EXPECT_EQ(slurp(dir / "a" / "energy.csv"), slurp(dir / "b" / "energy.csv"));
  EXPECT_EQ(slurp(dir / "a" / "energy.json"), slurp(dir / "b" / "energy.json"));
  EXPECT_EQ(run_cli(base + "cache gc --all"), 0);
  EXPECT_TRUE(fs::is_empty(dir / "cache"));
}
