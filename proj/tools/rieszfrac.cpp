// rieszfrac: command-line front end for the rieszfrac library.
//
//   rieszfrac [--out DIR] [--no-cache] <command> [options]
//
// Exit codes: 0 ok, 1 internal, 2 parse/usage, 3 geometry, 4 dependence,
// 5 budget.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rieszfrac/harness.hpp"

namespace h = rieszfrac::harness;
using rieszfrac::ErrorKind;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rieszfrac::ParseError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_s_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw rieszfrac::ParseError("malformed --s-list entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packing, Riesz energy and renewal diagnostics for self-similar fractals"};
  app.require_subcommand(1);
  std::string out_dir = ".";
  bool no_cache = false;
  std::string cache_dir;
  bool quiet = false;
  app.add_option("--out", out_dir, "Directory for result files")->capture_default_str();
  app.add_flag("--no-cache", no_cache, "Neither read nor write the result cache");
  app.add_option("--cache-dir", cache_dir, "Cache directory (default: $RIESZFRAC_CACHE_DIR or ~/.cache/rieszfrac)");
  app.add_flag("-q,--quiet", quiet, "Do not print the run summary");

  std::string config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Fractal config (JSON)")->required()->check(CLI::ExistingFile);
  };

  auto* dim = app.add_subcommand("dim", "Hausdorff dimension and exponent structure");
  add_config(dim);

  std::size_t n = 0;
  std::string t;
  int depth = 0;
  auto* pack = app.add_subcommand("pack", "Best-packing distance delta(A,N) or count N(t) (line only)");
  add_config(pack);
  auto* pack_n = pack->add_option("--n", n, "Number of points N");
  auto* pack_t = pack->add_option("--t", t, "Separation threshold t (p/q)");
  pack_n->excludes(pack_t);
  auto* pack_depth = pack->add_option("--depth", depth, "Maximum cylinder depth");

  double s = 0;
  int restarts = 8;
  std::uint64_t seed = 1;
  auto* energy = app.add_subcommand("energy", "Minimal lattice Riesz s-energy (upper bound)");
  add_config(energy);
  energy->add_option("--n", n, "Number of points N")->required();
  energy->add_option("--s", s, "Riesz exponent s")->required();
  auto* energy_depth = energy->add_option("--depth", depth, "Lattice depth (default: smallest with 4N sites)");
  energy->add_option("--restarts", restarts, "Search restarts")->capture_default_str();
  energy->add_option("--seed", seed, "Search seed")->capture_default_str();

  std::size_t ell = 1;
  int n_max = 0;
  auto* zseq = app.add_subcommand("zseq", "Normalised energy sequence z_n and renewal residuals");
  add_config(zseq);
  zseq->add_option("--ell", ell, "Multiplier ell")->required();
  zseq->add_option("--s", s, "Riesz exponent s (> d)")->required();
  zseq->add_option("--nmax", n_max, "Last n")->required();
  auto* zseq_restarts = zseq->add_option("--restarts", restarts, "Search restarts (default 4)");
  zseq->add_option("--seed", seed, "Search seed")->capture_default_str();

  std::string f_text, b_file;
  double b_tail = 0.0;
  auto* renewal = app.add_subcommand("renewal", "Solve a discrete renewal equation");
  renewal->add_option("--f", f_text, "Distribution f as k:v,k:v")->required();
  renewal->add_option("--b", b_file, "CSV file of (n, b_n)")->required()->check(CLI::ExistingFile);
  renewal->add_option("--nmax", n_max, "Last n")->required();
  renewal->add_option("--b-tail", b_tail, "Certified bound on the omitted tail of |b|")->capture_default_str();

  std::string s_list_text;
  std::size_t borodachov_nmax = 10;
  auto* report = app.add_subcommand("report", "Oscillation report for delta(A,N) N^(1/d)");
  add_config(report);
  report->add_option("--nmax", n_max, "Tabulate up to N = N(r^nmax)")->required();
  report->add_option("--s-list", s_list_text, "Comma-separated s values for the energy/packing comparison");
  report->add_option("--borodachov-nmax", borodachov_nmax, "Largest N in the comparison")->capture_default_str();
  auto* report_depth = report->add_option("--depth", depth, "Lattice depth for the comparison (default 6)");
  report->add_option("--restarts", restarts, "Search restarts")->capture_default_str();
  report->add_option("--seed", seed, "Search seed")->capture_default_str();

  auto* fib = app.add_subcommand("example-fib", "Fibonacci packing table for x/4, x/2+1/2");
  fib->add_option("--nmax", n_max, "Last n (3..60)")->required();

  double max_age_days = 30;
  bool gc_all = false;
  auto* cache = app.add_subcommand("cache", "Cache maintenance");
  cache->require_subcommand(1);
  auto* gc = cache->add_subcommand("gc", "Remove stale cache entries");
  gc->add_option("--max-age-days", max_age_days, "Remove entries older than this")->capture_default_str();
  gc->add_flag("--all", gc_all, "Remove every entry");

  for (auto* sub : {dim, pack, energy, zseq, renewal, report, fib, cache}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::parse);
  }

  try {
    const h::Cache store(cache_dir.empty() ? h::default_cache_dir() : std::filesystem::path(cache_dir));
    if (*cache) {
      const auto age = std::chrono::seconds(static_cast<long long>(max_age_days * 86400.0));
      const auto st = store.gc(age, gc_all);
      if (!quiet) {
        std::cout << h::Json{{"cache_dir", store.dir().string()}, {"removed", st.removed}, {"kept", st.kept}}.dump()
                  << "\n";
      }
      return 0;
    }

    h::Request req;
    std::optional<h::LoadedSystem> sys;
    if (*dim) {
      req.command = "dim";
    } else if (*pack) {
      req.command = "pack";
      if (*pack_n) req.params["n"] = n;
      else if (*pack_t) req.params["t"] = rieszfrac::format_rational(rieszfrac::parse_rational(t));
      else throw rieszfrac::ParseError("pack needs --n or --t");
      if (*pack_depth) req.params["depth"] = depth;
    } else if (*energy) {
      req.command = "energy";
      req.params = {{"n", n}, {"s", s}, {"restarts", restarts}, {"seed", seed}};
    } else if (*zseq) {
      req.command = "zseq";
      req.params = {{"ell", ell}, {"s", s}, {"nmax", n_max}, {"restarts", *zseq_restarts ? restarts : 4},
                    {"seed", seed}};
    } else if (*renewal) {
      req.command = "renewal";
      h::Json b = h::Json::array();
      for (auto x : h::parse_b_csv(slurp(b_file))) b.push_back(static_cast<double>(x));
      req.params = {{"f", f_text}, {"b", b}, {"nmax", n_max}, {"b_tail", b_tail}};
      if (n_max < 0) throw rieszfrac::ParseError("--nmax must be >= 0");
    } else if (*report) {
      req.command = "report";
      req.params = {{"nmax", n_max}, {"s_list", parse_s_list(s_list_text)}, {"borodachov_nmax", borodachov_nmax},
                    {"depth", *report_depth ? depth : 6}, {"restarts", restarts}, {"seed", seed}};
    } else if (*fib) {
      req.command = "example-fib";
      req.params = {{"nmax", n_max}};
    }
    if (req.command != "renewal" && req.command != "example-fib") sys.emplace(h::load_system(std::filesystem::path(config)));
    if (req.command == "energy") {
      req.params["depth"] = *energy_depth ? depth : h::default_energy_depth(*sys, n);
    }

    const auto outcome = h::run(req, sys ? &*sys : nullptr, no_cache ? nullptr : &store);
    const auto written = h::write_outputs(outcome, out_dir);
    if (!quiet) {
      h::Json files = h::Json::array();
      for (const auto& w : written) files.push_back(w.string());
      std::cout << h::Json{{"command", req.command}, {"cache_hit", outcome.cache_hit},
                           {"compute_seconds", outcome.compute_seconds}, {"outputs", files}}.dump()
                << "\n";
    }
    return 0;
  } catch (const rieszfrac::Error& e) {
    std::cerr << "rieszfrac: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    std::cerr << "rieszfrac: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::parse);
  } catch (const std::exception& e) {
    std::cerr << "rieszfrac: internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::internal);
  }
}
