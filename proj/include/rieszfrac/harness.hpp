#pragma once

// Experiment plumbing shared by the command-line tool and its tests: fractal
// config ingestion, canonical config form, the on-disk result cache, and the
// per-command result documents (JSON plus CSV tables).

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "rieszfrac/asymptotics.hpp"
#include "rieszfrac/energy.hpp"
#include "rieszfrac/errors.hpp"
#include "rieszfrac/ifs.hpp"
#include "rieszfrac/packing.hpp"
#include "rieszfrac/rational.hpp"
#include "rieszfrac/renewal.hpp"

namespace rieszfrac::harness {

using Json = nlohmann::json;  // std::map-backed, so keys serialise sorted

inline constexpr const char* kVersionTag = "rieszfrac-0.1.0";
inline constexpr const char* kResultSchema = "rieszfrac/result-v1";

// ---------------------------------------------------------------------------
// Config ingestion

// A config scalar: a "p/q" string (rational) or a JSON number (real).
struct ConfigScalar {
  std::optional<Rational> exact;
  double value = 0.0;

  Json canonical() const { return exact ? Json(format_rational(*exact)) : Json(value); }
};

inline ConfigScalar parse_scalar(const Json& j, const std::string& where) {
  ConfigScalar out;
  if (j.is_string()) {
    out.exact = parse_rational(j.get<std::string>());
    out.value = to_double(*out.exact);
  } else if (j.is_number()) {
    out.value = j.get<double>();
    if (!std::isfinite(out.value)) throw ParseError(where + ": non-finite number");
  } else {
    throw ParseError(where + ": expected a \"p/q\" string or a number");
  }
  return out;
}

// Translation or row of a rotation: a scalar is accepted in one dimension.
inline std::vector<ConfigScalar> parse_vector(const Json& j, std::size_t dim, const std::string& where) {
  std::vector<ConfigScalar> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_scalar(j[i], where + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(parse_scalar(j, where));
  }
  if (out.size() != dim) {
    throw ParseError(where + ": expected " + std::to_string(dim) + " components, got " + std::to_string(out.size()));
  }
  return out;
}

struct LoadedSystem {
  Json canonical;
  int ambient_dim = 1;
  bool exact = false;
  std::optional<LineSystem<Rational>> line_exact;
  std::optional<LineSystem<double>> line_float;
  std::optional<FractalSystem> general;

  bool is_line() const { return ambient_dim == 1; }
  std::vector<double> ratios() const { return general->ratios(); }
  double dimension() const { return general->dimension(); }
  std::string sigma_text() const {
    if (line_exact) return format_rational(line_exact->sigma());
    return format_double(general->sigma());
  }
};

/// Parses and validates a fractal config. Exact arithmetic is used iff the
/// system is one-dimensional, "exact" is true, and every parameter is a
/// rational string.
inline LoadedSystem load_system(const Json& cfg) {
  if (!cfg.is_object()) throw ParseError("config must be a JSON object");
  for (const auto& [k, v] : cfg.items()) {
    if (k != "ambient_dim" && k != "exact" && k != "maps" && k != "sigma") {
      throw ParseError("unknown config key '" + k + "'");
    }
  }
  LoadedSystem out;
  if (!cfg.contains("ambient_dim") || !cfg["ambient_dim"].is_number_integer() || cfg["ambient_dim"].get<int>() < 1) {
    throw ParseError("ambient_dim must be an integer >= 1");
  }
  out.ambient_dim = cfg["ambient_dim"].get<int>();
  const auto p = static_cast<std::size_t>(out.ambient_dim);
  bool want_exact = false;
  if (cfg.contains("exact")) {
    if (!cfg["exact"].is_boolean()) throw ParseError("exact must be a boolean");
    want_exact = cfg["exact"].get<bool>();
  }
  if (!cfg.contains("maps") || !cfg["maps"].is_array() || cfg["maps"].size() < 2) {
    throw ParseError("maps must be an array of at least two similitudes");
  }

  struct RawMap {
    ConfigScalar ratio;
    std::vector<ConfigScalar> translation;
    std::vector<std::vector<ConfigScalar>> rotation;  // empty: identity
  };
  std::vector<RawMap> raw;
  bool all_rational = true;
  for (std::size_t m = 0; m < cfg["maps"].size(); ++m) {
    const Json& jm = cfg["maps"][m];
    const std::string where = "maps[" + std::to_string(m) + "]";
    if (!jm.is_object()) throw ParseError(where + " must be an object");
    for (const auto& [k, v] : jm.items()) {
      if (k != "ratio" && k != "translation" && k != "rotation") throw ParseError(where + ": unknown key '" + k + "'");
    }
    if (!jm.contains("ratio") || !jm.contains("translation")) throw ParseError(where + " needs ratio and translation");
    RawMap rm;
    rm.ratio = parse_scalar(jm["ratio"], where + ".ratio");
    if (!(rm.ratio.value > 0.0 && rm.ratio.value < 1.0)) {
      throw ParseError(where + ".ratio must lie in (0,1); reflections go in the rotation");
    }
    rm.translation = parse_vector(jm["translation"], p, where + ".translation");
    all_rational = all_rational && rm.ratio.exact;
    for (const auto& t : rm.translation) all_rational = all_rational && t.exact;
    if (jm.contains("rotation")) {
      if (!jm["rotation"].is_array() || jm["rotation"].size() != p) {
        throw ParseError(where + ".rotation must be a " + std::to_string(p) + "x" + std::to_string(p) + " array");
      }
      for (std::size_t i = 0; i < p; ++i) {
        rm.rotation.push_back(parse_vector(jm["rotation"][i], p, where + ".rotation[" + std::to_string(i) + "]"));
      }
      if (p == 1) throw ParseError(where + ": rotations are not supported on the line");
    }
    raw.push_back(std::move(rm));
  }
  std::optional<ConfigScalar> sigma;
  if (cfg.contains("sigma") && !cfg["sigma"].is_null()) {
    sigma = parse_scalar(cfg["sigma"], "sigma");
    all_rational = all_rational && sigma->exact;
  }

  out.exact = p == 1 && want_exact && all_rational;
  Json maps = Json::array();
  for (const auto& rm : raw) {
    Json jm;
    jm["ratio"] = rm.ratio.canonical();
    Json tr = Json::array();
    for (const auto& t : rm.translation) tr.push_back(t.canonical());
    jm["translation"] = p == 1 ? tr[0] : tr;
    if (!rm.rotation.empty()) {
      Json rot = Json::array();
      for (const auto& row : rm.rotation) {
        Json jr = Json::array();
        for (const auto& x : row) jr.push_back(x.canonical());
        rot.push_back(jr);
      }
      jm["rotation"] = rot;
    }
    maps.push_back(jm);
  }
  out.canonical = Json{{"ambient_dim", out.ambient_dim}, {"exact", out.exact}, {"maps", maps}};
  if (sigma) out.canonical["sigma"] = sigma->canonical();

  if (p == 1) {
    if (out.exact) {
      std::vector<LineMap<Rational>> lm;
      for (const auto& rm : raw) lm.push_back({*rm.ratio.exact, *rm.translation[0].exact});
      out.line_exact.emplace(std::move(lm), sigma ? std::optional<Rational>(*sigma->exact) : std::nullopt);
      out.line_float.emplace(out.line_exact->to_floating());
      out.general.emplace(out.line_exact->to_general());
    } else {
      std::vector<LineMap<double>> lm;
      for (const auto& rm : raw) lm.push_back({rm.ratio.value, rm.translation[0].value});
      out.line_float.emplace(std::move(lm), sigma ? std::optional<double>(sigma->value) : std::nullopt);
      out.general.emplace(out.line_float->to_general());
    }
  } else {
    std::vector<Similitude> sims;
    for (const auto& rm : raw) {
      Similitude s;
      s.ratio = rm.ratio.value;
      s.translation = Eigen::VectorXd(static_cast<Eigen::Index>(p));
      s.rotation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
      for (std::size_t i = 0; i < p; ++i) {
        s.translation(static_cast<Eigen::Index>(i)) = rm.translation[i].value;
        for (std::size_t k = 0; k < p && !rm.rotation.empty(); ++k) {
          s.rotation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rm.rotation[i][k].value;
        }
      }
      sims.push_back(std::move(s));
    }
    try {
      out.general.emplace(std::move(sims), sigma ? std::optional<double>(sigma->value) : std::nullopt);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
  }
  return out;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

inline LoadedSystem load_system(const std::filesystem::path& path) { return load_system(read_json_file(path)); }

/// Exponent structure of a loaded system; commands that need dependent
/// ratios call this and fail with exit code 4 otherwise.
inline ExponentStructure require_dependent(const LoadedSystem& sys) {
  const auto rs = sys.ratios();
  const auto st = exponent_structure(rs);
  if (!st) throw DependenceError("contraction ratios are independent at tolerance 1e-10");
  return *st;
}

// ---------------------------------------------------------------------------
// Hashing and the result cache

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw InternalError("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string cache_key(const Json& canonical_config, const std::string& op, const Json& params) {
  const Json material{{"config", canonical_config}, {"op", op}, {"params", params}, {"version", kVersionTag}};
  return sha256_hex(material.dump());
}

inline std::filesystem::path default_cache_dir() {
  if (const char* d = std::getenv("RIESZFRAC_CACHE_DIR"); d && *d) return d;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return std::filesystem::path(x) / "rieszfrac";
  if (const char* h = std::getenv("HOME"); h && *h) return std::filesystem::path(h) / ".cache" / "rieszfrac";
  return std::filesystem::temp_directory_path() / "rieszfrac-cache";
}

// Writes via a uniquely named temporary in the same directory followed by a
// rename, so readers never observe a partial file.
inline void write_atomically(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::create_directories(target.parent_path());
  std::random_device rd;
  const auto tmp = target.parent_path() /
                   ("." + target.filename().string() + "." + std::to_string(::getpid()) + "." +
                    std::to_string(rd()) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::internal, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error(ErrorKind::internal, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::internal, "cannot rename into '" + target.string() + "': " + ec.message());
  }
}

class Cache {
 public:
  explicit Cache(std::filesystem::path dir = default_cache_dir()) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_of(const std::string& key) const { return dir_ / (key + ".json"); }

  // A corrupt or unreadable entry counts as a miss.
  std::optional<Json> lookup(const std::string& key) const {
    std::ifstream in(path_of(key));
    if (!in) return std::nullopt;
    try {
      Json entry = Json::parse(in);
      if (entry.value("key", "") != key || !entry.contains("value")) return std::nullopt;
      return entry["value"];
    } catch (const Json::exception&) {
      return std::nullopt;
    }
  }

  void store(const std::string& key, const Json& value) const {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const Json entry{{"key", key},
                     {"timestamp", std::chrono::duration_cast<std::chrono::seconds>(now).count()},
                     {"value", value}};
    write_atomically(path_of(key), entry.dump());
  }

  struct GcStats {
    std::size_t removed = 0;
    std::size_t kept = 0;
  };

  /// Removes entries older than `max_age` (all entries when `everything`)
  /// and any temporaries left behind by interrupted writers.
  GcStats gc(std::chrono::seconds max_age, bool everything = false) const {
    GcStats st;
    if (!std::filesystem::exists(dir_)) return st;
    const auto now = std::filesystem::file_time_type::clock::now();
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      const bool tmp = name.size() > 4 && name.ends_with(".tmp");
      const bool entry = name.ends_with(".json") && name.front() != '.';
      if (!tmp && !entry) continue;
      const bool old = now - e.last_write_time() > max_age;
      if (everything || old || (tmp && now - e.last_write_time() > std::chrono::minutes(10))) {
        std::filesystem::remove(e.path());
        ++st.removed;
      } else {
        ++st.kept;
      }
    }
    return st;
  }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// CSV

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw InternalError("CSV row width mismatch");
    rows_.push_back(std::move(row));
  }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    out.push_back(std::move(cells));
  }
  return out;
}

inline std::string num(double x) { return format_double(x); }
inline std::string num(long double x) { return format_double(static_cast<double>(x)); }
inline std::string num(std::size_t x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }
inline std::string num(const Rational& x) { return format_rational(x); }

// ---------------------------------------------------------------------------
// Result documents

struct Request {
  std::string command;
  Json params = Json::object();
};

inline Json make_document(const Request& req, const Json& config, Json result, const std::vector<std::pair<std::string, CsvTable>>& tables) {
  Json t = Json::object();
  for (const auto& [name, table] : tables) t[name] = table.str();
  return Json{{"schema", kResultSchema}, {"version", kVersionTag}, {"command", req.command}, {"config", config},
              {"params", req.params}, {"result", std::move(result)}, {"tables", std::move(t)}};
}

/// Structural check used on every emitted or cached document.
inline void validate_document(const Json& doc) {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ParseError("result document: " + what);
  };
  need(doc.is_object(), "not an object");
  need(doc.value("schema", "") == kResultSchema, "unknown schema");
  need(doc.contains("version") && doc["version"].is_string(), "missing version");
  need(doc.contains("command") && doc["command"].is_string(), "missing command");
  need(doc.contains("config"), "missing config");
  need(doc.contains("params") && doc["params"].is_object(), "missing params");
  need(doc.contains("result") && doc["result"].is_object(), "missing result");
  need(doc.contains("tables") && doc["tables"].is_object(), "missing tables");
  for (const auto& [name, text] : doc["tables"].items()) {
    need(text.is_string(), "table " + name + " is not text");
    const auto rows = parse_csv(text.get<std::string>());
    need(!rows.empty(), "table " + name + " has no header");
    for (const auto& r : rows) need(r.size() == rows.front().size(), "table " + name + " is ragged");
  }
}

template <class Scalar>
Json scalar_json(const Scalar& x) {
  if constexpr (ScalarTraits<Scalar>::exact) return format_rational(x);
  else return to_double(x);
}

template <class Scalar>
std::string scalar_csv(const Scalar& x) {
  if constexpr (ScalarTraits<Scalar>::exact) return format_rational(x);
  else return format_double(to_double(x));
}

inline Json structure_json(const std::optional<ExponentStructure>& st) {
  if (!st) return Json{{"dependent", false}};
  return Json{{"dependent", true}, {"base", st->base}, {"exponents", st->exponents}, {"common_factor", st->common_factor}};
}

// --- dim -------------------------------------------------------------------

inline Json run_dim(const LoadedSystem& sys, const Request& req) {
  const auto rs = sys.ratios();
  const double d = sys.dimension();
  long double moran = 0.0L;
  CsvTable t({"m", "ratio", "weight"});
  const auto& maps = sys.canonical["maps"];
  for (std::size_t m = 0; m < rs.size(); ++m) {
    const long double w = std::pow(static_cast<long double>(rs[m]), static_cast<long double>(d));
    moran += w;
    const Json& r = maps[m]["ratio"];
    t.add({num(m + 1), r.is_string() ? r.get<std::string>() : num(r.get<double>()), num(w)});
  }
  std::optional<ExponentStructure> st;
  Json structure;
  try {
    st = exponent_structure(rs);
    structure = structure_json(st);
    if (st && sys.line_exact) {
      if (auto b = exact_base(*sys.line_exact, *st)) structure["base_exact"] = format_rational(*b);
    }
  } catch (const AmbiguityError& e) {
    structure = Json{{"dependent", nullptr}, {"ambiguous", e.what()}};
  }
  Json result{{"dimension", d},
              {"moran_residual", static_cast<double>(moran - 1.0L)},
              {"sigma", sys.sigma_text()},
              {"exact", sys.exact},
              {"exponent_structure", structure}};
  return make_document(req, sys.canonical, result, {{"dim.csv", t}});
}

// --- pack ------------------------------------------------------------------

template <class Scalar>
Json pack_by_n(const LineSystem<Scalar>& line, std::size_t n, int depth, Json& result) {
  CsvTable t({"N", "delta_lower", "delta_upper", "exact_flag"});
  const auto table = delta_table(line, n, depth);
  for (std::size_t k = 2; k <= n; ++k) {
    t.add({num(k), scalar_csv(table.lower[k]), scalar_csv(table.upper[k]), table.exact(k) ? "1" : "0"});
  }
  const auto pb = packing_distance_bounds(line, n, depth);
  Json witness = Json::array();
  for (const auto& x : pb.witness) witness.push_back(scalar_json(x));
  result["N"] = n;
  result["lower"] = scalar_json(pb.lower);
  result["upper"] = scalar_json(pb.upper);
  result["exact"] = pb.exact();
  result["witness"] = witness;
  result["composition"] = pb.composition;
  result["all_exact"] = table.all_exact();
  return Json{{"packing.csv", t.str()}};
}

template <class Scalar>
Json pack_by_t(const LineSystem<Scalar>& line, const Scalar& t, int depth, Json& result) {
  CsvTable tab({"n", "t", "count_lower", "count_upper"});
  const auto c = greedy_count(line, t, depth);
  // Report n when t is an exact power of the structure base.
  std::string n_text;
  if (const auto st = exponent_structure(line.ratios())) {
    const Scalar base = detail::structure_base(line, *st);
    Scalar p(1);
    for (int k = 0; k <= 4096 && !(p < t); ++k, p *= base) {
      if (p == t) {
        n_text = num(k);
        break;
      }
    }
  }
  tab.add({n_text, scalar_csv(t), num(c.lower), num(c.upper)});
  Json witness = Json::array();
  for (const auto& x : c.witness) witness.push_back(scalar_json(x));
  result["t"] = scalar_json(t);
  result["count_lower"] = c.lower;
  result["count_upper"] = c.upper;
  result["exact"] = c.exact();
  result["witness"] = witness;
  return Json{{"count.csv", tab.str()}};
}

inline Json run_pack(const LoadedSystem& sys, const Request& req) {
  if (!sys.is_line()) throw ParseError("pack supports ambient_dim 1 only");
  const auto& p = req.params;
  const bool by_n = p.contains("n");
  if (by_n == p.contains("t")) throw ParseError("pack needs exactly one of --n and --t");
  const int depth = p.value("depth", sys.exact ? default_depth<Rational>() : default_depth<double>());
  if (depth < 1) throw ParseError("depth must be >= 1");
  Json result = Json::object();
  Json tables;
  if (by_n) {
    const auto n = p["n"].get<std::size_t>();
    if (n < 2) throw ParseError("--n must be >= 2");
    tables = sys.exact ? pack_by_n(*sys.line_exact, n, depth, result) : pack_by_n(*sys.line_float, n, depth, result);
  } else {
    const Rational t = parse_rational(p["t"].get<std::string>());
    if (!(t > 0)) throw ParseError("--t must be positive");
    tables = sys.exact ? pack_by_t(*sys.line_exact, t, depth, result)
                       : pack_by_t(*sys.line_float, to_double(t), depth, result);
  }
  result["depth"] = depth;
  Json doc = make_document(req, sys.canonical, result, {});
  doc["tables"] = tables;
  return doc;
}

// --- energy ----------------------------------------------------------------

// Shallowest depth whose lattice has at least 4N sites (and at least 4).
inline int default_energy_depth(const LoadedSystem& sys, std::size_t n) {
  int depth = 4;
  double sites = std::pow(static_cast<double>(sys.general->size()), depth);
  while (sites < 4.0 * static_cast<double>(n)) {
    ++depth;
    sites *= static_cast<double>(sys.general->size());
  }
  return depth;
}

inline Json points_json(const PointSet& pts) {
  Json out = Json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts.dim() == 1) {
      out.push_back(pts[i][0]);
    } else {
      Json v = Json::array();
      for (std::size_t k = 0; k < pts.dim(); ++k) v.push_back(pts[i][k]);
      out.push_back(v);
    }
  }
  return out;
}

inline Json run_energy(const LoadedSystem& sys, const Request& req) {
  const auto& p = req.params;
  const auto n = p.at("n").get<std::size_t>();
  const double s = p.at("s").get<double>();
  if (n < 2) throw ParseError("--n must be >= 2");
  if (!(s > 0)) throw ParseError("--s must be positive");
  const int depth = p.at("depth").get<int>();
  SearchOptions opt;
  opt.restarts = p.at("restarts").get<int>();
  opt.seed = p.at("seed").get<std::uint64_t>();
  const PointSet lattice = prefractal_lattice(*sys.general, depth);
  if (lattice.size() < n) throw ParseError("depth " + std::to_string(depth) + " lattice has fewer than N sites");
  Json result{{"N", n}, {"s", s}, {"depth", depth}, {"lattice_size", lattice.size()}, {"upper_bound_only", true}};
  PointConfig cfg;
  if (within_bruteforce_guard(lattice.size(), n)) {
    cfg = min_energy_bruteforce(lattice, n, s);
    result["method"] = "exhaustive";
  } else {
    auto sr = min_energy_search(lattice, n, s, opt);
    result["method"] = "exchange-search";
    result["restart_energies"] = sr.restart_energies;
    result["best_restart"] = sr.best_restart;
    cfg = std::move(sr.config);
  }
  result["energy_upper"] = cfg.energy;
  result["min_dist"] = cfg.min_dist;
  result["points"] = points_json(cfg.points);
  result["lattice_indices"] = cfg.lattice_indices;
  CsvTable t({"N", "s", "depth", "energy_upper", "min_dist"});
  t.add({num(n), num(s), num(depth), num(cfg.energy), num(cfg.min_dist)});
  return make_document(req, sys.canonical, result, {{"energy.csv", t}});
}

// --- zseq ------------------------------------------------------------------

inline Json run_zseq(const LoadedSystem& sys, const Request& req) {
  const ExponentStructure st = require_dependent(sys);
  const auto& p = req.params;
  const auto ell = p.at("ell").get<std::size_t>();
  const double s = p.at("s").get<double>();
  const int n_max = p.at("nmax").get<int>();
  if (ell < 1) throw ParseError("--ell must be >= 1");
  if (n_max < 0) throw ParseError("--nmax must be >= 0");
  ZSequenceOptions opt;
  opt.search.restarts = p.at("restarts").get<int>();
  opt.search.seed = p.at("seed").get<std::uint64_t>();
  ZSequence zs;
  try {
    zs = z_sequence(*sys.general, st, s, ell, n_max, opt);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  const auto rr = renewal_residuals(zs, st);
  CsvTable t({"n", "N", "z_n", "b_n"});
  Json entries = Json::array();
  for (std::size_t i = 0; i < zs.entries.size(); ++i) {
    const auto& e = zs.entries[i];
    t.add({num(e.n), num(e.size), num(e.z), num(rr.b[i])});
    entries.push_back(Json{{"n", e.n}, {"N", e.size}, {"depth", e.depth}, {"energy_upper", e.energy_upper}, {"z", e.z},
                           {"b", static_cast<double>(rr.b[i])},
                           {"partial_sum", static_cast<double>(rr.partial_sums[i])}});
  }
  std::vector<double> f;
  for (auto x : rr.f) f.push_back(static_cast<double>(x));
  Json result{{"structure", structure_json(st)},
              {"s", s},
              {"d", zs.d},
              {"ell", ell},
              {"entries", entries},
              {"f", f},
              {"f_mass", static_cast<double>(rr.f_mass)},
              {"c_fit", static_cast<double>(rr.c_fit)},
              {"partial_sum_bound", static_cast<double>(rr.partial_sum_bound)},
              {"partial_sums_bounded", rr.partial_sums_bounded},
              {"telescoping_residual", static_cast<double>(rr.telescoping_residual)},
              {"warnings", zs.warnings},
              {"upper_bound_based", true}};
  return make_document(req, sys.canonical, result, {{"zseq.csv", t}});
}

// --- renewal ---------------------------------------------------------------

/// Reads b from CSV rows (n, b_n); a non-numeric first row is a header.
inline std::vector<real_ext> parse_b_csv(const std::string& text) {
  std::vector<real_ext> b;
  const auto rows = parse_csv(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 2) throw ParseError("b CSV row " + std::to_string(i + 1) + ": expected n,b_n");
    std::size_t n = 0;
    real_ext v = 0;
    try {
      std::size_t used = 0;
      n = std::stoul(r[0], &used);
      if (used != r[0].size()) throw std::invalid_argument("n");
      v = std::stold(r[1]);
    } catch (const std::exception&) {
      if (i == 0) continue;
      throw ParseError("b CSV row " + std::to_string(i + 1) + ": malformed");
    }
    if (b.size() <= n) b.resize(n + 1, 0.0L);
    b[n] = v;
  }
  return b;
}

inline Json run_renewal(const Request& req) {
  const auto& p = req.params;
  RenewalSystem rs;
  rs.f = parse_distribution(p.at("f").get<std::string>());
  for (const auto& x : p.at("b")) rs.b.push_back(static_cast<real_ext>(x.get<double>()));
  rs.b_tail_bound = static_cast<real_ext>(p.value("b_tail", 0.0));
  const auto n_max = p.at("nmax").get<std::size_t>();
  const auto verdict = validate(rs);
  if (!verdict.valid()) throw ParseError("f must be nonnegative with total mass 1");
  std::vector<real_ext> z;
  try {
    z = iterate(rs, n_max);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  CsvTable t({"n", "z_n"});
  for (std::size_t n = 0; n < z.size(); ++n) t.add({num(n), num(z[n])});
  Json result{{"mass", static_cast<double>(verdict.mass)},
              {"period", verdict.period},
              {"aperiodic", verdict.aperiodic()}};
  if (verdict.aperiodic()) {
    const auto le = limit_estimate(rs, n_max);
    result["limit"] = Json{{"value", static_cast<double>(le.value)},
                           {"uncertainty", static_cast<double>(le.uncertainty)},
                           {"mu", static_cast<double>(le.mu)},
                           {"z_last", static_cast<double>(le.z_last)},
                           {"residual", static_cast<double>(le.residual)},
                           {"cauchy_width", static_cast<double>(le.cauchy_width)}};
  } else {
    result["limit"] = nullptr;
    result["limit_refused"] = "support of f has gcd " + std::to_string(verdict.period);
  }
  return make_document(req, nullptr, result, {{"renewal.csv", t}});
}

// --- report ----------------------------------------------------------------

template <class Scalar>
Json report_impl(const LineSystem<Scalar>& line, const ExponentStructure& st, const Request& req,
                 CsvTable& csv) {
  const auto& p = req.params;
  const int n_max = p.at("nmax").get<int>();
  const auto rep = packing_oscillation(line, st, n_max);
  Json blocks = Json::array();
  for (const auto& b : rep.blocks) {
    blocks.push_back(Json{{"id", b.id}, {"first_N", b.first_n}, {"last_N", b.last_n}, {"delta", b.delta},
                          {"min", b.min}, {"max", b.max}, {"conclusive", b.conclusive}});
  }
  for (const auto& sp : rep.series) csv.add({num(sp.n), num(sp.value), num(sp.block)});
  Json constants = Json::array();
  for (const auto& lc : rep.packing_constants) constants.push_back(Json{{"n", lc.n}, {"R_n", lc.count}, {"C_n", lc.c}});
  const auto rc = count_recursion_check(line, st, 0, n_max);
  Json rows = Json::array();
  for (const auto& r : rc.rows) {
    rows.push_back(Json{{"n", r.n}, {"R_n", r.count_lower}, {"R_n_upper", r.count_upper},
                        {"predicted", r.predicted}, {"status", to_string(r.status)}});
  }
  Json out{{"structure", structure_json(st)},
           {"d", rep.d},
           {"quantity", rep.quantity},
           {"blocks", blocks},
           {"window", rep.window},
           {"liminf_estimate", rep.liminf_estimate},
           {"limsup_estimate", rep.limsup_estimate},
           {"ratio", rep.ratio},
           {"J", rep.J},
           {"packing_constants", constants},
           {"packing_constant_max", rep.packing_constant_max},
           {"recursion", Json{{"L", rc.L}, {"J", rc.J}, {"passed", rc.passed()}, {"inconclusive", rc.inconclusive},
                              {"first_violation", rc.first_violation ? Json(*rc.first_violation) : Json(nullptr)},
                              {"rows", rows}}},
           {"warnings", rep.warnings}};
  const auto s_list = p.at("s_list").get<std::vector<double>>();
  if (!s_list.empty()) {
    SearchOptions opt;
    opt.restarts = p.at("restarts").get<int>();
    opt.seed = p.at("seed").get<std::uint64_t>();
    const auto bt = borodachov_diagnostic(line, s_list, p.at("borodachov_nmax").get<std::size_t>(),
                                          p.at("depth").get<int>(), opt);
    Json brows = Json::array();
    for (const auto& r : bt.rows) {
      brows.push_back(Json{{"s", r.s}, {"energy_side", r.energy_side}, {"packing_side", r.packing_side},
                           {"gap", r.gap}, {"low_confidence", r.low_confidence}});
    }
    out["borodachov"] = Json{{"N_max", bt.n_max}, {"packing_exact", bt.packing_exact},
                             {"gap_shrinking", bt.gap_shrinking()}, {"rows", brows},
                             {"energy_side_upper_bound_based", true}};
  }
  return out;
}

inline Json run_report(const LoadedSystem& sys, const Request& req) {
  if (!sys.is_line()) throw ParseError("report supports ambient_dim 1 only");
  const ExponentStructure st = require_dependent(sys);
  if (req.params.at("nmax").get<int>() < 1) throw ParseError("--nmax must be >= 1");
  CsvTable csv({"N", "delta_times_N_pow", "block_id"});
  Json result = sys.exact ? report_impl(*sys.line_exact, st, req, csv) : report_impl(*sys.line_float, st, req, csv);
  return make_document(req, sys.canonical, result, {{"report.csv", csv}});
}

// --- example-fib -----------------------------------------------------------

inline Json run_example_fib(const Request& req) {
  const int n_max = req.params.at("nmax").get<int>();
  if (n_max < 3) throw ParseError("--nmax must be >= 3");
  const auto rows = fibonacci_table(n_max);
  const auto sys = golden_cantor_system();
  CsvTable t({"n", "F_n", "t", "count", "delta_at_F_n", "certified"});
  Json jr = Json::array();
  bool all = true;
  for (const auto& r : rows) {
    const auto c = greedy_count(sys, r.delta, default_depth<Rational>());
    const bool ok = r.certified && c.exact() && c.lower == r.fib;
    all = all && ok;
    t.add({num(r.n), std::to_string(r.fib), num(r.delta), num(c.lower), num(r.delta), ok ? "1" : "0"});
    jr.push_back(Json{{"n", r.n}, {"F_n", r.fib}, {"t", format_rational(r.delta)}, {"count", c.lower},
                      {"certified", ok}});
  }
  const Json config{{"ambient_dim", 1}, {"exact", true},
                    {"maps", Json::array({Json{{"ratio", "1/4"}, {"translation", "0"}},
                                          Json{{"ratio", "1/2"}, {"translation", "1/2"}}})}};
  return make_document(req, config, Json{{"rows", jr}, {"all_certified", all}}, {{"fibonacci.csv", t}});
}

// ---------------------------------------------------------------------------
// Orchestration

struct RunOutcome {
  Json document;
  std::string key;
  bool cache_hit = false;
  double compute_seconds = 0.0;
};

/// Computes (or fetches from the cache) the document for `req`. `sys` is
/// null for commands that take no fractal config.
inline RunOutcome run(const Request& req, const LoadedSystem* sys, const Cache* cache) {
  RunOutcome out;
  const Json config = sys ? sys->canonical : Json(nullptr);
  out.key = cache_key(config, req.command, req.params);
  if (cache) {
    if (auto hit = cache->lookup(out.key)) {
      try {
        validate_document(*hit);
        out.document = std::move(*hit);
        out.cache_hit = true;
        return out;
      } catch (const ParseError&) {
        // fall through and recompute
      }
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& c = req.command;
  auto need_sys = [&]() -> const LoadedSystem& {
    if (!sys) throw ParseError(c + " needs --config");
    return *sys;
  };
  if (c == "dim") out.document = run_dim(need_sys(), req);
  else if (c == "pack") out.document = run_pack(need_sys(), req);
  else if (c == "energy") out.document = run_energy(need_sys(), req);
  else if (c == "zseq") out.document = run_zseq(need_sys(), req);
  else if (c == "renewal") out.document = run_renewal(req);
  else if (c == "report") out.document = run_report(need_sys(), req);
  else if (c == "example-fib") out.document = run_example_fib(req);
  else throw ParseError("unknown command '" + c + "'");
  out.compute_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  validate_document(out.document);
  if (cache) cache->store(out.key, out.document);
  return out;
}

/// Writes <command>.json, every CSV table, and run.json (cache and timing
/// metadata, kept apart so the result files stay byte-identical).
inline std::vector<std::filesystem::path> write_outputs(const RunOutcome& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto doc_path = dir / (r.document["command"].get<std::string>() + ".json");
  write_atomically(doc_path, r.document.dump(2) + "\n");
  written.push_back(doc_path);
  for (const auto& [name, text] : r.document["tables"].items()) {
    write_atomically(dir / name, text.get<std::string>());
    written.push_back(dir / name);
  }
  Json files = Json::array();
  for (const auto& w : written) files.push_back(w.filename().string());
  const Json run{{"command", r.document["command"]}, {"cache_key", r.key}, {"cache_hit", r.cache_hit},
                 {"compute_seconds", r.compute_seconds}, {"outputs", files}};
  write_atomically(dir / "run.json", run.dump(2) + "\n");
  written.push_back(dir / "run.json");
  return written;
}

}  // namespace rieszfrac::harness
