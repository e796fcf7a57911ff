#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "clustering.hpp"
#include "degeneracy.hpp"
#include "disc.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "selfsimilar.hpp"
#include "state.hpp"

namespace pv {

using Json = nlohmann::ordered_json;

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitSchema = 2, kExitIntegration = 3, kExitAnalysis = 4 };

enum class FieldKind { plane, disc };

struct FieldSpec {
  FieldKind kind{FieldKind::plane};
  double alpha{1.0};
  bool operator==(const FieldSpec&) const = default;
};

struct ExplicitInit {
  std::vector<Vec2> positions;
  std::vector<double> intensities;
  bool operator==(const ExplicitInit&) const = default;
};

enum class OrientationChoice { automatic, positive, negative };

struct SelfSimilarInit {
  std::optional<double> alpha;  // defaults to the field exponent
  double scale{1.0};
  Vec2 center{};
  OrientationChoice orientation{OrientationChoice::automatic};
  bool operator==(const SelfSimilarInit&) const = default;
};

struct RandomInit {
  std::size_t n{3};
  std::uint64_t seed{0};
  double box{1.0};  // half-width of the square (plane) or radius (disc) to sample in
  double min_separation{0.1};
  double intensity_lo{0.5};
  double intensity_hi{1.5};
  bool mixed_signs{true};
  bool operator==(const RandomInit&) const = default;
};

using InitialSpec = std::variant<ExplicitInit, SelfSimilarInit, RandomInit>;

struct IntegratorSpec {
  double rel_tol{1e-12};
  double abs_tol{1e-14};
  double collapse_radius{1e-6};
  std::optional<double> max_step;
  std::size_t max_steps{2'000'000};
  bool operator==(const IntegratorSpec&) const = default;
};

struct HolderRequest {
  std::vector<std::size_t> indices;  // empty: every vortex in a collision cluster
  bool relative{true};
  double window_lo{1e-6};
  double window_hi{1e-1};
  bool operator==(const HolderRequest&) const = default;
};

struct ClusterRequest {
  double kappa{0.5};
  std::optional<double> d;  // defaults to the diameter of the sampled configuration
  bool operator==(const ClusterRequest&) const = default;
};

struct PreventCollapseRequest {
  std::vector<double> etas{0.5, 0.25, 0.1};
  std::optional<double> C0;  // defaults to a max|a_i| / A0
  double C1{0.0};
  bool operator==(const PreventCollapseRequest&) const = default;
};

struct QuasiPreservationRequest {
  std::vector<std::vector<std::size_t>> subsets;  // empty: every non-neutral strict subset
  bool operator==(const QuasiPreservationRequest&) const = default;
};

struct AnalysisRequests {
  bool invariants{true};
  std::optional<HolderRequest> holder;
  std::optional<ClusterRequest> clusters;
  std::optional<PreventCollapseRequest> prevent_collapse;
  std::optional<QuasiPreservationRequest> quasi_preservation;
  bool operator==(const AnalysisRequests&) const = default;
};

struct Scenario {
  int schema_version{kScenarioSchemaVersion};
  std::string name{"scenario"};
  FieldSpec field;
  InitialSpec initial{ExplicitInit{}};
  std::optional<double> t_final;
  bool run_to_collapse{false};
  IntegratorSpec integrator;
  std::size_t samples{2000};
  AnalysisRequests analysis;
  bool operator==(const Scenario&) const = default;
};

struct RunOverrides {
  std::optional<double> rel_tol;
  std::optional<double> collapse_radius;
  std::optional<std::uint64_t> seed;
};

// ---------------------------------------------------------------------------------------------
// Parsing

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  void mark(const std::string& key) { used_.insert(key); }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail("missing required key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) { return as_number(raw(key), sub(key)); }
  std::optional<double> opt_number(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return as_number(j_.at(key), sub(key));
  }
  double number_or(const std::string& key, double fallback) { return opt_number(key).value_or(fallback); }

  std::uint64_t count(const std::string& key) { return as_count(raw(key), sub(key)); }
  std::uint64_t count_or(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    return has(key) ? as_count(j_.at(key), sub(key)) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw SchemaError(sub(key) + ": expected a boolean");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) throw SchemaError(sub(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    return has(key) ? string(key) : fallback;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) fail("unknown key '" + it.key() + "'");
    }
  }

  std::string sub(const std::string& key) const { return path_ + "." + key; }
  [[noreturn]] void fail(const std::string& msg) const { throw SchemaError(path_ + ": " + msg); }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(path + ": expected a finite number");
    return d;
  }
  static std::uint64_t as_count(const Json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw SchemaError(path + ": expected a nonnegative integer");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Vec2 parse_point(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw SchemaError(path + ": expected [x, y]");
  return {ObjectReader::as_number(v[0], path + "[0]"), ObjectReader::as_number(v[1], path + "[1]")};
}

inline std::vector<double> parse_numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(ObjectReader::as_number(v[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::vector<std::size_t> parse_indices(const Json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of indices");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < v.size(); ++k)
    out.push_back(static_cast<std::size_t>(ObjectReader::as_count(v[k], path + "[" + std::to_string(k) + "]")));
  return out;
}

inline std::size_t initial_count(const InitialSpec& init) {
  if (const auto* e = std::get_if<ExplicitInit>(&init)) return e->positions.size();
  if (std::holds_alternative<SelfSimilarInit>(init)) return 3;
  return std::get<RandomInit>(init).n;
}

inline void check_indices(const std::vector<std::size_t>& idx, std::size_t n, const std::string& path) {
  for (std::size_t i : idx)
    if (i >= n) throw SchemaError(path + ": index " + std::to_string(i) + " out of range (N = " + std::to_string(n) + ")");
}

}  // namespace detail

/// Parses and validates a scenario; every violation is a SchemaError.
inline Scenario parse_scenario(const Json& j) {
  using detail::ObjectReader;
  ObjectReader root(j, "scenario");
  Scenario sc;
  const std::uint64_t version = root.count("schema_version");
  if (version != static_cast<std::uint64_t>(kScenarioSchemaVersion)) {
    throw SchemaError("scenario.schema_version: unsupported version " + std::to_string(version));
  }
  sc.name = root.string_or("name", sc.name);

  {
    ObjectReader f(root.raw("field"), "scenario.field");
    const std::string type = f.string("type");
    if (type == "plane") {
      sc.field.kind = FieldKind::plane;
      sc.field.alpha = f.number("alpha");
      if (!(sc.field.alpha >= 0.0)) throw SchemaError("scenario.field.alpha: must be >= 0");
    } else if (type == "disc") {
      sc.field.kind = FieldKind::disc;
      sc.field.alpha = 1.0;
    } else {
      throw SchemaError("scenario.field.type: expected 'plane' or 'disc'");
    }
    f.finish();
  }

  {
    ObjectReader in(root.raw("initial"), "scenario.initial");
    const std::string type = in.string("type");
    if (type == "explicit") {
      ExplicitInit e;
      const Json& pos = in.raw("positions");
      if (!pos.is_array()) throw SchemaError("scenario.initial.positions: expected an array");
      for (std::size_t k = 0; k < pos.size(); ++k)
        e.positions.push_back(detail::parse_point(pos[k], "scenario.initial.positions[" + std::to_string(k) + "]"));
      e.intensities = detail::parse_numbers(in.raw("intensities"), "scenario.initial.intensities");
      if (e.positions.empty()) throw SchemaError("scenario.initial.positions: at least one vortex is required");
      if (e.positions.size() != e.intensities.size()) {
        throw SchemaError("scenario.initial: positions and intensities differ in length");
      }
      sc.initial = std::move(e);
    } else if (type == "selfsimilar") {
      SelfSimilarInit s;
      s.alpha = in.opt_number("alpha");
      s.scale = in.number_or("scale", 1.0);
      if (in.has("center")) s.center = detail::parse_point(in.raw("center"), "scenario.initial.center");
      in.mark("center");
      const std::string o = in.string_or("orientation", "auto");
      if (o == "auto") s.orientation = OrientationChoice::automatic;
      else if (o == "positive") s.orientation = OrientationChoice::positive;
      else if (o == "negative") s.orientation = OrientationChoice::negative;
      else throw SchemaError("scenario.initial.orientation: expected 'auto', 'positive' or 'negative'");
      if (!(s.scale > 0.0)) throw SchemaError("scenario.initial.scale: must be positive");
      sc.initial = s;
    } else if (type == "random") {
      RandomInit r;
      r.n = static_cast<std::size_t>(in.count("n"));
      r.seed = in.count_or("seed", 0);
      r.box = in.number_or("box", r.box);
      r.min_separation = in.number_or("min_separation", r.min_separation);
      if (in.has("intensity_range")) {
        const auto range = detail::parse_numbers(in.raw("intensity_range"), "scenario.initial.intensity_range");
        if (range.size() != 2) throw SchemaError("scenario.initial.intensity_range: expected [lo, hi]");
        r.intensity_lo = range[0];
        r.intensity_hi = range[1];
      }
      in.mark("intensity_range");
      r.mixed_signs = in.boolean_or("mixed_signs", r.mixed_signs);
      if (r.n == 0 || r.n > 64) throw SchemaError("scenario.initial.n: must be in [1, 64]");
      if (!(r.box > 0.0)) throw SchemaError("scenario.initial.box: must be positive");
      if (!(r.min_separation >= 0.0)) throw SchemaError("scenario.initial.min_separation: must be >= 0");
      if (!(r.intensity_lo > 0.0 && r.intensity_hi >= r.intensity_lo)) {
        throw SchemaError("scenario.initial.intensity_range: need 0 < lo <= hi");
      }
      sc.initial = r;
    } else {
      throw SchemaError("scenario.initial.type: expected 'explicit', 'selfsimilar' or 'random'");
    }
    in.finish();
  }

  sc.t_final = root.opt_number("t_final");
  sc.run_to_collapse = root.boolean_or("run_to_collapse", false);
  if (sc.t_final && !(*sc.t_final > 0.0)) throw SchemaError("scenario.t_final: must be positive");
  if (!sc.t_final && !std::holds_alternative<SelfSimilarInit>(sc.initial)) {
    throw SchemaError("scenario.t_final: required unless the initial configuration is self-similar");
  }

  if (root.has("integrator")) {
    ObjectReader it(root.raw("integrator"), "scenario.integrator");
    sc.integrator.rel_tol = it.number_or("rel_tol", sc.integrator.rel_tol);
    sc.integrator.abs_tol = it.number_or("abs_tol", sc.integrator.abs_tol);
    sc.integrator.collapse_radius = it.number_or("collapse_radius", sc.integrator.collapse_radius);
    sc.integrator.max_step = it.opt_number("max_step");
    sc.integrator.max_steps = static_cast<std::size_t>(it.count_or("max_steps", sc.integrator.max_steps));
    it.finish();
    if (!(sc.integrator.rel_tol > 0.0 && sc.integrator.abs_tol > 0.0)) {
      throw SchemaError("scenario.integrator: tolerances must be positive");
    }
    if (!(sc.integrator.collapse_radius > 0.0)) throw SchemaError("scenario.integrator.collapse_radius: must be positive");
    if (sc.integrator.max_step && !(*sc.integrator.max_step > 0.0)) {
      throw SchemaError("scenario.integrator.max_step: must be positive");
    }
    if (sc.integrator.max_steps == 0) throw SchemaError("scenario.integrator.max_steps: must be positive");
  }
  root.mark("integrator");

  sc.samples = static_cast<std::size_t>(root.count_or("samples", sc.samples));
  if (sc.samples > 1'000'000) throw SchemaError("scenario.samples: at most 1000000");

  const std::size_t n = detail::initial_count(sc.initial);
  if (root.has("analysis")) {
    ObjectReader an(root.raw("analysis"), "scenario.analysis");
    sc.analysis.invariants = an.boolean_or("invariants", true);
    if (an.has("holder")) {
      ObjectReader h(an.raw("holder"), "scenario.analysis.holder");
      HolderRequest req;
      if (h.has("indices")) req.indices = detail::parse_indices(h.raw("indices"), "scenario.analysis.holder.indices");
      h.mark("indices");
      req.relative = h.boolean_or("relative", true);
      if (h.has("window")) {
        const auto w = detail::parse_numbers(h.raw("window"), "scenario.analysis.holder.window");
        if (w.size() != 2 || !(w[0] > 0.0 && w[0] < w[1] && w[1] <= 1.0)) {
          throw SchemaError("scenario.analysis.holder.window: expected [lo, hi] with 0 < lo < hi <= 1");
        }
        req.window_lo = w[0];
        req.window_hi = w[1];
      }
      h.mark("window");
      h.finish();
      detail::check_indices(req.indices, n, "scenario.analysis.holder.indices");
      sc.analysis.holder = req;
    }
    an.mark("holder");
    if (an.has("clusters")) {
      const Json& cj = an.raw("clusters");
      ClusterRequest req;
      if (!cj.is_boolean()) {
        ObjectReader c(cj, "scenario.analysis.clusters");
        req.kappa = c.number_or("kappa", req.kappa);
        req.d = c.opt_number("d");
        c.finish();
      }
      if (!(req.kappa > 0.0 && req.kappa < 1.0)) throw SchemaError("scenario.analysis.clusters.kappa: must lie in (0, 1)");
      if (req.d && !(*req.d > 0.0)) throw SchemaError("scenario.analysis.clusters.d: must be positive");
      if (!cj.is_boolean() || cj.get<bool>()) sc.analysis.clusters = req;
    }
    an.mark("clusters");
    if (an.has("prevent_collapse")) {
      ObjectReader p(an.raw("prevent_collapse"), "scenario.analysis.prevent_collapse");
      PreventCollapseRequest req;
      if (p.has("etas")) req.etas = detail::parse_numbers(p.raw("etas"), "scenario.analysis.prevent_collapse.etas");
      p.mark("etas");
      req.C0 = p.opt_number("C0");
      req.C1 = p.number_or("C1", 0.0);
      p.finish();
      if (req.etas.empty()) throw SchemaError("scenario.analysis.prevent_collapse.etas: must be nonempty");
      for (double e : req.etas)
        if (!(e > 0.0 && e <= 1.0)) throw SchemaError("scenario.analysis.prevent_collapse.etas: each eta must lie in (0, 1]");
      if (req.C0 && !(*req.C0 >= 0.0)) throw SchemaError("scenario.analysis.prevent_collapse.C0: must be >= 0");
      if (!(req.C1 >= 0.0)) throw SchemaError("scenario.analysis.prevent_collapse.C1: must be >= 0");
      if (n < 2) throw SchemaError("scenario.analysis.prevent_collapse: needs at least two vortices");
      sc.analysis.prevent_collapse = req;
    }
    an.mark("prevent_collapse");
    if (an.has("quasi_preservation")) {
      ObjectReader q(an.raw("quasi_preservation"), "scenario.analysis.quasi_preservation");
      QuasiPreservationRequest req;
      if (q.has("subsets")) {
        const Json& s = q.raw("subsets");
        if (!s.is_array()) throw SchemaError("scenario.analysis.quasi_preservation.subsets: expected an array");
        for (std::size_t k = 0; k < s.size(); ++k) {
          const std::string path = "scenario.analysis.quasi_preservation.subsets[" + std::to_string(k) + "]";
          auto idx = detail::parse_indices(s[k], path);
          if (idx.empty()) throw SchemaError(path + ": must be nonempty");
          detail::check_indices(idx, n, path);
          req.subsets.push_back(std::move(idx));
        }
      }
      q.mark("subsets");
      q.finish();
      if (sc.field.kind != FieldKind::plane) {
        throw SchemaError("scenario.analysis.quasi_preservation: only defined for the plane field");
      }
      if (req.subsets.empty() && n > 12) {
        throw SchemaError("scenario.analysis.quasi_preservation: list subsets explicitly when N > 12");
      }
      sc.analysis.quasi_preservation = req;
    }
    an.mark("quasi_preservation");
    an.finish();
  }
  root.mark("analysis");
  root.finish();

  if (const auto* s = std::get_if<SelfSimilarInit>(&sc.initial)) {
    const double alpha = s->alpha.value_or(sc.field.alpha);
    if (s->alpha && *s->alpha != sc.field.alpha) {
      throw SchemaError("scenario.initial.alpha: must match the field exponent");
    }
    if (!(alpha > 0.0)) throw SchemaError("scenario.initial: self-similar collapse needs alpha > 0");
  }
  if (std::holds_alternative<RandomInit>(sc.initial) && sc.field.kind == FieldKind::disc &&
      !(std::get<RandomInit>(sc.initial).box < 1.0)) {
    throw SchemaError("scenario.initial.box: random disc configurations need box < 1");
  }
  return sc;
}

inline Json to_json(const Scenario& sc) {
  Json j;
  j["schema_version"] = sc.schema_version;
  j["name"] = sc.name;
  if (sc.field.kind == FieldKind::plane) {
    j["field"] = {{"type", "plane"}, {"alpha", sc.field.alpha}};
  } else {
    j["field"] = {{"type", "disc"}};
  }
  if (const auto* e = std::get_if<ExplicitInit>(&sc.initial)) {
    Json pos = Json::array();
    for (const auto& p : e->positions) pos.push_back({p.x, p.y});
    j["initial"] = {{"type", "explicit"}, {"positions", pos}, {"intensities", e->intensities}};
  } else if (const auto* s = std::get_if<SelfSimilarInit>(&sc.initial)) {
    Json in{{"type", "selfsimilar"}};
    if (s->alpha) in["alpha"] = *s->alpha;
    in["scale"] = s->scale;
    in["center"] = {s->center.x, s->center.y};
    in["orientation"] = s->orientation == OrientationChoice::automatic ? "auto"
                        : s->orientation == OrientationChoice::positive ? "positive"
                                                                         : "negative";
    j["initial"] = in;
  } else {
    const auto& r = std::get<RandomInit>(sc.initial);
    j["initial"] = {{"type", "random"},
                    {"n", r.n},
                    {"seed", r.seed},
                    {"box", r.box},
                    {"min_separation", r.min_separation},
                    {"intensity_range", {r.intensity_lo, r.intensity_hi}},
                    {"mixed_signs", r.mixed_signs}};
  }
  if (sc.t_final) j["t_final"] = *sc.t_final;
  j["run_to_collapse"] = sc.run_to_collapse;
  Json it{{"rel_tol", sc.integrator.rel_tol},
          {"abs_tol", sc.integrator.abs_tol},
          {"collapse_radius", sc.integrator.collapse_radius}};
  if (sc.integrator.max_step) it["max_step"] = *sc.integrator.max_step;
  it["max_steps"] = sc.integrator.max_steps;
  j["integrator"] = it;
  j["samples"] = sc.samples;
  Json an{{"invariants", sc.analysis.invariants}};
  if (const auto& h = sc.analysis.holder) {
    Json hj;
    if (!h->indices.empty()) hj["indices"] = h->indices;
    hj["relative"] = h->relative;
    hj["window"] = {h->window_lo, h->window_hi};
    an["holder"] = hj;
  }
  if (const auto& c = sc.analysis.clusters) {
    Json cj{{"kappa", c->kappa}};
    if (c->d) cj["d"] = *c->d;
    an["clusters"] = cj;
  }
  if (const auto& p = sc.analysis.prevent_collapse) {
    Json pj{{"etas", p->etas}};
    if (p->C0) pj["C0"] = *p->C0;
    pj["C1"] = p->C1;
    an["prevent_collapse"] = pj;
  }
  if (const auto& q = sc.analysis.quasi_preservation) {
    Json qj = Json::object();
    if (!q->subsets.empty()) qj["subsets"] = q->subsets;
    an["quasi_preservation"] = qj;
  }
  j["analysis"] = an;
  return j;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read scenario file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

inline void apply_overrides(Scenario& sc, const RunOverrides& o) {
  if (o.rel_tol) {
    if (!(*o.rel_tol > 0.0)) throw SchemaError("--tol must be positive");
    sc.integrator.rel_tol = *o.rel_tol;
  }
  if (o.collapse_radius) {
    if (!(*o.collapse_radius > 0.0)) throw SchemaError("--collapse-radius must be positive");
    sc.integrator.collapse_radius = *o.collapse_radius;
  }
  if (o.seed) {
    if (auto* r = std::get_if<RandomInit>(&sc.initial)) r->seed = *o.seed;
  }
}

// ---------------------------------------------------------------------------------------------
// Execution

struct PreparedRun {
  VortexState state;
  std::optional<SelfSimilarSolution> selfsimilar;
  std::optional<double> t_predicted;
  double t_final{0.0};
};

inline VortexState random_configuration(const RandomInit& r, FieldKind kind, double alpha) {
  std::mt19937_64 rng(r.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(r.intensity_lo, r.intensity_hi);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<Vec2> x;
    std::vector<double> a;
    while (x.size() < r.n) {
      Vec2 p{r.box * unit(rng), r.box * unit(rng)};
      if (kind == FieldKind::disc && !(norm(p) < r.box)) continue;
      x.push_back(p);
      double v = mag(rng);
      if (r.mixed_signs && unit(rng) < 0.0) v = -v;
      a.push_back(v);
    }
    if (r.n < 2 || min_pair_distance(x) >= r.min_separation) return VortexState(std::move(x), std::move(a), alpha);
  }
  throw SchemaError("scenario.initial: could not place random vortices with the requested separation");
}

/// Builds the initial state and the time horizon; configuration errors surface as SchemaError.
inline PreparedRun prepare_run(const Scenario& sc) {
  const double alpha = sc.field.alpha;
  try {
    PreparedRun out{VortexState({{0.0, 0.0}}, {1.0}, alpha), std::nullopt, std::nullopt, 0.0};
    if (const auto* e = std::get_if<ExplicitInit>(&sc.initial)) {
      out.state = VortexState(e->positions, e->intensities, alpha);
    } else if (const auto* s = std::get_if<SelfSimilarInit>(&sc.initial)) {
      SelfSimilarSolution sol = s->orientation == OrientationChoice::automatic
                                    ? build_collapsing_configuration(alpha)
                                    : build_configuration(alpha, s->orientation == OrientationChoice::positive
                                                                     ? Orientation::positive
                                                                     : Orientation::negative);
      std::vector<Vec2> x;
      for (const auto& p : sol.initial_state.positions()) x.push_back(s->center + s->scale * p);
      out.state = VortexState(std::move(x), {sol.initial_state.intensities().begin(), sol.initial_state.intensities().end()},
                              alpha);
      double t = sol.T * std::pow(s->scale, alpha + 1.0);
      if (sc.field.kind == FieldKind::disc) t *= 2.0 * std::numbers::pi;
      out.t_predicted = t;
      out.selfsimilar = std::move(sol);
    } else {
      out.state = random_configuration(std::get<RandomInit>(sc.initial), sc.field.kind, alpha);
    }
    if (sc.field.kind == FieldKind::disc) static_cast<void>(DiscState(out.state));
    out.t_final = sc.t_final.value_or(out.t_predicted ? 2.0 * *out.t_predicted : 0.0);
    return out;
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("scenario.initial: ") + e.what());
  }
}

inline IntegratorOptions integrator_options(const Scenario& sc, const PreparedRun& run) {
  IntegratorOptions o;
  o.rel_tol = sc.integrator.rel_tol;
  o.abs_tol = sc.integrator.abs_tol;
  o.collapse_radius = sc.integrator.collapse_radius;
  if (sc.integrator.max_step) o.max_step = *sc.integrator.max_step;
  o.max_steps = sc.integrator.max_steps;
  for (std::size_t k = 1; k <= sc.samples; ++k)
    o.output_times.push_back(run.t_final * static_cast<double>(k) / static_cast<double>(sc.samples));
  if (run.t_predicted) {
    // 20 log-spaced samples per decade of (T - t) / T, from 1e-1 down to 1e-14.
    for (int k = 20; k <= 280; ++k) {
      const double t = *run.t_predicted * (1.0 - std::pow(10.0, -0.05 * k));
      if (t > 0.0 && t < run.t_final) o.output_times.push_back(t);
    }
  }
  return o;
}

inline TrajectoryRecord simulate(const Scenario& sc, const PreparedRun& run) {
  const IntegratorOptions opts = integrator_options(sc, run);
  if (sc.field.kind == FieldKind::disc) return integrate(run.state, 0.0, run.t_final, opts, DiscField(run.state));
  return integrate(run.state, 0.0, run.t_final, opts, PlanarField(run.state));
}

struct RunResult {
  int exit_code{kExitOk};
  std::string status{"ok"};
  Json summary;
  TrajectoryRecord record;
  bool has_record{false};
};

namespace detail {

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline Json json_point(const Vec2& p) { return Json::array({json_number(p.x), json_number(p.y)}); }

inline Json fit_json(const HolderFit& f, double expected) {
  Json j;
  if (f.vortex_index) j["index"] = *f.vortex_index;
  if (f.pair) j["pair"] = {f.pair->first, f.pair->second};
  if (f.limit_point) j["limit_point"] = json_point(*f.limit_point);
  j["beta"] = json_number(f.exponent);
  j["expected"] = expected;
  j["relative_deviation"] = json_number(std::abs(f.exponent - expected) / expected);
  j["prefactor"] = json_number(f.prefactor);
  j["fit_residual"] = json_number(f.fit_residual);
  j["sample_range"] = {json_number(f.t_min), json_number(f.t_max)};
  j["samples"] = f.sample_count;
  j["window"] = {f.window_lo, f.window_hi};
  return j;
}

inline Json partition_json(const std::vector<std::vector<std::size_t>>& parts) {
  Json j = Json::array();
  for (const auto& p : parts) j.push_back(p);
  return j;
}

inline double diameter(std::span<const Vec2> x) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) d = std::max(d, distance(x[i], x[j]));
  return d;
}

inline Json sample_partition_json(const VortexState& st, const ClusterRequest& req) {
  const auto x = st.positions();
  const double d = req.d.value_or(diameter(x));
  if (!(d > 0.0)) return nullptr;
  const ClusterPartition p = cluster_partition(x, d, req.kappa);
  return Json{{"d", d}, {"kappa", req.kappa}, {"delta", p.delta}, {"parts", partition_json(p.parts)}};
}

inline Json selfsimilar_json(const SelfSimilarSolution& s, std::optional<double> t_pred) {
  const auto x = s.initial_state.positions();
  const auto a = s.initial_state.intensities();
  double l_scale = 0.0, k_scale = 0.0, i_scale = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i == j) continue;
      const double l = distance(x[i], x[j]);
      l_scale += std::abs(a[i] * a[j]) * l * l;
      k_scale += std::abs(a[i] * a[j]) * std::pow(l, 1.0 - s.alpha);
      i_scale += std::abs(a[i] * a[j]) * std::pow(l, -s.alpha);
    }
  const double kp_rel = std::abs(s.residuals.kernel_power) / k_scale;
  const double ip_rel = std::abs(s.residuals.inverse_power) / i_scale;
  Json j;
  j["alpha"] = s.alpha;
  j["lambda"] = s.lambda;
  j["intensity_a"] = s.intensity_a;
  j["orientation"] = s.orientation == Orientation::positive ? "positive" : "negative";
  j["C"] = s.C;
  j["C_prime"] = s.C_prime;
  j["D"] = s.D;
  j["T_unit"] = s.T;
  j["T_predicted"] = t_pred ? json_number(*t_pred) : Json(nullptr);
  j["residuals"] = {{"g", s.residuals.g},
                    {"ratio_first", s.residuals.ratio_first},
                    {"ratio_second", s.residuals.ratio_second},
                    {"pair_moment", s.residuals.pair_moment},
                    {"pair_moment_relative", std::abs(s.residuals.pair_moment) / l_scale},
                    {"right_angle", s.residuals.right_angle},
                    {"rotation_spread", s.residuals.rotation_spread},
                    {"contraction_spread", s.residuals.contraction_spread}};
  j["scale_functionals"] = {{"kernel_power", s.residuals.kernel_power},
                            {"kernel_power_relative", kp_rel},
                            {"inverse_power", s.residuals.inverse_power},
                            {"inverse_power_relative", ip_rel},
                            {"winner", kp_rel <= 1e-10   ? "kernel_power"
                                       : ip_rel <= 1e-10 ? "inverse_power"
                                                         : "none"}};
  return j;
}

inline std::vector<std::vector<std::size_t>> default_subsets(const std::vector<double>& a) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t n = a.size();
  const double total_abs = std::accumulate(a.begin(), a.end(), 0.0, [](double s, double v) { return s + std::abs(v); });
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
    std::vector<std::size_t> sub;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) {
        sub.push_back(i);
        s += a[i];
      }
    if (std::abs(s) > 1e-14 * total_abs) out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace detail

/// Runs a validated scenario: simulation plus all requested analyses. Never writes files.
inline RunResult execute(const Scenario& sc) {
  RunResult res;
  const PreparedRun run = prepare_run(sc);
  if (!(run.t_final > 0.0)) throw SchemaError("scenario.t_final: must be positive");

  Json& s = res.summary;
  s["schema_version"] = kSummarySchemaVersion;
  s["scenario"] = sc.name;
  s["field"] = sc.field.kind == FieldKind::plane ? "plane" : "disc";
  s["alpha"] = sc.field.alpha;
  s["n"] = run.state.size();
  s["intensities"] = std::vector<double>(run.state.intensities().begin(), run.state.intensities().end());
  s["status"] = "ok";

  res.record = simulate(sc, run);
  res.has_record = true;
  const TrajectoryRecord& rec = res.record;
  s["termination"] = to_string(rec.termination);
  std::optional<double> tc;
  if (rec.termination == Termination::collapsed) tc = refine_collapse_time(rec);
  s["t_c"] = tc ? Json(*tc) : Json(nullptr);
  s["t_c_predicted"] = run.t_predicted ? Json(*run.t_predicted) : Json(nullptr);
  s["t_c_relative_error"] = (tc && run.t_predicted) ? Json(std::abs(*tc - *run.t_predicted) / *run.t_predicted)
                                                     : Json(nullptr);
  s["t_final"] = run.t_final;
  s["t_end"] = rec.t_end();
  s["accepted_steps"] = rec.accepted_steps;
  s["rejected_steps"] = rec.rejected_steps;
  s["samples"] = rec.size();
  s["collapse_radius"] = rec.collapse_radius;
  s["message"] = rec.message;
  s["warnings"] = rec.warnings;

  const auto x0 = run.state.positions();
  const auto a = run.state.intensities();
  const InvariantScales scales = sc.field.kind == FieldKind::disc ? disc_term_scales(x0, a)
                                                                   : planar_term_scales(x0, a, sc.field.alpha);
  const InvariantDrift drift = invariant_drift(rec, scales);
  s["max_invariant_drift"] = {{"H", drift.hamiltonian},
                              {"M", drift.vorticity_vector},
                              {"I", drift.momentum},
                              {"L", drift.pair_moment},
                              {"H_relative", drift.hamiltonian_rel},
                              {"M_relative", drift.vorticity_vector_rel},
                              {"I_relative", drift.momentum_rel},
                              {"L_relative", drift.pair_moment_rel},
                              {"pair_moment_identity_relative", drift.identity_residual_rel},
                              {"conserved", sc.field.kind == FieldKind::disc ? Json::array({"H", "I"})
                                                                             : Json::array({"H", "M", "I", "L"})}};
  if (run.selfsimilar) s["selfsimilar"] = detail::selfsimilar_json(*run.selfsimilar, run.t_predicted);

  const bool integration_failed = rec.termination == Termination::singular_failure ||
                                  rec.termination == Termination::step_limit ||
                                  (sc.run_to_collapse && rec.termination != Termination::collapsed);
  if (integration_failed) {
    res.exit_code = kExitIntegration;
    res.status = "integration_failure";
    s["status"] = res.status;
    s["error"] = rec.message.empty() ? "run did not collapse before t_final" : rec.message;
    return res;
  }

  const double expected_beta = sc.field.kind == FieldKind::disc ? 0.5 : 1.0 / (sc.field.alpha + 1.0);
  try {
    if (sc.analysis.holder) {
      const HolderRequest& req = *sc.analysis.holder;
      if (!tc) throw NoCollapse("Hoelder analysis needs a collapsed run");
      const CollisionClusters clusters = collision_clusters(rec);
      std::vector<std::size_t> indices = req.indices;
      if (indices.empty())
        for (const auto& p : clusters.parts)
          if (p.size() >= 2) indices.insert(indices.end(), p.begin(), p.end());
      std::sort(indices.begin(), indices.end());
      HolderFitOptions opts;
      opts.window_lo = req.window_lo;
      opts.window_hi = req.window_hi;
      opts.known_exponent = expected_beta;
      Json fits = Json::array();
      double worst = 0.0;
      for (std::size_t i : indices) {
        const HolderFit f = holder_fit(rec, *tc, i, opts);
        worst = std::max(worst, std::abs(f.exponent - expected_beta) / expected_beta);
        fits.push_back(detail::fit_json(f, expected_beta));
      }
      Json rel = Json::array();
      if (req.relative) {
        for (const auto& p : clusters.parts)
          for (std::size_t u = 0; u < p.size(); ++u)
            for (std::size_t v = u + 1; v < p.size(); ++v) {
              const HolderFit f = relative_holder_fit(rec, *tc, p[u], p[v], opts);
              worst = std::max(worst, std::abs(f.exponent - expected_beta) / expected_beta);
              rel.push_back(detail::fit_json(f, expected_beta));
            }
      }
      s["holder"] = {{"expected_beta", expected_beta},
                     {"fits", fits},
                     {"relative_fits", rel},
                     {"max_relative_deviation", worst},
                     {"within_2_percent", worst <= 0.02}};
    }

    if (sc.analysis.clusters) {
      Json cj;
      if (tc) {
        const CollisionClusters c = collision_clusters(rec);
        cj["collision"] = {{"parts", detail::partition_json(c.parts)},
                           {"separation_floor", detail::json_number(c.separation_floor)},
                           {"window", c.window}};
      } else {
        cj["collision"] = nullptr;
      }
      cj["initial_partition"] = detail::sample_partition_json(rec.states.front(), *sc.analysis.clusters);
      cj["final_partition"] = detail::sample_partition_json(rec.states.back(), *sc.analysis.clusters);
      s["clusters"] = cj;
    }

    if (sc.analysis.prevent_collapse) {
      const PreventCollapseRequest& req = *sc.analysis.prevent_collapse;
      const double c0 = req.C0.value_or(uniform_cross_constant(a));
      const PreventCollapseBound b = prevent_collapse_constant(a, sc.field.alpha, c0, req.C1, run.state.size());
      Json checks = Json::array();
      bool all_pass = true;
      for (double eta : req.etas) {
        const PreventCollapseVerdict v = check_prevent_collapse_implication(rec, b, eta);
        all_pass = all_pass && v.pass;
        Json vj{{"eta", eta},
                {"horizon", v.horizon},
                {"pass", v.pass},
                {"premises_checked", v.premises_checked},
                {"comparisons", v.comparisons}};
        if (v.counterexample) {
          const auto& ce = *v.counterexample;
          vj["counterexample"] = {{"i", ce.i}, {"j", ce.j}, {"t", ce.t}, {"tau", ce.tau},
                                  {"distance_at_t", ce.distance_at_t}, {"distance_at_tau", ce.distance_at_tau}};
        }
        checks.push_back(vj);
      }
      s["prevent_collapse"] = {{"kappa", b.kappa},         {"r", b.r},
                               {"s", b.s},                 {"log_s", b.log_s},
                               {"C_kappa", b.C_kappa},     {"log_C_kappa", b.log_C_kappa},
                               {"C0", b.C0},               {"C1", b.C1},
                               {"A0", b.A0},               {"a", b.a},
                               {"checks", checks},         {"pass", all_pass}};
    }

    if (sc.analysis.quasi_preservation) {
      auto subsets = sc.analysis.quasi_preservation->subsets;
      if (subsets.empty()) subsets = detail::default_subsets({a.begin(), a.end()});
      Json rows = Json::array();
      double worst = 0.0;
      for (const auto& sub : subsets) {
        const QuasiPreservationReport q = quasi_preservation_check(rec, sub);
        worst = std::max(worst, q.max_ratio);
        rows.push_back({{"subset", sub},
                        {"max_ratio", q.max_ratio},
                        {"samples_checked", q.samples_checked},
                        {"worst_time", q.worst_time ? Json(*q.worst_time) : Json(nullptr)}});
      }
      s["quasi_preservation"] = {{"subsets", rows}, {"max_ratio", worst}};
    }
  } catch (const Error& e) {
    res.exit_code = kExitAnalysis;
    res.status = "analysis_failure";
    s["status"] = res.status;
    s["error"] = e.what();
  }
  return res;
}

// ---------------------------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::string out;
  if (rec.size() == 0) return out;
  const std::size_t n = rec.states.front().size();
  out += "t";
  for (std::size_t i = 1; i <= n; ++i) out += ",x" + std::to_string(i) + ",y" + std::to_string(i);
  out += ",H,Mx,My,I,L,dmin\n";
  for (std::size_t k = 0; k < rec.size(); ++k) {
    out += format_double(rec.times[k]);
    for (const auto& p : rec.states[k].positions()) {
      out += ',' + format_double(p.x);
      out += ',' + format_double(p.y);
    }
    const auto& q = rec.invariants[k];
    for (double v : {q.hamiltonian, q.vorticity_vector.x, q.vorticity_vector.y, q.momentum, q.pair_moment,
                     q.min_pair_distance})
      out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

inline void write_run_outputs(const std::filesystem::path& dir, const RunResult& res) {
  std::filesystem::create_directories(dir);
  if (res.has_record) write_text(dir / "trajectory.csv", trajectory_csv(res.record));
  write_text(dir / "summary.json", res.summary.dump(2) + "\n");
}

/// Full `run` command: load, validate, execute, write. Returns the process exit code.
inline int run_command(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
                       const RunOverrides& overrides, std::string* error = nullptr) {
  RunResult res;
  try {
    Scenario sc = load_scenario(scenario_path);
    apply_overrides(sc, overrides);
    res = execute(sc);
  } catch (const SchemaError& e) {
    if (error) *error = e.what();
    return kExitSchema;
  } catch (const Error& e) {
    if (error) *error = e.what();
    return kExitIntegration;
  }
  write_run_outputs(out_dir, res);
  if (error && res.exit_code != kExitOk) *error = res.summary.value("error", std::string{});
  return res.exit_code;
}

// ---------------------------------------------------------------------------------------------
// Sweep

struct SweepRow {
  std::size_t row{0};
  double alpha{0.0};
  std::optional<std::uint64_t> seed;
  int exit_code{kExitOk};
  std::string status;
  std::string termination;
  std::optional<double> t_c;
  std::optional<double> t_predicted;
  std::optional<double> beta;  // mean over the per-vortex fits
  double expected_beta{0.0};
  std::optional<double> max_relative_deviation;
  std::string error;
  std::string directory;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int exit_code{kExitOk};
};

inline std::string sweep_csv(const SweepResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
  std::string out = "row,alpha,seed,exit_code,status,termination,t_c,t_predicted,beta,expected_beta,max_relative_deviation\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.row) + ',' + format_double(row.alpha) + ',' +
           (row.seed ? std::to_string(*row.seed) : std::string{}) + ',' + std::to_string(row.exit_code) + ',' +
           row.status + ',' + row.termination + ',' + opt(row.t_c) + ',' + opt(row.t_predicted) + ',' +
           opt(row.beta) + ',' + format_double(row.expected_beta) + ',' + opt(row.max_relative_deviation) + '\n';
  }
  return out;
}

inline Json sweep_json(const SweepResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"row", row.row},
                    {"alpha", row.alpha},
                    {"seed", row.seed ? Json(*row.seed) : Json(nullptr)},
                    {"exit_code", row.exit_code},
                    {"status", row.status},
                    {"termination", row.termination},
                    {"t_c", opt(row.t_c)},
                    {"t_predicted", opt(row.t_predicted)},
                    {"beta", opt(row.beta)},
                    {"expected_beta", row.expected_beta},
                    {"max_relative_deviation", opt(row.max_relative_deviation)},
                    {"directory", row.directory},
                    {"error", row.error}});
  }
  return Json{{"schema_version", kSummarySchemaVersion}, {"exit_code", r.exit_code}, {"rows", rows}};
}

/// Runs the template once per (alpha, seed). Rows execute concurrently; each writes into its own
/// directory under `out_dir`, and the aggregated table is written last in row order.
inline SweepResult sweep_command(const Scenario& tmpl, const std::vector<double>& alphas,
                                 const std::vector<std::uint64_t>& seeds, const RunOverrides& overrides,
                                 const std::filesystem::path& out_dir, unsigned threads = 0) {
  if (alphas.empty()) throw SchemaError("sweep needs a nonempty alpha list");
  if (tmpl.field.kind != FieldKind::plane) throw SchemaError("sweep varies alpha and needs a plane field");

  struct Job {
    double alpha;
    std::optional<std::uint64_t> seed;
  };
  std::vector<Job> jobs;
  for (double al : alphas) {
    if (seeds.empty()) {
      jobs.push_back({al, overrides.seed});
    } else {
      for (auto sd : seeds) jobs.push_back({al, sd});
    }
  }

  SweepResult result;
  result.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      SweepRow& row = result.rows[k];
      row.row = k;
      row.alpha = jobs[k].alpha;
      row.seed = jobs[k].seed;
      row.expected_beta = 1.0 / (row.alpha + 1.0);
      char name[96];
      std::snprintf(name, sizeof name, "row%03zu_alpha%.6g", k, row.alpha);
      std::string dirname = name;
      if (row.seed) dirname += "_seed" + std::to_string(*row.seed);
      row.directory = dirname;
      try {
        Scenario sc = tmpl;
        sc.field.alpha = row.alpha;
        if (auto* ss = std::get_if<SelfSimilarInit>(&sc.initial)) ss->alpha.reset();
        if (!sc.analysis.holder) sc.analysis.holder = HolderRequest{};
        RunOverrides o = overrides;
        o.seed = row.seed;
        apply_overrides(sc, o);
        sc = parse_scenario(to_json(sc));
        const RunResult res = execute(sc);
        write_run_outputs(out_dir / dirname, res);
        row.exit_code = res.exit_code;
        row.status = res.status;
        row.termination = res.summary.value("termination", std::string{});
        if (res.summary.contains("t_c") && res.summary["t_c"].is_number()) row.t_c = res.summary["t_c"].get<double>();
        if (res.summary["t_c_predicted"].is_number()) row.t_predicted = res.summary["t_c_predicted"].get<double>();
        if (res.summary.contains("holder")) {
          const Json& h = res.summary["holder"];
          double sum = 0.0;
          std::size_t cnt = 0;
          for (const auto& f : h["fits"]) {
            if (f["beta"].is_number()) {
              sum += f["beta"].get<double>();
              ++cnt;
            }
          }
          if (cnt > 0) row.beta = sum / static_cast<double>(cnt);
          row.max_relative_deviation = h["max_relative_deviation"].get<double>();
        }
        if (res.summary.contains("error")) row.error = res.summary["error"].get<std::string>();
      } catch (const SchemaError& e) {
        row.exit_code = kExitSchema;
        row.status = "schema_error";
        row.error = e.what();
      } catch (const std::exception& e) {
        row.exit_code = kExitIntegration;
        row.status = "integration_failure";
        row.error = e.what();
      }
    }
  };
  unsigned nthreads = threads ? threads : std::max(1U, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& row : result.rows)
    if (row.exit_code != kExitOk && result.exit_code == kExitOk) result.exit_code = row.exit_code;
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "sweep.csv", sweep_csv(result));
  write_text(out_dir / "sweep.json", sweep_json(result).dump(2) + "\n");
  return result;
}

}  // namespace pv
