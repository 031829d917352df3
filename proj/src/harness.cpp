#include "rrm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rrm/errors.hpp"
#include "rrm/io.hpp"
#include "rrm/random.hpp"

namespace rrm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario registry

const std::vector<ScenarioInfo>& scenario_registry() {
  static const std::vector<ScenarioInfo> registry = {
      {"rayleigh-sphere", "leading eigenvector of a symmetric matrix by ascent of x^T A x on the sphere",
       "critical-points: +/- leading eigenvector"},
      {"frechet-hyperbolic", "weighted Frechet mean of anchor points on the hyperboloid", "critical-points: the mean"},
      {"bilinear-game-alternating", "min-max game x^T C y on R^n x R^m with alternating player updates",
       "critical-points: the origin"},
      {"cycling-sphere", "rotating field on the 2-sphere with an attracting circle at height 1/2",
       "limit-cycle: x_3 = 1/2"},
      {"potential-game", "two players on spheres coordinating through the shared potential -x^T A y",
       "potential-game: singular vector pairs of A"},
      {"euclidean-bowl", "gradient descent on a quadratic bowl in R^d with a Lyapunov audit",
       "critical-points: the bowl center"},
  };
  return registry;
}

namespace {

json window_schedule() { return {{"kind", "window"}, {"A", 1.0}, {"B", 1.0}, {"eps", 0.5}}; }

json default_diagnostics() {
  return {{"probes", 20},
          {"apt", {{"horizon", 1.0}, {"grid_per_unit", 200}, {"scheme", "rk4"}}},
          {"picard", true},
          {"noise_delta", {{"horizon", 1.0}}},
          {"verdict", {{"threshold", 0.05}}}};
}

}  // namespace

json scenario_template(const std::string& name) {
  json base = {{"scenario", name},
               {"oracle", {{"sigma", 0.1}, {"noise", "gaussian"}}},
               {"schedule", window_schedule()},
               {"algorithm", {{"method", "rsgm"}, {"map", "exponential"}}},
               {"iterations", 20000},
               {"seed", 1},
               {"replications", 4},
               {"diagnostics", default_diagnostics()},
               {"output", {{"stride", 0}, {"plot", true}}}};
  if (name == "rayleigh-sphere") {
    base["field"] = {{"kind", "rayleigh"},
                     {"matrix", json::array({json::array({3, 0, 0}), json::array({0, 2, 0}), json::array({0, 0, 1})})},
                     {"maximize", true}};
    base["initial_point"] = {{"kind", "random"}};
  } else if (name == "frechet-hyperbolic") {
    // Anchors exp_o(r (0, cos a, sin a)) for a few (r, a).
    json anchors = json::array();
    const double ra[5][2] = {{0.5, 0.0}, {1.0, 1.3}, {0.8, 2.5}, {1.2, 3.9}, {0.6, 5.1}};
    for (const auto& p : ra) {
      anchors.push_back({std::cosh(p[0]), std::sinh(p[0]) * std::cos(p[1]), std::sinh(p[0]) * std::sin(p[1])});
    }
    base["field"] = {{"kind", "frechet"}, {"anchors", anchors}, {"weights", {0.3, 0.2, 0.2, 0.15, 0.15}}};
    base["oracle"]["sigma"] = 0.0;
    base["schedule"] = {{"kind", "power-law"}, {"c", 0.5}, {"rho", 0.6}};
    base["initial_point"] = {{"kind", "random"}, {"radius", 2.0}};
    base["iterations"] = 5000;
    base["replications"] = 2;
    base["diagnostics"]["verdict"]["threshold"] = 1e-4;
  } else if (name == "bilinear-game-alternating") {
    base["field"] = {{"kind", "bilinear"}, {"coupling", json::array({json::array({1.0})})}};
    base["algorithm"] = {{"method", "rseg"}, {"map", "exponential"}, {"alternating", true}};
    base["initial_point"] = {{"kind", "coords"}, {"coords", {1.0, 0.0}}};
  } else if (name == "cycling-sphere") {
    base["field"] = {{"kind", "cycling"}};
    base["oracle"]["sigma"] = 0.05;
    base["initial_point"] = {{"kind", "latitude"}, {"z", 0.1}};
  } else if (name == "potential-game") {
    base["field"] = {{"kind", "coordination"},
                     {"matrix", json::array({json::array({2, 0.5, 0}), json::array({0.5, 1, 0}),
                                             json::array({0, 0, 0.5})})}};
    base["initial_point"] = {{"kind", "random"}};
  } else if (name == "euclidean-bowl") {
    base["field"] = {{"kind", "bowl"}, {"center", {1.0, -1.0}}};
    base["oracle"]["sigma"] = 1.0;
    base["schedule"] = {{"kind", "power-law"}, {"c", 1.0}, {"rho", 1.0}};
    base["initial_point"] = {{"kind", "coords"}, {"coords", {6.0, 3.0}}};
    base["iterations"] = 5000;
    base["diagnostics"]["lyapunov"] = {{"base", {1.0, -1.0}}, {"radius", 1.0}, {"replications", 200}, {"audited", 10}};
    base["diagnostics"]["verdict"]["threshold"] = 0.1;
  } else {
    throw InvalidArgument("unknown scenario '" + name + "'");
  }
  return base;
}

// ---------------------------------------------------------------------------
// Config reading with JSON paths

namespace {

class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_, what); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null(); }
  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!has(key)) throw ConfigError(path_ + "." + key, "missing required field");
    return Node((*j_)[key], path_ + "." + key);
  }
  std::optional<Node> opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }
  Node item(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }

  void allow(std::initializer_list<const char*> keys) const {
    if (!j_->is_object()) fail("expected an object");
    for (const auto& [k, v] : j_->items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        throw ConfigError(path_ + "." + k, "unknown field");
      }
    }
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }
  double nonnegative() const {
    const double v = number();
    if (!(v >= 0.0)) fail("must be >= 0");
    return v;
  }
  std::int64_t integer() const {
    if (j_->is_number_integer()) return j_->get<std::int64_t>();
    if (j_->is_number_float()) {
      const double v = j_->get<double>();
      if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    fail("expected an integer");
  }
  std::uint64_t unsigned_integer() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    const auto v = integer();
    if (v < 0) fail("must be >= 0");
    return static_cast<std::uint64_t>(v);
  }
  std::int64_t integer_at_least(std::int64_t lo) const {
    const auto v = integer();
    if (v < lo) fail("must be >= " + std::to_string(lo));
    return v;
  }
  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }
  Vec vector() const {
    const std::size_t n = size();
    if (n == 0) fail("expected a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = item(i).number();
    return v;
  }
  Mat matrix() const {
    const std::size_t rows = size();
    if (rows == 0) fail("expected a non-empty array of rows");
    const std::size_t cols = item(0).size();
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      const Node row = item(i);
      if (row.size() != cols) row.fail("all rows must have " + std::to_string(cols) + " entries");
      m.row(static_cast<Eigen::Index>(i)) = row.vector().transpose();
    }
    return m;
  }
  template <class E>
  E choice(std::initializer_list<std::pair<const char*, E>> options) const {
    const std::string s = string();
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail("unknown value '" + s + "' (expected one of: " + names + ")");
  }

 private:
  const json* j_;
  std::string path_;
};

Manifold read_manifold(const Node& n) {
  n.allow({"kind", "dim", "factors"});
  const std::string kind = n.at("kind").string();
  if (kind == "product") {
    const Node f = n.at("factors");
    std::vector<Manifold> factors;
    for (std::size_t i = 0; i < f.size(); ++i) factors.push_back(read_manifold(f.item(i)));
    if (factors.size() < 2) f.fail("a product needs at least two factors");
    return Manifold::product(std::move(factors));
  }
  const int dim = static_cast<int>(n.at("dim").integer_at_least(1));
  if (kind == "euclidean") return Manifold::euclidean(dim);
  if (kind == "sphere") return Manifold::sphere(dim);
  if (kind == "hyperbolic") return Manifold::hyperbolic(dim);
  n.at("kind").fail("unknown manifold kind '" + kind + "'");
}

// Field plus the data the verdict target needs.
struct FieldBuild {
  std::string kind;
  VectorField field;
  Mat matrix;               // rayleigh / coordination / bilinear
  bool maximize = false;    // rayleigh
  FrechetMean frechet;      // frechet
  Vec center;               // bowl
};

FieldBuild read_field(const Node& n) {
  const std::string kind = n.at("kind").string();
  auto wrap = [&](auto&& fn) -> FieldBuild {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      n.fail(e.what());
    }
  };
  if (kind == "rayleigh") {
    n.allow({"kind", "matrix", "maximize"});
    const Mat a = n.at("matrix").matrix();
    if (a.rows() != a.cols() || a.rows() < 2) n.at("matrix").fail("expected a square matrix of size >= 2");
    const bool maximize = n.opt("maximize") ? n.at("maximize").boolean() : false;
    return wrap([&] {
      return FieldBuild{kind, VectorField::negative_gradient(RayleighQuotient{a, maximize}), a, maximize, {}, {}};
    });
  }
  if (kind == "frechet") {
    n.allow({"kind", "anchors", "weights"});
    const Node an = n.at("anchors");
    FrechetMean fm;
    for (std::size_t i = 0; i < an.size(); ++i) fm.anchors.push_back(an.item(i).vector());
    if (fm.anchors.empty()) an.fail("need at least one anchor");
    if (auto w = n.opt("weights")) {
      const Vec wv = w->vector();
      if (static_cast<std::size_t>(wv.size()) != fm.anchors.size()) w->fail("need one weight per anchor");
      fm.weights.assign(wv.data(), wv.data() + wv.size());
    } else {
      fm.weights.assign(fm.anchors.size(), 1.0 / static_cast<double>(fm.anchors.size()));
    }
    for (std::size_t i = 0; i < fm.anchors.size(); ++i) {
      if (fm.anchors[i].size() != fm.anchors[0].size() || fm.anchors[i].size() < 2) {
        an.item(i).fail("anchors must share a dimension >= 2");
      }
      const Manifold h = Manifold::hyperbolic(static_cast<int>(fm.anchors[0].size()) - 1);
      if (h.point_residual(fm.anchors[i]) > 1e-8) an.item(i).fail("anchor is not on the hyperboloid");
      fm.anchors[i] = h.project_point(fm.anchors[i]);
    }
    return wrap([&] { return FieldBuild{kind, VectorField::negative_gradient(fm), {}, false, fm, {}}; });
  }
  if (kind == "bowl") {
    n.allow({"kind", "center"});
    const Vec c = n.at("center").vector();
    return wrap([&] { return FieldBuild{kind, VectorField::negative_gradient(QuadraticBowl{c}), {}, false, {}, c}; });
  }
  if (kind == "bilinear") {
    n.allow({"kind", "coupling"});
    const Mat c = n.at("coupling").matrix();
    return wrap([&] { return FieldBuild{kind, VectorField::game(bilinear_game(c)), c, false, {}, {}}; });
  }
  if (kind == "coordination") {
    n.allow({"kind", "matrix"});
    const Mat a = n.at("matrix").matrix();
    return wrap([&] { return FieldBuild{kind, VectorField::game(coordination_game(a)), a, false, {}, {}}; });
  }
  if (kind == "cycling") {
    n.allow({"kind"});
    return FieldBuild{kind, VectorField::cycling(), {}, false, {}, {}};
  }
  if (kind == "zero") {
    n.allow({"kind", "manifold"});
    return FieldBuild{kind, VectorField::zero(read_manifold(n.at("manifold"))), {}, false, {}, {}};
  }
  n.at("kind").fail("unknown field kind '" + kind + "'");
}

OracleSpec read_oracle(const Node& n, VectorField field) {
  n.allow({"sigma", "noise", "bias"});
  OracleSpec o{std::move(field), 0.0, NoiseKind::kGaussian, std::nullopt};
  o.sigma = n.opt("sigma") ? n.at("sigma").nonnegative() : 0.0;
  if (auto k = n.opt("noise")) {
    o.noise = k->choice<NoiseKind>({{"gaussian", NoiseKind::kGaussian}, {"bounded-uniform", NoiseKind::kBoundedUniform}});
  }
  if (auto b = n.opt("bias")) {
    b->allow({"direction", "scale", "power"});
    const Vec dir = b->at("direction").vector();
    if (dir.size() != o.manifold().ambient_dim()) {
      b->at("direction").fail("expected " + std::to_string(o.manifold().ambient_dim()) + " ambient coordinates");
    }
    o.bias = decaying_bias(dir, b->at("scale").nonnegative(), b->at("power").nonnegative());
  }
  return o;
}

StepSchedule read_schedule(const Node& n) {
  const std::string kind = n.at("kind").string();
  try {
    if (kind == "window") {
      n.allow({"kind", "A", "B", "eps", "n0"});
      const auto n0 = n.opt("n0") ? n.at("n0").integer_at_least(2) : 2;
      return StepSchedule::window(n.at("A").positive(), n.at("B").positive(), n.at("eps").positive(),
                                  static_cast<std::uint64_t>(n0));
    }
    if (kind == "power-law") {
      n.allow({"kind", "c", "rho", "n0"});
      const auto n0 = n.opt("n0") ? n.at("n0").integer_at_least(1) : 1;
      return StepSchedule::power_law(n.at("c").positive(), n.at("rho").positive(), static_cast<std::uint64_t>(n0));
    }
  } catch (const InvalidArgument& e) {
    n.fail(e.what());
  }
  n.at("kind").fail("unknown schedule kind '" + kind + "'");
}

AlgorithmSpec read_algorithm(const Node& n) {
  n.allow({"method", "map", "alternating", "ppm", "injectivity"});
  AlgorithmSpec a;
  a.method = n.at("method").choice<Method>(
      {{"rsgm", Method::kRSGM}, {"rppm", Method::kRPPM}, {"rseg", Method::kRSEG}, {"rog", Method::kROG}});
  if (auto m = n.opt("map")) {
    a.map_mode = m->choice<MapMode>({{"exponential", MapMode::kExponential}, {"retraction", MapMode::kRetraction}});
  }
  if (auto alt = n.opt("alternating")) a.alternating = alt->boolean();
  if (auto p = n.opt("ppm")) {
    p->allow({"max_iters", "tol"});
    if (p->has("max_iters")) a.ppm.max_iters = static_cast<int>(p->at("max_iters").integer_at_least(1));
    if (p->has("tol")) a.ppm.tol = p->at("tol").positive();
  }
  if (auto inj = n.opt("injectivity")) {
    a.injectivity =
        inj->choice<InjectivityPolicy>({{"clip", InjectivityPolicy::kClip}, {"error", InjectivityPolicy::kError}});
  }
  return a;
}

InitialPoint read_initial(const Node& n, const Manifold& m) {
  n.allow({"kind", "coords", "radius", "z"});
  InitialPoint ip;
  ip.kind = n.at("kind").choice<InitialPoint::Kind>({{"coords", InitialPoint::Kind::kCoords},
                                                     {"random", InitialPoint::Kind::kRandom},
                                                     {"latitude", InitialPoint::Kind::kLatitude}});
  switch (ip.kind) {
    case InitialPoint::Kind::kCoords: {
      const Node c = n.at("coords");
      ip.coords = c.vector();
      if (ip.coords.size() != m.ambient_dim()) {
        c.fail("expected " + std::to_string(m.ambient_dim()) + " ambient coordinates for " + m.id());
      }
      // Coordinates typed with a few digits are snapped onto the manifold.
      if (m.point_residual(ip.coords) > 1e-6) c.fail("point is not on " + m.id());
      ip.coords = m.project_point(ip.coords);
      break;
    }
    case InitialPoint::Kind::kRandom:
      ip.radius = n.opt("radius") ? n.at("radius").positive() : 1.0;
      break;
    case InitialPoint::Kind::kLatitude:
      if (m.kind() != ManifoldKind::kSphere) n.at("kind").fail("latitude start needs a sphere, got " + m.id());
      ip.z = n.at("z").number();
      if (!(std::abs(ip.z) <= 1.0)) n.at("z").fail("must lie in [-1, 1]");
      break;
  }
  return ip;
}

DiagnosticsOptions read_diagnostics(const Node& n, const Manifold& m) {
  n.allow({"probes", "apt", "picard", "noise_delta", "lyapunov", "verdict"});
  DiagnosticsOptions d;
  if (n.has("probes")) d.probes = static_cast<int>(n.at("probes").integer_at_least(0));
  if (auto a = n.opt("apt"); a && !(a->raw().is_boolean() && !a->raw().get<bool>())) {
    AptOptions o;
    if (!a->raw().is_boolean()) {
      a->allow({"horizon", "grid_per_unit", "scheme", "h_step"});
      if (a->has("horizon")) o.horizon = a->at("horizon").positive();
      if (a->has("grid_per_unit")) o.grid_per_unit = static_cast<int>(a->at("grid_per_unit").integer_at_least(1));
      if (a->has("scheme")) {
        o.scheme = a->at("scheme").choice<FlowScheme>(
            {{"euler", FlowScheme::kGeodesicEuler}, {"rk4", FlowScheme::kGeodesicRK4}});
      }
      if (a->has("h_step")) o.h_step = a->at("h_step").positive();
    }
    d.apt = o;
  }
  if (auto p = n.opt("picard")) {
    if (p->raw().is_boolean()) {
      d.picard = p->boolean();
    } else {
      p->allow({"micro_step"});
      d.picard = true;
      if (p->has("micro_step")) d.picard_micro_step = p->at("micro_step").positive();
    }
  }
  if (auto nd = n.opt("noise_delta"); nd && !(nd->raw().is_boolean() && !nd->raw().get<bool>())) {
    double horizon = 1.0;
    if (!nd->raw().is_boolean()) {
      nd->allow({"horizon"});
      if (nd->has("horizon")) horizon = nd->at("horizon").positive();
    }
    d.noise_delta_horizon = horizon;
  }
  if (auto l = n.opt("lyapunov")) {
    l->allow({"base", "radius", "replications", "audited"});
    if (!m.is_hadamard()) l->fail("the Lyapunov audit needs a Hadamard manifold, got " + m.id());
    LyapunovOptions o;
    o.base = l->at("base").vector();
    if (o.base.size() != m.ambient_dim() || m.point_residual(o.base) > 1e-6) {
      l->at("base").fail("base point is not on " + m.id());
    }
    o.base = m.project_point(o.base);
    if (l->has("radius")) o.radius = l->at("radius").positive();
    if (l->has("replications")) o.replications = static_cast<int>(l->at("replications").integer_at_least(2));
    if (l->has("audited")) o.audited = static_cast<int>(l->at("audited").integer_at_least(1));
    d.lyapunov = o;
  }
  if (auto v = n.opt("verdict")) {
    if (v->raw().is_boolean()) {
      d.verdict = v->boolean();
    } else {
      v->allow({"threshold"});
      if (v->has("threshold")) d.threshold = v->at("threshold").positive();
    }
  }
  return d;
}

}  // namespace

ExperimentConfig parse_config(const json& user) {
  if (!user.is_object()) throw ConfigError("$", "config must be a JSON object");
  const Node u(user, "$");
  const std::string scenario = u.at("scenario").string();
  json merged;
  try {
    merged = scenario_template(scenario);
  } catch (const InvalidArgument&) {
    std::string names;
    for (const auto& s : scenario_registry()) names += (names.empty() ? "" : ", ") + s.name;
    u.at("scenario").fail("unknown scenario '" + scenario + "' (expected one of: " + names + ")");
  }
  // An object whose "kind" differs from the template's replaces it wholesale, so
  // no parameters of the template kind leak through. A user "algorithm" list
  // replaces the template object as well.
  for (const char* key : {"field", "schedule", "initial_point"}) {
    if (user.contains(key) && user[key].is_object() && user[key].contains("kind") &&
        merged[key].value("kind", json()) != user[key]["kind"]) {
      merged.erase(key);
    }
  }
  merged.merge_patch(user);

  const Node n(merged, "$");
  n.allow({"scenario", "field", "oracle", "schedule", "algorithm", "initial_point", "iterations", "seed",
           "replications", "diagnostics", "output"});

  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.source = merged;

  const FieldBuild fb = read_field(n.at("field"));
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"rayleigh-sphere", {"rayleigh"}},     {"frechet-hyperbolic", {"frechet"}},
      {"bilinear-game-alternating", {"bilinear"}}, {"cycling-sphere", {"cycling"}},
      {"potential-game", {"coordination"}},  {"euclidean-bowl", {"bowl"}}};
  const auto& kinds = allowed.at(scenario);
  if (std::find(kinds.begin(), kinds.end(), fb.kind) == kinds.end()) {
    n.at("field").at("kind").fail("scenario " + scenario + " needs field kind '" + kinds.front() + "'");
  }
  const Manifold& m = fb.field.manifold();

  const OracleSpec oracle = read_oracle(n.at("oracle"), fb.field);
  cfg.schedule = read_schedule(n.at("schedule"));

  const Node alg = n.at("algorithm");
  std::vector<AlgorithmSpec> algs;
  if (alg.raw().is_array()) {
    if (alg.size() == 0) alg.fail("need at least one algorithm");
    for (std::size_t i = 0; i < alg.size(); ++i) algs.push_back(read_algorithm(alg.item(i)));
  } else {
    algs.push_back(read_algorithm(alg));
  }
  for (std::size_t i = 0; i < algs.size(); ++i) {
    try {
      Scheme s = single(algs[i], oracle);
      cfg.scheme = i == 0 ? s : compose(cfg.scheme, s);
    } catch (const InvalidArgument& e) {
      (alg.raw().is_array() ? alg.item(i) : alg).fail(e.what());
    }
  }

  cfg.initial = read_initial(n.at("initial_point"), m);
  cfg.iterations = static_cast<std::size_t>(n.at("iterations").integer_at_least(1));
  cfg.seed = n.at("seed").unsigned_integer();
  cfg.replications = static_cast<int>(n.at("replications").integer_at_least(1));
  cfg.diagnostics = read_diagnostics(n.at("diagnostics"), m);

  if (auto out = n.opt("output")) {
    out->allow({"dir", "stride", "plot"});
    if (out->has("dir")) cfg.out_dir = out->at("dir").string();
    const auto stride = out->has("stride") ? out->at("stride").integer_at_least(0) : 0;
    cfg.csv_stride = stride > 0 ? static_cast<std::size_t>(stride) : std::max<std::size_t>(1, cfg.iterations / 1000);
    if (out->has("plot")) cfg.plot = out->at("plot").boolean();
  }
  // Surface target errors (degenerate spectra, singular couplings) as schema errors.
  if (cfg.diagnostics.verdict) {
    try {
      (void)scenario_target(cfg);
    } catch (const InvalidArgument& e) {
      n.at("field").fail(e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Verdict targets

namespace {

// Deterministic Riemannian fixed point x <- exp_x(0.5 sum_i w_i log_x(a_i)).
Vec frechet_mean_fixed_point(const FrechetMean& fm, const Manifold& h) {
  Vec x = fm.anchors.front();
  for (int it = 0; it < 100000; ++it) {
    Vec g = Vec::Zero(x.size());
    for (std::size_t i = 0; i < fm.anchors.size(); ++i) g += fm.weights[i] * h.log(x, fm.anchors[i]);
    x = h.exp(x, 0.5 * g);
    if (h.norm(x, g) <= 1e-13) break;
  }
  return x;
}

}  // namespace

ScenarioTarget scenario_target(const ExperimentConfig& cfg) {
  const Manifold& m = cfg.scheme.manifold();
  const double thr = cfg.diagnostics.threshold;
  const std::string& sc = cfg.scenario;
  if (sc == "cycling-sphere") return make_target("limit-cycle", LimitCycle{2, 0.5}, thr);
  if (sc == "rayleigh-sphere") {
    const auto& rq = std::get<RayleighQuotient>(*cfg.scheme.stages.front().oracle.field.potential());
    const Mat& a = rq.a;
    const bool maximize = rq.maximize;
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    const Vec ev = es.eigenvalues();
    const int k = maximize ? static_cast<int>(ev.size()) - 1 : 0;
    const int nb = maximize ? k - 1 : 1;
    if (std::abs(ev(k) - ev(nb)) <= 1e-12 * std::max(1.0, std::abs(ev(k)))) {
      throw InvalidArgument("the extreme eigenvalue is not simple, so the attracting set is not a point pair");
    }
    const Vec v = es.eigenvectors().col(k);
    return make_target("critical-points", CriticalPoints{{v, -v}}, thr);
  }
  if (sc == "frechet-hyperbolic") {
    const auto& fm = std::get<FrechetMean>(*cfg.scheme.stages.front().oracle.field.potential());
    return make_target("critical-points", CriticalPoints{{frechet_mean_fixed_point(fm, m)}}, thr);
  }
  if (sc == "bilinear-game-alternating") {
    const auto& c = std::get<BilinearMinMax>(cfg.scheme.stages.front().oracle.field.game_spec()->payoff).coupling;
    if (c.rows() != c.cols() || Eigen::FullPivLU<Mat>(c).rank() < c.rows()) {
      throw InvalidArgument("the coupling must be square and invertible so that the origin is the only equilibrium");
    }
    return make_target("critical-points", CriticalPoints{{Vec::Zero(m.ambient_dim())}}, thr);
  }
  if (sc == "potential-game") {
    // Critical points of x^T A y on a product of spheres: (+/- u_i, +/- v_i).
    const auto& pot = std::get<PotentialGame>(cfg.scheme.stages.front().oracle.field.game_spec()->payoff).potential;
    const int n = m.ambient_dim() / 2;
    Mat a(n, n);
    for (int j = 0; j < n; ++j) {
      Vec z = Vec::Zero(2 * n);
      z(n + j) = 1.0;
      a.col(j) = -pot.euclidean_gradient(z).head(n);
    }
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec s = svd.singularValues();
    for (int i = 0; i + 1 < n; ++i) {
      if (std::abs(s(i) - s(i + 1)) <= 1e-12 * std::max(1.0, s(0))) {
        throw InvalidArgument("repeated singular values give a continuum of critical points");
      }
    }
    std::vector<Vec> pts;
    for (int i = 0; i < n; ++i) {
      for (double sx : {1.0, -1.0}) {
        for (double sy : {1.0, -1.0}) {
          Vec z(2 * n);
          z.head(n) = sx * svd.matrixU().col(i);
          z.tail(n) = sy * svd.matrixV().col(i);
          pts.push_back(z);
        }
      }
    }
    return make_target("potential-game", CriticalPoints{std::move(pts)}, thr);
  }
  if (sc == "euclidean-bowl") {
    return make_target("critical-points",
                       CriticalPoints{{std::get<QuadraticBowl>(*cfg.scheme.stages.front().oracle.field.potential()).center}},
                       thr);
  }
  throw InvalidArgument("unknown scenario '" + sc + "'");
}

// ---------------------------------------------------------------------------
// Execution

std::uint64_t replication_seed(std::uint64_t master, int replication) {
  return mix64(master ^ mix64(static_cast<std::uint64_t>(replication) + 0x5851f42d4c957f2dULL));
}

Vec initial_point(const ExperimentConfig& cfg, int replication) {
  const Manifold& m = cfg.scheme.manifold();
  switch (cfg.initial.kind) {
    case InitialPoint::Kind::kCoords:
      return cfg.initial.coords;
    case InitialPoint::Kind::kRandom: {
      SplitMix64 rng(mix64(replication_seed(cfg.seed, replication) ^ 0x243f6a8885a308d3ULL));
      return m.random_point(rng, cfg.initial.radius);
    }
    case InitialPoint::Kind::kLatitude: {
      Vec x = Vec::Zero(m.ambient_dim());
      x(0) = std::sqrt(std::max(0.0, 1.0 - cfg.initial.z * cfg.initial.z));
      x(m.ambient_dim() - 1) = cfg.initial.z;
      return m.project_point(x);
    }
  }
  return m.origin();
}

int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RSA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = static_cast<int>(v);
  }
  return std::max(1, std::min(n, jobs));
}

bool ExperimentResult::all_passed() const {
  return std::all_of(replications.begin(), replications.end(), [](const auto& r) { return r.verdict.passed; });
}

namespace {

ReplicationResult run_replication(const ExperimentConfig& cfg, const ScenarioTarget* target, int r) {
  ReplicationResult res;
  res.replication = r;
  const std::uint64_t seed = replication_seed(cfg.seed, r);
  res.trajectory = run(cfg.scheme, cfg.schedule, initial_point(cfg, r), cfg.iterations, seed);
  const Trajectory& tr = res.trajectory;
  const Manifold& m = tr.manifold;
  const VectorField& field = cfg.scheme.stages.front().oracle.field;
  auto distance = [&](const Vec& x) { return target ? target_distance(*target, m, x) : 0.0; };

  if (target) res.verdict = scenario_verdict(tr, *target);
  res.error_audit = audit_error_bounds(tr);

  const auto& d = cfg.diagnostics;
  const double span = std::max(d.apt ? d.apt->horizon : 0.0, d.noise_delta_horizon.value_or(0.0));
  const double room = tr.horizon() - span;
  const InterpolatedPath path(tr);
  if (d.probes > 0 && room > 0.0 && tr.records.size() > 0) {
    for (int j = 0; j < d.probes; ++j) {
      ReplicationResult::Probe p;
      p.tau = room * (j + 0.5) / d.probes;
      p.n = tr.count_until(p.tau);
      p.target_distance = distance(path(p.tau));
      if (d.apt) {
        FlowIntegrator fi{field, d.apt->h_step, d.apt->scheme};
        const auto rows = apt_report(path, fi, {p.tau}, d.apt->horizon, d.apt->grid_per_unit);
        p.apt = rows.front().deviation;
        p.refinement_bound = rows.front().refinement_bound;
        if (d.picard) {
          const double micro =
              d.picard_micro_step > 0.0 ? d.picard_micro_step : default_h_step(path, p.tau, d.apt->horizon);
          p.picard = picard_deviation(path, field, p.tau, d.apt->horizon, rows.front().grid_k, micro);
        }
      }
      if (d.noise_delta_horizon) p.noise_delta = noise_accumulation_delta(tr, p.tau, *d.noise_delta_horizon);
      res.probes.push_back(p);
    }
  }
  ReplicationResult::Probe last;
  last.n = tr.size();
  last.tau = tr.horizon();
  last.target_distance = distance(tr.states.back());
  res.probes.push_back(last);

  if (d.lyapunov) {
    SupermartingaleOptions opt;
    opt.replications = d.lyapunov->replications;
    opt.max_audited = d.lyapunov->audited;
    opt.seed = mix64(seed ^ 0x13198a2e03707344ULL);
    res.lyapunov = supermartingale_audit(tr, cfg.scheme.stages.front(), LyapunovSpec{d.lyapunov->base, d.lyapunov->radius},
                                         opt);
  }
  return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.schedule = classify(cfg.schedule);
  if (!out.schedule.rm_valid()) out.warnings.push_back("schedule RM-invalid: " + out.schedule.reason);

  std::optional<ScenarioTarget> target;
  if (cfg.diagnostics.verdict) target = scenario_target(cfg);

  const int jobs = cfg.replications;
  out.replications.resize(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < jobs; r = next++) {
      try {
        out.replications[r] = run_replication(cfg, target ? &*target : nullptr, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const int threads = worker_count(jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t clipped = 0;
  for (auto& r : out.replications) {
    for (const auto& rec : r.trajectory.records) clipped += rec.clipped ? 1 : 0;
    if (!cfg.diagnostics.verdict) r.verdict.passed = true;
    if (r.lyapunov && r.lyapunov->refused) {
      out.warnings.push_back("replication " + std::to_string(r.replication) + ": " + r.lyapunov->warning);
    }
  }
  if (clipped > 0) {
    out.warnings.push_back(std::to_string(clipped) + " step(s) clipped to " + format_double(kClipFraction) +
                           " x injectivity radius");
  }
  if (cfg.diagnostics.probes > 0 && out.replications.front().probes.size() == 1) {
    out.warnings.push_back("trajectory horizon too short for diagnostic probes");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json probe_json(const ReplicationResult::Probe& p) {
  return {{"n", p.n},
          {"tau", p.tau},
          {"target_distance", p.target_distance},
          {"apt_deviation", opt_json(p.apt)},
          {"refinement_bound", opt_json(p.refinement_bound)},
          {"picard_deviation", opt_json(p.picard)},
          {"noise_delta", opt_json(p.noise_delta)}};
}

json series_json(const SeriesAudit& s) {
  return {{"partial_sum", s.partial_sum}, {"decay_exponent", s.decay_exponent}, {"convergent", s.convergent}};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string note = res.schedule.rm_valid() ? "" : "schedule RM-invalid";

  std::ostringstream traj;
  for (std::size_t i = 0; i < res.replications.size(); ++i) {
    std::ostringstream one;
    write_trajectory_csv(one, res.replications[i].trajectory, cfg.csv_stride, res.replications[i].replication);
    std::string s = one.str();
    if (i > 0) s.erase(0, s.find('\n') + 1);  // one header
    traj << s;
  }
  write_file(dir / "trajectory.csv", traj.str());

  std::ostringstream diag;
  diag << "replication,n,tau,target_distance,apt_deviation,refinement_bound,picard_deviation,noise_delta\n";
  for (const auto& r : res.replications) {
    for (const auto& p : r.probes) {
      diag << r.replication << ',' << p.n << ',' << format_double(p.tau) << ',' << format_double(p.target_distance)
           << ',' << opt_num(p.apt) << ',' << opt_num(p.refinement_bound) << ',' << opt_num(p.picard) << ','
           << opt_num(p.noise_delta) << '\n';
    }
  }
  write_file(dir / "diagnostics.csv", diag.str());

  std::ostringstream verd;
  verd << "replication,scenario,metric,value,final_value,threshold,passed,note\n";
  if (cfg.diagnostics.verdict) {
    for (const auto& r : res.replications) {
      const auto& v = r.verdict;
      verd << r.replication << ',' << v.scenario << ',' << v.metric << ',' << format_double(v.value) << ','
           << format_double(v.final_value) << ',' << format_double(v.threshold) << ',' << (v.passed ? 1 : 0) << ','
           << note << '\n';
    }
  }
  write_file(dir / "verdicts.csv", verd.str());

  bool any_lyapunov = false;
  std::ostringstream lyap;
  lyap << "replication,n,energy,drift,std_error,epsilon,violated\n";
  for (const auto& r : res.replications) {
    if (!r.lyapunov) continue;
    any_lyapunov = true;
    for (const auto& row : r.lyapunov->rows) {
      lyap << r.replication << ',' << row.n << ',' << format_double(row.energy) << ',' << format_double(row.drift)
           << ',' << format_double(row.std_error) << ',' << format_double(row.epsilon) << ','
           << (row.violated ? 1 : 0) << '\n';
    }
  }
  if (any_lyapunov) write_file(dir / "lyapunov.csv", lyap.str());

  json runs = json::array();
  int passed = 0;
  for (const auto& r : res.replications) {
    json run = {{"replication", r.replication},
                {"seed", replication_seed(cfg.seed, r.replication)},
                {"terminal", probe_json(r.probes.back())},
                {"error_bounds",
                 {{"noise", series_json(r.error_audit.noise)},
                  {"bias", series_json(r.error_audit.bias)},
                  {"bias_tail", r.error_audit.bias_tail},
                  {"bias_vanishing", r.error_audit.bias_vanishing},
                  {"ok", r.error_audit.ok()}}}};
    if (cfg.diagnostics.verdict) {
      run["verdict"] = {{"metric", r.verdict.metric},
                        {"value", r.verdict.value},
                        {"final_value", r.verdict.final_value},
                        {"threshold", r.verdict.threshold},
                        {"passed", r.verdict.passed}};
    }
    if (r.lyapunov) {
      run["lyapunov"] = {{"refused", r.lyapunov->refused},
                         {"warning", r.lyapunov->warning},
                         {"audited", r.lyapunov->rows.size()},
                         {"violations", r.lyapunov->violations},
                         {"pass_rate", r.lyapunov->pass_rate()}};
    }
    passed += r.verdict.passed ? 1 : 0;
    runs.push_back(std::move(run));
  }
  json schedule = {{"description", cfg.schedule.describe()},
                   {"rm_valid", res.schedule.rm_valid()},
                   {"reason", res.schedule.reason}};
  schedule["window_start"] = res.schedule.window_start ? json(*res.schedule.window_start) : json(nullptr);
  const json summary = {{"scenario", cfg.scenario},
                        {"seed", cfg.seed},
                        {"iterations", cfg.iterations},
                        {"replications", cfg.replications},
                        {"schedule", schedule},
                        {"warnings", res.warnings},
                        {"passed", passed},
                        {"all_passed", res.all_passed()},
                        {"runs", runs}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  if (cfg.plot) {
    std::optional<ScenarioTarget> t;
    if (cfg.diagnostics.verdict) t = scenario_target(cfg);
    const ScenarioTarget* tgt = t ? &*t : nullptr;
    std::vector<PlotSeries> series;
    for (const auto& r : res.replications) {
      PlotSeries s;
      s.label = "replication " + std::to_string(r.replication);
      const auto& tr = r.trajectory;
      for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i % cfg.csv_stride != 0 && i + 1 != tr.size()) continue;
        s.x.push_back(tr.times[i]);
        s.y.push_back(tgt ? target_distance(*tgt, tr.manifold, tr.states[i]) : tr.manifold.dist(tr.states[0], tr.states[i]));
      }
      series.push_back(std::move(s));
    }
    const std::string y_label = cfg.diagnostics.verdict ? "distance to target" : "distance from start";
    write_file(dir / "plot.svg", svg_line_chart(series, cfg.scenario, "effective time", y_label));
  }
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string svg_line_chart(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  constexpr double W = 800, H = 600, L = 80, R = 20, T = 40, B = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  os << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  os << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << xml_escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(xv) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(yv) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"13\" transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">" << xml_escape(y_label)
     << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    os << "<polyline fill=\"none\" stroke=\"" << colors[i % 10] << "\" stroke-width=\"1.2\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      os << (first ? "" : " ") << fixed(px(s.x[k]), 2) << ',' << fixed(py(s.y[k]), 2);
      first = false;
    }
    os << "\"><title>" << xml_escape(s.label) << "</title></polyline>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rrm
