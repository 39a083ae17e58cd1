#include "skelgrasp/planner.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include <json.hpp>

#include "parallel.hpp"
#include "skelgrasp/errors.hpp"

namespace skelgrasp {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

void validate(const PlannerConfig& c) {
  if (c.samples_round_endpoint < 1 || c.samples_round_connecting < 1)
    throw InputError("planner: sample counts must be at least 1");
  if (!(c.retreat_step > 0.0)) throw InputError("planner: retreat step must be positive");
  if (c.retreat_max < 0.0) throw InputError("planner: retreat max must not be negative");
  if (!(c.round_ratio > 0.0)) throw InputError("planner: round ratio must be positive");
  if (!(c.mu > 0.0)) throw InputError("planner: friction coefficient must be positive");
  if (c.cone_edges < 3) throw InputError("planner: friction cone needs at least 3 edges");
  if (c.baseline_samples < 0) throw InputError("planner: baseline samples must not be negative");
  if (!(c.closing.step > 0.0) || !(c.closing.linear_step > 0.0) || c.closing.max_iterations < 1)
    throw InputError("planner: closing step and iterations must be positive");
  if (!(c.closing.touch_tolerance > 0.0) || c.closing.touch_tolerance > kContactTolerance)
    throw InputError("planner: touch tolerance must lie in (0, " + std::to_string(kContactTolerance) + "]");
}

SkeletonCursor::SkeletonCursor(const Skeleton& skeleton, double d) {
  if (!(d > 0.0)) throw InputError("vertex distance must be positive");
  for (std::size_t v = 0; v < skeleton.size(); ++v)
    if (skeleton.vertices[v].kind != VertexKind::Connecting) order_.push_back(static_cast<std::int32_t>(v));
  for (const auto& seg : segment_skeleton(skeleton)) {
    std::int32_t prev = seg.ends[0];
    double since = 0.0;
    for (auto v : seg.interior) {
      since += (skeleton.vertices[v].position - skeleton.vertices[prev].position).norm();
      prev = v;
      if (since >= d - 1e-9) {
        order_.push_back(v);
        since = 0.0;
      }
    }
  }
}

std::optional<std::int32_t> SkeletonCursor::next() {
  if (pos_ >= order_.size()) return std::nullopt;
  return order_[pos_++];
}

double interval_length(Strategy s, const HandModel& hand) {
  return is_precision(s) ? hand.fingerwidth : 0.5 * hand.handwidth;
}

bool evaluate_strategy(Strategy s, VertexKind kind, const GraspingInterval& interval, const LocalSurfaceShape& shape,
                       const HandModel& hand, ThicknessMode mode) {
  const auto& t = hand.thresholds;
  const double l1 = shape.length(mode);
  const double l2 = shape.thickness(mode);
  auto in = [](double x, double lo, double hi) { return x >= lo && x <= hi; };
  auto long_enough = [&] {
    if (interval.paths.size() != 2) return false;
    const double need = interval_length(s, hand) - 1e-9;
    return interval.paths[0].length >= need && interval.paths[1].length >= need;
  };
  const bool round = shape.shape == ShapeKind::Round;
  switch (s) {
    case Strategy::PrecisionConnecting1a:
      return kind == VertexKind::Connecting && long_enough() && round && in(l2, t.pre2_min, t.pre2_max);
    case Strategy::PrecisionConnecting1b:
      return kind == VertexKind::Connecting && long_enough() && !round && in(l1, t.pre1_min, t.pre1_max) &&
             in(l2, t.pre2_min, t.pre2_max);
    case Strategy::PowerConnecting2a:
      return kind == VertexKind::Connecting && long_enough() && round && in(l2, t.pow2_min, t.pow2_max);
    case Strategy::PowerConnecting2b:
      return kind == VertexKind::Connecting && long_enough() && !round && l1 > t.pow1_min &&
             in(l2, t.pow2_min, t.pow2_max);
    case Strategy::PrecisionEndpoint3:
      return kind == VertexKind::Endpoint && in(l2, t.pre2_min, t.pre2_max);
    case Strategy::PowerEndpoint4:
      return kind == VertexKind::Endpoint && in(l2, t.pow2_min, t.pow2_max);
  }
  return false;
}

std::vector<GraspHypothesis> generate_hypotheses(std::int32_t vertex, const Vec3& point, VertexKind kind,
                                                 const Vec3& tangent, Strategy strategy,
                                                 const LocalSurfaceShape& shape, const HandModel& hand,
                                                 const PlannerConfig& config) {
  std::vector<GraspHypothesis> out;
  if (kind == VertexKind::Branching || tangent.norm() < 1e-12) return out;
  const std::string preshape(preshape_for(strategy));
  const Vec3 t = tangent.normalized();
  auto add = [&](const Vec3& approach, const Vec3& spread) {
    if (approach.norm() < 1e-12) return;
    GraspHypothesis h;
    h.approach = approach.normalized();
    h.pose = place_gcp(hand, preshape, point, h.approach, spread);
    h.preshape = preshape;
    h.vertex = vertex;
    h.strategy = strategy;
    out.push_back(std::move(h));
  };
  const bool round = shape.shape == ShapeKind::Round;
  if (kind == VertexKind::Connecting) {
    if (round) {
      const int n = config.samples_round_connecting;
      for (int k = 0; k < n; ++k) {
        const double a = 2.0 * kPi * k / n;
        const Vec3 dir = std::cos(a) * shape.ev1 + std::sin(a) * shape.ev2;
        add(dir, dir.cross(t));
      }
    } else {
      for (const Vec3& dir : {Vec3(shape.ev1), Vec3(-shape.ev1), Vec3(shape.ev2), Vec3(-shape.ev2)})
        add(dir, dir.cross(t));
    }
  } else {
    if (round) {
      const int n = config.samples_round_endpoint;
      for (int k = 0; k < n; ++k) {
        const double a = 2.0 * kPi * k / n;
        add(-t, std::cos(a) * shape.ev1 + std::sin(a) * shape.ev2);
      }
    } else {
      add(-t, shape.ev2);
      add(-t, shape.ev1);
    }
  }
  return out;
}

std::optional<RigidPose> retreat_to_free(const GraspHypothesis& h, const HandModel& hand, const Mesh& object,
                                         const PlannerConfig& config) {
  const Preshape& pre = hand.preshape(h.preshape);
  std::vector<double> q(hand.joints.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = std::clamp(pre.start[j], hand.joints[j].lower, hand.joints[j].upper);
  const auto local = forward_kinematics(hand, q);
  const int steps = static_cast<int>(std::floor(config.retreat_max / config.retreat_step + 1e-9));
  std::vector<RigidPose> poses(local.size());
  for (int k = 0; k <= steps; ++k) {
    const RigidPose pose(h.pose.translation - (k * config.retreat_step) * h.approach, h.pose.rotation);
    for (std::size_t l = 0; l < local.size(); ++l) poses[l] = pose * local[l];
    if (!hand_collides(hand, poses, object)) return pose;
  }
  return std::nullopt;
}

std::string_view to_string(ValidationOutcome o) {
  switch (o) {
    case ValidationOutcome::Valid: return "valid";
    case ValidationOutcome::RetreatFailed: return "retreat_failed";
    case ValidationOutcome::InitialCollision: return "initial_collision";
    case ValidationOutcome::NoContacts: return "no_contacts";
    case ValidationOutcome::NotForceClosure: return "not_force_closure";
  }
  return "unknown";
}

Validation validate_hypothesis(const GraspHypothesis& h, const HandModel& hand, const Mesh& object,
                               const PlannerConfig& config) {
  Validation v;
  static_cast<GraspHypothesis&>(v.grasp) = h;
  const auto free = retreat_to_free(h, hand, object, config);
  if (!free) {
    v.outcome = ValidationOutcome::RetreatFailed;
    return v;
  }
  v.grasp.pose = *free;
  const auto closed = close_fingers(hand, *free, h.preshape, object, config.closing);
  if (closed.initial_collision) {
    v.outcome = ValidationOutcome::InitialCollision;
    return v;
  }
  v.grasp.contacts = closed.contacts;
  if (closed.contacts.empty()) {
    v.outcome = ValidationOutcome::NoContacts;
    return v;
  }
  const auto q = grasp_quality(closed.contacts, object, config.mu, config.cone_edges);
  v.grasp.force_closure = q.force_closure;
  v.grasp.epsilon = q.epsilon;
  v.outcome = q.force_closure ? ValidationOutcome::Valid : ValidationOutcome::NotForceClosure;
  return v;
}

double PlanDiagnostics::force_closure_rate() const {
  return validated == 0 ? 0.0 : 100.0 * static_cast<double>(valid) / static_cast<double>(validated);
}

namespace {

/// Validates a batch in parallel, then folds outcomes into the result in batch order.
class Collector {
 public:
  Collector(PlanResult& result, const HandModel& hand, const Mesh& object, const PlannerConfig& config)
      : result_(result), hand_(hand), object_(object), config_(config) {}

  void add_overhead(double ms) { pending_ms_ += ms; }

  void run(const std::vector<GraspHypothesis>& batch) {
    std::vector<Validation> out(batch.size());
    std::vector<double> cost(batch.size(), 0.0);
    detail::parallel_for(batch.size(), config_.threads, [&](std::size_t i) {
      const auto t0 = Clock::now();
      out[i] = validate_hypothesis(batch[i], hand_, object_, config_);
      cost[i] = ms_since(t0);
    });
    auto& d = result_.diagnostics;
    for (std::size_t i = 0; i < out.size(); ++i) {
      ++d.hypotheses;
      pending_ms_ += cost[i];
      switch (out[i].outcome) {
        case ValidationOutcome::RetreatFailed: ++d.retreat_failures; continue;
        case ValidationOutcome::InitialCollision: ++d.initial_collisions; break;
        case ValidationOutcome::NoContacts: ++d.no_contacts; break;
        case ValidationOutcome::NotForceClosure: ++d.not_force_closure; break;
        case ValidationOutcome::Valid: ++d.valid; break;
      }
      ++d.validated;
      if (out[i].outcome != ValidationOutcome::Valid) continue;
      Grasp g = std::move(out[i].grasp);
      g.time_ms = config_.deterministic ? 0.0 : pending_ms_;
      pending_ms_ = 0.0;
      result_.grasps.push_back(std::move(g));
    }
  }

 private:
  PlanResult& result_;
  const HandModel& hand_;
  const Mesh& object_;
  const PlannerConfig& config_;
  double pending_ms_ = 0.0;
};

struct ShapeCache {
  double budget = -1.0;
  GraspingInterval interval;
  std::optional<LocalSurfaceShape> shape;
};

}  // namespace

PlanResult plan(const Mesh& object, const Skeleton& skeleton, const HandModel& hand, const PlannerConfig& config) {
  validate(config);
  const auto start = Clock::now();
  PlanResult result;
  auto& d = result.diagnostics;
  if (config.timeout <= 0.0) return result;

  const double dist = config.vertex_distance > 0.0 ? config.vertex_distance : 0.5 * hand.fingerwidth;
  SkeletonCursor cursor(skeleton, dist);
  Collector collect(result, hand, object, config);

  while (auto v = cursor.next()) {
    if (ms_since(start) >= 1000.0 * config.timeout) {
      d.timed_out = true;
      break;
    }
    const auto t0 = Clock::now();
    ++d.vertices_visited;
    const auto& sv = skeleton.vertices[*v];
    std::vector<GraspHypothesis> batch;
    switch (sv.kind) {
      case VertexKind::Branching: ++d.branching_vertices; break;
      case VertexKind::Endpoint: ++d.endpoint_vertices; break;
      case VertexKind::Connecting: ++d.connecting_vertices; break;
    }
    bool any_applicable = false;
    if (sv.kind != VertexKind::Branching) {
      const Vec3 tangent = skeleton_tangent(skeleton, *v);
      std::vector<ShapeCache> cache;
      bool degenerate = false;
      for (Strategy s : kAllStrategies) {
        const bool connecting_rule = s != Strategy::PrecisionEndpoint3 && s != Strategy::PowerEndpoint4;
        if (connecting_rule != (sv.kind == VertexKind::Connecting)) continue;
        const double budget = interval_length(s, hand);
        auto it = std::find_if(cache.begin(), cache.end(), [&](const ShapeCache& c) { return c.budget == budget; });
        if (it == cache.end()) {
          ShapeCache c;
          c.budget = budget;
          c.interval = grasping_interval(skeleton, *v, budget, config.max_curvature);
          try {
            c.shape = surface_shape(object, skeleton, *v, c.interval, config.round_ratio);
          } catch (const DegenerateShapeError&) {
            degenerate = true;
          }
          cache.push_back(std::move(c));
          it = cache.end() - 1;
        }
        if (!it->shape) continue;
        if (!evaluate_strategy(s, sv.kind, it->interval, *it->shape, hand, config.thickness)) continue;
        any_applicable = true;
        ++d.applicable[std::string(to_string(s))];
        auto hyps = generate_hypotheses(*v, sv.position, sv.kind, tangent, s, *it->shape, hand, config);
        batch.insert(batch.end(), std::make_move_iterator(hyps.begin()), std::make_move_iterator(hyps.end()));
      }
      if (degenerate) ++d.degenerate_shapes;
    }
    if (!any_applicable) ++d.no_strategy_vertices;
    collect.add_overhead(ms_since(t0));
    collect.run(batch);
  }
  d.elapsed_ms = config.deterministic ? 0.0 : ms_since(start);
  return result;
}

PlanResult plan(const Mesh& object, const HandModel& hand, const PlannerConfig& config) {
  return plan(object, skeletonize(object), hand, config);
}

PlanResult plan_baseline(const Mesh& object, const HandModel& hand, const PlannerConfig& config) {
  validate(config);
  const auto start = Clock::now();
  PlanResult result;
  auto& d = result.diagnostics;
  if (config.timeout <= 0.0 || config.baseline_samples == 0 || object.empty()) return result;

  std::vector<double> cdf(object.triangle_count());
  double total = 0.0;
  for (std::size_t t = 0; t < object.triangle_count(); ++t) {
    const auto c = object.corners(t);
    total += triangle_area(c[0], c[1], c[2]);
    cdf[t] = total;
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GraspHypothesis> all;
  all.reserve(static_cast<std::size_t>(config.baseline_samples));
  for (int i = 0; i < config.baseline_samples; ++i) {
    const double pick = unit(rng) * total;
    const auto t = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    double r1 = unit(rng), r2 = unit(rng);
    if (r1 + r2 > 1.0) r1 = 1.0 - r1, r2 = 1.0 - r2;
    const auto c = object.corners(t);
    const Vec3 p = c[0] + r1 * (c[1] - c[0]) + r2 * (c[2] - c[0]);
    const Vec3 approach = -object.normal(t);
    const double roll = 2.0 * kPi * unit(rng);
    const Vec3 u = any_perpendicular(approach);
    const Vec3 w = approach.cross(u);
    GraspHypothesis h;
    h.approach = approach;
    h.preshape = "power";
    h.pose = place_gcp(hand, h.preshape, p, approach, std::cos(roll) * u + std::sin(roll) * w);
    all.push_back(std::move(h));
  }

  Collector collect(result, hand, object, config);
  const std::size_t chunk = 16;
  for (std::size_t i = 0; i < all.size(); i += chunk) {
    if (ms_since(start) >= 1000.0 * config.timeout) {
      d.timed_out = true;
      break;
    }
    std::vector<GraspHypothesis> batch(all.begin() + static_cast<std::ptrdiff_t>(i),
                                       all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), i + chunk)));
    collect.run(batch);
  }
  d.elapsed_ms = config.deterministic ? 0.0 : ms_since(start);
  return result;
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("grasp file: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pose_json(const RigidPose& p) {
  const auto& q = p.rotation;
  return {{"translation", vec_json(p.translation)}, {"rotation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

RigidPose json_pose(const json& j) {
  const auto& r = j.at("rotation");
  if (!r.is_array() || r.size() != 4) throw InputError("grasp file: rotation must be [w, x, y, z]");
  RigidPose p;
  p.translation = json_vec(j.at("translation"));
  p.rotation = Quat(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>());
  return p;
}

}  // namespace

std::string grasps_to_json(const std::vector<Grasp>& grasps, const GraspSetInfo& info,
                           const PlanDiagnostics* diagnostics) {
  json doc;
  doc["schema_version"] = kGraspSchemaVersion;
  doc["object"] = info.object;
  doc["hand"] = info.hand;
  doc["planner"] = info.planner;
  doc["seed"] = info.seed;
  json arr = json::array();
  for (const auto& g : grasps) {
    json jg;
    jg["pose"] = pose_json(g.pose);
    jg["preshape"] = g.preshape;
    jg["strategy"] = g.strategy ? json(std::string(to_string(*g.strategy))) : json(nullptr);
    jg["vertex"] = g.vertex;
    jg["approach"] = vec_json(g.approach);
    json cs = json::array();
    for (const auto& c : g.contacts)
      cs.push_back({{"position", vec_json(c.position)}, {"normal", vec_json(c.normal)}, {"link", c.link}});
    jg["contacts"] = std::move(cs);
    jg["epsilon"] = g.epsilon;
    jg["force_closure"] = g.force_closure;
    jg["time_ms"] = g.time_ms;
    arr.push_back(std::move(jg));
  }
  doc["grasps"] = std::move(arr);
  if (diagnostics) {
    const auto& d = *diagnostics;
    json jd = {{"vertices_visited", d.vertices_visited},
               {"endpoint_vertices", d.endpoint_vertices},
               {"connecting_vertices", d.connecting_vertices},
               {"branching_vertices", d.branching_vertices},
               {"no_strategy_vertices", d.no_strategy_vertices},
               {"degenerate_shapes", d.degenerate_shapes},
               {"applicable", d.applicable},
               {"hypotheses", d.hypotheses},
               {"retreat_failures", d.retreat_failures},
               {"validated", d.validated},
               {"initial_collisions", d.initial_collisions},
               {"no_contacts", d.no_contacts},
               {"not_force_closure", d.not_force_closure},
               {"valid", d.valid},
               {"force_closure_rate_pct", d.force_closure_rate()},
               {"timed_out", d.timed_out},
               {"elapsed_ms", d.elapsed_ms}};
    doc["diagnostics"] = std::move(jd);
  }
  return doc.dump(2) + "\n";
}

std::vector<Grasp> grasps_from_json(std::string_view text, GraspSetInfo* info) {
  std::vector<Grasp> out;
  try {
    const json doc = json::parse(text);
    if (doc.value("schema_version", 0) != kGraspSchemaVersion) throw InputError("grasp file: unsupported schema_version");
    if (info) {
      info->object = doc.value("object", std::string());
      info->hand = doc.value("hand", std::string());
      info->planner = doc.value("planner", std::string());
      info->seed = doc.value("seed", std::uint64_t{0});
    }
    for (const auto& jg : doc.at("grasps")) {
      Grasp g;
      g.pose = json_pose(jg.at("pose"));
      g.preshape = jg.at("preshape").get<std::string>();
      if (!jg.at("strategy").is_null()) {
        g.strategy = parse_strategy(jg["strategy"].get<std::string>());
        if (!g.strategy) throw InputError("grasp file: unknown strategy");
      }
      g.vertex = jg.value("vertex", -1);
      g.approach = json_vec(jg.at("approach"));
      for (const auto& jc : jg.at("contacts"))
        g.contacts.push_back({json_vec(jc.at("position")), json_vec(jc.at("normal")), jc.value("link", -1)});
      g.epsilon = jg.at("epsilon").get<double>();
      g.force_closure = jg.at("force_closure").get<bool>();
      g.time_ms = jg.value("time_ms", 0.0);
      out.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("grasp file: ") + e.what());
  }
  return out;
}

Replay replay_grasp(const Grasp& g, const HandModel& hand, const Mesh& object, const PlannerConfig& config) {
  Replay r;
  const auto closed = close_fingers(hand, g.pose, g.preshape, object, config.closing);
  if (closed.initial_collision) return r;
  r.collision_free = true;
  r.contacts = closed.contacts.size();
  if (closed.contacts.empty()) return r;
  const auto q = grasp_quality(closed.contacts, object, config.mu, config.cone_edges);
  r.force_closure = q.force_closure;
  r.epsilon = q.epsilon;
  return r;
}

void write_approach_ply(const std::vector<Grasp>& grasps, const HandModel& hand, const Mesh& object,
                        std::ostream& out, double line_length) {
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << object.vertex_count() + 2 * grasps.size() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << object.triangle_count() << '\n';
  out << "property list uchar int vertex_indices\n";
  out << "element edge " << grasps.size() << '\n';
  out << "property int vertex1\nproperty int vertex2\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (const auto& v : object.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << " 180 180 180\n";
  for (const auto& g : grasps) {
    const Vec3 gcp = g.pose.apply(hand.preshape(g.preshape).gcp.translation);
    const Vec3 back = gcp - line_length * g.approach;
    out << gcp.x() << ' ' << gcp.y() << ' ' << gcp.z() << " 0 200 0\n";
    out << back.x() << ' ' << back.y() << ' ' << back.z() << " 0 200 0\n";
  }
  for (const auto& t : object.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  const std::size_t base = object.vertex_count();
  for (std::size_t i = 0; i < grasps.size(); ++i) out << base + 2 * i << ' ' << base + 2 * i + 1 << " 0 200 0\n";
}

}  // namespace skelgrasp
