#include "skelgrasp/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "parallel.hpp"
#include "skelgrasp/errors.hpp"
#include "skelgrasp/log.hpp"

namespace skelgrasp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

enum class SampleOutcome { Success, InitialCollision, NoContacts, NotForceClosure };

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation; zero below two values.
Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::size_t> pick_evenly(std::size_t n, int max_count) {
  std::vector<std::size_t> ids;
  if (max_count <= 0 || n <= static_cast<std::size_t>(max_count)) {
    for (std::size_t i = 0; i < n; ++i) ids.push_back(i);
    return ids;
  }
  const auto m = static_cast<std::size_t>(max_count);
  for (std::size_t i = 0; i < m; ++i) ids.push_back(i * n / m);
  return ids;
}

}  // namespace

void validate(const RobustnessConfig& c) {
  if (c.samples < 1) throw InputError("robustness: samples must be at least 1");
  if (!(c.sigma_pos >= 0.0) || !std::isfinite(c.sigma_pos))
    throw InputError("robustness: position sigma must be finite and non-negative");
  if (!(c.sigma_rot >= 0.0) || !std::isfinite(c.sigma_rot))
    throw InputError("robustness: rotation sigma must be finite and non-negative");
  if (!(c.mu > 0.0)) throw InputError("robustness: friction coefficient must be positive");
  if (c.cone_edges < 3) throw InputError("robustness: friction cone needs at least 3 edges");
}

std::vector<PoseOffset> draw_offsets(const RobustnessConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto unit_vector = [&] {
    for (;;) {
      const Vec3 v(normal(rng), normal(rng), normal(rng));
      const double len = v.norm();
      if (len > 1e-12) return Vec3(v / len);
    }
  };
  const double sigma_rot = deg2rad(config.sigma_rot);
  std::vector<PoseOffset> out(static_cast<std::size_t>(config.samples));
  for (auto& o : out) {
    if (config.per_axis) {
      o.translation = config.sigma_pos * Vec3(normal(rng), normal(rng), normal(rng));
    } else {
      const Vec3 dir = unit_vector();
      o.translation = config.sigma_pos * normal(rng) * dir;
    }
    o.axis = unit_vector();
    o.angle = sigma_rot * normal(rng);
  }
  return out;
}

RigidPose perturb(const RigidPose& pose, const Vec3& center, const PoseOffset& offset) {
  if (offset.angle == 0.0 && offset.translation.isZero(0.0)) return pose;
  const Quat r(Eigen::AngleAxisd(offset.angle, offset.axis.normalized()));
  RigidPose out;
  out.rotation = (r * pose.rotation).normalized();
  out.translation = r * (pose.translation - center) + center + offset.translation;
  return out;
}

Vec3 contact_center(std::span<const Contact> contacts) {
  if (contacts.empty()) throw InputError("contact center of an empty contact list");
  Vec3 c = Vec3::Zero();
  for (const auto& k : contacts) c += k.position;
  return c / static_cast<double>(contacts.size());
}

RobustnessReport robustness_score(const Grasp& grasp, const Mesh& object, const HandModel& hand,
                                  const RobustnessConfig& config, std::int64_t grasp_id) {
  validate(config);
  if (grasp.contacts.empty()) throw InputError("robustness: grasp has no contacts");
  const Vec3 center = contact_center(grasp.contacts);
  const auto offsets = draw_offsets(config);

  std::vector<SampleOutcome> outcome(offsets.size(), SampleOutcome::Success);
  detail::parallel_for(offsets.size(), config.threads, [&](std::size_t i) {
    const RigidPose pose = perturb(grasp.pose, center, offsets[i]);
    const auto closed = close_fingers(hand, pose, grasp.preshape, object, config.closing);
    if (closed.initial_collision) {
      outcome[i] = SampleOutcome::InitialCollision;
    } else if (closed.contacts.empty()) {
      outcome[i] = SampleOutcome::NoContacts;
    } else if (!grasp_quality(closed.contacts, object, config.mu, config.cone_edges).force_closure) {
      outcome[i] = SampleOutcome::NotForceClosure;
    }
  });

  RobustnessReport r;
  r.grasp_id = grasp_id;
  r.samples = static_cast<int>(offsets.size());
  for (auto o : outcome) {
    switch (o) {
      case SampleOutcome::Success: ++r.successes; break;
      case SampleOutcome::InitialCollision: ++r.initial_collision; break;
      case SampleOutcome::NoContacts: ++r.no_contacts; break;
      case SampleOutcome::NotForceClosure: ++r.not_force_closure; break;
    }
  }
  r.score = static_cast<double>(r.successes) / static_cast<double>(r.samples);
  return r;
}

std::vector<RobustnessReport> BenchmarkReport::robustness(std::string_view planner) const {
  std::vector<RobustnessReport> out;
  for (const auto& o : objects)
    if (o.planner == planner) out.insert(out.end(), o.robustness.begin(), o.robustness.end());
  return out;
}

BenchmarkReport run_benchmark(std::span<const BenchmarkObject> objects, const HandModel& hand,
                              const BenchmarkConfig& config) {
  validate(config.planner);
  // Closing and friction follow the planner so that unperturbed samples reproduce grasps.
  RobustnessConfig rc = config.robustness;
  rc.mu = config.planner.mu;
  rc.cone_edges = config.planner.cone_edges;
  rc.closing = config.planner.closing;
  rc.threads = config.planner.threads;
  if (config.score_robustness) validate(rc);

  BenchmarkReport report;
  auto score = [&](const PlanResult& plan, const Mesh& mesh, ObjectResult& out) {
    for (const auto& g : plan.grasps) out.grasp_times_ms.push_back(g.time_ms);
    if (!config.score_robustness) return;
    for (auto i : pick_evenly(plan.grasps.size(), config.max_scored_grasps))
      out.robustness.push_back(robustness_score(plan.grasps[i], mesh, hand, rc, static_cast<std::int64_t>(i)));
  };

  for (const auto& obj : objects) {
    log_info("benchmark: " + obj.name);
    try {
      ObjectResult sk;
      sk.object = obj.name;
      sk.planner = kSkeletonPlanner;
      const auto t0 = Clock::now();
      Skeleton skeleton;
      try {
        skeleton = skeletonize(obj.mesh);
      } catch (const std::exception& e) {
        report.skipped.push_back({obj.name, std::string("skeletonization failed: ") + e.what()});
        log_warning("benchmark: skipping " + obj.name + ": " + e.what());
        continue;
      }
      sk.skeleton_ms = config.planner.deterministic ? 0.0 : ms_since(t0);
      const auto skeleton_plan = plan(obj.mesh, skeleton, hand, config.planner);
      sk.diagnostics = skeleton_plan.diagnostics;
      score(skeleton_plan, obj.mesh, sk);

      ObjectResult base;
      base.object = obj.name;
      base.planner = kBaselinePlanner;
      const auto baseline_plan = plan_baseline(obj.mesh, hand, config.planner);
      base.diagnostics = baseline_plan.diagnostics;
      score(baseline_plan, obj.mesh, base);

      report.objects.push_back(std::move(sk));
      report.objects.push_back(std::move(base));
    } catch (const std::exception& e) {
      report.skipped.push_back({obj.name, e.what()});
      log_warning("benchmark: skipping " + obj.name + ": " + e.what());
    }
  }
  if (report.objects.empty()) return report;

  for (const char* name : {kSkeletonPlanner, kBaselinePlanner}) {
    BenchmarkRow row;
    row.planner = name;
    row.hand = hand.name;
    std::vector<double> times;
    std::vector<double> scores;
    std::size_t valid = 0;
    for (const auto& o : report.objects) {
      if (o.planner != name) continue;
      ++row.objects;
      valid += o.diagnostics.valid;
      row.validated += o.diagnostics.validated;
      times.insert(times.end(), o.grasp_times_ms.begin(), o.grasp_times_ms.end());
      for (const auto& r : o.robustness) scores.push_back(100.0 * r.score);
    }
    row.grasps = valid;
    row.scored = scores.size();
    row.force_closure_rate =
        row.validated == 0 ? 0.0 : 100.0 * static_cast<double>(valid) / static_cast<double>(row.validated);
    const auto t = stats_of(times);
    row.time_mean_ms = t.mean;
    row.time_std_ms = t.std;
    const auto s = stats_of(scores);
    row.robustness_mean = s.mean;
    row.robustness_std = s.std;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<std::size_t> robustness_histogram(std::span<const RobustnessReport> reports) {
  std::vector<std::size_t> bins(20, 0);
  for (const auto& r : reports) {
    if (r.samples <= 0) continue;
    // Integer arithmetic keeps bin edges exact: bin k holds 5k% <= r < 5(k+1)%.
    const auto k = std::min<std::int64_t>(19, static_cast<std::int64_t>(r.successes) * 20 / r.samples);
    ++bins[static_cast<std::size_t>(k)];
  }
  return bins;
}

void write_summary_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "planner,hand,objects,grasps,validated,force_closure_rate_pct,time_mean_ms,time_std_ms,"
         "robustness_mean_pct,robustness_std_pct,scored_grasps\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    out << csv_field(r.planner) << ',' << csv_field(r.hand) << ',' << r.objects << ',' << r.grasps << ','
        << r.validated << ',' << r.force_closure_rate << ',' << r.time_mean_ms << ',' << r.time_std_ms << ','
        << r.robustness_mean << ',' << r.robustness_std << ',' << r.scored << '\n';
  }
}

void write_objects_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "object,planner,hypotheses,validated,valid,force_closure_rate_pct,retreat_failures,initial_collisions,"
         "no_contacts,not_force_closure,skeleton_ms,robustness_mean_pct,scored_grasps\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& o : report.objects) {
    const auto& d = o.diagnostics;
    std::vector<double> scores;
    for (const auto& r : o.robustness) scores.push_back(100.0 * r.score);
    out << csv_field(o.object) << ',' << o.planner << ',' << d.hypotheses << ',' << d.validated << ',' << d.valid
        << ',' << d.force_closure_rate() << ',' << d.retreat_failures << ',' << d.initial_collisions << ','
        << d.no_contacts << ',' << d.not_force_closure << ',' << o.skeleton_ms << ',' << stats_of(scores).mean
        << ',' << scores.size() << '\n';
  }
}

void write_histogram_csv(std::span<const RobustnessReport> reports, std::ostream& out) {
  const auto bins = robustness_histogram(reports);
  std::size_t total = 0;
  for (auto b : bins) total += b;
  out << "bin_upper_pct,fraction\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double fraction = total == 0 ? 0.0 : static_cast<double>(bins[k]) / static_cast<double>(total);
    out << 5 * (k + 1) << ',' << fraction << '\n';
  }
}

void write_skipped_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "object,reason\n";
  for (const auto& s : report.skipped) out << csv_field(s.object) << ',' << csv_field(s.reason) << '\n';
}

}  // namespace skelgrasp
