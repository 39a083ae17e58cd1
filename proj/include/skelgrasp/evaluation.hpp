#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skelgrasp/planner.hpp"

namespace skelgrasp {

struct RobustnessConfig {
  int samples = 100;
  double sigma_pos = 10.0;  ///< mm
  double sigma_rot = 5.0;   ///< degrees
  /// true: N(0, sigma_pos^2) on each axis. false: uniform direction with an
  /// N(0, sigma_pos^2) signed length.
  bool per_axis = true;
  std::uint64_t seed = 0;
  int threads = 0;  ///< <= 0: all hardware threads
  double mu = kDefaultFriction;
  int cone_edges = kDefaultConeEdges;
  CloseOptions closing;
};

/// Throws InputError when a field is out of range.
void validate(const RobustnessConfig& config);

/// One displacement, applied about the contact center.
struct PoseOffset {
  Vec3 translation = Vec3::Zero();  ///< mm
  Vec3 axis = Vec3::UnitZ();        ///< unit
  double angle = 0.0;               ///< rad
};

/// The config's offsets in sample order. Offsets for different sigmas but the same
/// seed share their directions and differ only in scale.
std::vector<PoseOffset> draw_offsets(const RobustnessConfig& config);

/// Rotates `pose` by the offset about `center`, then translates it.
RigidPose perturb(const RigidPose& pose, const Vec3& center, const PoseOffset& offset);

/// Mean contact position. Throws InputError for an empty list.
Vec3 contact_center(std::span<const Contact> contacts);

struct RobustnessReport {
  std::int64_t grasp_id = -1;
  int samples = 0;
  int successes = 0;
  int initial_collision = 0;
  int no_contacts = 0;
  int not_force_closure = 0;
  double score = 0.0;  ///< successes / samples

  bool operator==(const RobustnessReport&) const = default;
};

/// Re-closes the hand at `samples` displaced poses and counts force-closure outcomes.
/// Throws InputError for a grasp without contacts.
RobustnessReport robustness_score(const Grasp& grasp, const Mesh& object, const HandModel& hand,
                                  const RobustnessConfig& config, std::int64_t grasp_id = -1);

struct BenchmarkObject {
  std::string name;
  Mesh mesh;
};

struct BenchmarkConfig {
  PlannerConfig planner;
  RobustnessConfig robustness;
  bool score_robustness = true;
  int max_scored_grasps = 0;  ///< per object and planner, evenly spaced; <= 0 scores all
};

/// Aggregate metrics of one planner over the object set.
struct BenchmarkRow {
  std::string planner;
  std::string hand;
  std::size_t objects = 0;
  std::size_t grasps = 0;     ///< valid grasps
  std::size_t validated = 0;  ///< hypotheses that reached finger closing
  std::size_t scored = 0;     ///< grasps with a robustness score
  double time_mean_ms = 0.0;  ///< per valid grasp
  double time_std_ms = 0.0;
  double force_closure_rate = 0.0;  ///< percent
  double robustness_mean = 0.0;     ///< percent
  double robustness_std = 0.0;      ///< percent
};

struct ObjectResult {
  std::string object;
  std::string planner;
  PlanDiagnostics diagnostics;
  std::vector<double> grasp_times_ms;
  std::vector<RobustnessReport> robustness;  ///< grasp_id indexes the planner's grasp list
  double skeleton_ms = 0.0;                  ///< skeleton planner only
};

struct SkippedObject {
  std::string object;
  std::string reason;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;  ///< skeleton, then baseline; empty for no objects
  std::vector<ObjectResult> objects;
  std::vector<SkippedObject> skipped;

  /// Robustness reports of one planner over all objects.
  [[nodiscard]] std::vector<RobustnessReport> robustness(std::string_view planner) const;
};

inline constexpr const char* kSkeletonPlanner = "skeleton";
inline constexpr const char* kBaselinePlanner = "baseline";

/// Runs both planners on every object. Objects that cannot be skeletonized are skipped
/// for both planners and listed in `skipped`.
BenchmarkReport run_benchmark(std::span<const BenchmarkObject> objects, const HandModel& hand,
                              const BenchmarkConfig& config);

/// Twenty 5% bins [0,5), ..., [90,95), [95,100]; counts per bin.
std::vector<std::size_t> robustness_histogram(std::span<const RobustnessReport> reports);

void write_summary_csv(const BenchmarkReport& report, std::ostream& out);
void write_objects_csv(const BenchmarkReport& report, std::ostream& out);
/// Columns bin_upper_pct, fraction.
void write_histogram_csv(std::span<const RobustnessReport> reports, std::ostream& out);
void write_skipped_csv(const BenchmarkReport& report, std::ostream& out);

}  // namespace skelgrasp
