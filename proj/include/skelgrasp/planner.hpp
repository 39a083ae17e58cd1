#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skelgrasp/grasp_quality.hpp"
#include "skelgrasp/hand_model.hpp"
#include "skelgrasp/local_shape.hpp"
#include "skelgrasp/skeleton.hpp"

namespace skelgrasp {

/// Grasp output schema version written by grasps_to_json.
inline constexpr int kGraspSchemaVersion = 1;

struct PlannerConfig {
  double vertex_distance = 0.0;  ///< d, mm; <= 0 means fingerwidth / 2
  double timeout = 30.0;         ///< s; <= 0 plans nothing
  int samples_round_endpoint = 8;
  int samples_round_connecting = 16;
  double retreat_step = 2.0;   ///< mm
  double retreat_max = 150.0;  ///< mm
  double max_curvature = kDefaultMaxCurvature;
  double round_ratio = kDefaultRoundRatio;
  ThicknessMode thickness = ThicknessMode::DerivedLength;
  double mu = kDefaultFriction;
  int cone_edges = kDefaultConeEdges;
  int baseline_samples = 200;  ///< surface samples drawn by plan_baseline
  std::uint64_t seed = 0;
  int threads = 0;             ///< <= 0: all hardware threads
  bool deterministic = false;  ///< report zero timings so output is byte-stable
  CloseOptions closing;
};

/// Throws InputError when a field is out of range.
void validate(const PlannerConfig& config);

struct Grasp : GraspHypothesis {
  std::vector<Contact> contacts;
  bool force_closure = false;
  double epsilon = 0.0;
  double time_ms = 0.0;  ///< compute time attributed to this grasp (see plan)
};

/// Emits every endpoint and branching vertex (by index), then walks each segment in
/// order emitting connecting vertices at least `d` of arc length after the previous
/// emitted vertex of that segment.
class SkeletonCursor {
 public:
  SkeletonCursor(const Skeleton& skeleton, double d);
  /// Next vertex, or empty when exhausted.
  std::optional<std::int32_t> next();
  [[nodiscard]] const std::vector<std::int32_t>& order() const { return order_; }

 private:
  std::vector<std::int32_t> order_;
  std::size_t pos_ = 0;
};

/// Whether a strategy applies at a vertex. `interval` must come from the strategy's
/// length budget (see interval_length).
bool evaluate_strategy(Strategy strategy, VertexKind kind, const GraspingInterval& interval,
                       const LocalSurfaceShape& shape, const HandModel& hand,
                       ThicknessMode mode = ThicknessMode::DerivedLength);

/// Interval length budget: fingerwidth for precision strategies, handwidth / 2 for power.
double interval_length(Strategy strategy, const HandModel& hand);

/// Hand poses for an applicable strategy at a vertex with skeleton point `point`,
/// unit tangent `tangent` (outward at endpoints) and local shape `shape`.
std::vector<GraspHypothesis> generate_hypotheses(std::int32_t vertex, const Vec3& point, VertexKind kind,
                                                 const Vec3& tangent, Strategy strategy,
                                                 const LocalSurfaceShape& shape, const HandModel& hand,
                                                 const PlannerConfig& config);

/// Moves the hand (in its preshape start configuration) back along the approach until it
/// is collision-free; empty if that needs more than retreat_max.
std::optional<RigidPose> retreat_to_free(const GraspHypothesis& hypothesis, const HandModel& hand,
                                         const Mesh& object, const PlannerConfig& config);

enum class ValidationOutcome { Valid, RetreatFailed, InitialCollision, NoContacts, NotForceClosure };
std::string_view to_string(ValidationOutcome outcome);

struct Validation {
  ValidationOutcome outcome = ValidationOutcome::RetreatFailed;
  Grasp grasp;  ///< pose after retreat; contacts and quality when closing ran
};

/// Retreat, close the fingers, evaluate force closure.
Validation validate_hypothesis(const GraspHypothesis& hypothesis, const HandModel& hand, const Mesh& object,
                               const PlannerConfig& config);

struct PlanDiagnostics {
  std::size_t vertices_visited = 0;
  std::size_t endpoint_vertices = 0;
  std::size_t connecting_vertices = 0;
  std::size_t branching_vertices = 0;
  std::size_t no_strategy_vertices = 0;  ///< visited vertices where no strategy applied
  std::size_t degenerate_shapes = 0;
  std::map<std::string, std::size_t> applicable;  ///< strategy id -> vertices
  std::size_t hypotheses = 0;
  std::size_t retreat_failures = 0;
  std::size_t validated = 0;  ///< hypotheses that reached finger closing
  std::size_t initial_collisions = 0;
  std::size_t no_contacts = 0;
  std::size_t not_force_closure = 0;
  std::size_t valid = 0;
  bool timed_out = false;
  double elapsed_ms = 0.0;

  /// valid / validated in percent, 0 when nothing was validated.
  [[nodiscard]] double force_closure_rate() const;
};

struct PlanResult {
  std::vector<Grasp> grasps;
  PlanDiagnostics diagnostics;
};

/// Skeleton-based planner. Hypotheses of one vertex are validated in parallel and merged
/// in generation order. A grasp's time_ms is the compute time of every hypothesis since
/// the previous valid grasp, itself included, plus the property computation of their vertices.
PlanResult plan(const Mesh& object, const Skeleton& skeleton, const HandModel& hand, const PlannerConfig& config);
/// Skeletonizes first (default contraction parameters).
PlanResult plan(const Mesh& object, const HandModel& hand, const PlannerConfig& config);

/// Surface-normal baseline: seeded area-weighted surface samples, power preshape,
/// approach along the inward normal with a random roll, same validation.
PlanResult plan_baseline(const Mesh& object, const HandModel& hand, const PlannerConfig& config);

struct GraspSetInfo {
  std::string object;
  std::string hand;
  std::string planner;
  std::uint64_t seed = 0;
};

std::string grasps_to_json(const std::vector<Grasp>& grasps, const GraspSetInfo& info,
                           const PlanDiagnostics* diagnostics = nullptr);
/// Throws InputError on malformed input.
std::vector<Grasp> grasps_from_json(std::string_view text, GraspSetInfo* info = nullptr);

struct Replay {
  bool collision_free = false;  ///< hand at the stored pose in its preshape start configuration
  bool force_closure = false;
  double epsilon = 0.0;
  std::size_t contacts = 0;
};

/// Re-runs closing and quality evaluation at a stored grasp pose.
Replay replay_grasp(const Grasp& grasp, const HandModel& hand, const Mesh& object, const PlannerConfig& config);

/// ASCII PLY: the object (grey) plus one green line per grasp from the GCP back along
/// the approach direction.
void write_approach_ply(const std::vector<Grasp>& grasps, const HandModel& hand, const Mesh& object,
                        std::ostream& out, double line_length = 60.0);

}  // namespace skelgrasp
