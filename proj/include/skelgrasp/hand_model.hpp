#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelgrasp/mesh.hpp"
#include "skelgrasp/queries.hpp"

namespace skelgrasp {

/// Hand config schema version understood by load_hand.
inline constexpr int kHandSchemaVersion = 1;
/// Environment variable holding extra directories searched for hand configs.
inline constexpr const char* kHandPathEnv = "SKELGRASP_HAND_PATH";

struct Link {
  std::string name;
  Mesh mesh;  ///< in the link frame
};

enum class JointType { Revolute, Prismatic };

/// The child frame is origin * rotation(axis, q) (revolute, q in rad) or
/// origin * translation(q * axis) (prismatic, q in mm) in the parent frame.
struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  int parent = -1;  ///< link index
  int child = -1;   ///< link index
  Vec3 axis = Vec3::UnitZ();
  RigidPose origin;
  double lower = 0.0;
  double upper = 0.0;
};

struct Preshape {
  std::string name;
  std::vector<double> start;    ///< per joint, rad or mm
  std::vector<double> closing;  ///< per joint: +1, -1 or 0 (joint stays put)
  RigidPose gcp;                ///< grasp center point in the palm frame; +z is the approach axis
};

/// Per-hand bounds on local object sizes (mm) used by the grasping strategies.
struct StrategyThresholds {
  double pre1_min = 5.0, pre1_max = 60.0;
  double pre2_min = 5.0, pre2_max = 40.0;
  double pow1_min = 40.0;
  double pow2_min = 20.0, pow2_max = 80.0;
};

struct HandModel {
  std::string name;
  std::vector<Link> links;    ///< links[0] is the palm (tree root)
  std::vector<Joint> joints;  ///< parents before children
  std::vector<Preshape> preshapes;
  double fingerwidth = 0.0;  ///< mm
  double handwidth = 0.0;    ///< mm
  StrategyThresholds thresholds;

  [[nodiscard]] int link_index(std::string_view name) const;
  [[nodiscard]] int joint_index(std::string_view name) const;
  /// Throws InputError for an unknown preshape.
  [[nodiscard]] const Preshape& preshape(std::string_view name) const;
  /// Joints whose motion moves `link`.
  [[nodiscard]] std::vector<int> joints_moving(int link) const;
};

/// Parses a hand config (JSON). Relative mesh paths resolve against `base_dir`.
HandModel parse_hand(std::string_view text, const std::filesystem::path& base_dir = {});
HandModel load_hand(const std::filesystem::path& path);

/// Names accepted by builtin_hand.
std::vector<std::string> builtin_hand_names();
/// Config text of a built-in hand; empty if unknown.
std::string builtin_hand_config(std::string_view name);
HandModel builtin_hand(std::string_view name);

/// "builtin:<name>", a file path, or a file name found in one of the directories of
/// SKELGRASP_HAND_PATH (colon separated).
HandModel resolve_hand(std::string_view spec);

/// World pose of every link. Joint values outside their limits are clamped with a warning.
std::vector<RigidPose> forward_kinematics(const HandModel& hand, std::span<const double> q,
                                          const RigidPose& root = {});

/// True iff any link collides with the object (object given in world coordinates).
bool hand_collides(const HandModel& hand, std::span<const RigidPose> link_poses, const Mesh& object);

struct CloseOptions {
  double step = 0.5 * kPi / 180.0;  ///< revolute joints, rad per iteration
  double linear_step = 0.5;          ///< prismatic joints, mm per iteration
  int max_iterations = 400;
  int bisections = 10;  ///< refinements of a step in which a link first touches
  /// Gap (mm) at which a link counts as touching. Contacts are then collected within
  /// kContactTolerance, so a flat link settling on a faceted surface gets the whole patch.
  double touch_tolerance = 0.1;
};

struct CloseResult {
  bool initial_collision = false;  ///< hand collided before closing; nothing else is set
  std::vector<Contact> contacts;
  std::vector<double> joints;  ///< final joint values
  int iterations = 0;
};

/// Closes the preshape's joints from their start values in synchronous steps. A joint
/// freezes when a link it moves touches the object or it reaches its limit.
CloseResult close_fingers(const HandModel& hand, const RigidPose& pose, std::string_view preshape,
                          const Mesh& object, const CloseOptions& options = {});

enum class Strategy { PrecisionConnecting1a, PrecisionConnecting1b, PowerConnecting2a, PowerConnecting2b,
                      PrecisionEndpoint3, PowerEndpoint4 };
inline constexpr Strategy kAllStrategies[] = {Strategy::PrecisionConnecting1a, Strategy::PrecisionConnecting1b,
                                              Strategy::PowerConnecting2a,     Strategy::PowerConnecting2b,
                                              Strategy::PrecisionEndpoint3,    Strategy::PowerEndpoint4};
/// "1a", "1b", "2a", "2b", "3", "4".
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view id);
bool is_precision(Strategy s);
/// "precision" or "power".
std::string_view preshape_for(Strategy s);

struct GraspHypothesis {
  RigidPose pose;  ///< palm pose in the world
  std::string preshape;
  std::int32_t vertex = -1;  ///< source skeleton vertex, -1 for surface samples
  std::optional<Strategy> strategy;  ///< unset for surface samples
  Vec3 approach = Vec3::UnitZ();  ///< unit, direction the hand advances in
};

/// Palm pose that puts the preshape's GCP at `point` with its approach axis along
/// `approach` and its x axis along the component of `spread` perpendicular to `approach`.
RigidPose place_gcp(const HandModel& hand, std::string_view preshape, const Vec3& point, const Vec3& approach,
                    const Vec3& spread);

}  // namespace skelgrasp
