#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "skelgrasp/errors.hpp"
#include "skelgrasp/evaluation.hpp"
#include "skelgrasp/log.hpp"
#include "skelgrasp/mesh.hpp"
#include "skelgrasp/planner.hpp"
#include "skelgrasp/primitives.hpp"
#include "skelgrasp/skeleton.hpp"

namespace fs = std::filesystem;
using namespace skelgrasp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

struct GlobalOptions {
  int threads = 0;
  bool json_log = false;
  bool verbose = false;
  bool deterministic = false;
  double scale = 1.0;
};

void install_log_sink(const GlobalOptions& g) {
  static std::mutex mutex;
  if (g.json_log) {
    set_log_sink([](LogLevel level, std::string_view message) {
      const nlohmann::json line = {{"level", to_string(level)}, {"message", message}};
      std::lock_guard lock(mutex);
      std::cerr << line.dump() << '\n';
    });
  } else {
    const bool verbose = g.verbose;
    set_log_sink([verbose](LogLevel level, std::string_view message) {
      if (level < LogLevel::Warning && !verbose) return;
      std::lock_guard lock(mutex);
      std::cerr << to_string(level) << ": " << message << '\n';
    });
  }
}

/// Output produced in memory and committed only after every step succeeded.
class PendingFiles {
 public:
  void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  /// Each file goes to a temporary sibling first and is renamed into place.
  void commit() const {
    std::vector<fs::path> temps;
    try {
      for (const auto& [path, content] : files_) {
        fs::path tmp = path;
        tmp += ".tmp" + std::to_string(::getpid());
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        out.close();
        if (!out) throw InputError("cannot write " + path.string());
      }
      for (std::size_t i = 0; i < files_.size(); ++i) fs::rename(temps[i], files_[i].first);
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

template <class F>
std::string to_text(F&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

Mesh load_object(const std::string& path, const GlobalOptions& g) {
  return load_watertight_mesh(path, g.scale);
}

PlannerConfig planner_config(const GlobalOptions& g) {
  PlannerConfig c;
  c.threads = g.threads;
  c.deterministic = g.deterministic;
  return c;
}

std::string format_score(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

// skeletonize

struct SkeletonizeArgs {
  std::string mesh;
  std::string out;
  std::string ply;
};

void run_skeletonize(const SkeletonizeArgs& a, const GlobalOptions& g) {
  const Mesh mesh = load_object(a.mesh, g);
  SkeletonizeStats stats;
  const Skeleton s = skeletonize(mesh, {}, &stats);
  PendingFiles files;
  files.add(a.out, to_text([&](std::ostream& o) { write_skeleton(s, o); }));
  if (!a.ply.empty()) files.add(a.ply, to_text([&](std::ostream& o) { write_partition_ply(s, mesh, o); }));
  files.commit();
  log_info("skeleton: " + std::to_string(s.size()) + " vertices, " + std::to_string(s.edges.size()) +
           " edges after " + std::to_string(stats.iterations) + " contraction iterations");
}

// segment

struct SegmentArgs {
  std::string mesh;
  std::string skeleton;
  std::string out;
  std::string ply;
};

void run_segment(const SegmentArgs& a, const GlobalOptions& g) {
  const Mesh mesh = load_object(a.mesh, g);
  Skeleton s;
  if (a.skeleton.empty()) {
    s = skeletonize(mesh);
  } else {
    std::ifstream in(a.skeleton);
    if (!in) throw InputError("cannot read " + a.skeleton);
    s = read_skeleton(in);
    if (s.associated_point_count() != mesh.vertex_count())
      throw InputError("skeleton " + a.skeleton + " does not belong to " + a.mesh);
  }
  const auto segments = segment_skeleton(s);
  PendingFiles files;
  const std::string text = to_text([&](std::ostream& o) { write_segments(s, segments, o); });
  if (a.out.empty()) {
    std::cout << text;
  } else {
    files.add(a.out, text);
  }
  if (!a.ply.empty()) files.add(a.ply, to_text([&](std::ostream& o) { write_partition_ply(s, mesh, o); }));
  files.commit();
}

// plan

struct PlanArgs {
  std::string mesh;
  std::string hand = "builtin:parallel_gripper";
  std::string out;
  std::string overlay;
  std::uint64_t seed = 0;
  double timeout = 30.0;
  double vertex_distance = 0.0;
  int baseline_samples = 200;
  bool baseline = false;
};

void run_plan(const PlanArgs& a, const GlobalOptions& g) {
  const Mesh mesh = load_object(a.mesh, g);
  const HandModel hand = resolve_hand(a.hand);
  PlannerConfig c = planner_config(g);
  c.seed = a.seed;
  c.timeout = a.timeout;
  c.vertex_distance = a.vertex_distance;
  c.baseline_samples = a.baseline_samples;
  validate(c);

  const PlanResult r = a.baseline ? plan_baseline(mesh, hand, c) : plan(mesh, hand, c);
  const GraspSetInfo info{fs::path(a.mesh).stem().string(), hand.name,
                          a.baseline ? kBaselinePlanner : kSkeletonPlanner, a.seed};
  PendingFiles files;
  files.add(a.out, grasps_to_json(r.grasps, info, &r.diagnostics));
  if (!a.overlay.empty())
    files.add(a.overlay, to_text([&](std::ostream& o) { write_approach_ply(r.grasps, hand, mesh, o); }));
  files.commit();
  const auto& d = r.diagnostics;
  std::cout << r.grasps.size() << " grasps from " << d.hypotheses << " hypotheses (" << d.validated
            << " validated, force-closure rate " << format_score(d.force_closure_rate()) << "%)"
            << (d.timed_out ? ", timed out" : "") << '\n';
}

// robustness

struct RobustnessArgs {
  std::string mesh;
  std::string hand = "builtin:parallel_gripper";
  std::string grasps;
  std::string out;
  std::string histogram;
  RobustnessConfig config;
  bool magnitude = false;
};

std::string robustness_csv(const std::vector<RobustnessReport>& reports) {
  std::ostringstream o;
  o << "grasp_id,samples,successes,initial_collision,no_contacts,not_force_closure,score\n";
  o << std::fixed << std::setprecision(4);
  for (const auto& r : reports)
    o << r.grasp_id << ',' << r.samples << ',' << r.successes << ',' << r.initial_collision << ','
      << r.no_contacts << ',' << r.not_force_closure << ',' << r.score << '\n';
  return o.str();
}

void run_robustness(RobustnessArgs a, const GlobalOptions& g) {
  const Mesh mesh = load_object(a.mesh, g);
  const HandModel hand = resolve_hand(a.hand);
  std::ifstream in(a.grasps);
  if (!in) throw InputError("cannot read " + a.grasps);
  std::stringstream text;
  text << in.rdbuf();
  const auto grasps = grasps_from_json(text.str());
  a.config.per_axis = !a.magnitude;
  a.config.threads = g.threads;
  validate(a.config);

  std::vector<RobustnessReport> reports;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    reports.push_back(robustness_score(grasps[i], mesh, hand, a.config, static_cast<std::int64_t>(i)));
    log_info("grasp " + std::to_string(i) + ": r = " + format_score(reports.back().score));
  }
  PendingFiles files;
  files.add(a.out, robustness_csv(reports));
  if (!a.histogram.empty())
    files.add(a.histogram, to_text([&](std::ostream& o) { write_histogram_csv(reports, o); }));
  files.commit();
  double mean = 0.0;
  for (const auto& r : reports) mean += r.score;
  if (!reports.empty()) mean /= static_cast<double>(reports.size());
  std::cout << reports.size() << " grasps scored, mean r = " << format_score(100.0 * mean) << "%\n";
}

// benchmark

struct BenchmarkArgs {
  std::string dir;
  std::string hand = "builtin:parallel_gripper";
  std::string out;
  std::uint64_t seed = 0;
  double timeout = 30.0;
  int samples = 100;
  double sigma_pos = 10.0;
  double sigma_rot = 5.0;
  int max_scored = 10;
  bool no_robustness = false;
  bool magnitude = false;
};

bool is_mesh_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".off" || ext == ".obj" || ext == ".stl";
}

void print_rows(const BenchmarkReport& report) {
  std::cout << std::left << std::setw(10) << "planner" << std::right << std::setw(9) << "objects" << std::setw(9)
            << "grasps" << std::setw(20) << "time/grasp ms" << std::setw(12) << "FC rate %" << std::setw(20)
            << "robustness %" << '\n';
  for (const auto& r : report.rows) {
    std::cout << std::left << std::setw(10) << r.planner << std::right << std::setw(9) << r.objects << std::setw(9)
              << r.grasps << std::setw(20)
              << (format_score(r.time_mean_ms) + " +- " + format_score(r.time_std_ms)) << std::setw(12)
              << format_score(r.force_closure_rate) << std::setw(20)
              << (format_score(r.robustness_mean) + " +- " + format_score(r.robustness_std)) << '\n';
  }
}

void run_benchmark_cmd(const BenchmarkArgs& a, const GlobalOptions& g) {
  if (!fs::is_directory(a.dir)) throw InputError("not a directory: " + a.dir);
  const HandModel hand = resolve_hand(a.hand);

  BenchmarkConfig c;
  c.planner = planner_config(g);
  c.planner.seed = a.seed;
  c.planner.timeout = a.timeout;
  c.robustness.samples = a.samples;
  c.robustness.sigma_pos = a.sigma_pos;
  c.robustness.sigma_rot = a.sigma_rot;
  c.robustness.seed = a.seed;
  c.robustness.per_axis = !a.magnitude;
  c.score_robustness = !a.no_robustness;
  c.max_scored_grasps = a.max_scored;

  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(a.dir))
    if (e.is_regular_file() && is_mesh_file(e.path())) paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());

  std::vector<BenchmarkObject> objects;
  std::vector<SkippedObject> unreadable;
  for (const auto& p : paths) {
    try {
      objects.push_back({p.stem().string(), load_object(p.string(), g)});
    } catch (const InputError& e) {
      log_warning("skipping " + p.filename().string() + ": " + e.what());
      unreadable.push_back({p.stem().string(), e.what()});
    }
  }

  BenchmarkReport report = run_benchmark(objects, hand, c);
  report.skipped.insert(report.skipped.begin(), unreadable.begin(), unreadable.end());

  const fs::path out(a.out);
  fs::create_directories(out);
  PendingFiles files;
  files.add(out / "summary.csv", to_text([&](std::ostream& o) { write_summary_csv(report, o); }));
  files.add(out / "objects.csv", to_text([&](std::ostream& o) { write_objects_csv(report, o); }));
  files.add(out / "skipped.csv", to_text([&](std::ostream& o) { write_skipped_csv(report, o); }));
  for (const char* planner : {kSkeletonPlanner, kBaselinePlanner}) {
    const auto scores = report.robustness(planner);
    files.add(out / ("histogram_" + std::string(planner) + ".csv"),
              to_text([&](std::ostream& o) { write_histogram_csv(scores, o); }));
  }
  files.commit();
  print_rows(report);
  if (!report.skipped.empty()) std::cout << report.skipped.size() << " object(s) skipped, see skipped.csv\n";
}

// fixtures

void run_fixtures(const std::string& dir) {
  const fs::path out(dir);
  fs::create_directories(out / "hands");
  PendingFiles files;
  for (const auto& [name, mesh] : shapes::fixture_corpus())
    files.add(out / (name + ".off"), to_text([&](std::ostream& o) { write_off(mesh, o); }));
  for (const auto& name : builtin_hand_names()) files.add(out / "hands" / (name + ".json"), builtin_hand_config(name));
  files.commit();
  std::cout << "fixtures written to " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton-based grasp planning"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--json-log", g.json_log, "Log as JSON lines on stderr");
  app.add_flag("-v,--verbose", g.verbose, "Log progress");
  app.add_flag("--deterministic", g.deterministic, "Report zero timings so outputs are byte-identical");
  app.add_option("--scale", g.scale, "Factor converting mesh units to millimeters")->check(CLI::PositiveNumber);

  std::function<void()> action;

  SkeletonizeArgs sk;
  auto* c_sk = app.add_subcommand("skeletonize", "Compute the curve skeleton of a mesh");
  c_sk->add_option("mesh", sk.mesh, "Closed mesh (OFF, OBJ or STL)")->required();
  c_sk->add_option("-o,--output", sk.out, "Skeleton file")->required();
  c_sk->add_option("--ply", sk.ply, "Mesh colored by vertex kind");
  c_sk->callback([&] { action = [&] { run_skeletonize(sk, g); }; });

  SegmentArgs sg;
  auto* c_sg = app.add_subcommand("segment", "Split the skeleton into segments");
  c_sg->add_option("mesh", sg.mesh, "Closed mesh")->required();
  c_sg->add_option("--skeleton", sg.skeleton, "Skeleton file (default: skeletonize the mesh)");
  c_sg->add_option("-o,--output", sg.out, "Segment list (default: stdout)");
  c_sg->add_option("--ply", sg.ply, "Mesh colored by vertex kind");
  c_sg->callback([&] { action = [&] { run_segment(sg, g); }; });

  PlanArgs pl;
  auto* c_pl = app.add_subcommand("plan", "Plan grasps for a mesh");
  c_pl->add_option("mesh", pl.mesh, "Closed mesh")->required();
  c_pl->add_option("--hand", pl.hand, "builtin:<name>, a hand JSON file, or a file on SKELGRASP_HAND_PATH")
      ->capture_default_str();
  c_pl->add_option("-o,--output", pl.out, "Grasp JSON")->required();
  c_pl->add_option("--overlay", pl.overlay, "PLY of the object with approach lines");
  c_pl->add_option("--seed", pl.seed, "Random seed")->capture_default_str();
  c_pl->add_option("--timeout", pl.timeout, "Planning budget in seconds (0 plans nothing)")->capture_default_str();
  c_pl->add_option("--vertex-distance", pl.vertex_distance, "Skeleton vertex spacing in mm (0: fingerwidth / 2)");
  c_pl->add_option("--baseline-samples", pl.baseline_samples, "Surface samples of the baseline planner")
      ->capture_default_str();
  c_pl->add_flag("--baseline", pl.baseline, "Use the surface-normal baseline planner");
  c_pl->callback([&] { action = [&] { run_plan(pl, g); }; });

  RobustnessArgs rb;
  auto* c_rb = app.add_subcommand("robustness", "Score planned grasps under pose noise");
  c_rb->add_option("mesh", rb.mesh, "Closed mesh")->required();
  c_rb->add_option("--grasps", rb.grasps, "Grasp JSON written by plan")->required();
  c_rb->add_option("--hand", rb.hand, "Hand used for planning")->capture_default_str();
  c_rb->add_option("-o,--output", rb.out, "Per-grasp CSV")->required();
  c_rb->add_option("--histogram", rb.histogram, "Histogram CSV (5% bins)");
  c_rb->add_option("--samples", rb.config.samples, "Perturbed poses per grasp")->capture_default_str();
  c_rb->add_option("--sigma-pos", rb.config.sigma_pos, "Position noise in mm")->capture_default_str();
  c_rb->add_option("--sigma-rot", rb.config.sigma_rot, "Rotation noise in degrees")->capture_default_str();
  c_rb->add_option("--seed", rb.config.seed, "Random seed")->capture_default_str();
  c_rb->add_flag("--magnitude-noise", rb.magnitude, "Position sigma on the offset length instead of per axis");
  c_rb->callback([&] { action = [&] { run_robustness(rb, g); }; });

  BenchmarkArgs bm;
  auto* c_bm = app.add_subcommand("benchmark", "Compare the skeleton planner with the baseline");
  c_bm->add_option("dir", bm.dir, "Directory of meshes")->required();
  c_bm->add_option("--hand", bm.hand, "Hand")->capture_default_str();
  c_bm->add_option("-o,--output", bm.out, "Output directory")->required();
  c_bm->add_option("--seed", bm.seed, "Random seed")->capture_default_str();
  c_bm->add_option("--timeout", bm.timeout, "Planning budget per object and planner in seconds")
      ->capture_default_str();
  c_bm->add_option("--robustness-samples", bm.samples, "Perturbed poses per grasp")->capture_default_str();
  c_bm->add_option("--sigma-pos", bm.sigma_pos, "Position noise in mm")->capture_default_str();
  c_bm->add_option("--sigma-rot", bm.sigma_rot, "Rotation noise in degrees")->capture_default_str();
  c_bm->add_option("--max-scored", bm.max_scored, "Grasps scored per object and planner (0: all)")
      ->capture_default_str();
  c_bm->add_flag("--no-robustness", bm.no_robustness, "Skip robustness scoring");
  c_bm->add_flag("--magnitude-noise", bm.magnitude, "Position sigma on the offset length instead of per axis");
  c_bm->callback([&] { action = [&] { run_benchmark_cmd(bm, g); }; });

  std::string fixture_dir;
  auto* c_fx = app.add_subcommand("fixtures", "Write the desk corpus meshes and built-in hand configs");
  c_fx->add_option("dir", fixture_dir, "Output directory")->required();
  c_fx->callback([&] { action = [&] { run_fixtures(fixture_dir); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  install_log_sink(g);
  try {
    action();
  } catch (const InputError& e) {
    log_message(LogLevel::Error, e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    log_message(LogLevel::Error, e.what());
    return kExitInternal;
  }
  return 0;
}
