#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "skelgrasp/mesh.hpp"
#include "skelgrasp/primitives.hpp"

namespace fs = std::filesystem;
using namespace skelgrasp;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "skelgrasp_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(SKELGRASP_CLI) + " " + args + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path cylinder_off() {
  static const fs::path p = [] {
    const fs::path path = work_dir() / "cylinder.off";
    write_off(shapes::cylinder(10.0, 100.0, 48), path);
    return path;
  }();
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("plan").code, 1);
  EXPECT_EQ(run("--help > /dev/null").code, 0);
}

TEST(Cli, SkeletonizeWritesBothFiles) {
  const fs::path skel = work_dir() / "cyl.skel", ply = work_dir() / "cyl_seg.ply";
  const auto r = run("skeletonize " + q(cylinder_off()) + " -o " + q(skel) + " --ply " + q(ply));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(skel));
  EXPECT_EQ(read(ply).rfind("ply\n", 0), 0u);
  const auto seg = run("segment " + q(cylinder_off()) + " --skeleton " + q(skel) + " -o " +
                       q(work_dir() / "cyl.seg"));
  EXPECT_EQ(seg.code, 0) << seg.err;
  EXPECT_FALSE(read(work_dir() / "cyl.seg").empty());
}

TEST(Cli, MissingInputLeavesNoOutput) {
  const fs::path skel = work_dir() / "missing.skel", ply = work_dir() / "missing.ply";
  const auto r = run("skeletonize " + q(work_dir() / "nope.off") + " -o " + q(skel) + " --ply " + q(ply));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(skel));
  EXPECT_FALSE(fs::exists(ply));
  for (const auto& e : fs::directory_iterator(work_dir()))
    EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
}

TEST(Cli, OpenMeshNamesEdges) {
  const fs::path open = work_dir() / "open.off";
  std::ofstream(open) << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  const fs::path skel = work_dir() / "open.skel";
  const auto r = run("skeletonize " + q(open) + " -o " + q(skel));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("0-1"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(skel));
}

TEST(Cli, PlanDeterministicAndBaseline) {
  const fs::path a = work_dir() / "a.json", b = work_dir() / "b.json", overlay = work_dir() / "overlay.ply";
  const std::string args = " plan " + q(cylinder_off()) + " --seed 7";
  const std::string base = "--deterministic --threads 1" + args;
  ASSERT_EQ(run(base + " -o " + q(a) + " --overlay " + q(overlay)).code, 0);
  ASSERT_EQ(run("--deterministic --threads 2" + args + " -o " + q(b)).code, 0);
  EXPECT_EQ(read(a), read(b));
  const auto doc = nlohmann::json::parse(read(a));
  EXPECT_EQ(doc["planner"], "skeleton");
  EXPECT_GT(doc["grasps"].size(), 0u);
  EXPECT_TRUE(fs::exists(overlay));

  const fs::path c = work_dir() / "baseline.json";
  ASSERT_EQ(run(base + " --baseline --baseline-samples 30 -o " + q(c)).code, 0);
  const auto bdoc = nlohmann::json::parse(read(c));
  EXPECT_EQ(bdoc["planner"], "baseline");
  EXPECT_EQ(bdoc["schema_version"], doc["schema_version"]);

  const fs::path scores = work_dir() / "scores.csv", hist = work_dir() / "hist.csv";
  const auto rb = run("--threads 1 robustness " + q(cylinder_off()) + " --grasps " + q(c) + " -o " + q(scores) +
                      " --histogram " + q(hist) + " --samples 3");
  EXPECT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(read(hist).rfind("bin_upper_pct,fraction\n", 0), 0u);
}

TEST(Cli, TimeoutZeroIsEmptyAndSucceeds) {
  const fs::path out = work_dir() / "empty.json";
  const auto r = run("plan " + q(cylinder_off()) + " --timeout 0 -o " + q(out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(read(out))["grasps"].empty());
}

TEST(Cli, UnknownHandIsInputError) {
  const fs::path out = work_dir() / "nohand.json";
  EXPECT_EQ(run("plan " + q(cylinder_off()) + " --hand builtin:nope -o " + q(out)).code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, BenchmarkSkipsCorruptMesh) {
  const fs::path dir = work_dir() / "corpus", out = work_dir() / "bench";
  fs::create_directories(dir);
  fs::copy_file(cylinder_off(), dir / "cylinder.off", fs::copy_options::overwrite_existing);
  std::ofstream(dir / "corrupt.off") << "OFF\n8 12 0\n0 0\n";
  const auto r = run("--deterministic --threads 1 benchmark " + q(dir) + " -o " + q(out) +
                     " --no-robustness --timeout 20");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string summary = read(out / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);
  EXPECT_NE(read(out / "skipped.csv").find("corrupt"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "histogram_skeleton.csv"));
  EXPECT_TRUE(fs::exists(out / "histogram_baseline.csv"));
  EXPECT_TRUE(fs::exists(out / "objects.csv"));
}

TEST(Cli, FixturesAndJsonLog) {
  const fs::path dir = work_dir() / "fixtures";
  const auto r = run("--json-log fixtures " + q(dir));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"cylinder.off", "box.off", "y_tube.off", "dumbbell.off", "capsule.off"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  EXPECT_TRUE(fs::exists(dir / "hands" / "parallel_gripper.json"));
  const auto bad = run("--json-log skeletonize " + q(work_dir() / "nope.off") + " -o " + q(work_dir() / "x.skel"));
  EXPECT_EQ(bad.code, 2);
  const auto line = bad.err.substr(0, bad.err.find('\n'));
  EXPECT_TRUE(nlohmann::json::accept(line)) << line;
}
