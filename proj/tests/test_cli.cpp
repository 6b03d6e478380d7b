#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "carotid/metrics.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli_output.txt";
  const std::string cmd = std::string(CAROTID_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough that a one-epoch training run takes seconds.
const char* kTinyConfig = R"({
  "phantom": {"image_size": [64, 80], "mab_radius_range": [13, 16], "wall_thickness_range": [3, 5],
              "n_slices": 3, "shadow_probability": 0.0},
  "net": {"input_size": [32, 32], "depth": 2, "base_channels": 4},
  "train": {"epochs": 2, "batch_size": 4, "reslice_spacing_mm": 0.5},
  "cohort": {"n_volumes": 10, "seed": 3}
})";

}  // namespace

TEST_CASE("help for every subcommand exits 0") {
  fixtures::TempDir tmp("cli_help");
  CHECK(run("--help", tmp.path()).code == 0);
  for (const char* sub : {"phantom", "train", "matrix", "segment", "evaluate", "stats", "plot", "config"}) {
    CAPTURE(sub);
    const auto r = run(std::string(sub) + " --help", tmp.path());
    CHECK(r.code == 0);
    CHECK(r.output.find("Usage") != std::string::npos);
  }
}

TEST_CASE("usage and configuration errors exit 2") {
  fixtures::TempDir tmp("cli_usage");
  CHECK(run("", tmp.path()).code == 2);
  CHECK(run("frobnicate", tmp.path()).code == 2);
  CHECK(run("segment --volume x", tmp.path()).code == 2);
  CHECK(run("phantom -c " + (tmp.path() / "missing.json").string(), tmp.path()).code == 2);
  write_file(tmp.path() / "bad.json", R"({"phantom": {"speckle": 0.3}})");
  const auto r = run("config dump -c " + (tmp.path() / "bad.json").string(), tmp.path());
  CHECK(r.code == 2);
  CHECK(r.output.find("phantom.speckle") != std::string::npos);
  CHECK(run("stats", tmp.path()).code == 2);
}

TEST_CASE("config dump writes a loadable document") {
  fixtures::TempDir tmp("cli_cfg");
  write_file(tmp.path() / "c.json", kTinyConfig);
  const fs::path dumped = tmp.path() / "dumped.json";
  REQUIRE(run("config dump -c " + (tmp.path() / "c.json").string() + " -o " + dumped.string(), tmp.path()).code == 0);
  CHECK(slurp(dumped).find("\"base_channels\": 4") != std::string::npos);
  CHECK(run("config dump -c " + dumped.string(), tmp.path()).code == 0);
}

TEST_CASE("stats reproduces the Bland-Altman fixture; plot writes SVG") {
  fixtures::TempDir tmp("cli_stats");
  const fs::path csv = tmp.path() / "vwv.csv";
  write_file(csv, "volume,manual,auto\nv1,2,1\nv2,2,2\nv3,4,3\n");
  const auto r = run("stats --csv " + csv.string() + " --a manual --b auto", tmp.path());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("0.6667") != std::string::npos);
  CHECK(r.output.find("-0.4649") != std::string::npos);
  CHECK(r.output.find("1.7983") != std::string::npos);

  for (const char* kind : {"correlation", "bland-altman"}) {
    const fs::path svg = tmp.path() / (std::string(kind) + ".svg");
    CHECK(run(std::string("plot --kind ") + kind + " --csv " + csv.string() + " --a manual --b auto -o " +
                  svg.string(), tmp.path()).code == 0);
    CHECK(slurp(svg).find("<svg") != std::string::npos);
  }
  CHECK(run("plot --kind pie --csv " + csv.string() + " -o x.svg", tmp.path()).code == 2);
  // A missing input file is rejected while parsing arguments.
  CHECK(run("stats --csv " + (tmp.path() / "none.csv").string() + " --a a --b b", tmp.path()).code == 2);
  // A readable file without the requested columns fails at run time.
  CHECK(run("stats --csv " + csv.string() + " --a manual --b other", tmp.path()).code == 1);
}

TEST_CASE("phantom, train, segment and evaluate end to end") {
  fixtures::TempDir tmp("cli_e2e");
  const fs::path cfg = tmp.path() / "c.json";
  write_file(cfg, kTinyConfig);
  const std::string c = " -c " + cfg.string();
  const fs::path cohort = tmp.path() / "cohort";

  REQUIRE(run("phantom" + c + " -o " + cohort.string(), tmp.path()).code == 0);
  REQUIRE(fs::exists(cohort / "cohort.json"));

  // Self-comparison of the ground truth scores DSC 1 and zero distance.
  const fs::path labels = cohort / "vol_000" / "label";
  const fs::path self_csv = tmp.path() / "self.csv";
  CHECK(run("evaluate --pred " + labels.string() + " --labels " + labels.string() + " -o " + self_csv.string(),
            tmp.path()).code == 2);  // no result.json and no --spacing
  const auto ev = run("evaluate --pred " + labels.string() + " --labels " + labels.string() + " -o " +
                          self_csv.string() + " --spacing 0.1 0.1",
                      tmp.path());
  REQUIRE(ev.code == 0);
  for (const auto& rec : carotid::read_eval_csv(self_csv)) {
    CHECK(rec.dsc == 1.0);
    CHECK(rec.mad == doctest::Approx(0.0).epsilon(1e-9));
  }

  const fs::path run_dir = tmp.path() / "run";
  const auto tr = run("train" + c + " --cohort " + cohort.string() + " -o " + run_dir.string() + " --mode TDL",
                      tmp.path());
  REQUIRE_MESSAGE(tr.code == 0, tr.output);
  CHECK(fs::exists(run_dir / "checkpoint"));
  CHECK(fs::exists(run_dir / "train_log.csv"));
  CHECK(run("plot --kind loss --csv " + (run_dir / "train_log.csv").string() + " -o " +
                (tmp.path() / "loss.svg").string(), tmp.path()).code == 0);

  const fs::path image = cohort / "vol_001" / "image";
  const fs::path pred = tmp.path() / "pred";
  const auto seg = run("segment" + c + " --checkpoint " + (run_dir / "checkpoint").string() + " --volume " +
                           image.string() + " -o " + pred.string() + " --tta",
                       tmp.path());
  REQUIRE_MESSAGE(seg.code == 0, seg.output);
  CHECK(fs::exists(pred / "result.json"));
  const auto ev2 = run("evaluate --pred " + pred.string() + " --labels " + (cohort / "vol_001" / "label").string() +
                           " -o " + (tmp.path() / "m.csv").string(),
                       tmp.path());
  CHECK(ev2.code == 0);
  CHECK(carotid::read_eval_csv(tmp.path() / "m.csv").size() == 6);

  // The phantoms carry no ROI boxes, so ICA segmentation is a runtime error.
  const auto ica = run("segment" + c + " --checkpoint " + (run_dir / "checkpoint").string() + " --volume " +
                           image.string() + " -o " + (tmp.path() / "ica").string() + " --artery ica",
                       tmp.path());
  CHECK(ica.code == 1);
  CHECK(ica.output.find("roi_first") != std::string::npos);
}
