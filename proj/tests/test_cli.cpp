#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "enrest/blocks.hpp"
#include "enrest/cli.hpp"
#include "enrest/config.hpp"
#include "enrest/data.hpp"
#include "support.hpp"

using namespace enrest;
using namespace enrest::test;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"enrest"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_run(static_cast<int>(argv.size()), argv.data());
}

int run_cli_capture(const std::vector<std::string>& args, std::string& out) {
  std::ostringstream cap;
  std::streambuf* old = std::cout.rdbuf(cap.rdbuf());
  const int rc = run_cli(args);
  std::cout.rdbuf(old);
  out = cap.str();
  return rc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// a workspace with a handful of small clean images and a tiny run config
struct CliSandbox {
  fs::path root;

  explicit CliSandbox(const std::string& name) {
    root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    fs::create_directories(root / "targets");
    fs::create_directories(root / "val");
    for (int i = 0; i < 4; ++i)
      save_image((root / "targets" / ("t" + std::to_string(i) + ".png")).string(),
                 synth_clean_image(24, 24, 300 + static_cast<std::uint64_t>(i)));
    for (int i = 0; i < 2; ++i)
      save_image((root / "val" / ("v" + std::to_string(i) + ".png")).string(),
                 synth_clean_image(24, 24, 400 + static_cast<std::uint64_t>(i)));
  }
  ~CliSandbox() { fs::remove_all(root); }

  std::string config(const std::string& extra = "") {
    const fs::path p = root / "run.conf";
    write_text(p,
               "seed = 3\n"
               "model.n_rrg = 1\n"
               "model.n_mrb = 1\n"
               "model.channels = 8,12,16\n"
               "model.groups = 2\n"
               "train.total_iters = 5\n"
               "train.batch_size = 2\n"
               "train.patch_schedule = 0:16\n"
               "train.val_every = 5\n"
               "data.task = denoise\n"
               "data.noise_sigma = 25\n"
               "data.target_dir = " +
                   (root / "targets").string() + "\nval.target_dir = " + (root / "val").string() +
                   "\nout.dir = " + (root / "out").string() + "\n" + extra);
    return p.string();
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config text parses into typed keys") {
  KeyValues kv = parse_config_text(
      "# comment\n"
      "a.b = 12\n"
      "\n"
      "name = hello world \n"
      "rate=2.5e-3\n"
      "list = 1, 2,3\n");
  CHECK(kv.has("a.b"));
  CHECK(kv.integer("a.b", 0) == 12);
  CHECK(kv.str("name", "") == "hello world");
  CHECK(kv.number("rate", 0) == 2.5e-3);
  CHECK(kv.int_list("list", {}) == std::vector<int>{1, 2, 3});
  CHECK(kv.str("absent", "dflt") == "dflt");
  CHECK_NOTHROW(kv.finish());
}

TEST_CASE("config text rejects malformed lines") {
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigError);  // duplicate
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigError);    // no separator
  CHECK_THROWS_AS(parse_config_text("= 3\n"), ConfigError);           // empty key

  KeyValues kv = parse_config_text("n = abc\nf = 1.2.3\n");
  CHECK_THROWS_AS(kv.integer("n", 0), ConfigError);
  CHECK_THROWS_AS(kv.number("f", 0), ConfigError);
}

TEST_CASE("unconsumed keys fail by name") {
  KeyValues kv = parse_config_text("model.n_rgr = 4\n");  // misspelled
  try {
    kv.finish();
    FAIL("finish accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.n_rgr") != std::string::npos);
  }
}

TEST_CASE("patch schedules parse from their compact form") {
  std::vector<PatchStage> s = parse_patch_schedule("0:128,0.25:144,0.5:192,0.75:224");
  REQUIRE(s.size() == 4);
  CHECK(s[0].start_frac == 0.0);
  CHECK(s[0].size == 128);
  CHECK(s[3].start_frac == 0.75);
  CHECK(s[3].size == 224);
  CHECK_THROWS_AS(parse_patch_schedule(""), ConfigError);
  CHECK_THROWS_AS(parse_patch_schedule("0:128,bad"), ConfigError);
  CHECK_THROWS_AS(parse_patch_schedule("128"), ConfigError);
}

TEST_CASE("an empty config carries the documented defaults") {
  KeyValues kv = parse_config_text("data.target_dir = x\n");
  RunConfig rc = make_run_config(kv);
  CHECK(rc.model.n_rrg == 4);
  CHECK(rc.model.n_mrb == 2);
  CHECK(rc.model.channels == std::vector<int>{80, 120, 180});
  CHECK(rc.model.n_streams == 3);
  CHECK(rc.model.n_cols == 2);
  CHECK(rc.model.groups == 2);
  CHECK(rc.model.fusion == FusionMode::Skff);
  CHECK(rc.model.in_channels == 3);
  CHECK(rc.train.total_iters == 300000);
  CHECK(rc.train.batch_size == 64);
  CHECK(rc.train.lr_init == 2e-4);
  CHECK(rc.train.lr_min == 1e-6);
  CHECK(rc.train.beta1 == 0.9);
  CHECK(rc.train.beta2 == 0.999);
  CHECK(rc.train.patch_schedule.size() == 4);
  CHECK(rc.train.patch_schedule[1].size == 144);
  CHECK(rc.data.synth.task == Task::Denoise);
  CHECK(rc.data.synth.noise_sigma == 25.0);
  CHECK(rc.seed == 1);
  CHECK(rc.out_dir == "run");
}

TEST_CASE("the paired-view task defaults to six input channels") {
  KeyValues kv = parse_config_text("data.task = deblur_dp\ndata.target_dir = x\n");
  RunConfig rc = make_run_config(kv);
  CHECK(rc.model.in_channels == 6);
  CHECK(rc.model.out_channels == 3);

  KeyValues kv2 = parse_config_text(
      "data.task = deblur_dp\ndata.target_dir = x\nmodel.in_channels = 3\n");
  CHECK(make_run_config(kv2).model.in_channels == 3);
}

TEST_CASE("config-level validation still applies") {
  KeyValues kv = parse_config_text(
      "data.target_dir = x\nmodel.channels = 80,120\nmodel.n_streams = 3\n");
  CHECK_THROWS_AS(make_run_config(kv), ConfigError);  // 2 channels, 3 streams

  KeyValues kv2 = parse_config_text("data.target_dir = x\ntrain.patch_schedule = 0:33\n");
  CHECK_THROWS_AS(make_run_config(kv2), ConfigError);  // 33 not a multiple of 4
}

TEST_CASE("usage errors exit with one") {
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"launder"}) == 1);
  CHECK(run_cli({"train"}) == 1);                           // config path required
  CHECK(run_cli({"train", "/definitely/absent.conf"}) == 1);
  CHECK(run_cli({"infer", "ck.erck", "a.png"}) == 1);       // -o required
  std::string out;
  CHECK(run_cli_capture({"analyze", "/definitely/absent.conf"}, out) == 1);
}

TEST_CASE("runtime failures exit with two") {
  CliSandbox box("enrest_cli_rt");
  // checkpoint path that does not exist
  CHECK(run_cli({"infer", (box.root / "no.erck").string(),
                 (box.root / "targets" / "t0.png").string(), "-o",
                 (box.root / "o.png").string()}) == 2);

  // config pointing at a missing data directory
  const fs::path conf = box.root / "bad.conf";
  write_text(conf,
             "model.n_rrg = 1\nmodel.n_mrb = 1\nmodel.channels = 8,12,16\n"
             "train.total_iters = 1\ntrain.batch_size = 1\ntrain.patch_schedule = 0:16\n"
             "data.target_dir = " +
                 (box.root / "nowhere").string() + "\nout.dir = " + (box.root / "o").string() +
                 "\n");
  CHECK(run_cli({"train", conf.string()}) == 2);
}

TEST_CASE("analyze prints the cost table for a config") {
  CliSandbox box("enrest_cli_an");
  std::string out;
  CHECK(run_cli_capture({"analyze", box.config(), "--size", "32x32"}, out) == 0);
  CHECK(out.find("input 32x32") != std::string::npos);
  CHECK(out.find("params 7791") != std::string::npos);
  CHECK(out.find("conv_applications 64") != std::string::npos);

  CHECK(run_cli_capture({"analyze", box.config(), "--size", "banana"}, out) == 1);
  CHECK(run_cli_capture({"analyze", box.config(), "--size", "33x32"}, out) == 2);  // not /4
}

TEST_CASE("train writes its artifacts and honors the seed flag") {
  CliSandbox box("enrest_cli_tr");
  std::string out;
  REQUIRE(run_cli_capture({"train", box.config()}, out) == 0);
  CHECK(fs::exists(box.root / "out" / "checkpoint.erck"));
  CHECK(fs::exists(box.root / "out" / "metrics.tsv"));
  CHECK(fs::exists(box.root / "out" / "state.erst"));

  Model m = load_checkpoint_model((box.root / "out" / "checkpoint.erck").string());
  CHECK(m.cfg.n_rrg == 1);
  CHECK(m.ps.total_elements() == 7791);

  // same seed reproduces the run byte for byte, another seed does not
  REQUIRE(run_cli_capture({"train", box.config(), "--out", (box.root / "o2").string()}, out) == 0);
  CHECK(slurp((box.root / "out" / "checkpoint.erck").string()) ==
        slurp((box.root / "o2" / "checkpoint.erck").string()));
  REQUIRE(run_cli_capture({"--seed", "9", "train", box.config(), "--out",
                           (box.root / "o3").string()},
                          out) == 0);
  CHECK(slurp((box.root / "out" / "checkpoint.erck").string()) !=
        slurp((box.root / "o3" / "checkpoint.erck").string()));
}

TEST_CASE("sequential mode reproduces parallel training bitwise") {
  CliSandbox box("enrest_cli_seq");
  std::string out;
  REQUIRE(run_cli_capture({"train", box.config(), "--out", (box.root / "par").string()}, out) ==
          0);
  REQUIRE(run_cli_capture(
              {"--sequential", "train", box.config(), "--out", (box.root / "seq").string()},
              out) == 0);
  CHECK(slurp((box.root / "par" / "checkpoint.erck").string()) ==
        slurp((box.root / "seq" / "checkpoint.erck").string()));
  CHECK(slurp((box.root / "par" / "metrics.tsv").string()) ==
        slurp((box.root / "seq" / "metrics.tsv").string()));
}

TEST_CASE("a zero checkpoint infers the identity to the pixel") {
  CliSandbox box("enrest_cli_inf");
  ModelConfig cfg;
  cfg.n_rrg = 1;
  cfg.n_mrb = 1;
  cfg.channels = {8, 12, 16};
  cfg.groups = 2;
  Model m = build_model(cfg);
  zero_params(m);
  const std::string ck = (box.root / "zero.erck").string();
  save_checkpoint(m, ck);

  const std::string in = (box.root / "targets" / "t0.png").string();
  const std::string outp = (box.root / "restored.png").string();
  CHECK(run_cli({"infer", ck, in, "-o", outp}) == 0);
  CHECK(slurp(in) == slurp(outp));  // identity at byte level after requantization

  // channel mismatch between checkpoint and inputs is a usage error
  CHECK(run_cli({"infer", ck, in, in, "-o", outp}) == 1);
}

TEST_CASE("eval tabulates per-image metrics and their mean") {
  CliSandbox box("enrest_cli_ev");
  ModelConfig cfg;
  cfg.n_rrg = 1;
  cfg.n_mrb = 1;
  cfg.channels = {8, 12, 16};
  cfg.groups = 2;
  Model m = build_model(cfg);
  zero_params(m);
  const std::string ck = (box.root / "zero.erck").string();
  save_checkpoint(m, ck);

  std::string out;
  REQUIRE(run_cli_capture({"eval", ck, box.config()}, out) == 0);
  CHECK(out.find("# stem\tpsnr\tssim\tmae") != std::string::npos);
  CHECK(out.find("t0\t") != std::string::npos);
  CHECK(out.find("t3\t") != std::string::npos);
  CHECK(out.find("mean\t") != std::string::npos);
  // stdout carries the table followed by a "table: <path>" pointer line
  const std::string table = slurp((box.root / "out" / "eval.tsv").string());
  CHECK(out.rfind(table, 0) == 0);

  // identity model on noisy inputs: psnr column sits near the noisy baseline
  std::istringstream lines(table);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cols(line);
    std::string stem;
    double p, s, e;
    REQUIRE((cols >> stem >> p >> s >> e));
    CHECK(p > 15.0);
    CHECK(p < 30.0);
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
    CHECK(e >= 0.0);
    ++rows;
  }
  CHECK(rows == 5);  // four images and the mean
}

}  // TEST_SUITE
