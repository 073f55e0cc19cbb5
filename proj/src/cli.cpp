#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "enrest/analysis.hpp"
#include "enrest/blocks.hpp"
#include "enrest/cli.hpp"
#include "enrest/config.hpp"
#include "enrest/data.hpp"
#include "enrest/error.hpp"
#include "enrest/parallel.hpp"
#include "enrest/train.hpp"

namespace enrest {

namespace {

struct GlobalOpts {
  bool sequential = false;
  bool f64 = false;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

// dataset synthesis gets its own stream so it never shifts under the
// training loop's draws
Rng data_rng(std::uint64_t seed) { return Rng(seed ^ 0x9e3779b97f4a7c15ull); }

Tensor clamp01(const Tensor& t) {
  Tensor out = Tensor::zeros(t.shape(), t.dtype());
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    double v = t.at(i);
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    out.set(i, v);
  }
  return out;
}

Tensor restore(const Model& m, const Tensor& in) {
  const std::int64_t h = in.dim(2), w = in.dim(3);
  Tensor out = model_forward(m, pad_to_multiple(in, m.cfg.required_multiple()));
  return clamp01(crop_to(out, h, w));
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              const GlobalOpts& g) {
  RunConfig rc = load_run_config(config_path);
  if (g.has_seed) {
    rc.seed = g.seed;
    rc.train.seed = g.seed;
  }
  if (!out_override.empty()) rc.out_dir = out_override;
  if (rc.data.target_dir.empty()) throw ConfigError("data.target_dir is not set");
  const DType dt = g.f64 ? DType::F64 : DType::F32;
  rc.data.dt = dt;
  rc.val.dt = dt;

  Rng drng = data_rng(rc.seed);
  const Dataset train_ds = load_dataset(rc.data, drng);
  Dataset val_ds;
  if (!rc.val.target_dir.empty()) val_ds = load_dataset(rc.val, drng);

  std::filesystem::create_directories(rc.out_dir);
  TrainPaths paths;
  paths.checkpoint = rc.out_dir + "/checkpoint.erck";
  paths.metrics_log = rc.out_dir + "/metrics.tsv";
  paths.state = rc.out_dir + "/state.erst";

  const TrainRun run = train_loop(rc.model, rc.train, train_ds, val_ds, paths, dt);
  std::cout << "trained " << run.iters << " iterations, final loss " << run.final_loss << "\n";
  if (!val_ds.pairs.empty())
    std::cout << "validation psnr " << run.val_psnr << " dB (inputs " << run.noisy_psnr
              << " dB)\n";
  std::cout << "checkpoint: " << paths.checkpoint << "\n";
  std::cout << "metrics:    " << paths.metrics_log << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::vector<std::string>& inputs,
              const std::string& output, const GlobalOpts& g) {
  const DType dt = g.f64 ? DType::F64 : DType::F32;
  const Model m = load_checkpoint_model(checkpoint, dt);
  Tensor in = inputs.size() == 1
                  ? load_image(inputs[0], dt)
                  : dual_pixel_concat(load_image(inputs[0], dt), load_image(inputs[1], dt));
  if (in.dim(1) != m.cfg.in_channels)
    throw ConfigError("checkpoint expects " + std::to_string(m.cfg.in_channels) +
                      " input channels, got " + std::to_string(in.dim(1)) +
                      (inputs.size() == 1 ? " (pass two images for a paired-view model)" : ""));
  save_image(output, restore(m, in));
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& out_override, const GlobalOpts& g) {
  RunConfig rc = load_run_config(config_path);
  if (g.has_seed) rc.seed = g.seed;
  if (!out_override.empty()) rc.out_dir = out_override;
  if (rc.data.target_dir.empty()) throw ConfigError("data.target_dir is not set");
  const DType dt = g.f64 ? DType::F64 : DType::F32;
  rc.data.dt = dt;

  Rng drng = data_rng(rc.seed);
  const Dataset ds = load_dataset(rc.data, drng);
  const Model m = load_checkpoint_model(checkpoint, dt);
  if (!ds.pairs.empty() && ds.pairs[0].input.dim(1) != m.cfg.in_channels)
    throw ConfigError("dataset inputs have " + std::to_string(ds.pairs[0].input.dim(1)) +
                      " channels, checkpoint expects " + std::to_string(m.cfg.in_channels));

  std::ostringstream table;
  table << "# stem\tpsnr\tssim\tmae\n";
  double sp = 0.0, ss = 0.0, sm = 0.0;
  char buf[160];
  for (const ImagePair& p : ds.pairs) {
    const Tensor out = restore(m, p.input);
    const double pv = psnr(out, p.target, 1.0);
    const double sv = ssim(out, p.target);
    const double mv = mae(out, p.target);
    sp += pv;
    ss += sv;
    sm += mv;
    std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\n", p.stem.c_str(), pv, sv, mv);
    table << buf;
  }
  const double n = static_cast<double>(ds.pairs.size());
  std::snprintf(buf, sizeof buf, "mean\t%.6f\t%.6f\t%.6f\n", sp / n, ss / n, sm / n);
  table << buf;

  std::cout << table.str();
  std::filesystem::create_directories(rc.out_dir);
  const std::string table_path = rc.out_dir + "/eval.tsv";
  std::ofstream f(table_path);
  if (!f) throw IOError("cannot open " + table_path + " for writing");
  f << table.str();
  f.flush();
  if (!f) throw IOError("write failed: " + table_path);
  std::cout << "table: " << table_path << "\n";
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& size_str,
                const GlobalOpts&) {
  const RunConfig rc = load_run_config(config_path);
  const std::size_t x = size_str.find('x');
  std::int64_t h = 0, w = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t used = 0;
    h = std::stoll(size_str.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("junk");
    w = std::stoll(size_str.substr(x + 1), &used);
    if (used != size_str.size() - x - 1) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw ConfigError("invalid size '" + size_str + "' (expected HxW, e.g. 256x256)");
  }
  if (h < 1 || w < 1) throw ConfigError("invalid size '" + size_str + "'");
  const Model m = build_model(rc.model, DType::F32);
  print_cost_report(std::cout, count_costs(m, h, w));
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"multi-scale residual image restoration toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_flag("--sequential", g.sequential, "disable parallel kernels for bit-exact runs");
  app.add_flag("--f64", g.f64, "run everything in 64-bit precision");
  CLI::Option* seed_opt = app.add_option("--seed", g.seed, "override the config seed");

  std::string config_path, out_override, output, checkpoint, size_str = "256x256";
  std::vector<std::string> inputs;

  CLI::App* t = app.add_subcommand("train", "train a model from a config file");
  t->add_option("config", config_path, "run config file")->required();
  t->add_option("--out", out_override, "output directory override");

  CLI::App* inf = app.add_subcommand("infer", "restore one image with a checkpoint");
  inf->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  inf->add_option("input", inputs, "input image (two paths for paired views)")
      ->required()
      ->expected(1, 2);
  inf->add_option("-o,--output", output, "output image path")->required();

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint over a dataset");
  ev->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("config", config_path, "run config naming the dataset")->required();
  ev->add_option("--out", out_override, "output directory override");

  CLI::App* an = app.add_subcommand("analyze", "parameter and flop accounting");
  an->add_option("config", config_path, "run config file")->required();
  an->add_option("--size", size_str, "input extent as HxW (default 256x256)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  g.has_seed = seed_opt->count() > 0;
  par::set_enabled(!g.sequential);

  try {
    if (t->parsed()) return cmd_train(config_path, out_override, g);
    if (inf->parsed()) return cmd_infer(checkpoint, inputs, output, g);
    if (ev->parsed()) return cmd_eval(checkpoint, config_path, out_override, g);
    if (an->parsed()) return cmd_analyze(config_path, size_str, g);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace enrest
