#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "deformreg/config.hpp"
#include "deformreg/engine.hpp"
#include "deformreg/error.hpp"
#include "deformreg/eval.hpp"
#include "deformreg/io.hpp"
#include "deformreg/pyramid.hpp"
#include "deformreg/synth.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::cli {
namespace {

struct ImagePairPaths {
  std::string fixed, moving, out_field, out_warped, overlay;
};

void add_pair_options(CLI::App* cmd, ImagePairPaths& p) {
  cmd->add_option("--fixed", p.fixed, "Fixed image (P5 PGM)")->required();
  cmd->add_option("--moving", p.moving, "Moving image (P5 PGM)")->required();
  cmd->add_option("--out-field", p.out_field, "Output deformation field (.dff)")->required();
  cmd->add_option("--out-warped", p.out_warped, "Output warped moving image (PGM)")->required();
  cmd->add_option("--overlay", p.overlay, "Optional checkerboard of fixed and warped images (PGM)");
}

// Alternating tiles of the fixed and the warped image.
Image2D checkerboard(const Image2D& fixed, const Image2D& warped) {
  const int tile = std::max(4, std::min(fixed.height(), fixed.width()) / 8);
  Image2D out(fixed.height(), fixed.width());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.at(y, x) = ((y / tile + x / tile) % 2 == 0 ? fixed : warped).at(y, x);
  return out;
}

void write_pair_outputs(const ImagePairPaths& p, const Image2D& fixed, const DeformationField& field,
                        const Image2D& warped) {
  io::write_field(p.out_field, field);
  io::write_image(p.out_warped, warped);
  if (!p.overlay.empty()) io::write_image(p.overlay, checkerboard(fixed, warped));
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  const auto spec = config::load_synth_spec(spec_path);
  synth::generate_synthetic(spec, out_dir);
  out << "wrote " << spec.pair_count << " " << synth::family_name(spec.family) << " pairs to " << out_dir << '\n';
  return kSuccess;
}

int cmd_train(const std::string& config_path, std::string data_dir, std::string out_path, const std::string& resume,
              const std::string& history, std::ostream& out, std::ostream& err) {
  const auto cfg = config::load_run_config(config_path);
  if (data_dir.empty()) data_dir = cfg.paths.dataset;
  if (out_path.empty()) out_path = cfg.paths.checkpoint;
  if (data_dir.empty() || out_path.empty()) {
    throw ConfigError("train needs --data and --out (or paths.dataset / paths.checkpoint in the config)");
  }
  const auto data = load_dataset(data_dir);

  regnet::RegModel model;
  std::optional<engine::AdamState> adam;
  if (!resume.empty()) {
    auto loaded = regnet::load_model(resume);
    if (!(loaded.model.arch == cfg.arch)) throw ConfigError("--resume checkpoint architecture differs from the config");
    adam = engine::AdamState::from_blocks(loaded.extra, loaded.model.params);
    model = std::move(loaded.model);
  } else {
    model = regnet::init_model(cfg.arch, cfg.init_seed);
  }
  out << "training " << (cfg.train.mode == engine::TrainMode::SupervisedEPE ? "supervised" : "unsupervised")
      << " on " << data.size() << " pairs, " << model.parameter_count() << " parameters, " << cfg.train.epochs()
      << " epochs\n";
  auto result = engine::train(model, data, cfg.train, [&](const engine::EpochRecord& r) {
    out << "epoch " << std::setw(3) << r.epoch << "  lr " << r.lr << "  loss " << std::setprecision(6) << r.total
        << '\n';
  }, adam ? &*adam : nullptr);

  regnet::save_model(out_path, model, result.adam.to_blocks(model.params));
  std::string hist = history.empty() ? cfg.paths.output : history;
  if (!hist.empty()) engine::write_history_csv(hist, result.history);
  if (result.halted) {
    err << "deformreg: " << result.diagnostic << '\n';
    return kNumericalFailure;
  }
  out << "saved " << out_path << '\n';
  return kSuccess;
}

int cmd_register(const std::string& model_path, const ImagePairPaths& p, std::ostream& out) {
  const auto loaded = regnet::load_model(model_path);
  const auto fixed = io::read_image(p.fixed);
  const auto moving = io::read_image(p.moving);
  const auto r = engine::register_pair(loaded.model, fixed, moving);
  write_pair_outputs(p, fixed, r.field, r.warped);
  out << "registered in " << r.runtime_s << " s, max |u| " << r.field.max_magnitude() << " px\n";
  return kSuccess;
}

int cmd_optimize(const std::string& config_path, const ImagePairPaths& p, const std::string& fixed_mask_path,
                 const std::string& moving_mask_path, std::ostream& out) {
  engine::OptimizeConfig cfg;
  if (!config_path.empty()) cfg = config::load_run_config(config_path).optimize;
  const auto fixed = io::read_image(p.fixed);
  const auto moving = io::read_image(p.moving);
  const int scales = cfg.scale_count();
  const auto pf = pyramid::pad_to_pyramid(fixed, scales);
  const auto pm = pyramid::pad_to_pyramid(moving, scales);
  std::optional<SegMask> fm, mm;
  if (!fixed_mask_path.empty() && !moving_mask_path.empty()) {
    fm = pyramid::pad_mask(io::read_mask(fixed_mask_path), pf.crop);
    mm = pyramid::pad_mask(io::read_mask(moving_mask_path), pf.crop);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = engine::optimize_field(pf.image, pm.image, cfg, fm ? &*fm : nullptr, mm ? &*mm : nullptr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto warped = pyramid::crop(warp::bilinear_warp(pm.image, r.field), pf.crop);
  write_pair_outputs(p, fixed, pyramid::crop(r.field, pf.crop), warped);
  for (const auto& lv : r.levels) {
    out << "scale " << lv.scale << ": " << lv.iterations << " iterations, loss " << lv.start_loss << " -> "
        << lv.end_loss << '\n';
  }
  out << "optimized in " << secs << " s\n";
  return kSuccess;
}

struct EvalArgs {
  std::string field, fixed_mask, moving_mask, fixed_lm, moving_lm, report, pair_id = "pair";
  double runtime = 0.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto field = io::read_field(a.field);
  const io::ImageBounds bounds{field.height(), field.width()};
  std::optional<SegMask> fm, mm;
  std::optional<LandmarkSet> fl, ml;
  if (a.fixed_mask.empty() != a.moving_mask.empty()) throw ConfigError("give both --fixed-mask and --moving-mask");
  if (a.fixed_lm.empty() != a.moving_lm.empty()) throw ConfigError("give both --fixed-lm and --moving-lm");
  if (!a.fixed_mask.empty()) {
    fm = io::read_mask(a.fixed_mask);
    mm = io::read_mask(a.moving_mask);
  }
  if (!a.fixed_lm.empty()) {
    fl = io::read_landmarks(a.fixed_lm, bounds);
    ml = io::read_landmarks(a.moving_lm, bounds);
  }
  eval::PairAnnotations notes{fm ? &*fm : nullptr, mm ? &*mm : nullptr, fl ? &*fl : nullptr, ml ? &*ml : nullptr};
  const auto report = eval::evaluate_pair(a.pair_id, field, notes, a.runtime);
  if (a.report.empty()) {
    out << eval::metric_csv({report});
  } else {
    eval::write_metric_csv(a.report, {report});
    out << "wrote " << a.report << '\n';
  }
  return kSuccess;
}

int cmd_inspect(const std::string& field_path, const std::string& out_path, std::ostream& out) {
  const auto field = io::read_field(field_path);
  const auto rgb = io::colorize_field(field);
  std::ostringstream comment;
  comment << "deformreg field colour coding: hue = displacement direction (atan2(dy,dx), 0 = +x/red),\n"
          << "saturation = |u| / " << rgb.magnitude_scale << " px (98th-percentile magnitude), clamped to 1";
  io::write_ppm(out_path, rgb, comment.str());
  out << field.width() << "x" << field.height() << " field, max |u| " << field.max_magnitude()
      << " px, 98th percentile " << rgb.magnitude_scale << " px\n";
  return kSuccess;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deformable image registration: synthetic data, training, registration and evaluation", "deformreg"};
  app.require_subcommand(1);

  std::string spec_path, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  std::string train_cfg, train_data, train_out, train_resume, train_history;
  auto* train_cmd = app.add_subcommand("train", "Train a registration network");
  train_cmd->add_option("--config", train_cfg, "Run configuration (JSON)")->required();
  train_cmd->add_option("--data", train_data, "Dataset directory");
  train_cmd->add_option("--out", train_out, "Checkpoint to write");
  train_cmd->add_option("--resume", train_resume, "Checkpoint to continue from");
  train_cmd->add_option("--history", train_history, "Per-epoch loss history (CSV)");

  std::string reg_model;
  ImagePairPaths reg_paths;
  auto* reg_cmd = app.add_subcommand("register", "Register a pair with a trained network");
  reg_cmd->add_option("--model", reg_model, "Model checkpoint")->required();
  add_pair_options(reg_cmd, reg_paths);

  std::string opt_cfg, opt_fixed_mask, opt_moving_mask;
  ImagePairPaths opt_paths;
  auto* opt_cmd = app.add_subcommand("optimize", "Register a pair by direct multi-scale field optimisation");
  add_pair_options(opt_cmd, opt_paths);
  opt_cmd->add_option("--config", opt_cfg, "Run configuration (JSON); uses its loss and optimize sections");
  opt_cmd->add_option("--fixed-mask", opt_fixed_mask, "Fixed ROI mask for the overlap term");
  opt_cmd->add_option("--moving-mask", opt_moving_mask, "Moving ROI mask for the overlap term");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Landmark distance and Jaccard before/after a field");
  eval_cmd->add_option("--field", ev.field, "Deformation field (.dff)")->required();
  eval_cmd->add_option("--fixed-mask", ev.fixed_mask, "Fixed ROI mask (PGM)");
  eval_cmd->add_option("--moving-mask", ev.moving_mask, "Moving ROI mask (PGM)");
  eval_cmd->add_option("--fixed-lm", ev.fixed_lm, "Fixed landmarks (CSV)");
  eval_cmd->add_option("--moving-lm", ev.moving_lm, "Moving landmarks (CSV)");
  eval_cmd->add_option("--report", ev.report, "Metric CSV to write (default: standard output)");
  eval_cmd->add_option("--pair-id", ev.pair_id, "Row label");
  eval_cmd->add_option("--runtime", ev.runtime, "Registration runtime to record, seconds");

  std::string insp_field, insp_out;
  auto* insp_cmd = app.add_subcommand("inspect", "Colour-code a deformation field");
  insp_cmd->add_option("--field", insp_field, "Deformation field (.dff)")->required();
  insp_cmd->add_option("--out", insp_out, "Output image (PPM)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(spec_path, synth_out, out);
    if (*train_cmd) return cmd_train(train_cfg, train_data, train_out, train_resume, train_history, out, err);
    if (*reg_cmd) return cmd_register(reg_model, reg_paths, out);
    if (*opt_cmd) return cmd_optimize(opt_cfg, opt_paths, opt_fixed_mask, opt_moving_mask, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*insp_cmd) return cmd_inspect(insp_field, insp_out, out);
  } catch (const NumericalError& e) {
    err << "deformreg: numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "deformreg: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"deformreg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace deformreg::cli
