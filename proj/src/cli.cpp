#include "hullinv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "hullinv/config.hpp"
#include "hullinv/dataset.hpp"
#include "hullinv/evaluator.hpp"
#include "hullinv/gradcam.hpp"
#include "hullinv/offsets_io.hpp"
#include "hullinv/simd.hpp"
#include "hullinv/trainer.hpp"

namespace hullinv::cli {

namespace fs = std::filesystem;

namespace {

// A failure attributable to how the tool was invoked.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A runtime failure tagged with the module it came from.
class ModuleError : public std::runtime_error {
 public:
  ModuleError(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

template <typename F>
auto tagged(const char* module, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ModuleError&) {
    throw;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModuleError(module, e.what());
  }
}

// ---------------------------------------------------------------------------
// Option groups shared between subcommands.

struct DataFlags {
  int count = 0;
  std::uint64_t seed = 0;
  std::string image_case = "case2";
  int height = 64;
  int width = 64;
  std::string split = "0.8,0.1,0.1";
  int controls = hullgeom::kDefaultControls;
  double straight_tol = hullgeom::kDefaultStraightTol;
  int workers = 1;

  void add(CLI::App* app, bool pixel_width_flag = true) {
    app->add_option("--count", count, "Number of hull variants")->required()->check(CLI::Range(4, 1000000));
    app->add_option("--seed", seed, "Root seed")->required();
    app->add_option("--case", image_case, "Image case")
        ->check(CLI::IsMember({"case1", "case1-1", "case2", "case2-1"}));
    app->add_option("--height", height, "Image height in pixels")->check(CLI::Range(16, 4096));
    app->add_option(pixel_width_flag ? "--width" : "--image-width", width, "Image width in pixels")
        ->check(CLI::Range(16, 4096));
    app->add_option("--split", split, "train,val,test fractions");
    app->add_option("--controls", controls, "Control points per section")->check(CLI::Range(3, 1000));
    app->add_option("--straight-tol", straight_tol, "Straight-segment tolerance, mm")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--workers", workers, "Generator threads")->check(CLI::Range(1, 256));
  }

  data::DatasetConfig to_config() const {
    data::DatasetConfig c;
    c.count = count;
    c.seed = seed;
    c.image_case = synth::parse_case(image_case);
    c.height = height;
    c.width = width;
    c.controls = controls;
    c.straight_tol = straight_tol;
    std::stringstream ss(split);
    std::string part;
    std::vector<double> f;
    while (std::getline(ss, part, ',')) {
      try {
        f.push_back(std::stod(part));
      } catch (const std::exception&) {
        throw UsageError("--split expects three comma-separated fractions, got '" + split + "'");
      }
    }
    if (f.size() != 3 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
      throw UsageError("--split expects three fractions summing to 1, got '" + split + "'");
    }
    c.split = {f[0], f[1], f[2]};
    return c;
  }
};

struct TrainFlags {
  std::string variant = "mt-conv0fc3";
  double width_factor = 0.125;
  int epochs = 500;
  int patience = 20;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  std::string loss = "auto";
  double lr = 1e-4;
  int lr_decay_every = 100;
  double lr_decay_factor = 0.1;

  void add(CLI::App* app, const char* width_names = "--width,--width-factor",
           const char* seed_names = "--seed,--train-seed") {
    app->add_option("--variant", variant, "single, mt-conv0fc3, mt-conv4fc3 or mt-conv8fc3");
    app->add_option(width_names, width_factor, "Channel/node width factor")
        ->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    app->add_option("--patience", patience, "Early-stop patience, epochs")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--dropout", dropout, "Dropout rate on FC1 and FC2")->check(CLI::Range(0.0, 0.999));
    app->add_option(seed_names, seed, "Seed for init, dropout and shuffle substreams");
    app->add_option("--loss", loss, "Loss form")->check(CLI::IsMember({"auto", "single", "multi"}));
    app->add_option("--lr", lr, "Initial learning rate")->check(CLI::PositiveNumber);
    app->add_option("--lr-decay-every", lr_decay_every, "Epochs per decay step (0 disables)")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--lr-decay-factor", lr_decay_factor, "Factor applied at each decay step")
        ->check(CLI::PositiveNumber);
  }

  model::ArchitectureSpec spec(const data::DatasetConfig& data) const {
    model::ArchitectureSpec s;
    try {
      s.variant = model::parse_variant(variant);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    s.input_h = data.height;
    s.input_w = data.width;
    s.width_factor = width_factor;
    s.sections = synth::kSections;
    s.controls = data.controls;
    return s;
  }

  train::TrainConfig config() const {
    train::TrainConfig c;
    c.epochs = epochs;
    c.patience = patience;
    c.dropout = dropout;
    c.seed = seed;
    c.loss = train::parse_loss_kind(loss);
    c.schedule.initial = lr;
    c.schedule.decay_every = lr_decay_every;
    c.schedule.decay_factor = lr_decay_factor;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Config files: `key = value` where key is a long flag name of the subcommand.

std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

// Expands `--config FILE` for the chosen subcommand into flags that were not
// given explicitly.
std::vector<std::string> expand_config(CLI::App& root, const std::vector<std::string>& args) {
  if (args.empty()) return args;
  CLI::App* sub = root.get_subcommand_no_throw(args.front());
  if (!sub) return args;

  std::optional<std::string> config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config_path) return rest;

  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  config::KeyValues kv;
  try {
    kv = config::read_file(*config_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> injected{rest.front()};
  for (const auto& [key, value] : kv.items()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "help") {
      throw UsageError(*config_path + ": unknown key '" + key + "' for " + sub->get_name());
    }
    bool explicit_flag = false;
    for (const auto& n : opt->get_lnames()) explicit_flag = explicit_flag || given.count(n);
    if (explicit_flag) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1") injected.push_back("--" + key);
      else if (value != "false" && value != "0")
        throw UsageError(*config_path + ": '" + key + "' expects true or false");
    } else {
      injected.push_back("--" + key);
      injected.push_back(value);
    }
  }
  injected.insert(injected.end(), rest.begin() + 1, rest.end());
  return injected;
}

// Every option of `sub` with its effective value.
config::KeyValues resolved_config(const CLI::App* sub) {
  config::KeyValues kv;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string key = option_key(opt);
    if (key.empty() || key == "help" || key == "config") continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (!opt->results().empty()) {
      const auto& r = opt->results();
      for (std::size_t i = 0; i < r.size(); ++i) value += (i ? " " : "") + r[i];
    } else {
      value = opt->get_default_str();
    }
    kv.set(key, value);
  }
  return kv;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Normalization stored next to a checkpoint wins over the dataset's.
data::Normalization normalization_for(const fs::path& checkpoint, const data::Dataset* dataset) {
  const fs::path beside = checkpoint.parent_path() / "normalization.txt";
  if (fs::exists(beside)) return data::read_normalization(beside);
  if (dataset) return dataset->norm;
  throw std::runtime_error("no normalization.txt next to " + checkpoint.string() +
                           " and no dataset given");
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_gen_data(const DataFlags& flags, const std::string& out_dir, bool overwrite,
                 const CLI::App* sub, std::ostream& out) {
  const auto cfg = flags.to_config();
  const auto ds = tagged("synthgen", [&] {
    return data::build_dataset(cfg, out_dir, overwrite, flags.workers);
  });
  config::write_file(fs::path(out_dir) / "gen-data.config", resolved_config(sub));
  out << "dataset " << out_dir << ": " << ds.samples.size() << " samples ("
      << ds.split(data::Split::kTrain).size() << " train, " << ds.split(data::Split::kVal).size()
      << " val, " << ds.split(data::Split::kTest).size() << " test), "
      << synth::case_tag(cfg.image_case) << ", " << cfg.height << "x" << cfg.width << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& in_path, const std::string& out_path, int controls,
                   double tol, std::ostream& out) {
  const auto sections = tagged("hullgeom", [&] { return io::read_offsets_file(in_path); });
  std::vector<hullgeom::ControlPolygon> polygons;
  tagged("hullgeom", [&] {
    for (const auto& s : sections) {
      polygons.push_back(
          hullgeom::fit_control_points(hullgeom::remove_straight_segments(s, tol), controls - 1));
    }
    io::write_controls_file(out_path, polygons);
    return 0;
  });
  out << "wrote " << polygons.size() << " control polygons (" << controls << " controls each) to "
      << out_path << "\n";
  return kExitOk;
}

struct RoundtripFlags {
  std::string offsets;
  std::string data_dir;
  std::string split = "test";
  bool baseline = false;
  int controls = hullgeom::kDefaultControls;
  int levels = hullgeom::kDefaultZLevels;
  double straight_tol = hullgeom::kDefaultStraightTol;
  std::string format = "markdown";
  std::string out;
};

int cmd_roundtrip(const RoundtripFlags& f, std::ostream& out) {
  const int sources = !f.offsets.empty() + !f.data_dir.empty() + (f.baseline ? 1 : 0);
  if (sources != 1) throw UsageError("roundtrip needs exactly one of --offsets, --data, --baseline");

  std::vector<std::vector<hullgeom::SectionOffsets>> truth;
  if (!f.offsets.empty()) {
    truth.push_back(tagged("hullgeom", [&] { return io::read_offsets_file(f.offsets); }));
  } else if (f.baseline) {
    truth.push_back(tagged("synthgen", [&] { return synth::make_variant(synth::baseline_params()).sections; }));
  } else {
    const auto ds = tagged("synthgen", [&] { return data::load_dataset(f.data_dir); });
    for (const auto* s : ds.split(data::parse_split(f.split))) truth.push_back(s->offsets);
    if (truth.empty()) throw std::runtime_error("dataset split '" + f.split + "' is empty");
  }

  std::vector<LabelVector> fitted;
  tagged("hullgeom", [&] {
    for (const auto& sections : truth) {
      std::vector<hullgeom::ControlPolygon> polygons;
      for (const auto& s : sections) {
        polygons.push_back(hullgeom::fit_control_points(
            hullgeom::remove_straight_segments(s, f.straight_tol), f.controls - 1));
      }
      fitted.push_back(labels_from_polygons(polygons));
    }
    return 0;
  });
  eval::EvalReport report;
  report.title = "B-spline representation error";
  report.sections = static_cast<int>(truth.front().size());
  report.rows.push_back(
      tagged("evaluator", [&] { return eval::offset_rmse(fitted, truth, "B-spline", f.levels); }));
  const auto format = eval::parse_format(f.format);
  if (f.out.empty()) {
    eval::emit_report(out, report, format);
  } else {
    eval::emit_report(fs::path(f.out), report, format);
    out << "B-spline total " << fmt3(report.rows.front().total) << " mm -> " << f.out << "\n";
  }
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& run_dir, const TrainFlags& flags,
              const std::string& resume, const CLI::App* sub, std::ostream& out) {
  const auto ds = tagged("synthgen", [&] { return data::load_dataset(data_dir); });
  const auto spec = flags.spec(ds.config);
  const auto config = flags.config();
  ensure_dir(run_dir);
  config::write_file(fs::path(run_dir) / "config.txt", resolved_config(sub));
  data::write_normalization(fs::path(run_dir) / "normalization.txt", ds.norm);

  // Resuming picks up the best snapshot and loss history saved beside the
  // checkpoint, so the run directory ends up as if never interrupted.
  std::optional<train::Checkpoint> resume_ckpt, resume_best;
  std::vector<train::EpochRecord> history;
  if (!resume.empty()) {
    resume_ckpt = tagged("trainer", [&] { return train::load_checkpoint(resume, &spec); });
    const fs::path from = fs::path(resume).parent_path();
    if (fs::exists(from / "best.ckpt")) {
      resume_best = tagged("trainer", [&] { return train::load_checkpoint(from / "best.ckpt", &spec); });
    }
    if (fs::exists(from / "loss.csv")) {
      for (const auto& r : tagged("trainer", [&] { return train::read_history_csv(from / "loss.csv"); })) {
        if (r.epoch < resume_ckpt->epoch) history.push_back(r);
      }
    }
  }
  train::TrainOptions opts;
  opts.checkpoint_dir = run_dir;
  if (resume_ckpt) opts.resume = &*resume_ckpt;
  if (resume_best) opts.resume_best = &*resume_best;
  const auto result = tagged("trainer", [&] { return train::train(ds, spec, config, opts); });
  history.insert(history.end(), result.history.begin(), result.history.end());
  train::write_history_csv(fs::path(run_dir) / "loss.csv", history);
  out << spec.to_text() << "\n"
      << "epochs run " << history.size() << ", best epoch " << result.best.best_epoch
      << ", best val loss " << result.best.best_val
      << (result.stopped_early ? " (early stop)" : "") << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::string protocol = "all";
  std::string name;
  std::string out_dir;
};

int cmd_eval(const EvalFlags& f, const CLI::App* sub, std::ostream& out) {
  const auto ds = tagged("synthgen", [&] { return data::load_dataset(f.data_dir); });
  const auto split = data::parse_split(f.split);
  const auto samples = ds.split(split);
  if (samples.empty()) throw std::runtime_error("dataset has no " + f.split + " samples");
  ensure_dir(f.out_dir);
  config::write_file(fs::path(f.out_dir) / "eval.config", resolved_config(sub));

  auto emit = [&](const std::string& stem, eval::EvalReport report) {
    eval::emit_report(fs::path(f.out_dir) / (stem + ".csv"), report, eval::Format::kCsv);
    eval::emit_report(fs::path(f.out_dir) / (stem + ".md"), report, eval::Format::kMarkdown);
    for (const auto& r : report.rows) {
      out << stem << " " << r.name << ": total " << fmt3(r.total) << " mm\n";
    }
  };
  const bool want_model = f.protocol != "bspline";
  if (want_model) {
    if (f.checkpoint.empty()) throw UsageError("--checkpoint is required for protocol " + f.protocol);
    const auto ckpt = tagged("trainer", [&] { return train::load_checkpoint(f.checkpoint); });
    if (ckpt.params.spec.input_h != ds.config.height || ckpt.params.spec.input_w != ds.config.width) {
      throw ModuleError("evaluator", "checkpoint input size does not match the dataset images");
    }
    const auto norm = normalization_for(f.checkpoint, &ds);
    const std::string name = f.name.empty() ? model::variant_name(ckpt.params.spec.variant) : f.name;
    const auto preds = tagged("evaluator", [&] { return eval::predict(ckpt.params, samples, norm); });
    if (f.protocol == "control" || f.protocol == "all") {
      std::vector<LabelVector> labels;
      for (const auto* s : samples) labels.push_back(s->label);
      eval::EvalReport r{"Control point RMSE", synth::kSections, {}};
      r.rows.push_back(tagged("evaluator", [&] { return eval::control_point_rmse(preds, labels, name); }));
      emit("control", r);
    }
    if (f.protocol == "offset" || f.protocol == "all") {
      std::vector<std::vector<hullgeom::SectionOffsets>> truth;
      for (const auto* s : samples) truth.push_back(s->offsets);
      eval::EvalReport r{"Offset RMSE", synth::kSections, {}};
      r.rows.push_back(tagged("evaluator", [&] { return eval::offset_rmse(preds, truth, name); }));
      emit("offset", r);
    }
  }
  if (f.protocol == "bspline" || f.protocol == "all") {
    eval::EvalReport r{"B-spline representation error", synth::kSections, {}};
    r.rows.push_back(tagged("evaluator", [&] { return eval::bspline_row(samples); }));
    emit("bspline", r);
  }
  return kExitOk;
}

struct GradcamFlags {
  std::string checkpoint;
  std::string data_dir;
  int sample = -1;
  std::string image;
  int task = -1;
  bool all_tasks = false;
  std::string out_dir;
};

int cmd_gradcam(const GradcamFlags& f, std::ostream& out) {
  if ((f.task >= 0) == f.all_tasks) throw UsageError("give exactly one of --task and --all-tasks");
  if ((f.sample >= 0) == !f.image.empty()) throw UsageError("give exactly one of --sample and --image");
  if (f.sample >= 0 && f.data_dir.empty()) throw UsageError("--sample needs --data");

  const auto ckpt = tagged("trainer", [&] { return train::load_checkpoint(f.checkpoint); });
  if (!model::is_multi_task(ckpt.params.spec.variant)) {
    throw ModuleError("gradcam", "Grad-CAM is unsupported for single-task checkpoints");
  }
  std::optional<data::Dataset> ds;
  synth::ContourImage image;
  if (f.sample >= 0) {
    ds = tagged("synthgen", [&] { return data::load_dataset(f.data_dir); });
    const auto it = std::find_if(ds->samples.begin(), ds->samples.end(),
                                 [&](const data::Sample& s) { return s.id == f.sample; });
    if (it == ds->samples.end()) throw std::runtime_error("no sample " + std::to_string(f.sample));
    image = it->image;
  } else {
    image = tagged("synthgen", [&] { return data::read_contour_image(f.image); });
  }
  const auto norm = normalization_for(f.checkpoint, ds ? &*ds : nullptr);
  const auto input = train::input_tensor(image, norm);

  ensure_dir(f.out_dir);
  std::vector<int> tasks;
  if (f.all_tasks) {
    for (int k = 0; k < ckpt.params.spec.sections; ++k) tasks.push_back(k);
  } else {
    tasks.push_back(f.task);
  }
  for (int k : tasks) {
    const auto hm = tagged("gradcam", [&] { return gradcam::gradcam(ckpt.params, input, k); });
    char name[64];
    std::snprintf(name, sizeof(name), "gradcam_task%02d.pgm", k);
    gradcam::write_overlay(fs::path(f.out_dir) / name, hm, image);
    out << "task " << k << ": " << hm.height << "x" << hm.width << " map -> " << name << "\n";
  }
  return kExitOk;
}

struct ReportFlags {
  std::vector<std::string> inputs;
  std::string title;
  std::string out;
  std::string csv_out;
  bool image_cases = false;
};

int cmd_report(const ReportFlags& f, const DataFlags& data_flags, const TrainFlags& train_flags,
               const CLI::App* sub, std::ostream& out) {
  eval::EvalReport merged;
  merged.title = f.title;
  if (f.image_cases) {
    if (!f.inputs.empty()) throw UsageError("--image-cases does not take input reports");
    const auto dcfg = data_flags.to_config();
    const auto spec = train_flags.spec(dcfg);
    const auto result = tagged("evaluator", [&] {
      return eval::image_case_study(dcfg, spec, train_flags.config(), data_flags.workers);
    });
    merged = result.report;
    if (!f.title.empty()) merged.title = f.title;
    out << "lowest control-point RMSE: " << result.best_case << "\n";
    if (!f.out.empty()) {
      config::write_file(fs::path(f.out).replace_extension(".config"), resolved_config(sub));
    }
  } else {
    if (f.inputs.empty()) throw UsageError("report needs input CSV files or --image-cases");
    for (std::size_t i = 0; i < f.inputs.size(); ++i) {
      const auto r = tagged("evaluator", [&] { return eval::read_report_csv(f.inputs[i]); });
      if (i == 0) merged.sections = r.sections;
      if (r.sections != merged.sections) {
        throw ModuleError("evaluator", f.inputs[i] + " has a different section count");
      }
      merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    }
  }
  if (!f.csv_out.empty()) eval::emit_report(fs::path(f.csv_out), merged, eval::Format::kCsv);
  if (f.out.empty()) {
    eval::emit_report(out, merged, eval::Format::kMarkdown);
  } else {
    eval::emit_report(fs::path(f.out), merged, eval::Format::kMarkdown);
    out << merged.rows.size() << " rows -> " << f.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inverse design of stern sections from pressure contour images", "hullinv"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel variant: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto add_config = [](CLI::App* sub) {
    // Handled before parsing; declared so it shows in --help.
    sub->add_option("--config", "key = value file with defaults for this command's flags");
  };

  DataFlags gen;
  std::string gen_out = "dataset";
  bool gen_overwrite = false;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
  gen.add(gen_cmd);
  gen_cmd->add_option("--out", gen_out, "Output directory");
  gen_cmd->add_flag("--overwrite", gen_overwrite, "Replace an existing non-empty directory");
  add_config(gen_cmd);

  std::string pre_in, pre_out;
  int pre_controls = hullgeom::kDefaultControls;
  double pre_tol = hullgeom::kDefaultStraightTol;
  auto* pre_cmd = app.add_subcommand("preprocess", "Fit control polygons to a section offsets file");
  pre_cmd->add_option("--offsets", pre_in, "Input offsets file")->required();
  pre_cmd->add_option("--out", pre_out, "Output controls file")->required();
  pre_cmd->add_option("--controls", pre_controls, "Control points per section")->check(CLI::Range(3, 1000));
  pre_cmd->add_option("--straight-tol", pre_tol, "Straight-segment tolerance, mm")
      ->check(CLI::NonNegativeNumber);
  add_config(pre_cmd);

  RoundtripFlags rt;
  auto* rt_cmd = app.add_subcommand("roundtrip", "B-spline representation error of offsets");
  rt_cmd->add_option("--offsets", rt.offsets, "Offsets file");
  rt_cmd->add_option("--data", rt.data_dir, "Dataset directory");
  rt_cmd->add_option("--split", rt.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));
  rt_cmd->add_flag("--baseline", rt.baseline, "Use the synthetic baseline hull");
  rt_cmd->add_option("--controls", rt.controls, "Control points per section")->check(CLI::Range(3, 1000));
  rt_cmd->add_option("--levels", rt.levels, "z levels for comparison")->check(CLI::Range(2, 100000));
  rt_cmd->add_option("--straight-tol", rt.straight_tol, "Straight-segment tolerance, mm")
      ->check(CLI::NonNegativeNumber);
  rt_cmd->add_option("--format", rt.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  rt_cmd->add_option("--out", rt.out, "Report file (default: stdout)");
  add_config(rt_cmd);

  TrainFlags tr;
  std::string tr_data, tr_out, tr_resume;
  auto* tr_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  tr_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  tr_cmd->add_option("--out", tr_out, "Run directory")->required();
  tr.add(tr_cmd);
  tr_cmd->add_option("--resume", tr_resume, "Continue from a checkpoint");
  add_config(tr_cmd);

  EvalFlags ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  ev_cmd->add_option("--data", ev.data_dir, "Dataset directory")->required();
  ev_cmd->add_option("--split", ev.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));
  ev_cmd->add_option("--protocol", ev.protocol, "control, offset, bspline or all")
      ->check(CLI::IsMember({"control", "offset", "bspline", "all"}));
  ev_cmd->add_option("--name", ev.name, "Row name (default: the variant)");
  ev_cmd->add_option("--out", ev.out_dir, "Output directory")->required();
  add_config(ev_cmd);

  GradcamFlags gc;
  auto* gc_cmd = app.add_subcommand("gradcam", "Per-task Grad-CAM overlays");
  gc_cmd->add_option("--checkpoint", gc.checkpoint, "Multi-task checkpoint")->required();
  gc_cmd->add_option("--data", gc.data_dir, "Dataset directory");
  gc_cmd->add_option("--sample", gc.sample, "Sample id in the dataset")->check(CLI::NonNegativeNumber);
  gc_cmd->add_option("--image", gc.image, "Contour image (PGM with .meta sidecar)");
  gc_cmd->add_option("--task", gc.task, "Task (section) index")->check(CLI::NonNegativeNumber);
  gc_cmd->add_flag("--all-tasks", gc.all_tasks, "One overlay per task");
  gc_cmd->add_option("--out", gc.out_dir, "Output directory")->required();
  add_config(gc_cmd);

  ReportFlags rp;
  DataFlags rp_data;
  TrainFlags rp_train;
  auto* rp_cmd = app.add_subcommand("report", "Merge CSV reports or run the image-case study");
  rp_cmd->add_option("inputs", rp.inputs, "CSV reports to merge, in row order");
  rp_cmd->add_option("--title", rp.title, "Table title");
  rp_cmd->add_option("--out", rp.out, "Markdown output (default: stdout)");
  rp_cmd->add_option("--csv-out", rp.csv_out, "Also write the merged CSV");
  rp_cmd->add_flag("--image-cases", rp.image_cases, "Train and compare the four image cases");
  {
    // Data and training flags for --image-cases; not required otherwise.
    auto* g = rp_cmd->add_option_group("image-cases");
    rp_data.add(g, false);
    rp_train.add(g, "--width-factor", "--train-seed");
    for (auto* opt : g->get_options()) opt->required(false);
  }
  add_config(rp_cmd);

  try {
    std::vector<std::string> argv = expand_config(app, args);
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "usage error: " << e.what() << "\n";
      CLI::App* failed = nullptr;
      for (auto* s : app.get_subcommands()) failed = s;
      err << "run 'hullinv " << (failed ? failed->get_name() + " " : std::string()) << "--help' for usage\n";
      return kExitUsage;
    }

    if (isa != "auto") simd::set_isa(simd::parse_isa(isa));

    if (*gen_cmd) return cmd_gen_data(gen, gen_out, gen_overwrite, gen_cmd, out);
    if (*pre_cmd) return cmd_preprocess(pre_in, pre_out, pre_controls, pre_tol, out);
    if (*rt_cmd) return cmd_roundtrip(rt, out);
    if (*tr_cmd) return cmd_train(tr_data, tr_out, tr, tr_resume, tr_cmd, out);
    if (*ev_cmd) return cmd_eval(ev, ev_cmd, out);
    if (*gc_cmd) return cmd_gradcam(gc, out);
    if (*rp_cmd) {
      if (rp.image_cases) {
        // The study needs a data description even though the group is optional.
        if (rp_data.count == 0) throw UsageError("--image-cases needs --count and --seed");
      }
      return cmd_report(rp, rp_data, rp_train, rp_cmd, out);
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModuleError& e) {
    err << "error [" << e.module() << "]: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hullinv::cli
