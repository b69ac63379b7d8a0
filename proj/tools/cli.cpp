#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

#include "roitrack/config_file.hpp"
#include "roitrack/error.hpp"
#include "roitrack/extractor.hpp"
#include "roitrack/io.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/pipeline.hpp"
#include "roitrack/synth.hpp"

namespace roitrack::cli {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t count = 0;
  double similarity = 0.7;
  std::size_t length = 100;
  std::size_t frame_size = 256;
};

struct TrainArgs {
  std::vector<std::string> inputs;
  std::string model;
  std::string init;
  std::string config;
  int epochs = 10;
  extractor::Optimizer optimizer = extractor::Optimizer::Adam;
  double lr = 0.0;
  extractor::LrSchedule schedule = extractor::LrSchedule::Cosine;
  double momentum = 0.0;
  std::uint64_t seed = 1;
  std::size_t batches_per_sequence = 3;
};

struct TrackArgs {
  std::string model;
  std::string seq;
  std::string out;
  std::string out_dir;
  std::string rois;
  std::string report;
  std::string config;
  long template_update_n = -1;
};

struct EvalArgs {
  std::string gt;
  std::string rois;
  std::string pred;
  std::string out;
  std::string name;
};

struct RenderArgs {
  std::string seq;
  std::string pred;
  std::string rois;
  std::string out;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  if (a.count == 0) {
    synth::SceneConfig scene;
    if (!a.config.empty()) config::apply(config::read_file(a.config), scene);
    if (a.seed_set) scene.seed = a.seed;
    SequenceRecord rec = synth::gen_sequence(scene);
    io::export_sequence(rec, a.out);
    out << "wrote " << rec.size() << " frames to " << a.out << "\n";
    return 0;
  }
  if (!a.config.empty()) throw ParameterError("synth: --config describes one scene and cannot be combined with --count");
  synth::DatasetOptions opts;
  opts.similarity = a.similarity;
  opts.length = a.length;
  opts.frame_size = a.frame_size;
  for (std::size_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04zu", i);
    SequenceRecord rec = synth::gen_sequence(synth::sample_scene(a.seed, i, opts));
    io::export_sequence(rec, fs::path(a.out) / name);
  }
  out << "wrote " << a.count << " sequences to " << a.out << "\n";
  return 0;
}

std::vector<fs::path> collect_sequence_dirs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> dirs;
  for (const std::string& in : inputs) {
    std::vector<fs::path> found = io::find_sequence_dirs(in);
    if (found.empty()) throw FormatError("no sequence directories under " + in);
    dirs.insert(dirs.end(), found.begin(), found.end());
  }
  return dirs;
}

int run_train(const TrainArgs& a, const CLI::App& cmd, std::ostream& out) {
  extractor::TrainOptions opts;
  if (!a.config.empty()) config::apply(config::read_file(a.config), opts);
  if (cmd.count("--epochs")) opts.epochs = a.epochs;
  if (cmd.count("--optimizer")) opts.optimizer = a.optimizer;
  if (cmd.count("--lr")) opts.learning_rate = a.lr;
  if (cmd.count("--schedule")) opts.schedule = a.schedule;
  if (cmd.count("--momentum")) opts.momentum = a.momentum;
  if (cmd.count("--seed")) opts.seed = a.seed;
  if (cmd.count("--batches-per-sequence")) opts.batches_per_sequence = a.batches_per_sequence;
  opts.on_epoch = [&out](int epoch, double loss) {
    char line[64];
    std::snprintf(line, sizeof(line), "epoch %d loss %.17g\n", epoch, loss);
    out << line << std::flush;
  };
  const io::DirectorySource data(collect_sequence_dirs(a.inputs));
  extractor::ModelParams params = a.init.empty() ? extractor::build_model(opts.seed) : extractor::load_model(a.init);
  const extractor::TrainResult result = extractor::train(std::move(params), data, opts);
  extractor::save_model(result.params, a.model);
  out << "saved model to " << a.model << "\n";
  return 0;
}

std::vector<io::RoiDump> roi_dumps(const pipeline::RunResult& run) {
  std::vector<io::RoiDump> dumps;
  for (std::size_t i = 0; i < run.rois.size(); ++i) dumps.push_back({i + 1, run.windows[i], run.rois[i]});
  return dumps;
}

int run_track(const TrackArgs& a, std::ostream& out) {
  pipeline::TrackerConfig cfg;
  if (!a.config.empty()) config::apply(config::read_file(a.config), cfg);
  if (a.template_update_n >= 0) cfg.template_update_n = static_cast<std::size_t>(a.template_update_n);
  pipeline::validate(cfg);
  const extractor::ModelParams params = extractor::load_model(a.model);

  const std::vector<fs::path> dirs = io::find_sequence_dirs(a.seq);
  if (dirs.empty()) throw FormatError("no sequence directories under " + a.seq);
  if (!a.out.empty() && dirs.size() != 1) throw ParameterError("track: --out needs a single sequence; use --out-dir");
  if (a.out.empty() && a.out_dir.empty()) throw ParameterError("track: one of --out or --out-dir is required");
  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

  std::vector<metric::ScoreReport> reports;
  for (const fs::path& dir : dirs) {
    const SequenceRecord seq = io::load_sequence(dir);
    const pipeline::RunResult run = pipeline::run_sequence(params, seq, cfg);
    if (!a.out.empty()) {
      io::write_boxes(a.out, run.boxes);
      if (!a.rois.empty()) io::write_rois(a.rois, roi_dumps(run));
    } else {
      const fs::path base = fs::path(a.out_dir) / seq.name;
      io::write_boxes(base.string() + "_pred.txt", run.boxes);
      io::write_rois(base.string() + "_rois.csv", roi_dumps(run));
    }
    reports.push_back(run.report);
  }
  const metric::ScoreReport merged = metric::merge_reports(reports);
  out << "template_update_n " << cfg.template_update_n << "\n";
  metric::write_report_table(out, merged);
  if (!a.report.empty()) io::write_report(a.report, merged);
  return 0;
}

std::vector<BBox> ground_truth(const fs::path& gt) {
  return io::read_boxes(fs::is_directory(gt) ? gt / io::kGroundTruthFile : gt);
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  if (a.rois.empty() && a.pred.empty()) throw ParameterError("eval: need --rois and/or --pred");
  const std::vector<BBox> truth = ground_truth(a.gt);
  const std::string name = !a.name.empty() ? a.name
                           : fs::is_directory(a.gt) ? fs::path(a.gt).filename().string()
                                                    : fs::path(a.gt).stem().string();
  if (truth.empty()) throw FormatError("eval: empty ground truth " + a.gt);

  std::vector<metric::ScoreReport> reports;
  if (!a.rois.empty()) {
    const std::vector<io::RoiDump> rois = io::read_rois(a.rois);
    if (rois.size() + 1 != truth.size()) {
      throw FormatError("count mismatch: " + std::to_string(rois.size()) + " RoI frames for " +
                        std::to_string(truth.size()) + " ground-truth frames (expected " +
                        std::to_string(truth.size() - 1) + ")");
    }
    std::vector<GtMatrix> gts;
    std::vector<RoiMatrix> est;
    for (const io::RoiDump& d : rois) {
      if (d.frame_index == 0 || d.frame_index >= truth.size()) {
        throw FormatError("RoI frame index " + std::to_string(d.frame_index) + " outside the ground truth");
      }
      gts.push_back(metric::rasterize_gt(truth[d.frame_index], d.window));
      est.push_back(d.roi);
    }
    reports.push_back(metric::score_sequence(gts, est, name, 1));
  }
  if (!a.pred.empty()) {
    const std::vector<BBox> pred = io::read_boxes(a.pred);
    if (pred.size() != truth.size()) {
      throw FormatError("count mismatch: " + std::to_string(pred.size()) + " predictions for " +
                        std::to_string(truth.size()) + " ground-truth frames");
    }
    std::vector<double> scores;
    for (std::size_t t = 1; t < truth.size(); ++t) scores.push_back(metric::box_iou(truth[t], pred[t]));
    metric::ScoreReport r;
    r.metric = "box_iou";
    r.sequences.push_back(metric::make_sequence_score(name, std::move(scores), 1));
    metric::recompute_aggregate(r);
    reports.push_back(std::move(r));
  }
  for (const metric::ScoreReport& r : reports) metric::write_report_table(out, r);
  if (!a.out.empty()) io::write_report(a.out, reports.front());
  return 0;
}

int run_render(const RenderArgs& a, std::ostream& out) {
  const SequenceRecord seq = io::load_sequence(a.seq);
  const std::vector<BBox> pred = io::read_boxes(a.pred);
  if (pred.size() != seq.size()) {
    throw FormatError("count mismatch: " + std::to_string(pred.size()) + " predictions for " +
                      std::to_string(seq.size()) + " frames");
  }
  std::vector<io::RoiDump> rois;
  if (!a.rois.empty()) rois = io::read_rois(a.rois);
  fs::create_directories(a.out);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    Window window{pred[t].center_x(), pred[t].center_y(), 2.0 * pred[t].w, 2.0 * pred[t].h};
    RoiMatrix roi{};
    const auto it = std::find_if(rois.begin(), rois.end(), [t](const io::RoiDump& d) { return d.frame_index == t; });
    if (it != rois.end()) {
      window = it->window;
      roi = it->roi;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "overlay_%08zu.png", t + 1);
    io::write_png(fs::path(a.out) / name, synth::render_overlay(seq.frames[t], window, roi, pred[t]));
  }
  out << "wrote " << seq.size() << " overlays to " << a.out << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"roitrack: single-object tracking with a template-conditioned RoI heatmap extractor", "roitrack"};
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic sequence directories");
  synth_cmd->add_option("--config", sa.config, "Scene config file (key=value)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", sa.out, "Output sequence directory (or parent directory with --count)")->required();
  synth_cmd->add_option("--seed", sa.seed, "Scene seed");
  synth_cmd->add_option("--count", sa.count, "Generate this many varied sequences as seq_NNNN subdirectories");
  synth_cmd->add_option("--similarity", sa.similarity, "Distractor similarity for --count datasets")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--length", sa.length, "Frames per sequence for --count datasets");
  synth_cmd->add_option("--frame-size", sa.frame_size, "Square frame size for --count datasets");

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the extractor on sequence directories");
  train_cmd->add_option("inputs", ta.inputs, "Sequence directories or parents of them")->required();
  train_cmd->add_option("--model", ta.model, "Output model file")->required();
  train_cmd->add_option("--init", ta.init, "Start from this model instead of a fresh one")->check(CLI::ExistingFile);
  train_cmd->add_option("--config", ta.config, "Training config file (key=value)")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", ta.epochs, "Number of epochs");
  train_cmd->add_option("--optimizer", ta.optimizer, "sgd or adam")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, extractor::Optimizer>{{"sgd", extractor::Optimizer::Sgd},
                                                      {"adam", extractor::Optimizer::Adam}}));
  train_cmd->add_option("--lr", ta.lr, "Learning rate");
  train_cmd->add_option("--schedule", ta.schedule, "constant or cosine")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, extractor::LrSchedule>{{"constant", extractor::LrSchedule::Constant},
                                                       {"cosine", extractor::LrSchedule::Cosine}}));
  train_cmd->add_option("--momentum", ta.momentum, "Heavy-ball momentum");
  train_cmd->add_option("--seed", ta.seed, "Initialization and sampling seed");
  train_cmd->add_option("--batches-per-sequence", ta.batches_per_sequence, "Batches drawn per sequence per epoch");

  TrackArgs tr;
  CLI::App* track_cmd = app.add_subcommand("track", "Track sequences with a trained model");
  track_cmd->add_option("--model", tr.model, "Model file")->required()->check(CLI::ExistingFile);
  track_cmd->add_option("--seq", tr.seq, "Sequence directory or parent of sequence directories")->required();
  track_cmd->add_option("--out", tr.out, "Predictions file (single sequence)");
  track_cmd->add_option("--out-dir", tr.out_dir, "Directory for <name>_pred.txt and <name>_rois.csv");
  track_cmd->add_option("--rois", tr.rois, "Per-frame RoI dump (with --out)");
  track_cmd->add_option("--report", tr.report, "CSV score report");
  track_cmd->add_option("--config", tr.config, "Tracker config file (key=value)")->check(CLI::ExistingFile);
  track_cmd->add_option("--template-update-n", tr.template_update_n, "Re-encode the template every n frames (0: never)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score RoI dumps and/or predictions against ground truth");
  eval_cmd->add_option("--gt", ea.gt, "Sequence directory or groundtruth file")->required();
  eval_cmd->add_option("--rois", ea.rois, "RoI dump from track");
  eval_cmd->add_option("--pred", ea.pred, "Predictions file");
  eval_cmd->add_option("--out", ea.out, "CSV report");
  eval_cmd->add_option("--name", ea.name, "Sequence name in the report");

  RenderArgs ra;
  CLI::App* render_cmd = app.add_subcommand("render", "Write overlay images of a tracking run");
  render_cmd->add_option("--seq", ra.seq, "Sequence directory")->required();
  render_cmd->add_option("--pred", ra.pred, "Predictions file")->required();
  render_cmd->add_option("--rois", ra.rois, "RoI dump from track");
  render_cmd->add_option("--out", ra.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "roitrack: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  sa.seed_set = synth_cmd->count("--seed") > 0;

  try {
    if (*synth_cmd) return run_synth(sa, out);
    if (*train_cmd) return run_train(ta, *train_cmd, out);
    if (*track_cmd) return run_track(tr, out);
    if (*eval_cmd) return run_eval(ea, out);
    if (*render_cmd) return run_render(ra, out);
  } catch (const std::exception& e) {
    err << "roitrack: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace roitrack::cli
