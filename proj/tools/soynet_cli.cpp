// soynet: synth | train | eval | infer
//
// Exit codes: 0 success, 1 usage/configuration, 2 data or I/O error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "soynet/config.hpp"
#include "soynet/evaluator.hpp"
#include "soynet/synth.hpp"
#include "soynet/trainer.hpp"

namespace fs = std::filesystem;
using namespace soynet;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string resume;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, lambda1;
  std::optional<std::uint64_t> seed;
  std::string data, out;
};

struct EvalArgs {
  std::string ckpt, data, split = "test", config, out_csv;
  double threshold = kDefaultThreshold;
  std::optional<std::uint64_t> split_seed;
};

struct InferArgs {
  std::string ckpt, image, out_csv, out_overlay, annotations;
  double threshold = kDefaultThreshold;
};

std::vector<AnnotatedImage> load_dir(const std::string& dir) {
  std::vector<AnnotatedImage> items;
  for (const auto& f : list_annotations(dir)) items.push_back(load_annotated(f));
  if (items.empty()) throw IoError("no annotation files (*.json) in " + dir);
  return items;
}

std::vector<AnnotatedImage> pick(const std::vector<AnnotatedImage>& items, const std::vector<std::string>& ids) {
  std::map<std::string, const AnnotatedImage*> by_id;
  for (const auto& it : items) by_id[it.id] = &it;
  std::vector<AnnotatedImage> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

DatasetSplit split_items(const std::vector<AnnotatedImage>& items, const SplitSpec& spec) {
  std::vector<std::string> ids;
  for (const auto& it : items) ids.push_back(it.id);
  return split_dataset(ids, spec);
}

int run_synth(const SynthArgs& a) {
  a.cfg.validate();
  fs::create_directories(a.out);
  for (const auto& item : synth_generate(a.cfg)) {
    const std::string png = item.id + ".png";
    write_png((fs::path(a.out) / png).string(), item.image);
    std::ofstream js(fs::path(a.out) / (item.id + ".json"), std::ios::binary);
    js << write_annotations({png, item.width(), item.height(), item.points});
    if (!js) throw IoError("cannot write annotations to " + a.out);
  }
  std::cout << "wrote " << a.cfg.count << " images to " << a.out << "\n";
  return kOk;
}

int run_train(const TrainArgs& a) {
  Json j;
  try {
    j = Json::parse(read_text_file(a.config));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + a.config + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config '" + a.config + "' must be a JSON object");
  if (!a.data.empty()) j["data_dir"] = a.data;
  if (!a.out.empty()) j["output_dir"] = a.out;
  RunConfig rc = run_config_from_json(j, false);
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (a.lr) rc.train.lr = *a.lr;
  if (a.lambda1) rc.train.loss.lambda1 = *a.lambda1;
  if (a.seed) rc.train.seed = *a.seed;
  rc.train.validate();
  rc = run_config_from_json(to_json(rc), true);

  const auto items = load_dir(rc.data_dir);
  const DatasetSplit split = split_items(items, rc.split);
  const auto train = pick(items, split.train), val = pick(items, split.val);
  std::cout << "data: " << train.size() << " train / " << val.size() << " val / " << split.test.size() << " test\n";

  Trainer trainer = a.resume.empty() ? Trainer(rc.train) : Trainer::resume(a.resume, rc.train);
  if (a.resume.empty() && !rc.checkpoint.empty()) trainer.load_weights(rc.checkpoint);
  fs::create_directories(rc.output_dir);
  {
    std::ofstream cfg_out(fs::path(rc.output_dir) / "config.json");
    cfg_out << to_json(rc).dump(2) << "\n";
  }
  FitOptions opt;
  opt.output_dir = rc.output_dir;
  opt.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %zu  loc %.4f  cls %.4f  total %.4f  val_mae %.3f\n", r.epoch, r.loc, r.cls, r.total, r.val_mae);
    std::fflush(stdout);
  };
  trainer.fit(train, val, opt);
  std::cout << "best epoch " << trainer.history().best_epoch << " (val_mae " << trainer.history().best_val_mae
            << "), checkpoints in " << rc.output_dir << "\n";
  return kOk;
}

int run_eval(const EvalArgs& a) {
  PodNet<float> model = load_model(a.ckpt);
  SplitSpec spec;
  if (!a.config.empty()) spec = load_run_config(a.config, false).split;
  if (a.split_seed) spec.seed = *a.split_seed;
  const auto items = load_dir(a.data);
  std::vector<AnnotatedImage> chosen;
  if (a.split == "all") {
    chosen = items;
  } else {
    const DatasetSplit s = split_items(items, spec);
    chosen = pick(items, a.split == "train" ? s.train : a.split == "val" ? s.val : s.test);
  }
  if (chosen.empty()) throw ValidationError("split '" + a.split + "' is empty");
  std::ofstream csv;
  if (!a.out_csv.empty()) {
    csv.open(a.out_csv);
    if (!csv) throw IoError("cannot write " + a.out_csv);
  }
  std::vector<double> p, g;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const InferenceResult r = infer(model, chosen[i].image, a.threshold);
    p.push_back(static_cast<double>(r.count()));
    g.push_back(static_cast<double>(chosen[i].points.size()));
    if (csv.is_open()) write_predictions_csv(csv, chosen[i].id, r.kept, i == 0);
  }
  std::cout << to_json(metrics(p, g)).dump(2) << "\n";
  return kOk;
}

int run_infer(const InferArgs& a) {
  PodNet<float> model = load_model(a.ckpt);
  const Image image = read_image(a.image);
  const InferenceResult r = infer(model, image, a.threshold);
  const std::string id = fs::path(a.image).stem().string();
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv);
    if (!csv) throw IoError("cannot write " + a.out_csv);
    write_predictions_csv(csv, id, r.kept);
  }
  if (!a.out_overlay.empty()) {
    std::vector<Point> gt;
    if (!a.annotations.empty()) gt = parse_annotations(read_text_file(a.annotations)).points;
    render_overlay(image, gt, proposal_points(r.kept), a.out_overlay);
  }
  std::cout << id << ": " << r.count() << " pods\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-based pod counting: synthetic data, training, evaluation and inference"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render synthetic dot scenes with Labelme point annotations");
  synth->add_option("--count", sa.cfg.count, "Number of images")->default_val(10);
  synth->add_option("--pods-min", sa.cfg.pods_min, "Fewest pods per image")->default_val(20);
  synth->add_option("--pods-max", sa.cfg.pods_max, "Most pods per image")->default_val(80);
  synth->add_option("--seed", sa.cfg.seed, "Random seed")->default_val(0);
  synth->add_option("--width", sa.cfg.width, "Image width in pixels")->default_val(224);
  synth->add_option("--height", sa.cfg.height, "Image height in pixels")->default_val(224);
  synth->add_option("--radius-min", sa.cfg.radius_min, "Smallest blob semi-axis")->default_val(2.5);
  synth->add_option("--radius-max", sa.cfg.radius_max, "Largest blob semi-axis")->default_val(4.0);
  synth->add_option("--out", sa.out, "Output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train from a JSON run configuration");
  train->add_option("--config", ta.config, "Run configuration (JSON)")->required();
  train->add_option("--resume", ta.resume, "Continue from a last.ckpt written by an earlier run");
  train->add_option("--data", ta.data, "Override data_dir");
  train->add_option("--out", ta.out, "Override output_dir");
  train->add_option("--epochs", ta.epochs, "Override train.epochs (total, including resumed epochs)");
  train->add_option("--batch-size", ta.batch_size, "Override train.batch_size");
  train->add_option("--lr", ta.lr, "Override train.lr");
  train->add_option("--lambda1", ta.lambda1, "Override loss.lambda1");
  train->add_option("--seed", ta.seed, "Override train.seed");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Print counting metrics (JSON) of a checkpoint on a data split");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint (best.ckpt or last.ckpt)")->required();
  eval->add_option("--data", ea.data, "Directory of Labelme JSON files and images")->required();
  eval->add_option("--split", ea.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->default_val("test");
  eval->add_option("--threshold", ea.threshold, "Confidence threshold")->default_val(kDefaultThreshold);
  eval->add_option("--config", ea.config, "Run configuration whose split section defines the partition");
  eval->add_option("--split-seed", ea.split_seed, "Override the split seed");
  eval->add_option("--out-csv", ea.out_csv, "Write kept proposals as CSV");

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "Count pods in one image");
  inf->add_option("--ckpt", ia.ckpt, "Checkpoint")->required();
  inf->add_option("--image", ia.image, "PNG or JPEG image")->required();
  inf->add_option("--out-csv", ia.out_csv, "Write kept proposals as CSV");
  inf->add_option("--out-overlay", ia.out_overlay, "Write a PNG with predictions (red) and ground truth (green)");
  inf->add_option("--annotations", ia.annotations, "Labelme JSON with ground truth for the overlay");
  inf->add_option("--threshold", ia.threshold, "Confidence threshold")->default_val(kDefaultThreshold);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*inf) return run_infer(ia);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
