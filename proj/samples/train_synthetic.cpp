// End-to-end run on synthetic scenes: generate, split, train a tiny model, report test metrics.
// Takes a couple of minutes on one core.

#include <cstdio>

#include "soynet/evaluator.hpp"
#include "soynet/synth.hpp"
#include "soynet/trainer.hpp"

using namespace soynet;

int main() {
  SynthConfig sc;
  sc.count = 40;
  sc.pods_min = 20;
  sc.pods_max = 60;
  sc.seed = 7;
  auto scenes = synth_generate(sc);

  std::vector<std::string> ids;
  for (const auto& s : scenes) ids.push_back(s.id);
  const DatasetSplit split = split_dataset(ids, SplitSpec{});
  auto take = [&](const std::vector<std::string>& want) {
    std::vector<AnnotatedImage> out;
    for (const auto& s : scenes)
      for (const auto& id : want)
        if (s.id == id) out.push_back(s);
    return out;
  };
  const auto train = take(split.train), val = take(split.val), test = take(split.test);

  TrainConfig cfg;
  cfg.model = ModelConfig::custom(16, {1, 1, 2});
  cfg.epochs = 20;
  cfg.loss.lambda1 = 0.5;

  FitOptions opt;
  opt.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %2zu  total %.4f  val_mae %.2f\n", r.epoch, r.total, r.val_mae);
    std::fflush(stdout);
  };
  auto [model, history] = fit(train, val, cfg, opt);

  std::vector<double> p, g;
  for (const auto& item : test) {
    p.push_back(static_cast<double>(infer(model, item.image).count()));
    g.push_back(static_cast<double>(item.points.size()));
  }
  std::printf("%s\n", to_json(metrics(p, g)).dump(2).c_str());
}
