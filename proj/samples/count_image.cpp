// Count pods in one image with a trained checkpoint and print the detections.
//
//   count_image runs/demo/best.ckpt plot.jpg [threshold]

#include <cstdio>
#include <cstdlib>
#include <exception>

#include "soynet/evaluator.hpp"
#include "soynet/trainer.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s CHECKPOINT IMAGE [THRESHOLD]\n", argv[0]);
    return 1;
  }
  try {
    auto model = soynet::load_model(argv[1]);
    const soynet::Image image = soynet::read_image(argv[2]);
    const double threshold = argc > 3 ? std::atof(argv[3]) : soynet::kDefaultThreshold;
    const auto result = soynet::infer(model, image, threshold);
    for (const auto& p : result.kept.proposals) std::printf("%8.2f %8.2f  %.3f\n", p.x, p.y, p.confidence);
    std::printf("%zu pods\n", result.count());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
}
