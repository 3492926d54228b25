#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "soynet/evaluator.hpp"
#include "soynet/synth.hpp"

using namespace soynet;

namespace {

PodNet<float> tiny_model(std::uint64_t seed = 1) {
  PodNet<float> m(ModelConfig::custom(8, {1, 1, 1}));
  m.init(seed);
  return m;
}

}  // namespace

TEST(Metrics, HandExample) {
  const auto r = metrics({10, 20}, {10, 25});
  EXPECT_NEAR(r.mae, 2.5, 1e-12);
  EXPECT_NEAR(r.rmse, std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(r.rmae, 0.1, 1e-12);
  EXPECT_NEAR(r.acc, 0.9, 1e-12);
  EXPECT_NEAR(r.rrmse, std::sqrt(0.02), 1e-12);
  EXPECT_NEAR(r.r2, 0.6, 1e-12);
  EXPECT_NEAR(r.pearson_r, 1.0, 1e-12);
  EXPECT_EQ(r.n, 2u);
}

TEST(Metrics, PerfectPredictionAndLinearity) {
  const auto r = metrics({3, 7, 12}, {3, 7, 12});
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.rmae, 0.0);
  EXPECT_EQ(r.acc, 1.0);
  EXPECT_EQ(r.rrmse, 0.0);
  EXPECT_EQ(r.r2, 1.0);
  EXPECT_NEAR(r.pearson_r, 1.0, 1e-15);
  EXPECT_NEAR(metrics({1, 2, 3}, {2, 4, 6}).pearson_r, 1.0, 1e-15);
  EXPECT_LT(metrics({1, 2, 3}, {2, 4, 7}).r2, 1.0);
}

TEST(Metrics, UndefinedCasesAndErrors) {
  const auto one = metrics({4}, {5});
  EXPECT_TRUE(std::isnan(one.pearson_r));
  const auto flat = metrics({4, 4}, {5, 6});
  EXPECT_TRUE(std::isnan(flat.pearson_r));
  const auto zero = metrics({0, 3, 5}, {0, 4, 5});
  EXPECT_EQ(zero.zero_gt_excluded, 1u);
  EXPECT_NEAR(zero.rmae, 0.125, 1e-15);
  EXPECT_TRUE(std::isnan(metrics({1}, {0}).rmae));
  EXPECT_THROW(metrics({1, 2}, {1}), ValidationError);
  EXPECT_THROW(metrics(std::vector<double>{}, std::vector<double>{}), ValidationError);
  const auto j = to_json(one);
  EXPECT_TRUE(j.at("pearson_r").is_null());
  EXPECT_EQ(j.at("n"), 1);
  EXPECT_EQ(j.size(), 8u);
}

TEST(Metrics, Invariants) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = static_cast<double>(rng.between(1, 200));
      p[i] = static_cast<double>(rng.between(0, 220));
    }
    const auto r = metrics(p, g);
    EXPECT_NEAR(r.acc + r.rmae, 1.0, 1e-12);
    EXPECT_GE(r.mae, 0.0);
    EXPECT_GE(r.rmse, 0.0);
    // order invariance (integer counts keep the sums exact)
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> pp(n), gp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      gp[i] = g[perm[i]];
    }
    const auto q = metrics(pp, gp);
    EXPECT_EQ(q.mae, r.mae);
    EXPECT_EQ(q.rmse, r.rmse);
    EXPECT_NEAR(q.rmae, r.rmae, 1e-12);
    EXPECT_NEAR(q.r2, r.r2, 1e-12);
    EXPECT_NEAR(q.pearson_r, r.pearson_r, 1e-12);
    // Pearson under affine maps
    const double a = rng.uniform(-3, 3), b = rng.uniform(-50, 50);
    std::vector<double> pa(n);
    for (std::size_t i = 0; i < n; ++i) pa[i] = a * p[i] + b;
    if (std::isfinite(r.pearson_r) && std::abs(a) > 1e-3) {
      EXPECT_NEAR(metrics(pa, g).pearson_r, (a > 0 ? 1 : -1) * r.pearson_r, 1e-9);
    }
    EXPECT_EQ(r.r2 == 1.0, p == g);
  }
}

TEST(Threshold, StrictAndMonotone) {
  ProposalSet ps;
  for (double c : {0.1, 0.5, 0.50001, 0.9, 0.999}) ps.proposals.push_back({0, 0, c});
  EXPECT_EQ(threshold_proposals(ps, 0.5).size(), 3u);
  EXPECT_EQ(threshold_proposals(ps, 1.0).size(), 0u);
  EXPECT_EQ(threshold_proposals(ps, 0.0).size(), 5u);
  std::size_t prev = ps.size();
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const std::size_t n = threshold_proposals(ps, t).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(Infer, ThresholdExtremesOnModel) {
  auto m = tiny_model();
  SynthConfig sc;
  sc.width = 64;
  sc.height = 48;
  const auto item = synth_generate(sc)[0];
  EXPECT_EQ(infer(m, item.image, 0.0).count(), 8u * 6u);
  EXPECT_EQ(infer(m, item.image, 1.0).count(), 0u);
}

TEST(Infer, TileOriginsCoverTheImage) {
  const TileOptions opt;
  EXPECT_EQ(detail::tile_origins(224, opt), (std::vector<std::size_t>{0}));
  EXPECT_EQ(detail::tile_origins(100, opt), (std::vector<std::size_t>{0}));
  EXPECT_EQ(detail::tile_origins(500, opt), (std::vector<std::size_t>{0, 192, 276}));
  EXPECT_EQ(detail::tile_origins(416, opt), (std::vector<std::size_t>{0, 192}));
}

TEST(Infer, TiledKeepsPointsInsideAndDeduplicates) {
  auto m = tiny_model(2);
  SynthConfig sc;
  sc.width = 300;
  sc.height = 250;
  const auto item = synth_generate(sc)[0];
  const auto all = infer_tiled(m, item.image, 0.0);
  EXPECT_EQ(all.width, 300u);
  for (const auto& p : all.proposals) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LT(p.x, 300.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LT(p.y, 250.0);
  }
  const auto direct = infer(m, item.image, 0.0);
  EXPECT_EQ(direct.count(), all.size());
  // With a huge merge radius, each tile can only add points no other tile got near.
  TileOptions wide;
  wide.merge_radius = 1e9;
  const auto merged = infer_tiled(m, item.image, 0.0, wide);
  EXPECT_LT(merged.size(), all.size());
  // Padded inference for comparison keeps only in-image points too.
  const auto padded = infer_padded(m, item.image, 0.0);
  for (const auto& p : padded.proposals) EXPECT_LT(p.x, 300.0);
}

TEST(Infer, RejectsBadImages) {
  auto m = tiny_model();
  EXPECT_THROW(infer(m, Image({1, 32, 32})), ShapeError);
  Image bad({3, 32, 32});
  bad[3] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(infer(m, bad), NumericError);
}

TEST(MatchedDistance, Example) {
  ProposalSet ps;
  ps.proposals = {{3, 4, 0.9}, {100, 100, 0.9}, {10, 0, 0.9}};
  EXPECT_NEAR(mean_matched_distance({{0, 0}, {10, 1}}, ps, {}), 3.0, 1e-12);
  EXPECT_EQ(mean_matched_distance({}, ps, {}), 0.0);
}

TEST(PredictionsCsv, HeaderAndRows) {
  ProposalSet ps;
  ps.proposals = {{1.5, 2.25, 0.75}};
  std::ostringstream os;
  write_predictions_csv(os, "img7", ps);
  EXPECT_EQ(os.str(), "image_id,x,y,confidence\nimg7,1.500,2.250,0.750000\n");
  std::ostringstream none;
  write_predictions_csv(none, "x", ps, false);
  EXPECT_EQ(none.str().rfind("x,", 0), 0u);
}

TEST(Overlay, NoPointsOnlyStampChanges) {
  const Image img({3, 40, 60}, 0.4f);
  const Image out = render_overlay(img, {}, {});
  const std::size_t stamp_h = 14, stamp_w = std::string("GT:0 PR:0").size() * 8 + 4;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 40; ++y)
      for (std::size_t x = 0; x < 60; ++x) {
        const std::size_t i = (c * 40 + y) * 60 + x;
        if (y < stamp_h && x < stamp_w) continue;
        EXPECT_EQ(out[i], img[i]);
      }
  EXPECT_EQ(out[0], 0.0f);  // stamp background
}

TEST(Overlay, DotColorsAndPlacement) {
  const Image img({3, 64, 64}, 0.4f);
  const Image out = render_overlay(img, {{30, 40}}, {{50, 20}});
  const auto px = [&](std::size_t c, std::size_t y, std::size_t x) { return out[(c * 64 + y) * 64 + x]; };
  EXPECT_EQ(px(0, 40, 30), 0.0f);
  EXPECT_EQ(px(1, 40, 30), 1.0f);
  EXPECT_EQ(px(2, 40, 30), 0.0f);
  EXPECT_EQ(px(1, 40, 33), 1.0f);  // radius 3
  EXPECT_EQ(px(1, 40, 34), 0.4f);
  EXPECT_EQ(px(0, 20, 50), 1.0f);
  EXPECT_EQ(px(1, 20, 50), 0.0f);
  // Predictions are drawn over ground truth.
  const Image both = render_overlay(img, {{30, 40}}, {{30, 40}});
  EXPECT_EQ(both[(0 * 64 + 40) * 64 + 30], 1.0f);

  const auto path = (std::filesystem::temp_directory_path() / "soynet_overlay.png").string();
  render_overlay(img, {{30, 40}}, {{50, 20}}, path);
  const Image back = read_image(path);
  EXPECT_EQ(back[(1 * 64 + 40) * 64 + 30], 1.0f);
  EXPECT_EQ(back[(0 * 64 + 20) * 64 + 50], 1.0f);
}
