#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "layerprobe/pipeline.hpp"
#include "layerprobe/probes.hpp"
#include "layerprobe/synth.hpp"
#include "test_support.hpp"

using layerprobe::LayerTransform;
using layerprobe::SynthSpec;

namespace {

SynthSpec small_spec(std::vector<LayerTransform> transforms, std::uint64_t seed = 3) {
  SynthSpec s;
  s.seed = seed;
  s.n_molecules = 40;
  s.dim = 6;
  s.token_min = 3;
  s.token_max = 7;
  s.num_layers = transforms.size() + 1;
  s.transforms = std::move(transforms);
  return s;
}

}  // namespace

TEST(Xoshiro, DeterministicAndSeedSensitive) {
  layerprobe::Xoshiro256 a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Xoshiro, UniformAndNormalMoments) {
  layerprobe::Xoshiro256 rng(1);
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5e-3);
  EXPECT_NEAR(sn / n, 0.0, 1e-2);
  EXPECT_NEAR(sn2 / n, 1.0, 2e-2);
}

TEST(Synth, SameSeedSameBytes) {
  const auto a = layerprobe::generate(layerprobe::compression_preset(7));
  const auto b = layerprobe::generate(layerprobe::compression_preset(7));
  const auto c = layerprobe::generate(layerprobe::compression_preset(8));
  ASSERT_EQ(a.layers.size(), 6u);
  for (std::size_t k = 0; k < a.layers.size(); ++k) EXPECT_EQ(a.layers[k].embeddings, b.layers[k].embeddings);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_NE(a.layers[0].embeddings, c.layers[0].embeddings);
}

TEST(Synth, ShapesAndSplit) {
  const auto d = layerprobe::generate(layerprobe::compression_preset(7));
  EXPECT_EQ(d.index.molecule_ids.size(), 200u);
  EXPECT_EQ(d.index.dim, 16u);
  for (std::size_t t : d.index.token_counts) {
    EXPECT_GE(t, 6u);
    EXPECT_LE(t, 14u);
  }
  std::size_t train = 0, valid = 0, test = 0;
  for (const auto& [id, s] : d.manifest.split) {
    train += s == layerprobe::Split::train;
    valid += s == layerprobe::Split::valid;
    test += s == layerprobe::Split::test;
  }
  EXPECT_EQ(train, 140u);
  EXPECT_EQ(valid, 20u);
  EXPECT_EQ(test, 40u);
  // Final block keeps only the first two coordinates.
  for (const auto& h : d.layers[5].embeddings)
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t j = 2; j < 16; ++j) ASSERT_EQ(h(r, j), 0.0);
}

TEST(Synth, IdentityRotationScaleLeaveProbesUnchanged) {
  const auto d = layerprobe::generate(
      small_spec({LayerTransform::identity(), LayerTransform::rotation(), LayerTransform::scaled(2.5)}));
  const auto report = layerprobe::probe_all(d.layers, layerprobe::Pooling::mean);
  for (double c : report.adjacent_cka) EXPECT_NEAR(c, 1.0, 1e-9);
  for (double t : report.tme) EXPECT_NEAR(t, report.tme[0], 1e-9);
}

TEST(Synth, CompressToRankOneZeroesEntropy) {
  const auto d = layerprobe::generate(small_spec({LayerTransform::noise(0.1), LayerTransform::rank_compress(1)}));
  const auto report = layerprobe::probe_all(d.layers, layerprobe::Pooling::mean);
  EXPECT_NEAR(report.tme[2], 0.0, 1e-12);
  EXPECT_GT(report.tme[1], 0.5);
}

TEST(Synth, ClassificationLabelsAreBalancedAndBinary) {
  auto spec = layerprobe::compression_preset(11);
  spec.task_kind = layerprobe::TaskKind::binary_classification;
  const auto d = layerprobe::generate(spec);
  EXPECT_EQ(d.manifest.metric, layerprobe::MetricName::auroc);
  std::size_t pos = 0;
  for (const auto& [id, y] : d.manifest.labels) {
    ASSERT_TRUE(y == 0.0 || y == 1.0);
    pos += y == 1.0;
  }
  EXPECT_EQ(pos, 100u);
}

TEST(Synth, ValidationErrors) {
  auto s = small_spec({LayerTransform::identity()});
  s.num_layers = 3;
  EXPECT_THROW(layerprobe::generate(s), layerprobe::InputError);
  s = small_spec({LayerTransform::identity()});
  s.target = layerprobe::PlantedTarget{0, {6}, 0.0};
  EXPECT_THROW(layerprobe::generate(s), layerprobe::InputError);
  s = small_spec({LayerTransform::identity()});
  s.token_min = 0;
  EXPECT_THROW(layerprobe::generate(s), layerprobe::InputError);
}

TEST(Synth, ParseTransforms) {
  const auto t = layerprobe::parse_transforms("noise:0.1,rotate,scale:2,compress:3,identity");
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t[0].kind, LayerTransform::Kind::noise);
  EXPECT_EQ(t[0].value, 0.1);
  EXPECT_EQ(t[1].kind, LayerTransform::Kind::rotation);
  EXPECT_EQ(t[2].value, 2.0);
  EXPECT_EQ(t[3].rank, 3u);
  EXPECT_EQ(t[4].kind, LayerTransform::Kind::identity);
  EXPECT_THROW(layerprobe::parse_transforms("warp"), layerprobe::InputError);
  EXPECT_THROW(layerprobe::parse_transforms("scale:x"), layerprobe::InputError);
  EXPECT_THROW(layerprobe::parse_transforms("compress:1.5"), layerprobe::InputError);
}

TEST(Synth, ContainerRoundTrip) {
  testing_support::TempDir dir;
  const auto d = layerprobe::generate(small_spec({LayerTransform::noise(0.2)}));
  layerprobe::write_synth_container(dir.path(), d);
  const auto idx = layerprobe::load_index(dir.path());
  for (std::size_t k = 0; k < 2; ++k) {
    const auto s = layerprobe::load_layer_stack(dir.path(), idx, k);
    EXPECT_EQ(s.embeddings, d.layers[k].embeddings);
  }
  const auto m = layerprobe::load_manifest(dir / "manifest.json");
  EXPECT_EQ(m.labels, d.manifest.labels);
}
