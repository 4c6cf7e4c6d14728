#pragma once

// Synthetic multi-layer token stacks with known structure, used as test
// oracles and as a demo container.
//
// Random stream (pinned so golden outputs are portable):
//   * generator: xoshiro256** seeded with four successive splitmix64 outputs
//     starting from the 64-bit seed;
//   * uniform: (next() >> 11) * 2^-53 in [0, 1);
//   * normal: Box–Muller on two uniforms, sqrt(-2 ln(1 - u1)) * cos(2π u2),
//     one normal per pair, no caching.
// Draw order: token counts (tmin + next() % (tmax - tmin + 1)) per molecule;
// layer-0 entries molecule by molecule, row-major; then per transform in
// order: d*d normals for a rotation, one normal per entry for noise; then one
// normal per molecule of target noise (or label noise when no target is
// planted).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"
#include "layerprobe/pooling.hpp"
#include "layerprobe/tensorio.hpp"

namespace layerprobe {

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix64(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4]{};
};

struct LayerTransform {
  enum class Kind { identity, rotation, scaled, rank_compress, noise };
  Kind kind = Kind::identity;
  double value = 0.0;     // scale factor c or noise sigma
  std::size_t rank = 0;   // rank_compress only

  static LayerTransform identity() { return {}; }
  static LayerTransform rotation() { return {Kind::rotation, 0.0, 0}; }
  static LayerTransform scaled(double c) { return {Kind::scaled, c, 0}; }
  static LayerTransform rank_compress(std::size_t r) { return {Kind::rank_compress, 0.0, r}; }
  static LayerTransform noise(double sigma) { return {Kind::noise, sigma, 0}; }
};

// Target = Σ_j pooled(layer)[:, j] over `dims`, plus N(0, noise²).
struct PlantedTarget {
  std::size_t layer = 0;
  std::vector<std::size_t> dims;
  double noise = 0.0;
};

struct SynthSpec {
  std::size_t n_molecules = 200;
  std::size_t token_min = 6;
  std::size_t token_max = 14;
  std::size_t dim = 16;
  std::size_t num_layers = 6;
  std::vector<LayerTransform> transforms;  // num_layers - 1 entries
  std::optional<PlantedTarget> target;
  TaskKind task_kind = TaskKind::regression;
  Pooling pooling = Pooling::mean;
  std::uint64_t seed = 0;
  std::string model_name = "synth";
  std::string task_name = "synth-task";
};

struct SynthData {
  ContainerIndex index;
  std::vector<LayerStack> layers;
  TaskManifest manifest;
  std::vector<double> targets;  // continuous target before any thresholding
};

// Compression signature: four noisy interior steps, then the last block keeps
// only two coordinates while the target lives in coordinates 2..5 of the
// second-to-last layer.
inline SynthSpec compression_preset(std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.seed = seed;
  spec.transforms = {LayerTransform::noise(0.1), LayerTransform::noise(0.1), LayerTransform::noise(0.1),
                     LayerTransform::noise(0.1), LayerTransform::rank_compress(2)};
  spec.target = PlantedTarget{4, {2, 3, 4, 5}, 0.05};
  return spec;
}

inline void validate(const SynthSpec& s) {
  if (s.n_molecules < 2) throw InputError("synth: need at least 2 molecules");
  if (s.token_min == 0 || s.token_min > s.token_max) throw InputError("synth: invalid token count range");
  if (s.dim == 0) throw InputError("synth: dim must be positive");
  if (s.num_layers < 1) throw InputError("synth: need at least 1 layer");
  if (s.transforms.size() + 1 != s.num_layers) {
    throw InputError("synth: expected " + std::to_string(s.num_layers - 1) + " transforms, got " +
                     std::to_string(s.transforms.size()));
  }
  for (const auto& t : s.transforms) {
    if (t.kind == LayerTransform::Kind::rank_compress && t.rank > s.dim) throw InputError("synth: rank exceeds dim");
    if (t.kind == LayerTransform::Kind::noise && !(t.value >= 0.0)) throw InputError("synth: noise sigma must be >= 0");
    if (t.kind == LayerTransform::Kind::scaled && (t.value == 0.0 || !std::isfinite(t.value))) {
      throw InputError("synth: scale must be finite and non-zero");
    }
  }
  if (s.target) {
    if (s.target->layer >= s.num_layers) throw InputError("synth: target layer out of range");
    if (s.target->dims.empty()) throw InputError("synth: target needs at least one direction");
    for (auto j : s.target->dims)
      if (j >= s.dim) throw InputError("synth: target direction out of range");
    if (!(s.target->noise >= 0.0)) throw InputError("synth: target noise must be >= 0");
  }
}

// Rows of a seeded Gaussian matrix orthonormalised by modified Gram–Schmidt.
inline Matrix random_orthogonal(std::size_t d, Xoshiro256& rng) {
  Matrix q(d, d);
  for (double& v : q.data()) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    auto qi = q.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const auto qk = q.row(k);
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += qi[j] * qk[j];
      for (std::size_t j = 0; j < d; ++j) qi[j] -= dot * qk[j];
    }
    double norm = 0.0;
    for (double v : qi) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw NumericalError("random_orthogonal: degenerate draw");
    for (double& v : qi) v /= norm;
  }
  return q;
}

inline Split round_robin_split(std::size_t molecule) {
  const std::size_t r = molecule % 10;
  if (r < 7) return Split::train;
  if (r == 7) return Split::valid;
  return Split::test;
}

inline SynthData generate(const SynthSpec& spec) {
  validate(spec);
  Xoshiro256 rng(spec.seed);
  const std::size_t n = spec.n_molecules;
  const std::size_t d = spec.dim;

  SynthData out;
  out.index.dim = d;
  out.index.num_layers = spec.num_layers;
  out.index.model_name = spec.model_name;
  out.index.pooling_default = spec.pooling;
  const std::size_t span = spec.token_max - spec.token_min + 1;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "mol_%05zu", i);
    out.index.molecule_ids.emplace_back(id);
    out.index.token_counts.push_back(spec.token_min + static_cast<std::size_t>(rng.next() % span));
  }

  LayerStack base;
  base.layer_index = 0;
  base.molecule_ids = out.index.molecule_ids;
  base.token_counts = out.index.token_counts;
  base.dim = d;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix h(out.index.token_counts[i], d);
    for (double& v : h.data()) v = rng.normal();
    base.embeddings.push_back(std::move(h));
  }
  out.layers.push_back(std::move(base));

  for (std::size_t k = 0; k < spec.transforms.size(); ++k) {
    const LayerTransform& t = spec.transforms[k];
    LayerStack next = out.layers.back();
    next.layer_index = k + 1;
    switch (t.kind) {
      case LayerTransform::Kind::identity:
        break;
      case LayerTransform::Kind::rotation: {
        const Matrix q = random_orthogonal(d, rng);
        for (auto& h : next.embeddings) h = matmul(h, q);
        break;
      }
      case LayerTransform::Kind::scaled:
        for (auto& h : next.embeddings)
          for (double& v : h.data()) v *= t.value;
        break;
      case LayerTransform::Kind::rank_compress:
        for (auto& h : next.embeddings)
          for (std::size_t r = 0; r < h.rows(); ++r)
            for (std::size_t j = t.rank; j < d; ++j) h(r, j) = 0.0;
        break;
      case LayerTransform::Kind::noise:
        for (auto& h : next.embeddings)
          for (double& v : h.data()) v += t.value * rng.normal();
        break;
    }
    out.layers.push_back(std::move(next));
  }

  out.targets.assign(n, 0.0);
  if (spec.target) {
    const PooledMatrix pooled = pool(out.layers[spec.target->layer], spec.pooling);
    for (std::size_t i = 0; i < n; ++i) {
      double y = 0.0;
      for (auto j : spec.target->dims) y += pooled.vectors(i, j);
      out.targets[i] = y + spec.target->noise * rng.normal();
    }
  } else {
    for (double& y : out.targets) y = rng.normal();
  }

  TaskManifest& m = out.manifest;
  m.task_name = spec.task_name;
  m.task_kind = spec.task_kind;
  m.pooling = spec.pooling;
  m.metric = spec.task_kind == TaskKind::regression ? MetricName::mae : MetricName::auroc;
  double threshold = 0.0;
  if (spec.task_kind == TaskKind::binary_classification) {
    std::vector<double> sorted = out.targets;
    std::sort(sorted.begin(), sorted.end());
    threshold = sorted[(n - 1) / 2];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = out.index.molecule_ids[i];
    m.labels[id] = spec.task_kind == TaskKind::regression ? out.targets[i] : (out.targets[i] > threshold ? 1.0 : 0.0);
    m.split[id] = round_robin_split(i);
  }
  validate_manifest(m);
  return out;
}

// Writes layer NPYs, index.json and manifest.json.
inline void write_synth_container(const fs::path& dir, const SynthData& data) {
  write_container(dir, data.index, data.layers);
  write_manifest(dir / "manifest.json", data.manifest);
}

// Parses "noise:0.1,rotate,scale:2,compress:2,identity".
inline std::vector<LayerTransform> parse_transforms(const std::string& text) {
  std::vector<LayerTransform> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    const std::string name = item.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string{} : item.substr(colon + 1);
    auto number = [&]() {
      try {
        std::size_t used = 0;
        const double v = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
        return v;
      } catch (const std::exception&) {
        throw InputError("synth: transform '" + item + "' needs a numeric argument");
      }
    };
    if (name == "identity") {
      out.push_back(LayerTransform::identity());
    } else if (name == "rotate") {
      out.push_back(LayerTransform::rotation());
    } else if (name == "scale") {
      out.push_back(LayerTransform::scaled(number()));
    } else if (name == "compress") {
      const double r = number();
      if (r < 0 || r != std::floor(r)) throw InputError("synth: compress rank must be a non-negative integer");
      out.push_back(LayerTransform::rank_compress(static_cast<std::size_t>(r)));
    } else if (name == "noise") {
      out.push_back(LayerTransform::noise(number()));
    } else {
      throw InputError("synth: unknown transform '" + name + "'");
    }
  }
  return out;
}

}  // namespace layerprobe
