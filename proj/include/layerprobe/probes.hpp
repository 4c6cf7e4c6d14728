#pragma once

// Label-free layer probes: tokenized-molecule entropy (TME) of each
// molecule's token Gram spectrum, and linear CKA between adjacent layers'
// pooled vectors.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"
#include "layerprobe/parallel.hpp"
#include "layerprobe/pooling.hpp"
#include "layerprobe/tensorio.hpp"

namespace layerprobe {

struct ProbeReport {
  std::string model_name;
  std::vector<std::size_t> layers;  // container layer indices, ascending
  std::vector<double> tme;          // nats
  std::vector<double> adjacent_cka;  // layers.size() - 1 entries
  std::vector<double> depth_percent;
  std::size_t molecule_count = 0;

  std::size_t num_layers() const noexcept { return layers.size(); }
};

// Relative size of negative eigenvalues tolerated (and clamped) before the
// Gram is considered broken.
inline constexpr double kNegativeEigenTolerance = 1e-8;
// Allowed CKA excursion outside [0, 1] before clipping.
inline constexpr double kCkaSlack = 1e-9;

// Shannon entropy (nats) of the normalised eigenvalue spectrum of h·hᵀ.
inline double molecule_entropy(const Matrix& h) {
  const Spectrum spectrum = sym_eig(gram(h));
  const double lambda_max = spectrum.eigenvalues.empty() ? 0.0 : spectrum.eigenvalues.front();
  double total = 0.0;
  std::vector<double> clamped;
  clamped.reserve(spectrum.eigenvalues.size());
  for (double l : spectrum.eigenvalues) {
    if (l < 0.0) {
      if (-l > kNegativeEigenTolerance * std::max(lambda_max, 0.0)) {
        throw NumericalError("token Gram has a negative eigenvalue " + std::to_string(l) +
                             " beyond round-off (lambda_max " + std::to_string(lambda_max) + ")");
      }
      l = 0.0;
    }
    clamped.push_back(l);
    total += l;
  }
  if (total == 0.0) return 0.0;
  double entropy = 0.0;
  for (double l : clamped) {
    if (l == 0.0) continue;
    const double p = l / total;
    entropy -= p * std::log(p);
  }
  return std::max(entropy, 0.0);
}

// Mean molecule entropy over the stack, summed in molecule order.
inline double tme(const LayerStack& stack) {
  if (stack.size() == 0) throw InputError("tme of an empty stack");
  double sum = 0.0;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    try {
      sum += molecule_entropy(stack.embeddings[i]);
    } catch (const std::exception& e) {
      rethrow_with_context(e, "molecule '" + stack.molecule_ids[i] + "': ");
    }
  }
  return sum / static_cast<double>(stack.size());
}

// Linear CKA ‖X̃ᵀỸ‖²_F / (‖X̃ᵀX̃‖_F ‖ỸᵀỸ‖_F) on column-centered inputs.
inline double linear_cka(const Matrix& x_in, const Matrix& y_in) {
  if (x_in.rows() != y_in.rows()) throw InputError("CKA inputs have different row counts");
  if (x_in.rows() < 2) throw InputError("CKA needs at least 2 molecules");
  // Canonical argument order so cka(x, y) and cka(y, x) sum identically.
  const bool swap = std::lexicographical_compare(y_in.data().begin(), y_in.data().end(), x_in.data().begin(),
                                                 x_in.data().end()) ||
                    (std::ranges::equal(x_in.data(), y_in.data()) && y_in.cols() < x_in.cols());
  const Matrix& a = swap ? y_in : x_in;
  const Matrix& b = swap ? x_in : y_in;

  const Matrix xc = center_columns(a);
  const Matrix yc = center_columns(b);
  const double sxx = frobenius(matmul_tn(xc, xc));
  const double syy = frobenius(matmul_tn(yc, yc));
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("constant representations (zero variance after centering)");
  const double sxy = frobenius(matmul_tn(xc, yc));
  const double value = (sxy * sxy) / (sxx * syy);
  if (!(value >= -kCkaSlack && value <= 1.0 + kCkaSlack)) {
    throw NumericalError("CKA value " + std::to_string(value) + " outside [0, 1]");
  }
  return std::clamp(value, 0.0, 1.0);
}

inline double cka_adjacent(const PooledMatrix& x, const PooledMatrix& y) {
  if (x.molecule_ids != y.molecule_ids) throw InputError("CKA inputs have mismatched molecule order");
  return linear_cka(x.vectors, y.vectors);
}

inline std::vector<double> depth_percent(std::size_t num_layers) {
  std::vector<double> out(num_layers, 0.0);
  if (num_layers < 2) return out;
  for (std::size_t k = 0; k < num_layers; ++k) {
    out[k] = 100.0 * static_cast<double>(k) / static_cast<double>(num_layers - 1);
  }
  return out;
}

// TME per layer, CKA per consecutive pair. Layers are processed concurrently;
// each value is computed single-threaded so output does not depend on workers.
inline ProbeReport probe_all(const std::vector<LayerStack>& layers, Pooling strategy, std::size_t workers = 1,
                             std::string model_name = {}) {
  if (layers.size() < 2) throw InputError("probe needs at least 2 layers");
  for (std::size_t k = 1; k < layers.size(); ++k) {
    if (layers[k].molecule_ids != layers[0].molecule_ids) {
      throw InputError("layer " + std::to_string(layers[k].layer_index) +
                       " has a different molecule set or order than layer " + std::to_string(layers[0].layer_index));
    }
  }
  const std::size_t count = layers.size();
  ProbeReport report;
  report.model_name = std::move(model_name);
  report.molecule_count = layers[0].size();
  report.tme.assign(count, 0.0);
  report.adjacent_cka.assign(count - 1, 0.0);
  std::vector<PooledMatrix> pooled(count);

  parallel_for(count, workers, [&](std::size_t k) {
    try {
      report.tme[k] = tme(layers[k]);
      pooled[k] = pool(layers[k], strategy);
    } catch (const std::exception& e) {
      rethrow_with_context(e, "layer " + std::to_string(layers[k].layer_index) + ": ");
    }
  });
  parallel_for(count - 1, workers, [&](std::size_t k) {
    try {
      report.adjacent_cka[k] = cka_adjacent(pooled[k], pooled[k + 1]);
    } catch (const std::exception& e) {
      rethrow_with_context(e, "CKA layers " + std::to_string(layers[k].layer_index) + "->" +
                                  std::to_string(layers[k + 1].layer_index) + ": ");
    }
  });

  for (const auto& l : layers) report.layers.push_back(l.layer_index);
  report.depth_percent = depth_percent(count);
  return report;
}

}  // namespace layerprobe
