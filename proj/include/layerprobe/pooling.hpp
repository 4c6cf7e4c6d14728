#pragma once

#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"
#include "layerprobe/tensorio.hpp"
#include "layerprobe/types.hpp"

namespace layerprobe {

// One pooled vector per molecule, rows in stack order.
struct PooledMatrix {
  std::vector<std::string> molecule_ids;
  Matrix vectors;
};

// mean: arithmetic mean of the token rows. cls: row 0 copied verbatim.
// Graph models export node embeddings as token rows, so they use mean.
inline PooledMatrix pool(const LayerStack& stack, Pooling strategy) {
  PooledMatrix out{stack.molecule_ids, Matrix(stack.size(), stack.dim)};
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const Matrix& h = stack.embeddings[i];
    if (h.rows() == 0) throw InputError("molecule '" + stack.molecule_ids[i] + "' has an empty token matrix");
    if (h.cols() != stack.dim) throw InputError("molecule '" + stack.molecule_ids[i] + "' has wrong width");
    auto dst = out.vectors.row(i);
    if (strategy == Pooling::cls) {
      std::copy(h.row(0).begin(), h.row(0).end(), dst.begin());
      continue;
    }
    for (std::size_t t = 0; t < h.rows(); ++t) {
      const auto src = h.row(t);
      for (std::size_t j = 0; j < stack.dim; ++j) dst[j] += src[j];
    }
    const auto count = static_cast<double>(h.rows());
    for (double& v : dst) v /= count;
  }
  return out;
}

}  // namespace layerprobe
