#pragma once

#include "mbridge/numcore/linear.hpp"
#include "mbridge/numcore/rng.hpp"

namespace mbridge::mtm {

/// Mean of the K region rows of V [K×d_v]. Throws InputError when K = 0.
Tensor pool_regions(const Tensor& regions);

struct MtmCache {
  Tensor input;   // [B×d_v]
  Tensor hidden;  // W1·v + b1
  Tensor pre;     // W2·hidden + b2, before ReLU
};

/// Modality transition projector: u' = ReLU(W2·(W1·v_g + b1) + b2).
///
/// There is no activation between the two affine layers. W1 is [d_e×d_v],
/// W2 is [d_e×d_e].
class MtmModel {
 public:
  MtmModel() = default;
  MtmModel(std::size_t d_v, std::size_t d_e);

  void init_uniform(Rng& rng, double bound = 0.08);

  std::size_t d_v() const { return layer1.in_dim(); }
  std::size_t d_e() const { return layer1.out_dim(); }

  /// Projects one pooled vector [d_v] to [d_e].
  Tensor project(const Tensor& pooled) const;
  /// Batched projection of rows [B×d_v] → [B×d_e].
  Tensor forward(const Tensor& pooled, MtmCache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns dL/dinput.
  Tensor backward(const MtmCache& cache, const Tensor& grad_out);

  ParameterList parameters();

  Linear layer1;
  Linear layer2;
};

}  // namespace mbridge::mtm
