#include "mbridge/mtm/mtm.hpp"

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge::mtm {

Tensor pool_regions(const Tensor& regions) {
  if (regions.rank() != 2) {
    throw InputError("pool_regions expects a [K×d_v] matrix, got " + shape_to_string(regions.shape()));
  }
  const std::size_t k = regions.rows();
  const std::size_t d = regions.cols();
  Tensor pooled({d});
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = regions.row(i);
    for (std::size_t j = 0; j < d; ++j) pooled[j] += row[j];
  }
  pooled *= 1.0 / static_cast<double>(k);
  return pooled;
}

MtmModel::MtmModel(std::size_t d_v, std::size_t d_e) : layer1("mtm.l1", d_v, d_e), layer2("mtm.l2", d_e, d_e) {
  layer1.weight.name = "mtm.W1";
  layer1.bias.name = "mtm.b1";
  layer2.weight.name = "mtm.W2";
  layer2.bias.name = "mtm.b2";
}

void MtmModel::init_uniform(Rng& rng, double bound) {
  for (auto* p : parameters()) p->init_uniform(rng, bound);
}

Tensor MtmModel::project(const Tensor& pooled) const {
  if (pooled.rank() != 1) {
    throw DimensionError("project expects a vector, got " + shape_to_string(pooled.shape()));
  }
  return forward(pooled.reshaped({1, pooled.size()})).reshaped({d_e()});
}

Tensor MtmModel::forward(const Tensor& pooled, MtmCache* cache) const {
  if (pooled.cols() != d_v()) {
    throw DimensionError("MTM input " + shape_to_string(pooled.shape()) + " vs d_v " + std::to_string(d_v()));
  }
  Tensor hidden = layer1.forward(pooled);
  Tensor pre = layer2.forward(hidden);
  Tensor out = relu(pre);
  if (cache) *cache = MtmCache{pooled, std::move(hidden), std::move(pre)};
  return out;
}

Tensor MtmModel::backward(const MtmCache& cache, const Tensor& grad_out) {
  const Tensor grad_pre = relu_backward(cache.pre, grad_out);
  const Tensor grad_hidden = layer2.backward(cache.hidden, grad_pre);
  return layer1.backward(cache.input, grad_hidden);
}

ParameterList MtmModel::parameters() {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias};
}

}  // namespace mbridge::mtm
