#include <cmath>

#include "doctest.h"
#include "mbridge/mtm/modality_loss.hpp"
#include "mbridge/mtm/mtm.hpp"
#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/grad_check.hpp"
#include "support.hpp"

using namespace mbridge;
using namespace mbridge::mtm;
using doctest::Approx;

TEST_CASE("pool_regions") {
  CHECK(pool_regions(Tensor::matrix(2, 2, {0, 2, 2, 0})) == Tensor::vector({1, 1}));
  CHECK(pool_regions(Tensor::matrix(1, 3, {4, -1, 2})) == Tensor::vector({4, -1, 2}));
  CHECK_THROWS_AS(pool_regions(Tensor()), InputError);

  Rng rng(1);
  const auto v = testing::random_tensor(rng, {3, 5});
  const auto pooled = pool_regions(v);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(pooled[j] == Approx((v.at(0, j) + v.at(1, j) + v.at(2, j)) / 3.0).epsilon(1e-15));
  }
  // Region order does not matter.
  const auto swapped = Tensor(v.shape(), [&] {
    std::vector<double> d(v.values());
    std::swap_ranges(d.begin(), d.begin() + 5, d.begin() + 10);
    return d;
  }());
  CHECK(max_abs_diff(pool_regions(swapped), pooled) <= 1e-15);
}

TEST_CASE("projector examples") {
  SUBCASE("zero weights") {
    MtmModel m(3, 2);
    CHECK(m.project(Tensor::vector({1, 2, 3})) == Tensor::vector({0, 0}));
  }
  SUBCASE("identity weights pass nonnegative input through") {
    MtmModel m(2, 2);
    m.layer1.weight.value = Tensor::matrix(2, 2, {1, 0, 0, 1});
    m.layer2.weight.value = Tensor::matrix(2, 2, {1, 0, 0, 1});
    CHECK(m.project(Tensor::vector({0.5, 3})) == Tensor::vector({0.5, 3}));
  }
  SUBCASE("hand-sized case") {
    MtmModel m(2, 2);
    m.layer1.weight.value = Tensor::matrix(2, 2, {1, 2, -1, 1});
    m.layer1.bias.value = Tensor::vector({0.5, -0.5});
    m.layer2.weight.value = Tensor::matrix(2, 2, {2, 0, 1, -3});
    m.layer2.bias.value = Tensor::vector({-1, 0});
    // v = (1, 1): W1·v + b1 = (3.5, -0.5); W2·that + b2 = (6, 5); ReLU keeps both.
    CHECK(m.project(Tensor::vector({1, 1})) == Tensor::vector({6, 5}));
    // v = (0, -1): W1·v + b1 = (-1.5, -1.5); W2·that + b2 = (-4, 3) → (0, 3).
    CHECK(m.project(Tensor::vector({0, -1})) == Tensor::vector({0, 3}));
  }
  SUBCASE("shape mismatch") {
    MtmModel m(3, 2);
    CHECK_THROWS_AS(m.project(Tensor::vector({1, 2})), DimensionError);
  }
}

TEST_CASE("loss examples") {
  const auto p = Tensor::vector({0.3, -1.2, 2.0});
  for (const auto kind : kAllLossKinds) {
    if (kind == ModalityLossKind::MMD) continue;
    CHECK(modality_loss(kind, p, p).value == Approx(0.0).epsilon(1e-15));
  }
  CHECK(mse_loss(std::vector<double>{1, 1}, std::vector<double>{0, 0}) == 1.0);
  CHECK(mae_loss(std::vector<double>{1, -3}, std::vector<double>{0, 0}) == 2.0);
  CHECK(cos_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == Approx(1.0));
  CHECK(cos_loss(std::vector<double>{1, 0}, std::vector<double>{-2, 0}) == Approx(2.0));
  CHECK_THROWS_AS(cos_loss(std::vector<double>{0, 0}, std::vector<double>{1, 0}), InputError);
  CHECK(kld_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == Approx(0.0));
  CHECK(kld_loss(std::vector<double>{1, 2}, std::vector<double>{2, 1}) > 0.0);
  // Softmax is shift invariant, so KLD only sees differences.
  CHECK(kld_loss(std::vector<double>{1, 2}, std::vector<double>{11, 12}) == Approx(0.0));

  Rng rng(2);
  const auto batch = testing::random_tensor(rng, {6, 4});
  CHECK(std::abs(mmd_loss(batch, batch).value) <= 1e-10);
  CHECK_THROWS_AS(mmd_loss(Tensor({1, 4}), Tensor({1, 4})), InputError);
  CHECK(mmd_loss(batch, testing::random_tensor(rng, {6, 4}) + Tensor({6, 4}, 3.0)).value > 0.0);
}

TEST_CASE("mmd bandwidth is the lower median pairwise distance") {
  // Rows 0, 1 | 3, 6 on a line: pairwise distances 1, 3, 6, 2, 5, 3 → sorted 1 2 3 3 5 6.
  const auto pred = Tensor::matrix(2, 1, {0, 1});
  const auto target = Tensor::matrix(2, 1, {3, 6});
  CHECK(mmd_loss(pred, target).bandwidth == 3.0);
  const auto same = Tensor::matrix(2, 1, {1, 1});
  CHECK(mmd_loss(same, same).bandwidth == 1.0);
}

TEST_CASE("loss properties on random pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = testing::random_tensor(rng, {5});
    const auto b = testing::random_tensor(rng, {5});
    for (const auto kind : kAllLossKinds) {
      if (kind == ModalityLossKind::MMD) continue;
      CHECK(modality_loss(kind, a, b).value >= 0.0);
    }
    CHECK(mse_loss(a.data(), b.data()) == mse_loss(b.data(), a.data()));
    CHECK(mae_loss(a.data(), b.data()) == mae_loss(b.data(), a.data()));
    CHECK(mse_loss(a.data(), b.data()) > 0.0);
    // COS vanishes for any positive rescaling.
    const double s = 0.1 + 5.0 * rng.uniform01();
    CHECK(std::abs(cos_loss((a * s).data(), a.data())) <= 1e-12);
    const auto pa = testing::random_tensor(rng, {4, 3});
    const auto pb = testing::random_tensor(rng, {4, 3});
    CHECK(mmd_loss(pa, pb).value >= -1e-12);
  }
  const std::vector<double> x{3, 0, 0};
  const std::vector<double> y{0, 1, 0};
  CHECK(std::abs(kld_loss(x, y) - kld_loss(y, x)) > 1e-3);
}

TEST_CASE("batched loss averages per-sample values") {
  Rng rng(4);
  const auto p = testing::random_tensor(rng, {3, 4});
  const auto t = testing::random_tensor(rng, {3, 4});
  for (const auto kind : kAllLossKinds) {
    if (kind == ModalityLossKind::MMD) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < 3; ++r) sum += modality_loss(kind, Tensor::vector({p.row(r).begin(), p.row(r).end()}),
                                                             Tensor::vector({t.row(r).begin(), t.row(r).end()})).value;
    CHECK(modality_loss(kind, p, t).value == Approx(sum / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(5);
  for (const auto kind : kAllLossKinds) {
    CAPTURE(to_string(kind));
    Parameter pred("pred", {4, 6});
    pred.value = testing::random_tensor(rng, {4, 6});
    const auto target = testing::random_tensor(rng, {4, 6});
    const auto f = [&] {
      pred.zero_grad();
      auto lv = modality_loss(kind, pred.value, target);
      pred.grad += lv.grad;
      return lv.value;
    };
    CHECK(grad_check(f, {&pred}, {1e-5, 24, 0}).max_rel_error <= 1e-4);
  }
}

TEST_CASE("projector gradient matches finite differences") {
  Rng rng(6);
  MtmModel m(5, 4);
  m.init_uniform(rng, 0.5);
  Parameter input("v", {3, 5});
  input.value = testing::random_tensor(rng, {3, 5});
  const auto weight = testing::random_tensor(rng, {3, 4});
  ParameterList params = m.parameters();
  params.push_back(&input);
  const auto f = [&] {
    zero_grads(params);
    MtmCache cache;
    const auto out = m.forward(input.value, &cache);
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) loss += weight[i] * out[i];
    input.grad += m.backward(cache, weight);
    return loss;
  };
  CHECK(grad_check(f, params).max_rel_error <= 1e-4);
}

TEST_CASE("projection is nonnegative") {
  Rng rng(7);
  MtmModel m(6, 5);
  m.init_uniform(rng, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = m.project(testing::random_tensor(rng, {6}, 3.0));
    for (double x : u.data()) CHECK(x >= 0.0);
  }
}

TEST_CASE("loss kind names") {
  CHECK(parse_loss_kind("MSE") == ModalityLossKind::MSE);
  CHECK(parse_loss_kind("mmd") == ModalityLossKind::MMD);
  CHECK_THROWS_AS(parse_loss_kind("l2"), InputError);
  for (const auto kind : kAllLossKinds) CHECK(parse_loss_kind(to_string(kind)) == kind);
}
