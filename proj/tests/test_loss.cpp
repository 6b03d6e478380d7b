#include "torch_doctest.hpp"

#include <cmath>

#include "carotid/errors.hpp"
#include "carotid/loss.hpp"
#include "carotid/loss_schedule.hpp"

using namespace carotid;

namespace {

torch::Tensor random_pred(std::int64_t n, torch::Generator& gen) {
  // Keep MAB and LIB apart by at least 1e-3 so relu(mab - lib) is smooth
  // within the finite-difference step.
  auto p = torch::rand({n, 2, 8, 8}, gen, torch::kFloat64) * 0.9 + 0.05;
  auto gap = (p.select(1, 0) - p.select(1, 1)).abs();
  p.select(1, 1).masked_fill_(gap < 1e-3, 0.5);
  p.select(1, 0).masked_fill_(gap < 1e-3, 0.8);
  return p;
}

torch::Tensor random_target(std::int64_t n, torch::Generator& gen) {
  auto mab = (torch::rand({n, 1, 8, 8}, gen, torch::kFloat64) < 0.6).to(torch::kFloat64);
  auto lib = mab * (torch::rand({n, 1, 8, 8}, gen, torch::kFloat64) < 0.5).to(torch::kFloat64);
  return torch::cat({mab, lib}, 1);
}

// Relative error between analytic and central-difference gradients of a
// scalar function of `x`, measured in the Euclidean norm.
template <class F>
double gradient_error(F f, torch::Tensor x) {
  x = x.clone().requires_grad_(true);
  f(x).backward();
  const auto analytic = x.grad().clone();
  torch::NoGradGuard g;
  auto numeric = torch::zeros_like(x);
  auto xf = x.detach().clone();
  auto flat = xf.view(-1);
  auto nflat = numeric.view(-1);
  const double h = 1e-6;
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f(xf).template item<double>();
    flat[i] = orig - h;
    const double down = f(xf).template item<double>();
    flat[i] = orig;
    nflat[i] = (up - down) / (2 * h);
  }
  const double scale = std::max(analytic.norm().item<double>(), numeric.norm().item<double>());
  return (analytic - numeric).norm().item<double>() / std::max(scale, 1e-12);
}

}  // namespace

TEST_CASE("dice loss values") {
  const auto y = torch::tensor({1.0, 1.0, 0.0, 0.0}).view({1, 4});
  CHECK(dice_loss(y, y).item<double>() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dice_loss(1 - y, y).item<double>() == doctest::Approx(1.0).epsilon(1e-6));
  const auto empty = torch::zeros({1, 4}, torch::kFloat64);
  CHECK(dice_loss(empty, empty).item<double>() == doctest::Approx(0.0));
  // 2*0.5 / (2 + 1) for a half-confident prediction on a two-pixel target.
  const auto p = torch::tensor({0.5, 0.5, 0.0, 0.0}, torch::kFloat64).view({1, 4});
  CHECK(dice_loss(p, y.to(torch::kFloat64)).item<double>() ==
        doctest::Approx(1 - (2.0 + 1e-6) / (3.0 + 1e-6)).epsilon(1e-12));
  CHECK(dice_loss(torch::rand({3, 2, 5, 5}), torch::rand({3, 2, 5, 5})).sizes() ==
        torch::IntArrayRef({3}));
}

TEST_CASE("component losses use relu(mab - lib) for the wall") {
  auto pred = torch::zeros({1, 2, 1, 3}, torch::kFloat64);
  pred[0][0] = torch::tensor({1.0, 1.0, 0.2}, torch::kFloat64);
  pred[0][1] = torch::tensor({0.0, 1.0, 0.6}, torch::kFloat64);
  auto target = torch::zeros({1, 2, 1, 3}, torch::kFloat64);
  target[0][0] = torch::tensor({1.0, 1.0, 0.0}, torch::kFloat64);
  target[0][1] = torch::tensor({0.0, 1.0, 0.0}, torch::kFloat64);
  const auto c = component_losses(pred, target);
  // Wall prediction (1, 0, 0) equals the wall target exactly.
  CHECK(c.cvw.item<double>() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(c.mab.item<double>() > 0.0);
}

TEST_CASE("soft Dice gradient matches central differences on 20 random 8x8 instances") {
  torch::Generator gen = at::detail::createCPUGenerator(123);
  for (int t = 0; t < 20; ++t) {
    const auto target = random_target(1, gen).select(1, 0);
    const auto pred = torch::rand({1, 8, 8}, gen, torch::kFloat64);
    const double err = gradient_error([&](const torch::Tensor& p) { return dice_loss(p, target).sum(); }, pred);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("composite objectives match central differences on 20 random 8x8 instances") {
  torch::Generator gen = at::detail::createCPUGenerator(321);
  for (int t = 0; t < 20; ++t) {
    const auto target = random_target(2, gen);
    const auto pred = random_pred(2, gen);
    for (LossMode m : {LossMode::SDL, LossMode::DDL, LossMode::TDL}) {
      const double err = gradient_error(
          [&](const torch::Tensor& p) { return objective(p, target, m, std::nullopt).total; }, pred);
      CHECK(err <= 1e-4);
    }
    // ATDL in both phases. The adaptive weights are detached, so the reference
    // is the weighted sum with the weights frozen at the evaluation point.
    for (int epoch : {0, 9}) {
      const ScheduleState st{epoch, 10, 0.5};
      const auto at = objective(pred, target, LossMode::ATDL, st);
      const double err = gradient_error(
          [&](const torch::Tensor& p) { return weighted_objective(p, target, at.weights).total; }, pred);
      CHECK(err <= 1e-4);
      auto x = pred.clone().requires_grad_(true);
      objective(x, target, LossMode::ATDL, st).total.backward();
      auto y = pred.clone().requires_grad_(true);
      weighted_objective(y, target, at.weights).total.backward();
      CHECK(torch::allclose(x.grad(), y.grad(), 1e-12, 1e-14));
    }
  }
}

TEST_CASE("objective weights per mode") {
  torch::Generator gen = at::detail::createCPUGenerator(5);
  const auto target = random_target(4, gen);
  const auto pred = random_pred(4, gen);
  const auto tdl = objective(pred, target, LossMode::TDL, std::nullopt);
  CHECK(tdl.weights.alpha == doctest::Approx(1.0 / 3));
  CHECK(tdl.weights.gamma == doctest::Approx(1.0 / 3));
  const auto ddl = objective(pred, target, LossMode::DDL, std::nullopt);
  CHECK(ddl.weights.alpha == 0.5);
  CHECK(ddl.weights.beta == 0.5);
  CHECK(ddl.weights.gamma == 0.0);
  CHECK(ddl.total.item<double>() == doctest::Approx(0.5 * (ddl.loss_mab + ddl.loss_lib)).epsilon(1e-12));
  CHECK_THROWS_AS(objective(pred, target, LossMode::ATDL, std::nullopt), ArgumentError);

  const auto late = objective(pred, target, LossMode::ATDL, ScheduleState{8, 10, 0.5});
  const auto expect = atdl_weights(late.loss_mab, late.loss_lib, 0.5);
  CHECK(late.weights.alpha == doctest::Approx(expect.alpha).epsilon(1e-12));
  CHECK(late.weights.beta == doctest::Approx(expect.beta).epsilon(1e-12));
  const auto early = objective(pred, target, LossMode::ATDL, ScheduleState{4, 10, 0.5});
  CHECK(early.weights.alpha == doctest::Approx(1.0 / 3));
}

TEST_CASE("shape mismatch is rejected") {
  CHECK_THROWS_AS(component_losses(torch::rand({1, 2, 4, 4}), torch::rand({1, 2, 4, 5})), ShapeError);
  CHECK_THROWS_AS(component_losses(torch::rand({1, 3, 4, 4}), torch::rand({1, 3, 4, 4})), ShapeError);
}
