#include <doctest.h>

#include <cmath>

#include "carotid/errors.hpp"
#include "carotid/loss_schedule.hpp"

using namespace carotid;

TEST_CASE("adaptive weights: endpoints") {
  for (double a : {0.1, 0.5, 2.0}) {
    const auto w0 = atdl_weights(0.0, 0.0, a);
    CHECK(w0.alpha == 0.0);
    CHECK(w0.beta == 0.0);
    CHECK(w0.gamma == 1.0);
    const auto w1 = atdl_weights(1.0, 1.0, a);
    CHECK(w1.alpha == 1.0 / 3);
    CHECK(w1.beta == 1.0 / 3);
    CHECK(w1.gamma == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
}

TEST_CASE("adaptive weights: worked values") {
  auto w = atdl_weights(0.5, 0.5, 0.5);
  CHECK(w.alpha == doctest::Approx(0.13333333333).epsilon(1e-9));
  CHECK(w.gamma == doctest::Approx(0.73333333333).epsilon(1e-9));
  w = atdl_weights(0.1, 0.2, 0.5);
  CHECK(w.alpha == doctest::Approx(0.1 / 4.35).epsilon(1e-12));
  CHECK(w.alpha == doctest::Approx(0.02299).epsilon(1e-3));
  CHECK(w.beta == doctest::Approx(0.04762).epsilon(1e-3));
  CHECK(w.gamma == doctest::Approx(0.92939).epsilon(1e-4));
}

TEST_CASE("adaptive weights: monotone on a 101-point grid, simplex, gamma >= 1/3") {
  for (double a : {0.1, 0.5, 2.0}) {
    double prev = -1;
    for (int i = 0; i <= 100; ++i) {
      const double l = i / 100.0;
      const auto w = atdl_weights(l, 1.0 - l, a);
      CHECK(std::abs(w.alpha + w.beta + w.gamma - 1.0) <= 1e-12);
      CHECK(w.gamma >= 1.0 / 3 - 1e-15);
      CHECK(w.alpha >= 0.0);
      CHECK(w.alpha <= 1.0 / 3);
      CHECK(w.alpha > prev);
      prev = w.alpha;
      // Same function for both boundaries.
      CHECK(atdl_weights(1.0 - l, l, a).beta == w.alpha);
    }
  }
}

TEST_CASE("adaptive weights reject out-of-range inputs") {
  CHECK_THROWS_AS(atdl_weights(-0.1, 0.5, 0.5), ArgumentError);
  CHECK_THROWS_AS(atdl_weights(0.5, 1.1, 0.5), ArgumentError);
  CHECK_THROWS_AS(atdl_weights(0.5, 0.5, -1.0), ArgumentError);
  CHECK_THROWS_AS(atdl_weights(0.5, 0.5, 0.0), ArgumentError);
  CHECK_THROWS_AS(atdl_weights(std::nan(""), 0.5, 0.5), ArgumentError);
}

TEST_CASE("two-phase schedule: first ceil(E/2) epochs are uniform") {
  for (int e = 0; e < 50; ++e) CHECK(in_uniform_phase({e, 50, 0.5}) == (e < 25));
  // Epoch 10 of 50 (0-based 9) is uniform; epoch 30 (0-based 29) is adaptive.
  CHECK(schedule_weights({9, 50, 0.5}, 0.1, 0.2).alpha == 1.0 / 3);
  CHECK(schedule_weights({29, 50, 0.5}, 0.1, 0.2).alpha == doctest::Approx(0.02299).epsilon(1e-3));
  CHECK_THROWS_AS(schedule_weights({50, 50, 0.5}, 0.1, 0.2), ArgumentError);
  for (int e = 0; e < 9; ++e) CHECK(in_uniform_phase({e, 9, 0.5}) == (e < 5));
  const auto early = schedule_weights({3, 50, 0.5}, 0.1, 0.9);
  CHECK(early.alpha == 1.0 / 3);
  CHECK(early.beta == 1.0 / 3);
  const auto late = schedule_weights({25, 50, 0.5}, 0.1, 0.2);
  CHECK(late.alpha == atdl_weights(0.1, 0.2, 0.5).alpha);
}

TEST_CASE("fixed weights") {
  for (LossMode m : {LossMode::SDL, LossMode::DDL}) {
    const auto w = fixed_weights(m);
    CHECK(w.alpha == 0.5);
    CHECK(w.beta == 0.5);
    CHECK(w.gamma == 0.0);
  }
  const auto t = fixed_weights(LossMode::TDL);
  CHECK(t.alpha == 1.0 / 3);
  CHECK(t.gamma == 1.0 / 3);
  CHECK(fixed_weights(LossMode::ATDL).beta == 1.0 / 3);
}

TEST_CASE("weight validation and mode names") {
  CHECK_NOTHROW(validate_weights(LossWeights::uniform()));
  CHECK_THROWS_AS(validate_weights({0.5, 0.5, 0.5}), ArgumentError);
  CHECK_THROWS_AS(validate_weights({-0.1, 0.6, 0.5}), ArgumentError);
  for (LossMode m : {LossMode::SDL, LossMode::DDL, LossMode::TDL, LossMode::ATDL})
    CHECK(loss_mode_from_string(to_string(m)) == m);
  CHECK(loss_mode_from_string("atdl") == LossMode::ATDL);
  CHECK_THROWS_AS(loss_mode_from_string("quad"), ArgumentError);
}
