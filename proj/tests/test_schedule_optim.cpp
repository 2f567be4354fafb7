#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wetseg/nn/optimizer.hpp"
#include "wetseg/nn/schedule.hpp"

using namespace wetseg;
using namespace wetseg::nn;

TEST_CASE("cosine schedule with warm restarts") {
  const double lr = 1e-3;
  ScheduleSpec sched{0.0, 10, 2};

  SECTION("boundary values to 1e-9") {
    CHECK(lr_at(0, lr, sched) == Catch::Approx(lr).margin(1e-9));
    CHECK(lr_at(10, lr, sched) == Catch::Approx(lr).margin(1e-9));   // first restart
    CHECK(lr_at(30, lr, sched) == Catch::Approx(lr).margin(1e-9));   // second: 10 + 20
    CHECK(lr_at(70, lr, sched) == Catch::Approx(lr).margin(1e-9));   // third: +40
  }

  SECTION("strictly decreasing within the first cycle") {
    for (int t = 1; t < 10; ++t) {
      CHECK(lr_at(t, lr, sched) < lr_at(t - 1, lr, sched));
      CHECK(lr_at(t, lr, sched) > 0.0);
      CHECK(lr_at(t, lr, sched) < lr);
    }
  }

  SECTION("second cycle spans 2*t0 steps") {
    // halfway through the second cycle the rate is exactly the midpoint
    CHECK(lr_at(20, lr, sched) == Catch::Approx(0.5 * lr).margin(1e-9));
    // one step before the second restart the rate is still positive
    CHECK(lr_at(29, lr, sched) > 0.0);
    // the phase at 10 + k matches cos(pi*k/20)
    for (int k = 0; k < 20; ++k) {
      const double expect = 0.5 * lr * (1.0 + std::cos(M_PI * k / 20.0));
      CHECK(lr_at(10 + k, lr, sched) == Catch::Approx(expect).margin(1e-9));
    }
  }

  SECTION("bounded by [eta_min, lr]") {
    ScheduleSpec with_floor{2e-4, 5, 2};
    for (int t = 0; t < 200; ++t) {
      const double v = lr_at(t, lr, with_floor);
      CHECK(v >= with_floor.eta_min - 1e-15);
      CHECK(v <= lr + 1e-15);
    }
  }

  SECTION("t_mult = 1 keeps a constant cycle length") {
    ScheduleSpec flat{0.0, 8, 1};
    for (int cycle = 0; cycle < 4; ++cycle)
      CHECK(lr_at(8 * cycle, lr, flat) == Catch::Approx(lr).margin(1e-12));
  }
}

TEST_CASE("adamw: two hand-computed steps") {
  // single parameter, constant gradient 0.5, no weight decay
  std::vector<double> w{1.0}, g{0.5};
  AdamW<double> opt({{w.data(), g.data(), 1}}, {0.1, 0.9, 0.999, 1e-8, 0.0});

  opt.step();
  // m=0.05, v=0.00025, mhat=0.5, vhat=0.25 -> w -= 0.1*0.5/(0.5+1e-8)
  CHECK(w[0] == Catch::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));

  const double m2 = 0.9 * 0.05 + 0.1 * 0.5;
  const double v2 = 0.999 * 0.00025 + 0.001 * 0.25;
  const double mhat = m2 / (1 - 0.9 * 0.9);
  const double vhat = v2 / (1 - 0.999 * 0.999);
  const double prev = w[0];
  opt.step();
  CHECK(w[0] == Catch::Approx(prev - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adamw: decoupled weight decay acts even with zero gradient") {
  std::vector<double> w{2.0}, g{0.0};
  AdamW<double> opt({{w.data(), g.data(), 1}}, {1e-3, 0.9, 0.999, 1e-8, 0.01});
  opt.step();
  CHECK(w[0] == Catch::Approx(2.0 * (1.0 - 1e-3 * 0.01)).epsilon(1e-12));
  opt.step();
  CHECK(w[0] == Catch::Approx(2.0 * std::pow(1.0 - 1e-3 * 0.01, 2)).epsilon(1e-12));
}

TEST_CASE("adamw converges on a quadratic") {
  std::vector<double> w{5.0}, g{0.0};
  AdamW<double> opt({{w.data(), g.data(), 1}}, {0.05, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 2000; ++i) {
    g[0] = 2.0 * (w[0] - 3.0);  // d/dw (w-3)^2
    opt.step();
  }
  CHECK(w[0] == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("optimizer and schedule field validation") {
  CHECK_THROWS(OptimizerSpec{.lr = -1}.validate());
  CHECK_THROWS(OptimizerSpec{.beta1 = 1.0}.validate());
  CHECK_THROWS(lr_at(-1, 1e-3, ScheduleSpec{0, 10, 2}));
  CHECK_THROWS(lr_at(0, 1e-3, ScheduleSpec{1.0, 10, 2}));  // eta_min above lr
}
