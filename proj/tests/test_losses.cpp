#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wetseg/losses.hpp"

using namespace wetseg;
using nn::Tensor4;

namespace {

Tensor4<double> random_logits(int n, int c, int h, int w, std::uint64_t seed,
                              double scale = 2.0) {
  Tensor4<double> z(n, c, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : z.v) v = u(rng);
  return z;
}

}  // namespace

TEST_CASE("pseudo labels take the argmax with lowest-index ties") {
  Tensor4<double> p(1, 3, 1, 1);
  p.at(0, 0, 0, 0) = 0.1;
  p.at(0, 1, 0, 0) = 0.7;
  p.at(0, 2, 0, 0) = 0.2;
  CHECK(pseudo_labels(p).labels[0] == 1);

  Tensor4<double> tie(1, 2, 1, 1);
  tie.at(0, 0, 0, 0) = 0.5;
  tie.at(0, 1, 0, 0) = 0.5;
  CHECK(pseudo_labels(tie).labels[0] == 0);

  Tensor4<double> uniform(1, 10, 2, 2, 0.1);
  for (int l : pseudo_labels(uniform).labels) CHECK(l == 0);
}

TEST_CASE("class weights follow the smoothed inverse-occupancy formula") {
  auto w = class_weights({50, 50}, 1.0);
  CHECK(w[0] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == Catch::Approx(0.5).epsilon(1e-12));

  // K=[90,10], eps=1: weights proportional to [1/91, 1/11]
  w = class_weights({90, 10}, 1.0);
  const double z = 1.0 / 91 + 1.0 / 11;
  CHECK(w[0] == Catch::Approx((1.0 / 91) / z).epsilon(1e-12));
  CHECK(w[1] == Catch::Approx((1.0 / 11) / z).epsilon(1e-12));

  // an empty class receives nearly all of the weight
  w = class_weights({100, 0}, 1.0);
  const double z2 = 1.0 / 101 + 1.0;
  CHECK(w[0] == Catch::Approx((1.0 / 101) / z2).epsilon(1e-12));
  CHECK(w[1] == Catch::Approx(1.0 / z2).epsilon(1e-12));
  CHECK(w[1] > w[0]);
}

TEST_CASE("class weights: simplex + monotonicity properties") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 200; ++it) {
    const int nc = 2 + static_cast<int>(rng() % 12);
    std::vector<long long> hist(nc);
    for (auto& h : hist) h = static_cast<long long>(rng() % 1000);
    auto w = class_weights(hist, 1.0);
    double sum = 0;
    for (double x : w) {
      CHECK(x > 0);
      sum += x;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    // oracle agreement to 1e-9 relative
    auto ref = oracle::class_weights(hist, 1.0);
    for (int k = 0; k < nc; ++k)
      CHECK(w[k] == Catch::Approx(ref[k]).epsilon(1e-9));
    // increasing one count strictly decreases its weight
    const int k = static_cast<int>(rng() % nc);
    hist[k] += 10;
    auto w2 = class_weights(hist, 1.0);
    CHECK(w2[k] < w[k]);
  }
}

TEST_CASE("clustering loss: confident predictions cost nothing") {
  Tensor4<double> z(1, 3, 2, 2);
  LabelBatch labels{1, 2, 2, {0, 1, 2, 0}};
  std::size_t o = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x, ++o)
      for (int c = 0; c < 3; ++c) z.at(0, c, y, x) = c == labels.labels[o] ? 50.0 : 0.0;
  CHECK(clustering_loss(z, labels, 1.0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("clustering loss: uniform logits with a balanced histogram give log 2") {
  Tensor4<double> z(1, 2, 2, 2, 0.0);
  LabelBatch labels{1, 2, 2, {0, 1, 0, 1}};  // balanced: weighting vanishes
  CHECK(clustering_loss(z, labels, 1.0) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("clustering loss matches the scalar brute-force oracle") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 50; ++it) {
    auto z = random_logits(2, 2, 2, 2, rng());
    LabelBatch labels{2, 2, 2, {}};
    labels.labels.resize(8);
    for (auto& l : labels.labels) l = static_cast<int>(rng() % 2);
    CHECK(clustering_loss(z, labels, 1.0) ==
          Catch::Approx(oracle::clustering_loss(z, labels.labels, 1.0, true)).epsilon(1e-10));
    CHECK(clustering_loss(z, labels, 1.0, false) ==
          Catch::Approx(oracle::clustering_loss(z, labels.labels, 1.0, false)).epsilon(1e-10));
  }
}

TEST_CASE("uniform-histogram weighted loss equals unweighted cross-entropy") {
  auto z = random_logits(1, 4, 4, 4, 99);
  LabelBatch labels{1, 4, 4, {}};
  labels.labels.resize(16);
  for (int i = 0; i < 16; ++i) labels.labels[i] = i % 4;  // exactly uniform
  CHECK(clustering_loss(z, labels, 1.0, true) ==
        Catch::Approx(clustering_loss(z, labels, 1.0, false)).epsilon(1e-6));
}

TEST_CASE("clustering loss rejects out-of-range labels") {
  auto z = random_logits(1, 3, 2, 2, 5);
  LabelBatch labels{1, 2, 2, {0, 1, 3, 0}};
  CHECK_THROWS(clustering_loss(z, labels, 1.0));
}

TEST_CASE("pair losses: identities and bounds") {
  auto za = random_logits(2, 3, 4, 4, 21);
  auto zb = random_logits(2, 3, 4, 4, 22);
  auto pa = nn::softmax_channels(za);
  auto pb = nn::softmax_channels(zb);

  CHECK(positive_pair_loss(pa, pa) == 0.0);
  CHECK(negative_pair_loss(pa, pa) == 0.0);
  CHECK(negative_pair_loss(pa, pb) == -positive_pair_loss(pa, pb));
  CHECK(positive_pair_loss(pa, pb) == positive_pair_loss(pb, pa));
  CHECK(positive_pair_loss(pa, pb) >= 0.0);
  CHECK(positive_pair_loss(pa, pb) <= 2.0);
  CHECK(negative_pair_loss(pa, pb) >= -2.0);
  CHECK(negative_pair_loss(pa, pb) <= 0.0);
}

TEST_CASE("pair losses reach the simplex L1 diameter on opposite vertices") {
  Tensor4<double> a(1, 2, 2, 2), b(1, 2, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      a.at(0, 0, y, x) = 1.0;
      a.at(0, 1, y, x) = 0.0;
      b.at(0, 0, y, x) = 0.0;
      b.at(0, 1, y, x) = 1.0;
    }
  CHECK(positive_pair_loss(a, b) == Catch::Approx(2.0));
  CHECK(negative_pair_loss(a, b) == Catch::Approx(-2.0));
}

TEST_CASE("total loss composition and weight masking") {
  auto z1 = random_logits(2, 3, 4, 4, 31);
  auto z2 = random_logits(2, 3, 4, 4, 32);
  auto z3 = random_logits(2, 3, 4, 4, 33);

  SECTION("defaults combine the four terms") {
    LossWeights w;  // 0.1, 1, 1
    auto rep = total_loss(z1, z2, z3, w);
    CHECK(rep.total ==
          Catch::Approx(0.1 * (rep.clustering + rep.clustering_aug) + rep.positive +
                        rep.negative)
              .epsilon(1e-9));
    long long total_px = 0;
    for (auto k : rep.class_histogram) total_px += k;
    CHECK(total_px == 2 * 4 * 4);
  }

  SECTION("zeroing the pair weights leaves the clustering terms") {
    LossWeights w;
    w.clustering = 1.0;
    w.positive = 0.0;
    w.negative = 0.0;
    auto rep = total_loss(z1, z2, z3, w);
    CHECK(rep.total == Catch::Approx(rep.clustering + rep.clustering_aug).epsilon(1e-12));
  }

  SECTION("identical standard and augmented logits zero the positive term") {
    auto rep = total_loss(z1, z1, z3, LossWeights{});
    CHECK(rep.positive == 0.0);
  }

  SECTION("shape mismatch is rejected") {
    auto bad = random_logits(2, 3, 4, 2, 34);
    CHECK_THROWS(total_loss(z1, z2, bad, LossWeights{}));
  }
}

TEST_CASE("total loss gradient matches central finite differences") {
  // Pseudo-labels stay frozen at their original argmax inside the loss, so
  // plain re-evaluation under perturbation is the correct reference.
  LossWeights w;
  std::mt19937_64 rng(77);
  int checked = 0, good = 0;
  for (int inst = 0; inst < 4; ++inst) {
    auto z1 = random_logits(2, 3, 4, 4, rng());
    auto z2 = random_logits(2, 3, 4, 4, rng());
    auto z3 = random_logits(2, 3, 4, 4, rng());
    TripletGrads<double> g;
    total_loss(z1, z2, z3, w, &g);

    const double h = 1e-4;
    auto eval = [&](Tensor4<double>& z, std::size_t i, double delta) {
      const double keep = z.v[i];
      z.v[i] = keep + delta;
      const double val = total_loss(z1, z2, z3, w).total;
      z.v[i] = keep;
      return val;
    };
    Tensor4<double>* batches[3] = {&z1, &z2, &z3};
    Tensor4<double>* grads[3] = {&g.standard, &g.augmented, &g.shuffled};
    for (int b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < batches[b]->v.size(); ++i) {
        const double fd = (eval(*batches[b], i, h) - eval(*batches[b], i, -h)) / (2 * h);
        const double an = grads[b]->v[i];
        ++checked;
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        if (std::abs(fd - an) / denom < 1e-3) ++good;
      }
  }
  // |.| kinks and argmax flips under perturbation can spoil isolated coords
  CHECK(static_cast<double>(good) / checked >= 0.99);
}

TEST_CASE("self-labeling contract: clustering gradient with frozen labels") {
  // Labels computed once from the current probabilities, then held constant
  // while the logits are perturbed. Every coordinate must agree: with the
  // histogram frozen the loss is smooth.
  auto z = random_logits(2, 3, 4, 4, 123);
  const auto labels = pseudo_labels(nn::softmax_channels(z));
  Tensor4<double> g;
  clustering_loss(z, labels, 1.0, true, &g);
  const double h = 1e-5;
  for (std::size_t i = 0; i < z.v.size(); ++i) {
    const double keep = z.v[i];
    z.v[i] = keep + h;
    const double up = clustering_loss(z, labels, 1.0);
    z.v[i] = keep - h;
    const double dn = clustering_loss(z, labels, 1.0);
    z.v[i] = keep;
    CHECK(g.v[i] == Catch::Approx((up - dn) / (2 * h)).margin(1e-6));
  }
}

TEST_CASE("dice loss: perfect overlap, empty-empty and worst case") {
  Tensor4<double> p(1, 1, 10, 10), t(1, 1, 10, 10);
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = t.v[i] = (i % 3 == 0) ? 1.0 : 0.0;
  CHECK(dice_loss(p, t) == Catch::Approx(0.0).margin(1e-12));

  Tensor4<double> zero(1, 1, 10, 10, 0.0);
  CHECK(dice_loss(zero, zero) == Catch::Approx(0.0).margin(1e-12));

  Tensor4<double> ones(1, 1, 10, 10, 1.0);
  CHECK(dice_loss(ones, zero) == Catch::Approx(1.0 - 1.0 / 101).epsilon(1e-12));
}

TEST_CASE("dice loss gradient matches finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Tensor4<double> p(1, 1, 4, 4), t(1, 1, 4, 4);
  for (auto& v : p.v) v = u(rng);
  for (auto& v : t.v) v = (rng() % 2) ? 1.0 : 0.0;
  Tensor4<double> g;
  dice_loss(p, t, &g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    const double keep = p.v[i];
    p.v[i] = keep + h;
    const double up = dice_loss(p, t);
    p.v[i] = keep - h;
    const double dn = dice_loss(p, t);
    p.v[i] = keep;
    CHECK(g.v[i] == Catch::Approx((up - dn) / (2 * h)).margin(1e-6));
  }
}
