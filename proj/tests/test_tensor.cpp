#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dcgnn/tensor.hpp"
#include "support/test_util.hpp"

using namespace dcgnn;
using namespace dcgnn::ad;
using dcgnn::testing::random_mat;
using dcgnn::testing::rel_err;

TEST_CASE("central difference oracle recovers d/dx x^2") {
  Mat x = Mat::Constant(1, 1, 3.0);
  Mat g = finite_diff_grad([](const Mat& m) { return m(0, 0) * m(0, 0); }, x, 1e-5);
  CHECK(std::abs(g(0, 0) - 6.0) < 1e-6);
}

TEST_CASE("backward of sum(tanh(W x)) matches central differences") {
  std::mt19937_64 rng(7);
  Mat w0 = random_mat(rng, 4, 3);
  Mat x0 = random_mat(rng, 3, 2);

  Tape tape;
  Tensor w = tape.leaf(w0, true);
  Tensor x = tape.leaf(x0, true);
  Tensor loss = sum(tanh(matmul(w, x)));
  GradientMap grads = tape.backward(loss);

  auto loss_at_w = [&](const Mat& wm) {
    Tape t2;
    return sum(tanh(matmul(t2.leaf(wm, false), t2.leaf(x0, false)))).scalar();
  };
  auto loss_at_x = [&](const Mat& xm) {
    Tape t2;
    return sum(tanh(matmul(t2.leaf(w0, false), t2.leaf(xm, false)))).scalar();
  };
  CHECK(rel_err(grads.at(w), finite_diff_grad(loss_at_w, w0)) < 1e-6);
  CHECK(rel_err(grads.at(x), finite_diff_grad(loss_at_x, x0)) < 1e-6);
}

TEST_CASE("matmul shapes and inner-product case") {
  Tape tape;
  Mat a(1, 3), b(3, 1);
  a << 1, 2, 3;
  b << 4, 5, 6;
  Tensor c = matmul(tape.leaf(a), tape.leaf(b));
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 1);
  CHECK(c.scalar() == doctest::Approx(32.0));
  CHECK_THROWS_AS(matmul(tape.leaf(Mat::Zero(2, 3)), tape.leaf(Mat::Zero(2, 3))), ShapeError);
}

TEST_CASE("pairwise squared distances on identical and orthonormal rows") {
  Tape tape;
  Mat z(2, 2);
  z << 1, 0, 0, 1;
  Tensor d_same = pairwise_sq_dist(tape.leaf(z), tape.leaf(z));
  CHECK(d_same.value(0, 0) == 0.0);
  CHECK(d_same.value(1, 1) == 0.0);
  CHECK(d_same.value(0, 1) == doctest::Approx(2.0));
  CHECK(d_same.value(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("elementwise ops broadcast 1x1 operands") {
  Tape tape;
  Mat m(2, 2);
  m << 1, 2, 3, 4;
  Tensor t = tape.leaf(m);
  Tensor s = tape.full(1, 1, 2.0);
  CHECK(add(t, s).value(1, 1) == 6.0);
  CHECK(sub(s, t).value(0, 0) == 1.0);
  CHECK(hadamard(t, s).value(1, 0) == 6.0);
  CHECK(div(t, s).value(0, 1) == 1.0);
  CHECK_THROWS_AS(add(t, tape.zeros(3, 2)), ShapeError);
  CHECK_THROWS_AS(div(t, tape.zeros(2, 2)), DomainError);
}

TEST_CASE("row and column normalization hit marginals to 1e-12") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + static_cast<int>(rng() % 6);
    int k = 1 + static_cast<int>(rng() % 6);
    Mat m = random_mat(rng, n, k, 0.05, 2.0);
    Vec u = Vec::Constant(n, 1.0 / n);
    Vec v = Vec::Constant(k, 1.0 / k);
    Tape tape;
    Tensor r = row_normalize(tape.leaf(m), u);
    Tensor c = col_normalize(tape.leaf(m), v);
    CHECK((r.values().rowwise().sum() - u).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c.values().colwise().sum().transpose() - v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("normalization rejects nonpositive axis sums") {
  Tape tape;
  Mat m(2, 2);
  m << 0, 0, 1, 1;
  CHECK_THROWS_AS(row_normalize(tape.leaf(m), Vec::Constant(2, 0.5)), DomainError);
  CHECK_THROWS_AS(col_normalize(tape.leaf(Mat::Zero(2, 2)), Vec::Constant(2, 0.5)), DomainError);
}

TEST_CASE("cross entropy fixtures") {
  Tape tape;
  Mat confident(1, 2);
  confident << 10, 0;
  Tensor l1 = cross_entropy(tape.leaf(confident), {0}, {0});
  CHECK(l1.scalar() == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-9));

  Tensor l2 = cross_entropy(tape.leaf(Mat::Zero(3, 4)), {1, 2, 3}, {0, 1, 2});
  CHECK(l2.scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(tape.leaf(Mat::Zero(2, 2)), {0, 1}, {}), DomainError);
  CHECK_THROWS_AS(cross_entropy(tape.leaf(Mat::Zero(2, 2)), {0, 5}, {0, 1}), DomainError);
}

TEST_CASE("cross entropy gradient matches central differences") {
  std::mt19937_64 rng(3);
  Mat logits = random_mat(rng, 5, 3, -2.0, 2.0);
  std::vector<int> labels = {0, 2, 1, 1, 0};
  std::vector<int> mask = {0, 2, 4};
  Tape tape;
  Tensor t = tape.leaf(logits, true);
  GradientMap grads = tape.backward(cross_entropy(t, labels, mask));
  Mat fd = finite_diff_grad(
      [&](const Mat& m) {
        Tape t2;
        return cross_entropy(t2.leaf(m), labels, mask).scalar();
      },
      logits);
  CHECK(rel_err(grads.at(t), fd) < 1e-7);
}

// every op with a hand-derived backward rule, exercised jointly on random data
TEST_CASE("composite graph gradients match central differences") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(seed);
    int n = 3 + static_cast<int>(rng() % 3);
    int d = 2 + static_cast<int>(rng() % 3);
    int k = 2 + static_cast<int>(rng() % 2);
    Mat z0 = random_mat(rng, n, d);
    Mat c0 = random_mat(rng, k, d);
    Mat b0 = random_mat(rng, 1, k);
    std::vector<int> gidx, sidx;
    for (int i = 0; i < n; ++i) gidx.push_back(static_cast<int>(rng() % n));
    for (int i = 0; i < n; ++i) sidx.push_back(static_cast<int>(rng() % n));
    Vec factors = Vec::LinSpaced(n, 0.5, 1.5);

    auto build = [&](Tape& tape, const Mat& zm, const Mat& cm, const Mat& bm) {
      Tensor z = tape.leaf(zm, true);
      Tensor c = tape.leaf(cm, true);
      Tensor b = tape.leaf(bm, true);
      Tensor m = scale_by_max(pairwise_sq_dist(z, c));
      Tensor p = row_normalize(clamp_min(exp(scale(m, -1.5)), 1e-30), Vec::Constant(n, 1.0 / n));
      Tensor p2 = col_normalize(p, Vec::Constant(k, 1.0 / k));
      Tensor moved = matmul(p2, c);
      Tensor mixed = add(scale_rows(gather_rows(moved, gidx), factors),
                         scatter_rows(tanh(z), sidx, n));
      Tensor normed = layer_norm_rows(add_row_vector(matmul(mixed, transpose(c)), b));
      Tensor sims = matmul(l2_row_normalize(mixed), transpose(l2_row_normalize(c)));
      Tensor parts = concat_rows({normed, sims});
      Tensor reg = div(frobenius_norm(parts), add(frobenius_norm(c), tape.full(1, 1, 0.7)));
      Tensor loss = add(add(sum(hadamard(parts, parts)), reg),
                        cross_entropy(normed, std::vector<int>(n, 0), {0, 1}));
      return std::tuple{z, c, b, loss};
    };

    Tape tape;
    auto [z, c, b, loss] = build(tape, z0, c0, b0);
    GradientMap grads = tape.backward(loss);

    auto fd_against = [&](int which, const Mat& base) {
      return finite_diff_grad(
          [&](const Mat& m) {
            Tape t2;
            auto [z2, c2, b2, l2] = build(t2, which == 0 ? m : z0, which == 1 ? m : c0,
                                          which == 2 ? m : b0);
            (void)z2;
            (void)c2;
            (void)b2;
            return l2.scalar();
          },
          base, 1e-6);
    };
    CHECK(rel_err(grads.at(z), fd_against(0, z0)) < 1e-4);
    CHECK(rel_err(grads.at(c), fd_against(1, c0)) < 1e-4);
    CHECK(rel_err(grads.at(b), fd_against(2, b0)) < 1e-4);
  }
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(5);
  Mat x0 = random_mat(rng, 3, 3);
  Tape tape;
  Tensor x = tape.leaf(x0, true);
  Tensor l1 = sum(tanh(x));
  Tensor l2 = frobenius_norm(x);
  Tensor combined = add(scale(l1, 2.0), scale(l2, -0.5));
  Mat g1 = tape.backward(l1).at(x);
  Mat g2 = tape.backward(l2).at(x);
  Mat gc = tape.backward(combined).at(x);
  CHECK(rel_err(gc, Mat(2.0 * g1 - 0.5 * g2)) < 1e-12);
}

TEST_CASE("identical graphs replay bitwise identically") {
  auto run = [](std::vector<double>* out) {
    std::mt19937_64 rng(99);
    Mat x0 = random_mat(rng, 4, 4);
    Tape tape;
    Tensor x = tape.leaf(x0, true);
    Tensor loss = sum(exp(scale(layer_norm_rows(matmul(x, x)), 0.1)));
    Mat g = tape.backward(loss).at(x);
    out->push_back(loss.scalar());
    for (int i = 0; i < g.size(); ++i) out->push_back(g.data()[i]);
  };
  std::vector<double> a, b;
  run(&a);
  run(&b);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("non-grad tensors receive no gradient and detach cuts the path") {
  Tape tape;
  Mat m(2, 2);
  m << 1, 2, 3, 4;
  Tensor frozen = tape.leaf(m, false);
  Tensor live = tape.leaf(m, true);
  Tensor loss = sum(hadamard(frozen, live));
  GradientMap grads = tape.backward(loss);
  CHECK(grads.find(frozen) == nullptr);
  CHECK(grads.find(live) != nullptr);

  Tensor cut = detach(hadamard(live, live));
  CHECK_FALSE(cut.requires_grad());
  GradientMap g2 = tape.backward(sum(cut));
  CHECK(g2.find(live) == nullptr);
}

TEST_CASE("shared subexpressions accumulate gradients once per path") {
  // loss = sum(y) + frob(y) with y reused; each node is visited once, so the
  // leaf gradient equals the sum of both path contributions.
  Mat x0(1, 2);
  x0 << 0.3, -0.2;
  Tape tape;
  Tensor x = tape.leaf(x0, true);
  Tensor y = tanh(x);
  Tensor loss = add(sum(y), sum(hadamard(y, y)));
  Mat fd = finite_diff_grad(
      [&](const Mat& m) {
        Tape t2;
        Tensor x2 = t2.leaf(m);
        Tensor y2 = tanh(x2);
        return add(sum(y2), sum(hadamard(y2, y2))).scalar();
      },
      x0);
  CHECK(rel_err(tape.backward(loss).at(x), fd) < 1e-8);
}

TEST_CASE("scale_by_max routes gradient through the argmax entry") {
  Mat x0(2, 2);
  x0 << 0.2, 1.7, 0.9, 0.4;
  Tape tape;
  Tensor x = tape.leaf(x0, true);
  Tensor y = scale_by_max(x);
  CHECK(y.value(0, 1) == 1.0);
  Mat fd = finite_diff_grad(
      [&](const Mat& m) {
        Tape t2;
        return sum(hadamard(scale_by_max(t2.leaf(m)), scale_by_max(t2.leaf(m)))).scalar();
      },
      x0, 1e-6);
  Mat got = tape.backward(sum(hadamard(y, y))).at(x);
  CHECK(rel_err(got, fd) < 1e-6);

  // nonpositive max: identity
  Tensor neg_in = tape.leaf(Mat::Constant(2, 2, -1.0), false);
  CHECK(scale_by_max(neg_in).value(0, 0) == -1.0);
}

TEST_CASE("l2 row normalization guards zero rows") {
  Mat m(2, 3);
  m << 3, 4, 0, 0, 0, 0;
  Tape tape;
  Tensor t = tape.leaf(m, true);
  Tensor y = l2_row_normalize(t);
  CHECK(y.value(0, 0) == doctest::Approx(0.6));
  CHECK(y.value(1, 0) == 0.0);
  Mat g = tape.backward(sum(y)).at(t);
  CHECK(g.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frobenius norm has zero gradient at the origin") {
  Tape tape;
  Tensor t = tape.leaf(Mat::Zero(2, 2), true);
  Tensor n = frobenius_norm(t);
  CHECK(n.scalar() == 0.0);
  Mat g = tape.backward(n).at(t);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("log rejects nonpositive entries") {
  Tape tape;
  CHECK_THROWS_AS(log(tape.zeros(1, 1)), DomainError);
  CHECK(log(tape.full(1, 1, std::exp(1.0))).scalar() == doctest::Approx(1.0));
}

TEST_CASE("backward requires a scalar loss from the same tape") {
  Tape tape, other;
  Tensor t = tape.leaf(Mat::Zero(2, 2), true);
  CHECK_THROWS_AS(tape.backward(t), ShapeError);
  Tensor o = other.leaf(Mat::Zero(1, 1), true);
  CHECK_THROWS_AS(tape.backward(o), ShapeError);
  CHECK_THROWS_AS(add(t, o), ShapeError);
}
