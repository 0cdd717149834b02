#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>

#include "condisim/net.hpp"

using namespace condisim;

namespace {

DenoiserNetwork random_net(const DenoiserShape& shape, std::uint64_t seed) {
  DenoiserNetwork net(shape, seed);
  // every tensor nonzero, so every gradient path is exercised
  Rng g(seed + 99);
  DenoiserParams::visit(
      [&](const std::string&, auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 0.4 * rng::normal(g);
      },
      net.mutable_params());
  return net;
}

Matrix random_matrix(int r, int c, Rng& g) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng::normal(g);
  return m;
}

double probe_loss(const DenoiserNetwork& net, const DenoiserInput& in, const Matrix& probe) {
  return net.forward(in).cwiseProduct(probe).sum();
}

// Per-tensor relative error of analytic gradients against central differences.
std::map<std::string, double> gradcheck(const DenoiserNetwork& net, const DenoiserInput& in, const Matrix& probe) {
  ForwardCache cache;
  net.forward(in, &cache);
  const DenoiserParams analytic = net.backward(cache, probe);
  const double h = 1e-5;
  DenoiserParams work = net.params();
  DenoiserParams numeric = analytic;
  numeric.set_zero();
  DenoiserParams::visit(
      [&](const std::string&, auto& w, auto& num) {
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          const double keep = w.data()[i];
          w.data()[i] = keep + h;
          const double up = probe_loss(DenoiserNetwork(net.shape(), work), in, probe);
          w.data()[i] = keep - h;
          const double down = probe_loss(DenoiserNetwork(net.shape(), work), in, probe);
          w.data()[i] = keep;
          num.data()[i] = (up - down) / (2 * h);
        }
      },
      work, numeric);
  std::map<std::string, double> err;
  DenoiserParams::visit(
      [&](const std::string& name, const auto& a, const auto& n) {
        const double scale = std::max({a.norm(), n.norm(), 1e-12});
        err[name] = (a - n).norm() / scale;
      },
      analytic, numeric);
  return err;
}

}  // namespace

TEST(Film, IdentityModulation) {
  Vector h(3);
  h << 1.5, -2, 0.25;
  EXPECT_EQ(film_modulate(h, Vector::Ones(3), Vector::Zero(3)), h);
}

TEST(Film, ZeroGammaGivesShift) {
  Vector h(2), b(2);
  h << 7, -3;
  b << 0.5, 9;
  EXPECT_EQ(film_modulate(h, Vector::Zero(2), b), b);
}

TEST(Film, ElementwiseArithmetic) {
  Vector h(2), g(2), b(2), expect(2);
  h << 1, 2;
  g << 2, 3;
  b << -1, 0;
  expect << 1, 6;
  EXPECT_EQ(film_modulate(h, g, b), expect);
  EXPECT_THROW(film_modulate(h, Vector::Ones(3), b), std::invalid_argument);
}

TEST(TimestepEmbed, ZeroStepAlternates) {
  const Vector e = timestep_embed(0, 8);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(e(k), k % 2 == 0 ? 0.0 : 1.0);
}

TEST(TimestepEmbed, DeterministicAndDistinct) {
  EXPECT_EQ(timestep_embed(5, 16), timestep_embed(5, 16));
  EXPECT_GT((timestep_embed(1, 16) - timestep_embed(2, 16)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_THROW(timestep_embed(1, 7), std::invalid_argument);
}

TEST(Denoiser, ZeroHeadGivesZeroOutput) {
  DenoiserNetwork net({3, 4, 16, 2}, 1);
  Rng g(2);
  const Matrix theta = random_matrix(3, 5, g), y = random_matrix(4, 5, g);
  DenoiserInput in{&theta, &y, {1, 2, 3, 4, 5}, {}};
  EXPECT_EQ(net.forward(in), Matrix::Zero(3, 5));
}

TEST(Denoiser, ForwardIsDeterministic) {
  const DenoiserNetwork net = random_net({3, 4, 16, 2}, 3);
  Rng g(4);
  const Matrix theta = random_matrix(3, 6, g), y = random_matrix(4, 6, g);
  DenoiserInput in{&theta, &y, {1, 2, 3, 4, 5, 6}, {}};
  const Matrix a = net.forward(in), b = net.forward(in);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), 3);
}

TEST(Denoiser, SharedContextMatchesPerColumnContext) {
  const DenoiserNetwork net = random_net({2, 3, 8, 3}, 5);
  Rng g(6);
  const Matrix theta = random_matrix(2, 4, g), y1 = random_matrix(3, 1, g);
  const Matrix y4 = y1.replicate(1, 4);
  DenoiserInput shared{&theta, &y1, {7}, {}};
  DenoiserInput wide{&theta, &y4, {7, 7, 7, 7}, {}};
  EXPECT_LT((net.forward(shared) - net.forward(wide)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Denoiser, NullConditionNeverReadsCondition) {
  const DenoiserNetwork net = random_net({2, 3, 8, 2}, 7);
  Rng g(8);
  const Matrix theta = random_matrix(2, 4, g);
  Matrix poisoned = Matrix::Constant(3, 4, std::nan(""));
  DenoiserInput null_in{&theta, nullptr, {3}, {}};
  DenoiserInput masked{&theta, &poisoned, {3}, {1, 1, 1, 1}};
  ForwardCache cache;
  const Matrix a = net.forward(null_in), b = net.forward(masked, &cache);
  EXPECT_EQ(a, b);
  EXPECT_EQ(cache.conditioned_columns, 0u);
  EXPECT_EQ(cache.null_columns, 4u);
}

TEST(Denoiser, FilmIdentityReducesToUnmodulatedBlock) {
  // film2 zero => gamma = 1, beta = 0 in every block
  DenoiserNetwork net = random_net({2, 3, 8, 2}, 9);
  net.mutable_params().film2.w.setZero();
  net.mutable_params().film2.b.setZero();
  Rng g(10);
  const Matrix theta = random_matrix(2, 3, g), y = random_matrix(3, 3, g);
  DenoiserInput in{&theta, &y, {4, 5, 6}, {}};
  const auto& p = net.params();
  Matrix h = p.input.apply(theta);
  for (int l = 0; l < 2; ++l) h = h + p.block_out[l].apply(silu(p.block_in[l].apply(h)));
  EXPECT_EQ(net.forward(in), p.head.apply(h));
}

TEST(Denoiser, RejectsBadInputs) {
  DenoiserNetwork net({2, 3, 8, 2}, 1);
  Matrix theta(3, 1), y(3, 1);
  theta.setZero();
  y.setZero();
  EXPECT_THROW(net.forward({&theta, &y, {1}, {}}), std::invalid_argument);
  Matrix ok = Matrix::Zero(2, 1);
  ok(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.forward({&ok, &y, {1}, {}}), std::invalid_argument);
  EXPECT_THROW(DenoiserNetwork({2, 3, 7, 2}, 1), std::invalid_argument);
}

TEST(Denoiser, StaleCacheRejected) {
  DenoiserNetwork net = random_net({2, 3, 8, 2}, 11);
  Rng g(12);
  const Matrix theta = random_matrix(2, 2, g), y = random_matrix(3, 2, g);
  ForwardCache cache;
  net.forward({&theta, &y, {1, 2}, {}}, &cache);
  net.mutable_params().head.b(0) += 1.0;
  EXPECT_THROW(net.backward(cache, Matrix::Ones(2, 2)), std::logic_error);
}

TEST(Backward, ZeroOutputGradientGivesZeroGradients) {
  const DenoiserNetwork net = random_net({2, 3, 8, 2}, 13);
  Rng g(14);
  const Matrix theta = random_matrix(2, 3, g), y = random_matrix(3, 3, g);
  ForwardCache cache;
  net.forward({&theta, &y, {1, 2, 3}, {0, 1, 0}}, &cache);
  EXPECT_EQ(global_norm(net.backward(cache, Matrix::Zero(2, 3))), 0.0);
}

TEST(Backward, LinearInOutputGradient) {
  const DenoiserNetwork net = random_net({2, 3, 8, 2}, 15);
  Rng g(16);
  const Matrix theta = random_matrix(2, 3, g), y = random_matrix(3, 3, g), d = random_matrix(2, 3, g);
  ForwardCache cache;
  net.forward({&theta, &y, {1, 2, 3}, {}}, &cache);
  const DenoiserParams one = net.backward(cache, d), two = net.backward(cache, 2.0 * d);
  DenoiserParams::visit(
      [](const std::string& name, const auto& a, const auto& b) {
        EXPECT_LT((b - 2.0 * a).cwiseAbs().maxCoeff(), 1e-12 * (1 + a.cwiseAbs().maxCoeff())) << name;
      },
      one, two);
}

TEST(Backward, GradcheckPerColumnContextWithDropout) {
  const DenoiserNetwork net = random_net({3, 4, 16, 3}, 17);
  Rng g(18);
  const Matrix theta = random_matrix(3, 4, g), y = random_matrix(4, 4, g), probe = random_matrix(3, 4, g);
  DenoiserInput in{&theta, &y, {1, 40, 7, 100}, {0, 1, 0, 0}};
  for (const auto& [name, e] : gradcheck(net, in, probe)) EXPECT_LT(e, 1e-5) << name;
  ForwardCache cache;
  net.forward(in, &cache);
  const DenoiserParams grads = net.backward(cache, probe);
  DenoiserParams::visit([](const std::string& name, const auto& g) { EXPECT_GT(g.norm(), 1e-6) << name; }, grads);
}

TEST(Backward, GradcheckSharedContext) {
  const DenoiserNetwork net = random_net({3, 4, 16, 3}, 19);
  Rng g(20);
  const Matrix theta = random_matrix(3, 5, g), y = random_matrix(4, 1, g), probe = random_matrix(3, 5, g);
  DenoiserInput in{&theta, &y, {12}, {}};
  for (const auto& [name, e] : gradcheck(net, in, probe)) {
    if (name == "null_cond") continue;  // not on the path
    EXPECT_LT(e, 1e-5) << name;
  }
}

TEST(Backward, GradcheckNullCondition) {
  const DenoiserNetwork net = random_net({2, 3, 16, 3}, 21);
  Rng g(22);
  const Matrix theta = random_matrix(2, 3, g), probe = random_matrix(2, 3, g);
  DenoiserInput in{&theta, nullptr, {2, 3, 4}, {}};
  const auto err = gradcheck(net, in, probe);
  EXPECT_LT(err.at("null_cond"), 1e-5);
  EXPECT_LT(err.at("film1.w"), 1e-5);
  EXPECT_LT(err.at("time1.w"), 1e-5);
}

TEST(AdamW, FirstStepOnScalarMovesByLearningRate) {
  DenoiserNetwork net({1, 1, 2, 1}, 1);
  OptimizerState st(net.shape(), {0.0, 0.9, 0.999, 1e-8});
  DenoiserParams g(net.shape());
  g.head.b(0) = 1.0;
  const double before = net.params().head.b(0);
  ASSERT_TRUE(adamw_apply(st, net, g, 0.1, 0.0));
  EXPECT_NEAR(net.params().head.b(0) - before, -0.1, 1e-8);
  EXPECT_EQ(st.step_count, 1);
}

TEST(AdamW, ZeroGradientWithoutDecayLeavesWeights) {
  DenoiserNetwork net({2, 2, 4, 1}, 3);
  const DenoiserParams before = net.params();
  OptimizerState st(net.shape(), {0.0, 0.9, 0.999, 1e-8});
  ASSERT_TRUE(adamw_apply(st, net, DenoiserParams(net.shape()), 0.1, 5.0));
  DenoiserParams::visit([](const std::string& n, const auto& a, const auto& b) { EXPECT_EQ(a, b) << n; }, before,
                        net.params());
}

TEST(AdamW, ClipsGlobalNorm) {
  // Adam normalises magnitudes, so observe clipping through the first moment.
  DenoiserNetwork net({1, 1, 2, 1}, 1);
  OptimizerState st(net.shape(), {0.0, 0.9, 0.999, 1e-8});
  DenoiserParams g(net.shape());
  g.head.b(0) = 30.0;
  g.head.w(0, 0) = 40.0;  // norm 50
  ASSERT_TRUE(adamw_apply(st, net, g, 1e-3, 5.0));
  EXPECT_NEAR(st.first_moment.head.b(0), 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(st.first_moment.head.w(0, 0), 0.1 * 4.0, 1e-12);
}

TEST(AdamW, DecoupledWeightDecay) {
  DenoiserNetwork net({1, 1, 2, 1}, 1);
  net.mutable_params().head.b(0) = 2.0;
  OptimizerState st(net.shape(), {0.5, 0.9, 0.999, 1e-8});
  ASSERT_TRUE(adamw_apply(st, net, DenoiserParams(net.shape()), 0.1, 5.0));
  EXPECT_DOUBLE_EQ(net.params().head.b(0), 2.0 * (1 - 0.1 * 0.5));
}

TEST(AdamW, NonFiniteGradientAbortsStep) {
  DenoiserNetwork net({1, 1, 2, 1}, 1);
  const DenoiserParams before = net.params();
  OptimizerState st(net.shape(), {});
  DenoiserParams g(net.shape());
  g.head.b(0) = std::nan("");
  EXPECT_FALSE(adamw_apply(st, net, g, 0.1, 5.0));
  EXPECT_EQ(st.step_count, 0);
  EXPECT_EQ(before.head.b, net.params().head.b);
  EXPECT_THROW(adamw_apply(st, net, DenoiserParams(net.shape()), 0.0, 5.0), std::invalid_argument);
}

TEST(LearningRate, PhaseValues) {
  const double eta = 1e-3;
  EXPECT_DOUBLE_EQ(lr_at(0, 1000, eta), 0.2 * eta);
  EXPECT_DOUBLE_EQ(lr_at(100, 1000, eta), eta);
  EXPECT_DOUBLE_EQ(lr_at(970, 1000, eta), 1e-6);
  EXPECT_DOUBLE_EQ(lr_at(999, 1000, eta), 1e-6);
  // halfway through the cosine phase
  EXPECT_NEAR(lr_at(525, 1000, eta), 1e-6 + (eta - 1e-6) * 0.5, 1e-15);
}

TEST(LearningRate, ContinuousAtPhaseBoundaries) {
  const double eta = 2e-4;
  const long total = 100000000000L;  // neighbouring steps approximate one-sided limits
  const long warm = total / 10, decay_end = total / 100 * 95;
  EXPECT_NEAR(lr_at(warm - 1, total, eta), lr_at(warm, total, eta), 1e-9 * eta);
  EXPECT_NEAR(lr_at(decay_end - 1, total, eta), lr_at(decay_end, total, eta), 1e-9 * eta);
}
