#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sgw/losses.hpp"
#include "sgw/nn.hpp"
#include "sgw/rng.hpp"

namespace {

using sgw::Matrix;
using sgw::SeededRng;
using sgw::ad::Tape;
using sgw::ad::Var;
using sgw::losses::LossWeights;
using sgw::nn::Activation;
using sgw::nn::DenseNet;

Matrix random_matrix(SeededRng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

DenseNet zero_critic(std::size_t d) {
  DenseNet critic({d, 1}, {Activation::Identity});
  return critic;  // weights and bias default to zero
}

DenseNet linear_critic(const std::vector<double>& w) {
  DenseNet critic({w.size(), 1}, {Activation::Identity});
  for (std::size_t i = 0; i < w.size(); ++i) critic.layer(0).weight(i, 0) = w[i];
  return critic;
}

DenseNet identity_generator(std::size_t d) {
  DenseNet g({d, d}, {Activation::Identity});
  g.layer(0).weight = Matrix::identity(d);
  return g;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

bool kink_free(const DenseNet& net, const Matrix& batch, double margin = 1e-3) {
  Matrix x = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    Matrix z = sgw::matmul(x, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) {
        z(i, j) += layer.bias(0, j);
        if ((layer.act == Activation::Relu || layer.act == Activation::LeakyRelu) &&
            std::abs(z(i, j)) < margin)
          return false;
        z(i, j) = sgw::nn::apply_activation(layer.act, z(i, j));
      }
    x = std::move(z);
  }
  return true;
}

TEST(CriticLoss, ZeroCriticGivesZeroBaseAndUnitPenalty) {
  SeededRng rng(1);
  const Matrix real = random_matrix(rng, 6, 3);
  const Matrix fake = random_matrix(rng, 6, 3);
  auto critic = zero_critic(3);
  const auto res = sgw::losses::critic_loss(critic, real, fake, 10.0, rng);
  EXPECT_NEAR(res.base, 0.0, 1e-15);
  EXPECT_NEAR(res.penalty, 1.0, 1e-15);  // (||0|| - 1)^2 per sample
  EXPECT_NEAR(res.value, 10.0, 1e-12);
}

TEST(CriticLoss, UnitNormLinearCriticClosedForm) {
  SeededRng rng(2);
  const Matrix real = random_matrix(rng, 8, 2);
  const Matrix fake = random_matrix(rng, 8, 2);
  auto critic = linear_critic({0.6, 0.8});
  const auto res = sgw::losses::critic_loss(critic, real, fake, 10.0, rng);
  double mr[2] = {0, 0}, mf[2] = {0, 0};
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      mr[c] += real(i, c) / 8.0;
      mf[c] += fake(i, c) / 8.0;
    }
  const double expected_base = -(0.6 * (mr[0] - mf[0]) + 0.8 * (mr[1] - mf[1]));
  EXPECT_NEAR(res.base, expected_base, 1e-12);
  EXPECT_NEAR(res.penalty, 0.0, 1e-12);
}

TEST(CriticLoss, GradientsMatchFiniteDifferences) {
  SeededRng rng(3);
  DenseNet critic({3, 4, 1}, {Activation::LeakyRelu, Activation::Identity});
  critic.init_he(rng);
  Matrix real = random_matrix(rng, 5, 3);
  Matrix fake = random_matrix(rng, 5, 3);
  // Freeze one interpolation draw so the objective is a fixed function.
  SeededRng probe(777);
  Matrix interp(5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    const double u = probe.uniform();
    for (std::size_t j = 0; j < 3; ++j) interp(i, j) = u * real(i, j) + (1 - u) * fake(i, j);
  }
  while (!kink_free(critic, real) || !kink_free(critic, fake) || !kink_free(critic, interp)) {
    critic.init_he(rng);
  }

  const auto loss_of = [&](const DenseNet& d) {
    Tape t;
    auto vars = sgw::nn::push_params(t, d);
    Var base = t.sub(t.mean_all(sgw::nn::apply_net(t, d, vars, fake)),
                     t.mean_all(sgw::nn::apply_net(t, d, vars, real)));
    Var pen = sgw::nn::gradient_penalty_expr(t, d, vars, interp);
    return t.scalar(t.add(base, t.scale(pen, 10.0)));
  };

  Tape tape;
  auto vars = sgw::nn::push_params(tape, critic);
  Var base = tape.sub(tape.mean_all(sgw::nn::apply_net(tape, critic, vars, fake)),
                      tape.mean_all(sgw::nn::apply_net(tape, critic, vars, real)));
  Var pen = sgw::nn::gradient_penalty_expr(tape, critic, vars, interp);
  Var total = tape.add(base, tape.scale(pen, 10.0));
  tape.backward_scalar(total);
  const auto grads = sgw::nn::collect_grads(tape, vars);

  const double h = 1e-5;
  for (std::size_t l = 0; l < critic.layer_count(); ++l)
    for (std::size_t i = 0; i < critic.layer(l).weight.size(); ++i) {
      DenseNet plus = critic, minus = critic;
      plus.layer(l).weight.data()[i] += h;
      minus.layer(l).weight.data()[i] -= h;
      const double fd = (loss_of(plus) - loss_of(minus)) / (2 * h);
      ASSERT_LE(relative_error(grads.weights[l].data()[i], fd), 1e-3);
    }
}

TEST(RmseLoss, IdentityGeneratorIsZero) {
  SeededRng rng(4);
  const Matrix batch = random_matrix(rng, 7, 4);
  EXPECT_DOUBLE_EQ(sgw::losses::rmse_loss(identity_generator(4), batch), 0.0);
}

TEST(RmseLoss, UnitOffsetGeneratorIsOne) {
  SeededRng rng(5);
  const Matrix batch = random_matrix(rng, 9, 3);
  DenseNet g = identity_generator(3);
  g.layer(0).bias(0, 0) = 1.0;  // G(x) = x + e1
  EXPECT_NEAR(sgw::losses::rmse_loss(g, batch), 1.0, 1e-12);
}

TEST(RmseLoss, GradientMatchesFiniteDifferences) {
  SeededRng rng(6);
  DenseNet g({3, 5, 3}, {Activation::LeakyRelu, Activation::Identity});
  g.init_he(rng);
  Matrix batch = random_matrix(rng, 6, 3);
  while (!kink_free(g, batch)) batch = random_matrix(rng, 6, 3);

  Tape tape;
  auto vars = sgw::nn::push_params(tape, g);
  Var out = sgw::nn::apply_net(tape, g, vars, batch);
  Var loss = sgw::losses::rmse_expr(tape, out, batch);
  tape.backward_scalar(loss);
  const auto grads = sgw::nn::collect_grads(tape, vars);

  const double h = 1e-5;
  for (std::size_t l = 0; l < g.layer_count(); ++l)
    for (std::size_t i = 0; i < g.layer(l).weight.size(); ++i) {
      DenseNet plus = g, minus = g;
      plus.layer(l).weight.data()[i] += h;
      minus.layer(l).weight.data()[i] -= h;
      const double fd =
          (sgw::losses::rmse_loss(plus, batch) - sgw::losses::rmse_loss(minus, batch)) / (2 * h);
      ASSERT_LE(relative_error(grads.weights[l].data()[i], fd), 1e-4);
    }
}

TEST(SgwLoss, PerfectGeneratorOutputGivesZero) {
  // G(input) coincides with the real batch as a set (rows permuted).
  SeededRng rng(7);
  const Matrix real = random_matrix(rng, 6, 3);
  Matrix input(6, 3);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) input(i, j) = real((i + 2) % 6, j);
  auto g = identity_generator(3);
  SeededRng basis_rng(8);
  EXPECT_NEAR(sgw::losses::sgw_loss(g, input, real, basis_rng, 16), 0.0, 1e-12);
}

TEST(SgwLoss, FiniteAndNonnegativeOnRandomNets) {
  SeededRng rng(9);
  DenseNet g({4, 6, 4}, {Activation::LeakyRelu, Activation::Identity});
  g.init_he(rng);
  const Matrix input = random_matrix(rng, 10, 4);
  const Matrix real = random_matrix(rng, 10, 4);
  SeededRng basis_rng(10);
  const double v = sgw::losses::sgw_loss(g, input, real, basis_rng, 8);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
}

TEST(SgwLoss, FrozenPlanGradientMatchesFiniteDifferences) {
  SeededRng rng(11);
  const std::size_t n = 8, d = 3;
  const Matrix gen_out = random_matrix(rng, n, d);
  const Matrix real = random_matrix(rng, n, d);
  SeededRng basis_rng(12);
  const auto basis = sgw::sample_basis(basis_rng, 6, d);
  const auto plan = sgw::losses::freeze_sgw_plan(gen_out, real, basis);

  Tape tape;
  Var out = tape.leaf(gen_out);
  Var loss = sgw::losses::sgw_expr(tape, out, plan);
  tape.backward_scalar(loss);
  EXPECT_NEAR(tape.scalar(loss), sgw::losses::frozen_sgw_value(plan, gen_out), 1e-12);

  const Matrix& grad = tape.grad(out);
  const double h = 1e-6;
  for (std::size_t i = 0; i < gen_out.size(); ++i) {
    Matrix plus = gen_out, minus = gen_out;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    const double fd = (sgw::losses::frozen_sgw_value(plan, plus) -
                       sgw::losses::frozen_sgw_value(plan, minus)) /
                      (2 * h);
    ASSERT_LE(relative_error(grad.data()[i], fd), 1e-3) << "coordinate " << i;
  }
}

TEST(AdvLoss, ZeroCriticGivesZero) {
  SeededRng rng(13);
  const Matrix input = random_matrix(rng, 5, 2);
  EXPECT_DOUBLE_EQ(sgw::losses::adv_loss(zero_critic(2), identity_generator(2), input), 0.0);
}

TEST(AdvLoss, LinearCriticClosedForm) {
  SeededRng rng(14);
  const Matrix input = random_matrix(rng, 7, 2);
  auto critic = linear_critic({0.3, -1.2});
  auto g = identity_generator(2);
  double mean[2] = {0, 0};
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t c = 0; c < 2; ++c) mean[c] += input(i, c) / 7.0;
  EXPECT_NEAR(sgw::losses::adv_loss(critic, g, input), -(0.3 * mean[0] - 1.2 * mean[1]), 1e-12);
}

TEST(AdvLoss, MatchesIndependentRecomputation) {
  SeededRng rng(15);
  DenseNet critic({3, 4, 1}, {Activation::LeakyRelu, Activation::Identity});
  DenseNet g({3, 4, 3}, {Activation::LeakyRelu, Activation::Identity});
  critic.init_he(rng);
  g.init_he(rng);
  const Matrix input = random_matrix(rng, 6, 3);
  const Matrix scores = critic.forward_plain(g.forward_plain(input));
  double mean = 0.0;
  for (std::size_t i = 0; i < scores.rows(); ++i) mean += scores(i, 0);
  mean /= static_cast<double>(scores.rows());
  EXPECT_NEAR(sgw::losses::adv_loss(critic, g, input), -mean, 1e-12);
}

TEST(AdvLoss, GeneratorGradientsMatchFiniteDifferences) {
  SeededRng rng(16);
  DenseNet critic({2, 3, 1}, {Activation::LeakyRelu, Activation::Identity});
  DenseNet g({2, 3, 2}, {Activation::LeakyRelu, Activation::Identity});
  critic.init_he(rng);
  g.init_he(rng);
  Matrix input = random_matrix(rng, 5, 2);
  while (!kink_free(g, input) || !kink_free(critic, g.forward_plain(input))) {
    g.init_he(rng);
    input = random_matrix(rng, 5, 2);
  }

  Tape tape;
  auto gvars = sgw::nn::push_params(tape, g);
  Var out = sgw::nn::apply_net(tape, g, gvars, input);
  Var loss = sgw::losses::adv_expr(tape, critic, out);
  tape.backward_scalar(loss);
  const auto grads = sgw::nn::collect_grads(tape, gvars);

  const double h = 1e-5;
  for (std::size_t l = 0; l < g.layer_count(); ++l)
    for (std::size_t i = 0; i < g.layer(l).weight.size(); ++i) {
      DenseNet plus = g, minus = g;
      plus.layer(l).weight.data()[i] += h;
      minus.layer(l).weight.data()[i] -= h;
      const double fd = (sgw::losses::adv_loss(critic, plus, input) -
                         sgw::losses::adv_loss(critic, minus, input)) /
                        (2 * h);
      ASSERT_LE(relative_error(grads.weights[l].data()[i], fd), 1e-3);
    }
}

TEST(TotalLoss, DefaultWeightsArithmetic) {
  LossWeights w;  // defaults (100, 1000, 1)
  EXPECT_DOUBLE_EQ(sgw::losses::total_generator_loss(w, 0.01, 0.002, -0.5), 2.5);
  EXPECT_DOUBLE_EQ(sgw::losses::total_generator_loss(w, 1.0, 0.0, 0.0), 100.0);
  LossWeights zero;
  zero.lambda_rmse = zero.lambda_sgw = zero.lambda_adv = 0.0;
  EXPECT_DOUBLE_EQ(sgw::losses::total_generator_loss(zero, 3.0, 4.0, 5.0), 0.0);
}

TEST(GeneratorLoss, BreakdownReconstructionIdentity) {
  SeededRng rng(17);
  DenseNet g({3, 5, 3}, {Activation::LeakyRelu, Activation::Identity});
  DenseNet critic({3, 5, 1}, {Activation::LeakyRelu, Activation::Identity});
  g.init_he(rng);
  critic.init_he(rng);
  const Matrix input = random_matrix(rng, 8, 3);
  const Matrix real = random_matrix(rng, 8, 3);
  LossWeights w;
  SeededRng sgw_rng(18);
  const auto res = sgw::losses::generator_loss(g, critic, input, real, w, sgw_rng, 8);
  const double recomposed = w.lambda_rmse * res.breakdown.rmse_term +
                            w.lambda_sgw * res.breakdown.sgw_term +
                            w.lambda_adv * res.breakdown.adv_term;
  EXPECT_NEAR(res.breakdown.total_generator, recomposed, 1e-12);
}

TEST(GeneratorLoss, AblationSwitchIsExact) {
  // With lambda_sgw = 0 the gradients equal those of the two-term objective.
  SeededRng rng(19);
  DenseNet g({3, 4, 3}, {Activation::LeakyRelu, Activation::Identity});
  DenseNet critic({3, 4, 1}, {Activation::LeakyRelu, Activation::Identity});
  g.init_he(rng);
  critic.init_he(rng);
  const Matrix input = random_matrix(rng, 6, 3);
  const Matrix real = random_matrix(rng, 6, 3);

  LossWeights ablated;
  ablated.lambda_sgw = 0.0;
  SeededRng r1(20);
  const auto res = sgw::losses::generator_loss(g, critic, input, real, ablated, r1, 8);

  // Reference: explicit two-term objective on a fresh tape.
  Tape tape;
  auto gvars = sgw::nn::push_params(tape, g);
  Var out = sgw::nn::apply_net(tape, g, gvars, input);
  Var two_term = tape.add(tape.scale(sgw::losses::rmse_expr(tape, out, input), ablated.lambda_rmse),
                          tape.scale(sgw::losses::adv_expr(tape, critic, out), ablated.lambda_adv));
  tape.backward_scalar(two_term);
  const auto ref = sgw::nn::collect_grads(tape, gvars);

  for (std::size_t l = 0; l < g.layer_count(); ++l) {
    EXPECT_LE(max_abs_diff(res.grads.weights[l], ref.weights[l]), 1e-12);
    EXPECT_LE(max_abs_diff(res.grads.biases[l], ref.biases[l]), 1e-12);
  }
  EXPECT_DOUBLE_EQ(res.breakdown.sgw_term, 0.0);
}

TEST(CriticLoss, CriticAloneImprovesWhenTrained) {
  // 100 critic-only steps against a fixed generator must strictly reduce the
  // critic loss, for 5 of 5 seeds. The penalty draws fresh interpolation
  // points every step, so before/after are measured on one fixed draw.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng rng(seed);
    DenseNet g({2, 4, 2}, {Activation::LeakyRelu, Activation::Identity});
    DenseNet critic({2, 8, 1}, {Activation::LeakyRelu, Activation::Identity});
    g.init_he(rng);
    critic.init_he(rng);
    const Matrix real = random_matrix(rng, 16, 2) * 2.0;
    const Matrix low = random_matrix(rng, 16, 2);
    const Matrix fake = g.forward_plain(low);
    const auto eval_loss = [&](const DenseNet& d) {
      SeededRng eval_rng(4242);
      return sgw::losses::critic_loss(d, real, fake, 10.0, eval_rng).value;
    };
    auto adam = sgw::nn::AdamState::for_net(critic, 1e-3);
    const double first = eval_loss(critic);
    for (int step = 0; step < 100; ++step) {
      auto res = sgw::losses::critic_loss(critic, real, fake, 10.0, rng);
      sgw::nn::adam_step(critic, res.grads, adam);
    }
    EXPECT_LT(eval_loss(critic), first) << "seed " << seed;
  }
}

}  // namespace
