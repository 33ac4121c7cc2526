#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "pseudosup/adamw.hpp"
#include "pseudosup/checkpoint.hpp"
#include "pseudosup/mlp.hpp"

using namespace pseudosup;

namespace {

MlpModel<double> fixed_242() {
  const std::vector<Eigen::Index> dims{2, 4, 2};
  auto m = make_zero_mlp<double>(dims);
  m.weights[0] << 0.5, -0.25, 1.0, -1.5, 0.75, 0.1, -0.3, 0.2;
  m.biases[0] << 0.1, -0.2, 0.05, 0.3;
  m.weights[1] << 1.0, -1.0, 0.5, 0.25, -0.75, 1.25, 0.2, -0.4;
  m.biases[1] << 0.01, -0.02;
  return m;
}

oracle::ScalarMlp to_scalar(const MlpModel<double>& m) {
  oracle::ScalarMlp s;
  for (std::size_t k = 0; k < m.num_layers(); ++k) {
    oracle::Grid w(static_cast<std::size_t>(m.weights[k].rows()),
                   std::vector<double>(static_cast<std::size_t>(m.weights[k].cols())));
    for (Eigen::Index i = 0; i < m.weights[k].rows(); ++i)
      for (Eigen::Index j = 0; j < m.weights[k].cols(); ++j) w[i][j] = m.weights[k](i, j);
    s.weights.push_back(w);
    s.biases.emplace_back(m.biases[k].data(), m.biases[k].data() + m.biases[k].size());
  }
  return s;
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_SUITE("mlp_forward") {
  TEST_CASE("zero parameters give zero logits") {
    const std::vector<Eigen::Index> dims{3, 5, 2};
    const auto m = make_zero_mlp<double>(dims);
    std::mt19937_64 rng(1);
    const MatrixXd x = random_matrix(4, 3, rng);
    CHECK(mlp_forward(m, x).logits.isZero(0.0));
  }

  TEST_CASE("identity single layer returns its input") {
    const std::vector<Eigen::Index> dims{3, 3};
    auto m = make_zero_mlp<double>(dims);
    m.weights[0].setIdentity();
    MatrixXd x(1, 3);
    x << 0.25, -7.5, 3.0;
    CHECK(mlp_forward(m, x).logits == x);
  }

  TEST_CASE("fixed 2-4-2 network matches frozen hand computation") {
    MatrixXd x(2, 2);
    x << 1.5, -0.5, -2.0, 0.25;
    const MatrixXd z = mlp_forward(fixed_242(), x).logits;
    CHECK(z(0, 0) == doctest::Approx(-0.79).epsilon(1e-14));
    CHECK(z(0, 1) == doctest::Approx(1.63).epsilon(1e-14));
    CHECK(z(1, 0) == doctest::Approx(0.8425).epsilon(1e-14));
    CHECK(z(1, 1) == doctest::Approx(-1.27875).epsilon(1e-14));
  }

  TEST_CASE("random 2-4-2 networks agree with the scalar re-computation") {
    std::mt19937_64 rng(42);
    const std::vector<Eigen::Index> dims{2, 4, 2};
    for (int trial = 0; trial < 25; ++trial) {
      const auto m = make_mlp<double>(dims, rng);
      const MatrixXd x = random_matrix(3, 2, rng);
      const MatrixXd z = mlp_logits(m, x);
      const auto ref = to_scalar(m);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto expect = oracle::forward(ref, {x(i, 0), x(i, 1)});
        CHECK(z(i, 0) == doctest::Approx(expect[0]).epsilon(1e-13));
        CHECK(z(i, 1) == doctest::Approx(expect[1]).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("dimension mismatch and non-finite input are rejected") {
    const auto m = fixed_242();
    CHECK_THROWS_AS(mlp_forward(m, MatrixXd::Zero(2, 3)), InvalidInput);
    MatrixXd bad = MatrixXd::Zero(1, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(mlp_forward(m, bad), InvalidInput);
  }

  TEST_CASE("seeded initialisation is deterministic and bounded by 1/sqrt(fan_in)") {
    const std::vector<Eigen::Index> dims{16, 8, 2};
    std::mt19937_64 a(9), b(9);
    const auto ma = make_mlp<double>(dims, a);
    const auto mb = make_mlp<double>(dims, b);
    CHECK(ma == mb);
    CHECK(ma.weights[0].cwiseAbs().maxCoeff() <= 0.25);
    CHECK(ma.weights[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  }
}

TEST_SUITE("softmax_cross_entropy") {
  TEST_CASE("uniform two-class logits cost ln 2") {
    MatrixXd z = MatrixXd::Zero(1, 2);
    for (int y : {0, 1}) {
      const std::vector<int> labels{y};
      CHECK(softmax_cross_entropy(z, std::span<const int>(labels)).loss == doctest::Approx(0.6931471805599453));
    }
  }

  TEST_CASE("saturated correct logits neither overflow nor cost anything") {
    MatrixXd z(1, 2);
    z << 1000.0, -1000.0;
    const std::vector<int> labels{0};
    const auto ce = softmax_cross_entropy(z, std::span<const int>(labels));
    CHECK(std::isfinite(ce.loss));
    CHECK(ce.loss < 1e-6);
    CHECK(ce.loss >= 0.0);
    CHECK(ce.grad_logits.allFinite());
  }

  TEST_CASE("frozen value for the fixed network") {
    MatrixXd x(2, 2);
    x << 1.5, -0.5, -2.0, 0.25;
    const std::vector<int> labels{1, 0};
    const auto ce = softmax_cross_entropy(mlp_logits(fixed_242(), x), std::span<const int>(labels));
    CHECK(ce.loss == doctest::Approx(0.09920545201476716).epsilon(1e-13));
  }

  TEST_CASE("random batches agree with the direct formula; rows sum as required") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> label(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      const MatrixXd z = random_matrix(3, 2, rng, 3.0);
      std::vector<int> y{label(rng), label(rng), label(rng)};
      const auto ce = softmax_cross_entropy(z, std::span<const int>(y));
      oracle::Grid g;
      for (Eigen::Index i = 0; i < z.rows(); ++i) g.push_back({z(i, 0), z(i, 1)});
      CHECK(ce.loss == doctest::Approx(oracle::cross_entropy(g, y)).epsilon(1e-12));
      const MatrixXd p = softmax_rows(z);
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
        CHECK(std::abs(ce.grad_logits.row(i).sum()) < 1e-9);
      }
    }
  }

  TEST_CASE("adding a constant to a row leaves the loss unchanged") {
    std::mt19937_64 rng(4);
    const MatrixXd z = random_matrix(5, 3, rng, 2.0);
    MatrixXd shifted = z;
    shifted.row(2).array() += 37.25;
    shifted.row(4).array() -= 11.0;
    const std::vector<int> y{0, 1, 2, 1, 0};
    CHECK(std::abs(softmax_cross_entropy(z, std::span<const int>(y)).loss -
                   softmax_cross_entropy(shifted, std::span<const int>(y)).loss) < 1e-9);
  }

  TEST_CASE("out-of-range labels are rejected") {
    const MatrixXd z = MatrixXd::Zero(2, 2);
    const std::vector<int> bad{0, 2};
    const std::vector<int> negative{-1, 0};
    CHECK_THROWS_AS(softmax_cross_entropy(z, std::span<const int>(bad)), InvalidInput);
    CHECK_THROWS_AS(softmax_cross_entropy(z, std::span<const int>(negative)), InvalidInput);
  }
}

TEST_SUITE("mlp_backward") {
  TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    std::mt19937_64 rng(5);
    const std::vector<Eigen::Index> dims{3, 4, 2};
    const auto m = make_mlp<double>(dims, rng);
    const auto fwd = mlp_forward(m, random_matrix(6, 3, rng));
    const auto g = mlp_backward(m, fwd.cache, MatrixXd::Zero(6, 2));
    for (std::size_t k = 0; k < g.num_layers(); ++k) {
      CHECK(g.weights[k].isZero(0.0));
      CHECK(g.biases[k].isZero(0.0));
    }
  }

  TEST_CASE("single linear layer: dW = x^T g exactly") {
    std::mt19937_64 rng(6);
    const std::vector<Eigen::Index> dims{3, 2};
    const auto m = make_mlp<double>(dims, rng);
    const MatrixXd x = random_matrix(1, 3, rng);
    const MatrixXd g = random_matrix(1, 2, rng);
    const auto grads = mlp_backward(m, mlp_forward(m, x).cache, g);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) CHECK(grads.weights[0](i, j) == x(0, i) * g(0, j));
    CHECK(grads.biases[0] == g);
  }

  TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> label(0, 1);
    const std::vector<Eigen::Index> dims{2, 4, 2};
    for (int trial = 0; trial < 20; ++trial) {
      auto m = make_mlp<double>(dims, rng);
      const MatrixXd x = random_matrix(4, 2, rng);
      std::vector<int> y(4);
      for (auto& v : y) v = label(rng);
      const auto fwd = mlp_forward(m, x);
      const auto ce = softmax_cross_entropy(fwd.logits, std::span<const int>(y));
      const auto grads = mlp_backward(m, fwd.cache, ce.grad_logits);
      auto loss = [&] { return softmax_cross_entropy(mlp_logits(m, x), std::span<const int>(y)).loss; };
      for (std::size_t k = 0; k < m.num_layers(); ++k) {
        for (Eigen::Index i = 0; i < m.weights[k].size(); ++i)
          CHECK(oracle::rel_error(grads.weights[k].data()[i],
                                  oracle::central_difference(loss, m.weights[k].data()[i])) < 1e-4);
        for (Eigen::Index i = 0; i < m.biases[k].size(); ++i)
          CHECK(oracle::rel_error(grads.biases[k].data()[i],
                                  oracle::central_difference(loss, m.biases[k].data()[i])) < 1e-4);
      }
    }
  }

  TEST_CASE("mismatched cache or gradient shape is rejected") {
    std::mt19937_64 rng(8);
    const std::vector<Eigen::Index> a{2, 4, 2};
    const std::vector<Eigen::Index> b{2, 3, 2};
    const auto ma = make_mlp<double>(a, rng);
    const auto mb = make_mlp<double>(b, rng);
    const auto fwd = mlp_forward(ma, random_matrix(3, 2, rng));
    CHECK_THROWS_AS(mlp_backward(mb, fwd.cache, MatrixXd::Zero(3, 2)), InvalidInput);
    CHECK_THROWS_AS(mlp_backward(ma, fwd.cache, MatrixXd::Zero(2, 2)), InvalidInput);
  }
}

TEST_SUITE("optimizer_step") {
  const std::vector<Eigen::Index> kScalar{1, 1};

  TEST_CASE("zero gradient with zero weight decay leaves parameters unchanged") {
    std::mt19937_64 rng(10);
    const std::vector<Eigen::Index> dims{3, 4, 2};
    auto m = make_mlp<double>(dims, rng);
    const auto before = m;
    auto state = make_adamw_state(m, AdamWConfig<double>{});
    for (int i = 0; i < 3; ++i) optimizer_step(m, zeros_like(m), state);
    CHECK(m == before);
    CHECK(state.step == 3);
  }

  TEST_CASE("first step with unit gradient moves by the step size") {
    auto m = make_zero_mlp<double>(kScalar);
    m.weights[0](0, 0) = 0.5;
    AdamWConfig<double> c;
    c.learning_rate = 4e-5;
    auto state = make_adamw_state(m, c);
    auto g = zeros_like(m);
    g.weights[0](0, 0) = 1.0;
    optimizer_step(m, g, state);
    // m_hat = v_hat = 1, so the move is lr / (1 + eps).
    CHECK(m.weights[0](0, 0) == doctest::Approx(0.5 - 4e-5 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(std::abs((0.5 - m.weights[0](0, 0)) - 4e-5) < 1e-12);
  }

  TEST_CASE("decoupled decay shrinks by (1 - lr*wd) per step under zero gradient") {
    auto m = make_zero_mlp<double>(kScalar);
    m.weights[0](0, 0) = 2.0;
    m.biases[0](0) = -1.0;
    AdamWConfig<double> c;
    c.learning_rate = 1e-2;
    c.weight_decay = 0.5;
    auto state = make_adamw_state(m, c);
    for (int i = 1; i <= 4; ++i) {
      optimizer_step(m, zeros_like(m), state);
      CHECK(m.weights[0](0, 0) == doctest::Approx(2.0 * std::pow(1 - 5e-3, i)).epsilon(1e-14));
      CHECK(m.biases[0](0) == doctest::Approx(-1.0 * std::pow(1 - 5e-3, i)).epsilon(1e-14));
    }
  }

  TEST_CASE("moments mirror parameter shapes and mismatches are rejected") {
    std::mt19937_64 rng(11);
    const std::vector<Eigen::Index> dims{3, 4, 2};
    const std::vector<Eigen::Index> other{3, 5, 2};
    auto m = make_mlp<double>(dims, rng);
    auto state = make_adamw_state(m, AdamWConfig<double>{});
    CHECK(same_shape(state.first_moment, m));
    CHECK(same_shape(state.second_moment, m));
    CHECK_THROWS_AS(optimizer_step(m, make_zero_mlp<double>(other), state), InvalidInput);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit exact") {
    std::mt19937_64 rng(12);
    const std::vector<Eigen::Index> dims{7, 5, 3, 2};
    auto m = make_mlp<double>(dims, rng);
    m.weights[0](0, 0) = 1.0 / 3.0;
    m.biases[2](1) = -2.2250738585072014e-308;
    std::stringstream ss;
    save_checkpoint(ss, m);
    CHECK(ss.str().rfind("mlp 7 5 3 2\n", 0) == 0);
    const auto back = load_checkpoint<double>(ss);
    CHECK(back == m);
  }

  TEST_CASE("malformed checkpoints report the line") {
    std::istringstream bad("mlp 1 1\n0.5\nnot-a-number\n");
    try {
      load_checkpoint<double>(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    std::istringstream truncated("mlp 2 2\n1\n2\n");
    CHECK_THROWS_AS(load_checkpoint<double>(truncated), ParseError);
    std::istringstream header("net 2 2\n");
    CHECK_THROWS_AS(load_checkpoint<double>(header), ParseError);
  }
}
