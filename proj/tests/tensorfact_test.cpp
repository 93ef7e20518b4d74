#include <gtest/gtest.h>

#include <cmath>

#include "convkernel/error.hpp"
#include "convkernel/tensorfact.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace convkernel;
using ck_test::CpProblem;

namespace {

std::vector<bool> mask_bits(const ObservationMask& m) {
  std::vector<bool> bits(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) bits[i] = m.observed(i);
  return bits;
}

CpProblem to_problem(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask) {
  CpProblem p;
  p.w = model.w;
  p.u = model.u;
  p.v = model.v;
  p.y = y;
  p.observed = mask_bits(mask);
  p.gamma = model.gamma;
  p.theta_w = model.kernels.w;
  p.theta_u = model.kernels.u;
  p.theta_v = model.kernels.v;
  return p;
}

struct Instance {
  FactorModel model;
  DenseTensor y;
  ObservationMask mask;
};

Instance random_instance(Rng& rng, bool masked, bool kernels) {
  const Shape3 s{1 + rng.below(4), 1 + rng.below(5), 2 + rng.below(5)};
  const std::size_t R = 1 + rng.below(3);
  Instance in;
  in.model = init_factors(s, R, rng.next());
  in.y = ck_test::random_tensor(rng, {s[0], s[1], s[2]});
  in.mask = masked ? make_mask(s, 0.4, rng.next()) : ObservationMask(s, true);
  if (kernels) {
    in.model.gamma = rng.uniform(0.1, 2.0);
    in.model.kernels.w = ck_test::random_vector(rng, s[0]);
    if (rng.uniform() < 0.5) in.model.kernels.u = ck_test::random_vector(rng, s[1]);
    in.model.kernels.v = ck_test::random_vector(rng, s[2]);
  }
  return in;
}

DenseTensor low_rank(Rng& rng, Shape3 s, std::size_t R) {
  const FactorModel m = init_factors(s, R, rng.next());
  return m.reconstruct();
}

}  // namespace

TEST(ObservationMask, CountsAndComplement) {
  const Shape3 s{3, 4, 11};
  const ObservationMask m = make_mask(s, 0.3, 9);
  EXPECT_EQ(m.observed_count(), static_cast<std::size_t>(std::llround(0.7 * 132)));
  const ObservationMask c = m.complement();
  EXPECT_EQ(c.observed_count(), 132 - m.observed_count());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NE(m.observed(i), c.observed(i));
  EXPECT_EQ(make_mask(s, 0.3, 9), m);
  EXPECT_FALSE(make_mask(s, 0.3, 10) == m);
  EXPECT_EQ(make_mask(s, 0.0, 1).observed_count(), 132u);
  EXPECT_THROW(make_mask(s, 1.0, 1), InvalidArgument);
  EXPECT_THROW(make_mask(s, -0.1, 1), InvalidArgument);
  std::vector<double> v(132, 1.0);
  m.project(v);
  double sum = 0.0;
  for (double x : v) sum += x;
  EXPECT_EQ(sum, static_cast<double>(m.observed_count()));
}

TEST(TensorFact, ObjectiveMatchesReference) {
  Rng rng(1);
  for (int inst = 0; inst < 20; ++inst) {
    const Instance in = random_instance(rng, inst % 2 == 0, inst % 3 != 0);
    EXPECT_NEAR(tf_objective(in.model, in.y, in.mask), ck_test::reference_objective(to_problem(in.model, in.y, in.mask)),
                1e-10 * (1.0 + tf_objective(in.model, in.y, in.mask)));
  }
}

TEST(TensorFact, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  for (int inst = 0; inst < 30; ++inst) {
    const Instance in = random_instance(rng, inst % 2 == 0, inst % 4 < 2);
    const FactorGradients g = tf_gradients(in.model, in.y, in.mask);
    const CpProblem p = to_problem(in.model, in.y, in.mask);
    const DenseTensor* grads[] = {&g.w, &g.u, &g.v};
    for (std::size_t mode = 1; mode <= 3; ++mode) {
      const DenseTensor& gm = *grads[mode - 1];
      for (std::size_t i = 0; i < gm.rows(); ++i) {
        for (std::size_t r = 0; r < gm.cols(); ++r) {
          const double fd = ck_test::finite_difference(p, mode, i, r, 1e-5);
          EXPECT_NEAR(gm.at(i, r), fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST(TensorFact, FactorSystemIsSymmetricPositiveDefinite) {
  Rng rng(3);
  for (int inst = 0; inst < 10; ++inst) {
    const Instance in = random_instance(rng, true, true);
    for (std::size_t mode = 1; mode <= 3; ++mode) {
      const FactorSystem sys(in.model, in.y, in.mask, mode, 1e-8);
      const DenseTensor& f = in.model.factor(mode);
      DenseTensor a = DenseTensor::matrix(f.rows(), f.cols()), b = a;
      for (double& x : a.data()) x = rng.normal();
      for (double& x : b.data()) x = rng.normal();
      const double ab = ck_test::dot(sys.apply(a).data(), b.data());
      const double ba = ck_test::dot(a.data(), sys.apply(b).data());
      EXPECT_NEAR(ab, ba, 1e-10 * (std::abs(ab) + 1.0));
      EXPECT_GT(ck_test::dot(a.data(), sys.apply(a).data()), 0.0);
    }
  }
}

TEST(TensorFact, FactorUpdateReachesTheExactBlockMinimizer) {
  Rng rng(4);
  for (int inst = 0; inst < 12; ++inst) {
    Instance in = random_instance(rng, inst % 2 == 0, inst % 3 == 0);
    TfConfig cfg;
    cfg.ridge = 1e-12;
    cfg.cg_tol = 1e-13;
    cfg.cg_iters = 500;
    for (std::size_t mode = 1; mode <= 3; ++mode) {
      const CpProblem p = to_problem(in.model, in.y, in.mask);
      const DenseTensor expect = ck_test::reference_factor_minimizer(p, mode);
      const double before = tf_objective(in.model, in.y, in.mask);
      update_factor(in.model, in.y, in.mask, mode, cfg);
      const double after = tf_objective(in.model, in.y, in.mask);
      EXPECT_LE(after, before * (1.0 + 1e-12) + 1e-14);
      // The minimizer can be non-unique when a row has no observations, so
      // compare objective values rather than factors.
      CpProblem q = p;
      (mode == 1 ? q.w : mode == 2 ? q.u : q.v) = expect;
      EXPECT_NEAR(after, ck_test::reference_objective(q), 1e-8 * (1.0 + after));
    }
  }
}

TEST(TensorFact, ConjugateGradientSolvesSmallSpdSystem) {
  // A = diag(1..4) + 0.5 * ones, applied to 4x1 matrices.
  auto op = [](const DenseTensor& x) {
    DenseTensor y = x;
    double s = 0.0;
    for (double v : x.data()) s += v;
    for (std::size_t i = 0; i < 4; ++i) y[i] = static_cast<double>(i + 1) * x[i] + 0.5 * s;
    return y;
  };
  DenseTensor b = DenseTensor::matrix(4, 1);
  b[0] = 1;
  b[1] = -2;
  b[2] = 0.5;
  b[3] = 3;
  const CgResult r = conjugate_gradient(op, b, DenseTensor::matrix(4, 1), 1e-14, 50);
  EXPECT_LE(r.iterations, 6u);
  const DenseTensor ax = op(r.x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ax[i], b[i], 1e-12);

  auto indefinite = [](const DenseTensor& x) {
    DenseTensor y = x;
    y[1] = -y[1];
    return y;
  };
  DenseTensor e = DenseTensor::matrix(2, 1);
  e[1] = 1.0;
  EXPECT_THROW(conjugate_gradient(indefinite, e, DenseTensor::matrix(2, 1), 1e-10, 10), SolverError);
}

TEST(TensorFact, ObjectiveIsMonotoneAcrossFits) {
  Rng rng(5);
  for (int inst = 0; inst < 10; ++inst) {
    const Shape3 s{4 + rng.below(4), 3 + rng.below(4), 6 + rng.below(10)};
    DenseTensor y = low_rank(rng, s, 3);
    for (double& v : y.data()) v += 0.1 * rng.normal();
    const ObservationMask mask = make_mask(s, inst % 2 ? 0.5 : 0.0, rng.next());
    ModeKernels k;
    if (inst % 3 == 0) {
      std::vector<double> theta(s[2], 0.0);
      theta[0] = 1.0;
      theta[1] = -1.0;
      k.v = theta;
    }
    TfConfig cfg;
    cfg.seed = rng.next();
    cfg.outer_iters = 30;
    const FitReport fit = tf_fit(y, mask, 2 + inst % 2, inst % 3 == 0 ? 0.5 : 0.0, k, cfg);
    ASSERT_GE(fit.objective_history.size(), 2u);
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i) {
      EXPECT_LE(fit.objective_history[i], fit.objective_history[i - 1] * (1.0 + 1e-12)) << "step " << i;
    }
  }
}

TEST(TensorFact, ExactLowRankRecovery) {
  Rng rng(6);
  const Shape3 s{6, 5, 8};
  const DenseTensor y = low_rank(rng, s, 2);
  TfConfig cfg;
  cfg.outer_iters = 200;
  cfg.outer_tol = 0.0;
  const FitReport fit = tf_fit(y, ObservationMask(s, true), 2, 0.0, {}, cfg);
  const double yy = frobenius_norm_sq(y.data());
  EXPECT_LE(fit.objective_history.back(), 1e-8 * yy);
  EXPECT_LT(rse(fit.model.reconstruct(), y, ObservationMask(s, true), Projection::all), 1e-2);
}

TEST(TensorFact, InitIsSeededAndScaled) {
  const FactorModel a = init_factors({3, 4, 5}, 2, 42);
  const FactorModel b = init_factors({3, 4, 5}, 2, 42);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.v, b.v);
  EXPECT_FALSE(a.w == init_factors({3, 4, 5}, 2, 43).w);
  EXPECT_EQ(a.rank(), 2u);
  EXPECT_THROW(init_factors({3, 4, 5}, 0, 1), InvalidArgument);
}

TEST(TensorFact, ConsistencyChecks) {
  Rng rng(7);
  const Shape3 s{3, 4, 5};
  FactorModel m = init_factors(s, 2, 1);
  const DenseTensor y = ck_test::random_tensor(rng, {3, 4, 5});
  m.kernels.v = std::vector<double>(4, 0.0);
  try {
    check_consistent(m, y, ObservationMask(s, true));
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("length 4"), std::string::npos);
    EXPECT_NE(msg.find("dimension is 5"), std::string::npos);
  }
  m.kernels.v.reset();
  EXPECT_THROW(check_consistent(m, y, ObservationMask({3, 4, 6}, true)), InvalidArgument);
  m.gamma = -1.0;
  EXPECT_THROW(check_consistent(m, y, ObservationMask(s, true)), InvalidArgument);
}

TEST(Rse, ProjectionsAndZeroTruth) {
  const Shape3 s{1, 1, 4};
  const DenseTensor truth({1, 1, 4}, {1, 2, 3, 4});
  const DenseTensor est({1, 1, 4}, {1, 2, 0, 4});
  ObservationMask m(s, true);
  m.set(2, false);
  EXPECT_EQ(rse(est, truth, m, Projection::observed), 0.0);
  EXPECT_NEAR(rse(est, truth, m, Projection::missing), 100.0, 1e-12);
  EXPECT_NEAR(rse(est, truth, m, Projection::all), 100.0 * 3.0 / std::sqrt(30.0), 1e-12);
  EXPECT_EQ(rse(truth, truth, m, Projection::all), 0.0);
  EXPECT_THROW(rse(est, DenseTensor({1, 1, 4}), m, Projection::all), InvalidArgument);
}
