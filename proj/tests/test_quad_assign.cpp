#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "replica_sync/errors.hpp"
#include "replica_sync/quad_assign.hpp"

using namespace replica_sync;

namespace {

EstimatorConfig qa_cfg(std::uint64_t seed, long mc, int threads = 2) {
  EstimatorConfig cfg;
  cfg.seed = seed;
  cfg.mc_samples = mc;
  cfg.inner_resolution = 64;
  cfg.threads = threads;
  return cfg;
}

}  // namespace

TEST_CASE("mercer truncation of the built-in kernels") {
  SUBCASE("rank-one Rademacher: mu = scale, f(x) = x") {
    const MercerTruncation t =
        mercer_truncate(KernelSpec::rank_one(1.0), 1, 0);
    REQUIRE(t.rank == 1);
    CHECK(t.mu(0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(t.f_nodes(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(t.f_nodes(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.residual_sup <= 1e-12);
  }
  SUBCASE("xy on Uniform[-1,1]: mu = 1/3, f = sqrt(3) x") {
    const MercerTruncation t = mercer_truncate(
        KernelSpec::rank_one(1.0, BaseMeasure::UniformInterval), 1, 64);
    REQUIRE(t.rank == 1);
    CHECK(t.mu(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));  // E[x^2]
    for (std::size_t a = 0; a < t.nodes.size(); a += 13)
      CHECK(t.f_nodes(static_cast<int>(a), 0) ==
            doctest::Approx(std::sqrt(3.0) * t.nodes[a]).epsilon(1e-9));
    // Nystrom extension reproduces u(x) = x off the nodes
    CHECK(t.feature(0.37)(0) == doctest::Approx(0.37).epsilon(1e-10));
  }
  SUBCASE("eigenfunctions are orthonormal on the quadrature") {
    const MercerTruncation t =
        mercer_truncate(KernelSpec::gaussian_rbf(0.8, 2.0), 5, 256);
    for (int l = 0; l < t.rank; ++l)
      for (int m = 0; m <= l; ++m) {
        double dot = 0.0;
        for (std::size_t a = 0; a < t.nodes.size(); ++a)
          dot += t.weights[a] * t.f_nodes(static_cast<int>(a), l) *
                 t.f_nodes(static_cast<int>(a), m);
        CHECK(std::abs(dot - (l == m ? 1.0 : 0.0)) <= 1e-8);
      }
  }
  SUBCASE("RBF residual decreases strictly in the rank") {
    double prev = 1e18;
    for (int rank : {1, 2, 3, 4, 5, 6}) {
      const MercerTruncation t =
          mercer_truncate(KernelSpec::gaussian_rbf(1.0, 1.0), rank, 256);
      CHECK(t.residual_sup < prev);
      prev = t.residual_sup;
    }
  }
  SUBCASE("trace identity: dropped spectrum equals the diagonal deficit") {
    const KernelSpec kernel = KernelSpec::gaussian_rbf(0.9, 1.0);
    const MercerTruncation full = mercer_truncate(kernel, 24, 256);
    for (int rank : {1, 2, 4}) {
      const MercerTruncation t = mercer_truncate(kernel, rank, 256);
      double dropped = 0.0;
      for (int l = rank; l < full.rank; ++l) dropped += full.mu(l);
      CHECK(t.trace_residual == doctest::Approx(dropped).epsilon(1e-6));
      CHECK(t.trace_residual >= -1e-10);
    }
  }
  SUBCASE("rank deficiency truncates early with a warning flag") {
    const MercerTruncation t =
        mercer_truncate(KernelSpec::finite_rank({0.5, 0.3}), 5, 64);
    CHECK(t.rank == 2);
    CHECK(t.truncated_early);
  }
  SUBCASE("second moment matches the spectral identity for finite rank") {
    const KernelSpec kernel = KernelSpec::finite_rank({0.5, 0.2}, 1.3);
    const double quadrature = kernel_second_moment(kernel);
    const double spectral = 1.3 * 1.3 * (0.5 * 0.5 + 0.2 * 0.2);
    CHECK(std::abs(quadrature - spectral) <= 1e-8);
  }
  SUBCASE("grid-scan bound dominates the kernel") {
    const KernelSpec rbf = KernelSpec::gaussian_rbf(0.7, 2.0);
    CHECK(rbf.bound() >= 2.0);
    CHECK(rbf.bound() <= 2.0 + 1e-6);
    CHECK(KernelSpec::rank_one(1.5).bound() >= 1.5);
  }
}

TEST_CASE("psi_qa basics") {
  const MercerTruncation t = mercer_truncate(KernelSpec::rank_one(1.0), 1, 0);
  SUBCASE("vanishes at q = 0") {
    const McValue psi =
        psi_qa(t, Eigen::MatrixXd::Zero(1, 1), qa_cfg(1, 500));
    CHECK(std::abs(psi.value) <= 1e-12);
  }
  SUBCASE("matches the Z2 potential at unit scale") {
    for (double qs : {0.2, 0.5, 1.0}) {
      Eigen::MatrixXd q(1, 1);
      q << qs;
      const McValue psi = psi_qa(t, q, qa_cfg(2, 200000, 4));
      const double oracle = oracles::z2_psi(1.0, qs);
      CHECK(std::abs(psi.value - oracle) <= std::max(3.0 * psi.stderr, 2e-3));
    }
  }
  SUBCASE("zero-padded rank extension leaves the value unchanged") {
    const KernelSpec kernel = KernelSpec::finite_rank({0.6, 0.3});
    const MercerTruncation t1 = mercer_truncate(kernel, 1, 64);
    const MercerTruncation t2 = mercer_truncate(kernel, 2, 64);
    Eigen::MatrixXd q1(1, 1);
    q1 << 0.45;
    Eigen::MatrixXd q2 = Eigen::MatrixXd::Zero(2, 2);
    q2(0, 0) = 0.45;
    const EstimatorConfig cfg = qa_cfg(3, 4000);
    CHECK(std::abs(psi_qa(t1, q1, cfg).value - psi_qa(t2, q2, cfg).value) <=
          1e-12);
  }
}

TEST_CASE("qa gradient matches paired finite differences") {
  const KernelSpec kernel = KernelSpec::finite_rank({0.5, 0.25}, 1.5);
  const MercerTruncation t = mercer_truncate(kernel, 2, 64);
  const EstimatorConfig cfg = qa_cfg(4, 30000, 4);
  Eigen::MatrixXd q = 0.3 * Eigen::MatrixXd::Identity(2, 2);
  const QaStateMap f = qa_state_map(t, q, cfg);
  Rng rng(5);
  const double delta = 0.02;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
    x = 0.5 * (x + x.transpose()).eval();
    x /= x.norm();
    const double analytic = 0.5 * (f.value - q).cwiseProduct(x).sum();
    const QaChannelEvaluator plus(t, q + delta * x, cfg);
    const QaChannelEvaluator minus(t, q - delta * x, cfg);
    MeanAccumulator diff;
    double x_star;
    Eigen::VectorXd z;
    for (long m = 0; m < cfg.mc_samples; ++m) {
      plus.draw(m, x_star, z);
      diff.add(plus.log_partition(x_star, z) - minus.log_partition(x_star, z));
    }
    const double quad_term = (-0.25 * (q + delta * x).squaredNorm() +
                              0.25 * (q - delta * x).squaredNorm());
    const double fd = (quad_term + diff.mean()) / (2.0 * delta);
    const double tol = std::max(
        1e-3, 4.0 * (diff.stderr_of_mean() / (2.0 * delta) + 0.5 * f.frob_stderr));
    CHECK(std::abs(analytic - fd) <= tol);
  }
}

TEST_CASE("qa_solve") {
  SUBCASE("vanishing kernel scale collapses the maximizer") {
    const MercerTruncation t =
        mercer_truncate(KernelSpec::rank_one(1e-8), 1, 0);
    const QaSolveResult res =
        qa_solve(t, Eigen::MatrixXd::Identity(1, 1),
                 QaSolverOptions{0.5, 1e-6, 200}, qa_cfg(6, 2000));
    CHECK(res.converged);
    CHECK(res.q_star(0, 0) <= 1e-5);
  }
  SUBCASE("scale sqrt(2) matches the Z2 fixed point under the SNR map") {
    const double lambda = 2.0;
    const MercerTruncation t =
        mercer_truncate(KernelSpec::rank_one(std::sqrt(lambda)), 1, 0);
    EstimatorConfig cfg = qa_cfg(7, 1000000, 4);
    cfg.antithetic = true;
    const QaSolveResult res = qa_solve(t, Eigen::MatrixXd::Identity(1, 1),
                                       QaSolverOptions{0.5, 5e-4, 300}, cfg);
    REQUIRE(res.converged);
    // q_qa = sqrt(lambda) * p with p the Z2 overlap
    const double expected = std::sqrt(lambda) * oracles::z2_fixed_point(lambda);
    CHECK(std::abs(res.q_star(0, 0) - expected) <= 1.5e-3);
  }
  SUBCASE("maximizer norm grows with the kernel scale") {
    double prev = -1.0;
    for (double scale : {0.5, 1.0, 2.0}) {
      const MercerTruncation t =
          mercer_truncate(KernelSpec::rank_one(scale + 1.0), 1, 0);
      const QaSolveResult res =
          qa_solve(t, Eigen::MatrixXd::Identity(1, 1),
                   QaSolverOptions{0.5, 1e-3, 200}, qa_cfg(8, 40000));
      CHECK(res.q_frob >= prev - 2e-3);
      prev = res.q_frob;
    }
  }
}

TEST_CASE("qa_mi_mmse") {
  SUBCASE("rank-one Rademacher agrees with the Z2 oracle") {
    const double lambda = 2.0;
    EstimatorConfig cfg = qa_cfg(9, 400000, 4);
    cfg.antithetic = true;
    const QASolution sol =
        qa_mi_mmse(KernelSpec::rank_one(std::sqrt(lambda)), {1},
                   QaSolverOptions{0.5, 1e-3, 300}, cfg);
    CHECK(sol.kappa_second_moment == doctest::Approx(lambda).epsilon(1e-10));
    const double p = oracles::z2_fixed_point(lambda);
    const double mi_oracle = 0.25 * lambda - oracles::z2_psi(lambda, p);
    CHECK(std::abs(sol.mi_limit - mi_oracle) <= 2e-3);
    CHECK(std::abs(sol.psi_infinity - oracles::z2_psi(lambda, p)) <= 2e-3);
    CHECK(sol.mmse_limit >= 0.0);
    CHECK(sol.mmse_limit <= sol.kappa_second_moment);
  }
  SUBCASE("exact finite rank: zero Cauchy gap beyond the true rank") {
    const KernelSpec kernel = KernelSpec::finite_rank({0.8, 0.4}, 1.2);
    const QASolution sol = qa_mi_mmse(kernel, {1, 2, 3},
                                      QaSolverOptions{0.5, 2e-3, 150},
                                      qa_cfg(10, 20000, 4));
    REQUIRE(sol.per_rank.size() == 3);
    CHECK(sol.cauchy_gap == 0.0);  // rank-3 request truncates to the true rank 2
    CHECK(sol.extrapolation_reliable);
  }
  SUBCASE("sup psi is nondecreasing in the rank") {
    const QASolution sol = qa_mi_mmse(KernelSpec::gaussian_rbf(1.0, 2.0),
                                      {1, 2, 3, 4}, QaSolverOptions{0.5, 2e-3, 150},
                                      qa_cfg(11, 15000, 4));
    for (std::size_t i = 1; i < sol.per_rank.size(); ++i)
      CHECK(sol.per_rank[i].psi >= sol.per_rank[i - 1].psi - 1e-12);
  }
}

TEST_CASE("qa instances") {
  const KernelSpec kernel = KernelSpec::rank_one(2.0);
  SUBCASE("noise-free reconstruction and noise variance") {
    Rng rng(12);
    std::vector<double> x;
    for (int i = 0; i < 6; ++i) x.push_back(kernel.sample(rng));
    std::vector<int> pi = {2, 0, 1, 4, 3, 5};
    const QaInstance inst =
        make_qa_instance(kernel, x, pi, std::vector<double>(15, 0.0));
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j)
        CHECK(inst.y[inst.pair_index(i, j)] ==
              doctest::Approx(kernel.eval(x[pi[i]], x[pi[j]])).epsilon(1e-14));
    const int n = 120;
    const QaInstance big = generate_qa(n, kernel, 13);
    MeanAccumulator var;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double resid =
            big.y[big.pair_index(i, j)] -
            kernel.eval(big.x[big.pi_star[i]], big.x[big.pi_star[j]]);
        var.add(resid * resid / n);
      }
    CHECK(std::abs(var.mean() - 1.0) <= 0.05);
  }
  SUBCASE("relabeling samples with the compensating permutation is invisible") {
    Rng rng(14);
    const int n = 6;
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back(kernel.sample(rng));
    std::vector<int> pi = {3, 1, 5, 0, 2, 4};
    std::vector<double> z(n * (n - 1) / 2);
    for (double& v : z) v = rng.normal();
    const QaInstance base = make_qa_instance(kernel, x, pi, z);
    // relabel x by sigma and compose pi* with sigma^{-1}
    const std::vector<int> sigma = {1, 4, 0, 5, 3, 2};
    std::vector<double> x2(n);
    std::vector<int> sigma_inv(n);
    for (int a = 0; a < n; ++a) {
      x2[a] = x[sigma[a]];
      sigma_inv[sigma[a]] = a;
    }
    std::vector<int> pi2(n);
    for (int i = 0; i < n; ++i) pi2[i] = sigma_inv[pi[i]];
    const QaInstance relabeled = make_qa_instance(kernel, x2, pi2, z);
    for (std::size_t p = 0; p < base.y.size(); ++p)
      CHECK(base.y[p] == doctest::Approx(relabeled.y[p]).epsilon(1e-14));
    CHECK(std::abs(qa_exact_free_energy(base).free_energy -
                   qa_exact_free_energy(relabeled).free_energy) <= 1e-10);
  }
}

TEST_CASE("qa exact free energy") {
  SUBCASE("single element") {
    const KernelSpec kernel = KernelSpec::rank_one(1.0);
    const QaInstance inst =
        make_qa_instance(kernel, {1.0}, {0}, std::vector<double>{});
    CHECK(qa_exact_free_energy(inst).free_energy == 0.0);
  }
  SUBCASE("budget guard") {
    const QaInstance inst = generate_qa(10, KernelSpec::rank_one(1.0), 15);
    CHECK_THROWS_AS(qa_exact_free_energy(inst), Error);
  }
  SUBCASE("Nishimori gap vanishes exactly per instance") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const QaInstance inst =
          generate_qa(6, KernelSpec::rank_one(2.0), 100 + seed);
      CHECK(qa_exact_free_energy(inst).nishimori_gap <= 1e-10);
    }
  }
  SUBCASE("disorder mean approaches the replica supremum") {
    // kernel scale 2 corresponds to effective SNR 4 in the Z2 comparator
    const double lambda = 4.0;
    const KernelSpec kernel = KernelSpec::rank_one(2.0);
    MeanAccumulator fe;
    for (std::uint64_t d = 0; d < 20; ++d)
      fe.add(qa_exact_free_energy(generate_qa(8, kernel, 300 + d)).free_energy);
    const double sup_psi =
        oracles::z2_psi(lambda, oracles::z2_fixed_point(lambda));
    CHECK(std::abs(fe.mean() - sup_psi) <= 0.6 / std::sqrt(8.0));
  }
}
