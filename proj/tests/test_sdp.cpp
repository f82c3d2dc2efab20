#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "oracle_utils.hpp"
#include "platoon/sdp.hpp"

using namespace platoon;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

sdp::SdpProblem scalar_lyapunov(double a) {
  // Variables (y): block [[a*y, 0.5*y], [0.5*y, y]] >= 0 with y in [1, 10].
  // Feasible iff a >= 0.25 (hand Schur complement).
  sdp::SdpProblem prob;
  prob.p = 1;
  prob.c = VectorXd::Zero(1);
  sdp::LmiBlock block;
  block.F0 = MatrixXd::Zero(2, 2);
  MatrixXd F(2, 2);
  F << a, 0.5, 0.5, 1.0;
  block.F.push_back(F);
  prob.blocks.push_back(block);
  prob.lo = VectorXd::Constant(1, 1.0);
  prob.hi = VectorXd::Constant(1, 10.0);
  return prob;
}

// Scalar reachability block (Ad=0.5, Bd=1, W=1, a=0.3, a1=0.9) over P:
// [[0.3P, 0.5P, 0], [0.5P, P, P], [0, P, 0.9]] >= 0, feasible iff P <= 0.15.
sdp::SdpProblem scalar_reach_maximize_P() {
  sdp::SdpProblem prob;
  prob.p = 1;
  prob.c = VectorXd::Constant(1, -1.0);  // maximize P
  sdp::LmiBlock block;
  block.F0 = MatrixXd::Zero(3, 3);
  block.F0(2, 2) = 0.9;
  MatrixXd F = MatrixXd::Zero(3, 3);
  F(0, 0) = 0.3;
  F(0, 1) = F(1, 0) = 0.5;
  F(1, 1) = 1.0;
  F(1, 2) = F(2, 1) = 1.0;
  block.F.push_back(F);
  prob.blocks.push_back(block);
  prob.lo = VectorXd::Constant(1, 1e-6);
  prob.hi = VectorXd::Constant(1, 10.0);
  return prob;
}

}  // namespace

TEST_CASE("trivial 1x1: minimize z subject to z >= 0, z <= 10") {
  sdp::SdpProblem prob;
  prob.p = 1;
  prob.c = VectorXd::Ones(1);
  sdp::LmiBlock block;
  block.F0 = MatrixXd::Zero(1, 1);
  block.F.push_back(MatrixXd::Ones(1, 1));
  prob.blocks.push_back(block);
  prob.lo = VectorXd::Constant(1, -100.0);
  prob.hi = VectorXd::Constant(1, 10.0);

  const auto sol = sdp::solve(prob, 1e-8);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(std::abs(sol.z(0)) <= 1e-6);
  CHECK(std::abs(sol.objective) <= 1e-6);
  CHECK(sol.min_eig_residual >= -1e-7);
}

TEST_CASE("minimize trace(Y) subject to Y >= I gives Y = I") {
  sdp::SdpProblem prob;
  prob.p = 3;  // y11, y12, y22
  prob.c = VectorXd::Zero(3);
  prob.c(0) = 1.0;
  prob.c(2) = 1.0;
  sdp::LmiBlock block;
  block.F0 = -MatrixXd::Identity(2, 2);
  block.F = sdp::sym_basis(2);
  prob.blocks.push_back(block);

  const auto sol = sdp::solve(prob, 1e-9);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(sol.objective == Catch::Approx(2.0).margin(1e-6));
  const MatrixXd Y = sdp::vec_to_sym(sol.z, 2);
  CHECK((Y - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("scalar Lyapunov feasibility threshold at a = 0.25") {
  // a = 0.3: strictly feasible.
  {
    const auto sol = sdp::solve(scalar_lyapunov(0.3), 1e-8);
    CHECK(sol.status == sdp::SdpStatus::Optimal);
    CHECK(sol.min_eig_residual >= -1e-7);
  }
  // a = 0.2: infeasible with a meaningful certificate.
  {
    const auto sol = sdp::solve(scalar_lyapunov(0.2), 1e-8);
    REQUIRE(sol.status == sdp::SdpStatus::Infeasible);
    CHECK(sol.infeasibility > 1e-4);
  }
  // a = 0.25: feasibility boundary (the set is the whole interval but the
  // block is singular everywhere); must not be declared Infeasible.
  {
    const auto sol = sdp::solve(scalar_lyapunov(0.25), 1e-8);
    CHECK(sol.status != sdp::SdpStatus::Infeasible);
  }
}

TEST_CASE("scalar reachability block: maximize P hits the hand-derived cap") {
  const auto sol = sdp::solve(scalar_reach_maximize_P(), 1e-9);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(sol.z(0) == Catch::Approx(0.15).margin(1e-5));

  // Independent confirmation by bisection on feasibility (LLT with shift).
  auto feasible = [](double P) {
    MatrixXd G(3, 3);
    G << 0.3 * P, 0.5 * P, 0, 0.5 * P, P, P, 0, P, 0.9;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-12;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  CHECK(sol.z(0) == Catch::Approx(lo).margin(1e-5));
}

TEST_CASE("feasibility status is scale invariant") {
  for (double scale : {10.0, 1e6, 1e-6}) {
    auto prob = scalar_reach_maximize_P();
    prob.blocks[0].F0 *= scale;
    for (auto& F : prob.blocks[0].F) F *= scale;
    const auto sol = sdp::solve(prob, 1e-9);
    REQUIRE(sol.status == sdp::SdpStatus::Optimal);
    CHECK(sol.z(0) == Catch::Approx(0.15).margin(1e-4));

    auto infeas = scalar_lyapunov(0.2);
    infeas.blocks[0].F0 *= scale;
    for (auto& F : infeas.blocks[0].F) F *= scale;
    CHECK(sdp::solve(infeas, 1e-8).status == sdp::SdpStatus::Infeasible);
  }
}

TEST_CASE("multi-block problem with coupled variables") {
  // minimize x + y s.t. diag(x - 1, y - 2) >= 0 as two 1x1 blocks plus
  // [[x, 1], [1, y]] >= 0. Optimum at (1, 2): all constraints active or slack.
  sdp::SdpProblem prob;
  prob.p = 2;
  prob.c = VectorXd::Ones(2);
  sdp::LmiBlock b1, b2, b3;
  b1.F0 = -MatrixXd::Ones(1, 1);
  b1.F = {MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1)};
  b2.F0 = -2.0 * MatrixXd::Ones(1, 1);
  b2.F = {MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
  b3.F0 = MatrixXd::Zero(2, 2);
  b3.F0(0, 1) = b3.F0(1, 0) = 1.0;
  MatrixXd Fx = MatrixXd::Zero(2, 2), Fy = MatrixXd::Zero(2, 2);
  Fx(0, 0) = 1.0;
  Fy(1, 1) = 1.0;
  b3.F = {Fx, Fy};
  prob.blocks = {b1, b2, b3};

  const auto sol = sdp::solve(prob, 1e-9);
  REQUIRE(sol.status == sdp::SdpStatus::Optimal);
  CHECK(sol.z(0) == Catch::Approx(1.0).margin(1e-5));
  CHECK(sol.z(1) == Catch::Approx(2.0).margin(1e-5));
  CHECK(sol.min_eig_residual >= -1e-7);
}

TEST_CASE("problem validation rejects malformed input") {
  sdp::SdpProblem prob;
  prob.p = 0;
  CHECK_THROWS_AS(sdp::solve(prob), std::invalid_argument);

  prob.p = 1;
  prob.c = VectorXd::Ones(1);
  CHECK_THROWS_AS(sdp::solve(prob), std::invalid_argument);  // no blocks

  sdp::LmiBlock block;
  block.F0 = MatrixXd::Zero(2, 2);
  block.F0(0, 1) = 1e-3;  // not symmetric
  block.F.push_back(MatrixXd::Identity(2, 2));
  prob.blocks.push_back(block);
  CHECK_THROWS_AS(sdp::solve(prob), std::invalid_argument);

  prob.blocks[0].F0(0, 1) = 0.0;
  prob.lo = VectorXd::Constant(1, 2.0);
  prob.hi = VectorXd::Constant(1, 1.0);  // empty interval
  CHECK_THROWS_AS(sdp::solve(prob), std::invalid_argument);
}

TEST_CASE("symmetric vectorization round trip") {
  const MatrixXd S = oracle::random_spd(4, 12u);
  const VectorXd v = sdp::sym_to_vec(S);
  REQUIRE(v.size() == sdp::sym_dim(4));
  CHECK((sdp::vec_to_sym(v, 4) - S).cwiseAbs().maxCoeff() == 0.0);

  // Basis reconstruction: sum of coefficients times basis elements.
  const auto basis = sdp::sym_basis(4);
  MatrixXd rebuilt = MatrixXd::Zero(4, 4);
  for (int k = 0; k < v.size(); ++k) rebuilt += v(k) * basis[k];
  CHECK((rebuilt - S).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("solutions never report infeasible points as Optimal") {
  // Spot-check the post-hoc invariant across this file's feasible problems.
  for (auto prob : {scalar_lyapunov(0.3), scalar_reach_maximize_P()}) {
    const auto sol = sdp::solve(prob, 1e-8);
    if (sol.status == sdp::SdpStatus::Optimal) {
      CHECK(sdp::min_block_eig(prob, sol.z) >= -1e-7);
    }
  }
}
