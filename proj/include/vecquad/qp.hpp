#pragma once

#include <string>

#include <Eigen/Dense>

namespace vecquad {

// minimize 1/2 x'Hx + g'x  s.t.  Aeq x = beq,  Ain x >= bin
struct DenseQP
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;
};

enum class QPStatus { Optimal, Infeasible, NumericalFailure };

std::string to_string(QPStatus s);

struct QPResult
{
  QPStatus status = QPStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  // for Infeasible: index of the constraint that could not be satisfied
  // (equalities first, then inequalities) and its violation at exit
  int violated = -1;
  double violation = 0.0;
};

struct QPOptions
{
  double feasibility_tolerance = 1e-11;
  int max_iterations = 2000;
};

// Goldfarb-Idnani dual active-set method; H must be positive definite
QPResult solve_dense_qp(const DenseQP& qp, const QPOptions& opts = {});

}  // namespace vecquad
