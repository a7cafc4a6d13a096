#include "vecquad/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace vecquad {

std::string to_string(QPStatus s)
{
  switch (s) {
    case QPStatus::Optimal: return "optimal";
    case QPStatus::Infeasible: return "infeasible";
    case QPStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDependence = 1e-13;

class ActiveSetSolver
{
public:
  ActiveSetSolver(const DenseQP& qp, const QPOptions& opts) : qp_(qp), opts_(opts), n_(static_cast<int>(qp.g.size()))
  {
    m_eq_ = static_cast<int>(qp.Aeq.rows());
    m_in_ = static_cast<int>(qp.Ain.rows());
  }

  QPResult run()
  {
    QPResult res;
    Eigen::LLT<Eigen::MatrixXd> llt(qp_.H);
    if (llt.info() != Eigen::Success) return res;
    // J = L^-T Q and R are updated by Givens rotations as constraints enter and leave
    j_ = llt.matrixU().solve(Eigen::MatrixXd::Identity(n_, n_));
    r_ = Eigen::MatrixXd::Zero(n_, n_);
    x_ = -llt.solve(qp_.g);

    for (int e = 0; e < m_eq_; ++e) {
      const Eigen::VectorXd np = qp_.Aeq.row(e).transpose();
      const double s = np.dot(x_) - qp_.beq(e);
      Eigen::VectorXd z, r;
      directions(np, z, r);
      const double zn = z.dot(np);
      if (dependent(np, zn)) {
        if (std::abs(s) > 1e-9 * (1.0 + std::abs(qp_.beq(e)))) return infeasible(res, e, std::abs(s));
        continue;
      }
      const double t = -s / zn;
      x_ += t * z;
      if (u_.size() > 0) u_ -= t * r;
      push(e, t, np);
    }

    std::vector<char> is_active(m_in_, 0);
    for (res.iterations = 0; res.iterations < opts_.max_iterations; ++res.iterations) {
      int p = -1;
      double s_min = -opts_.feasibility_tolerance;
      for (int i = 0; i < m_in_; ++i) {
        if (is_active[i]) continue;
        const double s = qp_.Ain.row(i).dot(x_) - qp_.bin(i);
        if (s < s_min) {
          s_min = s;
          p = i;
        }
      }
      if (p < 0) {
        res.status = QPStatus::Optimal;
        res.x = x_;
        res.objective = 0.5 * x_.dot(qp_.H * x_) + qp_.g.dot(x_);
        return res;
      }

      const Eigen::VectorXd np = qp_.Ain.row(p).transpose();
      double s_p = s_min;
      double u_new = 0.0;
      for (;;) {
        if (++res.iterations > opts_.max_iterations) return res;
        Eigen::VectorXd z, r;
        directions(np, z, r);
        const double zn = z.dot(np);

        double t1 = kInf;
        int drop = -1;
        for (int a = 0; a < static_cast<int>(active_.size()); ++a) {
          if (active_[a] < m_eq_ || r(a) <= 0.0) continue;
          const double ratio = u_(a) / r(a);
          if (ratio < t1) {
            t1 = ratio;
            drop = a;
          }
        }
        const double t2 = dependent(np, zn) ? kInf : -s_p / zn;
        const double t = std::min(t1, t2);
        if (t == kInf) return infeasible(res, m_eq_ + p, -s_p);

        if (u_.size() > 0) u_ -= t * r;
        u_new += t;
        if (t2 < kInf) {
          x_ += t * z;
          s_p = np.dot(x_) - qp_.bin(p);
        }
        if (t2 <= t1) {
          push(m_eq_ + p, u_new, np);
          is_active[p] = 1;
          break;
        }
        is_active[active_[drop] - m_eq_] = 0;
        erase(drop);
      }
    }
    return res;
  }

private:
  // z: primal step direction in the null space of the active normals,
  // r: change of the active multipliers per unit step
  void directions(const Eigen::VectorXd& np, Eigen::VectorXd& z, Eigen::VectorXd& r)
  {
    const int k = static_cast<int>(active_.size());
    d_.noalias() = j_.transpose() * np;
    z.noalias() = j_.rightCols(n_ - k) * d_.tail(n_ - k);
    r = r_.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(d_.head(k));
  }

  bool dependent(const Eigen::VectorXd&, double zn) const { return zn <= kDependence * d_.squaredNorm(); }

  // rotate columns a, b of J so that (x, y) -> (hypot, 0)
  void rotate_j(int a, int b, double c, double s)
  {
    for (int i = 0; i < n_; ++i) {
      const double x = j_(i, a), y = j_(i, b);
      j_(i, a) = c * x + s * y;
      j_(i, b) = -s * x + c * y;
    }
  }

  void push(int c, double u, const Eigen::VectorXd& np)
  {
    const int k = static_cast<int>(active_.size());
    Eigen::VectorXd d = j_.transpose() * np;
    for (int j = n_ - 1; j > k; --j) {
      const double h = std::hypot(d(j - 1), d(j));
      if (h == 0.0) continue;
      const double cs = d(j - 1) / h, sn = d(j) / h;
      d(j - 1) = h;
      d(j) = 0.0;
      rotate_j(j - 1, j, cs, sn);
    }
    r_.col(k).head(k + 1) = d.head(k + 1);
    active_.push_back(c);
    u_.conservativeResize(k + 1);
    u_(k) = u;
  }

  void erase(int a)
  {
    const int k = static_cast<int>(active_.size());
    for (int col = a; col < k - 1; ++col) r_.col(col).head(k) = r_.col(col + 1).head(k);
    r_.col(k - 1).setZero();
    // R is upper Hessenberg from column a on; restore it
    for (int j = a; j < k - 1; ++j) {
      const double x = r_(j, j), y = r_(j + 1, j);
      const double h = std::hypot(x, y);
      if (h == 0.0) continue;
      const double cs = x / h, sn = y / h;
      for (int col = j; col < k - 1; ++col) {
        const double p = r_(j, col), q = r_(j + 1, col);
        r_(j, col) = cs * p + sn * q;
        r_(j + 1, col) = -sn * p + cs * q;
      }
      r_(j + 1, j) = 0.0;
      rotate_j(j, j + 1, cs, sn);
    }
    r_.row(k - 1).setZero();
    active_.erase(active_.begin() + a);
    Eigen::VectorXd u(k - 1);
    u << u_.head(a), u_.tail(k - a - 1);
    u_ = u;
  }

  QPResult& infeasible(QPResult& res, int c, double violation)
  {
    res.status = QPStatus::Infeasible;
    res.x = x_;
    res.violated = c;
    res.violation = violation;
    return res;
  }

  const DenseQP& qp_;
  QPOptions opts_;
  int n_;
  int m_eq_ = 0;
  int m_in_ = 0;
  Eigen::MatrixXd j_;
  Eigen::MatrixXd r_;
  Eigen::VectorXd d_;
  Eigen::VectorXd x_;
  std::vector<int> active_;
  Eigen::VectorXd u_;
};

}  // namespace

QPResult solve_dense_qp(const DenseQP& qp, const QPOptions& opts)
{
  return ActiveSetSolver(qp, opts).run();
}

}  // namespace vecquad
