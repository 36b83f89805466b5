#include "gridbound/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

#include "gridbound/error.hpp"

namespace gridbound::qp {

int Problem::add_variable(std::string name, double lower, double upper, double linear, double quadratic) {
  if (quadratic < 0.0) throw InputError("qp: negative quadratic coefficient on " + name);
  lower_.push_back(lower);
  upper_.push_back(upper);
  linear_.push_back(linear);
  quadratic_.push_back(quadratic);
  var_names_.push_back(std::move(name));
  return variable_count() - 1;
}

int Problem::add_row(std::string name, double lower, double upper, std::vector<Entry> entries) {
  for (const auto& e : entries) {
    if (e.column < 0 || e.column >= variable_count()) throw InputError("qp: row " + name + " references unknown column");
  }
  row_lower_.push_back(lower);
  row_upper_.push_back(upper);
  row_names_.push_back(std::move(name));
  rows_.push_back(std::move(entries));
  return row_count() - 1;
}

void Problem::set_bounds(int column, double lower, double upper) {
  lower_[column] = lower;
  upper_[column] = upper;
}

void Problem::set_row_bounds(int row, double lower, double upper) {
  row_lower_[row] = lower;
  row_upper_[row] = upper;
}

double Problem::objective(std::span<const double> x) const {
  double f = constant_;
  for (int j = 0; j < variable_count(); ++j) f += (0.5 * quadratic_[j] * x[j] + linear_[j]) * x[j];
  return f;
}

double Problem::row_activity(int r, std::span<const double> x) const {
  double a = 0.0;
  for (const auto& e : rows_[r]) a += e.value * x[e.column];
  return a;
}

const char* to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;

bool is_fixed(double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-13 * (1.0 + std::abs(lo)); }

// Internal standard form:  E x = be,  G x <= h,  x_L >= l,  x_U <= u.
struct StandardForm {
  int n = 0;
  SpMat E;  // m_e x n
  SpMat G;  // m_i x n
  Vec be, h, q, c;
  std::vector<int> lower_idx, upper_idx;
  Vec l, u;
  // Origin of each internal row so multipliers can be mapped back.
  struct Origin {
    enum class Kind { Row, FixedVariable } kind;
    int index;
    double sign;  // G rows: +1 for the upper side, -1 for the lower side
  };
  std::vector<Origin> eq_origin, ineq_origin;
  bool trivially_infeasible = false;
};

StandardForm standardize(const Problem& p) {
  StandardForm sf;
  sf.n = p.variable_count();
  const int n = sf.n;
  std::vector<Eigen::Triplet<double>> te, tg;
  std::vector<double> be, h;

  for (int r = 0; r < p.row_count(); ++r) {
    const double lo = p.row_lower()[r];
    const double hi = p.row_upper()[r];
    if (lo > hi + 1e-12 * (1.0 + std::abs(hi))) sf.trivially_infeasible = true;
    if (is_fixed(lo, hi)) {
      const int k = static_cast<int>(be.size());
      for (const auto& e : p.row(r)) te.emplace_back(k, e.column, e.value);
      be.push_back(0.5 * (lo + hi));
      sf.eq_origin.push_back({StandardForm::Origin::Kind::Row, r, 1.0});
      continue;
    }
    if (std::isfinite(hi)) {
      const int k = static_cast<int>(h.size());
      for (const auto& e : p.row(r)) tg.emplace_back(k, e.column, e.value);
      h.push_back(hi);
      sf.ineq_origin.push_back({StandardForm::Origin::Kind::Row, r, 1.0});
    }
    if (std::isfinite(lo)) {
      const int k = static_cast<int>(h.size());
      for (const auto& e : p.row(r)) tg.emplace_back(k, e.column, -e.value);
      h.push_back(-lo);
      sf.ineq_origin.push_back({StandardForm::Origin::Kind::Row, r, -1.0});
    }
  }

  std::vector<double> l, u;
  for (int j = 0; j < n; ++j) {
    const double lo = p.lower()[j];
    const double hi = p.upper()[j];
    if (lo > hi + 1e-12 * (1.0 + std::abs(hi))) sf.trivially_infeasible = true;
    if (is_fixed(lo, hi)) {
      const int k = static_cast<int>(be.size());
      te.emplace_back(k, j, 1.0);
      be.push_back(0.5 * (lo + hi));
      sf.eq_origin.push_back({StandardForm::Origin::Kind::FixedVariable, j, 1.0});
      continue;
    }
    if (std::isfinite(lo)) {
      sf.lower_idx.push_back(j);
      l.push_back(lo);
    }
    if (std::isfinite(hi)) {
      sf.upper_idx.push_back(j);
      u.push_back(hi);
    }
  }

  sf.E.resize(static_cast<int>(be.size()), n);
  sf.E.setFromTriplets(te.begin(), te.end());
  sf.G.resize(static_cast<int>(h.size()), n);
  sf.G.setFromTriplets(tg.begin(), tg.end());
  sf.be = Eigen::Map<const Vec>(be.data(), static_cast<Eigen::Index>(be.size()));
  sf.h = Eigen::Map<const Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
  sf.l = Eigen::Map<const Vec>(l.data(), static_cast<Eigen::Index>(l.size()));
  sf.u = Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
  sf.q = Eigen::Map<const Vec>(p.quadratic().data(), n);
  sf.c = Eigen::Map<const Vec>(p.linear().data(), n);
  return sf;
}

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Largest alpha in (0, 1] keeping v + alpha * dv >= 0.
double max_step(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (dv[k] < 0.0) alpha = std::min(alpha, -v[k] / dv[k]);
  }
  return alpha;
}

class KktSystem {
 public:
  KktSystem(const StandardForm& sf, double primal_reg, double dual_reg)
      : sf_(sf), n_(sf.n), me_(static_cast<int>(sf.E.rows())), mi_(static_cast<int>(sf.G.rows())),
        primal_reg_(primal_reg), dual_reg_(dual_reg) {
    const int dim = n_ + me_ + mi_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(dim + 2 * (sf.E.nonZeros() + sf.G.nonZeros()));
    for (int k = 0; k < dim; ++k) t.emplace_back(k, k, 0.0);
    for (int j = 0; j < n_; ++j) {
      for (SpMat::InnerIterator it(sf.E, j); it; ++it) t.emplace_back(n_ + it.row(), j, it.value());
      for (SpMat::InnerIterator it(sf.G, j); it; ++it) t.emplace_back(n_ + me_ + it.row(), j, it.value());
    }
    matrix_.resize(dim, dim);
    matrix_.setFromTriplets(t.begin(), t.end());
    matrix_.makeCompressed();
    diagonal_.resize(dim);
    for (int k = 0; k < dim; ++k) diagonal_[k] = &matrix_.coeffRef(k, k);
    base_diag_.resize(dim);
    ldlt_.analyzePattern(matrix_);
  }

  // h_diag: x-block diagonal (Q + bound barrier terms); ineq_diag: S/Z.
  // A zero pivot is retried with stronger regularization; the refinement in
  // solve() works against the unregularized matrix either way.
  bool factorize(const Vec& h_diag, const Vec& ineq_diag) {
    for (int j = 0; j < n_; ++j) base_diag_[j] = h_diag[j];
    for (int k = 0; k < me_; ++k) base_diag_[n_ + k] = 0.0;
    for (int k = 0; k < mi_; ++k) base_diag_[n_ + me_ + k] = -ineq_diag[k];
    for (double boost = 1.0; boost <= 1e6; boost *= 100.0) {
      for (int j = 0; j < n_; ++j) *diagonal_[j] = base_diag_[j] + boost * primal_reg_;
      for (int k = n_; k < n_ + me_ + mi_; ++k) *diagonal_[k] = base_diag_[k] - boost * dual_reg_;
      ldlt_.factorize(matrix_);
      if (ldlt_.info() == Eigen::Success) {
        refinement_passes_ = boost > 1.0 ? 20 : 3;
        return true;
      }
    }
    return false;
  }

  // Solves the unregularized system with iterative refinement.
  Vec solve(const Vec& rhs) const {
    Vec sol = ldlt_.solve(rhs);
    for (int pass = 0; pass < refinement_passes_; ++pass) {
      const Vec residual = rhs - apply(sol);
      if (inf_norm(residual) <= 1e-14 * (1.0 + inf_norm(rhs))) break;
      sol += ldlt_.solve(residual);
    }
    return sol;
  }

 private:
  Vec apply(const Vec& v) const {
    // Only the lower triangle plus diagonal is meaningful for the
    // off-diagonal blocks; rebuild the symmetric product explicitly.
    Vec out = Vec::Zero(v.size());
    const auto vx = v.head(n_);
    const auto vy = v.segment(n_, me_);
    const auto vz = v.tail(mi_);
    for (int k = 0; k < n_ + me_ + mi_; ++k) out[k] = base_diag_[k] * v[k];
    out.head(n_) += sf_.E.transpose() * vy + sf_.G.transpose() * vz;
    out.segment(n_, me_) += sf_.E * vx;
    out.tail(mi_) += sf_.G * vx;
    return out;
  }

  const StandardForm& sf_;
  int n_, me_, mi_;
  double primal_reg_, dual_reg_;
  SpMat matrix_;
  std::vector<double*> diagonal_;
  Vec base_diag_;
  int refinement_passes_ = 3;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};


struct PolishState {
  Vec& x;
  Vec& y;
  Vec& s;
  Vec& z;
  Vec& wl;
  Vec& zl;
  Vec& wu;
  Vec& zu;
};

// Treats every constraint whose multiplier exceeds its slack as an equality,
// drops the others and solves that KKT system directly. The result replaces
// the interior point only if it is primal and dual feasible.
bool polish(const StandardForm& sf, PolishState st, double rhs_scale, double cost_scale) {
  const int n = sf.n;
  const int me = static_cast<int>(sf.E.rows());
  const int mi = static_cast<int>(sf.G.rows());
  const int nl = static_cast<int>(sf.lower_idx.size());
  const int nu = static_cast<int>(sf.upper_idx.size());

  std::vector<int> ga, la, ua;
  std::vector<char> pinned(n, 0);
  for (int k = 0; k < mi; ++k) {
    if (st.z[k] > st.s[k]) ga.push_back(k);
  }
  for (int k = 0; k < nl; ++k) {
    if (st.zl[k] > st.wl[k]) {
      la.push_back(k);
      pinned[sf.lower_idx[k]] = 1;
    }
  }
  for (int k = 0; k < nu; ++k) {
    if (st.zu[k] > st.wu[k] && !pinned[sf.upper_idx[k]]) ua.push_back(k);
  }
  const int na = static_cast<int>(ga.size());
  const int m = me + na + static_cast<int>(la.size() + ua.size());
  const int dim = n + m;

  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < n; ++j) {
    for (SpMat::InnerIterator it(sf.E, j); it; ++it) t.emplace_back(n + it.row(), j, it.value());
  }
  SpMat ga_rows(na, n);
  {
    std::vector<Eigen::Triplet<double>> tg;
    std::vector<int> slot(mi, -1);
    for (int a = 0; a < na; ++a) slot[ga[a]] = a;
    for (int j = 0; j < n; ++j) {
      for (SpMat::InnerIterator it(sf.G, j); it; ++it) {
        if (slot[it.row()] >= 0) tg.emplace_back(slot[it.row()], j, it.value());
      }
    }
    ga_rows.setFromTriplets(tg.begin(), tg.end());
  }
  for (int j = 0; j < n; ++j) {
    for (SpMat::InnerIterator it(ga_rows, j); it; ++it) t.emplace_back(n + me + it.row(), j, it.value());
  }
  Vec d(m), mult(m);
  d.head(me) = sf.be;
  mult.head(me) = st.y;
  for (int a = 0; a < na; ++a) {
    d[me + a] = sf.h[ga[a]];
    mult[me + a] = st.z[ga[a]];
  }
  std::vector<int> bound_var;
  int row = me + na;
  for (int k : la) {
    t.emplace_back(n + row, sf.lower_idx[k], 1.0);
    bound_var.push_back(sf.lower_idx[k]);
    d[row] = sf.l[k];
    mult[row++] = -st.zl[k];
  }
  for (int k : ua) {
    t.emplace_back(n + row, sf.upper_idx[k], 1.0);
    bound_var.push_back(sf.upper_idx[k]);
    d[row] = sf.u[k];
    mult[row++] = st.zu[k];
  }

  // C x and C^T v over the stacked active rows.
  auto c_times = [&](const Vec& v) {
    Vec out(m);
    out.head(me) = sf.E * v;
    out.segment(me, na) = ga_rows * v;
    for (std::size_t k = 0; k < bound_var.size(); ++k) out[me + na + static_cast<int>(k)] = v[bound_var[k]];
    return out;
  };
  auto ct_times = [&](const Vec& v) {
    Vec out = sf.E.transpose() * v.head(me) + ga_rows.transpose() * v.segment(me, na);
    for (std::size_t k = 0; k < bound_var.size(); ++k) out[bound_var[k]] += v[me + na + static_cast<int>(k)];
    return out;
  };

  const double reg = 1e-9;
  for (int j = 0; j < n; ++j) t.emplace_back(j, j, sf.q[j] + reg);
  for (int k = 0; k < m; ++k) t.emplace_back(n + k, n + k, -reg);
  SpMat K(dim, dim);
  K.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.analyzePattern(K);
  for (double boost = 1.0; boost <= 1e6; boost *= 100.0) {
    if (boost > 1.0) {
      for (int k = 0; k < dim; ++k) K.coeffRef(k, k) += (k < n ? 1.0 : -1.0) * (boost - boost / 100.0) * reg;
    }
    ldlt.factorize(K);
    if (ldlt.info() == Eigen::Success) break;
  }
  if (ldlt.info() != Eigen::Success) return false;

  Vec x = st.x;
  Vec v = mult;
  auto residual = [&]() {
    Vec r(dim);
    r.head(n) = -(sf.q.cwiseProduct(x) + sf.c + ct_times(v));
    r.tail(m) = d - c_times(x);
    return r;
  };
  for (int pass = 0; pass < 50; ++pass) {
    const Vec r = residual();
    if (inf_norm(r.head(n)) <= 1e-13 * cost_scale && inf_norm(r.tail(m)) <= 1e-13 * rhs_scale) break;
    const Vec delta = ldlt.solve(r);
    x += delta.head(n);
    v += delta.tail(m);
  }
  const Vec r = residual();
  if (!r.allFinite()) return false;
  if (inf_norm(r.head(n)) > 1e-9 * cost_scale || inf_norm(r.tail(m)) > 1e-9 * rhs_scale) return false;

  const double ptol = 1e-9 * rhs_scale;
  const double dtol = 1e-9 * cost_scale;
  const Vec slack = sf.h - sf.G * x;
  if (slack.size() && slack.minCoeff() < -ptol) return false;
  for (int k = 0; k < nl; ++k) {
    if (x[sf.lower_idx[k]] < sf.l[k] - ptol) return false;
  }
  for (int k = 0; k < nu; ++k) {
    if (x[sf.upper_idx[k]] > sf.u[k] + ptol) return false;
  }
  for (int a = 0; a < na; ++a) {
    if (v[me + a] < -dtol) return false;
  }
  for (std::size_t k = 0; k < la.size(); ++k) {
    if (v[me + na + static_cast<int>(k)] > dtol) return false;
  }
  for (std::size_t k = 0; k < ua.size(); ++k) {
    if (v[me + na + static_cast<int>(la.size() + k)] < -dtol) return false;
  }

  st.x = x;
  st.y = v.head(me);
  st.z.setZero();
  for (int a = 0; a < na; ++a) st.z[ga[a]] = std::max(v[me + a], 0.0);
  st.s = slack.cwiseMax(0.0);
  for (int a = 0; a < na; ++a) st.s[ga[a]] = 0.0;
  st.zl.setZero();
  st.zu.setZero();
  for (std::size_t k = 0; k < la.size(); ++k) {
    st.zl[la[k]] = std::max(-v[me + na + static_cast<int>(k)], 0.0);
    st.x[sf.lower_idx[la[k]]] = sf.l[la[k]];
  }
  for (std::size_t k = 0; k < ua.size(); ++k) {
    st.zu[ua[k]] = std::max(v[me + na + static_cast<int>(la.size() + k)], 0.0);
    st.x[sf.upper_idx[ua[k]]] = sf.u[ua[k]];
  }
  for (int k = 0; k < nl; ++k) st.wl[k] = std::max(st.x[sf.lower_idx[k]] - sf.l[k], 0.0);
  for (int k = 0; k < nu; ++k) st.wu[k] = std::max(sf.u[k] - st.x[sf.upper_idx[k]], 0.0);
  return true;
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  const StandardForm sf = standardize(problem);
  const int n = sf.n;
  const int me = static_cast<int>(sf.E.rows());
  const int mi = static_cast<int>(sf.G.rows());
  const int nl = static_cast<int>(sf.lower_idx.size());
  const int nu = static_cast<int>(sf.upper_idx.size());

  Solution sol;
  sol.x.assign(n, 0.0);
  sol.row_dual.assign(problem.row_count(), 0.0);
  sol.row_dual_lower.assign(problem.row_count(), 0.0);
  sol.row_dual_upper.assign(problem.row_count(), 0.0);
  sol.bound_dual_lower.assign(n, 0.0);
  sol.bound_dual_upper.assign(n, 0.0);
  if (sf.trivially_infeasible) {
    sol.status = Status::Infeasible;
    return sol;
  }

  const double rhs_scale =
      1.0 + std::max({inf_norm(sf.be), inf_norm(sf.h), inf_norm(sf.l), inf_norm(sf.u)});
  const double cost_scale = 1.0 + inf_norm(sf.c);
  const int complementarity_count = mi + nl + nu;

  KktSystem kkt(sf, 1e-9, 1e-9);

  // Mehrotra-style start: least-squares primal and dual estimates from one
  // factorization, then shifted into the positive orthant.
  Vec x(n), y(me), s(mi), z(mi), wl(nl), wu(nu), zl(nl), zu(nu);
  {
    Vec h_diag = sf.q;
    for (int k = 0; k < nl; ++k) h_diag[sf.lower_idx[k]] += 1.0;
    for (int k = 0; k < nu; ++k) h_diag[sf.upper_idx[k]] += 1.0;
    for (int j = 0; j < n; ++j) h_diag[j] = std::max(h_diag[j], 1e-6);
    if (!kkt.factorize(h_diag, Vec::Ones(mi))) {
      sol.status = Status::IterationLimit;
      return sol;
    }
    Vec rhs = Vec::Zero(n + me + mi);
    for (int k = 0; k < nl; ++k) rhs[sf.lower_idx[k]] += sf.l[k];
    for (int k = 0; k < nu; ++k) rhs[sf.upper_idx[k]] += sf.u[k];
    rhs.segment(n, me) = sf.be;
    rhs.tail(mi) = sf.h;
    Vec primal = kkt.solve(rhs);
    x = primal.head(n);
    s = sf.h - sf.G * x;
    for (int k = 0; k < nl; ++k) wl[k] = x[sf.lower_idx[k]] - sf.l[k];
    for (int k = 0; k < nu; ++k) wu[k] = sf.u[k] - x[sf.upper_idx[k]];

    rhs.setZero();
    rhs.head(n) = -sf.c;
    Vec dual = kkt.solve(rhs);
    y = dual.segment(n, me);
    z = dual.tail(mi);
    for (int k = 0; k < nl; ++k) zl[k] = -dual[sf.lower_idx[k]];
    for (int k = 0; k < nu; ++k) zu[k] = dual[sf.upper_idx[k]];

    auto min_of = [](const Vec& a, const Vec& b, const Vec& c) {
      double m = kInf;
      if (a.size()) m = std::min(m, a.minCoeff());
      if (b.size()) m = std::min(m, b.minCoeff());
      if (c.size()) m = std::min(m, c.minCoeff());
      return m;
    };
    if (complementarity_count) {
      const double dp = std::max(-1.5 * min_of(s, wl, wu), 0.0);
      const double dd = std::max(-1.5 * min_of(z, zl, zu), 0.0);
      s.array() += dp;
      wl.array() += dp;
      wu.array() += dp;
      z.array() += dd;
      zl.array() += dd;
      zu.array() += dd;
      const double sz = s.dot(z) + wl.dot(zl) + wu.dot(zu);
      const double sum_s = s.sum() + wl.sum() + wu.sum();
      const double sum_z = z.sum() + zl.sum() + zu.sum();
      double dp2 = sum_z > 0.0 ? 0.5 * sz / sum_z : 1.0;
      double dd2 = sum_s > 0.0 ? 0.5 * sz / sum_s : 1.0;
      if (!(sz > 0.0)) dp2 = dd2 = 1.0;
      s.array() += dp2;
      wl.array() += dp2;
      wu.array() += dp2;
      z.array() += dd2;
      zl.array() += dd2;
      zu.array() += dd2;
    }
  }

  Vec rd(n), re(me), ri(mi), rl(nl), ru(nu);
  auto compute_residuals = [&]() {
    rd = sf.q.cwiseProduct(x) + sf.c + sf.E.transpose() * y + sf.G.transpose() * z;
    for (int k = 0; k < nl; ++k) rd[sf.lower_idx[k]] -= zl[k];
    for (int k = 0; k < nu; ++k) rd[sf.upper_idx[k]] += zu[k];
    re = sf.E * x - sf.be;
    ri = sf.G * x + s - sf.h;
    for (int k = 0; k < nl; ++k) rl[k] = x[sf.lower_idx[k]] - wl[k] - sf.l[k];
    for (int k = 0; k < nu; ++k) ru[k] = x[sf.upper_idx[k]] + wu[k] - sf.u[k];
  };
  auto objectives = [&](double& pobj, double& dobj) {
    const double quad = x.dot(sf.q.cwiseProduct(x));
    pobj = 0.5 * quad + sf.c.dot(x);
    dobj = -0.5 * quad - sf.be.dot(y) - sf.h.dot(z) + sf.l.dot(zl) - sf.u.dot(zu);
  };

  Status status = Status::IterationLimit;
  double pres = 0.0, dres = 0.0, gap = 0.0;
  double best_merit = kInf;
  int stall = 0;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    compute_residuals();
    pres = std::max({inf_norm(re), inf_norm(ri), inf_norm(rl), inf_norm(ru)}) / rhs_scale;
    dres = inf_norm(rd) / cost_scale;
    double pobj = 0.0, dobj = 0.0;
    objectives(pobj, dobj);
    gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    const double mu = complementarity_count
                          ? (s.dot(z) + wl.dot(zl) + wu.dot(zu)) / complementarity_count
                          : 0.0;
    if (options.verbose) {
      spdlog::debug("ipm {:3d} pres {:.3e} dres {:.3e} gap {:.3e} mu {:.3e}", iter, pres, dres, gap, mu);
    }
    if (pres <= options.tolerance && dres <= options.tolerance && gap <= options.tolerance) {
      status = Status::Optimal;
      break;
    }
    const double merit = std::max({pres, dres, gap});
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      stall = 0;
    } else if (++stall >= 5) {
      break;
    }
    const double dual_size = std::max({inf_norm(y), inf_norm(z), inf_norm(zl), inf_norm(zu)});
    if (dual_size > 1e13 * cost_scale * rhs_scale && pres > 1e-6) {
      status = Status::Infeasible;
      break;
    }
    if (inf_norm(x) > 1e10 * rhs_scale && dres > 1e-6) {
      status = Status::Unbounded;
      break;
    }

    Vec h_diag = sf.q;
    for (int k = 0; k < nl; ++k) h_diag[sf.lower_idx[k]] += zl[k] / wl[k];
    for (int k = 0; k < nu; ++k) h_diag[sf.upper_idx[k]] += zu[k] / wu[k];
    const Vec ineq_diag = s.cwiseQuotient(z);
    if (!kkt.factorize(h_diag, ineq_diag)) break;

    Vec dx, dy, dz, ds, dwl(nl), dzl(nl), dwu(nu), dzu(nu);
    auto newton = [&](const Vec& r_sz, const Vec& r_lz, const Vec& r_uz) {
      Vec rhs(n + me + mi);
      Vec top = -rd;
      for (int k = 0; k < nl; ++k) top[sf.lower_idx[k]] -= (r_lz[k] + zl[k] * rl[k]) / wl[k];
      for (int k = 0; k < nu; ++k) top[sf.upper_idx[k]] -= (-r_uz[k] + zu[k] * ru[k]) / wu[k];
      rhs.head(n) = top;
      rhs.segment(n, me) = -re;
      rhs.tail(mi) = -ri + r_sz.cwiseQuotient(z);
      const Vec delta = kkt.solve(rhs);
      dx = delta.head(n);
      dy = delta.segment(n, me);
      dz = delta.tail(mi);
      ds = -ri - sf.G * dx;
      for (int k = 0; k < nl; ++k) {
        dwl[k] = dx[sf.lower_idx[k]] + rl[k];
        dzl[k] = (-r_lz[k] - zl[k] * dwl[k]) / wl[k];
      }
      for (int k = 0; k < nu; ++k) {
        dwu[k] = -ru[k] - dx[sf.upper_idx[k]];
        dzu[k] = (-r_uz[k] - zu[k] * dwu[k]) / wu[k];
      }
    };
    auto step_length = [&]() {
      return std::min({max_step(s, ds), max_step(z, dz), max_step(wl, dwl), max_step(zl, dzl),
                       max_step(wu, dwu), max_step(zu, dzu)});
    };

    // Predictor.
    Vec r_sz = s.cwiseProduct(z);
    Vec r_lz = wl.cwiseProduct(zl);
    Vec r_uz = wu.cwiseProduct(zu);
    newton(r_sz, r_lz, r_uz);
    const double alpha_aff = step_length();
    double mu_aff = 0.0;
    if (complementarity_count) {
      mu_aff = ((s + alpha_aff * ds).dot(z + alpha_aff * dz) + (wl + alpha_aff * dwl).dot(zl + alpha_aff * dzl) +
                (wu + alpha_aff * dwu).dot(zu + alpha_aff * dzu)) /
               complementarity_count;
    }
    const double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

    // Corrector.
    r_sz = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vec::Constant(mi, sigma * mu);
    r_lz = wl.cwiseProduct(zl) + dwl.cwiseProduct(dzl) - Vec::Constant(nl, sigma * mu);
    r_uz = wu.cwiseProduct(zu) + dwu.cwiseProduct(dzu) - Vec::Constant(nu, sigma * mu);
    newton(r_sz, r_lz, r_uz);
    const double alpha = std::min(1.0, 0.995 * step_length());

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    wl += alpha * dwl;
    zl += alpha * dzl;
    wu += alpha * dwu;
    zu += alpha * dzu;
  }

  if (status == Status::IterationLimit) {
    // Accept a slightly looser point when progress has stalled numerically.
    const double dual_size = std::max({inf_norm(y), inf_norm(z), inf_norm(zl), inf_norm(zu)});
    if (pres <= 1e-8 && dres <= 1e-8 && gap <= 1e-8) status = Status::Optimal;
    else if (inf_norm(x) > 1e8 * rhs_scale && inf_norm(x) > dual_size) status = Status::Unbounded;
    else if (pres > 1e-6) status = Status::Infeasible;
    else if (dres > 1e-6) status = Status::Unbounded;
  }

  if (status == Status::Optimal && options.polish && complementarity_count &&
      polish(sf, {x, y, s, z, wl, zl, wu, zu}, rhs_scale, cost_scale)) {
    compute_residuals();
    pres = std::max({inf_norm(re), inf_norm(ri), inf_norm(rl), inf_norm(ru)}) / rhs_scale;
    dres = inf_norm(rd) / cost_scale;
    double pobj = 0.0, dobj = 0.0;
    objectives(pobj, dobj);
    gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
  }

  sol.status = status;
  sol.iterations = iter;
  sol.primal_residual = pres;
  sol.dual_residual = dres;
  sol.relative_gap = gap;
  for (int j = 0; j < n; ++j) sol.x[j] = x[j];
  sol.objective = problem.objective(sol.x);

  for (int k = 0; k < me; ++k) {
    const auto& o = sf.eq_origin[k];
    if (o.kind == StandardForm::Origin::Kind::Row) {
      sol.row_dual[o.index] = y[k];
      sol.row_dual_upper[o.index] = std::max(y[k], 0.0);
      sol.row_dual_lower[o.index] = std::max(-y[k], 0.0);
    } else {
      sol.bound_dual_upper[o.index] = std::max(y[k], 0.0);
      sol.bound_dual_lower[o.index] = std::max(-y[k], 0.0);
    }
  }
  for (int k = 0; k < mi; ++k) {
    const auto& o = sf.ineq_origin[k];
    if (o.sign > 0) sol.row_dual_upper[o.index] += z[k];
    else sol.row_dual_lower[o.index] += z[k];
    sol.row_dual[o.index] += o.sign * z[k];
  }
  for (int k = 0; k < nl; ++k) sol.bound_dual_lower[sf.lower_idx[k]] = zl[k];
  for (int k = 0; k < nu; ++k) sol.bound_dual_upper[sf.upper_idx[k]] = zu[k];
  return sol;
}

double dual_objective(const Problem& p, const Solution& sol) {
  double d = p.constant();
  for (int j = 0; j < p.variable_count(); ++j) {
    d -= 0.5 * p.quadratic()[j] * sol.x[j] * sol.x[j];
    if (sol.bound_dual_lower[j] != 0.0) d += sol.bound_dual_lower[j] * p.lower()[j];
    if (sol.bound_dual_upper[j] != 0.0) d -= sol.bound_dual_upper[j] * p.upper()[j];
  }
  for (int r = 0; r < p.row_count(); ++r) {
    if (sol.row_dual_lower[r] != 0.0) d += sol.row_dual_lower[r] * p.row_lower()[r];
    if (sol.row_dual_upper[r] != 0.0) d -= sol.row_dual_upper[r] * p.row_upper()[r];
  }
  return d;
}

double complementarity_residual(const Problem& p, const Solution& sol) {
  double worst = 0.0;
  for (int j = 0; j < p.variable_count(); ++j) {
    if (std::isfinite(p.lower()[j])) worst = std::max(worst, std::abs(sol.bound_dual_lower[j] * (sol.x[j] - p.lower()[j])));
    if (std::isfinite(p.upper()[j])) worst = std::max(worst, std::abs(sol.bound_dual_upper[j] * (p.upper()[j] - sol.x[j])));
  }
  for (int r = 0; r < p.row_count(); ++r) {
    const double a = p.row_activity(r, sol.x);
    if (std::isfinite(p.row_lower()[r]) && !is_fixed(p.row_lower()[r], p.row_upper()[r])) {
      worst = std::max(worst, std::abs(sol.row_dual_lower[r] * (a - p.row_lower()[r])));
    }
    if (std::isfinite(p.row_upper()[r]) && !is_fixed(p.row_lower()[r], p.row_upper()[r])) {
      worst = std::max(worst, std::abs(sol.row_dual_upper[r] * (p.row_upper()[r] - a)));
    }
  }
  return worst;
}

double stationarity_residual(const Problem& p, const Solution& sol) {
  std::vector<double> g(p.variable_count());
  for (int j = 0; j < p.variable_count(); ++j) {
    g[j] = p.quadratic()[j] * sol.x[j] + p.linear()[j] - sol.bound_dual_lower[j] + sol.bound_dual_upper[j];
  }
  for (int r = 0; r < p.row_count(); ++r) {
    for (const auto& e : p.row(r)) g[e.column] += sol.row_dual[r] * e.value;
  }
  double worst = 0.0;
  for (double v : g) worst = std::max(worst, std::abs(v));
  return worst;
}

}  // namespace gridbound::qp
