#include "hnbr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hnbr/error.hpp"
#include "hnbr/rng.hpp"

namespace hnbr {

namespace {

// Parameter layout: [theta1 (p) | theta2 (p) | intercept1 | intercept2].
struct Problem {
  const Dataset* data = nullptr;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double dispersion_scale = 1.0;
  bool free_intercept1 = false;
  bool free_intercept2 = false;
  bool dispersion_slopes_fixed = false;
  ClampBox clamp{};

  Index p() const { return data->p(); }
  Index dim() const { return 2 * p() + 2; }
};

struct Layout {
  Vector weight;                           // per-coordinate penalty level
  Eigen::Array<bool, Eigen::Dynamic, 1> free;  // coordinates the solver may move
};

Layout make_layout(const Problem& pb) {
  const Index p = pb.p();
  Layout l;
  l.weight = Vector::Zero(pb.dim());
  l.weight.segment(0, p).setConstant(pb.lambda1);
  l.weight.segment(p, p).setConstant(pb.lambda2);
  l.free = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(pb.dim(), true);
  if (pb.dispersion_slopes_fixed) l.free.segment(p, p).setConstant(false);
  l.free[2 * p] = pb.free_intercept1;
  l.free[2 * p + 1] = pb.free_intercept2;
  return l;
}

Vector pack(const Coefficients& c) {
  const Index p = c.p();
  Vector x(2 * p + 2);
  x << c.theta1, c.theta2, c.intercept1, c.intercept2;
  return x;
}

Coefficients unpack(const Vector& x, Index p) {
  Coefficients c;
  c.theta1 = x.segment(0, p);
  c.theta2 = x.segment(p, p);
  c.intercept1 = x[2 * p];
  c.intercept2 = x[2 * p + 1];
  return c;
}

struct Point {
  Vector x;
  double loss = 0.0;
  Vector grad;
};

Point eval_point(const Problem& pb, const Layout& layout, Vector x) {
  const Index p = pb.p();
  const Evaluation ev =
      evaluate(*pb.data, unpack(x, p), EvalOptions{pb.clamp, pb.dispersion_scale}, true);
  Point pt;
  pt.x = std::move(x);
  pt.loss = ev.loss;
  pt.grad.resize(pb.dim());
  pt.grad << ev.grad1, ev.grad2, ev.grad_intercept1, ev.grad_intercept2;
  for (Index j = 0; j < pb.dim(); ++j) {
    if (!layout.free[j]) pt.grad[j] = 0.0;
  }
  return pt;
}

double penalty_of(const Layout& layout, const Vector& x) {
  return (layout.weight.array() * x.array().abs()).sum();
}

double kkt_of(const Layout& layout, const Vector& x, const Vector& g) {
  double worst = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    if (!layout.free[j]) continue;
    const double w = layout.weight[j];
    double v = 0.0;
    if (x[j] == 0.0) {
      v = std::max(0.0, std::abs(g[j]) - w);
    } else {
      v = std::abs(g[j] + w * (x[j] > 0.0 ? 1.0 : -1.0));
    }
    worst = std::max(worst, v);
  }
  return worst;
}

Solution solve(const Problem& pb, const PenaltyConfig& cfg, const Vector& start) {
  const Layout layout = make_layout(pb);
  Vector x0 = start;
  for (Index j = 0; j < x0.size(); ++j) {
    if (!layout.free[j]) x0[j] = 0.0;
  }

  Point cur = eval_point(pb, layout, std::move(x0));
  double obj = cur.loss + penalty_of(layout, cur.x);

  Solution sol;
  if (cfg.record_history) sol.history.push_back(obj);

  double step = cfg.step_init;
  double rel_change = std::numeric_limits<double>::infinity();
  double kkt = kkt_of(layout, cur.x, cur.grad);
  int iter = 0;
  bool stalled = false;

  for (; iter < cfg.max_iter; ++iter) {
    if (rel_change < cfg.tol && kkt < cfg.tol_kkt) break;

    bool accepted = false;
    Point next;
    double next_obj = 0.0;
    while (!accepted) {
      Vector cand = cur.x - step * cur.grad;
      for (Index j = 0; j < cand.size(); ++j) {
        cand[j] = layout.free[j] ? soft_threshold(cand[j], step * layout.weight[j]) : 0.0;
      }
      const Vector d = cand - cur.x;
      if (d.isZero(0.0)) {
        // prox fixed point: theta is stationary for this step size
        stalled = true;
        break;
      }
      next = eval_point(pb, layout, std::move(cand));
      next_obj = next.loss + penalty_of(layout, next.x);
      const double model =
          cur.loss + cur.grad.dot(d) + d.squaredNorm() / (2.0 * step);
      const double slack = 1e-13 * std::max(1.0, std::abs(cur.loss));
      // Monotone up to rounding, so steps keep reducing the KKT residual once the
      // objective has hit its floating-point floor.
      const double round = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(obj));
      if (next.loss <= model + slack && next_obj <= obj + round) {
        accepted = true;
      } else {
        step *= cfg.backtrack_factor;
        if (step < 1e-20) {
          stalled = true;
          break;
        }
      }
    }
    if (!accepted) break;

    // Barzilai-Borwein trial step for the next iteration.
    const Vector s = next.x - cur.x;
    const Vector r = next.grad - cur.grad;
    const double sr = s.dot(r);
    const double bb = sr > 0.0 ? s.squaredNorm() / sr : 2.0 * step;
    step = std::clamp(bb, 1e-10, 1e6);

    rel_change = std::abs(obj - next_obj) / std::max(1.0, std::abs(obj));
    cur = std::move(next);
    obj = next_obj;
    kkt = kkt_of(layout, cur.x, cur.grad);
    if (cfg.record_history) sol.history.push_back(obj);
  }

  if (!std::isfinite(obj)) throw NumericalError("objective became non-finite");

  const Index p = pb.p();
  sol.theta = unpack(cur.x, p);
  sol.objective = obj;
  sol.iterations = iter;
  sol.kkt_residual = kkt;
  sol.converged = kkt < cfg.tol_kkt && (rel_change < cfg.tol || stalled);
  return sol;
}

void add_multistart(const Problem& pb, const PenaltyConfig& cfg, Solution& sol) {
  if (cfg.extra_starts <= 0) return;
  const Layout layout = make_layout(pb);
  PenaltyConfig quiet = cfg;
  quiet.record_history = false;
  double best_gap = 0.0;
  double best_obj_gap = std::numeric_limits<double>::infinity();
  for (int s = 0; s < cfg.extra_starts; ++s) {
    Rng rng = make_stream(cfg.seed, 0x5eedULL + static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> unif(-0.25, 0.25);
    Vector start(pb.dim());
    for (Index j = 0; j < pb.dim(); ++j) start[j] = layout.free[j] ? unif(rng) : 0.0;
    const Solution alt = solve(pb, quiet, start);
    const double obj_gap = alt.objective - sol.objective;
    if (obj_gap < best_obj_gap) {
      best_obj_gap = obj_gap;
      best_gap = (pack(alt.theta) - pack(sol.theta)).lpNorm<Eigen::Infinity>();
    }
  }
  sol.multistart_gap = best_gap;
  sol.multistart_objective_gap = best_obj_gap;
}

struct Standardization {
  Vector center;
  Vector scale;
};

Standardization column_standardization(const Matrix& X, bool center) {
  const Index n = X.rows();
  Standardization st;
  st.center = center ? Vector(X.colwise().mean().transpose()) : Vector::Zero(X.cols());
  st.scale.resize(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    const double ss = (X.col(j).array() - st.center[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n));
    st.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

Coefficients to_standardized(const Coefficients& c, const Standardization& st) {
  Coefficients out = c;
  out.theta1 = c.theta1.cwiseProduct(st.scale);
  out.theta2 = c.theta2.cwiseProduct(st.scale);
  out.intercept1 = c.intercept1 + c.theta1.dot(st.center);
  out.intercept2 = c.intercept2 + c.theta2.dot(st.center);
  return out;
}

Coefficients from_standardized(const Coefficients& c, const Standardization& st) {
  Coefficients out = c;
  out.theta1 = c.theta1.cwiseQuotient(st.scale);
  out.theta2 = c.theta2.cwiseQuotient(st.scale);
  out.intercept1 = c.intercept1 - out.theta1.dot(st.center);
  out.intercept2 = c.intercept2 - out.theta2.dot(st.center);
  return out;
}

Solution run(const Dataset& data, const PenaltyConfig& cfg, Problem pb, const Coefficients& start) {
  if (!cfg.standardize) {
    pb.data = &data;
    Solution sol = solve(pb, cfg, pack(start));
    add_multistart(pb, cfg, sol);
    return sol;
  }
  const Standardization st = column_standardization(data.X, cfg.unpenalized_intercepts);
  Dataset scaled = data;
  scaled.X = (data.X.rowwise() - st.center.transpose()).array().rowwise() /
             st.scale.transpose().array();
  pb.data = &scaled;
  Solution sol = solve(pb, cfg, pack(to_standardized(start, st)));
  add_multistart(pb, cfg, sol);
  // objective, kkt_residual and the trace stay in the standardized coordinates
  sol.theta = from_standardized(sol.theta, st);
  return sol;
}

void check_start(const Dataset& data, const Coefficients& start) {
  start.validate();
  if (start.p() != data.p()) throw ArgumentError("start has the wrong dimension");
}

}  // namespace

std::pair<double, double> PenaltyConfig::weights() const {
  const double l = lambda();
  if (l == 0.0) return {0.0, 0.0};
  return {lambda1 / l, lambda2 / l};
}

void PenaltyConfig::validate() const {
  auto bad = [](const std::string& what) { throw ArgumentError("invalid penalty config: " + what); };
  if (!(std::isfinite(lambda1) && lambda1 >= 0.0)) bad("lambda1 must be finite and >= 0");
  if (!(std::isfinite(lambda2) && lambda2 >= 0.0)) bad("lambda2 must be finite and >= 0");
  if (!(tol > 0.0)) bad("tol must be > 0");
  if (!(tol_kkt > 0.0)) bad("tol_kkt must be > 0");
  if (max_iter < 1) bad("max_iter must be positive");
  if (!(step_init > 0.0)) bad("step_init must be > 0");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) bad("backtrack_factor must be in (0,1)");
  if (extra_starts < 0) bad("extra_starts must be >= 0");
  if (!(clamp.lower <= clamp.upper)) bad("clamp box is empty");
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double penalty(const Coefficients& theta, const PenaltyConfig& cfg) {
  return cfg.lambda1 * theta.theta1.lpNorm<1>() + cfg.lambda2 * theta.theta2.lpNorm<1>();
}

double objective(const Dataset& data, const Coefficients& theta, const PenaltyConfig& cfg) {
  return loss(data, theta, cfg.clamp) + penalty(theta, cfg);
}

Solution fit_from(const Dataset& data, const PenaltyConfig& cfg, const Coefficients& start) {
  data.validate();
  cfg.validate();
  check_start(data, start);
  Problem pb;
  pb.lambda1 = cfg.lambda1;
  pb.lambda2 = cfg.lambda2;
  pb.free_intercept1 = cfg.unpenalized_intercepts;
  pb.free_intercept2 = cfg.unpenalized_intercepts;
  pb.clamp = cfg.clamp;
  return run(data, cfg, pb, start);
}

Solution fit(const Dataset& data, const PenaltyConfig& cfg) {
  return fit_from(data, cfg, Coefficients::zeros(data.p()));
}

Solution fit_rescaled(const Dataset& data, const PenaltyConfig& cfg) {
  data.validate();
  cfg.validate();
  if (!(cfg.lambda1 > 0.0) || !(cfg.lambda2 > 0.0)) {
    throw ArgumentError("rescaled fit needs lambda1 > 0 and lambda2 > 0");
  }
  const double ratio = cfg.lambda1 / cfg.lambda2;
  Problem pb;
  pb.lambda1 = cfg.lambda1;
  pb.lambda2 = cfg.lambda1;
  pb.dispersion_scale = ratio;
  pb.free_intercept1 = cfg.unpenalized_intercepts;
  pb.free_intercept2 = cfg.unpenalized_intercepts;
  pb.clamp = cfg.clamp;
  Solution sol = run(data, cfg, pb, Coefficients::zeros(data.p()));
  // theta3 = (lambda2 / lambda1) theta2  =>  theta2 = (lambda1 / lambda2) theta3
  sol.theta.theta2 *= ratio;
  sol.kkt_residual = kkt_residual(data, sol.theta, cfg);
  return sol;
}

double kkt_residual(const Dataset& data, const Coefficients& theta, const PenaltyConfig& cfg) {
  data.validate();
  check_start(data, theta);
  Problem pb;
  pb.data = &data;
  pb.lambda1 = cfg.lambda1;
  pb.lambda2 = cfg.lambda2;
  pb.free_intercept1 = cfg.unpenalized_intercepts;
  pb.free_intercept2 = cfg.unpenalized_intercepts;
  pb.clamp = cfg.clamp;
  const Layout layout = make_layout(pb);
  const Point pt = eval_point(pb, layout, pack(theta));
  return kkt_of(layout, pt.x, pt.grad);
}

Solution fit_constant_dispersion(const Dataset& data, const PenaltyConfig& cfg) {
  data.validate();
  cfg.validate();
  Problem pb;
  pb.lambda1 = cfg.lambda1;
  pb.lambda2 = 0.0;
  pb.dispersion_slopes_fixed = true;
  pb.free_intercept1 = cfg.unpenalized_intercepts;
  pb.free_intercept2 = true;
  pb.clamp = cfg.clamp;
  return run(data, cfg, pb, Coefficients::zeros(data.p()));
}

}  // namespace hnbr
