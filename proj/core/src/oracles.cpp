#include "gradtd/oracles.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "gradtd/rng.hpp"

namespace gradtd::oracle {

namespace {

void check_linear_args(double a, double beta, double noise_var) {
  if (!(std::abs(a) < 1.0)) throw std::invalid_argument("analytic oracle requires |a| < 1");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("analytic oracle requires beta in (0, 1)");
  if (!(noise_var > 0.0)) throw std::invalid_argument("analytic oracle requires noise_var > 0");
}

}  // namespace

AnalyticLinearSolution truncated_series_linear_theta(double a, double beta, double noise_var,
                                                     double tail) {
  check_linear_args(a, beta, noise_var);
  const double a2 = a * a;
  const double stationary = noise_var / (1.0 - a2);
  // E[X(t)² | x] = a^{2t} x² + σ²(1 − a^{2t})/(1 − a²)
  double h0 = 0.0;
  double h1 = 0.0;
  double beta_t = 1.0;
  double a2t = 1.0;
  while (beta_t >= tail) {
    const double spread = stationary * (1.0 - a2t);
    h0 += beta_t * spread;
    h1 += beta_t * (a2t + spread);
    beta_t *= beta;
    a2t *= a2;
  }
  AnalyticLinearSolution out;
  out.theta1 = h0;
  out.theta2 = h1 - h0;
  out.pi_second_moment = stationary;
  out.eta = stationary;
  return out;
}

AnalyticLinearSolution analytic_linear_theta(double a, double beta, double noise_var) {
  check_linear_args(a, beta, noise_var);
  const double a2 = a * a;
  AnalyticLinearSolution out;
  out.pi_second_moment = noise_var / (1.0 - a2);
  out.eta = out.pi_second_moment;
  out.theta2 = 1.0 / (1.0 - beta * a2);
  out.theta1 = out.pi_second_moment * (1.0 / (1.0 - beta) - out.theta2);

  const auto series = truncated_series_linear_theta(a, beta, noise_var);
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-10 * std::max(std::abs(x), 1.0); };
  if (!close(out.theta1, series.theta1) || !close(out.theta2, series.theta2)) {
    throw std::logic_error("analytic linear solution disagrees with its truncated series");
  }
  return out;
}

FixedPointResult mc_fixed_point(const Model& model, const FeatureMap& features,
                                const FixedPointOptions& opt) {
  if (opt.n_samples < 100000) throw std::invalid_argument("mc_fixed_point needs at least 1e5 samples");
  if (opt.batches < 2) throw std::invalid_argument("mc_fixed_point needs at least two batches");
  if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(opt.beta > 0.0 && opt.beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  const double decay = opt.beta * opt.lambda;
  if (!(decay < 1.0)) throw std::invalid_argument("mc_fixed_point needs beta*lambda < 1 to truncate the trace");
  if (opt.form == FixedPointForm::standard && !(opt.beta < 1.0)) {
    throw std::invalid_argument("standard fixed point requires beta < 1");
  }

  const bool grad = opt.form == FixedPointForm::gradient;
  const int ell = model.state_dim();
  FixedPointResult out;
  out.basis = grad ? features.varying_indices() : std::vector<int>{};
  if (!grad) {
    for (int j = 0; j < features.dim(); ++j) out.basis.push_back(j);
  }
  const int d = static_cast<int>(out.basis.size());

  long window = 1;
  for (double w = decay; w >= opt.truncation && decay > 0.0; w *= decay) ++window;
  out.window = window;

  struct Sample {
    Matrix g;      // ∇ψ(X(s)) over the basis (ℓ×d), or ψ(X(s)) as d×1
    Matrix A_in;   // ∂X(s)/∂X(s−1)
    Matrix A_out;  // ∂X(s+1)/∂X(s)
    Vector grad_c;
    double c = 0.0;
  };

  RandomStream rng(opt.seed, 0x6f7261636c65ULL);
  Vector x = model.initial_state();
  Vector noise;
  for (long i = 0; i < opt.burn_in; ++i) {
    model.draw_noise(rng, noise);
    x = model.next_state(x, noise);
  }

  Vector psi;
  Matrix gpsi;
  auto observe = [&](const Vector& state, const Matrix& a_in) {
    Sample s;
    model.feature_gradient(features, state, psi, gpsi);
    if (grad) {
      s.g = gpsi(Eigen::all, out.basis);
    } else {
      s.g = psi(out.basis);
    }
    s.A_in = a_in;
    s.A_out = model.sensitivity(state);
    s.grad_c = model.cost_gradient(state);
    s.c = model.cost(state);
    return s;
  };

  // history.front() is X(t); older samples follow.
  std::deque<Sample> history;
  Matrix a_prev = model.sensitivity(x);
  {
    model.draw_noise(rng, noise);
    const Vector nx = model.next_state(x, noise);
    history.push_front(observe(nx, a_prev));
    x = nx;
  }
  // Fill the window so every accumulated ζ(t) is a full truncated sum.
  while (static_cast<long>(history.size()) < window) {
    model.draw_noise(rng, noise);
    const Vector nx = model.next_state(x, noise);
    history.push_front(observe(nx, history.front().A_out));
    x = nx;
  }

  const long per_batch = opt.n_samples / opt.batches;
  std::vector<Matrix> batch_M(opt.batches, Matrix::Zero(d, d));
  std::vector<Vector> batch_b(opt.batches, Vector::Zero(d));

  const Matrix I = Matrix::Identity(ell, ell);
  for (int batch = 0; batch < opt.batches; ++batch) {
    for (long n = 0; n < per_batch; ++n) {
      // ζ(t) as an explicit sum over the stored window.
      Matrix zeta = Matrix::Zero(history.front().g.rows(), history.front().g.cols());
      Matrix product = I;
      double weight = 1.0;
      for (long k = 0; k < window; ++k) {
        const Sample& s = history[k];
        if (grad) {
          zeta += weight * (product * s.g);
          product = product * s.A_in;
        } else {
          zeta += weight * s.g;
        }
        weight *= decay;
      }

      model.draw_noise(rng, noise);
      const Vector nx = model.next_state(x, noise);
      Sample next = observe(nx, history.front().A_out);
      const Sample& now = history.front();

      if (grad) {
        const Matrix diff = now.g - opt.beta * now.A_out.transpose() * next.g;
        batch_M[batch] += diff.transpose() * zeta;
        batch_b[batch] += zeta.transpose() * now.grad_c;
      } else {
        const Vector diff = now.g.col(0) - opt.beta * next.g.col(0);
        batch_M[batch] += zeta.col(0) * diff.transpose();
        batch_b[batch] += zeta.col(0) * now.c;
      }

      history.push_front(std::move(next));
      if (static_cast<long>(history.size()) > window) history.pop_back();
      x = nx;
    }
  }

  Matrix M_sum = Matrix::Zero(d, d);
  Vector b_sum = Vector::Zero(d);
  for (int batch = 0; batch < opt.batches; ++batch) {
    M_sum += batch_M[batch];
    b_sum += batch_b[batch];
  }
  const double total = static_cast<double>(per_batch) * opt.batches;
  out.M = M_sum / total;
  out.b = b_sum / total;

  Eigen::ColPivHouseholderQR<Matrix> qr(out.M);
  qr.setThreshold(1e-10);
  out.theta = Vector::Zero(features.dim());
  out.theta_stderr = Vector::Zero(features.dim());
  if (qr.rank() < d) {
    out.singular = true;
    return out;
  }
  const Vector theta = qr.solve(out.b);
  out.theta(out.basis) = theta;

  Vector mean = Vector::Zero(d);
  Vector sq = Vector::Zero(d);
  for (int batch = 0; batch < opt.batches; ++batch) {
    const Vector tb = batch_M[batch].colPivHouseholderQr().solve(batch_b[batch]);
    mean += tb;
    sq += tb.cwiseProduct(tb);
  }
  const double nb = opt.batches;
  mean /= nb;
  const Vector var = ((sq / nb - mean.cwiseProduct(mean)) * (nb / (nb - 1.0))).cwiseMax(0.0);
  out.theta_stderr(out.basis) = (var / nb).cwiseSqrt();
  return out;
}

TestFunction identity_function() {
  return {"x", [](const Vector& x) { return x[0]; },
          [](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g[0] = 1.0;
            return g;
          }};
}

TestFunction square_function() {
  return {"x^2", [](const Vector& x) { return x[0] * x[0]; },
          [](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g[0] = 2.0 * x[0];
            return g;
          }};
}

bool ExchangeResult::agrees(double k) const {
  for (long i = 0; i < lhs.size(); ++i) {
    if (!(std::abs(lhs[i] - rhs[i]) < k * stderr_diff[i])) return false;
  }
  return true;
}

namespace {

struct Moments {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  double stderr_of_mean() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

}  // namespace

ExchangeResult gradient_exchange_check(const Model& model, const TestFunction& f,
                                       const ExchangeOptions& opt) {
  if (!model.smooth()) throw std::invalid_argument("gradient exchange check needs a smooth model");
  if (opt.horizon < 0 || opt.horizon > 20) throw std::invalid_argument("horizon must lie in [0, 20]");
  if (!(opt.fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
  if (opt.n_samples < 2) throw std::invalid_argument("need at least two samples");
  const int ell = model.state_dim();
  const Vector x0 = opt.x0.size() == 0 ? model.initial_state() : opt.x0;
  model.check_state(x0);
  if (model.is_queue() && x0.minCoeff() < opt.fd_step) {
    throw std::invalid_argument("x0 − fd_step leaves the queue state space");
  }

  std::vector<Moments> lhs(ell), rhs(ell), diff(ell);
  Moments magnitude;
  std::vector<Vector> noises(opt.horizon, Vector(model.noise_dim()));

  auto run = [&](Vector x) {
    for (int k = 0; k < opt.horizon; ++k) x = model.next_state(x, noises[k]);
    return x;
  };

  for (long n = 0; n < opt.n_samples; ++n) {
    RandomStream rng(opt.seed, static_cast<std::uint64_t>(n));
    for (auto& v : noises) model.draw_noise(rng, v);

    Vector x = x0;
    Matrix S = Matrix::Identity(ell, ell);
    for (int k = 0; k < opt.horizon; ++k) {
      S = model.sensitivity(x) * S;
      x = model.next_state(x, noises[k]);
    }
    const Vector r = S.transpose() * f.gradient(x);
    magnitude.add(std::abs(f.value(x)));

    for (int i = 0; i < ell; ++i) {
      Vector up = x0;
      Vector down = x0;
      up[i] += opt.fd_step;
      down[i] -= opt.fd_step;
      const double l = (f.value(run(up)) - f.value(run(down))) / (2.0 * opt.fd_step);
      lhs[i].add(l);
      rhs[i].add(r[i]);
      diff[i].add(l - r[i]);
    }
  }

  // A zero sample spread (exactly linear cases) leaves only round-off in the
  // difference quotient.
  const double resolution =
      64.0 * std::numeric_limits<double>::epsilon() * (1.0 + magnitude.mean) / opt.fd_step;

  ExchangeResult out;
  out.lhs.resize(ell);
  out.rhs.resize(ell);
  out.stderr_diff.resize(ell);
  out.stderr_lhs.resize(ell);
  out.stderr_rhs.resize(ell);
  for (int i = 0; i < ell; ++i) {
    out.lhs[i] = lhs[i].mean;
    out.rhs[i] = rhs[i].mean;
    out.stderr_diff[i] = std::max(diff[i].stderr_of_mean(), resolution);
    out.stderr_lhs[i] = std::max(lhs[i].stderr_of_mean(), resolution);
    out.stderr_rhs[i] = std::max(rhs[i].stderr_of_mean(), resolution);
  }
  return out;
}

double BellmanErrorCurve::mean_abs() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s / static_cast<double>(values.size());
}

BellmanErrorCurve bellman_error(const Model& model, const FeatureMap& features, const Vector& theta,
                                double eta_T, const std::vector<double>& grid,
                                const BellmanOptions& options) {
  if (model.kind() != ModelKind::speed_scaling_geometric) {
    throw std::invalid_argument("bellman_error needs the geometric speed-scaling model");
  }
  if (grid.empty()) throw std::invalid_argument("bellman_error: empty grid");
  if (theta.size() != features.dim()) throw std::invalid_argument("bellman_error: theta dimension mismatch");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("bellman_error: grid must be strictly increasing");
  }
  if (!(options.tail_mass > 0.0) || options.horizon_scale < 1) {
    throw std::invalid_argument("bellman_error: invalid truncation options");
  }
  const double p = model.spec().arrival_prob;
  const double delta = model.spec().lattice_step;
  const double q = 1.0 - p;

  // Remaining mass after n terms is q^n.
  long terms = 1;
  for (double rest = q; rest >= options.tail_mass; rest *= q) ++terms;
  terms *= options.horizon_scale;

  auto h = [&](double v) {
    Vector s(1);
    s[0] = v;
    return theta.dot(features.value(s));
  };

  BellmanErrorCurve out;
  out.grid = grid;
  out.eta_T = eta_T;
  out.theta_used = theta;
  out.terms = terms;
  out.values.reserve(grid.size());
  for (double xv : grid) {
    Vector s(1);
    s[0] = xv;
    const double base = xv - model.service(xv);
    double expected = 0.0;
    double mass = p;
    for (long n = 0; n < terms; ++n) {
      expected += mass * h(base + static_cast<double>(n) * delta);
      mass *= q;
    }
    out.values.push_back(expected - h(xv) + model.cost(s) - eta_T);
  }
  return out;
}

std::vector<double> lattice_grid(const Model& model, double x_max) {
  if (!model.is_queue()) throw std::invalid_argument("lattice_grid needs a queue model");
  if (!(x_max >= 0.0)) throw std::invalid_argument("lattice_grid: x_max must be non-negative");
  const double delta = model.spec().lattice_step;
  std::vector<double> grid;
  const long n = static_cast<long>(std::floor(x_max / delta + 1e-9));
  for (long i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * delta);
  return grid;
}

std::vector<GoldenValue> load_golden(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open golden file " + path.string());
  const auto doc = nlohmann::json::parse(in);
  std::vector<GoldenValue> out;
  for (const auto& entry : doc.at("values")) {
    GoldenValue g;
    g.key = entry.at("key").get<std::string>();
    g.values = entry.at("values").get<std::vector<double>>();
    g.note = entry.value("note", "");
    out.push_back(std::move(g));
  }
  return out;
}

void save_golden(const std::filesystem::path& path, const std::vector<GoldenValue>& values) {
  nlohmann::json doc;
  doc["values"] = nlohmann::json::array();
  for (const auto& g : values) {
    doc["values"].push_back({{"key", g.key}, {"values", g.values}, {"note", g.note}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write golden file " + path.string());
  out << doc.dump(2) << '\n';
}

const GoldenValue* find_golden(const std::vector<GoldenValue>& values, const std::string& key) {
  for (const auto& g : values) {
    if (g.key == key) return &g;
  }
  return nullptr;
}

}  // namespace gradtd::oracle
