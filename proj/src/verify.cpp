#include "dfl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dfl/analysis.hpp"
#include "dfl/engine.hpp"
#include "dfl/error.hpp"

namespace dfl {

namespace {

LemmaResult make(std::string name, double dev, double tol, std::string detail = {}) {
  return LemmaResult{std::move(name), dev <= tol, dev, tol, std::move(detail)};
}

double rel_dev(const DenseVector& a, const DenseVector& b) {
  return max_abs(subtract(a, b)) / std::max(1.0, std::max(max_abs(a), max_abs(b)));
}

Problem quadratic_fixture(std::size_t m, std::uint64_t seed) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kQuadratic;
  spec.quad_dim = 6;
  return build_problem(spec, PartitionSpec{}, m, seed);
}

Problem logistic_fixture(std::size_t m, std::uint64_t seed) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kLogistic;
  spec.classes = 3;
  spec.input_dim = 4;
  spec.samples = 240;
  PartitionSpec part;
  part.kind = PartitionKind::kIid;
  return build_problem(spec, part, m, seed);
}

DenseVector random_vector(std::size_t d, std::uint64_t seed, std::size_t id, double scale) {
  RngStream rng(seed, id, Purpose::kInit, 17);
  DenseVector v(d);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

LemmaResult check_mixing(const VerifyOptions& opts) {
  double worst = 0.0;
  std::size_t cases = 0;
  std::string failing;
  for (auto kind : {TopologyKind::kRing, TopologyKind::kGrid, TopologyKind::kExponential, TopologyKind::kFull,
                    TopologyKind::kErdosRenyi, TopologyKind::kWattsStrogatz, TopologyKind::kRandomDynamic}) {
    for (std::size_t m : {4, 16}) {
      TopologySpec spec;
      spec.kind = kind;
      spec.m = m;
      spec.seed = 11;
      spec.p = 0.5;
      spec.k = std::min<std::size_t>(4, (m - 1) / 2 * 2);
      spec.n_neighbors = std::min<std::size_t>(3, m - 1);
      const MixingMatrix mixing = metropolis_weights(build_graph(spec));
      std::vector<double> rm = mixing.w.entries();
      rm[1] += opts.mixing_perturbation;
      const ValidationReport r = validate(m, rm);
      const double dev = std::max({r.lemma1_deviation, r.max_row_sum_deviation, r.max_col_sum_deviation,
                                   r.max_asymmetry});
      if (!r.passes() && failing.empty()) failing = to_string(kind) + " m=" + std::to_string(m);
      worst = std::max(worst, dev);
      ++cases;
    }
  }
  LemmaResult res = make("mixing double stochasticity", worst, 1e-10, std::to_string(cases) + " matrices");
  if (!failing.empty()) {
    res.passed = false;
    res.detail += ", first failure: " + failing;
  }
  return res;
}

// Runs one deterministic DFedCata local phase and compares with the closed form.
struct LocalPhase {
  DenseVector anchor;
  LocalTrace trace;
};

LocalPhase local_phase(const Problem& p, const HyperParams& h, std::size_t client) {
  ClientState s = ClientState::initial(random_vector(p.dim(), 3, client, 0.5));
  s.x_prev = random_vector(p.dim(), 4, client, 0.5);
  LocalPhase out;
  out.anchor = extrapolate(s, h.beta);
  ClientStreams streams(1, client, 0);
  local_update_dfedcata(s, p, h, client, 0, streams, &out.trace);
  return out;
}

HyperParams deterministic_hyper(double eta, double lambda, std::size_t K) {
  HyperParams h;
  h.eta = eta;
  h.lambda = lambda;
  h.K = K;
  h.beta = 0.5;
  h.batch_size = 0;
  h.lr_decay = 1.0;
  return h;
}

LemmaResult check_closed_form(bool& limit_exercised) {
  const Problem quad = quadratic_fixture(2, 5);
  const Problem logi = logistic_fixture(2, 5);
  double worst = 0.0;
  std::size_t cases = 0;
  for (const Problem* p : {&quad, &logi}) {
    for (double eta : {0.01, 0.1, 0.3}) {
      for (double lambda : {0.0, 0.05, 0.5, 2.0}) {
        if (eta * lambda >= 1.0) continue;
        for (std::size_t K : {1, 5, 20}) {
          const HyperParams h = deterministic_hyper(eta, lambda, K);
          const LocalPhase ph = local_phase(*p, h, 1);
          const auto c = local_update_coefficients(eta, lambda, K);
          limit_exercised = limit_exercised || c.lambda_limit;
          DenseVector predicted = ph.anchor;
          for (std::size_t k = 0; k < K; ++k) {
            axpy_inplace(-c.gamma_over_lambda * c.weights[k], ph.trace.grads[k], predicted);
          }
          worst = std::max(worst, rel_dev(predicted, ph.trace.iterates.back()));
          ++cases;
        }
      }
    }
  }
  return make("local-update closed form", worst, 1e-10, std::to_string(cases) + " (eta, lambda, K) cases");
}

LemmaResult check_lambda_limit() {
  // gamma/lambda -> K eta and gamma_k/gamma -> 1/K as lambda -> 0.
  const double eta = 0.1;
  const std::size_t K = 5;
  const auto lim = local_update_coefficients(eta, 0.0, K);
  const auto tiny = local_update_coefficients(eta, 1e-9, K);
  double dev = std::abs(lim.gamma_over_lambda - tiny.gamma_over_lambda) / lim.gamma_over_lambda;
  for (std::size_t k = 0; k < K; ++k) dev = std::max(dev, std::abs(lim.weights[k] - tiny.weights[k]));
  const double gamma = local_update_coefficients(0.1, 0.5, 5).gamma;
  dev = std::max(dev, std::abs(gamma - 0.2262190625));
  return make("local-update lambda -> 0 limit", dev, 1e-8);
}

LemmaResult check_bounded_update() {
  const Problem quad = quadratic_fixture(2, 9);
  const Problem logi = logistic_fixture(2, 9);
  double worst = 0.0;  // max of lhs / rhs - 1 (<= 0 when the bound holds)
  double worst_ratio = 0.0;
  for (const Problem* p : {&quad, &logi}) {
    for (double lambda : {0.05, 0.5, 2.0}) {
      const HyperParams h = deterministic_hyper(0.1, lambda, 10);
      const LocalPhase ph = local_phase(*p, h, 0);
      for (std::size_t k = 1; k <= h.K; ++k) {
        const auto c = local_update_coefficients(h.eta, lambda, k);
        double rhs = 0.0;
        for (std::size_t j = 0; j < k; ++j) rhs += c.weights[j] * squared_norm(ph.trace.grads[j]);
        rhs *= c.gamma_over_lambda * c.gamma_over_lambda;
        const double lhs = squared_norm(subtract(ph.trace.iterates[k], ph.anchor));
        if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
        worst = std::max(worst, lhs - rhs * (1.0 + 1e-12));
      }
    }
  }
  std::ostringstream os;
  os << "max lhs/rhs " << std::setprecision(6) << worst_ratio;
  return make("bounded local update", std::max(0.0, worst), 0.0, os.str());
}

std::vector<LemmaResult> check_sequences() {
  RunConfig cfg;
  cfg.algorithm = AlgorithmKind::kDFedCata;
  cfg.m = 8;
  cfg.topology.kind = TopologyKind::kRing;
  cfg.topology.m = 8;
  cfg.problem.kind = ProblemKind::kQuadratic;
  cfg.problem.quad_dim = 10;
  cfg.hyper.T = 100;
  cfg.hyper.batch_size = 0;
  cfg.hyper.beta = 0.6;
  cfg.hyper.lambda = 0.1;
  cfg.hyper.eta = 0.05;
  cfg.verification_mode = true;
  cfg.init = InitKind::kGaussian;
  cfg.init_scale = 1.0;
  const VerificationTolerances tol;
  std::string failure;
  VerificationStats stats;
  try {
    stats = run(cfg).verification;
  } catch (const VerificationError& e) {
    failure = e.what();
  }
  const std::string detail = failure.empty() ? std::to_string(stats.rounds_checked) + " rounds" : failure;
  std::vector<LemmaResult> out{
      make("mean preserved by mixing", stats.mean_after_mix, tol.mixing, detail),
      make("mean-sequence recursion", stats.mean_sequence, tol.recursion, detail),
      make("auxiliary-sequence recursion", stats.auxiliary_sequence, tol.recursion, detail),
      make("virtual-sequence mean", stats.virtual_sequence, tol.recursion, detail),
  };
  if (!failure.empty()) {
    for (auto& r : out) r.passed = false;
  }
  return out;
}

LemmaResult check_kappa(const VerifyOptions& opts) {
  double agree = 0.0;
  double worst_ratio = 0.0;
  std::size_t points = 0;
  for (double psi : {0.1, 0.3, 0.5, 0.8, 0.95}) {
    for (double alpha : {0.1, 0.4, 0.7, 0.95}) {
      const double a = kappa_psi(psi, alpha);
      agree = std::max(agree, std::abs(a - kappa_psi_alt(psi, alpha)) / a);
      worst_ratio = std::max(worst_ratio, check_kappa_bound(psi, alpha, opts.kappa_t_max).max_ratio);
      ++points;
    }
  }
  std::ostringstream os;
  os << points << " (psi, alpha) points, max sum/bound " << std::setprecision(6) << worst_ratio;
  LemmaResult r = make("kappa_psi geometric-sum bound", agree, 1e-12, os.str());
  r.passed = r.passed && worst_ratio <= 1.0;
  return r;
}

}  // namespace

std::vector<LemmaResult> run_verification(const VerifyOptions& opts) {
  std::vector<LemmaResult> out;
  out.push_back(check_mixing(opts));
  bool limit = false;
  out.push_back(check_closed_form(limit));
  if (!limit) {
    out.back().passed = false;
    out.back().detail += ", lambda = 0 path not exercised";
  }
  out.push_back(check_lambda_limit());
  out.push_back(check_bounded_update());
  for (auto& r : check_sequences()) out.push_back(std::move(r));
  out.push_back(check_kappa(opts));
  return out;
}

bool all_passed(const std::vector<LemmaResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const LemmaResult& r) { return r.passed; });
}

void print_verification(std::ostream& out, const std::vector<LemmaResult>& results) {
  for (const auto& r : results) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": max deviation " << std::setprecision(17)
        << r.max_deviation << " (tolerance " << std::setprecision(3) << r.tolerance << ")";
    if (!r.detail.empty()) out << " - " << r.detail;
    out << '\n';
  }
}

}  // namespace dfl
