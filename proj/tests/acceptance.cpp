// Acceptance suite: one PASS/FAIL line per criterion. The GridWorld benchmark
// (criterion 8) runs only with --only-slow; --skip-slow runs the rest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "reprl/decision_set.hpp"
#include "reprl/drivers.hpp"
#include "reprl/environments.hpp"
#include "reprl/harness.hpp"
#include "reprl/linear_bandit.hpp"
#include "reprl/representation.hpp"

using namespace reprl;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = REPRL_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

std::string fix(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

double max_rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max({1e-3, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

void info(const std::string& text) { std::cout << "INFO " << text << '\n' << std::flush; }

// ---------------------------------------------------------------------------

Outcome ridge_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Engine e(101);
  const Eigen::Index d = 8;
  const double lambda = 0.1;
  BanditState bandit(d, lambda);
  Matrix x(d, 200);
  Vector y(200);
  fill_gaussian(e, x);
  fill_gaussian(e, y);
  for (Eigen::Index i = 0; i < 200; ++i) bandit.update(x.col(i), y(i));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Matrix v = lambda * Matrix::Identity(d, d) + x * x.transpose();
  const Vector w = v.fullPivLu().solve(x * y);
  const double gap = (bandit.estimate() - w).cwiseAbs().maxCoeff();
  return {gap <= 1e-8 && seconds < 1.0, "max |w_hat - w_ridge| = " + sci(gap) + ", updates took " + sci(seconds) + " s"};
}

struct MdpCase {
  TabularMDP mdp;
  Matrix pi;
};

std::vector<MdpCase> mdp_battery() {
  std::vector<MdpCase> out;
  Engine e(202);
  const double gammas[] = {0.5, 0.9, 0.99};
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index s = 1 + static_cast<Eigen::Index>(e.index(8));
    const Eigen::Index a = 1 + static_cast<Eigen::Index>(e.index(4));
    TabularMDP mdp = random_mdp(s, a, gammas[i % 3], e);
    Matrix pi = random_stochastic_policy(s, a, e);
    out.push_back({std::move(mdp), std::move(pi)});
  }
  return out;
}

Outcome proposition_one(const std::vector<MdpCase>& battery) {
  const auto start = std::chrono::steady_clock::now();
  double literal_gap = 0.0, stationary_gap = 0.0;
  for (const MdpCase& c : battery) {
    const Prop1Result p = prop1_check(c.mdp, c.pi);
    literal_gap = std::max(literal_gap, std::abs(p.v_tilde * (1.0 - c.mdp.gamma) - p.v));
    const StationaryResult st = stationary_prop1_check(c.mdp, c.pi);
    stationary_gap = std::max(stationary_gap, std::abs(st.v_tilde * (1.0 - c.mdp.gamma) - st.average_reward));
  }

  // Inner-trajectory samples against their exact expectation, 10^4 draws per MDP.
  const int horizon = 30;
  const int n = 10000;
  int mc_misses = 0;
  double worst_z = 0.0;
  const RngStream root(203);
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const MdpCase& c = battery[i];
    const RngStream mc = root.split(i);
    Vector g(n);
    for (int k = 0; k < n; ++k) {
      const RngStream sk = mc.split(static_cast<std::uint64_t>(k));
      g(k) = sample_inner(rollout_tabular(c.mdp, c.pi, horizon, sk.split(0)), c.mdp.gamma, sk.split(1)).g_tilde;
    }
    const double mean = g.mean();
    const double se = std::sqrt((g.array() - mean).square().sum() / (n - 1) / n);
    const double gap = std::abs(mean - inner_sampling_expectation(c.mdp, c.pi, horizon));
    const double z = se > 0.0 ? gap / se : (gap > 1e-12 ? 1e9 : 0.0);
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++mc_misses;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  info("criterion 2: stationary start law, max |v_tilde (1 - gamma) - avg reward| = " + sci(stationary_gap));
  info("criterion 2: Monte-Carlo inner samples outside 3 SE on " + std::to_string(mc_misses) +
       " of 100 MDPs (worst z " + fix(worst_z, 2) + ")");
  const bool pass = literal_gap <= 1e-10 && mc_misses == 0 && seconds < 30.0;
  return {pass, "discounted-occupancy start law, max |v_tilde (1 - gamma) - v| = " + sci(literal_gap) +
                    "; Monte-Carlo misses " + std::to_string(mc_misses) + "; " + fix(seconds, 1) + " s"};
}

Outcome linear_value_form(const std::vector<MdpCase>& battery) {
  double literal_gap = 0.0, scaled_gap = 0.0;
  for (const MdpCase& c : battery) {
    const double v = c.mdp.initial.dot(tabular_value(c.mdp, c.pi));
    const double inner = (tabular_rho(c.mdp, c.pi).array() * c.mdp.reward.array()).sum();
    literal_gap = std::max(literal_gap, std::abs(inner - v));
    scaled_gap = std::max(scaled_gap, std::abs(inner - (1.0 - c.mdp.gamma) * v));
  }
  info("criterion 3: max |<rho, r> - (1 - gamma) v| = " + sci(scaled_gap));
  return {literal_gap <= 1e-10, "max |<rho, r> - v| = " + sci(literal_gap)};
}

Outcome gradient_integrity() {
  const double h = 1e-6;
  double elbo_worst = 0.0, pg_worst = 0.0;
  int archs = 0;

  struct EncCase {
    Eigen::Index p;
    std::vector<Eigen::Index> hidden;
    Eigen::Index d;
    bool det;
  };
  const std::vector<EncCase> enc_cases = {{3, {4}, 2, false},   {5, {6, 4}, 3, false}, {2, {}, 2, false},
                                          {4, {8}, 1, true},    {6, {5, 5}, 4, true},  {3, {3, 3, 3}, 2, false},
                                          {7, {10}, 5, false},  {1, {2}, 1, false},    {8, {6, 3}, 2, false},
                                          {5, {9}, 3, true},    {2, {12, 2}, 3, false}, {10, {16}, 6, false}};
  std::uint64_t seed = 300;
  for (const EncCase& c : enc_cases) {
    ++archs;
    Engine e(++seed);
    EncoderModel enc = EncoderModel::make(c.p, c.hidden, c.d, c.det, e);
    Matrix samples(c.p, 10);
    fill_gaussian(e, samples);
    enc.input_norm = NormStats::fit(samples);
    ReturnDecoder dec;
    dec.kappa.resize(c.d);
    fill_gaussian(e, dec.kappa);
    dec.noise_var = 0.5 + e.uniform();
    const Eigen::Index batch = 1 + static_cast<Eigen::Index>(e.index(6));
    Matrix thetas(c.p, batch), xi(c.d, batch);
    Vector targets(batch);
    fill_gaussian(e, thetas);
    fill_gaussian(e, xi);
    fill_gaussian(e, targets);
    const ElboResult r = elbo_batch(enc, dec, thetas, targets, xi);
    const Vector params = enc.params();
    Vector fd(params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Vector pp = params, pm = params;
      pp(i) += h;
      pm(i) -= h;
      EncoderModel ep = enc, em = enc;
      ep.set_params(pp);
      em.set_params(pm);
      fd(i) = (elbo_batch(ep, dec, thetas, targets, xi).loss - elbo_batch(em, dec, thetas, targets, xi).loss) / (2 * h);
    }
    Vector fdk(c.d);
    for (Eigen::Index i = 0; i < c.d; ++i) {
      ReturnDecoder dp = dec, dm = dec;
      dp.kappa(i) += h;
      dm.kappa(i) -= h;
      fdk(i) = (elbo_batch(enc, dp, thetas, targets, xi).loss - elbo_batch(enc, dm, thetas, targets, xi).loss) / (2 * h);
    }
    elbo_worst = std::max({elbo_worst, max_rel_error(r.encoder_grad, fd), max_rel_error(r.decoder_grad, fdk)});
  }

  for (std::uint64_t s = 1; s <= 10; ++s) {
    ++archs;
    const PolicyArch arch{PolicyKind::SoftmaxMlp, 2 + static_cast<Eigen::Index>(s % 4),
                          2 + static_cast<Eigen::Index>(s % 3),
                          s % 2 ? std::vector<Eigen::Index>{5} : std::vector<Eigen::Index>{4, 3}};
    const Vector theta = initial_policy_params(arch, RngStream(400 + s)) * 3.0;
    const DenseNet baseline = make_baseline(arch, {6}, RngStream(500 + s));
    Engine e(600 + s);
    std::vector<Trajectory> trajs;
    for (int k = 0; k < 3; ++k) {
      Trajectory t;
      for (int i = 0; i < 2 + k; ++i) {
        Vector st(arch.state_dim);
        fill_gaussian(e, st);
        t.states.push_back(st);
        t.actions.push_back(Action{static_cast<int>(e.index(static_cast<std::uint64_t>(arch.action_dim))), {}, {}});
        t.rewards.push_back(e.normal());
      }
      trajs.push_back(std::move(t));
    }
    const double gamma = 0.9;
    const ReinforceResult r = reinforce_loss(trajs, {arch, theta}, baseline, gamma);
    Vector fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector tp = theta, tm = theta;
      tp(i) += h;
      tm(i) -= h;
      fd(i) = (reinforce_loss(trajs, {arch, tp}, baseline, gamma).surrogate_loss -
               reinforce_loss(trajs, {arch, tm}, baseline, gamma).surrogate_loss) /
              (2 * h);
    }
    pg_worst = std::max(pg_worst, max_rel_error(r.policy_grad, fd));
  }
  return {elbo_worst <= 1e-5 && pg_worst <= 1e-5 && archs >= 10,
          std::to_string(archs) + " architectures; max rel error ELBO " + sci(elbo_worst) + ", REINFORCE " +
              sci(pg_worst)};
}

EncoderModel conjugate_encoder(double a, double b, double c) {
  Engine e(1);
  EncoderModel enc = EncoderModel::make(1, {}, 1, false, e);
  enc.mean_head.weight(0)(0, 0) = a;
  enc.mean_head.bias(0)(0) = b;
  enc.logvar_head.weight(0)(0, 0) = 0.0;
  enc.logvar_head.bias(0)(0) = c;
  return enc;
}

Outcome elbo_bound() {
  Engine e(700);
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 20; ++inst) {
    const double kappa = 2.0 * e.normal();
    const double s2 = std::exp(e.normal());
    const double g = 2.0 * e.normal();
    const double theta = e.normal();
    const double log_evidence =
        -0.5 * std::log(2.0 * std::numbers::pi * (kappa * kappa + s2)) - g * g / (2.0 * (kappa * kappa + s2));
    ReturnDecoder dec;
    dec.kappa = Vector::Constant(1, kappa);
    dec.noise_var = s2;
    const EncoderModel enc = conjugate_encoder(e.normal(), e.normal(), e.normal());
    const int n = 10000;
    Engine noise(800 + static_cast<std::uint64_t>(inst));
    Vector elbo(n);
    for (int k = 0; k < n; ++k)
      elbo(k) = -elbo_loss(enc, dec, Vector::Constant(1, theta), g, Vector::Constant(1, noise.normal())).loss;
    const double mean = elbo.mean();
    const double se = std::sqrt((elbo.array() - mean).square().sum() / (n - 1) / n);
    const double excess = (mean - log_evidence) / std::max(se, 1e-300);
    worst = std::max(worst, excess);
    if (mean > log_evidence + 3.0 * se) ++violations;
  }
  return {violations == 0,
          "20 instances, violations " + std::to_string(violations) + ", max (ELBO - log p(G)) / SE = " + fix(worst, 2)};
}

Outcome bandit_reductions() {
  Engine e(900);
  int mismatches = 0;
  bool monotone = true;
  for (int inst = 0; inst < 1000; ++inst) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(e.index(10));
    BanditState bandit(d, 0.05 + e.uniform());
    const int updates = static_cast<int>(e.index(30));
    for (int u = 0; u < updates; ++u) {
      Vector x(d);
      fill_gaussian(e, x);
      bandit.update(x, e.normal());
    }
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(e.index(50));
    Matrix features(d, n);
    fill_gaussian(e, features);
    const RngStream stream(901, static_cast<std::uint64_t>(inst));
    const std::size_t greedy = bandit.select(features, {SelectionMethod::Greedy, 0.0, 0.0}, stream);
    const std::size_t oful = bandit.select(features, {SelectionMethod::Oful, 0.0, 1.0}, stream);
    const std::size_t ts = bandit.select(features, {SelectionMethod::Ts, 1.0, 0.0}, stream);
    if (greedy != oful || greedy != ts) ++mismatches;
    const Vector x = features.col(0);
    double previous = -std::numeric_limits<double>::infinity();
    for (double alpha : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0}) {
      const double score = bandit.ucb_score(x, alpha);
      monotone = monotone && score >= previous;
      previous = score;
    }
  }
  return {mismatches == 0 && monotone, "1000 instances, index mismatches " + std::to_string(mismatches) +
                                           ", UCB monotone in alpha: " + (monotone ? "yes" : "no")};
}

Outcome es_fidelity() {
  const Eigen::Index dim = 32;
  Engine e(1000);
  Vector c(dim);
  fill_gaussian(e, c);
  const LinearObjectiveEnv env(c);
  EsConfig cfg;
  cfg.nu = 0.1;
  cfg.eval_pairs = 512;
  cfg.alpha = 1.0;
  const Vector theta = Vector::Zero(dim);
  double cos_sum = 0.0;
  Vector mean_step = Vector::Zero(dim);
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const Vector step = es_step(theta, env.default_arch(), env, cfg, RngStream(1001, trial)).theta - theta;
    cos_sum += step.dot(c) / (step.norm() * c.norm());
    mean_step += step;
  }
  const double mean_cos = cos_sum / 50.0;
  const double cos_of_mean = mean_step.dot(c) / (mean_step.norm() * c.norm());
  return {mean_cos >= 0.9 && cos_of_mean >= 0.9,
          "dim 32, mean per-trial cosine " + fix(mean_cos) + ", cosine of mean direction " + fix(cos_of_mean)};
}

struct BenchmarkRun {
  double final_return = 0.0;
  double final_success = 0.0;
};

std::vector<BenchmarkRun> benchmark(const RunConfig& config, const std::string& label) {
  const std::unique_ptr<Environment> env = make_environment(config);
  std::vector<BenchmarkRun> out;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : config.seeds) {
    const TrainingResult r = run_training(*env, config.training, seed, config_hash(config));
    const MetricsRecord& last = r.log.records().back();
    out.push_back({last.mean_return, last.success_rate});
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    info(label + " seed " + std::to_string(seed) + ": final mean return " + fix(last.mean_return) +
         ", goal-reach " + fix(last.success_rate, 3) + " (" + fix(elapsed, 0) + " s)");
  }
  return out;
}

Outcome gridworld_benchmark() {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig repes = load_config(kConfigs / "gridworld-repes.ini");
  const RunConfig es = load_config(kConfigs / "gridworld-es.ini");
  const std::vector<BenchmarkRun> a = benchmark(repes, "repes");
  const std::vector<BenchmarkRun> b = benchmark(es, "es");

  const auto mean = [](const std::vector<BenchmarkRun>& runs, double BenchmarkRun::*field) {
    double s = 0.0;
    for (const BenchmarkRun& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
  };
  const double reach_a = mean(a, &BenchmarkRun::final_success);
  const double reach_b = mean(b, &BenchmarkRun::final_success);
  const double ret_a = mean(a, &BenchmarkRun::final_return);
  const double ret_b = mean(b, &BenchmarkRun::final_return);

  // Percentile bootstrap of the difference of mean final returns.
  Engine e(1100);
  const int reps = 10000;
  std::vector<double> diffs(reps);
  for (int k = 0; k < reps; ++k) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[e.index(a.size())].final_return;
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[e.index(b.size())].final_return;
    diffs[static_cast<std::size_t>(k)] = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(diffs.begin(), diffs.end());
  const double lo = diffs[static_cast<std::size_t>(0.05 * reps)];
  const double hi = diffs[static_cast<std::size_t>(0.95 * reps)];
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const bool pass = reach_a >= reach_b && lo > 0.0;
  return {pass, std::to_string(a.size()) + " seeds; goal-reach RepES " + fix(reach_a, 3) + " vs ES " + fix(reach_b, 3) +
                    "; final mean return RepES " + fix(ret_a) + " vs ES " + fix(ret_b) + ", 90% bootstrap CI of " +
                    "difference [" + fix(lo) + ", " + fix(hi) + "]; " + fix(minutes, 1) + " min"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "reprl-acceptance-determinism";
  int identical = 0, total = 0;
  for (const char* preset : {"gridworld-repes.ini", "gridworld-es.ini", "sparseline-repes.ini", "gridworld-reppg.ini"}) {
    RunConfig c = load_config(kConfigs / preset);
    c.training.rounds = 3;
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      c.out_dir = (root / std::to_string(rep)).string();
      fs::remove_all(c.out_dir);
      run_seed(c, 5);
      const std::string bytes = slurp(metrics_path(c, 5));
      if (rep == 0) first = bytes;
      else if (bytes == first && !bytes.empty()) ++identical;
    }
    ++total;
  }
  fs::remove_all(root);
  return {identical == total, std::to_string(identical) + " of " + std::to_string(total) +
                                  " presets (3 rounds each) produced byte-identical metrics files"};
}

Outcome reppg_reduction() {
  RunConfig c = load_config(kConfigs / "gridworld-reppg.ini");
  c.training.rounds = 50;
  c.training.pg.zeta = 0.0;
  const std::unique_ptr<Environment> env = make_environment(c);
  TrainingConfig reinforce = c.training;
  reinforce.driver = DriverKind::Reinforce;
  const TrainingResult rep = run_training(*env, c.training, 1);
  const TrainingResult base = run_training(*env, reinforce, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < rep.log.size(); ++i)
    worst = std::max(worst, std::abs(rep.log.records()[i].mean_return - base.log.records()[i].mean_return));
  const bool same_theta = rep.theta == base.theta;
  return {rep.log.size() == 50 && base.log.size() == 50 && worst == 0.0 && same_theta,
          "50 rounds on GridWorld, max |delta return| = " + sci(worst) + ", final parameters " +
              (same_theta ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_slow = false, only_slow = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--skip-slow") == 0) skip_slow = true;
    else if (std::strcmp(argv[i], "--only-slow") == 0) only_slow = true;
    else {
      std::cerr << "usage: acceptance [--skip-slow | --only-slow]\n";
      return 2;
    }
  }
  configure_allocator();

  int failures = 0;
  const auto criterion = [&](int id, const std::string& name, bool slow, const std::function<Outcome()>& check) {
    if ((slow && skip_slow) || (!slow && only_slow)) {
      std::cout << "SKIP " << id << " " << name << ": run with " << (slow ? "--only-slow" : "--skip-slow") << '\n';
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << name << ": " << o.detail << " [" << fix(seconds, 2)
              << " s]\n"
              << std::flush;
    if (!o.pass) ++failures;
  };

  const std::vector<MdpCase> battery = only_slow ? std::vector<MdpCase>{} : mdp_battery();
  criterion(1, "ridge oracle", false, ridge_oracle);
  criterion(2, "inner-sampling identity", false, [&] { return proposition_one(battery); });
  criterion(3, "linear value form", false, [&] { return linear_value_form(battery); });
  criterion(4, "gradient integrity", false, gradient_integrity);
  criterion(5, "ELBO bound", false, elbo_bound);
  criterion(6, "bandit selection reductions", false, bandit_reductions);
  criterion(7, "ES estimator fidelity", false, es_fidelity);
  criterion(8, "GridWorld RepES vs ES", true, gridworld_benchmark);
  criterion(9, "determinism", false, determinism);
  criterion(10, "RepPG reduction to REINFORCE", false, reppg_reduction);
  return failures == 0 ? 0 : 1;
}
