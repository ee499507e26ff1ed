#ifndef CPOLAB_VERIFICATION_HPP
#define CPOLAB_VERIFICATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/data.hpp"
#include "cpolab/error.hpp"
#include "cpolab/model.hpp"
#include "cpolab/objectives.hpp"
#include "cpolab/training.hpp"

namespace cpolab {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string details;
};

struct CheckReport {
    std::vector<CheckResult> results;

    bool all_passed() const {
        for (const auto& r : results)
            if (!r.passed) return false;
        return true;
    }

    void add(std::string name, bool passed, double measured, double tolerance,
             std::string details = "") {
        results.push_back({std::move(name), passed, measured, tolerance, std::move(details)});
    }
};

// --- enumerable KL-regularized policy problems ---------------------------

// Outcome-level reward table, prior and temperature; small enough to treat
// the policy as an explicit probability vector.
struct ToyPolicyProblem {
    std::vector<double> reward;  // finite, or -inf to exclude an outcome
    std::vector<double> prior;
    double beta = 1.0;

    void validate() const {
        if (reward.size() != prior.size() || reward.empty())
            fail(ErrorKind::contract, "reward and prior must be non-empty and equally sized");
        if (!(beta > 0.0)) fail(ErrorKind::config, "beta must be positive");
        double sum = 0.0;
        for (double q : prior) {
            if (!(q >= 0.0)) fail(ErrorKind::domain, "prior entries must be non-negative");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::domain, "prior must sum to 1");
        for (double r : reward)
            if (std::isnan(r) || r == std::numeric_limits<double>::infinity())
                fail(ErrorKind::domain, "rewards must be finite or -inf");
    }
};

// pi*(c) = prior(c) * exp(r(c)/beta) / Z by direct enumeration.
inline std::vector<double> closed_form_policy(const ToyPolicyProblem& p) {
    p.validate();
    const double rmax = *std::max_element(p.reward.begin(), p.reward.end());
    if (rmax == -std::numeric_limits<double>::infinity())
        fail(ErrorKind::domain, "all outcomes excluded");
    std::vector<double> out(p.reward.size());
    double z = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = p.prior[i] * std::exp((p.reward[i] - rmax) / p.beta);
        z += out[i];
    }
    if (!(z > 0.0)) fail(ErrorKind::domain, "prior puts no mass on feasible outcomes");
    for (double& v : out) v /= z;
    return out;
}

// E_p[r] - beta * KL(p || prior)
inline double kl_regularized_value(const ToyPolicyProblem& p, const std::vector<double>& dist) {
    double v = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        if (p.prior[i] <= 0.0) return -std::numeric_limits<double>::infinity();
        v += dist[i] * p.reward[i] - p.beta * dist[i] * std::log(dist[i] / p.prior[i]);
    }
    return v;
}

// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0;
    double theta = 0.0;
    int rho = 0;
    double cum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        const double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = static_cast<int>(i + 1);
            css = cum;
        }
    }
    theta = (css - 1.0) / rho;
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

// Maximizes the KL-regularized objective by projected gradient ascent,
// independent of the closed form's softmax structure.
inline std::vector<double> brute_force_policy(const ToyPolicyProblem& p, int iterations = 4000) {
    p.validate();
    const std::size_t n = p.reward.size();
    std::vector<double> dist(n, 1.0 / static_cast<double>(n));
    // Excluded outcomes start and stay at zero.
    double feasible = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (p.reward[i] == -std::numeric_limits<double>::infinity() || p.prior[i] == 0.0)
            dist[i] = 0.0;
        else
            feasible += 1.0;
    for (double& d : dist)
        if (d > 0.0) d = 1.0 / feasible;

    const double floor = 1e-300;
    for (int t = 0; t < iterations; ++t) {
        const double step = 0.5 * p.beta / (1.0 + 0.05 * t);
        std::vector<double> grad(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] <= 0.0 && (p.reward[i] == -std::numeric_limits<double>::infinity() ||
                                   p.prior[i] == 0.0))
                continue;
            const double pi = std::max(dist[i], floor);
            grad[i] = p.reward[i] - p.beta * (std::log(pi / p.prior[i]) + 1.0);
        }
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = dist[i] + step * grad[i];
        next = project_simplex(std::move(next));
        for (std::size_t i = 0; i < n; ++i)
            if (p.reward[i] == -std::numeric_limits<double>::infinity() || p.prior[i] == 0.0)
                next[i] = 0.0;
        // Renormalize the tiny mass lost to clamping excluded outcomes.
        const double mass = std::accumulate(next.begin(), next.end(), 0.0);
        for (double& x : next) x /= mass;
        dist = std::move(next);
    }
    return dist;
}

// Fine grid search over the 2-outcome simplex.
inline std::vector<double> grid_search_policy_2(const ToyPolicyProblem& p) {
    if (p.reward.size() != 2) fail(ErrorKind::contract, "grid search handles 2 outcomes");
    double best_q = 0.5;
    double best_v = -std::numeric_limits<double>::infinity();
    const int steps = 2000000;
    for (int i = 0; i <= steps; ++i) {
        const double q = static_cast<double>(i) / steps;
        const double v = kl_regularized_value(p, {q, 1.0 - q});
        if (v > best_v) {
            best_v = v;
            best_q = q;
        }
    }
    return {best_q, 1.0 - best_q};
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return 0.5 * tv;
}

// Posterior over outcomes given optimality, via p(o=1|c,x) = exp(r). Only
// defined for non-positive rewards and beta = 1.
struct PosteriorIdentity {
    std::vector<double> posterior;
    double z_o = 0.0;  // p(o=1|x)
    double z_x = 0.0;  // partition function of the closed form
};

inline PosteriorIdentity posterior_from_optimality(const ToyPolicyProblem& p) {
    p.validate();
    for (double r : p.reward)
        if (r > 0.0)
            fail(ErrorKind::contract,
                 "rewards must be non-positive so exp(r) is a valid probability");
    PosteriorIdentity out;
    out.posterior.resize(p.reward.size());
    for (std::size_t i = 0; i < p.reward.size(); ++i) {
        const double lik = std::exp(p.reward[i]);  // p(o=1|c,x)
        out.posterior[i] = lik * p.prior[i];
        out.z_o += lik * p.prior[i];
    }
    for (double& v : out.posterior) v /= out.z_o;
    for (std::size_t i = 0; i < p.reward.size(); ++i)
        out.z_x += p.prior[i] * std::exp(p.reward[i] / p.beta);
    return out;
}

// --- proposition suites ---------------------------------------------------

// Uniform-prior preference loss values: -log pi(c|x) for a differing
// negative and log 2 for an agreeing one.
inline CheckReport check_prop1(int num_cases, std::uint64_t seed = 11) {
    CheckReport report;
    Rng rng(seed);
    double worst_diff_ne = 0.0;
    double worst_diff_eq = 0.0;
    for (int t = 0; t < num_cases; ++t) {
        const double pi = rng.uniform(0.01, 0.99);
        const double c = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double z = std::log(pi / (1.0 - pi)) * (c == 1.0 ? 1.0 : -1.0);  // pi(label)=pi
        Tape<double> tape;
        const NodeId zid = tape.leaf(MatD::Constant(1, 1, z));
        MatD labels = MatD::Constant(1, 1, c);
        MatD differ = MatD::Constant(1, 1, 1.0 - c);
        MatD agree = labels;
        const NodeId l_ne = cpo_concept_loss(tape, zid, labels, differ,
                                             ConceptPrior<double>::uniform(), 1.0);
        const NodeId l_eq = cpo_concept_loss(tape, zid, labels, agree,
                                             ConceptPrior<double>::uniform(), 1.0);
        worst_diff_ne = std::max(worst_diff_ne, std::abs(tape.value(l_ne)(0, 0) + std::log(pi)));
        worst_diff_eq = std::max(worst_diff_eq, std::abs(tape.value(l_eq)(0, 0) - std::log(2.0)));
    }
    report.add("prop1.differing_negative_equals_neg_log_pi", worst_diff_ne < 1e-5, worst_diff_ne,
               1e-5, std::to_string(num_cases) + " random cases");
    report.add("prop1.agreeing_negative_equals_log2", worst_diff_eq < 1e-6, worst_diff_eq, 1e-6,
               std::to_string(num_cases) + " random cases");
    return report;
}

// Per-logit gradient identity |dL_cpo/dz| = (1 - pi(c|x)) |dL_bce/dz| from
// the implemented backward passes, plus the stacked-factor norm bound on
// random batches using the analytic expected gradients.
inline CheckReport check_prop2(int num_cases, std::uint64_t seed = 13) {
    CheckReport report;
    Rng rng(seed);
    double worst_defect = 0.0;
    for (int t = 0; t < num_cases; ++t) {
        const double z = rng.uniform(-6.0, 6.0);
        const double c = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Tape<double> tape;
        const NodeId zid = tape.leaf(MatD::Constant(1, 1, z));
        MatD labels = MatD::Constant(1, 1, c);
        MatD differ = MatD::Constant(1, 1, 1.0 - c);
        const NodeId l_cpo = cpo_concept_loss(tape, zid, labels, differ,
                                              ConceptPrior<double>::uniform(), 1.0);
        const NodeId l_bce = bce_concept_loss(tape, zid, labels);
        const double g_cpo = tape.backward(l_cpo).at(zid)(0, 0);
        const double g_bce = tape.backward(l_bce).at(zid)(0, 0);
        const double pi_label = c == 1.0 ? detail::stable_sigmoid(z)
                                         : detail::stable_sigmoid(-z);
        worst_defect =
            std::max(worst_defect, std::abs(std::abs(g_cpo) - (1.0 - pi_label) * std::abs(g_bce)));
        if (std::abs(g_cpo) > std::abs(g_bce))
            worst_defect = std::max(worst_defect, std::abs(g_cpo) - std::abs(g_bce));
    }
    report.add("prop2.per_logit_identity", worst_defect < 1e-6, worst_defect, 1e-6,
               std::to_string(num_cases) + " random logits");

    int batch_violations = 0;
    double worst_ratio = 0.0;
    for (int b = 0; b < 100; ++b) {
        const int n = 4 + static_cast<int>(rng.below(60));
        const int k = 2 + static_cast<int>(rng.below(14));
        MatD z(n, k), c(n, k);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) {
                z(i, j) = rng.uniform(-6.0, 6.0);
                c(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
            }
        const double norm_cpo = cpo_logit_grad_factors(z, c).norm();
        const double norm_bce = bce_logit_grad_factors(z, c).norm();
        if (norm_cpo > norm_bce) ++batch_violations;
        worst_ratio = std::max(worst_ratio, norm_cpo / norm_bce);
    }
    report.add("prop2.batch_norm_bound", batch_violations == 0, worst_ratio, 1.0,
               "100 random batches, expected gradient norms");
    return report;
}

// --- gradient-noise experiment (the 100-step trace protocol) --------------

struct Theorem1SeedResult {
    std::uint64_t seed = 0;
    double mean_cpo_distance = 0.0;
    double mean_bce_distance = 0.0;
    long pointwise_violations = 0;
    std::vector<GradTraceRecord> trace;
};

struct Theorem1Config {
    SyntheticSpec spec;
    CbmArchitecture arch;
    double noise_p = 0.3;
    int steps = 100;
    int batch_size = 128;
    float lr = 0.1f;
    float momentum = 0.9f;
};

// Trains the concept predictor with the averaged pair of concept losses (no
// task loss, no augmentation) and records the squared distance between the
// clean-label and noisy-label expected gradients for each loss at every
// step. Also counts per-entry violations of |cpo factor| <= |bce factor|.
inline Theorem1SeedResult run_gradient_noise_trace(const Theorem1Config& cfg, std::uint64_t seed) {
    const ConceptDataset full = generate(cfg.spec, seed);
    const SplitDataset parts = split(full, 0.7, 0.1, 0.2, seed + 1);
    const ConceptDataset train = apply_uniform_noise(parts.train, cfg.noise_p, seed + 2);

    CbmParameters<float> params = init_params<float>(cfg.arch, seed + 3);
    Rng shuffle_rng = Rng(seed + 4);
    Rng gumbel_rng = Rng(seed + 5);
    SgdOptimizer<float> opt(cfg.lr, cfg.momentum);

    Theorem1SeedResult result;
    result.seed = seed;

    std::vector<int> order = shuffle_rng.permutation(train.n());
    std::size_t cursor = 0;
    for (int step = 1; step <= cfg.steps; ++step) {
        std::vector<int> rows;
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor == order.size()) {
                order = shuffle_rng.permutation(train.n());
                cursor = 0;
            }
            rows.push_back(order[cursor++]);
        }
        const ConceptDataset batch = train.take(rows);
        const MatF bx = batch.X;
        const MatF bc = batch.C;

        Tape<float> tape;
        BoundParams<float> bound = bind_params(tape, params);
        const NodeId x = tape.constant(bx);
        const NodeId z = concept_logits_forward(tape, bound, x);
        const NodeId bce = bce_concept_loss(tape, z, bc);
        SampledConcepts<float> neg = sample_negatives(tape, z, 1.0f, gumbel_rng);
        const NodeId cpo =
            cpo_concept_loss(tape, z, bc, neg.hard, ConceptPrior<float>::uniform(), 1.0f);
        const NodeId loss = tape.scalar_mul(tape.add(cpo, bce), 0.5f);
        tape.check_finite(loss, "combined concept loss");

        GradientMap<float> grads = tape.backward(loss);
        std::vector<Mat<float>*> targets = params.concept_predictor();
        std::vector<const Mat<float>*> gptrs;
        for (std::size_t i = 0; i < targets.size(); ++i)
            gptrs.push_back(&grads.at(bound.flat_ids[i]));
        opt.step(targets, gptrs);

        GradTraceRecord rec = gradient_trace_distances(params, train.X, train.C, train.C_clean);
        rec.step = step;
        result.trace.push_back(rec);
        result.mean_cpo_distance += rec.cpo_sq_distance;
        result.mean_bce_distance += rec.bce_sq_distance;

        // Pointwise bound on the full split at the current parameters.
        const MatF zf = concept_logits(params, train.X);
        const MatF f_cpo_clean = cpo_logit_grad_factors(zf, train.C_clean);
        const MatF f_bce_clean = bce_logit_grad_factors(zf, train.C_clean);
        const MatF f_cpo_noisy = cpo_logit_grad_factors(zf, train.C);
        const MatF f_bce_noisy = bce_logit_grad_factors(zf, train.C);
        for (Eigen::Index i = 0; i < zf.rows(); ++i)
            for (Eigen::Index j = 0; j < zf.cols(); ++j) {
                if (std::abs(f_cpo_clean(i, j)) > std::abs(f_bce_clean(i, j)))
                    ++result.pointwise_violations;
                if (std::abs(f_cpo_noisy(i, j)) > std::abs(f_bce_noisy(i, j)))
                    ++result.pointwise_violations;
            }
    }
    result.mean_cpo_distance /= cfg.steps;
    result.mean_bce_distance /= cfg.steps;
    return result;
}

inline CheckReport check_theorem1(const Theorem1Config& cfg, int num_seeds,
                                  std::uint64_t base_seed = 100) {
    CheckReport report;
    int cpo_closer = 0;
    long violations = 0;
    for (int s = 0; s < num_seeds; ++s) {
        const Theorem1SeedResult r = run_gradient_noise_trace(cfg, base_seed + 10 * s);
        if (r.mean_cpo_distance < r.mean_bce_distance) ++cpo_closer;
        violations += r.pointwise_violations;
    }
    const int required = num_seeds - num_seeds / 10;
    report.add("theorem1.cpo_distance_below_bce",
               cpo_closer >= required, static_cast<double>(cpo_closer),
               static_cast<double>(required),
               "p=" + std::to_string(cfg.noise_p) + ", " + std::to_string(cfg.steps) + " steps, " +
                   std::to_string(num_seeds) + " seeds");
    report.add("theorem1.pointwise_violations", violations == 0,
               static_cast<double>(violations), 0.0, "per-logit |cpo| <= |bce| factor bound");
    return report;
}

// --- optimal policy and posterior suites ----------------------------------

inline CheckReport check_optimal_policy(std::uint64_t seed = 17) {
    CheckReport report;

    // Worked 2-outcome case: uniform prior, beta=1, r=(0, ln 2) -> (1/3, 2/3).
    {
        ToyPolicyProblem p{{0.0, std::log(2.0)}, {0.5, 0.5}, 1.0};
        const std::vector<double> closed = closed_form_policy(p);
        const double err = std::max(std::abs(closed[0] - 1.0 / 3.0), std::abs(closed[1] - 2.0 / 3.0));
        report.add("policy.worked_two_outcome_case", err < 1e-12, err, 1e-12, "expect (1/3, 2/3)");
        const std::vector<double> grid = grid_search_policy_2(p);
        const double tv_grid = total_variation(closed, grid);
        report.add("policy.grid_search_agrees", tv_grid < 1e-4, tv_grid, 1e-4, "2e6-point grid");
    }

    // Constant reward leaves the prior untouched.
    {
        Rng rng(seed);
        std::vector<double> prior(8);
        double sum = 0.0;
        for (double& q : prior) sum += (q = rng.uniform(0.1, 1.0));
        for (double& q : prior) q /= sum;
        ToyPolicyProblem p{std::vector<double>(8, -0.7), prior, 1.0};
        const double tv = total_variation(closed_form_policy(p), prior);
        report.add("policy.constant_reward_returns_prior", tv < 1e-12, tv, 1e-12, "");
    }

    // Large beta pins the policy to the prior.
    {
        Rng rng(seed + 1);
        std::vector<double> reward(16), prior(16);
        double sum = 0.0;
        for (std::size_t i = 0; i < prior.size(); ++i) {
            reward[i] = rng.uniform(-3.0, 0.0);
            sum += (prior[i] = rng.uniform(0.1, 1.0));
        }
        for (double& q : prior) q /= sum;
        ToyPolicyProblem p{reward, prior, 1e6};
        const double tv = total_variation(closed_form_policy(p), prior);
        report.add("policy.beta_limit_returns_prior", tv < 1e-6, tv, 1e-6, "beta = 1e6");
    }

    // Random problems: closed form vs projected gradient ascent.
    {
        Rng rng(seed + 2);
        double worst_tv = 0.0;
        const double betas[] = {0.5, 1.0, 2.0};
        const int sizes[] = {2, 3, 8, 64, 512, 4096};
        for (double beta : betas) {
            for (int n : sizes) {
                std::vector<double> reward(static_cast<std::size_t>(n));
                std::vector<double> prior(static_cast<std::size_t>(n));
                double sum = 0.0;
                for (int i = 0; i < n; ++i) {
                    reward[static_cast<std::size_t>(i)] = rng.uniform(-4.0, 0.0);
                    sum += (prior[static_cast<std::size_t>(i)] = rng.uniform(0.05, 1.0));
                }
                for (double& q : prior) q /= sum;
                ToyPolicyProblem p{reward, prior, beta};
                const double tv = total_variation(closed_form_policy(p), brute_force_policy(p));
                worst_tv = std::max(worst_tv, tv);
            }
        }
        report.add("policy.closed_form_vs_gradient_ascent", worst_tv < 1e-4, worst_tv, 1e-4,
                   "beta in {0.5,1,2}, up to 4096 outcomes");
    }
    return report;
}

inline CheckReport check_posterior_identity(int num_problems = 20, std::uint64_t seed = 19) {
    CheckReport report;

    {
        ToyPolicyProblem p{{0.0, -std::log(2.0)}, {0.5, 0.5}, 1.0};
        const PosteriorIdentity post = posterior_from_optimality(p);
        const double err =
            std::max(std::abs(post.posterior[0] - 2.0 / 3.0), std::abs(post.posterior[1] - 1.0 / 3.0));
        report.add("posterior.worked_two_outcome_case", err < 1e-12, err, 1e-12,
                   "expect (2/3, 1/3)");
    }
    {
        ToyPolicyProblem p{std::vector<double>(6, 0.0),
                           std::vector<double>{0.1, 0.2, 0.05, 0.25, 0.15, 0.25}, 1.0};
        const PosteriorIdentity post = posterior_from_optimality(p);
        const double tv = total_variation(post.posterior, p.prior);
        report.add("posterior.zero_reward_returns_prior", tv < 1e-12, tv, 1e-12, "");
    }

    Rng rng(seed);
    double worst_diff = 0.0;
    double worst_z = 0.0;
    for (int t = 0; t < num_problems; ++t) {
        const int n = 2 + static_cast<int>(rng.below(4095));
        std::vector<double> reward(static_cast<std::size_t>(n));
        std::vector<double> prior(static_cast<std::size_t>(n));
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            reward[static_cast<std::size_t>(i)] = rng.uniform(-5.0, 0.0);
            sum += (prior[static_cast<std::size_t>(i)] = rng.uniform(0.01, 1.0));
        }
        for (double& q : prior) q /= sum;
        ToyPolicyProblem p{reward, prior, 1.0};

        const PosteriorIdentity post = posterior_from_optimality(p);
        const std::vector<double> closed = closed_form_policy(p);
        for (int i = 0; i < n; ++i)
            worst_diff = std::max(worst_diff,
                                  std::abs(post.posterior[static_cast<std::size_t>(i)] -
                                           closed[static_cast<std::size_t>(i)]));
        worst_z = std::max(worst_z, std::abs(post.z_o - post.z_x));
    }
    report.add("posterior.matches_optimal_policy", worst_diff < 1e-8, worst_diff, 1e-8,
               std::to_string(num_problems) + " random enumerable problems");
    report.add("posterior.normalizers_agree", worst_z < 1e-10, worst_z, 1e-10,
               "Z(o) vs Z(x) at beta=1");
    return report;
}

}  // namespace cpolab

#endif
