#ifndef CPOLAB_GRADCHECK_HPP
#define CPOLAB_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/model.hpp"
#include "cpolab/objectives.hpp"
#include "cpolab/training.hpp"
#include "cpolab/verification.hpp"

namespace cpolab {

// Central finite differences against analytic gradients, per coordinate,
// with relative error measured as |a - n| / max(|a|, |n|, 1e-6).
template <typename Scalar, typename Forward>
double max_fd_rel_error(std::vector<Mat<Scalar>*> params,
                        const std::vector<Mat<Scalar>> & analytic, Forward&& forward, Scalar h) {
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Mat<Scalar>& m = *params[t];
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const Scalar orig = m(i, j);
                m(i, j) = orig + h;
                const double f_plus = forward();
                m(i, j) = orig - h;
                const double f_minus = forward();
                m(i, j) = orig;
                const double numeric = (f_plus - f_minus) / (2.0 * static_cast<double>(h));
                const double a = static_cast<double>(analytic[t](i, j));
                const double rel =
                    std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
                worst = std::max(worst, rel);
            }
        }
    }
    return worst;
}

namespace gradcheck_detail {

// Frozen-weight surrogate for the preference loss: the sampling weight is a
// constant of the graph, so the finite-difference oracle evaluates the loss
// with the weights pinned at the base point. Its exact derivative equals the
// implemented backward coefficient.
template <typename Scalar>
double cpo_surrogate_value(const Mat<Scalar>& z, const Mat<Scalar>& labels,
                           const Mat<Scalar>& negatives, const Mat<Scalar>& frozen_weights,
                           const Mat<Scalar>* prior_logits, Scalar beta) {
    const double log2 = std::log(2.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double c = static_cast<double>(labels(i, j));
            const double h = static_cast<double>(negatives(i, j));
            if (c == h) {
                total += log2;
                continue;
            }
            const double z0 = prior_logits ? static_cast<double>((*prior_logits)(i, j)) : 0.0;
            const double delta =
                static_cast<double>(beta) * (c - h) * (static_cast<double>(z(i, j)) - z0);
            total += static_cast<double>(frozen_weights(i, j)) *
                     -detail::stable_log_sigmoid(delta);
        }
    }
    return total / static_cast<double>(z.size());
}

template <typename Scalar>
Mat<Scalar> complement_mass(const Mat<Scalar>& z, const Mat<Scalar>& labels) {
    Mat<Scalar> w(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            w(i, j) = detail::stable_sigmoid((Scalar(1) - Scalar(2) * labels(i, j)) * z(i, j));
    return w;
}

}  // namespace gradcheck_detail

// Finite-difference checks for every loss and the end-to-end model, in the
// requested scalar type.
template <typename Scalar>
CheckReport grad_check_suite(std::uint64_t seed, double tolerance, Scalar h) {
    CheckReport report;
    const std::string prec = sizeof(Scalar) == 4 ? "f32" : "f64";
    Rng rng(seed);

    CbmArchitecture arch;
    arch.input_dim = 6;
    arch.encoder_hidden = {8};
    arch.num_concepts = 4;
    arch.num_classes = 3;
    arch.concept_groups = equal_groups(4, 2);

    const int n = 12;
    Mat<Scalar> x(n, arch.input_dim);
    Mat<Scalar> c(n, arch.num_concepts);
    Mat<Scalar> negatives(n, arch.num_concepts);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < arch.input_dim; ++j) x(i, j) = static_cast<Scalar>(rng.gaussian());
        for (int j = 0; j < arch.num_concepts; ++j) {
            c(i, j) = rng.bernoulli(0.5) ? Scalar(1) : Scalar(0);
            negatives(i, j) = rng.bernoulli(0.5) ? Scalar(1) : Scalar(0);
        }
        y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(arch.num_classes));
    }

    CbmParameters<Scalar> params = init_params<Scalar>(arch, seed + 1);

    auto analytic_grads = [&](auto&& build_loss) {
        Tape<Scalar> tape;
        BoundParams<Scalar> bound = bind_params(tape, params);
        const NodeId loss = build_loss(tape, bound);
        GradientMap<Scalar> g = tape.backward(loss);
        std::vector<Mat<Scalar>> out;
        for (NodeId id : bound.flat_ids) out.push_back(g.at(id));
        return out;
    };

    // 1. concept cross entropy through the MLP
    {
        auto build = [&](Tape<Scalar>& tape, BoundParams<Scalar>& bound) {
            const NodeId z = concept_logits_forward(tape, bound, tape.constant(x));
            return bce_concept_loss(tape, z, c);
        };
        const auto analytic = analytic_grads(build);
        auto forward = [&]() {
            Tape<Scalar> tape;
            BoundParams<Scalar> bound = bind_params(tape, params);
            return static_cast<double>(tape.value(build(tape, bound))(0, 0));
        };
        const double err = max_fd_rel_error(params.flat(), analytic, forward, h);
        report.add("gradcheck." + prec + ".bce_through_encoder", err < tolerance, err, tolerance);
    }

    // 2. task cross entropy through the full model
    {
        auto build = [&](Tape<Scalar>& tape, BoundParams<Scalar>& bound) {
            const NodeId z = concept_logits_forward(tape, bound, tape.constant(x));
            const NodeId ty = task_logits_forward(tape, bound, tape.sigmoid(z));
            return task_cross_entropy(tape, ty, y);
        };
        const auto analytic = analytic_grads(build);
        auto forward = [&]() {
            Tape<Scalar> tape;
            BoundParams<Scalar> bound = bind_params(tape, params);
            return static_cast<double>(tape.value(build(tape, bound))(0, 0));
        };
        const double err = max_fd_rel_error(params.flat(), analytic, forward, h);
        report.add("gradcheck." + prec + ".task_ce_end_to_end", err < tolerance, err, tolerance);
    }

    // 3. preference loss with fixed negatives (mixed agree/differ entries),
    //    against the frozen-weight oracle
    {
        const Mat<Scalar> z_base = concept_logits(params, x);
        const Mat<Scalar> frozen = gradcheck_detail::complement_mass(z_base, c);
        auto build = [&](Tape<Scalar>& tape, BoundParams<Scalar>& bound) {
            const NodeId z = concept_logits_forward(tape, bound, tape.constant(x));
            return cpo_concept_loss(tape, z, c, negatives, ConceptPrior<Scalar>::uniform(),
                                    Scalar(1));
        };
        const auto analytic = analytic_grads(build);
        auto forward = [&]() {
            const Mat<Scalar> z = concept_logits(params, x);
            return gradcheck_detail::cpo_surrogate_value(z, c, negatives, frozen, nullptr,
                                                         Scalar(1));
        };
        const double err = max_fd_rel_error(params.flat(), analytic, forward, h);
        report.add("gradcheck." + prec + ".cpo_frozen_weight_oracle", err < tolerance, err,
                   tolerance, "negatives held fixed");
    }

    // 4. single-logit preference gradients: differing branch hits
    //    (pi-1)(1-pi), agreeing branch is exactly zero
    {
        const double pi = 0.8;
        const Scalar z0 = static_cast<Scalar>(std::log(pi / (1.0 - pi)));
        Mat<Scalar> zl = Mat<Scalar>::Constant(1, 1, z0);
        Mat<Scalar> one = Mat<Scalar>::Constant(1, 1, Scalar(1));
        Mat<Scalar> zero = Mat<Scalar>::Constant(1, 1, Scalar(0));

        Tape<Scalar> tape;
        const NodeId zid = tape.leaf(zl);
        const NodeId differ = cpo_concept_loss(tape, zid, one, zero,
                                               ConceptPrior<Scalar>::uniform(), Scalar(1));
        const NodeId agree = cpo_concept_loss(tape, zid, one, one,
                                              ConceptPrior<Scalar>::uniform(), Scalar(1));
        const double g_differ = static_cast<double>(tape.backward(differ).at(zid)(0, 0));
        const double g_agree = static_cast<double>(tape.backward(agree).at(zid)(0, 0));
        report.add("gradcheck." + prec + ".cpo_single_logit_value", std::abs(g_differ + 0.04) < 1e-4,
                   g_differ, 1e-4, "expect (pi-1)(1-pi) = -0.04 at pi=0.8");
        report.add("gradcheck." + prec + ".cpo_agreeing_gradient_zero", g_agree == 0.0, g_agree,
                   0.0, "agreeing negative contributes a constant");

        // Frozen-weight finite difference around the differing branch.
        const Mat<Scalar> frozen = gradcheck_detail::complement_mass(zl, one);
        Mat<Scalar> z_var = zl;
        auto forward = [&]() {
            return gradcheck_detail::cpo_surrogate_value(z_var, one, zero, frozen, nullptr,
                                                         Scalar(1));
        };
        std::vector<Mat<Scalar>> analytic{Mat<Scalar>::Constant(1, 1, static_cast<Scalar>(g_differ))};
        const double err = max_fd_rel_error({&z_var}, analytic, forward, h);
        report.add("gradcheck." + prec + ".cpo_single_logit_fd", err < tolerance, err, tolerance);
    }

    // 5. full joint objective, cross-entropy concept loss
    {
        const Scalar lambda = Scalar(5);
        auto build = [&](Tape<Scalar>& tape, BoundParams<Scalar>& bound) {
            const NodeId z = concept_logits_forward(tape, bound, tape.constant(x));
            const NodeId concept_loss = bce_concept_loss(tape, z, c);
            const NodeId ty = task_logits_forward(tape, bound, tape.sigmoid(z));
            const NodeId task_loss = task_cross_entropy(tape, ty, y);
            return joint_objective(tape, task_loss, concept_loss, lambda);
        };
        const auto analytic = analytic_grads(build);
        auto forward = [&]() {
            Tape<Scalar> tape;
            BoundParams<Scalar> bound = bind_params(tape, params);
            return static_cast<double>(tape.value(build(tape, bound))(0, 0));
        };
        const double err = max_fd_rel_error(params.flat(), analytic, forward, h);
        report.add("gradcheck." + prec + ".joint_bce_end_to_end", err < tolerance, err, tolerance);
    }

    // 6. full joint objective with the preference concept loss, frozen-weight
    //    oracle on the concept side
    {
        const Scalar lambda = Scalar(5);
        const Mat<Scalar> z_base = concept_logits(params, x);
        const Mat<Scalar> frozen = gradcheck_detail::complement_mass(z_base, c);
        auto build = [&](Tape<Scalar>& tape, BoundParams<Scalar>& bound) {
            const NodeId z = concept_logits_forward(tape, bound, tape.constant(x));
            const NodeId concept_loss =
                cpo_concept_loss(tape, z, c, negatives, ConceptPrior<Scalar>::uniform(), Scalar(1));
            const NodeId ty = task_logits_forward(tape, bound, tape.sigmoid(z));
            const NodeId task_loss = task_cross_entropy(tape, ty, y);
            return joint_objective(tape, task_loss, concept_loss, lambda);
        };
        const auto analytic = analytic_grads(build);
        auto forward = [&]() {
            const Mat<Scalar> z = concept_logits(params, x);
            Mat<Scalar> probs = z.unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); });
            const Mat<Scalar> ty = task_logits(params, probs);
            const double task = static_cast<double>(task_ce_value(ty, y));
            const double concept = gradcheck_detail::cpo_surrogate_value(z, c, negatives, frozen,
                                                                         nullptr, Scalar(1));
            return task + static_cast<double>(lambda) * concept;
        };
        const double err = max_fd_rel_error(params.flat(), analytic, forward, h);
        report.add("gradcheck." + prec + ".joint_cpo_end_to_end", err < tolerance, err, tolerance);
    }

    return report;
}

// f32 production path plus the f64 verification path.
inline CheckReport grad_check_all(std::uint64_t seed = 23) {
    CheckReport report = grad_check_suite<float>(seed, 1e-3, 1e-3f);
    const CheckReport fine = grad_check_suite<double>(seed, 1e-6, 1e-5);
    report.results.insert(report.results.end(), fine.results.begin(), fine.results.end());
    return report;
}

}  // namespace cpolab

#endif
