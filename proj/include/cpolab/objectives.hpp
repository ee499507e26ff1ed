#ifndef CPOLAB_OBJECTIVES_HPP
#define CPOLAB_OBJECTIVES_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/error.hpp"
#include "cpolab/rng.hpp"

namespace cpolab {

enum class PriorKind { uniform, checkpoint };

template <typename Scalar>
struct CpoConfig {
    Scalar beta = Scalar(1);
    PriorKind prior = PriorKind::uniform;
    Scalar gumbel_temperature = Scalar(1);
    int samples_per_image = 1;

    void validate() const {
        if (!(beta > Scalar(0))) fail(ErrorKind::config, "cpo beta must be positive");
        if (!(gumbel_temperature > Scalar(0))) fail(ErrorKind::config, "gumbel temperature must be positive");
        if (samples_per_image < 1) fail(ErrorKind::config, "samples_per_image must be >= 1");
    }
};

namespace detail {

template <typename Scalar>
void check_binary(const Mat<Scalar>& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != Scalar(0) && m(i, j) != Scalar(1))
                fail(ErrorKind::contract, std::string(what) + " must be binary, found " +
                                              std::to_string(static_cast<double>(m(i, j))) + " at (" +
                                              std::to_string(i) + "," + std::to_string(j) + ")");
}

}  // namespace detail

namespace detail {

// Counts loss-bearing entries; a null mask selects everything.
template <typename Scalar>
Scalar masked_count(const Mat<Scalar>& like, const Mat<Scalar>* mask) {
    if (!mask) return static_cast<Scalar>(like.size());
    if (mask->rows() != like.rows() || mask->cols() != like.cols())
        fail(ErrorKind::shape, "loss mask shape mismatch");
    Scalar count = Scalar(0);
    for (Eigen::Index i = 0; i < mask->rows(); ++i)
        for (Eigen::Index j = 0; j < mask->cols(); ++j)
            if ((*mask)(i, j) != Scalar(0)) count += Scalar(1);
    if (count == Scalar(0)) fail(ErrorKind::contract, "loss mask selects no entries");
    return count;
}

template <typename Scalar>
bool masked_in(const Mat<Scalar>* mask, Eigen::Index i, Eigen::Index j) {
    return !mask || (*mask)(i, j) != Scalar(0);
}

}  // namespace detail

// Mean fused binary cross entropy over all selected entries, computed from
// logits. A mask (same shape, nonzero = included) restricts the mean to a
// concept subset.
template <typename Scalar>
NodeId bce_concept_loss(Tape<Scalar>& tape, NodeId concept_logits, const Mat<Scalar>& labels,
                        const Mat<Scalar>* mask = nullptr) {
    const Mat<Scalar>& z = tape.value(concept_logits);
    if (z.rows() != labels.rows() || z.cols() != labels.cols())
        fail(ErrorKind::shape, "bce labels shape mismatch");
    detail::check_binary(labels, "concept labels");
    const Scalar inv_n = Scalar(1) / detail::masked_count(z, mask);
    Scalar total = Scalar(0);
    Mat<Scalar> coeff = Mat<Scalar>::Zero(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            if (!detail::masked_in(mask, i, j)) continue;
            total += detail::stable_bce_logit(z(i, j), labels(i, j));
            coeff(i, j) = (detail::stable_sigmoid(z(i, j)) - labels(i, j)) * inv_n;
        }
    }
    Mat<Scalar> out(1, 1);
    out(0, 0) = total * inv_n;
    return tape.fused(concept_logits, std::move(out), std::move(coeff));
}

// Mean negative log-softmax at the true class. Labels are 0-based.
template <typename Scalar>
NodeId task_cross_entropy(Tape<Scalar>& tape, NodeId task_logits, const std::vector<int>& labels) {
    const Mat<Scalar>& z = tape.value(task_logits);
    if (static_cast<Eigen::Index>(labels.size()) != z.rows())
        fail(ErrorKind::shape, "label count does not match logit rows");
    const Eigen::Index n = z.rows();
    const Eigen::Index m = z.cols();
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    Scalar total = Scalar(0);
    Mat<Scalar> coeff(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= m)
            fail(ErrorKind::domain, "task label " + std::to_string(y) + " out of range [0," +
                                        std::to_string(m) + ") at row " + std::to_string(i));
        const Scalar zmax = z.row(i).maxCoeff();
        Scalar sum = Scalar(0);
        for (Eigen::Index j = 0; j < m; ++j) sum += std::exp(z(i, j) - zmax);
        const Scalar lse = zmax + std::log(sum);
        total += lse - z(i, y);
        for (Eigen::Index j = 0; j < m; ++j) {
            const Scalar p = std::exp(z(i, j) - lse);
            coeff(i, j) = (p - (j == y ? Scalar(1) : Scalar(0))) * inv_n;
        }
    }
    Mat<Scalar> out(1, 1);
    out(0, 0) = total * inv_n;
    return tape.fused(task_logits, std::move(out), std::move(coeff));
}

// Hard negatives drawn per concept from the policy, with a straight-through
// gradient path back to the logits.
template <typename Scalar>
struct SampledConcepts {
    Mat<Scalar> hard;  // binary n x k
    NodeId node = -1;  // tape node carrying the pass-through coefficients
};

// Binary Gumbel-softmax over the two-logit vector (z, 0): the relaxed value
// is s = sigmoid((z + g1 - g0)/tau); forward emits h = 1[s > 0.5] and
// backward treats dh/dz as ds/dz.
template <typename Scalar>
SampledConcepts<Scalar> sample_negatives(Tape<Scalar>& tape, NodeId concept_logits, Scalar tau,
                                         Rng& rng) {
    if (!(tau > Scalar(0))) fail(ErrorKind::config, "gumbel temperature must be positive");
    const Mat<Scalar>& z = tape.value(concept_logits);
    Mat<Scalar> hard(z.rows(), z.cols());
    Mat<Scalar> coeff(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const Scalar g1 = static_cast<Scalar>(rng.gumbel());
            const Scalar g0 = static_cast<Scalar>(rng.gumbel());
            const Scalar s = detail::stable_sigmoid((z(i, j) + g1 - g0) / tau);
            hard(i, j) = s > Scalar(0.5) ? Scalar(1) : Scalar(0);
            coeff(i, j) = s * (Scalar(1) - s) / tau;
        }
    }
    SampledConcepts<Scalar> out;
    out.node = tape.fused(concept_logits, hard, std::move(coeff));
    out.hard = std::move(hard);
    return out;
}

// Prior over binary concepts, expressed through per-entry prior logits.
// Uniform means zero logits everywhere; a checkpoint prior supplies the
// frozen policy's concept logits for the same inputs.
template <typename Scalar>
struct ConceptPrior {
    static ConceptPrior uniform() { return ConceptPrior{}; }

    static ConceptPrior from_logits(Mat<Scalar> logits) {
        if (!logits.allFinite()) fail(ErrorKind::domain, "prior logits must be finite");
        ConceptPrior p;
        p.logits_ = std::move(logits);
        return p;
    }

    // Constant Bernoulli prior; q outside (0,1) would put zero mass on a
    // queried concept value.
    static ConceptPrior constant(Scalar q, Eigen::Index rows, Eigen::Index cols) {
        if (!(q > Scalar(0) && q < Scalar(1)))
            fail(ErrorKind::domain, "constant prior probability must lie in (0,1), got " +
                                        std::to_string(static_cast<double>(q)));
        return from_logits(Mat<Scalar>::Constant(rows, cols, std::log(q / (Scalar(1) - q))));
    }

    bool is_uniform() const { return !logits_.has_value(); }

    const Mat<Scalar>& logits() const { return *logits_; }

  private:
    std::optional<Mat<Scalar>> logits_;
};

// Concept preference loss over a batch of realized negatives.
//
// Forward, per entry: -log sigmoid(beta * [log pi(c)/pi0(c) - log pi(c')/pi0(c')]),
// which reduces exactly to beta*(c - c')*(z - z0) inside the sigmoid because
// the concepts are binary and treated independently. Entries with c' == c
// contribute the constant log 2.
//
// Backward, per entry: the expected gradient over the negative sampling,
// gated on the realized draw. Entries with c' == c get an exact zero; the
// rest get (sigmoid(delta) - 1) * beta * (2c - 1) * pi(1-c|x), i.e. the
// cross-entropy gradient damped by the policy's mass on the complement.
// The sampling weight is treated as a constant of the graph.
template <typename Scalar>
NodeId cpo_concept_loss(Tape<Scalar>& tape, NodeId concept_logits, const Mat<Scalar>& labels,
                        const Mat<Scalar>& negatives, const ConceptPrior<Scalar>& prior,
                        Scalar beta, const Mat<Scalar>* mask = nullptr) {
    if (!(beta > Scalar(0))) fail(ErrorKind::config, "cpo beta must be positive");
    const Mat<Scalar>& z = tape.value(concept_logits);
    if (z.rows() != labels.rows() || z.cols() != labels.cols())
        fail(ErrorKind::shape, "cpo labels shape mismatch");
    if (z.rows() != negatives.rows() || z.cols() != negatives.cols())
        fail(ErrorKind::shape, "cpo negatives shape mismatch");
    detail::check_binary(labels, "concept labels");
    detail::check_binary(negatives, "sampled negatives");
    if (!prior.is_uniform() &&
        (prior.logits().rows() != z.rows() || prior.logits().cols() != z.cols()))
        fail(ErrorKind::shape, "prior logits shape mismatch");

    const Scalar inv_n = Scalar(1) / detail::masked_count(z, mask);
    Scalar total = Scalar(0);
    Mat<Scalar> coeff = Mat<Scalar>::Zero(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            if (!detail::masked_in(mask, i, j)) continue;
            const Scalar c = labels(i, j);
            const Scalar h = negatives(i, j);
            const Scalar z0 = prior.is_uniform() ? Scalar(0) : prior.logits()(i, j);
            const Scalar delta = beta * (c - h) * (z(i, j) - z0);
            total += -detail::stable_log_sigmoid(delta);
            if (c != h) {
                const Scalar complement_mass = detail::stable_sigmoid((Scalar(1) - Scalar(2) * c) * z(i, j));
                coeff(i, j) = -detail::stable_sigmoid(-delta) * beta * (Scalar(2) * c - Scalar(1)) *
                              complement_mass * inv_n;
            }
        }
    }
    Mat<Scalar> out(1, 1);
    out(0, 0) = total * inv_n;
    return tape.fused(concept_logits, std::move(out), std::move(coeff));
}

// Literal evaluation of the preference objective through per-value log
// probabilities. Slower and less stable than the tape path; kept as an
// independent route for verification.
template <typename Scalar>
Scalar cpo_loss_reference(const Mat<Scalar>& logits, const Mat<Scalar>& labels,
                          const Mat<Scalar>& negatives, const Mat<Scalar>& prior_logits,
                          Scalar beta) {
    auto log_prob = [](Scalar z, Scalar v) {
        return v * detail::stable_log_sigmoid(z) + (Scalar(1) - v) * detail::stable_log_sigmoid(-z);
    };
    Scalar total = Scalar(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const Scalar c = labels(i, j);
            const Scalar h = negatives(i, j);
            const Scalar ratio_c = log_prob(logits(i, j), c) - log_prob(prior_logits(i, j), c);
            const Scalar ratio_h = log_prob(logits(i, j), h) - log_prob(prior_logits(i, j), h);
            total += -detail::stable_log_sigmoid(beta * (ratio_c - ratio_h));
        }
    }
    return total / static_cast<Scalar>(logits.size());
}

template <typename Scalar>
NodeId joint_objective(Tape<Scalar>& tape, NodeId task_loss, NodeId concept_loss, Scalar lambda) {
    if (lambda < Scalar(0)) fail(ErrorKind::config, "lambda must be non-negative");
    return tape.add(task_loss, tape.scalar_mul(concept_loss, lambda));
}

// --- analytic per-logit gradient factors ---------------------------------
//
// Expected gradients of the mean concept losses with respect to each logit,
// before the 1/(n*k) normalization. These back the gradient-trace machinery
// and the per-logit bound checks.

template <typename Scalar>
Mat<Scalar> bce_logit_grad_factors(const Mat<Scalar>& logits, const Mat<Scalar>& labels) {
    Mat<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            out(i, j) = detail::stable_sigmoid(logits(i, j)) - labels(i, j);
    return out;
}

// (pi - c) scaled by the policy's mass on the complement of the label; the
// expectation over negative sampling of the realized gradient.
template <typename Scalar>
Mat<Scalar> cpo_logit_grad_factors(const Mat<Scalar>& logits, const Mat<Scalar>& labels) {
    Mat<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const Scalar c = labels(i, j);
            const Scalar complement_mass =
                detail::stable_sigmoid((Scalar(1) - Scalar(2) * c) * logits(i, j));
            out(i, j) = (detail::stable_sigmoid(logits(i, j)) - c) * complement_mass;
        }
    return out;
}

// Closed-form expectation of the preference loss over the negative sampling.
// Deterministic, so it doubles as a validation metric.
template <typename Scalar>
Scalar expected_cpo_loss(const Mat<Scalar>& logits, const Mat<Scalar>& labels,
                         const Mat<Scalar>* prior_logits, Scalar beta,
                         const Mat<Scalar>* mask = nullptr) {
    const Scalar log2 = std::log(Scalar(2));
    const Scalar inv_n = Scalar(1) / detail::masked_count(logits, mask);
    Scalar total = Scalar(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            if (!detail::masked_in(mask, i, j)) continue;
            const Scalar c = labels(i, j);
            const Scalar z = logits(i, j);
            const Scalar z0 = prior_logits ? (*prior_logits)(i, j) : Scalar(0);
            const Scalar label_mass = detail::stable_sigmoid((Scalar(2) * c - Scalar(1)) * z);
            const Scalar delta = beta * (Scalar(2) * c - Scalar(1)) * (z - z0);
            total += (Scalar(1) - label_mass) * -detail::stable_log_sigmoid(delta) + label_mass * log2;
        }
    }
    return total * inv_n;
}

// Mean fused binary cross entropy as a plain value (no tape).
template <typename Scalar>
Scalar bce_loss_value(const Mat<Scalar>& logits, const Mat<Scalar>& labels,
                      const Mat<Scalar>* mask = nullptr) {
    const Scalar inv_n = Scalar(1) / detail::masked_count(logits, mask);
    Scalar total = Scalar(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            if (detail::masked_in(mask, i, j))
                total += detail::stable_bce_logit(logits(i, j), labels(i, j));
    return total * inv_n;
}

// Mean negative log-softmax as a plain value (no tape).
template <typename Scalar>
Scalar task_ce_value(const Mat<Scalar>& logits, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
        fail(ErrorKind::shape, "label count does not match logit rows");
    Scalar total = Scalar(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= logits.cols()) fail(ErrorKind::domain, "task label out of range");
        const Scalar zmax = logits.row(i).maxCoeff();
        Scalar sum = Scalar(0);
        for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(logits(i, j) - zmax);
        total += zmax + std::log(sum) - logits(i, y);
    }
    return total / static_cast<Scalar>(logits.rows());
}

}  // namespace cpolab

#endif
