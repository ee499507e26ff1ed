#ifndef CPOLAB_EVALUATION_HPP
#define CPOLAB_EVALUATION_HPP

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "cpolab/data.hpp"
#include "cpolab/error.hpp"
#include "cpolab/model.hpp"
#include "cpolab/rng.hpp"

namespace cpolab {

// Argmax with ties broken toward the lowest class index.
template <typename Scalar>
int predict_class(const Mat<Scalar>& task_logits_row) {
    int best = 0;
    for (Eigen::Index j = 1; j < task_logits_row.cols(); ++j)
        if (task_logits_row(0, j) > task_logits_row(0, best)) best = static_cast<int>(j);
    return best;
}

template <typename Scalar>
double accuracy_from_logits(const Mat<Scalar>& logits, const std::vector<int>& y) {
    if (static_cast<Eigen::Index>(y.size()) != logits.rows())
        fail(ErrorKind::shape, "label count does not match logit rows");
    int correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j)
            if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
        if (best == y[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

template <typename Scalar>
double task_accuracy(const CbmParameters<Scalar>& params, const ConceptDataset& ds) {
    const Mat<Scalar> probs = concept_probs(params, ds.X.template cast<Scalar>().eval());
    const Mat<Scalar> logits = task_logits(params, probs);
    return accuracy_from_logits(logits, ds.Y);
}

// Mann-Whitney rank AUC; tied scores count one half.
inline double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (labels[t]) {
            rank_sum_pos += rank[t];
            ++n_pos;
        }
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(ErrorKind::contract, "rank_auc needs both classes");
    return (rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct ConceptAucReport {
    double mean = 0.0;
    std::vector<double> per_concept;   // NaN for excluded concepts
    std::vector<int> excluded;         // concepts with a single clean class
};

// Per-concept AUC of the predicted probabilities against the clean labels,
// averaged over concepts where both classes occur.
template <typename Scalar>
ConceptAucReport mean_concept_auc(const CbmParameters<Scalar>& params, const ConceptDataset& ds) {
    const Mat<Scalar> probs = concept_probs(params, ds.X.template cast<Scalar>().eval());
    ConceptAucReport report;
    report.per_concept.assign(static_cast<std::size_t>(ds.k()),
                              std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int included = 0;
    for (int j = 0; j < ds.k(); ++j) {
        std::vector<double> scores(static_cast<std::size_t>(ds.n()));
        std::vector<int> labels(static_cast<std::size_t>(ds.n()));
        int positives = 0;
        for (int i = 0; i < ds.n(); ++i) {
            scores[static_cast<std::size_t>(i)] = static_cast<double>(probs(i, j));
            labels[static_cast<std::size_t>(i)] = ds.C_clean(i, j) != 0.0f ? 1 : 0;
            positives += labels[static_cast<std::size_t>(i)];
        }
        if (positives == 0 || positives == ds.n()) {
            report.excluded.push_back(j);
            continue;
        }
        const double auc = rank_auc(scores, labels);
        report.per_concept[static_cast<std::size_t>(j)] = auc;
        sum += auc;
        ++included;
    }
    if (included == 0)
        fail(ErrorKind::domain, "concept AUC is undefined: every concept has constant clean labels");
    report.mean = sum / included;
    return report;
}

// Bernoulli variance scaled to [0,1]: 4 c (1 - c).
template <typename Scalar>
Mat<Scalar> uncertainty(const Mat<Scalar>& concept_probs) {
    return (Scalar(4) * concept_probs.array() * (Scalar(1) - concept_probs.array())).matrix();
}

enum class InterventionPolicy { uncertainty, random };

inline const char* policy_name(InterventionPolicy p) {
    return p == InterventionPolicy::uncertainty ? "uncertainty" : "random";
}

struct InterventionCurve {
    InterventionPolicy policy = InterventionPolicy::uncertainty;
    std::vector<std::pair<int, double>> points;  // (groups intervened, task accuracy)

    // Trapezoid area, normalized by the x extent.
    double area() const {
        if (points.size() < 2) return points.empty() ? 0.0 : points[0].second;
        double a = 0.0;
        for (std::size_t i = 1; i < points.size(); ++i)
            a += 0.5 * (points[i].second + points[i - 1].second) *
                 (points[i].first - points[i - 1].first);
        return a / (points.back().first - points.front().first);
    }
};

// Replaces whole concept groups with clean ground truth, most uncertain
// group first (or in random order), re-running the task head after each
// step. The ranking is fixed from the original forward pass.
template <typename Scalar>
InterventionCurve intervene(const CbmParameters<Scalar>& params, const ConceptDataset& ds,
                            InterventionPolicy policy, int budget, std::uint64_t seed) {
    if (ds.concept_groups.empty()) fail(ErrorKind::contract, "intervention requires concept groups");
    const int num_groups = static_cast<int>(ds.concept_groups.size());
    if (budget < 0 || budget > num_groups)
        fail(ErrorKind::contract, "budget must lie in [0, number of groups]");

    const Mat<Scalar> probs = concept_probs(params, ds.X.template cast<Scalar>().eval());
    const Mat<Scalar> sigma = uncertainty(probs);

    // Per-sample group order.
    Rng rng(seed);
    std::vector<std::vector<int>> order(static_cast<std::size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) {
        std::vector<int> groups(static_cast<std::size_t>(num_groups));
        for (int g = 0; g < num_groups; ++g) groups[static_cast<std::size_t>(g)] = g;
        if (policy == InterventionPolicy::random) {
            rng.shuffle(groups);
        } else {
            std::vector<double> score(static_cast<std::size_t>(num_groups));
            for (int g = 0; g < num_groups; ++g) {
                double s = 0.0;
                for (int j : ds.concept_groups[static_cast<std::size_t>(g)])
                    s += static_cast<double>(sigma(i, j));
                score[static_cast<std::size_t>(g)] =
                    s / static_cast<double>(ds.concept_groups[static_cast<std::size_t>(g)].size());
            }
            std::stable_sort(groups.begin(), groups.end(),
                             [&](int a, int b) { return score[static_cast<std::size_t>(a)] >
                                                        score[static_cast<std::size_t>(b)]; });
        }
        order[static_cast<std::size_t>(i)] = std::move(groups);
    }

    InterventionCurve curve;
    curve.policy = policy;
    Mat<Scalar> current = probs;
    for (int step = 0; step <= budget; ++step) {
        if (step > 0) {
            for (int i = 0; i < ds.n(); ++i) {
                const int g = order[static_cast<std::size_t>(i)][static_cast<std::size_t>(step - 1)];
                for (int j : ds.concept_groups[static_cast<std::size_t>(g)])
                    current(i, j) = static_cast<Scalar>(ds.C_clean(i, j));
            }
        }
        const Mat<Scalar> logits = task_logits(params, current);
        curve.points.emplace_back(step, accuracy_from_logits(logits, ds.Y));
    }
    return curve;
}

struct DeltaAugPoint {
    double occlusion_size = 0.0;
    int num_correct = 0;          // entries whose rounded prediction matched clean
    double mean_delta = 0.0;      // certainty(before) - certainty(after)
    double frac_above_zero = 0.0;
    std::vector<double> deltas;   // raw distribution
};

struct UncertaintyReport {
    std::vector<DeltaAugPoint> points;
};

// Certainty change on correctly predicted concepts under growing occlusion.
template <typename Scalar>
UncertaintyReport delta_aug_report(const CbmParameters<Scalar>& params, const ConceptDataset& ds,
                                   const std::vector<double>& occlusion_sizes, std::uint64_t seed) {
    const Mat<Scalar> probs_before = concept_probs(params, ds.X.template cast<Scalar>().eval());
    const Mat<Scalar> certainty_before =
        (Mat<Scalar>::Ones(probs_before.rows(), probs_before.cols()) - uncertainty(probs_before))
            .eval();

    UncertaintyReport report;
    std::uint64_t salt = 0;
    for (double size : occlusion_sizes) {
        if (size < 0.0 || size > 1.0) fail(ErrorKind::config, "occlusion size must lie in [0,1]");
        const ConceptDataset occluded = occlude(ds, size, seed + salt++);
        const Mat<Scalar> probs_after = concept_probs(params, occluded.X.template cast<Scalar>().eval());
        const Mat<Scalar> certainty_after =
            (Mat<Scalar>::Ones(probs_after.rows(), probs_after.cols()) - uncertainty(probs_after))
                .eval();

        DeltaAugPoint point;
        point.occlusion_size = size;
        double sum = 0.0;
        int above = 0;
        for (int i = 0; i < ds.n(); ++i) {
            for (int j = 0; j < ds.k(); ++j) {
                const int predicted = probs_before(i, j) > Scalar(0.5) ? 1 : 0;
                if (predicted != (ds.C_clean(i, j) != 0.0f ? 1 : 0)) continue;
                const double delta =
                    static_cast<double>(certainty_before(i, j)) - static_cast<double>(certainty_after(i, j));
                point.deltas.push_back(delta);
                sum += delta;
                if (delta > 0.0) ++above;
            }
        }
        point.num_correct = static_cast<int>(point.deltas.size());
        if (point.num_correct > 0) {
            point.mean_delta = sum / point.num_correct;
            point.frac_above_zero = static_cast<double>(above) / point.num_correct;
        }
        report.points.push_back(std::move(point));
    }
    return report;
}

}  // namespace cpolab

#endif
