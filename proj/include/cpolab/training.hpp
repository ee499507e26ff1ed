#ifndef CPOLAB_TRAINING_HPP
#define CPOLAB_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/data.hpp"
#include "cpolab/error.hpp"
#include "cpolab/evaluation.hpp"
#include "cpolab/model.hpp"
#include "cpolab/objectives.hpp"

namespace cpolab {

enum class ObjectiveKind { bce, cpo };

inline const char* objective_name(ObjectiveKind o) {
    return o == ObjectiveKind::bce ? "bce" : "cpo";
}

enum class TrainMode { joint, sequential };

template <typename Scalar>
struct TrainConfig {
    ObjectiveKind objective = ObjectiveKind::bce;
    CpoConfig<Scalar> cpo;
    Scalar lambda = Scalar(5);
    Scalar lr = Scalar(0.1);
    Scalar momentum = Scalar(0.9);
    int batch_size = 128;
    int max_epochs = 150;
    int patience = 15;
    Scalar randint_fraction = Scalar(0);
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::joint;
    // Record clean-vs-noisy gradient distances on the full train split every
    // N optimizer steps; 0 disables tracing.
    int grad_trace_every = 0;

    void validate() const {
        if (lambda < Scalar(0)) fail(ErrorKind::config, "lambda must be non-negative");
        if (!(lr > Scalar(0))) fail(ErrorKind::config, "learning rate must be positive");
        if (!(momentum >= Scalar(0) && momentum < Scalar(1)))
            fail(ErrorKind::config, "momentum must lie in [0,1)");
        if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
        if (max_epochs < 1) fail(ErrorKind::config, "max_epochs must be >= 1");
        if (patience < 1 || patience > max_epochs)
            fail(ErrorKind::config, "patience must lie in [1, max_epochs]");
        if (randint_fraction < Scalar(0) || randint_fraction > Scalar(1))
            fail(ErrorKind::config, "randint_fraction must lie in [0,1]");
        if (grad_trace_every < 0) fail(ErrorKind::config, "grad_trace_every must be >= 0");
        cpo.validate();
    }
};

// RandInt defaults to a quarter of the concepts for the preference loss and
// off for plain cross entropy.
template <typename Scalar>
Scalar default_randint_fraction(ObjectiveKind objective) {
    return objective == ObjectiveKind::cpo ? Scalar(0.25) : Scalar(0);
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_task_loss = 0.0;
    double val_concept_loss = 0.0;
    double val_accuracy = 0.0;
};

struct GradTraceRecord {
    int step = 0;
    double bce_sq_distance = 0.0;
    double cpo_sq_distance = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;     // 1-based epoch with the lowest validation loss
    int stopped_epoch = -1;  // last epoch that ran
    std::vector<GradTraceRecord> traces;
};

template <typename Scalar>
struct TrainResult {
    CbmParameters<Scalar> params;
    TrainHistory history;
};

// Per-sample replacement mask: ceil(fraction*k) uniformly chosen concepts
// per row get their training label passed straight to the task head.
template <typename Scalar>
Mat<Scalar> randint_mask(int n, int k, Scalar fraction, Rng& rng) {
    if (fraction < Scalar(0) || fraction > Scalar(1))
        fail(ErrorKind::config, "randint fraction must lie in [0,1]");
    Mat<Scalar> mask = Mat<Scalar>::Zero(n, k);
    const int replace = static_cast<int>(std::ceil(static_cast<double>(fraction) * k));
    if (replace == 0) return mask;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
        rng.shuffle(idx);
        for (int r = 0; r < replace; ++r) mask(i, idx[static_cast<std::size_t>(r)]) = Scalar(1);
    }
    return mask;
}

// probs*(1-mask) + labels*mask on the tape; gradient only flows through the
// kept entries.
template <typename Scalar>
NodeId apply_randint(Tape<Scalar>& tape, NodeId probs, const Mat<Scalar>& labels,
                     const Mat<Scalar>& mask) {
    const Mat<Scalar>& p = tape.value(probs);
    if (mask.rows() != p.rows() || mask.cols() != p.cols())
        fail(ErrorKind::shape, "randint mask shape mismatch");
    const NodeId keep = tape.constant(Mat<Scalar>::Ones(mask.rows(), mask.cols()) - mask);
    const NodeId replaced = tape.constant(labels.cwiseProduct(mask));
    return tape.add(tape.mul(probs, keep), replaced);
}

namespace trainutil {

// Selected-concept mask broadcast over a batch; empty selection means all.
template <typename Scalar>
Mat<Scalar> concept_column_mask(int n, int k, const std::vector<int>& selected) {
    Mat<Scalar> mask = Mat<Scalar>::Zero(n, k);
    for (int j : selected) {
        if (j < 0 || j >= k) fail(ErrorKind::config, "selected concept index out of range");
        mask.col(j).setConstant(Scalar(1));
    }
    return mask;
}

template <typename Scalar>
NodeId concept_loss_node(Tape<Scalar>& tape, NodeId concept_logits, const Mat<Scalar>& labels,
                         const TrainConfig<Scalar>& cfg, const CbmParameters<Scalar>* prior_params,
                         const Mat<Scalar>& batch_x, Rng& gumbel_rng, const Mat<Scalar>* mask) {
    if (cfg.objective == ObjectiveKind::bce) return bce_concept_loss(tape, concept_logits, labels, mask);

    ConceptPrior<Scalar> prior = ConceptPrior<Scalar>::uniform();
    if (cfg.cpo.prior == PriorKind::checkpoint) {
        if (!prior_params)
            fail(ErrorKind::config, "checkpoint prior requested but no prior parameters given");
        prior = ConceptPrior<Scalar>::from_logits(cpolab::concept_logits(*prior_params, batch_x));
    }
    NodeId total = -1;
    for (int s = 0; s < cfg.cpo.samples_per_image; ++s) {
        SampledConcepts<Scalar> neg =
            sample_negatives(tape, concept_logits, cfg.cpo.gumbel_temperature, gumbel_rng);
        NodeId one = cpo_concept_loss(tape, concept_logits, labels, neg.hard, prior, cfg.cpo.beta, mask);
        total = s == 0 ? one : tape.add(total, one);
    }
    if (cfg.cpo.samples_per_image > 1)
        total = tape.scalar_mul(total, Scalar(1) / static_cast<Scalar>(cfg.cpo.samples_per_image));
    return total;
}

// Deterministic validation losses; the preference loss uses its closed-form
// expectation so early stopping never depends on sampling noise.
template <typename Scalar>
struct ValLosses {
    double task = 0.0;
    double concept_loss = 0.0;
    double accuracy = 0.0;
};

template <typename Scalar>
ValLosses<Scalar> validation_losses(const CbmParameters<Scalar>& params, const ConceptDataset& val,
                                    const TrainConfig<Scalar>& cfg,
                                    const CbmParameters<Scalar>* prior_params,
                                    const std::vector<int>& selected_concepts) {
    const Mat<Scalar> x = val.X.template cast<Scalar>();
    const Mat<Scalar> z = cpolab::concept_logits(params, x);
    const Mat<Scalar> probs = z.unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); });
    const Mat<Scalar> labels = val.C.template cast<Scalar>();
    Mat<Scalar> mask;
    const Mat<Scalar>* mask_ptr = nullptr;
    if (!selected_concepts.empty()) {
        mask = concept_column_mask<Scalar>(val.n(), val.k(), selected_concepts);
        mask_ptr = &mask;
    }
    ValLosses<Scalar> out;
    if (cfg.objective == ObjectiveKind::bce) {
        out.concept_loss = static_cast<double>(bce_loss_value(z, labels, mask_ptr));
    } else {
        Mat<Scalar> prior_z;
        const Mat<Scalar>* prior_ptr = nullptr;
        if (cfg.cpo.prior == PriorKind::checkpoint) {
            if (!prior_params)
                fail(ErrorKind::config, "checkpoint prior requested but no prior parameters given");
            prior_z = cpolab::concept_logits(*prior_params, x);
            prior_ptr = &prior_z;
        }
        out.concept_loss =
            static_cast<double>(expected_cpo_loss(z, labels, prior_ptr, cfg.cpo.beta, mask_ptr));
    }
    const Mat<Scalar> ty = task_logits(params, probs);
    out.task = static_cast<double>(task_ce_value(ty, val.Y));
    out.accuracy = accuracy_from_logits(ty, val.Y);
    return out;
}

inline std::vector<std::vector<int>> batch_indices(const std::vector<int>& perm, int batch_size) {
    std::vector<std::vector<int>> out;
    for (std::size_t at = 0; at < perm.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(perm.size(), at + static_cast<std::size_t>(batch_size));
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(at),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

}  // namespace trainutil

// Clean-vs-noisy expected gradient distances for both concept losses, taken
// with respect to the concept predictor parameters on a fixed batch. The
// per-logit seeds are the analytic expected factors of the mean losses.
template <typename Scalar>
GradTraceRecord gradient_trace_distances(const CbmParameters<Scalar>& params, const MatF& x,
                                         const MatF& c_noisy, const MatF& c_clean) {
    Tape<Scalar> tape;
    BoundParams<Scalar> bound = bind_params(tape, params);
    const NodeId xb = tape.constant(x.template cast<Scalar>());
    const NodeId zid = concept_logits_forward(tape, bound, xb);
    const Mat<Scalar>& z = tape.value(zid);
    const Scalar inv_nk = Scalar(1) / static_cast<Scalar>(z.size());

    const Mat<Scalar> noisy = c_noisy.template cast<Scalar>();
    const Mat<Scalar> clean = c_clean.template cast<Scalar>();

    const std::size_t predictor_count = bound.flat_ids.size() - 2;
    auto grads_for = [&](const Mat<Scalar>& factors) {
        const NodeId pseudo = tape.fused(zid, Mat<Scalar>::Zero(1, 1), factors * inv_nk);
        GradientMap<Scalar> g = tape.backward(pseudo);
        std::vector<Mat<Scalar>> out;
        for (std::size_t i = 0; i < predictor_count; ++i) out.push_back(g.at(bound.flat_ids[i]));
        return out;
    };
    auto sq_distance = [](const std::vector<Mat<Scalar>>& a, const std::vector<Mat<Scalar>>& b) {
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const MatD diff = a[i].template cast<double>() - b[i].template cast<double>();
            total += diff.squaredNorm();
        }
        return total;
    };

    GradTraceRecord rec;
    rec.bce_sq_distance = sq_distance(grads_for(bce_logit_grad_factors(z, clean)),
                                      grads_for(bce_logit_grad_factors(z, noisy)));
    rec.cpo_sq_distance = sq_distance(grads_for(cpo_logit_grad_factors(z, clean)),
                                      grads_for(cpo_logit_grad_factors(z, noisy)));
    return rec;
}

namespace trainutil {

// Shared epoch-driving loop. `concept_only` restricts both the loss and the
// optimizer to the concept predictor and skips the task head entirely.
template <typename Scalar>
TrainResult<Scalar> run_training(const CbmArchitecture& arch, CbmParameters<Scalar> params,
                                 const TrainConfig<Scalar>& cfg, const ConceptDataset& train,
                                 const ConceptDataset& val, bool concept_only,
                                 const CbmParameters<Scalar>* prior_params,
                                 const std::vector<int>& selected_concepts) {
    cfg.validate();
    arch.validate();
    if (train.d() != arch.input_dim || train.k() != arch.num_concepts)
        fail(ErrorKind::config, "dataset does not match the architecture");
    if (cfg.grad_trace_every > 0 && !train.clean_shadow_present)
        fail(ErrorKind::contract, "gradient traces need the clean concept shadow");

    Rng root(cfg.seed);
    Rng shuffle_rng = root.fork(1);
    Rng gumbel_rng = root.fork(2);
    Rng randint_rng = root.fork(3);

    SgdOptimizer<Scalar> opt(cfg.lr, cfg.momentum);
    CbmParameters<Scalar> best = params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainHistory history;
    int global_step = 0;

    const MatF train_c = train.C;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const std::vector<int> perm = shuffle_rng.permutation(train.n());
        double epoch_loss = 0.0;
        int batches = 0;
        for (const auto& batch_rows : batch_indices(perm, cfg.batch_size)) {
            const ConceptDataset batch = train.take(batch_rows);
            const Mat<Scalar> bx = batch.X.template cast<Scalar>();
            const Mat<Scalar> bc = batch.C.template cast<Scalar>();

            Tape<Scalar> tape;
            BoundParams<Scalar> bound = bind_params(tape, params);
            const NodeId x = tape.constant(bx);
            const NodeId z = concept_logits_forward(tape, bound, x);

            Mat<Scalar> mask;
            const Mat<Scalar>* mask_ptr = nullptr;
            if (!selected_concepts.empty()) {
                mask = concept_column_mask<Scalar>(batch.n(), batch.k(), selected_concepts);
                mask_ptr = &mask;
            }
            const NodeId concept_loss =
                concept_loss_node(tape, z, bc, cfg, prior_params, bx, gumbel_rng, mask_ptr);

            NodeId loss;
            if (concept_only) {
                loss = concept_loss;
            } else {
                NodeId probs = tape.sigmoid(z);
                if (cfg.randint_fraction > Scalar(0)) {
                    const Mat<Scalar> rmask =
                        randint_mask<Scalar>(batch.n(), batch.k(), cfg.randint_fraction, randint_rng);
                    probs = apply_randint(tape, probs, bc, rmask);
                }
                const NodeId ty = task_logits_forward(tape, bound, probs);
                const NodeId task_loss = task_cross_entropy(tape, ty, batch.Y);
                loss = joint_objective(tape, task_loss, concept_loss, cfg.lambda);
            }

            const double loss_value = static_cast<double>(tape.value(loss)(0, 0));
            if (!std::isfinite(loss_value))
                fail(ErrorKind::numeric, "training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch) + " step " +
                                             std::to_string(global_step));
            epoch_loss += loss_value;
            ++batches;

            GradientMap<Scalar> grads = tape.backward(loss);
            std::vector<Mat<Scalar>*> targets =
                concept_only ? params.concept_predictor() : params.flat();
            std::vector<const Mat<Scalar>*> gptrs;
            for (std::size_t i = 0; i < targets.size(); ++i)
                gptrs.push_back(&grads.at(bound.flat_ids[i]));
            opt.step(targets, gptrs);
            ++global_step;

            if (cfg.grad_trace_every > 0 && global_step % cfg.grad_trace_every == 0) {
                GradTraceRecord rec =
                    gradient_trace_distances(params, train.X, train.C, train.C_clean);
                rec.step = global_step;
                history.traces.push_back(rec);
            }
        }

        const ValLosses<Scalar> v =
            validation_losses(params, val, cfg, prior_params, selected_concepts);
        const double val_total =
            concept_only ? v.concept_loss
                         : v.task + static_cast<double>(cfg.lambda) * v.concept_loss;
        history.epochs.push_back({epoch, epoch_loss / std::max(batches, 1), val_total, v.task,
                                  v.concept_loss, v.accuracy});
        history.stopped_epoch = epoch;
        if (val_total < best_val) {
            best_val = val_total;
            best = params;
            history.best_epoch = epoch;
        } else if (epoch - history.best_epoch >= cfg.patience) {
            break;
        }
    }
    return {std::move(best), std::move(history)};
}

}  // namespace trainutil

// End-to-end joint training; returns the best-validation parameters.
template <typename Scalar>
TrainResult<Scalar> train_joint(const CbmArchitecture& arch, const TrainConfig<Scalar>& cfg,
                                const ConceptDataset& train, const ConceptDataset& val,
                                const CbmParameters<Scalar>* cpo_prior_params = nullptr) {
    CbmParameters<Scalar> params = init_params<Scalar>(arch, cfg.seed);
    return trainutil::run_training(arch, std::move(params), cfg, train, val, false,
                                   cpo_prior_params, {});
}

// Stage 1 of sequential training: concept predictor alone on the concept loss.
template <typename Scalar>
TrainResult<Scalar> train_concept_predictor(const CbmArchitecture& arch,
                                            const TrainConfig<Scalar>& cfg,
                                            const ConceptDataset& train, const ConceptDataset& val,
                                            CbmParameters<Scalar> params,
                                            const CbmParameters<Scalar>* prior_params = nullptr,
                                            const std::vector<int>& selected_concepts = {}) {
    return trainutil::run_training(arch, std::move(params), cfg, train, val, true, prior_params,
                                   selected_concepts);
}

// Stage 2 of sequential training: the frozen predictor's probabilities feed
// a task head trained on cross entropy. Stage-1 parameters are not touched.
template <typename Scalar>
TrainResult<Scalar> train_task_head(const CbmArchitecture& arch, const TrainConfig<Scalar>& cfg,
                                    const ConceptDataset& train, const ConceptDataset& val,
                                    CbmParameters<Scalar> params) {
    cfg.validate();
    arch.validate();
    Rng root(cfg.seed);
    Rng shuffle_rng = root.fork(4);
    Rng randint_rng = root.fork(5);

    const Mat<Scalar> train_probs = concept_probs(params, train.X.template cast<Scalar>().eval());
    const Mat<Scalar> val_probs = concept_probs(params, val.X.template cast<Scalar>().eval());

    SgdOptimizer<Scalar> opt(cfg.lr, cfg.momentum);
    CbmParameters<Scalar> best = params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainHistory history;
    int global_step = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const std::vector<int> perm = shuffle_rng.permutation(train.n());
        double epoch_loss = 0.0;
        int batches = 0;
        for (const auto& rows : trainutil::batch_indices(perm, cfg.batch_size)) {
            Mat<Scalar> probs(rows.size(), train.k());
            Mat<Scalar> labels(rows.size(), train.k());
            std::vector<int> y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                probs.row(static_cast<Eigen::Index>(i)) = train_probs.row(rows[i]);
                labels.row(static_cast<Eigen::Index>(i)) =
                    train.C.row(rows[i]).template cast<Scalar>();
                y[i] = train.Y[static_cast<std::size_t>(rows[i])];
            }
            Tape<Scalar> tape;
            const NodeId tw = tape.leaf(params.task_head.weight);
            const NodeId tb = tape.leaf(params.task_head.bias);
            NodeId in = tape.constant(probs);
            if (cfg.randint_fraction > Scalar(0)) {
                const Mat<Scalar> rmask = randint_mask<Scalar>(
                    static_cast<int>(rows.size()), train.k(), cfg.randint_fraction, randint_rng);
                in = apply_randint(tape, in, labels, rmask);
            }
            const NodeId ty = tape.add_rowvec(tape.matmul(in, tw), tb);
            const NodeId loss = task_cross_entropy(tape, ty, y);

            const double loss_value = static_cast<double>(tape.value(loss)(0, 0));
            if (!std::isfinite(loss_value))
                fail(ErrorKind::numeric, "training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch) + " step " +
                                             std::to_string(global_step));
            epoch_loss += loss_value;
            ++batches;

            GradientMap<Scalar> grads = tape.backward(loss);
            opt.step({&params.task_head.weight, &params.task_head.bias},
                     {&grads.at(tw), &grads.at(tb)});
            ++global_step;
        }

        const Mat<Scalar> vty = task_logits(params, val_probs);
        const double val_task = static_cast<double>(task_ce_value(vty, val.Y));
        history.epochs.push_back(
            {epoch, epoch_loss / std::max(batches, 1), val_task, val_task, 0.0,
             accuracy_from_logits(vty, val.Y)});
        history.stopped_epoch = epoch;
        if (val_task < best_val) {
            best_val = val_task;
            best = params;
            history.best_epoch = epoch;
        } else if (epoch - history.best_epoch >= cfg.patience) {
            break;
        }
    }
    return {std::move(best), std::move(history)};
}

template <typename Scalar>
TrainResult<Scalar> train_sequential(const CbmArchitecture& arch, const TrainConfig<Scalar>& cfg,
                                     const ConceptDataset& train, const ConceptDataset& val,
                                     const CbmParameters<Scalar>* cpo_prior_params = nullptr) {
    CbmParameters<Scalar> params = init_params<Scalar>(arch, cfg.seed);
    TrainResult<Scalar> stage1 = trainutil::run_training(arch, std::move(params), cfg, train, val,
                                                         true, cpo_prior_params, {});
    TrainResult<Scalar> stage2 = train_task_head(arch, cfg, train, val, std::move(stage1.params));
    stage2.history.traces = std::move(stage1.history.traces);
    // Keep both stages' epoch records, renumbering stage 2 after stage 1.
    const int offset = stage1.history.stopped_epoch;
    TrainHistory merged = std::move(stage1.history);
    for (EpochRecord e : stage2.history.epochs) {
        e.epoch += offset;
        merged.epochs.push_back(e);
    }
    merged.stopped_epoch = offset + stage2.history.stopped_epoch;
    merged.best_epoch = offset + stage2.history.best_epoch;
    return {std::move(stage2.params), std::move(merged)};
}

enum class StreamStrategy { bce, cpo_uniform, cpo_checkpoint_prior };

inline const char* strategy_name(StreamStrategy s) {
    switch (s) {
        case StreamStrategy::bce: return "bce";
        case StreamStrategy::cpo_uniform: return "cpo-uniform";
        default: return "cpo-prior";
    }
}

// Concept-only updates over streamed blocks, task head frozen throughout.
// The checkpoint-prior strategy uses the previous block's parameters as the
// preference prior. Returns one checkpoint per state: the initial one, then
// one per processed block.
template <typename Scalar>
std::vector<CbmParameters<Scalar>> stream_update(const CbmArchitecture& arch,
                                                 const CbmParameters<Scalar>& initial,
                                                 const std::vector<ConceptDataset>& blocks,
                                                 StreamStrategy strategy,
                                                 TrainConfig<Scalar> cfg, const ConceptDataset& val,
                                                 const std::vector<int>& selected_concepts = {}) {
    cfg.objective = strategy == StreamStrategy::bce ? ObjectiveKind::bce : ObjectiveKind::cpo;
    cfg.cpo.prior = strategy == StreamStrategy::cpo_checkpoint_prior ? PriorKind::checkpoint
                                                                     : PriorKind::uniform;
    std::vector<CbmParameters<Scalar>> checkpoints;
    checkpoints.push_back(initial);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const CbmParameters<Scalar> prior = checkpoints.back();
        TrainConfig<Scalar> block_cfg = cfg;
        block_cfg.seed = cfg.seed + 1000 * (b + 1);
        TrainResult<Scalar> res = train_concept_predictor(
            arch, block_cfg, blocks[b], val, checkpoints.back(),
            strategy == StreamStrategy::cpo_checkpoint_prior ? &prior : nullptr,
            selected_concepts);
        // The concept-only path never touches the task head; keep the
        // initial head bitwise.
        res.params.task_head = initial.task_head;
        checkpoints.push_back(std::move(res.params));
    }
    return checkpoints;
}

// Group-granular concept subsampling for streaming: keeps a seeded fraction
// of the groups and returns the member concepts.
inline std::vector<int> select_concept_groups(const std::vector<std::vector<int>>& groups,
                                              double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        fail(ErrorKind::config, "concept fraction must lie in (0,1]");
    const int keep = std::max(1, static_cast<int>(std::lround(fraction * groups.size())));
    std::vector<int> order(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) order[g] = static_cast<int>(g);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> concepts;
    for (int g = 0; g < keep; ++g)
        for (int j : groups[static_cast<std::size_t>(order[static_cast<std::size_t>(g)])])
            concepts.push_back(j);
    std::sort(concepts.begin(), concepts.end());
    return concepts;
}

}  // namespace cpolab

#endif
