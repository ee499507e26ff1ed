#ifndef CPOLAB_EXPERIMENTS_HPP
#define CPOLAB_EXPERIMENTS_HPP

#include <string>
#include <vector>

#include "cpolab/data.hpp"
#include "cpolab/evaluation.hpp"
#include "cpolab/model.hpp"
#include "cpolab/training.hpp"

namespace cpolab {

// The desk-scale fixture shared by the replication experiments.
namespace fixture {

inline SyntheticSpec spec() {
    SyntheticSpec s;
    s.input_dim = 32;
    s.num_concepts = 16;
    s.num_classes = 8;
    s.samples = 4000;
    s.concept_groups = equal_groups(16, 4);
    s.concept_rule_seed = 7;
    s.signal_dim = 24;
    s.noise_std = 0.1;
    return s;
}

inline CbmArchitecture arch() {
    CbmArchitecture a;
    a.input_dim = 32;
    a.encoder_hidden = {64, 64};
    a.num_concepts = 16;
    a.num_classes = 8;
    a.concept_groups = equal_groups(16, 4);
    return a;
}

inline TrainConfig<float> train_config(ObjectiveKind objective, std::uint64_t seed) {
    TrainConfig<float> cfg;
    cfg.objective = objective;
    cfg.lambda = 5.0f;
    cfg.lr = 0.1f;
    cfg.momentum = 0.9f;
    cfg.batch_size = 128;
    cfg.max_epochs = 150;
    cfg.patience = 15;
    cfg.randint_fraction = default_randint_fraction<float>(objective);
    cfg.seed = seed;
    return cfg;
}

}  // namespace fixture

struct RunMetrics {
    double task_accuracy = 0.0;
    double concept_auc = 0.0;
};

template <typename Scalar>
RunMetrics evaluate_metrics(const CbmParameters<Scalar>& params, const ConceptDataset& test) {
    RunMetrics m;
    m.task_accuracy = task_accuracy(params, test);
    m.concept_auc = mean_concept_auc(params, test).mean;
    return m;
}

struct NoiseCellResult {
    ObjectiveKind objective = ObjectiveKind::bce;
    NoiseSpec::Kind noise_kind = NoiseSpec::Kind::none;
    double p = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    RunMetrics metrics;
};

// One sweep cell: generate, split, noise the training split, train jointly,
// evaluate on the clean test split. Seed derivation is fixed so a sweep cell
// and a standalone run with the same seed agree exactly.
inline NoiseCellResult run_noise_cell(const SyntheticSpec& spec, const CbmArchitecture& arch,
                                      TrainConfig<float> cfg, const NoiseSpec& noise,
                                      std::uint64_t seed) {
    NoiseCellResult cell;
    cell.objective = cfg.objective;
    cell.noise_kind = noise.kind;
    cell.p = noise.p;
    cell.seed = seed;
    try {
        const ConceptDataset full = generate(spec, seed);
        const SplitDataset parts = split(full, 0.7, 0.1, 0.2, seed + 1);
        NoiseSpec applied = noise;
        applied.seed = seed + 2;
        const ConceptDataset train = apply_noise(parts.train, applied);
        cfg.seed = seed + 3;
        const TrainResult<float> result = train_joint(arch, cfg, train, parts.val);
        cell.metrics = evaluate_metrics(result.params, parts.test);
        cell.ok = true;
    } catch (const Error& e) {
        cell.error = e.what();
    }
    return cell;
}

struct StreamTrajectory {
    StreamStrategy strategy = StreamStrategy::cpo_uniform;
    double concept_fraction = 1.0;
    std::vector<RunMetrics> per_block;  // after block 1 (initial), 2, ...
};

// The streaming protocol: joint training on the first block, then
// concept-only updates on the remaining blocks under the given strategy.
inline StreamTrajectory run_stream_experiment(const SyntheticSpec& spec,
                                              const CbmArchitecture& arch,
                                              TrainConfig<float> stream_cfg,
                                              StreamStrategy strategy, double concept_fraction,
                                              std::uint64_t seed, int num_blocks = 4) {
    const ConceptDataset full = generate(spec, seed);
    const SplitDataset parts = split(full, 0.7, 0.1, 0.2, seed + 1);
    const std::vector<ConceptDataset> blocks = partition_blocks(parts.train, num_blocks);

    TrainConfig<float> joint_cfg = stream_cfg;
    joint_cfg.objective = ObjectiveKind::cpo;
    joint_cfg.cpo.prior = PriorKind::uniform;
    joint_cfg.randint_fraction = default_randint_fraction<float>(ObjectiveKind::cpo);
    joint_cfg.seed = seed + 3;
    const TrainResult<float> initial = train_joint(arch, joint_cfg, blocks[0], parts.val);

    std::vector<int> selected;
    if (concept_fraction < 1.0)
        selected = select_concept_groups(arch.concept_groups, concept_fraction, seed + 7);

    stream_cfg.seed = seed + 4;
    const std::vector<ConceptDataset> rest(blocks.begin() + 1, blocks.end());
    const std::vector<CbmParameters<float>> checkpoints =
        stream_update(arch, initial.params, rest, strategy, stream_cfg, parts.val, selected);

    StreamTrajectory traj;
    traj.strategy = strategy;
    traj.concept_fraction = concept_fraction;
    for (const auto& ck : checkpoints) traj.per_block.push_back(evaluate_metrics(ck, parts.test));
    return traj;
}

}  // namespace cpolab

#endif
