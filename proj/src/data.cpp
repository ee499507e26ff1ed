#include "cpolab/data.hpp"

#include <algorithm>
#include <set>

#include "cpolab/model.hpp"

namespace cpolab {

void SyntheticSpec::validate() const {
    if (samples < 1) fail(ErrorKind::config, "samples must be >= 1");
    if (input_dim < 1) fail(ErrorKind::config, "input_dim must be >= 1");
    if (num_concepts < 1 || num_concepts > 62)
        fail(ErrorKind::config, "num_concepts must lie in [1,62]");
    if (num_classes < 2) fail(ErrorKind::config, "num_classes must be >= 2");
    const double max_classes = std::pow(2.0, num_concepts);
    if (static_cast<double>(num_classes) > max_classes)
        fail(ErrorKind::config, "num_classes must satisfy m <= 2^k (classes must be expressible "
                                "from concepts)");
    if (signal_dim < 1 || signal_dim > input_dim)
        fail(ErrorKind::config, "signal_dim must lie in [1, input_dim]");
    if (noise_std < 0.0) fail(ErrorKind::config, "noise_std must be non-negative");

    const auto groups = concept_groups.empty()
                            ? equal_groups(num_concepts, std::min(4, num_concepts))
                            : concept_groups;
    CbmArchitecture probe;
    probe.input_dim = input_dim;
    probe.num_concepts = num_concepts;
    probe.num_classes = num_classes;
    probe.concept_groups = groups;
    probe.validate();

    std::vector<int> visible = visible_groups;
    if (visible.empty()) {
        visible.resize(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) visible[g] = static_cast<int>(g);
    }
    for (int g : visible)
        if (g < 0 || g >= static_cast<int>(groups.size()))
            fail(ErrorKind::config, "visible group index out of range");
    const double patterns = std::pow(2.0, static_cast<double>(visible.size()));
    if (static_cast<double>(num_classes) > patterns)
        fail(ErrorKind::config, "num_classes exceeds the 2^(visible groups) patterns the task "
                                "rule can distinguish");
}

namespace {

std::vector<std::vector<int>> effective_groups(const SyntheticSpec& spec) {
    return spec.concept_groups.empty()
               ? equal_groups(spec.num_concepts, std::min(4, spec.num_concepts))
               : spec.concept_groups;
}

std::vector<int> effective_visible(const SyntheticSpec& spec, std::size_t num_groups) {
    std::vector<int> visible = spec.visible_groups;
    if (visible.empty()) {
        visible.resize(num_groups);
        for (std::size_t g = 0; g < num_groups; ++g) visible[g] = static_cast<int>(g);
    }
    return visible;
}

// Class prototypes: num_classes distinct bit patterns over the visible
// groups, drawn from the rule seed.
std::vector<std::uint64_t> rule_prototypes(const SyntheticSpec& spec, std::size_t num_visible) {
    Rng rng(spec.concept_rule_seed);
    const std::uint64_t space = 1ULL << num_visible;
    std::set<std::uint64_t> chosen;
    std::vector<std::uint64_t> protos;
    while (protos.size() < static_cast<std::size_t>(spec.num_classes)) {
        const std::uint64_t pattern = rng.below(space);
        if (chosen.insert(pattern).second) protos.push_back(pattern);
    }
    return protos;
}

int majority_bit(const MatF& C, int row, const std::vector<int>& group) {
    int sum = 0;
    for (int j : group) sum += C(row, j) != 0.0f ? 1 : 0;
    return 2 * sum >= static_cast<int>(group.size()) ? 1 : 0;
}

int nearest_prototype(const std::vector<std::uint64_t>& protos, std::uint64_t code,
                      std::size_t num_bits) {
    int best = 0;
    int best_dist = static_cast<int>(num_bits) + 1;
    for (std::size_t y = 0; y < protos.size(); ++y) {
        const int dist = __builtin_popcountll(protos[y] ^ code);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(y);
        }
    }
    return best;
}

std::uint64_t group_code(const MatF& C, int row, const std::vector<std::vector<int>>& groups,
                         const std::vector<int>& visible) {
    std::uint64_t code = 0;
    for (std::size_t b = 0; b < visible.size(); ++b)
        if (majority_bit(C, row, groups[static_cast<std::size_t>(visible[b])]))
            code |= 1ULL << b;
    return code;
}

}  // namespace

int rule_label(const SyntheticSpec& spec, const std::vector<int>& bits) {
    const auto groups = effective_groups(spec);
    const auto visible = effective_visible(spec, groups.size());
    if (bits.size() != visible.size()) fail(ErrorKind::contract, "bit count mismatch");
    const auto protos = rule_prototypes(spec, visible.size());
    std::uint64_t code = 0;
    for (std::size_t b = 0; b < bits.size(); ++b)
        if (bits[b]) code |= 1ULL << b;
    return nearest_prototype(protos, code, visible.size());
}

ConceptDataset generate(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto groups = effective_groups(spec);
    const auto visible = effective_visible(spec, groups.size());
    const auto protos = rule_prototypes(spec, visible.size());

    const int n = spec.samples;
    const int d = spec.input_dim;
    const int k = spec.num_concepts;

    // The mixing matrix ties evidence to inputs and is part of the rule, not
    // the sample draw, so datasets with equal rule seeds share it.
    Rng rule_rng = Rng(spec.concept_rule_seed).fork(1);
    MatF mix(k, spec.signal_dim);
    for (int j = 0; j < k; ++j)
        for (int f = 0; f < spec.signal_dim; ++f)
            mix(j, f) = static_cast<float>(rule_rng.gaussian() / std::sqrt(static_cast<double>(k)));

    Rng rng(seed);
    ConceptDataset ds;
    ds.X = MatF::Zero(n, d);
    ds.C.resize(n, k);
    ds.C_clean.resize(n, k);
    ds.Y.resize(static_cast<std::size_t>(n));
    ds.confidence.resize(n, k);
    ds.concept_groups = groups;
    ds.signal_dim = spec.signal_dim;
    ds.clean_shadow_present = true;

    MatF evidence(n, k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            const double u = rng.uniform(-1.0, 1.0);
            evidence(i, j) = static_cast<float>(u);
            const float c = u > 0.0 ? 1.0f : 0.0f;
            ds.C(i, j) = c;
            ds.C_clean(i, j) = c;
            // Labeler confidence by evidence margin quartile: |u| ~ U(0,1),
            // so the quartile cutoffs are exact.
            int rating = 1 + static_cast<int>(std::abs(u) * 4.0);
            ds.confidence(i, j) = std::min(rating, 4);
        }
    }

    for (int i = 0; i < n; ++i) {
        for (int f = 0; f < spec.signal_dim; ++f) {
            float v = 0.0f;
            for (int j = 0; j < k; ++j) v += evidence(i, j) * mix(j, f);
            ds.X(i, f) = v + static_cast<float>(spec.noise_std * rng.gaussian());
        }
        for (int f = spec.signal_dim; f < d; ++f)
            ds.X(i, f) = static_cast<float>(rng.gaussian());
        ds.Y[static_cast<std::size_t>(i)] =
            nearest_prototype(protos, group_code(ds.C_clean, i, groups, visible), visible.size());
    }
    return ds;
}

ConceptDataset apply_uniform_noise(const ConceptDataset& ds, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) fail(ErrorKind::config, "flip probability must lie in [0,1]");
    ConceptDataset out = ds;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.C.rows(); ++i)
        for (Eigen::Index j = 0; j < out.C.cols(); ++j)
            if (rng.bernoulli(p)) out.C(i, j) = 1.0f - out.C(i, j);
    return out;
}

ConceptDataset apply_confidence_noise(const ConceptDataset& ds, std::uint64_t seed) {
    if (!ds.has_confidence())
        fail(ErrorKind::contract, "confidence noise requires per-entry confidence ratings");
    ConceptDataset out = ds;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.C.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.C.cols(); ++j) {
            const int rating = out.confidence(i, j);
            if (rating < 1 || rating > 4)
                fail(ErrorKind::contract, "confidence rating out of range at row " + std::to_string(i));
            // rating 4 -> p=0.1, 3 -> 0.2, 2 -> 0.3, 1 -> 0.4
            const double p = static_cast<double>(5 - rating) / 10.0;
            if (rng.bernoulli(p)) out.C(i, j) = 1.0f - out.C(i, j);
        }
    }
    return out;
}

ConceptDataset apply_group_noise(const ConceptDataset& ds, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) fail(ErrorKind::config, "flip probability must lie in [0,1]");
    if (ds.concept_groups.empty())
        fail(ErrorKind::contract, "group noise requires concept groups");
    ConceptDataset out = ds;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.C.rows(); ++i)
        for (const auto& group : out.concept_groups)
            if (rng.bernoulli(p))
                for (int j : group) out.C(i, j) = 1.0f - out.C(i, j);
    return out;
}

ConceptDataset apply_noise(const ConceptDataset& ds, const NoiseSpec& noise) {
    noise.validate();
    switch (noise.kind) {
        case NoiseSpec::Kind::none: return ds;
        case NoiseSpec::Kind::uniform: return apply_uniform_noise(ds, noise.p, noise.seed);
        case NoiseSpec::Kind::confidence: return apply_confidence_noise(ds, noise.seed);
        case NoiseSpec::Kind::group: return apply_group_noise(ds, noise.p, noise.seed);
    }
    fail(ErrorKind::config, "unknown noise kind");
}

ConceptDataset occlude(const ConceptDataset& ds, double block_fraction, std::uint64_t seed) {
    if (block_fraction < 0.0 || block_fraction > 1.0)
        fail(ErrorKind::config, "block fraction must lie in [0,1]");
    if (ds.signal_dim < 1 || ds.signal_dim > ds.d())
        fail(ErrorKind::contract, "dataset has no concept-bearing feature range");
    ConceptDataset out = ds;
    const int len = static_cast<int>(std::ceil(block_fraction * ds.signal_dim));
    if (len == 0) return out;
    Rng rng(seed);
    for (int i = 0; i < out.n(); ++i) {
        const int start = len < ds.signal_dim ? static_cast<int>(rng.below(
                                                    static_cast<std::uint64_t>(ds.signal_dim - len + 1)))
                                              : 0;
        for (int f = start; f < start + len; ++f) out.X(i, f) = 0.0f;
    }
    return out;
}

SplitDataset split(const ConceptDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed) {
    const double sum = train_frac + val_frac + test_frac;
    if (std::abs(sum - 1.0) > 1e-6) fail(ErrorKind::config, "split fractions must sum to 1");
    if (train_frac < 0 || val_frac < 0 || test_frac < 0)
        fail(ErrorKind::config, "split fractions must be non-negative");
    const int n = ds.n();
    int sizes[3] = {static_cast<int>(train_frac * n), static_cast<int>(val_frac * n),
                    static_cast<int>(test_frac * n)};
    int rem = n - sizes[0] - sizes[1] - sizes[2];
    for (int s = 0; rem > 0; s = (s + 1) % 3, --rem) ++sizes[s];

    Rng rng(seed);
    const std::vector<int> perm = rng.permutation(n);
    SplitDataset out;
    std::vector<int> idx;
    int at = 0;
    for (int s = 0; s < 3; ++s) {
        idx.assign(perm.begin() + at, perm.begin() + at + sizes[s]);
        at += sizes[s];
        ConceptDataset part = ds.take(idx);
        if (s == 0) out.train = std::move(part);
        else if (s == 1) out.val = std::move(part);
        else out.test = std::move(part);
    }
    return out;
}

std::vector<ConceptDataset> partition_blocks(const ConceptDataset& train, int num_blocks) {
    if (num_blocks < 1) fail(ErrorKind::config, "block count must be >= 1");
    if (num_blocks > train.n()) fail(ErrorKind::config, "more blocks than samples");
    const int n = train.n();
    const int base = n / num_blocks;
    const int rem = n % num_blocks;
    std::vector<ConceptDataset> blocks;
    int at = 0;
    for (int b = 0; b < num_blocks; ++b) {
        const int size = base + (b < rem ? 1 : 0);
        std::vector<int> idx(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = at + i;
        at += size;
        blocks.push_back(train.take(idx));
    }
    return blocks;
}

}  // namespace cpolab
