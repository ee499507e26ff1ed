#ifndef CPOLAB_DATA_HPP
#define CPOLAB_DATA_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/error.hpp"
#include "cpolab/rng.hpp"

namespace cpolab {

// Recipe for a synthetic concept-labeled dataset. Inputs embed per-concept
// evidence through a fixed linear mix (plus nuisance features), task labels
// follow a decision list over concept-group majority bits, so the concept
// set fully determines the label.
struct SyntheticSpec {
    int input_dim = 32;
    int num_concepts = 16;
    int num_classes = 8;
    int samples = 4000;
    std::vector<std::vector<int>> concept_groups;  // defaults to 4 equal groups
    std::uint64_t concept_rule_seed = 7;
    bool label_noise_free = true;  // task labels are never noised
    int signal_dim = 24;           // leading concept-bearing input features
    double noise_std = 0.1;
    // Groups visible to the task rule; empty means all of them. Dropping
    // groups mimics an incomplete concept set.
    std::vector<int> visible_groups;

    void validate() const;
};

// Inputs, possibly-noised concepts, the retained clean shadow, task labels
// and optional per-entry labeler confidence (1..4). Immutable by convention;
// every transform returns a new dataset.
struct ConceptDataset {
    MatF X;                 // n x d
    MatF C;                 // n x k, binary, possibly noised
    MatF C_clean;           // n x k, binary shadow
    std::vector<int> Y;     // n, 0-based class ids, always clean
    MatI confidence;        // n x k in {1..4}, or 0x0 when absent
    std::vector<std::vector<int>> concept_groups;
    int signal_dim = 0;     // leading concept-bearing features (occlusion target)
    // True when C_clean was genuinely provided (generated data or a file
    // with cc_* columns) rather than defaulted to C.
    bool clean_shadow_present = false;

    int n() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }
    int k() const { return static_cast<int>(C.cols()); }
    bool has_confidence() const { return confidence.size() > 0; }

    // Disagreement between C and C_clean; the mislabeled subset.
    MatI noise_mask() const {
        MatI m(C.rows(), C.cols());
        for (Eigen::Index i = 0; i < C.rows(); ++i)
            for (Eigen::Index j = 0; j < C.cols(); ++j)
                m(i, j) = C(i, j) != C_clean(i, j) ? 1 : 0;
        return m;
    }

    ConceptDataset take(const std::vector<int>& rows) const {
        ConceptDataset out;
        out.X.resize(rows.size(), X.cols());
        out.C.resize(rows.size(), C.cols());
        out.C_clean.resize(rows.size(), C.cols());
        out.Y.resize(rows.size());
        if (has_confidence()) out.confidence.resize(rows.size(), C.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const int r = rows[i];
            if (r < 0 || r >= n()) fail(ErrorKind::contract, "row index out of range");
            out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
            out.C.row(static_cast<Eigen::Index>(i)) = C.row(r);
            out.C_clean.row(static_cast<Eigen::Index>(i)) = C_clean.row(r);
            out.Y[i] = Y[static_cast<std::size_t>(r)];
            if (has_confidence()) out.confidence.row(static_cast<Eigen::Index>(i)) = confidence.row(r);
        }
        out.concept_groups = concept_groups;
        out.signal_dim = signal_dim;
        out.clean_shadow_present = clean_shadow_present;
        return out;
    }
};

// Which corruption regime to apply to the training split.
struct NoiseSpec {
    enum class Kind { none, uniform, confidence, group };
    Kind kind = Kind::none;
    double p = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (p < 0.0 || p > 1.0) fail(ErrorKind::config, "noise probability must lie in [0,1]");
    }
};

ConceptDataset generate(const SyntheticSpec& spec, std::uint64_t seed);

// The decision list mapping group-majority bits to a class; exposed so
// evaluation can recompute labels for intervened concept vectors.
int rule_label(const SyntheticSpec& spec, const std::vector<int>& bits);

ConceptDataset apply_uniform_noise(const ConceptDataset& ds, double p, std::uint64_t seed);
ConceptDataset apply_confidence_noise(const ConceptDataset& ds, std::uint64_t seed);
ConceptDataset apply_group_noise(const ConceptDataset& ds, double p, std::uint64_t seed);
ConceptDataset apply_noise(const ConceptDataset& ds, const NoiseSpec& noise);

// Zeroes a contiguous block of ceil(fraction * signal_dim) concept-bearing
// features per row; labels are untouched.
ConceptDataset occlude(const ConceptDataset& ds, double block_fraction, std::uint64_t seed);

struct SplitDataset {
    ConceptDataset train, val, test;
};

SplitDataset split(const ConceptDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

std::vector<ConceptDataset> partition_blocks(const ConceptDataset& train, int num_blocks);

// Delimited text with header `id,x_0..,c_0..,[cc_0..],[conf_0..],y`.
void save_dataset(const ConceptDataset& ds, const std::string& path);
ConceptDataset load_dataset(const std::string& path);

}  // namespace cpolab

#endif
