#ifndef CPOLAB_MODEL_HPP
#define CPOLAB_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cpolab/autodiff.hpp"
#include "cpolab/error.hpp"
#include "cpolab/rng.hpp"

namespace cpolab {

// Encoder widths, bottleneck size and the group partition of the concepts.
struct CbmArchitecture {
    int input_dim = 0;
    std::vector<int> encoder_hidden;      // relu MLP widths, may be empty
    int num_concepts = 0;
    int num_classes = 0;
    std::vector<std::vector<int>> concept_groups;

    void validate() const {
        if (input_dim < 1) fail(ErrorKind::config, "input_dim must be >= 1");
        if (num_concepts < 1) fail(ErrorKind::config, "num_concepts must be >= 1");
        if (num_classes < 2) fail(ErrorKind::config, "num_classes must be >= 2");
        for (int w : encoder_hidden)
            if (w < 1) fail(ErrorKind::config, "encoder widths must be >= 1");
        std::vector<int> seen(static_cast<std::size_t>(num_concepts), 0);
        for (const auto& g : concept_groups) {
            if (g.empty()) fail(ErrorKind::config, "concept groups must be non-empty");
            for (int j : g) {
                if (j < 0 || j >= num_concepts)
                    fail(ErrorKind::config, "concept group index out of range: " + std::to_string(j));
                if (seen[static_cast<std::size_t>(j)]++)
                    fail(ErrorKind::config, "concept " + std::to_string(j) + " appears in two groups");
            }
        }
        for (int j = 0; j < num_concepts; ++j)
            if (!seen[static_cast<std::size_t>(j)])
                fail(ErrorKind::config, "concept " + std::to_string(j) + " is not covered by any group");
    }

    int encoder_out() const { return encoder_hidden.empty() ? input_dim : encoder_hidden.back(); }

    std::string descriptor() const {
        std::string s = "d=" + std::to_string(input_dim) + ";h=";
        for (std::size_t i = 0; i < encoder_hidden.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(encoder_hidden[i]);
        }
        s += ";k=" + std::to_string(num_concepts) + ";m=" + std::to_string(num_classes) + ";g=";
        for (std::size_t gi = 0; gi < concept_groups.size(); ++gi) {
            if (gi) s += "|";
            for (std::size_t j = 0; j < concept_groups[gi].size(); ++j) {
                if (j) s += ",";
                s += std::to_string(concept_groups[gi][j]);
            }
        }
        return s;
    }

    bool operator==(const CbmArchitecture& o) const {
        return input_dim == o.input_dim && encoder_hidden == o.encoder_hidden &&
               num_concepts == o.num_concepts && num_classes == o.num_classes &&
               concept_groups == o.concept_groups;
    }
};

// Builds equally sized groups; the remainder widens the leading groups.
inline std::vector<std::vector<int>> equal_groups(int num_concepts, int num_groups) {
    if (num_groups < 1 || num_groups > num_concepts)
        fail(ErrorKind::config, "group count must lie in [1, num_concepts]");
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(num_groups));
    const int base = num_concepts / num_groups;
    const int rem = num_concepts % num_groups;
    int next = 0;
    for (int g = 0; g < num_groups; ++g) {
        const int size = base + (g < rem ? 1 : 0);
        for (int i = 0; i < size; ++i) groups[static_cast<std::size_t>(g)].push_back(next++);
    }
    return groups;
}

template <typename Scalar>
struct DenseLayer {
    Mat<Scalar> weight;  // fan_in x fan_out
    Mat<Scalar> bias;    // 1 x fan_out
};

// Encoder stack plus the concept and task heads. The canonical flat order
// (used by checkpoints and optimizer binding) is encoder layers in depth
// order, then the concept head, then the task head, weight before bias.
template <typename Scalar>
struct CbmParameters {
    std::vector<DenseLayer<Scalar>> encoder;
    DenseLayer<Scalar> concept_head;
    DenseLayer<Scalar> task_head;

    std::vector<Mat<Scalar>*> flat() {
        std::vector<Mat<Scalar>*> out;
        for (auto& l : encoder) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        out.push_back(&concept_head.weight);
        out.push_back(&concept_head.bias);
        out.push_back(&task_head.weight);
        out.push_back(&task_head.bias);
        return out;
    }

    std::vector<const Mat<Scalar>*> flat() const {
        std::vector<const Mat<Scalar>*> out;
        for (const auto& l : encoder) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        out.push_back(&concept_head.weight);
        out.push_back(&concept_head.bias);
        out.push_back(&task_head.weight);
        out.push_back(&task_head.bias);
        return out;
    }

    // Concept predictor = encoder + concept head; the task head is excluded.
    std::vector<Mat<Scalar>*> concept_predictor() {
        auto out = flat();
        out.pop_back();
        out.pop_back();
        return out;
    }

    bool all_finite() const {
        for (const auto* m : flat())
            if (!m->allFinite()) return false;
        return true;
    }

    bool same_values(const CbmParameters& o) const {
        auto a = flat();
        auto b = o.flat();
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
            if (std::memcmp(a[i]->data(), b[i]->data(),
                            sizeof(Scalar) * static_cast<std::size_t>(a[i]->size())) != 0)
                return false;
        }
        return true;
    }

    template <typename Other>
    CbmParameters<Other> cast() const {
        CbmParameters<Other> out;
        for (const auto& l : encoder)
            out.encoder.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
        out.concept_head = {concept_head.weight.template cast<Other>(),
                            concept_head.bias.template cast<Other>()};
        out.task_head = {task_head.weight.template cast<Other>(), task_head.bias.template cast<Other>()};
        return out;
    }
};

// Glorot-uniform weights, zero biases, one draw stream in canonical order.
template <typename Scalar>
CbmParameters<Scalar> init_params(const CbmArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    auto glorot = [&rng](int fan_in, int fan_out) {
        Mat<Scalar> w(fan_in, fan_out);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c)
                w(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
        return w;
    };
    CbmParameters<Scalar> p;
    int in = arch.input_dim;
    for (int width : arch.encoder_hidden) {
        p.encoder.push_back({glorot(in, width), Mat<Scalar>::Zero(1, width)});
        in = width;
    }
    p.concept_head = {glorot(in, arch.num_concepts), Mat<Scalar>::Zero(1, arch.num_concepts)};
    p.task_head = {glorot(arch.num_concepts, arch.num_classes),
                   Mat<Scalar>::Zero(1, arch.num_classes)};
    return p;
}

// Tape-bound view of the parameters, in canonical flat order.
template <typename Scalar>
struct BoundParams {
    std::vector<NodeId> encoder_w, encoder_b;
    NodeId concept_w = -1, concept_b = -1;
    NodeId task_w = -1, task_b = -1;
    std::vector<NodeId> flat_ids;
};

template <typename Scalar>
BoundParams<Scalar> bind_params(Tape<Scalar>& tape, const CbmParameters<Scalar>& p) {
    BoundParams<Scalar> b;
    for (const auto& l : p.encoder) {
        b.encoder_w.push_back(tape.leaf(l.weight));
        b.encoder_b.push_back(tape.leaf(l.bias));
        b.flat_ids.push_back(b.encoder_w.back());
        b.flat_ids.push_back(b.encoder_b.back());
    }
    b.concept_w = tape.leaf(p.concept_head.weight);
    b.concept_b = tape.leaf(p.concept_head.bias);
    b.task_w = tape.leaf(p.task_head.weight);
    b.task_b = tape.leaf(p.task_head.bias);
    b.flat_ids.push_back(b.concept_w);
    b.flat_ids.push_back(b.concept_b);
    b.flat_ids.push_back(b.task_w);
    b.flat_ids.push_back(b.task_b);
    return b;
}

// Concept logits for a batch: relu MLP encoder followed by the linear
// concept head. Probabilities are sigmoid(logits).
template <typename Scalar>
NodeId concept_logits_forward(Tape<Scalar>& tape, const BoundParams<Scalar>& b, NodeId x) {
    NodeId h = x;
    for (std::size_t i = 0; i < b.encoder_w.size(); ++i) {
        h = tape.add_rowvec(tape.matmul(h, b.encoder_w[i]), b.encoder_b[i]);
        h = tape.relu(h);
    }
    return tape.add_rowvec(tape.matmul(h, b.concept_w), b.concept_b);
}

template <typename Scalar>
NodeId task_logits_forward(Tape<Scalar>& tape, const BoundParams<Scalar>& b, NodeId concepts) {
    return tape.add_rowvec(tape.matmul(concepts, b.task_w), b.task_b);
}

// Convenience non-tape forward passes for evaluation.
template <typename Scalar>
Mat<Scalar> concept_logits(const CbmParameters<Scalar>& p, const Mat<Scalar>& x) {
    Mat<Scalar> h = x;
    for (const auto& l : p.encoder) {
        h = (h * l.weight).eval();
        h.rowwise() += l.bias.row(0);
        h = h.cwiseMax(Scalar(0));
    }
    Mat<Scalar> z = h * p.concept_head.weight;
    z.rowwise() += p.concept_head.bias.row(0);
    return z;
}

template <typename Scalar>
Mat<Scalar> concept_probs(const CbmParameters<Scalar>& p, const Mat<Scalar>& x) {
    return concept_logits(p, x).unaryExpr([](Scalar z) { return detail::stable_sigmoid(z); });
}

template <typename Scalar>
Mat<Scalar> task_logits(const CbmParameters<Scalar>& p, const Mat<Scalar>& concepts) {
    if (concepts.cols() != p.task_head.weight.rows())
        fail(ErrorKind::shape, "task head expects " + std::to_string(p.task_head.weight.rows()) +
                                   " concepts, got " + std::to_string(concepts.cols()));
    Mat<Scalar> z = concepts * p.task_head.weight;
    z.rowwise() += p.task_head.bias.row(0);
    return z;
}

// --- checkpoints --------------------------------------------------------

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string objective;  // "bce", "cpo", ...
    int epoch = 0;
};

// Binary format: magic "CPOL", one version byte, a length-prefixed UTF-8
// header holding the architecture descriptor and metadata, then the raw
// little-endian float32 parameter arrays in canonical order.
inline constexpr char kCheckpointMagic[4] = {'C', 'P', 'O', 'L'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const CbmArchitecture& arch,
                     const CbmParameters<float>& params, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CbmArchitecture arch;
    CbmParameters<float> params;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Rejects checkpoints whose architecture differs from the expected one.
LoadedCheckpoint load_checkpoint(const std::string& path, const CbmArchitecture& expected);

}  // namespace cpolab

#endif
