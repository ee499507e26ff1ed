#ifndef CPOLAB_AUTODIFF_HPP
#define CPOLAB_AUTODIFF_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cpolab/error.hpp"
#include "cpolab/rng.hpp"

namespace cpolab {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using MatI = Mat<int>;

using NodeId = int;

namespace detail {

template <typename Scalar>
Scalar stable_sigmoid(Scalar z) {
    if (z >= Scalar(0)) {
        const Scalar e = std::exp(-z);
        return Scalar(1) / (Scalar(1) + e);
    }
    const Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
}

// log(sigmoid(z)) = -softplus(-z), computed without overflow on either side.
template <typename Scalar>
Scalar stable_log_sigmoid(Scalar z) {
    if (z >= Scalar(0)) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

// softplus(z) - z*c, the fused binary cross entropy on a single logit.
template <typename Scalar>
Scalar stable_bce_logit(Scalar z, Scalar c) {
    const Scalar m = z > Scalar(0) ? z : Scalar(0);
    return m - z * c + std::log1p(std::exp(-std::abs(z)));
}

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

}  // namespace detail

// Reverse-mode gradients keyed by node id; shapes mirror the node values.
// Leaves that do not reach the loss keep an exact zero gradient.
template <typename Scalar>
class GradientMap {
  public:
    explicit GradientMap(std::vector<Mat<Scalar>> grads) : grads_(std::move(grads)) {}

    const Mat<Scalar>& at(NodeId id) const {
        if (id < 0 || id >= static_cast<NodeId>(grads_.size()))
            fail(ErrorKind::contract, "gradient lookup for unknown node id " + std::to_string(id));
        return grads_[static_cast<std::size_t>(id)];
    }

    std::size_t size() const { return grads_.size(); }

  private:
    std::vector<Mat<Scalar>> grads_;
};

// Define-by-run tape over dense row-major matrices. Rebuilt every step; one
// backward sweep visits each record exactly once in reverse order. Entries
// only reference earlier node ids.
template <typename Scalar>
class Tape {
  public:
    using Matrix = Mat<Scalar>;

    enum class Op {
        matmul,
        add,
        sub,
        mul,
        scalar_mul,
        add_rowvec,
        log,
        exp,
        relu,
        sigmoid,
        log_sigmoid,
        reduce_sum,
        reduce_mean,
        coeff_apply,  // fused losses and straight-through: grad_in += up * coeff
    };

    struct Record {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        NodeId out = -1;
        Scalar alpha = Scalar(0);
        Matrix coeff;  // precomputed d(out)/d(a) for coeff_apply
    };

    NodeId leaf(Matrix value) { return push(std::move(value), true); }
    NodeId constant(Matrix value) { return push(std::move(value), false); }

    NodeId scalar_leaf(Scalar v) {
        Matrix m(1, 1);
        m(0, 0) = v;
        return leaf(std::move(m));
    }

    const Matrix& value(NodeId id) const { return nodes_[check_id(id)].value; }
    bool requires_grad(NodeId id) const { return nodes_[check_id(id)].requires_grad; }
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_records() const { return records_.size(); }

    bool is_scalar(NodeId id) const {
        const Matrix& v = value(id);
        return v.rows() == 1 && v.cols() == 1;
    }

    // --- recorded primitives -------------------------------------------

    NodeId matmul(NodeId a, NodeId b) {
        const Matrix& va = value(a);
        const Matrix& vb = value(b);
        if (va.cols() != vb.rows())
            fail(ErrorKind::shape, "matmul inner dimensions disagree: " +
                                       detail::shape_str(va.rows(), va.cols()) + " vs " +
                                       detail::shape_str(vb.rows(), vb.cols()));
        NodeId out = push(va * vb, nodes_[a].requires_grad || nodes_[b].requires_grad);
        record({Op::matmul, a, b, out});
        return out;
    }

    NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }

    NodeId scalar_mul(NodeId a, Scalar s) {
        NodeId out = push(value(a) * s, nodes_[a].requires_grad);
        Record r{Op::scalar_mul, a, -1, out};
        r.alpha = s;
        record(std::move(r));
        return out;
    }

    // Broadcasts a 1xq row over every row of a. Used for bias terms.
    NodeId add_rowvec(NodeId a, NodeId row) {
        const Matrix& va = value(a);
        const Matrix& vr = value(row);
        if (vr.rows() != 1 || vr.cols() != va.cols())
            fail(ErrorKind::shape, "add_rowvec expects 1x" + std::to_string(va.cols()) +
                                       ", got " + detail::shape_str(vr.rows(), vr.cols()));
        Matrix out = va;
        out.rowwise() += vr.row(0);
        NodeId id = push(std::move(out), nodes_[a].requires_grad || nodes_[row].requires_grad);
        record({Op::add_rowvec, a, row, id});
        return id;
    }

    NodeId log(NodeId a) {
        const Matrix& va = value(a);
        for (Eigen::Index i = 0; i < va.rows(); ++i)
            for (Eigen::Index j = 0; j < va.cols(); ++j)
                if (!(va(i, j) > Scalar(0)))
                    fail(ErrorKind::domain, "log of non-positive value at (" + std::to_string(i) +
                                                "," + std::to_string(j) + ")");
        NodeId out = push(va.array().log().matrix(), nodes_[a].requires_grad);
        record({Op::log, a, -1, out});
        return out;
    }

    NodeId exp(NodeId a) {
        Matrix out = value(a).array().exp().matrix();
        if (!out.allFinite())
            fail(ErrorKind::numeric, "exp overflowed to a non-finite value");
        NodeId id = push(std::move(out), nodes_[a].requires_grad);
        record({Op::exp, a, -1, id});
        return id;
    }

    NodeId relu(NodeId a) {
        NodeId out = push(value(a).cwiseMax(Scalar(0)), nodes_[a].requires_grad);
        record({Op::relu, a, -1, out});
        return out;
    }

    NodeId sigmoid(NodeId a) {
        NodeId out = push(value(a).unaryExpr([](Scalar z) { return detail::stable_sigmoid(z); }),
                          nodes_[a].requires_grad);
        record({Op::sigmoid, a, -1, out});
        return out;
    }

    NodeId log_sigmoid(NodeId a) {
        NodeId out = push(value(a).unaryExpr([](Scalar z) { return detail::stable_log_sigmoid(z); }),
                          nodes_[a].requires_grad);
        record({Op::log_sigmoid, a, -1, out});
        return out;
    }

    NodeId reduce_sum(NodeId a) {
        Matrix out(1, 1);
        out(0, 0) = value(a).sum();
        NodeId id = push(std::move(out), nodes_[a].requires_grad);
        record({Op::reduce_sum, a, -1, id});
        return id;
    }

    NodeId reduce_mean(NodeId a) {
        Matrix out(1, 1);
        out(0, 0) = value(a).sum() / static_cast<Scalar>(value(a).size());
        NodeId id = push(std::move(out), nodes_[a].requires_grad);
        record({Op::reduce_mean, a, -1, id});
        return id;
    }

    // Fused primitive: `value` is the forward result and `coeff` the full
    // d(value)/d(input) per-entry coefficient, fixed at forward time. For a
    // scalar output, backward accumulates up * coeff into the input. For an
    // elementwise output, backward accumulates up.cwiseProduct(coeff).
    NodeId fused(NodeId input, Matrix value, Matrix coeff) {
        if (coeff.rows() != this->value(input).rows() || coeff.cols() != this->value(input).cols())
            fail(ErrorKind::contract, "fused coefficient shape must match the input");
        NodeId out = push(std::move(value), nodes_[input].requires_grad);
        Record r{Op::coeff_apply, input, -1, out};
        r.coeff = std::move(coeff);
        record(std::move(r));
        return out;
    }

    // --- backward -------------------------------------------------------

    // Gradients are recomputed from scratch on every call; constants never
    // accumulate gradient.
    GradientMap<Scalar> backward(NodeId loss) const {
        if (!is_scalar(loss))
            fail(ErrorKind::contract, "backward requires a scalar loss node, got shape " +
                                          detail::shape_str(value(loss).rows(), value(loss).cols()));
        std::vector<Matrix> grads(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            grads[i] = Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
        grads[static_cast<std::size_t>(loss)](0, 0) = Scalar(1);

        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            const Record& r = *it;
            const Matrix& up = grads[static_cast<std::size_t>(r.out)];
            switch (r.op) {
                case Op::matmul:
                    accumulate(grads, r.a, up * value(r.b).transpose());
                    accumulate(grads, r.b, value(r.a).transpose() * up);
                    break;
                case Op::add:
                    accumulate(grads, r.a, up);
                    accumulate(grads, r.b, up);
                    break;
                case Op::sub:
                    accumulate(grads, r.a, up);
                    accumulate(grads, r.b, -up);
                    break;
                case Op::mul:
                    accumulate(grads, r.a, up.cwiseProduct(value(r.b)));
                    accumulate(grads, r.b, up.cwiseProduct(value(r.a)));
                    break;
                case Op::scalar_mul:
                    accumulate(grads, r.a, up * r.alpha);
                    break;
                case Op::add_rowvec:
                    accumulate(grads, r.a, up);
                    accumulate(grads, r.b, up.colwise().sum());
                    break;
                case Op::log:
                    accumulate(grads, r.a, up.cwiseQuotient(value(r.a)));
                    break;
                case Op::exp:
                    accumulate(grads, r.a, up.cwiseProduct(value(r.out)));
                    break;
                case Op::relu:
                    accumulate(grads, r.a,
                               up.cwiseProduct(value(r.a).unaryExpr(
                                   [](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); })));
                    break;
                case Op::sigmoid: {
                    const Matrix& s = value(r.out);
                    accumulate(grads, r.a,
                               up.cwiseProduct(s.cwiseProduct((Matrix::Ones(s.rows(), s.cols()) - s))));
                    break;
                }
                case Op::log_sigmoid: {
                    // d log(sigma(z))/dz = sigma(-z)
                    accumulate(grads, r.a,
                               up.cwiseProduct(value(r.a).unaryExpr(
                                   [](Scalar z) { return detail::stable_sigmoid(-z); })));
                    break;
                }
                case Op::reduce_sum:
                    accumulate(grads, r.a,
                               Matrix::Constant(value(r.a).rows(), value(r.a).cols(), up(0, 0)));
                    break;
                case Op::reduce_mean:
                    accumulate(grads, r.a,
                               Matrix::Constant(value(r.a).rows(), value(r.a).cols(),
                                                up(0, 0) / static_cast<Scalar>(value(r.a).size())));
                    break;
                case Op::coeff_apply:
                    if (value(r.out).size() == 1)
                        accumulate(grads, r.a, up(0, 0) * r.coeff);
                    else
                        accumulate(grads, r.a, up.cwiseProduct(r.coeff));
                    break;
            }
        }
        return GradientMap<Scalar>(std::move(grads));
    }

    void check_finite(NodeId id, const std::string& label) const {
        if (!value(id).allFinite())
            fail(ErrorKind::numeric, "non-finite values in " + label);
    }

  private:
    struct Node {
        Matrix value;
        bool requires_grad;
    };

    NodeId push(Matrix value, bool requires_grad) {
        nodes_.push_back({std::move(value), requires_grad});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId binary(Op op, NodeId a, NodeId b) {
        const Matrix& va = value(a);
        const Matrix& vb = value(b);
        if (va.rows() != vb.rows() || va.cols() != vb.cols())
            fail(ErrorKind::shape, "elementwise op shapes disagree: " +
                                       detail::shape_str(va.rows(), va.cols()) + " vs " +
                                       detail::shape_str(vb.rows(), vb.cols()));
        Matrix out;
        switch (op) {
            case Op::add: out = va + vb; break;
            case Op::sub: out = va - vb; break;
            case Op::mul: out = va.cwiseProduct(vb); break;
            default: fail(ErrorKind::contract, "not a binary op");
        }
        NodeId id = push(std::move(out), nodes_[a].requires_grad || nodes_[b].requires_grad);
        record({op, a, b, id});
        return id;
    }

    void record(Record r) { records_.push_back(std::move(r)); }

    template <typename Expr>
    void accumulate(std::vector<Matrix>& grads, NodeId id, const Expr& g) const {
        if (!nodes_[static_cast<std::size_t>(id)].requires_grad) return;
        grads[static_cast<std::size_t>(id)] += g;
    }

    NodeId check_id(NodeId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            fail(ErrorKind::contract, "unknown node id " + std::to_string(id));
        return id;
    }

    std::vector<Node> nodes_;
    std::vector<Record> records_;
};

// SGD with classic momentum: v <- momentum*v + g; p <- p - lr*v.
// Velocity buffers persist across steps and are keyed by call order, so a
// given optimizer instance must always see the same parameter list.
template <typename Scalar>
class SgdOptimizer {
  public:
    SgdOptimizer(Scalar lr, Scalar momentum) : lr_(lr), momentum_(momentum) {
        if (!(lr > Scalar(0))) fail(ErrorKind::config, "learning rate must be positive");
        if (!(momentum >= Scalar(0) && momentum < Scalar(1)))
            fail(ErrorKind::config, "momentum must lie in [0,1)");
    }

    void step(std::vector<Mat<Scalar>*> params, const std::vector<const Mat<Scalar>*>& grads) {
        if (params.size() != grads.size())
            fail(ErrorKind::contract, "parameter/gradient count mismatch");
        if (velocity_.empty()) {
            velocity_.reserve(params.size());
            for (auto* p : params) velocity_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
        }
        if (velocity_.size() != params.size())
            fail(ErrorKind::contract, "optimizer was initialized with a different parameter list");
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = momentum_ * velocity_[i] + *grads[i];
            *params[i] -= lr_ * velocity_[i];
        }
    }

    Scalar lr() const { return lr_; }
    Scalar momentum() const { return momentum_; }

  private:
    Scalar lr_;
    Scalar momentum_;
    std::vector<Mat<Scalar>> velocity_;
};

}  // namespace cpolab

#endif
