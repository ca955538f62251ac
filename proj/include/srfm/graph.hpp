#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "srfm/tensor.hpp"

namespace srfm {

using NodeId = int;

// The closed operation catalog. Every model layer is composed from these;
// each opcode has a forward and a backward rule in Graph.
enum class Op {
    kInput,   // constant leaf (labels, fixed weights)
    kParam,   // trainable leaf tied to a named tensor
    kMatmul,
    kAdd,
    kConcat,
    kRelu,
    kSigmoid,
    kSoftmax,
    kMeanRows,
    kSum,
    kScale,
    kLog,
    kExp,
    kMul,     // elementwise, scalar broadcast allowed on either side
    kBce,     // fused sigmoid + binary cross entropy on logits
    kLookup,  // embedding row gather
};

struct GraphError : std::runtime_error {
    NodeId node;
    GraphError(NodeId n, const std::string& msg)
        : std::runtime_error("node " + std::to_string(n) + ": " + msg), node(n) {}
};

struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    double factor = 1.0;            // kScale only
    std::vector<int> ids;           // kLookup only
    std::string param_name;         // kParam only
};

// Reverse-mode tape. Values are computed eagerly at node creation, so a
// finished graph is immutable and safe to read from any thread; backward
// walks the tape once in reverse.
class Graph {
public:
    NodeId constant(Tensor t) {
        Node n;
        n.op = Op::kInput;
        n.value = std::move(t);
        return push(std::move(n));
    }

    // Trainable unless `frozen`; frozen parameters behave as constants and
    // their reported gradient is exactly zero.
    NodeId param(const std::string& name, Tensor t, bool frozen = false) {
        auto it = param_ids_.find(name);
        if (it != param_ids_.end()) return it->second;
        Node n;
        n.op = Op::kParam;
        n.value = std::move(t);
        n.param_name = name;
        n.needs_grad = !frozen;
        NodeId id = push(std::move(n));
        param_ids_[name] = id;
        return id;
    }

    NodeId matmul(NodeId a, NodeId b) { return push(make(Op::kMatmul, {a, b})); }
    NodeId add(NodeId a, NodeId b) { return push(make(Op::kAdd, {a, b})); }
    NodeId concat(const std::vector<NodeId>& xs) { return push(make(Op::kConcat, xs)); }
    NodeId relu(NodeId a) { return push(make(Op::kRelu, {a})); }
    NodeId sigmoid(NodeId a) { return push(make(Op::kSigmoid, {a})); }
    NodeId softmax(NodeId a) { return push(make(Op::kSoftmax, {a})); }
    NodeId mean_rows(NodeId a) { return push(make(Op::kMeanRows, {a})); }
    NodeId sum(NodeId a) { return push(make(Op::kSum, {a})); }
    NodeId log(NodeId a) { return push(make(Op::kLog, {a})); }
    NodeId exp(NodeId a) { return push(make(Op::kExp, {a})); }
    NodeId mul(NodeId a, NodeId b) { return push(make(Op::kMul, {a, b})); }
    NodeId bce(NodeId logits, NodeId labels) { return push(make(Op::kBce, {logits, labels})); }

    NodeId scale(NodeId a, double factor) {
        Node n = make(Op::kScale, {a});
        n.factor = factor;
        return push(std::move(n));
    }

    NodeId lookup(NodeId table, std::vector<int> ids) {
        Node n = make(Op::kLookup, {table});
        n.ids = std::move(ids);
        return push(std::move(n));
    }

    // Convenience compounds built from catalog ops.
    NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }
    NodeId dot(NodeId a, NodeId b) { return sum(mul(a, b)); }
    NodeId mean_of(const std::vector<NodeId>& xs) {
        NodeId acc = xs.at(0);
        for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
        return scale(acc, 1.0 / static_cast<double>(xs.size()));
    }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    const Node& node(NodeId id) const { return nodes_[id]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    double scalar_value(NodeId id) const {
        const Tensor& v = nodes_[id].value;
        if (!v.is_scalar()) throw GraphError(id, "expected scalar value");
        return v.data[0];
    }

    // Accumulates d(loss)/d(node) for every node reachable from `loss` that
    // needs a gradient. Loss must be scalar.
    void backward(NodeId loss) {
        if (!nodes_[loss].value.is_scalar())
            throw GraphError(loss, "backward requires a scalar loss");
        for (Node& n : nodes_) n.grad = Tensor();
        nodes_[loss].grad = Tensor::scalar(1.0);
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.data.empty() || !n.needs_grad) continue;
            backprop(id);
        }
    }

    // Gradients of the trainable parameter leaves, keyed by name. Parameters
    // untouched by the loss report zero.
    std::map<std::string, Tensor> param_grads() const {
        std::map<std::string, Tensor> out;
        for (const auto& [name, id] : param_ids_) {
            const Node& n = nodes_[id];
            if (!n.needs_grad) continue;
            out[name] = n.grad.data.empty() ? Tensor::zeros(n.value.shape) : n.grad;
        }
        return out;
    }

    NodeId param_id(const std::string& name) const {
        auto it = param_ids_.find(name);
        return it == param_ids_.end() ? -1 : it->second;
    }

private:
    std::vector<Node> nodes_;
    std::map<std::string, NodeId> param_ids_;

    Node make(Op op, std::vector<NodeId> inputs) {
        Node n;
        n.op = op;
        n.inputs = std::move(inputs);
        for (NodeId i : n.inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
        return n;
    }

    NodeId push(Node n) {
        NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(std::move(n));
        if (nodes_[id].op != Op::kInput && nodes_[id].op != Op::kParam)
            forward(id);
        if (!nodes_[id].value.all_finite())
            throw GraphError(id, "non-finite value in forward pass");
        return id;
    }

    const Tensor& in(NodeId id, int k) const { return nodes_[nodes_[id].inputs[k]].value; }

    void forward(NodeId id) {
        Node& n = nodes_[id];
        switch (n.op) {
            case Op::kMatmul: {
                const Tensor& a = in(id, 0);
                const Tensor& b = in(id, 1);
                if (a.rank() != 2)
                    throw GraphError(id, "matmul lhs must be rank 2, got " + shape_str(a));
                if (b.rank() == 1) {
                    if (a.shape[1] != b.shape[0])
                        throw GraphError(id, "matmul shape mismatch " + shape_str(a) + " x " + shape_str(b));
                    n.value = Tensor::zeros({a.shape[0]});
                    for (int i = 0; i < a.shape[0]; ++i) {
                        double s = 0.0;
                        for (int k = 0; k < a.shape[1]; ++k) s += a.at(i, k) * b.at(k);
                        n.value.at(i) = s;
                    }
                } else {
                    if (a.shape[1] != b.shape[0])
                        throw GraphError(id, "matmul shape mismatch " + shape_str(a) + " x " + shape_str(b));
                    n.value = Tensor::zeros({a.shape[0], b.shape[1]});
                    for (int i = 0; i < a.shape[0]; ++i)
                        for (int k = 0; k < a.shape[1]; ++k) {
                            double av = a.at(i, k);
                            if (av == 0.0) continue;
                            for (int j = 0; j < b.shape[1]; ++j)
                                n.value.at(i, j) += av * b.at(k, j);
                        }
                }
                break;
            }
            case Op::kAdd: {
                const Tensor& a = in(id, 0);
                const Tensor& b = in(id, 1);
                if (!a.same_shape(b))
                    throw GraphError(id, "add shape mismatch " + shape_str(a) + " vs " + shape_str(b));
                n.value = a;
                for (int i = 0; i < b.size(); ++i) n.value.at(i) += b.at(i);
                break;
            }
            case Op::kConcat: {
                int total = 0;
                for (NodeId src : n.inputs) {
                    const Tensor& t = nodes_[src].value;
                    if (t.rank() != 1)
                        throw GraphError(id, "concat takes rank-1 inputs, got " + shape_str(t));
                    total += t.size();
                }
                n.value = Tensor::zeros({total});
                int off = 0;
                for (NodeId src : n.inputs)
                    for (double v : nodes_[src].value.data) n.value.at(off++) = v;
                break;
            }
            case Op::kRelu: {
                n.value = in(id, 0);
                for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
                break;
            }
            case Op::kSigmoid: {
                n.value = in(id, 0);
                for (double& v : n.value.data) v = stable_sigmoid(v);
                break;
            }
            case Op::kSoftmax: {
                const Tensor& a = in(id, 0);
                n.value = a;
                int nrows = a.rank() == 2 ? a.shape[0] : 1;
                int ncols = a.rank() == 2 ? a.shape[1] : a.shape[0];
                for (int r = 0; r < nrows; ++r) {
                    double* row = n.value.data.data() + static_cast<std::size_t>(r) * ncols;
                    double mx = *std::max_element(row, row + ncols);
                    double z = 0.0;
                    for (int j = 0; j < ncols; ++j) {
                        row[j] = std::exp(row[j] - mx);
                        z += row[j];
                    }
                    for (int j = 0; j < ncols; ++j) row[j] /= z;
                }
                break;
            }
            case Op::kMeanRows: {
                const Tensor& a = in(id, 0);
                if (a.rank() != 2)
                    throw GraphError(id, "mean_rows needs rank 2, got " + shape_str(a));
                n.value = Tensor::zeros({a.shape[1]});
                for (int i = 0; i < a.shape[0]; ++i)
                    for (int j = 0; j < a.shape[1]; ++j) n.value.at(j) += a.at(i, j);
                for (double& v : n.value.data) v /= a.shape[0];
                break;
            }
            case Op::kSum: {
                double s = 0.0;
                for (double v : in(id, 0).data) s += v;
                n.value = Tensor::scalar(s);
                break;
            }
            case Op::kScale: {
                n.value = in(id, 0);
                for (double& v : n.value.data) v *= n.factor;
                break;
            }
            case Op::kLog: {
                n.value = in(id, 0);
                for (double& v : n.value.data) {
                    if (v <= 0.0) throw GraphError(id, "log of nonpositive value");
                    v = std::log(v);
                }
                break;
            }
            case Op::kExp: {
                n.value = in(id, 0);
                for (double& v : n.value.data) v = std::exp(v);
                break;
            }
            case Op::kMul: {
                const Tensor& a = in(id, 0);
                const Tensor& b = in(id, 1);
                if (a.same_shape(b)) {
                    n.value = a;
                    for (int i = 0; i < b.size(); ++i) n.value.at(i) *= b.at(i);
                } else if (a.is_scalar()) {
                    n.value = b;
                    for (double& v : n.value.data) v *= a.data[0];
                } else if (b.is_scalar()) {
                    n.value = a;
                    for (double& v : n.value.data) v *= b.data[0];
                } else {
                    throw GraphError(id, "mul shape mismatch " + shape_str(a) + " vs " + shape_str(b));
                }
                break;
            }
            case Op::kBce: {
                const Tensor& z = in(id, 0);
                const Tensor& y = in(id, 1);
                if (!z.same_shape(y))
                    throw GraphError(id, "bce shape mismatch " + shape_str(z) + " vs " + shape_str(y));
                n.value = z;
                for (int i = 0; i < z.size(); ++i)
                    n.value.at(i) = softplus(z.at(i)) - y.at(i) * z.at(i);
                break;
            }
            case Op::kLookup: {
                const Tensor& table = in(id, 0);
                if (table.rank() != 2)
                    throw GraphError(id, "lookup table must be rank 2");
                int L = static_cast<int>(n.ids.size());
                int D = table.shape[1];
                n.value = Tensor::zeros({L, D});
                for (int r = 0; r < L; ++r) {
                    int row = n.ids[r];
                    if (row < 0 || row >= table.shape[0])
                        throw GraphError(id, "lookup row " + std::to_string(row) + " out of range");
                    for (int j = 0; j < D; ++j) n.value.at(r, j) = table.at(row, j);
                }
                break;
            }
            case Op::kInput:
            case Op::kParam:
                break;
        }
    }

    void accum(NodeId target, const std::function<void(Tensor&)>& f) {
        Node& t = nodes_[target];
        if (!t.needs_grad) return;
        if (t.grad.data.empty()) t.grad = Tensor::zeros(t.value.shape);
        f(t.grad);
    }

    void backprop(NodeId id) {
        Node& n = nodes_[id];
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::kInput:
            case Op::kParam:
                break;
            case Op::kMatmul: {
                const Tensor& a = in(id, 0);
                const Tensor& b = in(id, 1);
                if (b.rank() == 1) {
                    accum(n.inputs[0], [&](Tensor& da) {
                        for (int i = 0; i < a.shape[0]; ++i)
                            for (int k = 0; k < a.shape[1]; ++k) da.at(i, k) += g.at(i) * b.at(k);
                    });
                    accum(n.inputs[1], [&](Tensor& db) {
                        for (int i = 0; i < a.shape[0]; ++i)
                            for (int k = 0; k < a.shape[1]; ++k) db.at(k) += g.at(i) * a.at(i, k);
                    });
                } else {
                    accum(n.inputs[0], [&](Tensor& da) {
                        for (int i = 0; i < a.shape[0]; ++i)
                            for (int k = 0; k < a.shape[1]; ++k) {
                                double s = 0.0;
                                for (int j = 0; j < b.shape[1]; ++j) s += g.at(i, j) * b.at(k, j);
                                da.at(i, k) += s;
                            }
                    });
                    accum(n.inputs[1], [&](Tensor& db) {
                        for (int k = 0; k < b.shape[0]; ++k)
                            for (int j = 0; j < b.shape[1]; ++j) {
                                double s = 0.0;
                                for (int i = 0; i < a.shape[0]; ++i) s += a.at(i, k) * g.at(i, j);
                                db.at(k, j) += s;
                            }
                    });
                }
                break;
            }
            case Op::kAdd:
                for (int side = 0; side < 2; ++side)
                    accum(n.inputs[side], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i);
                    });
                break;
            case Op::kConcat: {
                int off = 0;
                for (NodeId src : n.inputs) {
                    int len = nodes_[src].value.size();
                    int base = off;
                    accum(src, [&](Tensor& d) {
                        for (int i = 0; i < len; ++i) d.at(i) += g.at(base + i);
                    });
                    off += len;
                }
                break;
            }
            case Op::kRelu: {
                const Tensor& x = in(id, 0);
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i)
                        if (x.at(i) > 0.0) d.at(i) += g.at(i);
                });
                break;
            }
            case Op::kSigmoid: {
                const Tensor& s = n.value;
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * s.at(i) * (1.0 - s.at(i));
                });
                break;
            }
            case Op::kSoftmax: {
                const Tensor& s = n.value;
                int nrows = s.rank() == 2 ? s.shape[0] : 1;
                int ncols = s.rank() == 2 ? s.shape[1] : s.shape[0];
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int r = 0; r < nrows; ++r) {
                        const double* sr = s.data.data() + static_cast<std::size_t>(r) * ncols;
                        const double* gr = g.data.data() + static_cast<std::size_t>(r) * ncols;
                        double dotgs = 0.0;
                        for (int j = 0; j < ncols; ++j) dotgs += gr[j] * sr[j];
                        double* dr = d.data.data() + static_cast<std::size_t>(r) * ncols;
                        for (int j = 0; j < ncols; ++j) dr[j] += sr[j] * (gr[j] - dotgs);
                    }
                });
                break;
            }
            case Op::kMeanRows: {
                const Tensor& a = in(id, 0);
                double inv = 1.0 / a.shape[0];
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < a.shape[0]; ++i)
                        for (int j = 0; j < a.shape[1]; ++j) d.at(i, j) += g.at(j) * inv;
                });
                break;
            }
            case Op::kSum:
                accum(n.inputs[0], [&](Tensor& d) {
                    for (double& v : d.data) v += g.data[0];
                });
                break;
            case Op::kScale:
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * n.factor;
                });
                break;
            case Op::kLog: {
                const Tensor& x = in(id, 0);
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) / x.at(i);
                });
                break;
            }
            case Op::kExp: {
                const Tensor& e = n.value;
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * e.at(i);
                });
                break;
            }
            case Op::kMul: {
                const Tensor& a = in(id, 0);
                const Tensor& b = in(id, 1);
                if (a.same_shape(b)) {
                    accum(n.inputs[0], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * b.at(i);
                    });
                    accum(n.inputs[1], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * a.at(i);
                    });
                } else if (a.is_scalar()) {
                    accum(n.inputs[0], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.data[0] += g.at(i) * b.at(i);
                    });
                    accum(n.inputs[1], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * a.data[0];
                    });
                } else {
                    accum(n.inputs[0], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.at(i) += g.at(i) * b.data[0];
                    });
                    accum(n.inputs[1], [&](Tensor& d) {
                        for (int i = 0; i < g.size(); ++i) d.data[0] += g.at(i) * a.at(i);
                    });
                }
                break;
            }
            case Op::kBce: {
                const Tensor& z = in(id, 0);
                const Tensor& y = in(id, 1);
                accum(n.inputs[0], [&](Tensor& d) {
                    for (int i = 0; i < g.size(); ++i)
                        d.at(i) += g.at(i) * (stable_sigmoid(z.at(i)) - y.at(i));
                });
                break;
            }
            case Op::kLookup: {
                accum(n.inputs[0], [&](Tensor& d) {
                    int D = d.shape[1];
                    for (std::size_t r = 0; r < n.ids.size(); ++r)
                        for (int j = 0; j < D; ++j)
                            d.at(n.ids[r], j) += g.at(static_cast<int>(r), j);
                });
                break;
            }
        }
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
    }

    static double softplus(double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
};

}  // namespace srfm
