#include "notesurv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "notesurv/kernels.hpp"

namespace notesurv::ad {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "selu") return Activation::selu;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "selu";
}

void ParamStore::add(const std::string& name, Tensor init) {
    if (has(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    index_[name] = values_.size();
    order_.push_back(name);
    grads_.push_back(Tensor::zeros(init.shape));
    values_.push_back(std::move(init));
}

Tensor& ParamStore::value(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
    return values_[it->second];
}

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
    return values_[it->second];
}

Tensor& ParamStore::grad(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
    return grads_[it->second];
}

const Tensor& ParamStore::grad(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
    return grads_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& g : grads_) std::fill(g.v.begin(), g.v.end(), 0.0);
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& t : values_) n += t.numel();
    return n;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& x : t.v) x = (2.0 * rng.uniform() - 1.0) * limit;
    return t;
}

NodeId Tape::push(Tensor value, bool needs_grad,
                  std::function<void(Tape&, const Tensor&)> back) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Tape::input(Tensor value) { return push(std::move(value), false, nullptr); }

NodeId Tape::param(const std::string& name) {
    if (!params_) throw std::logic_error("Tape::param: no ParamStore bound");
    NodeId id = push(params_->value(name), true, nullptr);
    nodes_[id].param = name;
    return id;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + ta.shape_str() + " x " +
                                    tb.shape_str());
    const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out = Tensor::zeros({m, n});
    kern::gemm_nn(ta.v.data(), tb.v.data(), out.v.data(), m, k, n);
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(out), ng, [a, b, m, k, n](Tape& t, const Tensor& g) {
        if (t.nodes_[a].needs_grad) {
            // dA = g * B^T
            std::vector<double> tmp(m * k);
            kern::gemm_nt(g.v.data(), t.nodes_[b].value.v.data(), tmp.data(), m, n, k);
            double* ga = t.grad_ref(a).v.data();
            for (std::size_t i = 0; i < tmp.size(); ++i) ga[i] += tmp[i];
        }
        if (t.nodes_[b].needs_grad) {
            // dB = A^T * g
            std::vector<double> tmp(k * n);
            kern::gemm_tn(t.nodes_[a].value.v.data(), g.v.data(), tmp.data(), k, m, n);
            double* gb = t.grad_ref(b).v.data();
            for (std::size_t i = 0; i < tmp.size(); ++i) gb[i] += tmp[i];
        }
    });
}

NodeId Tape::transpose(NodeId a) {
    const Tensor& ta = nodes_[a].value;
    if (ta.rank() != 2) throw std::invalid_argument("transpose: expects rank 2");
    const std::size_t r = ta.rows(), c = ta.cols();
    Tensor out = Tensor::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = ta.at(i, j);
    return push(std::move(out), nodes_[a].needs_grad, [a, r, c](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        Tensor& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
    });
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    bool broadcast = false;
    if (!ta.same_shape(tb)) {
        if (ta.rank() == 2 && tb.rank() == 2 && tb.rows() == 1 && tb.cols() == ta.cols())
            broadcast = true;
        else
            throw std::invalid_argument("add: incompatible shapes " + ta.shape_str() + " + " +
                                        tb.shape_str());
    }
    Tensor out = ta;
    if (broadcast) {
        for (std::size_t r = 0; r < ta.rows(); ++r)
            for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) += tb.v[c];
    } else {
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    }
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(out), ng, [a, b, broadcast](Tape& t, const Tensor& g) {
        if (t.nodes_[a].needs_grad) {
            double* ga = t.grad_ref(a).v.data();
            for (std::size_t i = 0; i < g.v.size(); ++i) ga[i] += g.v[i];
        }
        if (t.nodes_[b].needs_grad) {
            double* gb = t.grad_ref(b).v.data();
            if (broadcast) {
                const std::size_t cols = t.nodes_[b].value.cols();
                const std::size_t rows = g.v.size() / cols;
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += g.v[r * cols + c];
            } else {
                for (std::size_t i = 0; i < g.v.size(); ++i) gb[i] += g.v[i];
            }
        }
    });
}

NodeId Tape::scale(NodeId a, double c) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x *= c;
    return push(std::move(out), nodes_[a].needs_grad, [a, c](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        double* ga = t.grad_ref(a).v.data();
        for (std::size_t i = 0; i < g.v.size(); ++i) ga[i] += c * g.v[i];
    });
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t rows = nodes_[parts[0]].value.rows();
    std::size_t cols = 0;
    bool ng = false;
    for (NodeId p : parts) {
        const Tensor& tp = nodes_[p].value;
        if (tp.rank() != 2 || tp.rows() != rows)
            throw std::invalid_argument("concat_cols: row mismatch at " + tp.shape_str());
        cols += tp.cols();
        ng = ng || nodes_[p].needs_grad;
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::size_t off = 0;
    for (NodeId p : parts) {
        const Tensor& tp = nodes_[p].value;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < tp.cols(); ++c) out.at(r, off + c) = tp.at(r, c);
        off += tp.cols();
    }
    std::vector<NodeId> ps = parts;
    return push(std::move(out), ng, [ps, rows](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (NodeId p : ps) {
            const std::size_t pc = t.nodes_[p].value.cols();
            if (t.nodes_[p].needs_grad) {
                Tensor& gp = t.grad_ref(p);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < pc; ++c) gp.at(r, c) += g.at(r, off + c);
            }
            off += pc;
        }
    });
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t cols = nodes_[parts[0]].value.cols();
    std::size_t rows = 0;
    bool ng = false;
    for (NodeId p : parts) {
        const Tensor& tp = nodes_[p].value;
        if (tp.rank() != 2 || tp.cols() != cols)
            throw std::invalid_argument("concat_rows: column mismatch at " + tp.shape_str());
        rows += tp.rows();
        ng = ng || nodes_[p].needs_grad;
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::size_t off = 0;
    for (NodeId p : parts) {
        const Tensor& tp = nodes_[p].value;
        std::copy(tp.v.begin(), tp.v.end(), out.v.begin() + off * cols);
        off += tp.rows();
    }
    std::vector<NodeId> ps = parts;
    return push(std::move(out), ng, [ps, cols](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (NodeId p : ps) {
            const std::size_t pr = t.nodes_[p].value.rows();
            if (t.nodes_[p].needs_grad) {
                Tensor& gp = t.grad_ref(p);
                for (std::size_t i = 0; i < pr * cols; ++i) gp.v[i] += g.v[off * cols + i];
            }
            off += pr;
        }
    });
}

NodeId Tape::softmax_rows(NodeId a, const std::vector<std::uint8_t>* key_mask) {
    const Tensor& ta = nodes_[a].value;
    if (ta.rank() != 2) throw std::invalid_argument("softmax_rows: expects rank 2");
    if (key_mask && key_mask->size() != ta.cols())
        throw std::invalid_argument("softmax_rows: mask length != cols");
    Tensor out = Tensor::zeros(ta.shape);
    kern::softmax_rows(ta.v.data(), out.v.data(), ta.rows(), ta.cols(),
                       key_mask ? key_mask->data() : nullptr);
    NodeId id = push(std::move(out), nodes_[a].needs_grad, nullptr);
    nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        const Tensor& w = t.nodes_[id].value;
        Tensor& ga = t.grad_ref(a);
        const std::size_t rows = w.rows(), cols = w.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g.at(r, c) * w.at(r, c);
            for (std::size_t c = 0; c < cols; ++c)
                ga.at(r, c) += w.at(r, c) * (g.at(r, c) - dot);  // masked cols: w == 0
        }
    };
    return id;
}

NodeId Tape::relu(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), nodes_[a].needs_grad, [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        const Tensor& in = t.nodes_[a].value;
        double* ga = t.grad_ref(a).v.data();
        for (std::size_t i = 0; i < g.v.size(); ++i)
            if (in.v[i] > 0.0) ga[i] += g.v[i];
    });
}

NodeId Tape::selu(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v)
        x = x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
    return push(std::move(out), nodes_[a].needs_grad, [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        const Tensor& in = t.nodes_[a].value;
        double* ga = t.grad_ref(a).v.data();
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            double d = in.v[i] > 0.0 ? kSeluLambda
                                     : kSeluLambda * kSeluAlpha * std::exp(in.v[i]);
            ga[i] += d * g.v[i];
        }
    });
}

NodeId Tape::activation(NodeId a, Activation act) {
    return act == Activation::relu ? relu(a) : selu(a);
}

NodeId Tape::sigmoid(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& x : out.v) {
        if (x >= 0.0) {
            x = 1.0 / (1.0 + std::exp(-x));
        } else {
            double e = std::exp(x);
            x = e / (1.0 + e);
        }
    }
    NodeId id = push(std::move(out), nodes_[a].needs_grad, nullptr);
    nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].needs_grad) return;
        const Tensor& s = t.nodes_[id].value;
        double* ga = t.grad_ref(a).v.data();
        for (std::size_t i = 0; i < g.v.size(); ++i) ga[i] += s.v[i] * (1.0 - s.v[i]) * g.v[i];
    };
    return id;
}

NodeId Tape::dropout(NodeId a, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (!training || p == 0.0) {
        // identity in eval mode
        Tensor out = nodes_[a].value;
        return push(std::move(out), nodes_[a].needs_grad, [a](Tape& t, const Tensor& g) {
            if (!t.nodes_[a].needs_grad) return;
            double* ga = t.grad_ref(a).v.data();
            for (std::size_t i = 0; i < g.v.size(); ++i) ga[i] += g.v[i];
        });
    }
    const double keep = 1.0 - p;
    std::vector<double> mask(nodes_[a].value.numel());
    for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : 1.0 / keep;  // inverted scaling
    Tensor out = nodes_[a].value;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask[i];
    return push(std::move(out), nodes_[a].needs_grad,
                [a, mask = std::move(mask)](Tape& t, const Tensor& g) {
                    if (!t.nodes_[a].needs_grad) return;
                    double* ga = t.grad_ref(a).v.data();
                    for (std::size_t i = 0; i < g.v.size(); ++i) ga[i] += mask[i] * g.v[i];
                });
}

NodeId Tape::mean(NodeId a) {
    const Tensor& ta = nodes_[a].value;
    if (ta.numel() == 0) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : ta.v) s += x;
    const double inv = 1.0 / static_cast<double>(ta.numel());
    return push(Tensor::scalar(s * inv), nodes_[a].needs_grad,
                [a, inv](Tape& t, const Tensor& g) {
                    if (!t.nodes_[a].needs_grad) return;
                    double* ga = t.grad_ref(a).v.data();
                    const double gs = g.v[0] * inv;
                    for (std::size_t i = 0; i < t.nodes_[a].value.numel(); ++i) ga[i] += gs;
                });
}

NodeId Tape::gather_rows(NodeId a, const std::vector<std::size_t>& row_ids) {
    const Tensor& ta = nodes_[a].value;
    if (ta.rank() != 2) throw std::invalid_argument("gather_rows: expects rank 2");
    const std::size_t cols = ta.cols();
    for (std::size_t r : row_ids)
        if (r >= ta.rows())
            throw std::out_of_range("gather_rows: row " + std::to_string(r) +
                                    " out of range for " + ta.shape_str());
    Tensor out = Tensor::zeros({row_ids.size(), cols});
    for (std::size_t i = 0; i < row_ids.size(); ++i)
        std::copy(ta.v.begin() + row_ids[i] * cols, ta.v.begin() + (row_ids[i] + 1) * cols,
                  out.v.begin() + i * cols);
    std::vector<std::size_t> ids = row_ids;
    return push(std::move(out), nodes_[a].needs_grad,
                [a, ids = std::move(ids), cols](Tape& t, const Tensor& g) {
                    if (!t.nodes_[a].needs_grad) return;
                    Tensor& ga = t.grad_ref(a);
                    for (std::size_t i = 0; i < ids.size(); ++i)
                        for (std::size_t c = 0; c < cols; ++c)
                            ga.v[ids[i] * cols + c] += g.v[i * cols + c];
                });
}

NodeId Tape::bce_loss(NodeId probs, const std::vector<double>& labels) {
    const Tensor& tp = nodes_[probs].value;
    const std::size_t n = tp.numel();
    if (n == 0) throw std::invalid_argument("bce_loss: empty input");
    if (labels.size() != n) throw std::invalid_argument("bce_loss: probs/labels length mismatch");
    constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = std::min(hi, std::max(lo, tp.v[i]));
        double y = labels[i];
        s += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<double> ys = labels;
    return push(Tensor::scalar(s * inv), nodes_[probs].needs_grad,
                [probs, ys = std::move(ys), inv](Tape& t, const Tensor& g) {
                    if (!t.nodes_[probs].needs_grad) return;
                    const Tensor& tp = t.nodes_[probs].value;
                    double* gp = t.grad_ref(probs).v.data();
                    for (std::size_t i = 0; i < tp.numel(); ++i) {
                        double p = tp.v[i];
                        if (p <= lo || p >= hi) continue;  // clip region: zero slope
                        gp[i] += g.v[0] * inv * (p - ys[i]) / (p * (1.0 - p));
                    }
                });
}

namespace {
struct PllPlan {
    // per record: shifted Breslow accumulator evaluated at its own time
    std::vector<double> cum_shifted;
    double shift = 0.0;
    double n_events = 0.0;
};

// Shared forward computation for value and gradient. Risk sets are by >=,
// tied events share the full risk-set denominator.
PllPlan pll_plan(const std::vector<double>& h, const std::vector<double>& times,
                 const std::vector<double>& events, double* loss_out) {
    const std::size_t n = h.size();
    PllPlan plan;
    plan.cum_shifted.assign(n, 0.0);
    double ne = 0.0;
    for (double e : events) ne += e;
    if (ne == 0.0) throw std::runtime_error("PLL undefined without observed events");
    plan.n_events = ne;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) return times[a] > times[b];
        return a < b;
    });

    double m = h[order[0]];
    for (double x : h) m = std::max(m, x);
    plan.shift = m;

    double sexp = 0.0;   // sum of exp(h - m) over the running risk set
    double terms = 0.0;  // sum over events of (h_i - logsumexp over risk set)
    std::vector<double> group_inc;          // d_g / sexp_g per distinct time, descending
    std::vector<std::size_t> group_begin;   // start index in `order` per group
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && times[order[j]] == times[order[i]]) ++j;
        for (std::size_t t = i; t < j; ++t) sexp += std::exp(h[order[t]] - m);
        double d = 0.0;
        for (std::size_t t = i; t < j; ++t) {
            if (events[order[t]] != 0.0) {
                terms += h[order[t]] - (std::log(sexp) + m);
                d += 1.0;
            }
        }
        group_inc.push_back(d > 0.0 ? d / sexp : 0.0);
        group_begin.push_back(i);
        i = j;
    }
    if (loss_out) *loss_out = -terms / ne;

    // ascending-time accumulation of d_g / sexp_g gives the shifted Breslow
    // value at each record's own time
    double running = 0.0;
    for (std::size_t gi = group_inc.size(); gi-- > 0;) {
        running += group_inc[gi];
        std::size_t end = (gi + 1 < group_begin.size()) ? group_begin[gi + 1] : n;
        for (std::size_t t = group_begin[gi]; t < end; ++t)
            plan.cum_shifted[order[t]] = running;
    }
    return plan;
}
}  // namespace

NodeId Tape::pll_loss(NodeId risks, const std::vector<double>& times,
                      const std::vector<double>& events) {
    const Tensor& tr = nodes_[risks].value;
    const std::size_t n = tr.numel();
    if (times.size() != n || events.size() != n)
        throw std::invalid_argument("pll_loss: risks/times/events length mismatch");
    for (double e : events)
        if (e != 0.0 && e != 1.0) throw std::invalid_argument("pll_loss: events must be 0/1");
    double loss = 0.0;
    pll_plan(tr.v, times, events, &loss);
    std::vector<double> ts = times, es = events;
    return push(Tensor::scalar(loss), nodes_[risks].needs_grad,
                [risks, ts = std::move(ts), es = std::move(es)](Tape& t, const Tensor& g) {
                    if (!t.nodes_[risks].needs_grad) return;
                    const Tensor& h = t.nodes_[risks].value;
                    PllPlan plan = pll_plan(h.v, ts, es, nullptr);
                    double* gr = t.grad_ref(risks).v.data();
                    const double inv = 1.0 / plan.n_events;
                    for (std::size_t i = 0; i < h.numel(); ++i) {
                        double soft = std::exp(h.v[i] - plan.shift) * plan.cum_shifted[i];
                        gr[i] += g.v[0] * (-inv) * (es[i] - soft);
                    }
                });
}

void Tape::backward(NodeId loss) {
    if (loss >= nodes_.size()) throw std::out_of_range("backward: bad node id");
    if (nodes_[loss].value.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    nodes_[loss].value.shape_str());
    nodes_[loss].grad.v[0] = 1.0;
    for (std::size_t id = loss + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.needs_grad || !node.back) continue;
        node.back(*this, node.grad);
    }
    if (params_) {
        for (std::size_t id = 0; id <= loss; ++id) {
            if (nodes_[id].param.empty()) continue;
            Tensor& g = params_->grad(nodes_[id].param);
            const Tensor& ng = nodes_[id].grad;
            for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += ng.v[i];
        }
    }
}

void adam_step(AdamState& state, ParamStore& params) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (const std::string& name : params.names()) {
        Tensor& g = params.grad(name);
        for (double x : g.v)
            if (!std::isfinite(x))
                throw std::runtime_error("adam_step: non-finite gradient in " + name);
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            state.m.emplace(name, Tensor::zeros(g.shape));
            state.v.emplace(name, Tensor::zeros(g.shape));
        }
        Tensor& m = state.m[name];
        Tensor& v = state.v[name];
        Tensor& theta = params.value(name);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            m.v[i] = state.beta1 * m.v[i] + (1.0 - state.beta1) * g.v[i];
            v.v[i] = state.beta2 * v.v[i] + (1.0 - state.beta2) * g.v[i] * g.v[i];
            double mhat = m.v[i] / bc1;
            double vhat = v.v[i] / bc2;
            theta.v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        std::fill(g.v.begin(), g.v.end(), 0.0);
    }
}

std::string params_to_json_string(const ParamStore& params) {
    nlohmann::json j;
    j["format_version"] = 1;
    nlohmann::json list = nlohmann::json::array();
    for (const std::string& name : params.names()) {
        const Tensor& t = params.value(name);
        list.push_back({{"name", name}, {"shape", t.shape}, {"values", t.v}});
    }
    j["params"] = list;
    return j.dump();
}

ParamStore params_from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("params checkpoint: unsupported format version");
    ParamStore store;
    for (const auto& p : j.at("params")) {
        Tensor t;
        t.shape = p.at("shape").get<std::vector<std::size_t>>();
        t.v = p.at("values").get<std::vector<double>>();
        std::size_t n = 1;
        for (std::size_t d : t.shape) n *= d;
        if (n != t.v.size()) throw std::runtime_error("params checkpoint: shape/value mismatch");
        store.add(p.at("name").get<std::string>(), std::move(t));
    }
    return store;
}

void save_params(const ParamStore& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    out << params_to_json_string(params) << '\n';
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

ParamStore load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return params_from_json_string(text);
}

double grad_check(const std::function<NodeId(Tape&)>& f, ParamStore& params, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

    params.zero_grad();
    Tape tape(&params);
    NodeId loss = f(tape);
    tape.backward(loss);

    std::vector<std::pair<std::string, Tensor>> analytic;
    for (const std::string& name : params.names()) analytic.emplace_back(name, params.grad(name));
    params.zero_grad();

    auto eval = [&]() {
        Tape t(&params);
        NodeId id = f(t);
        double val = t.value(id).v[0];
        if (!std::isfinite(val)) throw std::runtime_error("grad_check: non-finite loss value");
        return val;
    };

    double max_err = 0.0;
    for (auto& [name, ga] : analytic) {
        Tensor& theta = params.value(name);
        for (std::size_t i = 0; i < theta.v.size(); ++i) {
            const double orig = theta.v[i];
            theta.v[i] = orig + eps;
            double fp = eval();
            theta.v[i] = orig - eps;
            double fm = eval();
            theta.v[i] = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = ga.v[i];
            if (!std::isfinite(a) || !std::isfinite(numeric))
                throw std::runtime_error("grad_check: non-finite derivative");
            double err = std::fabs(a - numeric) /
                         std::max({1.0, std::fabs(a), std::fabs(numeric)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace notesurv::ad
