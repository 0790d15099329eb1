// SPDX-License-Identifier: Apache-2.0
//
// A small fully connected classifier used as a self-contained source of
// activations and gradients: an affine input adapter, L equal-width hidden
// units (ReLU, optionally residual) and an affine output head.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sglp/activation_io.hpp"
#include "sglp/error.hpp"
#include "sglp/matrix.hpp"
#include "sglp/rng.hpp"

namespace sglp {

struct NetworkSpec {
    std::size_t input_dim = 2;
    std::size_t width = 8;
    std::size_t hidden_layers = 4;
    std::size_t classes = 2;
    bool residual = true;
    std::uint64_t seed = 0;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline void validate(const NetworkSpec& spec) {
    if (spec.input_dim < 1) fail_usage("network input_dim must be >= 1");
    if (spec.width < 1) fail_usage("network width must be >= 1");
    if (spec.hidden_layers < 1) fail_usage("network needs at least one hidden unit");
    if (spec.classes < 2) fail_usage("network needs at least 2 classes");
}

/// w*(input_dim+1) + L*w*(w+1) + classes*(w+1)
inline std::size_t parameter_count(const NetworkSpec& spec) {
    const std::size_t w = spec.width;
    return w * (spec.input_dim + 1) + spec.hidden_layers * w * (w + 1) + spec.classes * (w + 1);
}

/// Affine map x -> xW + b with W stored inputs x outputs.
struct Dense {
    Matrix weight;
    std::vector<double> bias;

    Dense() = default;
    Dense(std::size_t in, std::size_t out) : weight(in, out), bias(out, 0.0) {}

    friend bool operator==(const Dense&, const Dense&) = default;
};

struct Parameters {
    Dense adapter;
    std::vector<Dense> units;
    Dense head;

    /// Visits every tensor in declaration order: adapter W, b, each unit's
    /// W, b, then head W, b.
    template <typename F>
    void for_each_tensor(F&& fn) {
        auto visit = [&](Dense& d) {
            fn(d.weight.values());
            fn(std::span<double>(d.bias));
        };
        visit(adapter);
        for (auto& u : units) visit(u);
        visit(head);
    }
    template <typename F>
    void for_each_tensor(F&& fn) const {
        auto visit = [&](const Dense& d) {
            fn(d.weight.values());
            fn(std::span<const double>(d.bias));
        };
        visit(adapter);
        for (const auto& u : units) visit(u);
        visit(head);
    }

    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for_each_tensor([&](auto span) { n += span.size(); });
        return n;
    }

    [[nodiscard]] std::vector<double> flatten() const {
        std::vector<double> flat;
        for_each_tensor([&](auto span) { flat.insert(flat.end(), span.begin(), span.end()); });
        return flat;
    }

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct Network {
    NetworkSpec spec;
    Parameters params;

    friend bool operator==(const Network&, const Network&) = default;
};

/// Gradients of the loss, shape-congruent with a network's parameters.
struct GradientSet {
    Parameters tensors;
};

struct Dataset {
    Matrix features;
    std::vector<std::size_t> labels;
    std::size_t classes = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

namespace detail {

// Stream ids for parameter draws. Hidden unit j always draws from its own
// stream so a re-initialized unit is independent of which others are kept.
inline constexpr std::uint64_t kAdapterStream = 0;
inline constexpr std::uint64_t kHeadStream = 1;
inline constexpr std::uint64_t kUnitStreamBase = 1000;

inline Dense draw_dense(std::size_t in, std::size_t out, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Dense d(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : d.weight.values()) v = rng.uniform(-bound, bound);
    for (double& v : d.bias) v = rng.uniform(-bound, bound);
    return d;
}

inline Dense draw_unit(std::size_t width, std::uint64_t seed, std::size_t unit) {
    return draw_dense(width, width, seed, kUnitStreamBase + unit);
}

inline void affine_into(const Matrix& x, const Dense& d, Matrix& out) {
    out = matmul(x, d.weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += d.bias[j];
    }
}

struct ForwardTrace {
    Matrix adapter_out;                 // input to unit 0
    std::vector<Matrix> pre;            // per unit, xW + b
    std::vector<Matrix> out;            // per unit, unit output
    Matrix logits;
};

inline ForwardTrace run_forward(const Network& net, const Matrix& batch) {
    if (batch.cols() != net.spec.input_dim)
        fail_data("batch has " + std::to_string(batch.cols()) + " features, network expects " +
                  std::to_string(net.spec.input_dim));
    ForwardTrace t;
    affine_into(batch, net.params.adapter, t.adapter_out);
    const Matrix* x = &t.adapter_out;
    t.pre.resize(net.params.units.size());
    t.out.resize(net.params.units.size());
    for (std::size_t u = 0; u < net.params.units.size(); ++u) {
        affine_into(*x, net.params.units[u], t.pre[u]);
        Matrix h = t.pre[u];
        for (double& v : h.values()) v = v > 0.0 ? v : 0.0;
        if (net.spec.residual) {
            auto hv = h.values();
            auto xv = x->values();
            for (std::size_t i = 0; i < hv.size(); ++i) hv[i] = xv[i] + hv[i];
        }
        t.out[u] = std::move(h);
        x = &t.out[u];
    }
    affine_into(*x, net.params.head, t.logits);
    return t;
}

inline void check_labels(const std::vector<std::size_t>& labels, std::size_t rows,
                         std::size_t classes) {
    if (labels.size() != rows)
        fail_data("label count " + std::to_string(labels.size()) + " does not match " +
                  std::to_string(rows) + " rows");
    for (auto y : labels)
        if (y >= classes)
            fail_data("label " + std::to_string(y) + " out of range for " +
                      std::to_string(classes) + " classes");
}

}  // namespace detail

inline Network build_network(const NetworkSpec& spec) {
    validate(spec);
    Network net;
    net.spec = spec;
    net.params.adapter = detail::draw_dense(spec.input_dim, spec.width, spec.seed,
                                            detail::kAdapterStream);
    for (std::size_t u = 0; u < spec.hidden_layers; ++u)
        net.params.units.push_back(detail::draw_unit(spec.width, spec.seed, u));
    net.params.head = detail::draw_dense(spec.width, spec.classes, spec.seed, detail::kHeadStream);
    return net;
}

struct ForwardResult {
    Matrix logits;
    std::optional<ActivationSet> activations;
};

/// Logits for a batch; with `capture`, also each hidden unit's output as an
/// activation set (one layer per unit, named "unit<j>" with 1-based j).
inline ForwardResult forward(const Network& net, const Matrix& batch, bool capture = false) {
    auto trace = detail::run_forward(net, batch);
    ForwardResult r;
    r.logits = std::move(trace.logits);
    if (capture) {
        ActivationSet set;
        for (std::size_t u = 0; u < trace.out.size(); ++u)
            set.layers.push_back({"unit" + std::to_string(u + 1), std::move(trace.out[u])});
        r.activations = std::move(set);
    }
    return r;
}

/// Mean cross-entropy over rows, with log-sum-exp stabilization.
inline double loss(const Matrix& logits, const std::vector<std::size_t>& labels) {
    detail::check_labels(labels, logits.rows(), logits.cols());
    if (logits.rows() == 0) fail_data("loss of an empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double se = 0.0;
        for (double v : row) se += std::exp(v - mx);
        total += (mx + std::log(se)) - row[labels[i]];
    }
    return total / static_cast<double>(logits.rows());
}

struct LossAndGradient {
    double loss = 0.0;
    GradientSet gradient;
};

/// Reverse-mode gradient of the mean cross-entropy.
inline LossAndGradient loss_and_gradient(const Network& net, const Matrix& batch,
                                         const std::vector<std::size_t>& labels) {
    detail::check_labels(labels, batch.rows(), net.spec.classes);
    const auto trace = detail::run_forward(net, batch);
    const std::size_t n = batch.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    LossAndGradient out;
    out.loss = loss(trace.logits, labels);

    // d loss / d logits = (softmax - onehot) / n
    Matrix grad_logits(n, net.spec.classes);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = trace.logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double se = 0.0;
        for (double v : row) se += std::exp(v - mx);
        for (std::size_t c = 0; c < row.size(); ++c)
            grad_logits(i, c) = std::exp(row[c] - mx) / se * inv_n;
        grad_logits(i, labels[i]) -= inv_n;
    }

    auto dense_grad = [](const Matrix& input, const Matrix& grad_out, const Dense& layer,
                         Dense& g) -> Matrix {
        g.weight = matmul_tn(input, grad_out);
        g.bias.assign(grad_out.cols(), 0.0);
        for (std::size_t i = 0; i < grad_out.rows(); ++i)
            for (std::size_t j = 0; j < grad_out.cols(); ++j) g.bias[j] += grad_out(i, j);
        return matmul_nt(grad_out, layer.weight);
    };

    Parameters& g = out.gradient.tensors;
    g.units.resize(net.params.units.size());
    const std::size_t L = net.params.units.size();
    const Matrix& last = L == 0 ? trace.adapter_out : trace.out[L - 1];
    Matrix grad_h = dense_grad(last, grad_logits, net.params.head, g.head);

    for (std::size_t u = L; u-- > 0;) {
        const Matrix& input = u == 0 ? trace.adapter_out : trace.out[u - 1];
        Matrix grad_pre = grad_h;
        auto gp = grad_pre.values();
        auto pre = trace.pre[u].values();
        for (std::size_t i = 0; i < gp.size(); ++i)
            if (!(pre[i] > 0.0)) gp[i] = 0.0;
        Matrix grad_in = dense_grad(input, grad_pre, net.params.units[u], g.units[u]);
        if (net.spec.residual) {
            auto gi = grad_in.values();
            auto gh = grad_h.values();
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += gh[i];
        }
        grad_h = std::move(grad_in);
    }
    dense_grad(batch, grad_h, net.params.adapter, g.adapter);
    return out;
}

inline GradientSet backward(const Network& net, const Matrix& batch,
                            const std::vector<std::size_t>& labels) {
    return loss_and_gradient(net, batch, labels).gradient;
}

/// Euclidean norm of all gradient entries taken as one flat vector.
inline double grad_norm(const GradientSet& g) {
    double sq = 0.0;
    g.tensors.for_each_tensor([&](auto span) {
        for (double v : span) sq += v * v;
    });
    return std::sqrt(sq);
}

enum class InitScope { literal, local };

inline std::string to_string(InitScope s) { return s == InitScope::literal ? "literal" : "local"; }

inline InitScope parse_scope(std::string_view s) {
    if (s == "literal") return InitScope::literal;
    if (s == "local") return InitScope::local;
    fail_usage("unknown mode '" + std::string(s) + "' (expected literal or local)");
}

/// Half-open range of hidden unit indices.
struct UnitRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Mixes pretrained and freshly drawn hidden units. `kept` holds 0-based unit
/// indices that retain pretrained weights. In literal scope every other unit
/// is re-drawn; in local scope only non-kept units inside `segment` are.
/// Adapter and head always keep pretrained weights.
inline Network hybrid_init(const Network& pretrained, const std::set<std::size_t>& kept,
                           InitScope scope, std::optional<UnitRange> segment, std::uint64_t seed) {
    if (kept.empty()) fail_usage("hybrid_init: kept set is empty");
    const std::size_t L = pretrained.params.units.size();
    if (*kept.rbegin() >= L) fail_usage("hybrid_init: kept unit out of range");
    if (scope == InitScope::local) {
        if (!segment) fail_usage("hybrid_init: local scope needs a segment range");
        if (segment->begin >= segment->end || segment->end > L)
            fail_usage("hybrid_init: invalid segment range");
    }
    Network net = pretrained;
    for (std::size_t u = 0; u < L; ++u) {
        if (kept.count(u)) continue;
        if (scope == InitScope::local && (u < segment->begin || u >= segment->end)) continue;
        net.params.units[u] = detail::draw_unit(pretrained.spec.width, seed, u);
    }
    return net;
}

/// Keeps exactly the listed hidden units (strictly increasing, 0-based).
inline Network prune(const Network& net, const std::vector<std::size_t>& kept) {
    if (kept.empty()) fail_usage("prune: kept list is empty");
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] >= net.params.units.size()) fail_usage("prune: unit index out of range");
        if (i > 0 && kept[i] <= kept[i - 1]) fail_usage("prune: kept list must be strictly increasing");
    }
    Network out;
    out.spec = net.spec;
    out.spec.hidden_layers = kept.size();
    out.params.adapter = net.params.adapter;
    out.params.head = net.params.head;
    for (auto u : kept) out.params.units.push_back(net.params.units[u]);
    return out;
}

inline std::size_t predict_row(std::span<const double> logits) {
    return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

inline double accuracy(const Network& net, const Dataset& data) {
    if (data.size() == 0) fail_data("accuracy of an empty dataset");
    const auto logits = forward(net, data.features).logits;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (predict_row(logits.row(i)) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Rows [begin, begin + count) of `data`.
inline Dataset slice(const Dataset& data, std::size_t begin, std::size_t count) {
    if (begin + count > data.size()) fail_usage("dataset slice out of range");
    Dataset out;
    out.classes = data.classes;
    out.features = Matrix(count, data.features.cols());
    for (std::size_t i = 0; i < count; ++i) {
        auto src = data.features.row(begin + i);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(data.labels[begin + i]);
    }
    return out;
}

inline Dataset gather(const Dataset& data, std::span<const std::size_t> rows) {
    Dataset out;
    out.classes = data.classes;
    out.features = Matrix(rows.size(), data.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = data.features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(data.labels[rows[i]]);
    }
    return out;
}

struct EpochStats {
    double loss = 0.0;      // mean training loss over the epoch's batches
    double accuracy = 0.0;  // training accuracy after the epoch
};

struct TrainOptions {
    std::size_t epochs = 10;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Network network;
    std::vector<EpochStats> trace;
};

/// Mini-batch SGD on mean cross-entropy. Batches are drawn from a per-epoch
/// shuffle seeded by (seed, epoch).
inline TrainResult train(Network net, const Dataset& data, const TrainOptions& opt) {
    if (!(opt.learning_rate >= 0.0) || !std::isfinite(opt.learning_rate))
        fail_usage("learning rate must be finite and non-negative");
    if (opt.batch_size < 1) fail_usage("batch size must be >= 1");
    if (data.size() == 0) fail_data("training set is empty");
    detail::check_labels(data.labels, data.features.rows(), net.spec.classes);

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        CounterRng rng(opt.seed, epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t count = std::min(opt.batch_size, order.size() - start);
            const Dataset batch = gather(data, std::span(order).subspan(start, count));
            auto lg = loss_and_gradient(net, batch.features, batch.labels);
            if (!std::isfinite(lg.loss))
                fail_data("training diverged at epoch " + std::to_string(epoch + 1));
            loss_sum += lg.loss;
            ++batches;
            std::vector<std::span<const double>> grads;
            lg.gradient.tensors.for_each_tensor([&](std::span<const double> s) { grads.push_back(s); });
            std::size_t t = 0;
            net.params.for_each_tensor([&](std::span<double> p) {
                auto g = grads[t++];
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= opt.learning_rate * g[i];
            });
        }
        EpochStats stats;
        stats.loss = loss_sum / static_cast<double>(batches);
        stats.accuracy = accuracy(net, data);
        if (!std::isfinite(stats.loss))
            fail_data("training diverged at epoch " + std::to_string(epoch + 1));
        result.trace.push_back(stats);
    }
    result.network = std::move(net);
    return result;
}

/// Isotropic Gaussian clusters around centers drawn uniformly from
/// [-10, 10]^dim. Rows are shuffled; each class has exactly n_per_class rows.
inline Dataset make_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                          double spread, std::uint64_t seed) {
    if (n_per_class < 1 || classes < 1 || dim < 1 || !(spread >= 0.0))
        fail_usage("make_blobs: sizes must be positive and spread non-negative");
    CounterRng center_rng(seed, 0);
    Matrix centers(classes, dim);
    for (double& v : centers.values()) v = center_rng.uniform(-10.0, 10.0);

    const std::size_t n = n_per_class * classes;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    CounterRng shuffle_rng(seed, 1);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    CounterRng noise_rng(seed, 2);
    Dataset data;
    data.classes = classes;
    data.features = Matrix(n, dim);
    data.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i / n_per_class;
        const std::size_t row = order[i];
        data.labels[row] = cls;
        for (std::size_t j = 0; j < dim; ++j)
            data.features(row, j) = centers(cls, j) + spread * noise_rng.normal();
    }
    return data;
}

// ---------------------------------------------------------------------------
// SGLPNET1 checkpoints: magic, u32 input_dim, u32 width, u32 hidden_layers,
// u32 classes, u8 residual, u64 seed, then every parameter tensor in
// declaration order as binary64, all little-endian.
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr std::array<char, 8> kNetworkMagic = {'S', 'G', 'L', 'P', 'N', 'E', 'T', '1'};
}

inline std::uint64_t write_network(const Network& net, std::ostream& out) {
    validate(net.spec);
    if (net.params.count() != parameter_count(net.spec))
        fail_internal("network parameters do not match its spec");
    std::string buf(detail::kNetworkMagic.begin(), detail::kNetworkMagic.end());
    detail::put_le(buf, static_cast<std::uint32_t>(net.spec.input_dim));
    detail::put_le(buf, static_cast<std::uint32_t>(net.spec.width));
    detail::put_le(buf, static_cast<std::uint32_t>(net.spec.hidden_layers));
    detail::put_le(buf, static_cast<std::uint32_t>(net.spec.classes));
    detail::put_le(buf, static_cast<std::uint8_t>(net.spec.residual ? 1 : 0));
    detail::put_le(buf, net.spec.seed);
    net.params.for_each_tensor([&](auto span) {
        for (double v : span) detail::put_f64(buf, v);
    });
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) fail_data("write failed");
    return buf.size();
}

inline Network read_network(std::istream& in) {
    detail::ByteReader reader(in);
    std::array<char, 8> magic{};
    try {
        reader.read(magic.data(), magic.size());
    } catch (const Error&) {
        fail_data("unrecognized format: stream too short for SGLPNET1 header");
    }
    if (magic != detail::kNetworkMagic) fail_data("unrecognized format: bad SGLPNET1 magic");
    NetworkSpec spec;
    spec.input_dim = reader.get_le<std::uint32_t>();
    spec.width = reader.get_le<std::uint32_t>();
    spec.hidden_layers = reader.get_le<std::uint32_t>();
    spec.classes = reader.get_le<std::uint32_t>();
    const auto residual = reader.get_le<std::uint8_t>();
    if (residual > 1) fail_data("corrupt data: residual flag");
    spec.residual = residual == 1;
    spec.seed = reader.get_le<std::uint64_t>();
    try {
        validate(spec);
    } catch (const Error& e) {
        fail_data(std::string("corrupt data: ") + e.what());
    }
    if (spec.width > 4096 || spec.hidden_layers > 4096 || spec.input_dim > (1u << 20) ||
        spec.classes > (1u << 20))
        fail_data("corrupt data: implausible network dimensions");
    Network net;
    net.spec = spec;
    net.params.adapter = Dense(spec.input_dim, spec.width);
    net.params.units.assign(spec.hidden_layers, Dense(spec.width, spec.width));
    net.params.head = Dense(spec.width, spec.classes);
    net.params.for_each_tensor([&](std::span<double> span) {
        for (double& v : span) {
            v = reader.get_f64();
            if (!std::isfinite(v)) fail_data("corrupt data: non-finite parameter");
        }
    });
    if (!reader.at_end()) fail_data("corrupt data: trailing bytes after SGLPNET1 payload");
    return net;
}

// Datasets as CSV text: one row per line, features then integer label.

inline void write_dataset(const Dataset& data, std::ostream& out) {
    std::ostringstream text;
    text << "# classes: " << data.classes << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) text << detail::format_double(v) << ',';
        text << data.labels[i] << '\n';
    }
    out << text.str();
    if (!out) fail_data("write failed");
}

inline Dataset read_dataset(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    std::size_t classes = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            constexpr std::string_view key = "# classes: ";
            if (line.rfind(key, 0) == 0) {
                double c = 0;
                if (!detail::parse_double(std::string_view(line).substr(key.size()), c) || c < 2)
                    fail_data("dataset line " + std::to_string(line_no) + ": bad class count");
                classes = static_cast<std::size_t>(c);
            }
            continue;
        }
        auto fields = detail::split(line, ',');
        if (fields.size() < 2)
            fail_data("dataset line " + std::to_string(line_no) + ": need features and a label");
        std::vector<double> row;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            double v = 0;
            if (!detail::parse_double(fields[i], v) || !std::isfinite(v))
                fail_data("dataset line " + std::to_string(line_no) + ": bad feature value");
            row.push_back(v);
        }
        std::size_t label = 0;
        auto lf = fields.back();
        auto [p, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
        if (ec != std::errc{} || p != lf.data() + lf.size())
            fail_data("dataset line " + std::to_string(line_no) + ": bad label");
        if (!rows.empty() && row.size() != rows.front().size())
            fail_data("dataset line " + std::to_string(line_no) + ": inconsistent feature count");
        rows.push_back(std::move(row));
        labels.push_back(label);
    }
    if (rows.empty()) fail_data("dataset is empty");
    Dataset data;
    data.features = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), data.features.row(i).begin());
    data.labels = std::move(labels);
    std::size_t max_label = *std::max_element(data.labels.begin(), data.labels.end());
    data.classes = std::max(classes, max_label + 1);
    return data;
}

}  // namespace sglp
