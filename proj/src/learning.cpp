#include "modest/learning.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "modest/rng.hpp"

namespace modest {

int Task::param_dim() const {
    if (kind == TaskKind::LinReg) return feature_dim;
    return classes * (feature_dim + 1);  // weights + bias per class
}

Model Task::init_model(std::uint64_t seed) const {
    Rng rng(mix_seed({seed, 0x696e6974ULL}));  // "init"
    Model m;
    m.params.resize(static_cast<std::size_t>(param_dim()));
    for (auto& p : m.params) p = 0.01 * rng.normal();
    return m;
}

Model aggregate_models(const std::vector<const Model*>& models) {
    if (models.empty()) throw std::invalid_argument("aggregate_models: empty list");
    const std::size_t dim = models.front()->params.size();
    Model out;
    out.params.assign(dim, 0.0);
    for (const Model* m : models) {
        if (m->params.size() != dim) throw std::invalid_argument("aggregate_models: dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i) out.params[i] += m->params[i];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (auto& p : out.params) p *= inv;
    return out;
}

// ---- losses -----------------------------------------------------------

static double linreg_predict(const Model& m, const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += m.params[i] * x[i];
    return acc;
}

static double linreg_loss(const Model& m, std::span<const Example> batch) {
    double acc = 0.0;
    for (const Example& e : batch) {
        const double r = linreg_predict(m, e.features) - e.target;
        acc += r * r;
    }
    return acc / static_cast<double>(batch.size());
}

static void linreg_grad(const Model& m, std::span<const Example> batch, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (const Example& e : batch) {
        const double r = linreg_predict(m, e.features) - e.target;
        for (std::size_t i = 0; i < e.features.size(); ++i) g[i] += scale * r * e.features[i];
    }
}

// softmax params: row per class, feature_dim weights then one bias
static void softmax_logits(const Model& m, const std::vector<double>& x, int classes, std::vector<double>& z) {
    const std::size_t stride = x.size() + 1;
    for (int c = 0; c < classes; ++c) {
        const double* row = m.params.data() + static_cast<std::size_t>(c) * stride;
        double acc = row[x.size()];  // bias
        for (std::size_t i = 0; i < x.size(); ++i) acc += row[i] * x[i];
        z[static_cast<std::size_t>(c)] = acc;
    }
}

static void softmax_probs(std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

static int infer_classes(const Model& m, std::size_t feature_dim) {
    return static_cast<int>(m.params.size() / (feature_dim + 1));
}

static double softmax_loss(const Model& m, std::span<const Example> batch) {
    const int classes = infer_classes(m, batch.front().features.size());
    std::vector<double> z(static_cast<std::size_t>(classes));
    double acc = 0.0;
    for (const Example& e : batch) {
        softmax_logits(m, e.features, classes, z);
        softmax_probs(z);
        const auto label = static_cast<std::size_t>(e.target);
        acc += -std::log(std::max(z[label], 1e-300));
    }
    return acc / static_cast<double>(batch.size());
}

static void softmax_grad(const Model& m, std::span<const Example> batch, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    const int classes = infer_classes(m, batch.front().features.size());
    const std::size_t stride = batch.front().features.size() + 1;
    std::vector<double> z(static_cast<std::size_t>(classes));
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Example& e : batch) {
        softmax_logits(m, e.features, classes, z);
        softmax_probs(z);
        for (int c = 0; c < classes; ++c) {
            const double delta = (z[static_cast<std::size_t>(c)] - (static_cast<std::size_t>(e.target) == static_cast<std::size_t>(c) ? 1.0 : 0.0)) * scale;
            double* row = g.data() + static_cast<std::size_t>(c) * stride;
            for (std::size_t i = 0; i < e.features.size(); ++i) row[i] += delta * e.features[i];
            row[e.features.size()] += delta;
        }
    }
}

double loss_value(TaskKind kind, const Model& model, std::span<const Example> batch) {
    assert(!batch.empty());
    return kind == TaskKind::LinReg ? linreg_loss(model, batch) : softmax_loss(model, batch);
}

std::vector<double> loss_gradient(TaskKind kind, const Model& model, std::span<const Example> batch) {
    std::vector<double> g(model.params.size());
    if (kind == TaskKind::LinReg)
        linreg_grad(model, batch, g);
    else
        softmax_grad(model, batch, g);
    return g;
}

// ---- training ---------------------------------------------------------

Model local_train(const Model& model, const LocalDataset& data, const TrainerConfig& cfg, TaskKind kind) {
    if (data.examples.empty()) throw std::invalid_argument("local_train: empty dataset");
    Model m = model;
    std::vector<double> grad(m.params.size());
    std::vector<double> velocity;
    if (cfg.momentum != 0.0) velocity.assign(m.params.size(), 0.0);

    std::vector<std::size_t> order(data.examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed);

    std::vector<Example> batch;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            batch.clear();
            for (std::size_t i = start; i < order.size() && i < start + bs; ++i)
                batch.push_back(data.examples[order[i]]);
            if (kind == TaskKind::LinReg)
                linreg_grad(m, batch, grad);
            else
                softmax_grad(m, batch, grad);
            if (cfg.momentum != 0.0) {
                for (std::size_t i = 0; i < m.params.size(); ++i) {
                    velocity[i] = cfg.momentum * velocity[i] + grad[i];
                    m.params[i] -= cfg.learning_rate * velocity[i];
                }
            } else {
                for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i] -= cfg.learning_rate * grad[i];
            }
        }
        for (double p : m.params)
            if (!std::isfinite(p))
                throw std::runtime_error("local_train: parameters diverged (non-finite) on node " +
                                         std::to_string(data.owner.value));
    }
    return m;
}

EvalResult evaluate(const Model& model, const LocalDataset& test, TaskKind kind) {
    EvalResult r;
    if (test.examples.empty()) return r;
    std::span<const Example> all(test.examples);
    r.loss = loss_value(kind, model, all);
    if (kind == TaskKind::LinReg) {
        r.metric = r.loss;
        return r;
    }
    const int classes = infer_classes(model, test.examples.front().features.size());
    std::vector<double> z(static_cast<std::size_t>(classes));
    std::size_t hits = 0;
    for (const Example& e : test.examples) {
        softmax_logits(model, e.features, classes, z);
        const auto best = std::max_element(z.begin(), z.end()) - z.begin();
        if (static_cast<std::size_t>(best) == static_cast<std::size_t>(e.target)) ++hits;
    }
    r.metric = static_cast<double>(hits) / static_cast<double>(test.examples.size());
    return r;
}

// ---- task generation --------------------------------------------------

// Split `total` example indices over nodes according to the partition scheme.
// Every node ends up non-empty.
static std::vector<std::vector<std::size_t>> split_indices(std::size_t total, int nodes, const PartitionSpec& part,
                                                           Rng& rng) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(nodes));
    if (part.scheme == PartitionSpec::Scheme::Iid) {
        const std::size_t chunk = total / static_cast<std::size_t>(nodes);
        std::size_t pos = 0;
        for (int v = 0; v < nodes; ++v) {
            const std::size_t take = (v == nodes - 1) ? (total - pos) : chunk;
            out[static_cast<std::size_t>(v)].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                                    order.begin() + static_cast<std::ptrdiff_t>(pos + take));
            pos += take;
        }
        return out;
    }

    // Quantity skew via Dirichlet weights, floor of one example per node.
    const auto weights = rng.dirichlet(part.alpha, static_cast<std::size_t>(nodes));
    std::vector<std::size_t> counts(static_cast<std::size_t>(nodes), 1);
    std::size_t assigned = static_cast<std::size_t>(nodes);
    for (std::size_t v = 0; v + 1 < counts.size(); ++v) {
        const auto extra = static_cast<std::size_t>(weights[v] * static_cast<double>(total - static_cast<std::size_t>(nodes)));
        counts[v] += std::min(extra, total - assigned);
        assigned += std::min(extra, total - assigned);
    }
    counts.back() += total - assigned;
    std::size_t pos = 0;
    for (int v = 0; v < nodes; ++v) {
        auto& dst = out[static_cast<std::size_t>(v)];
        dst.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(pos + counts[static_cast<std::size_t>(v)]));
        pos += counts[static_cast<std::size_t>(v)];
    }
    return out;
}

Task make_task_linreg(const LinRegSpec& spec) {
    assert(spec.dim >= 1 && spec.nodes >= 1 && spec.samples_per_node >= 1);
    Rng rng(mix_seed({spec.seed, 0x6c696e726567ULL}));  // "linreg"

    std::vector<double> w_star(static_cast<std::size_t>(spec.dim));
    for (auto& w : w_star) w = rng.normal();

    auto draw = [&](std::size_t count) {
        std::vector<Example> ex(count);
        for (auto& e : ex) {
            e.features.resize(static_cast<std::size_t>(spec.dim));
            double dot = 0.0;
            for (std::size_t i = 0; i < e.features.size(); ++i) {
                e.features[i] = rng.normal();
                dot += w_star[i] * e.features[i];
            }
            e.target = dot + spec.noise_sigma * rng.normal();
        }
        return ex;
    };

    const auto total = static_cast<std::size_t>(spec.nodes) * static_cast<std::size_t>(spec.samples_per_node);
    auto corpus = draw(total);

    Task task;
    task.kind = TaskKind::LinReg;
    task.feature_dim = spec.dim;
    task.target_loss = spec.noise_sigma * spec.noise_sigma * (1.0 + spec.target_margin);
    task.test.examples = draw(static_cast<std::size_t>(spec.test_samples));

    const auto ids = make_node_ids(spec.seed, static_cast<std::size_t>(spec.nodes));
    auto split = split_indices(total, spec.nodes, spec.partition, rng);
    task.datasets.resize(static_cast<std::size_t>(spec.nodes));
    for (int v = 0; v < spec.nodes; ++v) {
        auto& ds = task.datasets[static_cast<std::size_t>(v)];
        ds.owner = ids[static_cast<std::size_t>(v)];
        for (std::size_t idx : split[static_cast<std::size_t>(v)]) ds.examples.push_back(corpus[idx]);
    }
    return task;
}

// Label-skew split for classification: per class, Dirichlet proportions over
// nodes decide where that class's examples go.
static std::vector<std::vector<std::size_t>> split_by_label(const std::vector<Example>& corpus, int classes,
                                                            int nodes, const PartitionSpec& part, Rng& rng) {
    if (part.scheme == PartitionSpec::Scheme::Iid) return split_indices(corpus.size(), nodes, part, rng);

    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < corpus.size(); ++i)
        per_class[static_cast<std::size_t>(corpus[i].target)].push_back(i);

    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(nodes));
    for (auto& members : per_class) {
        rng.shuffle(members);
        const auto weights = rng.dirichlet(part.alpha, static_cast<std::size_t>(nodes));
        std::size_t pos = 0;
        for (int v = 0; v < nodes; ++v) {
            std::size_t take = (v == nodes - 1)
                                   ? members.size() - pos
                                   : std::min(members.size() - pos,
                                              static_cast<std::size_t>(weights[static_cast<std::size_t>(v)] *
                                                                       static_cast<double>(members.size())));
            for (std::size_t i = 0; i < take; ++i) out[static_cast<std::size_t>(v)].push_back(members[pos + i]);
            pos += take;
        }
    }
    // Dirichlet tails can starve a node; give it one example from the largest.
    for (auto& mine : out) {
        if (!mine.empty()) continue;
        auto donor = std::max_element(out.begin(), out.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
        mine.push_back(donor->back());
        donor->pop_back();
    }
    return out;
}

Task make_task_softmax_blobs(const BlobsSpec& spec) {
    assert(spec.classes >= 2 && spec.dim >= 1 && spec.nodes >= 1);
    Rng rng(mix_seed({spec.seed, 0x626c6f6273ULL}));  // "blobs"

    std::vector<std::vector<double>> centers(static_cast<std::size_t>(spec.classes));
    for (auto& c : centers) {
        c.resize(static_cast<std::size_t>(spec.dim));
        double norm = 0.0;
        for (auto& v : c) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(std::max(norm, 1e-12));
        for (auto& v : c) v *= spec.separation / norm;
    }

    auto draw = [&](std::size_t count) {
        std::vector<Example> ex(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto label = rng.uniform_int(static_cast<std::uint64_t>(spec.classes));
            auto& e = ex[i];
            e.target = static_cast<double>(label);
            e.features.resize(static_cast<std::size_t>(spec.dim));
            for (std::size_t d = 0; d < e.features.size(); ++d)
                e.features[d] = centers[label][d] + rng.normal();
        }
        return ex;
    };

    const auto total = static_cast<std::size_t>(spec.nodes) * static_cast<std::size_t>(spec.samples_per_node);
    auto corpus = draw(total);

    Task task;
    task.kind = TaskKind::SoftmaxBlobs;
    task.feature_dim = spec.dim;
    task.classes = spec.classes;
    task.test.examples = draw(static_cast<std::size_t>(spec.test_samples));

    const auto ids = make_node_ids(spec.seed, static_cast<std::size_t>(spec.nodes));
    auto split = split_by_label(corpus, spec.classes, spec.nodes, spec.partition, rng);
    task.datasets.resize(static_cast<std::size_t>(spec.nodes));
    for (int v = 0; v < spec.nodes; ++v) {
        auto& ds = task.datasets[static_cast<std::size_t>(v)];
        ds.owner = ids[static_cast<std::size_t>(v)];
        for (std::size_t idx : split[static_cast<std::size_t>(v)]) ds.examples.push_back(corpus[idx]);
    }

    // Calibrate the target from a centralized run over the union.
    LocalDataset all;
    for (const auto& ds : task.datasets)
        all.examples.insert(all.examples.end(), ds.examples.begin(), ds.examples.end());
    TrainerConfig central;
    central.learning_rate = 0.1;
    central.batch_size = 20;
    central.local_epochs = 20;
    central.seed = mix_seed({spec.seed, 0x63656e74ULL});  // "cent"
    Model m = task.init_model(spec.seed);
    m = local_train(m, all, central, TaskKind::SoftmaxBlobs);
    task.target_accuracy = evaluate(m, task.test, TaskKind::SoftmaxBlobs).metric - spec.target_accuracy_slack;
    return task;
}

Model least_squares_optimum(const std::vector<LocalDataset>& datasets, int dim) {
    const auto d = static_cast<std::size_t>(dim);
    std::vector<double> xtx(d * d, 0.0);
    std::vector<double> xty(d, 0.0);
    for (const auto& ds : datasets) {
        for (const Example& e : ds.examples) {
            for (std::size_t i = 0; i < d; ++i) {
                xty[i] += e.features[i] * e.target;
                for (std::size_t j = 0; j < d; ++j) xtx[i * d + j] += e.features[i] * e.features[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting; tiny ridge for safety.
    for (std::size_t i = 0; i < d; ++i) xtx[i * d + i] += 1e-9;
    std::vector<double> w = xty;
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::abs(xtx[r * d + col]) > std::abs(xtx[pivot * d + col])) pivot = r;
        if (pivot != col) {
            for (std::size_t c = 0; c < d; ++c) std::swap(xtx[col * d + c], xtx[pivot * d + c]);
            std::swap(w[col], w[pivot]);
        }
        const double diag = xtx[col * d + col];
        for (std::size_t r = 0; r < d; ++r) {
            if (r == col) continue;
            const double f = xtx[r * d + col] / diag;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < d; ++c) xtx[r * d + c] -= f * xtx[col * d + c];
            w[r] -= f * w[col];
        }
    }
    Model out;
    out.params.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.params[i] = w[i] / xtx[i * d + i];
    return out;
}

}  // namespace modest
