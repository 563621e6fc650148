#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modest/model.hpp"
#include "modest/types.hpp"

namespace modest {

struct Example {
    std::vector<double> features;
    double target = 0.0;  // regression target, or class label as a whole number
};

struct LocalDataset {
    std::vector<Example> examples;
    NodeId owner;
};

struct TrainerConfig {
    double learning_rate = 0.05;
    int batch_size = 20;
    int local_epochs = 1;
    double momentum = 0.0;
    std::uint64_t seed = 0;
};

enum class TaskKind { LinReg, SoftmaxBlobs };

struct PartitionSpec {
    enum class Scheme { Iid, Dirichlet } scheme = Scheme::Iid;
    double alpha = 0.5;  // Dirichlet concentration
};

// A synthetic learning task: per-node datasets, a held-out test set, and a
// calibrated convergence target.
struct Task {
    TaskKind kind = TaskKind::LinReg;
    int feature_dim = 0;
    int classes = 0;  // 0 for regression
    std::vector<LocalDataset> datasets;
    LocalDataset test;
    double target_loss = 0.0;      // linreg: reach loss <= target_loss
    double target_accuracy = 0.0;  // blobs: reach accuracy >= target_accuracy

    int param_dim() const;
    Model init_model(std::uint64_t seed) const;
    bool target_is_accuracy() const { return kind == TaskKind::SoftmaxBlobs; }
};

struct LinRegSpec {
    int dim = 16;
    int nodes = 8;
    int samples_per_node = 40;
    double noise_sigma = 0.1;
    PartitionSpec partition;
    std::uint64_t seed = 1;
    int test_samples = 1000;
    double target_margin = 0.1;  // target_loss = sigma^2 * (1 + margin)
};

// Planted linear regression: x ~ N(0, I), y = w*.x + eps. The least-squares
// optimum is available in closed form as an oracle.
Task make_task_linreg(const LinRegSpec& spec);

struct BlobsSpec {
    int classes = 4;
    int dim = 8;
    int nodes = 8;
    int samples_per_node = 50;
    double separation = 3.0;  // distance between class centers
    PartitionSpec partition;
    std::uint64_t seed = 1;
    int test_samples = 1000;
    double target_accuracy_slack = 0.02;  // centralized accuracy minus this
};

// Gaussian class blobs with a linear softmax model; Dirichlet partitioning
// skews the per-node label distribution.
Task make_task_softmax_blobs(const BlobsSpec& spec);

// Mini-batch SGD for `local_epochs` passes, batch order shuffled from
// cfg.seed. Deterministic: identical inputs give bitwise-identical output.
// Throws std::runtime_error when the loss goes non-finite.
Model local_train(const Model& model, const LocalDataset& data, const TrainerConfig& cfg, TaskKind kind);

struct EvalResult {
    double loss = 0.0;
    double metric = 0.0;  // mse for regression, accuracy for classification
};

EvalResult evaluate(const Model& model, const LocalDataset& test, TaskKind kind);

// Loss/gradient over a batch, exposed for oracle tests.
double loss_value(TaskKind kind, const Model& model, std::span<const Example> batch);
std::vector<double> loss_gradient(TaskKind kind, const Model& model, std::span<const Example> batch);

// Normal-equations solution over the union of datasets (regression oracle).
Model least_squares_optimum(const std::vector<LocalDataset>& datasets, int dim);

}  // namespace modest
