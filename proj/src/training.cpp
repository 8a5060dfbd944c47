#include "stdhl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <omp.h>

#include "stdhl/rng.hpp"

namespace stdhl {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: learning_rate < 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
    if (patience > max_epochs)
        throw std::invalid_argument("train config: patience must be <= max_epochs");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("train config: clip_norm must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
            {"max_epochs", max_epochs},       {"patience", patience},
            {"clip_norm", clip_norm},         {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string k = it.key();
        if (k != "learning_rate" && k != "batch_size" && k != "max_epochs" && k != "patience" &&
            k != "clip_norm" && k != "seed")
            throw std::invalid_argument("train config: unknown key '" + k + "'");
    }
    TrainConfig c;
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::int64_t>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<std::int64_t>();
    if (j.contains("patience")) c.patience = j["patience"].get<std::int64_t>();
    if (j.contains("clip_norm")) c.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    c.validate();
    return c;
}

std::string TrainHistory::to_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,val_pinball\n";
    for (const auto& e : epochs) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g\n", static_cast<long long>(e.epoch),
                      e.train_loss, e.val_pinball);
        os << buf;
    }
    return os.str();
}

namespace {

constexpr std::int64_t kGradChunk = 8;  // fixed, so reductions ignore thread count

struct ChunkResult {
    double loss_sum = 0.0;
    std::vector<std::vector<double>> grads;  // per parameter
};

// Sum of per-sample losses and gradients over batch[lo, hi), on a replica.
ChunkResult chunk_gradients(const Forecaster& model, const std::vector<WindowSample>& samples,
                            const std::vector<std::int64_t>& order, std::int64_t lo,
                            std::int64_t hi) {
    auto replica = model.clone();
    auto params = replica->parameters();
    Tape tape;
    Tensor total;
    {
        Tape::Scope scope(tape);
        for (std::int64_t i = lo; i < hi; ++i) {
            Tensor l = replica->loss(samples[static_cast<std::size_t>(
                order[static_cast<std::size_t>(i)])]);
            total = total.defined() ? add(total, l) : l;
        }
    }
    tape.backward(total);
    ChunkResult r;
    r.loss_sum = total.item();
    r.grads.reserve(params.size());
    for (auto& p : params) r.grads.emplace_back(p.grad().begin(), p.grad().end());
    return r;
}

double chunk_loss(const Forecaster& model, const std::vector<WindowSample>& samples,
                  std::int64_t lo, std::int64_t hi) {
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i)
        acc += model.loss(samples[static_cast<std::size_t>(i)]).item();
    return acc;
}

}  // namespace

double mean_pinball(const Forecaster& model, const std::vector<WindowSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("mean_pinball: no samples");
    const auto n = static_cast<std::int64_t>(samples.size());
    const auto n_chunks = (n + kGradChunk - 1) / kGradChunk;
    std::vector<double> partial(static_cast<std::size_t>(n_chunks), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        const auto lo = c * kGradChunk;
        const auto hi = std::min(n, lo + kGradChunk);
        partial[static_cast<std::size_t>(c)] = chunk_loss(model, samples, lo, hi);
    }
    double acc = 0.0;
    for (double p : partial) acc += p;
    return acc / static_cast<double>(n);
}

TrainHistory train(Forecaster& model, const std::vector<WindowSample>& train_samples,
                   const std::vector<WindowSample>& val_samples, const TrainConfig& cfg) {
    cfg.validate();
    if (!model.trainable())
        throw std::invalid_argument("train: model kind '" + model.kind() + "' is not trainable");
    if (train_samples.empty() || val_samples.empty())
        throw std::invalid_argument("train: empty train or validation partition");

    auto params = model.parameters();
    const auto n_params = params.size();
    std::vector<std::vector<double>> m(n_params), v(n_params), grad(n_params);
    for (std::size_t p = 0; p < n_params; ++p) {
        m[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
        v[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
        grad[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
    }
    std::vector<std::vector<double>> best(n_params);
    for (std::size_t p = 0; p < n_params; ++p)
        best[p].assign(params[p].data().begin(), params[p].data().end());

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    std::int64_t step = 0;

    Rng shuffle_rng(cfg.seed);
    std::vector<std::int64_t> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);

    TrainHistory hist;
    double best_val = 1e300;
    std::int64_t since_best = 0;
    const auto n_train = static_cast<std::int64_t>(train_samples.size());

    for (std::int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss_sum = 0.0;
        std::int64_t batch_index = 0;
        for (std::int64_t start = 0; start < n_train; start += cfg.batch_size, ++batch_index) {
            const auto end = std::min(n_train, start + cfg.batch_size);
            const auto count = end - start;
            const auto n_chunks = (count + kGradChunk - 1) / kGradChunk;
            std::vector<ChunkResult> results(static_cast<std::size_t>(n_chunks));
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t c = 0; c < n_chunks; ++c) {
                const auto lo = start + c * kGradChunk;
                const auto hi = std::min(end, lo + kGradChunk);
                results[static_cast<std::size_t>(c)] =
                    chunk_gradients(model, train_samples, order, lo, hi);
            }
            double batch_loss_sum = 0.0;
            for (std::size_t p = 0; p < n_params; ++p)
                std::fill(grad[p].begin(), grad[p].end(), 0.0);
            for (const auto& r : results) {  // fixed chunk order
                batch_loss_sum += r.loss_sum;
                for (std::size_t p = 0; p < n_params; ++p)
                    for (std::size_t i = 0; i < grad[p].size(); ++i)
                        grad[p][i] += r.grads[p][i];
            }
            if (!std::isfinite(batch_loss_sum))
                throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch_index));
            epoch_loss_sum += batch_loss_sum;
            const double inv = 1.0 / static_cast<double>(count);

            double norm_sq = 0.0;
            for (std::size_t p = 0; p < n_params; ++p)
                for (double g : grad[p]) norm_sq += (g * inv) * (g * inv);
            const double norm = std::sqrt(norm_sq);
            const double clip_scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (std::size_t p = 0; p < n_params; ++p) {
                auto data = params[p].data();
                for (std::size_t i = 0; i < grad[p].size(); ++i) {
                    const double g = grad[p][i] * inv * clip_scale;
                    m[p][i] = kBeta1 * m[p][i] + (1.0 - kBeta1) * g;
                    v[p][i] = kBeta2 * v[p][i] + (1.0 - kBeta2) * g * g;
                    const double mhat = m[p][i] / bc1;
                    const double vhat = v[p][i] / bc2;
                    data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
                }
            }
        }
        const double train_loss = epoch_loss_sum / static_cast<double>(n_train);
        const double val_pinball = mean_pinball(model, val_samples);
        if (!std::isfinite(val_pinball))
            throw NumericalError("train: non-finite validation loss in epoch " +
                                 std::to_string(epoch));
        hist.epochs.push_back({epoch, train_loss, val_pinball});
        if (val_pinball < best_val) {
            best_val = val_pinball;
            hist.best_epoch = epoch;
            since_best = 0;
            for (std::size_t p = 0; p < n_params; ++p)
                best[p].assign(params[p].data().begin(), params[p].data().end());
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    for (std::size_t p = 0; p < n_params; ++p)
        std::copy(best[p].begin(), best[p].end(), params[p].data().begin());
    hist.best_val = best_val;
    return hist;
}

EvaluationReport evaluate(const Forecaster& model, const std::vector<WindowSample>& samples,
                          int crps_samples, std::uint64_t crps_seed) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    const auto n = static_cast<std::int64_t>(samples.size());
    std::vector<Tensor> targets(samples.size());
    std::vector<ForecastQuantiles> forecasts(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        targets[u] = samples[u].target;
        forecasts[u] = model.forecast(samples[u]);
    }
    return build_report(targets, forecasts, crps_samples, crps_seed);
}

}  // namespace stdhl
