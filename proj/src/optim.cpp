#include "lucidcam/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "lucidcam/nn.hpp"

namespace lucidcam {

void OneCycleSchedule::validate() const {
    if (total_steps < 2) throw ArgumentError("one-cycle needs at least 2 steps");
    if (max_lr <= 0.0) throw ArgumentError("max_lr must be positive");
    if (div_factor < 1.0 || final_div < 1.0) {
        throw ArgumentError("div_factor and final_div must be at least 1");
    }
    if (pct_peak <= 0.0 || pct_peak >= 1.0) throw ArgumentError("pct_peak must be in (0, 1)");
    if (mom_low > mom_high) throw ArgumentError("mom_low must not exceed mom_high");
    int peak = peak_step();
    if (peak < 1 || peak > total_steps - 1) {
        throw ArgumentError("pct_peak leaves an empty warmup or decay segment");
    }
}

int OneCycleSchedule::peak_step() const {
    return static_cast<int>(std::lround(pct_peak * total_steps));
}

namespace {

double cosine_interp(double from, double to, double t) {
    if (t <= 0.0) return from;
    if (t >= 1.0) return to; // cos(pi) in floating point misses -1 slightly
    return from + (to - from) * 0.5 * (1.0 - std::cos(3.14159265358979323846 * t));
}

} // namespace

std::pair<double, double> OneCycleSchedule::at(int step) const {
    validate();
    if (step < 0 || step > total_steps) {
        throw ArgumentError("schedule step out of [0, total_steps]");
    }
    int peak = peak_step();
    double lr, mom;
    if (step <= peak) {
        double t = static_cast<double>(step) / peak;
        lr = cosine_interp(start_lr(), max_lr, t);
        mom = cosine_interp(mom_high, mom_low, t);
    } else {
        double t = static_cast<double>(step - peak) / (total_steps - peak);
        lr = cosine_interp(max_lr, final_lr(), t);
        mom = cosine_interp(mom_low, mom_high, t);
    }
    return {lr, mom};
}

SgdState SgdState::for_params(const Parameters& params) {
    SgdState state;
    state.velocity.reserve(params.entries.size());
    for (const ParamEntry& e : params.entries) {
        state.velocity.emplace_back(e.value.shape());
    }
    return state;
}

void sgd_step(Parameters& params, const std::vector<Tensor>& grads, SgdState& state,
              double lr, double momentum, double weight_decay) {
    if (lr < 0.0) throw ArgumentError("learning rate must be non-negative");
    if (grads.size() != params.entries.size() || state.velocity.size() != params.entries.size()) {
        throw ShapeError("gradient/velocity lists must align with the parameter entries");
    }
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        ParamEntry& entry = params.entries[i];
        if (!entry.trainable) continue;
        const Tensor& g = grads[i];
        if (g.size() == 0) {
            throw ShapeError("missing gradient for trainable tensor " + entry.name);
        }
        if (g.shape() != entry.value.shape()) {
            throw ShapeError("gradient shape mismatch for " + entry.name);
        }
        Tensor& v = state.velocity[i];
        float* p = entry.value.data();
        float* vel = v.data();
        const float* grad = g.data();
        std::int64_t n = entry.value.size();
        for (std::int64_t j = 0; j < n; ++j) {
            double vj = momentum * vel[j] + grad[j];
            double pj = p[j] - lr * vj - lr * weight_decay * p[j];
            vel[j] = static_cast<float>(vj);
            p[j] = static_cast<float>(pj);
        }
    }
}

void set_trainable(const ModelSpec& spec, Parameters& params, TrainableSet which) {
    auto indices = layer_param_indices(spec);
    std::vector<bool> head(params.entries.size(), false);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        if (spec.layers[l].kind != LayerKind::Dense) continue;
        for (int idx : indices[l]) {
            if (idx >= 0) head[static_cast<std::size_t>(idx)] = true;
        }
    }
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        params.entries[i].trainable = (which == TrainableSet::All) || head[i];
    }
}

int lowest_trainable_layer(const ModelSpec& spec, const Parameters& params) {
    auto indices = layer_param_indices(spec);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        for (int idx : indices[l]) {
            if (idx >= 0 && params.entries[static_cast<std::size_t>(idx)].trainable) {
                return static_cast<int>(l);
            }
        }
    }
    return static_cast<int>(spec.layers.size());
}

std::vector<double> geometric_lr_ladder(double lr_min, double lr_max, int iters) {
    if (iters < 2) throw ArgumentError("lr sweep needs at least 2 iterations");
    if (!(lr_max > lr_min && lr_min > 0.0)) {
        throw ArgumentError("lr sweep needs lr_max > lr_min > 0");
    }
    std::vector<double> lrs(static_cast<std::size_t>(iters));
    double ratio = lr_max / lr_min;
    for (int i = 0; i < iters; ++i) {
        lrs[static_cast<std::size_t>(i)] =
            lr_min * std::pow(ratio, static_cast<double>(i) / (iters - 1));
    }
    lrs.front() = lr_min;
    lrs.back() = lr_max;
    return lrs;
}

LrFindResult sweep_lr_ladder(const std::vector<double>& lrs,
                             const std::function<double(int, double)>& step_loss,
                             double ema_beta, double stop_factor) {
    if (lrs.empty()) throw ArgumentError("empty lr ladder");
    LrFindResult result;
    result.curve.reserve(lrs.size());
    double ema = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lrs.size(); ++i) {
        double lr = lrs[i];
        double raw = step_loss(static_cast<int>(i), lr);
        if (!std::isfinite(raw)) {
            result.diverged = true;
            result.divergence_lr = lr;
            break;
        }
        ema = ema_beta * ema + (1.0 - ema_beta) * raw;
        double smoothed = ema / (1.0 - std::pow(ema_beta, static_cast<double>(i + 1)));
        result.curve.push_back({lr, raw, smoothed});
        best = std::min(best, smoothed);
        if (smoothed > stop_factor * best) {
            result.diverged = true;
            result.divergence_lr = lr;
            break;
        }
    }
    if (result.curve.empty()) {
        throw NumericError("loss not finite at the smallest learning rate");
    }
    if (!result.diverged) result.divergence_lr = result.curve.back().lr;
    result.min_smoothed = best;

    // steepest descent segment of the smoothed curve (uniform log-lr spacing,
    // so the raw difference orders slopes correctly)
    std::size_t pick = 0;
    double steepest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < result.curve.size(); ++i) {
        double slope = result.curve[i + 1].smoothed_loss - result.curve[i].smoothed_loss;
        if (slope < steepest) {
            steepest = slope;
            pick = i;
        }
    }
    result.suggested_lr = result.curve[pick].lr;
    return result;
}

namespace {

// Deals out shuffled sample indices, reshuffling whenever a pass completes.
class BatchSampler {
public:
    BatchSampler(std::size_t n, SplitMix64 rng) : order_(n), rng_(rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        shuffle(order_, rng_);
    }

    std::vector<std::size_t> next(std::size_t batch) {
        std::vector<std::size_t> out;
        out.reserve(batch);
        while (out.size() < batch) {
            if (cursor_ == order_.size()) {
                shuffle(order_, rng_);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    SplitMix64 rng_;
    std::size_t cursor_ = 0;
};

// Double-precision running sum of per-sample gradients, averaged on demand.
class GradAccumulator {
public:
    explicit GradAccumulator(std::size_t n_entries) : acc_(n_entries), shapes_(n_entries) {}

    void add(const std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
            const Tensor& g = grads[i];
            if (g.size() == 0) continue;
            if (acc_[i].empty()) {
                acc_[i].assign(static_cast<std::size_t>(g.size()), 0.0);
                shapes_[i] = g.shape();
            }
            const float* src = g.data();
            double* dst = acc_[i].data();
            for (std::int64_t j = 0; j < g.size(); ++j) dst[j] += src[j];
        }
        ++count_;
    }

    std::vector<Tensor> mean() const {
        std::vector<Tensor> out(acc_.size());
        for (std::size_t i = 0; i < acc_.size(); ++i) {
            if (acc_[i].empty()) continue;
            Tensor t(shapes_[i]);
            float* dst = t.data();
            for (std::size_t j = 0; j < acc_[i].size(); ++j) {
                dst[j] = static_cast<float>(acc_[i][j] / count_);
            }
            out[i] = std::move(t);
        }
        return out;
    }

private:
    std::vector<std::vector<double>> acc_;
    std::vector<std::vector<int>> shapes_;
    int count_ = 0;
};

struct BatchResult {
    double mean_loss = 0.0;
    std::vector<Tensor> mean_grads;
};

BatchResult batch_gradients(const ModelSpec& spec, const Parameters& params,
                            const Dataset& data, const std::vector<std::size_t>& batch,
                            int lowest_layer) {
    GradAccumulator acc(params.entries.size());
    double loss_sum = 0.0;
    for (std::size_t idx : batch) {
        const Sample& s = data[idx];
        ForwardTrace trace = forward(spec, params, s.image);
        LossBackward back = backward_from_loss(trace, s.label, lowest_layer);
        loss_sum += back.loss;
        acc.add(back.param_grads);
    }
    BatchResult out;
    out.mean_loss = loss_sum / static_cast<double>(batch.size());
    out.mean_grads = acc.mean();
    return out;
}

} // namespace

LrFindResult lr_find(const ModelSpec& spec, const Parameters& init, const Dataset& data,
                     const LrFindConfig& cfg) {
    if (data.empty()) throw DataError("lr sweep needs a non-empty dataset");
    if (cfg.batch_size < 1) throw ArgumentError("batch_size must be at least 1");
    std::vector<double> ladder = geometric_lr_ladder(cfg.lr_min, cfg.lr_max, cfg.iters);

    Parameters scratch = init;
    set_trainable(spec, scratch, TrainableSet::All);
    SgdState state = SgdState::for_params(scratch);
    BatchSampler sampler(data.size(), substream(cfg.seed, 0));
    std::size_t batch_size = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                   data.size());

    auto step_loss = [&](int, double lr) {
        std::vector<std::size_t> batch = sampler.next(batch_size);
        BatchResult res = batch_gradients(spec, scratch, data, batch, 0);
        sgd_step(scratch, res.mean_grads, state, lr, cfg.momentum, cfg.weight_decay);
        return res.mean_loss;
    };
    return sweep_lr_ladder(ladder, step_loss, cfg.ema_beta, cfg.stop_factor);
}

double select_weight_decay(const std::vector<WdCurve>& curves, double divergence_slack,
                           double loss_band) {
    if (curves.empty()) throw ArgumentError("weight-decay selection needs at least one curve");
    double best_div = 0.0;
    double best_min = std::numeric_limits<double>::infinity();
    for (const WdCurve& c : curves) {
        best_div = std::max(best_div, c.result.divergence_lr);
        best_min = std::min(best_min, c.result.min_smoothed);
    }
    bool found = false;
    double selected = 0.0;
    for (const WdCurve& c : curves) {
        bool tolerant = c.result.divergence_lr >= divergence_slack * best_div;
        bool low_loss = c.result.min_smoothed <= (1.0 + loss_band) * best_min;
        if (tolerant && low_loss && (!found || c.weight_decay > selected)) {
            selected = c.weight_decay;
            found = true;
        }
    }
    if (found) return selected;
    // nothing passes both gates; fall back to the lowest-loss curve
    const WdCurve* fallback = &curves.front();
    for (const WdCurve& c : curves) {
        if (c.result.min_smoothed < fallback->result.min_smoothed ||
            (c.result.min_smoothed == fallback->result.min_smoothed &&
             c.weight_decay > fallback->weight_decay)) {
            fallback = &c;
        }
    }
    return fallback->weight_decay;
}

WdGridResult wd_grid_search(const ModelSpec& spec, const Parameters& init, const Dataset& data,
                            const std::vector<double>& wds, const LrFindConfig& cfg) {
    if (wds.empty()) throw ArgumentError("weight-decay grid must be non-empty");
    for (double wd : wds) {
        if (wd < 0.0) throw ArgumentError("weight decays must be non-negative");
    }
    WdGridResult out;
    out.curves.reserve(wds.size());
    for (double wd : wds) {
        LrFindConfig per = cfg;
        per.weight_decay = wd;
        out.curves.push_back({wd, lr_find(spec, init, data, per)});
    }
    out.selected = select_weight_decay(out.curves);
    return out;
}

void TrainConfig::validate() const {
    if (epochs_phase1 < 0 || epochs_phase2 < 0) throw ArgumentError("epoch counts must be >= 0");
    if (epochs_phase1 == 0 && epochs_phase2 == 0) {
        throw ArgumentError("at least one phase needs epochs");
    }
    if (max_lr <= 0.0) throw ArgumentError("max_lr must be positive");
    if (weight_decay < 0.0) throw ArgumentError("weight_decay must be non-negative");
    if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
}

int predict(const ModelSpec& spec, const Parameters& params, const Tensor& image) {
    Tensor logits = forward_logits(spec, params, image);
    int best = 0;
    for (std::int64_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    }
    return best;
}

EvalResult evaluate(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                    int workers) {
    if (data.empty()) throw DataError("evaluation needs a non-empty dataset");
    if (workers < 1) throw ArgumentError("workers must be at least 1");
    std::vector<double> losses(data.size());
    std::vector<unsigned char> correct(data.size());
    auto run = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < data.size(); i += stride) {
            const Sample& s = data[i];
            Tensor logits = forward_logits(spec, params, s.image);
            losses[i] = softmax_cross_entropy(logits, s.label);
            int pred = 0;
            for (std::int64_t k = 1; k < logits.size(); ++k) {
                if (logits[k] > logits[pred]) pred = static_cast<int>(k);
            }
            correct[i] = (pred == s.label) ? 1 : 0;
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), data.size());
    if (n_threads <= 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run, t, n_threads);
        for (std::thread& th : pool) th.join();
    }
    double loss_sum = 0.0;
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        loss_sum += losses[i];
        n_correct += correct[i];
    }
    EvalResult out;
    out.loss = loss_sum / static_cast<double>(data.size());
    out.accuracy = static_cast<double>(n_correct) / static_cast<double>(data.size());
    return out;
}

std::pair<Parameters, TrainReport> train(const ModelSpec& spec, Parameters params,
                                         const Dataset& train_data, const Dataset& valid_data,
                                         const TrainConfig& cfg, MetricsSink* sink) {
    cfg.validate();
    spec.validate();
    if (train_data.empty() || valid_data.empty()) {
        throw DataError("training needs non-empty train and validation splits");
    }

    TrainReport report;
    int global_step = 0;
    std::uint64_t shuffle_stream = 0;
    std::size_t batch_size = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                   train_data.size());
    int steps_per_epoch =
        static_cast<int>((train_data.size() + batch_size - 1) / batch_size);

    std::vector<std::size_t> indices(train_data.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    for (int phase = 1; phase <= 2; ++phase) {
        int epochs = (phase == 1) ? cfg.epochs_phase1 : cfg.epochs_phase2;
        if (epochs == 0) continue;
        set_trainable(spec, params, phase == 1 ? TrainableSet::HeadOnly : TrainableSet::All);
        int lowest = lowest_trainable_layer(spec, params);

        OneCycleSchedule sched;
        sched.total_steps = epochs * steps_per_epoch;
        sched.max_lr = cfg.max_lr;
        sched.validate();
        SgdState state = SgdState::for_params(params);

        int phase_step = 0;
        for (int epoch = 1; epoch <= epochs; ++epoch) {
            SplitMix64 rng = substream(cfg.seed, shuffle_stream++);
            shuffle(indices, rng);
            for (std::size_t start = 0; start < indices.size(); start += batch_size) {
                std::size_t end = std::min(indices.size(), start + batch_size);
                std::vector<std::size_t> batch(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                               indices.begin() + static_cast<std::ptrdiff_t>(end));
                BatchResult res = batch_gradients(spec, params, train_data, batch, lowest);
                if (!std::isfinite(res.mean_loss)) {
                    throw NumericError("training loss is not finite at step " +
                                       std::to_string(global_step));
                }
                auto [lr, momentum] = sched.at(phase_step);
                sgd_step(params, res.mean_grads, state, lr, momentum, cfg.weight_decay);
                StepRecord rec{global_step, phase, epoch, lr, momentum, res.mean_loss};
                report.steps.push_back(rec);
                if (sink) sink->on_step(rec);
                ++phase_step;
                ++global_step;
            }
            EvalResult ev = evaluate(spec, params, valid_data);
            EpochRecord erec{phase, epoch, ev.loss, ev.accuracy};
            report.epochs.push_back(erec);
            if (sink) sink->on_epoch(erec);
        }
    }
    report.final_accuracy = report.epochs.back().val_accuracy;
    return {std::move(params), std::move(report)};
}

} // namespace lucidcam
