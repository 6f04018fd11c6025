#pragma once

#include <functional>
#include <utility>

#include "lucidcam/data.hpp"
#include "lucidcam/model.hpp"

namespace lucidcam {

// Cosine warmup to max_lr at round(pct_peak * total_steps), cosine decay to
// max_lr / (div_factor * final_div) at total_steps. Momentum runs the same
// path in anti-phase between mom_high and mom_low.
struct OneCycleSchedule {
    int total_steps = 0;
    double max_lr = 2e-2;
    double div_factor = 25.0;
    double final_div = 100.0; // divides the *starting* lr to get the final lr
    double pct_peak = 0.5;
    double mom_high = 0.95;
    double mom_low = 0.85;

    void validate() const;
    int peak_step() const;
    double start_lr() const { return max_lr / div_factor; }
    double final_lr() const { return start_lr() / final_div; }

    // step must lie in [0, total_steps].
    std::pair<double, double> at(int step) const; // (lr, momentum)
};

// Velocity buffers aligned with Parameters::entries.
struct SgdState {
    std::vector<Tensor> velocity;

    static SgdState for_params(const Parameters& params);
};

// v <- momentum * v + g;  p <- p - lr * v - lr * weight_decay * p.
// Weight decay is decoupled: it acts on the parameter directly and never
// enters the velocity. Entries with trainable == false are left untouched.
void sgd_step(Parameters& params, const std::vector<Tensor>& grads, SgdState& state,
              double lr, double momentum, double weight_decay);

enum class TrainableSet { HeadOnly, All };

// HeadOnly leaves exactly the dense-layer tensors trainable.
void set_trainable(const ModelSpec& spec, Parameters& params, TrainableSet which);

// Lowest layer index owning a trainable parameter; backward passes can skip
// everything below it.
int lowest_trainable_layer(const ModelSpec& spec, const Parameters& params);

struct LrPoint {
    double lr = 0.0;
    double raw_loss = 0.0;
    double smoothed_loss = 0.0;
};

struct LrFindResult {
    std::vector<LrPoint> curve;
    double suggested_lr = 0.0;
    bool diverged = false;
    double divergence_lr = 0.0; // lr at the stop point, else the last lr swept
    double min_smoothed = 0.0;
};

struct LrFindConfig {
    double lr_min = 1e-6;
    double lr_max = 1.0;
    int iters = 200;
    double weight_decay = 0.0;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double ema_beta = 0.98;
    double stop_factor = 4.0;
};

// lrs[i] = lr_min * (lr_max / lr_min)^(i / (n - 1)).
std::vector<double> geometric_lr_ladder(double lr_min, double lr_max, int iters);

// Shared sweep core: walks the ladder calling step_loss(i, lr) once per rung,
// smooths raw losses with a bias-corrected EMA, stops early once the smoothed
// loss exceeds stop_factor times the best seen, and suggests the lr at the
// steepest descent of the smoothed curve.
LrFindResult sweep_lr_ladder(const std::vector<double>& lrs,
                             const std::function<double(int, double)>& step_loss,
                             double ema_beta = 0.98, double stop_factor = 4.0);

// One-batch-per-rung range test on a scratch copy of the parameters.
LrFindResult lr_find(const ModelSpec& spec, const Parameters& init, const Dataset& data,
                     const LrFindConfig& cfg = {});

struct WdCurve {
    double weight_decay = 0.0;
    LrFindResult result;
};

struct WdGridResult {
    double selected = 0.0;
    std::vector<WdCurve> curves;
};

// Largest weight decay that still tolerates nearly the best divergence lr
// (within divergence_slack of the grid best) and lands within loss_band of
// the grid-best minimum smoothed loss. If nothing satisfies both, falls back
// to the wd with the lowest minimum.
double select_weight_decay(const std::vector<WdCurve>& curves, double divergence_slack = 0.8,
                           double loss_band = 0.10);

WdGridResult wd_grid_search(const ModelSpec& spec, const Parameters& init, const Dataset& data,
                            const std::vector<double>& wds = {1e-2, 1e-4, 1e-6},
                            const LrFindConfig& cfg = {});

struct TrainConfig {
    int epochs_phase1 = 1;
    int epochs_phase2 = 3;
    double max_lr = 2e-2;
    double weight_decay = 1e-4;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int capture_layer = -1; // -1 = last conv; carried into checkpoint metadata

    void validate() const;
};

struct StepRecord {
    int step = 0; // global, strictly increasing across phases
    int phase = 0;
    int epoch = 0; // within the phase
    double lr = 0.0;
    double momentum = 0.0;
    double train_loss = 0.0;
};

struct EpochRecord {
    int phase = 0;
    int epoch = 0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    double final_accuracy = 0.0;
};

// Streaming observer; the persist module offers a JSONL-backed one.
class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void on_step(const StepRecord& record) = 0;
    virtual void on_epoch(const EpochRecord& record) = 0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

int predict(const ModelSpec& spec, const Parameters& params, const Tensor& image);

EvalResult evaluate(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                    int workers = 1);

// Two-phase schedule: phase 1 trains the head with the backbone frozen,
// phase 2 unfreezes everything; each phase gets its own one-cycle schedule
// and fresh velocity. Deterministic for a fixed seed.
std::pair<Parameters, TrainReport> train(const ModelSpec& spec, Parameters params,
                                         const Dataset& train_data, const Dataset& valid_data,
                                         const TrainConfig& cfg, MetricsSink* sink = nullptr);

} // namespace lucidcam
