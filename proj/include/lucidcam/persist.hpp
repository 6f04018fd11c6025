#pragma once

#include <fstream>
#include <map>
#include <string>

#include "lucidcam/model.hpp"
#include "lucidcam/optim.hpp"

namespace lucidcam {

// Training provenance stored in the checkpoint header next to the model spec
// and parameter manifest. The training map is free-form string pairs.
struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::map<std::string, std::string> training;
};

// Single-file binary checkpoint: 6 magic bytes "LCAM1\n", a 4-byte
// little-endian header length, a UTF-8 JSON header (format version, model
// spec, parameter manifest with shapes and byte offsets, seed, metadata),
// then the raw float32 little-endian parameter payload in manifest order.
// Identical state writes identical bytes.
void save_checkpoint(const ModelSpec& spec, const Parameters& params,
                     const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
    ModelSpec spec;
    Parameters params;
    CheckpointMeta meta;
};

// Validates magic, version, and manifest/payload consistency; the tensors
// come back bit-identical to what was saved.
LoadedCheckpoint load_checkpoint(const std::string& path);

// One JSON object per line:
//   {"kind":"step","step":n,"phase":p,"epoch":e,"lr":...,"momentum":...,"loss":...}
//   {"kind":"epoch","phase":p,"epoch":e,"val_loss":...,"val_acc":...}
void append_metrics(const StepRecord& record, const std::string& path);
void append_metrics(const EpochRecord& record, const std::string& path);

// Rebuilds a TrainReport from a metrics log; the result matches the in-memory
// report the log was written from, field for field.
TrainReport replay_metrics(const std::string& path);

// MetricsSink that streams records into a fresh JSONL file as training runs.
class JsonlMetricsSink : public MetricsSink {
public:
    explicit JsonlMetricsSink(const std::string& path);
    void on_step(const StepRecord& record) override;
    void on_epoch(const EpochRecord& record) override;

private:
    std::ofstream out_;
};

// "step,lr,raw_loss,smoothed_loss" rows for plotting/inspection.
void write_lr_curve(const LrFindResult& result, const std::string& path);

} // namespace lucidcam
