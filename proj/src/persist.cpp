#include "lucidcam/persist.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "lucidcam/errors.hpp"

namespace lucidcam {

namespace {

using nlohmann::json;

constexpr char kMagic[] = "LCAM1\n";
constexpr std::size_t kMagicLen = 6;
constexpr int kFormatVersion = 1;

json spec_to_json(const ModelSpec& spec) {
    json layers = json::array();
    for (const LayerDef& ld : spec.layers) {
        json j;
        switch (ld.kind) {
        case LayerKind::Conv2d:
            j = {{"kind", "conv2d"}, {"in_ch", ld.in_ch},   {"out_ch", ld.out_ch},
                 {"kernel", ld.kernel}, {"stride", ld.stride}, {"pad", ld.pad}};
            break;
        case LayerKind::Relu:
            j = {{"kind", "relu"}};
            break;
        case LayerKind::MaxPool2d:
            j = {{"kind", "max_pool2d"}, {"kernel", ld.kernel}, {"stride", ld.stride}};
            break;
        case LayerKind::GlobalAvgPool:
            j = {{"kind", "global_avg_pool"}};
            break;
        case LayerKind::Flatten:
            j = {{"kind", "flatten"}};
            break;
        case LayerKind::Dense:
            j = {{"kind", "dense"}, {"in_dim", ld.in_dim}, {"out_dim", ld.out_dim}};
            break;
        }
        layers.push_back(std::move(j));
    }
    return {{"input_shape", spec.input_shape},
            {"head", spec.head_kind == HeadKind::GapLinear ? "gap_linear" : "mlp"},
            {"layers", layers}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec spec;
    auto shape = j.at("input_shape");
    if (!shape.is_array() || shape.size() != 3) {
        throw FormatError("checkpoint spec input_shape must have three entries");
    }
    for (int i = 0; i < 3; ++i) spec.input_shape[static_cast<std::size_t>(i)] = shape.at(i);
    std::string head = j.at("head");
    if (head == "gap_linear") {
        spec.head_kind = HeadKind::GapLinear;
    } else if (head == "mlp") {
        spec.head_kind = HeadKind::Mlp;
    } else {
        throw FormatError("checkpoint spec has unknown head kind '" + head + "'");
    }
    for (const json& lj : j.at("layers")) {
        std::string kind = lj.at("kind");
        if (kind == "conv2d") {
            spec.layers.push_back(LayerDef::conv2d(lj.at("in_ch"), lj.at("out_ch"),
                                                   lj.at("kernel"), lj.at("stride"),
                                                   lj.at("pad")));
        } else if (kind == "relu") {
            spec.layers.push_back(LayerDef::relu());
        } else if (kind == "max_pool2d") {
            spec.layers.push_back(LayerDef::max_pool2d(lj.at("kernel"), lj.at("stride")));
        } else if (kind == "global_avg_pool") {
            spec.layers.push_back(LayerDef::global_avg_pool());
        } else if (kind == "flatten") {
            spec.layers.push_back(LayerDef::flatten());
        } else if (kind == "dense") {
            spec.layers.push_back(LayerDef::dense(lj.at("in_dim"), lj.at("out_dim")));
        } else {
            throw FormatError("checkpoint spec has unknown layer kind '" + kind + "'");
        }
    }
    return spec;
}

// Parameter names and shapes a spec implies, in entry order.
std::vector<std::pair<std::string, std::vector<int>>> expected_manifest(const ModelSpec& spec) {
    std::vector<std::pair<std::string, std::vector<int>>> expected;
    int conv_i = 0, dense_i = 0;
    for (const LayerDef& ld : spec.layers) {
        if (ld.kind == LayerKind::Conv2d) {
            std::string base = "conv" + std::to_string(conv_i++);
            expected.emplace_back(base + ".weight",
                                  std::vector<int>{ld.out_ch, ld.in_ch, ld.kernel, ld.kernel});
            expected.emplace_back(base + ".bias", std::vector<int>{ld.out_ch});
        } else if (ld.kind == LayerKind::Dense) {
            std::string base = "dense" + std::to_string(dense_i++);
            expected.emplace_back(base + ".weight", std::vector<int>{ld.out_dim, ld.in_dim});
            expected.emplace_back(base + ".bias", std::vector<int>{ld.out_dim});
        }
    }
    return expected;
}

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

json step_to_json(const StepRecord& r) {
    return {{"kind", "step"},     {"step", r.step},         {"phase", r.phase},
            {"epoch", r.epoch},   {"lr", r.lr},             {"momentum", r.momentum},
            {"loss", r.train_loss}};
}

json epoch_to_json(const EpochRecord& r) {
    return {{"kind", "epoch"},
            {"phase", r.phase},
            {"epoch", r.epoch},
            {"val_loss", r.val_loss},
            {"val_acc", r.val_accuracy}};
}

std::ofstream open_for_append(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

} // namespace

void save_checkpoint(const ModelSpec& spec, const Parameters& params,
                     const CheckpointMeta& meta, const std::string& path) {
    spec.validate();
    json manifest = json::array();
    std::uint64_t offset = 0;
    for (const ParamEntry& e : params.entries) {
        manifest.push_back({{"name", e.name},
                            {"shape", e.value.shape()},
                            {"offset", offset},
                            {"trainable", e.trainable}});
        offset += static_cast<std::uint64_t>(e.value.size()) * 4;
    }
    json header = {{"format_version", kFormatVersion},
                   {"spec", spec_to_json(spec)},
                   {"manifest", manifest},
                   {"seed", meta.seed},
                   {"meta", meta.training}};
    std::string header_bytes = header.dump();

    std::string blob;
    blob.reserve(kMagicLen + 4 + header_bytes.size() + offset);
    blob.append(kMagic, kMagicLen);
    put_u32le(blob, static_cast<std::uint32_t>(header_bytes.size()));
    blob += header_bytes;
    for (const ParamEntry& e : params.entries) {
        for (std::int64_t i = 0; i < e.value.size(); ++i) {
            put_u32le(blob, std::bit_cast<std::uint32_t>(e.value[i]));
        }
    }

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot replace " + path);
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string bytes = buf.str();

    if (bytes.size() < kMagicLen + 4) throw FormatError(path + ": checkpoint is truncated");
    if (bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0) {
        throw FormatError(path + ": not a checkpoint file");
    }
    std::uint32_t header_len = 0;
    for (int i = 3; i >= 0; --i) {
        header_len = (header_len << 8) | static_cast<std::uint8_t>(bytes[kMagicLen + i]);
    }
    if (kMagicLen + 4 + header_len > bytes.size()) {
        throw FormatError(path + ": checkpoint header is truncated");
    }

    json header;
    LoadedCheckpoint loaded;
    try {
        header = json::parse(bytes.substr(kMagicLen + 4, header_len));
        int version = header.at("format_version");
        if (version != kFormatVersion) {
            throw VersionError(path + ": unsupported checkpoint version " +
                               std::to_string(version));
        }
        loaded.spec = spec_from_json(header.at("spec"));
        loaded.meta.seed = header.value("seed", std::uint64_t{0});
        if (header.contains("meta")) {
            for (const auto& [key, value] : header.at("meta").items()) {
                loaded.meta.training[key] = value.get<std::string>();
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": checkpoint header is corrupt: " + e.what());
    }
    try {
        loaded.spec.validate();
    } catch (const Error& e) {
        throw FormatError(path + ": checkpoint spec is inconsistent: " + e.what());
    }

    auto expected = expected_manifest(loaded.spec);
    std::uint64_t offset = 0;
    try {
        const json& manifest = header.at("manifest");
        if (manifest.size() != expected.size()) {
            throw FormatError(path + ": manifest does not match the model spec");
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const json& entry = manifest.at(i);
            std::string name = entry.at("name");
            std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
            if (name != expected[i].first || shape != expected[i].second) {
                throw FormatError(path + ": manifest entry '" + name +
                                  "' does not match the model spec");
            }
            if (entry.at("offset").get<std::uint64_t>() != offset) {
                throw FormatError(path + ": manifest offsets are inconsistent");
            }
            Tensor value(shape);
            offset += static_cast<std::uint64_t>(value.size()) * 4;
            loaded.params.entries.push_back(
                {std::move(name), std::move(value), entry.value("trainable", true)});
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": checkpoint manifest is corrupt: " + e.what());
    }

    std::size_t payload_start = kMagicLen + 4 + header_len;
    if (bytes.size() - payload_start < offset) {
        throw FormatError(path + ": checkpoint payload is truncated");
    }
    if (bytes.size() - payload_start > offset) {
        throw FormatError(path + ": checkpoint payload has trailing bytes");
    }
    const char* p = bytes.data() + payload_start;
    for (ParamEntry& e : loaded.params.entries) {
        for (std::int64_t i = 0; i < e.value.size(); ++i) {
            std::uint32_t v = static_cast<std::uint8_t>(p[0]) |
                              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
                              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
                              (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
            e.value[i] = std::bit_cast<float>(v);
            p += 4;
        }
    }
    return loaded;
}

void append_metrics(const StepRecord& record, const std::string& path) {
    std::ofstream out = open_for_append(path);
    out << step_to_json(record).dump() << '\n';
    if (!out) throw IoError("failed writing " + path);
}

void append_metrics(const EpochRecord& record, const std::string& path) {
    std::ofstream out = open_for_append(path);
    out << epoch_to_json(record).dump() << '\n';
    if (!out) throw IoError("failed writing " + path);
}

TrainReport replay_metrics(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    TrainReport report;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            std::string kind = j.at("kind");
            if (kind == "step") {
                StepRecord r;
                r.step = j.at("step");
                r.phase = j.at("phase");
                r.epoch = j.at("epoch");
                r.lr = j.at("lr");
                r.momentum = j.at("momentum");
                r.train_loss = j.at("loss");
                report.steps.push_back(r);
            } else if (kind == "epoch") {
                EpochRecord r;
                r.phase = j.at("phase");
                r.epoch = j.at("epoch");
                r.val_loss = j.at("val_loss");
                r.val_accuracy = j.at("val_acc");
                report.epochs.push_back(r);
            } else {
                throw FormatError(path + " line " + std::to_string(line_no) +
                                  ": unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw FormatError(path + " line " + std::to_string(line_no) +
                              ": bad metrics record: " + e.what());
        }
    }
    if (!report.epochs.empty()) {
        report.final_accuracy = report.epochs.back().val_accuracy;
    }
    return report;
}

JsonlMetricsSink::JsonlMetricsSink(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
}

void JsonlMetricsSink::on_step(const StepRecord& record) {
    out_ << step_to_json(record).dump() << '\n';
    out_.flush();
}

void JsonlMetricsSink::on_epoch(const EpochRecord& record) {
    out_ << epoch_to_json(record).dump() << '\n';
    out_.flush();
}

void write_lr_curve(const LrFindResult& result, const std::string& path) {
    std::string csv = "step,lr,raw_loss,smoothed_loss\n";
    char row[128];
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
        const LrPoint& pt = result.curve[i];
        std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.17g\n", i, pt.lr, pt.raw_loss,
                      pt.smoothed_loss);
        csv += row;
    }
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(csv.data(), static_cast<std::streamsize>(csv.size()));
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot replace " + path);
    }
}

} // namespace lucidcam
