#include "fluctlab/runstore.hpp"

#include "fluctlab/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace fluctlab::runstore {

using nlohmann::json;

namespace {

// Storage order of the per-layer channels inside a frame.
constexpr std::array<Channel, 5> kStorageOrder = {
    Channel::weights, Channel::biases, Channel::weight_grads, Channel::bias_grads,
    Channel::activations,
};

std::size_t storage_slot(Channel channel) {
    for (std::size_t i = 0; i < kStorageOrder.size(); ++i) {
        if (kStorageOrder[i] == channel) return i;
    }
    return 0;
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
    const auto& c = m.config;
    json j;
    j["format_version"] = m.format_version;
    j["snapshot_count"] = m.snapshot_count;
    j["complete"] = m.complete;
    j["created_utc"] = m.created_utc;
    j["storage"] = "float32";
    j["initial_loss"] = optional_number(m.initial_loss);
    j["final_loss"] = optional_number(m.final_loss);
    j["architecture"] = {
        {"encoder_dims", m.architecture.encoder_dims},
        {"decoder_dims", m.architecture.decoder_dims},
    };
    j["config"] = {
        {"shape", std::string(shapegen::to_string(c.shape))},
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"data_seed", c.data_seed},
        {"init_seed", c.init_seed},
        {"capture_every", c.capture_every},
        {"sample_count", c.sample_count},
        {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
    };
    // nlohmann::json objects are std::map-backed, so keys come out sorted.
    return j.dump();
}

RunManifest manifest_from_json(std::string_view text) {
    RunManifest m;
    try {
        const auto j = json::parse(text);
        m.format_version = j.at("format_version").get<int>();
        m.snapshot_count = j.at("snapshot_count").get<std::uint32_t>();
        m.complete = j.at("complete").get<bool>();
        m.created_utc = j.at("created_utc").get<std::int64_t>();
        m.initial_loss = read_optional(j, "initial_loss");
        m.final_loss = read_optional(j, "final_loss");
        const auto& a = j.at("architecture");
        m.architecture.encoder_dims = a.at("encoder_dims").get<std::vector<std::size_t>>();
        m.architecture.decoder_dims = a.at("decoder_dims").get<std::vector<std::size_t>>();
        const auto& c = j.at("config");
        const auto shape = shapegen::parse_shape(c.at("shape").get<std::string>());
        if (!shape) {
            throw FormatError("manifest names an unknown shape");
        }
        m.config.shape = *shape;
        m.config.learning_rate = c.at("learning_rate").get<double>();
        m.config.epochs = c.at("epochs").get<std::uint32_t>();
        m.config.data_seed = c.at("data_seed").get<std::uint64_t>();
        m.config.init_seed = c.at("init_seed").get<std::uint64_t>();
        m.config.capture_every = c.at("capture_every").get<std::uint32_t>();
        m.config.sample_count = c.at("sample_count").get<std::uint32_t>();
        const auto& adam = c.at("adam");
        m.config.adam.beta1 = adam.at("beta1").get<double>();
        m.config.adam.beta2 = adam.at("beta2").get<double>();
        m.config.adam.epsilon = adam.at("epsilon").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed run manifest: ") + e.what());
    }
    if (m.format_version != kFormatVersion) {
        throw FormatError("unsupported run format version " + std::to_string(m.format_version));
    }
    m.architecture.validate();
    return m;
}

std::size_t frame_payload_size(const netcore::ArchitectureSpec& arch) noexcept {
    std::size_t floats = 0;
    for (std::size_t k = 0; k < arch.layer_count(); ++k) {
        const auto in = arch.in_dim(k);
        const auto out = arch.out_dim(k);
        floats += 2 * (out * in + out) + out;
    }
    return 4 + 8 + 4 * floats;
}

// ---------------------------------------------------------------------------
// Writer

RunWriter::RunWriter(std::ostream& out, RunManifest manifest)
    : out_(out), origin_(out.tellp()), manifest_(std::move(manifest)) {
    manifest_.architecture.validate();
    if (origin_ == std::ostream::pos_type(-1)) {
        throw IoError("run output stream is not seekable");
    }
    manifest_.snapshot_count = 0;
    manifest_.complete = false;
    write_manifest();
}

void RunWriter::put(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) {
        throw IoError("run file write failed after " + std::to_string(bytes_) + " bytes", bytes_);
    }
}

void RunWriter::write_manifest() {
    const auto text = manifest_to_json(manifest_);
    if (text.size() > kManifestRegion) {
        throw FormatError("run manifest exceeds " + std::to_string(kManifestRegion) + " bytes");
    }
    std::vector<unsigned char> header;
    header.reserve(kHeaderSize);
    header.insert(header.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(header, static_cast<std::uint32_t>(text.size()));
    header.insert(header.end(), text.begin(), text.end());
    header.resize(kHeaderSize, ' ');

    const auto resume = out_.tellp();
    out_.seekp(origin_);
    put(header.data(), header.size());
    if (bytes_ == 0) {
        bytes_ = header.size();
    } else {
        out_.seekp(resume);
    }
}

void RunWriter::append(const EpochSnapshot& snap) {
    const auto& arch = manifest_.architecture;
    if (snap.layers.size() != arch.layer_count()) {
        throw InvalidArgument("snapshot depth does not match the manifest architecture");
    }
    if (last_epoch_ && snap.epoch <= *last_epoch_) {
        throw InvalidArgument("snapshot epochs must strictly increase");
    }

    const auto payload = frame_payload_size(arch);
    frame_.clear();
    frame_.reserve(4 + payload);
    put_u32(frame_, static_cast<std::uint32_t>(payload));
    put_u32(frame_, snap.epoch);
    put_u64(frame_, std::bit_cast<std::uint64_t>(snap.loss));
    for (std::size_t k = 0; k < arch.layer_count(); ++k) {
        const auto& layer = snap.layers[k];
        const auto in = arch.in_dim(k);
        const auto out = arch.out_dim(k);
        for (Channel ch : kStorageOrder) {
            const auto values = layer.values(ch);
            if (values.size() != values_per_neuron(ch, in) * out) {
                throw InvalidArgument("snapshot layer " + std::to_string(k) + " channel " +
                                      std::string(to_string(ch)) + " has the wrong size");
            }
            for (float v : values) put_u32(frame_, std::bit_cast<std::uint32_t>(v));
        }
    }
    put(frame_.data(), frame_.size());
    bytes_ += frame_.size();
    last_epoch_ = snap.epoch;
    ++manifest_.snapshot_count;
}

std::size_t RunWriter::finish(bool complete) {
    manifest_.complete = complete;
    write_manifest();
    out_.flush();
    if (!out_) {
        throw IoError("run file flush failed", bytes_);
    }
    return bytes_;
}

std::size_t write_run(const RunManifest& manifest, std::span<const EpochSnapshot> snapshots,
                      std::ostream& out) {
    RunWriter writer(out, manifest);
    for (const auto& s : snapshots) writer.append(s);
    return writer.finish(manifest.complete);
}

// ---------------------------------------------------------------------------
// Reader

RunReader::RunReader(std::istream& in) : in_(&in) { index_frames(); }

RunReader::RunReader(std::unique_ptr<std::istream> in) : owned_(std::move(in)), in_(owned_.get()) {
    index_frames();
}

RunReader RunReader::open(const std::filesystem::path& path) {
    auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file) {
        throw IoError("cannot open run file " + path.string());
    }
    return RunReader(std::move(file));
}

void RunReader::read_at(std::uint64_t offset, void* dst, std::size_t size) const {
    in_->clear();
    in_->seekg(static_cast<std::streamoff>(offset));
    in_->read(static_cast<char*>(dst), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_->gcount()) != size) {
        throw IoError("short read from run file");
    }
}

void RunReader::index_frames() {
    in_->seekg(0, std::ios::end);
    const auto end = static_cast<std::uint64_t>(in_->tellg());
    in_->seekg(0);

    unsigned char head[8];
    if (end < 8) {
        throw FormatError("unsupported format: file too short for an NFL1 header");
    }
    read_at(0, head, 8);
    if (std::memcmp(head, kMagic, 4) != 0) {
        throw FormatError("unsupported format: bad magic bytes");
    }
    const auto manifest_len = get_u32(head + 4);
    if (manifest_len > kManifestRegion || end < kHeaderSize) {
        throw FormatError("run header is truncated or its manifest is oversized");
    }
    std::string text(manifest_len, '\0');
    read_at(8, text.data(), manifest_len);
    manifest_ = manifest_from_json(text);

    const auto& arch = manifest_.architecture;
    std::uint64_t offset = 4 + 8;
    channel_offsets_.clear();
    for (std::size_t k = 0; k < arch.layer_count(); ++k) {
        const auto in = arch.in_dim(k);
        const auto out = arch.out_dim(k);
        for (Channel ch : kStorageOrder) {
            channel_offsets_.push_back(offset);
            offset += 4 * values_per_neuron(ch, in) * out;
        }
    }

    const auto payload = frame_payload_size(arch);
    std::uint64_t pos = kHeaderSize;
    std::int64_t previous_epoch = -1;
    auto last_valid = [&] { return static_cast<long long>(frame_offsets_.size()) - 1; };
    while (pos < end) {
        if (end - pos < 4) {
            throw CorruptionError("truncated frame header after snapshot " +
                                      std::to_string(last_valid()),
                                  last_valid());
        }
        unsigned char word[4];
        read_at(pos, word, 4);
        const auto len = get_u32(word);
        if (len != payload) {
            throw CorruptionError("frame length " + std::to_string(len) + " does not match the " +
                                      "architecture after snapshot " + std::to_string(last_valid()),
                                  last_valid());
        }
        if (end - pos - 4 < len) {
            throw CorruptionError("truncated frame after snapshot " + std::to_string(last_valid()),
                                  last_valid());
        }
        read_at(pos + 4, word, 4);
        const auto epoch = static_cast<std::int64_t>(get_u32(word));
        if (epoch <= previous_epoch) {
            throw CorruptionError("snapshot epochs out of order after snapshot " +
                                      std::to_string(last_valid()),
                                  last_valid());
        }
        previous_epoch = epoch;
        frame_offsets_.push_back(pos + 4);
        pos += 4 + len;
    }

    if (manifest_.complete && manifest_.snapshot_count != frame_offsets_.size()) {
        throw CorruptionError("manifest lists " + std::to_string(manifest_.snapshot_count) +
                                  " snapshots but the file holds " +
                                  std::to_string(frame_offsets_.size()),
                              last_valid());
    }
}

EpochSnapshot RunReader::snapshot(std::size_t index) const {
    if (index >= frame_offsets_.size()) {
        throw InvalidArgument("snapshot index " + std::to_string(index) + " out of range");
    }
    const auto& arch = manifest_.architecture;
    std::vector<unsigned char> buf(frame_payload_size(arch));
    {
        std::lock_guard lock(mutex_);
        read_at(frame_offsets_[index], buf.data(), buf.size());
    }
    auto snap = make_empty_snapshot(arch);
    snap.epoch = get_u32(buf.data());
    snap.loss = std::bit_cast<double>(get_u64(buf.data() + 4));
    const unsigned char* p = buf.data() + 12;
    for (auto& layer : snap.layers) {
        for (Channel ch : kStorageOrder) {
            for (float& v : layer.values(ch)) {
                v = get_f32(p);
                p += 4;
            }
        }
    }
    return snap;
}

void RunReader::for_each(const std::function<void(const EpochSnapshot&)>& visit) const {
    for (std::size_t i = 0; i < size(); ++i) visit(snapshot(i));
}

std::vector<EpochSnapshot> RunReader::load_all() const {
    std::vector<EpochSnapshot> all;
    all.reserve(size());
    for_each([&](const EpochSnapshot& s) { all.push_back(s); });
    return all;
}

std::vector<std::vector<float>> RunReader::neuron_series(std::size_t layer, std::size_t neuron,
                                                         Channel channel) const {
    const auto& arch = manifest_.architecture;
    if (layer >= arch.layer_count() || neuron >= arch.out_dim(layer)) {
        throw InvalidArgument("neuron (" + std::to_string(layer) + ", " + std::to_string(neuron) +
                              ") is outside the architecture");
    }
    const auto per = values_per_neuron(channel, arch.in_dim(layer));
    const auto within = channel_offsets_[layer * kStorageOrder.size() + storage_slot(channel)] +
                        4 * per * neuron;

    std::vector<std::vector<float>> series;
    series.reserve(size());
    std::vector<unsigned char> buf(4 * per);
    std::lock_guard lock(mutex_);
    for (auto frame : frame_offsets_) {
        read_at(frame + within, buf.data(), buf.size());
        std::vector<float> values(per);
        for (std::size_t i = 0; i < per; ++i) values[i] = get_f32(buf.data() + 4 * i);
        series.push_back(std::move(values));
    }
    return series;
}

std::vector<double> RunReader::standardized_channel(std::size_t index, std::size_t layer,
                                                    Channel channel) const {
    const auto snap = snapshot(index);
    if (layer >= snap.layers.size()) {
        throw InvalidArgument("layer index out of range");
    }
    const auto values = snap.layers[layer].values(channel);
    const std::vector<double> widened(values.begin(), values.end());
    return standardize_channel(widened);
}

std::vector<double> standardize_channel(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidArgument("cannot standardize an empty channel");
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);

    std::vector<double> out(values.size(), 0.0);
    if (sd < 1e-12) {
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

}  // namespace fluctlab::runstore
