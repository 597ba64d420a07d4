#pragma once

#include "fluctlab/capture.hpp"
#include "fluctlab/netcore.hpp"
#include "fluctlab/trainer.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fluctlab::runstore {

// File layout (all integers little-endian):
//   "NFL1" | u32 manifest length | manifest JSON, space-padded to 4096 bytes
//   per snapshot: u32 frame length | u32 epoch | f64 loss |
//                 per layer: weights, biases, weight_grads, bias_grads, activation_means (f32)
inline constexpr char kMagic[4] = {'N', 'F', 'L', '1'};
inline constexpr std::size_t kManifestRegion = 4096;
inline constexpr std::size_t kHeaderSize = 8 + kManifestRegion;
inline constexpr int kFormatVersion = 1;

struct RunManifest {
    int format_version = kFormatVersion;
    trainer::RunConfig config;
    netcore::ArchitectureSpec architecture;
    std::uint32_t snapshot_count = 0;
    bool complete = false;
    std::int64_t created_utc = 0;
    std::optional<double> initial_loss;
    std::optional<double> final_loss;

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

/// Canonical JSON: sorted keys, no whitespace.
std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

/// Payload bytes of one frame (everything after the frame-length word).
std::size_t frame_payload_size(const netcore::ArchitectureSpec& arch) noexcept;

/// Streams snapshots into a seekable output. The header is written immediately
/// with complete=false; finish() rewrites it with the final count and status.
class RunWriter {
public:
    RunWriter(std::ostream& out, RunManifest manifest);

    RunWriter(const RunWriter&) = delete;
    RunWriter& operator=(const RunWriter&) = delete;

    void append(const EpochSnapshot& snapshot);

    /// Rewrites the manifest region and flushes. Returns total bytes in the run.
    std::size_t finish(bool complete);

    RunManifest& manifest() noexcept { return manifest_; }
    const RunManifest& manifest() const noexcept { return manifest_; }
    std::size_t bytes_written() const noexcept { return bytes_; }

private:
    void write_manifest();
    void put(const void* data, std::size_t size);

    std::ostream& out_;
    std::ostream::pos_type origin_;
    RunManifest manifest_;
    std::size_t bytes_ = 0;
    std::optional<std::uint32_t> last_epoch_;
    std::vector<unsigned char> frame_;
};

/// Writes a whole run. snapshot_count is taken from `snapshots`; `complete` from the manifest.
std::size_t write_run(const RunManifest& manifest, std::span<const EpochSnapshot> snapshots,
                      std::ostream& out);

/// Random-access reader. Frames are indexed on open by skipping over frame lengths.
/// All accessors are safe to call concurrently.
class RunReader {
public:
    explicit RunReader(std::istream& in);
    explicit RunReader(std::unique_ptr<std::istream> in);
    static RunReader open(const std::filesystem::path& path);

    const RunManifest& manifest() const noexcept { return manifest_; }
    std::size_t size() const noexcept { return frame_offsets_.size(); }

    EpochSnapshot snapshot(std::size_t index) const;
    void for_each(const std::function<void(const EpochSnapshot&)>& visit) const;
    std::vector<EpochSnapshot> load_all() const;

    /// Values owned by one neuron in `channel`, one entry per snapshot.
    std::vector<std::vector<float>> neuron_series(std::size_t layer, std::size_t neuron,
                                                  Channel channel) const;

    /// standardize_channel applied to one layer's channel of one snapshot.
    std::vector<double> standardized_channel(std::size_t index, std::size_t layer,
                                             Channel channel) const;

private:
    void index_frames();
    void read_at(std::uint64_t offset, void* dst, std::size_t size) const;

    std::unique_ptr<std::istream> owned_;
    std::istream* in_;
    RunManifest manifest_;
    std::vector<std::uint64_t> frame_offsets_;  // offset of each frame's epoch word
    std::vector<std::uint64_t> channel_offsets_;  // per (layer, channel storage slot)
    mutable std::mutex mutex_;
};

/// (x - mean) / population std; all zeros when std < 1e-12.
std::vector<double> standardize_channel(std::span<const double> values);

}  // namespace fluctlab::runstore
