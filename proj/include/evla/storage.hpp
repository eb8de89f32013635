#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evla/adapter.hpp"
#include "evla/event.hpp"
#include "evla/image.hpp"
#include "evla/representation.hpp"

#include "json.hpp"

namespace evla {

// -- event files --------------------------------------------------------------
//
// Layout (little-endian):
//   header, 24 bytes: magic "EVLA" | u16 version (=1) | u16 width | u16 height
//                     | u8 bayer code | 5 reserved zero bytes | u64 count
//   then `count` records of 16 bytes: u64 t_us | u16 x | u16 y | i8 polarity
//                     | 3 reserved zero bytes

inline constexpr char kEventMagic[4] = {'E', 'V', 'L', 'A'};
inline constexpr std::uint16_t kEventFormatVersion = 1;
inline constexpr std::size_t kEventHeaderSize = 24;
inline constexpr std::size_t kEventRecordSize = 16;

/// Writes the stream; returns the total byte count (24 + 16 * count).
std::uint64_t write_events(const EventStream& stream, std::ostream& sink);
std::uint64_t write_events(const EventStream& stream, const std::filesystem::path& path);

/// Reads and validates a stream (the load path ends in validate_stream).
EventStream read_events(std::istream& source);
EventStream read_events(const std::filesystem::path& path);

// -- portable pixmaps -----------------------------------------------------------

/// Binary P6, maxval 255.
void write_image(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_image(const std::filesystem::path& path);

/// Binary P5 of a [0,1] map, quantized by round(v * 255).
void write_gray(const std::filesystem::path& path, const NormalizedMap& map);
void write_gray(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_gray(const std::filesystem::path& path);

/// P6 of a [0,1] float frame, quantized by round(v * 255).
void write_frame(const std::filesystem::path& path, const EventFrame& frame);

// -- adapter parameter container ----------------------------------------------
//
// Layout (little-endian):
//   magic "EVLP" | u16 version (=1) | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 ndim | u32 dims[ndim]
//               | f32 values, row-major

inline constexpr char kParamsMagic[4] = {'E', 'V', 'L', 'P'};
inline constexpr std::uint16_t kParamsFormatVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> values;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

void write_tensors(const std::vector<NamedTensor>& tensors, std::ostream& sink);
void write_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path);
std::vector<NamedTensor> read_tensors(std::istream& source);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

/// f32 snapshot of the parameter store, one tensor per registry entry.
std::vector<NamedTensor> params_to_tensors(const AdapterParams& params);

/// Rebuilds params for a config; throws ShapeMismatch on any name/shape drift.
AdapterParams params_from_tensors(const AdapterConfig& config,
                                  const std::vector<NamedTensor>& tensors);

void write_params(const AdapterParams& params, const std::filesystem::path& path);
AdapterParams read_params(const AdapterConfig& config, const std::filesystem::path& path);

// -- episode manifests -----------------------------------------------------------
//
// Line-delimited JSON, one episode object per line. Unknown fields survive a
// read/write round trip.

struct ManifestFrame {
    std::uint64_t t_exposure_end_us = 0;
    std::string image_path;
    double exposure_ms = 0.0;
    double light_scale = 1.0;
    nlohmann::json extra = nlohmann::json::object();
};

struct ManifestAction {
    std::uint64_t t_us = 0;
    std::array<double, 6> joint_positions{};  // 6-DoF arm
};

struct EpisodeManifest {
    std::string episode_id;
    SensorGeometry geometry;
    std::vector<ManifestFrame> frames;
    std::string events_path;
    std::optional<std::vector<ManifestAction>> actions;
    std::string action_units = "normalized";
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const EpisodeManifest& manifest);
EpisodeManifest manifest_from_json(const nlohmann::json& record, std::size_t line_no);

/// Writes one JSON line per episode.
void write_manifest(const EpisodeManifest& manifest, const std::filesystem::path& path);
void write_manifests(const std::vector<EpisodeManifest>& manifests,
                     const std::filesystem::path& path);

/// Reads every episode line; validates frame monotonicity and, when
/// check_files is set, existence of referenced paths (relative to the
/// manifest's directory).
std::vector<EpisodeManifest> read_manifests(const std::filesystem::path& path,
                                            bool check_files = true);
EpisodeManifest read_manifest(const std::filesystem::path& path, bool check_files = true);

/// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace evla
