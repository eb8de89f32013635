#include "evla/storage.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evla {

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f32(std::uint8_t* p, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(p, bits);
}

float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SinkFailure("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// event files

std::uint64_t write_events(const EventStream& stream, std::ostream& sink) {
    std::array<std::uint8_t, kEventHeaderSize> header{};
    std::memcpy(header.data(), kEventMagic, 4);
    put_u16(header.data() + 4, kEventFormatVersion);
    put_u16(header.data() + 6, stream.geometry().width);
    put_u16(header.data() + 8, stream.geometry().height);
    header[10] = static_cast<std::uint8_t>(stream.geometry().bayer_origin);
    // bytes 11..15 reserved zero
    put_u64(header.data() + 16, stream.size());
    sink.write(reinterpret_cast<const char*>(header.data()), header.size());

    std::vector<std::uint8_t> buffer;
    constexpr std::size_t kChunk = 1 << 16;
    buffer.resize(std::min(stream.size(), kChunk) * kEventRecordSize);
    std::size_t in_buffer = 0;
    for (const Event& e : stream.events()) {
        std::uint8_t* rec = buffer.data() + in_buffer * kEventRecordSize;
        put_u64(rec, e.t);
        put_u16(rec + 8, e.x);
        put_u16(rec + 10, e.y);
        rec[12] = static_cast<std::uint8_t>(static_cast<std::int8_t>(e.p));
        rec[13] = rec[14] = rec[15] = 0;
        if (++in_buffer == kChunk) {
            sink.write(reinterpret_cast<const char*>(buffer.data()), in_buffer * kEventRecordSize);
            in_buffer = 0;
        }
    }
    if (in_buffer > 0) {
        sink.write(reinterpret_cast<const char*>(buffer.data()), in_buffer * kEventRecordSize);
    }
    if (!sink) throw SinkFailure("event write failed");
    return kEventHeaderSize + stream.size() * kEventRecordSize;
}

std::uint64_t write_events(const EventStream& stream, const std::filesystem::path& path) {
    auto out = open_output(path);
    return write_events(stream, out);
}

EventStream read_events(std::istream& source) {
    std::array<std::uint8_t, kEventHeaderSize> header{};
    source.read(reinterpret_cast<char*>(header.data()), header.size());
    if (source.gcount() != static_cast<std::streamsize>(header.size())) {
        throw TruncatedFile(static_cast<std::uint64_t>(source.gcount()));
    }
    if (std::memcmp(header.data(), kEventMagic, 4) != 0) {
        throw BadMagic("not an event file (bad magic)");
    }
    const std::uint16_t version = get_u16(header.data() + 4);
    if (version != kEventFormatVersion) {
        throw UnsupportedVersion("event file version " + std::to_string(version));
    }
    SensorGeometry geometry;
    geometry.width = get_u16(header.data() + 6);
    geometry.height = get_u16(header.data() + 8);
    if (header[10] > 3) throw MalformedHeader("unknown Bayer origin code");
    geometry.bayer_origin = static_cast<BayerOrigin>(header[10]);
    const std::uint64_t count = get_u64(header.data() + 16);

    std::vector<Event> events;
    events.reserve(count);
    std::vector<std::uint8_t> buffer;
    constexpr std::size_t kChunk = 1 << 16;
    std::uint64_t remaining = count;
    std::uint64_t offset = kEventHeaderSize;
    while (remaining > 0) {
        const std::size_t batch = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kChunk));
        buffer.resize(batch * kEventRecordSize);
        source.read(reinterpret_cast<char*>(buffer.data()), buffer.size());
        if (source.gcount() != static_cast<std::streamsize>(buffer.size())) {
            throw TruncatedFile(offset + static_cast<std::uint64_t>(source.gcount()));
        }
        for (std::size_t i = 0; i < batch; ++i) {
            const std::uint8_t* rec = buffer.data() + i * kEventRecordSize;
            Event e;
            e.t = get_u64(rec);
            e.x = get_u16(rec + 8);
            e.y = get_u16(rec + 10);
            const auto p = static_cast<std::int8_t>(rec[12]);
            if (p != 1 && p != -1) {
                throw IoError("invalid polarity byte at record " +
                              std::to_string(count - remaining + i));
            }
            e.p = static_cast<Polarity>(p);
            events.push_back(e);
        }
        remaining -= batch;
        offset += buffer.size();
    }
    return validate_stream(std::move(events), geometry);
}

EventStream read_events(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_events(in);
}

// ---------------------------------------------------------------------------
// portable pixmaps

namespace {

// whitespace- and comment-tolerant header token reader
std::uint32_t read_pnm_value(std::istream& in) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw MalformedHeader("expected numeric pixmap field");
    std::uint64_t value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + static_cast<std::uint64_t>(c - '0');
        if (value > 0xffffffffull) throw MalformedHeader("pixmap field out of range");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return static_cast<std::uint32_t>(value);
}

void read_pnm_payload(std::istream& in, std::vector<std::uint8_t>& data) {
    const int sep = in.get();
    if (sep == EOF || !std::isspace(sep)) throw MalformedHeader("missing payload separator");
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (in.gcount() != static_cast<std::streamsize>(data.size())) {
        throw TruncatedFile(static_cast<std::uint64_t>(in.gcount()));
    }
}

std::pair<std::uint16_t, std::uint16_t> read_pnm_header(std::istream& in, char expected_kind) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P') throw BadMagic("not a pixmap file");
    if (magic[1] != expected_kind) {
        throw MalformedHeader(std::string("expected P") + expected_kind + ", found P" + magic[1]);
    }
    const std::uint32_t w = read_pnm_value(in);
    const std::uint32_t h = read_pnm_value(in);
    const std::uint32_t maxval = read_pnm_value(in);
    if (maxval != 255) throw UnsupportedMaxval("maxval " + std::to_string(maxval));
    if (w == 0 || h == 0 || w > 0xffff || h > 0xffff) {
        throw MalformedHeader("pixmap dimensions out of range");
    }
    return {static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h)};
}

std::uint8_t quantize_unit(float v) {
    const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

}  // namespace

void write_image(const std::filesystem::path& path, const RgbImage& image) {
    auto out = open_output(path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw SinkFailure("pixmap write failed: " + path.string());
}

RgbImage read_image(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto [w, h] = read_pnm_header(in, '6');
    RgbImage image{w, h, std::vector<std::uint8_t>(std::size_t(w) * h * 3)};
    read_pnm_payload(in, image.data);
    return image;
}

void write_gray(const std::filesystem::path& path, const NormalizedMap& map) {
    GrayImage img{map.geometry.width, map.geometry.height,
                  std::vector<std::uint8_t>(map.values.size())};
    for (std::size_t i = 0; i < map.values.size(); ++i) img.data[i] = quantize_unit(map.values[i]);
    write_gray(path, img);
}

void write_gray(const std::filesystem::path& path, const GrayImage& image) {
    auto out = open_output(path);
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw SinkFailure("graymap write failed: " + path.string());
}

GrayImage read_gray(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto [w, h] = read_pnm_header(in, '5');
    GrayImage image{w, h, std::vector<std::uint8_t>(std::size_t(w) * h)};
    read_pnm_payload(in, image.data);
    return image;
}

void write_frame(const std::filesystem::path& path, const EventFrame& frame) {
    RgbImage img{frame.geometry.width, frame.geometry.height,
                 std::vector<std::uint8_t>(frame.values.size())};
    for (std::size_t i = 0; i < frame.values.size(); ++i) img.data[i] = quantize_unit(frame.values[i]);
    write_image(path, img);
}

// ---------------------------------------------------------------------------
// adapter parameter container

void write_tensors(const std::vector<NamedTensor>& tensors, std::ostream& sink) {
    std::array<std::uint8_t, 10> header{};
    std::memcpy(header.data(), kParamsMagic, 4);
    put_u16(header.data() + 4, kParamsFormatVersion);
    put_u32(header.data() + 6, static_cast<std::uint32_t>(tensors.size()));
    sink.write(reinterpret_cast<const char*>(header.data()), header.size());

    std::vector<std::uint8_t> buf;
    for (const auto& t : tensors) {
        if (t.name.size() > 0xffff) throw SinkFailure("tensor name too long");
        buf.resize(2 + t.name.size() + 1 + 4 * t.shape.size() + 4 * t.values.size());
        std::uint8_t* p = buf.data();
        put_u16(p, static_cast<std::uint16_t>(t.name.size()));
        p += 2;
        std::memcpy(p, t.name.data(), t.name.size());
        p += t.name.size();
        *p++ = static_cast<std::uint8_t>(t.shape.size());
        for (const std::uint32_t d : t.shape) {
            put_u32(p, d);
            p += 4;
        }
        for (const float v : t.values) {
            put_f32(p, v);
            p += 4;
        }
        sink.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!sink) throw SinkFailure("tensor container write failed");
}

void write_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_tensors(tensors, out);
}

std::vector<NamedTensor> read_tensors(std::istream& source) {
    auto read_exact = [&](std::uint8_t* dst, std::size_t n, std::uint64_t at) {
        source.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (source.gcount() != static_cast<std::streamsize>(n)) {
            throw TruncatedFile(at + static_cast<std::uint64_t>(source.gcount()));
        }
    };

    std::array<std::uint8_t, 10> header{};
    std::uint64_t offset = 0;
    read_exact(header.data(), header.size(), offset);
    offset += header.size();
    if (std::memcmp(header.data(), kParamsMagic, 4) != 0) {
        throw BadMagic("not a tensor container (bad magic)");
    }
    const std::uint16_t version = get_u16(header.data() + 4);
    if (version != kParamsFormatVersion) {
        throw UnsupportedVersion("tensor container version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(header.data() + 6);

    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    std::vector<std::uint8_t> buf;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint8_t len_raw[2];
        read_exact(len_raw, 2, offset);
        offset += 2;
        const std::uint16_t name_len = get_u16(len_raw);
        NamedTensor t;
        t.name.resize(name_len);
        read_exact(reinterpret_cast<std::uint8_t*>(t.name.data()), name_len, offset);
        offset += name_len;
        std::uint8_t ndim;
        read_exact(&ndim, 1, offset);
        offset += 1;
        std::uint64_t total = 1;
        t.shape.resize(ndim);
        buf.resize(4 * ndim);
        read_exact(buf.data(), buf.size(), offset);
        offset += buf.size();
        for (std::size_t d = 0; d < ndim; ++d) {
            t.shape[d] = get_u32(buf.data() + 4 * d);
            total *= t.shape[d];
        }
        buf.resize(4 * total);
        read_exact(buf.data(), buf.size(), offset);
        offset += buf.size();
        t.values.resize(total);
        for (std::size_t v = 0; v < total; ++v) t.values[v] = get_f32(buf.data() + 4 * v);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_tensors(in);
}

std::vector<NamedTensor> params_to_tensors(const AdapterParams& params) {
    std::vector<NamedTensor> tensors;
    tensors.reserve(params.tensors().size());
    for (const auto& spec : params.tensors()) {
        NamedTensor t;
        t.name = spec.name;
        t.shape.assign(spec.shape.begin(), spec.shape.end());
        const auto values = params.flat().subspan(spec.offset, spec.size);
        t.values.resize(spec.size);
        for (std::size_t i = 0; i < spec.size; ++i) t.values[i] = static_cast<float>(values[i]);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

AdapterParams params_from_tensors(const AdapterConfig& config,
                                  const std::vector<NamedTensor>& tensors) {
    AdapterParams params(config);
    if (tensors.size() != params.tensors().size()) {
        throw ShapeMismatch("tensor count " + std::to_string(tensors.size()) + ", expected " +
                            std::to_string(params.tensors().size()));
    }
    for (const auto& t : tensors) {
        const TensorSpec& spec = params.spec(t.name);  // throws on unknown name
        if (t.shape.size() != spec.shape.size() ||
            !std::equal(t.shape.begin(), t.shape.end(), spec.shape.begin(),
                        [](std::uint32_t a, int b) { return a == static_cast<std::uint32_t>(b); })) {
            throw ShapeMismatch(t.name);
        }
        auto dst = params.tensor(t.name);
        for (std::size_t i = 0; i < t.values.size(); ++i) dst[i] = t.values[i];
    }
    return params;
}

void write_params(const AdapterParams& params, const std::filesystem::path& path) {
    write_tensors(params_to_tensors(params), path);
}

AdapterParams read_params(const AdapterConfig& config, const std::filesystem::path& path) {
    return params_from_tensors(config, read_tensors(path));
}

// ---------------------------------------------------------------------------
// episode manifests

namespace {

using nlohmann::json;

json geometry_to_json(const SensorGeometry& g) {
    return json{{"width", g.width}, {"height", g.height}, {"bayer_origin", to_string(g.bayer_origin)}};
}

SensorGeometry geometry_from_json(const json& j, std::size_t line_no) {
    if (!j.is_object() || !j.contains("width") || !j.contains("height")) {
        throw MalformedRecord(line_no, "geometry requires width and height");
    }
    SensorGeometry g;
    g.width = j.at("width").get<std::uint16_t>();
    g.height = j.at("height").get<std::uint16_t>();
    g.bayer_origin = j.contains("bayer_origin")
                         ? bayer_origin_from_string(j.at("bayer_origin").get<std::string>())
                         : BayerOrigin::RGGB;
    return g;
}

}  // namespace

nlohmann::json manifest_to_json(const EpisodeManifest& manifest) {
    json record = manifest.extra;
    record["episode_id"] = manifest.episode_id;
    record["geometry"] = geometry_to_json(manifest.geometry);
    record["events_path"] = manifest.events_path;
    record["action_units"] = manifest.action_units;
    json frames = json::array();
    for (const auto& f : manifest.frames) {
        json jf = f.extra;
        jf["t_exposure_end_us"] = f.t_exposure_end_us;
        jf["image_path"] = f.image_path;
        jf["exposure_ms"] = f.exposure_ms;
        jf["light_scale"] = f.light_scale;
        frames.push_back(std::move(jf));
    }
    record["frames"] = std::move(frames);
    if (manifest.actions) {
        json actions = json::array();
        for (const auto& a : *manifest.actions) {
            actions.push_back(json{{"t_us", a.t_us}, {"joint_positions", a.joint_positions}});
        }
        record["actions"] = std::move(actions);
    }
    return record;
}

EpisodeManifest manifest_from_json(const nlohmann::json& record, std::size_t line_no) {
    if (!record.is_object()) throw MalformedRecord(line_no, "episode record must be an object");
    for (const char* key : {"episode_id", "geometry", "frames", "events_path"}) {
        if (!record.contains(key)) {
            throw MalformedRecord(line_no, std::string("missing field: ") + key);
        }
    }
    EpisodeManifest m;
    try {
        m.episode_id = record.at("episode_id").get<std::string>();
        m.geometry = geometry_from_json(record.at("geometry"), line_no);
        m.events_path = record.at("events_path").get<std::string>();
        if (record.contains("action_units")) {
            m.action_units = record.at("action_units").get<std::string>();
        }
        for (const auto& jf : record.at("frames")) {
            ManifestFrame f;
            f.t_exposure_end_us = jf.at("t_exposure_end_us").get<std::uint64_t>();
            f.image_path = jf.at("image_path").get<std::string>();
            f.exposure_ms = jf.value("exposure_ms", 0.0);
            f.light_scale = jf.value("light_scale", 1.0);
            f.extra = jf;
            m.frames.push_back(std::move(f));
        }
        if (record.contains("actions") && !record.at("actions").is_null()) {
            std::vector<ManifestAction> actions;
            for (const auto& ja : record.at("actions")) {
                ManifestAction a;
                a.t_us = ja.at("t_us").get<std::uint64_t>();
                const auto& jp = ja.at("joint_positions");
                if (jp.size() != 6) throw MalformedRecord(line_no, "joint_positions must have 6 entries");
                for (std::size_t i = 0; i < 6; ++i) a.joint_positions[i] = jp.at(i).get<double>();
                actions.push_back(a);
            }
            m.actions = std::move(actions);
        }
    } catch (const json::exception& e) {
        throw MalformedRecord(line_no, e.what());
    }
    for (std::size_t i = 1; i < m.frames.size(); ++i) {
        if (m.frames[i].t_exposure_end_us <= m.frames[i - 1].t_exposure_end_us) {
            throw NonMonotoneFrames("frame timestamps must strictly increase (frame " +
                                    std::to_string(i) + ")");
        }
    }
    m.extra = record;
    return m;
}

void write_manifests(const std::vector<EpisodeManifest>& manifests,
                     const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& m : manifests) {
        out << manifest_to_json(m).dump() << "\n";
    }
    if (!out) throw SinkFailure("manifest write failed: " + path.string());
}

void write_manifest(const EpisodeManifest& manifest, const std::filesystem::path& path) {
    write_manifests({manifest}, path);
}

std::vector<EpisodeManifest> read_manifests(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto base = path.parent_path();
    std::vector<EpisodeManifest> manifests;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_no, e.what());
        }
        EpisodeManifest m = manifest_from_json(record, line_no);
        if (check_files) {
            auto must_exist = [&](const std::string& rel) {
                const auto p = base / rel;
                if (!std::filesystem::exists(p)) {
                    throw MissingReferencedFile("manifest references missing file: " + p.string());
                }
            };
            must_exist(m.events_path);
            for (const auto& f : m.frames) must_exist(f.image_path);
        }
        manifests.push_back(std::move(m));
    }
    return manifests;
}

EpisodeManifest read_manifest(const std::filesystem::path& path, bool check_files) {
    auto all = read_manifests(path, check_files);
    if (all.empty()) throw MalformedRecord(1, "manifest contains no episodes");
    return all.front();
}

std::string file_digest(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::uint64_t hash = 14695981039346656037ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<std::uint8_t>(buf[i]);
            hash *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(hex);
}

}  // namespace evla
