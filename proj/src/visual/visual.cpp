#include "ooc/visual.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "json.hpp"
#include "ooc/error.hpp"

namespace ooc::visual {
namespace {

constexpr char kMagic[4] = {'O', 'O', 'C', 'F'};
constexpr std::uint32_t kBinaryVersion = 1;

std::string label(const VisualRecord& r) { return "record '" + r.sample_id + "'"; }

// --- little-endian helpers --------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_f32(std::string& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class ByteReader {
public:
    ByteReader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            fail(ErrorKind::Parse, source_ + ": truncated binary feature file at byte " + std::to_string(pos_));
        }
    }
    std::string bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open feature file " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool is_binary(const std::string& bytes) {
    return bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0;
}

// --- JSON-lines -------------------------------------------------------------

std::vector<double> float_array(const nlohmann::json& j, const std::string& what, const std::string& id) {
    if (!j.is_array()) fail(ErrorKind::Schema, "record '" + id + "': " + what + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) {
            // JSON has no NaN/Inf literals; nlohmann writes them as null.
            if (v.is_null()) fail(ErrorKind::Data, "record '" + id + "': non-finite value in " + what);
            fail(ErrorKind::Schema, "record '" + id + "': " + what + " holds a non-number");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

VisualRecord parse_json_record(const std::string& line, std::size_t lineno, std::size_t n_obj) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected an object with a string 'id'");
    }
    VisualRecord r;
    r.sample_id = j["id"].get<std::string>();
    if (!j.contains("image_feat")) fail(ErrorKind::Schema, label(r) + ": missing image_feat");
    r.image_feat = float_array(j["image_feat"], "image_feat", r.sample_id);
    const std::size_t dim = r.image_feat.size();

    const nlohmann::json objects = j.value("objects", nlohmann::json::array());
    if (!objects.is_array()) fail(ErrorKind::Schema, label(r) + ": objects must be an array");
    if (objects.size() > n_obj) {
        fail(ErrorKind::Schema, label(r) + ": " + std::to_string(objects.size()) +
                                    " objects exceed the " + std::to_string(n_obj) + " object slots");
    }
    r.object_feats.assign(n_obj * dim, 0.0);
    r.object_mask.assign(n_obj, false);
    std::size_t with_box = 0;
    for (const auto& o : objects) {
        if (o.contains("box")) ++with_box;
    }
    if (with_box != 0 && with_box != objects.size()) {
        fail(ErrorKind::Schema, label(r) + ": boxes must be given for all objects or none");
    }
    if (with_box > 0) r.boxes = std::vector<double>(n_obj * 4, 0.0);
    for (std::size_t s = 0; s < objects.size(); ++s) {
        const auto& o = objects[s];
        if (!o.is_object() || !o.contains("feat")) {
            fail(ErrorKind::Schema, label(r) + ": object " + std::to_string(s) + " lacks 'feat'");
        }
        const auto feat = float_array(o["feat"], "objects[" + std::to_string(s) + "].feat", r.sample_id);
        if (feat.size() != dim) {
            fail(ErrorKind::Schema, label(r) + ": object " + std::to_string(s) + " has dimension " +
                                        std::to_string(feat.size()) + ", image_feat has " + std::to_string(dim));
        }
        std::copy(feat.begin(), feat.end(), r.object_feats.begin() + static_cast<std::ptrdiff_t>(s * dim));
        r.object_mask[s] = true;
        if (r.boxes) {
            const auto box = float_array(o["box"], "objects[" + std::to_string(s) + "].box", r.sample_id);
            if (box.size() != 4) fail(ErrorKind::Schema, label(r) + ": box must have 4 values");
            std::copy(box.begin(), box.end(), r.boxes->begin() + static_cast<std::ptrdiff_t>(s * 4));
        }
    }
    return r;
}

template <typename OnRecord, typename OnProblem>
void scan_jsonl(const std::string& bytes, std::size_t n_obj, OnRecord&& on_record, OnProblem&& on_problem) {
    std::size_t lineno = 0, index = 0, start = 0;
    while (start < bytes.size()) {
        std::size_t end = bytes.find('\n', start);
        if (end == std::string::npos) end = bytes.size();
        std::string line = bytes.substr(start, end - start);
        start = end + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            on_record(parse_json_record(line, lineno, n_obj), index);
        } catch (const Error& e) {
            on_problem(e, index, lineno);
        }
        ++index;
    }
}

// --- binary -------------------------------------------------------------------

template <typename OnRecord>
void scan_binary(const std::string& bytes, const std::string& source, OnRecord&& on_record) {
    ByteReader rd(bytes, source);
    rd.str(4);
    const std::uint32_t version = rd.u32();
    if (version != kBinaryVersion) {
        fail(ErrorKind::Parse, source + ": unsupported feature file version " + std::to_string(version));
    }
    const std::size_t dim = rd.u32();
    const std::size_t n_obj = rd.u32();
    const std::size_t count = rd.u32();
    for (std::size_t i = 0; i < count; ++i) {
        VisualRecord r;
        r.sample_id = rd.str(rd.u32());
        r.image_feat.resize(dim);
        for (double& v : r.image_feat) v = rd.f32();
        r.object_mask.resize(n_obj);
        for (std::size_t s = 0; s < n_obj; ++s) r.object_mask[s] = rd.u8() != 0;
        r.object_feats.resize(n_obj * dim);
        for (double& v : r.object_feats) v = rd.f32();
        if (rd.u8() != 0) {
            r.boxes = std::vector<double>(n_obj * 4);
            for (double& v : *r.boxes) v = rd.f32();
        }
        on_record(std::move(r), i, n_obj);
    }
    if (!rd.done()) fail(ErrorKind::Parse, source + ": trailing bytes after " + std::to_string(count) + " records");
}

}  // namespace

std::size_t VisualRecord::real_objects() const {
    return static_cast<std::size_t>(std::count(object_mask.begin(), object_mask.end(), true));
}

std::span<const double> VisualRecord::object(std::size_t slot) const {
    return std::span<const double>(object_feats).subspan(slot * dim(), dim());
}

void validate_record(const VisualRecord& r, std::size_t dim, std::size_t n_obj) {
    if (r.image_feat.size() != dim) {
        fail(ErrorKind::Schema, label(r) + ": image_feat has dimension " + std::to_string(r.image_feat.size()) +
                                    ", expected " + std::to_string(dim));
    }
    if (r.object_mask.size() != n_obj || r.object_feats.size() != n_obj * dim) {
        fail(ErrorKind::Schema, label(r) + ": expected " + std::to_string(n_obj) + " object slots of dimension " +
                                    std::to_string(dim));
    }
    if (r.boxes && r.boxes->size() != n_obj * 4) {
        fail(ErrorKind::Schema, label(r) + ": boxes must hold 4 values per object slot");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(r.image_feat.begin(), r.image_feat.end(), finite) ||
        !std::all_of(r.object_feats.begin(), r.object_feats.end(), finite) ||
        (r.boxes && !std::all_of(r.boxes->begin(), r.boxes->end(), finite))) {
        fail(ErrorKind::Data, label(r) + ": non-finite feature value");
    }
    for (std::size_t s = 0; s < n_obj; ++s) {
        const auto row = r.object(s);
        if (!r.object_mask[s] && std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) {
            fail(ErrorKind::Schema, label(r) + ": masked object slot " + std::to_string(s) + " is not zero-padded");
        }
        if (r.boxes && r.object_mask[s]) {
            for (std::size_t k = 0; k < 4; ++k) {
                const double v = (*r.boxes)[s * 4 + k];
                if (v < 0.0 || v > 1.0) {
                    fail(ErrorKind::Schema, label(r) + ": box value " + std::to_string(v) + " outside [0, 1]");
                }
            }
        }
    }
}

std::vector<VisualRecord> load_features(const std::filesystem::path& path, std::size_t n_obj) {
    const std::string bytes = read_all(path);
    std::vector<VisualRecord> out;
    std::optional<std::size_t> dim;
    auto accept = [&](VisualRecord r, std::size_t slots) {
        if (!dim) dim = r.dim();
        validate_record(r, *dim, slots);
        out.push_back(std::move(r));
    };
    try {
        if (is_binary(bytes)) {
            scan_binary(bytes, path.string(), [&](VisualRecord r, std::size_t, std::size_t slots) {
                accept(std::move(r), slots);
            });
        } else {
            scan_jsonl(
                bytes, n_obj, [&](VisualRecord r, std::size_t) { accept(std::move(r), n_obj); },
                [](const Error& e, std::size_t, std::size_t) { throw e; });
        }
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
    return out;
}

std::vector<Problem> validate_features(const std::filesystem::path& path, std::size_t n_obj) {
    const std::string bytes = read_all(path);
    std::vector<Problem> problems;
    std::optional<std::size_t> dim;
    auto check = [&](const VisualRecord& r, std::size_t index, std::size_t slots) {
        try {
            if (!dim) dim = r.dim();
            validate_record(r, *dim, slots);
        } catch (const Error& e) {
            problems.push_back({r.sample_id, index, e.what()});
        }
    };
    try {
        if (is_binary(bytes)) {
            scan_binary(bytes, path.string(), check);
        } else {
            scan_jsonl(
                bytes, n_obj, [&](VisualRecord r, std::size_t index) { check(r, index, n_obj); },
                [&](const Error& e, std::size_t index, std::size_t lineno) {
                    problems.push_back({"", index, "line " + std::to_string(lineno) + ": " + e.what()});
                });
        }
    } catch (const Error& e) {
        problems.push_back({"", 0, e.what()});
    }
    return problems;
}

void write_features_jsonl(const std::filesystem::path& path, std::span<const VisualRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write feature file " + path.string());
    auto floats = [](auto begin, auto end) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (auto it = begin; it != end; ++it) arr.push_back(static_cast<float>(*it));
        return arr;
    };
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["id"] = r.sample_id;
        j["image_feat"] = floats(r.image_feat.begin(), r.image_feat.end());
        nlohmann::ordered_json objects = nlohmann::ordered_json::array();
        for (std::size_t s = 0; s < r.slots(); ++s) {
            if (!r.object_mask[s]) continue;
            const auto row = r.object(s);
            nlohmann::ordered_json o;
            o["feat"] = floats(row.begin(), row.end());
            if (r.boxes) o["box"] = floats(r.boxes->begin() + s * 4, r.boxes->begin() + s * 4 + 4);
            objects.push_back(std::move(o));
        }
        j["objects"] = std::move(objects);
        out << j.dump() << "\n";
    }
}

void write_features_binary(const std::filesystem::path& path, std::span<const VisualRecord> records) {
    const std::size_t dim = records.empty() ? 0 : records.front().dim();
    const std::size_t n_obj = records.empty() ? kDefaultObjectSlots : records.front().slots();
    std::string buf(kMagic, 4);
    put_u32(buf, kBinaryVersion);
    put_u32(buf, static_cast<std::uint32_t>(dim));
    put_u32(buf, static_cast<std::uint32_t>(n_obj));
    put_u32(buf, static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        if (r.dim() != dim || r.slots() != n_obj) {
            fail(ErrorKind::Schema, label(r) + ": dimensions differ from the first record");
        }
        put_u32(buf, static_cast<std::uint32_t>(r.sample_id.size()));
        buf += r.sample_id;
        for (double v : r.image_feat) put_f32(buf, v);
        for (std::size_t s = 0; s < n_obj; ++s) buf += static_cast<char>(r.object_mask[s] ? 1 : 0);
        for (double v : r.object_feats) put_f32(buf, v);
        buf += static_cast<char>(r.boxes ? 1 : 0);
        if (r.boxes) {
            for (double v : *r.boxes) put_f32(buf, v);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write feature file " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<VisualRecord> synth_features(std::uint64_t seed, std::size_t n_samples, std::size_t min_objects,
                                         std::size_t max_objects, std::size_t dim, std::size_t n_obj) {
    if (dim == 0) fail(ErrorKind::Contract, "synth_features: D_vis must be at least 1");
    max_objects = std::min(max_objects, n_obj);
    min_objects = std::min(min_objects, max_objects);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> count(min_objects, max_objects);
    std::uniform_real_distribution<double> centre(0.1, 0.9);
    std::uniform_real_distribution<double> extent(0.05, 0.2);

    auto unit_vector = [&](std::span<double> out) {
        double norm = 0.0;
        for (double& v : out) {
            v = gauss(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : out) v /= norm;
    };

    std::vector<VisualRecord> records;
    records.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        VisualRecord r;
        r.sample_id = "synth-" + std::to_string(i);
        r.image_feat.resize(dim);
        unit_vector(r.image_feat);
        r.object_feats.assign(n_obj * dim, 0.0);
        r.object_mask.assign(n_obj, false);
        const std::size_t k = count(rng);
        // JSON-lines can only carry boxes on objects, so an empty record has none.
        if (k > 0) r.boxes = std::vector<double>(n_obj * 4, 0.0);
        for (std::size_t s = 0; s < k; ++s) {
            unit_vector(std::span<double>(r.object_feats).subspan(s * dim, dim));
            r.object_mask[s] = true;
            double* box = r.boxes->data() + s * 4;
            box[0] = centre(rng);
            box[1] = centre(rng);
            box[2] = extent(rng);
            box[3] = extent(rng);
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace ooc::visual
