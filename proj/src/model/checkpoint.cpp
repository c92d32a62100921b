#include "ooc/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>

#include "ooc/error.hpp"

namespace ooc::model {
namespace {

constexpr char kMagic[4] = {'O', 'O', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

struct Reader {
    const std::string& bytes;
    std::string source;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (bytes.size() - pos < n) fail(ErrorKind::Parse, source + ": truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const Ablation& ablation,
                     const ModelParams& params, const bpe::BpeVocab& vocab, const nlohmann::json& extra) {
    nlohmann::json meta;
    meta["model"] = config.to_json();
    meta["ablation"] = ablation.to_json();
    meta["vocab"] = {{"tokens", vocab.vocab_json()}, {"merges", vocab.merges_text()}};
    meta["extra"] = extra;
    const std::string text = meta.dump();

    std::string buf(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(text.size()));
    buf += text;
    const auto named = params.named();
    put_u32(buf, static_cast<std::uint32_t>(named.size()));
    for (const auto& p : named) {
        put_u32(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        const auto& shape = p.tensor.shape();
        put_u32(buf, static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) put_u32(buf, static_cast<std::uint32_t>(d));
        for (double v : p.tensor.data()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader rd{bytes, path.string()};
    if (rd.str(4) != std::string(kMagic, 4)) fail(ErrorKind::Parse, path.string() + ": not a checkpoint file");
    const std::uint32_t version = rd.u32();
    if (version != kVersion) {
        fail(ErrorKind::Parse, path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(rd.str(rd.u32()));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    if (!meta.contains("model") || !meta.contains("vocab")) {
        fail(ErrorKind::Schema, path.string() + ": checkpoint metadata lacks model or vocab");
    }

    Checkpoint ck;
    ck.config = ModelConfig::from_json(meta["model"]);
    ck.config.validate();
    ck.ablation = Ablation::from_json(meta.value("ablation", nlohmann::json::object()));
    ck.vocab = bpe::BpeVocab::parse(meta["vocab"].value("tokens", ""), meta["vocab"].value("merges", ""),
                                    path.string());
    if (ck.vocab.size() != ck.config.vocab_size) {
        fail(ErrorKind::Schema, path.string() + ": embedded vocabulary has " + std::to_string(ck.vocab.size()) +
                                    " tokens, model expects " + std::to_string(ck.config.vocab_size));
    }
    ck.extra = meta.value("extra", nlohmann::json::object());
    ck.params = ModelParams::init(ck.config, 0);

    std::map<std::string, Tensor> by_name;
    for (const auto& p : ck.params.named()) by_name.emplace(p.name, p.tensor);
    const std::uint32_t count = rd.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = rd.str(rd.u32());
        Shape shape(rd.u32());
        for (auto& d : shape) d = rd.u32();
        auto it = by_name.find(name);
        if (it == by_name.end()) fail(ErrorKind::Schema, path.string() + ": unexpected parameter '" + name + "'");
        if (it->second.shape() != shape) {
            fail(ErrorKind::Schema, path.string() + ": parameter '" + name + "' has shape " + shape_string(shape) +
                                        ", config implies " + shape_string(it->second.shape()));
        }
        auto values = it->second.mutable_data();
        rd.need(4 * values.size());
        for (double& v : values) {
            v = static_cast<double>(std::bit_cast<float>(rd.u32()));
            if (!std::isfinite(v)) fail(ErrorKind::Data, path.string() + ": non-finite value in '" + name + "'");
        }
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        fail(ErrorKind::Schema, path.string() + ": missing parameter '" + by_name.begin()->first + "'");
    }
    if (rd.pos != bytes.size()) fail(ErrorKind::Parse, path.string() + ": trailing bytes after parameters");
    return ck;
}

}  // namespace ooc::model
