#include "ooc/context.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "ooc/error.hpp"

namespace ooc::context {
namespace {

std::string list_labels(std::span<const std::string> labels) {
    std::string out;
    for (const auto& l : labels) {
        if (!out.empty()) out += ", ";
        out += l;
    }
    return out;
}

bool known_label(std::span<const std::string> labels, const std::string& label) {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& default_labels() {
    static const std::vector<std::string> labels{
        "CARDINAL", "DATE",    "EVENT",   "FAC",     "GPE",     "LANGUAGE",
        "LAW",      "LOC",     "MONEY",   "NORP",    "ORDINAL", "ORG",
        "PERCENT",  "PERSON",  "PRODUCT", "QUANTITY", "TIME",   "WORK_OF_ART"};
    return labels;
}

bool NerDictionary::empty() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const auto& kv) { return kv.second.empty(); });
}

void NerDictionary::validate(std::span<const std::string> labels) const {
    for (const auto& [label, tokens] : entries) {
        if (!known_label(labels, label)) {
            fail(ErrorKind::Schema,
                 "unknown entity type '" + label + "'; valid types: " + list_labels(labels));
        }
        for (const auto& tok : tokens) {
            if (tok.empty()) fail(ErrorKind::Schema, "empty entity string under type '" + label + "'");
        }
    }
}

std::size_t TextContext::real_tokens() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

std::vector<bpe::TokenId> context_sequence(const NerDictionary& dict, const bpe::BpeVocab& vocab,
                                           bool include_types) {
    std::vector<bpe::TokenId> seq;
    for (const auto& [label, tokens] : dict.entries) {
        if (tokens.empty()) continue;
        if (include_types) {
            const auto ids = vocab.encode(label);
            seq.insert(seq.end(), ids.begin(), ids.end());
        }
        std::string joined;
        for (const auto& tok : tokens) joined += " " + tok;
        const auto ids = vocab.encode(joined);
        seq.insert(seq.end(), ids.begin(), ids.end());
        seq.push_back(vocab.specials().end);
    }
    return seq;
}

TextContext build_context(const NerDictionary& dict, const bpe::BpeVocab& vocab, std::size_t l_text,
                          bool include_types) {
    if (l_text == 0) fail(ErrorKind::Contract, "build_context: L_text must be at least 1");
    std::vector<bpe::TokenId> seq = context_sequence(dict, vocab, include_types);
    if (seq.size() > l_text) seq.resize(l_text);
    TextContext ctx;
    ctx.mask.assign(l_text, false);
    std::fill(ctx.mask.begin(), ctx.mask.begin() + static_cast<std::ptrdiff_t>(seq.size()), true);
    seq.resize(l_text, vocab.specials().pad);
    ctx.ids = std::move(seq);
    ctx.source = dict;
    return ctx;
}

NerRecord parse_ner_line(std::string_view line, std::size_t line_number,
                         std::span<const std::string> labels) {
    const std::string where = "line " + std::to_string(line_number);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, where + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Parse, where + ": expected a JSON object");
    NerRecord rec;
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) fail(ErrorKind::Parse, where + ": missing string field 'id'");
    rec.id = id->get<std::string>();
    if (auto cap = j.find("caption"); cap != j.end() && !cap->is_null()) {
        if (!cap->is_string()) fail(ErrorKind::Parse, where + ": 'caption' must be a string");
        rec.caption = cap->get<std::string>();
    }
    auto ents = j.find("entities");
    if (ents == j.end() || !ents->is_object()) {
        fail(ErrorKind::Parse, where + ": missing object field 'entities'");
    }
    for (auto it = ents->begin(); it != ents->end(); ++it) {
        if (!it.value().is_array()) fail(ErrorKind::Parse, where + ": entities." + it.key() + " must be a list");
        std::vector<std::string> toks;
        for (const auto& t : it.value()) {
            if (!t.is_string()) fail(ErrorKind::Parse, where + ": entities." + it.key() + " holds a non-string");
            toks.push_back(t.get<std::string>());
        }
        rec.entities.entries[it.key()] = std::move(toks);
    }
    try {
        rec.entities.validate(labels);
    } catch (const Error& e) {
        fail(e.kind(), where + " (id '" + rec.id + "'): " + e.what());
    }
    return rec;
}

std::string ner_record_json(const NerRecord& record) {
    nlohmann::ordered_json j;
    j["id"] = record.id;
    if (record.caption) j["caption"] = *record.caption;
    nlohmann::ordered_json ents = nlohmann::ordered_json::object();
    for (const auto& [label, toks] : record.entities.entries) ents[label] = toks;
    j["entities"] = std::move(ents);
    return j.dump();
}

std::vector<NerRecord> parse_ner_file(const std::filesystem::path& path,
                                      std::span<const std::string> labels) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open NER file " + path.string());
    std::vector<NerRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(parse_ner_line(line, lineno, labels));
        } catch (const Error& e) {
            fail(e.kind(), path.string() + ": " + e.what());
        }
    }
    return out;
}

void write_ner_file(const std::filesystem::path& path, std::span<const NerRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write NER file " + path.string());
    for (const auto& r : records) out << ner_record_json(r) << "\n";
}

NerDictionary parse_token_spec(std::string_view spec, std::span<const std::string> labels) {
    NerDictionary dict;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const std::size_t semi = std::min(spec.find(';', pos), spec.size());
        const std::string group = trim(spec.substr(pos, semi - pos));
        pos = semi + 1;
        if (group.empty()) continue;
        const auto eq = group.find('=');
        if (eq == std::string::npos) {
            fail(ErrorKind::Usage, "token group '" + group + "' is not of the form TYPE=a,b");
        }
        const std::string label = trim(std::string_view(group).substr(0, eq));
        if (!known_label(labels, label)) {
            fail(ErrorKind::Schema,
                 "unknown entity type '" + label + "'; valid types: " + list_labels(labels));
        }
        auto& toks = dict.entries[label];
        std::string_view rest = std::string_view(group).substr(eq + 1);
        std::size_t p = 0;
        while (p <= rest.size()) {
            const std::size_t comma = std::min(rest.find(',', p), rest.size());
            std::string tok = trim(rest.substr(p, comma - p));
            if (!tok.empty()) toks.push_back(std::move(tok));
            p = comma + 1;
        }
    }
    return dict;
}

}  // namespace ooc::context
