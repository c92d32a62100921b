#pragma once
// Named-entity conditioning: the entity dictionary extracted from a caption,
// its JSON-lines file format, and the fixed-length token sequence fed to the
// encoder.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ooc/bpe.hpp"

namespace ooc::context {

// The 18 spaCy entity categories, alphabetical.
const std::vector<std::string>& default_labels();

// Entity type label → entity strings. std::map keeps labels in the canonical
// (alphabetical) order used when building contexts.
struct NerDictionary {
    std::map<std::string, std::vector<std::string>> entries;

    bool empty() const;
    // Throws Schema error for an unknown label or an empty entity string.
    void validate(std::span<const std::string> labels) const;
    bool operator==(const NerDictionary&) const = default;
};

struct TextContext {
    std::vector<bpe::TokenId> ids;  // length L_text
    std::vector<bool> mask;         // true = real token
    NerDictionary source;

    std::size_t real_tokens() const;
};

// Per non-empty type, in label order:
//   encode(label) ++ encode(" tok1 tok2 …") ++ [end]
// (the label part is dropped when include_types is false), concatenated,
// then truncated to L_text or padded with pad ids and mask=false.
TextContext build_context(const NerDictionary& dict, const bpe::BpeVocab& vocab, std::size_t l_text,
                          bool include_types = true);

// Unpadded sequence, before truncation.
std::vector<bpe::TokenId> context_sequence(const NerDictionary& dict, const bpe::BpeVocab& vocab,
                                           bool include_types);

struct NerRecord {
    std::string id;
    std::optional<std::string> caption;
    NerDictionary entities;
    bool operator==(const NerRecord&) const = default;
};

// {"id": string, "caption": optional string, "entities": {TYPE: [string, ...]}}
NerRecord parse_ner_line(std::string_view line, std::size_t line_number,
                         std::span<const std::string> labels = default_labels());
std::string ner_record_json(const NerRecord& record);

// Blank lines are skipped. Parse errors carry the 1-based line number.
std::vector<NerRecord> parse_ner_file(const std::filesystem::path& path,
                                      std::span<const std::string> labels = default_labels());
void write_ner_file(const std::filesystem::path& path, std::span<const NerRecord> records);

// "GPE=Delhi,India;DATE=Friday". Unknown labels raise a Schema error that
// lists the valid ones. Empty spec → empty dictionary.
NerDictionary parse_token_spec(std::string_view spec,
                               std::span<const std::string> labels = default_labels());

}  // namespace ooc::context
