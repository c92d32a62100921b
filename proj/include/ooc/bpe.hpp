#pragma once
// Byte-level byte-pair encoding in the GPT-2 scheme.
//
// Text is split into chunks with the GPT-2 pre-tokenization pattern, every
// byte of a chunk is mapped to a printable "unit" character, and merges are
// applied lowest rank first. Every byte sequence encodes; nothing maps to an
// unknown token.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ooc::bpe {

using TokenId = std::uint32_t;

inline constexpr std::string_view kStartToken = "<|startoftext|>";
inline constexpr std::string_view kEndToken = "<|endoftext|>";
inline constexpr std::string_view kPadToken = "<|pad|>";

struct Specials {
    TokenId start = 0;
    TokenId end = 0;
    TokenId pad = 0;
};

// GPT-2 byte → unit character table (UTF-8 encoded units).
const std::array<std::string, 256>& byte_encoder();

// Splits text into GPT-2 pre-tokenization chunks (byte ranges of `text`).
std::vector<std::string_view> pretokenize(std::string_view text);

class BpeVocab {
public:
    // Ids 0..255 are the byte units in byte order, then one token per merge,
    // then the three specials.
    static BpeVocab from_merges(const std::vector<std::pair<std::string, std::string>>& merges);

    // Token→id map plus ranked merges. Specials missing from the map are
    // appended (GPT-2 ships only <|endoftext|>).
    static BpeVocab from_parts(std::unordered_map<std::string, TokenId> token_to_id,
                               std::vector<std::pair<std::string, std::string>> merges);

    // In-memory counterpart of load(); `source` only labels error messages.
    static BpeVocab parse(std::string_view vocab_json, std::string_view merges_text,
                          const std::string& source = "embedded");
    static BpeVocab load(const std::filesystem::path& vocab_json,
                         const std::filesystem::path& merges_txt);
    void save(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) const;

    std::size_t size() const { return id_to_token_.size(); }
    const Specials& specials() const { return specials_; }
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    const std::string& token(TokenId id) const;
    // Throws Vocabulary error if absent.
    TokenId id_of(std::string_view token) const;
    bool contains(std::string_view token) const;
    bool is_special(TokenId id) const;

    std::vector<TokenId> encode(std::string_view text) const;
    // Specials are stripped; ids ≥ size() raise a Vocabulary error.
    std::string decode(std::span<const TokenId> ids) const;

    // JSON object token→id, as in the GPT-2 vocab.json file.
    std::string vocab_json() const;
    std::string merges_text() const;

private:
    void index_merges();
    void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const;

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    // (left id << 32 | right id) → (rank, merged id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, TokenId>> merge_index_;
    std::array<TokenId, 256> byte_ids_{};
    std::unordered_map<std::uint32_t, std::uint8_t> unit_to_byte_;
    Specials specials_;
};

// Learns merges from a corpus: the most frequent adjacent pair wins, ties go
// to the lexicographically smallest (left bytes, right bytes). Stops early
// when no pairs remain. target_vocab_size counts byte units plus merges; the
// three specials are added on top. Empty corpus → Input error.
BpeVocab train_merges(std::span<const std::string> corpus, std::size_t target_vocab_size);

}  // namespace ooc::bpe
