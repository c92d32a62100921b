#include "ooc/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "ooc/error.hpp"

namespace ooc::bpe {
namespace detail {
struct CodepointRange {
    std::uint32_t first;
    std::uint32_t last;
};
}  // namespace detail
}  // namespace ooc::bpe

#include "unicode_tables.inc"

namespace ooc::bpe {
namespace {

constexpr std::uint32_t kInvalidByte = 0xFFFFFFFF;

enum class CharClass { Letter, Number, Space, Other };

template <std::size_t N>
bool in_ranges(const detail::CodepointRange (&table)[N], std::uint32_t cp) {
    auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                               [](std::uint32_t v, const detail::CodepointRange& r) { return v < r.first; });
    if (it == std::begin(table)) return false;
    --it;
    return cp <= it->last;
}

CharClass classify(std::uint32_t cp) {
    if (cp == kInvalidByte) return CharClass::Other;
    if (cp < 0x80) {
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::Letter;
        if (cp >= '0' && cp <= '9') return CharClass::Number;
        if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return CharClass::Space;
        return CharClass::Other;
    }
    if (in_ranges(detail::kLetterRanges, cp)) return CharClass::Letter;
    if (in_ranges(detail::kNumberRanges, cp)) return CharClass::Number;
    if (in_ranges(detail::kSpaceRanges, cp)) return CharClass::Space;
    return CharClass::Other;
}

struct Codepoint {
    std::uint32_t value;  // kInvalidByte for a byte that does not start valid UTF-8
    std::size_t offset;   // byte offset into the text
};

// Lenient UTF-8 decoding: malformed bytes become single kInvalidByte units.
std::vector<Codepoint> decode_utf8(std::string_view text) {
    std::vector<Codepoint> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= text.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(text[i + k]);
            if ((b & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (b & 0x3F);
        }
        if (ok) {
            static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
            ok = cp >= kMin[len] && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
        }
        if (!ok) {
            out.push_back({kInvalidByte, i});
            ++i;
        } else {
            out.push_back({cp, i});
            i += len;
        }
    }
    return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Unit codepoint for each byte, following GPT-2's bytes_to_unicode.
const std::array<std::uint32_t, 256>& byte_units() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        std::array<bool, 256> printable{};
        for (int b = '!'; b <= '~'; ++b) printable[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
        std::uint32_t next = 256;
        for (int b = 0; b < 256; ++b) t[b] = printable[b] ? static_cast<std::uint32_t>(b) : next++;
        return t;
    }();
    return table;
}

std::uint64_t pair_key(TokenId a, TokenId b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

bool is_contraction_start(const std::vector<Codepoint>& cps, std::size_t i, std::size_t& len) {
    if (cps[i].value != '\'' || i + 1 >= cps.size()) return false;
    const std::uint32_t c1 = cps[i + 1].value;
    const std::uint32_t c2 = i + 2 < cps.size() ? cps[i + 2].value : 0;
    if (c1 == 's' || c1 == 't' || c1 == 'm' || c1 == 'd') {
        len = 2;
        return true;
    }
    if ((c1 == 'r' && c2 == 'e') || (c1 == 'v' && c2 == 'e') || (c1 == 'l' && c2 == 'l')) {
        len = 3;
        return true;
    }
    return false;
}

}  // namespace

const std::array<std::string, 256>& byte_encoder() {
    static const std::array<std::string, 256> table = [] {
        std::array<std::string, 256> t;
        for (int b = 0; b < 256; ++b) append_utf8(t[b], byte_units()[b]);
        return t;
    }();
    return table;
}

// Implements 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
std::vector<std::string_view> pretokenize(std::string_view text) {
    const std::vector<Codepoint> cps = decode_utf8(text);
    std::vector<CharClass> cls(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) cls[i] = classify(cps[i].value);

    std::vector<std::string_view> chunks;
    auto emit = [&](std::size_t begin, std::size_t end) {
        const std::size_t b = cps[begin].offset;
        const std::size_t e = end < cps.size() ? cps[end].offset : text.size();
        chunks.push_back(text.substr(b, e - b));
    };
    auto run_end = [&](std::size_t from, CharClass c) {
        while (from < cps.size() && cls[from] == c) ++from;
        return from;
    };

    std::size_t i = 0;
    while (i < cps.size()) {
        std::size_t len = 0;
        if (is_contraction_start(cps, i, len)) {
            emit(i, i + len);
            i += len;
            continue;
        }
        const bool lead_space = cps[i].value == ' ' && i + 1 < cps.size();
        const std::size_t body = lead_space ? i + 1 : i;
        const CharClass c = cls[body];
        if (c != CharClass::Space && (lead_space || cls[i] != CharClass::Space)) {
            const std::size_t end = run_end(body, c);
            emit(i, end);
            i = end;
            continue;
        }
        // Whitespace run: leave the last space for the following token.
        const std::size_t end = run_end(i, CharClass::Space);
        if (end == cps.size() || end - i == 1) {
            emit(i, end);
            i = end;
        } else {
            emit(i, end - 1);
            i = end - 1;
        }
    }
    return chunks;
}

BpeVocab BpeVocab::from_merges(const std::vector<std::pair<std::string, std::string>>& merges) {
    std::unordered_map<std::string, TokenId> map;
    TokenId next = 0;
    for (const std::string& unit : byte_encoder()) map.emplace(unit, next++);
    for (const auto& [a, b] : merges) {
        if (map.emplace(a + b, next).second) ++next;
    }
    for (std::string_view s : {kStartToken, kEndToken, kPadToken}) map.emplace(std::string(s), next++);
    return from_parts(std::move(map), merges);
}

BpeVocab BpeVocab::from_parts(std::unordered_map<std::string, TokenId> token_to_id,
                              std::vector<std::pair<std::string, std::string>> merges) {
    BpeVocab v;
    for (std::string_view s : {kStartToken, kEndToken, kPadToken}) {
        if (!token_to_id.contains(std::string(s))) {
            const auto id = static_cast<TokenId>(token_to_id.size());
            token_to_id.emplace(std::string(s), id);
        }
    }
    v.id_to_token_.assign(token_to_id.size(), std::string());
    std::vector<bool> filled(token_to_id.size(), false);
    for (const auto& [tok, id] : token_to_id) {
        if (id >= token_to_id.size() || filled[id]) {
            fail(ErrorKind::Schema, "vocabulary ids are not dense in [0, " +
                                        std::to_string(token_to_id.size()) + "): bad id " +
                                        std::to_string(id) + " for token '" + tok + "'");
        }
        filled[id] = true;
        v.id_to_token_[id] = tok;
    }
    v.token_to_id_ = std::move(token_to_id);
    v.merges_ = std::move(merges);

    const auto& units = byte_encoder();
    for (int b = 0; b < 256; ++b) {
        auto it = v.token_to_id_.find(units[b]);
        if (it == v.token_to_id_.end()) {
            fail(ErrorKind::Schema, "vocabulary lacks the unit token for byte " + std::to_string(b));
        }
        v.byte_ids_[b] = it->second;
        v.unit_to_byte_.emplace(byte_units()[b], static_cast<std::uint8_t>(b));
    }
    v.specials_ = {v.id_of(kStartToken), v.id_of(kEndToken), v.id_of(kPadToken)};
    v.index_merges();
    return v;
}

void BpeVocab::index_merges() {
    merge_index_.clear();
    merge_index_.reserve(merges_.size());
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        const auto& [a, b] = merges_[r];
        auto ia = token_to_id_.find(a);
        auto ib = token_to_id_.find(b);
        auto im = token_to_id_.find(a + b);
        if (ia == token_to_id_.end() || ib == token_to_id_.end() || im == token_to_id_.end()) {
            fail(ErrorKind::Schema, "merge rule " + std::to_string(r) + " ('" + a + "' '" + b +
                                        "') refers to tokens missing from the vocabulary");
        }
        // First occurrence keeps the lowest rank.
        merge_index_.emplace(pair_key(ia->second, ib->second),
                             std::make_pair(static_cast<std::uint32_t>(r), im->second));
    }
}

BpeVocab BpeVocab::parse(std::string_view vocab_json, std::string_view merges_text, const std::string& source) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(vocab_json);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, source + " vocabulary: " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Schema, source + " vocabulary: expected a JSON object");
    std::unordered_map<std::string, TokenId> map;
    map.reserve(j.size());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number_unsigned()) {
            fail(ErrorKind::Schema, source + " vocabulary: id for '" + it.key() + "' is not a non-negative integer");
        }
        map.emplace(it.key(), it.value().get<TokenId>());
    }

    std::vector<std::pair<std::string, std::string>> merges;
    std::size_t lineno = 0, pos = 0;
    while (pos < merges_text.size()) {
        std::size_t nl = merges_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = merges_text.size();
        std::string line(merges_text.substr(pos, nl - pos));
        pos = nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("#version", 0) == 0) continue;
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() ||
            line.find(' ', sp + 1) != std::string::npos) {
            fail(ErrorKind::Parse, source + " merges:" + std::to_string(lineno) + ": expected 'symbolA symbolB'");
        }
        merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return from_parts(std::move(map), std::move(merges));
}

BpeVocab BpeVocab::load(const std::filesystem::path& vocab_json,
                        const std::filesystem::path& merges_txt) {
    auto slurp = [](const std::filesystem::path& p, const char* what) {
        std::ifstream in(p, std::ios::binary);
        if (!in) fail(ErrorKind::Io, std::string("cannot open ") + what + " file " + p.string());
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    return parse(slurp(vocab_json, "vocabulary"), slurp(merges_txt, "merges"), vocab_json.string());
}

std::string BpeVocab::vocab_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (TokenId id = 0; id < id_to_token_.size(); ++id) j[id_to_token_[id]] = id;
    return j.dump();
}

std::string BpeVocab::merges_text() const {
    std::string out = "#version: 0.2\n";
    for (const auto& [a, b] : merges_) out += a + " " + b + "\n";
    return out;
}

void BpeVocab::save(const std::filesystem::path& vocab_json_path,
                    const std::filesystem::path& merges_txt) const {
    std::ofstream vout(vocab_json_path, std::ios::binary);
    if (!vout) fail(ErrorKind::Io, "cannot write " + vocab_json_path.string());
    vout << vocab_json() << "\n";
    std::ofstream mout(merges_txt, std::ios::binary);
    if (!mout) fail(ErrorKind::Io, "cannot write " + merges_txt.string());
    mout << merges_text();
}

const std::string& BpeVocab::token(TokenId id) const {
    if (id >= id_to_token_.size()) {
        fail(ErrorKind::Vocabulary, "token id " + std::to_string(id) + " outside vocabulary of " +
                                        std::to_string(id_to_token_.size()));
    }
    return id_to_token_[id];
}

TokenId BpeVocab::id_of(std::string_view tok) const {
    auto it = token_to_id_.find(std::string(tok));
    if (it == token_to_id_.end()) {
        fail(ErrorKind::Vocabulary, "token '" + std::string(tok) + "' not in vocabulary");
    }
    return it->second;
}

bool BpeVocab::contains(std::string_view tok) const {
    return token_to_id_.contains(std::string(tok));
}

bool BpeVocab::is_special(TokenId id) const {
    return id == specials_.start || id == specials_.end || id == specials_.pad;
}

void BpeVocab::encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
    std::vector<TokenId> word;
    word.reserve(chunk.size());
    for (char c : chunk) word.push_back(byte_ids_[static_cast<unsigned char>(c)]);

    // Merge the lowest-ranked adjacent pair, all occurrences left to right,
    // until no adjacent pair has a rule.
    while (word.size() > 1) {
        std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
        TokenId best_left = 0, best_right = 0, merged = 0;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            auto it = merge_index_.find(pair_key(word[i], word[i + 1]));
            if (it != merge_index_.end() && it->second.first < best_rank) {
                best_rank = it->second.first;
                best_left = word[i];
                best_right = word[i + 1];
                merged = it->second.second;
            }
        }
        if (best_rank == std::numeric_limits<std::uint32_t>::max()) break;
        std::vector<TokenId> next;
        next.reserve(word.size());
        for (std::size_t i = 0; i < word.size();) {
            if (i + 1 < word.size() && word[i] == best_left && word[i + 1] == best_right) {
                next.push_back(merged);
                i += 2;
            } else {
                next.push_back(word[i]);
                ++i;
            }
        }
        word.swap(next);
    }
    out.insert(out.end(), word.begin(), word.end());
}

std::vector<TokenId> BpeVocab::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (std::string_view chunk : pretokenize(text)) encode_chunk(chunk, ids);
    return ids;
}

std::string BpeVocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        const std::string& tok = token(id);
        if (is_special(id)) continue;
        for (const Codepoint& cp : decode_utf8(tok)) {
            auto it = unit_to_byte_.find(cp.value);
            if (it == unit_to_byte_.end()) {
                fail(ErrorKind::Vocabulary, "token " + std::to_string(id) + " ('" + tok +
                                                "') contains a non-unit character");
            }
            out += static_cast<char>(it->second);
        }
    }
    return out;
}

BpeVocab train_merges(std::span<const std::string> corpus, std::size_t target_vocab_size) {
    if (corpus.empty()) fail(ErrorKind::Input, "train_merges: empty corpus");
    if (target_vocab_size < 256 + 3) {
        fail(ErrorKind::Contract, "train_merges: target_vocab_size " +
                                      std::to_string(target_vocab_size) + " < 259");
    }

    // Symbols are raw byte strings while training; words are weighted by count.
    std::map<std::string, std::size_t> chunk_counts;
    for (const std::string& text : corpus) {
        for (std::string_view chunk : pretokenize(text)) ++chunk_counts[std::string(chunk)];
    }
    std::vector<std::vector<std::string>> words;
    std::vector<std::size_t> weights;
    for (const auto& [chunk, count] : chunk_counts) {
        std::vector<std::string> symbols;
        for (char c : chunk) symbols.emplace_back(1, c);
        words.push_back(std::move(symbols));
        weights.push_back(count);
    }

    auto to_units = [](const std::string& bytes) {
        std::string units;
        for (char c : bytes) units += byte_encoder()[static_cast<unsigned char>(c)];
        return units;
    };

    std::vector<std::pair<std::string, std::string>> merges;
    const std::size_t n_merges = target_vocab_size - 256;
    while (merges.size() < n_merges) {
        std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
        for (std::size_t w = 0; w < words.size(); ++w) {
            const auto& sym = words[w];
            for (std::size_t i = 0; i + 1 < sym.size(); ++i) pair_counts[{sym[i], sym[i + 1]}] += weights[w];
        }
        if (pair_counts.empty()) break;
        // std::map iterates in lexicographic order, so the first maximum wins ties.
        auto best = pair_counts.begin();
        for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        const auto [left, right] = best->first;
        const std::string joined = left + right;
        for (auto& sym : words) {
            std::vector<std::string> next;
            next.reserve(sym.size());
            for (std::size_t i = 0; i < sym.size();) {
                if (i + 1 < sym.size() && sym[i] == left && sym[i + 1] == right) {
                    next.push_back(joined);
                    i += 2;
                } else {
                    next.push_back(sym[i]);
                    ++i;
                }
            }
            sym.swap(next);
        }
        merges.emplace_back(to_units(left), to_units(right));
    }
    return BpeVocab::from_merges(merges);
}

}  // namespace ooc::bpe
