#pragma once
// Caption metrics: BLEU-4, CIDEr, ROUGE-L and METEOR over one shared
// normalizer. Corpus scores are on the 0..100 scale except CIDEr (0..10 per
// item for a perfect match).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ooc::metrics {

// Lowercase ASCII, every ASCII punctuation character becomes its own token,
// whitespace runs separate tokens. Non-ASCII bytes stay inside words.
inline constexpr std::string_view kNormalizerVersion = "ooc-norm-1";
std::vector<std::string> normalize(std::string_view text);

struct EvalItem {
    std::string id;
    std::string hyp;
    std::vector<std::string> refs;
};
using EvalCorpus = std::vector<EvalItem>;

// Non-empty corpus, at least one reference per item; Input error otherwise.
void validate(const EvalCorpus& corpus);

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBetaSq = 1.2;
inline constexpr double kMeteorAlpha = 0.9;
inline constexpr double kMeteorBeta = 3.0;
inline constexpr double kMeteorGamma = 0.5;

double bleu4(const EvalCorpus& corpus);
double cider(const EvalCorpus& corpus);
double rouge_l(const EvalCorpus& corpus);
double meteor(const EvalCorpus& corpus);

// Per-item pieces, on already normalized tokens.
using Tokens = std::vector<std::string>;
double rouge_l_item(const Tokens& hyp, const std::vector<Tokens>& refs);  // 0..1
double meteor_item(const Tokens& hyp, const std::vector<Tokens>& refs);   // 0..1
std::vector<double> cider_items(const EvalCorpus& corpus);               // 0..10 each
double bleu4_item(const Tokens& hyp, const std::vector<Tokens>& refs);   // 0..1

// Porter (1980) suffix stripping; words with non-letters are returned as is.
std::string porter_stem(std::string_view word);

struct ItemScores {
    std::string id;
    double bleu4 = 0, cider = 0, rouge_l = 0, meteor = 0;
};

struct Report {
    double bleu4 = 0, cider = 0, rouge_l = 0, meteor = 0;
    std::vector<ItemScores> items;

    nlohmann::ordered_json to_json() const;  // corpus scores plus the normalizer version
};

Report evaluate(const EvalCorpus& corpus);

// JSON lines of {"id","hyp","refs":[...]}.
EvalCorpus read_eval_jsonl(const std::filesystem::path& path);
void write_eval_jsonl(const std::filesystem::path& path, const EvalCorpus& corpus);
// id,bleu4,cider,rouge_l,meteor
void write_item_csv(const std::filesystem::path& path, const Report& report);

}  // namespace ooc::metrics
