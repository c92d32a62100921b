#include "ooc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "ooc/error.hpp"

namespace ooc::metrics {
namespace {

using Counts = std::map<std::vector<std::string>, double>;

Counts ngrams(const Tokens& t, std::size_t n) {
    Counts c;
    for (std::size_t i = 0; i + n <= t.size(); ++i) c[Tokens(t.begin() + i, t.begin() + i + n)] += 1.0;
    return c;
}

std::vector<Tokens> normalize_all(const std::vector<std::string>& texts) {
    std::vector<Tokens> out;
    out.reserve(texts.size());
    for (const auto& s : texts) out.push_back(normalize(s));
    return out;
}

// Clipped matches and candidate totals for n = 1..4, plus lengths for the
// brevity penalty.
struct BleuStats {
    double match[4] = {0, 0, 0, 0};
    double total[4] = {0, 0, 0, 0};
    double hyp_len = 0, ref_len = 0;

    void add(const Tokens& hyp, const std::vector<Tokens>& refs) {
        for (std::size_t n = 1; n <= 4; ++n) {
            Counts best;
            for (const auto& r : refs)
                for (const auto& [g, c] : ngrams(r, n)) best[g] = std::max(best[g], c);
            for (const auto& [g, c] : ngrams(hyp, n)) {
                const auto it = best.find(g);
                match[n - 1] += std::min(c, it == best.end() ? 0.0 : it->second);
                total[n - 1] += c;
            }
        }
        hyp_len += static_cast<double>(hyp.size());
        // Closest reference length, shorter one on ties.
        std::size_t closest = refs.front().size();
        for (const auto& r : refs) {
            const auto d = [&](std::size_t len) {
                return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
            };
            if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
        }
        ref_len += static_cast<double>(closest);
    }

    double score() const {
        if (hyp_len == 0) return 0.0;
        double log_sum = 0.0;
        for (int n = 0; n < 4; ++n) {
            const double m = match[n] > 0 ? match[n] : kBleuEpsilon;
            log_sum += std::log(m / std::max(total[n], 1.0));
        }
        const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
        return bp * std::exp(log_sum / 4.0);
    }
};

std::size_t lcs(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Greedy alignment: exact matches first, then Porter stems. Each hypothesis
// word continues the previous word's chunk when the next reference word
// fits, otherwise takes the earliest free one. Returns (matches, chunks).
std::pair<std::size_t, std::size_t> align(const Tokens& hyp, const Tokens& ref) {
    std::vector<long> to_ref(hyp.size(), -1);
    std::vector<bool> used(ref.size(), false);
    auto stage = [&](auto&& key) {
        for (std::size_t i = 0; i < hyp.size(); ++i) {
            if (to_ref[i] >= 0) continue;
            const auto k = key(hyp[i]);
            auto fits = [&](std::size_t j) { return !used[j] && key(ref[j]) == k; };
            long pick = -1;
            if (i > 0 && to_ref[i - 1] >= 0) {
                const auto next = static_cast<std::size_t>(to_ref[i - 1] + 1);
                if (next < ref.size() && fits(next)) pick = static_cast<long>(next);
            }
            for (std::size_t j = 0; pick < 0 && j < ref.size(); ++j)
                if (fits(j)) pick = static_cast<long>(j);
            if (pick >= 0) {
                used[static_cast<std::size_t>(pick)] = true;
                to_ref[i] = pick;
            }
        }
    };
    stage([](const std::string& w) { return w; });
    stage([](const std::string& w) { return porter_stem(w); });

    std::size_t matches = 0, chunks = 0;
    long prev = -2;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (to_ref[i] < 0) {
            prev = -2;
            continue;
        }
        ++matches;
        if (to_ref[i] != prev + 1) ++chunks;
        prev = to_ref[i];
    }
    return {matches, chunks};
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return out;
}

void validate(const EvalCorpus& corpus) {
    if (corpus.empty()) fail(ErrorKind::Input, "evaluation corpus is empty");
    for (const auto& item : corpus)
        if (item.refs.empty()) fail(ErrorKind::Input, "item '" + item.id + "' has no references");
}

double bleu4_item(const Tokens& hyp, const std::vector<Tokens>& refs) {
    BleuStats s;
    s.add(hyp, refs);
    return s.score();
}

double bleu4(const EvalCorpus& corpus) {
    validate(corpus);
    BleuStats s;
    for (const auto& item : corpus) s.add(normalize(item.hyp), normalize_all(item.refs));
    return 100.0 * s.score();
}

std::vector<double> cider_items(const EvalCorpus& corpus) {
    validate(corpus);
    const std::size_t n_items = corpus.size();
    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
    for (const auto& item : corpus) {
        hyps.push_back(normalize(item.hyp));
        refs.push_back(normalize_all(item.refs));
    }
    std::vector<double> score(n_items, 0.0);
    for (std::size_t n = 1; n <= 4; ++n) {
        // Document frequency: items whose references contain the n-gram.
        std::map<Tokens, double> df;
        std::vector<std::vector<Counts>> ref_counts(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            std::set<Tokens> seen;
            for (const auto& r : refs[i]) {
                ref_counts[i].push_back(ngrams(r, n));
                for (const auto& [g, c] : ref_counts[i].back()) seen.insert(g);
            }
            for (const auto& g : seen) df[g] += 1.0;
        }
        const double log_n = std::log(static_cast<double>(n_items));
        auto idf = [&](const Tokens& g) {
            // A lone item has no document set to contrast against.
            if (n_items == 1) return 1.0;
            const auto it = df.find(g);
            return log_n - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
        };
        auto weigh = [&](const Counts& c) {
            Counts v;
            for (const auto& [g, tf] : c) v[g] = tf * idf(g);
            return v;
        };
        auto norm = [](const Counts& v) {
            double s = 0.0;
            for (const auto& [g, x] : v) s += x * x;
            return std::sqrt(s);
        };
        for (std::size_t i = 0; i < n_items; ++i) {
            const Counts h = weigh(ngrams(hyps[i], n));
            const double hn = norm(h);
            double sum = 0.0;
            for (const auto& rc : ref_counts[i]) {
                const Counts r = weigh(rc);
                const double rn = norm(r);
                if (hn == 0.0 || rn == 0.0) continue;
                double dot = 0.0;
                for (const auto& [g, x] : h) {
                    const auto it = r.find(g);
                    if (it != r.end()) dot += x * it->second;
                }
                sum += dot / (hn * rn);
            }
            score[i] += sum / static_cast<double>(refs[i].size());
        }
    }
    for (double& s : score) s = s / 4.0 * 10.0;
    return score;
}

double cider(const EvalCorpus& corpus) {
    const auto s = cider_items(corpus);
    double total = 0.0;
    for (double x : s) total += x;
    return total / static_cast<double>(s.size());
}

double rouge_l_item(const Tokens& hyp, const std::vector<Tokens>& refs) {
    double best = 0.0;
    for (const auto& r : refs) {
        const auto l = static_cast<double>(lcs(hyp, r));
        if (l == 0.0) continue;
        const double p = l / static_cast<double>(hyp.size());
        const double rec = l / static_cast<double>(r.size());
        best = std::max(best, (1.0 + kRougeBetaSq) * p * rec / (rec + kRougeBetaSq * p));
    }
    return best;
}

double rouge_l(const EvalCorpus& corpus) {
    validate(corpus);
    double total = 0.0;
    for (const auto& item : corpus) total += rouge_l_item(normalize(item.hyp), normalize_all(item.refs));
    return 100.0 * total / static_cast<double>(corpus.size());
}

double meteor_item(const Tokens& hyp, const std::vector<Tokens>& refs) {
    double best = 0.0;
    for (const auto& r : refs) {
        const auto [m, chunks] = align(hyp, r);
        if (m == 0) continue;
        const double md = static_cast<double>(m);
        const double p = md / static_cast<double>(hyp.size());
        const double rec = md / static_cast<double>(r.size());
        const double fmean = p * rec / (kMeteorAlpha * p + (1.0 - kMeteorAlpha) * rec);
        const double penalty = kMeteorGamma * std::pow(static_cast<double>(chunks) / md, kMeteorBeta);
        best = std::max(best, fmean * (1.0 - penalty));
    }
    return best;
}

double meteor(const EvalCorpus& corpus) {
    validate(corpus);
    double total = 0.0;
    for (const auto& item : corpus) total += meteor_item(normalize(item.hyp), normalize_all(item.refs));
    return 100.0 * total / static_cast<double>(corpus.size());
}

Report evaluate(const EvalCorpus& corpus) {
    validate(corpus);
    Report rep;
    rep.bleu4 = bleu4(corpus);
    rep.cider = cider(corpus);
    rep.rouge_l = rouge_l(corpus);
    rep.meteor = meteor(corpus);
    const auto cid = cider_items(corpus);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto h = normalize(corpus[i].hyp);
        const auto r = normalize_all(corpus[i].refs);
        rep.items.push_back({corpus[i].id, 100.0 * bleu4_item(h, r), cid[i], 100.0 * rouge_l_item(h, r),
                             100.0 * meteor_item(h, r)});
    }
    return rep;
}

nlohmann::ordered_json Report::to_json() const {
    nlohmann::ordered_json j;
    j["bleu4"] = bleu4;
    j["cider"] = cider;
    j["rouge_l"] = rouge_l;
    j["meteor"] = meteor;
    j["items"] = items.size();
    j["normalizer"] = std::string(kNormalizerVersion);
    return j;
}

EvalCorpus read_eval_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    EvalCorpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + " line " + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("hyp") ||
            !j["hyp"].is_string() || !j.contains("refs") || !j["refs"].is_array()) {
            fail(ErrorKind::Schema, where + ": expected {\"id\": str, \"hyp\": str, \"refs\": [str, ...]}");
        }
        EvalItem item{j["id"].get<std::string>(), j["hyp"].get<std::string>(), {}};
        for (const auto& r : j["refs"]) {
            if (!r.is_string()) fail(ErrorKind::Schema, where + ": references must be strings");
            item.refs.push_back(r.get<std::string>());
        }
        if (item.refs.empty()) fail(ErrorKind::Schema, where + ": item '" + item.id + "' has no references");
        corpus.push_back(std::move(item));
    }
    if (corpus.empty()) fail(ErrorKind::Input, path.string() + " holds no items");
    return corpus;
}

void write_eval_jsonl(const std::filesystem::path& path, const EvalCorpus& corpus) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& item : corpus) {
        nlohmann::ordered_json j;
        j["id"] = item.id;
        j["hyp"] = item.hyp;
        j["refs"] = item.refs;
        out << j.dump() << '\n';
    }
}

void write_item_csv(const std::filesystem::path& path, const Report& report) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "id,bleu4,cider,rouge_l,meteor\n";
    out.precision(17);
    for (const auto& it : report.items) {
        std::string id = it.id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char c : id) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            id = q + "\"";
        }
        out << id << ',' << it.bleu4 << ',' << it.cider << ',' << it.rouge_l << ',' << it.meteor << '\n';
    }
}

}  // namespace ooc::metrics
