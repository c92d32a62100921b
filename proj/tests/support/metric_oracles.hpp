#pragma once
// Slow, independent reference implementations of the caption metrics, used
// to cross-check the library. They share nothing with it except the
// normalizer output they are fed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ooc/metrics.hpp"

namespace ooc::testing {

using Words = std::vector<std::string>;

// Ten captions with one to three references each; every sentence has at
// least four tokens and its own words, so tf-idf vectors never vanish.
inline metrics::EvalCorpus toy_corpus() {
    return {
        {"t0", "a man rides a red bicycle down the hill",
         {"a man rides a red bike down a hill", "a cyclist descends the hill quickly"}},
        {"t1", "two dogs play in the snow",
         {"two dogs are playing in the snow", "dogs playing outside in winter", "a pair of dogs in snow"}},
        {"t2", "protesters march through Delhi on Friday.", {"Protesters march through the streets of Delhi on Friday."}},
        {"t3", "the prime minister greets supporters at the airport",
         {"the prime minister greeted supporters at an airport", "supporters cheer as the minister arrives"}},
        {"t4", "firefighters battle a blaze near the river", {"firemen fight a fire by the river bank"}},
        {"t5", "flood waters cover the main road in Cairo",
         {"floodwaters covering a main road in Cairo", "the road in Cairo is flooded"}},
        {"t6", "a crowd gathers for a rally", {"a large crowd gathers for a rally in Paris"}},
        {"t7", "police stand guard outside parliament", {"police officers stand guard outside the parliament"}},
        {"t8", "children running on the beach at sunset",
         {"kids run along the beach at sunset", "children run on a sandy beach"}},
        {"t9", "an old train crosses a stone bridge", {"a vintage train crossing an old stone bridge"}},
    };
}

inline metrics::EvalCorpus identity_corpus() {
    auto c = toy_corpus();
    for (auto& item : c) item.refs = {item.hyp};
    return c;
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t brute_lcs(const Words& a, const Words& b) {
    std::size_t best = 0;
    const std::size_t n = a.size();
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        std::size_t len = 0, j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            if (!(mask >> i & 1ul)) continue;
            while (j < b.size() && b[j] != a[i]) ++j;
            if (j == b.size()) ok = false;
            else {
                ++j;
                ++len;
            }
        }
        if (ok) best = std::max(best, len);
    }
    return best;
}

inline double brute_rouge_l(const Words& hyp, const std::vector<Words>& refs, double beta_sq) {
    double best = 0.0;
    for (const auto& r : refs) {
        const double l = static_cast<double>(brute_lcs(hyp, r));
        if (l == 0) continue;
        const double p = l / hyp.size(), rec = l / r.size();
        best = std::max(best, (1 + beta_sq) * p * rec / (rec + beta_sq * p));
    }
    return best;
}

inline std::vector<std::string> gram_list(const Words& w, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
        std::string g;
        for (std::size_t k = 0; k < n; ++k) g += w[i + k] + "\x1f";
        out.push_back(g);
    }
    return out;
}

inline double count_of(const std::vector<std::string>& grams, const std::string& g) {
    return static_cast<double>(std::count(grams.begin(), grams.end(), g));
}

// Dense tf-idf vectors over the full n-gram vocabulary of the corpus.
inline std::vector<double> brute_cider(const std::vector<Words>& hyps, const std::vector<std::vector<Words>>& refs) {
    const std::size_t items = hyps.size();
    std::vector<double> out(items, 0.0);
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<std::string> vocab;
        auto add = [&](const Words& w) {
            for (const auto& g : gram_list(w, n))
                if (std::find(vocab.begin(), vocab.end(), g) == vocab.end()) vocab.push_back(g);
        };
        for (std::size_t i = 0; i < items; ++i) {
            add(hyps[i]);
            for (const auto& r : refs[i]) add(r);
        }
        std::vector<double> idf(vocab.size());
        for (std::size_t v = 0; v < vocab.size(); ++v) {
            double df = 0;
            for (std::size_t i = 0; i < items; ++i) {
                bool any = false;
                for (const auto& r : refs[i]) any = any || count_of(gram_list(r, n), vocab[v]) > 0;
                df += any ? 1 : 0;
            }
            idf[v] = items == 1 ? 1.0 : std::log(static_cast<double>(items) / std::max(1.0, df));
        }
        auto vec = [&](const Words& w) {
            const auto grams = gram_list(w, n);
            std::vector<double> x(vocab.size());
            for (std::size_t v = 0; v < vocab.size(); ++v) x[v] = count_of(grams, vocab[v]) * idf[v];
            return x;
        };
        for (std::size_t i = 0; i < items; ++i) {
            const auto h = vec(hyps[i]);
            double total = 0;
            for (const auto& r : refs[i]) {
                const auto x = vec(r);
                double dot = 0, hh = 0, xx = 0;
                for (std::size_t v = 0; v < vocab.size(); ++v) {
                    dot += h[v] * x[v];
                    hh += h[v] * h[v];
                    xx += x[v] * x[v];
                }
                if (hh > 0 && xx > 0) total += dot / std::sqrt(hh * xx);
            }
            out[i] += 10.0 * total / refs[i].size() / 4.0;
        }
    }
    return out;
}

inline std::vector<Words> normalize_each(const std::vector<std::string>& s) {
    std::vector<Words> out;
    for (const auto& x : s) out.push_back(metrics::normalize(x));
    return out;
}

// METEOR formula from explicit match and chunk counts.
inline double meteor_formula(double matches, double chunks, double hyp_len, double ref_len) {
    if (matches == 0) return 0.0;
    const double p = matches / hyp_len, r = matches / ref_len;
    const double fmean = p * r / (0.9 * p + 0.1 * r);
    return fmean * (1.0 - 0.5 * std::pow(chunks / matches, 3.0));
}

}  // namespace ooc::testing
