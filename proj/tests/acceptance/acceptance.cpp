// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//   ooc_acceptance [--only SUBSTRING]...

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ooc/bpe.hpp"
#include "ooc/context.hpp"
#include "ooc/graph.hpp"
#include "ooc/metrics.hpp"
#include "ooc/model.hpp"
#include "ooc/ops.hpp"
#include "ooc/synth.hpp"
#include "ooc/trainer.hpp"
#include "../support/gradcheck.hpp"
#include "../support/metric_oracles.hpp"
#include "../support/random_text.hpp"
#include "../support/tiny_model.hpp"

using namespace ooc;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = OOC_SOURCE_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

// --- gradients ------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr double kTol = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    std::size_t checks = 0;
    bool dead = false;
    auto record = [&](const std::string& name, const testing::GradCheck& g) {
        ++checks;
        if (g.rel_error > worst) {
            worst = g.rel_error;
            worst_name = name;
        }
        if (!(g.analytic_norm > 0.0)) {
            dead = true;
            worst_name = name + " (zero gradient)";
        }
    };

    std::mt19937_64 rng(5);
    Tensor a = testing::random_param({3, 4}, rng);
    Tensor b = testing::random_param({3, 4}, rng);
    Tensor c = testing::random_param({4, 2}, rng);
    Tensor d = testing::random_param({5, 4}, rng);
    Tensor pos = testing::random_param({3, 4}, rng, 0.2, 2.0);
    Tensor bias = testing::random_param({4}, rng);
    Tensor gamma = testing::random_param({4}, rng, 0.5, 1.5);
    Tensor beta = testing::random_param({4}, rng);
    Tensor table = testing::random_param({5, 4}, rng);
    const std::vector<std::size_t> ids{4, 0, 4, 2};
    const std::vector<std::size_t> dst{1, 0, 1};
    const std::vector<bool> mask{true, false, false, false, false, true, false, false, false, false, true, false};
    using testing::probe;
    const std::vector<std::tuple<const char*, std::function<Tensor()>, std::vector<Tensor>>> ops{
        {"add", [&] { return probe(add(a, b)); }, {a, b}},
        {"sub", [&] { return probe(sub(a, b)); }, {a, b}},
        {"mul", [&] { return probe(mul(a, b)); }, {a, b}},
        {"scale", [&] { return probe(scale(a, -1.7)); }, {a}},
        {"add_scalar", [&] { return probe(add_scalar(a, 0.3)); }, {a}},
        {"add_row", [&] { return probe(add_row(a, bias)); }, {a, bias}},
        {"matmul", [&] { return probe(matmul(a, c)); }, {a, c}},
        {"matmul_nt", [&] { return probe(matmul_nt(a, d)); }, {a, d}},
        {"transpose", [&] { return probe(transpose(a)); }, {a}},
        {"reshape", [&] { return probe(reshape(a, {2, 6})); }, {a}},
        {"concat0", [&] { return probe(concat({a, d}, 0)); }, {a, d}},
        {"concat1", [&] { return probe(concat({a, b}, 1)); }, {a, b}},
        {"slice_rows", [&] { return probe(slice_rows(a, 1, 2)); }, {a}},
        {"slice_cols", [&] { return probe(slice_cols(a, 1, 2)); }, {a}},
        {"gather_rows", [&] { return probe(gather_rows(table, ids)); }, {table}},
        {"scatter_add_rows", [&] { return probe(scatter_add_rows(a, dst, 2)); }, {a}},
        {"pick", [&] { return probe(pick(a, std::vector<std::size_t>{3, 0, 2})); }, {a}},
        {"softmax0", [&] { return probe(softmax(a, 0)); }, {a}},
        {"softmax1", [&] { return probe(softmax(a, 1)); }, {a}},
        {"log_softmax", [&] { return probe(log_softmax(a)); }, {a}},
        {"layer_norm", [&] { return probe(layer_norm(a)); }, {a}},
        {"layer_norm_affine", [&] { return probe(layer_norm(a, gamma, beta)); }, {a, gamma, beta}},
        {"relu", [&] { return probe(relu(a)); }, {a}},
        {"gelu", [&] { return probe(gelu(a)); }, {a}},
        {"exp", [&] { return probe(exp(a)); }, {a}},
        {"log", [&] { return probe(log(pos)); }, {pos}},
        {"pow_scalar", [&] { return probe(pow_scalar(pos, 2.5)); }, {pos}},
        {"masked_fill", [&] { return probe(masked_fill(a, mask, -3.0)); }, {a}},
        {"sum", [&] { return sum(mul(a, b)); }, {a, b}},
        {"mean", [&] { return mean(mul(a, a)); }, {a}},
    };
    for (const auto& [name, fn, params] : ops)
        for (const auto& p : params) record(name, testing::check_gradient(fn, p));

    // Losses with respect to the logits.
    Tensor logits = testing::random_param({6, 9}, rng, -2, 2);
    const std::vector<bpe::TokenId> labels{1, 8, 0, 3, 3, 5};
    std::vector<double> weights(9);
    for (std::size_t i = 0; i < 9; ++i) weights[i] = 0.5 + 0.1 * static_cast<double>(i);
    for (const auto& [name, spec] : std::vector<std::pair<std::string, train::LossSpec>>{
             {"loss:ce", {}}, {"loss:weighted-ce", {train::LossKind::WeightedCE}}, {"loss:focal", {train::LossKind::Focal, 2.0}}}) {
        record(name, testing::check_gradient(
                         [&] { return train::loss(logits, labels, spec, &weights, bpe::TokenId{5}); }, logits));
    }

    // Relational graph parameters.
    {
        graph::GraphConfig cfg{2, 2, 4, 3};
        nn::Rng prng(6);
        const auto params = graph::GraphParams::init(cfg, prng);
        const Tensor x = Tensor::from({4, 3}, testing::random_values(12, rng));
        const std::vector<bool> m(4, true);
        auto loss = [&] {
            const auto out = graph::run_graph(x, m, cfg, params);
            return add(probe(out.enhanced_nodes, 1), probe(out.edge_features, 2));
        };
        nn::ParamList list;
        params.collect(list);
        for (const auto& p : list) record("graph:" + p.name, testing::check_gradient(loss, p.tensor));
    }

    // End-to-end, every parameter group, both normalisation placements.
    for (bool pre_norm : {true, false}) {
        auto cfg = testing::tiny_config();
        cfg.pre_norm = pre_norm;
        const auto p = model::ModelParams::init(cfg, 31);
        const auto rec = testing::tiny_record(32, 3, cfg);
        const auto text = testing::tiny_text(cfg);
        const auto target = testing::random_ids(6, cfg, rng);
        auto loss = [&] {
            const auto mem = model::encode(model::build_encoder_input(rec, text, cfg, p, {}), p, cfg);
            return testing::teacher_forced_ce(target, mem, p, cfg);
        };
        const auto groups = testing::check_param_groups(loss, p.named(), 4, rng);
        if (groups.size() != model::param_groups(cfg).size()) dead = true;
        for (const auto& [g, r] : groups) record(std::string(pre_norm ? "pre:" : "post:") + g, r);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst < kTol && !dead && secs < 120.0;
    o.detail = fmt("%zu checks, max rel err %.2e (%s), %.1f s", checks, worst, worst_name.c_str(), secs);
    return o;
}

// --- tokenizer ------------------------------------------------------------------------

const bpe::BpeVocab& gpt2() {
    static const bpe::BpeVocab v =
        bpe::BpeVocab::load(kRoot / "data" / "gpt2" / "vocab.json", kRoot / "data" / "gpt2" / "merges.txt");
    return v;
}

std::vector<std::string> fixture_corpus() {
    std::vector<std::string> out;
    for (const auto& r : context::parse_ner_file(kRoot / "fixtures" / "ner.jsonl")) {
        if (r.caption) out.push_back(*r.caption);
        for (const auto& [label, toks] : r.entities.entries) {
            out.push_back(label);
            for (const auto& t : toks) out.push_back(t);
        }
    }
    for (const auto& item : metrics::read_eval_jsonl(kRoot / "fixtures" / "eval.jsonl")) {
        out.push_back(item.hyp);
        out.insert(out.end(), item.refs.begin(), item.refs.end());
    }
    const auto synth = synth::make_dataset({});
    for (const auto& s : synth::vocab_corpus(synth)) out.push_back(s);
    return out;
}

Outcome bpe_round_trip() {
    const auto fixture = bpe::BpeVocab::load(kRoot / "fixtures" / "vocab.json", kRoot / "fixtures" / "merges.txt");
    std::mt19937_64 rng(2024);
    std::size_t failures = 0, checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto s = testing::random_utf8(rng);
        failures += fixture.decode(fixture.encode(s)) != s;
        failures += gpt2().decode(gpt2().encode(s)) != s;
        checked += 2;
    }
    const auto corpus = fixture_corpus();
    for (const auto& s : corpus) {
        failures += fixture.decode(fixture.encode(s)) != s;
        failures += gpt2().decode(gpt2().encode(s)) != s;
        checked += 2;
    }
    return {failures == 0, fmt("%zu failures over %zu round trips (10000 random strings, %zu corpus strings, 2 vocabularies)",
                               failures, checked, corpus.size())};
}

Outcome gpt2_parity() {
    std::ifstream in(kRoot / "tests" / "fixtures" / "gpt2_reference.jsonl");
    if (!in) return {false, "reference fixture missing"};
    std::size_t n = 0, exact = 0;
    for (std::string line; std::getline(in, line);) {
        const auto j = nlohmann::json::parse(line);
        exact += gpt2().encode(j.at("text").get<std::string>()) == j.at("ids").get<std::vector<bpe::TokenId>>();
        ++n;
    }
    return {n == 50 && exact == n, fmt("%zu/%zu sentences token-exact", exact, n)};
}

// --- graph ------------------------------------------------------------------------

Outcome graph_properties() {
    std::mt19937_64 rng(11);
    std::size_t perm_bad = 0, skip_bad = 0, mask_bad = 0;
    const std::size_t trials = 50;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t n = 7, d = 6;
        graph::GraphConfig cfg{3, 2, 5, d};
        nn::Rng prng(100 + trial);
        const auto params = graph::GraphParams::init(cfg, prng);
        const std::size_t n_real = 2 + trial % 5;
        auto values = testing::random_values(n * d, rng);
        std::vector<bool> mask(n, false);
        std::fill_n(mask.begin(), n_real, true);
        for (std::size_t i = n_real * d; i < n * d; ++i) values[i] = 0.0;
        const Tensor x = Tensor::from({n, d}, values);
        const auto base = graph::run_graph(x, mask, cfg, params);

        // Permutation equivariance, exact.
        std::vector<std::size_t> perm(n), inverse(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> px(n * d);
        std::vector<bool> pmask(n);
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t c = 0; c < d; ++c) px[p * d + c] = values[perm[p] * d + c];
            pmask[p] = mask[perm[p]];
            inverse[perm[p]] = p;
        }
        const auto moved = graph::run_graph(Tensor::from({n, d}, px), pmask, cfg, params);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t c = 0; c < d; ++c) perm_bad += moved.enhanced_nodes.at(p, c) != base.enhanced_nodes.at(perm[p], c);
        if (moved.edges.size() != base.edges.size()) ++perm_bad;
        for (std::size_t e = 0; e < base.edges.size(); ++e) {
            const graph::Edge relabelled{inverse[base.edges[e].src], inverse[base.edges[e].dst]};
            const auto it = std::find(moved.edges.begin(), moved.edges.end(), relabelled);
            if (it == moved.edges.end()) {
                ++perm_bad;
                continue;
            }
            const auto f = static_cast<std::size_t>(it - moved.edges.begin());
            for (std::size_t c = 0; c < d; ++c) perm_bad += moved.edge_features.at(f, c) != base.edge_features.at(e, c);
        }

        // Masked-row perturbation leaves everything unchanged.
        auto noisy = values;
        for (std::size_t i = n_real * d; i < n * d; ++i) noisy[i] = 10.0 * testing::random_values(1, rng)[0];
        const auto pert = graph::run_graph(Tensor::from({n, d}, noisy), mask, cfg, params);
        mask_bad += !bit_equal(pert.enhanced_nodes.data(), base.enhanced_nodes.data());
        mask_bad += !bit_equal(pert.edge_features.data(), base.edge_features.data());

        // Zeroed MLPs: enhanced nodes are the input bit for bit.
        nn::Rng zrng(7);
        const auto zero = graph::GraphParams::init(cfg, zrng);
        nn::ParamList list;
        zero.collect(list);
        for (auto& p : list) {
            auto v = p.tensor.mutable_data();
            std::fill(v.begin(), v.end(), 0.0);
        }
        const auto skip = graph::run_graph(x, mask, cfg, zero);
        skip_bad += !bit_equal(skip.enhanced_nodes.data(), x.data());
    }
    return {perm_bad == 0 && skip_bad == 0 && mask_bad == 0,
            fmt("%zu trials: permutation mismatches %zu, zero-MLP skip mismatches %zu, masked-row deltas %zu", trials,
                perm_bad, skip_bad, mask_bad)};
}

// --- causality ------------------------------------------------------------------------

Outcome causality() {
    const auto c = testing::tiny_config();
    std::mt19937_64 rng(10);
    std::size_t changed = 0;
    const std::size_t trials = 1000;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const auto p = model::ModelParams::init(c, 1000 + trial);
        const auto rec = testing::tiny_record(5000 + trial, 1 + trial % c.n_obj, c);
        const auto mem = model::encode(model::build_encoder_input(rec, testing::tiny_text(c), c, p, {}), p, c);
        std::uniform_int_distribution<std::size_t> len(2, c.max_decoder_len());
        const std::size_t n = len(rng);
        auto ids = testing::random_ids(n, c, rng);
        std::uniform_int_distribution<std::size_t> cut(0, n - 2);
        const std::size_t t = cut(rng);
        const Tensor a = model::decode_logits(ids, mem, p, c);
        for (std::size_t j = t + 1; j < n; ++j) ids[j] = testing::random_ids(1, c, rng)[0];
        const Tensor b = model::decode_logits(ids, mem, p, c);
        const std::size_t keep = (t + 1) * c.vocab_size;
        changed += !bit_equal(a.data().subspan(0, keep), b.data().subspan(0, keep));
    }
    return {changed == 0, fmt("%zu/%zu trials changed a past-position logit", changed, trials)};
}

// --- overfit, controllability, ablations --------------------------------------------

struct Desk {
    synth::SynthDataset data;
    bpe::BpeVocab vocab;
    model::ModelConfig config;
    std::vector<train::TrainSample> samples;
};

const Desk& desk() {
    static const Desk d = [] {
        Desk k;
        k.data = synth::make_dataset({});  // 4 scenes × 4 places × 2 days, seed 7
        k.vocab = bpe::train_merges(synth::vocab_corpus(k.data), 1000);
        auto& c = k.config;
        c.vocab_size = k.vocab.size();
        c.specials = k.vocab.specials();
        c.d_vis = 64;
        c.graph = {5, 2, 0, 64};
        c.l_text = 16;
        k.samples = train::build_dataset(k.data.features, k.data.ner, k.vocab, c, true);
        return k;
    }();
    return d;
}

struct Overfit {
    train::TrainResult result;
    double secs = 0;
};

const Overfit& overfit() {
    static const Overfit o = [] {
        train::TrainConfig tc;
        tc.epochs = 500;
        tc.batch_size = 8;
        tc.target_loss = 0.01;
        const auto t0 = std::chrono::steady_clock::now();
        Overfit r{train::train(desk().samples, tc, desk().config), 0};
        r.secs = seconds_since(t0);
        return r;
    }();
    return o;
}

std::vector<bpe::TokenId> caption_of(const train::TrainSample& s) { return {s.target.begin() + 1, s.target.end() - 1}; }

Outcome overfit_acceptance() {
    const auto& d = desk();
    const auto& o = overfit();
    std::size_t first_below = 0;
    for (const auto& e : o.result.log) {
        if (e.loss < 0.05) {
            first_below = e.epoch;
            break;
        }
    }
    std::size_t exact = 0;
    metrics::EvalCorpus corpus;
    for (const auto& s : d.samples) {
        const auto pred = train::predict(s, o.result.params, d.config, {});
        exact += pred == caption_of(s);
        corpus.push_back({s.id, d.vocab.decode(pred), {d.vocab.decode(caption_of(s))}});
    }
    const double frac = static_cast<double>(exact) / static_cast<double>(d.samples.size());
    const double bleu = metrics::bleu4(corpus);
    const bool pass = d.samples.size() == 32 && first_below > 0 && first_below <= 500 && frac >= 0.9 && bleu >= 90.0 &&
                      o.secs < 600.0;
    return {pass, fmt("%zu samples, CE < 0.05 at epoch %zu (final %.4f), exact %zu/%zu, BLEU-4 %.2f, %.1f s",
                      d.samples.size(), first_below, o.result.log.back().loss, exact, d.samples.size(), bleu, o.secs)};
}

Outcome controllability() {
    const auto& d = desk();
    const auto& o = overfit();
    const auto& places = synth::SynthSpec{}.places;
    std::size_t trials = 0, ok = 0;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const auto& ner = d.data.ner[i];
        const std::string original = ner.entities.entries.at("GPE").front();
        for (const auto& place : places) {
            if (place == original) continue;
            auto dict = ner.entities;
            dict.entries["GPE"] = {place};
            train::TrainSample s = d.samples[i];
            s.text = context::build_context(dict, d.vocab, d.config.l_text, true);
            const auto words = metrics::normalize(d.vocab.decode(train::predict(s, o.result.params, d.config, {})));
            auto has = [&](const std::string& w) {
                const auto lw = metrics::normalize(w).front();
                return std::find(words.begin(), words.end(), lw) != words.end();
            };
            ++trials;
            ok += has(place) && !has(original);
        }
    }
    const double frac = static_cast<double>(ok) / static_cast<double>(trials);
    return {frac >= 0.9, fmt("%zu/%zu GPE swaps moved the caption's location (%.1f%%)", ok, trials, 100.0 * frac)};
}

Outcome ablation_wiring() {
    // Gradient wiring at step 1 on the tiny model.
    const auto& vocab = testing::tiny_vocab();
    const auto cfg = testing::tiny_config();
    const auto params = model::ModelParams::init(cfg, 77);
    std::vector<train::TrainSample> batch;
    for (std::uint64_t k = 0; k < 3; ++k) {
        train::TrainSample s;
        s.id = "b" + std::to_string(k);
        s.visual = testing::tiny_record(300 + k, 2 + k, cfg);
        s.target = train::caption_target("crowds gather in delhi on friday", vocab, cfg.max_caption_len);
        batch.push_back(std::move(s));
    }
    std::size_t wrong = 0, checked = 0;
    std::string first_wrong;
    for (const auto& name : train::ablation_names()) {
        train::TrainConfig tc;
        tc.ablation = train::ablation_preset(name);
        for (auto& s : batch) s.text = testing::tiny_text(cfg, tc.ablation.use_entity_types);
        const auto norms = train::group_gradient_norms(batch, params, cfg, tc);
        const auto off = model::disabled_groups(tc.ablation);
        for (const auto& g : model::param_groups(cfg)) {
            const bool disabled = std::find(off.begin(), off.end(), g) != off.end();
            const double n = norms.count(g) ? norms.at(g) : -1.0;
            const bool good = disabled ? n == 0.0 : n > 0.0;
            ++checked;
            if (!good) {
                ++wrong;
                if (first_wrong.empty()) first_wrong = name + "/" + g;
            }
        }
    }

    // Short w/o-textual and w/o-visual runs on the desk corpus.
    const auto& d = desk();
    std::vector<std::vector<std::string>> outputs;
    std::vector<double> losses;
    bool completed = true;
    for (const char* name : {"w/o-textual", "w/o-visual"}) {
        train::TrainConfig tc;
        tc.epochs = 6;
        tc.ablation = train::ablation_preset(name);
        try {
            const auto r = train::train(d.samples, tc, d.config);
            losses.push_back(r.log.back().loss);
            std::vector<std::string> caps;
            for (const auto& s : d.samples) caps.push_back(d.vocab.decode(train::predict(s, r.params, d.config, tc.ablation)));
            outputs.push_back(std::move(caps));
        } catch (const std::exception&) {
            completed = false;
        }
    }
    const bool differ = completed && outputs[0] != outputs[1];
    std::size_t diff_count = 0;
    if (completed)
        for (std::size_t i = 0; i < outputs[0].size(); ++i) diff_count += outputs[0][i] != outputs[1][i];
    return {wrong == 0 && completed && differ,
            fmt("%zu/%zu group checks correct%s%s; w/o-textual vs w/o-visual: %s, %zu/%zu captions differ (loss %.3f vs %.3f)",
                checked - wrong, checked, first_wrong.empty() ? "" : ", first wrong ", first_wrong.c_str(),
                completed ? "both completed" : "a run failed", diff_count, completed ? outputs[0].size() : 0,
                losses.size() > 0 ? losses[0] : NAN, losses.size() > 1 ? losses[1] : NAN)};
}

// --- metrics and losses -----------------------------------------------------------------

Outcome metrics_oracle() {
    const auto toy = testing::toy_corpus();
    std::vector<testing::Words> hyps;
    std::vector<std::vector<testing::Words>> refs;
    for (const auto& it : toy) {
        hyps.push_back(metrics::normalize(it.hyp));
        refs.push_back(testing::normalize_each(it.refs));
    }
    const auto brute = testing::brute_cider(hyps, refs);
    const auto got = metrics::cider_items(toy);
    double cider_err = 0, rouge_err = 0;
    for (std::size_t i = 0; i < toy.size(); ++i) {
        cider_err = std::max(cider_err, std::abs(got[i] - brute[i]));
        rouge_err = std::max(rouge_err, std::abs(metrics::rouge_l_item(hyps[i], refs[i]) -
                                                 testing::brute_rouge_l(hyps[i], refs[i], 1.2)));
    }
    // Hand-counted BLEU-4 micro corpus: clipped precisions 10/11, 7/9, 4/7, 2/5, no brevity penalty.
    const metrics::EvalCorpus micro{{"a", "the cat sat on the mat", {"the cat is on the mat"}},
                                    {"b", "a dog runs very fast", {"a dog runs very fast indeed", "the dog is running"}}};
    const double bleu_err =
        std::abs(metrics::bleu4(micro) - 100.0 * std::pow(10.0 / 11 * 7.0 / 9 * 4.0 / 7 * 2.0 / 5, 0.25));
    // METEOR: 6 matches in 2 chunks, and 3 matches in 2 chunks against a longer reference.
    const double meteor_err = std::max(
        std::abs(metrics::meteor({{"p", "on the mat the cat sat", {"the cat sat on the mat"}}}) -
                 100.0 * testing::meteor_formula(6, 2, 6, 6)),
        std::abs(metrics::meteor({{"q", "a big cat barks", {"a big dog barks now"}}}) -
                 100.0 * testing::meteor_formula(3, 2, 4, 5)));

    const auto ident = testing::identity_corpus();
    const double id_bleu = metrics::bleu4(ident), id_rouge = metrics::rouge_l(ident), id_meteor = metrics::meteor(ident);
    double id_cider_err = 0;
    for (double x : metrics::cider_items(ident)) id_cider_err = std::max(id_cider_err, std::abs(x - 10.0));
    const bool pass = cider_err < 1e-9 && rouge_err < 1e-9 && bleu_err < 1e-9 && meteor_err < 1e-9 &&
                      std::abs(id_bleu - 100.0) < 1e-9 && std::abs(id_rouge - 100.0) < 1e-9 && id_cider_err < 1e-9 &&
                      id_meteor > 99.0;
    return {pass, fmt("CIDEr err %.1e, ROUGE-L err %.1e, BLEU-4 hand err %.1e, METEOR formula err %.1e; identity "
                      "BLEU-4 %.6f ROUGE-L %.6f CIDEr/item max dev %.1e METEOR %.3f",
                      cider_err, rouge_err, bleu_err, meteor_err, id_bleu, id_rouge, id_cider_err, id_meteor)};
}

Outcome loss_reductions() {
    std::mt19937_64 rng(77);
    double focal_err = 0, weighted_err = 0;
    const std::size_t trials = 200;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t rows = 1 + t % 12, vocab = 2 + t % 40;
        const Tensor logits = Tensor::from({rows, vocab}, testing::random_values(rows * vocab, rng, -8.0, 8.0));
        std::uniform_int_distribution<bpe::TokenId> lab(0, static_cast<bpe::TokenId>(vocab - 1));
        std::vector<bpe::TokenId> labels(rows);
        for (auto& l : labels) l = lab(rng);
        const std::vector<double> ones(vocab, 1.0);
        const double ce = train::loss(logits, labels, {}).item();
        focal_err = std::max(focal_err, std::abs(train::loss(logits, labels, {train::LossKind::Focal, 0.0}).item() - ce));
        weighted_err = std::max(weighted_err,
                                std::abs(train::loss(logits, labels, {train::LossKind::WeightedCE}, &ones).item() - ce));
    }
    return {focal_err <= 1e-12 && weighted_err <= 1e-12,
            fmt("%zu random logit sets: |Focal(0) - CE| max %.1e, |WeightedCE(1) - CE| max %.1e", trials, focal_err,
                weighted_err)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks, one line per criterion"};
    std::vector<std::string> only;
    app.add_option("--only", only, "Run criteria whose name contains this text");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient-suite", gradient_suite},
        {"bpe-round-trip", bpe_round_trip},
        {"gpt2-parity", gpt2_parity},
        {"graph-properties", graph_properties},
        {"causality", causality},
        {"overfit", overfit_acceptance},
        {"controllability", controllability},
        {"ablation-wiring", ablation_wiring},
        {"metrics-oracle", metrics_oracle},
        {"loss-reductions", loss_reductions},
    };
    int failed = 0, ran = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && std::none_of(only.begin(), only.end(),
                                          [&](const std::string& o) { return name.find(o) != std::string::npos; }))
            continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        ++ran;
        failed += !o.pass;
        std::printf("%s %-18s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
