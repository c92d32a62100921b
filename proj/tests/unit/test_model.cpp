#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ooc/checkpoint.hpp"
#include "ooc/error.hpp"
#include "ooc/model.hpp"
#include "ooc/ops.hpp"
#include "../support/gradcheck.hpp"
#include "../support/tiny_model.hpp"

using namespace ooc;
using namespace ooc::model;
using bpe::TokenId;

namespace {

bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void fill(const Tensor& t, double v) {
    auto d = Tensor(t).mutable_data();
    std::fill(d.begin(), d.end(), v);
}

Memory memory_for(const ModelConfig& c, const ModelParams& p, std::uint64_t seed, std::size_t n_real = 3,
                  const Ablation& a = {}) {
    const auto rec = testing::tiny_record(seed, n_real, c);
    return encode(build_encoder_input(rec, testing::tiny_text(c), c, p, a), p, c);
}

}  // namespace

TEST_CASE("config validation and JSON round trip") {
    auto c = testing::tiny_config();
    CHECK_NOTHROW(c.validate());
    const auto back = ModelConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    c.n_heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = testing::tiny_config();
    c.max_caption_len = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    Ablation a;
    a.use_graph = false;
    CHECK(Ablation::from_json(a.to_json()) == a);
}

TEST_CASE("parameter names are unique and cover every group") {
    const auto c = testing::tiny_config();
    const auto p = ModelParams::init(c, 1);
    const auto named = p.named();
    std::vector<std::string> names;
    for (const auto& n : named) names.push_back(n.name);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    for (const auto& g : param_groups(c)) {
        CHECK(std::any_of(named.begin(), named.end(), [&](const auto& n) { return n.group == g; }));
    }
}

TEST_CASE("encoder input layout and masks") {
    const auto c = testing::tiny_config();
    const auto p = ModelParams::init(c, 2);
    const auto rec = testing::tiny_record(3, 3, c);
    const auto text = testing::tiny_text(c);
    const auto in = build_encoder_input(rec, text, c, p, {});
    CHECK(in.tokens.shape() == Shape{c.sequence_length(), c.d_model});
    CHECK(in.mask.size() == 1 + c.n_obj + c.edge_cap() + c.l_text);
    CHECK(in.mask[0]);
    CHECK(std::count(in.mask.begin() + 1, in.mask.begin() + 1 + c.n_obj, true) == 3);
    // 3 real objects, K=2 → 6 directed edges.
    const auto e0 = in.mask.begin() + 1 + c.n_obj;
    CHECK(std::count(e0, e0 + c.edge_cap(), true) == 6);
    CHECK(static_cast<std::size_t>(std::count(e0 + c.edge_cap(), in.mask.end(), true)) == text.real_tokens());

    Ablation no_vis;
    no_vis.use_visual = false;
    const auto nv = build_encoder_input(rec, text, c, p, no_vis);
    CHECK(std::count(nv.mask.begin(), nv.mask.end(), true) == static_cast<long>(text.real_tokens()));

    Ablation none = no_vis;
    none.use_textual = false;
    const auto empty = build_encoder_input(rec, text, c, p, none);
    CHECK_THROWS_AS(encode(empty, p, c), Error);
}

TEST_CASE("memory holds one row per unmasked position") {
    const auto c = testing::tiny_config();
    const auto p = ModelParams::init(c, 3);
    const auto rec = testing::tiny_record(4, 2, c);
    const auto in = build_encoder_input(rec, testing::tiny_text(c), c, p, {});
    const auto mem = encode(in, p, c);
    CHECK(mem.states.rows() == static_cast<std::size_t>(std::count(in.mask.begin(), in.mask.end(), true)));
    CHECK(mem.states.cols() == c.d_model);
    for (std::size_t p_ : mem.positions) CHECK(in.mask[p_]);
}

TEST_CASE("masked encoder positions never affect unmasked outputs") {
    const auto c = testing::tiny_config();
    const auto p = ModelParams::init(c, 5);
    std::mt19937_64 rng(6);
    const auto rec = testing::tiny_record(7, 2, c);
    const auto in = build_encoder_input(rec, testing::tiny_text(c), c, p, {});
    const auto base = encode(in, p, c);
    auto noisy = std::vector<double>(in.tokens.data().begin(), in.tokens.data().end());
    std::normal_distribution<double> g(0.0, 5.0);
    for (std::size_t r = 0; r < in.mask.size(); ++r) {
        if (in.mask[r]) continue;
        for (std::size_t k = 0; k < c.d_model; ++k) noisy[r * c.d_model + k] = g(rng);
    }
    const auto pert = encode({Tensor::from(in.tokens.shape(), noisy), in.mask}, p, c);
    CHECK(bit_equal(base.states.data(), pert.states.data()));
}

TEST_CASE("zeroed query and key weights give uniform attention") {
    auto c = testing::tiny_config();
    c.n_layers = 1;
    const auto p = ModelParams::init(c, 8);
    const auto& l = p.encoder[0];
    for (const auto& t : {l.attn.q.weight, l.attn.q.bias, l.attn.k.weight, l.attn.k.bias, l.ff2.weight, l.ff2.bias}) {
        fill(t, 0.0);
    }
    std::mt19937_64 rng(9);
    const std::size_t s = c.sequence_length();
    const Tensor tokens = Tensor::from({s, c.d_model}, testing::random_values(s * c.d_model, rng));
    std::vector<bool> mask(s, false);
    for (std::size_t r : {0u, 2u, 5u, 9u}) mask[r] = true;
    const auto mem = encode({tokens, mask}, p, c);

    // Oracle: each head averages the value rows evenly.
    const Tensor x = gather_rows(tokens, mem.positions);
    const Tensor v = l.attn.v(l.ln1(x));
    const Tensor avg = scale(matmul(Tensor::filled({x.rows(), x.rows()}, 1.0), v), 1.0 / x.rows());
    const Tensor expect = p.encoder_norm(add(x, l.attn.o(avg)));
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(mem.states[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("decoder logits are causal") {
    const auto c = testing::tiny_config();
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = ModelParams::init(c, 100 + trial);
        const auto mem = memory_for(c, p, 200 + trial);
        std::uniform_int_distribution<std::size_t> len(2, c.max_decoder_len());
        const std::size_t n = len(rng);
        auto ids = testing::random_ids(n, c, rng);
        std::uniform_int_distribution<std::size_t> cut(0, n - 2);
        const std::size_t t = cut(rng);
        const Tensor a = decode_logits(ids, mem, p, c);
        for (std::size_t j = t + 1; j < n; ++j) ids[j] = testing::random_ids(1, c, rng)[0];
        const Tensor b = decode_logits(ids, mem, p, c);
        const std::size_t keep = (t + 1) * c.vocab_size;
        CHECK(bit_equal(a.data().subspan(0, keep), b.data().subspan(0, keep)));
    }
}

TEST_CASE("decoder distributions are normalised and prefix length is bounded") {
    const auto c = testing::tiny_config();
    const auto p = ModelParams::init(c, 11);
    const auto mem = memory_for(c, p, 12);
    std::mt19937_64 rng(13);
    const auto ids = testing::random_ids(6, c, rng);
    const Tensor probs = softmax(decode_logits(ids, mem, p, c), 1);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < probs.cols(); ++k) s += probs.at(r, k);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto too_long = testing::random_ids(c.max_decoder_len() + 1, c, rng);
    CHECK_THROWS_AS(decode_logits(too_long, mem, p, c), Error);
    CHECK_THROWS_AS(decode_logits(std::vector<TokenId>{}, mem, p, c), Error);
}

TEST_CASE("generation never emits pad or start and beam(1) equals greedy") {
    const auto c = testing::tiny_config();
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = ModelParams::init(c, 300 + trial);
        const auto mem = memory_for(c, p, 400 + trial);
        const auto g = generate(mem, p, c);
        const auto b1 = generate(mem, p, c, {1, 0});
        CHECK(g == b1);
        DecodeOptions beam_opt{3, 0};
        const auto b3 = generate(mem, p, c, beam_opt);
        for (const auto& seq : {g, b3}) {
            CHECK(seq.size() <= c.max_caption_len);
            for (TokenId id : seq) {
                CHECK(id != c.specials.pad);
                CHECK(id != c.specials.start);
                CHECK(id != c.specials.end);
            }
        }
        CHECK(generate(mem, p, c) == g);
    }
    const auto p = ModelParams::init(c, 1);
    CHECK_THROWS_AS(generate(memory_for(c, p, 2), p, c, {1, c.max_caption_len + 1}), Error);
}

TEST_CASE("decode mode strings") {
    CHECK(parse_decode_mode("greedy").beam_width == 1);
    CHECK(parse_decode_mode("beam:4").beam_width == 4);
    CHECK_THROWS_AS(parse_decode_mode("beam:0"), Error);
    CHECK_THROWS_AS(parse_decode_mode("beam"), Error);
    CHECK_THROWS_AS(parse_decode_mode("sample"), Error);
}

TEST_CASE("extra padding and masked object slots leave generation unchanged") {
    auto small = testing::tiny_config();
    small.l_text = 24;
    REQUIRE(testing::tiny_text(small).real_tokens() < small.l_text);
    auto big = small;
    big.l_text = small.l_text + 5;
    big.n_obj = small.n_obj + 3;
    const auto pb = ModelParams::init(big, 21);
    ModelParams ps = pb;
    std::vector<double> rows(pb.text_position.data().begin(),
                             pb.text_position.data().begin() + static_cast<std::ptrdiff_t>(small.l_text * small.d_model));
    ps.text_position = Tensor::parameter({small.l_text, small.d_model}, rows);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto rs = testing::tiny_record(50 + seed, 3, small);
        auto rb = rs;
        rb.object_mask.resize(big.n_obj, false);
        rb.object_feats.resize(big.n_obj * big.d_vis, 0.0);
        rb.boxes.reset();
        const auto ms = encode(build_encoder_input(rs, testing::tiny_text(small), small, ps, {}), ps, small);
        const auto mb = encode(build_encoder_input(rb, testing::tiny_text(big), big, pb, {}), pb, big);
        CHECK(bit_equal(ms.states.data(), mb.states.data()));
        CHECK(generate(ms, ps, small) == generate(mb, pb, big));
    }
}

TEST_CASE("end-to-end gradients match finite differences for every group") {
    for (bool pre_norm : {true, false}) {
        auto c = testing::tiny_config();
        c.pre_norm = pre_norm;
        const auto p = ModelParams::init(c, 31);
        const auto rec = testing::tiny_record(32, 3, c);
        const auto text = testing::tiny_text(c);
        std::mt19937_64 rng(33);
        auto target = testing::random_ids(7, c, rng);
        target.front() = c.specials.start;
        auto loss = [&] {
            const auto mem = encode(build_encoder_input(rec, text, c, p, {}), p, c);
            return testing::teacher_forced_ce(target, mem, p, c);
        };
        const auto groups = testing::check_param_groups(loss, p.named(), 4, rng);
        CHECK(groups.size() == param_groups(c).size());
        for (const auto& [group, r] : groups) {
            INFO(group, " pre_norm=", pre_norm);
            CHECK(r.rel_error < 1e-4);
            CHECK(r.analytic_norm > 0.0);
        }
    }
}

TEST_CASE("tied embeddings drop the output projection") {
    auto c = testing::tiny_config();
    c.tie_embeddings = true;
    const auto p = ModelParams::init(c, 41);
    CHECK_FALSE(p.output_projection.has_value());
    const auto mem = memory_for(c, p, 42);
    std::mt19937_64 rng(43);
    const Tensor logits = decode_logits(testing::random_ids(4, c, rng), mem, p, c);
    CHECK(logits.cols() == c.vocab_size);
}

TEST_CASE("checkpoint round trip") {
    const auto c = testing::tiny_config();
    Ablation a;
    a.use_edge_feats = false;
    const auto p = ModelParams::init(c, 51);
    // Pre-round to f32 so the reloaded model is bit-identical.
    for (const auto& n : p.named()) {
        for (double& v : Tensor(n.tensor).mutable_data()) v = static_cast<double>(static_cast<float>(v));
    }
    const auto path = std::filesystem::temp_directory_path() / "ooc_model_ck.bin";
    save_checkpoint(path, c, a, p, testing::tiny_vocab(), {{"note", "x"}});
    const auto ck = load_checkpoint(path);
    CHECK(ck.config.to_json() == c.to_json());
    CHECK(ck.ablation == a);
    CHECK(ck.extra["note"] == "x");
    CHECK(ck.vocab.encode("delhi on friday") == testing::tiny_vocab().encode("delhi on friday"));
    const auto na = p.named();
    const auto nb = ck.params.named();
    REQUIRE(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].name == nb[i].name);
        CHECK(bit_equal(na[i].tensor.data(), nb[i].tensor.data()));
    }
    CHECK(generate(memory_for(c, p, 52, 3, a), p, c) == generate(memory_for(c, ck.params, 52, 3, a), ck.params, c));

    std::ofstream(path, std::ios::binary) << "OOCX";
    CHECK_THROWS_AS(load_checkpoint(path), Error);
}
