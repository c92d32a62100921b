#include "ooc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "ooc/bpe.hpp"
#include "ooc/checkpoint.hpp"
#include "ooc/context.hpp"
#include "ooc/metrics.hpp"
#include "ooc/model.hpp"
#include "ooc/synth.hpp"
#include "ooc/trainer.hpp"
#include "ooc/visual.hpp"

namespace ooc::cli {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return kExitUsage;
        case ErrorKind::Parse:
        case ErrorKind::Schema:
        case ErrorKind::Data:
        case ErrorKind::Input:
        case ErrorKind::Vocabulary:
        case ErrorKind::Io: return kExitData;
        case ErrorKind::Dimension:
        case ErrorKind::Contract:
        case ErrorKind::Training: return kExitRuntime;
    }
    return kExitRuntime;
}

namespace {

struct Streams {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

[[noreturn]] void usage(const std::string& msg) { fail(ErrorKind::Usage, msg); }

// Re-raises configuration range errors as usage errors.
template <class F>
void as_usage(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Contract) usage(e.what());
        throw;
    }
}

void log_resolved(std::ostream& err, const std::string& command, const json& resolved) {
    err << "resolved " << command << " config: " << resolved.dump() << '\n';
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::Schema, where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(ErrorKind::Schema, where + ": unknown key '" + k + "' (known: " + list + ")");
        }
    }
}

std::set<std::string> keys_of(const json& j) {
    std::set<std::string> s;
    for (const auto& [k, v] : j.items()) s.insert(k);
    return s;
}

fs::path absolute_path(const fs::path& p, const fs::path& base) {
    return fs::weakly_canonical(p.is_absolute() ? p : base / p);
}

// --- train ------------------------------------------------------------------------

struct TrainFlags {
    std::optional<std::string> features, ner, vocab, merges, config, ablation, loss;
    std::string out;
    std::optional<double> data_fraction, lr, target_loss, dropout;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, batch_size, d_model, heads, layers, d_ff, l_text, max_caption_len, n_obj,
        graph_k, graph_steps;
    bool quiet = false;
};

struct TrainPlan {
    fs::path features, ner, vocab, merges;
    model::ModelConfig model;
    train::TrainConfig train;
};

// The preset whose flags match, or "custom".
std::string preset_name(const model::Ablation& a) {
    for (const auto& name : train::ablation_names())
        if (train::ablation_preset(name) == a) return name;
    return "custom";
}

TrainPlan resolve_train(const TrainFlags& f) {
    TrainPlan plan;
    json file = json::object();
    fs::path base = fs::current_path();
    if (f.config) {
        const fs::path cfg = *f.config;
        try {
            file = json::parse(slurp(cfg));
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, cfg.string() + ": " + e.what());
        }
        check_keys(file, {"features", "ner", "vocab", "merges", "model", "train"}, cfg.string());
        base = fs::absolute(cfg).parent_path();
    }
    auto path_of = [&](const std::optional<std::string>& flag, const char* key) -> fs::path {
        if (flag) return absolute_path(*flag, fs::current_path());
        if (file.contains(key)) {
            if (!file[key].is_string()) fail(ErrorKind::Schema, std::string("config: '") + key + "' must be a path");
            return absolute_path(file[key].get<std::string>(), base);
        }
        usage(std::string("train: --") + key + " is required (flag or config file)");
    };
    plan.features = path_of(f.features, "features");
    plan.ner = path_of(f.ner, "ner");
    plan.vocab = path_of(f.vocab, "vocab");
    plan.merges = path_of(f.merges, "merges");

    json model_j = file.value("model", json::object());
    check_keys(model_j, keys_of(model::ModelConfig{}.to_json()), "config 'model'");
    json train_j = file.value("train", json::object());
    check_keys(train_j, keys_of(train::TrainConfig{}.to_json()), "config 'train'");
    if (train_j.contains("ablation") && train_j["ablation"].is_string()) {
        try {
            train_j["ablation"] = train::ablation_preset(train_j["ablation"].get<std::string>()).to_json();
        } catch (const Error& e) {
            fail(ErrorKind::Schema, "config 'train': " + std::string(e.what()));
        }
    }
    as_usage([&] {
        plan.model = model::ModelConfig::from_json(model_j);
        plan.train = train::TrainConfig::from_json(train_j);
    });

    auto& m = plan.model;
    if (f.d_model) m.d_model = *f.d_model;
    if (f.heads) m.n_heads = *f.heads;
    if (f.layers) m.n_layers = *f.layers;
    if (f.d_ff) m.d_ff = *f.d_ff;
    if (f.l_text) m.l_text = *f.l_text;
    if (f.max_caption_len) m.max_caption_len = *f.max_caption_len;
    if (f.n_obj) m.n_obj = *f.n_obj;
    if (f.dropout) m.dropout = *f.dropout;
    if (f.graph_k) m.graph.k = *f.graph_k;
    if (f.graph_steps) m.graph.steps = *f.graph_steps;

    auto& t = plan.train;
    if (f.lr) t.lr = *f.lr;
    if (f.epochs) t.epochs = *f.epochs;
    if (f.batch_size) t.batch_size = *f.batch_size;
    if (f.seed) t.seed = *f.seed;
    if (f.data_fraction) t.data_fraction = *f.data_fraction;
    if (f.target_loss) t.target_loss = *f.target_loss;
    if (f.loss) {
        try {
            t.loss = train::parse_loss(*f.loss);
        } catch (const Error& e) {
            usage(e.what());
        }
    }
    if (f.ablation) {
        try {
            t.ablation = train::ablation_preset(*f.ablation);
        } catch (const Error& e) {
            usage(e.what());
        }
    }
    as_usage([&] { t.validate(); });
    return plan;
}

json plan_json(const TrainPlan& p) {
    return {{"features", p.features.string()}, {"ner", p.ner.string()},   {"vocab", p.vocab.string()},
            {"merges", p.merges.string()},     {"model", p.model.to_json()}, {"train", p.train.to_json()}};
}

int cmd_train(const TrainFlags& flags, Streams s) {
    TrainPlan plan = resolve_train(flags);
    const auto vocab = bpe::BpeVocab::load(plan.vocab, plan.merges);
    const auto features = visual::load_features(plan.features, plan.model.n_obj);
    if (features.empty()) fail(ErrorKind::Input, plan.features.string() + " holds no feature records");
    const auto ner = context::parse_ner_file(plan.ner);

    // Derived from the data: feature width, vocabulary size and special ids.
    plan.model.d_vis = features.front().dim();
    plan.model.graph.dim = plan.model.d_vis;
    plan.model.vocab_size = vocab.size();
    plan.model.specials = vocab.specials();
    as_usage([&] { plan.model.validate(); });

    const json resolved = plan_json(plan);
    log_resolved(s.err, "train", resolved);
    const std::string preset = preset_name(plan.train.ablation);
    s.err << "ablation preset: " << preset << '\n';

    const auto dataset =
        train::build_dataset(features, ner, vocab, plan.model, plan.train.ablation.use_entity_types);

    fs::create_directories(flags.out);
    const fs::path out_dir = flags.out;
    {
        std::ofstream snap(out_dir / "config.json");
        if (!snap) fail(ErrorKind::Io, "cannot write " + (out_dir / "config.json").string());
        snap << resolved.dump(2) << '\n';
    }

    const std::size_t total_epochs = plan.train.epochs;
    auto result = train::train(dataset, plan.train, plan.model, std::nullopt, [&](const train::EpochLog& e) {
        if (!flags.quiet) {
            s.err << "epoch " << e.epoch << "/" << total_epochs << " loss " << e.loss << " ("
                  << static_cast<long long>(e.tokens_per_sec) << " tok/s)\n";
        }
    });
    train::write_loss_log(out_dir / "loss.csv", result.log);
    const json extra{{"train", plan.train.to_json()},
                     {"ablation_preset", preset},
                     {"samples", result.samples},
                     {"final_loss", result.log.back().loss}};
    model::save_checkpoint(out_dir / "model.ckpt", plan.model, plan.train.ablation, result.params, vocab, extra);
    s.out << (out_dir / "model.ckpt").string() << '\n';
    return kExitOk;
}

// --- generation ----------------------------------------------------------------

class Session {
public:
    Session(const fs::path& checkpoint, const fs::path& features)
        : ck_(model::load_checkpoint(checkpoint)) {
        for (auto& r : visual::load_features(features, ck_.config.n_obj)) {
            if (r.dim() != ck_.config.d_vis) {
                fail(ErrorKind::Schema, "record '" + r.sample_id + "' has " + std::to_string(r.dim()) +
                                            "-dim features; the checkpoint expects " +
                                            std::to_string(ck_.config.d_vis));
            }
            const std::string id = r.sample_id;
            records_.emplace(id, std::move(r));
        }
    }

    const model::Checkpoint& checkpoint() const { return ck_; }
    bool has(const std::string& id) const { return records_.count(id) > 0; }

    std::string caption(const std::string& id, const context::NerDictionary& dict,
                        const model::DecodeOptions& options) const {
        const auto it = records_.find(id);
        if (it == records_.end()) fail(ErrorKind::Data, "no feature record with id '" + id + "'");
        train::TrainSample sample;
        sample.id = id;
        sample.visual = it->second;
        sample.text = context::build_context(dict, ck_.vocab, ck_.config.l_text, ck_.ablation.use_entity_types);
        const auto ids = train::predict(sample, ck_.params, ck_.config, ck_.ablation, options);
        return ck_.vocab.decode(ids);
    }

private:
    model::Checkpoint ck_;
    std::unordered_map<std::string, visual::VisualRecord> records_;
};

model::DecodeOptions decode_mode(const std::string& mode) {
    try {
        return model::parse_decode_mode(mode);
    } catch (const Error& e) {
        usage(e.what());
    }
}

context::NerDictionary token_spec(const std::string& spec) {
    try {
        return context::parse_token_spec(spec);
    } catch (const Error& e) {
        usage(e.what());
    }
}

int cmd_generate(const std::string& ck, const std::string& features, const std::string& id,
                 const std::string& tokens, const std::string& mode, Streams s) {
    const auto options = decode_mode(mode);
    const auto dict = token_spec(tokens);
    log_resolved(s.err, "generate",
                 {{"checkpoint", ck}, {"features", features}, {"id", id}, {"tokens", tokens}, {"mode", mode}});
    const Session session(ck, features);
    s.out << session.caption(id, dict, options) << '\n';
    return kExitOk;
}

std::string describe(const context::NerDictionary& dict) {
    std::string out;
    for (const auto& [label, toks] : dict.entries) {
        if (!out.empty()) out += ';';
        out += label + '=';
        for (std::size_t i = 0; i < toks.size(); ++i) out += (i ? "," : "") + toks[i];
    }
    return out;
}

int cmd_repl(const std::string& ck, const std::string& features, std::string id, std::string mode, Streams s) {
    auto options = decode_mode(mode);
    log_resolved(s.err, "repl", {{"checkpoint", ck}, {"features", features}, {"id", id}, {"mode", mode}});
    const Session session(ck, features);
    context::NerDictionary dict;
    std::string line;
    while (std::getline(s.in, line)) {
        std::istringstream words(line);
        std::string cmd;
        if (!(words >> cmd) || cmd[0] == '#') continue;
        std::string rest;
        std::getline(words, rest);
        const auto start = rest.find_first_not_of(" \t");
        rest = start == std::string::npos ? "" : rest.substr(start);
        try {
            if (cmd == "quit" || cmd == "exit") break;
            if (cmd == "help") {
                s.out << "id ID | set TYPE a,b | unset TYPE | tokens SPEC | clear | show | mode greedy|beam:K | gen | "
                         "quit\n";
            } else if (cmd == "id") {
                if (!session.has(rest)) fail(ErrorKind::Data, "no feature record with id '" + rest + "'");
                id = rest;
            } else if (cmd == "set") {
                const auto sp = rest.find_first_of(" \t");
                const std::string label = rest.substr(0, sp);
                const std::string value = sp == std::string::npos ? "" : rest.substr(sp + 1);
                if (label.empty()) usage("set needs a TYPE");
                const auto parsed = token_spec(label + "=" + value);
                const auto& toks = parsed.entries.at(label);
                if (toks.empty()) dict.entries.erase(label);
                else dict.entries[label] = toks;
            } else if (cmd == "unset") {
                dict.entries.erase(rest);
            } else if (cmd == "tokens") {
                dict = token_spec(rest);
            } else if (cmd == "clear") {
                dict = {};
            } else if (cmd == "show") {
                s.out << "id=" << id << " mode=" << mode << " tokens=" << describe(dict) << '\n';
            } else if (cmd == "mode") {
                options = decode_mode(rest);
                mode = rest;
            } else if (cmd == "gen") {
                if (id.empty()) usage("no sample selected; use: id ID");
                s.out << session.caption(id, dict, options) << '\n';
            } else {
                usage("unknown command '" + cmd + "' (try: help)");
            }
        } catch (const Error& e) {
            // The loop survives bad commands; the message still goes to stderr.
            s.err << "error: " << e.what() << '\n';
        }
    }
    return kExitOk;
}

// --- evaluation -------------------------------------------------------------------

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!rows.back().is_object() || !rows.back().contains("id") || !rows.back()["id"].is_string()) {
            fail(ErrorKind::Schema, path.string() + " line " + std::to_string(lineno) + ": expected an object with 'id'");
        }
    }
    return rows;
}

// Hypotheses {"id","hyp"}; references {"id","refs":[...]} or NER records with a caption.
metrics::EvalCorpus join_hyp_refs(const fs::path& hyp_path, const fs::path& ref_path) {
    std::unordered_map<std::string, std::vector<std::string>> refs;
    for (const auto& r : read_jsonl(ref_path)) {
        auto& list = refs[r["id"].get<std::string>()];
        if (r.contains("refs") && r["refs"].is_array()) {
            for (const auto& x : r["refs"]) {
                if (!x.is_string()) fail(ErrorKind::Schema, ref_path.string() + ": references must be strings");
                list.push_back(x.get<std::string>());
            }
        } else if (r.contains("caption") && r["caption"].is_string()) {
            list.push_back(r["caption"].get<std::string>());
        } else {
            fail(ErrorKind::Schema, ref_path.string() + ": record '" + r["id"].get<std::string>() +
                                        "' has neither 'refs' nor 'caption'");
        }
    }
    metrics::EvalCorpus corpus;
    std::vector<std::string> missing;
    for (const auto& h : read_jsonl(hyp_path)) {
        if (!h.contains("hyp") || !h["hyp"].is_string()) {
            fail(ErrorKind::Schema, hyp_path.string() + ": record '" + h["id"].get<std::string>() + "' lacks 'hyp'");
        }
        const std::string id = h["id"].get<std::string>();
        const auto it = refs.find(id);
        if (it == refs.end() || it->second.empty()) {
            missing.push_back(id);
            continue;
        }
        corpus.push_back({id, h["hyp"].get<std::string>(), it->second});
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
        fail(ErrorKind::Data, std::to_string(missing.size()) + " hypothesis id(s) have no references: " + list);
    }
    return corpus;
}

struct EvalFlags {
    std::optional<std::string> input, hyp, refs, checkpoint, features, ner, out;
    std::string mode = "greedy";
};

int cmd_evaluate(const EvalFlags& f, Streams s) {
    metrics::EvalCorpus corpus;
    json resolved{{"mode", f.mode}, {"normalizer", std::string(metrics::kNormalizerVersion)}};
    const int sources = (f.input ? 1 : 0) + (f.hyp || f.refs ? 1 : 0) + (f.checkpoint || f.features || f.ner ? 1 : 0);
    if (sources != 1) usage("evaluate: give exactly one of --input, --hyp/--refs, or --checkpoint/--features/--ner");
    if (f.input) {
        resolved["input"] = *f.input;
        log_resolved(s.err, "evaluate", resolved);
        corpus = metrics::read_eval_jsonl(*f.input);
    } else if (f.hyp || f.refs) {
        if (!f.hyp || !f.refs) usage("evaluate: --hyp and --refs go together");
        resolved["hyp"] = *f.hyp;
        resolved["refs"] = *f.refs;
        log_resolved(s.err, "evaluate", resolved);
        corpus = join_hyp_refs(*f.hyp, *f.refs);
    } else {
        if (!f.checkpoint || !f.features || !f.ner) usage("evaluate: --checkpoint, --features and --ner go together");
        const auto options = decode_mode(f.mode);
        resolved["checkpoint"] = *f.checkpoint;
        resolved["features"] = *f.features;
        resolved["ner"] = *f.ner;
        log_resolved(s.err, "evaluate", resolved);
        const Session session(*f.checkpoint, *f.features);
        for (const auto& r : context::parse_ner_file(*f.ner)) {
            if (!r.caption) fail(ErrorKind::Input, "NER record '" + r.id + "' has no reference caption");
            corpus.push_back({r.id, session.caption(r.id, r.entities, options), {*r.caption}});
        }
    }
    const auto report = metrics::evaluate(corpus);
    s.out << report.to_json().dump(2) << '\n';
    if (f.out) {
        const fs::path dir = *f.out;
        fs::create_directories(dir);
        std::ofstream(dir / "report.json") << report.to_json().dump(2) << '\n';
        metrics::write_item_csv(dir / "items.csv", report);
        metrics::write_eval_jsonl(dir / "eval.jsonl", corpus);
    }
    return kExitOk;
}

// --- small commands -------------------------------------------------------------------

int cmd_tokenize(const std::optional<std::string>& vocab_path, const std::optional<std::string>& merges_path,
                 const std::optional<std::string>& ck, const std::optional<std::string>& text, bool decode,
                 bool round_trip, Streams s) {
    if (decode && round_trip) usage("tokenize: --decode and --round-trip are exclusive");
    bpe::BpeVocab vocab;
    if (ck) {
        if (vocab_path || merges_path) usage("tokenize: use either --checkpoint or --vocab/--merges");
        vocab = model::load_checkpoint(*ck).vocab;
    } else {
        if (!vocab_path || !merges_path) usage("tokenize: --vocab and --merges (or --checkpoint) are required");
        vocab = bpe::BpeVocab::load(*vocab_path, *merges_path);
    }
    auto handle = [&](const std::string& line) {
        if (decode) {
            std::vector<bpe::TokenId> ids;
            std::istringstream in(line);
            std::string tok;
            while (in >> tok) {
                try {
                    std::size_t used = 0;
                    const unsigned long v = std::stoul(tok, &used);
                    if (used != tok.size() || v > 0xffffffffUL) throw std::invalid_argument(tok);
                    ids.push_back(static_cast<bpe::TokenId>(v));
                } catch (const std::logic_error&) {
                    fail(ErrorKind::Parse, "'" + tok + "' is not a token id");
                }
            }
            s.out << vocab.decode(ids) << '\n';
            return;
        }
        const auto ids = vocab.encode(line);
        if (round_trip) {
            s.out << vocab.decode(ids) << '\n';
            return;
        }
        for (std::size_t i = 0; i < ids.size(); ++i) s.out << (i ? " " : "") << ids[i];
        s.out << '\n';
    };
    if (text) {
        handle(*text);
    } else {
        std::string line;
        while (std::getline(s.in, line)) handle(line);
    }
    return kExitOk;
}

int cmd_validate_features(const std::string& path, std::size_t n_obj, Streams s) {
    const auto problems = visual::validate_features(path, n_obj);
    if (problems.empty()) {
        const auto records = visual::load_features(path, n_obj);
        s.out << "ok: " << records.size() << " records";
        if (!records.empty()) s.out << ", D=" << records.front().dim();
        s.out << ", N_obj=" << n_obj << '\n';
        return kExitOk;
    }
    for (const auto& p : problems) {
        s.err << "record " << p.record_index;
        if (!p.sample_id.empty()) s.err << " '" << p.sample_id << "'";
        s.err << ": " << p.reason << '\n';
    }
    s.err << problems.size() << " invalid record(s)\n";
    return kExitData;
}

struct FixtureFlags {
    std::string out;
    std::size_t scenes = 2;
    std::vector<std::string> places{"Delhi", "Paris"};
    std::vector<std::string> days{"Friday", "Monday"};
    std::size_t d_vis = 16;
    std::size_t n_obj = visual::kDefaultObjectSlots;
    std::size_t vocab_size = 300;
    std::uint64_t seed = 7;
};

int cmd_make_fixture(const FixtureFlags& f, Streams s) {
    synth::SynthSpec spec;
    spec.scenes = f.scenes;
    spec.places = f.places;
    spec.days = f.days;
    spec.d_vis = f.d_vis;
    spec.n_obj = f.n_obj;
    spec.seed = f.seed;
    if (f.vocab_size < 259) usage("make-fixture: --vocab-size must be at least 259");
    synth::SynthDataset data;
    as_usage([&] { data = synth::make_dataset(spec); });
    const auto vocab = bpe::train_merges(synth::vocab_corpus(data), f.vocab_size);
    const fs::path dir = f.out;
    fs::create_directories(dir);
    visual::write_features_jsonl(dir / "features.jsonl", data.features);
    context::write_ner_file(dir / "ner.jsonl", data.ner);
    vocab.save(dir / "vocab.json", dir / "merges.txt");
    s.out << data.features.size() << " samples, vocabulary " << vocab.size() << " tokens -> " << dir.string() << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    Streams s{in, out, err};
    CLI::App app{"Out-of-context caption generation: train, generate, evaluate", "ooc"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train a captioning model");
    train_cmd->add_option("--features", tf.features, "Feature file (JSON lines or binary)");
    train_cmd->add_option("--ner", tf.ner, "NER file with captions (JSON lines)");
    train_cmd->add_option("--vocab", tf.vocab, "vocab.json");
    train_cmd->add_option("--merges", tf.merges, "merges.txt");
    train_cmd->add_option("--config", tf.config, "JSON config; flags take precedence");
    train_cmd->add_option("--out", tf.out, "Output directory")->required();
    train_cmd->add_option("--ablation", tf.ablation, "full, w/o-visual, w/o-textual, w/o-net, w/o-graph, "
                                                     "w/o-edge-features, w/o-object-features");
    train_cmd->add_option("--data-fraction", tf.data_fraction, "Fraction of samples kept, in (0, 1]");
    train_cmd->add_option("--seed", tf.seed);
    train_cmd->add_option("--epochs", tf.epochs);
    train_cmd->add_option("--lr", tf.lr);
    train_cmd->add_option("--batch-size", tf.batch_size);
    train_cmd->add_option("--loss", tf.loss, "ce, weighted-ce, focal or focal:GAMMA");
    train_cmd->add_option("--target-loss", tf.target_loss, "Stop once the epoch loss falls below this");
    train_cmd->add_option("--d-model", tf.d_model);
    train_cmd->add_option("--heads", tf.heads);
    train_cmd->add_option("--layers", tf.layers);
    train_cmd->add_option("--d-ff", tf.d_ff);
    train_cmd->add_option("--l-text", tf.l_text);
    train_cmd->add_option("--max-caption-len", tf.max_caption_len);
    train_cmd->add_option("--n-obj", tf.n_obj);
    train_cmd->add_option("--dropout", tf.dropout);
    train_cmd->add_option("--graph-k", tf.graph_k);
    train_cmd->add_option("--graph-steps", tf.graph_steps);
    train_cmd->add_flag("--quiet", tf.quiet, "No per-epoch progress");

    std::string g_ck, g_features, g_id, g_tokens, g_mode = "greedy";
    auto* gen_cmd = app.add_subcommand("generate", "Caption one sample");
    gen_cmd->add_option("--checkpoint", g_ck)->required();
    gen_cmd->add_option("--features", g_features)->required();
    gen_cmd->add_option("--id", g_id)->required();
    gen_cmd->add_option("--tokens", g_tokens, "TYPE=a,b;TYPE=c");
    gen_cmd->add_option("--mode", g_mode, "greedy or beam:K");

    EvalFlags ef;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score captions with BLEU-4, CIDEr, ROUGE-L, METEOR");
    eval_cmd->add_option("--input", ef.input, "JSON lines {id, hyp, refs}");
    eval_cmd->add_option("--hyp", ef.hyp, "JSON lines {id, hyp}");
    eval_cmd->add_option("--refs", ef.refs, "JSON lines {id, refs} or NER records with captions");
    eval_cmd->add_option("--checkpoint", ef.checkpoint);
    eval_cmd->add_option("--features", ef.features);
    eval_cmd->add_option("--ner", ef.ner);
    eval_cmd->add_option("--mode", ef.mode, "greedy or beam:K");
    eval_cmd->add_option("--out", ef.out, "Directory for report.json, items.csv, eval.jsonl");

    std::optional<std::string> t_vocab, t_merges, t_ck, t_text;
    bool t_decode = false, t_round = false;
    auto* tok_cmd = app.add_subcommand("tokenize", "Encode text (stdin lines or --text) to token ids");
    tok_cmd->add_option("--vocab", t_vocab);
    tok_cmd->add_option("--merges", t_merges);
    tok_cmd->add_option("--checkpoint", t_ck, "Use the checkpoint's vocabulary");
    tok_cmd->add_option("--text", t_text);
    tok_cmd->add_flag("--decode", t_decode, "Input lines are ids; print text");
    tok_cmd->add_flag("--round-trip", t_round, "Print decode(encode(line))");

    std::string v_features;
    std::size_t v_nobj = visual::kDefaultObjectSlots;
    auto* val_cmd = app.add_subcommand("validate-features", "Check a feature file and list bad records");
    val_cmd->add_option("--features", v_features)->required();
    val_cmd->add_option("--n-obj", v_nobj);

    std::string r_ck, r_features, r_id, r_mode = "greedy";
    auto* repl_cmd = app.add_subcommand("repl", "Interactive what-if captioning over stdin");
    repl_cmd->add_option("--checkpoint", r_ck)->required();
    repl_cmd->add_option("--features", r_features)->required();
    repl_cmd->add_option("--id", r_id);
    repl_cmd->add_option("--mode", r_mode);

    FixtureFlags ff;
    auto* fix_cmd = app.add_subcommand("make-fixture", "Write a synthetic corpus and its vocabulary");
    fix_cmd->add_option("--out", ff.out)->required();
    fix_cmd->add_option("--scenes", ff.scenes);
    fix_cmd->add_option("--places", ff.places)->delimiter(',');
    fix_cmd->add_option("--days", ff.days)->delimiter(',');
    fix_cmd->add_option("--d-vis", ff.d_vis);
    fix_cmd->add_option("--n-obj", ff.n_obj);
    fix_cmd->add_option("--vocab-size", ff.vocab_size);
    fix_cmd->add_option("--seed", ff.seed);

    std::vector<std::string> argv_store{"ooc"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(tf, s);
        if (*gen_cmd) return cmd_generate(g_ck, g_features, g_id, g_tokens, g_mode, s);
        if (*eval_cmd) return cmd_evaluate(ef, s);
        if (*tok_cmd) return cmd_tokenize(t_vocab, t_merges, t_ck, t_text, t_decode, t_round, s);
        if (*val_cmd) return cmd_validate_features(v_features, v_nobj, s);
        if (*repl_cmd) return cmd_repl(r_ck, r_features, r_id, r_mode, s);
        if (*fix_cmd) return cmd_make_fixture(ff, s);
    } catch (const Error& e) {
        err << "error (" << error_kind_name(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace ooc::cli
