#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "ooc/error.hpp"
#include "ooc/visual.hpp"

using namespace ooc;
using namespace ooc::visual;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

ErrorKind load_error(const std::filesystem::path& p, std::string* message = nullptr, std::size_t n_obj = 2) {
    try {
        load_features(p, n_obj);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    FAIL("expected load_features to throw");
    return ErrorKind::Io;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void check_same(const std::vector<VisualRecord>& a, const std::vector<VisualRecord>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sample_id == b[i].sample_id);
        CHECK(a[i].object_mask == b[i].object_mask);
        CHECK(max_abs_diff(a[i].image_feat, b[i].image_feat) <= tol);
        CHECK(max_abs_diff(a[i].object_feats, b[i].object_feats) <= tol);
        REQUIRE(a[i].boxes.has_value() == b[i].boxes.has_value());
        if (a[i].boxes) CHECK(max_abs_diff(*a[i].boxes, *b[i].boxes) <= tol);
    }
}

}  // namespace

TEST_CASE("a record with no objects loads with an all-false mask") {
    const auto p = temp_file("ooc_visual_empty.jsonl");
    write_text(p, R"({"id":"a","image_feat":[0.5,-1.0,2.0],"objects":[]})" "\n");
    const auto recs = load_features(p, 4);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].object_mask == std::vector<bool>(4, false));
    CHECK(recs[0].object_feats == std::vector<double>(12, 0.0));
    CHECK(recs[0].real_objects() == 0);
}

TEST_CASE("objects fill the leading slots") {
    const auto p = temp_file("ooc_visual_two.jsonl");
    write_text(p, R"({"id":"a","image_feat":[1,0],"objects":[{"feat":[0.25,0.5]}]})" "\n");
    const auto recs = load_features(p, 3);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].object_mask == std::vector<bool>{true, false, false});
    CHECK(recs[0].object(0)[1] == 0.5);
    CHECK_FALSE(recs[0].boxes.has_value());
}

TEST_CASE("zero-padding violations are rejected") {
    VisualRecord r;
    r.sample_id = "bad";
    r.image_feat = {1.0, 0.0};
    r.object_feats = {1.0, 0.0, 0.0, 0.3};
    r.object_mask = {true, false};
    CHECK_THROWS_AS(validate_record(r, 2, 2), Error);

    const auto p = temp_file("ooc_visual_pad.bin");
    // The binary writer stores rows verbatim, so the loader sees the violation.
    write_features_binary(p, std::vector<VisualRecord>{r});
    std::string msg;
    CHECK(load_error(p, &msg) == ErrorKind::Schema);
    CHECK(msg.find("bad") != std::string::npos);
    const auto problems = validate_features(p, 2);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].sample_id == "bad");
}

TEST_CASE("dimension mismatch names the sample") {
    const auto p = temp_file("ooc_visual_dim.jsonl");
    write_text(p, R"({"id":"first","image_feat":[1,2,3],"objects":[]})" "\n"
                  R"({"id":"second","image_feat":[1,2],"objects":[]})" "\n");
    std::string msg;
    CHECK(load_error(p, &msg) == ErrorKind::Schema);
    CHECK(msg.find("second") != std::string::npos);

    write_text(p, R"({"id":"obj","image_feat":[1,2],"objects":[{"feat":[1,2,3]}]})" "\n");
    CHECK(load_error(p, &msg) == ErrorKind::Schema);
    CHECK(msg.find("obj") != std::string::npos);
}

TEST_CASE("non-finite values are data errors") {
    VisualRecord r;
    r.sample_id = "nan";
    r.image_feat = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    r.object_feats.assign(4, 0.0);
    r.object_mask = {false, false};
    const auto p = temp_file("ooc_visual_nan.bin");
    write_features_binary(p, std::vector<VisualRecord>{r});
    CHECK(load_error(p) == ErrorKind::Data);

    const auto j = temp_file("ooc_visual_nan.jsonl");
    write_text(j, R"({"id":"nan","image_feat":[null,1],"objects":[]})" "\n");
    CHECK(load_error(j) == ErrorKind::Data);
}

TEST_CASE("too many objects, bad boxes and bad JSON are rejected") {
    const auto p = temp_file("ooc_visual_misc.jsonl");
    write_text(p, R"({"id":"x","image_feat":[1],"objects":[{"feat":[1]},{"feat":[1]},{"feat":[1]}]})" "\n");
    CHECK(load_error(p) == ErrorKind::Schema);
    write_text(p, R"({"id":"x","image_feat":[1],"objects":[{"feat":[1],"box":[0.5,0.5,1.5,0.1]}]})" "\n");
    CHECK(load_error(p) == ErrorKind::Schema);
    write_text(p, "{\"id\":\"x\",\n");
    std::string msg;
    CHECK(load_error(p, &msg) == ErrorKind::Parse);
    CHECK(msg.find("line 1") != std::string::npos);
}

TEST_CASE("validate_features collects every problem") {
    const auto p = temp_file("ooc_visual_collect.jsonl");
    write_text(p, R"({"id":"ok","image_feat":[1,2],"objects":[]})" "\n"
                  "not json\n"
                  R"({"id":"short","image_feat":[1],"objects":[]})" "\n"
                  R"({"id":"ok2","image_feat":[3,4],"objects":[{"feat":[1,1]}]})" "\n");
    const auto problems = validate_features(p, 2);
    REQUIRE(problems.size() == 2);
    CHECK(problems[0].record_index == 1);
    CHECK(problems[1].sample_id == "short");
    CHECK_FALSE(problems[1].reason.empty());
}

TEST_CASE("write then load round trips to 1e-6 in both formats") {
    const auto recs = synth_features(7, 12, 0, 5, 16, 6);
    const auto j = temp_file("ooc_visual_rt.jsonl");
    const auto b = temp_file("ooc_visual_rt.bin");
    write_features_jsonl(j, recs);
    write_features_binary(b, recs);
    check_same(recs, load_features(j, 6), 1e-6);
    check_same(recs, load_features(b, 6), 1e-6);
}

TEST_CASE("synthetic features are deterministic per seed") {
    const auto a = synth_features(42, 5, 1, 4, 8);
    const auto b = synth_features(42, 5, 1, 4, 8);
    check_same(a, b, 0.0);
    const auto c = synth_features(43, 5, 1, 4, 8);
    CHECK(a[0].image_feat != c[0].image_feat);
}

TEST_CASE("synthetic features respect the object range and are unit norm") {
    for (const auto& r : synth_features(3, 20, 0, 0, 8)) {
        CHECK(r.object_mask == std::vector<bool>(kDefaultObjectSlots, false));
    }
    for (const auto& r : synth_features(5, 20, 2, 4, 8)) {
        CHECK(r.real_objects() >= 2);
        CHECK(r.real_objects() <= 4);
        double n = 0.0;
        for (double v : r.image_feat) n += v * v;
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t s = 0; s < r.slots(); ++s) {
            if (!r.object_mask[s]) continue;
            double m = 0.0;
            for (double v : r.object(s)) m += v * v;
            CHECK(std::sqrt(m) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(synth_features(1, 1, 0, 1, 0), Error);
}

TEST_CASE("generated records pass load-side validation") {
    const auto recs = synth_features(11, 30, 0, 10, 32);
    for (const auto& r : recs) CHECK_NOTHROW(validate_record(r, 32, kDefaultObjectSlots));
    const auto p = temp_file("ooc_visual_valid.bin");
    write_features_binary(p, recs);
    CHECK(validate_features(p, kDefaultObjectSlots).empty());
}
