#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "s5/synth.hpp"

using namespace s5;

namespace {

TaskSpec small_spec() {
    TaskSpec spec;
    spec.kind = TaskKind::sparse_token;
    spec.classes = 4;
    spec.frames = 4;
    spec.height = 16;
    spec.width = 16;
    spec.patch = 8; // S = 4, ST = 16
    spec.planted_count = 5;
    spec.noise_std = 0.1;
    spec.train_size = 8;
    spec.val_size = 4;
    spec.test_size = 4;
    return spec;
}

// Reads the pattern class painted at a planted coordinate by matching the
// fixed orthogonal templates (noise_std = 0 makes this exact).
int decode_pattern(const SyntheticVideo& video, const TaskSpec& spec, int t, int s) {
    const int gx = spec.width / spec.patch;
    const int py = s / gx, px = s % gx;
    const std::vector<double>& fv = video.frames.values();
    const int raw = spec.patch * spec.patch * 3;
    const int block = std::max(1, raw / spec.classes);
    for (int cls = 0; cls < spec.classes; ++cls) {
        const int probe = cls * block; // even offset -> template value +1
        const int y = probe / (spec.patch * 3);
        const int x = probe % (spec.patch * 3);
        const size_t idx = ((static_cast<size_t>(t) * spec.height + py * spec.patch + y) *
                                spec.width +
                            px * spec.patch) *
                               3 +
                           static_cast<size_t>(x);
        if (std::fabs(fv[idx] - 1.0) < 1e-9) {
            return cls;
        }
    }
    return -1;
}

} // namespace

TEST_CASE("sparse task: degenerate single planted token fixes the label") {
    TaskSpec spec = small_spec();
    spec.planted_count = 1;
    spec.noise_std = 0.0;
    Rng rng(99, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    for (const SyntheticVideo& v : ds.train) {
        REQUIRE(v.planted.size() == 1);
        const auto [t, s] = v.planted[0];
        CHECK(decode_pattern(v, spec, t, s) == v.label);
    }
}

TEST_CASE("sparse task: label equals the majority planted pattern") {
    TaskSpec spec = small_spec();
    spec.noise_std = 0.0;
    Rng rng(7, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    for (const SyntheticVideo& v : ds.train) {
        std::vector<int> counts(static_cast<size_t>(spec.classes), 0);
        for (const auto& [t, s] : v.planted) {
            const int cls = decode_pattern(v, spec, t, s);
            REQUIRE(cls >= 0);
            counts[static_cast<size_t>(cls)]++;
        }
        const int majority = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        CHECK(majority == v.label);
        // Strict majority, so the label survives any tie-break convention.
        for (int c = 0; c < spec.classes; ++c) {
            if (c != v.label) {
                CHECK(counts[static_cast<size_t>(c)] < counts[static_cast<size_t>(v.label)]);
            }
        }
    }
}

TEST_CASE("sparse task: identical seeds give bit-identical datasets") {
    TaskSpec spec = small_spec();
    Rng r1(1234, 0);
    Rng r2(1234, 0);
    Dataset a = gen_sparse_token_task(spec, r1);
    Dataset b = gen_sparse_token_task(spec, r2);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].label == b.train[i].label);
        CHECK(a.train[i].planted == b.train[i].planted);
        CHECK(a.train[i].frames.values() == b.train[i].frames.values());
    }
}

TEST_CASE("sparse task: class histogram uniform within 3 points over 1e4 samples") {
    TaskSpec spec = small_spec();
    spec.train_size = 10000;
    spec.val_size = 1;
    spec.test_size = 1;
    spec.height = 8;
    spec.width = 8;
    spec.frames = 2;
    spec.planted_count = 3; // S=1 -> ST=2? keep geometry valid: patch 8 -> S=1
    spec.patch = 8;
    spec.planted_count = 2;
    Rng rng(55, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    std::vector<int> counts(static_cast<size_t>(spec.classes), 0);
    for (const SyntheticVideo& v : ds.train) {
        counts[static_cast<size_t>(v.label)]++;
    }
    for (int c = 0; c < spec.classes; ++c) {
        const double freq = static_cast<double>(counts[static_cast<size_t>(c)]) / 10000.0;
        CHECK(std::fabs(freq - 0.25) < 0.03);
    }
}

TEST_CASE("long-range task: label pairs first and last frame patterns") {
    TaskSpec spec = small_spec();
    spec.kind = TaskKind::long_range;
    spec.noise_std = 0.0;
    Rng rng(31, 0);
    Dataset ds = gen_long_range_task(spec, rng);
    CHECK(ds.spec.planted_count == 2);
    for (const SyntheticVideo& v : ds.train) {
        REQUIRE(v.planted.size() == 2);
        const auto [t0, s0] = v.planted[0];
        const auto [t1, s1] = v.planted[1];
        CHECK(t0 == 0);
        CHECK(t1 == spec.frames - 1);
        const int a = decode_pattern(v, spec, t0, s0);
        const int b = decode_pattern(v, spec, t1, s1);
        REQUIRE(a >= 0);
        REQUIRE(b >= 0);
        CHECK(v.label == (a + b) % spec.classes);
    }
    TaskSpec bad = spec;
    bad.frames = 3;
    Rng rng2(1, 1);
    CHECK_THROWS_AS(gen_long_range_task(bad, rng2), ArgError);
}

TEST_CASE("labels invariant to background-noise resampling at noise_std=0") {
    TaskSpec spec = small_spec();
    spec.noise_std = 0.0;
    Rng r1(42, 0);
    Dataset a = gen_sparse_token_task(spec, r1);
    // Same seed, different noise level: planted structure and labels agree.
    TaskSpec noisy = spec;
    noisy.noise_std = 0.5;
    Rng r2(42, 0);
    Dataset b = gen_sparse_token_task(noisy, r2);
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].label == b.train[i].label);
        CHECK(a.train[i].planted == b.train[i].planted);
    }
}

TEST_CASE("recall oracle: exact counting and the random-selection baseline") {
    TaskSpec spec = small_spec();
    spec.noise_std = 0.0;
    Rng rng(3, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    const SyntheticVideo& v = ds.train[0];
    const int s_extent = spec.patches_per_frame();
    std::vector<int> planted = v.planted_token_indices(s_extent);

    CHECK(informative_recall(v, planted, s_extent) == 1.0);
    CHECK(informative_recall(v, {}, s_extent) == 0.0);
    std::vector<int> half(planted.begin(), planted.begin() + planted.size() / 2);
    CHECK(informative_recall(v, half, s_extent) ==
          doctest::Approx(static_cast<double>(half.size()) / planted.size()));

    // Random keep at ratio (1-eta) recalls (1-eta) of planted in expectation.
    const double eta = 0.5;
    const int st = spec.token_count();
    const int keep = static_cast<int>(std::llround((1 - eta) * st));
    Rng sel_rng(17, 17);
    double total = 0.0;
    const int trials = 20000;
    for (int i = 0; i < trials; ++i) {
        total += informative_recall(v, sel_rng.sample_without_replacement(st, keep),
                                    s_extent);
    }
    CHECK(std::fabs(total / trials - (1 - eta)) < 0.01);
}

TEST_CASE("dataset file: save -> load round-trips bit-exactly") {
    TaskSpec spec = small_spec();
    Rng rng(8, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    const std::string path = "synth_roundtrip.s5ds";
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    CHECK(back.spec.kind == ds.spec.kind);
    CHECK(back.spec.classes == ds.spec.classes);
    CHECK(back.spec.frames == ds.spec.frames);
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.val.size() == ds.val.size());
    REQUIRE(back.test.size() == ds.test.size());
    for (size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].label == ds.train[i].label);
        CHECK(back.train[i].seed == ds.train[i].seed);
        CHECK(back.train[i].planted == ds.train[i].planted);
        CHECK(back.train[i].frames.values() == ds.train[i].frames.values());
    }
    std::filesystem::remove(path);
}

TEST_CASE("dataset file: truncation and version mismatch are format errors") {
    TaskSpec spec = small_spec();
    spec.train_size = 2;
    spec.val_size = 1;
    spec.test_size = 1;
    Rng rng(9, 0);
    Dataset ds = gen_sparse_token_task(spec, rng);
    const std::string path = "synth_bad.s5ds";
    save_dataset(ds, path);

    // Truncate the file: loading must fail without returning a partial set.
    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size / 2);
    CHECK_THROWS_AS(load_dataset(path), FormatError);

    // Rewrite with a bumped version field.
    save_dataset(ds, path);
    {
        std::FILE* f = std::fopen(path.c_str(), "rb+");
        REQUIRE(f);
        std::fseek(f, 4, SEEK_SET);
        uint32_t bad_version = 9;
        std::fwrite(&bad_version, 4, 1, f);
        std::fclose(f);
    }
    try {
        load_dataset(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find('9') != std::string::npos);
        CHECK(msg.find('1') != std::string::npos); // names both versions
    }

    // Wrong magic.
    {
        std::FILE* f = std::fopen(path.c_str(), "rb+");
        REQUIRE(f);
        std::fwrite("XXXX", 4, 1, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_dataset(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("task spec validation rejects bad geometry") {
    TaskSpec spec = small_spec();
    spec.planted_count = 0;
    CHECK_THROWS_AS(spec.validate(), ArgError);
    spec = small_spec();
    spec.patch = 5;
    CHECK_THROWS_AS(spec.validate(), ArgError);
    spec = small_spec();
    spec.planted_count = spec.token_count() + 1;
    CHECK_THROWS_AS(spec.validate(), ArgError);
}
