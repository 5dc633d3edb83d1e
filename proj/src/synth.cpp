#include "s5/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "s5/error.hpp"

namespace s5 {

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "sparse-token") return TaskKind::sparse_token;
    if (s == "long-range") return TaskKind::long_range;
    throw ConfigError("unknown task kind '" + s + "' (expected sparse-token|long-range)");
}

std::string task_kind_to_string(TaskKind k) {
    return k == TaskKind::sparse_token ? "sparse-token" : "long-range";
}

void TaskSpec::validate() const {
    if (classes < 2) throw ArgError("task: classes must be >= 2");
    if (frames < 1 || height < 1 || width < 1) throw ArgError("task: bad geometry");
    if (patch < 1 || height % patch != 0 || width % patch != 0) {
        throw ArgError("task: H and W must be divisible by the patch size");
    }
    if (planted_count < 1) throw ArgError("task: planted_count must be >= 1");
    if (planted_count > token_count()) {
        throw ArgError("task: planted_count exceeds the token count");
    }
    if (noise_std < 0.0) throw ArgError("task: noise_std must be >= 0");
    if (kind == TaskKind::long_range && frames < 4) {
        throw ArgError("task: long-range requires T >= 4");
    }
}

std::vector<int> SyntheticVideo::planted_token_indices(int s_extent) const {
    std::vector<int> out;
    out.reserve(planted.size());
    for (const auto& [t, s] : planted) {
        out.push_back(t * s_extent + s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Fixed orthogonal patch templates: class c occupies its own coordinate block
// with alternating signs, so any linear embed can separate them.
std::vector<double> class_pattern(int cls, int classes, int raw) {
    std::vector<double> p(static_cast<size_t>(raw), 0.0);
    const int block = std::max(1, raw / classes);
    const int begin = cls * block;
    const int end = std::min(raw, begin + block);
    for (int i = begin; i < end; ++i) {
        p[static_cast<size_t>(i)] = (i % 2 == 0) ? 1.0 : -1.0;
    }
    return p;
}

void paint_patch(std::vector<double>& frames, const TaskSpec& spec, int frame_count, int t,
                 int s, const std::vector<double>* pattern, double noise_std, Rng& rng) {
    const int gx = spec.width / spec.patch;
    const int py = s / gx, px = s % gx;
    const int raw_stride = spec.patch * 3;
    (void)frame_count;
    for (int y = 0; y < spec.patch; ++y) {
        const int iy = py * spec.patch + y;
        const size_t base = ((static_cast<size_t>(t) * spec.height + iy) * spec.width +
                             static_cast<size_t>(px) * spec.patch) *
                            3;
        for (int x = 0; x < raw_stride; ++x) {
            double v = noise_std > 0.0 ? noise_std * rng.normal() : 0.0;
            if (pattern) {
                v += (*pattern)[static_cast<size_t>(y * raw_stride + x)];
            }
            frames[base + static_cast<size_t>(x)] = v;
        }
    }
}

SyntheticVideo gen_sparse_sample(const TaskSpec& spec, int frame_count, Rng& rng,
                                 uint64_t sample_seed) {
    const int s_extent = spec.patches_per_frame();
    const int tokens = s_extent * frame_count;
    const int raw = spec.patch * spec.patch * 3;

    SyntheticVideo video;
    video.seed = sample_seed;
    video.label = static_cast<int>(rng.below(static_cast<uint64_t>(spec.classes)));

    std::vector<int> planted_rows =
        rng.sample_without_replacement(tokens, spec.planted_count);
    // Strict majority of the planted tokens carries the label pattern; the
    // rest cycle through the other classes.
    std::vector<int> slots = planted_rows;
    rng.shuffle(slots);
    const int majority = spec.planted_count / 2 + 1;
    std::vector<int> pattern_of(static_cast<size_t>(tokens), -1);
    int other = 0;
    for (size_t i = 0; i < slots.size(); ++i) {
        int cls;
        if (static_cast<int>(i) < majority) {
            cls = video.label;
        } else {
            cls = static_cast<int>((video.label + 1 + other % (spec.classes - 1)) %
                                   spec.classes);
            ++other;
        }
        pattern_of[static_cast<size_t>(slots[i])] = cls;
    }

    std::vector<std::vector<double>> patterns;
    patterns.reserve(static_cast<size_t>(spec.classes));
    for (int c = 0; c < spec.classes; ++c) {
        patterns.push_back(class_pattern(c, spec.classes, raw));
    }

    std::vector<double> frames(static_cast<size_t>(frame_count) * spec.height * spec.width * 3);
    for (int t = 0; t < frame_count; ++t) {
        for (int s = 0; s < s_extent; ++s) {
            const int row = t * s_extent + s;
            const int cls = pattern_of[static_cast<size_t>(row)];
            paint_patch(frames, spec, frame_count, t, s,
                        cls >= 0 ? &patterns[static_cast<size_t>(cls)] : nullptr,
                        spec.noise_std, rng);
        }
    }
    video.frames =
        Tensor::from_data({frame_count, spec.height, spec.width, 3}, std::move(frames));
    video.planted.reserve(planted_rows.size());
    for (int row : planted_rows) {
        video.planted.emplace_back(row / s_extent, row % s_extent);
    }
    return video;
}

SyntheticVideo gen_long_range_sample(const TaskSpec& spec, Rng& rng, uint64_t sample_seed) {
    const int s_extent = spec.patches_per_frame();
    const int raw = spec.patch * spec.patch * 3;

    SyntheticVideo video;
    video.seed = sample_seed;
    const int first_cls = static_cast<int>(rng.below(static_cast<uint64_t>(spec.classes)));
    const int last_cls = static_cast<int>(rng.below(static_cast<uint64_t>(spec.classes)));
    video.label = (first_cls + last_cls) % spec.classes;
    const int first_s = static_cast<int>(rng.below(static_cast<uint64_t>(s_extent)));
    const int last_s = static_cast<int>(rng.below(static_cast<uint64_t>(s_extent)));
    video.planted = {{0, first_s}, {spec.frames - 1, last_s}};

    std::vector<std::vector<double>> patterns;
    for (int c = 0; c < spec.classes; ++c) {
        patterns.push_back(class_pattern(c, spec.classes, raw));
    }
    std::vector<double> frames(static_cast<size_t>(spec.frames) * spec.height * spec.width * 3);
    for (int t = 0; t < spec.frames; ++t) {
        for (int s = 0; s < s_extent; ++s) {
            const std::vector<double>* pat = nullptr;
            if (t == 0 && s == first_s) pat = &patterns[static_cast<size_t>(first_cls)];
            if (t == spec.frames - 1 && s == last_s) pat = &patterns[static_cast<size_t>(last_cls)];
            paint_patch(frames, spec, spec.frames, t, s, pat, spec.noise_std, rng);
        }
    }
    video.frames =
        Tensor::from_data({spec.frames, spec.height, spec.width, 3}, std::move(frames));
    return video;
}

std::vector<SyntheticVideo> gen_split(const TaskSpec& spec, Rng& base, const char* tag,
                                      int count) {
    std::vector<SyntheticVideo> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const uint64_t sid = stream_id(tag, static_cast<uint64_t>(i));
        Rng rng = base.split(sid);
        if (spec.kind == TaskKind::sparse_token) {
            out.push_back(gen_sparse_sample(spec, spec.frames, rng, sid));
        } else {
            out.push_back(gen_long_range_sample(spec, rng, sid));
        }
    }
    return out;
}

} // namespace

Dataset gen_sparse_token_task(const TaskSpec& spec, Rng& rng) {
    TaskSpec s = spec;
    s.kind = TaskKind::sparse_token;
    s.validate();
    Dataset ds;
    ds.spec = s;
    ds.train = gen_split(s, rng, "train", s.train_size);
    ds.val = gen_split(s, rng, "val", s.val_size);
    ds.test = gen_split(s, rng, "test", s.test_size);
    return ds;
}

Dataset gen_long_range_task(const TaskSpec& spec, Rng& rng) {
    TaskSpec s = spec;
    s.kind = TaskKind::long_range;
    s.planted_count = 2; // first-frame and last-frame token
    s.validate();
    Dataset ds;
    ds.spec = s;
    ds.train = gen_split(s, rng, "train", s.train_size);
    ds.val = gen_split(s, rng, "val", s.val_size);
    ds.test = gen_split(s, rng, "test", s.test_size);
    return ds;
}

Dataset gen_task(const TaskSpec& spec, Rng& rng) {
    return spec.kind == TaskKind::sparse_token ? gen_sparse_token_task(spec, rng)
                                               : gen_long_range_task(spec, rng);
}

SyntheticVideo gen_sparse_video(const TaskSpec& spec, int frames, uint64_t seed) {
    Rng rng(seed, stream_id("video", seed));
    TaskSpec s = spec;
    s.kind = TaskKind::sparse_token;
    // Planted density scales with the longer frame count.
    s.planted_count = std::max(1, spec.planted_count * frames / spec.frames);
    Rng local = rng;
    SyntheticVideo v = gen_sparse_sample(s, frames, local, seed);
    return v;
}

double informative_recall(const SyntheticVideo& video, const std::vector<int>& selected,
                          int s_extent) {
    if (video.planted.empty()) {
        return 0.0;
    }
    std::vector<int> planted = video.planted_token_indices(s_extent);
    size_t hits = 0;
    for (int idx : planted) {
        if (std::binary_search(selected.begin(), selected.end(), idx)) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(planted.size());
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'S', '5', 'D', 'S'};
constexpr uint32_t kVersion = 1;

struct Writer {
    std::FILE* f;
    void bytes(const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f) != n) {
            throw DataError("dataset write failed");
        }
    }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
};

struct Reader {
    std::FILE* f;
    void bytes(void* p, size_t n) {
        if (std::fread(p, 1, n, f) != n) {
            throw FormatError("dataset file truncated");
        }
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
};

void write_split(Writer& w, const std::vector<SyntheticVideo>& split) {
    w.u32(static_cast<uint32_t>(split.size()));
    for (const SyntheticVideo& v : split) {
        w.u32(static_cast<uint32_t>(v.label));
        w.u64(v.seed);
        w.u32(static_cast<uint32_t>(v.planted.size()));
        for (const auto& [t, s] : v.planted) {
            w.u32(static_cast<uint32_t>(t));
            w.u32(static_cast<uint32_t>(s));
        }
        const std::vector<double>& fv = v.frames.values();
        w.bytes(fv.data(), fv.size() * sizeof(double));
    }
}

std::vector<SyntheticVideo> read_split(Reader& r, const TaskSpec& spec) {
    const uint32_t count = r.u32();
    std::vector<SyntheticVideo> out;
    out.reserve(count);
    const size_t frame_doubles =
        static_cast<size_t>(spec.frames) * spec.height * spec.width * 3;
    for (uint32_t i = 0; i < count; ++i) {
        SyntheticVideo v;
        v.label = static_cast<int>(r.u32());
        v.seed = r.u64();
        const uint32_t planted = r.u32();
        v.planted.reserve(planted);
        for (uint32_t p = 0; p < planted; ++p) {
            const int t = static_cast<int>(r.u32());
            const int s = static_cast<int>(r.u32());
            v.planted.emplace_back(t, s);
        }
        std::vector<double> frames(frame_doubles);
        r.bytes(frames.data(), frame_doubles * sizeof(double));
        v.frames = Tensor::from_data({spec.frames, spec.height, spec.width, 3},
                                     std::move(frames));
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw DataError("cannot open dataset file for writing: " + path);
    }
    Writer w{f};
    try {
        w.bytes(kMagic, 4);
        w.u32(kVersion);
        const TaskSpec& s = dataset.spec;
        w.u32(s.kind == TaskKind::sparse_token ? 0u : 1u);
        w.u32(static_cast<uint32_t>(s.classes));
        w.u32(static_cast<uint32_t>(s.frames));
        w.u32(static_cast<uint32_t>(s.height));
        w.u32(static_cast<uint32_t>(s.width));
        w.u32(static_cast<uint32_t>(s.patch));
        w.u32(static_cast<uint32_t>(s.planted_count));
        w.f64(s.noise_std);
        write_split(w, dataset.train);
        write_split(w, dataset.val);
        write_split(w, dataset.test);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
}

Dataset load_dataset(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) {
        throw DataError("cannot open dataset file: " + path);
    }
    Reader r{f};
    Dataset ds;
    try {
        char magic[4];
        r.bytes(magic, 4);
        if (std::memcmp(magic, kMagic, 4) != 0) {
            throw FormatError("not a dataset file (bad magic): " + path);
        }
        const uint32_t version = r.u32();
        if (version != kVersion) {
            throw FormatError("dataset version mismatch: file has " +
                              std::to_string(version) + ", reader expects " +
                              std::to_string(kVersion));
        }
        TaskSpec& s = ds.spec;
        s.kind = r.u32() == 0 ? TaskKind::sparse_token : TaskKind::long_range;
        s.classes = static_cast<int>(r.u32());
        s.frames = static_cast<int>(r.u32());
        s.height = static_cast<int>(r.u32());
        s.width = static_cast<int>(r.u32());
        s.patch = static_cast<int>(r.u32());
        s.planted_count = static_cast<int>(r.u32());
        s.noise_std = r.f64();
        ds.train = read_split(r, s);
        ds.val = read_split(r, s);
        ds.test = read_split(r, s);
        s.train_size = static_cast<int>(ds.train.size());
        s.val_size = static_cast<int>(ds.val.size());
        s.test_size = static_cast<int>(ds.test.size());
        // The file must end exactly here.
        char extra;
        if (std::fread(&extra, 1, 1, f) == 1) {
            throw FormatError("dataset file has trailing bytes: " + path);
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return ds;
}

} // namespace s5
