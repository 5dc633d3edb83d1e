#include "s5/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <set>

#include "s5/error.hpp"

namespace s5 {

namespace {

constexpr char kMagic[4] = {'S', '5', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct Writer {
    std::FILE* f;
    void bytes(const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f) != n) {
            throw DataError("checkpoint write failed");
        }
    }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    std::FILE* f;
    void bytes(void* p, size_t n) {
        if (std::fread(p, 1, n, f) != n) {
            throw FormatError("checkpoint file truncated");
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
    std::string str() {
        const uint32_t n = u32();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

} // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : params) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw DataError("cannot open checkpoint file for writing: " + path);
    }
    Writer w{f};
    try {
        w.bytes(kMagic, 4);
        w.u32(kVersion);
        w.str(ckpt.meta.mode);
        w.str(ckpt.meta.config_echo);
        w.u32(static_cast<uint32_t>(ckpt.meta.next_epoch));
        w.u64(static_cast<uint64_t>(ckpt.meta.optimizer_steps));
        w.f64(ckpt.meta.lr);
        w.f64(ckpt.meta.plateau_best);
        w.u32(static_cast<uint32_t>(ckpt.meta.plateau_bad_epochs));

        w.u32(static_cast<uint32_t>(ckpt.params.size()));
        std::set<std::string> seen;
        for (const auto& [name, tensor] : ckpt.params) {
            if (!seen.insert(name).second) {
                throw CheckpointError("duplicate parameter name: " + name);
            }
            w.str(name);
            w.u32(static_cast<uint32_t>(tensor.ndim()));
            for (int i = 0; i < tensor.ndim(); ++i) {
                w.u32(static_cast<uint32_t>(tensor.dim(i)));
            }
            const std::vector<double>& v = tensor.values();
            w.bytes(v.data(), v.size() * sizeof(double));
        }

        w.u32(static_cast<uint32_t>(ckpt.moments.size()));
        for (const auto& [name, mom] : ckpt.moments) {
            w.str(name);
            w.u64(mom.m.size());
            w.bytes(mom.m.data(), mom.m.size() * sizeof(double));
            w.bytes(mom.v.data(), mom.v.size() * sizeof(double));
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) {
        throw DataError("cannot open checkpoint file: " + path);
    }
    Reader r{f};
    Checkpoint ckpt;
    try {
        char magic[4];
        r.bytes(magic, 4);
        if (std::memcmp(magic, kMagic, 4) != 0) {
            throw FormatError("not a checkpoint file (bad magic): " + path);
        }
        const uint32_t version = r.u32();
        if (version != kVersion) {
            throw FormatError("checkpoint version mismatch: file has " +
                              std::to_string(version) + ", reader expects " +
                              std::to_string(kVersion));
        }
        ckpt.meta.mode = r.str();
        ckpt.meta.config_echo = r.str();
        ckpt.meta.next_epoch = static_cast<int>(r.u32());
        ckpt.meta.optimizer_steps = static_cast<int64_t>(r.u64());
        ckpt.meta.lr = r.f64();
        ckpt.meta.plateau_best = r.f64();
        ckpt.meta.plateau_bad_epochs = static_cast<int>(r.u32());

        const uint32_t param_count = r.u32();
        for (uint32_t i = 0; i < param_count; ++i) {
            const std::string name = r.str();
            const uint32_t ndim = r.u32();
            std::vector<int> dims(ndim);
            int64_t n = 1;
            for (uint32_t d = 0; d < ndim; ++d) {
                dims[d] = static_cast<int>(r.u32());
                n *= dims[d];
            }
            std::vector<double> values(static_cast<size_t>(n));
            r.bytes(values.data(), values.size() * sizeof(double));
            ckpt.params.emplace_back(name, make_tensor(std::move(dims), std::move(values)));
        }

        const uint32_t mom_count = r.u32();
        for (uint32_t i = 0; i < mom_count; ++i) {
            const std::string name = r.str();
            const uint64_t n = r.u64();
            AdamW::Moments mom;
            mom.m.resize(n);
            mom.v.resize(n);
            r.bytes(mom.m.data(), n * sizeof(double));
            r.bytes(mom.v.data(), n * sizeof(double));
            ckpt.moments.emplace(name, std::move(mom));
        }
        char extra;
        if (std::fread(&extra, 1, 1, f) == 1) {
            throw FormatError("checkpoint file has trailing bytes: " + path);
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return ckpt;
}

void ParamTable::load_from(const Checkpoint& ckpt) const {
    if (ckpt.params.size() != slots_.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                              " parameters, model expects " + std::to_string(slots_.size()));
    }
    for (const auto& [name, slot] : slots_) {
        const Tensor* src = ckpt.find(name);
        if (!src) {
            throw CheckpointError("checkpoint is missing parameter '" + name + "'");
        }
        if (src->dims() != slot->dims()) {
            throw CheckpointError("checkpoint parameter '" + name + "' has mismatched shape");
        }
        *slot = src->detached();
    }
}

std::vector<std::pair<std::string, Tensor>> ParamTable::snapshot() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(slots_.size());
    for (const auto& [name, slot] : slots_) {
        out.emplace_back(name, slot->detached());
    }
    return out;
}

} // namespace s5
