#include "s5/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "s5/error.hpp"

namespace s5 {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct Field {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                          v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

// Ordered field table; doubles as parser and canonical serializer.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add_u64 = [&t](const std::string& k, uint64_t TrainConfig::*p) {
            t.push_back({k, Field{[k, p](TrainConfig& c, const std::string& v) {
                                      c.*p = parse_u64(k, v);
                                  },
                                  [p](const TrainConfig& c) { return std::to_string(c.*p); }}});
        };
        auto add_int = [&t](const std::string& k, int TrainConfig::*p) {
            t.push_back({k, Field{[k, p](TrainConfig& c, const std::string& v) {
                                      c.*p = static_cast<int>(parse_int(k, v));
                                  },
                                  [p](const TrainConfig& c) { return std::to_string(c.*p); }}});
        };
        auto add_dbl = [&t](const std::string& k, double TrainConfig::*p) {
            t.push_back({k, Field{[k, p](TrainConfig& c, const std::string& v) {
                                      c.*p = parse_double(k, v);
                                  },
                                  [p](const TrainConfig& c) { return fmt_double(c.*p); }}});
        };
        auto add_bool = [&t](const std::string& k, bool TrainConfig::*p) {
            t.push_back({k, Field{[k, p](TrainConfig& c, const std::string& v) {
                                      c.*p = parse_bool(k, v);
                                  },
                                  [p](const TrainConfig& c) {
                                      return c.*p ? std::string("true") : std::string("false");
                                  }}});
        };
        auto add_str = [&t](const std::string& k, std::string TrainConfig::*p) {
            t.push_back({k, Field{[p](TrainConfig& c, const std::string& v) { c.*p = v; },
                                  [p](const TrainConfig& c) { return c.*p; }}});
        };

        add_u64("seed", &TrainConfig::seed);
        add_str("task_kind", &TrainConfig::task_kind);
        add_int("task_classes", &TrainConfig::task_classes);
        add_int("task_frames", &TrainConfig::task_frames);
        add_int("task_height", &TrainConfig::task_height);
        add_int("task_width", &TrainConfig::task_width);
        add_int("task_patch", &TrainConfig::task_patch);
        add_int("task_planted", &TrainConfig::task_planted);
        add_dbl("task_noise_std", &TrainConfig::task_noise_std);
        add_int("task_train", &TrainConfig::task_train);
        add_int("task_val", &TrainConfig::task_val);
        add_int("task_test", &TrainConfig::task_test);
        add_int("d_emb", &TrainConfig::d_emb);
        add_int("state_dim", &TrainConfig::state_dim);
        add_int("blocks", &TrainConfig::blocks);
        add_str("strides", &TrainConfig::strides);
        add_dbl("dropout", &TrainConfig::dropout);
        add_dbl("lr", &TrainConfig::lr);
        add_dbl("weight_decay", &TrainConfig::weight_decay);
        add_int("batch_size", &TrainConfig::batch_size);
        add_int("epochs", &TrainConfig::epochs);
        add_dbl("plateau_factor", &TrainConfig::plateau_factor);
        add_int("plateau_patience", &TrainConfig::plateau_patience);
        add_dbl("eta", &TrainConfig::eta);
        add_dbl("rho_g", &TrainConfig::rho_g);
        add_dbl("m_s4", &TrainConfig::m_s4);
        add_str("selector", &TrainConfig::selector);
        add_bool("deterministic_topk", &TrainConfig::deterministic_topk);
        add_dbl("rho_nce", &TrainConfig::rho_nce);
        add_dbl("m_key", &TrainConfig::m_key);
        add_int("tau_long", &TrainConfig::tau_long);
        add_int("tau_short", &TrainConfig::tau_short);
        add_int("pretrain_epochs", &TrainConfig::pretrain_epochs);
        add_int("pretrain_batch_size", &TrainConfig::pretrain_batch_size);
        add_dbl("pretrain_lr", &TrainConfig::pretrain_lr);
        add_dbl("pretrain_weight_decay", &TrainConfig::pretrain_weight_decay);
        add_dbl("pretrain_warmup_frac", &TrainConfig::pretrain_warmup_frac);
        add_int("pretrain_videos", &TrainConfig::pretrain_videos);
        add_int("proj_hidden", &TrainConfig::proj_hidden);
        add_int("proj_out", &TrainConfig::proj_out);
        add_bool("timing_in_metrics", &TrainConfig::timing_in_metrics);
        return t;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& [k, f] : fields()) {
        if (k == key) return &f;
    }
    return nullptr;
}

} // namespace

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Field* field = find_field(key);
        if (!field) {
            throw ConfigError("unknown config key '" + key + "' (line " +
                              std::to_string(lineno) + ")");
        }
        field->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse(buf.str());
}

std::string TrainConfig::to_string() const {
    std::ostringstream os;
    TrainConfig resolved = *this;
    resolved.lr = resolved_lr();
    for (const auto& [k, f] : fields()) {
        os << k << " = " << f.get(resolved) << "\n";
    }
    return os.str();
}

void TrainConfig::validate() const {
    task_spec().validate();
    if (d_emb < 2 || d_emb % 2 != 0) throw ConfigError("d_emb must be even and >= 2");
    if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (stride_list().size() != static_cast<size_t>(blocks)) {
        throw ConfigError("strides must list one value per block");
    }
    int width = d_emb;
    for (int i = 0; i < blocks; ++i) {
        if (width % 2 != 0) {
            throw ConfigError("block widths must stay even through the halving chain");
        }
        width /= 2;
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (lr < 0.0) throw ConfigError("lr must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0) {
        throw ConfigError("plateau_factor must lie in (0, 1)");
    }
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (eta < 0.0 || eta >= 1.0) throw ConfigError("eta must lie in [0, 1)");
    if (rho_g <= 0.0) throw ConfigError("rho_g must be positive");
    if (m_s4 < 0.0 || m_s4 > 1.0) throw ConfigError("m_s4 must lie in [0, 1]");
    if (m_key < 0.0 || m_key > 1.0) throw ConfigError("m_key must lie in [0, 1]");
    if (rho_nce <= 0.0) throw ConfigError("rho_nce must be positive");
    if (tau_short < 1 || tau_long < tau_short) {
        throw ConfigError("strides must satisfy 1 <= tau_short <= tau_long");
    }
    if (pretrain_epochs < 1 || pretrain_batch_size < 2 || pretrain_videos < 2) {
        throw ConfigError("pretraining sizes must be >= their minimums");
    }
    if (pretrain_lr <= 0.0) throw ConfigError("pretrain_lr must be positive");
    if (pretrain_warmup_frac < 0.0 || pretrain_warmup_frac > 1.0) {
        throw ConfigError("pretrain_warmup_frac must lie in [0, 1]");
    }
    if (proj_hidden < 1 || proj_out < 1) throw ConfigError("projection widths must be >= 1");
    if (selector != "none" && selector != "random" && selector != "linear" &&
        selector != "linear_s4") {
        throw ConfigError("selector must be one of none|random|linear|linear_s4");
    }
}

TaskSpec TrainConfig::task_spec() const {
    TaskSpec s;
    s.kind = task_kind_from_string(task_kind);
    s.classes = task_classes;
    s.frames = task_frames;
    s.height = task_height;
    s.width = task_width;
    s.patch = task_patch;
    s.planted_count = s.kind == TaskKind::long_range ? 2 : task_planted;
    s.noise_std = task_noise_std;
    s.train_size = task_train;
    s.val_size = task_val;
    s.test_size = task_test;
    return s;
}

std::vector<int> TrainConfig::stride_list() const {
    std::vector<int> out;
    std::string item;
    std::istringstream in(strides);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const int v = static_cast<int>(parse_int("strides", item));
        if (v < 1) {
            throw ConfigError("strides entries must be >= 1");
        }
        out.push_back(v);
    }
    return out;
}

double TrainConfig::resolved_lr() const {
    if (lr > 0.0) {
        return lr;
    }
    return 1e-3 * static_cast<double>(batch_size) / 16.0;
}

} // namespace s5
