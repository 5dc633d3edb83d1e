#include "s5/lsmcl.hpp"

#include <cmath>
#include <map>

namespace s5 {

ClipPair sample_long_short(const Tensor& video, int clip_frames, int tau_long,
                           int tau_short, Rng& rng) {
    if (video.ndim() != 4) {
        throw ShapeError("sample_long_short: expected video[TxHxWx3]");
    }
    if (tau_short < 1 || tau_long < tau_short) {
        throw ArgError("sample_long_short: need 1 <= tau_short <= tau_long");
    }
    const int total = video.dim(0);
    const int long_span = clip_frames * tau_long;
    const int short_span = clip_frames * tau_short;
    if (total < long_span) {
        throw DataError("sample_long_short: video too short for the long clip (" +
                        std::to_string(total) + " < " + std::to_string(long_span) + ")");
    }
    ClipPair pair;
    pair.tau_long = tau_long;
    pair.tau_short = tau_short;
    pair.long_start = static_cast<int>(rng.below(static_cast<uint64_t>(total - long_span + 1)));
    const int slack = long_span - short_span;
    pair.short_start =
        pair.long_start + static_cast<int>(rng.below(static_cast<uint64_t>(slack + 1)));

    std::vector<int> long_rows, short_rows;
    long_rows.reserve(static_cast<size_t>(clip_frames));
    short_rows.reserve(static_cast<size_t>(clip_frames));
    for (int i = 0; i < clip_frames; ++i) {
        long_rows.push_back(pair.long_start + i * tau_long);
        short_rows.push_back(pair.short_start + i * tau_short);
    }
    pair.long_frames = gather_rows(video.detached(), long_rows);
    pair.short_frames = gather_rows(video.detached(), short_rows);
    return pair;
}

std::vector<int> random_mask_indices(int st, double eta, Rng& rng) {
    if (eta < 0.0 || eta >= 1.0) {
        throw ArgError("random_mask: eta must lie in [0, 1)");
    }
    const int keep = static_cast<int>(std::llround((1.0 - eta) * st));
    if (keep < 1) {
        throw ArgError("random_mask: mask would keep no tokens");
    }
    return rng.sample_without_replacement(st, keep);
}

std::pair<Tensor, std::vector<int>> random_mask(const TokenGrid& grid, double eta,
                                                Rng& rng) {
    std::vector<int> kept = random_mask_indices(grid.rows(), eta, rng);
    return {gather_rows(grid.tokens, kept), kept};
}

Tensor info_nce(const Tensor& q, const Tensor& k, double rho) {
    if (q.ndim() != 2 || k.ndim() != 2 || q.dims() != k.dims()) {
        throw ShapeError("info_nce: q and k must share shape [BxE]");
    }
    if (q.dim(0) < 2) {
        throw ArgError("info_nce: batch size must be >= 2 (negatives required)");
    }
    if (rho <= 0.0) {
        throw ArgError("info_nce: temperature must be positive");
    }
    Tensor logits = scale(matmul(q, transpose(k.detached())), 1.0 / rho);
    std::vector<int> labels(static_cast<size_t>(q.dim(0)));
    for (size_t i = 0; i < labels.size(); ++i) {
        labels[i] = static_cast<int>(i);
    }
    return cross_entropy(logits, labels);
}

void MlpLayer::visit(const std::string& prefix, const ParamVisitor& v, bool trainable) {
    ParamVisitor inner = [&v, trainable](const std::string& name, Tensor& t, bool tr) {
        v(name, t, trainable && tr);
    };
    lin.visit(prefix, inner);
    inner(prefix + "bn_gamma", bn_gamma, true);
    inner(prefix + "bn_beta", bn_beta, true);
    inner(prefix + "bn_mean", bn.running_mean, false);
    inner(prefix + "bn_var", bn.running_var, false);
}

Tensor MlpHead::forward(const Tensor& x, bool train) {
    Tensor h = x;
    for (MlpLayer& layer : layers) {
        h = batch_norm(linear(layer.lin, h), layer.bn_gamma, layer.bn_beta, layer.bn, train);
        if (layer.relu_after) {
            h = relu(h);
        }
    }
    return h;
}

void MlpHead::visit(const std::string& prefix, const ParamVisitor& v, bool trainable) {
    for (size_t i = 0; i < layers.size(); ++i) {
        layers[i].visit(prefix + "layer" + std::to_string(i) + ".", v, trainable);
    }
}

namespace {

MlpLayer make_mlp_layer(int in, int out, bool relu_after, Rng& rng) {
    MlpLayer layer;
    layer.lin = init_linear(in, out, rng);
    layer.bn_gamma = Tensor::full({out}, 1.0);
    layer.bn_beta = Tensor::zeros({out});
    layer.bn.running_mean = Tensor::zeros({out});
    layer.bn.running_var = Tensor::full({out}, 1.0);
    layer.relu_after = relu_after;
    return layer;
}

} // namespace

MlpHead init_projection(int in, int hidden, int out, Rng& rng) {
    MlpHead head;
    Rng r0 = rng.split(0), r1 = rng.split(1), r2 = rng.split(2);
    head.layers.push_back(make_mlp_layer(in, hidden, true, r0));
    head.layers.push_back(make_mlp_layer(hidden, hidden, true, r1));
    head.layers.push_back(make_mlp_layer(hidden, out, false, r2));
    return head;
}

MlpHead init_prediction(int dim, int hidden, Rng& rng) {
    MlpHead head;
    Rng r0 = rng.split(0), r1 = rng.split(1);
    head.layers.push_back(make_mlp_layer(dim, hidden, true, r0));
    head.layers.push_back(make_mlp_layer(hidden, dim, false, r1));
    return head;
}

void ContrastiveEncoder::visit(const std::string& prefix, const ParamVisitor& v,
                               bool trainable) {
    ParamVisitor inner = [&v, trainable](const std::string& name, Tensor& t, bool tr) {
        v(name, t, trainable && tr);
    };
    backbone.visit(prefix + "backbone.", inner);
    projection.visit(prefix + "proj.", v, trainable);
    if (has_prediction) {
        prediction.visit(prefix + "pred.", v, trainable);
    }
}

ContrastiveHeads init_contrastive(const TrainConfig& cfg, Rng& rng) {
    const TaskSpec task = cfg.task_spec();
    const int raw = task.patch * task.patch * 3;
    const int s = task.patches_per_frame();

    ContrastiveHeads heads;
    heads.m_key = cfg.m_key;
    ContrastiveEncoder& q = heads.q;
    q.patch = task.patch;
    q.has_prediction = true;
    Rng embed_rng = rng.split(stream_id("embed"));
    q.backbone.embed = init_linear(raw, cfg.d_emb, embed_rng);
    Rng pos_rng = rng.split(stream_id("pos"));
    q.backbone.pos = init_positional(s, task.frames, cfg.d_emb, pos_rng);
    const std::vector<int> strides = cfg.stride_list();
    int width = cfg.d_emb;
    for (int i = 0; i < cfg.blocks; ++i) {
        Rng block_rng = rng.split(stream_id("block", static_cast<uint64_t>(i)));
        q.backbone.blocks.push_back(init_decoder_block(
            width, cfg.state_dim, strides[static_cast<size_t>(i)], cfg.dropout, block_rng));
        width /= 2;
    }
    Rng proj_rng = rng.split(stream_id("proj"));
    q.projection = init_projection(width, cfg.proj_hidden, cfg.proj_out, proj_rng);
    Rng pred_rng = rng.split(stream_id("pred"));
    q.prediction = init_prediction(cfg.proj_out, cfg.proj_hidden, pred_rng);

    // The key encoder starts as an exact copy of the query side.
    ContrastiveEncoder& k = heads.k;
    k.patch = q.patch;
    k.has_prediction = false;
    k.backbone = q.backbone;
    k.projection = q.projection;
    k.visit("", [](const std::string&, Tensor& t, bool) { t = t.detached(); });
    return heads;
}

Tensor encoder_backbone_feature(const ContrastiveEncoder& enc, const Tensor& clip,
                                const std::vector<int>& kept, bool train,
                                Rng& rng_dropout) {
    TokenGrid grid = tokenize(clip, enc.patch, enc.backbone.embed, enc.backbone.pos);
    Tensor x = kept.empty() ? grid.tokens : gather_rows(grid.tokens, kept);
    for (const DecoderBlockParams& block : enc.backbone.blocks) {
        x = decoder_block(block, x, train, rng_dropout);
    }
    return mean_axis(x, 0);
}

void momentum_update_key(ContrastiveHeads& heads) {
    std::map<std::string, Tensor*> q_params;
    heads.q.backbone.visit("backbone.", [&q_params](const std::string& n, Tensor& t, bool) {
        q_params.emplace(n, &t);
    });
    heads.q.projection.visit(
        "proj.", [&q_params](const std::string& n, Tensor& t, bool) { q_params.emplace(n, &t); },
        true);
    const double m = heads.m_key;
    auto blend = [&q_params, m](const std::string& n, Tensor& t, bool) {
        auto it = q_params.find(n);
        if (it == q_params.end()) {
            throw CheckpointError("momentum update: key parameter '" + n +
                                  "' has no query counterpart");
        }
        momentum_blend(t, *it->second, m);
    };
    heads.k.backbone.visit("backbone.", blend);
    heads.k.projection.visit("proj.", blend, true);
}

namespace {

LsmclStepStats batch_alignment(const Tensor& q_short, const Tensor& k_long) {
    // Mean cosine similarity of positive pairs vs in-batch negatives.
    LsmclStepStats stats;
    const int b = q_short.dim(0);
    double pos = 0.0, neg = 0.0;
    int neg_count = 0;
    for (int i = 0; i < b; ++i) {
        Tensor qi = gather_rows(q_short, {i});
        for (int j = 0; j < b; ++j) {
            Tensor kj = gather_rows(k_long, {j});
            const double c = cosine_similarity(qi.detached(), kj.detached()).item();
            if (i == j) {
                pos += c;
            } else {
                neg += c;
                ++neg_count;
            }
        }
    }
    stats.positive_similarity = pos / b;
    stats.negative_similarity = neg_count > 0 ? neg / neg_count : 0.0;
    return stats;
}

} // namespace

LsmclStepStats lsmcl_step(ContrastiveHeads& heads, const std::vector<ClipPair>& batch,
                          double rho, AdamW& opt, Rng& rng_dropout) {
    const int b = static_cast<int>(batch.size());
    if (b < 2) {
        throw ArgError("lsmcl_step: batch size must be >= 2");
    }

    Tape tape;
    TapeScope scope(tape);
    heads.q.visit("", [&tape](const std::string&, Tensor& t, bool trainable) {
        if (trainable) {
            t = tape.watch(t);
        }
    });

    auto stack_features = [&](ContrastiveEncoder& enc, bool use_short, bool train) {
        std::vector<Tensor> rows;
        rows.reserve(static_cast<size_t>(b));
        for (const ClipPair& pair : batch) {
            const Tensor& clip = use_short ? pair.short_frames : pair.long_frames;
            const std::vector<int>& kept = use_short ? pair.mask_short : pair.mask_long;
            Tensor f = encoder_backbone_feature(enc, clip, kept, train, rng_dropout);
            rows.push_back(f.reshaped({1, f.dim(0)}));
        }
        return concat(rows, 0);
    };

    Tensor bb_q_short = stack_features(heads.q, true, true);
    Tensor bb_q_long = stack_features(heads.q, false, true);
    Tensor q_short = heads.q.prediction.forward(heads.q.projection.forward(bb_q_short, true), true);
    Tensor q_long = heads.q.prediction.forward(heads.q.projection.forward(bb_q_long, true), true);

    Tensor k_short, k_long;
    {
        NoTapeScope guard;
        Tensor bb_k_short = stack_features(heads.k, true, true);
        Tensor bb_k_long = stack_features(heads.k, false, true);
        k_short = heads.k.projection.forward(bb_k_short, true);
        k_long = heads.k.projection.forward(bb_k_long, true);
    }

    Tensor loss = scale(add(info_nce(q_short, k_long, rho), info_nce(q_long, k_short, rho)), 0.5);
    tape.backward(loss);

    opt.begin_step();
    heads.q.visit("q.", [&tape, &opt](const std::string& name, Tensor& t, bool trainable) {
        if (trainable) {
            Tensor g = tape.grad(t);
            t = t.detached();
            opt.update(name, t, g);
        } else {
            t = t.detached();
        }
    });
    momentum_update_key(heads);

    LsmclStepStats stats = batch_alignment(q_short, k_long);
    stats.loss = loss.item();
    return stats;
}

void transfer_init(ContrastiveEncoder& pretrained_q, S5Classifier& model) {
    std::map<std::string, const Tensor*> src;
    pretrained_q.backbone.visit("backbone.", [&src](const std::string& n, Tensor& t, bool) {
        src.emplace(n, &t);
    });
    model.backbone.visit("backbone.", [&src](const std::string& n, Tensor& t, bool) {
        auto it = src.find(n);
        if (it == src.end()) {
            throw CheckpointError("transfer_init: missing pretrained parameter '" + n + "'");
        }
        if (it->second->dims() != t.dims()) {
            throw CheckpointError("transfer_init: shape mismatch for '" + n + "'");
        }
        t = it->second->detached();
    });
    model.shadow = make_shadow(model.backbone.blocks.front(), model.shadow.momentum);
}

} // namespace s5
