#include "s5/model.hpp"

namespace s5 {

void BackboneParams::visit(const std::string& prefix, const ParamVisitor& v) {
    embed.visit(prefix + "embed.", v);
    pos.visit(prefix + "pos.", v);
    for (size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].visit(prefix + "block" + std::to_string(i) + ".", v);
    }
}

int BackboneParams::final_width() const {
    return blocks.empty() ? embed.out_dim() : blocks.back().width() / 2;
}

void S5Classifier::visit(const ParamVisitor& v) {
    visit_trainable(v);
    shadow.visit("shadow.", v);
}

void S5Classifier::visit_trainable(const ParamVisitor& v) {
    backbone.visit("backbone.", v);
    head.visit("head.", v);
    mg.visit("mg.", v);
}

S5Classifier init_classifier(const TrainConfig& cfg, Rng& rng) {
    const TaskSpec task = cfg.task_spec();
    const int s = task.patches_per_frame();
    const int t = task.frames;
    const int raw = task.patch * task.patch * 3;

    S5Classifier model;
    model.patch = task.patch;
    Rng embed_rng = rng.split(stream_id("embed"));
    model.backbone.embed = init_linear(raw, cfg.d_emb, embed_rng);
    Rng pos_rng = rng.split(stream_id("pos"));
    model.backbone.pos = init_positional(s, t, cfg.d_emb, pos_rng);
    const std::vector<int> strides = cfg.stride_list();
    int width = cfg.d_emb;
    for (int i = 0; i < cfg.blocks; ++i) {
        Rng block_rng = rng.split(stream_id("block", static_cast<uint64_t>(i)));
        model.backbone.blocks.push_back(init_decoder_block(
            width, cfg.state_dim, strides[static_cast<size_t>(i)], cfg.dropout, block_rng));
        width /= 2;
    }
    Rng head_rng = rng.split(stream_id("head"));
    model.head = init_linear(width, task.classes, head_rng);

    Rng mg_rng = rng.split(stream_id("mg"));
    model.mg.score = init_linear(cfg.d_emb, 1, mg_rng);
    model.mg.gumbel_temp = cfg.rho_g;
    model.shadow = make_shadow(model.backbone.blocks.front(), cfg.m_s4);
    return model;
}

std::vector<int> block_sequence_lengths(int st, int kept,
                                        const std::vector<DecoderBlockParams>& blocks) {
    std::vector<int> lengths;
    lengths.reserve(blocks.size());
    int len = kept > 0 ? kept : st;
    for (const DecoderBlockParams& block : blocks) {
        lengths.push_back(len);
        len = (len + block.pool_stride - 1) / block.pool_stride;
    }
    return lengths;
}

StepKernels prepare_step_kernels(const S5Classifier& model, int st, int kept) {
    StepKernels k;
    {
        NoTapeScope guard;
        k.shadow = materialize_kernel(model.shadow.s4, st);
    }
    const std::vector<int> lengths = block_sequence_lengths(st, kept, model.backbone.blocks);
    for (size_t i = 0; i < model.backbone.blocks.size(); ++i) {
        k.blocks.push_back(
            materialize_kernel(model.backbone.blocks[i].s4, lengths[i]));
    }
    return k;
}

Tensor classifier_forward(const S5Classifier& model, const Tensor& frames,
                          const ForwardOptions& opts, Rng& rng_gumbel, Rng& rng_dropout,
                          S5BlockStats* stats) {
    TokenGrid grid = tokenize(frames, model.patch, model.backbone.embed, model.backbone.pos);

    S5BlockOptions block_opts;
    block_opts.eta = opts.eta;
    block_opts.selector = opts.selector;
    block_opts.train = opts.train;
    block_opts.deterministic_topk = opts.deterministic_topk;
    if (opts.kernels) {
        block_opts.shadow_kernel = &opts.kernels->shadow;
        block_opts.block_kernel = &opts.kernels->blocks.front();
    }
    S5BlockStats local_stats;
    Tensor x = s5_block_forward(model.backbone.blocks.front(), model.shadow, model.mg, grid,
                                block_opts, rng_gumbel, rng_dropout, &local_stats);
    for (size_t i = 1; i < model.backbone.blocks.size(); ++i) {
        const DecoderBlockParams& block = model.backbone.blocks[i];
        if (opts.kernels) {
            x = decoder_block_with_kernel(block, opts.kernels->blocks[i], x, opts.train,
                                          rng_dropout);
        } else {
            x = decoder_block(block, x, opts.train, rng_dropout);
        }
    }
    Tensor feature = mean_axis(x, 0);
    if (stats) {
        *stats = local_stats;
    }
    return classify(feature, model.head);
}

} // namespace s5
