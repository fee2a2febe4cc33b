#include "safeaug/nn/models.hpp"

#include <stdexcept>

#include "safeaug/transforms/catalog.hpp"

namespace safeaug::nn {

namespace {

std::unique_ptr<Layer> conv(int ci, int co, int k, int s, int p, Rng& rng) {
    return std::make_unique<Conv2d>(ci, co, k, s, p, rng);
}

}  // namespace

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::Classification;
    if (s == "segmentation") return TaskKind::Segmentation;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::string to_string(TaskKind k) {
    return k == TaskKind::Classification ? "classification" : "segmentation";
}

Model::Model(ModelDesc desc, std::vector<std::string> catalog_mapping)
    : desc_(std::move(desc)), mapping_(std::move(catalog_mapping)) {
    if (static_cast<int>(mapping_.size()) != kCatalogSize) {
        throw std::invalid_argument("Model: catalog mapping must have 15 entries");
    }
    build();
}

void Model::build() {
    Rng init(Rng::splitmix64(desc_.init_seed ^ 0x5afea06dULL));
    if (desc_.backbone == "tiny") {
        if (desc_.task != TaskKind::Classification) {
            throw std::invalid_argument("Model: backbone 'tiny' is classification-only");
        }
        build_tiny(init);
    } else if (desc_.backbone == "tiny-seg") {
        if (desc_.task != TaskKind::Segmentation) {
            throw std::invalid_argument("Model: backbone 'tiny-seg' is segmentation-only");
        }
        build_tiny_seg(init);
    } else if (desc_.backbone == "densenet-121") {
        build_densenet(init, {6, 12, 24, 16}, false);
    } else if (desc_.backbone == "densenet-169") {
        build_densenet(init, {6, 12, 32, 32}, false);
    } else if (desc_.backbone == "fpn-densenet-121") {
        if (desc_.task != TaskKind::Segmentation) {
            throw std::invalid_argument("Model: backbone 'fpn-densenet-121' is segmentation-only");
        }
        build_densenet(init, {6, 12, 24, 16}, true);
    } else {
        throw std::invalid_argument("Model: unknown backbone '" + desc_.backbone + "'");
    }
}

// Two conv blocks + GAP; the reference desk-scale classification model.
void Model::build_tiny(Rng& init) {
    const int w = desc_.tiny_width;
    const int in = Network::kInputNode;
    int n = net_.add("conv1", conv(desc_.input_channels, w, 3, 1, 1, init), {in});
    n = net_.add("relu1", std::make_unique<ReLU>(), {n});
    n = net_.add("pool1", std::make_unique<MaxPool2d>(2, 2), {n});
    n = net_.add("conv2", conv(w, 2 * w, 3, 1, 1, init), {n});
    n = net_.add("relu2", std::make_unique<ReLU>(), {n});
    n = net_.add("pool2", std::make_unique<MaxPool2d>(2, 2), {n});
    const int gap = net_.add("gap", std::make_unique<GlobalAvgPool>(), {n});
    aug_head_node_ = net_.add("aug_head", std::make_unique<Linear>(2 * w, kCatalogSize, init), {gap});
    task_head_node_ = net_.add("task_head", std::make_unique<Linear>(2 * w, desc_.num_classes, init), {gap});
    net_.set_outputs({aug_head_node_, task_head_node_});
}

// Tiny encoder with an FPN-style top-down decoder; the desk-scale
// segmentation model. The augmentation head pools the deepest encoder map.
void Model::build_tiny_seg(Rng& init) {
    const int w = desc_.tiny_width;
    const int in = Network::kInputNode;
    int enc1 = net_.add("enc1", conv(desc_.input_channels, w, 3, 1, 1, init), {in});
    enc1 = net_.add("enc1.relu", std::make_unique<ReLU>(), {enc1});
    int p1 = net_.add("pool1", std::make_unique<MaxPool2d>(2, 2), {enc1});
    int enc2 = net_.add("enc2", conv(w, 2 * w, 3, 1, 1, init), {p1});
    enc2 = net_.add("enc2.relu", std::make_unique<ReLU>(), {enc2});
    int p2 = net_.add("pool2", std::make_unique<MaxPool2d>(2, 2), {enc2});
    int enc3 = net_.add("enc3", conv(2 * w, 4 * w, 3, 1, 1, init), {p2});
    enc3 = net_.add("enc3.relu", std::make_unique<ReLU>(), {enc3});

    const int gap = net_.add("gap", std::make_unique<GlobalAvgPool>(), {enc3});
    aug_head_node_ = net_.add("aug_head", std::make_unique<Linear>(4 * w, kCatalogSize, init), {gap});

    int up2 = net_.add("up2", std::make_unique<UpsampleNearest2x>(), {enc3});
    int lat2 = net_.add("lat2", conv(2 * w, 4 * w, 1, 1, 0, init), {enc2});
    int m2 = net_.add("merge2", std::make_unique<Add>(), {up2, lat2});
    m2 = net_.add("merge2.conv", conv(4 * w, 2 * w, 3, 1, 1, init), {m2});
    m2 = net_.add("merge2.relu", std::make_unique<ReLU>(), {m2});

    int up1 = net_.add("up1", std::make_unique<UpsampleNearest2x>(), {m2});
    int lat1 = net_.add("lat1", conv(w, 2 * w, 1, 1, 0, init), {enc1});
    int m1 = net_.add("merge1", std::make_unique<Add>(), {up1, lat1});
    m1 = net_.add("merge1.conv", conv(2 * w, 2 * w, 3, 1, 1, init), {m1});
    m1 = net_.add("merge1.relu", std::make_unique<ReLU>(), {m1});

    task_head_node_ = net_.add("seg_head", conv(2 * w, desc_.num_classes, 1, 1, 0, init), {m1});
    net_.set_outputs({aug_head_node_, task_head_node_});
}

// DenseNet (growth 32) in the standard configuration; inputs narrower than
// 64 px use the conventional small-input stem (3x3 stride-1, no pool).
// with_fpn attaches a semantic-FPN decoder over the four block outputs.
void Model::build_densenet(Rng& init, const std::vector<int>& block_layers, bool with_fpn) {
    constexpr int kGrowth = 32;
    constexpr int kStem = 64;
    constexpr int kBnSize = 4;  // bottleneck width multiplier
    const int in = Network::kInputNode;
    const bool small_input = desc_.input_height < 64 || desc_.input_width < 64;

    int n;
    if (small_input) {
        n = net_.add("stem.conv", conv(desc_.input_channels, kStem, 3, 1, 1, init), {in});
        n = net_.add("stem.bn", std::make_unique<BatchNorm2d>(kStem), {n});
        n = net_.add("stem.relu", std::make_unique<ReLU>(), {n});
    } else {
        n = net_.add("stem.conv", conv(desc_.input_channels, kStem, 7, 2, 3, init), {in});
        n = net_.add("stem.bn", std::make_unique<BatchNorm2d>(kStem), {n});
        n = net_.add("stem.relu", std::make_unique<ReLU>(), {n});
        n = net_.add("stem.pool", std::make_unique<MaxPool2d>(3, 2, 1), {n});
    }

    int channels = kStem;
    std::vector<int> block_outputs;
    std::vector<int> block_channels;
    for (std::size_t b = 0; b < block_layers.size(); ++b) {
        const std::string bp = "block" + std::to_string(b + 1);
        for (int l = 0; l < block_layers[b]; ++l) {
            const std::string lp = bp + ".layer" + std::to_string(l + 1);
            int t = net_.add(lp + ".bn1", std::make_unique<BatchNorm2d>(channels), {n});
            t = net_.add(lp + ".relu1", std::make_unique<ReLU>(), {t});
            t = net_.add(lp + ".conv1", conv(channels, kBnSize * kGrowth, 1, 1, 0, init), {t});
            t = net_.add(lp + ".bn2", std::make_unique<BatchNorm2d>(kBnSize * kGrowth), {t});
            t = net_.add(lp + ".relu2", std::make_unique<ReLU>(), {t});
            t = net_.add(lp + ".conv2", conv(kBnSize * kGrowth, kGrowth, 3, 1, 1, init), {t});
            n = net_.add(lp + ".concat", std::make_unique<Concat>(), {n, t});
            channels += kGrowth;
        }
        block_outputs.push_back(n);
        block_channels.push_back(channels);
        if (b + 1 < block_layers.size()) {
            const std::string tp = "trans" + std::to_string(b + 1);
            const int compressed = channels / 2;
            n = net_.add(tp + ".bn", std::make_unique<BatchNorm2d>(channels), {n});
            n = net_.add(tp + ".relu", std::make_unique<ReLU>(), {n});
            n = net_.add(tp + ".conv", conv(channels, compressed, 1, 1, 0, init), {n});
            n = net_.add(tp + ".pool", std::make_unique<AvgPool2d>(2, 2), {n});
            channels = compressed;
        }
    }

    int top = net_.add("final.bn", std::make_unique<BatchNorm2d>(channels), {n});
    top = net_.add("final.relu", std::make_unique<ReLU>(), {top});
    const int gap = net_.add("gap", std::make_unique<GlobalAvgPool>(), {top});
    aug_head_node_ = net_.add("aug_head", std::make_unique<Linear>(channels, kCatalogSize, init), {gap});

    if (!with_fpn) {
        task_head_node_ = net_.add("task_head", std::make_unique<Linear>(channels, desc_.num_classes, init), {gap});
        net_.set_outputs({aug_head_node_, task_head_node_});
        return;
    }

    // Semantic-FPN decoder: laterals to a fixed width, top-down nearest
    // upsampling with addition, then per-level heads summed at the highest
    // resolution and upsampled back to the input grid.
    constexpr int kFpnWidth = 128;
    std::vector<int> laterals;
    for (std::size_t b = 0; b < block_outputs.size(); ++b) {
        laterals.push_back(net_.add("fpn.lat" + std::to_string(b + 2),
                                    conv(block_channels[b], kFpnWidth, 1, 1, 0, init), {block_outputs[b]}));
    }
    std::vector<int> pyramid(laterals.size());
    pyramid.back() = laterals.back();
    for (int b = static_cast<int>(laterals.size()) - 2; b >= 0; --b) {
        const int up = net_.add("fpn.up" + std::to_string(b + 2), std::make_unique<UpsampleNearest2x>(),
                                {pyramid[b + 1]});
        pyramid[b] = net_.add("fpn.add" + std::to_string(b + 2), std::make_unique<Add>(), {laterals[b], up});
    }
    std::vector<int> heads;
    for (std::size_t b = 0; b < pyramid.size(); ++b) {
        int h = net_.add("fpn.smooth" + std::to_string(b + 2), conv(kFpnWidth, kFpnWidth, 3, 1, 1, init),
                         {pyramid[b]});
        h = net_.add("fpn.smooth" + std::to_string(b + 2) + ".relu", std::make_unique<ReLU>(), {h});
        for (std::size_t u = 0; u < b; ++u) {
            h = net_.add("fpn.head_up" + std::to_string(b + 2) + "_" + std::to_string(u),
                         std::make_unique<UpsampleNearest2x>(), {h});
        }
        heads.push_back(h);
    }
    int fused = heads.size() > 1 ? net_.add("fpn.sum", std::make_unique<Add>(), heads) : heads[0];
    fused = net_.add("fpn.fuse.conv", conv(kFpnWidth, kFpnWidth / 2, 3, 1, 1, init), {fused});
    fused = net_.add("fpn.fuse.relu", std::make_unique<ReLU>(), {fused});
    int logits = net_.add("seg_head", conv(kFpnWidth / 2, desc_.num_classes, 1, 1, 0, init), {fused});
    // The finest pyramid level sits at the stem-pool stride; upsample back
    // to the input grid.
    const int ups = small_input ? 0 : 2;
    for (int u = 0; u < ups; ++u) {
        logits = net_.add("seg_up" + std::to_string(u), std::make_unique<UpsampleNearest2x>(), {logits});
    }
    task_head_node_ = logits;
    net_.set_outputs({aug_head_node_, task_head_node_});
}

Model::Heads Model::forward(const Tensor& images, bool training) {
    if (images.ndim() != 4 || images.dim(1) != desc_.input_channels ||
        images.dim(2) != desc_.input_height || images.dim(3) != desc_.input_width) {
        throw std::invalid_argument("Model::forward: input " + images.shape_str() + " does not match model (" +
                                    std::to_string(desc_.input_channels) + "," +
                                    std::to_string(desc_.input_height) + "," +
                                    std::to_string(desc_.input_width) + ")");
    }
    auto outs = net_.forward(images, training);
    return Heads{std::move(outs[0]), std::move(outs[1])};
}

void Model::backward(const Tensor& grad_aug, const Tensor& grad_task) {
    Tensor ga = grad_aug;
    Tensor gt = grad_task;
    if (ga.empty()) ga = Tensor(net_.activation(aug_head_node_).shape());
    if (gt.empty()) gt = Tensor(net_.activation(task_head_node_).shape());
    net_.backward({std::move(ga), std::move(gt)});
}

std::size_t Model::param_count() {
    std::size_t n = 0;
    for (const Param* p : net_.params()) n += p->value.size();
    return n;
}

Tensor broadcast_aug_targets(const JointBatch& batch, int batch_size) {
    if (batch.per_item_aug_labels) {
        const Tensor& t = *batch.per_item_aug_labels;
        if (t.ndim() != 2 || t.dim(0) != batch_size || t.dim(1) != kCatalogSize) {
            throw std::invalid_argument("JointBatch: per-item aug labels must be (N, 15)");
        }
        return t;
    }
    if (static_cast<int>(batch.aug_labels.size()) != kCatalogSize) {
        throw std::invalid_argument("JointBatch: aug label vector must have 15 entries");
    }
    Tensor t({batch_size, kCatalogSize});
    for (int i = 0; i < batch_size; ++i)
        for (int j = 0; j < kCatalogSize; ++j) t.at2(i, j) = batch.aug_labels[j];
    return t;
}

namespace {

LossBreakdown compute_losses(Model& model, const JointBatch& batch, bool training, bool with_grad,
                             Tensor* grad_aug, Tensor* grad_task) {
    const int n = batch.images.dim(0);
    auto heads = model.forward(batch.images, training);
    const Tensor aug_targets = broadcast_aug_targets(batch, n);
    LossResult la = augmentation_loss(heads.aug_logits, aug_targets, with_grad);
    LossResult lt = model.desc().task == TaskKind::Classification
                        ? classification_loss(heads.task_logits, batch.task_labels, with_grad)
                        : segmentation_loss(heads.task_logits, batch.task_labels, with_grad);
    if (with_grad) {
        *grad_aug = std::move(la.grad_logits);
        *grad_task = std::move(lt.grad_logits);
    }
    LossBreakdown out;
    out.l_augm = la.value;
    out.l_task = lt.value;
    out.l_total = total_loss(la.value, lt.value);
    return out;
}

}  // namespace

LossBreakdown train_step(Model& model, const JointBatch& batch, Optimizer& opt, bool joint) {
    Tensor grad_aug, grad_task;
    // Loss evaluation throws on non-finite values before any update.
    LossBreakdown losses = compute_losses(model, batch, /*training=*/true, /*with_grad=*/true,
                                          &grad_aug, &grad_task);
    model.zero_grad();
    if (joint) {
        model.backward(grad_aug, grad_task);
    } else {
        model.backward(Tensor(), grad_task);
    }
    auto params = model.params();
    opt.step(params);
    return losses;
}

LossBreakdown eval_losses(Model& model, const JointBatch& batch) {
    Tensor ga, gt;
    return compute_losses(model, batch, /*training=*/false, /*with_grad=*/false, &ga, &gt);
}

}  // namespace safeaug::nn
