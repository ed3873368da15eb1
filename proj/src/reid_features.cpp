#include "posenorm/reid_features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace posenorm {

void BackboneArch::validate() const {
    if (base_channels < 1) throw std::invalid_argument("BackboneArch: base_channels must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("BackboneArch: feature_dim must be >= 1");
    const int min_side = 1 << kBackboneStages;
    if (h < min_side || w < min_side)
        throw std::invalid_argument("BackboneArch: input dims too small for four stride-2 stages");
}

Backbone::Backbone(const BackboneArch& arch, const FeatureTapSpec& taps, int n_identities)
    : arch_(arch),
      taps_(taps),
      n_identities_(n_identities),
      concat_dim_(0),
      stem_(3, arch.base_channels, 3, 1, 1),
      fc_(1, 1),       // placeholder, rebuilt below once concat_dim_ is known
      dropout_(0.5),   // rate applied per call; see logits()
      head_(arch.feature_dim, n_identities) {
    arch.validate();
    if (taps.tap_stages.empty()) throw std::invalid_argument("FeatureTapSpec: no tap stages");
    for (int s : taps.tap_stages)
        if (s < 0 || s >= kBackboneStages)
            throw std::invalid_argument("FeatureTapSpec: stage index out of range");
    if (n_identities < 1) throw std::invalid_argument("Backbone: need at least one identity");

    int in_c = arch.base_channels;
    for (int s = 0; s < kBackboneStages; ++s) {
        const int out_c = arch.base_channels << s;
        stages_.emplace_back(in_c, out_c);
        in_c = out_c;
    }
    tap_of_stage_.assign(kBackboneStages, -1);
    for (size_t t = 0; t < taps.tap_stages.size(); ++t) {
        const int s = taps.tap_stages[t];
        if (tap_of_stage_[static_cast<size_t>(s)] != -1)
            throw std::invalid_argument("FeatureTapSpec: duplicate stage index");
        tap_of_stage_[static_cast<size_t>(s)] = static_cast<int>(t);
        const int c = stage_channels(s);
        pools_.emplace_back();
        tap_proj_.emplace_back(c, c);
        concat_dim_ += c;
    }
    fc_ = Linear(concat_dim_, arch.feature_dim);
}

int Backbone::stage_channels(int stage) const { return arch_.base_channels << stage; }

void Backbone::set_dropout_rate(double p) { dropout_.set_rate(p); }

void Backbone::init(Rng& rng) {
    // He-style scale for the conv stack, small scale for the projections so
    // that initial logits sit near zero.
    auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
    stem_.init(rng, he(3 * 9));
    for (int s = 0; s < kBackboneStages; ++s) {
        const int in_c = s == 0 ? arch_.base_channels : stage_channels(s - 1);
        stages_[static_cast<size_t>(s)].conv.init(rng, he(in_c * 9));
        stages_[static_cast<size_t>(s)].block.init(rng, he(stage_channels(s) * 9));
    }
    for (size_t t = 0; t < tap_proj_.size(); ++t)
        tap_proj_[t].init(rng, he(stage_channels(taps_.tap_stages[t])));
    fc_.init(rng, he(concat_dim_));
    head_.init(rng, 0.01);
}

Tensor Backbone::features(const Tensor& x) {
    if (x.shape.size() != 4 || x.dim(1) != 3 || x.dim(2) != arch_.h || x.dim(3) != arch_.w)
        throw std::invalid_argument("Backbone: expected {N,3," + std::to_string(arch_.h) + "," +
                                    std::to_string(arch_.w) + "}, got " + x.shape_str());
    const int n = x.dim(0);
    Tensor t = stem_r_.forward(stem_.forward(x));
    std::vector<Tensor> tap_out(tap_proj_.size());
    for (int s = 0; s < kBackboneStages; ++s) {
        auto& st = stages_[static_cast<size_t>(s)];
        t = st.block.forward(st.relu.forward(st.conv.forward(t)));
        const int slot = tap_of_stage_[static_cast<size_t>(s)];
        if (slot >= 0)
            tap_out[static_cast<size_t>(slot)] =
                tap_proj_[static_cast<size_t>(slot)].forward(pools_[static_cast<size_t>(slot)].forward(t));
    }
    Tensor concat({n, concat_dim_});
    int off = 0;
    for (size_t slot = 0; slot < tap_out.size(); ++slot) {
        const int c = tap_out[slot].dim(1);
        for (int ni = 0; ni < n; ++ni)
            std::copy(tap_out[slot].ptr() + static_cast<int64_t>(ni) * c,
                      tap_out[slot].ptr() + static_cast<int64_t>(ni + 1) * c,
                      concat.ptr() + static_cast<int64_t>(ni) * concat_dim_ + off);
        off += c;
    }
    return fc_.forward(concat);
}

Tensor Backbone::logits(const Tensor& x, bool training, Rng* rng) {
    Tensor f = features(x);
    f = dropout_.forward(f, training, rng);
    return head_.forward(f);
}

void Backbone::backward_from_logits(const Tensor& glogits) {
    Tensor g = dropout_.backward(head_.backward(glogits));
    Tensor gconcat = fc_.backward(g);
    const int n = gconcat.dim(0);

    // Split the concat gradient back into per-tap slices, then push each
    // through its projection and pool onto the owning stage.
    std::vector<Tensor> gstage(kBackboneStages);
    int off = 0;
    for (size_t slot = 0; slot < tap_proj_.size(); ++slot) {
        const int s = taps_.tap_stages[slot];
        const int c = stage_channels(s);
        Tensor gslice({n, c});
        for (int ni = 0; ni < n; ++ni)
            std::copy(gconcat.ptr() + static_cast<int64_t>(ni) * concat_dim_ + off,
                      gconcat.ptr() + static_cast<int64_t>(ni) * concat_dim_ + off + c,
                      gslice.ptr() + static_cast<int64_t>(ni) * c);
        off += c;
        gstage[static_cast<size_t>(s)] =
            pools_[slot].backward(tap_proj_[slot].backward(gslice));
    }

    Tensor g_above;  // gradient flowing from the stage above
    for (int s = kBackboneStages - 1; s >= 0; --s) {
        Tensor gt;
        if (g_above.numel() > 0 && gstage[static_cast<size_t>(s)].numel() > 0)
            gt = add(g_above, gstage[static_cast<size_t>(s)]);
        else if (g_above.numel() > 0)
            gt = std::move(g_above);
        else if (gstage[static_cast<size_t>(s)].numel() > 0)
            gt = std::move(gstage[static_cast<size_t>(s)]);
        else
            throw std::logic_error("Backbone::backward: stage with no gradient consumers");
        auto& st = stages_[static_cast<size_t>(s)];
        g_above = st.conv.backward(st.relu.backward(st.block.backward(gt)));
    }
    stem_.backward(stem_r_.backward(g_above));
}

std::vector<double> Backbone::extract(const Image& img) {
    const Tensor f = features(image_to_tensor(img));
    return {f.data.begin(), f.data.end()};
}

std::vector<NamedParam> Backbone::named_params() {
    std::vector<NamedParam> out;
    stem_.collect("stem.conv", out);
    for (int s = 0; s < kBackboneStages; ++s) {
        const std::string p = "stage" + std::to_string(s);
        stages_[static_cast<size_t>(s)].conv.collect(p + ".conv", out);
        stages_[static_cast<size_t>(s)].block.collect(p + ".res", out);
    }
    for (size_t t = 0; t < tap_proj_.size(); ++t)
        tap_proj_[t].collect("tap" + std::to_string(taps_.tap_stages[t]), out);
    fc_.collect("fc", out);
    head_.collect("head", out);
    return out;
}

// ------------------------------------------------------------------ loss

double identity_ce_loss(const std::vector<double>& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("identity_ce_loss: label out of range");
    const double m = *std::max_element(logits.begin(), logits.end());
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - m);
    return m + std::log(lse) - logits[static_cast<size_t>(label)];
}

double ce_loss_batch(const Tensor& logits, const std::vector<int>& labels, Tensor* glogits) {
    const int n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("ce_loss_batch: labels size mismatch");
    if (glogits) *glogits = Tensor(logits.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits.ptr() + static_cast<int64_t>(i) * c;
        const int label = labels[static_cast<size_t>(i)];
        if (label < 0 || label >= c)
            throw std::invalid_argument("ce_loss_batch: label out of range");
        const double m = *std::max_element(row, row + c);
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(row[j] - m);
        total += m + std::log(lse) - row[label];
        if (glogits) {
            double* grow = glogits->ptr() + static_cast<int64_t>(i) * c;
            for (int j = 0; j < c; ++j) grow[j] = std::exp(row[j] - m) / lse / n;
            grow[label] -= 1.0 / n;
        }
    }
    return total / n;
}

// -------------------------------------------------------------- training

namespace {

Tensor batch_tensor(const std::vector<const Image*>& images, const std::vector<int>& order,
                    int from, int to) {
    std::vector<const Image*> chunk;
    chunk.reserve(static_cast<size_t>(to - from));
    for (int i = from; i < to; ++i) chunk.push_back(images[static_cast<size_t>(order[static_cast<size_t>(i)])]);
    return images_to_tensor(chunk);
}

double eval_accuracy(Backbone& net, const std::vector<const Image*>& images,
                     const std::vector<int>& labels, int batch_size) {
    const int n = static_cast<int>(images.size());
    int correct = 0;
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int from = 0; from < n; from += batch_size) {
        const int to = std::min(n, from + batch_size);
        const Tensor out = net.logits(batch_tensor(images, order, from, to), false, nullptr);
        const int c = out.dim(1);
        for (int i = 0; i < to - from; ++i) {
            const double* row = out.ptr() + static_cast<int64_t>(i) * c;
            const int pred =
                static_cast<int>(std::max_element(row, row + c) - row);
            if (pred == labels[static_cast<size_t>(from + i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / n;
}

}  // namespace

ReidTrainResult train_identity_classifier(Backbone& net, const std::vector<const Image*>& images,
                                          const std::vector<int>& labels,
                                          const ReidTrainConfig& cfg) {
    if (images.empty() || images.size() != labels.size())
        throw std::invalid_argument("train_identity_classifier: bad dataset");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("train_identity_classifier: dropout must be in [0,1)");
    {
        std::vector<int> distinct = labels;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2)
            throw std::invalid_argument(
                "train_identity_classifier: need at least two identities");
    }

    net.set_dropout_rate(cfg.dropout);
    Rng rng(derive_seed(cfg.seed, "reid-train"));
    Adam opt(net.named_params(), cfg.learning_rate, cfg.beta1);
    const int n = static_cast<int>(images.size());
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    ReidTrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Seeded Fisher-Yates shuffle.
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int from = 0; from < n; from += cfg.batch_size) {
            const int to = std::min(n, from + cfg.batch_size);
            std::vector<int> batch_labels;
            for (int i = from; i < to; ++i)
                batch_labels.push_back(labels[static_cast<size_t>(order[static_cast<size_t>(i)])]);
            const Tensor out = net.logits(batch_tensor(images, order, from, to), true, &rng);
            Tensor glogits;
            const double loss = ce_loss_batch(out, batch_labels, &glogits);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_identity_classifier: non-finite loss at epoch " +
                                         std::to_string(epoch));
            net.backward_from_logits(glogits);
            opt.step();
            epoch_loss += loss;
            ++batches;
        }
        result.loss_history.push_back(epoch_loss / std::max(1, batches));
        result.accuracy_history.push_back(eval_accuracy(net, images, labels, cfg.batch_size));
    }
    return result;
}

NormalizedSet build_normalized_training_set(const TrainView& view, Generator& gen,
                                            const CanonicalPoseSet& canon) {
    NormalizedSet out;
    for (const auto& members : view.by_identity)
        for (int idx : members) {
            const auto& sample = view.dataset->samples[static_cast<size_t>(idx)];
            std::vector<PersonImage> synth = synthesize_normalized(sample.image, canon, gen);
            for (auto& img : synth) {
                out.images.push_back(std::move(img));
                out.labels.push_back(sample.identity);
            }
        }
    return out;
}

ReidTrainResult train_backbone_b(Backbone& net, const TrainView& view, Generator& gen,
                                 const CanonicalPoseSet& canon, const ReidTrainConfig& cfg,
                                 bool include_originals) {
    NormalizedSet set = build_normalized_training_set(view, gen, canon);
    if (include_originals)
        for (const auto& members : view.by_identity)
            for (int idx : members) {
                const auto& sample = view.dataset->samples[static_cast<size_t>(idx)];
                set.images.push_back(sample.image);
                set.labels.push_back(sample.identity);
            }
    std::vector<const Image*> ptrs;
    ptrs.reserve(set.images.size());
    for (const auto& img : set.images) ptrs.push_back(&img);
    return train_identity_classifier(net, ptrs, set.labels, cfg);
}

}  // namespace posenorm
