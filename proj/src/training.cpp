#include "unshadow/training.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unshadow/errors.hpp"
#include "unshadow/tensor_archive.hpp"

namespace unshadow {

using nlohmann::json;

TrainMode parse_mode(const std::string &name) {
    if (name == "weak")
        return TrainMode::Weak;
    if (name == "supervised")
        return TrainMode::Supervised;
    throw ConfigError("unknown train mode '" + name + "' (expected weak or supervised)");
}

std::string mode_name(TrainMode mode) {
    return mode == TrainMode::Weak ? "weak" : "supervised";
}

void TrainConfig::validate() const {
    if (epochs < 1)
        throw ConfigError("train.epochs must be >= 1");
    if (decay_start_epoch < 0 || decay_start_epoch >= epochs)
        throw ConfigError("train.decay_start_epoch must lie in [0, epochs)");
    if (batch_size < 1)
        throw ConfigError("train.batch_size must be >= 1");
    if (train_resolution < 16)
        throw ConfigError("train.train_resolution must be >= 16");
    if (lr_base <= 0.0)
        throw ConfigError("train.lr_base must be positive");
    if (tau <= 0.0)
        throw ConfigError("train.tau must be positive");
    if (nce_locations < 1)
        throw ConfigError("train.nce_locations must be >= 1");
    generator.validate();
    refiner.validate();
    supervised_weights.validate();
}

std::string TrainConfig::canonical() const {
    json j;
    j["mode"] = mode_name(mode);
    j["epochs"] = epochs;
    j["lr_base"] = lr_base;
    j["decay_start_epoch"] = decay_start_epoch;
    j["momentum"] = momentum;
    j["batch_size"] = batch_size;
    j["train_resolution"] = train_resolution;
    j["seed"] = seed;
    j["curriculum"] = curriculum;
    j["inpaint"] = inpaint;
    j["augment"] = augment;
    j["deterministic"] = deterministic;
    j["nce_locations"] = nce_locations;
    j["tau"] = tau;
    j["crop_size"] = crop_size;
    j["mu_supervised"] = mu_supervised;
    j["generator"] = {{"base_channels", generator.base_channels},
                      {"depth", generator.depth},
                      {"dense_blocks_per_stage", generator.dense_blocks_per_stage},
                      {"skip_connections", generator.skip_connections}};
    j["refiner"] = {{"base_channels", refiner.base_channels},
                    {"depth", refiner.depth},
                    {"dense_blocks_per_stage", refiner.dense_blocks_per_stage},
                    {"skip_connections", refiner.skip_connections},
                    {"residual_output", refiner.residual_output}};
    j["critic"] = {{"num_layers", critic.num_layers}, {"base_channels", critic.base_channels}};
    j["weights"] = {{"nce", weights.nce},
                    {"identity", weights.identity},
                    {"critic_distill", weights.critic_distill},
                    {"adversarial", weights.adversarial},
                    {"illumination", weights.illumination},
                    {"refine_nce", weights.refine_nce},
                    {"refine_perceptual", weights.refine_perceptual},
                    {"supervised", weights.supervised}};
    j["supervised_weights"] = {{"pixel", supervised_weights.lambda_pixel},
                               {"color", supervised_weights.lambda_color},
                               {"style", supervised_weights.lambda_style}};
    return j.dump();
}

uint64_t TrainConfig::config_hash() const {
    // FNV-1a 64.
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double lr_schedule(double epoch, const TrainConfig &cfg) {
    if (epoch < 0.0 || epoch > static_cast<double>(cfg.epochs))
        throw ContractError("lr_schedule: epoch outside [0, epochs]");
    if (epoch < static_cast<double>(cfg.decay_start_epoch))
        return cfg.lr_base;
    double span = static_cast<double>(cfg.epochs - cfg.decay_start_epoch);
    return cfg.lr_base * (static_cast<double>(cfg.epochs) - epoch) / span;
}

std::vector<std::vector<int64_t>> curriculum_order_scored(size_t sample_count,
                                                          const std::vector<double> &scores,
                                                          bool enabled, const TrainConfig &cfg) {
    if (sample_count == 0)
        throw ContractError("curriculum_order: empty split");
    if (enabled && scores.size() != sample_count)
        throw ContractError("curriculum_order: score count mismatch");

    Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<int64_t> ranked(sample_count);
    for (size_t i = 0; i < sample_count; ++i)
        ranked[i] = static_cast<int64_t>(i);
    if (enabled) {
        std::stable_sort(ranked.begin(), ranked.end(), [&](int64_t a, int64_t b) {
            return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
        });
    }

    std::vector<std::vector<int64_t>> orders;
    orders.reserve(static_cast<size_t>(cfg.epochs));
    for (int64_t e = 0; e < cfg.epochs; ++e) {
        std::vector<int64_t> epoch_order;
        if (enabled) {
            double q = std::min(1.0, 0.3 + 0.7 * static_cast<double>(e) /
                                               static_cast<double>(std::max<int64_t>(
                                                   cfg.decay_start_epoch, 1)));
            auto exposed = static_cast<size_t>(
                std::clamp<int64_t>(static_cast<int64_t>(std::ceil(q * sample_count)), 1,
                                    static_cast<int64_t>(sample_count)));
            epoch_order.assign(ranked.begin(), ranked.begin() + exposed);
        } else {
            epoch_order = ranked;
        }
        order_rng.shuffle(epoch_order);
        orders.push_back(std::move(epoch_order));
    }
    return orders;
}

std::vector<std::vector<int64_t>> curriculum_order(const DatasetSplit &split, bool enabled,
                                                   const TrainConfig &cfg) {
    std::vector<double> scores;
    if (enabled) {
        scores.reserve(split.size());
        for (const auto &rec : split.samples)
            scores.push_back(curriculum_score(rec.materialize()));
    }
    return curriculum_order_scored(split.size(), scores, enabled, cfg);
}

namespace {

std::vector<torch::Tensor> collect_params(std::initializer_list<torch::nn::Module *> modules) {
    std::vector<torch::Tensor> out;
    for (auto *m : modules)
        for (auto &p : m->parameters())
            out.push_back(p);
    return out;
}

} // namespace

TrainState init_state(const TrainConfig &cfg) {
    cfg.validate();
    torch::manual_seed(cfg.seed);
    if (cfg.deterministic)
        torch::set_num_threads(1);

    TrainState state;
    state.deshadower = DenseUnetGenerator(cfg.generator);
    state.refiner = DenseUnetGenerator(cfg.refiner);
    state.deshadow_heads = ProjectionHeads(state.deshadower->tap_channels());
    state.refine_heads = ProjectionHeads(state.refiner->tap_channels());

    std::vector<torch::Tensor> gen_params;
    if (cfg.mode == TrainMode::Weak) {
        state.illumination = DenseUnetGenerator(cfg.generator);
        state.critic = PatchCritic(cfg.critic);
        gen_params = collect_params({state.deshadower.get(), state.illumination.get(),
                                     state.deshadow_heads.get()});
        state.opt_critic = SgdMomentum(collect_params({state.critic.get()}), cfg.lr_base,
                                       cfg.momentum);
    } else {
        gen_params = collect_params({state.deshadower.get(), state.deshadow_heads.get()});
    }
    state.opt_gen = SgdMomentum(std::move(gen_params), cfg.lr_base, cfg.momentum);
    state.opt_refine = SgdMomentum(collect_params({state.refiner.get(), state.refine_heads.get()}),
                                   cfg.lr_base, cfg.momentum);
    state.rng = Rng(cfg.seed + 0x51ED270B);
    return state;
}

namespace {

void check_finite(const std::map<std::string, double> &terms, const std::string &sample_id) {
    for (const auto &[name, value] : terms) {
        if (!std::isfinite(value)) {
            std::ostringstream os;
            os << "non-finite loss '" << name << "' on sample '" << sample_id << "':";
            for (const auto &[n, v] : terms)
                os << " " << n << "=" << v;
            throw NumericError(os.str());
        }
    }
}

int64_t effective_crop(const TrainConfig &cfg, int64_t res) {
    int64_t crop = std::min(cfg.crop_size, res / 2);
    crop = std::max(crop, cfg.critic.min_input_size());
    return crop <= res ? crop : -1;
}

RegionTensor region_from_net(const torch::Tensor &nchw, const ShadowMask &mask) {
    return RegionTensor(nchw.squeeze(0).permute({1, 2, 0}), mask);
}

// Critic update: I_G output is the fake, non-shadow crops plus the
// brightness-variant family are the real diet.
void critic_substep(TrainState &state, const std::vector<ShadowTriplet> &batch,
                    const TrainConfig &cfg, const AugmentationConfig &aug,
                    std::map<std::string, double> &terms) {
    state.opt_critic.zero_grad();
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto &t : batch) {
        auto region = extract_region(t.shadow, t.mask);
        torch::Tensor fake_nchw;
        {
            torch::NoGradGuard ng;
            fake_nchw = state.illumination->forward(region.nchw());
        }
        auto fake = region_from_net(fake_nchw, t.mask);

        std::vector<torch::Tensor> real_scores;
        int64_t crop = effective_crop(cfg, t.shadow.height());
        if (crop > 0) {
            try {
                auto real_crop = sample_nonshadow_crop(t, crop, crop, state.rng);
                real_scores.push_back(state.critic->forward(real_crop.nchw()));
            } catch (const SamplingError &) {
                std::cerr << "[unshadow] critic: no non-shadow crop for '" << t.id << "'\n";
            }
        }
        for (const auto &variant : illumination_variants(region, aug.mu))
            real_scores.push_back(state.critic->forward(variant.nchw()));

        auto loss = losses::lsgan_critic_loss(state.critic->forward(fake.nchw()), real_scores) *
                    cfg.weights.adversarial * inv;
        loss.backward();
        total += loss.item<double>();
    }
    state.opt_critic.step();
    terms["critic_adv"] = total;
}

// DeShadower + Illumination update: layer-wise NCE against bright positives,
// identity on a shadow-free crop, critic distillation, the generator half of
// the adversarial objective and the L1 illumination tie.
void generator_substep_weak(TrainState &state, const std::vector<ShadowTriplet> &batch,
                            const TrainConfig &cfg, std::map<std::string, double> &terms) {
    state.opt_gen.zero_grad();
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto &t : batch) {
        auto region = extract_region(t.shadow, t.mask);
        auto bright_nchw = state.illumination->forward(region.nchw());
        auto bright = region_from_net(bright_nchw, t.mask);

        auto [removed_nchw, shadow_feats] = state.deshadower->forward_with_features(region.nchw());
        auto removed = region_from_net(removed_nchw, t.mask);

        auto locations = sample_feature_locations(state.rng, cfg.nce_locations);
        auto f = state.deshadow_heads->project(state.deshadower->encode(removed.nchw()), locations);
        auto b = state.deshadow_heads->project(state.deshadower->encode(bright.nchw()), locations);
        auto s = state.deshadow_heads->project(shadow_feats, locations);

        auto loss = cfg.weights.nce * losses::layerwise_nce(f, b, s, cfg.tau);
        terms["nce"] += loss.item<double>() * inv;

        int64_t crop = effective_crop(cfg, t.shadow.height());
        if (crop > 0) {
            try {
                auto sample = sample_nonshadow_crop(t, crop, crop, state.rng);
                auto identity = cfg.weights.identity * losses::identity_loss(state.deshadower, sample);
                terms["identity"] += identity.item<double>() * inv;
                loss = loss + identity;
            } catch (const SamplingError &) {
                std::cerr << "[unshadow] identity: no non-shadow crop for '" << t.id << "'\n";
            }
        }

        auto distill =
            cfg.weights.critic_distill * losses::critic_distill_loss(state.critic, removed);
        auto gen_adv =
            cfg.weights.adversarial * losses::lsgan_generator_loss(state.critic->forward(bright.nchw()));
        auto illum = cfg.weights.illumination * losses::illumination_loss(removed, bright);
        terms["critic_distill"] += distill.item<double>() * inv;
        terms["gen_adv"] += gen_adv.item<double>() * inv;
        terms["illumination"] += illum.item<double>() * inv;

        ((loss + distill + gen_adv + illum) * inv).backward();
    }
    state.opt_gen.step();
}

// Refinement update: contrastive pull toward augmented non-shadow content and
// away from the shadowed input, plus the layer-selective perceptual anchor.
void refinement_substep(TrainState &state, const std::vector<ShadowTriplet> &batch,
                        const TrainConfig &cfg, Vgg16Features &backbone,
                        std::map<std::string, double> &terms,
                        const std::vector<ImageTensor> *gts = nullptr) {
    state.opt_refine.zero_grad();
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto &t = batch[i];
        auto region = extract_region(t.shadow, t.mask);
        torch::Tensor removed_nchw;
        {
            torch::NoGradGuard ng;
            removed_nchw = state.deshadower->forward(region.nchw());
        }
        auto removed = region_from_net(removed_nchw.detach(), t.mask);
        auto embedded = embed_region(t.shadow, t.mask, removed);

        auto [refined_nchw, input_feats] = state.refiner->forward_with_features(embedded.nchw());
        (void)input_feats;

        auto positive_img = refinement_positive(embedded, t.mask, state.rng);
        auto locations = sample_feature_locations(state.rng, cfg.nce_locations);
        auto fq = state.refine_heads->project(state.refiner->encode(refined_nchw), locations);
        auto fp = state.refine_heads->project(state.refiner->encode(positive_img.nchw()), locations);
        auto fn = state.refine_heads->project(state.refiner->encode(t.shadow.nchw()), locations);

        auto nce = cfg.weights.refine_nce * losses::refinement_nce(fq, fp, fn, cfg.tau);
        auto perceptual = cfg.weights.refine_perceptual *
                          losses::refinement_perceptual_nchw(refined_nchw, t.shadow.nchw(), backbone);
        terms["refine_nce"] += nce.item<double>() * inv;
        terms["refine_perceptual"] += perceptual.item<double>() * inv;
        auto loss = nce + perceptual;

        if (gts) {
            auto sup = cfg.weights.supervised *
                       losses::supervised_total_nchw(refined_nchw, (*gts)[i].nchw(), backbone,
                                                     cfg.supervised_weights);
            terms["supervised"] += sup.item<double>() * inv;
            loss = loss + sup;
        }
        (loss * inv).backward();
    }
    state.opt_refine.step();
}

// DeShadower update in supervised mode: the contrastive positives come from
// brightness-jittered crops of the ground truth instead of I_G.
void generator_substep_supervised(TrainState &state, const std::vector<ShadowTriplet> &batch,
                                  const TrainConfig &cfg, std::map<std::string, double> &terms) {
    state.opt_gen.zero_grad();
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto &t : batch) {
        auto region = extract_region(t.shadow, t.mask);
        auto gt_region = extract_region(*t.shadow_free, t.mask);
        auto variants = brightness_variants(gt_region, cfg.mu_supervised);
        const auto &positive = variants[static_cast<size_t>(state.rng.uniform_int(0, 2))];

        auto [removed_nchw, shadow_feats] = state.deshadower->forward_with_features(region.nchw());
        auto removed = region_from_net(removed_nchw, t.mask);

        auto locations = sample_feature_locations(state.rng, cfg.nce_locations);
        auto f = state.deshadow_heads->project(state.deshadower->encode(removed.nchw()), locations);
        auto b = state.deshadow_heads->project(state.deshadower->encode(positive.nchw()), locations);
        auto s = state.deshadow_heads->project(shadow_feats, locations);

        auto loss = cfg.weights.nce * losses::layerwise_nce(f, b, s, cfg.tau);
        terms["nce"] += loss.item<double>() * inv;
        (loss * inv).backward();
    }
    state.opt_gen.step();
}

std::optional<std::map<std::string, double>> step_batch(TrainState &state,
                                                        const std::vector<ShadowTriplet> &batch,
                                                        const TrainConfig &cfg,
                                                        const AugmentationConfig &aug,
                                                        Vgg16Features &backbone) {
    std::vector<ShadowTriplet> usable;
    std::vector<ImageTensor> gts;
    for (const auto &t : batch) {
        if (cfg.mode == TrainMode::Supervised && !t.shadow_free)
            throw ContractError("supervised training requires a shadow-free image ('" + t.id + "')");
        if (t.mask.coverage() <= 0.0) {
            std::cerr << "[unshadow] step skipped: zero-shadow mask on '" << t.id << "'\n";
            continue;
        }
        usable.push_back(t);
        if (cfg.mode == TrainMode::Supervised)
            gts.push_back(*t.shadow_free);
    }
    if (usable.empty())
        return std::nullopt;

    std::map<std::string, double> terms;
    if (cfg.mode == TrainMode::Weak) {
        critic_substep(state, usable, cfg, aug, terms);
        generator_substep_weak(state, usable, cfg, terms);
        refinement_substep(state, usable, cfg, backbone, terms, nullptr);
    } else {
        generator_substep_supervised(state, usable, cfg, terms);
        refinement_substep(state, usable, cfg, backbone, terms, &gts);
    }
    check_finite(terms, usable.front().id);
    return terms;
}

} // namespace

std::optional<std::map<std::string, double>> train_step_weak(TrainState &state,
                                                             const ShadowTriplet &triplet,
                                                             const TrainConfig &cfg,
                                                             const AugmentationConfig &aug,
                                                             Vgg16Features &backbone) {
    if (cfg.mode != TrainMode::Weak)
        throw ContractError("train_step_weak: config mode is not weak");
    auto terms = step_batch(state, {triplet}, cfg, aug, backbone);
    if (terms)
        ++state.step;
    return terms;
}

std::optional<std::map<std::string, double>> train_step_supervised(TrainState &state,
                                                                   const ShadowTriplet &triplet,
                                                                   const TrainConfig &cfg,
                                                                   Vgg16Features &backbone) {
    if (cfg.mode != TrainMode::Supervised)
        throw ContractError("train_step_supervised: config mode is not supervised");
    auto terms = step_batch(state, {triplet}, cfg, AugmentationConfig{}, backbone);
    if (terms)
        ++state.step;
    return terms;
}

namespace {

json spec_to_json(const GeneratorSpec &s) {
    return {{"base_channels", s.base_channels},
            {"depth", s.depth},
            {"dense_blocks_per_stage", s.dense_blocks_per_stage},
            {"skip_connections", s.skip_connections},
            {"residual_output", s.residual_output}};
}

GeneratorSpec spec_from_json(const json &j) {
    GeneratorSpec s;
    s.base_channels = j.at("base_channels").get<int64_t>();
    s.depth = j.at("depth").get<int64_t>();
    s.dense_blocks_per_stage = j.at("dense_blocks_per_stage").get<int64_t>();
    s.skip_connections = j.at("skip_connections").get<bool>();
    s.residual_output = j.at("residual_output").get<bool>();
    return s;
}

void add_module_tensors(TensorArchive &ar, const std::string &prefix, const torch::nn::Module &m) {
    for (const auto &p : m.named_parameters())
        ar.add(prefix + ".param." + p.key(), p.value());
    for (const auto &b : m.named_buffers())
        ar.add(prefix + ".buffer." + b.key(), b.value());
}

void load_module_tensors(const TensorArchive &ar, const std::string &prefix,
                         torch::nn::Module &m) {
    torch::NoGradGuard ng;
    for (auto p : m.named_parameters())
        p.value().copy_(ar.get(prefix + ".param." + p.key()));
    for (auto b : m.named_buffers())
        b.value().copy_(ar.get(prefix + ".buffer." + b.key()));
}

void add_optimizer_tensors(TensorArchive &ar, const std::string &prefix, const SgdMomentum &opt) {
    const auto &bufs = opt.buffers();
    for (size_t i = 0; i < bufs.size(); ++i)
        ar.add(prefix + ".buf." + std::to_string(i), bufs[i]);
}

void load_optimizer_tensors(const TensorArchive &ar, const std::string &prefix, SgdMomentum &opt) {
    torch::NoGradGuard ng;
    auto &bufs = opt.buffers();
    for (size_t i = 0; i < bufs.size(); ++i)
        bufs[i].copy_(ar.get(prefix + ".buf." + std::to_string(i)));
}

} // namespace

void save_checkpoint(const TrainState &state, const TrainConfig &cfg,
                     const std::filesystem::path &path) {
    TensorArchive ar;
    json meta;
    meta["kind"] = "unshadow_checkpoint";
    meta["mode"] = mode_name(cfg.mode);
    meta["epoch"] = state.epoch;
    meta["step"] = state.step;
    meta["config_hash"] = cfg.config_hash();
    meta["rng"] = state.rng.serialize();
    meta["generator_spec"] = spec_to_json(state.deshadower->spec);
    meta["refiner_spec"] = spec_to_json(state.refiner->spec);
    meta["critic_spec"] = cfg.mode == TrainMode::Weak
                              ? json{{"num_layers", state.critic->spec.num_layers},
                                     {"base_channels", state.critic->spec.base_channels}}
                              : json();
    ar.metadata = meta.dump();

    add_module_tensors(ar, "deshadower", *state.deshadower);
    add_module_tensors(ar, "refiner", *state.refiner);
    add_module_tensors(ar, "deshadow_heads", *state.deshadow_heads);
    add_module_tensors(ar, "refine_heads", *state.refine_heads);
    if (cfg.mode == TrainMode::Weak) {
        add_module_tensors(ar, "illumination", *state.illumination);
        add_module_tensors(ar, "critic", *state.critic);
        add_optimizer_tensors(ar, "opt_critic", state.opt_critic);
    }
    add_optimizer_tensors(ar, "opt_gen", state.opt_gen);
    add_optimizer_tensors(ar, "opt_refine", state.opt_refine);

    auto tmp = path;
    tmp += ".tmp";
    ar.save(tmp);
    std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path &path, const TrainConfig &cfg) {
    auto ar = TensorArchive::load(path);
    auto meta = json::parse(ar.metadata);
    if (meta.value("kind", "") != "unshadow_checkpoint")
        throw IoError("not a training checkpoint: " + path.string());
    if (parse_mode(meta.at("mode").get<std::string>()) != cfg.mode)
        throw ConfigError("checkpoint mode differs from config mode");
    if (meta.at("config_hash").get<uint64_t>() != cfg.config_hash())
        std::cerr << "[unshadow] warning: resuming with a different config than the checkpoint\n";

    auto state = init_state(cfg);
    state.epoch = meta.at("epoch").get<int64_t>();
    state.step = meta.at("step").get<int64_t>();
    state.rng.deserialize(meta.at("rng").get<std::string>());

    load_module_tensors(ar, "deshadower", *state.deshadower);
    load_module_tensors(ar, "refiner", *state.refiner);
    load_module_tensors(ar, "deshadow_heads", *state.deshadow_heads);
    load_module_tensors(ar, "refine_heads", *state.refine_heads);
    if (cfg.mode == TrainMode::Weak) {
        load_module_tensors(ar, "illumination", *state.illumination);
        load_module_tensors(ar, "critic", *state.critic);
        load_optimizer_tensors(ar, "opt_critic", state.opt_critic);
    }
    load_optimizer_tensors(ar, "opt_gen", state.opt_gen);
    load_optimizer_tensors(ar, "opt_refine", state.opt_refine);
    return state;
}

InferencePipeline::Stages InferencePipeline::run_stages(const ShadowTriplet &triplet) {
    torch::NoGradGuard ng;
    Stages st;
    st.shadow_region = extract_region(triplet.shadow, triplet.mask);
    auto removed_nchw = deshadower->forward(st.shadow_region.nchw());
    st.removed = RegionTensor(removed_nchw.squeeze(0).permute({1, 2, 0}), triplet.mask);
    st.embedded = embed_region(triplet.shadow, triplet.mask, st.removed);
    st.refined = ImageTensor::from_nchw(refiner->forward(st.embedded.nchw()), /*clip=*/true);
    return st;
}

ImageTensor InferencePipeline::run(const ShadowTriplet &triplet, bool bypass_refine) {
    torch::NoGradGuard ng;
    auto region = extract_region(triplet.shadow, triplet.mask);
    auto removed_nchw = deshadower->forward(region.nchw());
    auto removed = RegionTensor(removed_nchw.squeeze(0).permute({1, 2, 0}), triplet.mask);
    auto embedded = embed_region(triplet.shadow, triplet.mask, removed);
    if (bypass_refine)
        return embedded;
    return ImageTensor::from_nchw(refiner->forward(embedded.nchw()), /*clip=*/true);
}

InferencePipeline InferencePipeline::from_checkpoint(const std::filesystem::path &path) {
    auto ar = TensorArchive::load(path);
    auto meta = json::parse(ar.metadata);
    if (meta.value("kind", "") != "unshadow_checkpoint")
        throw IoError("not a training checkpoint: " + path.string());
    InferencePipeline p;
    p.deshadower = DenseUnetGenerator(spec_from_json(meta.at("generator_spec")));
    p.refiner = DenseUnetGenerator(spec_from_json(meta.at("refiner_spec")));
    load_module_tensors(ar, "deshadower", *p.deshadower);
    load_module_tensors(ar, "refiner", *p.refiner);
    p.deshadower->eval();
    p.refiner->eval();
    return p;
}

InferencePipeline InferencePipeline::from_state(const TrainState &state) {
    InferencePipeline p;
    p.deshadower = state.deshadower;
    p.refiner = state.refiner;
    return p;
}

namespace {

ShadowTriplet prepare_sample(const ShadowTriplet &t, const TrainConfig &cfg,
                             const AugmentationConfig &aug, const MaskBank &bank, Rng &rng) {
    ShadowTriplet out = t;
    const auto res = cfg.train_resolution;
    if (out.shadow.height() != res || out.shadow.width() != res) {
        out.shadow = resize(out.shadow, res, res);
        out.mask = resize_mask(out.mask, res, res);
        if (out.shadow_free)
            out.shadow_free = resize(*out.shadow_free, res, res);
    }
    if (cfg.augment)
        out = standard_augment(out, aug, rng);
    if (cfg.inpaint && !bank.empty() && out.mask.coverage() > 0.0)
        out = inpaint_shadow(out, bank, rng);
    return out;
}

const std::vector<std::string> &csv_columns(TrainMode mode) {
    static const std::vector<std::string> weak = {"critic_adv",      "nce",
                                                  "identity",        "critic_distill",
                                                  "gen_adv",         "illumination",
                                                  "refine_nce",      "refine_perceptual"};
    static const std::vector<std::string> sup = {"nce", "refine_nce", "refine_perceptual",
                                                 "supervised"};
    return mode == TrainMode::Weak ? weak : sup;
}

} // namespace

std::filesystem::path fit(const TrainConfig &cfg, const DatasetSplit &split,
                          Vgg16Features &backbone, const FitOptions &opts) {
    cfg.validate();
    opts.augmentation.validate();
    if (cfg.mode == TrainMode::Weak && opts.augmentation.mu < 5.0)
        throw ConfigError("weak mode requires augment.mu >= 5");
    if (split.size() == 0)
        throw ContractError("fit: empty training split");
    std::filesystem::create_directories(opts.out_dir);

    TrainState state = opts.resume ? load_checkpoint(*opts.resume, cfg) : init_state(cfg);
    if (cfg.deterministic)
        torch::set_num_threads(1);

    auto orders = curriculum_order(split, cfg.curriculum, cfg);
    MaskBank bank;
    if (cfg.inpaint)
        bank = MaskBank::from_split(split);

    auto csv_path = opts.out_dir / "losses.csv";
    const bool fresh_csv = !opts.resume || !std::filesystem::exists(csv_path);
    std::ofstream csv(csv_path, fresh_csv ? std::ios::trunc : std::ios::app);
    if (!csv)
        throw IoError("cannot write loss log: " + csv_path.string());
    const auto &columns = csv_columns(cfg.mode);
    if (fresh_csv) {
        csv << "epoch,lr";
        for (const auto &c : columns)
            csv << "," << c;
        csv << "\n";
    }

    for (int64_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(static_cast<double>(epoch), cfg);
        state.opt_gen.set_lr(lr);
        state.opt_refine.set_lr(lr);
        state.opt_critic.set_lr(lr);

        std::map<std::string, double> sums;
        int64_t steps_this_epoch = 0;

        TripletStream stream(split, orders[static_cast<size_t>(epoch)],
                             cfg.deterministic ? 0 : opts.decode_workers);
        std::vector<ShadowTriplet> batch;
        auto flush = [&] {
            if (batch.empty())
                return;
            auto terms = step_batch(state, batch, cfg, opts.augmentation, backbone);
            batch.clear();
            if (!terms)
                return;
            ++state.step;
            ++steps_this_epoch;
            for (const auto &[k, v] : *terms)
                sums[k] += v;
        };
        while (auto triplet = stream.next()) {
            batch.push_back(prepare_sample(*triplet, cfg, opts.augmentation, bank, state.rng));
            if (static_cast<int64_t>(batch.size()) == cfg.batch_size)
                flush();
        }
        flush();

        state.epoch = epoch + 1;
        EpochLossRow row;
        row.epoch = epoch;
        row.lr = lr;
        csv << epoch << "," << lr;
        for (const auto &c : columns) {
            double mean = steps_this_epoch > 0 ? sums[c] / static_cast<double>(steps_this_epoch)
                                               : 0.0;
            row.terms[c] = mean;
            csv << "," << mean;
        }
        csv << "\n";
        csv.flush();
        state.history.push_back(std::move(row));
        std::cerr << "[unshadow] epoch " << epoch << " done (lr " << lr << ", " << steps_this_epoch
                  << " steps)\n";

        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
            epoch + 1 < cfg.epochs)
            save_checkpoint(state, cfg,
                            opts.out_dir / ("checkpoint_epoch" + std::to_string(epoch + 1) +
                                            ".usnt"));
    }

    auto final_path = opts.out_dir / "checkpoint_final.usnt";
    save_checkpoint(state, cfg, final_path);
    return final_path;
}

} // namespace unshadow
