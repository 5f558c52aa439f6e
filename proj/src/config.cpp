#include "unshadow/config.hpp"

#include <cstdlib>
#include <fstream>

#include <yaml-cpp/yaml.h>

#include "unshadow/errors.hpp"

namespace unshadow {

namespace {

// Field reader that reports the full key path on any failure.
template <typename T>
T field(const YAML::Node &node, const std::string &path, const std::string &key, T fallback) {
    auto child = node[key];
    if (!child)
        return fallback;
    try {
        return child.as<T>();
    } catch (const YAML::Exception &) {
        throw ConfigError("invalid value for '" + path + "." + key + "'");
    }
}

void apply_override(YAML::Node root, const std::string &spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: '" + spec + "'");
    auto path = spec.substr(0, eq);
    auto value = spec.substr(eq + 1);

    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        if (dot == std::string::npos) {
            parts.push_back(path.substr(start));
            break;
        }
        parts.push_back(path.substr(start, dot - start));
        start = dot + 1;
    }
    if (parts.empty() || parts.front().empty())
        throw ConfigError("empty override path in '" + spec + "'");

    YAML::Node cursor = root;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = cursor[parts[i]];
        if (!next || !next.IsMap()) {
            cursor[parts[i]] = YAML::Node(YAML::NodeType::Map);
            next = cursor[parts[i]];
        }
        cursor = next;
    }
    cursor[parts.back()] = YAML::Load(value);
}

GeneratorSpec read_generator(const YAML::Node &node, const std::string &path,
                             GeneratorSpec defaults) {
    if (!node)
        return defaults;
    GeneratorSpec s = defaults;
    s.base_channels = field<int64_t>(node, path, "base_channels", s.base_channels);
    s.depth = field<int64_t>(node, path, "depth", s.depth);
    s.dense_blocks_per_stage =
        field<int64_t>(node, path, "dense_blocks_per_stage", s.dense_blocks_per_stage);
    s.skip_connections = field<bool>(node, path, "skip_connections", s.skip_connections);
    s.residual_output = field<bool>(node, path, "residual_output", s.residual_output);
    return s;
}

} // namespace

std::filesystem::path PipelineConfig::resolve_vgg_weights() const {
    if (!vgg_weights.empty())
        return vgg_weights;
    if (const char *env = std::getenv("UNSHADOW_VGG_WEIGHTS"))
        return env;
    return {};
}

PipelineConfig parse_pipeline_config(const std::string &yaml_text,
                                     const std::vector<std::string> &overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception &e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    if (!root.IsMap())
        throw ConfigError("config must be a YAML mapping");
    for (const auto &ov : overrides)
        apply_override(root, ov);

    PipelineConfig cfg;

    auto dataset = root["dataset"];
    if (dataset) {
        auto r = field<std::string>(dataset, "dataset", "root", "");
        cfg.dataset_root = r;
        auto layout = field<std::string>(dataset, "dataset", "layout", "istd");
        try {
            cfg.dataset_layout = parse_layout(layout);
        } catch (const ConfigError &) {
            throw ConfigError("invalid value for 'dataset.layout'");
        }
    }

    auto train = root["train"];
    if (train) {
        auto &t = cfg.train;
        auto mode = field<std::string>(train, "train", "mode", mode_name(t.mode));
        try {
            t.mode = parse_mode(mode);
        } catch (const ConfigError &) {
            throw ConfigError("invalid value for 'train.mode'");
        }
        t.epochs = field<int64_t>(train, "train", "epochs", t.epochs);
        t.lr_base = field<double>(train, "train", "lr_base", t.lr_base);
        t.decay_start_epoch = field<int64_t>(train, "train", "decay_start_epoch", t.decay_start_epoch);
        t.momentum = field<double>(train, "train", "momentum", t.momentum);
        t.batch_size = field<int64_t>(train, "train", "batch_size", t.batch_size);
        t.train_resolution = field<int64_t>(train, "train", "train_resolution", t.train_resolution);
        t.seed = field<uint64_t>(train, "train", "seed", t.seed);
        t.curriculum = field<bool>(train, "train", "curriculum", t.curriculum);
        t.inpaint = field<bool>(train, "train", "inpaint", t.inpaint);
        t.augment = field<bool>(train, "train", "augment", t.augment);
        t.deterministic = field<bool>(train, "train", "deterministic", t.deterministic);
        t.checkpoint_every = field<int64_t>(train, "train", "checkpoint_every", t.checkpoint_every);
        t.nce_locations = field<int64_t>(train, "train", "nce_locations", t.nce_locations);
        t.tau = field<double>(train, "train", "tau", t.tau);
        t.crop_size = field<int64_t>(train, "train", "crop_size", t.crop_size);
        t.mu_supervised = field<double>(train, "train", "mu_supervised", t.mu_supervised);
        t.generator = read_generator(train["generator"], "train.generator", t.generator);
        t.refiner = read_generator(train["refiner"], "train.refiner", t.refiner);
        if (auto critic = train["critic"]) {
            t.critic.num_layers =
                field<int64_t>(critic, "train.critic", "num_layers", t.critic.num_layers);
            t.critic.base_channels =
                field<int64_t>(critic, "train.critic", "base_channels", t.critic.base_channels);
        }
        if (auto w = train["weights"]) {
            t.weights.nce = field<double>(w, "train.weights", "nce", t.weights.nce);
            t.weights.identity = field<double>(w, "train.weights", "identity", t.weights.identity);
            t.weights.critic_distill =
                field<double>(w, "train.weights", "critic_distill", t.weights.critic_distill);
            t.weights.adversarial =
                field<double>(w, "train.weights", "adversarial", t.weights.adversarial);
            t.weights.illumination =
                field<double>(w, "train.weights", "illumination", t.weights.illumination);
            t.weights.refine_nce =
                field<double>(w, "train.weights", "refine_nce", t.weights.refine_nce);
            t.weights.refine_perceptual =
                field<double>(w, "train.weights", "refine_perceptual", t.weights.refine_perceptual);
            t.weights.supervised =
                field<double>(w, "train.weights", "supervised", t.weights.supervised);
        }
        if (auto sw = train["supervised_weights"]) {
            t.supervised_weights.lambda_pixel =
                field<double>(sw, "train.supervised_weights", "pixel",
                              t.supervised_weights.lambda_pixel);
            t.supervised_weights.lambda_color =
                field<double>(sw, "train.supervised_weights", "color",
                              t.supervised_weights.lambda_color);
            t.supervised_weights.lambda_style =
                field<double>(sw, "train.supervised_weights", "style",
                              t.supervised_weights.lambda_style);
        }
    }

    if (auto aug = root["augment"]) {
        auto &a = cfg.augment;
        a.flip_prob = field<double>(aug, "augment", "flip_prob", a.flip_prob);
        a.scale_range[0] = field<double>(aug, "augment", "scale_min", a.scale_range[0]);
        a.scale_range[1] = field<double>(aug, "augment", "scale_max", a.scale_range[1]);
        a.noise_sigma = field<double>(aug, "augment", "noise_sigma", a.noise_sigma);
        a.blur_sigma = field<double>(aug, "augment", "blur_sigma", a.blur_sigma);
        a.contrast_range[0] = field<double>(aug, "augment", "contrast_min", a.contrast_range[0]);
        a.contrast_range[1] = field<double>(aug, "augment", "contrast_max", a.contrast_range[1]);
        a.inpaint_enabled = field<bool>(aug, "augment", "inpaint_enabled", a.inpaint_enabled);
        a.mu = field<double>(aug, "augment", "mu", a.mu);
    }

    if (auto ev = root["eval"]) {
        cfg.eval.resize_to = field<int64_t>(ev, "eval", "resize_to", cfg.eval.resize_to);
        cfg.eval.rmse_literal = field<bool>(ev, "eval", "rmse_literal", cfg.eval.rmse_literal);
    }

    if (auto paths = root["paths"]) {
        cfg.checkpoint_dir =
            field<std::string>(paths, "paths", "checkpoint_dir", cfg.checkpoint_dir.string());
        cfg.vgg_weights = field<std::string>(paths, "paths", "vgg_weights", "");
        cfg.log_dir = field<std::string>(paths, "paths", "log_dir", cfg.log_dir.string());
    }

    try {
        cfg.train.validate();
        cfg.augment.validate();
    } catch (const ConfigError &e) {
        throw ConfigError(e.what());
    }
    if (cfg.eval.resize_to < 16)
        throw ConfigError("invalid value for 'eval.resize_to'");
    return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path,
                                    const std::vector<std::string> &overrides) {
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_pipeline_config(text, overrides);
}

std::string default_config_yaml() {
    return R"(dataset:
  root: ""           # dataset root directory
  layout: istd       # istd | istd+ | srd

train:
  mode: weak         # weak | supervised
  epochs: 200
  lr_base: 1.0e-4
  decay_start_epoch: 75
  momentum: 0.9
  batch_size: 1
  train_resolution: 256
  seed: 0
  curriculum: true
  inpaint: true
  augment: true
  deterministic: false
  checkpoint_every: 25
  nce_locations: 256
  tau: 0.07
  crop_size: 64
  mu_supervised: 0.0
  generator: { base_channels: 64, depth: 4, dense_blocks_per_stage: 2, skip_connections: true }
  refiner:   { base_channels: 64, depth: 4, dense_blocks_per_stage: 2, skip_connections: true, residual_output: true }
  critic:    { num_layers: 4, base_channels: 64 }
  weights:
    nce: 1.0
    identity: 1.0
    critic_distill: 1.0
    adversarial: 1.0
    illumination: 1.0
    refine_nce: 1.0
    refine_perceptual: 1.0
    supervised: 1.0
  supervised_weights: { pixel: 1.0, color: 1.0, style: 1.0e4 }

augment:
  flip_prob: 0.3
  scale_min: 0.8
  scale_max: 1.2
  noise_sigma: 0.02
  blur_sigma: 1.5
  contrast_min: 0.75
  contrast_max: 1.25
  inpaint_enabled: true
  mu: 75.0

eval:
  resize_to: 256
  rmse_literal: false

paths:
  checkpoint_dir: runs
  vgg_weights: ""    # or set UNSHADOW_VGG_WEIGHTS
  log_dir: runs
)";
}

} // namespace unshadow
