#ifndef UNSHADOW_CONFIG_HPP
#define UNSHADOW_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "unshadow/augment.hpp"
#include "unshadow/dataset.hpp"
#include "unshadow/evaluation.hpp"
#include "unshadow/training.hpp"

namespace unshadow {

struct PipelineConfig {
    std::filesystem::path dataset_root;
    DatasetLayout dataset_layout = DatasetLayout::Istd;

    TrainConfig train;
    AugmentationConfig augment;
    EvalOptions eval;

    std::filesystem::path checkpoint_dir = "runs";
    std::filesystem::path vgg_weights; // falls back to UNSHADOW_VGG_WEIGHTS
    std::filesystem::path log_dir = "runs";

    /// Resolve the perceptual weights path from config or environment.
    std::filesystem::path resolve_vgg_weights() const;
};

/// Parse a YAML config file, apply `section.key=value` overrides, validate.
/// Throws ConfigError naming the offending key path.
PipelineConfig load_pipeline_config(const std::filesystem::path &path,
                                    const std::vector<std::string> &overrides = {});

/// Parse from a YAML string (used by tests and the python bindings).
PipelineConfig parse_pipeline_config(const std::string &yaml_text,
                                     const std::vector<std::string> &overrides = {});

/// A ready-to-edit config with all defaults spelled out.
std::string default_config_yaml();

} // namespace unshadow

#endif
