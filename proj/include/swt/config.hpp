#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace swt {

// Encoder/model hyperparameters. Defaults are the desk-scale configuration
// the whole test suite is calibrated to.
struct ModelConfig {
    int image_size = 128;  // square input, pixels
    int patch_size = 4;
    int embed_dim = 16;
    std::array<int, 4> depths{2, 2, 2, 2};
    std::array<int, 4> heads{1, 2, 4, 8};
    int window_size = 4;
    int num_classes = 4;
    uint64_t seed = 42;

    int token_side() const { return image_size / patch_size; }         // N
    int stage_dim(int k) const { return embed_dim << k; }              // D * 2^k, k in 0..3
    int stage_side(int k) const { return token_side() >> k; }          // N / 2^k
    int final_dim() const { return stage_dim(3); }                     // 8D
    int final_side() const { return stage_side(3); }                   // P = N/8

    void validate() const;  // throws ConfigError on bad geometry

    bool operator==(const ModelConfig&) const = default;
};

enum class TrainMode { V1, V2 };

const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);  // throws ConfigError

struct TrainConfig {
    TrainMode mode = TrainMode::V2;
    int steps = 100;
    int batch_size = 8;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool use_gsc = true;   // ignored (off) in V1 mode
    bool use_ccl = true;   // ignored (off) in V1 mode
    bool stop_rcam_grad = false;  // treat R-CAM as a fixed target in GSC/CCL
    uint64_t seed = 42;

    void validate() const;
    bool gsc_enabled() const { return mode == TrainMode::V2 && use_gsc; }
    bool ccl_enabled() const { return mode == TrainMode::V2 && use_ccl; }
};

// JSON round-trip for config files; unknown keys are rejected so typos in a
// config file fail loudly.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// FNV-1a over the canonical JSON serialization, hex-encoded.
std::string config_hash(const ModelConfig& model, const TrainConfig& train);
std::string config_hash(const ModelConfig& model);

}  // namespace swt
