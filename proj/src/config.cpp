#include "swt/config.hpp"

#include <json.hpp>

#include "swt/errors.hpp"

namespace swt {

using nlohmann::json;

void ModelConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || embed_dim <= 0 || window_size <= 0 || num_classes <= 0)
        throw ConfigError("config: all sizes must be positive");
    if (image_size % (patch_size * 8) != 0)
        throw ConfigError("config: image_size " + std::to_string(image_size) +
                          " must be divisible by patch_size*8 = " + std::to_string(patch_size * 8));
    for (int k = 0; k < 4; ++k) {
        if (depths[static_cast<size_t>(k)] < 1)
            throw ConfigError("config: stage depth must be at least 1");
        if (stage_side(k) % window_size != 0)
            throw ConfigError("config: stage " + std::to_string(k + 1) + " grid side " +
                              std::to_string(stage_side(k)) + " is not divisible by window_size " +
                              std::to_string(window_size));
        if (stage_dim(k) % heads[static_cast<size_t>(k)] != 0)
            throw ConfigError("config: heads " + std::to_string(heads[static_cast<size_t>(k)]) +
                              " do not divide stage dim " + std::to_string(stage_dim(k)));
    }
}

void TrainConfig::validate() const {
    if (steps < 0) throw ConfigError("config: steps must be non-negative");
    if (batch_size < 1) throw ConfigError("config: batch_size must be at least 1");
    if (learning_rate <= 0) throw ConfigError("config: learning_rate must be positive");
    if (weight_decay < 0) throw ConfigError("config: weight_decay must be non-negative");
}

const char* to_string(TrainMode mode) { return mode == TrainMode::V1 ? "v1" : "v2"; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "v1" || s == "V1") return TrainMode::V1;
    if (s == "v2" || s == "V2") return TrainMode::V2;
    throw ConfigError("config: unknown mode '" + s + "' (expected v1 or v2)");
}

namespace {

json model_to_json_obj(const ModelConfig& c) {
    return json{{"image_size", c.image_size},   {"patch_size", c.patch_size},
                {"embed_dim", c.embed_dim},     {"depths", c.depths},
                {"heads", c.heads},             {"window_size", c.window_size},
                {"num_classes", c.num_classes}, {"seed", c.seed}};
}

json train_to_json_obj(const TrainConfig& c) {
    return json{{"mode", to_string(c.mode)},
                {"steps", c.steps},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_eps", c.adam_eps},
                {"use_gsc", c.use_gsc},
                {"use_ccl", c.use_ccl},
                {"stop_rcam_grad", c.stop_rcam_grad},
                {"seed", c.seed}};
}

void reject_unknown(const json& j, const json& reference, const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!reference.contains(it.key()))
            throw ConfigError(std::string("config: unknown ") + what + " key '" + it.key() + "'");
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json_obj(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
    ModelConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown(j, model_to_json_obj(cfg), "model config");
    try {
        cfg.image_size = j.value("image_size", cfg.image_size);
        cfg.patch_size = j.value("patch_size", cfg.patch_size);
        cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
        cfg.depths = j.value("depths", cfg.depths);
        cfg.heads = j.value("heads", cfg.heads);
        cfg.window_size = j.value("window_size", cfg.window_size);
        cfg.num_classes = j.value("num_classes", cfg.num_classes);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field type: ") + e.what());
    }
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) { return train_to_json_obj(cfg).dump(2); }

TrainConfig train_config_from_json(const std::string& text) {
    TrainConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown(j, train_to_json_obj(cfg), "train config");
    try {
        if (j.contains("mode")) cfg.mode = train_mode_from_string(j["mode"].get<std::string>());
        cfg.steps = j.value("steps", cfg.steps);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
        cfg.use_gsc = j.value("use_gsc", cfg.use_gsc);
        cfg.use_ccl = j.value("use_ccl", cfg.use_ccl);
        cfg.stop_rcam_grad = j.value("stop_rcam_grad", cfg.stop_rcam_grad);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field type: ") + e.what());
    }
    return cfg;
}

namespace {

std::string fnv1a_hex(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string config_hash(const ModelConfig& model, const TrainConfig& train) {
    return fnv1a_hex(model_config_to_json(model) + "\n" + train_config_to_json(train));
}

std::string config_hash(const ModelConfig& model) { return fnv1a_hex(model_config_to_json(model)); }

}  // namespace swt
