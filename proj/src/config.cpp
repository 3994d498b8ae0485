#include "litefbcn/config.hpp"

#include <algorithm>
#include <fstream>

namespace lfb {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

nlohmann::json RunConfig::to_json() const {
    return {{"backbone", backbone.to_json()},
            {"head", head.to_json()},
            {"train", train.to_json()},
            {"data", {{"manifest", data.manifest}}},
            {"eval", {{"folds", eval.folds}, {"group_aware", eval.group_aware}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    check_keys(j, {"backbone", "head", "train", "data", "eval"}, "config");
    RunConfig cfg;

    if (j.contains("backbone")) {
        const nlohmann::json& jb = j.at("backbone");
        check_keys(jb, {"input", "blocks", "widths", "strides"}, "config.backbone");
        if (jb.contains("widths") || jb.contains("strides")) {
            if (jb.contains("blocks")) {
                throw ConfigError("config.backbone: give either blocks or widths/strides");
            }
            std::vector<std::size_t> widths, strides;
            if (jb.contains("widths")) widths = jb.at("widths").get<std::vector<std::size_t>>();
            if (jb.contains("strides")) strides = jb.at("strides").get<std::vector<std::size_t>>();
            std::size_t h = 32, w = 32, c = 1;
            if (jb.contains("input")) {
                const auto& in = jb.at("input");
                if (!in.is_array() || in.size() != 3) {
                    throw ConfigError("config.backbone.input must be [H, W, C]");
                }
                h = in[0].get<std::size_t>();
                w = in[1].get<std::size_t>();
                c = in[2].get<std::size_t>();
            }
            cfg.backbone = BackboneSpec::micro(h, w, c, widths, strides);
        } else {
            cfg.backbone = BackboneSpec::from_json(jb);
        }
    }
    if (j.contains("head")) {
        check_keys(j.at("head"), {"variant", "gamma", "num_classes", "reducer_bias"},
                   "config.head");
        cfg.head = HeadConfig::from_json(j.at("head"));
    }
    if (j.contains("train")) {
        check_keys(j.at("train"),
                   {"lr0", "momentum", "nesterov", "plateau_patience", "lr_factor", "lr_floor",
                    "epochs", "l2_strength", "batch_size", "seed", "augment"},
                   "config.train");
        cfg.train = TrainConfig::from_json(j.at("train"));
    }
    if (j.contains("data")) {
        check_keys(j.at("data"), {"manifest"}, "config.data");
        if (j.at("data").contains("manifest")) {
            cfg.data.manifest = j.at("data").at("manifest").get<std::string>();
        }
    }
    if (j.contains("eval")) {
        check_keys(j.at("eval"), {"folds", "group_aware"}, "config.eval");
        if (j.at("eval").contains("folds")) {
            cfg.eval.folds = j.at("eval").at("folds").get<std::size_t>();
        }
        if (j.at("eval").contains("group_aware")) {
            cfg.eval.group_aware = j.at("eval").at("group_aware").get<bool>();
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace lfb
