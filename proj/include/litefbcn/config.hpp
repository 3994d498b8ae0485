#pragma once

#include "litefbcn/network.hpp"
#include "litefbcn/train.hpp"

namespace lfb {

// Resolved run configuration: JSON sections backbone / head / train / data /
// eval, every field optional with the training-protocol defaults. Unknown
// keys are rejected. The resolved form is echoed into each output directory
// as config.resolved.json.
struct RunConfig {
    BackboneSpec backbone = BackboneSpec::micro(32, 32, 1, {8, 16, 32, 64}, {1, 2, 2, 2});
    HeadConfig head;
    TrainConfig train;
    struct Data {
        std::string manifest;  // path to the dataset manifest CSV
    } data;
    struct Eval {
        std::size_t folds = 5;
        bool group_aware = false;
    } eval;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

// Throws ConfigError when `j` holds a key outside `allowed`.
void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where);

}  // namespace lfb
