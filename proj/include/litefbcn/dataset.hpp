#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "litefbcn/tensor.hpp"

namespace lfb {

// Zero-mean Gaussian texture classes: every pixel of a sample draws its
// channel vector independently from the class covariance, so class identity
// lives purely in second-order statistics.
struct CovarianceClassSpec {
    struct ClassSpec {
        std::string name;
        std::vector<double> covariance;  // row-major channels x channels, SPD
    };

    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t channels = 4;
    std::size_t samples_per_class = 200;
    std::vector<ClassSpec> classes;

    nlohmann::json to_json() const;
    static CovarianceClassSpec from_json(const nlohmann::json& j);
};

struct ManifestRow {
    std::string path;  // relative to the manifest directory
    std::size_t label = 0;
    std::string group;  // optional subject identifier
};

struct DatasetManifest {
    std::vector<ManifestRow> rows;
    std::vector<std::string> class_names;

    std::size_t num_classes() const;

    // CSV with header `path,label,group`; class names live in a classes.txt
    // sidecar next to the manifest when present.
    void write_csv(const std::filesystem::path& path) const;
    static DatasetManifest read_csv(const std::filesystem::path& path);
};

// Lower Cholesky factor of a row-major n x n matrix; `context` names the
// matrix in the NotPositiveDefinite message.
std::vector<double> cholesky_lower(const std::vector<double>& m, std::size_t n,
                                   const std::string& context);

// Writes one F32 RTF file per sample under out_dir plus manifest.csv and
// classes.txt. Fully determined by (spec, seed).
DatasetManifest gen_covariance_dataset(const CovarianceClassSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir);

// All samples resident in memory, aligned with the manifest row order.
struct LoadedDataset {
    std::vector<Tensor<float>> samples;
    std::vector<std::size_t> labels;
    std::vector<std::string> groups;
    std::vector<std::size_t> sample_shape;  // (H, W, C)
    std::size_t num_classes = 0;
};

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

}  // namespace lfb
