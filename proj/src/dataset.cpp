#include "litefbcn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "litefbcn/rng.hpp"
#include "litefbcn/rtf.hpp"

namespace lfb {

nlohmann::json CovarianceClassSpec::to_json() const {
    nlohmann::json jclasses = nlohmann::json::array();
    for (const auto& c : classes) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < channels; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < channels; ++j) row.push_back(c.covariance[i * channels + j]);
            rows.push_back(std::move(row));
        }
        jclasses.push_back({{"name", c.name}, {"covariance", std::move(rows)}});
    }
    return {{"height", height},
            {"width", width},
            {"channels", channels},
            {"samples_per_class", samples_per_class},
            {"classes", std::move(jclasses)}};
}

CovarianceClassSpec CovarianceClassSpec::from_json(const nlohmann::json& j) {
    CovarianceClassSpec spec;
    spec.height = j.at("height").get<std::size_t>();
    spec.width = j.at("width").get<std::size_t>();
    spec.channels = j.at("channels").get<std::size_t>();
    spec.samples_per_class = j.at("samples_per_class").get<std::size_t>();
    if (spec.height == 0 || spec.width == 0 || spec.channels == 0 || spec.samples_per_class == 0) {
        throw ConfigError("dataset spec: all dimensions must be positive");
    }
    for (const auto& jc : j.at("classes")) {
        ClassSpec c;
        c.name = jc.contains("name") ? jc.at("name").get<std::string>()
                                     : "class" + std::to_string(spec.classes.size());
        const auto& cov = jc.at("covariance");
        if (!cov.is_array() || cov.size() != spec.channels) {
            throw ConfigError("dataset spec: covariance of '" + c.name + "' must be " +
                              std::to_string(spec.channels) + "x" + std::to_string(spec.channels));
        }
        for (const auto& row : cov) {
            if (!row.is_array() || row.size() != spec.channels) {
                throw ConfigError("dataset spec: covariance of '" + c.name + "' is not square");
            }
            for (const auto& v : row) c.covariance.push_back(v.get<double>());
        }
        spec.classes.push_back(std::move(c));
    }
    if (spec.classes.empty()) throw ConfigError("dataset spec: no classes given");
    return spec;
}

std::size_t DatasetManifest::num_classes() const {
    std::size_t n = 0;
    for (const auto& r : rows) n = std::max(n, r.label + 1);
    return std::max(n, class_names.size());
}

void DatasetManifest::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write manifest '" + path.string() + "'");
    f << "path,label,group\n";
    for (const auto& r : rows) f << r.path << "," << r.label << "," << r.group << "\n";

    if (!class_names.empty()) {
        std::ofstream cf(path.parent_path() / "classes.txt", std::ios::trunc);
        for (const auto& n : class_names) cf << n << "\n";
    }
}

DatasetManifest DatasetManifest::read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open manifest '" + path.string() + "'");
    DatasetManifest m;
    std::string line;
    if (!std::getline(f, line)) throw ConfigError("manifest '" + path.string() + "' is empty");
    if (line != "path,label,group") {
        throw ConfigError("manifest header must be 'path,label,group', got '" + line + "'");
    }
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ManifestRow r;
        std::string label_s;
        if (!std::getline(ss, r.path, ',') || !std::getline(ss, label_s, ',')) {
            throw ConfigError("manifest line " + std::to_string(lineno) + " is malformed");
        }
        std::getline(ss, r.group, ',');
        try {
            r.label = static_cast<std::size_t>(std::stoul(label_s));
        } catch (const std::exception&) {
            throw ConfigError("manifest line " + std::to_string(lineno) + ": bad label '" +
                              label_s + "'");
        }
        m.rows.push_back(std::move(r));
    }

    std::ifstream cf(path.parent_path() / "classes.txt");
    if (cf) {
        std::string name;
        while (std::getline(cf, name)) {
            if (!name.empty()) m.class_names.push_back(name);
        }
    }
    return m;
}

std::vector<double> cholesky_lower(const std::vector<double>& m, std::size_t n,
                                   const std::string& context) {
    if (m.size() != n * n) {
        throw ShapeMismatch("cholesky: matrix for " + context + " is not " + std::to_string(n) +
                            "x" + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(m[i * n + j] - m[j * n + i]) > 1e-9) {
                throw NotPositiveDefinite("covariance of " + context + " is not symmetric");
            }
        }
    }
    std::vector<double> l(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = m[i * n + j];
            for (std::size_t t = 0; t < j; ++t) sum -= l[i * n + t] * l[j * n + t];
            if (i == j) {
                if (sum <= 0.0) {
                    throw NotPositiveDefinite("covariance of " + context +
                                              " is not positive definite");
                }
                l[i * n + i] = std::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    return l;
}

DatasetManifest gen_covariance_dataset(const CovarianceClassSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::size_t k = spec.channels;

    std::vector<std::vector<double>> factors;
    for (const auto& c : spec.classes) {
        factors.push_back(cholesky_lower(c.covariance, k, "class '" + c.name + "'"));
    }

    DatasetManifest manifest;
    for (const auto& c : spec.classes) manifest.class_names.push_back(c.name);

    std::vector<double> z(k);
    for (std::size_t label = 0; label < spec.classes.size(); ++label) {
        const std::vector<double>& l = factors[label];
        const std::uint64_t class_seed = derive_seed(seed, label);
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            CounterRng rng(derive_seed(class_seed, s));
            Tensor<float> sample({spec.height, spec.width, k});
            for (std::size_t i = 0; i < spec.height; ++i) {
                for (std::size_t j = 0; j < spec.width; ++j) {
                    for (std::size_t t = 0; t < k; ++t) z[t] = rng.normal();
                    float* px = &sample.at3(i, j, 0);
                    for (std::size_t c = 0; c < k; ++c) {
                        double acc = 0.0;
                        for (std::size_t t = 0; t <= c; ++t) acc += l[c * k + t] * z[t];
                        px[c] = static_cast<float>(acc);
                    }
                }
            }
            char name[64];
            std::snprintf(name, sizeof(name), "c%zu_s%05zu%s", label, s, kRtfExtension);
            write_rtf(out_dir / name, sample);
            manifest.rows.push_back({name, label, ""});
        }
    }
    manifest.write_csv(out_dir / "manifest.csv");
    return manifest;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
    LoadedDataset ds;
    ds.num_classes = manifest.num_classes();
    for (const auto& r : manifest.rows) {
        Tensor<float> t = read_rtf_as<float>(base_dir / r.path);
        if (ds.samples.empty()) {
            ds.sample_shape = t.shape();
        } else if (t.shape() != ds.sample_shape) {
            throw ShapeMismatch("dataset sample '" + r.path + "' shape differs from the first");
        }
        ds.samples.push_back(std::move(t));
        ds.labels.push_back(r.label);
        ds.groups.push_back(r.group);
    }
    return ds;
}

}  // namespace lfb
