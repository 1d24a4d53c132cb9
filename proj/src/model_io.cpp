#include "icsad/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "icsad/errors.hpp"

namespace icsad::nn {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'I', 'C', 'S', 'A', 'D', 'M', 'D', 'L'};

template <typename T>
void append_le(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T read_le(const std::string& buf, std::size_t off) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, buf.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

void append_f64s(std::string& out, const double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(p), n * sizeof(double));
    } else {
        for (std::size_t i = 0; i < n; ++i) append_le(out, p[i]);
    }
}

void read_f64s(const std::string& buf, std::size_t& off, double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(p, buf.data() + off, n * sizeof(double));
    } else {
        for (std::size_t i = 0; i < n; ++i) p[i] = read_le<double>(buf, off + i * sizeof(double));
    }
    off += n * sizeof(double);
}

json layer_to_json(const LayerSpec& ls) {
    json j;
    j["kind"] = kind_name(ls.kind);
    switch (ls.kind) {
    case LayerKind::depthwise_conv:
        j["kernel_size"] = ls.conv.kernel_size;
        j["filters_per_feature"] = ls.conv.filters_per_feature;
        j["stride"] = ls.conv.stride;
        break;
    case LayerKind::maxpool:
        j["pool"] = ls.pool;
        j["stride"] = ls.pool_stride;
        break;
    case LayerKind::dropout:
        j["rate"] = ls.rate;
        break;
    case LayerKind::batchnorm:
        j["momentum"] = ls.bn_momentum;
        j["epsilon"] = ls.bn_epsilon;
        break;
    case LayerKind::dense:
    case LayerKind::feature_enrich_dense:
        j["width"] = ls.width;
        break;
    case LayerKind::relu:
    case LayerKind::flatten:
        break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "depthwise_conv")
        return LayerSpec::Conv(j.at("kernel_size").get<std::size_t>(),
                               j.at("filters_per_feature").get<std::size_t>(),
                               j.at("stride").get<std::size_t>());
    if (kind == "relu") return LayerSpec::Relu();
    if (kind == "maxpool")
        return LayerSpec::MaxPool(j.at("pool").get<std::size_t>(),
                                  j.at("stride").get<std::size_t>());
    if (kind == "dropout") return LayerSpec::Dropout(j.at("rate").get<double>());
    if (kind == "batchnorm")
        return LayerSpec::BatchNorm(j.at("momentum").get<double>(),
                                    j.at("epsilon").get<double>());
    if (kind == "dense") return LayerSpec::Dense(j.at("width").get<std::size_t>());
    if (kind == "flatten") return LayerSpec::Flatten();
    if (kind == "feature_enrich_dense")
        return LayerSpec::FeatureEnrich(j.at("width").get<std::size_t>());
    throw IoError("model file names an unknown layer kind '" + kind + "'");
}

// Every stored tensor of a model, in the fixed file order.
std::vector<const Tensor*> stored_tensors(const Model& m) {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const LayerParams& p = m.params[i];
        switch (m.config.layers[i].kind) {
        case LayerKind::depthwise_conv:
        case LayerKind::dense:
        case LayerKind::feature_enrich_dense:
            out.push_back(&p.w);
            out.push_back(&p.b);
            break;
        case LayerKind::batchnorm:
            out.push_back(&p.gamma);
            out.push_back(&p.beta);
            out.push_back(&p.bn.running_mean);
            out.push_back(&p.bn.running_var);
            break;
        default:
            break;
        }
    }
    for (const Tensor& t : m.adam.m) out.push_back(&t);
    for (const Tensor& t : m.adam.v) out.push_back(&t);
    return out;
}

}  // namespace

void save_model(const Model& model, const std::string& path, const nlohmann::json& extras) {
    json header;
    header["n"] = model.config.n;
    header["feature_count"] = model.config.feature_count;
    header["seed"] = model.config.seed;
    json layers = json::array();
    for (const LayerSpec& ls : model.config.layers) layers.push_back(layer_to_json(ls));
    header["layers"] = std::move(layers);
    header["adam_t"] = model.adam.t;
    if (!extras.is_null() && !(extras.is_object() && extras.empty())) header["extras"] = extras;
    const std::string htext = header.dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    append_le<std::uint32_t>(out, kModelFormatMajor);
    append_le<std::uint32_t>(out, kModelFormatMinor);
    append_le<std::uint64_t>(out, htext.size());
    out += htext;
    for (const Tensor* t : stored_tensors(model)) append_f64s(out, t->data(), t->numel());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw IoError("failed writing model file '" + path + "'");
}

Model load_model(const std::string& path, nlohmann::json* extras) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model file '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    constexpr std::size_t fixed = sizeof(kMagic) + 2 * sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (buf.size() < fixed)
        throw IoError("model file '" + path + "' is truncated (only " +
                      std::to_string(buf.size()) + " bytes)");
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw IoError("'" + path + "' is not a model file (bad magic bytes)");
    const auto major = read_le<std::uint32_t>(buf, 8);
    const auto minor = read_le<std::uint32_t>(buf, 12);
    if (major > kModelFormatMajor)
        throw IoError("model file '" + path + "' has format version " + std::to_string(major) +
                      "." + std::to_string(minor) + ", newer than the supported " +
                      std::to_string(kModelFormatMajor) + ".x");
    const auto hlen = read_le<std::uint64_t>(buf, 16);
    if (fixed + hlen > buf.size())
        throw IoError("model file '" + path + "' is truncated inside the header");

    json header;
    try {
        header = json::parse(buf.substr(fixed, hlen));
    } catch (const json::exception& e) {
        throw IoError("model file '" + path + "' has a corrupt header: " + e.what());
    }

    Model model;
    try {
        ModelConfig cfg;
        cfg.n = header.at("n").get<std::size_t>();
        cfg.feature_count = header.at("feature_count").get<std::size_t>();
        cfg.seed = header.at("seed").get<std::uint64_t>();
        for (const json& lj : header.at("layers")) cfg.layers.push_back(layer_from_json(lj));
        model = build_model(cfg);
        model.adam.t = header.at("adam_t").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError("model file '" + path + "' has a corrupt header: " + e.what());
    } catch (const ConfigError& e) {
        throw IoError("model file '" + path + "' declares an invalid architecture: " + e.what());
    }
    if (extras) *extras = header.value("extras", json::object());

    std::vector<const Tensor*> order = stored_tensors(model);
    std::size_t doubles = 0;
    for (const Tensor* t : order) doubles += t->numel();
    const std::size_t expect = fixed + hlen + doubles * sizeof(double);
    if (buf.size() != expect)
        throw IoError("model file '" + path + "' parameter section is " +
                      std::to_string(buf.size() - fixed - hlen) + " bytes, expected " +
                      std::to_string(doubles * sizeof(double)));

    std::size_t off = fixed + hlen;
    for (const Tensor* t : order)
        read_f64s(buf, off, const_cast<Tensor*>(t)->data(), t->numel());
    return model;
}

}  // namespace icsad::nn
