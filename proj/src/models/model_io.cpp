#include "ousac/models/model_io.hpp"

namespace ousac {

using nlohmann::json;

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.front().size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

json vector_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mixture_to_json(const GaussianMixture& gm) {
    json comps = json::array();
    for (const auto& c : gm.components())
        comps.push_back({{"weight", c.weight}, {"mean", vector_to_json(c.mean)}, {"variance", c.variance}, {"label", c.label}});
    return {{"components", comps}};
}

GaussianMixture mixture_from_json(const json& j) {
    std::vector<MixtureComponent> comps;
    for (const auto& c : j.at("components")) {
        MixtureComponent m;
        m.weight = c.at("weight").get<double>();
        m.mean = vector_from_json(c.at("mean"));
        m.variance = c.at("variance").get<double>();
        m.label = c.value("label", 0);
        comps.push_back(std::move(m));
    }
    return GaussianMixture(std::move(comps));
}

json blocknet_spec_to_json(const BlockNetSpec& s) {
    return {{"data_dim", s.data_dim},         {"width", s.width},
            {"blocks", s.blocks},             {"n_classes", s.n_classes},
            {"time_features", s.time_features}, {"spectral_bound", s.spectral_bound},
            {"readout_scale", s.readout_scale}, {"seed", s.seed}};
}

BlockNetSpec blocknet_spec_from_json(const json& j) {
    BlockNetSpec s;
    s.data_dim = j.at("data_dim").get<int>();
    s.width = j.at("width").get<int>();
    s.blocks = j.at("blocks").get<int>();
    s.n_classes = j.at("n_classes").get<int>();
    s.time_features = j.at("time_features").get<int>();
    s.spectral_bound = j.at("spectral_bound").get<double>();
    s.readout_scale = j.at("readout_scale").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

json blocknet_to_json(const BlockNet& net) {
    const auto& w = net.weights();
    json blocks = json::array();
    for (const auto& b : w.blocks) blocks.push_back({{"w1", matrix_to_json(b.w1)}, {"w2", matrix_to_json(b.w2)}});
    return {{"spec", blocknet_spec_to_json(net.spec())},
            {"weights",
             {{"embed_w", matrix_to_json(w.embed_w)},
              {"embed_b", vector_to_json(w.embed_b)},
              {"blocks", blocks},
              {"readout_w", matrix_to_json(w.readout_w)},
              {"readout_b", vector_to_json(w.readout_b)}}}};
}

BlockNet blocknet_from_json(const json& j) {
    const BlockNetSpec spec = blocknet_spec_from_json(j.at("spec"));
    const auto& wj = j.at("weights");
    BlockNetWeights w;
    w.embed_w = matrix_from_json(wj.at("embed_w"));
    w.embed_b = vector_from_json(wj.at("embed_b"));
    for (const auto& b : wj.at("blocks")) w.blocks.push_back({matrix_from_json(b.at("w1")), matrix_from_json(b.at("w2"))});
    w.readout_w = matrix_from_json(wj.at("readout_w"));
    w.readout_b = vector_from_json(wj.at("readout_b"));
    return BlockNet(spec, std::move(w));
}

}  // namespace ousac
