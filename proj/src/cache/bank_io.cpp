#include "ousac/cache/bank_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

namespace ousac {

static_assert(std::endian::native == std::endian::little, "packed matrices assume a little-endian host");

std::string base64_encode(std::string_view bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::string_view::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

std::string base64_decode(std::string_view text) {
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    std::string padded(text);
    const auto pad = static_cast<std::size_t>(std::count(padded.begin(), padded.end(), '='));
    if (pad > 2 || (padded.size() % 4) != 0) throw std::invalid_argument("malformed base64 payload");
    std::replace(padded.begin(), padded.end(), '=', 'A');
    std::string out(It(padded.cbegin()), It(padded.cend()));
    out.resize(out.size() - pad);
    return out;
}

nlohmann::json packed_matrix_to_json(const Mat& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    std::string bytes(static_cast<std::size_t>(rm.size()) * sizeof(double), '\0');
    if (!bytes.empty()) std::memcpy(bytes.data(), rm.data(), bytes.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64_encode(bytes)}};
}

Mat packed_matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix shape");
    const std::string bytes = base64_decode(j.at("data").get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
        throw std::invalid_argument("packed matrix payload does not match its shape");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    if (!bytes.empty()) std::memcpy(rm.data(), bytes.data(), bytes.size());
    return rm;
}

namespace {

LayerCalibration from_matrix(Mat A) {
    LayerCalibration cal;
    const Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    cal.U = svd.matrixU();
    cal.S = svd.singularValues();
    cal.V = svd.matrixV();
    cal.A = std::move(A);
    return cal;
}

}  // namespace

nlohmann::json bank_to_json(const CalibrationBank& bank) {
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < bank.size(); ++l) {
        const auto& cal = bank.layers[static_cast<std::size_t>(l)];
        nlohmann::json stats = {{"samples", cal.stats.samples},
                                {"effective_ridge", cal.stats.effective_ridge},
                                {"residual_norm", cal.stats.residual_norm},
                                {"relative_residual", cal.stats.relative_residual}};
        if (!cal.stats.warning.empty()) stats["warning"] = cal.stats.warning;
        layers.push_back({{"layer", l}, {"A", packed_matrix_to_json(cal.A)}, {"fit_stats", stats}});
    }
    return {{"format", "ousac-calibration-bank"}, {"version", 1}, {"width", bank.width}, {"layers", layers}};
}

CalibrationBank bank_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "ousac-calibration-bank") throw ConfigError("not a calibration bank file");
    if (j.value("version", 0) != 1) throw ConfigError("unsupported calibration bank version");
    CalibrationBank bank;
    bank.width = j.at("width").get<int>();
    for (const auto& layer : j.at("layers")) {
        LayerCalibration cal = from_matrix(packed_matrix_from_json(layer.at("A")));
        if (cal.A.rows() != bank.width || cal.A.cols() != bank.width)
            throw ConfigError("calibration matrix shape does not match bank width");
        const auto& st = layer.at("fit_stats");
        cal.stats.samples = st.at("samples").get<int>();
        cal.stats.effective_ridge = st.at("effective_ridge").get<double>();
        cal.stats.residual_norm = st.at("residual_norm").get<double>();
        cal.stats.relative_residual = st.at("relative_residual").get<double>();
        cal.stats.warning = st.value("warning", "");
        bank.layers.push_back(std::move(cal));
    }
    return bank;
}

nlohmann::json rank_config_to_json(const RankConfig& cfg) {
    return {{"K", cfg.K},         {"ranks", cfg.ranks}, {"budget", cfg.budget},
            {"r_min", cfg.r_min}, {"r_max", cfg.r_max}, {"region_map", cfg.region_map}};
}

RankConfig rank_config_from_json(const nlohmann::json& j) {
    RankConfig cfg;
    cfg.K = j.at("K").get<int>();
    cfg.ranks = j.at("ranks").get<std::vector<int>>();
    cfg.budget = j.at("budget").get<int>();
    cfg.r_min = j.at("r_min").get<int>();
    cfg.r_max = j.at("r_max").get<int>();
    cfg.region_map = j.at("region_map").get<std::vector<int>>();
    cfg.validate();
    return cfg;
}

}  // namespace ousac
