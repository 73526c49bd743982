#include "ousac/models/block_net.hpp"

#include <cmath>
#include <random>

#include "ousac/metrics/pass_ledger.hpp"

namespace ousac {

namespace {

Mat gaussian_matrix(int rows, int cols, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = scale * normal(rng);
    return m;
}

Mat with_spectral_norm(Mat m, double target) {
    const double s = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
    if (s > 0.0) m *= target / s;
    return m;
}

void validate(const BlockNetSpec& s) {
    if (s.data_dim < 1 || s.width < 1 || s.blocks < 1 || s.n_classes < 1 || s.time_features < 2 ||
        s.time_features % 2 != 0)
        throw ConfigError("invalid BlockNet dimensions");
    if (!(s.spectral_bound > 0.0)) throw ConfigError("BlockNet spectral_bound must be positive");
}

}  // namespace

BlockNet::BlockNet(const BlockNetSpec& spec) : spec_(spec) {
    validate(spec_);
    std::mt19937_64 rng(spec_.seed);
    const int in = spec_.data_dim + spec_.time_features + spec_.n_classes + 1;
    const int d = spec_.width;
    weights_.embed_w = gaussian_matrix(d, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    weights_.embed_b = gaussian_matrix(d, 1, 0.1, rng).col(0);
    const double per_matrix = std::sqrt(spec_.spectral_bound);
    for (int l = 0; l < spec_.blocks; ++l) {
        ResidualBlock b;
        b.w1 = with_spectral_norm(gaussian_matrix(d, d, 1.0, rng), per_matrix);
        b.w2 = with_spectral_norm(gaussian_matrix(d, d, 1.0, rng), per_matrix);
        weights_.blocks.push_back(std::move(b));
    }
    weights_.readout_w = gaussian_matrix(spec_.data_dim, d, spec_.readout_scale / std::sqrt(static_cast<double>(d)), rng);
    weights_.readout_b = Vec::Zero(spec_.data_dim);
}

BlockNet::BlockNet(const BlockNetSpec& spec, BlockNetWeights weights) : spec_(spec), weights_(std::move(weights)) {
    validate(spec_);
    const int in = spec_.data_dim + spec_.time_features + spec_.n_classes + 1;
    const int d = spec_.width;
    if (weights_.embed_w.rows() != d || weights_.embed_w.cols() != in || weights_.embed_b.size() != d ||
        static_cast<int>(weights_.blocks.size()) != spec_.blocks || weights_.readout_w.rows() != spec_.data_dim ||
        weights_.readout_w.cols() != d || weights_.readout_b.size() != spec_.data_dim)
        throw ConfigError("BlockNet weights do not match the spec");
    for (const auto& b : weights_.blocks)
        if (b.w1.rows() != d || b.w1.cols() != d || b.w2.rows() != d || b.w2.cols() != d)
            throw ConfigError("BlockNet block weights do not match the width");
}

Vec BlockNet::time_embedding(int t, int features) {
    const int half = features / 2;
    Vec e(features);
    for (int k = 0; k < half; ++k) {
        const double freq = std::pow(10000.0, -static_cast<double>(k) / half);
        e(2 * k) = std::sin(t * freq);
        e(2 * k + 1) = std::cos(t * freq);
    }
    return e;
}

Vec BlockNet::embed(const Vec& x, int t, Condition c) const {
    const int D = spec_.data_dim;
    Vec in = Vec::Zero(D + spec_.time_features + spec_.n_classes + 1);
    in.head(D) = x;
    in.segment(D, spec_.time_features) = time_embedding(t, spec_.time_features);
    if (c && (*c < 0 || *c >= spec_.n_classes)) throw ConfigError("condition outside BlockNet classes");
    in(D + spec_.time_features + (c ? *c : spec_.n_classes)) = 1.0;
    return weights_.embed_w * in + weights_.embed_b;
}

Vec BlockNet::block(int layer, const Vec& h) const {
    const auto& b = weights_.blocks[static_cast<std::size_t>(layer)];
    return h + b.w2 * (b.w1 * h).array().tanh().matrix();
}

Vec BlockNet::readout(const Vec& h) const { return weights_.readout_w * h + weights_.readout_b; }

Vec BlockNet::forward(const Vec& x, int t, Condition c, FeatureTap* tap) const {
    Vec h = embed(x, t, c);
    if (tap) {
        tap->h_in.clear();
        tap->h_out.clear();
    }
    for (int l = 0; l < spec_.blocks; ++l) {
        Vec out = block(l, h);
        if (tap) {
            tap->h_in.push_back(h);
            tap->h_out.push_back(out);
        }
        h = std::move(out);
    }
    return readout(h);
}

double BlockNet::full_block_macs() const { return ousac::full_block_macs(spec_.width, spec_.width, spec_.width); }

BlockNetPredictor::BlockNetPredictor(BlockNet net, std::optional<MixturePredictor> base)
    : net_(std::move(net)), base_(std::move(base)) {
    if (base_ && base_->dim() != net_.spec().data_dim) throw ConfigError("analytic base dimension mismatch");
}

Vec BlockNetPredictor::finish(const Vec& h_final, const Vec& x, int t, Condition c) const {
    Vec eps = net_.readout(h_final);
    if (base_) eps += base_->predict(x, t, c);
    return eps;
}

Vec BlockNetPredictor::predict(const Vec& x, int t, Condition c) const {
    Vec h = net_.embed(x, t, c);
    for (int l = 0; l < net_.blocks(); ++l) h = net_.block(l, h);
    return finish(h, x, t, c);
}

}  // namespace ousac
