#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/models/gaussian_mixture.hpp"

namespace ousac {

struct BlockNetSpec {
    int data_dim = 1;
    int width = 8;  // hidden width d
    int blocks = 8;
    int n_classes = 2;
    int time_features = 8;
    double spectral_bound = 0.5;  // bound on ||W2|| * ||W1|| per block
    double readout_scale = 0.1;
    std::uint64_t seed = 7;
};

struct ResidualBlock {
    Mat w1;  // d x d
    Mat w2;  // d x d
};

struct BlockNetWeights {
    Mat embed_w;  // d x (D + time_features + n_classes + 1)
    Vec embed_b;
    std::vector<ResidualBlock> blocks;
    Mat readout_w;  // D x d
    Vec readout_b;
};

/// Per-block inputs h_in^l and outputs h_out^l of one forward pass.
struct FeatureTap {
    std::vector<Vec> h_in;
    std::vector<Vec> h_out;
};

/// Frozen residual block stack: h0 = embed(x, t, c); h_{l+1} = h_l + W2 tanh(W1 h_l); eps = readout(h_N).
class BlockNet {
public:
    /// Seeded random weights; each block's W1 and W2 are rescaled to spectral norm sqrt(spectral_bound).
    explicit BlockNet(const BlockNetSpec& spec);
    BlockNet(const BlockNetSpec& spec, BlockNetWeights weights);

    Vec embed(const Vec& x, int t, Condition c) const;
    Vec block(int layer, const Vec& h) const;
    Vec readout(const Vec& h) const;
    Vec forward(const Vec& x, int t, Condition c, FeatureTap* tap = nullptr) const;

    const BlockNetSpec& spec() const { return spec_; }
    const BlockNetWeights& weights() const { return weights_; }
    int blocks() const { return spec_.blocks; }
    int width() const { return spec_.width; }
    double full_block_macs() const;

    /// Sinusoidal features: sin/cos pairs at geometric frequencies 10000^(-k/half).
    static Vec time_embedding(int t, int features);

private:
    BlockNetSpec spec_;
    BlockNetWeights weights_;
};

/// Noise predictor backed by a BlockNet, optionally added to an analytic
/// mixture eps so that sampling stays anchored to a known target.
class BlockNetPredictor final : public NoisePredictor {
public:
    explicit BlockNetPredictor(BlockNet net, std::optional<MixturePredictor> base = std::nullopt);

    int dim() const override { return net_.spec().data_dim; }
    Vec predict(const Vec& x, int t, Condition c) const override;
    int block_count() const override { return net_.blocks(); }
    double block_macs() const override { return net_.full_block_macs(); }

    /// eps contribution excluding the blocks' output, given the final hidden state.
    Vec finish(const Vec& h_final, const Vec& x, int t, Condition c) const;

    const BlockNet& net() const { return net_; }
    const std::optional<MixturePredictor>& base() const { return base_; }

private:
    BlockNet net_;
    std::optional<MixturePredictor> base_;
};

}  // namespace ousac
