#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlab/binary_io.hpp"
#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {

/// Fully connected probe: ReLU hidden layers, sigmoid output.
/// dims = {input, hidden..., 1}. Parameters live in one flat vector, layer by
/// layer, each layer as W (out x in, column-major) followed by b.
template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mlp() = default;

  /// Zero parameters.
  explicit Mlp(std::vector<std::size_t> dims, std::uint64_t seed = 0) : dims_(std::move(dims)), seed_(seed) {
    require(dims_.size() >= 2, ErrorKind::Argument, "probe needs at least input and output dims");
    require(dims_.back() == 1, ErrorKind::Argument, "probe output dim must be 1");
    for (auto d : dims_) require(d >= 1, ErrorKind::Argument, "probe layer dims must be >= 1");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(n);
      n += dims_[l + 1] * dims_[l] + dims_[l + 1];
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(n));
  }

  /// He-normal weights for ReLU layers, 1/fan_in variance for the output layer, zero biases.
  static Mlp init(std::vector<std::size_t> dims, std::uint64_t seed) {
    Mlp m(std::move(dims), seed);
    Rng rng = Rng(seed).split("probe-init");
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      const double gain = l + 1 == m.n_layers() ? 1.0 : 2.0;
      const double sd = std::sqrt(gain / static_cast<double>(m.dims_[l]));
      auto w = m.weight(l);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(sd * rng.normal());
    }
    return m;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t n_layers() const { return dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  std::uint64_t seed() const { return seed_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Eigen::Map<Mat> weight(std::size_t l) {
    return {params_.data() + offsets_[l], rows(l), cols(l)};
  }
  Eigen::Map<const Mat> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], rows(l), cols(l)};
  }
  Eigen::Map<Vec> bias(std::size_t l) { return {params_.data() + offsets_[l] + rows(l) * cols(l), rows(l)}; }
  Eigen::Map<const Vec> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + rows(l) * cols(l), rows(l)};
  }

  static constexpr Scalar kLow = std::numeric_limits<Scalar>::epsilon();
  static constexpr Scalar kHigh = Scalar(1) - std::numeric_limits<Scalar>::epsilon();

  /// Activations kept for backward. acts[0] = input, acts[l] = post-ReLU, logits = last pre-activation.
  struct Cache {
    std::vector<Mat> acts;
    Vec logits;
    Vec probs;
  };

  /// X is batch x input_dim. Returns probabilities strictly inside (0, 1).
  Vec forward(const Mat& X, Cache* cache = nullptr) const {
    require(static_cast<std::size_t>(X.cols()) == input_dim(), ErrorKind::Argument,
            "probe expects " + std::to_string(input_dim()) + " features, got " + std::to_string(X.cols()));
    Mat h = X;
    if (cache) {
      cache->acts.clear();
      cache->acts.push_back(X);
    }
    for (std::size_t l = 0; l + 1 < n_layers(); ++l) {
      h = ((h * weight(l).transpose()).rowwise() + bias(l).transpose()).cwiseMax(Scalar(0));
      if (cache) cache->acts.push_back(h);
    }
    const std::size_t last = n_layers() - 1;
    Vec z = (h * weight(last).transpose()).col(0).array() + bias(last)(0);
    Vec p = z.unaryExpr([](Scalar v) { return sigmoid(v); });
    if (cache) {
      cache->logits = z;
      cache->probs = p;
    }
    return p;
  }

  Scalar forward_one(const Vec& v) const {
    require(static_cast<std::size_t>(v.size()) == input_dim(), ErrorKind::Argument,
            "probe expects " + std::to_string(input_dim()) + " features, got " + std::to_string(v.size()));
    return forward(v.transpose())(0);
  }

  /// Accumulates into grad the parameter gradient given dL/dp per row.
  void backward(const Cache& cache, const Vec& dprob, Vec& grad) const {
    require(grad.size() == params_.size(), ErrorKind::Argument, "gradient buffer has wrong size");
    const Eigen::Index n = dprob.size();
    // clamped outputs are flat, so their gradient is zero
    Vec dz(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar p = cache.probs(i);
      dz(i) = (p <= kLow || p >= kHigh) ? Scalar(0) : dprob(i) * p * (Scalar(1) - p);
    }
    Mat delta = dz;  // n x 1
    for (std::size_t l = n_layers(); l-- > 0;) {
      const Mat& a = cache.acts[l];
      Eigen::Map<Mat> gw(grad.data() + offsets_[l], rows(l), cols(l));
      Eigen::Map<Vec> gb(grad.data() + offsets_[l] + rows(l) * cols(l), rows(l));
      gw.noalias() += delta.transpose() * a;
      gb += delta.colwise().sum().transpose();
      if (l == 0) break;
      Mat back = delta * weight(l);
      delta = back.cwiseProduct((a.array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }

  static Scalar sigmoid(Scalar z) {
    const Scalar s = z >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
    return std::clamp(s, kLow, kHigh);
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> m(dims_, seed_);
    m.params() = params_.template cast<Other>();
    return m;
  }

 private:
  Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(dims_[l + 1]); }
  Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(dims_[l]); }

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::uint64_t seed_ = 0;
  Vec params_;
};

inline constexpr std::uint32_t kProbeFormatVersion = 1;

/// "VPRB", u32 version, u32 n_dims, u32 dims[], u64 seed, u64 n_params, f32 params[].
template <typename Scalar>
void save_probe(const Mlp<Scalar>& probe, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write("VPRB", 4);
  binary::put<std::uint32_t>(out, kProbeFormatVersion);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(probe.dims().size()));
  for (auto d : probe.dims()) binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  binary::put<std::uint64_t>(out, probe.seed());
  binary::put<std::uint64_t>(out, static_cast<std::uint64_t>(probe.params().size()));
  for (Eigen::Index i = 0; i < probe.params().size(); ++i) binary::put_f32(out, static_cast<float>(probe.params()(i)));
  out.close();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

template <typename Scalar>
Mlp<Scalar> load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  const std::string name = path.filename().string();
  binary::expect_magic(in, "VPRB", name);
  const auto version = binary::get<std::uint32_t>(in, "version");
  require(version == kProbeFormatVersion, ErrorKind::Version,
          name + ": probe format version " + std::to_string(version) + ", expected " +
              std::to_string(kProbeFormatVersion));
  const auto n_dims = binary::get<std::uint32_t>(in, "dims");
  require(n_dims >= 2 && n_dims <= 64, ErrorKind::Malformed, name + ": implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(binary::get<std::uint32_t>(in, "dims"));
  const auto seed = binary::get<std::uint64_t>(in, "seed");
  Mlp<Scalar> probe(dims, seed);
  const auto n = binary::get<std::uint64_t>(in, "parameter count");
  require(n == static_cast<std::uint64_t>(probe.params().size()), ErrorKind::SizeMismatch,
          name + ": " + std::to_string(n) + " parameters stored, dims imply " + std::to_string(probe.params().size()));
  for (Eigen::Index i = 0; i < probe.params().size(); ++i)
    probe.params()(i) = static_cast<Scalar>(binary::get_f32(in, "parameters"));
  require(in.peek() == std::char_traits<char>::eof(), ErrorKind::Malformed, name + ": trailing bytes");
  return probe;
}

}  // namespace vlab
