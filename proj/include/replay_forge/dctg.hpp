#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "replay_forge/error.hpp"
#include "replay_forge/tensor.hpp"

namespace rforge {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Bottleneck feature map [C, H, W, D] held as its token view: row n of
/// `tokens` is the C-dim feature at spatial position n (H, W, D in C-order).
template <typename Scalar>
struct BottleneckFeatures {
  int height = 0, width = 0, depth = 0;
  RowMat<Scalar> tokens;  // N_i x C with N_i = H*W*D

  Eigen::Index spatial_size() const {
    return static_cast<Eigen::Index>(height) * width * depth;
  }
  Eigen::Index channels() const { return tokens.cols(); }
};

/// [C, H, W, D] C-order tensor -> token view.
template <typename Scalar>
BottleneckFeatures<Scalar> tokens_from_tensor(const Tensor<float>& t) {
  if (t.shape.size() != 4 || !t.shape_matches())
    raise(Errc::ShapeMismatch, "bottleneck features must be 4-D [C, H, W, D]");
  BottleneckFeatures<Scalar> f;
  const auto c = static_cast<Eigen::Index>(t.shape[0]);
  f.height = static_cast<int>(t.shape[1]);
  f.width = static_cast<int>(t.shape[2]);
  f.depth = static_cast<int>(t.shape[3]);
  const auto n = f.spatial_size();
  f.tokens.resize(n, c);
  for (Eigen::Index ch = 0; ch < c; ++ch)
    for (Eigen::Index s = 0; s < n; ++s)
      f.tokens(s, ch) = static_cast<Scalar>(t.data[ch * n + s]);
  return f;
}

template <typename Scalar>
Tensor<float> tensor_from_tokens(const BottleneckFeatures<Scalar>& f) {
  const auto n = f.spatial_size();
  const auto c = f.channels();
  auto t = Tensor<float>::zeros({static_cast<std::uint32_t>(c),
                                 static_cast<std::uint32_t>(f.height),
                                 static_cast<std::uint32_t>(f.width),
                                 static_cast<std::uint32_t>(f.depth)});
  for (Eigen::Index ch = 0; ch < c; ++ch)
    for (Eigen::Index s = 0; s < n; ++s)
      t.data[ch * n + s] = static_cast<float>(f.tokens(s, ch));
  return t;
}

template <typename Scalar>
struct DctgParams {
  RowMat<Scalar> w_text;  // E x d (text embedding width -> model dim)
  RowMat<Scalar> w_img;   // C x d
  RowMat<Scalar> pos;     // N_i x d, learned positional table supplied as data
  RowMat<Scalar> w_q, w_k, w_v;  // d x d
  RowMat<Scalar> w_o;            // d x C
  VecX<Scalar> ln1_gain, ln1_bias;  // d, pre-attention image-token norm
  VecX<Scalar> ln2_gain, ln2_bias;  // C, final norm
  Scalar epsilon = static_cast<Scalar>(1e-5);
  int heads = 4;

  int model_dim() const { return static_cast<int>(w_q.cols()); }
  int channel_dim() const { return static_cast<int>(w_o.cols()); }
};

/// (x - mean) / sqrt(var + eps) * gain + bias with population (1/d) variance.
template <typename Scalar>
VecX<Scalar> layer_norm(const VecX<Scalar>& x, const VecX<Scalar>& gain, const VecX<Scalar>& bias,
                        Scalar epsilon) {
  if (x.size() != gain.size() || x.size() != bias.size())
    raise(Errc::ShapeMismatch, "layer_norm: gain/bias size mismatch");
  const Scalar mean = x.mean();
  const Scalar var = (x.array() - mean).square().mean();
  VecX<Scalar> out =
      (((x.array() - mean) / std::sqrt(var + epsilon)) * gain.array() + bias.array()).matrix();
  return out;
}

template <typename Scalar>
RowMat<Scalar> layer_norm_rows(const RowMat<Scalar>& x, const VecX<Scalar>& gain,
                               const VecX<Scalar>& bias, Scalar epsilon) {
  RowMat<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out.row(r) = layer_norm<Scalar>(x.row(r).transpose(), gain, bias, epsilon).transpose();
  return out;
}

/// Row softmax with max subtraction.
template <typename Scalar>
RowMat<Scalar> softmax_rows(RowMat<Scalar> logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

/// Scaled dot-product cross-attention over h heads: queries from the image
/// tokens, keys/values from the text tokens, heads concatenated in index
/// order. Per-head attention matrices are written to `weights_out` when given.
template <typename Scalar>
RowMat<Scalar> mha_cross_attention(const RowMat<Scalar>& img_tokens,
                                   const RowMat<Scalar>& text_tokens,
                                   const DctgParams<Scalar>& params,
                                   std::vector<RowMat<Scalar>>* weights_out = nullptr) {
  const auto d = params.model_dim();
  if (params.heads < 1 || d % params.heads != 0)
    raise(Errc::HeadDivisibility, "mha: model dim " + std::to_string(d) +
                                      " not divisible by heads " + std::to_string(params.heads));
  if (img_tokens.cols() != d || text_tokens.cols() != d)
    raise(Errc::ShapeMismatch, "mha: token width differs from projection dim");

  const RowMat<Scalar> q = img_tokens * params.w_q;
  const RowMat<Scalar> k = text_tokens * params.w_k;
  const RowMat<Scalar> v = text_tokens * params.w_v;

  const int dh = d / params.heads;
  const Scalar scale = static_cast<Scalar>(1) / std::sqrt(static_cast<Scalar>(dh));
  RowMat<Scalar> out(img_tokens.rows(), d);
  if (weights_out) weights_out->clear();
  for (int h = 0; h < params.heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    const auto vh = v.middleCols(h * dh, dh);
    RowMat<Scalar> attn = softmax_rows<Scalar>((qh * kh.transpose()) * scale);
    out.middleCols(h * dh, dh) = attn * vh;
    if (weights_out) weights_out->push_back(std::move(attn));
  }
  return out;
}

/// Full text-conditioning pass over the bottleneck tokens:
/// project text to d; project image tokens to d, add the positional table,
/// layer-norm; cross-attend; project back to C; add the original tokens;
/// final layer norm. Shape-preserving.
template <typename Scalar>
BottleneckFeatures<Scalar> dctg_forward(const BottleneckFeatures<Scalar>& features,
                                        const RowMat<Scalar>& text_embedding,
                                        const DctgParams<Scalar>& params) {
  const auto n_img = features.tokens.rows();
  const auto c = features.channels();
  const auto d = params.model_dim();
  if (text_embedding.rows() < 1) raise(Errc::ShapeMismatch, "dctg: empty text embedding");
  if (text_embedding.cols() != params.w_text.rows())
    raise(Errc::ShapeMismatch, "dctg: text width " + std::to_string(text_embedding.cols()) +
                                   " != w_text rows " + std::to_string(params.w_text.rows()));
  if (c != params.w_img.rows())
    raise(Errc::ShapeMismatch, "dctg: channel count differs from w_img rows");
  if (params.pos.rows() != n_img || params.pos.cols() != d)
    raise(Errc::ShapeMismatch, "dctg: positional table must be N_i x d");
  if (params.w_o.rows() != d || params.w_o.cols() != c)
    raise(Errc::ShapeMismatch, "dctg: w_o must be d x C");
  if (params.ln1_gain.size() != d || params.ln1_bias.size() != d)
    raise(Errc::ShapeMismatch, "dctg: ln1 parameters must have size d");
  if (params.ln2_gain.size() != c || params.ln2_bias.size() != c)
    raise(Errc::ShapeMismatch, "dctg: ln2 parameters must have size C");

  const RowMat<Scalar> text_proj = text_embedding * params.w_text;           // N_t x d
  RowMat<Scalar> img_proj = features.tokens * params.w_img + params.pos;     // N_i x d
  img_proj = layer_norm_rows<Scalar>(img_proj, params.ln1_gain, params.ln1_bias, params.epsilon);

  const RowMat<Scalar> attended = mha_cross_attention<Scalar>(img_proj, text_proj, params);
  const RowMat<Scalar> projected = attended * params.w_o;  // N_i x C

  BottleneckFeatures<Scalar> out = features;
  out.tokens = layer_norm_rows<Scalar>(features.tokens + projected, params.ln2_gain,
                                       params.ln2_bias, params.epsilon);
  return out;
}

/// Deterministic prompt template describing the case.
inline std::string build_prompt(const std::string& lesion_type,
                                const std::vector<std::string>& modalities) {
  if (lesion_type.empty()) raise(Errc::EmptyInput, "build_prompt: empty lesion type");
  if (modalities.empty()) raise(Errc::EmptyInput, "build_prompt: empty modality list");
  std::string joined;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (i) joined += ", ";
    joined += modalities[i];
  }
  return "A " + lesion_type + " case acquired with modalities: " + joined + ".";
}

}  // namespace rforge
