#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "replay_forge/dctg.hpp"
#include "replay_forge/error.hpp"
#include "replay_forge/vol1.hpp"

namespace rforge {

inline constexpr int kDctgParamsVersion = 1;

namespace detail {

template <typename Scalar>
RowMat<Scalar> matrix_from_tensor(const TensorF& t, const std::string& what) {
  if (t.shape.size() != 2)
    raise(Errc::ShapeMismatch, what + ": expected a 2-D tensor");
  RowMat<Scalar> m(t.shape[0], t.shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<Scalar>(t.data[r * m.cols() + c]);
  return m;
}

template <typename Scalar>
VecX<Scalar> vector_from_tensor(const TensorF& t, const std::string& what) {
  if (t.shape.size() != 1)
    raise(Errc::ShapeMismatch, what + ": expected a 1-D tensor");
  VecX<Scalar> v(t.shape[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(t.data[i]);
  return v;
}

template <typename Scalar>
TensorF tensor_from_matrix(const RowMat<Scalar>& m) {
  auto t = TensorF::zeros(
      {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data[r * m.cols() + c] = static_cast<float>(m(r, c));
  return t;
}

template <typename Scalar>
TensorF tensor_from_vector(const VecX<Scalar>& v) {
  auto t = TensorF::zeros({static_cast<std::uint32_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[i] = static_cast<float>(v[i]);
  return t;
}

inline TensorF load_f32(const std::filesystem::path& path, const std::string& what) {
  auto any = read_vol1_file(path);
  auto* t = std::get_if<TensorF>(&any);
  if (!t) raise(Errc::BadDtype, what + ": " + path.string() + " is not an f32 tensor");
  return std::move(*t);
}

}  // namespace detail

/// Parameter directory layout: descriptor.json naming one VOL1 tensor file per
/// parameter, all f32.
template <typename Scalar>
void save_dctg_params(const DctgParams<Scalar>& p, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::map<std::string, TensorF> tensors{
      {"w_text", detail::tensor_from_matrix(p.w_text)},
      {"w_img", detail::tensor_from_matrix(p.w_img)},
      {"pos", detail::tensor_from_matrix(p.pos)},
      {"w_q", detail::tensor_from_matrix(p.w_q)},
      {"w_k", detail::tensor_from_matrix(p.w_k)},
      {"w_v", detail::tensor_from_matrix(p.w_v)},
      {"w_o", detail::tensor_from_matrix(p.w_o)},
      {"ln1_gain", detail::tensor_from_vector(p.ln1_gain)},
      {"ln1_bias", detail::tensor_from_vector(p.ln1_bias)},
      {"ln2_gain", detail::tensor_from_vector(p.ln2_gain)},
      {"ln2_bias", detail::tensor_from_vector(p.ln2_bias)},
  };
  nlohmann::json desc;
  desc["version"] = kDctgParamsVersion;
  desc["d"] = p.model_dim();
  desc["heads"] = p.heads;
  desc["channels"] = p.channel_dim();
  desc["epsilon"] = static_cast<double>(p.epsilon);
  desc["tensors"] = nlohmann::json::object();
  for (const auto& [name, tensor] : tensors) {
    const auto filename = name + ".vol1";
    write_vol1_file(dir / filename, tensor);
    desc["tensors"][name] = filename;
  }
  std::ofstream out(dir / "descriptor.json");
  if (!out) raise(Errc::IoFailure, "cannot write " + (dir / "descriptor.json").string());
  out << desc.dump(2) << '\n';
}

template <typename Scalar>
DctgParams<Scalar> load_dctg_params(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(dir / "descriptor.json");
  if (!in) raise(Errc::IoFailure, "cannot open " + (dir / "descriptor.json").string());
  nlohmann::json desc;
  try {
    in >> desc;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("dctg descriptor: ") + e.what());
  }
  if (!desc.is_object() || desc.value("version", -1) != kDctgParamsVersion)
    raise(Errc::SchemaMismatch, "dctg descriptor: unsupported version");

  DctgParams<Scalar> p;
  try {
    p.heads = desc.at("heads").get<int>();
    p.epsilon = static_cast<Scalar>(desc.at("epsilon").get<double>());
    const auto& tensors = desc.at("tensors");
    auto file = [&](const char* name) { return dir / tensors.at(name).get<std::string>(); };
    p.w_text = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_text"), "w_text"),
                                                  "w_text");
    p.w_img = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_img"), "w_img"),
                                                 "w_img");
    p.pos = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("pos"), "pos"), "pos");
    p.w_q = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_q"), "w_q"), "w_q");
    p.w_k = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_k"), "w_k"), "w_k");
    p.w_v = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_v"), "w_v"), "w_v");
    p.w_o = detail::matrix_from_tensor<Scalar>(detail::load_f32(file("w_o"), "w_o"), "w_o");
    p.ln1_gain = detail::vector_from_tensor<Scalar>(detail::load_f32(file("ln1_gain"), "ln1_gain"),
                                                    "ln1_gain");
    p.ln1_bias = detail::vector_from_tensor<Scalar>(detail::load_f32(file("ln1_bias"), "ln1_bias"),
                                                    "ln1_bias");
    p.ln2_gain = detail::vector_from_tensor<Scalar>(detail::load_f32(file("ln2_gain"), "ln2_gain"),
                                                    "ln2_gain");
    p.ln2_bias = detail::vector_from_tensor<Scalar>(detail::load_f32(file("ln2_bias"), "ln2_bias"),
                                                    "ln2_bias");
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::CorruptState, std::string("dctg descriptor: ") + e.what());
  }

  const int d = desc.value("d", p.model_dim());
  const int c = desc.value("channels", p.channel_dim());
  if (p.model_dim() != d || p.channel_dim() != c || p.w_q.rows() != d || p.w_k.rows() != d ||
      p.w_v.rows() != d || p.w_text.cols() != d || p.w_img.cols() != d || p.pos.cols() != d ||
      p.w_o.rows() != d || p.w_img.rows() != c)
    raise(Errc::ShapeMismatch, "dctg params: tensor shapes disagree with the descriptor");
  return p;
}

/// Text embeddings travel as 2-D f32 VOL1 tensors (N_t x embed width).
template <typename Scalar>
RowMat<Scalar> load_text_embedding(const std::filesystem::path& path) {
  return detail::matrix_from_tensor<Scalar>(detail::load_f32(path, "text embedding"),
                                            "text embedding");
}

}  // namespace rforge
