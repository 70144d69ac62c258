#pragma once

// Independent reference implementations used only by tests. These deliberately
// take different algorithmic routes than the library (BFS distance maps vs
// iterated sweeps, union-find vs flood fill, triple loops vs Eigen products)
// so that agreement is meaningful.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "replay_forge/dctg.hpp"
#include "replay_forge/prng.hpp"
#include "replay_forge/tensor.hpp"
#include "replay_forge/volume.hpp"

namespace oracle {

// ---- BFS L1 distance maps ------------------------------------------------

// Distance (in face steps) from each voxel to the nearest foreground voxel.
// Background-free volumes get 0 everywhere foreground, INT_MAX elsewhere.
inline std::vector<int> bfs_distance_to_foreground(const rforge::LabelMask& m) {
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  const int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(nx) * ny * nz, inf);
  std::deque<std::array<int, 3>> q;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        if (m.at(i, j, k) != 0) {
          dist[m.index(i, j, k)] = 0;
          q.push_back({i, j, k});
        }
  static const int offs[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  while (!q.empty()) {
    auto [i, j, k] = q.front();
    q.pop_front();
    const int d = dist[m.index(i, j, k)];
    for (const auto& o : offs) {
      const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
      if (!m.in_bounds(ni, nj, nk)) continue;
      auto& dn = dist[m.index(ni, nj, nk)];
      if (dn > d + 1) {
        dn = d + 1;
        q.push_back({ni, nj, nk});
      }
    }
  }
  return dist;
}

// Distance from each voxel to the nearest background voxel, where everything
// outside the volume is background. Runs the plain multi-source BFS on a grid
// padded with one background layer per side.
inline std::vector<int> bfs_distance_to_background(const rforge::LabelMask& m) {
  auto padded = rforge::LabelMask::zeros({m.dims.x() + 2, m.dims.y() + 2, m.dims.z() + 2});
  for (int i = 0; i < m.dims.x(); ++i)
    for (int j = 0; j < m.dims.y(); ++j)
      for (int k = 0; k < m.dims.z(); ++k) padded.at(i + 1, j + 1, k + 1) = m.at(i, j, k);
  auto inverted = padded;
  for (Eigen::Index v = 0; v < inverted.size(); ++v) inverted.data[v] = padded.data[v] ? 0 : 1;
  auto padded_dist = bfs_distance_to_foreground(inverted);
  std::vector<int> dist(static_cast<std::size_t>(m.size()));
  for (int i = 0; i < m.dims.x(); ++i)
    for (int j = 0; j < m.dims.y(); ++j)
      for (int k = 0; k < m.dims.z(); ++k)
        dist[m.index(i, j, k)] = padded_dist[padded.index(i + 1, j + 1, k + 1)];
  return dist;
}

inline rforge::LabelMask dilate_by_distance(const rforge::LabelMask& m, int steps) {
  auto dist = bfs_distance_to_foreground(m);
  auto out = rforge::LabelMask::zeros(m.dims);
  for (Eigen::Index v = 0; v < out.size(); ++v)
    out.data[v] = (dist[static_cast<std::size_t>(v)] <= steps) ? 1 : 0;
  return out;
}

inline rforge::LabelMask erode_by_distance(const rforge::LabelMask& m, int steps) {
  auto dist = bfs_distance_to_background(m);
  auto out = rforge::LabelMask::zeros(m.dims);
  for (Eigen::Index v = 0; v < out.size(); ++v)
    out.data[v] = (m.data[v] != 0 && dist[static_cast<std::size_t>(v)] > steps) ? 1 : 0;
  return out;
}

inline rforge::LabelMask band_by_distance(const rforge::LabelMask& gt, int inward, int outward) {
  auto d = dilate_by_distance(gt, outward);
  auto e = erode_by_distance(gt, inward);
  auto out = rforge::LabelMask::zeros(gt.dims);
  for (Eigen::Index v = 0; v < out.size(); ++v)
    out.data[v] = (d.data[v] != 0 && e.data[v] == 0) ? 1 : 0;
  return out;
}

// ---- Union-find connected components --------------------------------------

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  }
};

inline int count_components_union_find(const rforge::LabelMask& m, rforge::Connectivity conn) {
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  UnionFind uf(static_cast<std::size_t>(nx) * ny * nz);
  const bool diag = conn == rforge::Connectivity::full26;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        if (m.at(i, j, k) == 0) continue;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            for (int dk = -1; dk <= 1; ++dk) {
              if (di == 0 && dj == 0 && dk == 0) continue;
              if (!diag && std::abs(di) + std::abs(dj) + std::abs(dk) != 1) continue;
              const int ni = i + di, nj = j + dj, nk = k + dk;
              if (!m.in_bounds(ni, nj, nk) || m.at(ni, nj, nk) == 0) continue;
              uf.merge(static_cast<int>(m.index(i, j, k)), static_cast<int>(m.index(ni, nj, nk)));
            }
      }
  int count = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        const int v = static_cast<int>(m.index(i, j, k));
        if (m.at(i, j, k) != 0 && uf.find(v) == v) ++count;
      }
  return count;
}

// ---- Scalar scoring re-implementation --------------------------------------

struct ScalarScores {
  double conf = 0;
  std::int64_t size = 0;
  double unc = 0;
  double comp = 0;
};

inline ScalarScores score_sample_scalar(const rforge::ProbabilityVolume& prob,
                                        const rforge::LabelMask& gt, double tau, int inward,
                                        int outward, rforge::Connectivity conn) {
  ScalarScores s;
  double acc = 0;
  std::int64_t lesion = 0;
  for (Eigen::Index v = 0; v < gt.size(); ++v) {
    if (gt.data[v] != 0) {
      ++lesion;
      const double p = prob.data[v];
      if (p > tau) acc += p;
    }
  }
  s.size = lesion;
  s.conf = acc / static_cast<double>(lesion);
  auto band = band_by_distance(gt, inward, outward);
  double bacc = 0;
  std::int64_t bn = 0;
  for (Eigen::Index v = 0; v < band.size(); ++v)
    if (band.data[v] != 0) {
      bacc += std::abs(static_cast<double>(prob.data[v]) - 0.5);
      ++bn;
    }
  s.unc = bacc / static_cast<double>(bn);
  const int c = count_components_union_find(gt, conn);
  s.comp = static_cast<double>(c) * c / static_cast<double>(lesion);
  return s;
}

inline std::vector<double> minmax_scalar(const std::vector<double>& v) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = (hi == lo) ? 0.5 : (v[i] - lo) / (hi - lo);
  return out;
}

// ---- Naive 3D convolution ---------------------------------------------------

// Valid cross-correlation: w [co,ci,kx,ky,kz] applied to x [ci,X,Y,Z].
inline std::vector<double> conv3d_naive(const rforge::TensorF& w, const rforge::TensorF& x,
                                        std::vector<std::uint32_t>& out_shape) {
  const auto co = w.shape[0], ci = w.shape[1], kx = w.shape[2], ky = w.shape[3], kz = w.shape[4];
  const auto X = x.shape[1], Y = x.shape[2], Z = x.shape[3];
  const auto ox = X - kx + 1, oy = Y - ky + 1, oz = Z - kz + 1;
  out_shape = {co, ox, oy, oz};
  std::vector<double> out(static_cast<std::size_t>(co) * ox * oy * oz, 0.0);
  auto widx = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d,
                  std::uint32_t e) {
    return (((static_cast<std::size_t>(a) * ci + b) * kx + c) * ky + d) * kz + e;
  };
  auto xidx = [&](std::uint32_t c, std::uint32_t a, std::uint32_t b, std::uint32_t d) {
    return ((static_cast<std::size_t>(c) * X + a) * Y + b) * Z + d;
  };
  auto oidx = [&](std::uint32_t c, std::uint32_t a, std::uint32_t b, std::uint32_t d) {
    return ((static_cast<std::size_t>(c) * ox + a) * oy + b) * oz + d;
  };
  for (std::uint32_t o = 0; o < co; ++o)
    for (std::uint32_t i = 0; i < ox; ++i)
      for (std::uint32_t j = 0; j < oy; ++j)
        for (std::uint32_t k = 0; k < oz; ++k) {
          double acc = 0;
          for (std::uint32_t c = 0; c < ci; ++c)
            for (std::uint32_t a = 0; a < kx; ++a)
              for (std::uint32_t b = 0; b < ky; ++b)
                for (std::uint32_t d = 0; d < kz; ++d)
                  acc += static_cast<double>(w.data[widx(o, c, a, b, d)]) *
                         static_cast<double>(x.data[xidx(c, i + a, j + b, k + d)]);
          out[oidx(o, i, j, k)] = acc;
        }
  return out;
}

// ---- Naive attention / DCTG reference ---------------------------------------

// Everything below is explicit triple loops on purpose; no Eigen products.

inline rforge::RowMat<double> matmul_naive(const rforge::RowMat<double>& a,
                                           const rforge::RowMat<double>& b) {
  rforge::RowMat<double> c(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double acc = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

inline void layer_norm_rows_naive(rforge::RowMat<double>& x, const rforge::VecX<double>& gain,
                                  const rforge::VecX<double>& bias, double eps) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= static_cast<double>(x.cols());
    double var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      x(r, c) = (x(r, c) - mean) / std::sqrt(var + eps) * gain[c] + bias[c];
  }
}

inline rforge::RowMat<double> mha_naive(const rforge::RowMat<double>& img,
                                        const rforge::RowMat<double>& txt,
                                        const rforge::DctgParams<double>& p) {
  const auto d = p.model_dim();
  const int dh = d / p.heads;
  auto q = matmul_naive(img, p.w_q);
  auto k = matmul_naive(txt, p.w_k);
  auto v = matmul_naive(txt, p.w_v);
  rforge::RowMat<double> out(img.rows(), d);
  for (int h = 0; h < p.heads; ++h) {
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
      // logits for this query against every text token
      std::vector<double> logits(static_cast<std::size_t>(txt.rows()));
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < txt.rows(); ++j) {
        double acc = 0;
        for (int c = 0; c < dh; ++c) acc += q(i, h * dh + c) * k(j, h * dh + c);
        logits[static_cast<std::size_t>(j)] = acc / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, logits[static_cast<std::size_t>(j)]);
      }
      double z = 0;
      for (auto& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      for (int c = 0; c < dh; ++c) {
        double acc = 0;
        for (Eigen::Index j = 0; j < txt.rows(); ++j)
          acc += logits[static_cast<std::size_t>(j)] / z * v(j, h * dh + c);
        out(i, h * dh + c) = acc;
      }
    }
  }
  return out;
}

inline rforge::RowMat<double> dctg_naive(const rforge::RowMat<double>& img_tokens,
                                         const rforge::RowMat<double>& text,
                                         const rforge::DctgParams<double>& p) {
  auto tproj = matmul_naive(text, p.w_text);
  auto xproj = matmul_naive(img_tokens, p.w_img);
  for (Eigen::Index i = 0; i < xproj.rows(); ++i)
    for (Eigen::Index j = 0; j < xproj.cols(); ++j) xproj(i, j) += p.pos(i, j);
  layer_norm_rows_naive(xproj, p.ln1_gain, p.ln1_bias, p.epsilon);
  auto y = mha_naive(xproj, tproj, p);
  auto o = matmul_naive(y, p.w_o);
  for (Eigen::Index i = 0; i < o.rows(); ++i)
    for (Eigen::Index j = 0; j < o.cols(); ++j) o(i, j) += img_tokens(i, j);
  layer_norm_rows_naive(o, p.ln2_gain, p.ln2_bias, p.epsilon);
  return o;
}

inline rforge::RowMat<double> random_matrix(rforge::SplitMix64& rng, Eigen::Index rows,
                                            Eigen::Index cols, double scale = 1.0) {
  rforge::RowMat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (rng.unit() * 2 - 1) * scale;
  return m;
}

inline rforge::DctgParams<double> random_dctg_params(rforge::SplitMix64& rng, int text_width,
                                                     int d, int c, Eigen::Index n_img, int heads) {
  rforge::DctgParams<double> p;
  p.w_text = random_matrix(rng, text_width, d, 0.5);
  p.w_img = random_matrix(rng, c, d, 0.5);
  p.pos = random_matrix(rng, n_img, d, 0.1);
  p.w_q = random_matrix(rng, d, d, 0.5);
  p.w_k = random_matrix(rng, d, d, 0.5);
  p.w_v = random_matrix(rng, d, d, 0.5);
  p.w_o = random_matrix(rng, d, c, 0.5);
  p.ln1_gain = random_matrix(rng, d, 1, 1.0).col(0);
  p.ln1_bias = random_matrix(rng, d, 1, 0.2).col(0);
  p.ln2_gain = random_matrix(rng, c, 1, 1.0).col(0);
  p.ln2_bias = random_matrix(rng, c, 1, 0.2).col(0);
  p.heads = heads;
  return p;
}

// ---- Random mask / volume generators ---------------------------------------

inline rforge::LabelMask random_mask(rforge::SplitMix64& rng, Eigen::Vector3i dims,
                                     double density) {
  auto m = rforge::LabelMask::zeros(dims);
  for (Eigen::Index v = 0; v < m.size(); ++v) m.data[v] = rng.unit() < density ? 1 : 0;
  return m;
}

inline rforge::ProbabilityVolume random_prob(rforge::SplitMix64& rng, Eigen::Vector3i dims) {
  auto p = rforge::ProbabilityVolume::zeros(dims);
  for (Eigen::Index v = 0; v < p.size(); ++v) p.data[v] = static_cast<float>(rng.unit());
  return p;
}

}  // namespace oracle
