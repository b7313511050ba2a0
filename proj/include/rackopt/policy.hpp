// Copyright 2026 The rackopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "rackopt/autodiff.hpp"
#include "rackopt/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rackopt {

struct PolicyHyperparams {
  int d_model = 64;
  int heads = 4;
  int layers = 3;
  int ff_width = 256;
  double logit_clip = 10.0;
  double norm_epsilon = 1e-5;

  bool operator==(const PolicyHyperparams&) const = default;
};

template <typename T>
struct EncoderLayerWeights {
  T query, key, value, out;
  T norm1_gain, norm1_bias;
  T ff1_weight, ff1_bias, ff2_weight, ff2_bias;
  T norm2_gain, norm2_bias;
};

/// Encoder-decoder weights with element type T (a matrix, a tape handle, a
/// moment buffer). tensors()/names() enumerate them in one canonical order,
/// which is also the checkpoint order.
template <typename T>
struct PolicyWeights {
  T embed_weight, embed_bias;
  std::vector<EncoderLayerWeights<T>> layers;
  T decoder_query, decoder_key, decoder_value, decoder_out, decoder_logit_key;

  std::vector<T*> tensors() {
    std::vector<T*> out{&embed_weight, &embed_bias};
    for (auto& l : layers) {
      for (T* t : {&l.query, &l.key, &l.value, &l.out, &l.norm1_gain, &l.norm1_bias, &l.ff1_weight,
                   &l.ff1_bias, &l.ff2_weight, &l.ff2_bias, &l.norm2_gain, &l.norm2_bias}) {
        out.push_back(t);
      }
    }
    for (T* t : {&decoder_query, &decoder_key, &decoder_value, &decoder_out, &decoder_logit_key}) {
      out.push_back(t);
    }
    return out;
  }

  std::vector<const T*> tensors() const {
    auto mutable_view = const_cast<PolicyWeights*>(this)->tensors();
    return {mutable_view.begin(), mutable_view.end()};
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out{"embed.weight", "embed.bias"};
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "encoder." + std::to_string(i) + ".";
      for (const char* n : {"query", "key", "value", "out", "norm1.gain", "norm1.bias", "ff1.weight",
                            "ff1.bias", "ff2.weight", "ff2.bias", "norm2.gain", "norm2.bias"}) {
        out.push_back(p + n);
      }
    }
    for (const char* n : {"decoder.query", "decoder.key", "decoder.value", "decoder.out",
                          "decoder.logit_key"}) {
      out.push_back(n);
    }
    return out;
  }

  /// Same layout with every tensor mapped through f.
  template <typename U, typename F>
  PolicyWeights<U> map(F&& f) const {
    PolicyWeights<U> out;
    out.layers.resize(layers.size());
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = f(*src[i]);
    return out;
  }
};

template <typename Scalar>
using PolicyMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct PolicyParams {
  PolicyHyperparams hyper;
  PolicyWeights<PolicyMatrix<Scalar>> weights;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : weights.tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }

  bool all_finite() const {
    for (const auto* t : weights.tensors()) {
      if (!t->allFinite()) return false;
    }
    return true;
  }

  template <typename Other>
  PolicyParams<Other> cast() const {
    return {hyper, weights.template map<PolicyMatrix<Other>>(
                       [](const PolicyMatrix<Scalar>& m) { return m.template cast<Other>().eval(); })};
  }

  bool operator==(const PolicyParams& other) const {
    if (!(hyper == other.hyper) || weights.layers.size() != other.weights.layers.size()) return false;
    auto a = weights.tensors();
    auto b = other.weights.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols() || *a[i] != *b[i]) return false;
    }
    return true;
  }
};

/// Linear weights uniform in +-1/sqrt(fan_in), normalization gains one,
/// normalization biases zero.
template <typename Scalar>
PolicyParams<Scalar> init_policy(const PolicyHyperparams& hyper, std::uint64_t seed) {
  if (hyper.d_model % hyper.heads != 0) throw std::invalid_argument("d_model must divide by heads");
  CounterRng rng(seed);
  const Eigen::Index d = hyper.d_model;
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    PolicyMatrix<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    return m;
  };
  auto ones = [&] { return PolicyMatrix<Scalar>::Ones(1, d).eval(); };
  auto zeros = [&] { return PolicyMatrix<Scalar>::Zero(1, d).eval(); };

  PolicyParams<Scalar> p;
  p.hyper = hyper;
  auto& w = p.weights;
  w.embed_weight = uniform(2, d, 2);
  w.embed_bias = uniform(1, d, 2);
  for (int l = 0; l < hyper.layers; ++l) {
    EncoderLayerWeights<PolicyMatrix<Scalar>> layer;
    layer.query = uniform(d, d, d);
    layer.key = uniform(d, d, d);
    layer.value = uniform(d, d, d);
    layer.out = uniform(d, d, d);
    layer.norm1_gain = ones();
    layer.norm1_bias = zeros();
    layer.ff1_weight = uniform(d, hyper.ff_width, d);
    layer.ff1_bias = uniform(1, hyper.ff_width, d);
    layer.ff2_weight = uniform(hyper.ff_width, d, hyper.ff_width);
    layer.ff2_bias = uniform(1, d, hyper.ff_width);
    layer.norm2_gain = ones();
    layer.norm2_bias = zeros();
    w.layers.push_back(std::move(layer));
  }
  w.decoder_query = uniform(2 * d, d, 2 * d);
  w.decoder_key = uniform(d, d, d);
  w.decoder_value = uniform(d, d, d);
  w.decoder_out = uniform(d, d, d);
  w.decoder_logit_key = uniform(d, d, d);
  return p;
}

/// The policy network recorded on a tape: an attention encoder over rack
/// types followed by a pointer decoder that emits one type per step.
template <typename Scalar>
class PolicyGraph {
 public:
  using Matrix = PolicyMatrix<Scalar>;
  using TapeType = Tape<Scalar>;
  using Var = typename TapeType::Var;

  explicit PolicyGraph(const PolicyParams<Scalar>& params) : hyper_(params.hyper) {
    if (!params.all_finite()) throw std::invalid_argument("policy weights contain NaN or Inf");
    weights_ = params.weights.template map<Var>([this](const Matrix& m) { return tape_.leaf(m); });
  }

  TapeType& tape() { return tape_; }
  const PolicyWeights<Var>& weights() const { return weights_; }

  /// Encodes |K| x 2 features into |K| x d embeddings; also caches the
  /// decoder keys/values.
  Var encode(const Matrix& features) {
    auto& t = tape_;
    const auto& w = weights_;
    Var h = t.add_row(t.matmul(t.constant(features), w.embed_weight), w.embed_bias);
    const Scalar eps = static_cast<Scalar>(hyper_.norm_epsilon);
    for (const auto& layer : w.layers) {
      Var attended = t.matmul(self_attention(h, layer), layer.out);
      Var h1 = t.add_row(t.mul_row(t.normalize_rows(t.add(h, attended), eps), layer.norm1_gain),
                         layer.norm1_bias);
      Var hidden = t.relu(t.add_row(t.matmul(h1, layer.ff1_weight), layer.ff1_bias));
      Var ff = t.add_row(t.matmul(hidden, layer.ff2_weight), layer.ff2_bias);
      h = t.add_row(t.mul_row(t.normalize_rows(t.add(h1, ff), eps), layer.norm2_gain),
                    layer.norm2_bias);
    }
    embeddings_ = h;
    graph_ = t.mean_rows(h);
    keys_ = t.matmul(h, w.decoder_key);
    values_ = t.matmul(h, w.decoder_value);
    logit_keys_ = t.matmul(h, w.decoder_logit_key);
    zero_context_ = t.constant(Matrix::Zero(1, hyper_.d_model));
    encoded_ = true;
    return h;
  }

  Var embeddings() const { return embeddings_; }
  Var graph_embedding() const { return graph_; }

  /// Log-probabilities (1 x |K|) of the next type given the last selected
  /// one (-1 for none) and the mask of already selected types.
  Var step_log_probs(Eigen::Index last, std::span<const char> selected) {
    if (!encoded_) throw std::logic_error("encode() must run before decoding");
    auto& t = tape_;
    const auto& w = weights_;
    Var last_embedding = last < 0 ? zero_context_ : t.row(embeddings_, last);
    const Var parts[] = {graph_, last_embedding};
    Var query = t.matmul(t.concat_cols(parts), w.decoder_query);

    const int heads = hyper_.heads;
    const Eigen::Index dk = hyper_.d_model / heads;
    const Scalar inv_sqrt_dk = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dk)));
    std::vector<Var> glimpses;
    glimpses.reserve(heads);
    for (int head = 0; head < heads; ++head) {
      const Eigen::Index at = head * dk;
      Var scores = t.scale(t.matmul_nt(t.cols(query, at, dk), t.cols(keys_, at, dk)), inv_sqrt_dk);
      glimpses.push_back(t.matmul(t.softmax_rows(scores, selected), t.cols(values_, at, dk)));
    }
    Var glimpse = t.matmul(t.concat_cols(glimpses), w.decoder_out);
    const Scalar inv_sqrt_d =
        static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hyper_.d_model)));
    Var logits = t.scale(t.matmul_nt(glimpse, logit_keys_), inv_sqrt_d);
    Var clipped = t.scale(t.tanh(logits), static_cast<Scalar>(hyper_.logit_clip));
    return t.log_softmax_masked(clipped, selected);
  }

 private:
  Var self_attention(Var h, const EncoderLayerWeights<Var>& layer) {
    auto& t = tape_;
    Var q = t.matmul(h, layer.query);
    Var k = t.matmul(h, layer.key);
    Var v = t.matmul(h, layer.value);
    const int heads = hyper_.heads;
    const Eigen::Index dk = hyper_.d_model / heads;
    const Scalar inv_sqrt_dk = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dk)));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (int head = 0; head < heads; ++head) {
      const Eigen::Index at = head * dk;
      Var scores = t.scale(t.matmul_nt(t.cols(q, at, dk), t.cols(k, at, dk)), inv_sqrt_dk);
      outs.push_back(t.matmul(t.softmax_rows(scores), t.cols(v, at, dk)));
    }
    return t.concat_cols(outs);
  }

  PolicyHyperparams hyper_;
  TapeType tape_;
  PolicyWeights<Var> weights_;
  Var embeddings_{}, graph_{}, keys_{}, values_{}, logit_keys_{}, zero_context_{};
  bool encoded_ = false;
};

}  // namespace rackopt
