#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "codegrag/error.hpp"

namespace codegrag {

using EmbeddingVector = Eigen::VectorXd;

/// Scales v to unit Euclidean length; the zero vector maps to itself.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (n == Scalar(0)) return v;
  return v / n;
}

/// Cosine similarity; 0 when either side is the zero vector.
template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with different dims");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

/// Lower-cased identifier pieces: split on non-alphanumerics, underscores
/// and case changes ("HTTPServer" -> http, server). Digits stay attached.
std::vector<std::string> subtokenize(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

inline constexpr int kFallbackDim = 256;
inline constexpr std::string_view kFallbackFingerprint = "fnv1a64-v1";

/// Signed feature hashing of the subtokens into dim buckets, L2-normalized.
EmbeddingVector fallback_embed(std::string_view text, int dim = kFallbackDim);

enum class EncoderProvider { fallback, remote };

struct EncoderConfig {
  EncoderProvider provider = EncoderProvider::fallback;
  std::string endpoint;  // base URL of the embedding service, remote only
  int dim = kFallbackDim;  // remote: 0 means "take it from /health"
  double timeout_seconds = 30.0;
  int max_batch = 64;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual int dim() const = 0;
  virtual std::string fingerprint() const = 0;
  /// One vector per text, in order.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

class FallbackEncoder final : public TextEncoder {
 public:
  explicit FallbackEncoder(int dim = kFallbackDim);
  int dim() const override { return dim_; }
  std::string fingerprint() const override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  int dim_;
};

/// Client for the embedding service: POST /embed, GET /health.
class RemoteEncoder final : public TextEncoder {
 public:
  explicit RemoteEncoder(EncoderConfig cfg);
  int dim() const override { return dim_; }
  std::string fingerprint() const override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

  EncoderConfig cfg_;
  int dim_ = 0;
  std::string model_;
};

std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& cfg);

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts, TextEncoder& encoder);

/// Memoizes label embeddings so repeated node/edge texts are encoded once.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(TextEncoder& encoder) : encoder_(encoder) {}

  int dim() const { return encoder_.dim(); }
  /// Embeds all uncached labels in one batch.
  void prefetch(const std::vector<std::string>& labels);
  const EmbeddingVector& get(const std::string& label);
  std::size_t size() const { return cache_.size(); }
  std::size_t misses() const { return misses_; }

 private:
  TextEncoder& encoder_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t misses_ = 0;
};

}  // namespace codegrag
