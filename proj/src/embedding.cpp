#include "codegrag/embedding.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "httplib.h"
#include "json.hpp"
#include "url.hpp"

namespace codegrag {

namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<std::string> subtokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_alnum(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_alnum(text[j])) ++j;
    const std::string_view word = text.substr(i, j - i);
    std::size_t start = 0;
    for (std::size_t k = 1; k < word.size(); ++k) {
      const char prev = word[k - 1];
      const char cur = word[k];
      const bool camel = is_upper(cur) && (is_lower(prev) || is_digit(prev));
      const bool acronym_end = is_upper(cur) && is_upper(prev) && k + 1 < word.size() && is_lower(word[k + 1]);
      if (camel || acronym_end) {
        out.push_back(lowercase(std::string(word.substr(start, k - start))));
        start = k;
      }
    }
    out.push_back(lowercase(std::string(word.substr(start))));
    i = j;
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingVector fallback_embed(std::string_view text, int dim) {
  if (dim <= 0) throw Error(ErrorCode::DimensionMismatch, "fallback dim must be positive");
  EmbeddingVector v = EmbeddingVector::Zero(dim);
  for (const auto& tok : subtokenize(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  return l2_normalize(v);
}

FallbackEncoder::FallbackEncoder(int dim) : dim_(dim) {
  if (dim <= 0) throw Error(ErrorCode::DimensionMismatch, "fallback dim must be positive");
}

std::string FallbackEncoder::fingerprint() const {
  return std::string(kFallbackFingerprint) + "/" + std::to_string(dim_);
}

std::vector<EmbeddingVector> FallbackEncoder::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(fallback_embed(t, dim_));
  return out;
}

RemoteEncoder::RemoteEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw Error(ErrorCode::UsageError, "remote encoder needs an endpoint URL");
  const auto [origin, prefix] = detail::split_url(cfg_.endpoint);
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  auto res = client.Get(prefix + "/health");
  if (!res) {
    throw Error(ErrorCode::EncoderUnavailable,
                "health check to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::EncoderUnavailable, "health check returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    const int reported = j.at("dim").get<int>();
    model_ = j.value("model", std::string("unknown"));
    if (cfg_.dim > 0 && reported != cfg_.dim) {
      throw Error(ErrorCode::DimensionMismatch, "encoder reports dim " + std::to_string(reported) +
                                                    ", configured " + std::to_string(cfg_.dim));
    }
    dim_ = reported;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::EncoderUnavailable, std::string("malformed health response: ") + ex.what());
  }
  if (dim_ <= 0) throw Error(ErrorCode::DimensionMismatch, "encoder reports non-positive dim");
}

std::string RemoteEncoder::fingerprint() const { return "remote:" + model_ + "/" + std::to_string(dim_); }

std::vector<EmbeddingVector> RemoteEncoder::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const std::size_t step = cfg_.max_batch > 0 ? static_cast<std::size_t>(cfg_.max_batch) : texts.size();
  for (std::size_t i = 0; i < texts.size(); i += step) {
    std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                   texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), i + step)));
    auto vecs = embed_batch(chunk);
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEncoder::embed_batch(const std::vector<std::string>& texts) {
  const auto [origin, prefix] = detail::split_url(cfg_.endpoint);
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  const nlohmann::json body = {{"texts", texts}};
  auto res = client.Post(prefix + "/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EncoderUnavailable,
                "embed request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    std::string code;
    try {
      code = nlohmann::json::parse(res->body).value("error", std::string());
    } catch (const nlohmann::json::exception&) {
    }
    throw Error(ErrorCode::EncoderUnavailable,
                "embed returned HTTP " + std::to_string(res->status) + (code.empty() ? "" : " (" + code + ")"));
  }
  std::vector<EmbeddingVector> out;
  try {
    const auto j = nlohmann::json::parse(res->body);
    const int dim = j.at("dim").get<int>();
    if (dim != dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embed response dim " + std::to_string(dim) + ", expected " + std::to_string(dim_));
    }
    const auto& vectors = j.at("vectors");
    if (vectors.size() != texts.size()) {
      throw Error(ErrorCode::EncoderUnavailable, "embed response has " + std::to_string(vectors.size()) +
                                                     " vectors for " + std::to_string(texts.size()) + " texts");
    }
    for (const auto& row : vectors) {
      if (static_cast<int>(row.size()) != dim_)
        throw Error(ErrorCode::DimensionMismatch, "embed vector of length " + std::to_string(row.size()));
      EmbeddingVector v(dim_);
      for (int k = 0; k < dim_; ++k) v[k] = row[static_cast<std::size_t>(k)].get<double>();
      if (!v.allFinite()) throw Error(ErrorCode::EncoderUnavailable, "embed vector has non-finite components");
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::EncoderUnavailable, std::string("malformed embed response: ") + ex.what());
  }
  return out;
}

std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& cfg) {
  if (cfg.provider == EncoderProvider::remote) return std::make_unique<RemoteEncoder>(cfg);
  return std::make_unique<FallbackEncoder>(cfg.dim > 0 ? cfg.dim : kFallbackDim);
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts, TextEncoder& encoder) {
  if (texts.empty()) return {};
  auto out = encoder.embed(texts);
  if (out.size() != texts.size())
    throw Error(ErrorCode::EncoderUnavailable, "encoder returned a different number of vectors");
  for (const auto& v : out) {
    if (v.size() != encoder.dim()) throw Error(ErrorCode::DimensionMismatch, "encoder returned wrong dim");
  }
  return out;
}

void EmbeddingCache::prefetch(const std::vector<std::string>& labels) {
  std::vector<std::string> missing;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!cache_.count(l) && seen.insert(l).second) missing.push_back(l);
  }
  if (missing.empty()) return;
  auto vecs = embed_texts(missing, encoder_);
  misses_ += missing.size();
  for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(vecs[i]));
}

const EmbeddingVector& EmbeddingCache::get(const std::string& label) {
  auto it = cache_.find(label);
  if (it != cache_.end()) return it->second;
  prefetch({label});
  return cache_.at(label);
}

}  // namespace codegrag
