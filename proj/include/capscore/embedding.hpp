// Copyright 2026 The Capscore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capscore/error.hpp"

namespace capscore {

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const noexcept { return values.size(); }

  double norm() const {
    double sq = 0.0;
    for (const float v : values) sq += static_cast<double>(v) * v;
    return std::sqrt(sq);
  }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Cosine similarity clamped to [-1, 1]. The result is rounded to a
/// multiple of 2^-52 so that 1 - cos is exactly representable.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with dims " +
                                                   std::to_string(a.dim()) + " and " +
                                                   std::to_string(b.dim()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double x = a.values[i];
    const double y = b.values[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0 || nb == 0) throw Error(ErrorCode::kZeroNormVector, "cosine of zero vector");
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  c = std::clamp(c, -1.0, 1.0);
  return std::ldexp(std::nearbyint(std::ldexp(c, 52)), -52);
}

enum class SbertAggregation { kMean, kMax };

/// Sentence-embedding similarity of a candidate against its references.
inline double sbert_sc(const EmbeddingVector& candidate,
                       const std::vector<const EmbeddingVector*>& references,
                       SbertAggregation agg = SbertAggregation::kMean) {
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "SBERT_sc needs a reference");
  double sum = 0.0;
  double best = -1.0;
  for (const auto* ref : references) {
    const double c = cosine_similarity(candidate, *ref);
    sum += c;
    best = std::max(best, c);
  }
  return agg == SbertAggregation::kMax ? best : sum / static_cast<double>(references.size());
}

inline double sbert_sc(const EmbeddingVector& candidate,
                       const std::vector<EmbeddingVector>& references,
                       SbertAggregation agg = SbertAggregation::kMean) {
  std::vector<const EmbeddingVector*> ptrs;
  for (const auto& r : references) ptrs.push_back(&r);
  return sbert_sc(candidate, ptrs, agg);
}

/// Cosine distance between generated and reference sentence embeddings.
inline double sentence_loss(const EmbeddingVector& t, const EmbeddingVector& u) {
  return 1.0 - cosine_similarity(t, u);
}

inline double sentence_loss_batch(
    const std::vector<std::pair<EmbeddingVector, EmbeddingVector>>& pairs) {
  double total = 0.0;
  for (const auto& [t, u] : pairs) total += sentence_loss(t, u);
  return total;
}

/// Probability mass over token IDs.
class TokenDistribution {
 public:
  TokenDistribution() = default;

  /// Validates non-negativity and unit mass (within 1e-6). Zero entries are
  /// dropped.
  explicit TokenDistribution(std::map<int, double> probs) {
    double sum = 0.0;
    for (const auto& [id, p] : probs) {
      if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::kInvalidArgument, "probability outside [0,1]");
      sum += p;
      if (p > 0) probs_.emplace(id, p);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw Error(ErrorCode::kInvalidArgument, "probabilities sum to " + std::to_string(sum));
  }

  static TokenDistribution one_hot(int id) { return TokenDistribution({{id, 1.0}}); }

  double operator[](int id) const {
    auto it = probs_.find(id);
    return it == probs_.end() ? 0.0 : it->second;
  }

  const std::map<int, double>& probs() const noexcept { return probs_; }

 private:
  std::map<int, double> probs_;
};

/// -sum p(i) ln q(i). Returns +infinity when p puts mass where q has none.
inline double cross_entropy(const TokenDistribution& p, const TokenDistribution& q) {
  double h = 0.0;
  for (const auto& [id, pi] : p.probs()) {
    const double qi = q[id];
    if (qi <= 0) return std::numeric_limits<double>::infinity();
    h -= pi * std::log(qi);
  }
  return h;
}

inline double cross_entropy_batch(
    const std::vector<std::pair<TokenDistribution, TokenDistribution>>& items) {
  double total = 0.0;
  for (const auto& [p, q] : items) total += cross_entropy(p, q);
  return total;
}

// ---------------------------------------------------------------------------
// Embedding files

enum class EmbeddingKind { kWord, kSentence };

inline std::string_view embedding_kind_name(EmbeddingKind kind) {
  return kind == EmbeddingKind::kWord ? "word" : "sentence";
}

class EmbeddingStore {
 public:
  EmbeddingStore(EmbeddingKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::kFormatError, "embedding dim must be > 0");
  }

  EmbeddingKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void insert(std::string key, EmbeddingVector v) {
    if (v.dim() != dim_)
      throw Error(ErrorCode::kDimensionMismatch,
                  "entry '" + key + "' has " + std::to_string(v.dim()) +
                      " values, expected " + std::to_string(dim_));
    for (const float x : v.values) {
      if (!std::isfinite(x))
        throw Error(ErrorCode::kFormatError, "entry '" + key + "' has a non-finite value");
    }
    if (v.norm() == 0)
      throw Error(ErrorCode::kZeroNormVector, "entry '" + key + "' is a zero vector");
    if (!entries_.emplace(key, std::move(v)).second)
      throw Error(ErrorCode::kDuplicateKey, "duplicate key '" + key + "'");
  }

  const EmbeddingVector* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const EmbeddingVector& at(const std::string& key) const {
    if (const auto* v = find(key)) return *v;
    throw Error(ErrorCode::kMissingEmbedding, "no embedding for '" + key + "'");
  }

  const std::map<std::string, EmbeddingVector>& entries() const noexcept { return entries_; }

 private:
  EmbeddingKind kind_;
  std::size_t dim_;
  std::map<std::string, EmbeddingVector> entries_;
};

namespace detail {

struct EmbeddingHeader {
  EmbeddingKind kind;
  std::size_t dim;
  std::size_t count;
};

inline EmbeddingHeader parse_embedding_header(const std::string& line) {
  std::istringstream in(line);
  std::string magic, version, kind, dim, count, extra;
  if (!(in >> magic >> version >> kind >> dim >> count) || (in >> extra))
    throw Error(ErrorCode::kFormatError, "malformed header: '" + line + "'");
  if (magic != "CAPEMB") throw Error(ErrorCode::kFormatError, "bad magic '" + magic + "'");
  if (version != "1") throw Error(ErrorCode::kFormatError, "unsupported version " + version);
  EmbeddingHeader h{};
  if (kind == "word") {
    h.kind = EmbeddingKind::kWord;
  } else if (kind == "sentence") {
    h.kind = EmbeddingKind::kSentence;
  } else {
    throw Error(ErrorCode::kFormatError, "unknown embedding kind '" + kind + "'");
  }
  auto parse_size = [&](const std::string& s, const char* what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw Error(ErrorCode::kFormatError, std::string("bad ") + what + " '" + s + "'");
    return v;
  };
  h.dim = parse_size(dim, "dim");
  h.count = parse_size(count, "count");
  if (h.dim == 0) throw Error(ErrorCode::kFormatError, "dim must be > 0");
  return h;
}

inline bool is_binary_path(std::string_view path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".bin";
}

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace detail

/// Reads the text CAPEMB format:
///   CAPEMB 1 <word|sentence> <dim> <count>
///   <key>\t<v1> <v2> ... <v_dim>      (count lines)
inline EmbeddingStore parse_embeddings_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormatError, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::parse_embedding_header(line);
  EmbeddingStore store(header.kind, header.dim);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorCode::kFormatError, "row " + std::to_string(row) + " has no key");
    std::string key = line.substr(0, tab);
    EmbeddingVector v;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      float x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc())
        throw Error(ErrorCode::kFormatError, "row " + std::to_string(row) + " ('" + key +
                                                 "') has a malformed value");
      v.values.push_back(x);
      p = next;
    }
    store.insert(std::move(key), std::move(v));
  }
  if (row != header.count)
    throw Error(ErrorCode::kFormatError, "header declares " + std::to_string(header.count) +
                                             " rows, found " + std::to_string(row));
  return store;
}

/// Binary variant: the same header line, then per entry a little-endian
/// uint32 key length, the key bytes and dim little-endian float32 values.
inline EmbeddingStore parse_embeddings_binary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormatError, "missing header");
  const auto header = detail::parse_embedding_header(line);
  EmbeddingStore store(header.kind, header.dim);
  for (std::size_t row = 0; row < header.count; ++row) {
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof len))
      throw Error(ErrorCode::kFormatError, "truncated binary embedding file");
    len = detail::to_little_endian(len);
    std::string key(len, '\0');
    EmbeddingVector v;
    v.values.resize(header.dim);
    if (!in.read(key.data(), len) ||
        !in.read(reinterpret_cast<char*>(v.values.data()),
                 static_cast<std::streamsize>(header.dim * sizeof(float))))
      throw Error(ErrorCode::kFormatError, "truncated binary embedding file");
    if constexpr (std::endian::native == std::endian::big) {
      for (float& x : v.values) {
        auto bits = std::bit_cast<std::uint32_t>(x);
        x = std::bit_cast<float>(detail::to_little_endian(bits));
      }
    }
    store.insert(std::move(key), std::move(v));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::kFormatError, "trailing bytes after declared entries");
  return store;
}

/// Loads a CAPEMB file; paths ending in `.bin` use the binary variant.
inline EmbeddingStore load_embeddings(const std::string& path) {
  const bool binary = detail::is_binary_path(path);
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return binary ? parse_embeddings_binary(in) : parse_embeddings_text(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

inline void write_embeddings_text(const EmbeddingStore& store, std::ostream& out) {
  out << "CAPEMB 1 " << embedding_kind_name(store.kind()) << ' ' << store.dim() << ' '
      << store.size() << '\n';
  char buf[32];
  for (const auto& [key, v] : store.entries()) {
    out << key << '\t';
    for (std::size_t i = 0; i < v.dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v.values[i]));
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

inline void write_embeddings_binary(const EmbeddingStore& store, std::ostream& out) {
  out << "CAPEMB 1 " << embedding_kind_name(store.kind()) << ' ' << store.dim() << ' '
      << store.size() << '\n';
  for (const auto& [key, v] : store.entries()) {
    const std::uint32_t len = detail::to_little_endian(static_cast<std::uint32_t>(key.size()));
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    for (const float x : v.values) {
      const std::uint32_t bits = detail::to_little_endian(std::bit_cast<std::uint32_t>(x));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

inline void save_embeddings(const EmbeddingStore& store, const std::string& path) {
  const bool binary = detail::is_binary_path(path);
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  if (binary) {
    write_embeddings_binary(store, out);
  } else {
    write_embeddings_text(store, out);
  }
}

}  // namespace capscore
