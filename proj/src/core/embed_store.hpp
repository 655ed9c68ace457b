#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "http_client.hpp"
#include "segmenter.hpp"

namespace protofsm::embedding {

struct EmbeddingBackendSpec {
  enum class Kind { kRemote, kLocalHash };

  Kind kind = Kind::kLocalHash;
  std::size_t dim = 512;

  // kRemote
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "text-embedding-3-small";
  std::string credential_env = "OPENAI_API_KEY";
  std::size_t batch_size = 64;
  unsigned parallelism = 4;
  double timeout_s = 60.0;
  http::RetryPolicy retry;

  // kLocalHash
  std::size_t ngram = 3;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Identity of the vector space an index was built in.
struct Fingerprint {
  std::string kind;   // "remote" | "local-hash"
  std::string model;  // remote model id, or "ngram=<n>;seed=<s>"
  std::size_t dim = 0;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

Fingerprint fingerprint(const EmbeddingBackendSpec& spec);

// Unit-length, finite. Empty vector = not yet computed.
using EmbeddingVector = std::vector<float>;

// Scales to unit L2 norm. A zero vector is left as is.
void normalize(EmbeddingVector& v);

// One normalized vector per text, in input order. Remote failures throw
// BackendError (with attempt metadata) or TimeoutError.
std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, const EmbeddingBackendSpec& spec);

// Bucket a single n-gram lands in under the local-hash backend.
std::size_t local_hash_bucket(std::string_view gram, const EmbeddingBackendSpec& spec);

struct IndexManifest {
  std::string created_at;        // ISO-8601 UTC
  std::string repo_snapshot;     // content digest of the indexed sources
  std::string segmenter_digest;  // digest of the segmenter configuration

  friend bool operator==(const IndexManifest&, const IndexManifest&) = default;
};

struct IndexEntry {
  segmenter::Chunk chunk;
  EmbeddingVector vector;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct RetrievalResult {
  std::size_t entry = 0;  // position in VectorIndex::entries()
  double score = 0.0;     // cosine similarity
};

class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(Fingerprint fp, IndexManifest manifest) : fp_(std::move(fp)), manifest_(std::move(manifest)) {}

  // Throws DimError on a dimension mismatch, IndexFormatError on a duplicate
  // chunk reference (doc_path, ordinal).
  void add(segmenter::Chunk chunk, EmbeddingVector vector);

  const Fingerprint& fingerprint() const noexcept { return fp_; }
  const IndexManifest& manifest() const noexcept { return manifest_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

 private:
  Fingerprint fp_;
  IndexManifest manifest_;
  std::vector<IndexEntry> entries_;
  std::set<std::pair<std::string, std::size_t>> refs_;
};

// Exact cosine scan: min(k, size) results, descending score, ties broken by
// (doc_path, ordinal). Throws DimError.
std::vector<RetrievalResult> top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

// Inverted-file approximation: k-means coarse lists, probing the `nprobe`
// nearest lists. Built once, read-only afterwards.
class IvfIndex {
 public:
  IvfIndex(const VectorIndex& index, std::size_t nlist, std::uint64_t seed = 0);

  std::vector<RetrievalResult> top_k(const EmbeddingVector& query, std::size_t k, std::size_t nprobe) const;

 private:
  const VectorIndex* index_;
  std::vector<EmbeddingVector> centroids_;
  std::vector<std::vector<std::size_t>> lists_;
};

// Binary layout: "FSMFIDX1", u64 LE manifest length, manifest JSON,
// then count * dim little-endian f32 values.
void save(const VectorIndex& index, const std::filesystem::path& path);

// Throws IndexFormatError for damaged files and BackendMismatch when
// `expected` is given and differs from the stored fingerprint.
VectorIndex load(const std::filesystem::path& path, const std::optional<Fingerprint>& expected = std::nullopt);

}  // namespace protofsm::embedding
