#include "embed_store.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "errors.hpp"
#include "file_io.hpp"

namespace protofsm::embedding {
namespace {

constexpr char kMagic[8] = {'F', 'S', 'M', 'F', 'I', 'D', 'X', '1'};
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Byte offsets of code point starts, plus the end offset.
std::vector<std::size_t> code_point_offsets(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) out.push_back(i);
  }
  out.push_back(text.size());
  return out;
}

EmbeddingVector local_hash_embed(std::string_view text, const EmbeddingBackendSpec& spec) {
  EmbeddingVector v(spec.dim, 0.0f);
  const auto cps = code_point_offsets(text);
  const std::size_t n_cp = cps.size() - 1;
  if (n_cp <= spec.ngram) {
    v[local_hash_bucket(text, spec)] += 1.0f;
  } else {
    for (std::size_t i = 0; i + spec.ngram <= n_cp; ++i) {
      const auto gram = text.substr(cps[i], cps[i + spec.ngram] - cps[i]);
      v[local_hash_bucket(gram, spec)] += 1.0f;
    }
  }
  normalize(v);
  return v;
}

std::vector<EmbeddingVector> remote_embed(const std::vector<std::string>& texts, const EmbeddingBackendSpec& spec) {
  const std::string key = http::require_credential(spec.credential_env);
  const std::size_t n_batches = (texts.size() + spec.batch_size - 1) / spec.batch_size;
  std::vector<EmbeddingVector> out(texts.size());

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      {
        std::lock_guard lk(err_mu);
        if (first_error) return;
      }
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches) return;
      const std::size_t lo = b * spec.batch_size;
      const std::size_t hi = std::min(texts.size(), lo + spec.batch_size);
      try {
        http::PostRequest req;
        req.endpoint = spec.endpoint;
        req.path = "/embeddings";
        req.body = {{"model", spec.model},
                    {"input", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(lo),
                                                       texts.begin() + static_cast<std::ptrdiff_t>(hi))}};
        req.headers = {{"Authorization", "Bearer " + key}};
        req.timeout_s = spec.timeout_s;
        const auto res = http::post_json(req, spec.retry);

        const auto& data = res.body.at("data");
        if (!data.is_array() || data.size() != hi - lo) {
          throw BackendError("embedding response has " + std::to_string(data.size()) + " items for " +
                                 std::to_string(hi - lo) + " inputs",
                             res.attempts);
        }
        std::size_t pos = 0;
        for (const auto& item : data) {
          const std::size_t idx = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
          ++pos;
          if (idx >= hi - lo) throw BackendError("embedding response index out of range", res.attempts);
          auto vec = item.at("embedding").get<EmbeddingVector>();
          if (vec.size() != spec.dim) {
            throw BackendError("embedding backend returned dim " + std::to_string(vec.size()) + ", configured " +
                                   std::to_string(spec.dim),
                               res.attempts);
          }
          for (float f : vec) {
            if (!std::isfinite(f)) throw BackendError("embedding backend returned a non-finite value", res.attempts);
          }
          normalize(vec);
          out[lo + idx] = std::move(vec);
        }
      } catch (const nlohmann::json::exception& e) {
        std::lock_guard lk(err_mu);
        if (!first_error) first_error = std::make_exception_ptr(BackendError(std::string("malformed embedding response: ") + e.what()));
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(spec.parallelism, n_batches));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  for (const auto& v : out) {
    if (v.empty()) throw BackendError("embedding response is missing some inputs");
  }
  return out;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

bool ranks_before(const VectorIndex& index, const RetrievalResult& x, const RetrievalResult& y) {
  if (x.score != y.score) return x.score > y.score;
  const auto& cx = index.entries()[x.entry].chunk;
  const auto& cy = index.entries()[y.entry].chunk;
  if (cx.doc_path != cy.doc_path) return cx.doc_path < cy.doc_path;
  return cx.ordinal < cy.ordinal;
}

std::vector<RetrievalResult> rank(const VectorIndex& index, const EmbeddingVector& query,
                                  const std::vector<std::size_t>& candidates, std::size_t k) {
  std::vector<RetrievalResult> scored;
  scored.reserve(candidates.size());
  for (std::size_t i : candidates) scored.push_back({i, cosine(query, index.entries()[i].vector)});
  const std::size_t n = std::min(k, scored.size());
  auto cmp = [&](const RetrievalResult& a, const RetrievalResult& b) { return ranks_before(index, a, b); };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), cmp);
  scored.resize(n);
  return scored;
}

void check_query(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (query.size() != index.fingerprint().dim) {
    throw DimError("query dim " + std::to_string(query.size()) + " does not match index dim " +
                   std::to_string(index.fingerprint().dim));
  }
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f32_le(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<float>(bits);
}

nlohmann::ordered_json fingerprint_json(const Fingerprint& fp) {
  return {{"kind", fp.kind}, {"model", fp.model}, {"dim", fp.dim}};
}

}  // namespace

void EmbeddingBackendSpec::validate() const {
  if (dim == 0) throw ConfigError("embedding dim must be > 0");
  if (kind == Kind::kLocalHash) {
    if (ngram == 0) throw ConfigError("n-gram length must be > 0");
    return;
  }
  if (endpoint.empty()) throw ConfigError("remote embedding endpoint is empty");
  if (model.empty()) throw ConfigError("remote embedding model is empty");
  if (credential_env.empty()) throw ConfigError("credential environment variable name is empty");
  if (batch_size == 0) throw ConfigError("embedding batch size must be > 0");
  if (parallelism == 0) throw ConfigError("embedding parallelism must be > 0");
  if (retry.attempts < 1) throw ConfigError("retry attempts must be >= 1");
}

Fingerprint fingerprint(const EmbeddingBackendSpec& spec) {
  if (spec.kind == EmbeddingBackendSpec::Kind::kRemote) return {"remote", spec.model, spec.dim};
  return {"local-hash", "ngram=" + std::to_string(spec.ngram) + ";seed=" + std::to_string(spec.seed), spec.dim};
}

void normalize(EmbeddingVector& v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) return;
  for (auto& x : v) x = static_cast<float>(static_cast<double>(x) / n);
}

std::size_t local_hash_bucket(std::string_view gram, const EmbeddingBackendSpec& spec) {
  return static_cast<std::size_t>(fnv1a(gram, spec.seed) % spec.dim);
}

std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts, const EmbeddingBackendSpec& spec) {
  spec.validate();
  if (texts.empty()) return {};
  if (spec.kind == EmbeddingBackendSpec::Kind::kRemote) return remote_embed(texts, spec);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(local_hash_embed(t, spec));
  return out;
}

void VectorIndex::add(segmenter::Chunk chunk, EmbeddingVector vector) {
  if (vector.size() != fp_.dim) {
    throw DimError("vector dim " + std::to_string(vector.size()) + " does not match index dim " +
                   std::to_string(fp_.dim));
  }
  if (!refs_.emplace(chunk.doc_path, chunk.ordinal).second) {
    throw IndexFormatError("duplicate chunk reference " + chunk.doc_path + "#" + std::to_string(chunk.ordinal));
  }
  entries_.push_back({std::move(chunk), std::move(vector)});
}

std::vector<RetrievalResult> top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
  check_query(index, query, k);
  std::vector<std::size_t> all(index.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return rank(index, query, all, k);
}

IvfIndex::IvfIndex(const VectorIndex& index, std::size_t nlist, std::uint64_t seed) : index_(&index) {
  const auto& entries = index.entries();
  nlist = std::clamp<std::size_t>(nlist, 1, std::max<std::size_t>(1, entries.size()));
  if (entries.empty()) {
    lists_.resize(1);
    return;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t c = 0; c < nlist; ++c) centroids_.push_back(entries[order[c]].vector);

  auto nearest = [&](const EmbeddingVector& v) {
    std::size_t best = 0;
    double best_s = -2.0;
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      const double s = cosine(v, centroids_[c]);
      if (s > best_s) best_s = s, best = c;
    }
    return best;
  };

  std::vector<std::size_t> assign(entries.size(), 0);
  for (int iter = 0; iter < 10; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::size_t best = nearest(entries[i].vector);
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(centroids_.size(), std::vector<double>(index.fingerprint().dim, 0.0));
    std::vector<std::size_t> counts(centroids_.size(), 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < entries[i].vector.size(); ++d) sums[assign[i]][d] += entries[i].vector[d];
    }
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < sums[c].size(); ++d) centroids_[c][d] = static_cast<float>(sums[c][d] / counts[c]);
      normalize(centroids_[c]);
    }
    if (!changed && iter > 0) break;
  }
  // Final lists use the final centroids, so every stored vector sits in the
  // list a query equal to it probes first.
  lists_.assign(centroids_.size(), {});
  for (std::size_t i = 0; i < entries.size(); ++i) lists_[nearest(entries[i].vector)].push_back(i);
}

std::vector<RetrievalResult> IvfIndex::top_k(const EmbeddingVector& query, std::size_t k, std::size_t nprobe) const {
  check_query(*index_, query, k);
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t c = 0; c < centroids_.size(); ++c) near.emplace_back(-cosine(query, centroids_[c]), c);
  std::sort(near.begin(), near.end());
  std::vector<std::size_t> candidates;
  for (std::size_t p = 0; p < std::min(std::max<std::size_t>(nprobe, 1), near.size()); ++p) {
    const auto& l = lists_[near[p].second];
    candidates.insert(candidates.end(), l.begin(), l.end());
  }
  return rank(*index_, query, candidates, k);
}

void save(const VectorIndex& index, const std::filesystem::path& path) {
  const auto& fp = index.fingerprint();
  nlohmann::ordered_json chunks = nlohmann::ordered_json::array();
  for (const auto& e : index.entries()) {
    chunks.push_back({{"doc_path", e.chunk.doc_path},
                      {"ordinal", e.chunk.ordinal},
                      {"byte_start", e.chunk.byte_start},
                      {"byte_end", e.chunk.byte_end},
                      {"overlap_len", e.chunk.overlap_len},
                      {"text", e.chunk.text}});
  }
  nlohmann::ordered_json manifest = {
      {"fingerprint", fingerprint_json(fp)},
      {"created_at", index.manifest().created_at},
      {"repo_snapshot", index.manifest().repo_snapshot},
      {"segmenter_digest", index.manifest().segmenter_digest},
      {"count", index.size()},
      {"dim", fp.dim},
      {"chunks", std::move(chunks)},
  };
  const std::string header = manifest.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

  std::string out(kMagic, sizeof kMagic);
  put_u64_le(out, header.size());
  out += header;
  out.reserve(out.size() + index.size() * fp.dim * 4);
  for (const auto& e : index.entries()) {
    for (float f : e.vector) put_f32_le(out, f);
  }
  write_file(path, out);
}

VectorIndex load(const std::filesystem::path& path, const std::optional<Fingerprint>& expected) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = path.string();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IndexFormatError(where + ": not an index file");
  }
  const std::uint64_t header_len = get_u64_le(p + 8);
  if (header_len > bytes.size() - 16) throw IndexFormatError(where + ": truncated manifest");

  nlohmann::json m;
  Fingerprint fp;
  IndexManifest manifest;
  std::size_t count = 0;
  try {
    m = nlohmann::json::parse(bytes.substr(16, header_len));
    const auto& f = m.at("fingerprint");
    fp = {f.at("kind").get<std::string>(), f.at("model").get<std::string>(), f.at("dim").get<std::size_t>()};
    manifest = {m.at("created_at").get<std::string>(), m.at("repo_snapshot").get<std::string>(),
                m.at("segmenter_digest").get<std::string>()};
    count = m.at("count").get<std::size_t>();
    if (m.at("dim").get<std::size_t>() != fp.dim) throw IndexFormatError(where + ": dim disagrees with fingerprint");
    if (m.at("chunks").size() != count) throw IndexFormatError(where + ": chunk count disagrees with manifest");
  } catch (const nlohmann::json::exception& e) {
    throw IndexFormatError(where + ": bad manifest: " + e.what());
  }
  if (fp.dim == 0) throw IndexFormatError(where + ": zero dim");

  if (expected && !(*expected == fp)) {
    throw BackendMismatch(where + ": index was built with " + fp.kind + " (" + fp.model + ", dim " +
                          std::to_string(fp.dim) + ") but the configured backend is " + expected->kind + " (" +
                          expected->model + ", dim " + std::to_string(expected->dim) + ")");
  }

  const std::size_t records_at = 16 + header_len;
  const std::size_t need = count * fp.dim * 4;
  if (bytes.size() - records_at != need) {
    throw IndexFormatError(where + ": expected " + std::to_string(need) + " record bytes, found " +
                           std::to_string(bytes.size() - records_at));
  }

  VectorIndex index(fp, manifest);
  const unsigned char* r = p + records_at;
  for (std::size_t i = 0; i < count; ++i) {
    segmenter::Chunk c;
    try {
      const auto& cj = m["chunks"][i];
      c.doc_path = cj.at("doc_path").get<std::string>();
      c.ordinal = cj.at("ordinal").get<std::size_t>();
      c.byte_start = cj.at("byte_start").get<std::size_t>();
      c.byte_end = cj.at("byte_end").get<std::size_t>();
      c.overlap_len = cj.at("overlap_len").get<std::size_t>();
      c.text = cj.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw IndexFormatError(where + ": bad chunk entry " + std::to_string(i) + ": " + e.what());
    }
    EmbeddingVector v(fp.dim);
    for (std::size_t d = 0; d < fp.dim; ++d, r += 4) v[d] = get_f32_le(r);
    index.add(std::move(c), std::move(v));
  }
  return index;
}

}  // namespace protofsm::embedding
