#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "distill/numerics.hpp"

namespace distill {

// How a full memory chooses its victim. MaxSimilaritySum is the
// self-adaptive update (drop the latent most similar to everything else);
// MinSimilaritySum is the inverted ablation variant; Oldest is plain FIFO,
// the behaviour of the prior memory scheme.
enum class EvictionPolicy { Oldest, MaxSimilaritySum, MinSimilaritySum };

EvictionPolicy parse_policy(const std::string& name);
std::string to_string(EvictionPolicy policy);

enum class ExtremeMode { Min, Max };

// Bounded buffer of latents. After any public operation completes,
// size() <= capacity(). Insertion indices are unique and strictly
// increasing; they double as the deterministic tie-break everywhere.
class MemorySet {
 public:
  MemorySet(std::size_t capacity, EvictionPolicy policy);

  /// Rebuild a set from snapshot entries (insertion_index, latent); used for
  /// test fixtures. Entries beyond capacity are evicted per the policy.
  static MemorySet restore(
      std::size_t capacity, EvictionPolicy policy,
      const std::vector<std::pair<std::uint64_t, Latent>>& entries);

  /// Append z with a fresh insertion index, then evict back to capacity.
  /// Zero-norm latents are rejected (cosine similarity undefined).
  void enqueue(const Latent& z);

  /// Per-element sums of cosine similarity against the whole set, self term
  /// included (it shifts every sum by one and never changes the argmax).
  Eigen::VectorXd similarity_sums() const;

  /// Position of the element the policy would evict next.
  std::size_t evict_index() const;

  /// Remove evict_index() until size() <= capacity(), recomputing the
  /// similarity sums after each removal.
  void evict_until_capacity();

  struct Extreme {
    std::size_t index;
    double value;
  };

  /// Element attaining the min/max similarity to the query. Empty memory
  /// yields nullopt so callers can zero out the corresponding loss term.
  std::optional<Extreme> extreme_similarity(const Latent& query,
                                            ExtremeMode mode) const;

  /// Shrink or grow the bound; shrinking evicts down to the new capacity.
  void set_capacity(std::size_t capacity);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  EvictionPolicy policy() const { return policy_; }
  const Latent& latent(std::size_t i) const { return items_[i].z; }
  std::uint64_t insertion_index(std::size_t i) const {
    return items_[i].insertion;
  }

  /// Snapshot: header then one latent per row with its insertion index.
  void write_csv(std::ostream& out) const;

 private:
  struct Entry {
    Latent z;
    std::uint64_t insertion;
  };

  void push(const Latent& z, std::uint64_t insertion);

  std::vector<Entry> items_;
  std::size_t capacity_;
  EvictionPolicy policy_;
  std::uint64_t counter_ = 0;
};

// The per-class (or global) pair of real/generated memories used during
// distillation. With per_class enabled there is one (real, gen) pair per
// label; otherwise a single shared pair receives every latent.
class MemoryBank {
 public:
  MemoryBank(int num_classes, bool per_class, std::size_t capacity_real,
             std::size_t capacity_gen, EvictionPolicy policy_real,
             EvictionPolicy policy_gen);

  MemorySet& real(int label) { return real_[group(label)]; }
  MemorySet& gen(int label) { return gen_[group(label)]; }
  const MemorySet& real(int label) const { return real_[group(label)]; }
  const MemorySet& gen(int label) const { return gen_[group(label)]; }

  int groups() const { return static_cast<int>(real_.size()); }
  bool per_class() const { return per_class_; }

 private:
  int group(int label) const;

  std::vector<MemorySet> real_;
  std::vector<MemorySet> gen_;
  bool per_class_;
};

}  // namespace distill
