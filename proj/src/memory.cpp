#include "distill/memory.hpp"

#include <limits>
#include <ostream>

#include "distill/io.hpp"

namespace distill {

EvictionPolicy parse_policy(const std::string& name) {
  if (name == "oldest") return EvictionPolicy::Oldest;
  if (name == "max") return EvictionPolicy::MaxSimilaritySum;
  if (name == "min") return EvictionPolicy::MinSimilaritySum;
  throw ConfigError("unknown eviction policy '" + name +
                    "' (expected oldest|max|min)");
}

std::string to_string(EvictionPolicy policy) {
  switch (policy) {
    case EvictionPolicy::Oldest:
      return "oldest";
    case EvictionPolicy::MaxSimilaritySum:
      return "max";
    case EvictionPolicy::MinSimilaritySum:
      return "min";
  }
  return "max";
}

MemorySet::MemorySet(std::size_t capacity, EvictionPolicy policy)
    : capacity_(capacity), policy_(policy) {
  if (capacity == 0) {
    throw ConfigError("MemorySet: capacity must be >= 1");
  }
}

MemorySet MemorySet::restore(
    std::size_t capacity, EvictionPolicy policy,
    const std::vector<std::pair<std::uint64_t, Latent>>& entries) {
  MemorySet m(capacity, policy);
  for (const auto& [insertion, z] : entries) {
    m.push(z, insertion);
    if (insertion >= m.counter_) {
      m.counter_ = insertion + 1;
    }
  }
  m.evict_until_capacity();
  return m;
}

void MemorySet::push(const Latent& z, std::uint64_t insertion) {
  if (!z.allFinite()) {
    throw DomainError("MemorySet: latent has non-finite entries");
  }
  if (z.norm() == 0.0) {
    throw DomainError(
        "MemorySet: zero-norm latent rejected (cosine similarity undefined)");
  }
  items_.push_back(Entry{z, insertion});
}

void MemorySet::enqueue(const Latent& z) {
  push(z, counter_);
  counter_ += 1;
  evict_until_capacity();
}

Eigen::VectorXd MemorySet::similarity_sums() const {
  if (items_.empty()) {
    throw StateError("similarity_sums: memory is empty");
  }
  const std::size_t n = items_.size();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sums[static_cast<Eigen::Index>(i)] +=
          cosine_similarity(items_[i].z, items_[j].z);
    }
  }
  return sums;
}

std::size_t MemorySet::evict_index() const {
  if (items_.empty()) {
    throw StateError("evict_index: memory is empty");
  }
  if (policy_ == EvictionPolicy::Oldest) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < items_.size(); ++i) {
      if (items_[i].insertion < items_[best].insertion) {
        best = i;
      }
    }
    return best;
  }
  const Eigen::VectorXd sums = similarity_sums();
  const bool want_max = policy_ == EvictionPolicy::MaxSimilaritySum;
  std::size_t best = 0;
  for (std::size_t i = 1; i < items_.size(); ++i) {
    const double s = sums[static_cast<Eigen::Index>(i)];
    const double b = sums[static_cast<Eigen::Index>(best)];
    const bool better = want_max ? s > b : s < b;
    const bool tie = s == b && items_[i].insertion < items_[best].insertion;
    if (better || tie) {
      best = i;
    }
  }
  return best;
}

void MemorySet::evict_until_capacity() {
  while (items_.size() > capacity_) {
    items_.erase(items_.begin() +
                 static_cast<std::ptrdiff_t>(evict_index()));
  }
}

std::optional<MemorySet::Extreme> MemorySet::extreme_similarity(
    const Latent& query, ExtremeMode mode) const {
  if (items_.empty()) {
    return std::nullopt;
  }
  if (query.norm() == 0.0) {
    throw DomainError("extreme_similarity: zero-norm query");
  }
  std::size_t best = 0;
  double best_value = cosine_similarity(query, items_[0].z);
  for (std::size_t i = 1; i < items_.size(); ++i) {
    const double s = cosine_similarity(query, items_[i].z);
    const bool better =
        mode == ExtremeMode::Max ? s > best_value : s < best_value;
    const bool tie =
        s == best_value && items_[i].insertion < items_[best].insertion;
    if (better || tie) {
      best = i;
      best_value = s;
    }
  }
  return Extreme{best, best_value};
}

void MemorySet::set_capacity(std::size_t capacity) {
  if (capacity == 0) {
    throw ConfigError("MemorySet: capacity must be >= 1");
  }
  capacity_ = capacity;
  evict_until_capacity();
}

void MemorySet::write_csv(std::ostream& out) const {
  const Eigen::Index d = items_.empty() ? 0 : items_.front().z.size();
  out << "insertion_index";
  for (Eigen::Index k = 0; k < d; ++k) {
    out << ",coord_" << k;
  }
  out << "\n";
  for (const Entry& e : items_) {
    out << e.insertion;
    for (Eigen::Index k = 0; k < e.z.size(); ++k) {
      out << "," << format_double(e.z[k]);
    }
    out << "\n";
  }
}

MemoryBank::MemoryBank(int num_classes, bool per_class,
                       std::size_t capacity_real, std::size_t capacity_gen,
                       EvictionPolicy policy_real, EvictionPolicy policy_gen)
    : per_class_(per_class) {
  if (num_classes < 1) {
    throw ConfigError("MemoryBank: need at least one class");
  }
  const int groups = per_class ? num_classes : 1;
  real_.reserve(static_cast<std::size_t>(groups));
  gen_.reserve(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    real_.emplace_back(capacity_real, policy_real);
    gen_.emplace_back(capacity_gen, policy_gen);
  }
}

int MemoryBank::group(int label) const {
  if (!per_class_) {
    return 0;
  }
  if (label < 0 || label >= groups()) {
    throw ConfigError("MemoryBank: label " + std::to_string(label) +
                      " out of range");
  }
  return label;
}

}  // namespace distill
