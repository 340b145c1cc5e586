#include <doctest.h>

#include <deque>
#include <sstream>

#include "distill/memory.hpp"

using namespace distill;

namespace {

Latent vec2(double x, double y) {
  Latent v(2);
  v << x, y;
  return v;
}

Latent random_unit(RngStream& rng, int d) {
  for (;;) {
    Latent v = gaussian_draw(rng, d);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

// Brute-force reference: recompute the full similarity matrix per step,
// evict by the policy with smallest-insertion tie-break, repeat. Kept
// independent of MemorySet internals on purpose.
struct RefEntry {
  Latent z;
  std::uint64_t insertion;
};

std::vector<RefEntry> reference_evict(std::vector<RefEntry> items,
                                      std::size_t capacity,
                                      EvictionPolicy policy) {
  while (items.size() > capacity) {
    std::size_t victim = 0;
    if (policy == EvictionPolicy::Oldest) {
      for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].insertion < items[victim].insertion) victim = i;
      }
    } else {
      std::vector<double> sums(items.size(), 0.0);
      for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = 0; j < items.size(); ++j) {
          sums[i] += cosine_similarity(items[i].z, items[j].z);
        }
      }
      for (std::size_t i = 1; i < items.size(); ++i) {
        const bool want_max = policy == EvictionPolicy::MaxSimilaritySum;
        const bool better =
            want_max ? sums[i] > sums[victim] : sums[i] < sums[victim];
        if (better || (sums[i] == sums[victim] &&
                       items[i].insertion < items[victim].insertion)) {
          victim = i;
        }
      }
    }
    items.erase(items.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return items;
}

}  // namespace

TEST_CASE("policy names round-trip") {
  for (EvictionPolicy p :
       {EvictionPolicy::Oldest, EvictionPolicy::MaxSimilaritySum,
        EvictionPolicy::MinSimilaritySum}) {
    CHECK(parse_policy(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_policy("newest"), ConfigError);
}

TEST_CASE("enqueue respects capacity and rejects zero-norm latents") {
  MemorySet m(4, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  CHECK(m.size() == 1);
  RngStream rng(3, 0);
  for (int i = 0; i < 20; ++i) {
    m.enqueue(random_unit(rng, 2));
    CHECK(m.size() <= 4);
  }
  CHECK(m.size() == 4);
  CHECK_THROWS_AS(m.enqueue(Latent::Zero(2)), DomainError);
}

TEST_CASE("similarity sums: hand oracle and trivial cases") {
  MemorySet single(4, EvictionPolicy::MaxSimilaritySum);
  single.enqueue(vec2(3, 4));
  CHECK(single.similarity_sums()[0] == doctest::Approx(1.0));

  // sims: s(a,b) = 0.8, s(a,c) = 0, s(b,c) = 0.6
  MemorySet m(8, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  m.enqueue(vec2(0.8, 0.6));
  m.enqueue(vec2(0, 1));
  const Eigen::VectorXd sums = m.similarity_sums();
  CHECK(sums[0] == doctest::Approx(1.8));
  CHECK(sums[1] == doctest::Approx(2.4));
  CHECK(sums[2] == doctest::Approx(1.6));

  MemorySet identical(8, EvictionPolicy::MaxSimilaritySum);
  for (int i = 0; i < 5; ++i) identical.enqueue(vec2(2, 1));
  const Eigen::VectorXd s5 = identical.similarity_sums();
  for (int i = 0; i < 5; ++i) CHECK(s5[i] == doctest::Approx(5.0));

  MemorySet empty(4, EvictionPolicy::MaxSimilaritySum);
  CHECK_THROWS_AS(empty.similarity_sums(), StateError);
}

TEST_CASE("similarity sums lie in [-(n-2), n]") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    MemorySet m(32, EvictionPolicy::MaxSimilaritySum);
    for (int i = 0; i < n; ++i) m.enqueue(random_unit(rng, 3));
    const Eigen::VectorXd sums = m.similarity_sums();
    for (int i = 0; i < n; ++i) {
      CHECK(sums[i] >= -(n - 2) - 1e-9);
      CHECK(sums[i] <= n + 1e-9);
    }
  }
}

TEST_CASE("evict_index follows the policy with insertion tie-break") {
  MemorySet m(8, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  m.enqueue(vec2(0.8, 0.6));
  m.enqueue(vec2(0, 1));
  CHECK(m.evict_index() == 1);  // 2.4 is the maximal sum

  MemorySet mn(8, EvictionPolicy::MinSimilaritySum);
  mn.enqueue(vec2(1, 0));
  mn.enqueue(vec2(0.8, 0.6));
  mn.enqueue(vec2(0, 1));
  CHECK(mn.evict_index() == 2);  // 1.6 is minimal

  MemorySet ties(8, EvictionPolicy::MaxSimilaritySum);
  for (int i = 0; i < 4; ++i) ties.enqueue(vec2(1, 1));
  CHECK(ties.insertion_index(ties.evict_index()) == 0);

  MemorySet oldest(8, EvictionPolicy::Oldest);
  oldest.enqueue(vec2(5, 0));
  oldest.enqueue(vec2(0, 1));
  oldest.enqueue(vec2(-3, 2));
  CHECK(oldest.insertion_index(oldest.evict_index()) == 0);

  MemorySet empty(4, EvictionPolicy::Oldest);
  CHECK_THROWS_AS(empty.evict_index(), StateError);
}

TEST_CASE("evict_until_capacity matches the brute-force reference") {
  RngStream rng(17, 0);
  for (EvictionPolicy policy :
       {EvictionPolicy::Oldest, EvictionPolicy::MaxSimilaritySum,
        EvictionPolicy::MinSimilaritySum}) {
    for (int trial = 0; trial < 100; ++trial) {
      const int d = 2 + static_cast<int>(rng.below(3));
      const int n = 12;
      const std::size_t capacity = 8;
      std::vector<std::pair<std::uint64_t, Latent>> entries;
      std::vector<RefEntry> ref;
      for (int i = 0; i < n; ++i) {
        const Latent z = random_unit(rng, d);
        entries.emplace_back(static_cast<std::uint64_t>(i), z);
        ref.push_back(RefEntry{z, static_cast<std::uint64_t>(i)});
      }
      const MemorySet m = MemorySet::restore(capacity, policy, entries);
      const std::vector<RefEntry> expected =
          reference_evict(ref, capacity, policy);
      REQUIRE(m.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(m.insertion_index(i) == expected[i].insertion);
        CHECK(m.latent(i) == expected[i].z);
      }
    }
  }
}

TEST_CASE("size at capacity and capacity+1 loop bounds") {
  MemorySet m(3, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  m.enqueue(vec2(0, 1));
  m.enqueue(vec2(1, 1));
  CHECK(m.size() == 3);
  m.evict_until_capacity();  // size == capacity: no removals
  CHECK(m.size() == 3);
  m.enqueue(vec2(-1, 1));  // one over: exactly one removal
  CHECK(m.size() == 3);
}

TEST_CASE("oldest policy reproduces a plain FIFO queue") {
  RngStream rng(23, 0);
  MemorySet m(5, EvictionPolicy::Oldest);
  std::deque<std::uint64_t> fifo;
  std::uint64_t next_id = 0;
  for (int op = 0; op < 200; ++op) {
    m.enqueue(random_unit(rng, 2));
    fifo.push_back(next_id++);
    while (fifo.size() > 5) fifo.pop_front();
    REQUIRE(m.size() == fifo.size());
    for (std::size_t i = 0; i < fifo.size(); ++i) {
      CHECK(m.insertion_index(i) == fifo[i]);
    }
  }
}

TEST_CASE("max policy never decreases remainder dissimilarity vs any choice") {
  // Removing the argmax of the similarity sums minimizes the remaining
  // pairwise similarity mass; check by brute force against every alternative.
  RngStream rng(29, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(10));
    std::vector<Latent> items;
    for (int i = 0; i < n; ++i) items.push_back(random_unit(rng, 3));
    MemorySet m = MemorySet::restore(
        32, EvictionPolicy::MaxSimilaritySum, [&] {
          std::vector<std::pair<std::uint64_t, Latent>> e;
          for (int i = 0; i < n; ++i) {
            e.emplace_back(static_cast<std::uint64_t>(i), items[i]);
          }
          return e;
        }());
    const std::size_t selected = m.evict_index();

    auto mean_dissimilarity_without = [&](std::size_t skip) {
      double sum = 0.0;
      long pairs = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (static_cast<std::size_t>(i) == skip ||
              static_cast<std::size_t>(j) == skip) {
            continue;
          }
          sum += 1.0 - cosine_similarity(items[i], items[j]);
          pairs += 1;
        }
      }
      return sum / pairs;
    };

    const double chosen = mean_dissimilarity_without(selected);
    for (std::size_t alt = 0; alt < static_cast<std::size_t>(n); ++alt) {
      CHECK(chosen >= mean_dissimilarity_without(alt) - 1e-12);
    }
  }
}

TEST_CASE("evict_index is permutation-covariant") {
  RngStream rng(31, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(8));
    std::vector<std::pair<std::uint64_t, Latent>> entries;
    for (int i = 0; i < n; ++i) {
      entries.emplace_back(static_cast<std::uint64_t>(i),
                           random_unit(rng, 3));
    }
    const MemorySet base =
        MemorySet::restore(32, EvictionPolicy::MaxSimilaritySum, entries);
    const std::uint64_t selected = base.insertion_index(base.evict_index());

    std::vector<std::pair<std::uint64_t, Latent>> permuted = entries;
    seeded_shuffle(permuted, rng);
    const MemorySet shuffled =
        MemorySet::restore(32, EvictionPolicy::MaxSimilaritySum, permuted);
    CHECK(shuffled.insertion_index(shuffled.evict_index()) == selected);
  }
}

TEST_CASE("extreme_similarity scans match brute force") {
  MemorySet m(8, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  m.enqueue(vec2(0, 1));
  const auto max_hit = m.extreme_similarity(vec2(1, 0), ExtremeMode::Max);
  REQUIRE(max_hit.has_value());
  CHECK(max_hit->index == 0);
  CHECK(max_hit->value == doctest::Approx(1.0));
  const auto min_hit = m.extreme_similarity(vec2(1, 0), ExtremeMode::Min);
  REQUIRE(min_hit.has_value());
  CHECK(min_hit->index == 1);
  CHECK(min_hit->value == doctest::Approx(0.0));

  MemorySet empty(4, EvictionPolicy::MaxSimilaritySum);
  CHECK_FALSE(empty.extreme_similarity(vec2(1, 0), ExtremeMode::Max));

  RngStream rng(37, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    MemorySet mem(16, EvictionPolicy::MaxSimilaritySum);
    std::vector<Latent> items;
    for (int i = 0; i < n; ++i) {
      items.push_back(random_unit(rng, 3));
      mem.enqueue(items.back());
    }
    const Latent q = random_unit(rng, 3);
    for (ExtremeMode mode : {ExtremeMode::Min, ExtremeMode::Max}) {
      std::size_t best = 0;
      double best_v = cosine_similarity(q, items[0]);
      for (std::size_t i = 1; i < items.size(); ++i) {
        const double s = cosine_similarity(q, items[i]);
        if (mode == ExtremeMode::Max ? s > best_v : s < best_v) {
          best = i;
          best_v = s;
        }
      }
      const auto hit = mem.extreme_similarity(q, mode);
      REQUIRE(hit.has_value());
      CHECK(hit->index == best);
      CHECK(hit->value == doctest::Approx(best_v));
    }
  }
}

TEST_CASE("capacity invariant holds under random operation sequences") {
  RngStream rng(41, 0);
  for (EvictionPolicy policy :
       {EvictionPolicy::Oldest, EvictionPolicy::MaxSimilaritySum,
        EvictionPolicy::MinSimilaritySum}) {
    MemorySet m(6, policy);
    for (int op = 0; op < 300; ++op) {
      switch (rng.below(3)) {
        case 0:
        case 1:
          m.enqueue(random_unit(rng, 2));
          break;
        default:
          m.set_capacity(1 + rng.below(8));
          break;
      }
      CHECK(m.size() <= m.capacity());
    }
  }
}

TEST_CASE("snapshot CSV lists one latent per row with its insertion index") {
  MemorySet m(4, EvictionPolicy::MaxSimilaritySum);
  m.enqueue(vec2(1, 0));
  m.enqueue(vec2(0, 0.5));
  std::ostringstream out;
  m.write_csv(out);
  CHECK(out.str() ==
        "insertion_index,coord_0,coord_1\n"
        "0,1,0\n"
        "1,0,0.5\n");
}

TEST_CASE("memory bank routes labels per class or globally") {
  MemoryBank per_class(3, true, 4, 4, EvictionPolicy::MaxSimilaritySum,
                       EvictionPolicy::Oldest);
  CHECK(per_class.groups() == 3);
  per_class.real(2).enqueue(vec2(1, 1));
  CHECK(per_class.real(2).size() == 1);
  CHECK(per_class.real(0).size() == 0);
  CHECK(per_class.gen(0).policy() == EvictionPolicy::Oldest);
  CHECK_THROWS_AS(per_class.real(3), ConfigError);

  MemoryBank global(3, false, 4, 4, EvictionPolicy::MaxSimilaritySum,
                    EvictionPolicy::MaxSimilaritySum);
  CHECK(global.groups() == 1);
  global.real(0).enqueue(vec2(1, 0));
  global.real(2).enqueue(vec2(0, 1));
  CHECK(global.real(1).size() == 2);
}
