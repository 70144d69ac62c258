#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "replay_forge/modality.hpp"

using namespace rforge;

TEST_CASE("splitmix64 reference stream") {
  // first outputs from seed 0 of the published SplitMix64 constants
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);

  SplitMix64 a(1), b(2);
  CHECK(a.next() != b.next());

  // a second, literal transcription of the step
  std::uint64_t state = 12345;
  SplitMix64 stream(12345);
  for (int i = 0; i < 1000; ++i) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    CHECK(stream.next() == z);
  }
}

TEST_CASE("splitmix64_next is a pure state transition") {
  auto [v1, s1] = splitmix64_next(7);
  auto [v2, s2] = splitmix64_next(7);
  CHECK(v1 == v2);
  CHECK(s1 == s2);
  auto [v3, s3] = splitmix64_next(s1);
  CHECK(v3 != v1);
  (void)s3;
}

TEST_CASE("register_modalities appends and is idempotent") {
  ChannelLayout layout;
  std::vector<std::string> first{"T1", "T2", "FLAIR"};
  layout = register_modalities(layout, first);
  CHECK(layout.k_max() == 3);
  CHECK(*layout.index_of("T1") == 0);
  CHECK(*layout.index_of("T2") == 1);
  CHECK(*layout.index_of("FLAIR") == 2);

  std::vector<std::string> second{"T1", "DWI"};
  layout = register_modalities(layout, second);
  CHECK(layout.k_max() == 4);
  CHECK(*layout.index_of("DWI") == 3);

  auto again = register_modalities(layout, first);
  CHECK(again.k_max() == 4);
  for (int i = 0; i < 4; ++i) CHECK(again.names()[i] == layout.names()[i]);
}

TEST_CASE("modality names are case- and whitespace-normalized") {
  ChannelLayout layout;
  std::vector<std::string> names{" t1c ", "T2"};
  layout = register_modalities(layout, names);
  CHECK(*layout.index_of("T1C") == 0);
  CHECK(*layout.index_of("t1c") == 0);
  CHECK(layout.names()[0] == "T1C");
}

TEST_CASE("layout stability under interleaved registration") {
  SplitMix64 rng(31);
  const std::vector<std::string> pool{"T1", "T1C", "T2", "PD", "DWI", "FLAIR"};
  for (int it = 0; it < 50; ++it) {
    ChannelLayout layout;
    std::map<std::string, int> first_index;
    for (int round = 0; round < 6; ++round) {
      std::vector<std::string> batch;
      const auto n = 1 + rng.bounded(pool.size());
      for (std::size_t i = 0; i < n; ++i) batch.push_back(pool[rng.bounded(pool.size())]);
      layout = register_modalities(layout, batch);
      for (const auto& name : batch) {
        const int idx = *layout.index_of(name);
        auto [it2, inserted] = first_index.emplace(name, idx);
        if (!inserted) CHECK(it2->second == idx);
      }
    }
  }
}

TEST_CASE("layout json round-trip") {
  ChannelLayout layout;
  std::vector<std::string> names{"T1", "FLAIR"};
  layout = register_modalities(layout, names);
  auto doc = layout_to_json(layout);
  auto restored = layout_from_json(doc);
  CHECK(restored.k_max() == 2);
  CHECK(*restored.index_of("FLAIR") == 1);

  doc["version"] = 2;
  CHECK_THROWS_WITH_AS(layout_from_json(doc), doctest::Contains("SchemaMismatch"), Error);
}

TEST_CASE("inflate_weights identity and zero slabs") {
  SplitMix64 rng(32);
  auto w = WeightTensor::zeros({3, 2, 3, 3, 3});
  for (Eigen::Index i = 0; i < w.data.size(); ++i)
    w.data[i] = static_cast<float>(rng.unit() * 2 - 1);

  auto same = inflate_weights(w, 2);
  CHECK((same.data == w.data).all());

  auto grown = inflate_weights(w, 4);
  CHECK(grown.shape == std::vector<std::uint32_t>{3, 4, 3, 3, 3});
  const std::size_t kernel = 27;
  for (std::uint32_t o = 0; o < 3; ++o) {
    for (std::uint32_t c = 0; c < 4; ++c) {
      const auto dst = static_cast<Eigen::Index>((o * 4 + c) * kernel);
      if (c < 2) {
        const auto src = static_cast<Eigen::Index>((o * 2 + c) * kernel);
        for (std::size_t k = 0; k < kernel; ++k)
          CHECK(grown.data[dst + static_cast<Eigen::Index>(k)] ==
                w.data[src + static_cast<Eigen::Index>(k)]);
      } else {
        for (std::size_t k = 0; k < kernel; ++k)
          CHECK(grown.data[dst + static_cast<Eigen::Index>(k)] == 0.0f);
      }
    }
  }

  CHECK_THROWS_WITH_AS(inflate_weights(w, 1), doctest::Contains("ShrinkNotAllowed"), Error);
}

TEST_CASE("inflation preserves convolution on zero-padded inputs") {
  SplitMix64 rng(33);
  for (int it = 0; it < 10; ++it) {
    const std::uint32_t ci = 1 + static_cast<std::uint32_t>(rng.bounded(3));
    const std::uint32_t co = 1 + static_cast<std::uint32_t>(rng.bounded(3));
    const std::uint32_t grow = ci + 1 + static_cast<std::uint32_t>(rng.bounded(2));
    auto w = WeightTensor::zeros({co, ci, 3, 3, 3});
    for (Eigen::Index i = 0; i < w.data.size(); ++i)
      w.data[i] = static_cast<float>(rng.unit() * 2 - 1);
    auto x = TensorF::zeros({ci, 6, 6, 6});
    for (Eigen::Index i = 0; i < x.data.size(); ++i)
      x.data[i] = static_cast<float>(rng.unit() * 2 - 1);

    auto w_big = inflate_weights(w, static_cast<int>(grow));
    auto x_big = TensorF::zeros({grow, 6, 6, 6});
    x_big.data.head(x.data.size()) = x.data;

    std::vector<std::uint32_t> shape_a, shape_b;
    auto ya = oracle::conv3d_naive(w, x, shape_a);
    auto yb = oracle::conv3d_naive(w_big, x_big, shape_b);
    REQUIRE(shape_a == shape_b);
    for (std::size_t i = 0; i < ya.size(); ++i)
      CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-6));
  }
}

TEST_CASE("assemble_input places channels and zero-fills absences") {
  ChannelLayout layout;
  std::vector<std::string> names{"T1", "T2", "FLAIR", "DWI"};
  layout = register_modalities(layout, names);

  auto t1 = Volume<float>::zeros({2, 2, 2});
  t1.data.setConstant(0.25f);
  auto flair = Volume<float>::zeros({2, 2, 2});
  flair.data.setConstant(0.75f);

  std::map<std::string, const Volume<float>*> sample{{"T1", &t1}, {"FLAIR", &flair}};
  auto x = assemble_input(sample, layout);
  REQUIRE(x.shape == std::vector<std::uint32_t>{4, 2, 2, 2});
  CHECK((x.data.segment(0, 8) == 0.25f).all());
  CHECK((x.data.segment(8, 8) == 0.0f).all());
  CHECK((x.data.segment(16, 8) == 0.75f).all());
  CHECK((x.data.segment(24, 8) == 0.0f).all());

  std::map<std::string, const Volume<float>*> all{
      {"T1", &t1}, {"T2", &t1}, {"FLAIR", &flair}, {"DWI", &flair}};
  auto full = assemble_input(all, layout);
  CHECK((full.data != 0.0f).count() == 32);

  std::map<std::string, const Volume<float>*> bad{{"CT", &t1}};
  CHECK_THROWS_WITH_AS(assemble_input(bad, layout), doctest::Contains("UnregisteredModality"),
                       Error);

  auto small = Volume<float>::zeros({1, 1, 1});
  std::map<std::string, const Volume<float>*> mismatched{{"T1", &t1}, {"T2", &small}};
  CHECK_THROWS_WITH_AS(assemble_input(mismatched, layout), doctest::Contains("DimMismatch"),
                       Error);
}

TEST_CASE("rmd_mask basics") {
  std::vector<std::string> one{"T1"};
  auto kept = rmd_mask(one, 7, "s0", 0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == "T1");

  std::vector<std::string> three{"T1", "T2", "FLAIR"};
  auto a = rmd_mask(three, 7, "s0", 3);
  auto b = rmd_mask(three, 7, "s0", 3);
  CHECK(a == b);
  auto c = rmd_mask(three, 8, "s0", 3);
  auto d = rmd_mask(three, 7, "s1", 3);
  // different stream; sizes may coincide, but the draw is independent
  CHECK(!a.empty());
  CHECK(!c.empty());
  CHECK(!d.empty());

  CHECK_THROWS_WITH_AS(rmd_mask(std::vector<std::string>{}, 1, "s", 0),
                       doctest::Contains("EmptyAvailable"), Error);
}

TEST_CASE("rmd_mask returns a non-empty subset of the input") {
  SplitMix64 rng(34);
  const std::vector<std::string> pool{"T1", "T2", "FLAIR", "DWI", "PD"};
  for (int it = 0; it < 200; ++it) {
    std::vector<std::string> avail;
    const auto n = 1 + rng.bounded(pool.size());
    for (std::size_t i = 0; i < n; ++i) avail.push_back(pool[i]);
    auto kept = rmd_mask(avail, rng.next(), "sample", it);
    CHECK(!kept.empty());
    CHECK(kept.size() <= avail.size());
    for (const auto& k : kept)
      CHECK(std::find(avail.begin(), avail.end(), k) != avail.end());
    std::set<std::string> uniq(kept.begin(), kept.end());
    CHECK(uniq.size() == kept.size());
  }
}

TEST_CASE("rmd_mask subset sizes are uniform") {
  const std::vector<std::string> three{"T1", "T2", "FLAIR"};
  std::array<int, 4> size_freq{0, 0, 0, 0};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto kept = rmd_mask(three, 99, "s" + std::to_string(i), 0);
    size_freq[kept.size()]++;
  }
  const double expect = draws / 3.0;
  const double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  for (int s = 1; s <= 3; ++s) CHECK(std::abs(size_freq[s] - expect) <= 3 * sigma);
}
