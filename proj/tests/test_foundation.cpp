#include <atomic>
#include <numeric>

#include <gtest/gtest.h>

#include "lgap/digest.hpp"
#include "lgap/error.hpp"
#include "lgap/parallel.hpp"
#include "lgap/rng.hpp"
#include "lgap/utf8.hpp"
#include "test_support.hpp"

using namespace lgap;

TEST(Rng, KnownHashValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(mix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, StageSeedsDifferPerStage) {
  EXPECT_NE(stage_seed(1, "corpus"), stage_seed(1, "encoder"));
  EXPECT_NE(stage_seed(1, "corpus"), stage_seed(2, "corpus"));
  EXPECT_EQ(stage_seed(7, "probe"), mix64(7 ^ fnv1a64("probe")));
  EXPECT_NE(derive_seed(5, 0), derive_seed(5, 1));
}

TEST(Rng, MappingsMatchReference) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xDEADBEEFULL}) {
    Rng rng(seed);
    test::RefRng ref(seed);
    for (int i = 0; i < 2000; ++i) {
      switch (i % 4) {
        case 0: ASSERT_EQ(rng.unit(), ref.unit()); break;
        case 1: {
          const std::uint64_t n = 1 + static_cast<std::uint64_t>(i) * 7919;
          ASSERT_EQ(rng.below(n), ref.below(n));
          break;
        }
        case 2: ASSERT_EQ(rng.bernoulli(0.3), ref.bernoulli(0.3)); break;
        default: ASSERT_EQ(rng.next(), ref.next()); break;
      }
    }
  }
}

TEST(Rng, BelowRejectsBiasedTail) {
  // n = 2^63 + 1 has threshold 2^63 - 1, so about half of the raw draws are rejected.
  const std::uint64_t n = (1ULL << 63) + 1;
  Rng rng(3);
  test::RefRng ref(3);
  for (int i = 0; i < 200; ++i) ASSERT_EQ(rng.below(n), ref.below(n));
}

TEST(Rng, UnitRangeAndNormalMoments) {
  Rng rng(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Utf8, RoundTripsMultiByte) {
  const std::u32string cps = U"a\u0430\u200B\U0001F600~";
  const auto bytes = test::to_utf8(cps);
  EXPECT_EQ(utf8::decode(bytes), cps);
  EXPECT_EQ(utf8::encode(cps), bytes);
  EXPECT_EQ(utf8::single("\xD0\xB0"), U'\u0430');
}

TEST(Utf8, RejectsMalformed) {
  EXPECT_THROW(utf8::decode("\xC3"), DataError);
  EXPECT_THROW(utf8::decode("\xC0\xAF"), DataError);
  EXPECT_THROW(utf8::decode("\xED\xA0\x80"), DataError);
  EXPECT_THROW(utf8::single("ab"), Error);
}

TEST(Digest, Sha256KnownVectors) {
  EXPECT_EQ(to_hex(sha256("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(to_hex(sha256("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, HexRoundTripAndErrors) {
  const auto d = sha256("lgap");
  EXPECT_EQ(from_hex(to_hex(d)), d);
  try {
    from_hex("zz");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.field(), "digest");
  }
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  for (unsigned threads : {1u, 2u, 5u}) {
    set_thread_count(threads);
    std::vector<int> out(97, 0);
    parallel_for(out.size(), [&](std::size_t t) { out[t] = static_cast<int>(t * t); });
    for (std::size_t t = 0; t < out.size(); ++t) ASSERT_EQ(out[t], static_cast<int>(t * t));
  }
  set_thread_count(1);
}

TEST(Parallel, PropagatesExceptions) {
  set_thread_count(3);
  EXPECT_THROW(parallel_for(10, [](std::size_t t) {
                 if (t == 7) throw DataError("boom");
               }),
               DataError);
  set_thread_count(1);
}
