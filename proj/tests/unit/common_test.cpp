#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "wikicite/common.hpp"

using namespace wikicite;

TEST(Text, FoldLowercasesTrimsAndCollapses) {
  EXPECT_EQ(text::fold("  Annals \t of\nBotany "), "annals of botany");
  EXPECT_EQ(text::collapse_whitespace(" a  b "), "a b");
  EXPECT_EQ(text::trim("\t x \n"), "x");
}

TEST(Text, SplitKeepsEmptyFields) {
  const auto parts = text::split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
  EXPECT_EQ(text::split_words(" one  two\tthree "), (std::vector<std::string>{"one", "two", "three"}));
}

TEST(Text, CaseInsensitiveHelpers) {
  EXPECT_TRUE(text::iequals("Cite Web", "cite web"));
  EXPECT_FALSE(text::iequals("cite", "cite web"));
  EXPECT_TRUE(text::istarts_with("#REDIRECT [[x]]", "#redirect"));
}

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Files, AtomicWriteReplacesContentAndLeavesNoTemporary) {
  testutil::TempDir dir;
  const auto p = dir / "out.txt";
  write_file_atomic(p, "first");
  write_file_atomic(p, "second\nline");
  EXPECT_EQ(read_file(p), "second\nline");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(sha256_file(p), sha256_hex("second\nline"));
}

TEST(Files, ForEachLineNumbersLinesWithoutNewlines) {
  testutil::TempDir dir;
  write_file_atomic(dir / "f", "a\nb\n\nc");
  std::vector<std::pair<std::string, std::size_t>> seen;
  for_each_line(dir / "f", [&](std::string_view l, std::size_t n) { seen.emplace_back(std::string(l), n); });
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_EQ(seen[3], (std::pair<std::string, std::size_t>{"c", 4}));
}

TEST(Numbers, FormatDoubleIsFixedPrecision) {
  EXPECT_EQ(format_double(0.5, 3), "0.500");
  EXPECT_EQ(format_double(2.0 / 3.0, 9), "0.666666667");
  EXPECT_EQ(format_double(-0.0, 2), "0.00");
}

TEST(Random, BoundedRandStaysInRangeAndCoversIt) {
  std::mt19937_64 rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = bounded_rand(rng, 7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  for (int i = 0; i < 1000; ++i) {
    const double u = unit_rand(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, StableShuffleIsADeterministicPermutation) {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  std::mt19937_64 r1(9), r2(9);
  stable_shuffle(a, r1);
  stable_shuffle(b, r2);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Errors, ConfigErrorCarriesEveryViolation) {
  ConfigError e({"a bad", "b bad"});
  EXPECT_EQ(e.violations().size(), 2u);
  EXPECT_NE(std::string(e.what()).find("a bad"), std::string::npos);
}
