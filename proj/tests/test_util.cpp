#include <doctest.h>

#include <atomic>
#include <filesystem>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

using namespace iqlab;

TEST_CASE("double_to_string round-trips") {
  for (const double v : {0.0, -1.5, 3.14159265358979, 1e-300, 2200.0 / 89.0}) {
    CHECK(parse_double(double_to_string(v), "test") == v);
  }
}

TEST_CASE("parse_double rejects junk") {
  CHECK_THROWS_AS(parse_double("abc", "x"), ValidationError);
  CHECK_THROWS_AS(parse_double("1.5x", "x"), ValidationError);
  CHECK_THROWS_AS(parse_double("", "x"), ValidationError);
  CHECK_THROWS_AS(parse_double("inf", "x"), ValidationError);
}

TEST_CASE("format_decimal rounds half-even") {
  // All of these scale to an exact .5, so the tie goes to the even digit.
  CHECK(format_decimal(0.8125, 3) == "0.812");
  CHECK(format_decimal(0.8135, 3) == "0.814");
  CHECK(format_decimal(0.8145, 3) == "0.814");
  CHECK(format_decimal(85.25, 1) == "85.2");
  CHECK(format_decimal(85.75, 1) == "85.8");
  CHECK(format_decimal(1.0, 3) == "1.000");
  CHECK(format_decimal(-0.8125, 3) == "-0.812");
  CHECK(format_decimal(0.0004, 3) == "0.000");
}

TEST_CASE("rng streams are deterministic and distributions sane") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng r(77);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  CHECK(mean / n == doctest::Approx(0.5).epsilon(0.02));

  double nm = 0.0, nv = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.normal();
    nm += g;
    nv += g * g;
  }
  CHECK(nm / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(nv / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("uniform_int is in range and seed-stable") {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.uniform_int(7);
    CHECK(x < 7);
    CHECK(x == b.uniform_int(7));
  }
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(1, 5) == mix_seed(1, 5));
}

TEST_CASE("atomic_write_file leaves no temp file") {
  const auto dir = std::filesystem::temp_directory_path() / "iqlab_util_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "file.txt";
  atomic_write_file(path, "hello");
  CHECK(read_file(path) == "hello");
  CHECK(!std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for covers every index once, any job count") {
  for (const int jobs : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(jobs, hits.size(), [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("split helpers") {
  const auto parts = split_ws("  a\tbb  ccc ");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1] == "bb");
  CHECK(parts[2] == "ccc");

  const auto lines = split_lines("one\ntwo\n\nthree");
  REQUIRE(lines.size() == 4);
  CHECK(lines[2].empty());
  CHECK(lines[3] == "three");
}
