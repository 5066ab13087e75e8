#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ace/io.hpp"
#include "ace/rng.hpp"
#include "ace/types.hpp"

namespace fs = std::filesystem;
using namespace ace;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("ace_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

embedding_matrix random_matrix(std::size_t n, std::size_t d, counter_rng& rng) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform(-5.0, 5.0);
  return embedding_matrix(n, d, std::move(v));
}

}  // namespace

TEST_CASE("canonicalize_partition relabels by first occurrence") {
  auto p = partition::canonicalize(std::vector<long long>{5, 5, 9, 9});
  CHECK(p.labels() == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(p.k() == 2);

  auto q = partition::canonicalize(std::vector<long long>{0, 1, 2});
  CHECK(q.labels() == std::vector<std::size_t>{0, 1, 2});
  CHECK(q.k() == 3);

  auto r = partition::canonicalize(std::vector<long long>{2, 0, 2, 1});
  CHECK(r.labels() == std::vector<std::size_t>{0, 1, 0, 2});
  CHECK(r.k() == 3);
}

TEST_CASE("canonicalize_partition rejects empty input") {
  CHECK_THROWS_MATCHES(partition::canonicalize(std::vector<long long>{}), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::empty_input; }));
}

TEST_CASE("canonicalization is idempotent and preserves co-membership") {
  counter_rng rng(71);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = 1 + rng.below(40);
    std::vector<long long> raw(n);
    for (auto& v : raw) v = static_cast<long long>(rng.below(10)) - 5;
    auto p = partition::canonicalize(raw);
    std::vector<long long> again(p.labels().begin(), p.labels().end());
    auto q = partition::canonicalize(again);
    CHECK(p == q);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK((raw[i] == raw[j]) == (p.label(i) == p.label(j)));
  }
}

TEST_CASE("matrix CSV and binary round-trips") {
  counter_rng rng(12);
  fs::path dir = temp_dir("roundtrip");
  for (int rep = 0; rep < 10; ++rep) {
    auto z = random_matrix(1 + rng.below(15), 1 + rng.below(6), rng);

    io::save_matrix_binary(z, dir / "m.emb");
    auto zb = io::load_matrix(dir / "m.emb");
    CHECK(zb == z);  // bit-exact

    io::save_matrix_csv(z, dir / "m.csv");
    auto zc = io::load_matrix(dir / "m.csv");
    CHECK(zc == z);  // shortest-round-trip text is value-exact
  }
}

TEST_CASE("load_bundle wires a 2-trial manifest") {
  fs::path dir = temp_dir("bundle");
  {
    std::ofstream(dir / "a.csv") << "0,0\n0,1\n1,0\n1,1\n";
    std::ofstream(dir / "b.csv") << "0,0\n0,2\n2,0\n2,2\n";
    std::ofstream(dir / "a.labels.csv") << "0\n0\n1\n1\n";
    std::ofstream(dir / "b.labels.csv") << "7\n7\n3\n3\n";
    std::ofstream(dir / "manifest.json") << R"({"trials": [
      {"id": "a", "embedding": "a.csv", "labels": "a.labels.csv"},
      {"id": "b", "embedding": "b.csv", "labels": "b.labels.csv"}]})";
  }
  auto bundle = io::load_bundle(dir / "manifest.json");
  CHECK(bundle.m() == 2);
  CHECK(bundle.n() == 4);
  CHECK(bundle.trials[0].id == "a");
  CHECK(bundle.trials[1].labels.labels() == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK_FALSE(bundle.raw_input.has_value());
}

TEST_CASE("load_bundle rejects label/embedding length mismatch") {
  fs::path dir = temp_dir("mismatch");
  {
    std::ofstream(dir / "a.csv") << "0\n1\n2\n3\n";
    std::ofstream(dir / "a.labels.csv") << "0\n1\n0\n";
    std::ofstream(dir / "manifest.json")
        << R"({"trials": [{"id": "a", "embedding": "a.csv", "labels": "a.labels.csv"}]})";
  }
  CHECK_THROWS_MATCHES(io::load_bundle(dir / "manifest.json"), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.code() == errc::shape_mismatch; }));
}

TEST_CASE("load_bundle checks metadata against label count") {
  // COIL-20-shaped bundle: n=1440 observations, K=20 labels.
  fs::path dir = temp_dir("coil");
  {
    std::ofstream emb(dir / "a.csv");
    std::ofstream lab(dir / "a.labels.csv");
    for (int i = 0; i < 1440; ++i) {
      emb << (i % 97) << ',' << (i % 31) << '\n';
      lab << (i % 20) << '\n';
    }
    std::ofstream(dir / "manifest.json")
        << R"({"trials": [{"id": "a", "embedding": "a.csv", "labels": "a.labels.csv"}]})";
  }
  auto bundle = io::load_bundle(dir / "manifest.json");
  CHECK(bundle.n() == 1440);
  CHECK(bundle.trials[0].labels.k() == 20);
}

TEST_CASE("non-finite matrix values are rejected") {
  fs::path dir = temp_dir("nonfinite");
  std::ofstream(dir / "bad.csv") << "0,1\nnan,2\n";
  CHECK_THROWS_AS(io::load_matrix(dir / "bad.csv"), error);
}

TEST_CASE("counter_rng is deterministic and substreams are order-free") {
  counter_rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  counter_rng root(7);
  auto s3 = root.substream(3);
  root.substream(0).uniform();
  auto s3_again = counter_rng(7).substream(3);
  for (int i = 0; i < 10; ++i) CHECK(s3.next_u64() == s3_again.next_u64());
}

TEST_CASE("counter_rng uniforms live in [0,1)") {
  counter_rng rng(9);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mean += u;
  }
  CHECK_THAT(mean / 100000, Catch::Matchers::WithinAbs(0.5, 0.01));
}
