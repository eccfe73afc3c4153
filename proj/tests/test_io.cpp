#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>

#include "dimco/io.hpp"
#include "doctest.h"

using namespace dimco;

namespace {

LabeledEmbeddings small_data() {
  LabeledEmbeddings d{2, Matrix(2, 3), {1, 0}};
  d.data.data = {0.5, -1.25, 3.0, 1e-3, 7.0, -0.1};
  return d;
}

std::size_t parse_offset(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.offset();
  }
  return static_cast<std::size_t>(-1);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dimco_test_io_" + name);
}

}  // namespace

TEST_CASE("embedding files") {
  const auto d = small_data();
  const auto bytes = io::encode_embeddings(d);
  CHECK(bytes.size() == 52);
  CHECK(std::memcmp(bytes.data(), "DEMB", 4) == 0);
  CHECK(bytes[4] == 1);

  const auto back = io::decode_embeddings(bytes);
  CHECK(back.class_count == 2);
  CHECK(back.labels == d.labels);
  REQUIRE(back.data.rows == 2);
  REQUIRE(back.data.cols == 3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.data.data[i] == static_cast<double>(static_cast<float>(d.data.data[i])));

  for (std::size_t cut : {51u, 30u, 20u, 8u, 3u}) {
    const std::span<const std::uint8_t> trunc(bytes.data(), cut);
    if (cut >= 20) CHECK(parse_offset([&] { io::decode_embeddings(trunc); }) == 52);
    else CHECK_THROWS_AS(io::decode_embeddings(trunc), ParseError);
  }

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(parse_offset([&] { io::decode_embeddings(bad_magic); }) == 0);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK(parse_offset([&] { io::decode_embeddings(bad_version); }) == 4);
  auto bad_label = bytes;
  bad_label[48] = 5;
  CHECK(parse_offset([&] { io::decode_embeddings(bad_label); }) == 48);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::decode_embeddings(trailing), ParseError);

  const auto path = temp_path("emb.demb");
  io::write_embeddings(path, d);
  CHECK(std::filesystem::file_size(path) == 52);
  CHECK(io::read_embeddings(path).labels == d.labels);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(io::read_embeddings(path), Error);
}

TEST_CASE("code files") {
  std::mt19937_64 rng(1);
  for (const CodeSpec spec : {CodeSpec{16, 4}, CodeSpec{5, 7}, CodeSpec{2, 9}, CodeSpec{1000, 3}}) {
    std::vector<Codeword> words;
    std::vector<std::uint32_t> labels;
    std::uniform_int_distribution<Symbol> s(0, spec.k - 1);
    for (int n = 0; n < 37; ++n) {
      Codeword w(spec.d);
      for (auto& x : w) x = s(rng);
      words.push_back(w);
      labels.push_back(static_cast<std::uint32_t>(n % 4));
    }
    const auto db = make_database(spec, words, labels);
    const auto bytes = io::encode_codes(db);
    CHECK(bytes.size() == io::kCodeHeaderBytes + 37 * spec.bytes_per_code() + 37 * 4);
    const auto back = io::decode_codes(bytes);
    CHECK(back.spec() == spec);
    CHECK(back.labels == labels);
    bool same = true;
    for (std::size_t n = 0; n < 37; ++n) same = same && back.packed.unpack(n) == words[n];
    CHECK(same);

    CodeDatabase unlabeled{db.packed, {}, false};
    const auto ub = io::encode_codes(unlabeled);
    CHECK(ub.size() == io::kCodeHeaderBytes + 37 * spec.bytes_per_code());
    CHECK_FALSE(io::decode_codes(ub).has_labels);

    const std::span<const std::uint8_t> trunc(bytes.data(), bytes.size() - 1);
    CHECK(parse_offset([&] { io::decode_codes(trunc); }) == bytes.size());
  }
  // A symbol outside [0, k) in the payload is rejected.
  const auto db = make_database({5, 1}, std::vector<Codeword>{{4}}, std::vector<std::uint32_t>{0});
  auto bytes = io::encode_codes(db);
  bytes[io::kCodeHeaderBytes] = 7;
  CHECK_THROWS_AS(io::decode_codes(bytes), ParseError);

  const auto empty = make_database({4, 2}, std::vector<Codeword>{}, std::vector<std::uint32_t>{});
  CHECK(io::decode_codes(io::encode_codes(empty)).size() == 0);
}

TEST_CASE("model files") {
  for (auto act : {Activation::relu, Activation::tanh}) {
    const EncoderConfig cfg{3, {5, 4}, 6, {7, 2}, act, 0xDEADBEEFCAFEull};
    const auto p = init_encoder(cfg);
    const auto bytes = io::encode_model(p);
    const std::size_t header = 8 + 4 + 4 + 2 * 4 + 4 * 4 + 8;
    CHECK(bytes.size() == header + 8 * p.size());
    const auto back = io::decode_model(bytes);
    CHECK(back == p);

    auto bad = bytes;
    bad[3] = 'X';
    CHECK(parse_offset([&] { io::decode_model(bad); }) == 0);
    const std::span<const std::uint8_t> trunc(bytes.data(), bytes.size() - 3);
    CHECK(parse_offset([&] { io::decode_model(trunc); }) == bytes.size());
  }

  const auto path = temp_path("m.dmdl");
  const auto p = init_encoder(EncoderConfig{2, {}, 8, {4, 2}, Activation::relu, 1});
  io::write_model(path, p);
  CHECK(io::read_model(path) == p);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove(path);
}

TEST_CASE("codebook files") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(50, 7);
  for (double& v : x.data) v = z(rng);

  const auto pq = pq_train(x, {4, 3}, 1);
  const auto pb = io::encode_pq(pq);
  CHECK(pb.size() == 8 + 16 + 3 * 4 * 3 * 8);
  const auto pq2 = io::decode_pq(pb);
  CHECK(pq2.input_dim == 7);
  CHECK(pq2.padded_dim == 9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pq2.centroids[i].data == pq.centroids[i].data);

  const auto sq = sq_train(x, 3);
  const auto sb = io::encode_sq(sq);
  CHECK(sb.size() == 8 + 8 + 7 * 3 * 8);
  const auto sq2 = io::decode_sq(sb);
  CHECK(sq2.levels.data == sq.levels.data);

  auto wrong = pb;
  std::memcpy(wrong.data(), "DSQ1", 4);
  CHECK(parse_offset([&] { io::decode_pq(wrong); }) == 0);
}

TEST_CASE("synthetic data generator") {
  const SynthSpec spec{5, 100, 2, 0.05, 1.0, 7};
  const auto a = gen_synth(spec);
  const auto b = gen_synth(spec);
  CHECK(a.data.data.data == b.data.data.data);
  CHECK(a.data.labels == b.data.labels);
  CHECK(a.data.size() == 500);
  for (double c : a.centers.data) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }

  SynthSpec flat = spec;
  flat.spread = 0.0;
  const auto f = gen_synth(flat);
  for (std::size_t n = 0; n < f.data.size(); ++n) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(f.data.data(n, j) == f.centers(f.data.labels[n], j));
  }

  // Nearest-center classification. Uniform centers sometimes land close
  // together, so the accuracy floor applies to draws separated by at least 6 sigma.
  int separated = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthSpec s = spec;
    s.seed = seed;
    const auto g = gen_synth(s);
    double min_gap = INFINITY;
    for (std::uint32_t a = 0; a < 5; ++a) {
      for (std::uint32_t b = a + 1; b < 5; ++b) {
        min_gap = std::min(min_gap, std::hypot(g.centers(a, 0) - g.centers(b, 0), g.centers(a, 1) - g.centers(b, 1)));
      }
    }
    if (min_gap < 6 * spec.spread) continue;
    ++separated;
    std::size_t correct = 0;
    for (std::size_t n = 0; n < g.data.size(); ++n) {
      std::uint32_t best = 0;
      double bd = INFINITY;
      for (std::uint32_t c = 0; c < 5; ++c) {
        const double dx = g.data.data(n, 0) - g.centers(c, 0), dy = g.data.data(n, 1) - g.centers(c, 1);
        if (dx * dx + dy * dy < bd) {
          bd = dx * dx + dy * dy;
          best = c;
        }
      }
      correct += best == g.data.labels[n];
    }
    CHECK(static_cast<double>(correct) / 500.0 >= 0.99);
  }
  CHECK(separated >= 5);

  CHECK_THROWS_AS(gen_synth({0, 10, 2, 0.1, 1.0, 0}), ConfigError);
  CHECK_THROWS_AS(gen_synth({2, 10, 2, -0.1, 1.0, 0}), ConfigError);
}

TEST_CASE("per-class split") {
  const auto d = gen_synth({4, 10, 3, 0.1, 1.0, 3}).data;
  const auto s = split_per_class(d, 3, 5);
  CHECK(s.train.size() == 12);
  CHECK(s.test.size() == 28);
  const auto t = split_per_class(d, 3, 5);
  CHECK(t.train.data.data == s.train.data.data);
  for (const auto& m : s.train.class_members()) CHECK(m.size() == 3);
}
