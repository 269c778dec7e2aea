#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gmce/data.hpp"

using namespace gmce;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gmce_data_" + name)).string();
}

RawTable demo_table() {
  return read_csv_text(
      "age,edu,income\n"
      "2,a,0\n"
      "4,b,1\n"
      "6,a,1\n");
}

}  // namespace

TEST_CASE("csv parsing") {
  auto t = read_csv_text("a,b\n1,\"x,\"\"y\"\"\"\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1] == "x,\"y\"");

  CHECK_THROWS_AS(read_csv_text("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(read_csv_text(""), DataError);
  CHECK_THROWS_AS(demo_table().column("missing"), DataError);
}

TEST_CASE("schema fitting") {
  auto table = demo_table();
  auto schema = fit_schema(table, {{"age", ColumnKind::continuous},
                                   {"edu", ColumnKind::categorical}},
                           "income");
  CHECK(schema.features[0].min == 2.0);
  CHECK(schema.features[0].max == 6.0);
  CHECK(schema.features[1].vocabulary == std::vector<std::string>{"a", "b"});
  CHECK(schema.input_width() == 3);
  CHECK(schema.label_values == std::vector<std::string>{"0", "1"});

  auto constant = read_csv_text("c,y\n5,0\n5,1\n5,0\n");
  CHECK_THROWS_AS(fit_schema(constant, {{"c", ColumnKind::continuous}}, "y"), DataError);

  auto bad = read_csv_text("c,y\nfoo,0\n1,1\n");
  CHECK_THROWS_AS(fit_schema(bad, {{"c", ColumnKind::continuous}}, "y"), DataError);
}

TEST_CASE("preprocess and depreprocess") {
  auto table = demo_table();
  auto schema = fit_schema(table, {{"age", ColumnKind::continuous},
                                   {"edu", ColumnKind::categorical}},
                           "income");

  auto v = preprocess_row(table.rows[1], table, schema);  // age 4, edu b
  CHECK(v == std::vector<double>{0.5, 0.0, 1.0});

  auto raw = depreprocess_row(v, schema);
  CHECK(raw[0] == "4");
  CHECK(raw[1] == "b");

  // one-hot block sums to exactly 1
  auto ds = preprocess_table(table, schema);
  for (const auto& row : ds.x) {
    CHECK(row[1] + row[2] == 1.0);
  }
  CHECK(ds.labels == std::vector<int>{0, 1, 1});

  // unseen category errors out
  auto other = read_csv_text("age,edu,income\n3,zzz,0\n");
  CHECK_THROWS_AS(preprocess_table(other, schema), DataError);

  // out-of-range continuous values clip and are counted
  auto wide = read_csv_text("age,edu,income\n100,a,1\n-5,b,0\n");
  ClipStats stats;
  auto clipped = preprocess_table(wide, schema, &stats);
  CHECK(stats.clipped == 2);
  CHECK(clipped.x[0][0] == 1.0);
  CHECK(clipped.x[1][0] == 0.0);
}

TEST_CASE("categorical block sharpening") {
  TabularSchema schema;
  FeatureSpec f;
  f.name = "c";
  f.kind = ColumnKind::categorical;
  f.vocabulary = {"u", "v"};
  schema.features.push_back(f);

  auto out = sharpen_categorical_blocks({0.1, 0.9}, schema, 0.5);
  CHECK(out[0] == doctest::Approx(0.16798).epsilon(1e-3));
  CHECK(out[1] == doctest::Approx(0.83202).epsilon(1e-3));
  CHECK(out[0] + out[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("deterministic split") {
  auto s1 = split_indices(10, {.train_fraction = 0.8, .seed = 5, .repetition = 0});
  CHECK(s1.train.size() == 8);
  CHECK(s1.test.size() == 2);

  auto s2 = split_indices(10, {.train_fraction = 0.8, .seed = 5, .repetition = 0});
  CHECK(s1.train == s2.train);
  CHECK(s1.test == s2.test);

  auto s3 = split_indices(10, {.train_fraction = 0.8, .seed = 5, .repetition = 1});
  CHECK(s1.test != s3.test);

  // disjoint and exhaustive
  std::vector<bool> seen(10, false);
  for (auto i : s1.train) seen[i] = true;
  for (auto i : s1.test) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  for (bool b : seen) CHECK(b);
}

TEST_CASE("synthetic two gaussians") {
  auto t = synthetic_two_gaussians(500, {-2.0, 0.0}, {2.0, 0.0}, 0.5, 3, 42);
  CHECK(t.rows.size() == 1000);
  CHECK(t.column_names.size() == 5);

  // determinism
  auto t2 = synthetic_two_gaussians(500, {-2.0, 0.0}, {2.0, 0.0}, 0.5, 3, 42);
  CHECK(t.rows == t2.rows);

  // hand-rolled logistic regression separates the informative dims
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  for (int it = 0; it < 300; ++it) {
    double g0 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-(w0 + w1 * t.rows[i][0] + w2 * t.rows[i][1])));
      const double d = static_cast<double>(t.labels[i]) - s;
      g0 += d;
      g1 += d * t.rows[i][0];
      g2 += d * t.rows[i][1];
    }
    w0 += 0.01 * g0 / 1000.0 * 50;
    w1 += 0.01 * g1 / 1000.0 * 50;
    w2 += 0.01 * g2 / 1000.0 * 50;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-(w0 + w1 * t.rows[i][0] + w2 * t.rows[i][1])));
    hits += (s >= 0.5 ? 1 : 0) == t.labels[i];
  }
  CHECK(static_cast<double>(hits) / 1000.0 >= 0.99);

  // nuisance dims are label independent: |pearson r| small
  auto big = synthetic_two_gaussians(5000, {-2.0, 0.0}, {2.0, 0.0}, 0.5, 1, 7);
  double my = 0.0, mn = 0.0;
  for (std::size_t i = 0; i < big.rows.size(); ++i) {
    my += big.labels[i];
    mn += big.rows[i][2];
  }
  my /= 10000.0;
  mn /= 10000.0;
  double cov = 0.0, vy = 0.0, vn = 0.0;
  for (std::size_t i = 0; i < big.rows.size(); ++i) {
    const double dy = big.labels[i] - my, dn = big.rows[i][2] - mn;
    cov += dy * dn;
    vy += dy * dy;
    vn += dn * dn;
  }
  CHECK(std::fabs(cov / std::sqrt(vy * vn)) < 0.05);
}

namespace {

void write_idx_pair(const std::string& img_path, const std::string& lbl_path,
                    const std::vector<int>& digits, bool corrupt_magic = false) {
  std::ofstream img(img_path, std::ios::binary);
  std::ofstream lbl(lbl_path, std::ios::binary);
  auto be32 = [](std::ofstream& f, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  be32(img, corrupt_magic ? 0xDEADBEEF : 0x00000803u);
  be32(img, digits.size());
  be32(img, 28);
  be32(img, 28);
  be32(lbl, 0x00000801u);
  be32(lbl, digits.size());
  std::vector<unsigned char> px(784, 0);
  for (int d : digits) {
    px[0] = 255;
    px[1] = static_cast<unsigned char>(d * 10);
    img.write(reinterpret_cast<const char*>(px.data()), 784);
    const char c = static_cast<char>(d);
    lbl.write(&c, 1);
  }
}

}  // namespace

TEST_CASE("idx loader") {
  const auto img = tmp_path("images.idx3");
  const auto lbl = tmp_path("labels.idx1");
  write_idx_pair(img, lbl, {1, 7, 3, 7, 0, 1});

  auto mnist = load_mnist_idx(img, lbl);
  CHECK(mnist.dataset.size() == 4);  // digits 3 and 0 dropped
  CHECK(mnist.dataset.labels == std::vector<int>{0, 1, 1, 0});
  CHECK(mnist.dataset.x[0][0] == 1.0);  // byte 255 -> 1.0
  CHECK(mnist.dataset.x[0][2] == 0.0);  // byte 0 -> 0.0
  CHECK(mnist.dataset.width() == 784);
  CHECK(mnist.schema.features.size() == 784);

  const auto bad = tmp_path("bad.idx3");
  write_idx_pair(bad, lbl, {1, 7}, /*corrupt_magic=*/true);
  CHECK_THROWS_AS(load_mnist_idx(bad, lbl), DataError);

  // truncated image payload
  const auto trunc = tmp_path("trunc.idx3");
  {
    std::ofstream f(trunc, std::ios::binary);
    const unsigned char hdr[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28};
    f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    std::vector<char> partial(100, 0);
    f.write(partial.data(), partial.size());
  }
  CHECK_THROWS_AS(load_mnist_idx(trunc, lbl), DataError);
}

TEST_CASE("class weights") {
  std::vector<int> labels(100, 1);
  for (int i = 0; i < 25; ++i) labels[i] = 0;
  auto [w0, w1] = class_weights(labels);
  CHECK(w0 == doctest::Approx(2.0));
  CHECK(w1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(w0 * 25 + w1 * 75 == doctest::Approx(100.0).epsilon(1e-9));

  auto [b0, b1] = class_weights({0, 0, 1, 1});
  CHECK(b0 == 1.0);
  CHECK(b1 == 1.0);

  CHECK_THROWS_AS(class_weights({1, 1, 1}), DataError);
}

TEST_CASE("preprocess then depreprocess is the identity on conformant rows") {
  auto table = read_csv_text(
      "a,b,c,y\n"
      "0,u,10,0\n"
      "5,v,30,1\n"
      "2.5,w,20,0\n"
      "1.25,u,12.5,1\n");
  auto schema = fit_schema(table, {{"a", ColumnKind::continuous},
                                   {"b", ColumnKind::categorical},
                                   {"c", ColumnKind::continuous}},
                           "y");
  for (const auto& row : table.rows) {
    auto v = preprocess_row(row, table, schema);
    auto back = depreprocess_row(v, schema);
    for (std::size_t i = 0; i < back.size(); ++i) {
      // numeric equality, not string equality ("2.5" may round trip as "2.5")
      if (schema.features[i].kind == ColumnKind::continuous) {
        CHECK(std::stod(back[i]) == doctest::Approx(std::stod(row[i])).epsilon(1e-12));
      } else {
        CHECK(back[i] == row[i]);
      }
    }
  }
}
