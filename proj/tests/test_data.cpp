// Copyright 2026 The wmark Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "test_support.hpp"
#include "wmark/data.hpp"
#include "wmark/error.hpp"

using namespace wmark;
using wmark::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::vector<int> class_counts(const Dataset& d) {
  std::vector<int> c(static_cast<std::size_t>(d.num_classes()), 0);
  for (int y : d.labels()) ++c[static_cast<std::size_t>(y)];
  return c;
}

}  // namespace

TEST_SUITE("blobs") {
  TEST_CASE("zero spread puts every sample on its centroid") {
    Dataset d = make_blobs(5, 3, 7, 0.0, 1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto c = blob_centroid(d.label(i), 5, 3);
      for (std::size_t j = 0; j < 3; ++j) CHECK(d.row(i)[j] == c[j]);
    }
  }

  TEST_CASE("size and exact class balance") {
    Dataset d = make_blobs(3, 2, 100, 1.0, 2);
    CHECK(d.size() == 300);
    CHECK(class_counts(d) == std::vector<int>{100, 100, 100});
  }

  TEST_CASE("centroids lie on a radius-3 circle in the first two coordinates") {
    for (int c = 0; c < 4; ++c) {
      const auto v = blob_centroid(c, 4, 3);
      CHECK(std::hypot(v[0], v[1]) == doctest::Approx(3.0));
      CHECK(v[2] == 0.0);
    }
  }

  TEST_CASE("nearest-centroid classifier on tight blobs") {
    Dataset d = make_blobs(4, 2, 250, 0.3, 17);
    std::vector<std::vector<double>> cents;
    for (int c = 0; c < 4; ++c) cents.push_back(blob_centroid(c, 4, 2));
    auto nearest = [&](std::span<const double> x) {
      int best = 0;
      double bd = 1e300;
      for (int c = 0; c < 4; ++c) {
        const double dd = std::hypot(x[0] - cents[c][0], x[1] - cents[c][1]);
        if (dd < bd) bd = dd, best = c;
      }
      return best;
    };
    CHECK(accuracy(d, nearest) >= 0.97);
  }

  TEST_CASE("generator is a pure function of its arguments") {
    CHECK(make_blobs(4, 3, 20, 1.5, 9) == make_blobs(4, 3, 20, 1.5, 9));
    CHECK(!(make_blobs(4, 3, 20, 1.5, 9) == make_blobs(4, 3, 20, 1.5, 10)));
  }

  TEST_CASE("bad generator arguments") {
    CHECK_THROWS_AS(make_blobs(2, 2, 10, 1.0, 1), InputError);
    CHECK_THROWS_AS(make_blobs(3, 0, 10, 1.0, 1), InputError);
    CHECK_THROWS_AS(make_blobs(3, 2, 10, -1.0, 1), InputError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("constructor validation") {
    CHECK_THROWS_AS(Dataset({1.0, 2.0, 3.0}, {0, 1}, 2, 3), InputError);
    CHECK_THROWS_AS(Dataset({1.0, 2.0}, {3}, 2, 3), InputError);
    CHECK_THROWS_AS(Dataset({1.0, std::nan("")}, {0}, 2, 3), InputError);
  }

  TEST_CASE("subset and relabel") {
    Dataset d = make_blobs(3, 2, 4, 1.0, 1);
    const std::vector<std::size_t> idx = {0, 5, 11};
    Dataset s = d.subset(idx);
    REQUIRE(s.size() == 3);
    CHECK(s.label(1) == d.label(5));
    CHECK(s.row(2)[1] == d.row(11)[1]);
    Dataset r = s.relabeled({2, 2, 2});
    CHECK(r.labels() == std::vector<int>{2, 2, 2});
    CHECK(r.features() == s.features());
    CHECK(r.classes_present() == 1);
  }
}

TEST_SUITE("split") {
  TEST_CASE("stratified 50/50 split of 300 samples") {
    Dataset d = make_blobs(3, 2, 100, 1.0, 3);
    SplitResult s = split(d, {0.5, 4});
    CHECK(s.train.size() == 150);
    CHECK(s.holdout.size() == 150);
    CHECK(class_counts(s.train) == std::vector<int>{50, 50, 50});
    CHECK(class_counts(s.holdout) == std::vector<int>{50, 50, 50});
  }

  TEST_CASE("partition covers every index exactly once") {
    Dataset d = make_blobs(4, 2, 37, 1.0, 5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (double f : {0.1, 0.3, 0.5, 0.9}) {
        SplitResult s = split(d, {f, seed});
        std::vector<std::size_t> all = s.train_indices;
        all.insert(all.end(), s.holdout_indices.begin(), s.holdout_indices.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> want(d.size());
        std::iota(want.begin(), want.end(), std::size_t{0});
        CHECK(all == want);
        CHECK(s.train.size() + s.holdout.size() == d.size());
        CHECK(std::is_sorted(s.train_indices.begin(), s.train_indices.end()));
        for (std::size_t i = 0; i < s.train.size(); ++i) {
          CHECK(s.train.label(i) == d.label(s.train_indices[i]));
        }
      }
    }
  }

  TEST_CASE("same seed gives the same partition") {
    Dataset d = make_blobs(3, 2, 50, 1.0, 6);
    CHECK(split(d, {0.3, 8}).holdout_indices == split(d, {0.3, 8}).holdout_indices);
    CHECK(split(d, {0.3, 8}).holdout_indices != split(d, {0.3, 9}).holdout_indices);
  }

  TEST_CASE("degenerate fractions are rejected") {
    Dataset d = make_blobs(3, 2, 10, 1.0, 6);
    CHECK_THROWS_AS(split(d, {0.0, 1}), InputError);
    CHECK_THROWS_AS(split(d, {1.0, 1}), InputError);
    CHECK_THROWS_AS(split(d, {0.01, 1}), InputError);  // empty hold-out
  }
}

TEST_SUITE("csv") {
  TEST_CASE("three-line file round-trips exactly") {
    TempDir dir("csv");
    write(dir / "a.csv", "y,x1,x2\n1,0.1,-2.5\n3,1e-300,7\n2,0.30000000000000004,3.25\n");
    Dataset d = load_csv(dir / "a.csv");
    REQUIRE(d.size() == 3);
    CHECK(d.dim() == 2);
    CHECK(d.num_classes() == 3);
    CHECK(d.labels() == std::vector<int>{0, 2, 1});
    CHECK(d.row(0)[0] == 0.1);
    CHECK(d.row(1)[0] == 1e-300);
    CHECK(d.row(2)[0] == 0.30000000000000004);
    save_csv(d, dir / "b.csv");
    CHECK(load_csv(dir / "b.csv") == d);
  }

  TEST_CASE("export then load is the identity") {
    TempDir dir("csv");
    Dataset d = make_blobs(4, 3, 25, 1.7, 12);
    save_csv(d, dir / "d.csv");
    CHECK(load_csv(dir / "d.csv") == d);
  }

  TEST_CASE("header only is a parse error") {
    TempDir dir("csv");
    write(dir / "e.csv", "y,x1,x2\n");
    try {
      load_csv(dir / "e.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("no rows") != std::string::npos);
    }
  }

  TEST_CASE("malformed rows report their line") {
    TempDir dir("csv");
    write(dir / "r.csv", "y,x1,x2\n1,0,0\n2,1\n");
    try {
      load_csv(dir / "r.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    write(dir / "n.csv", "y,x1\n1,abc\n");
    CHECK_THROWS_AS(load_csv(dir / "n.csv"), ParseError);
    write(dir / "z.csv", "y,x1\n0,1.0\n");
    CHECK_THROWS_AS(load_csv(dir / "z.csv"), ParseError);
    write(dir / "h.csv", "label,x1\n1,1.0\n");
    CHECK_THROWS_AS(load_csv(dir / "h.csv"), ParseError);
    CHECK_THROWS_AS(load_csv(dir / "missing.csv"), ParseError);
  }

  TEST_CASE("class count override") {
    TempDir dir("csv");
    write(dir / "k.csv", "y,x1\n1,0\n2,1\n2,2\n");
    CHECK(load_csv(dir / "k.csv", 5).num_classes() == 5);
    CHECK_THROWS_AS(load_csv(dir / "k.csv", 1), Error);
  }
}
