/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "fixtures.hpp"
#include "moctrans/binary_io.hpp"
#include "moctrans/error.hpp"
#include "moctrans/synthdata/extract.hpp"
#include "moctrans/synthdata/generate.hpp"
#include "moctrans/synthdata/resize.hpp"

using namespace moct;
using namespace moct::data;
namespace fs = std::filesystem;

namespace {

Volume random_volume(int d, int h, int w, std::uint64_t seed) {
  Volume v(d, h, w, {7.0f, 1.75f, 1.5f});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 2.0f);
  for (float& x : v.values) x = g(rng);
  return v;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Mvol, RoundTripBitExact) {
  const auto dir = fixture::scratch("mvol");
  const Volume v = random_volume(4, 8, 8, 1);
  write_mvol((dir / "v.mvol").string(), v);
  EXPECT_EQ(read_volume((dir / "v.mvol").string()), v);
  LabelVolume l(4, 8, 8, v.spacing);
  for (std::size_t i = 0; i < l.values.size(); ++i) l.values[i] = static_cast<std::uint8_t>(i % 5);
  write_mvol((dir / "l.mvol").string(), l);
  EXPECT_EQ(read_labels((dir / "l.mvol").string()), l);
}

TEST(Mvol, LayoutSize) {
  EXPECT_EQ(encode_mvol(random_volume(4, 8, 8, 2)).size(), 30u + 4u * 4 * 8 * 8);
  EXPECT_EQ(encode_mvol(LabelVolume(3, 5, 7, {})).size(), 30u + 3u * 5 * 7);
  const auto bytes = encode_mvol(random_volume(2, 3, 4, 3));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "MVOL1");
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);  // D, little-endian
  EXPECT_EQ(bytes[10], 3);
  EXPECT_EQ(bytes[14], 4);
}

TEST(Mvol, TruncatedPayloadNamesByteCounts) {
  auto bytes = encode_mvol(random_volume(2, 4, 4, 4));
  bytes.resize(bytes.size() - 10);
  try {
    decode_volume(bytes);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("128"), std::string::npos) << msg;  // expected payload
    EXPECT_NE(msg.find("118"), std::string::npos) << msg;  // actual payload
  }
}

TEST(Mvol, BadMagicAndDtypeRejected) {
  auto bytes = encode_mvol(random_volume(2, 2, 2, 5));
  auto bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_volume(bad), DataError);
  auto dtype = bytes;
  dtype[5] = 7;
  EXPECT_THROW(decode_volume(dtype), DataError);
  EXPECT_THROW(decode_labels(bytes), DataError);
  EXPECT_THROW(read_volume("/nonexistent/x.mvol"), DataError);
}

TEST(Resize, IdentityAndConstant) {
  const auto v = random_volume(1, 5, 7, 6);
  EXPECT_EQ(resize2d(v.values, 5, 7, 5, 7), v.values);
  EXPECT_EQ(resize2d(v.values, 5, 7, 5, 7, ResizeMode::Nearest), v.values);
  const std::vector<float> c(12, 3.25f);
  for (int t : {1, 2, 5, 9, 16})
    for (float x : resize2d(c, 3, 4, t, t + 1)) EXPECT_FLOAT_EQ(x, 3.25f);
}

TEST(Resize, BilinearMatchesDirectInterpolation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto [ih, iw, oh, ow] : std::vector<std::array<int, 4>>{{2, 2, 4, 4}, {3, 5, 7, 2}, {8, 8, 3, 3}, {4, 6, 9, 13}}) {
    std::vector<float> src(static_cast<std::size_t>(ih * iw));
    for (float& x : src) x = u(rng);
    const auto out = resize2d(src, ih, iw, oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double sy = std::clamp((y + 0.5) * ih / oh - 0.5, 0.0, ih - 1.0);
        const double sx = std::clamp((x + 0.5) * iw / ow - 0.5, 0.0, iw - 1.0);
        const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
        const int y1 = std::min(y0 + 1, ih - 1), x1 = std::min(x0 + 1, iw - 1);
        const double fy = sy - y0, fx = sx - x0;
        auto at = [&](int yy, int xx) { return double(src[static_cast<std::size_t>(yy * iw + xx)]); };
        const double expect = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
        EXPECT_NEAR(out[static_cast<std::size_t>(y * ow + x)], expect, 1e-6) << ih << "x" << iw << "->" << oh << "x" << ow;
      }
  }
}

TEST(Resize, NearestTiesRoundDownAndAddNoLabels) {
  // 2 -> 4: centres 0.25, 0.75, 1.25, 1.75 of the source grid.
  EXPECT_EQ(nearest_source_index(0, 2, 4), 0);
  EXPECT_EQ(nearest_source_index(1, 2, 4), 0);
  EXPECT_EQ(nearest_source_index(2, 2, 4), 1);
  // 4 -> 2: centre at source 1.0 is an exact tie between pixels 0.5 and 1.5.
  EXPECT_EQ(nearest_source_index(0, 4, 2), 0);
  EXPECT_EQ(nearest_source_index(1, 4, 2), 2);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 2 + int(rng() % 10), w = 2 + int(rng() % 10), th = 1 + int(rng() % 20), tw = 1 + int(rng() % 20);
    std::vector<std::uint8_t> src(static_cast<std::size_t>(h * w));
    for (auto& v : src) v = static_cast<std::uint8_t>(rng() % 3 == 0 ? 4 : 0);
    for (auto v : resize_labels(src, h, w, th, tw)) EXPECT_TRUE(v == 0 || v == 4);
  }
}

TEST(Extract, SlabsForNonEmptySlices) {
  const Volume v = random_volume(5, 4, 4, 9);
  LabelVolume l(5, 4, 4, v.spacing);
  l.at(2, 1, 1) = 1;
  l.at(3, 2, 2) = 1;
  const auto samples = extract_samples(v, l, 3, 4, "S3", "S3_000");
  ASSERT_EQ(samples.size(), 2u);
  const Volume n = zscore(v);
  for (std::size_t k = 0; k < 2; ++k) {
    const int z = 2 + int(k);
    EXPECT_EQ(samples[k].slice, z);
    EXPECT_EQ(samples[k].task_id, 3);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(samples[k].slab.data[std::size_t(c) * 16 + i], n.slice(z - 1 + c)[i]);
  }
  EXPECT_EQ(slab_indices(0, 5), (std::array<int, 3>{0, 0, 1}));
  EXPECT_EQ(slab_indices(4, 5), (std::array<int, 3>{3, 4, 4}));
}

TEST(Extract, EmptyLabelsGiveNoSamples) {
  const Volume v = random_volume(3, 4, 4, 10);
  EXPECT_TRUE(extract_samples(v, LabelVolume(3, 4, 4, v.spacing), 1, 8).empty());
}

TEST(Extract, CountEqualsNonEmptySlices) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 3 + int(rng() % 6);
    const Volume v = random_volume(d, 6, 6, 100 + std::uint64_t(trial));
    LabelVolume l(d, 6, 6, v.spacing);
    int expect = 0;
    for (int z = 0; z < d; ++z)
      if (rng() % 2) {
        l.at(z, int(rng() % 6), int(rng() % 6)) = 1;
        ++expect;
      }
    EXPECT_EQ(int(extract_samples(v, l, 1, 6).size()), expect);
  }
}

TEST(Extract, ZscorePerVolume) {
  const Volume n = zscore(random_volume(3, 8, 8, 12));
  double mean = 0, var = 0;
  for (float x : n.values) mean += x;
  mean /= double(n.values.size());
  for (float x : n.values) var += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 1e-5);
  EXPECT_NEAR(var / double(n.values.size()), 1.0, 1e-4);
}

TEST(Generate, DeskCountsAndStructure) {
  const auto& m = fixture::desk_suite();
  const std::map<std::string, std::size_t> expect{{"S1", 6}, {"S2", 6}, {"S3", 5}, {"S4", 25}};
  std::size_t total = 0;
  for (const auto& d : m.datasets) {
    EXPECT_EQ(d.subjects.size(), expect.at(d.name)) << d.name;
    total += d.subjects.size();
  }
  EXPECT_EQ(total, 42u);
  EXPECT_NO_THROW(m.validate_paths());
  const auto vol = read_volume(m.resolve(m.dataset("S4").subjects[0].image));
  EXPECT_TRUE(vol.same_dims(12, 64, 64));
  EXPECT_EQ(m.dataset("S1").view, m.dataset("S2").view);
  EXPECT_EQ(m.dataset("S3").view, m.dataset("S4").view);
  EXPECT_NE(m.dataset("S1").view, m.dataset("S3").view);
}

TEST(Generate, S1OrganSIsEvalOnlyAndPresent) {
  const auto& m = fixture::desk_suite();
  for (const auto& s : m.dataset("S1").subjects) {
    EXPECT_EQ(s.labels.count("organ-S"), 0u) << s.id;
    ASSERT_EQ(s.eval_only.count("organ-S"), 1u) << s.id;
    const auto l = read_labels(m.resolve(s.eval_only.at("organ-S")));
    EXPECT_GT(std::count(l.values.begin(), l.values.end(), std::uint8_t{1}), 0) << s.id;
  }
}

TEST(Generate, LabelsUseDeclaredIds) {
  const auto& m = fixture::desk_suite();
  for (const auto& d : m.datasets)
    for (const auto& s : d.subjects)
      for (const auto* paths : {&s.labels, &s.eval_only})
        for (const auto& [organ, p] : *paths) {
          const auto l = read_labels(m.resolve(p));
          EXPECT_TRUE(std::all_of(l.values.begin(), l.values.end(), [](std::uint8_t v) { return v <= 1; })) << p;
        }
}

TEST(Generate, OrganSAndKIntensitiesOverlap) {
  const auto layout = suite_layout(SuiteScale::Desk);
  std::vector<float> s_vals, k_vals;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto g = generate_subject("view-b", layout, seed);
    for (std::size_t i = 0; i < g.image.values.size(); ++i) {
      if (g.organs.at("organ-S").values[i]) s_vals.push_back(g.image.values[i]);
      if (g.organs.at("organ-K").values[i]) k_vals.push_back(g.image.values[i]);
    }
  }
  std::sort(s_vals.begin(), s_vals.end());
  const float lo = s_vals[s_vals.size() / 20], hi = s_vals[s_vals.size() * 19 / 20];
  const auto inside = std::count_if(k_vals.begin(), k_vals.end(), [&](float v) { return v >= lo && v <= hi; });
  EXPECT_GT(double(inside) / double(k_vals.size()), 0.5);
}

TEST(Generate, ByteIdenticalPerSeed) {
  const auto a = fixture::scratch("gen_a"), b = fixture::scratch("gen_b");
  generate_suite(a.string(), 7, SuiteScale::Desk);
  generate_suite(b.string(), 7, SuiteScale::Desk);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 42u);
  const auto other = generate_subject("view-a", suite_layout(SuiteScale::Desk), 99);
  EXPECT_EQ(other.image, generate_subject("view-a", suite_layout(SuiteScale::Desk), 99).image);
  EXPECT_NE(other.image, generate_subject("view-a", suite_layout(SuiteScale::Desk), 98).image);
}

TEST(Generate, UnwritablePathRejected) {
  const auto file = fixture::scratch("blocker") / "plain";
  std::ofstream(file) << "x";
  EXPECT_THROW(generate_suite((file / "sub").string(), 1, SuiteScale::Desk), DataError);
}

TEST(Manifest, JsonRoundTripAndValidation) {
  const auto& m = fixture::desk_suite();
  const auto back = manifest_from_json(manifest_to_json(m), m.root);
  EXPECT_EQ(back.datasets, m.datasets);
  EXPECT_EQ(back.tasks, m.tasks);
  EXPECT_EQ(back.seed, m.seed);
  auto bad = m;
  bad.datasets[0].subjects[0].labels["organ-S"] = bad.datasets[0].subjects[0].eval_only.at("organ-S");
  EXPECT_THROW(bad.validate(), DataError);
  auto missing = m;
  missing.datasets[3].subjects[0].image = "S4/nope/image.mvol";
  EXPECT_THROW(missing.validate_paths(), DataError);
  EXPECT_EQ(m.tasks_for_view("view-b").size(), 2u);
}
