#include "sdfl/errors.hpp"
#include "sdfl/eval.hpp"
#include "sdfl/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

using namespace sdfl;

namespace {

Waveform wave(std::vector<float> s) { return Waveform{std::move(s), kSampleRate}; }

std::vector<float> random_samples(std::size_t n, Rng& rng, double amp) {
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-amp, amp));
  return x;
}

/// Items whose noisy input has noise amplitude growing with the index.
std::vector<EvalItem> make_items(std::size_t count, std::uint64_t seed) {
  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    auto clean = wave(random_samples(256, rng, 0.5));
    auto noisy = clean;
    const double amp = 0.01 * static_cast<double>(i + 1);
    for (auto& v : noisy.samples) v += static_cast<float>(rng.uniform(-amp, amp));
    items.push_back({"f" + std::to_string(i), [clean] { return clean; }, [noisy] { return noisy; }});
  }
  return items;
}

}  // namespace

TEST(Snr, Examples) {
  EXPECT_EQ(snr_metric(wave({1, 2, 3}), wave({1, 2, 3})), 120.0);
  EXPECT_NEAR(snr_metric(wave({2, 0}), wave({1, 0})), 6.020599913279624, 1e-12);
  EXPECT_NEAR(snr_metric(wave({1, 1}), wave({0, 0})), 0.0, 1e-12);
  EXPECT_NEAR(snr_metric(wave({1, 0, 0, 0}), wave({1, 0.1f, 0, 0})), 20.0, 1e-6);
}

TEST(Snr, Errors) {
  EXPECT_THROW(snr_metric(wave({1, 2}), wave({1})), DataError);
  EXPECT_THROW(snr_metric(wave({0, 0}), wave({1, 1})), DataError);
}

TEST(Snr, JointScaleInvariance) {
  Rng rng(0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_samples(100, rng, 0.5);
    const auto e = random_samples(100, rng, 0.5);
    const double k = std::exp2(rng.uniform_index(9) - 4.0);  // exact in float
    std::vector<float> ck(c), ek(e);
    for (auto& v : ck) v = static_cast<float>(v * k);
    for (auto& v : ek) v = static_cast<float>(v * k);
    EXPECT_NEAR(snr_metric(c, e), snr_metric(ck, ek), 1e-9);
  }
}

TEST(Partition, EvenSizes) {
  std::vector<ScoreRecord> recs;
  for (std::size_t i = 0; i < 824; ++i) recs.push_back({"r" + std::to_string(i), static_cast<double>(i % 97), 0});
  partition_octiles(recs);
  std::vector<std::size_t> counts(9, 0);
  for (const auto& r : recs) counts.at(r.tranche)++;
  EXPECT_EQ(counts[0], 0u);
  for (std::size_t t = 1; t <= 8; ++t) EXPECT_EQ(counts[t], 103u);
}

TEST(Partition, SixteenRecords) {
  std::vector<ScoreRecord> recs;
  for (int i = 15; i >= 0; --i) recs.push_back({"r" + std::to_string(i), static_cast<double>(i), 0});
  partition_octiles(recs);
  for (const auto& r : recs) EXPECT_EQ(r.tranche, static_cast<std::size_t>(r.score) / 2 + 1) << r.id;
}

TEST(Partition, RemainderGoesToFirstTranches) {
  std::vector<ScoreRecord> recs;
  for (std::size_t i = 0; i < 19; ++i) recs.push_back({"r" + std::to_string(100 + i), static_cast<double>(i), 0});
  partition_octiles(recs);
  std::vector<std::size_t> counts(8, 0);
  for (const auto& r : recs) counts[r.tranche - 1]++;
  EXPECT_EQ(counts, (std::vector<std::size_t>{3, 3, 3, 2, 2, 2, 2, 2}));
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_LE(recs[i - 1].tranche, recs[i].tranche);
}

TEST(Partition, TiesBrokenById) {
  std::vector<ScoreRecord> recs;
  for (const char* id : {"h", "g", "f", "e", "d", "c", "b", "a"}) recs.push_back({id, 1.0, 0});
  partition_octiles(recs);
  for (const auto& r : recs) EXPECT_EQ(r.tranche, static_cast<std::size_t>(r.id[0] - 'a') + 1);
}

TEST(Partition, Errors) {
  std::vector<ScoreRecord> few(7, ScoreRecord{"x", 0, 0});
  EXPECT_THROW(partition_octiles(few), DataError);
  EXPECT_THROW(partition_octiles(few, 0), std::invalid_argument);
}

TEST(Partition, PermutationInvariant) {
  Rng rng(1);
  std::vector<ScoreRecord> recs;
  for (std::size_t i = 0; i < 300; ++i) {
    recs.push_back({"r" + std::to_string(i), std::round(rng.uniform(0, 20)), 0});
  }
  auto ref = recs;
  partition_octiles(ref);
  std::map<std::string, std::size_t> want;
  for (const auto& r : ref) want[r.id] = r.tranche;
  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = recs;
    rng.shuffle(shuffled);
    partition_octiles(shuffled);
    for (const auto& r : shuffled) ASSERT_EQ(r.tranche, want[r.id]);
  }
}

TEST(EvaluateCorpus, CellsAndNoisyRow) {
  const auto items = make_items(16, 0);
  std::map<std::string, Waveform> outputs;
  for (const auto& it : items) outputs[it.id] = it.clean();
  const SystemOutputs oracle{"Oracle", [&](const std::string& id) { return outputs.at(id); }};
  const auto rep = evaluate_corpus(items, {oracle});
  ASSERT_EQ(rep.systems.size(), 2u);
  EXPECT_EQ(rep.cell_count(), 2u * (1 + 8));
  EXPECT_EQ(rep.systems[0].name, "Noisy");
  EXPECT_EQ(rep.systems[1].mean_snr_db, 120.0);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(rep.systems[0].tranche_count[t], 2u);
  // noisier items fall in lower tranches
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(rep.partition[i].tranche, 8 - i / 2) << i;
  double mean = 0;
  for (const auto& it : items) mean += snr_metric(it.clean(), it.noisy());
  EXPECT_NEAR(rep.systems[0].mean_snr_db, mean / 16, 1e-12);
  for (std::size_t t = 1; t < 8; ++t) {
    EXPECT_LT(rep.systems[0].tranche_mean_snr_db[t - 1], rep.systems[0].tranche_mean_snr_db[t]);
  }
}

TEST(EvaluateCorpus, ExternalScoresDriveTranches) {
  const auto items = make_items(8, 1);
  std::map<std::string, double> scores;
  for (std::size_t i = 0; i < 8; ++i) scores["f" + std::to_string(i)] = static_cast<double>(i);
  const auto rep = evaluate_corpus(items, {}, scores);
  EXPECT_TRUE(rep.external_scores);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(rep.partition[i].tranche, i + 1);
  auto missing = scores;
  missing.erase("f3");
  EXPECT_THROW(evaluate_corpus(items, {}, missing), DataError);
  auto extra = scores;
  extra["ghost"] = 1;
  EXPECT_THROW(evaluate_corpus(items, {}, extra), DataError);
}

TEST(EvaluateCorpus, ParallelMatchesSequential) {
  const auto items = make_items(24, 2);
  const SystemOutputs echo{"Echo", [&](const std::string& id) {
                             for (const auto& it : items)
                               if (it.id == id) return it.noisy();
                             return Waveform{};
                           }};
  const auto a = evaluate_corpus(items, {echo}, {}, 8, 1);
  const auto b = evaluate_corpus(items, {echo}, {}, 8, 4);
  EXPECT_EQ(a.systems[1].snr_db, b.systems[1].snr_db);
  EXPECT_EQ(a.systems[0].snr_db, a.systems[1].snr_db);
}

TEST(EvaluateCorpus, RejectsWrongOutputLength) {
  const auto items = make_items(8, 3);
  const SystemOutputs bad{"Bad", [](const std::string&) { return wave({0.1f}); }};
  EXPECT_THROW(evaluate_corpus(items, {bad}), DataError);
}

TEST(Report, TextAndCsv) {
  const auto items = make_items(8, 4);
  const auto rep = evaluate_corpus(items, {});
  std::ostringstream csv, txt;
  write_report_csv(csv, rep);
  write_report_text(txt, rep);
  const auto c = csv.str();
  EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 1 + 9);
  EXPECT_EQ(c.rfind("system,tranche,n_files,mean_snr_db\n", 0), 0u);
  const auto t = txt.str();
  EXPECT_NE(t.find("Noisy"), std::string::npos);
  EXPECT_NE(t.find("+120 dB"), std::string::npos);
  EXPECT_EQ(t.find("-0.00"), std::string::npos);
}
