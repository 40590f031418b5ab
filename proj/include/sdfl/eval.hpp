#pragma once

#include "sdfl/corpus.hpp"
#include "sdfl/errors.hpp"
#include "sdfl/parallel.hpp"
#include "sdfl/wav.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sdfl {

/// Reported when the residual energy is below 1e-12 of the clean energy.
inline constexpr double kSnrCapDb = 120.0;

/// Global energy-ratio SNR of an estimate against the clean reference, in dB.
inline double snr_metric(std::span<const float> clean, std::span<const float> estimate) {
  if (clean.size() != estimate.size()) {
    throw DataError("snr_metric: length mismatch (" + std::to_string(clean.size()) + " vs " +
                    std::to_string(estimate.size()) + ")");
  }
  const double ec = energy(clean);
  if (ec == 0) throw DataError("snr_metric: clean signal is silent");
  double er = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = static_cast<double>(estimate[i]) - clean[i];
    er += d * d;
  }
  if (er < 1e-12 * ec) return kSnrCapDb;
  return 10.0 * std::log10(ec / er);
}

inline double snr_metric(const Waveform& clean, const Waveform& estimate) {
  return snr_metric(clean.samples, estimate.samples);
}

struct ScoreRecord {
  std::string id;
  double score = 0;
  std::size_t tranche = 0;  // 1-based; 0 = not yet partitioned
};

inline constexpr std::size_t kTranches = 8;

/// Sorts by (score, id) ascending and cuts into `tranches` consecutive groups
/// whose sizes differ by at most one (the first r groups take the remainder).
/// Tranche 1 holds the lowest scores, i.e. the hardest files.
inline void partition_octiles(std::vector<ScoreRecord>& records, std::size_t tranches = kTranches) {
  if (tranches == 0) throw std::invalid_argument("partition_octiles: zero tranches");
  if (records.size() < tranches) {
    throw DataError("partition_octiles: need at least " + std::to_string(tranches) +
                    " records, got " + std::to_string(records.size()));
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].score != records[b].score) return records[a].score < records[b].score;
    return records[a].id < records[b].id;
  });
  const std::size_t base = records.size() / tranches;
  const std::size_t extra = records.size() % tranches;
  std::size_t pos = 0;
  for (std::size_t t = 0; t < tranches; ++t) {
    const std::size_t count = base + (t < extra ? 1 : 0);
    for (std::size_t k = 0; k < count; ++k) records[order[pos++]].tranche = t + 1;
  }
}

// ---------------------------------------------------------------------------
// Corpus evaluation

/// One test file: the clean reference and the noisy input it was mixed into.
struct EvalItem {
  std::string id;
  std::function<Waveform()> clean;
  std::function<Waveform()> noisy;
};

struct SystemOutputs {
  std::string name;
  std::function<Waveform(const std::string& id)> output;
};

struct SystemResult {
  std::string name;
  std::vector<double> snr_db;       // per item, in item order
  double mean_snr_db = 0;
  std::vector<std::size_t> tranche_count;
  std::vector<double> tranche_mean_snr_db;
};

struct EvalReport {
  std::vector<ScoreRecord> partition;  // per item, in item order
  std::vector<SystemResult> systems;   // "Noisy" first
  std::size_t tranches = kTranches;
  bool external_scores = false;

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& s : systems) n += 1 + s.tranche_mean_snr_db.size();
    return n;
  }
};

/// Scores every system on every item and aggregates overall and per tranche.
/// Items are partitioned by the measured input SNR of the noisy file unless
/// external per-id scores are supplied.
inline EvalReport evaluate_corpus(const std::vector<EvalItem>& items,
                                  const std::vector<SystemOutputs>& systems,
                                  const std::optional<std::map<std::string, double>>& external = {},
                                  std::size_t tranches = kTranches,
                                  std::size_t threads = 1) {
  EvalReport rep;
  rep.tranches = tranches;
  rep.external_scores = external.has_value();
  const std::size_t n = items.size();
  const std::size_t ns = systems.size() + 1;

  std::vector<std::vector<double>> snr(ns, std::vector<double>(n));
  parallel_for(n, threads, [&](std::size_t i) {
    const Waveform clean = items[i].clean();
    snr[0][i] = snr_metric(clean, items[i].noisy());
    for (std::size_t s = 0; s < systems.size(); ++s) {
      const Waveform out = systems[s].output(items[i].id);
      if (out.size() != clean.size()) {
        throw DataError("evaluate: system '" + systems[s].name + "' output for '" + items[i].id +
                        "' has " + std::to_string(out.size()) + " samples, expected " +
                        std::to_string(clean.size()));
      }
      snr[s + 1][i] = snr_metric(clean, out);
    }
  });

  rep.partition.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep.partition[i].id = items[i].id;
    if (external) {
      auto it = external->find(items[i].id);
      if (it == external->end()) throw DataError("evaluate: no external score for '" + items[i].id + "'");
      rep.partition[i].score = it->second;
    } else {
      rep.partition[i].score = snr[0][i];
    }
  }
  if (external) {
    for (const auto& [id, score] : *external) {
      const bool known = std::any_of(items.begin(), items.end(), [&](const EvalItem& it) { return it.id == id; });
      if (!known) throw DataError("evaluate: external score CSV names unknown id '" + id + "'");
    }
  }
  partition_octiles(rep.partition, tranches);

  for (std::size_t s = 0; s < ns; ++s) {
    SystemResult r;
    r.name = s == 0 ? "Noisy" : systems[s - 1].name;
    r.snr_db = snr[s];
    r.tranche_count.assign(tranches, 0);
    r.tranche_mean_snr_db.assign(tranches, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += snr[s][i];
      const std::size_t t = rep.partition[i].tranche - 1;
      r.tranche_count[t] += 1;
      r.tranche_mean_snr_db[t] += snr[s][i];
    }
    r.mean_snr_db = total / static_cast<double>(n);
    for (std::size_t t = 0; t < tranches; ++t) r.tranche_mean_snr_db[t] /= static_cast<double>(r.tranche_count[t]);
    rep.systems.push_back(std::move(r));
  }
  return rep;
}

/// Columns: system, tranche (0 = overall), n_files, mean_snr_db.
inline void write_report_csv(std::ostream& out, const EvalReport& rep) {
  out << "system,tranche,n_files,mean_snr_db\n";
  out << std::setprecision(10);
  for (const auto& s : rep.systems) {
    out << s.name << ",0," << s.snr_db.size() << ',' << s.mean_snr_db << '\n';
    for (std::size_t t = 0; t < rep.tranches; ++t) {
      out << s.name << ',' << t + 1 << ',' << s.tranche_count[t] << ',' << s.tranche_mean_snr_db[t] << '\n';
    }
  }
}

inline void write_report_text(std::ostream& out, const EvalReport& rep) {
  std::size_t name_w = 6;
  for (const auto& s : rep.systems) name_w = std::max(name_w, s.name.size());
  out << "Mean SNR (dB), overall and per tranche (1 = hardest)\n";
  out << std::left << std::setw(static_cast<int>(name_w)) << "System" << std::right
      << std::setw(9) << "All";
  for (std::size_t t = 0; t < rep.tranches; ++t) out << std::setw(8) << ("T" + std::to_string(t + 1));
  out << '\n';
  // Values that round to zero print without a sign.
  auto cell = [](double v) { return std::abs(v) < 0.005 ? 0.0 : v; };
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(2);
  for (const auto& s : rep.systems) {
    out << std::left << std::setw(static_cast<int>(name_w)) << s.name << std::right
        << std::setw(9) << cell(s.mean_snr_db);
    for (double v : s.tranche_mean_snr_db) out << std::setw(8) << cell(v);
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
  out << "\nFiles: " << rep.partition.size() << "; tranches by "
      << (rep.external_scores ? "external per-file score" : "measured input SNR")
      << "; SNR capped at +" << kSnrCapDb << " dB for residual energy below 1e-12 of the reference.\n";
}

}  // namespace sdfl
