// Copyright (c) the iqlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "iqlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "iqlab/error.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

void check_paired(std::span<const double> a, std::span<const double> b,
                  const char* op) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(op) + ": length mismatch (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) {
    throw ValidationError(std::string(op) +
                          ": need at least 2 paired samples, got " +
                          std::to_string(a.size()));
  }
  for (const double v : a) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(op) + ": non-finite prediction");
    }
  }
  for (const double v : b) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(op) + ": non-finite target");
    }
  }
}

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) +
                                    static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b,
               const char* op) {
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw UndefinedCorrelationError(
        std::string(op) + ": undefined correlation on a constant vector");
  }
  return sab / (std::sqrt(saa) * std::sqrt(sbb));
}

std::string cell_text(const DatasetMetrics& m) {
  return format_decimal(m.srcc, 3) + "/" + format_decimal(m.plcc, 3);
}

}  // namespace

double srcc(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, "srcc");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  return pearson(ra, rb, "srcc");
}

double plcc(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, "plcc");
  return pearson(a, b, "plcc");
}

double pairwise_accuracy(std::span<const PairWinner> predicted,
                         std::span<const PairWinner> truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("pairwise_accuracy: length mismatch");
  }
  if (predicted.empty()) {
    throw ValidationError("pairwise_accuracy: empty label sequence");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double binary_accuracy(std::span<const double> probabilities,
                       std::span<const int> labels, double threshold) {
  if (probabilities.size() != labels.size()) {
    throw ValidationError("binary_accuracy: length mismatch");
  }
  if (probabilities.empty()) {
    throw ValidationError("binary_accuracy: empty input");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("binary_accuracy: threshold must lie in (0,1)");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValidationError("binary_accuracy: labels must be 0 or 1");
    }
    const bool positive = probabilities[i] >= threshold;
    if (positive == (labels[i] == 1)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

double side_by_side(const PreferenceCounts& counts) {
  if (counts.good < 0 || counts.same < 0 || counts.bad < 0) {
    throw ValidationError("side_by_side: counts must be nonnegative");
  }
  const long long denom = counts.same + counts.bad;
  if (denom == 0) {
    throw UndefinedCorrelationError(
        "side_by_side: undefined ratio, same+bad is zero");
  }
  return static_cast<double>(counts.good + counts.same) /
         static_cast<double>(denom);
}

std::string format_report(const MetricsReport& report, ReportStyle style) {
  std::ostringstream out;
  if (style == ReportStyle::kMarkdownTable) {
    out << "| Model |";
    for (const auto& d : report.datasets) out << " " << d << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < report.datasets.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& [label, cells] : report.rows) {
      out << "| " << label << " |";
      for (const auto& d : report.datasets) {
        const auto it = cells.find(d);
        out << " " << (it == cells.end() ? std::string("-") : cell_text(it->second))
            << " |";
      }
      out << "\n";
    }
    bool wrote_acc_header = false;
    for (const auto& [label, cells] : report.rows) {
      for (const auto& d : report.datasets) {
        const auto it = cells.find(d);
        if (it == cells.end()) continue;
        const DatasetMetrics& m = it->second;
        if (!m.pairwise_accuracy && !m.ab_accuracy &&
            !m.authenticity_accuracy && m.unparseable_count == 0) {
          continue;
        }
        if (!wrote_acc_header) {
          out << "\nAccuracies and counts:\n";
          wrote_acc_header = true;
        }
        out << "- " << label << " / " << d << ":";
        if (m.pairwise_accuracy) {
          out << " ranking_acc=" << format_decimal(*m.pairwise_accuracy, 3);
        }
        if (m.ab_accuracy) {
          out << " ab_acc=" << format_decimal(*m.ab_accuracy, 3);
        }
        if (m.authenticity_accuracy) {
          out << " auth_acc=" << format_decimal(*m.authenticity_accuracy, 3);
        }
        if (m.unparseable_count > 0) {
          out << " unparseable=" << m.unparseable_count;
        }
        out << "\n";
      }
    }
    if (!report.side_by_side.empty()) {
      out << "\n| Comparison | G+S/S+B |\n|---|---|\n";
      for (const auto& [label, counts] : report.side_by_side) {
        out << "| " << label << " | " << format_decimal(side_by_side(counts), 2)
            << " |\n";
      }
    }
  } else {
    for (const auto& [label, cells] : report.rows) {
      for (const auto& d : report.datasets) {
        const auto it = cells.find(d);
        if (it == cells.end()) continue;
        const DatasetMetrics& m = it->second;
        out << "row=" << label << " dataset=" << d
            << " srcc=" << format_decimal(m.srcc, 3)
            << " plcc=" << format_decimal(m.plcc, 3);
        if (m.pairwise_accuracy) {
          out << " ranking_acc=" << format_decimal(*m.pairwise_accuracy, 3);
        }
        if (m.ab_accuracy) {
          out << " ab_acc=" << format_decimal(*m.ab_accuracy, 3);
        }
        if (m.authenticity_accuracy) {
          out << " auth_acc=" << format_decimal(*m.authenticity_accuracy, 3);
        }
        out << " unparseable=" << m.unparseable_count << "\n";
      }
    }
    for (const auto& [label, counts] : report.side_by_side) {
      out << "comparison=" << label << " good=" << counts.good
          << " same=" << counts.same << " bad=" << counts.bad
          << " gs_sb=" << format_decimal(side_by_side(counts), 2) << "\n";
    }
  }
  return out.str();
}

}  // namespace iqlab
