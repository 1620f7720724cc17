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

#ifndef IQLAB_METRICS_HPP_
#define IQLAB_METRICS_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iqlab/task.hpp"

namespace iqlab {

/// Spearman rank correlation: Pearson correlation of average ranks. Ties
/// receive the mean of the rank positions they occupy, so the value reduces
/// to the 1 - 6*sum(d^2)/(n(n^2-1)) closed form only when no ties exist.
/// Throws UndefinedCorrelationError when either vector is constant.
double srcc(std::span<const double> a, std::span<const double> b);

/// Pearson linear correlation coefficient.
/// Throws UndefinedCorrelationError when either vector is constant.
double plcc(std::span<const double> a, std::span<const double> b);

/// Fraction of exact label matches.
double pairwise_accuracy(std::span<const PairWinner> predicted,
                         std::span<const PairWinner> truth);

/// Fraction where (p >= threshold) agrees with the {0,1} label.
double binary_accuracy(std::span<const double> probabilities,
                       std::span<const int> labels, double threshold = 0.5);

struct PreferenceCounts {
  long long good = 0;  // this model preferred
  long long same = 0;  // no preference
  long long bad = 0;   // other model preferred
};

/// Side-by-side preference score (good+same)/(same+bad).
/// Throws UndefinedCorrelationError when same+bad == 0.
double side_by_side(const PreferenceCounts& counts);

struct DatasetMetrics {
  double srcc = 0.0;
  double plcc = 0.0;
  std::optional<double> pairwise_accuracy;  // ranking-head comparator
  std::optional<double> ab_accuracy;        // score-difference comparator
  std::optional<double> authenticity_accuracy;
  long long unparseable_count = 0;
};

enum class ReportStyle { kMarkdownTable, kStructured };

/// Rows are model/strategy labels, columns datasets. Cells render as
/// "SRCC/PLCC" with three decimals.
struct MetricsReport {
  std::vector<std::string> datasets;
  std::vector<std::pair<std::string, std::map<std::string, DatasetMetrics>>>
      rows;
  std::vector<std::pair<std::string, PreferenceCounts>> side_by_side;
};

std::string format_report(const MetricsReport& report, ReportStyle style);

}  // namespace iqlab

#endif  // IQLAB_METRICS_HPP_
