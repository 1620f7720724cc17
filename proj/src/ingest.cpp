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

#include "iqlab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

// Record fields must appear in this order after id/path/mos_raw.
enum FieldRank {
  kFieldMos = 0,
  kFieldAttr,
  kFieldNattr,
  kFieldAuth,
  kFieldRef,
  kFieldSplit,
};

void check_range(const ScoreRange& r, const std::string& what) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max)) {
    throw ValidationError(what + ": range endpoints must be finite");
  }
  if (!(r.min < r.max)) {
    throw ValidationError(what + ": degenerate range [" +
                          double_to_string(r.min) + ", " +
                          double_to_string(r.max) + "]");
  }
}

Metric metric_from_key(std::string_view key, std::size_t line) {
  const auto m = parse_metric_key(key);
  if (!m || *m == Metric::kMos) {
    throw ParseError::at_line(line, "unknown attribute '" + std::string(key) +
                                        "'");
  }
  return *m;
}

double rescale(double v, const ScoreRange& r) {
  return (v - r.min) / (r.max - r.min) * 100.0;
}

}  // namespace

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kMos: return "quality";
    case Metric::kBrightness: return "brightness";
    case Metric::kColorfulness: return "colorfulness";
    case Metric::kContrast: return "contrast";
    case Metric::kNoisiness: return "noisiness";
    case Metric::kSharpness: return "sharpness";
  }
  return "quality";
}

const char* metric_key(Metric m) {
  return m == Metric::kMos ? "mos" : metric_name(m);
}

std::optional<Metric> parse_metric_key(std::string_view key) {
  if (key == "mos") return Metric::kMos;
  if (key == "brightness") return Metric::kBrightness;
  if (key == "colorfulness") return Metric::kColorfulness;
  if (key == "contrast") return Metric::kContrast;
  if (key == "noisiness") return Metric::kNoisiness;
  if (key == "sharpness") return Metric::kSharpness;
  return std::nullopt;
}

std::vector<Metric> attribute_metrics() {
  return {Metric::kBrightness, Metric::kColorfulness, Metric::kContrast,
          Metric::kNoisiness, Metric::kSharpness};
}

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kPhotographicWild: return "photographic_wild";
    case DatasetKind::kPhotographicArtificial:
      return "photographic_artificial";
    case DatasetKind::kAiGenerated: return "ai_generated";
  }
  return "photographic_wild";
}

bool DatasetManifest::normalized() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(),
                     [](const AnnotatedImage& r) { return r.mos.has_value(); });
}

std::size_t DatasetManifest::train_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) {
        return r.split == Split::kTrain;
      }));
}

std::size_t DatasetManifest::test_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) {
        return r.split == Split::kTest;
      }));
}

const AnnotatedImage* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

DatasetManifest parse_manifest(const std::string& text,
                               const std::string& origin) {
  DatasetManifest m;
  const std::vector<std::string> lines = split_lines(text);
  bool saw_header = false;
  std::set<std::string> seen_ids;

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const std::string& line = lines[li];
    if (line.empty() || line[0] == '#') continue;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;

    if (!saw_header) {
      if (tokens[0] != "manifest") {
        throw ParseError::at_line(line_no,
                                  origin + ": first line must start with "
                                           "'manifest'");
      }
      bool have_name = false, have_kind = false, have_min = false,
           have_max = false;
      for (std::size_t t = 1; t < tokens.size(); ++t) {
        const std::string_view tok = tokens[t];
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) {
          throw ParseError::at_line(line_no, origin + ": malformed header "
                                                      "field '" +
                                                 std::string(tok) + "'");
        }
        const std::string_view key = tok.substr(0, eq);
        const std::string_view val = tok.substr(eq + 1);
        if (key == "name") {
          m.name = std::string(val);
          have_name = true;
        } else if (key == "kind") {
          if (val == "photographic_wild") {
            m.kind = DatasetKind::kPhotographicWild;
          } else if (val == "photographic_artificial") {
            m.kind = DatasetKind::kPhotographicArtificial;
          } else if (val == "ai_generated") {
            m.kind = DatasetKind::kAiGenerated;
          } else {
            throw ParseError::at_line(line_no, origin + ": unknown kind '" +
                                                   std::string(val) + "'");
          }
          have_kind = true;
        } else if (key == "score_min") {
          m.score_range.min = parse_double(val, "score_min");
          have_min = true;
        } else if (key == "score_max") {
          m.score_range.max = parse_double(val, "score_max");
          have_max = true;
        } else if (key.substr(0, 11) == "attr_range:") {
          const Metric a = metric_from_key(key.substr(11), line_no);
          const auto colon = val.find(':');
          if (colon == std::string_view::npos) {
            throw ParseError::at_line(line_no,
                                      origin + ": attr_range needs min:max");
          }
          ScoreRange r{parse_double(val.substr(0, colon), "attr_range min"),
                       parse_double(val.substr(colon + 1), "attr_range max")};
          check_range(r, origin + ": attr_range " +
                             metric_key(a));
          m.attribute_ranges[a] = r;
        } else {
          throw ParseError::at_line(line_no, origin + ": unknown header "
                                                      "field '" +
                                                 std::string(key) + "'");
        }
      }
      if (!have_name || !have_kind || !have_min || !have_max) {
        throw ParseError::at_line(
            line_no, origin + ": header must declare name, kind, score_min, "
                              "score_max");
      }
      check_range(m.score_range, origin + ": score range");
      saw_header = true;
      continue;
    }

    if (tokens.size() < 3) {
      throw ParseError::at_line(line_no,
                                origin + ": record needs id, path, mos_raw");
    }
    AnnotatedImage rec;
    rec.id = std::string(tokens[0]);
    rec.dataset_id = m.name;
    rec.image_path = std::string(tokens[1]);
    rec.mos_raw = parse_double(tokens[2], "mos_raw of '" + rec.id + "'");

    int last_rank = -1;
    for (std::size_t t = 3; t < tokens.size(); ++t) {
      const std::string_view tok = tokens[t];
      int rank;
      if (tok.substr(0, 4) == "mos=") {
        rank = kFieldMos;
        rec.mos = parse_double(tok.substr(4), "mos of '" + rec.id + "'");
      } else if (tok.substr(0, 5) == "attr:") {
        rank = kFieldAttr;
        const auto eq = tok.find('=', 5);
        if (eq == std::string_view::npos) {
          throw ParseError::at_line(line_no, origin + ": malformed attr "
                                                      "field");
        }
        const Metric a = metric_from_key(tok.substr(5, eq - 5), line_no);
        rec.attributes_raw[a] =
            parse_double(tok.substr(eq + 1), "attribute of '" + rec.id + "'");
      } else if (tok.substr(0, 6) == "nattr:") {
        rank = kFieldNattr;
        const auto eq = tok.find('=', 6);
        if (eq == std::string_view::npos) {
          throw ParseError::at_line(line_no, origin + ": malformed nattr "
                                                      "field");
        }
        const Metric a = metric_from_key(tok.substr(6, eq - 6), line_no);
        rec.attributes[a] =
            parse_double(tok.substr(eq + 1), "nattr of '" + rec.id + "'");
      } else if (tok.substr(0, 5) == "auth=") {
        rank = kFieldAuth;
        if (tok.substr(5) == "1") {
          rec.authentic = true;
        } else if (tok.substr(5) == "0") {
          rec.authentic = false;
        } else {
          throw ParseError::at_line(line_no,
                                    origin + ": auth must be 0 or 1");
        }
      } else if (tok.substr(0, 4) == "ref=") {
        rank = kFieldRef;
        rec.reference_id = std::string(tok.substr(4));
      } else if (tok.substr(0, 6) == "split=") {
        rank = kFieldSplit;
        const auto v = tok.substr(6);
        if (v == "train") {
          rec.split = Split::kTrain;
        } else if (v == "test") {
          rec.split = Split::kTest;
        } else {
          throw ParseError::at_line(line_no,
                                    origin + ": split must be train or test");
        }
      } else {
        throw ParseError::at_line(line_no, origin + ": unknown field '" +
                                               std::string(tok) + "'");
      }
      if (rank < last_rank) {
        throw ParseError::at_line(line_no, origin + ": field '" +
                                               std::string(tok) +
                                               "' out of order");
      }
      last_rank = rank;
    }

    if (!seen_ids.insert(rec.id).second) {
      throw ParseError::at_line(
          line_no, origin + ": duplicate record id '" + rec.id + "'");
    }
    if (rec.mos_raw < m.score_range.min || rec.mos_raw > m.score_range.max) {
      throw ParseError::at_line(
          line_no, origin + ": record '" + rec.id + "' has mos_raw " +
                       double_to_string(rec.mos_raw) +
                       " outside declared range [" +
                       double_to_string(m.score_range.min) + ", " +
                       double_to_string(m.score_range.max) + "]");
    }
    for (const auto& [attr, v] : rec.attributes_raw) {
      const auto it = m.attribute_ranges.find(attr);
      if (it != m.attribute_ranges.end()) {
        if (v < it->second.min || v > it->second.max) {
          throw ParseError::at_line(
              line_no, origin + ": record '" + rec.id + "' has " +
                           metric_key(attr) + " outside declared range");
        }
      } else if (v < 0.0 || v > 100.0) {
        throw ParseError::at_line(
            line_no, origin + ": record '" + rec.id + "' has " +
                         metric_key(attr) +
                         " outside [0,100] and no attr_range is declared");
      }
    }
    m.records.push_back(std::move(rec));
  }

  if (!saw_header) {
    throw ParseError::at_line(1, origin + ": empty manifest (missing header)");
  }

  // reference_id must be present for all records or none.
  const std::size_t with_ref = static_cast<std::size_t>(
      std::count_if(m.records.begin(), m.records.end(), [](const auto& r) {
        return r.reference_id.has_value();
      }));
  if (with_ref != 0 && with_ref != m.records.size()) {
    const auto it =
        std::find_if(m.records.begin(), m.records.end(), [](const auto& r) {
          return !r.reference_id.has_value();
        });
    throw ValidationError(origin + ": record '" + it->id +
                          "' lacks ref= while other records declare one");
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("manifest not found: " + path.string());
  }
  return parse_manifest(read_file(path), path.string());
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << "manifest name=" << m.name << " kind=" << dataset_kind_name(m.kind)
      << " score_min=" << double_to_string(m.score_range.min)
      << " score_max=" << double_to_string(m.score_range.max);
  for (const auto& [attr, r] : m.attribute_ranges) {
    out << " attr_range:" << metric_key(attr) << "="
        << double_to_string(r.min) << ":" << double_to_string(r.max);
  }
  out << "\n";
  for (const auto& rec : m.records) {
    out << rec.id << " " << rec.image_path << " "
        << double_to_string(rec.mos_raw);
    if (rec.mos) out << " mos=" << double_to_string(*rec.mos);
    for (const auto& [attr, v] : rec.attributes_raw) {
      out << " attr:" << metric_key(attr) << "=" << double_to_string(v);
    }
    for (const auto& [attr, v] : rec.attributes) {
      out << " nattr:" << metric_key(attr) << "=" << double_to_string(v);
    }
    if (rec.authentic) out << " auth=" << (*rec.authentic ? "1" : "0");
    if (rec.reference_id) out << " ref=" << *rec.reference_id;
    if (rec.split == Split::kTrain) out << " split=train";
    if (rec.split == Split::kTest) out << " split=test";
    out << "\n";
  }
  return out.str();
}

void save_manifest(const DatasetManifest& m,
                   const std::filesystem::path& path) {
  atomic_write_file(path, serialize_manifest(m));
}

DatasetManifest normalize_scores(DatasetManifest m, bool use_empirical_range) {
  ScoreRange range = m.score_range;
  if (use_empirical_range) {
    double lo = m.records.empty() ? 0.0 : m.records.front().mos_raw;
    double hi = lo;
    for (const auto& r : m.records) {
      lo = std::min(lo, r.mos_raw);
      hi = std::max(hi, r.mos_raw);
    }
    range = ScoreRange{lo, hi};
    if (!(range.min < range.max)) {
      throw ValidationError("normalize_scores: empirical range of '" + m.name +
                            "' is degenerate (all ratings equal)");
    }
  }
  check_range(range, "normalize_scores: '" + m.name + "'");

  for (auto& rec : m.records) {
    rec.mos = rescale(rec.mos_raw, range);
    if (use_empirical_range) rec.mos = std::clamp(*rec.mos, 0.0, 100.0);
    rec.attributes.clear();
    for (const auto& [attr, v] : rec.attributes_raw) {
      const auto it = m.attribute_ranges.find(attr);
      rec.attributes[attr] =
          it != m.attribute_ranges.end() ? rescale(v, it->second) : v;
    }
  }
  return m;
}

DatasetManifest split_random(DatasetManifest m, double train_fraction,
                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("split_random: train_fraction must lie in (0,1)");
  }
  const std::size_t n = m.records.size();
  if (n < 2) {
    throw ValidationError(
        "split_random: need at least 2 records to form both splits, got " +
        std::to_string(n));
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& r : m.records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());

  Rng rng(seed);
  rng.shuffle(ids);

  std::size_t train_n = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  train_n = std::clamp<std::size_t>(train_n, 1, n - 1);

  std::set<std::string> train_ids(ids.begin(),
                                  ids.begin() + static_cast<long>(train_n));
  for (auto& rec : m.records) {
    rec.split = train_ids.count(rec.id) ? Split::kTrain : Split::kTest;
  }
  return m;
}

DatasetManifest split_by_reference(DatasetManifest m, int train_reference_count,
                                   std::uint64_t seed) {
  std::set<std::string> refs;
  for (const auto& rec : m.records) {
    if (!rec.reference_id) {
      throw ValidationError("split_by_reference: record '" + rec.id +
                            "' has no reference_id");
    }
    refs.insert(*rec.reference_id);
  }
  const std::size_t n_refs = refs.size();
  if (train_reference_count < 1 ||
      static_cast<std::size_t>(train_reference_count) >= n_refs) {
    throw ValidationError(
        "split_by_reference: train_reference_count must lie in [1, " +
        std::to_string(n_refs) + ") for " + std::to_string(n_refs) +
        " reference groups, got " + std::to_string(train_reference_count));
  }

  std::vector<std::string> ordered(refs.begin(), refs.end());
  Rng rng(seed);
  rng.shuffle(ordered);
  std::set<std::string> train_refs(
      ordered.begin(), ordered.begin() + train_reference_count);

  for (auto& rec : m.records) {
    rec.split =
        train_refs.count(*rec.reference_id) ? Split::kTrain : Split::kTest;
  }
  return m;
}

}  // namespace iqlab
