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

#include "iqlab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

using nlohmann::json;

// Fixed instruction pools, eight paraphrases per task. "{m}" is replaced by
// the metric's display name ("quality", "brightness", ...). A record's
// paraphrase is chosen by a stable hash so corpora are reproducible without
// threading a seed through every builder.
constexpr std::array<const char*, 8> kQuantInstructions = {
    "Rate the {m} of this image on a scale of 0 to 100.",
    "What is the {m} score of this image?",
    "Assess the {m} of this image with a number between 0 and 100.",
    "Give a {m} rating from 0 to 100 for this image.",
    "How would you score the {m} of this image?",
    "Provide a numeric {m} score for this image.",
    "Score the {m} of this image between 0 and 100.",
    "Estimate the {m} rating of this image.",
};

constexpr std::array<const char*, 8> kRelativityInstructions = {
    "Which of these two images has better {m}?",
    "Compare the {m} of the two images and pick the better one.",
    "Between the two images, which one shows higher {m}?",
    "Decide which image is superior in terms of {m}.",
    "Tell me which of the two images has the higher {m}.",
    "Pick the image with better {m}.",
    "Which image would you rank higher for {m}?",
    "Judge which of these two images has greater {m}.",
};

constexpr std::array<const char*, 8> kDescribeInstructions = {
    "Describe the visual quality of this image.",
    "Provide a qualitative assessment of this image.",
    "Comment on the perceptual quality of this image.",
    "How would you characterize the quality of this image?",
    "Give a detailed evaluation of the visual quality of this image.",
    "Explain the quality of this image in words.",
    "Evaluate the quality of this image qualitatively.",
    "Summarize the visual quality of this image.",
};

constexpr std::array<const char*, 8> kAuthenticityInstructions = {
    "Is this image photographic or AI-generated?",
    "Determine whether this image is a real photograph or AI-generated.",
    "Was this image captured by a camera or generated by a model?",
    "Classify this image as photographic or AI-generated.",
    "Tell me if this image is AI-generated.",
    "Is this a genuine photograph or a generated image?",
    "Judge the authenticity of this image: photographic or AI-generated?",
    "Decide if this image was produced by an AI model.",
};

std::string replace_metric(std::string text, Metric m) {
  const std::string placeholder = "{m}";
  const auto pos = text.find(placeholder);
  if (pos != std::string::npos) {
    text.replace(pos, placeholder.size(), metric_name(m));
  }
  return text;
}

std::string pick_instruction(TaskId task, std::string_view key, Metric m) {
  const std::array<const char*, 8>* pool = nullptr;
  switch (task) {
    case TaskId::kQuant: pool = &kQuantInstructions; break;
    case TaskId::kRelativity: pool = &kRelativityInstructions; break;
    case TaskId::kDescribe: pool = &kDescribeInstructions; break;
    case TaskId::kAuthenticity: pool = &kAuthenticityInstructions; break;
  }
  const std::uint64_t h =
      splitmix64(fnv1a(task_name(task)) ^ fnv1a(key) ^ fnv1a(metric_key(m)));
  return replace_metric((*pool)[h % pool->size()], m);
}

double metric_value(const AnnotatedImage& rec, Metric m,
                    const std::string& dataset) {
  if (m == Metric::kMos) {
    if (!rec.mos) {
      throw ValidationError("dataset '" + dataset +
                            "' is not normalized; run normalize_scores first");
    }
    return *rec.mos;
  }
  const auto it = rec.attributes.find(m);
  if (it == rec.attributes.end()) {
    throw ValidationError("record '" + rec.id + "' in dataset '" + dataset +
                          "' has no " + std::string(metric_key(m)) +
                          " annotation");
  }
  return it->second;
}

/// Train records sorted by id; falls back to all records when no split has
/// been assigned (raw corpora built ahead of splitting).
std::vector<const AnnotatedImage*> working_records(const DatasetManifest& m,
                                                   bool require_split) {
  std::vector<const AnnotatedImage*> out;
  const bool has_train = m.train_count() > 0;
  if (require_split && !has_train) {
    throw ValidationError("dataset '" + m.name +
                          "' has no train split assigned");
  }
  for (const auto& r : m.records) {
    if (!has_train || r.split == Split::kTrain) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(),
            [](const AnnotatedImage* a, const AnnotatedImage* b) {
              return a->id < b->id;
            });
  return out;
}

std::string one_decimal(double v) { return format_decimal(v, 1); }

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

const char* quality_band(double value) {
  if (value < 20.0) return "bad";
  if (value < 40.0) return "poor";
  if (value < 60.0) return "fair";
  if (value < 80.0) return "good";
  return "excellent";
}

std::vector<RelativityPair> build_relativity_pairs(const DatasetManifest& m,
                                                   int count, Metric metric,
                                                   std::uint64_t seed) {
  if (count < 1) {
    throw ValidationError("build_relativity_pairs: count must be >= 1");
  }
  const auto records = working_records(m, /*require_split=*/true);
  if (records.size() < 2) {
    throw ValidationError("build_relativity_pairs: dataset '" + m.name +
                          "' has fewer than 2 train records");
  }
  std::vector<double> values(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    values[i] = metric_value(*records[i], metric, m.name);
  }

  Rng rng(seed);
  std::vector<RelativityPair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  // Ties are rejected and resampled: the label space has no "equal" entry.
  const long long max_attempts = 1000 + 200LL * count;
  long long attempts = 0;
  while (pairs.size() < static_cast<std::size_t>(count)) {
    if (++attempts > max_attempts) {
      throw ValidationError(
          "build_relativity_pairs: cannot sample distinct-valued pairs from "
          "dataset '" + m.name + "' (are all " +
          std::string(metric_key(metric)) + " values equal?)");
    }
    const std::size_t i = static_cast<std::size_t>(
        rng.uniform_int(records.size()));
    const std::size_t j = static_cast<std::size_t>(
        rng.uniform_int(records.size()));
    if (i == j || values[i] == values[j]) continue;
    RelativityPair p;
    p.a = ImageRef{m.name, records[i]->id, records[i]->image_path};
    p.b = ImageRef{m.name, records[j]->id, records[j]->image_path};
    p.winner =
        values[i] > values[j] ? PairWinner::kFirst : PairWinner::kSecond;
    p.target_metric = metric;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

CorpusEntry relativity_dialogue(const RelativityPair& pair,
                                const DatasetManifest& m) {
  DialogueSample s;
  s.task = TaskId::kRelativity;
  s.images = {pair.a.path, pair.b.path};
  s.instruction = pick_instruction(TaskId::kRelativity,
                                   pair.a.id + "|" + pair.b.id,
                                   pair.target_metric);
  const char* subject = pair.target_metric == Metric::kMos
                            ? "better quality"
                            : nullptr;
  std::string trait = subject
                          ? std::string(subject)
                          : "higher " + std::string(metric_name(
                                            pair.target_metric));
  s.answer = pair.winner == PairWinner::kFirst
                 ? "The first image has " + trait + " than the second image."
                 : "The second image has " + trait + " than the first image.";
  s.truth = pair.winner;
  return CorpusEntry{std::move(s), m.name, {pair.a.id, pair.b.id}};
}

std::vector<CorpusEntry> build_quantitative_samples(const DatasetManifest& m,
                                                    Metric metric) {
  const auto records = working_records(m, /*require_split=*/true);
  std::vector<CorpusEntry> out;
  out.reserve(records.size());
  for (const AnnotatedImage* rec : records) {
    const double value = metric_value(*rec, metric, m.name);
    DialogueSample s;
    s.task = TaskId::kQuant;
    s.images = {rec->image_path};
    s.instruction = pick_instruction(TaskId::kQuant, rec->id, metric);
    s.answer = "The " + std::string(metric_name(metric)) +
               " score of this image is " + one_decimal(value) + ".";
    s.truth = value;
    out.push_back(CorpusEntry{std::move(s), m.name, {rec->id}});
  }
  return out;
}

std::vector<CorpusEntry> build_qualitative_samples(const DatasetManifest& m) {
  if (!m.normalized()) {
    throw ValidationError("build_qualitative_samples: dataset '" + m.name +
                          "' is not normalized");
  }
  const auto records = working_records(m, /*require_split=*/false);
  std::vector<CorpusEntry> out;
  out.reserve(records.size());
  for (const AnnotatedImage* rec : records) {
    QualBands bands;
    bands.entries.emplace_back("overall", quality_band(*rec->mos));
    std::ostringstream answer;
    answer << "The overall quality of this image is "
           << quality_band(*rec->mos) << ".";
    for (const auto& [attr, value] : rec->attributes) {
      bands.entries.emplace_back(metric_key(attr), quality_band(value));
      answer << " Its " << metric_name(attr) << " rating is "
             << quality_band(value) << ".";
    }
    DialogueSample s;
    s.task = TaskId::kDescribe;
    s.images = {rec->image_path};
    s.instruction = pick_instruction(TaskId::kDescribe, rec->id, Metric::kMos);
    s.answer = answer.str();
    s.truth = std::move(bands);
    out.push_back(CorpusEntry{std::move(s), m.name, {rec->id}});
  }
  return out;
}

std::vector<CorpusEntry> build_authenticity_samples(const DatasetManifest& m) {
  for (const AnnotatedImage& rec : m.records) {
    if (!rec.authentic.has_value()) {
      throw ValidationError("build_authenticity_samples: record '" + rec.id +
                            "' in dataset '" + m.name +
                            "' has no authenticity flag");
    }
  }
  const auto records = working_records(m, /*require_split=*/false);
  std::vector<CorpusEntry> out;
  out.reserve(records.size());
  for (const AnnotatedImage* rec : records) {
    DialogueSample s;
    s.task = TaskId::kAuthenticity;
    s.images = {rec->image_path};
    s.instruction =
        pick_instruction(TaskId::kAuthenticity, rec->id, Metric::kMos);
    s.answer = *rec->authentic ? "This is a photographic image."
                               : "This is an AI-generated image.";
    s.truth = *rec->authentic;
    out.push_back(CorpusEntry{std::move(s), m.name, {rec->id}});
  }
  return out;
}

std::string serialize_dialogue(const DialogueSample& s) {
  const std::size_t expected_images =
      s.task == TaskId::kRelativity ? 2u : 1u;
  if (s.images.size() != expected_images) {
    throw ValidationError(std::string("serialize_dialogue: task ") +
                          task_name(s.task) + " requires " +
                          std::to_string(expected_images) +
                          " image slot(s), got " +
                          std::to_string(s.images.size()));
  }
  if (s.instruction.empty() || s.answer.empty()) {
    throw ValidationError(
        "serialize_dialogue: instruction and answer must be non-empty");
  }
  auto check_text = [](const std::string& text, const char* field,
                       bool forbid_angle) {
    if (text.find('\n') != std::string::npos) {
      throw ValidationError(std::string("serialize_dialogue: ") + field +
                            " must not contain newlines");
    }
    if (forbid_angle && (text.find('<') != std::string::npos ||
                         text.find('>') != std::string::npos)) {
      throw ValidationError(std::string("serialize_dialogue: ") + field +
                            " must not contain angle brackets");
    }
    if (text.empty()) {
      throw ValidationError(std::string("serialize_dialogue: ") + field +
                            " must be non-empty");
    }
  };
  for (const auto& slot : s.images) check_text(slot, "image slot", true);
  check_text(s.instruction, "instruction", false);
  check_text(s.answer, "answer", false);

  std::string out = "Human: <img1>" + s.images[0] + "</img1>";
  if (s.images.size() == 2) out += "<img2>" + s.images[1] + "</img2>";
  out += task_token(s.task);
  out += s.instruction;
  out += "\nAssistant: ";
  out += s.answer;
  out += "\n";
  return out;
}

DialogueSample parse_dialogue(const std::string& text) {
  std::size_t pos = 0;
  auto expect = [&](std::string_view token, const char* what) {
    if (text.compare(pos, token.size(), token) != 0) {
      throw ParseError::at_offset(pos, std::string("expected ") + what);
    }
    pos += token.size();
  };

  DialogueSample s;
  expect("Human: ", "'Human: ' prefix");
  expect("<img1>", "'<img1>' tag");
  std::size_t close = text.find("</img1>", pos);
  if (close == std::string::npos) {
    throw ParseError::at_offset(pos, "missing '</img1>' tag");
  }
  s.images.push_back(text.substr(pos, close - pos));
  pos = close + 7;

  if (text.compare(pos, 6, "<img2>") == 0) {
    pos += 6;
    close = text.find("</img2>", pos);
    if (close == std::string::npos) {
      throw ParseError::at_offset(pos, "missing '</img2>' tag");
    }
    s.images.push_back(text.substr(pos, close - pos));
    pos = close + 7;
  }

  if (pos >= text.size() || text[pos] != '<') {
    throw ParseError::at_offset(pos, "missing task identifier");
  }
  const std::size_t token_end = text.find('>', pos);
  if (token_end == std::string::npos) {
    throw ParseError::at_offset(pos, "unterminated task identifier");
  }
  const std::string token = text.substr(pos, token_end - pos + 1);
  if (token == "<IQA_QUANT>") {
    s.task = s.images.size() == 2 ? TaskId::kRelativity : TaskId::kQuant;
  } else if (token == "<IQA_DES>") {
    s.task = TaskId::kDescribe;
  } else if (token == "<AUTHENTICITY>") {
    s.task = TaskId::kAuthenticity;
  } else {
    throw ParseError::at_offset(pos, "unknown task identifier " + token);
  }
  if (s.task != TaskId::kRelativity && s.images.size() != 1) {
    throw ParseError::at_offset(pos, "task " + token +
                                         " admits exactly one image slot");
  }
  pos = token_end + 1;

  const std::size_t eol = text.find('\n', pos);
  if (eol == std::string::npos) {
    throw ParseError::at_offset(pos, "missing newline after instruction");
  }
  s.instruction = text.substr(pos, eol - pos);
  if (s.instruction.empty()) {
    throw ParseError::at_offset(pos, "empty instruction");
  }
  pos = eol + 1;

  expect("Assistant: ", "'Assistant: ' line");
  const std::size_t answer_end = text.find('\n', pos);
  if (answer_end == std::string::npos) {
    throw ParseError::at_offset(pos, "missing trailing newline after answer");
  }
  s.answer = text.substr(pos, answer_end - pos);
  if (s.answer.empty()) {
    throw ParseError::at_offset(pos, "empty answer");
  }
  if (answer_end + 1 != text.size()) {
    throw ParseError::at_offset(answer_end + 1,
                                "trailing content after dialogue");
  }
  return s;
}

namespace {

json truth_to_json(const GroundTruth& t) {
  json j;
  if (std::holds_alternative<std::monostate>(t)) {
    j["kind"] = "none";
  } else if (const double* v = std::get_if<double>(&t)) {
    j["kind"] = "score";
    j["value"] = *v;
  } else if (const PairWinner* w = std::get_if<PairWinner>(&t)) {
    j["kind"] = "pair";
    j["value"] = *w == PairWinner::kFirst ? "first" : "second";
  } else if (const bool* b = std::get_if<bool>(&t)) {
    j["kind"] = "auth";
    j["value"] = *b;
  } else {
    const QualBands& bands = std::get<QualBands>(t);
    j["kind"] = "bands";
    json arr = json::array();
    for (const auto& [name, band] : bands.entries) {
      arr.push_back(json::array({name, band}));
    }
    j["value"] = arr;
  }
  return j;
}

GroundTruth truth_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return std::monostate{};
  if (kind == "score") return j.at("value").get<double>();
  if (kind == "pair") {
    return j.at("value").get<std::string>() == "first" ? PairWinner::kFirst
                                                       : PairWinner::kSecond;
  }
  if (kind == "auth") return j.at("value").get<bool>();
  if (kind == "bands") {
    QualBands bands;
    for (const auto& e : j.at("value")) {
      bands.entries.emplace_back(e.at(0).get<std::string>(),
                                 e.at(1).get<std::string>());
    }
    return bands;
  }
  throw ValidationError("sidecar: unknown truth kind '" + kind + "'");
}

}  // namespace

void write_corpus(const std::vector<CorpusEntry>& entries,
                  const std::filesystem::path& corpus_path,
                  const std::filesystem::path& sidecar_path) {
  if (entries.empty()) {
    throw ValidationError("write_corpus: empty corpus");
  }
  const TaskId task = entries.front().sample.task;
  std::string body;
  std::string sidecar;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const CorpusEntry& e = entries[i];
    // One task per corpus file, so downstream batches stay single-task.
    if (e.sample.task != task) {
      throw ValidationError(
          "write_corpus: corpus mixes tasks " +
          std::string(task_name(task)) + " and " +
          std::string(task_name(e.sample.task)));
    }
    if (i > 0) body += "\n";
    body += serialize_dialogue(e.sample);

    json j;
    j["index"] = i;
    j["dataset"] = e.dataset_id;
    j["images"] = e.image_ids;
    j["truth"] = truth_to_json(e.sample.truth);
    sidecar += j.dump();
    sidecar += "\n";
  }
  atomic_write_file(corpus_path, body);
  atomic_write_file(sidecar_path, sidecar);
}

std::vector<CorpusEntry> load_corpus(
    const std::filesystem::path& corpus_path,
    const std::filesystem::path& sidecar_path) {
  const std::string body = read_file(corpus_path);
  const std::string sidecar = read_file(sidecar_path);

  std::vector<CorpusEntry> out;
  std::vector<std::string> record;
  auto flush = [&] {
    if (record.empty()) return;
    std::string text;
    for (const auto& line : record) {
      text += line;
      text += "\n";
    }
    CorpusEntry e;
    e.sample = parse_dialogue(text);
    out.push_back(std::move(e));
    record.clear();
  };
  for (const auto& line : split_lines(body)) {
    if (line.empty()) {
      flush();
    } else {
      record.push_back(line);
    }
  }
  flush();

  std::size_t idx = 0;
  for (const auto& line : split_lines(sidecar)) {
    if (line.empty()) continue;
    if (idx >= out.size()) {
      throw ValidationError("sidecar has more entries than corpus: " +
                            sidecar_path.string());
    }
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ValidationError("sidecar line " + std::to_string(idx + 1) +
                            " is not valid JSON: " + sidecar_path.string());
    }
    out[idx].dataset_id = j.at("dataset").get<std::string>();
    out[idx].image_ids = j.at("images").get<std::vector<std::string>>();
    out[idx].sample.truth = truth_from_json(j.at("truth"));
    ++idx;
  }
  if (idx != out.size()) {
    throw ValidationError("sidecar is shorter than corpus: " +
                          sidecar_path.string());
  }
  return out;
}

std::optional<double> parse_score_from_response(std::string_view text) {
  struct Literal {
    std::size_t start;
    double value;
  };
  std::vector<Literal> literals;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    if (i > 0 && (is_word_char(text[i - 1]) || text[i - 1] == '.')) continue;
    std::size_t end = i;
    while (end < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[end]))) {
      ++end;
    }
    if (end < text.size() && text[end] == '.' && end + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[end + 1]))) {
      ++end;
      while (end < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[end]))) {
        ++end;
      }
    }
    literals.push_back(
        Literal{i, parse_double(text.substr(i, end - i), "response literal")});
    i = end - 1;
  }
  if (literals.empty()) return std::nullopt;

  static constexpr std::array<std::string_view, 4> kCues = {
      "score", "rate", "rating", "quality"};
  std::vector<std::size_t> cue_ends;
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (const auto cue : kCues) {
      if (i + cue.size() > text.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < cue.size(); ++k) {
        if (std::tolower(static_cast<unsigned char>(text[i + k])) != cue[k]) {
          match = false;
          break;
        }
      }
      if (!match) continue;
      // Word-start boundary: "generate" must not trip the "rate" cue.
      if (i > 0 && std::isalpha(static_cast<unsigned char>(text[i - 1]))) {
        continue;
      }
      cue_ends.push_back(i + cue.size());
    }
  }

  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  for (const Literal& lit : literals) {
    if (!in_range(lit.value)) continue;
    for (const std::size_t cue_end : cue_ends) {
      if (cue_end <= lit.start) return lit.value;
    }
  }
  for (const Literal& lit : literals) {
    if (in_range(lit.value)) return lit.value;
  }
  return std::nullopt;
}

}  // namespace iqlab
