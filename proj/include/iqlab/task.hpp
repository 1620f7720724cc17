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

#ifndef IQLAB_TASK_HPP_
#define IQLAB_TASK_HPP_

#include <optional>
#include <string>
#include <string_view>

namespace iqlab {

/// The four training behaviours. Quantitative scoring, qualitative
/// description and authenticity detection each carry their own identifier
/// token; relativity (two-image ranking) shares <IQA_QUANT> and is
/// distinguished by its second image slot.
enum class TaskId {
  kRelativity,
  kQuant,
  kDescribe,
  kAuthenticity,
};

/// Serialized identifier token, e.g. "<IQA_QUANT>".
inline const char* task_token(TaskId t) {
  switch (t) {
    case TaskId::kRelativity:
    case TaskId::kQuant:
      return "<IQA_QUANT>";
    case TaskId::kDescribe:
      return "<IQA_DES>";
    case TaskId::kAuthenticity:
      return "<AUTHENTICITY>";
  }
  return "<IQA_QUANT>";
}

/// Stable name used in file names and config keys.
inline const char* task_name(TaskId t) {
  switch (t) {
    case TaskId::kRelativity: return "relativity";
    case TaskId::kQuant: return "quant";
    case TaskId::kDescribe: return "describe";
    case TaskId::kAuthenticity: return "authenticity";
  }
  return "quant";
}

inline std::optional<TaskId> parse_task_name(std::string_view name) {
  if (name == "relativity") return TaskId::kRelativity;
  if (name == "quant") return TaskId::kQuant;
  if (name == "describe") return TaskId::kDescribe;
  if (name == "authenticity") return TaskId::kAuthenticity;
  return std::nullopt;
}

/// Two-class preference label for an ordered image pair.
/// kFirst encodes [1,0] (first image preferred), kSecond [0,1].
enum class PairWinner { kFirst, kSecond };

inline PairWinner flip(PairWinner w) {
  return w == PairWinner::kFirst ? PairWinner::kSecond : PairWinner::kFirst;
}

}  // namespace iqlab

#endif  // IQLAB_TASK_HPP_
