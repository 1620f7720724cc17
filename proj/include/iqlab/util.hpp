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

#ifndef IQLAB_UTIL_HPP_
#define IQLAB_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace iqlab {

/// Shortest decimal form that round-trips to the same double. Used for all
/// numbers written to text artifacts so that save/load is bit-exact.
std::string double_to_string(double v);

/// Strict double parser: the whole token must be a finite number.
double parse_double(std::string_view token, const std::string& context);

/// Strict integer parser.
long long parse_int(std::string_view token, const std::string& context);

/// Renders v with exactly `places` decimals, ties rounded half-even.
/// format_decimal(0.8125, 3) == "0.812", format_decimal(85.75, 1) == "85.8".
std::string format_decimal(double v, int places);

/// FNV-1a, used to derive stable per-record template choices.
std::uint64_t fnv1a(std::string_view s);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` then renames, so a failed command never leaves a
/// partial artifact behind. Creates parent directories.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must be
/// independent; each writes only its own output slot, so the result is
/// identical for any job count.
void parallel_for(int jobs, std::size_t n,
                  const std::function<void(std::size_t)>& fn);

}  // namespace iqlab

#endif  // IQLAB_UTIL_HPP_
