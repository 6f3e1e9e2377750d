// Copyright 2026 The diffsim Authors
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

#ifndef DIFFSIM_CSV_HPP_
#define DIFFSIM_CSV_HPP_

#include <string>
#include <vector>

// Minimal CSV plumbing: UTF-8, '\n' line endings, self-describing headers,
// floats written with 15 significant digits.

namespace diffsim {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

CsvTable read_csv(const std::string& path);

}  // namespace diffsim

#endif  // DIFFSIM_CSV_HPP_
