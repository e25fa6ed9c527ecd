// Copyright 2026 The Pipeplan Authors.
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

#ifndef PIPEPLAN_SRC_FILE_UTIL_H_
#define PIPEPLAN_SRC_FILE_UTIL_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace pipeplan::internal {

// Both throw IoError with the path in the message.
std::string ReadFileToString(const std::filesystem::path& path);
void WriteStringToFile(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace pipeplan::internal

#endif  // PIPEPLAN_SRC_FILE_UTIL_H_
