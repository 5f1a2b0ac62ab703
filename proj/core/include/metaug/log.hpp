// Copyright 2026 The metaug Authors.
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

#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace metaug {

enum class LogLevel { Debug = 0, Notice = 1, Warning = 2, Silent = 3 };

/// Process-wide threshold; messages below it are dropped. Defaults to Warning.
void set_log_level(LogLevel level);
LogLevel log_level();

/// Replaces the sink (stderr by default). Pass an empty function to restore it.
void set_log_sink(std::function<void(LogLevel, std::string_view)> sink);

void log(LogLevel level, std::string_view message);
inline void log_notice(std::string_view message) { log(LogLevel::Notice, message); }
inline void log_warning(std::string_view message) { log(LogLevel::Warning, message); }

/// Number of notices emitted on the calling thread, including dropped ones.
std::size_t notice_count();

}  // namespace metaug
