// Copyright 2026 The Parallax Authors.
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

#pragma once

#include <ostream>

#include "json.hpp"

namespace parallax::data {

/// One JSON object per line, flushed after every record. Keys keep insertion order.
class MetricsWriter {
   public:
    explicit MetricsWriter(std::ostream& out) : out_(&out) {}

    void emit(const nlohmann::ordered_json& record);

   private:
    std::ostream* out_;
};

}  // namespace parallax::data
