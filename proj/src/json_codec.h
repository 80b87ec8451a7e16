/* Copyright 2026 The ConceptLens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CONCEPTLENS_SRC_JSON_CODEC_H_
#define CONCEPTLENS_SRC_JSON_CODEC_H_

// JSON conversions shared between library modules. Not installed.

#include "conceptlens/linear_head.h"
#include "json.hpp"

namespace conceptlens::codec {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from(const json& j);

ordered_json to_json(const TrainReport& report);
ordered_json to_json(const Prediction& prediction);

// Parses with a format error instead of nlohmann's exception type.
json parse(std::string_view text, std::string_view what);

}  // namespace conceptlens::codec

#endif  // CONCEPTLENS_SRC_JSON_CODEC_H_
