// Copyright 2026 The capnpunc Authors
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

#include <cstdint>
#include <string>

#include "capnpunc/bpe.hpp"
#include "capnpunc/model.hpp"

namespace capnpunc {

// Binary checkpoint, little-endian:
//   "CNPC" | u32 version | u64 payload length | payload | u64 FNV-1a of payload
// payload:
//   u32 config length, config JSON
//   u32 vocab length, vocab text serialization
//   u32 parameter count, then per parameter:
//     u32 name length, name, u32 rank, u32 dims..., f32 values
// The tokenizer travels inside the checkpoint; a model is never written or
// loaded without its exact vocabulary.
inline constexpr char kCheckpointMagic[4] = {'C', 'N', 'P', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
    Model<float> model;
    SubwordVocab vocab;
};

void save_checkpoint(const std::string& path, const Model<float>& model,
                     const SubwordVocab& vocab);

LoadedCheckpoint load_checkpoint(const std::string& path);

uint64_t fnv1a64(const void* data, size_t size);

// Serialization of ModelConfig as JSON (embedded in checkpoints).
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace capnpunc
