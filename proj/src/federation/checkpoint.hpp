/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>

#include "numerics/param_set.hpp"

namespace rolefed {

struct CheckpointMeta {
  std::string run_id;
  std::uint64_t round = 0;
  std::uint64_t config_hash = 0;
};

/// Layout (all integers and floats little-endian): "RFCK", u32 version,
/// u32 run-id length + bytes, u64 round, u64 config hash, u64 record count,
/// then per parameter in name order: u32 name length + bytes, u32 rank,
/// u64 dims, f64 values.
void write_checkpoint(const std::string& path, const ParamSet& params, const CheckpointMeta& meta);
/// Throws IoError when the file cannot be read and InputError when it is malformed.
ParamSet read_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace rolefed
