// Copyright 2026 The tilescout Authors
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

// IEEE-754 binary16 <-> binary32 conversion.

#include <cstdint>
#include <span>
#include <vector>

namespace tilescout::search {

/// Exact widening; every binary16 value (including subnormals, infinities,
/// signed zeros) is representable in binary32. NaN payloads are preserved in
/// the high mantissa bits.
float f16_to_f32(uint16_t bits);

/// Round-to-nearest-even narrowing. Overflow saturates to infinity.
uint16_t f32_to_f16(float value);

/// Table-driven widening used in scan loops; identical results to
/// f16_to_f32.
const float* f16_table();

std::vector<float> dequantize(std::span<const uint16_t> values);
std::vector<uint16_t> quantize(std::span<const float> values);

}  // namespace tilescout::search
