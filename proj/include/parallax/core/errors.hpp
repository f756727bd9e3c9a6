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

#include <stdexcept>
#include <string>

namespace parallax {

// Shape or size contract violated by an operation's inputs.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API misuse that is not a shape problem (non-scalar backward root, bad label, n < 2, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite values or a numerically invalid input (e.g. a covariance that is not PSD).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents: CIFAR binaries, checkpoints, PPM images.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace parallax
