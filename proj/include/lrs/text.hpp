// Copyright 2026 The Live Rec Study Authors.
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

#include <string>
#include <string_view>

namespace lrs::text {

// Strips ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view s);

// Unicode NFC normalization of UTF-8 input. Invalid UTF-8 throws lrs::Error
// with code "invalid_utf8".
std::string nfc(std::string_view s);

// nfc(trim(s)); the canonical form used for artist and title identity.
std::string canonical(std::string_view s);

// Simple case folding, used only by opt-in relaxed matching.
std::string fold_case(std::string_view s);

// Percent-encodes everything outside RFC 3986 unreserved characters.
std::string url_encode(std::string_view s);

}  // namespace lrs::text
