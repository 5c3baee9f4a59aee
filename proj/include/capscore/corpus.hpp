// Copyright 2026 The Capscore Authors. All Rights Reserved.
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

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "capscore/text.hpp"

namespace capscore {

/// One audio clip: its identifier, reference captions and audio tags.
struct CorpusItem {
  std::string item_id;
  std::vector<Caption> captions;
  std::set<std::string> tags;

  friend bool operator==(const CorpusItem&, const CorpusItem&) = default;
};

using Corpus = std::vector<CorpusItem>;

/// Tags compare after trimming and lowercasing.
inline std::string canonical_tag(std::string_view tag) {
  std::size_t begin = 0;
  std::size_t end = tag.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(tag[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(tag[end - 1]))) --end;
  std::string out(tag.substr(begin, end - begin));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

/// True when the items share a tag after trimming and lowercasing.
inline bool tags_overlap(const CorpusItem& a, const CorpusItem& b) {
  std::set<std::string> seen;
  for (const auto& t : a.tags) {
    auto c = canonical_tag(t);
    if (!c.empty()) seen.insert(std::move(c));
  }
  for (const auto& t : b.tags)
    if (seen.count(canonical_tag(t))) return true;
  return false;
}

/// Key of a reference caption in sentence-embedding files.
inline std::string caption_key(std::string_view item_id, std::size_t caption_index) {
  return std::string(item_id) + "#" + std::to_string(caption_index);
}

/// Key of a candidate caption in sentence-embedding files.
inline std::string candidate_key(std::string_view item_id) {
  return "cand:" + std::string(item_id);
}

}  // namespace capscore
