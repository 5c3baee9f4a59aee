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
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "capscore/corpus.hpp"
#include "capscore/error.hpp"
#include "capscore/text.hpp"

namespace capscore {

enum class CorpusFormat { kCsv, kJson };

struct CorpusFile {
  Corpus items;
  CorpusFormat source_format = CorpusFormat::kJson;
};

/// One predicted caption per item.
struct CandidateSet {
  std::map<std::string, Caption> entries;
};

struct CandidateCoverage {
  std::size_t covered = 0;
  std::vector<std::string> missing;  // corpus items without a candidate
};

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

inline std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> records;
  CsvRecord rec;
  std::string field;
  std::size_t line = 1;
  rec.line = 1;
  bool in_quotes = false;
  bool field_started = false;
  auto end_record = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty() && !field_started;
    if (!blank) records.push_back(std::move(rec));
    rec = CsvRecord{};
    rec.line = line;
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw Error(ErrorCode::kParseError,
                      "line " + std::to_string(line) + ": quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes)
    throw Error(ErrorCode::kParseError, "unterminated quoted field at end of input");
  if (field_started || !field.empty() || !rec.fields.empty()) end_record();
  return records;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool has_json_extension(std::string_view path) {
  return path.size() >= 5 && path.substr(path.size() - 5) == ".json";
}

inline std::set<std::string> parse_tag_list(std::string_view field) {
  std::set<std::string> tags;
  std::size_t start = 0;
  while (start <= field.size()) {
    const std::size_t semi = field.find(';', start);
    const std::size_t end = semi == std::string_view::npos ? field.size() : semi;
    std::string tag = canonical_tag(field.substr(start, end - start));
    if (!tag.empty()) tags.insert(std::move(tag));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  return tags;
}

inline Caption caption_or_throw(const std::string& raw, const std::string& where) {
  try {
    return normalize_and_tokenize(raw);
  } catch (const Error& e) {
    throw Error(e.code(), where + ": caption has no tokens");
  }
}

}  // namespace detail

/// Corpus CSV: header `item_id,caption_index,caption[,tags]`, tags
/// `;`-separated. Caption indices of each item must be 0..k-1.
inline Corpus parse_corpus_csv(std::string_view text) {
  const auto records = parse_csv(text);
  if (records.empty()) throw Error(ErrorCode::kParseError, "corpus CSV is empty");
  const auto& header = records.front().fields;
  const bool with_tags = header.size() == 4 && header[3] == "tags";
  if (header.size() < 3 || header[0] != "item_id" || header[1] != "caption_index" ||
      header[2] != "caption" || (header.size() == 4 && !with_tags) || header.size() > 4)
    throw Error(ErrorCode::kParseError,
                "corpus CSV header must be item_id,caption_index,caption[,tags]");

  struct Pending {
    std::map<std::size_t, Caption> captions;
    std::set<std::string> tags;
    bool tags_seen = false;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> pending;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
    if (rec.fields.size() != header.size())
      throw Error(ErrorCode::kParseError, where + ": expected " + std::to_string(header.size()) +
                                              " fields, got " + std::to_string(rec.fields.size()));
    const std::string& id = rec.fields[0];
    if (id.empty()) throw Error(ErrorCode::kParseError, where + ": empty item_id");
    std::size_t index = 0;
    const std::string& idx_field = rec.fields[1];
    auto [ptr, ec] = std::from_chars(idx_field.data(), idx_field.data() + idx_field.size(), index);
    if (ec != std::errc() || ptr != idx_field.data() + idx_field.size())
      throw Error(ErrorCode::kParseError, where + ": bad caption_index '" + idx_field + "'");
    Caption caption = detail::caption_or_throw(rec.fields[2], where);

    auto [it, inserted] = pending.try_emplace(id);
    if (inserted) order.push_back(id);
    Pending& item = it->second;
    std::set<std::string> tags = with_tags ? detail::parse_tag_list(rec.fields[3])
                                           : std::set<std::string>{};
    if (!item.tags_seen) {
      item.tags = std::move(tags);
      item.tags_seen = true;
    } else if (item.tags != tags) {
      throw Error(ErrorCode::kDuplicateItem,
                  where + ": item '" + id + "' repeated with a different tag set");
    }
    if (!item.captions.emplace(index, std::move(caption)).second)
      throw Error(ErrorCode::kParseError,
                  where + ": duplicate caption_index " + idx_field + " for item '" + id + "'");
  }

  Corpus corpus;
  for (const auto& id : order) {
    Pending& item = pending.at(id);
    CorpusItem out{id, {}, std::move(item.tags)};
    std::size_t expect = 0;
    for (auto& [index, caption] : item.captions) {
      if (index != expect++)
        throw Error(ErrorCode::kParseError,
                    "item '" + id + "': caption indices must run 0..k-1");
      out.captions.push_back(std::move(caption));
    }
    corpus.push_back(std::move(out));
  }
  return corpus;
}

/// Corpus JSON: `[{"item_id": ..., "captions": [...], "tags": [...]}]`,
/// tags optional.
inline Corpus corpus_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, "corpus JSON must be an array");
  Corpus corpus;
  std::set<std::string> ids;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& obj = j[k];
    const std::string where = "entry " + std::to_string(k);
    try {
      CorpusItem item;
      item.item_id = obj.at("item_id").get<std::string>();
      if (item.item_id.empty()) throw Error(ErrorCode::kParseError, where + ": empty item_id");
      if (!ids.insert(item.item_id).second)
        throw Error(ErrorCode::kDuplicateItem, where + ": duplicate item '" + item.item_id + "'");
      const auto& caps = obj.at("captions");
      if (!caps.is_array() || caps.empty())
        throw Error(ErrorCode::kParseError, where + ": captions must be a non-empty array");
      for (std::size_t c = 0; c < caps.size(); ++c) {
        item.captions.push_back(detail::caption_or_throw(
            caps[c].get<std::string>(),
            where + " ('" + item.item_id + "' caption " + std::to_string(c) + ")"));
      }
      if (obj.contains("tags")) {
        for (const auto& t : obj.at("tags")) {
          std::string tag = canonical_tag(t.get<std::string>());
          if (!tag.empty()) item.tags.insert(std::move(tag));
        }
      }
      corpus.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    }
  }
  return corpus;
}

inline nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& item : corpus) {
    nlohmann::json caps = nlohmann::json::array();
    for (const auto& c : item.captions) caps.push_back(c.raw);
    out.push_back({{"item_id", item.item_id},
                   {"captions", caps},
                   {"tags", std::vector<std::string>(item.tags.begin(), item.tags.end())}});
  }
  return out;
}

inline std::string corpus_to_csv(const Corpus& corpus) {
  std::string out = "item_id,caption_index,caption,tags\n";
  for (const auto& item : corpus) {
    std::string tags;
    for (const auto& t : item.tags) tags += (tags.empty() ? "" : ";") + t;
    for (std::size_t c = 0; c < item.captions.size(); ++c) {
      out += csv_escape(item.item_id) + "," + std::to_string(c) + "," +
             csv_escape(item.captions[c].raw) + "," + csv_escape(tags) + "\n";
    }
  }
  return out;
}

inline CorpusFile load_corpus(const std::string& path, CorpusFormat format) {
  const std::string text = detail::read_file(path);
  try {
    if (format == CorpusFormat::kCsv) return {parse_corpus_csv(text), format};
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what());
    }
    return {corpus_from_json(j), format};
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

/// Format inferred from the extension: `.json` is JSON, anything else CSV.
inline CorpusFile load_corpus(const std::string& path) {
  return load_corpus(path, detail::has_json_extension(path) ? CorpusFormat::kJson
                                                           : CorpusFormat::kCsv);
}

// ---------------------------------------------------------------------------
// Candidates

inline CandidateSet parse_candidates_csv(std::string_view text) {
  const auto records = parse_csv(text);
  if (records.empty() || records.front().fields != std::vector<std::string>{"item_id", "caption"})
    throw Error(ErrorCode::kParseError, "candidate CSV header must be item_id,caption");
  CandidateSet set;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
    if (rec.fields.size() != 2)
      throw Error(ErrorCode::kParseError, where + ": expected 2 fields");
    if (rec.fields[0].empty()) throw Error(ErrorCode::kParseError, where + ": empty item_id");
    Caption c = detail::caption_or_throw(rec.fields[1], where);
    if (!set.entries.emplace(rec.fields[0], std::move(c)).second)
      throw Error(ErrorCode::kDuplicateCandidate,
                  where + ": second candidate for '" + rec.fields[0] + "'");
  }
  return set;
}

/// Candidate JSON: an object mapping item_id to caption.
inline CandidateSet parse_candidates_json(std::string_view text) {
  // The parser callback sees every key, so duplicates are caught before
  // the object collapses them.
  std::set<std::string> seen;
  std::string duplicate;
  auto callback = [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
    if (depth == 1 && event == nlohmann::json::parse_event_t::key && duplicate.empty()) {
      const auto key = parsed.get<std::string>();
      if (!seen.insert(key).second) duplicate = key;
    }
    return true;
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end(), callback);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!duplicate.empty())
    throw Error(ErrorCode::kDuplicateCandidate, "second candidate for '" + duplicate + "'");
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "candidate JSON must be an object");
  CandidateSet set;
  for (const auto& [id, value] : j.items()) {
    if (!value.is_string())
      throw Error(ErrorCode::kParseError, "candidate for '" + id + "' is not a string");
    set.entries.emplace(id, detail::caption_or_throw(value.get<std::string>(),
                                                     "candidate '" + id + "'"));
  }
  return set;
}

inline CandidateSet load_candidates(const std::string& path) {
  const std::string text = detail::read_file(path);
  try {
    return detail::has_json_extension(path) ? parse_candidates_json(text)
                                            : parse_candidates_csv(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

/// Checks every candidate names a corpus item; reports items left uncovered.
inline CandidateCoverage cross_validate(const CandidateSet& candidates, const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& item : corpus) ids.insert(item.item_id);
  for (const auto& [id, caption] : candidates.entries) {
    if (!ids.count(id))
      throw Error(ErrorCode::kUnknownItem, "candidate for unknown item '" + id + "'");
  }
  CandidateCoverage coverage;
  for (const auto& item : corpus) {
    if (candidates.entries.count(item.item_id)) {
      ++coverage.covered;
    } else {
      coverage.missing.push_back(item.item_id);
    }
  }
  return coverage;
}

}  // namespace capscore
