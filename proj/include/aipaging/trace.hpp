/*
 * Copyright 2026 The aipaging Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Canonical run trace. One line per entry:
//
//   time_us <TAB> seq <TAB> category [<TAB> key=value]...
//
// Entries are append-only and totally ordered by (time, seq). A complete
// trace starts with a `run` entry and ends with `run_end`.

#ifndef AIPAGING_TRACE_HPP_
#define AIPAGING_TRACE_HPP_

#include <charconv>
#include <concepts>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aipaging/core.hpp"

namespace aipaging {

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Field {
  std::string key;
  std::string value;

  Field(std::string k, std::string v) : key(std::move(k)), value(std::move(v)) {}
  Field(std::string k, std::string_view v) : key(std::move(k)), value(v) {}
  Field(std::string k, const char* v) : key(std::move(k)), value(v) {}
  template <std::integral T>
  Field(std::string k, T v) : key(std::move(k)), value(std::to_string(v)) {}
  template <class Tag>
  Field(std::string k, Id<Tag> v) : key(std::move(k)), value(std::to_string(v.value)) {}
};

struct TraceEntry {
  SimTime time = 0;
  std::uint64_t seq = 0;
  std::string category;
  std::vector<Field> fields;

  std::optional<std::string_view> find(std::string_view key) const {
    for (const auto& f : fields)
      if (f.key == key) return std::string_view(f.value);
    return std::nullopt;
  }

  std::string_view str(std::string_view key) const {
    auto v = find(key);
    if (!v) throw TraceFormatError(where() + ": missing field '" + std::string(key) + "'");
    return *v;
  }

  std::int64_t num(std::string_view key) const {
    auto v = str(key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw TraceFormatError(where() + ": field '" + std::string(key) + "' is not an integer");
    return out;
  }

  template <class T>
  T id(std::string_view key) const {
    return T{static_cast<std::uint64_t>(num(key))};
  }

  std::string where() const {
    return "trace entry seq " + std::to_string(seq) + " (" + category + ")";
  }
};

class Trace {
 public:
  const TraceEntry& append(SimTime time, std::string category, std::vector<Field> fields = {}) {
    if (!entries_.empty() && time < entries_.back().time)
      throw std::logic_error("trace append out of order: " + std::to_string(time) + " < " +
                             std::to_string(entries_.back().time) + " (" + category + ")");
    entries_.push_back(TraceEntry{time, next_seq_++, std::move(category), std::move(fields)});
    return entries_.back();
  }

  const std::vector<TraceEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::size_t count(std::string_view category) const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.category == category) ++n;
    return n;
  }

  void write(std::ostream& os) const {
    for (const auto& e : entries_) {
      os << e.time << '\t' << e.seq << '\t' << e.category;
      for (const auto& f : e.fields) os << '\t' << f.key << '=' << f.value;
      os << '\n';
    }
  }

  std::string to_string() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  /// Parses a trace file. Throws TraceFormatError on malformed or truncated
  /// input (a missing final newline or missing `run_end` counts as truncated).
  static Trace parse(std::istream& is) {
    Trace t;
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (text.empty()) throw TraceFormatError("empty trace");
    if (text.back() != '\n') throw TraceFormatError("truncated trace: last line has no newline");
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      std::string_view line(text.data() + pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      t.entries_.push_back(parse_line(line, line_no));
      const auto& e = t.entries_.back();
      if (t.entries_.size() > 1) {
        const auto& prev = t.entries_[t.entries_.size() - 2];
        if (e.time < prev.time || (e.time == prev.time && e.seq <= prev.seq))
          throw TraceFormatError("line " + std::to_string(line_no) + ": entries not ordered by (time, seq)");
      }
    }
    if (t.entries_.empty() || t.entries_.front().category != "run")
      throw TraceFormatError("trace does not start with a run entry");
    if (t.entries_.back().category != "run_end")
      throw TraceFormatError("truncated trace: no run_end entry");
    t.next_seq_ = t.entries_.back().seq + 1;
    return t;
  }

 private:
  static TraceEntry parse_line(std::string_view line, std::size_t line_no) {
    auto fail = [&](const std::string& why) {
      return TraceFormatError("line " + std::to_string(line_no) + ": " + why);
    };
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 3) throw fail("expected at least 3 columns");
    TraceEntry e;
    auto parse_int = [&](std::string_view s, auto& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw fail("bad integer '" + std::string(s) + "'");
    };
    parse_int(cols[0], e.time);
    parse_int(cols[1], e.seq);
    if (cols[2].empty()) throw fail("empty category");
    e.category = std::string(cols[2]);
    for (std::size_t i = 3; i < cols.size(); ++i) {
      auto eq = cols[i].find('=');
      if (eq == std::string_view::npos || eq == 0) throw fail("bad field '" + std::string(cols[i]) + "'");
      e.fields.emplace_back(std::string(cols[i].substr(0, eq)), cols[i].substr(eq + 1));
    }
    return e;
  }

  std::vector<TraceEntry> entries_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace aipaging

#endif  // AIPAGING_TRACE_HPP_
