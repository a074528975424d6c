// Copyright 2026 The qdsps Authors
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

#ifndef QDSPS_CLICK_STREAM_HPP
#define QDSPS_CLICK_STREAM_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qdsps/common.hpp"
#include "qdsps/csv.hpp"

namespace qdsps {

/// Detector event. Channel 'S' marks a single-detector stream, 'A'/'B' the two
/// arms of an HBT setup.
struct ClickEvent {
  std::int64_t timestamp_ps = 0;
  char channel = 'S';

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

struct ClickMeta {
  double rep_period_ps = 0.0;
  std::string scenario_hash;
  std::uint64_t seed = 0;

  friend bool operator==(const ClickMeta&, const ClickMeta&) = default;
};

struct ClickStream {
  std::vector<ClickEvent> events;
  /// Declared channel set: "S" or "AB".
  std::string channels = "S";
  ClickMeta meta;

  bool two_channel() const { return channels == "AB"; }

  std::size_t count(char channel) const {
    return std::size_t(std::count_if(events.begin(), events.end(), [&](const ClickEvent& e) { return e.channel == channel; }));
  }

  bool sorted() const {
    return std::is_sorted(events.begin(), events.end(),
                          [](const ClickEvent& a, const ClickEvent& b) { return a.timestamp_ps < b.timestamp_ps; });
  }

  void validate() const {
    require(channels == "S" || channels == "AB", "channel set must be \"S\" or \"AB\"");
    require(sorted(), "click timestamps must be non-decreasing");
    for (const auto& e : events) {
      require(channels.find(e.channel) != std::string::npos,
              std::string("event channel '") + e.channel + "' not in declared set \"" + channels + "\"");
    }
  }

  friend bool operator==(const ClickStream&, const ClickStream&) = default;
};

inline constexpr const char* kClickFormat = "qdsps-clickstream";
inline constexpr int kClickFormatVersion = 1;

/// 64-bit FNV-1a, used for scenario fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xf];
  return s;
}

/// Fingerprint of a JSON document in canonical (sorted-key, compact) form.
inline std::string json_hash(const nlohmann::json& doc) { return hex64(fnv1a64(doc.dump())); }

inline void write_click_csv(std::ostream& os, const ClickStream& stream) {
  os << "channel,timestamp_ps\n";
  for (const auto& e : stream.events) os << e.channel << ',' << e.timestamp_ps << '\n';
}

inline nlohmann::json click_sidecar(const ClickStream& stream) {
  return {{"format", kClickFormat},
          {"version", kClickFormatVersion},
          {"scenario_hash", stream.meta.scenario_hash},
          {"seed", stream.meta.seed},
          {"rep_period_ps", stream.meta.rep_period_ps},
          {"n_events", stream.events.size()},
          {"channels", stream.channels}};
}

/// Reads `channel,timestamp_ps` rows; the channel set comes from the sidecar.
inline std::vector<ClickEvent> read_click_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("click CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "channel,timestamp_ps") throw std::invalid_argument("click CSV header must be 'channel,timestamp_ps'");
  std::vector<ClickEvent> events;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2 || fields[0].size() != 1) {
      throw std::invalid_argument("malformed click CSV row " + std::to_string(row));
    }
    events.push_back({parse_int64(fields[1]), fields[0][0]});
  }
  return events;
}

inline ClickStream click_stream_from(std::vector<ClickEvent> events, const nlohmann::json& sidecar) {
  if (sidecar.value("format", std::string()) != kClickFormat) throw std::invalid_argument("sidecar has the wrong format tag");
  if (sidecar.value("version", 0) != kClickFormatVersion) throw std::invalid_argument("unsupported sidecar version");
  ClickStream s;
  s.events = std::move(events);
  s.channels = sidecar.at("channels").get<std::string>();
  s.meta.rep_period_ps = sidecar.at("rep_period_ps").get<double>();
  s.meta.scenario_hash = sidecar.at("scenario_hash").get<std::string>();
  s.meta.seed = sidecar.at("seed").get<std::uint64_t>();
  if (sidecar.at("n_events").get<std::size_t>() != s.events.size()) {
    throw std::invalid_argument("sidecar event count does not match the CSV");
  }
  s.validate();
  return s;
}

/// Sidecar path for a click CSV: same stem, `.json` extension.
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline void save_click_stream(const std::filesystem::path& csv, const ClickStream& stream) {
  stream.validate();
  {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + csv.string());
    write_click_csv(os, stream);
  }
  std::ofstream js(sidecar_path(csv), std::ios::binary);
  if (!js) throw std::runtime_error("cannot write " + sidecar_path(csv).string());
  js << click_sidecar(stream).dump(2) << '\n';
}

inline ClickStream load_click_stream(const std::filesystem::path& csv) {
  std::ifstream is(csv, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + csv.string());
  std::ifstream js(sidecar_path(csv), std::ios::binary);
  if (!js) throw std::runtime_error("cannot read " + sidecar_path(csv).string());
  return click_stream_from(read_click_csv(is), nlohmann::json::parse(js));
}

/// Raw time-tagger export: `timestamp_ps,channel` rows with channel 0/1 or A/B
/// and an optional header line. Events are sorted on import.
inline ClickStream import_raw_timestamps(std::istream& is, double rep_period_ps) {
  require_positive(rep_period_ps, "rep_period_ps");
  ClickStream s;
  s.channels = "AB";
  s.meta.rep_period_ps = rep_period_ps;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) throw std::invalid_argument("raw row " + std::to_string(row) + " needs two fields");
    if (row == 1 && fields[0].find_first_not_of("0123456789-+ ") != std::string_view::npos) continue;
    std::string_view ch = fields[1];
    while (!ch.empty() && ch.front() == ' ') ch.remove_prefix(1);
    while (!ch.empty() && ch.back() == ' ') ch.remove_suffix(1);
    char c;
    if (ch == "0" || ch == "A" || ch == "a") {
      c = 'A';
    } else if (ch == "1" || ch == "B" || ch == "b") {
      c = 'B';
    } else {
      throw std::invalid_argument("raw row " + std::to_string(row) + " has unknown channel '" + std::string(ch) + "'");
    }
    s.events.push_back({parse_int64(fields[0]), c});
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const ClickEvent& a, const ClickEvent& b) { return a.timestamp_ps < b.timestamp_ps; });
  return s;
}

}  // namespace qdsps

#endif  // QDSPS_CLICK_STREAM_HPP
