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

// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-8 run in
// process on the shipped scenario; criterion 9 runs `qdsps paper-check` twice
// with the same seed and compares every data file byte for byte.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "qdsps/reproduction.hpp"
#include "qdsps/scenario.hpp"

namespace fs = std::filesystem;
using namespace qdsps;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run_cli(const fs::path& out, std::uint64_t seed) {
  const std::string cmd = std::string("\"") + QDSPS_CLI_PATH + "\" paper-check --scenario \"" + QDSPS_SCENARIO_DIR +
                          "/default.json\" --seed " + std::to_string(seed) + " --out \"" + out.string() + "\" > \"" +
                          (out.string() + ".log") + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

repro::Row reproducibility_row(std::uint64_t seed) {
  const fs::path root = fs::temp_directory_path() / ("qdsps_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path a = root / "run1", b = root / "run2";
  const int code_a = run_cli(a, seed), code_b = run_cli(b, seed);

  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
  std::size_t compared = 0, differing = 0;
  std::string which;
  for (const auto& n : names_a) {
    if (n == "manifest.json") continue;
    ++compared;
    if (!names_b.count(n) || slurp(a / n) != slurp(b / n)) {
      ++differing;
      which += " " + n;
    }
  }
  // Manifests may differ only in their creation time.
  bool manifests_match = false, manifest_complete = false;
  try {
    auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
    auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& f : ma.at("files")) listed.insert(f.at("name").get<std::string>());
    listed.insert("manifest.json");
    manifest_complete = listed == names_a;
    ma.erase("created_utc");
    mb.erase("created_utc");
    manifests_match = ma == mb;
  } catch (const std::exception&) {
  }
  const bool ok = code_a == 0 && code_b == 0 && names_a == names_b && compared > 0 && differing == 0 &&
                  manifests_match && manifest_complete;
  if (ok) fs::remove_all(root);
  return {9, "reproducibility", ok,
          "paper-check exit codes " + std::to_string(code_a) + "/" + std::to_string(code_b) + "; " +
              std::to_string(compared) + " data files compared, " + std::to_string(differing) + " differ" + which +
              "; manifests equal apart from timestamp: " + (manifests_match ? "yes" : "no") +
              "; every file listed: " + (manifest_complete ? "yes" : "no")};
}

}  // namespace

int main() {
  try {
    const auto c = load_scenario(std::string(QDSPS_SCENARIO_DIR) + "/default.json");
    auto a = repro::run_acceptance(c, 1, false);
    a.rows.push_back(reproducibility_row(c.seed));
    for (const auto& r : a.rows) std::cout << repro::format_row(r) << '\n';
    const bool ok = a.all_passed() && a.rows.size() == 9;
    std::cout << (ok ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << '\n';
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cout << "ACCEPTANCE ERROR: " << e.what() << '\n';
    return 2;
  }
}
