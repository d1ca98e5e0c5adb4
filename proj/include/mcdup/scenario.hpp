#pragma once

// Scenario and link-profile configuration (JSON). The schema is documented
// in README.md. Relative file references resolve against the directory of
// the file that contains them.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcdup/duplication.hpp"
#include "mcdup/feasibility.hpp"
#include "mcdup/link.hpp"
#include "mcdup/probes.hpp"
#include "mcdup/tunnel.hpp"

namespace mcdup {

enum class TransportMode { Emulated, Tunnel };

const char* to_string(TransportMode mode);

struct LoadPlan {
  LoadConfig config;  // direction is taken from `directions`
  std::vector<Direction> directions{Direction::Downlink, Direction::Uplink};
};

struct Scenario {
  std::string name;
  TransportMode mode = TransportMode::Emulated;
  std::optional<std::uint64_t> seed;
  std::vector<LinkProfile> links;         // emulated mode
  std::vector<ClientPath> tunnel_paths;   // tunnel mode
  std::chrono::milliseconds handshake_timeout{2000};
  DuplicationPolicy policy = FullDuplication{};
  std::optional<ProbeConfig> probe;
  std::optional<LoadPlan> load;
  bool single_connectivity = true;  // also run each link on its own
  std::string technology = "MC";    // label of the combined column
  std::vector<UseCaseRequirement> requirements;
  std::string requirements_source = "builtin";
  double alpha = 0.01;
  std::vector<double> confidence_points_ms{100.0, 400.0, 1000.0};
  std::filesystem::path output_dir;
  bool event_log = false;

  std::vector<std::string> link_names() const;
  std::string single_label(std::size_t link) const { return "SC-" + link_names().at(link); }
};

struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_s;
  std::optional<std::string> policy;          // full | primary-with-backup[:LINK] | quality-switch
  std::optional<std::vector<std::string>> profiles;  // link names, in order
  std::optional<std::filesystem::path> output_dir;
  std::optional<bool> event_log;
};

// Every problem found is reported in one ConfigError, one per line.
Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides = {});
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                        const ScenarioOverrides& overrides = {});

std::vector<LinkProfile> load_profiles(const std::filesystem::path& path);
LinkProfile parse_profile(const nlohmann::json& doc, const std::filesystem::path& base_dir);
DuplicationPolicy parse_policy(const nlohmann::json& doc);
DuplicationPolicy parse_policy_flag(const std::string& text);
std::vector<UseCaseRequirement> load_requirements(const std::filesystem::path& path);
AvailabilityTable load_availability(const std::filesystem::path& path);

// Canonical form of everything that affects a run, with referenced tables
// and traces inlined or digested; the config hash is taken over its dump.
nlohmann::json to_json(const Scenario& scenario);
std::uint64_t config_hash(const Scenario& scenario);
std::string hex64(std::uint64_t v);

// Output directory, resolved against $MCDUP_OUTPUT_ROOT when relative.
std::filesystem::path resolve_output_dir(const Scenario& scenario);

}  // namespace mcdup
