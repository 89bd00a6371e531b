#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace lseg::testing {

/// One recorded exchange with the HTTP service.
struct GoldenExchange {
  std::string name;
  int status = 0;
  std::string content_type;
  nlohmann::ordered_json body;

  /// {"request": name, "status": s, "content_type": t, "body": redacted body}
  nlohmann::ordered_json document() const;
};

/// Runs the contract request set against a service that serves the fixture
/// registry on `port`, plus the oversize-upload request against `small_port`
/// (a server whose upload limit is 1 KiB).
std::vector<GoldenExchange> record_golden_exchanges(int port, int small_port);

/// Registry of the shipped fixtures with the service settings used by the
/// contract tests.
inline constexpr const char* kFixtureRegistry = "registry.json";
inline constexpr const char* kFixturePatch = "patches/fixture_0000.h5";
inline constexpr const char* kFixturePatchB = "patches/fixture_0001.h5";
inline constexpr std::size_t kSmallUploadLimit = 1024;

}  // namespace lseg::testing
