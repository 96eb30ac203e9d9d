#pragma once

// Client for an external hyperbolic-volume sidecar speaking newline-delimited
// JSON. Endpoints:
//   exec:<shell command>   spawn the sidecar and talk over its stdin/stdout
//   unix:<path>            Unix domain socket
//   tcp:<host>:<port>      TCP socket

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "braidforge/braid.hpp"
#include "json.hpp"

namespace braidforge {

enum class VolumeStatus { Hyperbolic, NotHyperbolic, Error };

std::string volume_status_name(VolumeStatus s);
VolumeStatus volume_status_from_name(const std::string& name);

struct VolumeResult {
  std::optional<double> volume;  ///< present iff Hyperbolic
  VolumeStatus status = VolumeStatus::Error;
  std::string message;
};

inline constexpr double kVolumeTolerance = 1e-5;
inline constexpr double kFigureEightVolume = 2.029883212819307;

nlohmann::json volume_request(long id, const BraidWord& w);
/// Throws ProtocolError on malformed lines, a wrong id, or a volume that
/// disagrees with the status.
VolumeResult parse_volume_response(const std::string& line, long expected_id);

/// |a - b| <= tol. Throws StatusMismatch unless both are hyperbolic.
bool volumes_equal(const VolumeResult& a, const VolumeResult& b, double tol = kVolumeTolerance);

/// A persistent connection; one request in flight at a time.
class OracleClient {
public:
  /// Throws BridgeUnavailable.
  explicit OracleClient(const std::string& endpoint,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~OracleClient();
  OracleClient(const OracleClient&) = delete;
  OracleClient& operator=(const OracleClient&) = delete;

  /// Throws BridgeUnavailable, Timeout or ProtocolError.
  VolumeResult query(const BraidWord& w);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot query over a fresh connection.
VolumeResult query_volume(const BraidWord& w, const std::string& endpoint,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

/// $BRAIDFORGE_ORACLE if set, else `fallback`.
std::string resolve_oracle_endpoint(const std::string& fallback);

}  // namespace braidforge
