#ifndef UNDERLAYER_SPECTRUM_H
#define UNDERLAYER_SPECTRUM_H

#include "underlayer/errors.h"
#include "underlayer/qos.h"
#include "underlayer/sim-core.h"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace underlayer {

/// Frequency interval in MHz, half-open [low, high).
struct SpectrumBlock
{
  double low = 0.0;
  double high = 0.0;

  double Width () const { return high - low; }
  bool Overlaps (const SpectrumBlock &o) const { return low < o.high && o.low < high; }
  bool operator== (const SpectrumBlock &) const = default;
};

struct Band
{
  double lowEdge = 3700.0;
  double highEdge = 3800.0;

  double Width () const { return highEdge - lowEdge; }
  bool Contains (const SpectrumBlock &b) const { return b.low >= lowEdge && b.high <= highEdge; }
  void Validate () const;
};

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

/// Planar coverage disc in site coordinates (meters).
struct CoverageArea
{
  Point center;
  double radius = 1.0;

  void Validate () const;
  /// Open intersection: discs that only touch do not interfere.
  bool Intersects (const CoverageArea &o) const;
  bool Contains (Point p) const;
};

enum class TrafficRole
{
  Urllc,
  Sensor,
  Overlay,
  Other
};

std::string ToString (TrafficRole role);

struct SpectrumRequest
{
  std::string requester;
  CoverageArea area;
  double bandwidth = 0.0;
  QosProfile qos;
  TrafficRole role = TrafficRole::Other;
};

using GrantId = uint64_t;

struct SpectrumGrant
{
  GrantId id = 0;
  std::string requester;
  SpectrumBlock block;
  CoverageArea area;
  TrafficRole role = TrafficRole::Other;
  std::optional<SimTime> leaseExpiry;
};

struct Rejection
{
  std::string reason;
  /// Union width of the blocks held by grants interfering with the requested area.
  double occupiedMhz = 0.0;
};

using SpectrumDecision = std::variant<SpectrumGrant, Rejection>;

/**
 * Chooses a block for a request given the blocks already used around the
 * requested area. Returning nullopt rejects the request.
 */
class AllocationPolicy
{
public:
  virtual ~AllocationPolicy () = default;
  virtual std::optional<SpectrumBlock> Choose (const Band &band, double bandwidth,
                                               const std::vector<SpectrumBlock> &occupied) const = 0;
  virtual std::string Name () const = 0;
};

/// Lowest contiguous free sub-block of the requested width.
class FirstFitPolicy : public AllocationPolicy
{
public:
  std::optional<SpectrumBlock> Choose (const Band &band, double bandwidth,
                                       const std::vector<SpectrumBlock> &occupied) const override;
  std::string Name () const override { return "first-fit"; }
};

struct OccupancyEntry
{
  GrantId id;
  SpectrumBlock block;
};

struct Occupancy
{
  std::vector<OccupancyEntry> grants;
  double totalMhz = 0.0;
};

/// One audit-log record per decision.
struct AuditRecord
{
  SimTime time;
  std::string action; // "request" or "release"
  std::string requester;
  bool granted = false;
  std::optional<GrantId> grantId;
  std::optional<SpectrumBlock> block;
  double occupiedMhz = 0.0;
  std::string reason;
};

/// Site geometry used by the static three-network plan.
struct StaticPlanSite
{
  CoverageArea underlayerArea{{0.0, 0.0}, 50.0};
  CoverageArea overlayArea{{0.0, 0.0}, 500.0};
};

/**
 * Central spectrum management entity. All decisions pass through one
 * ordered command stream; the object is not thread-safe, but copies are
 * independent snapshots.
 */
class SpectrumManager
{
public:
  explicit SpectrumManager (Band band = {}, std::shared_ptr<const AllocationPolicy> policy = nullptr);

  const Band &GetBand () const { return m_band; }

  /// Two 20 MHz underlayer blocks (URLLC, sensor) and a 60 MHz overlay block.
  std::vector<SpectrumGrant> ConfigureStaticPlan (const StaticPlanSite &site = {});

  SpectrumDecision RequestSpectrum (const SpectrumRequest &req, SimTime now,
                                    std::optional<SimTime> leaseExpiry = std::nullopt);
  void ReleaseSpectrum (GrantId id, SimTime now = SimTime ());

  /// Drops grants whose lease expired at or before `now`.
  std::vector<GrantId> ExpireLeases (SimTime now);

  Occupancy OccupancyAt (Point p) const;
  /// Union width of the blocks held by active grants whose area intersects `area`.
  double OccupiedAround (const CoverageArea &area) const;

  const std::map<GrantId, SpectrumGrant> &ActiveGrants () const { return m_grants; }
  const std::vector<AuditRecord> &AuditLog () const { return m_audit; }

private:
  std::vector<SpectrumBlock> BlocksAround (const CoverageArea &area) const;
  SpectrumGrant Insert (std::string requester, SpectrumBlock block, CoverageArea area,
                        TrafficRole role, std::optional<SimTime> lease);

  Band m_band;
  std::shared_ptr<const AllocationPolicy> m_policy;
  std::map<GrantId, SpectrumGrant> m_grants;
  GrantId m_nextId = 1;
  std::vector<AuditRecord> m_audit;
};

/// Width of the union of possibly overlapping blocks.
double UnionWidth (std::vector<SpectrumBlock> blocks);

} // namespace underlayer

#endif
