#include "underlayer/spectrum.h"

#include <algorithm>
#include <cmath>

namespace underlayer {

void
Band::Validate () const
{
  if (!(std::isfinite (lowEdge) && std::isfinite (highEdge)) || !(lowEdge < highEdge))
    throw ValidationError ("band low edge must be below high edge");
}

void
CoverageArea::Validate () const
{
  if (!std::isfinite (center.x) || !std::isfinite (center.y))
    throw ValidationError ("coverage center must be finite");
  if (!std::isfinite (radius) || radius <= 0.0)
    throw ValidationError ("coverage radius must be positive");
}

bool
CoverageArea::Intersects (const CoverageArea &o) const
{
  double dx = center.x - o.center.x;
  double dy = center.y - o.center.y;
  double reach = radius + o.radius;
  return dx * dx + dy * dy < reach * reach;
}

bool
CoverageArea::Contains (Point p) const
{
  double dx = p.x - center.x;
  double dy = p.y - center.y;
  return dx * dx + dy * dy <= radius * radius;
}

std::string
ToString (TrafficRole role)
{
  switch (role)
    {
    case TrafficRole::Urllc:
      return "urllc";
    case TrafficRole::Sensor:
      return "sensor";
    case TrafficRole::Overlay:
      return "overlay";
    case TrafficRole::Other:
      break;
    }
  return "other";
}

double
UnionWidth (std::vector<SpectrumBlock> blocks)
{
  std::sort (blocks.begin (), blocks.end (),
             [] (const SpectrumBlock &a, const SpectrumBlock &b) { return a.low < b.low; });
  double total = 0.0;
  double curLow = 0.0;
  double curHigh = 0.0;
  bool open = false;
  for (const auto &b : blocks)
    {
      if (!open || b.low > curHigh)
        {
          if (open)
            total += curHigh - curLow;
          curLow = b.low;
          curHigh = b.high;
          open = true;
        }
      else
        curHigh = std::max (curHigh, b.high);
    }
  if (open)
    total += curHigh - curLow;
  return total;
}

std::optional<SpectrumBlock>
FirstFitPolicy::Choose (const Band &band, double bandwidth,
                        const std::vector<SpectrumBlock> &occupied) const
{
  std::vector<SpectrumBlock> sorted = occupied;
  std::sort (sorted.begin (), sorted.end (),
             [] (const SpectrumBlock &a, const SpectrumBlock &b) { return a.low < b.low; });
  double cursor = band.lowEdge;
  for (const auto &b : sorted)
    {
      if (b.high <= cursor)
        continue;
      if (b.low - cursor >= bandwidth)
        break;
      cursor = std::max (cursor, b.high);
    }
  if (band.highEdge - cursor >= bandwidth)
    return SpectrumBlock{cursor, cursor + bandwidth};
  return std::nullopt;
}

SpectrumManager::SpectrumManager (Band band, std::shared_ptr<const AllocationPolicy> policy)
  : m_band (band), m_policy (std::move (policy))
{
  m_band.Validate ();
  if (!m_policy)
    m_policy = std::make_shared<FirstFitPolicy> ();
}

SpectrumGrant
SpectrumManager::Insert (std::string requester, SpectrumBlock block, CoverageArea area,
                         TrafficRole role, std::optional<SimTime> lease)
{
  SpectrumGrant g;
  g.id = m_nextId++;
  g.requester = std::move (requester);
  g.block = block;
  g.area = area;
  g.role = role;
  g.leaseExpiry = lease;
  m_grants.emplace (g.id, g);
  return g;
}

std::vector<SpectrumGrant>
SpectrumManager::ConfigureStaticPlan (const StaticPlanSite &site)
{
  struct Entry
  {
    const char *name;
    double width;
    TrafficRole role;
    QosProfile qos;
    CoverageArea area;
  };
  const Entry plan[] = {
      {"underlayer-1", 20.0, TrafficRole::Urllc, QosProfile::Urllc (), site.underlayerArea},
      {"underlayer-2", 20.0, TrafficRole::Sensor, QosProfile::Sensor (), site.underlayerArea},
      {"overlay", 60.0, TrafficRole::Overlay, QosProfile::Overlay (), site.overlayArea},
  };
  std::vector<SpectrumGrant> out;
  for (const auto &e : plan)
    {
      SpectrumRequest req{e.name, e.area, e.width, e.qos, e.role};
      auto decision = RequestSpectrum (req, SimTime ());
      if (auto *g = std::get_if<SpectrumGrant> (&decision))
        out.push_back (*g);
      else
        throw ValidationError ("static plan does not fit the band: "
                               + std::get<Rejection> (decision).reason);
    }
  return out;
}

std::vector<SpectrumBlock>
SpectrumManager::BlocksAround (const CoverageArea &area) const
{
  std::vector<SpectrumBlock> blocks;
  for (const auto &[id, g] : m_grants)
    if (g.area.Intersects (area))
      blocks.push_back (g.block);
  return blocks;
}

double
SpectrumManager::OccupiedAround (const CoverageArea &area) const
{
  return UnionWidth (BlocksAround (area));
}

SpectrumDecision
SpectrumManager::RequestSpectrum (const SpectrumRequest &req, SimTime now,
                                  std::optional<SimTime> leaseExpiry)
{
  req.area.Validate ();
  if (!std::isfinite (req.bandwidth) || req.bandwidth <= 0.0)
    throw ValidationError ("requested bandwidth must be positive");

  AuditRecord rec;
  rec.time = now;
  rec.action = "request";
  rec.requester = req.requester;

  auto occupied = BlocksAround (req.area);
  rec.occupiedMhz = UnionWidth (occupied);

  if (req.bandwidth > m_band.Width ())
    {
      rec.reason = "oversized request";
      m_audit.push_back (rec);
      return Rejection{rec.reason, rec.occupiedMhz};
    }

  auto block = m_policy->Choose (m_band, req.bandwidth, occupied);
  if (!block)
    {
      rec.reason = "no contiguous free block";
      m_audit.push_back (rec);
      return Rejection{rec.reason, rec.occupiedMhz};
    }

  SpectrumGrant g = Insert (req.requester, *block, req.area, req.role, leaseExpiry);
  rec.granted = true;
  rec.grantId = g.id;
  rec.block = g.block;
  m_audit.push_back (rec);
  return g;
}

void
SpectrumManager::ReleaseSpectrum (GrantId id, SimTime now)
{
  auto it = m_grants.find (id);
  if (it == m_grants.end ())
    throw NotFoundError ("unknown grant id " + std::to_string (id));
  AuditRecord rec;
  rec.time = now;
  rec.action = "release";
  rec.requester = it->second.requester;
  rec.granted = true;
  rec.grantId = id;
  rec.block = it->second.block;
  m_grants.erase (it);
  m_audit.push_back (rec);
}

std::vector<GrantId>
SpectrumManager::ExpireLeases (SimTime now)
{
  std::vector<GrantId> expired;
  for (const auto &[id, g] : m_grants)
    if (g.leaseExpiry && *g.leaseExpiry <= now)
      expired.push_back (id);
  for (GrantId id : expired)
    ReleaseSpectrum (id, now);
  return expired;
}

Occupancy
SpectrumManager::OccupancyAt (Point p) const
{
  Occupancy occ;
  std::vector<SpectrumBlock> blocks;
  for (const auto &[id, g] : m_grants)
    if (g.area.Contains (p))
      {
        occ.grants.push_back ({id, g.block});
        blocks.push_back (g.block);
      }
  occ.totalMhz = UnionWidth (blocks);
  return occ;
}

} // namespace underlayer
