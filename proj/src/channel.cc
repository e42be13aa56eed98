#include "underlayer/channel.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace underlayer {

std::string
ToString (JitterDistribution d)
{
  return d == JitterDistribution::Uniform ? "uniform" : "truncated-normal";
}

JitterDistribution
ParseJitterDistribution (const std::string &s)
{
  if (s == "uniform")
    return JitterDistribution::Uniform;
  if (s == "truncated-normal" || s == "normal")
    return JitterDistribution::TruncatedNormal;
  throw std::invalid_argument ("unknown jitter distribution '" + s + "'");
}

void
ChannelProfile::Validate () const
{
  if (meanDelayUs < 0)
    throw std::invalid_argument ("channel mean delay must be >= 0");
  if (jitterUs < 0)
    throw std::invalid_argument ("channel jitter must be >= 0");
  if (!(lossRate >= 0.0 && lossRate <= 1.0))
    throw std::invalid_argument ("channel loss rate must lie in [0, 1]");
}

Channel::Channel (ChannelProfile profile) : m_profile (profile)
{
  m_profile.Validate ();
}

int64_t
Channel::DrawJitter (RngStream &rng) const
{
  const double half = static_cast<double> (m_profile.jitterUs);
  if (m_profile.jitterUs == 0)
    return 0;
  double x = 0.0;
  if (m_profile.distribution == JitterDistribution::Uniform)
    x = rng.Uniform (-half, half);
  else
    {
      // sigma = half/2, resampled until inside [-half, half]
      do
        x = rng.StandardNormal () * half / 2.0;
      while (std::abs (x) > half);
    }
  return std::llround (x);
}

DeliveryRecord
Channel::Transmit (uint64_t frameId, SimTime now, RngStream &rng)
{
  DeliveryRecord rec;
  rec.frameId = frameId;
  rec.sent = now;
  // The loss draw always happens so the jitter sequence does not depend on
  // whether loss is configured.
  bool lost = rng.Bernoulli (m_profile.lossRate);
  int64_t delay = std::max<int64_t> (0, m_profile.meanDelayUs + DrawJitter (rng));
  if (lost || (m_severedAt && now >= *m_severedAt))
    return rec;
  SimTime at = now + SimTime (delay);
  if (!m_profile.reorderAllowed)
    at = std::max (at, m_lastDelivery);
  m_lastDelivery = at;
  rec.delivered = at;
  rec.appliedDelayUs = (at - now).Us ();
  return rec;
}

DelayStats
EmpiricalStats (std::span<const DeliveryRecord> records)
{
  if (records.empty ())
    throw std::invalid_argument ("empirical stats need at least one record");
  DelayStats s;
  std::vector<int64_t> delays;
  delays.reserve (records.size ());
  for (const auto &r : records)
    {
      if (r.Dropped ())
        ++s.dropped;
      else
        delays.push_back (r.appliedDelayUs);
    }
  s.delivered = delays.size ();
  s.lossFraction = static_cast<double> (s.dropped) / static_cast<double> (records.size ());
  if (delays.empty ())
    return s;
  long double sum = 0;
  for (int64_t d : delays)
    sum += d;
  s.meanUs = static_cast<double> (sum / delays.size ());
  std::sort (delays.begin (), delays.end ());
  s.minUs = static_cast<double> (delays.front ());
  s.maxUs = static_cast<double> (delays.back ());
  // nearest-rank percentile
  auto rank = static_cast<std::size_t> (std::ceil (0.99 * static_cast<double> (delays.size ())));
  s.p99Us = static_cast<double> (delays[std::max<std::size_t> (rank, 1) - 1]);
  return s;
}

void
WriteDeliveryTraceCsv (std::ostream &os, std::span<const DeliveryRecord> records)
{
  os << "frame_id,sent_us,delivered_us,delay_us,dropped\n";
  for (const auto &r : records)
    {
      os << r.frameId << ',' << r.sent.Us () << ',';
      if (r.delivered)
        os << r.delivered->Us () << ',' << r.appliedDelayUs << ",0\n";
      else
        os << ",,1\n";
    }
}

} // namespace underlayer
