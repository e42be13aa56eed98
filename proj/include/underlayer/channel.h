#ifndef UNDERLAYER_CHANNEL_H
#define UNDERLAYER_CHANNEL_H

#include "underlayer/sim-core.h"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace underlayer {

enum class JitterDistribution
{
  Uniform,
  TruncatedNormal
};

std::string ToString (JitterDistribution d);
JitterDistribution ParseJitterDistribution (const std::string &s);

/**
 * Delay/jitter/loss impairment applied to every frame on one direction of
 * a link. Jitter is the half-width of the symmetric perturbation around
 * the mean delay.
 */
struct ChannelProfile
{
  int64_t meanDelayUs = 0;
  int64_t jitterUs = 0;
  JitterDistribution distribution = JitterDistribution::Uniform;
  double lossRate = 0.0;
  bool reorderAllowed = false;

  static ChannelProfile FromMillis (double meanMs, double jitterMs, double lossRate = 0.0)
  {
    ChannelProfile p;
    p.meanDelayUs = SimTime::Millis (meanMs).Us ();
    p.jitterUs = SimTime::Millis (jitterMs).Us ();
    p.lossRate = lossRate;
    return p;
  }

  void Validate () const;
};

struct DeliveryRecord
{
  uint64_t frameId = 0;
  SimTime sent;
  std::optional<SimTime> delivered;
  int64_t appliedDelayUs = 0;

  bool Dropped () const { return !delivered.has_value (); }
};

/**
 * One direction of an impaired link. Owns the FIFO watermark used when
 * reordering is disallowed; the random stream is supplied by the caller.
 */
class Channel
{
public:
  explicit Channel (ChannelProfile profile);

  const ChannelProfile &Profile () const { return m_profile; }

  DeliveryRecord Transmit (uint64_t frameId, SimTime now, RngStream &rng);

  /// Frames sent at or after `t` are dropped (link severed).
  void SeverAt (SimTime t) { m_severedAt = t; }

private:
  int64_t DrawJitter (RngStream &rng) const;

  ChannelProfile m_profile;
  SimTime m_lastDelivery;
  std::optional<SimTime> m_severedAt;
};

struct DelayStats
{
  double meanUs = 0.0;
  double p99Us = 0.0;
  double minUs = 0.0;
  double maxUs = 0.0;
  double lossFraction = 0.0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
};

/// Summary over applied delays of delivered frames. Throws on empty input.
DelayStats EmpiricalStats (std::span<const DeliveryRecord> records);

void WriteDeliveryTraceCsv (std::ostream &os, std::span<const DeliveryRecord> records);

} // namespace underlayer

#endif
