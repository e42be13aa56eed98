#include "underlayer/ring.h"

#include <algorithm>
#include <ostream>
#include <set>

namespace underlayer {

void
RingConfig::Validate () const
{
  if (nodes.size () < 2 || nodes.size () > kMaxRingNodes)
    throw ConfigError ("ring '" + id + "' needs 2 to 8 nodes, got " + std::to_string (nodes.size ()));
  std::set<std::string> unique (nodes.begin (), nodes.end ());
  if (unique.size () != nodes.size ())
    throw ConfigError ("ring '" + id + "' lists a node twice");
  if (slotTimeUs < 0 || txTimeUs < 0)
    throw ConfigError ("ring '" + id + "' timing must be non-negative");
  if (slotTimeUs > 0 && txTimeUs > slotTimeUs)
    throw ConfigError ("ring '" + id + "' transmit time exceeds the slot time");
  if (queueDepth == 0)
    throw ConfigError ("ring '" + id + "' queue depth must be positive");
  if (!(lossRate >= 0.0 && lossRate <= 1.0))
    throw ConfigError ("ring '" + id + "' loss rate must lie in [0, 1]");
}

RingConfig
RingConfig::Urllc ()
{
  RingConfig c;
  c.id = "urllc";
  c.nodes = {"cnc", "fpga"};
  c.slotTimeUs = 800;
  c.txTimeUs = 100;
  return c;
}

RingConfig
RingConfig::Sensor ()
{
  RingConfig c;
  c.id = "sensor";
  c.nodes = {"cnc"};
  for (int i = 1; i <= 7; ++i)
    c.nodes.push_back ("sensor-" + std::to_string (i));
  c.slotTimeUs = 250;
  c.txTimeUs = 50;
  return c;
}

int64_t
WorstCaseAccessLatencyUs (const RingConfig &config)
{
  config.Validate ();
  return static_cast<int64_t> (config.NodeCount () - 1) * config.slotTimeUs + config.txTimeUs;
}

std::string
ToString (FrameClass c)
{
  switch (c)
    {
    case FrameClass::Urllc:
      return "urllc";
    case FrameClass::Sensor:
      return "sensor";
    case FrameClass::Bridged:
      return "bridged";
    }
  return "?";
}

Ring::Ring (Simulator &sim, RingConfig config, uint64_t seed)
  : m_sim (sim), m_config (std::move (config)), m_lossRng (seed, stream::kRingLoss)
{
  m_config.Validate ();
  m_nodes.resize (m_config.NodeCount ());
}

bool
Ring::HasNode (const std::string &node) const
{
  return std::find (m_config.nodes.begin (), m_config.nodes.end (), node) != m_config.nodes.end ();
}

std::size_t
Ring::NodeIndex (const std::string &node) const
{
  auto it = std::find (m_config.nodes.begin (), m_config.nodes.end (), node);
  if (it == m_config.nodes.end ())
    throw NotFoundError ("node '" + node + "' is not on ring '" + m_config.id + "'");
  return static_cast<std::size_t> (it - m_config.nodes.begin ());
}

std::size_t
Ring::TokenHolderAt (SimTime t) const
{
  if (m_config.slotTimeUs == 0)
    return 0;
  return static_cast<std::size_t> ((t.Us () / m_config.slotTimeUs) % static_cast<int64_t> (m_nodes.size ()));
}

SimTime
Ring::NextTransmitOpportunity (std::size_t node, SimTime t) const
{
  const int64_t slot = m_config.slotTimeUs;
  if (slot == 0)
    return t; // degenerate ring: medium always available
  const int64_t n = static_cast<int64_t> (m_nodes.size ());
  const int64_t rotation = n * slot;
  const int64_t own = static_cast<int64_t> (node) * slot;
  int64_t base = (t.Us () / rotation) * rotation;
  int64_t start = base + own;
  if (t.Us () >= start && t.Us () < start + slot)
    return t;
  if (t.Us () >= start + slot)
    start += rotation;
  return SimTime (start);
}

std::optional<std::size_t>
Ring::Enqueue (const std::string &node, Frame frame)
{
  std::size_t idx = NodeIndex (node);
  auto &st = m_nodes[idx];
  ++m_stats.enqueued;
  if (st.queue.size () >= m_config.queueDepth)
    {
      ++m_stats.overflowDrops;
      return std::nullopt;
    }
  frame.enqueued = m_sim.Now ();
  st.queue.push_back (std::move (frame));
  std::size_t pos = st.queue.size () - 1;
  if (!st.transmitting)
    {
      st.headSince = m_sim.Now ();
      StartHead (idx);
    }
  return pos;
}

void
Ring::StartHead (std::size_t node)
{
  auto &st = m_nodes[node];
  st.transmitting = true;
  SimTime start = NextTransmitOpportunity (node, m_sim.Now ());
  SimTime done = start + SimTime (m_config.txTimeUs);
  m_sim.Schedule (done, m_config.id, "ring-tx", [this, node] { Finish (node); });
}

void
Ring::Finish (std::size_t node)
{
  auto &st = m_nodes[node];
  Frame f = std::move (st.queue.front ());
  st.queue.pop_front ();
  SimTime now = m_sim.Now ();
  int64_t access = (now - st.headSince).Us ();
  m_stats.maxAccessLatencyUs = std::max (m_stats.maxAccessLatencyUs, access);
  auto bucket = static_cast<std::size_t> (access / m_stats.bucketWidthUs);
  if (m_stats.histogram.size () <= bucket)
    m_stats.histogram.resize (bucket + 1, 0);
  ++m_stats.histogram[bucket];
  if (m_observer)
    m_observer (f, st.headSince, now);

  bool lost = m_lossRng.Bernoulli (m_config.lossRate);
  if (lost)
    ++m_stats.lossDrops;
  else
    ++m_stats.delivered;

  st.transmitting = false;
  if (!st.queue.empty ())
    {
      st.headSince = now;
      StartHead (node);
    }
  if (!lost && m_onDeliver)
    m_onDeliver (f, now);
}

std::size_t
Ring::InQueue () const
{
  std::size_t n = 0;
  for (const auto &st : m_nodes)
    n += st.queue.size ();
  return n;
}

MasterNode::MasterNode (Simulator &sim, std::string nodeId, Ring &urllcRing, Ring &sensorRing,
                        ChannelProfile overlayUplink, uint64_t seed)
  : m_sim (sim),
    m_id (std::move (nodeId)),
    m_urllc (urllcRing),
    m_sensor (sensorRing),
    m_uplink (overlayUplink),
    m_rng (seed, stream::kOverlay)
{
  if (!m_urllc.HasNode (m_id) || !m_sensor.HasNode (m_id))
    throw ConfigError ("master node '" + m_id + "' must be a member of both underlayer rings");
}

bool
MasterNode::BridgeFrame (const Frame &frame, SimTime now)
{
  if (frame.cls == FrameClass::Urllc)
    {
      ++m_terminated;
      return false;
    }
  auto rec = m_uplink.Transmit (frame.id, now, m_rng);
  ++m_bridged;
  if (rec.delivered)
    {
      Frame copy = frame;
      m_sim.Schedule (*rec.delivered, "master", "overlay-rx", [this, copy] {
        if (m_onOverlay)
          m_onOverlay (copy, m_sim.Now ());
      });
    }
  return true;
}

bool
MasterNode::DeliverFromOverlay (Frame frame, SimTime now)
{
  (void) now;
  frame.cls = FrameClass::Bridged;
  frame.source = m_id;
  Ring &ring = m_urllc.HasNode (frame.destination) ? m_urllc : m_sensor;
  if (!ring.HasNode (frame.destination))
    throw NotFoundError ("no underlayer ring holds node '" + frame.destination + "'");
  return ring.Enqueue (m_id, std::move (frame)).has_value ();
}

void
WriteRingStatsCsv (std::ostream &os, const RingConfig &config, const RingStats &stats)
{
  os << "ring,enqueued,delivered,overflow_drops,loss_drops,max_access_us\n";
  os << config.id << ',' << stats.enqueued << ',' << stats.delivered << ',' << stats.overflowDrops
     << ',' << stats.lossDrops << ',' << stats.maxAccessLatencyUs << "\n";
  os << "bucket_low_us,bucket_high_us,count\n";
  for (std::size_t i = 0; i < stats.histogram.size (); ++i)
    os << i * stats.bucketWidthUs << ',' << (i + 1) * stats.bucketWidthUs << ','
       << stats.histogram[i] << "\n";
}

} // namespace underlayer
