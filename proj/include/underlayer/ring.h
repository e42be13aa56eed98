#ifndef UNDERLAYER_RING_H
#define UNDERLAYER_RING_H

#include "underlayer/channel.h"
#include "underlayer/errors.h"
#include "underlayer/sim-core.h"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace underlayer {

inline constexpr std::size_t kMaxRingNodes = 8;

/**
 * Slot-level model of a deterministic wireless token ring. The token
 * visits the nodes in configured order, holding `slotTimeUs` at each one
 * (handoff overhead included); the holder is a pure function of time.
 */
struct RingConfig
{
  std::string id = "ring";
  std::vector<std::string> nodes;
  int64_t slotTimeUs = 800;
  int64_t txTimeUs = 100;
  std::size_t queueDepth = 16;
  double lossRate = 1e-9;

  void Validate () const;
  std::size_t NodeCount () const { return nodes.size (); }

  /// CNC and FPGA endpoints, sized so the bound stays below 2 ms.
  static RingConfig Urllc ();
  /// Master plus seven sensor nodes.
  static RingConfig Sensor ();
};

/// Longest wait from a frame reaching the head of its queue to its delivery.
int64_t WorstCaseAccessLatencyUs (const RingConfig &config);

enum class FrameClass
{
  Urllc,
  Sensor,
  Bridged
};

std::string ToString (FrameClass c);

struct Frame
{
  uint64_t id = 0;
  std::string source;
  std::string destination;
  uint32_t payloadBytes = 80;
  SimTime enqueued;
  FrameClass cls = FrameClass::Urllc;
  // application payload
  uint64_t seq = 0;
  double value = 0.0;
};

struct RingStats
{
  uint64_t enqueued = 0;
  uint64_t delivered = 0;
  uint64_t overflowDrops = 0;
  uint64_t lossDrops = 0;
  int64_t maxAccessLatencyUs = 0;
  int64_t bucketWidthUs = 100;
  /// Access-latency histogram, bucket i covers [i*w, (i+1)*w).
  std::vector<uint64_t> histogram;

  uint64_t Dropped () const { return overflowDrops + lossDrops; }
};

class Ring
{
public:
  using DeliveryHandler = std::function<void (const Frame &, SimTime)>;

  Ring (Simulator &sim, RingConfig config, uint64_t seed);
  Ring (const Ring &) = delete;
  Ring &operator= (const Ring &) = delete;

  const RingConfig &Config () const { return m_config; }
  bool HasNode (const std::string &node) const;
  std::size_t NodeIndex (const std::string &node) const;

  /// Index of the node holding the token at `t`.
  std::size_t TokenHolderAt (SimTime t) const;
  /// Earliest time >= t at which `node` may start a transmission.
  SimTime NextTransmitOpportunity (std::size_t node, SimTime t) const;

  /**
   * Appends the frame to the node's transmit queue. Returns the queue
   * position (0 = head) or nullopt when the bounded queue overflowed and
   * the frame was dropped.
   */
  std::optional<std::size_t> Enqueue (const std::string &node, Frame frame);

  void SetDeliveryHandler (DeliveryHandler h) { m_onDeliver = std::move (h); }
  /// Called with (frame, head-of-queue time, delivery time) for every frame that leaves the air.
  void SetAccessObserver (std::function<void (const Frame &, SimTime, SimTime)> obs)
  {
    m_observer = std::move (obs);
  }

  const RingStats &Stats () const { return m_stats; }
  std::size_t InQueue () const;

private:
  struct NodeState
  {
    std::deque<Frame> queue;
    bool transmitting = false;
    SimTime headSince;
  };

  void StartHead (std::size_t node);
  void Finish (std::size_t node);

  Simulator &m_sim;
  RingConfig m_config;
  RngStream m_lossRng;
  std::vector<NodeState> m_nodes;
  RingStats m_stats;
  DeliveryHandler m_onDeliver;
  std::function<void (const Frame &, SimTime, SimTime)> m_observer;
};

/**
 * Gateway that is a member of both underlayer rings and relays
 * non-URLLC traffic to the overlay network, and configuration commands
 * from the overlay back into a ring.
 */
class MasterNode
{
public:
  using OverlayHandler = std::function<void (const Frame &, SimTime)>;

  MasterNode (Simulator &sim, std::string nodeId, Ring &urllcRing, Ring &sensorRing,
              ChannelProfile overlayUplink, uint64_t seed);

  const std::string &Id () const { return m_id; }

  /**
   * Forwards a frame that reached the master onto the overlay uplink.
   * URLLC frames terminate in their ring and are not bridged (returns false).
   */
  bool BridgeFrame (const Frame &frame, SimTime now);

  /// Injects a command received from the overlay into the ring holding `destination`.
  bool DeliverFromOverlay (Frame frame, SimTime now);

  void SetOverlayHandler (OverlayHandler h) { m_onOverlay = std::move (h); }

  uint64_t Bridged () const { return m_bridged; }
  uint64_t Terminated () const { return m_terminated; }

private:
  Simulator &m_sim;
  std::string m_id;
  Ring &m_urllc;
  Ring &m_sensor;
  Channel m_uplink;
  RngStream m_rng;
  OverlayHandler m_onOverlay;
  uint64_t m_bridged = 0;
  uint64_t m_terminated = 0;
};

void WriteRingStatsCsv (std::ostream &os, const RingConfig &config, const RingStats &stats);

} // namespace underlayer

#endif
