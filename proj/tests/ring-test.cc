#include "oracles.h"

#include "underlayer/ring.h"

#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

using namespace underlayer;

namespace {

Frame
Mk (uint64_t id, std::string src, std::string dst, FrameClass cls = FrameClass::Urllc)
{
  Frame f;
  f.id = id;
  f.source = std::move (src);
  f.destination = std::move (dst);
  f.cls = cls;
  return f;
}

RingConfig
Cfg (std::size_t n, int64_t slot, int64_t tx)
{
  RingConfig c;
  c.id = "t";
  for (std::size_t i = 0; i < n; ++i)
    c.nodes.push_back ("n" + std::to_string (i));
  c.slotTimeUs = slot;
  c.txTimeUs = tx;
  return c;
}

} // namespace

TEST_CASE ("ring configuration limits")
{
  CHECK_NOTHROW (RingConfig::Urllc ().Validate ());
  CHECK (RingConfig::Urllc ().NodeCount () == 2);
  CHECK_NOTHROW (RingConfig::Sensor ().Validate ());
  CHECK (RingConfig::Sensor ().NodeCount () == 8);
  CHECK_THROWS_AS (Cfg (9, 250, 50).Validate (), ConfigError);
  CHECK_THROWS_AS (Cfg (1, 250, 50).Validate (), ConfigError);
  auto dup = Cfg (3, 100, 10);
  dup.nodes[2] = dup.nodes[0];
  CHECK_THROWS_AS (dup.Validate (), ConfigError);
  CHECK_THROWS_AS (Cfg (2, 100, 101).Validate (), ConfigError);
  Simulator sim;
  CHECK_THROWS_AS (Ring (sim, Cfg (9, 10, 1), 1), ConfigError);
}

TEST_CASE ("worst-case access latency matches the exhaustive phase search")
{
  CHECK (WorstCaseAccessLatencyUs (RingConfig::Urllc ()) == 900);
  CHECK (oracle::ExhaustiveWorstCase (RingConfig::Urllc ()) == 900);
  CHECK (WorstCaseAccessLatencyUs (Cfg (8, 250, 50)) == 1800);
  CHECK (oracle::ExhaustiveWorstCase (Cfg (8, 250, 50)) == 1800);
  CHECK (WorstCaseAccessLatencyUs (Cfg (2, 0, 20)) == 20);
  CHECK (oracle::ExhaustiveWorstCase (Cfg (2, 0, 20)) == 20);
  CHECK (WorstCaseAccessLatencyUs (RingConfig::Urllc ()) < 2000);
  for (std::size_t n = 2; n <= 8; ++n)
    CHECK (WorstCaseAccessLatencyUs (Cfg (n, 120, 30)) == oracle::ExhaustiveWorstCase (Cfg (n, 120, 30)));
}

TEST_CASE ("token holder is a pure function of time")
{
  Simulator sim;
  Ring r (sim, Cfg (3, 100, 10), 1);
  CHECK (r.TokenHolderAt (SimTime (0)) == 0);
  CHECK (r.TokenHolderAt (SimTime (99)) == 0);
  CHECK (r.TokenHolderAt (SimTime (100)) == 1);
  CHECK (r.TokenHolderAt (SimTime (250)) == 2);
  CHECK (r.TokenHolderAt (SimTime (300)) == 0);
}

TEST_CASE ("frame at the token holder goes out in the current slot")
{
  Simulator sim;
  Ring r (sim, RingConfig::Urllc (), 1);
  std::vector<SimTime> got;
  r.SetDeliveryHandler ([&] (const Frame &, SimTime t) { got.push_back (t); });
  sim.Schedule (SimTime (100), "t", "enq", [&] { r.Enqueue ("cnc", Mk (1, "cnc", "fpga")); });
  sim.RunUntil (SimTime (5000));
  REQUIRE (got.size () == 1);
  CHECK (got[0] == SimTime (200));
}

TEST_CASE ("frame arriving right after the token left waits one slot")
{
  Simulator sim;
  Ring r (sim, RingConfig::Urllc (), 1);
  SimTime headSince, done;
  r.SetAccessObserver ([&] (const Frame &, SimTime h, SimTime d) {
    headSince = h;
    done = d;
  });
  sim.Schedule (SimTime (800), "t", "enq", [&] { r.Enqueue ("cnc", Mk (1, "cnc", "fpga")); });
  sim.RunUntil (SimTime (5000));
  CHECK ((done - headSince).Us () == 800 + 100);
  CHECK (done == SimTime (1700));
}

TEST_CASE ("17th frame into a 16-deep queue is dropped and counted")
{
  Simulator sim;
  Ring r (sim, RingConfig::Urllc (), 1);
  int accepted = 0;
  sim.Schedule (SimTime (900), "t", "burst", [&] {
    for (int i = 0; i < 17; ++i)
      accepted += r.Enqueue ("cnc", Mk (i, "cnc", "fpga")).has_value ();
  });
  sim.RunUntil (SimTime (1000));
  CHECK (accepted == 16);
  CHECK (r.Stats ().overflowDrops == 1);
  CHECK (r.Stats ().enqueued == 17);
}

TEST_CASE ("unknown node is a not-found error")
{
  Simulator sim;
  Ring r (sim, RingConfig::Urllc (), 1);
  CHECK_THROWS_AS (r.Enqueue ("nobody", Mk (1, "nobody", "cnc")), NotFoundError);
}

TEST_CASE ("degenerate ring transmits immediately")
{
  Simulator sim;
  Ring r (sim, Cfg (2, 0, 20), 1);
  SimTime at;
  r.SetDeliveryHandler ([&] (const Frame &, SimTime t) { at = t; });
  sim.Schedule (SimTime (12345), "t", "enq", [&] { r.Enqueue ("n1", Mk (1, "n1", "n0")); });
  sim.RunUntil (SimTime (20000));
  CHECK (at == SimTime (12365));
}

TEST_CASE ("property: idle-node access latency matches the token walk")
{
  std::mt19937_64 g (5);
  for (auto cfg : {RingConfig::Urllc (), RingConfig::Sensor (), Cfg (5, 333, 77)})
    {
      Simulator sim;
      Ring r (sim, cfg, 1);
      std::map<uint64_t, int64_t> expected;
      std::vector<std::string> bad;
      r.SetAccessObserver ([&] (const Frame &f, SimTime h, SimTime d) {
        if ((d - h).Us () != expected[f.id])
          bad.push_back (std::to_string (f.id));
      });
      const int64_t rotation = cfg.slotTimeUs * static_cast<int64_t> (cfg.NodeCount ());
      // one frame every 3 rotations so queues are idle at each enqueue
      for (uint64_t k = 0; k < 2000; ++k)
        {
          std::size_t node = g () % cfg.NodeCount ();
          int64_t t = static_cast<int64_t> (k) * 3 * rotation + static_cast<int64_t> (g () % rotation);
          expected[k] = oracle::IdleAccessLatency (cfg, node, t);
          sim.Schedule (SimTime (t), "t", "enq", [&r, &cfg, node, k] {
            r.Enqueue (cfg.nodes[node], Mk (k, cfg.nodes[node], cfg.nodes[(node + 1) % cfg.NodeCount ()]));
          });
        }
      sim.RunUntil (SimTime::Max ());
      CHECK (bad.empty ());
      CHECK (r.Stats ().maxAccessLatencyUs <= WorstCaseAccessLatencyUs (cfg));
    }
}

TEST_CASE ("property: loaded ring keeps head-of-queue latency bounded, conserves frames, keeps fifo")
{
  std::mt19937_64 g (9);
  auto cfg = RingConfig::Sensor ();
  Simulator sim;
  Ring r (sim, cfg, 2);
  std::map<std::pair<std::string, std::string>, uint64_t> lastSeq;
  bool fifo = true;
  r.SetDeliveryHandler ([&] (const Frame &f, SimTime) {
    auto key = std::make_pair (f.source, f.destination);
    if (lastSeq.count (key) && lastSeq[key] >= f.seq)
      fifo = false;
    lastSeq[key] = f.seq;
  });
  bool conserved = true;
  uint64_t seq = 0;
  for (int k = 0; k < 60000; ++k)
    {
      int64_t t = static_cast<int64_t> (g () % 1'000'000);
      std::size_t node = g () % cfg.NodeCount ();
      std::size_t dst = (node + 1 + g () % (cfg.NodeCount () - 1)) % cfg.NodeCount ();
      sim.Schedule (SimTime (t), "t", "enq", [&, node, dst] {
        Frame f = Mk (0, cfg.nodes[node], cfg.nodes[dst], FrameClass::Sensor);
        f.seq = ++seq;
        r.Enqueue (cfg.nodes[node], f);
        const auto &s = r.Stats ();
        conserved &= s.enqueued == s.delivered + s.Dropped () + r.InQueue ();
      });
    }
  sim.RunUntil (SimTime::Max ());
  const auto &s = r.Stats ();
  CHECK (conserved);
  CHECK (fifo);
  CHECK (s.enqueued == s.delivered + s.Dropped ());
  CHECK (s.maxAccessLatencyUs <= WorstCaseAccessLatencyUs (cfg));
  CHECK (s.overflowDrops > 0); // the load really was heavy
}

TEST_CASE ("loss rate one drops every frame")
{
  auto cfg = RingConfig::Urllc ();
  cfg.lossRate = 1.0;
  Simulator sim;
  Ring r (sim, cfg, 1);
  int delivered = 0;
  r.SetDeliveryHandler ([&] (const Frame &, SimTime) { ++delivered; });
  for (int i = 0; i < 10; ++i)
    sim.Schedule (SimTime (i * 1000), "t", "enq", [&r, i] { r.Enqueue ("cnc", Mk (i, "cnc", "fpga")); });
  sim.RunUntil (SimTime (100000));
  CHECK (delivered == 0);
  CHECK (r.Stats ().lossDrops == 10);
}

TEST_CASE ("master node bridges non-urllc traffic both ways")
{
  Simulator sim;
  Ring urllc (sim, RingConfig::Urllc (), 1);
  Ring sensor (sim, RingConfig::Sensor (), 2);
  MasterNode master (sim, "cnc", urllc, sensor, ChannelProfile::FromMillis (10.0, 0.0), 3);

  std::vector<std::pair<uint64_t, SimTime>> overlay;
  master.SetOverlayHandler ([&] (const Frame &f, SimTime t) { overlay.emplace_back (f.id, t); });

  sim.Schedule (SimTime (1000), "t", "bridge", [&] {
    CHECK (master.BridgeFrame (Mk (7, "sensor-3", "cnc", FrameClass::Sensor), sim.Now ()));
    CHECK_FALSE (master.BridgeFrame (Mk (8, "fpga", "cnc", FrameClass::Urllc), sim.Now ()));
  });

  std::vector<Frame> intoSensorRing;
  sensor.SetDeliveryHandler ([&] (const Frame &f, SimTime) { intoSensorRing.push_back (f); });
  sim.Schedule (SimTime (2000), "t", "cfg", [&] {
    CHECK (master.DeliverFromOverlay (Mk (9, "overlay", "sensor-5", FrameClass::Sensor), sim.Now ()));
  });
  sim.RunUntil (SimTime (50000));

  REQUIRE (overlay.size () == 1);
  CHECK (overlay[0].first == 7);
  CHECK (overlay[0].second == SimTime (11000));
  CHECK (master.Bridged () == 1);
  CHECK (master.Terminated () == 1);
  REQUIRE (intoSensorRing.size () == 1);
  CHECK (intoSensorRing[0].cls == FrameClass::Bridged);
  CHECK (intoSensorRing[0].destination == "sensor-5");
  CHECK (intoSensorRing[0].source == "cnc");

  CHECK_THROWS_AS (master.DeliverFromOverlay (Mk (10, "overlay", "nowhere"), SimTime (50000)), NotFoundError);
}

TEST_CASE ("master must belong to both rings")
{
  Simulator sim;
  Ring urllc (sim, RingConfig::Urllc (), 1);
  Ring sensor (sim, RingConfig::Sensor (), 2);
  CHECK_THROWS_AS (MasterNode (sim, "fpga", urllc, sensor, ChannelProfile{}, 1), ConfigError);
}

TEST_CASE ("ring stats csv")
{
  Simulator sim;
  Ring r (sim, RingConfig::Urllc (), 1);
  sim.Schedule (SimTime (0), "t", "enq", [&] { r.Enqueue ("fpga", Mk (1, "fpga", "cnc")); });
  sim.RunUntil (SimTime (5000));
  std::ostringstream os;
  WriteRingStatsCsv (os, r.Config (), r.Stats ());
  CHECK (os.str ().find ("urllc,1,1,0,0,900") != std::string::npos);
}
