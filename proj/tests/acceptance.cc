// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status
// is nonzero if any fails.

#include "oracles.h"

#include "underlayer/harness.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace underlayer;

namespace {

struct Check
{
  std::string name;
  std::function<std::string (std::string &)> body; // returns "" on success, else why it failed
};

const std::vector<double> kLatencies{0.5, 1, 1.5, 2, 3, 5};
const std::vector<double> kJitters{0.05, 0.1, 0.15, 0.2, 0.3};

std::string
Symbols (const std::vector<CellClass> &c)
{
  std::string s;
  for (std::size_t i = 0; i < c.size (); ++i)
    {
      s += c[i] == CellClass::Pass ? "P" : c[i] == CellClass::PassWithAdaptation ? "A" : "F";
      if (i % 6 == 5 && i + 1 < c.size ())
        s += '/';
    }
  return s;
}

LoopConfigPair g_calibrated; // filled by the first check, reused by later ones
bool g_haveCalibrated = false;

std::string
Table1 (std::string &info)
{
  HarnessConfig cfg; // 60 s trials, 3 seeds per cell
  auto cal = CalibrateToTable1 (cfg);
  if (!cal.success)
    return "no candidate matched; best " + std::to_string (cal.bestMatches) + "/30 after "
           + std::to_string (cal.candidatesTried) + " candidates";
  g_calibrated = cal.configs;
  g_haveCalibrated = true;

  // independent verification run with a different evaluation order
  auto m = RunSweep (cfg.sweep, cal.configs, cfg.env, {0, EvaluationOrder::Shuffled, 4242});
  auto got = m.Classes ();
  auto want = ReferenceTable1 ();
  int match = 0;
  for (std::size_t i = 0; i < want.size (); ++i)
    match += got[i] == want[i];
  std::ostringstream os;
  os << match << "/30 cells, candidate " << cal.candidateIndex << " (kp " << cal.configs.standard.gains.kp << "), "
     << Symbols (got);
  info = os.str ();
  return match == 30 ? "" : "verification sweep disagrees: " + Symbols (got);
}

std::string
Monotonic (std::string &info)
{
  LoopConfigPair base = g_haveCalibrated ? g_calibrated : LoopConfigPair{};
  std::mt19937_64 g (20261019);
  std::uniform_real_distribution<double> f (0.95, 1.05);
  const int configs = 12;
  std::size_t total = 0;
  std::string where;
  for (int k = 0; k < configs; ++k)
    {
      LoopConfigPair p = base;
      double kp = f (g), fe = f (g);
      for (LoopConfig *l : {&p.standard, &p.adapted})
        {
          l->gains.kp *= kp;
          l->followingErrorLimitMm *= fe;
        }
      p.standard.watchdogTimeoutUs = std::llround (p.standard.watchdogTimeoutUs * f (g));
      p.adapted.watchdogTimeoutUs = std::llround (p.adapted.watchdogTimeoutUs * f (g));
      SweepSpec s;
      s.trialLengthS = 10;
      s.baseSeed = g ();
      auto m = RunSweep (s, p, {});
      auto v = FindMonotonicityViolations (m);
      total += v.size ();
      if (!v.empty () && where.empty ())
        where = "config " + std::to_string (k) + ": " + Symbols (m.Classes ());
    }
  info = std::to_string (configs) + " perturbed configs, " + std::to_string (total) + " violations";
  return total == 0 ? "" : where;
}

std::string
RingBound (std::string &info)
{
  auto cfg = RingConfig::Urllc ();
  const int64_t bound = WorstCaseAccessLatencyUs (cfg);
  const int64_t rotation = cfg.slotTimeUs * static_cast<int64_t> (cfg.NodeCount ());
  Simulator sim;
  Ring r (sim, cfg, 7);
  std::mt19937_64 g (77);
  const uint64_t frames = 1'000'000;
  uint64_t mismatches = 0;
  std::vector<int64_t> expected (frames);
  r.SetAccessObserver ([&] (const Frame &fr, SimTime head, SimTime done) {
    mismatches += (done - head).Us () != expected[fr.id];
  });
  for (uint64_t k = 0; k < frames; ++k)
    {
      std::size_t node = g () % cfg.NodeCount ();
      int64_t t = static_cast<int64_t> (k) * 2 * rotation + static_cast<int64_t> (g () % rotation);
      expected[k] = oracle::IdleAccessLatency (cfg, node, t);
      sim.Schedule (SimTime (t), "acc", "enq", [&r, &cfg, node, k] {
        Frame fr;
        fr.id = k;
        fr.source = cfg.nodes[node];
        fr.destination = cfg.nodes[(node + 1) % cfg.NodeCount ()];
        fr.cls = FrameClass::Urllc;
        r.Enqueue (fr.source, fr);
      });
    }
  sim.RunUntil (SimTime::Max ());
  const auto &st = r.Stats ();
  int64_t worst = st.maxAccessLatencyUs;
  info = std::to_string (st.delivered) + " frames, max access " + std::to_string (worst) + " us, bound "
         + std::to_string (bound) + " us, exhaustive " + std::to_string (oracle::ExhaustiveWorstCase (cfg)) + " us";
  if (st.delivered != frames)
    return "only " + std::to_string (st.delivered) + " frames delivered";
  if (mismatches)
    return std::to_string (mismatches) + " latencies disagree with the token walk";
  if (worst > bound || worst >= 2000)
    return "bound exceeded";
  return "";
}

std::string
SpectrumSafety (std::string &info)
{
  std::size_t requests = 0, checked = 0, mismatches = 0;
  for (uint64_t seed = 1; seed <= 10000; ++seed)
    {
      auto rep = oracle::RunRandomSpectrumSequence (seed, 40);
      if (!rep.invariantError.empty ())
        return "seed " + std::to_string (seed) + ": " + rep.invariantError;
      requests += rep.requests;
      // small instances: every decision compared with the brute-force packer
      auto small = oracle::RunRandomSpectrumSequence (seed ^ 0x5bd1e995ull, 6);
      if (!small.invariantError.empty ())
        return "small seed " + std::to_string (seed) + ": " + small.invariantError;
      checked += small.decisions;
      mismatches += small.oracleMismatches + rep.oracleMismatches;
    }
  info = "10000 sequences, " + std::to_string (requests) + " requests, " + std::to_string (checked)
         + " small-instance decisions, " + std::to_string (mismatches) + " oracle mismatches";
  return mismatches == 0 ? "" : "allocator disagrees with the oracle";
}

std::string
ChannelFidelity (std::string &info)
{
  const int frames = 100000;
  double worstRel = 0;
  for (double lat : kLatencies)
    for (double jit : kJitters)
      {
        auto p = ChannelProfile::FromMillis (lat, jit);
        p.reorderAllowed = true;
        Channel ch (p);
        RngStream rng (99, stream::kCommandJitter);
        std::vector<DeliveryRecord> recs;
        recs.reserve (frames);
        for (int i = 0; i < frames; ++i)
          recs.push_back (ch.Transmit (i, SimTime (i * 1000), rng));
        auto s = EmpiricalStats (recs);
        double mean = lat * 1000, j = jit * 1000;
        double rel = std::abs (s.meanUs - mean) / mean;
        worstRel = std::max (worstRel, rel);
        std::ostringstream cell;
        cell << "(" << lat << " ms, " << jit << " ms)";
        if (rel > 0.01)
          return cell.str () + " mean " + std::to_string (s.meanUs) + " us";
        if (s.minUs < mean - j || s.maxUs > mean + j)
          return cell.str () + " delay outside mean +- jitter";
        if (s.dropped)
          return cell.str () + " dropped frames on a lossless channel";
      }
  // zero impairment must be the identity on the event timeline
  Channel id (ChannelProfile{});
  RngStream rng (1, stream::kCommandJitter);
  std::mt19937_64 g (3);
  int64_t t = 0;
  for (int i = 0; i < frames; ++i)
    {
      t += static_cast<int64_t> (g () % 1000);
      auto r = id.Transmit (i, SimTime (t), rng);
      if (!r.delivered || *r.delivered != SimTime (t))
        return "zero-impairment channel altered frame " + std::to_string (i);
    }
  std::ostringstream os;
  os << "30 profiles x " << frames << " frames, worst mean error " << worstRel * 100 << " %, identity ok";
  info = os.str ();
  return "";
}

std::string
Reproducible (std::string &info)
{
  HarnessConfig cfg;
  if (g_haveCalibrated)
    cfg.loops = g_calibrated;
  cfg.sweep.trialLengthS = 10;
  cfg.sweep.baseSeed = 8;

  RunManifest man;
  man.command = "sweep";
  man.config = cfg;
  man.seeds = cfg.sweep.Seeds ();
  auto first = RunSweep (cfg.sweep, cfg.loops, cfg.env, {0, EvaluationOrder::DescendingSeverity, 0});
  std::string csv = RenderMatrix (first, MatrixFormat::Csv);

  auto back = RunManifest::FromJson (nlohmann::json::parse (man.ToJson ().dump ()));
  auto again = RunSweep (back.config.sweep, back.config.loops, back.config.env, {1, EvaluationOrder::Ascending, 0});
  auto shuffled = RunSweep (back.config.sweep, back.config.loops, back.config.env, {0, EvaluationOrder::Shuffled, 17});
  bool bytes = RenderMatrix (again, MatrixFormat::Csv) == csv;
  bool orders = again == first && shuffled == first;
  info = std::to_string (csv.size ()) + " byte csv; manifest rerun " + (bytes ? "identical" : "differs")
         + "; descending/ascending/shuffled " + (orders ? "identical" : "differ");
  return bytes && orders ? "" : "results depend on run or order";
}

std::string
WatchdogSound (std::string &info)
{
  std::mt19937_64 g (1234);
  std::uniform_int_distribution<int64_t> cutUs (200'000, 4'500'000);
  std::uniform_int_distribution<int> li (0, 4), ji (0, 2);
  TrialEnvironment env;
  int ok = 0;
  int64_t worstMargin = INT64_MIN;
  for (int k = 0; k < 100; ++k)
    {
      LoopConfig loop = k % 2 ? (g_haveCalibrated ? g_calibrated.adapted : LoopConfig::AdaptedProfile ())
                              : (g_haveCalibrated ? g_calibrated.standard : LoopConfig::DefaultProfile ());
      double lat = kLatencies[li (g)], jit = kJitters[ji (g)];
      auto s = MakeTrialSetup (env, loop, lat, jit, 5.0, g ());
      SimTime cut (cutUs (g));
      s.severFeedbackAt = cut;
      auto v = RunTrial (s);
      SimTime limit = cut + SimTime (loop.watchdogTimeoutUs + loop.servoPeriodUs);
      worstMargin = std::max (worstMargin, (v.durationSurvived - limit).Us ());
      if (v.outcome == Outcome::Fail && v.cause == FailCause::Watchdog && v.durationSurvived <= limit)
        ++ok;
      else if (info.empty ())
        info = "trial " + std::to_string (k) + " cause " + ToString (v.cause) + " at "
               + std::to_string (v.durationSurvived.Us ()) + " us, cut " + std::to_string (cut.Us ());
    }
  std::string detail = info;
  info = std::to_string (ok) + "/100 trials flagged by the watchdog in time, latest "
         + std::to_string (-worstMargin) + " us before the limit";
  return ok == 100 ? "" : detail;
}

} // namespace

int
main ()
{
  const std::vector<Check> checks{
      {"table1-reproduction", Table1},     {"monotonic-degradation", Monotonic},
      {"ring-access-bound", RingBound},    {"spectrum-safety", SpectrumSafety},
      {"channel-fidelity", ChannelFidelity}, {"reproducibility", Reproducible},
      {"watchdog-soundness", WatchdogSound},
  };
  int failed = 0;
  for (const auto &c : checks)
    {
      auto t0 = std::chrono::steady_clock::now ();
      std::string info, why;
      try
        {
          why = c.body (info);
        }
      catch (const std::exception &e)
        {
          why = std::string ("exception: ") + e.what ();
        }
      double secs = std::chrono::duration<double> (std::chrono::steady_clock::now () - t0).count ();
      bool pass = why.empty ();
      failed += !pass;
      std::printf ("%s %s: %s%s%s (%.1f s)\n", pass ? "PASS" : "FAIL", c.name.c_str (), info.c_str (),
                   pass || info.empty () ? "" : "; ", why.c_str (), secs);
      std::fflush (stdout);
    }
  return failed ? 1 : 0;
}
