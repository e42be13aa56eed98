#include "underlayer/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace underlayer {

namespace {

void
CheckAxis (const std::vector<double> &values, const char *name)
{
  if (values.empty ())
    throw ConfigError (std::string ("sweep ") + name + " list is empty");
  for (std::size_t i = 0; i < values.size (); ++i)
    {
      if (!std::isfinite (values[i]) || values[i] < 0.0)
        throw ConfigError (std::string ("sweep ") + name + " values must be finite and non-negative");
      if (i > 0 && !(values[i] > values[i - 1]))
        throw ConfigError (std::string ("sweep ") + name + " values must be strictly increasing");
    }
}

} // namespace

void
SweepSpec::Validate () const
{
  CheckAxis (latenciesMs, "latency");
  CheckAxis (jittersMs, "jitter");
  if (seedsPerCell < 1)
    throw ConfigError ("seeds per cell must be at least 1");
  if (!(trialLengthS > 0.0) || !std::isfinite (trialLengthS))
    throw ConfigError ("trial length must be positive");
}

std::vector<uint64_t>
SweepSpec::Seeds () const
{
  std::vector<uint64_t> out;
  for (int k = 0; k < seedsPerCell; ++k)
    out.push_back (DeriveSeed (baseSeed, {static_cast<uint64_t> (k)}));
  return out;
}

std::shared_ptr<const Trajectory>
TrialEnvironment::MakeTrajectory () const
{
  if (trajectoryFile.empty ())
    return std::make_shared<TrapezoidTrajectory> (trapezoid);
  std::ifstream in (trajectoryFile);
  if (!in)
    throw ConfigError ("cannot open trajectory file '" + trajectoryFile + "'");
  return std::make_shared<CsvTrajectory> (CsvTrajectory::Parse (in));
}

TrialSetup
MakeTrialSetup (const TrialEnvironment &env, const LoopConfig &loop, double latencyMs, double jitterMs,
                double lengthS, uint64_t seed)
{
  ChannelProfile ch = ChannelProfile::FromMillis (latencyMs, jitterMs, env.lossRate);
  ch.distribution = env.distribution;
  TrialSetup s = TrialSetup::Symmetric (loop, ch, SimTime::Seconds (lengthS), seed);
  s.controlRing = env.controlRing;
  s.sensorsEnabled = env.sensorsEnabled;
  s.trajectory = env.MakeTrajectory ();
  return s;
}

ProfileResult
Summarize (const TrialVerdict &v)
{
  return {v.outcome, v.cause, v.maxFollowingErrorMm, v.durationSurvived.Us (), v.mode};
}

CellClass
Classify (const std::vector<SeedDetail> &seeds)
{
  auto allPass = [&seeds] (auto member) {
    return std::all_of (seeds.begin (), seeds.end (),
                        [member] (const SeedDetail &d) { return (d.*member).outcome == Outcome::Pass; });
  };
  if (allPass (&SeedDetail::standard))
    return CellClass::Pass;
  if (allPass (&SeedDetail::adapted))
    return CellClass::PassWithAdaptation;
  return CellClass::Fail;
}

std::vector<CellClass>
SweepMatrix::Classes () const
{
  std::vector<CellClass> out;
  for (const auto &c : cells)
    out.push_back (c.cls);
  return out;
}

std::vector<std::size_t>
EvaluationSequence (const SweepSpec &spec, const SweepOptions &options)
{
  const std::size_t nl = spec.latenciesMs.size ();
  std::vector<std::size_t> seq (spec.CellCount ());
  std::iota (seq.begin (), seq.end (), 0);
  switch (options.order)
    {
    case EvaluationOrder::Ascending:
      break;
    case EvaluationOrder::DescendingSeverity:
      // highest latency+jitter combination first, as the lab did
      std::stable_sort (seq.begin (), seq.end (), [&] (std::size_t a, std::size_t b) {
        double sa = spec.latenciesMs[a % nl] + spec.jittersMs[a / nl];
        double sb = spec.latenciesMs[b % nl] + spec.jittersMs[b / nl];
        return sa > sb;
      });
      break;
    case EvaluationOrder::Shuffled:
      {
        std::mt19937_64 g (options.shuffleSeed);
        std::shuffle (seq.begin (), seq.end (), g);
        break;
      }
    }
  return seq;
}

SweepMatrix
RunSweep (const SweepSpec &spec, const LoopConfigPair &loops, const TrialEnvironment &env,
          const SweepOptions &options)
{
  spec.Validate ();
  loops.Validate ();
  env.controlRing.Validate ();
  env.MakeTrajectory (); // surface file errors before spawning workers

  SweepMatrix m;
  m.latenciesMs = spec.latenciesMs;
  m.jittersMs = spec.jittersMs;
  m.cells.resize (spec.CellCount ());
  const auto seeds = spec.Seeds ();
  const auto order = EvaluationSequence (spec, options);
  const std::size_t nl = spec.latenciesMs.size ();

  auto evaluate = [&] (std::size_t idx) {
    CellVerdict cell;
    cell.latencyMs = spec.latenciesMs[idx % nl];
    cell.jitterMs = spec.jittersMs[idx / nl];
    for (uint64_t seed : seeds)
      {
        SeedDetail d;
        d.seed = seed;
        d.standard = Summarize (RunTrial (
            MakeTrialSetup (env, loops.standard, cell.latencyMs, cell.jitterMs, spec.trialLengthS, seed)));
        d.adapted = Summarize (RunTrial (
            MakeTrialSetup (env, loops.adapted, cell.latencyMs, cell.jitterMs, spec.trialLengthS, seed)));
        cell.seeds.push_back (d);
      }
    cell.cls = Classify (cell.seeds);
    m.cells[idx] = std::move (cell);
  };

  unsigned threads = options.threads ? options.threads : std::max (1u, std::thread::hardware_concurrency ());
  threads = std::min<unsigned> (threads, static_cast<unsigned> (order.size ()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto worker = [&] {
    for (;;)
      {
        std::size_t k = next.fetch_add (1);
        if (k >= order.size ())
          return;
        try
          {
            evaluate (order[k]);
          }
        catch (...)
          {
            std::lock_guard lock (failureMutex);
            if (!failure)
              failure = std::current_exception ();
            next = order.size ();
          }
      }
  };
  if (threads <= 1)
    worker ();
  else
    {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back (worker);
      for (auto &t : pool)
        t.join ();
    }
  if (failure)
    std::rethrow_exception (failure);
  return m;
}

std::vector<CellClass>
ReferenceTable1 ()
{
  constexpr auto P = CellClass::Pass;
  constexpr auto A = CellClass::PassWithAdaptation;
  constexpr auto F = CellClass::Fail;
  // latency 0.5 1 1.5 2 3 5
  return {
      P, P, P, P, P, F, // jitter 0.05
      P, P, P, P, P, F, // 0.1
      P, P, P, P, P, F, // 0.15
      P, A, A, A, A, F, // 0.2
      F, F, F, F, F, F, // 0.3
  };
}

std::vector<MonotonicityViolation>
FindMonotonicityViolations (const SweepMatrix &m)
{
  std::vector<MonotonicityViolation> out;
  const std::size_t nj = m.jittersMs.size ();
  const std::size_t nl = m.latenciesMs.size ();
  for (std::size_t fj = 0; fj < nj; ++fj)
    for (std::size_t fl = 0; fl < nl; ++fl)
      {
        if (m.At (fj, fl).cls != CellClass::Fail)
          continue;
        for (std::size_t pj = fj; pj < nj; ++pj)
          for (std::size_t pl = fl; pl < nl; ++pl)
            if (m.At (pj, pl).cls != CellClass::Fail)
              out.push_back ({fj, fl, pj, pl});
      }
  return out;
}

CalibrationResult
CalibrateToTable1 (const HarnessConfig &config, const SweepOptions &options)
{
  SweepSpec spec = config.sweep;
  SweepSpec reference;
  if (spec.latenciesMs != reference.latenciesMs || spec.jittersMs != reference.jittersMs)
    throw ConfigError ("calibration needs the reference 6x5 latency/jitter grid");
  auto evaluate = [&] (const LoopConfigPair &pair) {
    return RunSweep (spec, pair, config.env, options).Classes ();
  };
  return Calibrate (config.calibration, config.loops, ReferenceTable1 (), evaluate);
}

} // namespace underlayer
