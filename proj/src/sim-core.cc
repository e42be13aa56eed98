#include "underlayer/sim-core.h"

#include <cmath>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

namespace underlayer {

std::ostream &
operator<< (std::ostream &os, SimTime t)
{
  return os << t.Us () << "us";
}

void
WriteTraceRecord (std::ostream &os, const TraceRecord &rec)
{
  nlohmann::ordered_json j;
  j["t_us"] = rec.time.Us ();
  j["component"] = rec.component;
  j["kind"] = rec.kind;
  j["details"] = rec.details;
  os << j.dump () << '\n';
}

uint64_t
SplitMix64 (uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t
DeriveSeed (uint64_t base, std::initializer_list<uint64_t> parts)
{
  uint64_t h = SplitMix64 (base);
  for (uint64_t p : parts)
    h = SplitMix64 (h ^ SplitMix64 (p + 0x632be59bd9b4e019ULL));
  return h;
}

RngStream::RngStream (uint64_t seed, uint64_t streamId)
  : m_seed (seed),
    m_streamId (streamId),
    m_engine (SplitMix64 (SplitMix64 (seed) ^ SplitMix64 (streamId * 0xd1342543de82ef95ULL + 1)))
{
}

uint64_t
RngStream::NextU64 ()
{
  return m_engine ();
}

double
RngStream::Uniform01 ()
{
  return static_cast<double> (NextU64 () >> 11) * 0x1.0p-53;
}

double
RngStream::Uniform (double lo, double hi)
{
  return lo + (hi - lo) * Uniform01 ();
}

double
RngStream::StandardNormal ()
{
  if (m_haveSpare)
    {
      m_haveSpare = false;
      return m_spare;
    }
  // Box-Muller; 1 - U keeps the log argument in (0, 1].
  double u1 = 1.0 - Uniform01 ();
  double u2 = Uniform01 ();
  double r = std::sqrt (-2.0 * std::log (u1));
  double a = 2.0 * std::numbers::pi * u2;
  m_spare = r * std::sin (a);
  m_haveSpare = true;
  return r * std::cos (a);
}

bool
RngStream::Bernoulli (double p)
{
  if (p <= 0.0)
    return false;
  if (p >= 1.0)
    return true;
  return Uniform01 () < p;
}

EventId
Simulator::Schedule (SimTime at, std::string component, std::string kind, Handler handler,
                     std::string details)
{
  if (at < m_now)
    {
      throw CausalityError ("causality violation: event '" + kind + "' scheduled at "
                            + std::to_string (at.Us ()) + "us, clock is at "
                            + std::to_string (m_now.Us ()) + "us");
    }
  auto e = std::make_shared<Entry> ();
  e->time = at;
  e->seq = m_nextSeq++;
  e->component = std::move (component);
  e->kind = std::move (kind);
  e->details = std::move (details);
  e->handler = std::move (handler);
  m_live.insert (e->seq);
  EventId id = e->seq;
  m_queue.push (std::move (e));
  return id;
}

bool
Simulator::Cancel (EventId id)
{
  if (m_live.erase (id) == 0)
    return false;
  m_cancelled.insert (id);
  return true;
}

RunSummary
Simulator::RunUntil (SimTime end)
{
  uint64_t before = m_processed;
  m_stopRequested = false;
  while (!m_queue.empty ())
    {
      const auto &top = m_queue.top ();
      if (top->time > end)
        break;
      std::shared_ptr<Entry> e = top;
      m_queue.pop ();
      if (m_cancelled.erase (e->seq) != 0)
        continue;
      m_live.erase (e->seq);
      m_now = e->time;
      ++m_processed;
      if (m_trace)
        m_trace (TraceRecord{e->time, e->component, e->kind, e->details});
      e->handler ();
      if (m_stopRequested)
        {
          m_stopped = true;
          return RunSummary{m_processed - before, m_now};
        }
    }
  if (end > m_now)
    m_now = end;
  return RunSummary{m_processed - before, m_now};
}

} // namespace underlayer
