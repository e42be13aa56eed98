#ifndef UNDERLAYER_SIM_CORE_H
#define UNDERLAYER_SIM_CORE_H

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace underlayer {

/**
 * Simulation time in integer microseconds since the start of a run.
 *
 * Every time quantity of the model (sub-millisecond jitter up to hour-long
 * trials) is an exact multiple of one microsecond, so no floating point
 * clock is ever used for ordering.
 */
class SimTime
{
public:
  constexpr SimTime () = default;
  constexpr explicit SimTime (int64_t us) : m_us (us) {}

  static constexpr SimTime Micros (int64_t us) { return SimTime (us); }
  static constexpr SimTime Millis (double ms) { return SimTime (static_cast<int64_t> (ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5))); }
  static constexpr SimTime Seconds (double s) { return Millis (s * 1000.0); }
  static constexpr SimTime Max () { return SimTime (std::numeric_limits<int64_t>::max ()); }

  constexpr int64_t Us () const { return m_us; }
  constexpr double Ms () const { return static_cast<double> (m_us) / 1000.0; }
  constexpr double S () const { return static_cast<double> (m_us) / 1e6; }

  constexpr auto operator<=> (const SimTime &) const = default;
  constexpr SimTime operator+ (SimTime o) const { return SimTime (m_us + o.m_us); }
  constexpr SimTime operator- (SimTime o) const { return SimTime (m_us - o.m_us); }
  constexpr SimTime &operator+= (SimTime o) { m_us += o.m_us; return *this; }

private:
  int64_t m_us = 0;
};

std::ostream &operator<< (std::ostream &os, SimTime t);

class CausalityError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

using EventId = uint64_t;

/// One line of the structured event trace.
struct TraceRecord
{
  SimTime time;
  std::string component;
  std::string kind;
  std::string details;
};

/// Writes one `{"t_us":..,"component":..,"kind":..,"details":..}` object per line.
void WriteTraceRecord (std::ostream &os, const TraceRecord &rec);

/**
 * Independent, reproducible random stream.
 *
 * Seeded from (seed, stream id) through splitmix64 so that distinct
 * components never share draws. The conversion to doubles is done here
 * rather than through <random> distributions, whose output is not
 * specified bit-for-bit across standard library implementations.
 */
class RngStream
{
public:
  RngStream (uint64_t seed, uint64_t streamId);

  uint64_t NextU64 ();
  /// Uniform in [0, 1).
  double Uniform01 ();
  /// Uniform in [lo, hi].
  double Uniform (double lo, double hi);
  double StandardNormal ();
  bool Bernoulli (double p);

  uint64_t Seed () const { return m_seed; }
  uint64_t StreamId () const { return m_streamId; }

private:
  uint64_t m_seed;
  uint64_t m_streamId;
  std::mt19937_64 m_engine;
  bool m_haveSpare = false;
  double m_spare = 0.0;
};

uint64_t SplitMix64 (uint64_t x);

/// Combines a base seed with any number of discriminators (cell index, seed index...).
uint64_t DeriveSeed (uint64_t base, std::initializer_list<uint64_t> parts);

/// Well-known stream ids, one per stochastic component.
namespace stream {
inline constexpr uint64_t kCommandJitter = 1;
inline constexpr uint64_t kFeedbackJitter = 2;
inline constexpr uint64_t kRingLoss = 3;
inline constexpr uint64_t kSensorTraffic = 4;
inline constexpr uint64_t kOverlay = 5;
inline constexpr uint64_t kRequestGenerator = 6;
} // namespace stream

struct RunSummary
{
  uint64_t eventsProcessed = 0;
  SimTime finalClock;
};

/**
 * Single-threaded discrete-event engine.
 *
 * Events are ordered by (fire time, insertion sequence). Handlers may
 * schedule further events at or after the current clock.
 */
class Simulator
{
public:
  using Handler = std::function<void ()>;

  Simulator () = default;
  Simulator (const Simulator &) = delete;
  Simulator &operator= (const Simulator &) = delete;

  SimTime Now () const { return m_now; }

  EventId Schedule (SimTime at, std::string component, std::string kind, Handler handler,
                    std::string details = {});
  EventId ScheduleIn (SimTime delay, std::string component, std::string kind, Handler handler,
                      std::string details = {})
  {
    return Schedule (m_now + delay, std::move (component), std::move (kind), std::move (handler),
                     std::move (details));
  }

  /// Returns false if the event already fired or was cancelled.
  bool Cancel (EventId id);

  /// Processes every event with fire time <= end. The clock finishes at `end`
  /// unless Stop() was called from a handler.
  RunSummary RunUntil (SimTime end);

  /// Ends the current RunUntil after the running handler returns.
  void Stop () { m_stopRequested = true; }
  bool Stopped () const { return m_stopped; }

  std::size_t Pending () const { return m_live.size (); }
  uint64_t EventsProcessed () const { return m_processed; }

  /// Every processed event is appended to the sink (if set).
  void SetTraceSink (std::function<void (const TraceRecord &)> sink) { m_trace = std::move (sink); }

private:
  struct Entry
  {
    SimTime time;
    uint64_t seq;
    std::string component;
    std::string kind;
    std::string details;
    Handler handler;
  };
  struct Later
  {
    bool operator() (const std::shared_ptr<Entry> &a, const std::shared_ptr<Entry> &b) const
    {
      if (a->time != b->time)
        return a->time > b->time;
      return a->seq > b->seq;
    }
  };

  SimTime m_now;
  uint64_t m_nextSeq = 1;
  uint64_t m_processed = 0;
  bool m_stopRequested = false;
  bool m_stopped = false;
  std::priority_queue<std::shared_ptr<Entry>, std::vector<std::shared_ptr<Entry>>, Later> m_queue;
  std::unordered_set<uint64_t> m_cancelled;
  std::unordered_set<uint64_t> m_live;
  std::function<void (const TraceRecord &)> m_trace;
};

} // namespace underlayer

#endif
