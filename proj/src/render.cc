#include "underlayer/harness.h"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <sstream>

namespace underlayer {

namespace {

// shortest text that parses back to the same double
std::string
Num (double v)
{
  char buf[64];
  auto res = std::to_chars (buf, buf + sizeof buf, v);
  return std::string (buf, res.ptr);
}

double
ParseNum (const std::string &s, int line)
{
  double v = 0.0;
  auto res = std::from_chars (s.data (), s.data () + s.size (), v);
  if (res.ec != std::errc () || res.ptr != s.data () + s.size ())
    throw ConfigError ("matrix csv line " + std::to_string (line) + ": bad number '" + s + "'");
  return v;
}

template <typename Int>
Int
ParseInt (const std::string &s, int line)
{
  Int v = 0;
  auto res = std::from_chars (s.data (), s.data () + s.size (), v);
  if (res.ec != std::errc () || res.ptr != s.data () + s.size ())
    throw ConfigError ("matrix csv line " + std::to_string (line) + ": bad integer '" + s + "'");
  return v;
}

template <typename E>
E
ParseEnum (const std::string &s, std::initializer_list<E> values, int line)
{
  for (E e : values)
    if (ToString (e) == s)
      return e;
  throw ConfigError ("matrix csv line " + std::to_string (line) + ": unknown value '" + s + "'");
}

const char *kCsvHeader = "latency_ms,jitter_ms,class,seed_index,seed,"
                         "default_outcome,default_cause,default_max_fe_mm,default_survived_us,default_mode,"
                         "adapted_outcome,adapted_cause,adapted_max_fe_mm,adapted_survived_us,adapted_mode";

void
CsvProfile (std::ostream &os, const ProfileResult &p)
{
  os << ToString (p.outcome) << ',' << ToString (p.cause) << ',' << Num (p.maxFollowingErrorMm) << ','
     << p.survivedUs << ',' << ToString (p.mode);
}

ProfileResult
ParseProfile (const std::vector<std::string> &f, std::size_t at, int line)
{
  ProfileResult p;
  p.outcome = ParseEnum (f[at], {Outcome::Pass, Outcome::Fail}, line);
  p.cause = ParseEnum (f[at + 1],
                       {FailCause::None, FailCause::FollowingError, FailCause::Watchdog, FailCause::InitFailure},
                       line);
  p.maxFollowingErrorMm = ParseNum (f[at + 2], line);
  p.survivedUs = ParseInt<int64_t> (f[at + 3], line);
  p.mode = ParseEnum (f[at + 4], {TransportMode::Unknown, TransportMode::Synchronous, TransportMode::Pipelined},
                      line);
  return p;
}

nlohmann::ordered_json
ProfileJson (const ProfileResult &p)
{
  return {{"outcome", ToString (p.outcome)},
          {"cause", ToString (p.cause)},
          {"max_following_error_mm", p.maxFollowingErrorMm},
          {"survived_us", p.survivedUs},
          {"mode", ToString (p.mode)}};
}

std::string
Markdown (const SweepMatrix &m)
{
  std::ostringstream os;
  os << "| Jitter in ms \\ Latency in ms |";
  for (double l : m.latenciesMs)
    os << ' ' << Num (l) << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < m.latenciesMs.size (); ++i)
    os << "---|";
  os << '\n';
  for (std::size_t j = 0; j < m.jittersMs.size (); ++j)
    {
      os << "| " << Num (m.jittersMs[j]) << " |";
      for (std::size_t l = 0; l < m.latenciesMs.size (); ++l)
        os << ' ' << Symbol (m.At (j, l).cls) << " |";
      os << '\n';
    }
  return os.str ();
}

std::string
Csv (const SweepMatrix &m)
{
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto &c : m.cells)
    for (std::size_t k = 0; k < c.seeds.size (); ++k)
      {
        const auto &d = c.seeds[k];
        os << Num (c.latencyMs) << ',' << Num (c.jitterMs) << ',' << ToString (c.cls) << ',' << k << ','
           << d.seed << ',';
        CsvProfile (os, d.standard);
        os << ',';
        CsvProfile (os, d.adapted);
        os << '\n';
      }
  return os.str ();
}

std::string
Structured (const SweepMatrix &m)
{
  std::ostringstream os;
  std::map<std::string, int> counts;
  for (const auto &c : m.cells)
    {
      nlohmann::ordered_json rec;
      rec["record"] = "cell";
      rec["latency_ms"] = c.latencyMs;
      rec["jitter_ms"] = c.jitterMs;
      rec["class"] = ToString (c.cls);
      rec["symbol"] = Symbol (c.cls);
      auto seeds = nlohmann::ordered_json::array ();
      for (const auto &d : c.seeds)
        seeds.push_back ({{"seed", d.seed}, {"default", ProfileJson (d.standard)}, {"adapted", ProfileJson (d.adapted)}});
      rec["seeds"] = seeds;
      os << rec.dump () << '\n';
      ++counts[ToString (c.cls)];
    }
  nlohmann::ordered_json summary;
  summary["record"] = "summary";
  summary["latencies_ms"] = m.latenciesMs;
  summary["jitters_ms"] = m.jittersMs;
  auto rows = nlohmann::ordered_json::array ();
  for (std::size_t j = 0; j < m.jittersMs.size (); ++j)
    {
      auto row = nlohmann::ordered_json::array ();
      for (std::size_t l = 0; l < m.latenciesMs.size (); ++l)
        row.push_back (Symbol (m.At (j, l).cls));
      rows.push_back (row);
    }
  summary["matrix"] = rows;
  summary["counts"] = counts;
  summary["seeds_per_cell"] = m.cells.empty () ? 0 : m.cells.front ().seeds.size ();
  os << summary.dump () << '\n';
  return os.str ();
}

} // namespace

MatrixFormat
ParseMatrixFormat (const std::string &s)
{
  if (s == "markdown" || s == "md")
    return MatrixFormat::Markdown;
  if (s == "csv")
    return MatrixFormat::Csv;
  if (s == "structured" || s == "ndjson" || s == "json")
    return MatrixFormat::Structured;
  throw ConfigError ("unknown matrix format '" + s + "'");
}

std::string
RenderMatrix (const SweepMatrix &m, MatrixFormat format)
{
  switch (format)
    {
    case MatrixFormat::Markdown:
      return Markdown (m);
    case MatrixFormat::Csv:
      return Csv (m);
    case MatrixFormat::Structured:
      return Structured (m);
    }
  return {};
}

SweepMatrix
ParseMatrixCsv (std::istream &is)
{
  std::string line;
  int lineNo = 1;
  if (!std::getline (is, line) || line != kCsvHeader)
    throw ConfigError ("matrix csv line 1: unexpected header");

  struct Row
  {
    double lat, jit;
    CellClass cls;
    std::size_t k;
    SeedDetail d;
  };
  std::vector<Row> rows;
  while (std::getline (is, line))
    {
      ++lineNo;
      if (line.empty ())
        continue;
      std::vector<std::string> f;
      std::stringstream ss (line);
      std::string field;
      while (std::getline (ss, field, ','))
        f.push_back (field);
      if (f.size () != 15)
        throw ConfigError ("matrix csv line " + std::to_string (lineNo) + ": expected 15 fields");
      Row r;
      r.lat = ParseNum (f[0], lineNo);
      r.jit = ParseNum (f[1], lineNo);
      r.cls = ParseEnum (f[2], {CellClass::Pass, CellClass::PassWithAdaptation, CellClass::Fail}, lineNo);
      r.k = ParseInt<std::size_t> (f[3], lineNo);
      r.d.seed = ParseInt<uint64_t> (f[4], lineNo);
      r.d.standard = ParseProfile (f, 5, lineNo);
      r.d.adapted = ParseProfile (f, 10, lineNo);
      rows.push_back (r);
    }

  SweepMatrix m;
  for (const auto &r : rows)
    {
      if (std::find (m.latenciesMs.begin (), m.latenciesMs.end (), r.lat) == m.latenciesMs.end ())
        m.latenciesMs.push_back (r.lat);
      if (std::find (m.jittersMs.begin (), m.jittersMs.end (), r.jit) == m.jittersMs.end ())
        m.jittersMs.push_back (r.jit);
    }
  std::sort (m.latenciesMs.begin (), m.latenciesMs.end ());
  std::sort (m.jittersMs.begin (), m.jittersMs.end ());
  const std::size_t nl = m.latenciesMs.size ();
  m.cells.resize (nl * m.jittersMs.size ());
  std::vector<bool> seen (m.cells.size (), false);
  for (const auto &r : rows)
    {
      std::size_t l = std::find (m.latenciesMs.begin (), m.latenciesMs.end (), r.lat) - m.latenciesMs.begin ();
      std::size_t j = std::find (m.jittersMs.begin (), m.jittersMs.end (), r.jit) - m.jittersMs.begin ();
      auto &cell = m.cells[j * nl + l];
      if (seen[j * nl + l] && cell.cls != r.cls)
        throw ConfigError ("matrix csv: inconsistent class for one cell");
      seen[j * nl + l] = true;
      cell.latencyMs = r.lat;
      cell.jitterMs = r.jit;
      cell.cls = r.cls;
      if (cell.seeds.size () <= r.k)
        cell.seeds.resize (r.k + 1);
      cell.seeds[r.k] = r.d;
    }
  if (std::find (seen.begin (), seen.end (), false) != seen.end ())
    throw ConfigError ("matrix csv: grid is incomplete");
  return m;
}

} // namespace underlayer
