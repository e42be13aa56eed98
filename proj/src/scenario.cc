#include "underlayer/harness.h"

#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace underlayer {

namespace {

double
Number (const std::string &text, int line, const std::string &what)
{
  std::istringstream is (text);
  double v = 0.0;
  if (!(is >> v) || !(is >> std::ws).eof ())
    throw ScenarioError (line, "bad " + what + " '" + text + "'");
  return v;
}

TrafficRole
Role (const std::string &s, int line)
{
  if (s == "urllc")
    return TrafficRole::Urllc;
  if (s == "sensor")
    return TrafficRole::Sensor;
  if (s == "overlay")
    return TrafficRole::Overlay;
  if (s == "other")
    return TrafficRole::Other;
  throw ScenarioError (line, "unknown role '" + s + "'");
}

QosProfile
QosFor (TrafficRole r)
{
  switch (r)
    {
    case TrafficRole::Urllc:
      return QosProfile::Urllc ();
    case TrafficRole::Sensor:
      return QosProfile::Sensor ();
    default:
      return QosProfile::Overlay ();
    }
}

} // namespace

std::vector<ScenarioCommand>
ParseScenario (std::istream &is)
{
  std::vector<ScenarioCommand> out;
  std::string raw;
  int lineNo = 0;
  SimTime last;
  while (std::getline (is, raw))
    {
      ++lineNo;
      auto hash = raw.find ('#');
      std::istringstream ss (raw.substr (0, hash));
      std::vector<std::string> tok;
      for (std::string t; ss >> t;)
        tok.push_back (t);
      if (tok.empty ())
        continue;
      if (tok.size () < 3 || tok[0] != "at")
        throw ScenarioError (lineNo, "expected 'at <ms> <command> ...'");

      ScenarioCommand cmd;
      cmd.line = lineNo;
      double ms = Number (tok[1], lineNo, "time");
      if (ms < 0.0)
        throw ScenarioError (lineNo, "time must be non-negative");
      cmd.at = SimTime::Millis (ms);
      if (cmd.at < last)
        throw ScenarioError (lineNo, "time goes backwards");
      last = cmd.at;

      const std::string &verb = tok[2];
      if (verb == "static-plan" || verb == "expire")
        {
          if (tok.size () != 3)
            throw ScenarioError (lineNo, "'" + verb + "' takes no arguments");
          cmd.kind = verb == "expire" ? ScenarioCommand::Kind::Expire : ScenarioCommand::Kind::StaticPlan;
        }
      else if (verb == "release")
        {
          if (tok.size () != 4)
            throw ScenarioError (lineNo, "usage: release <name>");
          cmd.kind = ScenarioCommand::Kind::Release;
          cmd.request.requester = tok[3];
        }
      else if (verb == "request")
        {
          if (tok.size () < 4)
            throw ScenarioError (lineNo, "usage: request <name> x= y= r= bw= [role=] [lease=]");
          cmd.kind = ScenarioCommand::Kind::Request;
          cmd.request.requester = tok[3];
          std::map<std::string, std::string> kv;
          for (std::size_t i = 4; i < tok.size (); ++i)
            {
              auto eq = tok[i].find ('=');
              if (eq == std::string::npos || eq == 0)
                throw ScenarioError (lineNo, "expected key=value, got '" + tok[i] + "'");
              if (!kv.emplace (tok[i].substr (0, eq), tok[i].substr (eq + 1)).second)
                throw ScenarioError (lineNo, "duplicate key '" + tok[i].substr (0, eq) + "'");
            }
          for (const char *req : {"x", "y", "r", "bw"})
            if (!kv.count (req))
              throw ScenarioError (lineNo, std::string ("missing ") + req + "=");
          auto &rq = cmd.request;
          rq.area.center.x = Number (kv["x"], lineNo, "x");
          rq.area.center.y = Number (kv["y"], lineNo, "y");
          rq.area.radius = Number (kv["r"], lineNo, "radius");
          rq.bandwidth = Number (kv["bw"], lineNo, "bandwidth");
          if (!(rq.area.radius > 0.0))
            throw ScenarioError (lineNo, "radius must be positive");
          if (!(rq.bandwidth > 0.0))
            throw ScenarioError (lineNo, "bandwidth must be positive");
          rq.role = kv.count ("role") ? Role (kv["role"], lineNo) : TrafficRole::Other;
          rq.qos = QosFor (rq.role);
          if (kv.count ("lease"))
            cmd.lease = cmd.at + SimTime::Millis (Number (kv["lease"], lineNo, "lease"));
          for (const auto &[k, v] : kv)
            if (k != "x" && k != "y" && k != "r" && k != "bw" && k != "role" && k != "lease")
              throw ScenarioError (lineNo, "unknown key '" + k + "'");
        }
      else
        throw ScenarioError (lineNo, "unknown command '" + verb + "'");
      out.push_back (std::move (cmd));
    }
  return out;
}

ScenarioResult
RunSpectrumScenario (const std::vector<ScenarioCommand> &script, Band band)
{
  SpectrumManager mgr (band);
  std::map<std::string, GrantId> byName; // latest grant per requester
  ScenarioResult res;
  for (const auto &cmd : script)
    {
      for (GrantId id : mgr.ExpireLeases (cmd.at))
        for (auto it = byName.begin (); it != byName.end ();)
          it = it->second == id ? byName.erase (it) : std::next (it);
      switch (cmd.kind)
        {
        case ScenarioCommand::Kind::Expire:
          break;
        case ScenarioCommand::Kind::StaticPlan:
          try
            {
              for (const auto &g : mgr.ConfigureStaticPlan ())
                byName[g.requester] = g.id;
            }
          catch (const std::exception &e)
            {
              throw ScenarioError (cmd.line, e.what ());
            }
          break;
        case ScenarioCommand::Kind::Release:
          {
            auto it = byName.find (cmd.request.requester);
            if (it == byName.end ())
              throw ScenarioError (cmd.line, "no active grant held by '" + cmd.request.requester + "'");
            mgr.ReleaseSpectrum (it->second, cmd.at);
            byName.erase (it);
            break;
          }
        case ScenarioCommand::Kind::Request:
          {
            auto d = mgr.RequestSpectrum (cmd.request, cmd.at, cmd.lease);
            if (auto *g = std::get_if<SpectrumGrant> (&d))
              byName[g->requester] = g->id;
            break;
          }
        }
    }
  res.audit = mgr.AuditLog ();
  for (const auto &a : res.audit)
    if (a.action == "request")
      (a.granted ? res.grants : res.rejections)++;
  for (const auto &[id, g] : mgr.ActiveGrants ())
    res.finalGrants.push_back (g);
  return res;
}

void
WriteAuditCsv (std::ostream &os, const std::vector<AuditRecord> &audit)
{
  os << "time_ms,action,requester,granted,grant_id,low_mhz,high_mhz,occupied_mhz,reason\n";
  for (const auto &a : audit)
    {
      os << a.time.Ms () << ',' << a.action << ',' << a.requester << ',' << (a.granted ? 1 : 0) << ',';
      if (a.grantId)
        os << *a.grantId;
      os << ',';
      if (a.block)
        os << a.block->low << ',' << a.block->high;
      else
        os << ',';
      os << ',' << a.occupiedMhz << ',' << a.reason << '\n';
    }
}

void
WriteOccupancyCsv (std::ostream &os, const std::vector<SpectrumGrant> &grants)
{
  os << "grant_id,requester,role,low_mhz,high_mhz,x_m,y_m,radius_m\n";
  for (const auto &g : grants)
    os << g.id << ',' << g.requester << ',' << ToString (g.role) << ',' << g.block.low << ','
       << g.block.high << ',' << g.area.center.x << ',' << g.area.center.y << ',' << g.area.radius << '\n';
}

} // namespace underlayer
