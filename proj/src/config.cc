#include "underlayer/harness.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <type_traits>
#include <sstream>

namespace underlayer {

namespace pt = boost::property_tree;
using ojson = nlohmann::ordered_json;

namespace {

template <typename T>
std::vector<T>
ParseList (const std::string &key, const std::string &text)
{
  std::vector<T> out;
  std::stringstream ss (text);
  std::string item;
  while (std::getline (ss, item, ','))
    {
      std::istringstream is (item);
      T v{};
      if (!(is >> v) || !(is >> std::ws).eof ())
        throw ConfigError ("config key '" + key + "': bad list element '" + item + "'");
      out.push_back (v);
    }
  if (out.empty ())
    throw ConfigError ("config key '" + key + "': empty list");
  return out;
}

bool
ParseBool (const std::string &key, const std::string &v)
{
  if (v == "true" || v == "yes" || v == "1" || v == "on")
    return true;
  if (v == "false" || v == "no" || v == "0" || v == "off")
    return false;
  throw ConfigError ("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
T
Scalar (const std::string &key, const std::string &text)
{
  std::istringstream is (text);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof ())
    throw ConfigError ("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

// applies one key of a [default]/[adapted] style section to a loop config
bool
ApplyLoopKey (LoopConfig &c, const std::string &key, const std::string &full, const std::string &v)
{
  if (key == "servo_period_us")
    c.servoPeriodUs = Scalar<int64_t> (full, v);
  else if (key == "watchdog_timeout_us")
    c.watchdogTimeoutUs = Scalar<int64_t> (full, v);
  else if (key == "init_grace_us")
    c.initGraceUs = Scalar<int64_t> (full, v);
  else if (key == "sync_read_timeout_us")
    c.syncReadTimeoutUs = Scalar<int64_t> (full, v);
  else if (key == "init_handshake_replies")
    c.initHandshakeReplies = Scalar<int> (full, v);
  else if (key == "following_error_limit_mm")
    c.followingErrorLimitMm = Scalar<double> (full, v);
  else if (key == "kp")
    c.gains.kp = Scalar<double> (full, v);
  else if (key == "ki")
    c.gains.ki = Scalar<double> (full, v);
  else if (key == "kd")
    c.gains.kd = Scalar<double> (full, v);
  else if (key == "integral_clamp")
    c.gains.integralClamp = Scalar<double> (full, v);
  else if (key == "velocity_feed_forward")
    c.gains.velocityFeedForward = Scalar<double> (full, v);
  else
    return false;
  return true;
}

ojson
LoopJson (const LoopConfig &c)
{
  return {{"profile", ToString (c.profile)},
          {"servo_period_us", c.servoPeriodUs},
          {"watchdog_timeout_us", c.watchdogTimeoutUs},
          {"init_grace_us", c.initGraceUs},
          {"sync_read_timeout_us", c.syncReadTimeoutUs},
          {"init_handshake_replies", c.initHandshakeReplies},
          {"following_error_limit_mm", c.followingErrorLimitMm},
          {"kp", c.gains.kp},
          {"ki", c.gains.ki},
          {"kd", c.gains.kd},
          {"integral_clamp", c.gains.integralClamp},
          {"velocity_feed_forward", c.gains.velocityFeedForward},
          {"axis",
           {{"time_constant_s", c.axis.timeConstantS},
            {"max_velocity", c.axis.maxVelocity},
            {"max_acceleration", c.axis.maxAcceleration}}}};
}

LoopConfig
LoopFromJson (const nlohmann::json &j)
{
  LoopConfig c;
  c.profile = j.at ("profile").get<std::string> () == "adapted" ? AdaptationProfile::Adapted
                                                                 : AdaptationProfile::Default;
  c.servoPeriodUs = j.at ("servo_period_us");
  c.watchdogTimeoutUs = j.at ("watchdog_timeout_us");
  c.initGraceUs = j.at ("init_grace_us");
  c.syncReadTimeoutUs = j.at ("sync_read_timeout_us");
  c.initHandshakeReplies = j.at ("init_handshake_replies");
  c.followingErrorLimitMm = j.at ("following_error_limit_mm");
  c.gains.kp = j.at ("kp");
  c.gains.ki = j.at ("ki");
  c.gains.kd = j.at ("kd");
  c.gains.integralClamp = j.at ("integral_clamp");
  c.gains.velocityFeedForward = j.at ("velocity_feed_forward");
  const auto &a = j.at ("axis");
  c.axis.timeConstantS = a.at ("time_constant_s");
  c.axis.maxVelocity = a.at ("max_velocity");
  c.axis.maxAcceleration = a.at ("max_acceleration");
  return c;
}

} // namespace

void
HarnessConfig::Validate () const
{
  loops.Validate ();
  sweep.Validate ();
  env.controlRing.Validate ();
  env.trapezoid.Validate ();
  calibration.Validate ();
  if (!(env.lossRate >= 0.0 && env.lossRate <= 1.0))
    throw ConfigError ("channel loss rate must lie in [0, 1]");
}

HarnessConfig
LoadConfig (std::istream &is)
{
  pt::ptree tree;
  try
    {
      pt::read_ini (is, tree);
    }
  catch (const pt::ini_parser_error &e)
    {
      throw ConfigError ("config line " + std::to_string (e.line ()) + ": " + e.message ());
    }

  HarnessConfig c;
  for (const auto &[section, body] : tree)
    {
      if (body.empty () && !body.data ().empty ())
        throw ConfigError ("config key '" + section + "' must live inside a [section]");
      for (const auto &[key, node] : body)
        {
          const std::string full = section + "." + key;
          std::string v = node.data ();
          v = v.substr (0, v.find_first_of (";#")); // inline comment
          v.erase (v.find_last_not_of (" \t") + 1);
          bool known = true;
          if (section == "loop")
            {
              // shared by both profiles
              known = ApplyLoopKey (c.loops.standard, key, full, v);
              ApplyLoopKey (c.loops.adapted, key, full, v);
            }
          else if (section == "default")
            known = ApplyLoopKey (c.loops.standard, key, full, v);
          else if (section == "adapted")
            known = ApplyLoopKey (c.loops.adapted, key, full, v);
          else if (section == "axis")
            {
              double d = Scalar<double> (full, v);
              for (LoopConfig *lc : {&c.loops.standard, &c.loops.adapted})
                {
                  if (key == "time_constant_s")
                    lc->axis.timeConstantS = d;
                  else if (key == "max_velocity")
                    lc->axis.maxVelocity = d;
                  else if (key == "max_acceleration")
                    lc->axis.maxAcceleration = d;
                  else
                    known = false;
                }
            }
          else if (section == "sweep")
            {
              if (key == "latencies_ms")
                c.sweep.latenciesMs = ParseList<double> (full, v);
              else if (key == "jitters_ms")
                c.sweep.jittersMs = ParseList<double> (full, v);
              else if (key == "seeds_per_cell")
                c.sweep.seedsPerCell = Scalar<int> (full, v);
              else if (key == "trial_length_s")
                c.sweep.trialLengthS = Scalar<double> (full, v);
              else if (key == "base_seed")
                c.sweep.baseSeed = Scalar<uint64_t> (full, v);
              else
                known = false;
            }
          else if (section == "channel")
            {
              if (key == "jitter_distribution")
                try
                  {
                    c.env.distribution = ParseJitterDistribution (v);
                  }
                catch (const std::invalid_argument &e)
                  {
                    throw ConfigError ("config key '" + full + "': " + e.what ());
                  }
              else if (key == "loss_rate")
                c.env.lossRate = Scalar<double> (full, v);
              else
                known = false;
            }
          else if (section == "control_ring")
            {
              if (key == "slot_us")
                c.env.controlRing.slotTimeUs = Scalar<int64_t> (full, v);
              else if (key == "tx_us")
                c.env.controlRing.txTimeUs = Scalar<int64_t> (full, v);
              else if (key == "loss_rate")
                c.env.controlRing.lossRate = Scalar<double> (full, v);
              else if (key == "queue_depth")
                c.env.controlRing.queueDepth = Scalar<std::size_t> (full, v);
              else
                known = false;
            }
          else if (section == "sensors")
            {
              if (key == "enabled")
                c.env.sensorsEnabled = ParseBool (full, v);
              else
                known = false;
            }
          else if (section == "trajectory")
            {
              if (key == "file")
                c.env.trajectoryFile = v;
              else if (key == "distance_mm")
                c.env.trapezoid.distanceMm = Scalar<double> (full, v);
              else if (key == "velocity")
                c.env.trapezoid.velocity = Scalar<double> (full, v);
              else if (key == "acceleration")
                c.env.trapezoid.acceleration = Scalar<double> (full, v);
              else if (key == "dwell_ms")
                c.env.trapezoid.dwellUs = SimTime::Millis (Scalar<double> (full, v)).Us ();
              else
                known = false;
            }
          else if (section == "calibration")
            {
              auto &s = c.calibration;
              if (key == "kp")
                s.kp = ParseList<double> (full, v);
              else if (key == "ki")
                s.ki = ParseList<double> (full, v);
              else if (key == "kd")
                s.kd = ParseList<double> (full, v);
              else if (key == "following_error_limit_mm")
                s.followingErrorLimitMm = ParseList<double> (full, v);
              else if (key == "default_watchdog_us")
                s.defaultWatchdogUs = ParseList<int64_t> (full, v);
              else if (key == "adapted_watchdog_us")
                s.adaptedWatchdogUs = ParseList<int64_t> (full, v);
              else if (key == "default_init_grace_us")
                s.defaultInitGraceUs = ParseList<int64_t> (full, v);
              else if (key == "adapted_init_grace_us")
                s.adaptedInitGraceUs = ParseList<int64_t> (full, v);
              else
                known = false;
            }
          else if (section == "run")
            {
              if (key == "threads")
                c.threads = Scalar<unsigned> (full, v);
              else
                known = false;
            }
          else
            throw ConfigError ("unknown config section [" + section + "]");
          if (!known)
            throw ConfigError ("unknown config key '" + full + "'");
        }
    }
  c.Validate ();
  return c;
}

HarnessConfig
LoadConfigFile (const std::string &path)
{
  std::ifstream in (path);
  if (!in)
    throw ConfigError ("cannot open config file '" + path + "'");
  return LoadConfig (in);
}

ojson
ToJson (const HarnessConfig &c)
{
  ojson j;
  j["default"] = LoopJson (c.loops.standard);
  j["adapted"] = LoopJson (c.loops.adapted);
  j["sweep"] = {{"latencies_ms", c.sweep.latenciesMs},
                {"jitters_ms", c.sweep.jittersMs},
                {"seeds_per_cell", c.sweep.seedsPerCell},
                {"trial_length_s", c.sweep.trialLengthS},
                {"base_seed", c.sweep.baseSeed}};
  const auto &r = c.env.controlRing;
  j["environment"] = {{"control_ring",
                       {{"id", r.id},
                        {"nodes", r.nodes},
                        {"slot_us", r.slotTimeUs},
                        {"tx_us", r.txTimeUs},
                        {"queue_depth", r.queueDepth},
                        {"loss_rate", r.lossRate}}},
                      {"sensors_enabled", c.env.sensorsEnabled},
                      {"jitter_distribution", ToString (c.env.distribution)},
                      {"loss_rate", c.env.lossRate},
                      {"trapezoid",
                       {{"distance_mm", c.env.trapezoid.distanceMm},
                        {"velocity", c.env.trapezoid.velocity},
                        {"acceleration", c.env.trapezoid.acceleration},
                        {"dwell_us", c.env.trapezoid.dwellUs}}},
                      {"trajectory_file", c.env.trajectoryFile}};
  const auto &s = c.calibration;
  j["calibration"] = {{"kp", s.kp},
                      {"ki", s.ki},
                      {"kd", s.kd},
                      {"following_error_limit_mm", s.followingErrorLimitMm},
                      {"default_watchdog_us", s.defaultWatchdogUs},
                      {"adapted_watchdog_us", s.adaptedWatchdogUs},
                      {"default_init_grace_us", s.defaultInitGraceUs},
                      {"adapted_init_grace_us", s.adaptedInitGraceUs}};
  j["threads"] = c.threads;
  return j;
}

HarnessConfig
HarnessConfigFromJson (const nlohmann::json &j)
{
  try
    {
      HarnessConfig c;
      c.loops.standard = LoopFromJson (j.at ("default"));
      c.loops.adapted = LoopFromJson (j.at ("adapted"));
      const auto &sw = j.at ("sweep");
      c.sweep.latenciesMs = sw.at ("latencies_ms").get<std::vector<double>> ();
      c.sweep.jittersMs = sw.at ("jitters_ms").get<std::vector<double>> ();
      c.sweep.seedsPerCell = sw.at ("seeds_per_cell");
      c.sweep.trialLengthS = sw.at ("trial_length_s");
      c.sweep.baseSeed = sw.at ("base_seed");
      const auto &e = j.at ("environment");
      const auto &r = e.at ("control_ring");
      c.env.controlRing.id = r.at ("id");
      c.env.controlRing.nodes = r.at ("nodes").get<std::vector<std::string>> ();
      c.env.controlRing.slotTimeUs = r.at ("slot_us");
      c.env.controlRing.txTimeUs = r.at ("tx_us");
      c.env.controlRing.queueDepth = r.at ("queue_depth");
      c.env.controlRing.lossRate = r.at ("loss_rate");
      c.env.sensorsEnabled = e.at ("sensors_enabled");
      c.env.distribution = ParseJitterDistribution (e.at ("jitter_distribution"));
      c.env.lossRate = e.at ("loss_rate");
      const auto &t = e.at ("trapezoid");
      c.env.trapezoid.distanceMm = t.at ("distance_mm");
      c.env.trapezoid.velocity = t.at ("velocity");
      c.env.trapezoid.acceleration = t.at ("acceleration");
      c.env.trapezoid.dwellUs = t.at ("dwell_us");
      c.env.trajectoryFile = e.at ("trajectory_file");
      const auto &s = j.at ("calibration");
      c.calibration.kp = s.at ("kp").get<std::vector<double>> ();
      c.calibration.ki = s.at ("ki").get<std::vector<double>> ();
      c.calibration.kd = s.at ("kd").get<std::vector<double>> ();
      c.calibration.followingErrorLimitMm = s.at ("following_error_limit_mm").get<std::vector<double>> ();
      c.calibration.defaultWatchdogUs = s.at ("default_watchdog_us").get<std::vector<int64_t>> ();
      c.calibration.adaptedWatchdogUs = s.at ("adapted_watchdog_us").get<std::vector<int64_t>> ();
      c.calibration.defaultInitGraceUs = s.at ("default_init_grace_us").get<std::vector<int64_t>> ();
      c.calibration.adaptedInitGraceUs = s.at ("adapted_init_grace_us").get<std::vector<int64_t>> ();
      c.threads = j.at ("threads");
      c.Validate ();
      return c;
    }
  catch (const nlohmann::json::exception &e)
    {
      throw ConfigError (std::string ("malformed config document: ") + e.what ());
    }
}

ojson
RunManifest::ToJson () const
{
  ojson j;
  j["artifact_version"] = artifactVersion;
  j["command"] = command;
  j["config"] = underlayer::ToJson (config);
  j["seeds"] = seeds;
  j["outputs"] = outputs;
  j["wall_clock_s"] = wallClockS;
  return j;
}

RunManifest
RunManifest::FromJson (const nlohmann::json &j)
{
  RunManifest m;
  try
    {
      m.artifactVersion = j.at ("artifact_version");
      m.command = j.at ("command");
      m.seeds = j.at ("seeds").get<std::vector<uint64_t>> ();
      m.outputs = j.at ("outputs").get<std::vector<std::string>> ();
      m.wallClockS = j.at ("wall_clock_s");
    }
  catch (const nlohmann::json::exception &e)
    {
      throw ConfigError (std::string ("malformed manifest: ") + e.what ());
    }
  m.config = HarnessConfigFromJson (j.at ("config"));
  return m;
}

} // namespace underlayer

namespace underlayer {

namespace {

std::string
D (double v)
{
  char buf[64];
  auto res = std::to_chars (buf, buf + sizeof buf, v);
  return std::string (buf, res.ptr);
}

template <typename T>
std::string
Join (const std::vector<T> &v)
{
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size (); ++i)
    {
      os << (i ? "," : "");
      if constexpr (std::is_floating_point_v<T>)
        os << D (v[i]);
      else
        os << v[i];
    }
  return os.str ();
}

void
WriteLoopSection (std::ostream &os, const char *name, const LoopConfig &c)
{
  os << '[' << name << "]\n"
     << "servo_period_us = " << c.servoPeriodUs << '\n'
     << "watchdog_timeout_us = " << c.watchdogTimeoutUs << '\n'
     << "init_grace_us = " << c.initGraceUs << '\n'
     << "sync_read_timeout_us = " << c.syncReadTimeoutUs << '\n'
     << "init_handshake_replies = " << c.initHandshakeReplies << '\n'
     << "following_error_limit_mm = " << D (c.followingErrorLimitMm) << '\n'
     << "kp = " << D (c.gains.kp) << '\n'
     << "ki = " << D (c.gains.ki) << '\n'
     << "kd = " << D (c.gains.kd) << '\n'
     << "integral_clamp = " << D (c.gains.integralClamp) << '\n'
     << "velocity_feed_forward = " << D (c.gains.velocityFeedForward) << "\n\n";
}

} // namespace

void
WriteConfigIni (std::ostream &os, const HarnessConfig &c)
{
  const auto &ax = c.loops.standard.axis;
  os << "[axis]\ntime_constant_s = " << D (ax.timeConstantS) << "\nmax_velocity = " << ax.maxVelocity
     << "\nmax_acceleration = " << D (ax.maxAcceleration) << "\n\n";
  WriteLoopSection (os, "default", c.loops.standard);
  WriteLoopSection (os, "adapted", c.loops.adapted);
  os << "[sweep]\nlatencies_ms = " << Join (c.sweep.latenciesMs) << "\njitters_ms = " << Join (c.sweep.jittersMs)
     << "\nseeds_per_cell = " << c.sweep.seedsPerCell << "\ntrial_length_s = " << D (c.sweep.trialLengthS)
     << "\nbase_seed = " << c.sweep.baseSeed << "\n\n";
  os << "[channel]\njitter_distribution = " << ToString (c.env.distribution) << "\nloss_rate = " << D (c.env.lossRate)
     << "\n\n";
  const auto &r = c.env.controlRing;
  os << "[control_ring]\nslot_us = " << r.slotTimeUs << "\ntx_us = " << r.txTimeUs << "\nloss_rate = " << D (r.lossRate)
     << "\nqueue_depth = " << r.queueDepth << "\n\n";
  os << "[sensors]\nenabled = " << (c.env.sensorsEnabled ? "true" : "false") << "\n\n";
  const auto &t = c.env.trapezoid;
  os << "[trajectory]\ndistance_mm = " << D (t.distanceMm) << "\nvelocity = " << D (t.velocity)
     << "\nacceleration = " << D (t.acceleration) << "\ndwell_ms = " << D (static_cast<double> (t.dwellUs) / 1000.0) << '\n';
  if (!c.env.trajectoryFile.empty ())
    os << "file = " << c.env.trajectoryFile << '\n';
  const auto &s = c.calibration;
  os << "\n[calibration]\nkp = " << Join (s.kp) << "\nki = " << Join (s.ki) << "\nkd = " << Join (s.kd)
     << "\nfollowing_error_limit_mm = " << Join (s.followingErrorLimitMm)
     << "\ndefault_watchdog_us = " << Join (s.defaultWatchdogUs)
     << "\nadapted_watchdog_us = " << Join (s.adaptedWatchdogUs)
     << "\ndefault_init_grace_us = " << Join (s.defaultInitGraceUs)
     << "\nadapted_init_grace_us = " << Join (s.adaptedInitGraceUs) << "\n\n[run]\nthreads = " << c.threads << '\n';
}

} // namespace underlayer
