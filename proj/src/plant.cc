#include "underlayer/plant.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

namespace underlayer {

void
AxisParams::Validate () const
{
  if (!(timeConstantS > 0.0))
    throw ConfigError ("axis time constant must be positive");
  if (!(maxVelocity > 0.0) || !(maxAcceleration > 0.0))
    throw ConfigError ("axis velocity and acceleration limits must be positive");
}

AxisModel
StepAxis (AxisModel axis, double velocityCommand, int64_t dtUs)
{
  if (dtUs <= 0)
    throw std::invalid_argument ("axis step needs dt > 0");
  const auto &p = axis.params;
  const double dt = static_cast<double> (dtUs) * 1e-6;
  double cmd = std::clamp (velocityCommand, -p.maxVelocity, p.maxVelocity);
  double dv = dt / p.timeConstantS * (cmd - axis.velocity);
  double maxDv = p.maxAcceleration * dt;
  dv = std::clamp (dv, -maxDv, maxDv);
  double v = std::clamp (axis.velocity + dv, -p.maxVelocity, p.maxVelocity);
  axis.acceleration = (v - axis.velocity) / dt;
  axis.velocity = v;
  axis.position += v * dt;
  return axis;
}

AxisModel
AdvanceAxis (AxisModel axis, double velocityCommand, int64_t durationUs, int64_t maxStepUs)
{
  while (durationUs > 0)
    {
      int64_t step = std::min (durationUs, maxStepUs);
      axis = StepAxis (axis, velocityCommand, step);
      durationUs -= step;
    }
  return axis;
}

double
PidController::Tick (double setpointMm, double feedbackMm, double dtS)
{
  double error = setpointMm - feedbackMm;
  m_integral = std::clamp (m_integral + error * dtS, -m_gains.integralClamp, m_gains.integralClamp);
  double derivative = m_primed && dtS > 0.0 ? (error - m_lastError) / dtS : 0.0;
  m_lastError = error;
  m_primed = true;
  return m_gains.kp * error + m_gains.ki * m_integral + m_gains.kd * derivative;
}

void
PidController::Reset ()
{
  m_integral = 0.0;
  m_lastError = 0.0;
  m_primed = false;
}

void
TrapezoidParams::Validate () const
{
  if (!(distanceMm > 0.0) || !(velocity > 0.0) || !(acceleration > 0.0) || dwellUs < 0)
    throw ConfigError ("trapezoid parameters must be positive");
}

TrapezoidTrajectory::TrapezoidTrajectory (TrapezoidParams params) : m_p (params)
{
  m_p.Validate ();
  double rampDistance = m_p.velocity * m_p.velocity / m_p.acceleration;
  if (rampDistance >= m_p.distanceMm)
    {
      m_peakVel = std::sqrt (m_p.distanceMm * m_p.acceleration);
      m_accelS = m_peakVel / m_p.acceleration;
      m_cruiseS = 0.0;
    }
  else
    {
      m_peakVel = m_p.velocity;
      m_accelS = m_p.velocity / m_p.acceleration;
      m_cruiseS = (m_p.distanceMm - rampDistance) / m_p.velocity;
    }
  m_moveS = 2.0 * m_accelS + m_cruiseS;
}

Setpoint
TrapezoidTrajectory::Move (double tS) const
{
  const double a = m_p.acceleration;
  if (tS <= 0.0)
    return {0.0, 0.0};
  if (tS < m_accelS)
    return {0.5 * a * tS * tS, a * tS};
  double rampDist = 0.5 * a * m_accelS * m_accelS;
  if (tS < m_accelS + m_cruiseS)
    return {rampDist + m_peakVel * (tS - m_accelS), m_peakVel};
  if (tS < m_moveS)
    {
      double r = m_moveS - tS;
      return {m_p.distanceMm - 0.5 * a * r * r, a * r};
    }
  return {m_p.distanceMm, 0.0};
}

Setpoint
TrapezoidTrajectory::At (SimTime t) const
{
  if (t.Us () <= 0)
    return {0.0, 0.0};
  const double dwell = static_cast<double> (m_p.dwellUs) * 1e-6;
  const double leg = m_moveS + dwell;
  const double period = 2.0 * leg;
  double tS = std::fmod (t.S (), period);
  if (tS < leg)
    return Move (tS);
  Setpoint s = Move (tS - leg);
  return {m_p.distanceMm - s.position, -s.velocity};
}

CsvTrajectory::CsvTrajectory (std::vector<std::pair<double, double>> points)
  : m_points (std::move (points))
{
  if (m_points.empty ())
    throw ConfigError ("trajectory needs at least one point");
  for (std::size_t i = 1; i < m_points.size (); ++i)
    if (!(m_points[i].first > m_points[i - 1].first))
      throw ConfigError ("trajectory times must be strictly increasing");
}

CsvTrajectory
CsvTrajectory::Parse (std::istream &is)
{
  std::vector<std::pair<double, double>> pts;
  std::string line;
  int lineNo = 0;
  while (std::getline (is, line))
    {
      ++lineNo;
      if (line.empty () || line[0] == '#')
        continue;
      std::replace (line.begin (), line.end (), ',', ' ');
      std::istringstream ss (line);
      double tMs = 0.0;
      double mm = 0.0;
      if (!(ss >> tMs >> mm))
        {
          if (lineNo == 1)
            continue; // header row
          throw ConfigError ("trajectory line " + std::to_string (lineNo) + ": expected time_ms,setpoint_mm");
        }
      pts.emplace_back (tMs, mm);
    }
  return CsvTrajectory (std::move (pts));
}

Setpoint
CsvTrajectory::At (SimTime t) const
{
  double ms = t.Ms ();
  if (ms <= m_points.front ().first)
    return {m_points.front ().second, 0.0};
  if (ms >= m_points.back ().first)
    return {m_points.back ().second, 0.0};
  auto it = std::upper_bound (m_points.begin (), m_points.end (), ms,
                              [] (double v, const auto &p) { return v < p.first; });
  const auto &hi = *it;
  const auto &lo = *(it - 1);
  double slope = (hi.second - lo.second) / (hi.first - lo.first); // mm/ms
  return {lo.second + slope * (ms - lo.first), slope * 1000.0};
}

std::string
ToString (AdaptationProfile p)
{
  return p == AdaptationProfile::Default ? "default" : "adapted";
}

void
LoopConfig::Validate () const
{
  if (servoPeriodUs <= 0)
    throw ConfigError ("servo period must be positive");
  if (watchdogTimeoutUs <= 0 || initGraceUs <= 0 || syncReadTimeoutUs <= 0)
    throw ConfigError ("watchdog, init grace and read timeout must be positive");
  if (syncReadTimeoutUs > watchdogTimeoutUs)
    throw ConfigError ("synchronous read timeout may not exceed the watchdog timeout");
  if (initHandshakeReplies < 1)
    throw ConfigError ("init handshake needs at least one reply");
  if (!(followingErrorLimitMm > 0.0))
    throw ConfigError ("following-error limit must be positive");
  if (!(gains.integralClamp >= 0.0))
    throw ConfigError ("integral clamp must be non-negative");
  axis.Validate ();
}

LoopConfig
LoopConfig::DefaultProfile ()
{
  return LoopConfig{};
}

LoopConfig
LoopConfig::AdaptedProfile ()
{
  LoopConfig c;
  c.profile = AdaptationProfile::Adapted;
  c.watchdogTimeoutUs = 1900;
  c.initGraceUs = 50000;
  return c;
}

void
LoopConfigPair::Validate () const
{
  standard.Validate ();
  adapted.Validate ();
  if (adapted.initGraceUs < standard.initGraceUs || adapted.watchdogTimeoutUs < standard.watchdogTimeoutUs)
    throw ConfigError ("adapted profile must not shorten init grace or watchdog timeout");
}

std::string
ToString (Outcome o)
{
  return o == Outcome::Pass ? "pass" : "fail";
}

std::string
ToString (FailCause c)
{
  switch (c)
    {
    case FailCause::None:
      return "none";
    case FailCause::FollowingError:
      return "following-error";
    case FailCause::Watchdog:
      return "watchdog";
    case FailCause::InitFailure:
      return "init-failure";
    }
  return "?";
}

std::string
ToString (TransportMode m)
{
  switch (m)
    {
    case TransportMode::Unknown:
      return "unknown";
    case TransportMode::Synchronous:
      return "synchronous";
    case TransportMode::Pipelined:
      return "pipelined";
    }
  return "?";
}

std::string
ToString (CellClass c)
{
  switch (c)
    {
    case CellClass::Pass:
      return "pass";
    case CellClass::PassWithAdaptation:
      return "pass-with-adaptation";
    case CellClass::Fail:
      return "fail";
    }
  return "?";
}

std::string
Symbol (CellClass c)
{
  switch (c)
    {
    case CellClass::Pass:
      return "✓";
    case CellClass::PassWithAdaptation:
      return "(✓)";
    case CellClass::Fail:
      return "x";
    }
  return "?";
}

} // namespace underlayer
