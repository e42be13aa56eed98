#ifndef UNDERLAYER_PLANT_H
#define UNDERLAYER_PLANT_H

#include "underlayer/channel.h"
#include "underlayer/errors.h"
#include "underlayer/qos.h"
#include "underlayer/ring.h"
#include "underlayer/sim-core.h"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace underlayer {

// ---------------------------------------------------------------------------
// Axis dynamics

struct AxisParams
{
  double timeConstantS = 0.005;
  double maxVelocity = 50.0;      // mm/s
  double maxAcceleration = 1000.0; // mm/s^2

  void Validate () const;
};

struct AxisModel
{
  AxisParams params;
  double position = 0.0; // mm
  double velocity = 0.0; // mm/s
  /// Acceleration applied during the last step (mm/s^2).
  double acceleration = 0.0;
};

/**
 * One explicit step of the first-order velocity lag toward `velocityCommand`:
 * v += dt/tau * (cmd - v), with acceleration and velocity clamps, then
 * position += v * dt.
 */
AxisModel StepAxis (AxisModel axis, double velocityCommand, int64_t dtUs);

/// Integrates over `durationUs` in steps of at most `maxStepUs`.
AxisModel AdvanceAxis (AxisModel axis, double velocityCommand, int64_t durationUs,
                       int64_t maxStepUs = 100);

// ---------------------------------------------------------------------------
// Controller

struct PidGains
{
  double kp = 150.0;         // 1/s
  double ki = 0.0;           // 1/s^2
  double kd = 0.0;           // dimensionless (s * 1/s)
  double integralClamp = 0.05; // mm*s
  /// Weight of the trajectory velocity added to the PID output.
  double velocityFeedForward = 1.0;
};

/// PID on position error with anti-windup clamp on the integral state.
class PidController
{
public:
  explicit PidController (PidGains gains = {}) : m_gains (gains) {}

  /// Returns the PID velocity command (mm/s) for error `setpoint - feedback`.
  double Tick (double setpointMm, double feedbackMm, double dtS);
  void Reset ();

  double IntegralState () const { return m_integral; }
  const PidGains &Gains () const { return m_gains; }

private:
  PidGains m_gains;
  double m_integral = 0.0;
  double m_lastError = 0.0;
  bool m_primed = false;
};

// ---------------------------------------------------------------------------
// Reference trajectories

struct Setpoint
{
  double position = 0.0; // mm
  double velocity = 0.0; // mm/s
};

class Trajectory
{
public:
  virtual ~Trajectory () = default;
  /// Setpoint at `t` measured from the start of motion.
  virtual Setpoint At (SimTime t) const = 0;
};

struct TrapezoidParams
{
  double distanceMm = 10.0;
  double velocity = 40.0;     // mm/s
  double acceleration = 400.0; // mm/s^2
  int64_t dwellUs = 100000;

  void Validate () const;
};

/// Back-and-forth trapezoidal moves repeated forever, with a dwell at each end.
class TrapezoidTrajectory : public Trajectory
{
public:
  explicit TrapezoidTrajectory (TrapezoidParams params = {});
  Setpoint At (SimTime t) const override;
  /// Duration of one move (excluding dwell).
  double MoveDurationS () const { return m_moveS; }

private:
  Setpoint Move (double tS) const;

  TrapezoidParams m_p;
  double m_accelS;
  double m_cruiseS;
  double m_peakVel;
  double m_moveS;
};

/// Piecewise-linear profile read from `time_ms,setpoint_mm` rows; holds the last value.
class CsvTrajectory : public Trajectory
{
public:
  explicit CsvTrajectory (std::vector<std::pair<double, double>> points);
  static CsvTrajectory Parse (std::istream &is);
  Setpoint At (SimTime t) const override;

private:
  std::vector<std::pair<double, double>> m_points; // (ms, mm)
};

// ---------------------------------------------------------------------------
// Loop configuration and verdicts

enum class AdaptationProfile
{
  Default,
  Adapted
};

std::string ToString (AdaptationProfile p);

/**
 * Timing and supervision settings of the CNC servo loop.
 *
 * The driver qualifies the link while initialising the FPGA: if every
 * round trip observed during the handshake fits the synchronous read
 * timeout it runs synchronous transactions, each reply due within that
 * timeout of its request. Otherwise replies are consumed as they arrive and
 * a watchdog supervises the gap between consecutive replies.
 */
struct LoopConfig
{
  AdaptationProfile profile = AdaptationProfile::Default;
  int64_t servoPeriodUs = 1000;
  int64_t watchdogTimeoutUs = 1650;
  int64_t initGraceUs = 20000;
  int64_t syncReadTimeoutUs = 1500;
  int initHandshakeReplies = 8;
  double followingErrorLimitMm = 0.1;
  PidGains gains;
  AxisParams axis;

  void Validate () const;

  static LoopConfig DefaultProfile ();
  static LoopConfig AdaptedProfile ();
};

struct LoopConfigPair
{
  LoopConfig standard = LoopConfig::DefaultProfile ();
  LoopConfig adapted = LoopConfig::AdaptedProfile ();

  void Validate () const;
};

enum class Outcome
{
  Pass,
  Fail
};

enum class FailCause
{
  None,
  FollowingError,
  Watchdog,
  InitFailure
};

std::string ToString (Outcome o);
std::string ToString (FailCause c);

enum class TransportMode
{
  Unknown,
  Synchronous,
  Pipelined
};

std::string ToString (TransportMode m);

struct TrialVerdict
{
  Outcome outcome = Outcome::Pass;
  FailCause cause = FailCause::None;
  double maxFollowingErrorMm = 0.0;
  SimTime durationSurvived;

  // diagnostics
  TransportMode mode = TransportMode::Unknown;
  SimTime motionStart;
  double maxAbsVelocity = 0.0;
  double maxAbsAcceleration = 0.0;
  uint64_t commandsSent = 0;
  uint64_t feedbackReceived = 0;
  uint64_t sensorFramesBridged = 0;
  uint64_t eventsProcessed = 0;
};

/// Everything one closed-loop trial needs.
struct TrialSetup
{
  LoopConfig loop;
  ChannelProfile commandChannel;
  ChannelProfile feedbackChannel;
  /// Link between CNC and FPGA. Defaults to a transparent wired segment.
  RingConfig controlRing = WiredControlRing ();
  bool sensorsEnabled = true;
  RingConfig sensorRing = RingConfig::Sensor ();
  int64_t sensorPeriodUs = 10000;
  ChannelProfile overlayUplink = ChannelProfile::FromMillis (10.0, 2.0, 1e-3);
  std::shared_ptr<const Trajectory> trajectory;
  SimTime trialLength = SimTime::Seconds (60.0);
  uint64_t seed = 1;
  /// Feedback reaching the CNC at or after this time is lost (cut at the controller port).
  std::optional<SimTime> severFeedbackAt;
  /// Optional per-tick CSV trace (time, setpoint, feedback, command, following error).
  std::ostream *traceCsv = nullptr;
  /// Optional structured event trace.
  std::function<void (const TraceRecord &)> eventTrace;

  /// Two-node CNC/FPGA segment with no token wait, 20 us per hop and no loss.
  static RingConfig WiredControlRing ();
  /// Same channel profile on both directions.
  static TrialSetup Symmetric (const LoopConfig &loop, const ChannelProfile &channel, SimTime length,
                               uint64_t seed);
};

TrialVerdict RunTrial (const TrialSetup &setup);

struct BaselineResult
{
  double maxFollowingErrorMm = 0.0;
  double maxAbsVelocity = 0.0;
};

/**
 * Same controller, driver protocol and axis integration as RunTrial but
 * without any network element: every frame arrives the instant it is sent.
 */
BaselineResult RunNetworkFreeBaseline (const LoopConfig &loop, const Trajectory &trajectory,
                                       SimTime length);

void WriteTrialTraceHeader (std::ostream &os);

// ---------------------------------------------------------------------------
// Calibration

enum class CellClass
{
  Pass,
  PassWithAdaptation,
  Fail
};

std::string ToString (CellClass c);
std::string Symbol (CellClass c);

/// Grid searched by Calibrate. Every list must be non-empty.
struct CalibrationSpace
{
  std::vector<double> kp{120.0, 140.0, 160.0};
  std::vector<double> ki{0.0, 50.0};
  std::vector<double> kd{0.0};
  std::vector<double> followingErrorLimitMm{0.1, 0.2};
  std::vector<int64_t> defaultWatchdogUs{1650, 1500};
  std::vector<int64_t> adaptedWatchdogUs{1900, 2000};
  std::vector<int64_t> defaultInitGraceUs{20000};
  std::vector<int64_t> adaptedInitGraceUs{50000};

  std::size_t Size () const;
  void Validate () const;
  /// Candidate number `index` in row-major order (kp varies slowest).
  LoopConfigPair Candidate (std::size_t index, const LoopConfigPair &base) const;
};

/// Classes for every cell in the caller's fixed cell order.
using CandidateEvaluator = std::function<std::vector<CellClass> (const LoopConfigPair &)>;

struct CalibrationResult
{
  bool success = false;
  LoopConfigPair configs;
  std::size_t candidateIndex = 0;
  std::size_t candidatesTried = 0;
  std::size_t bestMatches = 0;
  /// confusion[target][achieved] for the best candidate.
  std::array<std::array<int, 3>, 3> confusion{};
  std::vector<CellClass> bestClasses;
};

/**
 * Grid search for a configuration pair whose sweep reproduces `target`
 * exactly. Candidates are tried in index order and the first exact match
 * wins, so the result is deterministic.
 */
CalibrationResult Calibrate (const CalibrationSpace &space, const LoopConfigPair &base,
                             const std::vector<CellClass> &target,
                             const CandidateEvaluator &evaluate);

void WriteConfusion (std::ostream &os, const CalibrationResult &result);

} // namespace underlayer

#endif
