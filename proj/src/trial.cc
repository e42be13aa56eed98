#include "underlayer/plant.h"

#include <cmath>
#include <ostream>

namespace underlayer {

namespace {

const char *const kCnc = "cnc";
const char *const kFpga = "fpga";
constexpr uint32_t kCommandBytes = 80;
constexpr uint32_t kFeedbackBytes = 159;
constexpr int64_t kAxisStepUs = 100;

struct AxisTracker
{
  AxisModel axis;
  double maxAbsVelocity = 0.0;
  double maxAbsAcceleration = 0.0;

  void Advance (double cmd, int64_t durationUs)
  {
    while (durationUs > 0)
      {
        int64_t step = std::min (durationUs, kAxisStepUs);
        axis = StepAxis (axis, cmd, step);
        maxAbsVelocity = std::max (maxAbsVelocity, std::abs (axis.velocity));
        maxAbsAcceleration = std::max (maxAbsAcceleration, std::abs (axis.acceleration));
        durationUs -= step;
      }
  }
};

const Trajectory &
TrajectoryOrDefault (const std::shared_ptr<const Trajectory> &t)
{
  static const TrapezoidTrajectory fallback;
  return t ? *t : fallback;
}

class ClosedLoopTrial
{
public:
  explicit ClosedLoopTrial (const TrialSetup &setup);
  TrialVerdict Run ();

private:
  enum class Phase
  {
    Init,
    Running,
    Done
  };

  void Tick ();
  void SendCommand (uint64_t seq, double command, double setpoint);
  void OnControlRingDelivery (const Frame &f, SimTime t);
  void FpgaReceive (const Frame &f);
  void CncReceive (const Frame &f);
  void ArmWatchdog ();
  void Fail (FailCause cause);
  void StartSensors ();
  void EmitSensor (std::size_t idx);

  struct SensorSource
  {
    std::string node;
    uint64_t count;
  };

  const TrialSetup &m_setup;
  const LoopConfig &m_loop;
  const Trajectory &m_trajectory;
  Simulator m_sim;
  Ring m_control;
  std::unique_ptr<Ring> m_sensorRing;
  std::unique_ptr<MasterNode> m_master;
  Channel m_cmdChannel;
  Channel m_fbChannel;
  RngStream m_cmdRng;
  RngStream m_fbRng;
  RngStream m_sensorRng;
  std::vector<SensorSource> m_sensors;

  // CNC side
  Phase m_phase = Phase::Init;
  uint64_t m_nextSeq = 0;
  SimTime m_nextTick;
  std::vector<SimTime> m_sendTime;
  std::vector<double> m_sentSetpoint;
  std::vector<char> m_replied;
  int m_initReplies = 0;
  int64_t m_maxInitRttUs = 0;
  int64_t m_latestSeq = -1;
  double m_latestPosition = 0.0;
  PidController m_pid;
  EventId m_watchdog = 0;
  SimTime m_motionStart;

  // FPGA side
  AxisTracker m_axis;
  double m_fpgaCommand = 0.0;
  SimTime m_fpgaLast;
  int64_t m_fpgaLastSeq = -1;

  TrialVerdict m_verdict;
};

ClosedLoopTrial::ClosedLoopTrial (const TrialSetup &setup)
  : m_setup (setup),
    m_loop (setup.loop),
    m_trajectory (TrajectoryOrDefault (setup.trajectory)),
    m_control (m_sim, setup.controlRing, DeriveSeed (setup.seed, {1})),
    m_cmdChannel (setup.commandChannel),
    m_fbChannel (setup.feedbackChannel),
    m_cmdRng (setup.seed, stream::kCommandJitter),
    m_fbRng (setup.seed, stream::kFeedbackJitter),
    m_sensorRng (setup.seed, stream::kSensorTraffic),
    m_pid (setup.loop.gains)
{
  m_loop.Validate ();
  if (!m_control.HasNode (kCnc) || !m_control.HasNode (kFpga))
    throw ConfigError ("control ring must contain the 'cnc' and 'fpga' nodes");
  if (m_setup.trialLength.Us () <= 0)
    throw ConfigError ("trial length must be positive");
  m_axis.axis.params = m_loop.axis;
  if (setup.eventTrace)
    m_sim.SetTraceSink (setup.eventTrace);
  m_control.SetDeliveryHandler ([this] (const Frame &f, SimTime t) { OnControlRingDelivery (f, t); });

  if (setup.sensorsEnabled)
    {
      m_sensorRing = std::make_unique<Ring> (m_sim, setup.sensorRing, DeriveSeed (setup.seed, {2}));
      m_master = std::make_unique<MasterNode> (m_sim, kCnc, m_control, *m_sensorRing, setup.overlayUplink,
                                               DeriveSeed (setup.seed, {3}));
      m_sensorRing->SetDeliveryHandler ([this] (const Frame &f, SimTime t) {
        if (f.destination == m_master->Id ())
          m_master->BridgeFrame (f, t);
      });
      m_master->SetOverlayHandler ([this] (const Frame &, SimTime) { ++m_verdict.sensorFramesBridged; });
    }
}

void
ClosedLoopTrial::StartSensors ()
{
  if (!m_sensorRing)
    return;
  const auto &nodes = m_sensorRing->Config ().nodes;
  const int64_t period = m_setup.sensorPeriodUs;
  if (period <= 0)
    throw ConfigError ("sensor period must be positive");
  for (const auto &node : nodes)
    {
      if (node == m_master->Id ())
        continue;
      auto offset = static_cast<int64_t> (m_sensorRng.NextU64 () % static_cast<uint64_t> (period));
      m_sensors.push_back ({node, 0});
      std::size_t idx = m_sensors.size () - 1;
      m_sim.Schedule (SimTime (offset), node, "sensor-sample", [this, idx] { EmitSensor (idx); });
    }
}

void
ClosedLoopTrial::EmitSensor (std::size_t idx)
{
  auto &src = m_sensors[idx];
  Frame f;
  f.id = ++src.count;
  f.source = src.node;
  f.destination = m_master->Id ();
  f.payloadBytes = 100;
  f.cls = FrameClass::Sensor;
  m_sensorRing->Enqueue (src.node, std::move (f));
  m_sim.ScheduleIn (SimTime (m_setup.sensorPeriodUs), src.node, "sensor-sample",
                    [this, idx] { EmitSensor (idx); });
}

void
ClosedLoopTrial::Fail (FailCause cause)
{
  if (m_phase == Phase::Done)
    return;
  m_phase = Phase::Done;
  m_verdict.outcome = Outcome::Fail;
  m_verdict.cause = cause;
  m_verdict.durationSurvived = m_sim.Now ();
  m_sim.Stop ();
}

void
ClosedLoopTrial::SendCommand (uint64_t seq, double command, double setpoint)
{
  SimTime now = m_sim.Now ();
  m_sendTime.push_back (now);
  m_sentSetpoint.push_back (setpoint);
  m_replied.push_back (0);
  Frame f;
  f.id = seq;
  f.source = kCnc;
  f.destination = kFpga;
  f.payloadBytes = kCommandBytes;
  f.cls = FrameClass::Urllc;
  f.seq = seq;
  f.value = command;
  ++m_verdict.commandsSent;
  m_control.Enqueue (kCnc, std::move (f));

  if (m_phase == Phase::Running && m_verdict.mode == TransportMode::Synchronous)
    {
      m_sim.Schedule (now + SimTime (m_loop.syncReadTimeoutUs), kCnc, "read-deadline", [this, seq] {
        if (!m_replied[seq])
          Fail (FailCause::Watchdog);
      });
    }
}

void
ClosedLoopTrial::Tick ()
{
  if (m_phase == Phase::Done)
    return;
  SimTime now = m_sim.Now ();
  uint64_t seq = m_nextSeq++;
  m_nextTick = now + SimTime (m_loop.servoPeriodUs);

  if (m_phase == Phase::Init)
    SendCommand (seq, 0.0, 0.0);
  else
    {
      Setpoint sp = m_trajectory.At (now - m_motionStart);
      double aligned = m_sentSetpoint[static_cast<std::size_t> (m_latestSeq)];
      double fe = aligned - m_latestPosition;
      m_verdict.maxFollowingErrorMm = std::max (m_verdict.maxFollowingErrorMm, std::abs (fe));
      if (std::abs (fe) > m_loop.followingErrorLimitMm)
        {
          Fail (FailCause::FollowingError);
          return;
        }
      double dt = static_cast<double> (m_loop.servoPeriodUs) * 1e-6;
      double command = m_loop.gains.velocityFeedForward * sp.velocity
                       + m_pid.Tick (aligned, m_latestPosition, dt);
      if (m_setup.traceCsv)
        *m_setup.traceCsv << now.Ms () << ',' << sp.position << ',' << m_latestPosition << ','
                          << command << ',' << fe << '\n';
      SendCommand (seq, command, sp.position);
    }
  m_sim.Schedule (m_nextTick, kCnc, "servo-tick", [this] { Tick (); });
}

void
ClosedLoopTrial::OnControlRingDelivery (const Frame &f, SimTime t)
{
  const bool toFpga = f.destination == kFpga;
  Channel &ch = toFpga ? m_cmdChannel : m_fbChannel;
  RngStream &rng = toFpga ? m_cmdRng : m_fbRng;
  auto rec = ch.Transmit (f.id, t, rng);
  if (!rec.delivered)
    return;
  if (toFpga)
    m_sim.Schedule (*rec.delivered, kFpga, "command-rx", [this, f] { FpgaReceive (f); });
  else
    m_sim.Schedule (*rec.delivered, kCnc, "feedback-rx", [this, f] { CncReceive (f); });
}

void
ClosedLoopTrial::FpgaReceive (const Frame &f)
{
  SimTime now = m_sim.Now ();
  m_axis.Advance (m_fpgaCommand, (now - m_fpgaLast).Us ());
  m_fpgaLast = now;
  if (static_cast<int64_t> (f.seq) <= m_fpgaLastSeq)
    return; // stale command overtaken by a newer one
  m_fpgaLastSeq = static_cast<int64_t> (f.seq);
  double sampled = m_axis.axis.position;
  m_fpgaCommand = f.value;

  Frame reply;
  reply.id = f.seq;
  reply.source = kFpga;
  reply.destination = kCnc;
  reply.payloadBytes = kFeedbackBytes;
  reply.cls = FrameClass::Urllc;
  reply.seq = f.seq;
  reply.value = sampled;
  m_control.Enqueue (kFpga, std::move (reply));
}

void
ClosedLoopTrial::ArmWatchdog ()
{
  if (m_watchdog != 0)
    m_sim.Cancel (m_watchdog);
  m_watchdog = m_sim.ScheduleIn (SimTime (m_loop.watchdogTimeoutUs), kCnc, "watchdog",
                                 [this] { Fail (FailCause::Watchdog); });
}

void
ClosedLoopTrial::CncReceive (const Frame &f)
{
  if (m_phase == Phase::Done)
    return;
  SimTime now = m_sim.Now ();
  if (m_setup.severFeedbackAt && now >= *m_setup.severFeedbackAt)
    return; // cable cut at the controller
  ++m_verdict.feedbackReceived;
  auto seq = static_cast<std::size_t> (f.seq);
  m_replied[seq] = 1;
  if (static_cast<int64_t> (f.seq) > m_latestSeq)
    {
      m_latestSeq = static_cast<int64_t> (f.seq);
      m_latestPosition = f.value;
    }

  if (m_phase == Phase::Init)
    {
      ++m_initReplies;
      m_maxInitRttUs = std::max (m_maxInitRttUs, (now - m_sendTime[seq]).Us ());
      if (m_initReplies >= m_loop.initHandshakeReplies)
        {
          m_verdict.mode = m_maxInitRttUs <= m_loop.syncReadTimeoutUs ? TransportMode::Synchronous
                                                                       : TransportMode::Pipelined;
          m_phase = Phase::Running;
          m_motionStart = m_nextTick;
          m_verdict.motionStart = m_motionStart;
          m_pid.Reset ();
          if (m_verdict.mode == TransportMode::Pipelined)
            ArmWatchdog ();
        }
      return;
    }
  if (m_verdict.mode == TransportMode::Pipelined)
    ArmWatchdog ();
}

TrialVerdict
ClosedLoopTrial::Run ()
{
  m_sim.Schedule (SimTime (0), kCnc, "servo-tick", [this] { Tick (); });
  m_sim.Schedule (SimTime (m_loop.initGraceUs), kCnc, "init-grace", [this] {
    if (m_phase == Phase::Init)
      Fail (FailCause::InitFailure);
  });
  StartSensors ();
  m_sim.RunUntil (m_setup.trialLength);
  if (m_phase != Phase::Done)
    {
      m_verdict.outcome = Outcome::Pass;
      m_verdict.cause = FailCause::None;
      m_verdict.durationSurvived = m_setup.trialLength;
    }
  m_verdict.maxAbsVelocity = m_axis.maxAbsVelocity;
  m_verdict.maxAbsAcceleration = m_axis.maxAbsAcceleration;
  m_verdict.eventsProcessed = m_sim.EventsProcessed ();
  return m_verdict;
}

} // namespace

RingConfig
TrialSetup::WiredControlRing ()
{
  RingConfig c;
  c.id = "control";
  c.nodes = {kCnc, kFpga};
  c.slotTimeUs = 0;
  c.txTimeUs = 20;
  c.lossRate = 0.0;
  return c;
}

TrialSetup
TrialSetup::Symmetric (const LoopConfig &loop, const ChannelProfile &channel, SimTime length, uint64_t seed)
{
  TrialSetup s;
  s.loop = loop;
  s.commandChannel = channel;
  s.feedbackChannel = channel;
  s.trialLength = length;
  s.seed = seed;
  return s;
}

TrialVerdict
RunTrial (const TrialSetup &setup)
{
  ClosedLoopTrial trial (setup);
  return trial.Run ();
}

void
WriteTrialTraceHeader (std::ostream &os)
{
  os << "time_ms,setpoint_mm,feedback_mm,command_mm_s,following_error_mm\n";
}

BaselineResult
RunNetworkFreeBaseline (const LoopConfig &loop, const Trajectory &trajectory, SimTime length)
{
  loop.Validate ();
  BaselineResult r;
  AxisTracker axis;
  axis.axis.params = loop.axis;
  PidController pid (loop.gains);
  const int64_t period = loop.servoPeriodUs;
  const double dt = static_cast<double> (period) * 1e-6;
  const auto initTicks = static_cast<int64_t> (loop.initHandshakeReplies);
  const SimTime motionStart (initTicks * period);
  double fpgaCommand = 0.0;
  int64_t last = 0;
  double prevSetpoint = 0.0;
  double prevPosition = 0.0;
  for (int64_t n = 0; n * period <= length.Us (); ++n)
    {
      SimTime now (n * period);
      double command = 0.0;
      double setpoint = 0.0;
      if (n >= initTicks)
        {
          Setpoint sp = trajectory.At (now - motionStart);
          double fe = prevSetpoint - prevPosition;
          r.maxFollowingErrorMm = std::max (r.maxFollowingErrorMm, std::abs (fe));
          command = loop.gains.velocityFeedForward * sp.velocity + pid.Tick (prevSetpoint, prevPosition, dt);
          setpoint = sp.position;
        }
      // instantaneous delivery: the FPGA applies the command and replies at `now`
      axis.Advance (fpgaCommand, now.Us () - last);
      last = now.Us ();
      prevPosition = axis.axis.position;
      fpgaCommand = command;
      prevSetpoint = setpoint;
    }
  r.maxAbsVelocity = axis.maxAbsVelocity;
  return r;
}

} // namespace underlayer
