#ifndef UNDERLAYER_HARNESS_H
#define UNDERLAYER_HARNESS_H

#include "underlayer/channel.h"
#include "underlayer/plant.h"
#include "underlayer/ring.h"
#include "underlayer/spectrum.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace underlayer {

inline constexpr const char *kArtifactVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Sweep

struct SweepSpec
{
  std::vector<double> latenciesMs{0.5, 1.0, 1.5, 2.0, 3.0, 5.0};
  std::vector<double> jittersMs{0.05, 0.1, 0.15, 0.2, 0.3};
  int seedsPerCell = 3;
  double trialLengthS = 60.0;
  uint64_t baseSeed = 1;

  void Validate () const;
  /// Seed list shared by every cell (common random numbers across the grid).
  std::vector<uint64_t> Seeds () const;
  std::size_t CellCount () const { return latenciesMs.size () * jittersMs.size (); }
};

/// Everything about a trial that is not swept.
struct TrialEnvironment
{
  RingConfig controlRing = TrialSetup::WiredControlRing ();
  bool sensorsEnabled = true;
  JitterDistribution distribution = JitterDistribution::Uniform;
  double lossRate = 0.0;
  TrapezoidParams trapezoid;
  /// CSV trajectory; empty means the trapezoid generator.
  std::string trajectoryFile;

  std::shared_ptr<const Trajectory> MakeTrajectory () const;
};

/// Builds the setup for one trial with symmetric per-direction impairment.
TrialSetup MakeTrialSetup (const TrialEnvironment &env, const LoopConfig &loop, double latencyMs,
                           double jitterMs, double lengthS, uint64_t seed);

struct ProfileResult
{
  Outcome outcome = Outcome::Pass;
  FailCause cause = FailCause::None;
  double maxFollowingErrorMm = 0.0;
  int64_t survivedUs = 0;
  TransportMode mode = TransportMode::Unknown;

  bool operator== (const ProfileResult &) const = default;
};

ProfileResult Summarize (const TrialVerdict &v);

struct SeedDetail
{
  uint64_t seed = 0;
  ProfileResult standard;
  ProfileResult adapted;

  bool operator== (const SeedDetail &) const = default;
};

struct CellVerdict
{
  double latencyMs = 0.0;
  double jitterMs = 0.0;
  CellClass cls = CellClass::Fail;
  std::vector<SeedDetail> seeds;

  bool operator== (const CellVerdict &) const = default;
};

/// Pass if the default profile passed every seed, else PassWithAdaptation if
/// the adapted profile did, else Fail.
CellClass Classify (const std::vector<SeedDetail> &seeds);

/// Jitter rows x latency columns, stored row-major.
struct SweepMatrix
{
  std::vector<double> latenciesMs;
  std::vector<double> jittersMs;
  std::vector<CellVerdict> cells;

  const CellVerdict &At (std::size_t jitterIdx, std::size_t latencyIdx) const
  {
    return cells.at (jitterIdx * latenciesMs.size () + latencyIdx);
  }
  std::vector<CellClass> Classes () const;
  bool operator== (const SweepMatrix &) const = default;
};

enum class EvaluationOrder
{
  DescendingSeverity,
  Ascending,
  Shuffled
};

struct SweepOptions
{
  unsigned threads = 0; // 0: hardware concurrency
  EvaluationOrder order = EvaluationOrder::DescendingSeverity;
  uint64_t shuffleSeed = 0;
};

/// Cell indices (row-major) in the order they are handed to workers.
std::vector<std::size_t> EvaluationSequence (const SweepSpec &spec, const SweepOptions &options);

SweepMatrix RunSweep (const SweepSpec &spec, const LoopConfigPair &loops, const TrialEnvironment &env,
                      const SweepOptions &options = {});

/// Reference classes for the default 6x5 grid, row-major (jitter rows).
std::vector<CellClass> ReferenceTable1 ();

struct MonotonicityViolation
{
  std::size_t failJitter, failLatency;
  std::size_t passJitter, passLatency;
};

/// Fail cells that are dominated (both axes <=) by a non-Fail cell.
std::vector<MonotonicityViolation> FindMonotonicityViolations (const SweepMatrix &m);

// ---------------------------------------------------------------------------
// Rendering

enum class MatrixFormat
{
  Markdown,
  Csv,
  Structured
};

MatrixFormat ParseMatrixFormat (const std::string &s);
std::string RenderMatrix (const SweepMatrix &m, MatrixFormat format);
/// Inverse of the CSV rendering.
SweepMatrix ParseMatrixCsv (std::istream &is);

// ---------------------------------------------------------------------------
// Configuration

struct HarnessConfig
{
  LoopConfigPair loops;
  SweepSpec sweep;
  TrialEnvironment env;
  CalibrationSpace calibration;
  unsigned threads = 0;

  void Validate () const;
};

/// Reads the INI schema documented in README.md. Unknown keys are errors.
HarnessConfig LoadConfig (std::istream &is);
HarnessConfig LoadConfigFile (const std::string &path);
/// Writes every setting LoadConfig understands; LoadConfig reads it back unchanged.
void WriteConfigIni (std::ostream &os, const HarnessConfig &c);

nlohmann::ordered_json ToJson (const HarnessConfig &c);
HarnessConfig HarnessConfigFromJson (const nlohmann::json &j);

struct RunManifest
{
  std::string artifactVersion = kArtifactVersion;
  std::string command;
  HarnessConfig config;
  std::vector<uint64_t> seeds;
  std::vector<std::string> outputs;
  double wallClockS = 0.0;

  nlohmann::ordered_json ToJson () const;
  static RunManifest FromJson (const nlohmann::json &j);
};

// ---------------------------------------------------------------------------
// Calibration against the reference matrix

CalibrationResult CalibrateToTable1 (const HarnessConfig &config, const SweepOptions &options = {});

// ---------------------------------------------------------------------------
// Spectrum scenarios

struct ScenarioCommand
{
  enum class Kind
  {
    StaticPlan,
    Request,
    Release,
    Expire
  };
  int line = 0;
  SimTime at;
  Kind kind = Kind::Request;
  SpectrumRequest request;
  std::optional<SimTime> lease;
};

class ScenarioError : public ConfigError
{
public:
  ScenarioError (int line, const std::string &what)
    : ConfigError ("line " + std::to_string (line) + ": " + what), m_line (line)
  {
  }
  int Line () const { return m_line; }

private:
  int m_line;
};

/**
 * One command per line:
 *   at <ms> static-plan
 *   at <ms> request <name> x=<m> y=<m> r=<m> bw=<MHz> [role=..] [lease=<ms>]
 *   at <ms> release <name>
 *   at <ms> expire
 * Times must not decrease. '#' starts a comment.
 */
std::vector<ScenarioCommand> ParseScenario (std::istream &is);

struct ScenarioResult
{
  std::vector<AuditRecord> audit;
  std::vector<SpectrumGrant> finalGrants;
  std::size_t grants = 0;
  std::size_t rejections = 0;
};

ScenarioResult RunSpectrumScenario (const std::vector<ScenarioCommand> &script, Band band = {});

void WriteAuditCsv (std::ostream &os, const std::vector<AuditRecord> &audit);
void WriteOccupancyCsv (std::ostream &os, const std::vector<SpectrumGrant> &grants);

} // namespace underlayer

#endif
