// underlayer-sim: command-line front end for sweeps, single trials,
// spectrum scenarios, calibration and matrix rendering.

#include "underlayer/harness.h"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace underlayer;

namespace {

struct Globals
{
  std::string configPath;
  std::optional<uint64_t> seed;
  std::string outDir = "out";
  std::optional<double> trialLengthS;
  unsigned threads = 0;
};

HarnessConfig
LoadGlobals (const Globals &g)
{
  HarnessConfig c = g.configPath.empty () ? HarnessConfig{} : LoadConfigFile (g.configPath);
  if (g.seed)
    c.sweep.baseSeed = *g.seed;
  if (g.trialLengthS)
    c.sweep.trialLengthS = *g.trialLengthS;
  if (g.threads)
    c.threads = g.threads;
  c.Validate ();
  return c;
}

std::string
WriteFile (const Globals &g, const std::string &name, const std::string &content)
{
  fs::create_directories (g.outDir);
  fs::path p = fs::path (g.outDir) / name;
  std::ofstream out (p, std::ios::binary);
  if (!out)
    throw ConfigError ("cannot write " + p.string ());
  out << content;
  return p.string ();
}

EvaluationOrder
ParseOrder (const std::string &s)
{
  if (s == "descending")
    return EvaluationOrder::DescendingSeverity;
  if (s == "ascending")
    return EvaluationOrder::Ascending;
  if (s == "shuffled")
    return EvaluationOrder::Shuffled;
  throw ConfigError ("unknown evaluation order '" + s + "'");
}

int
DoSweep (const Globals &g, const std::string &manifestIn, const std::string &order, bool checkTable1)
{
  HarnessConfig c;
  if (!manifestIn.empty ())
    {
      std::ifstream in (manifestIn);
      if (!in)
        throw ConfigError ("cannot open manifest '" + manifestIn + "'");
      c = RunManifest::FromJson (nlohmann::json::parse (in)).config;
      if (g.threads)
        c.threads = g.threads;
    }
  else
    c = LoadGlobals (g);

  SweepOptions opt;
  opt.threads = c.threads;
  opt.order = ParseOrder (order);
  auto t0 = std::chrono::steady_clock::now ();
  SweepMatrix m = RunSweep (c.sweep, c.loops, c.env, opt);
  double wall = std::chrono::duration<double> (std::chrono::steady_clock::now () - t0).count ();

  RunManifest man;
  man.command = "sweep";
  man.config = c;
  man.seeds = c.sweep.Seeds ();
  man.outputs.push_back (WriteFile (g, "matrix.csv", RenderMatrix (m, MatrixFormat::Csv)));
  man.outputs.push_back (WriteFile (g, "matrix.md", RenderMatrix (m, MatrixFormat::Markdown)));
  man.outputs.push_back (WriteFile (g, "matrix.ndjson", RenderMatrix (m, MatrixFormat::Structured)));
  man.wallClockS = wall;
  WriteFile (g, "manifest.json", man.ToJson ().dump (2) + "\n");

  std::cout << RenderMatrix (m, MatrixFormat::Markdown);
  std::cout << "seeds per cell: " << c.sweep.seedsPerCell << " (the original lab ran one trial per cell)\n";
  std::cout << "wall clock: " << wall << " s, outputs in " << g.outDir << "\n";
  if (checkTable1)
    {
      auto ref = ReferenceTable1 ();
      auto got = m.Classes ();
      if (got.size () != ref.size ())
        {
          std::cerr << "reference check needs the reference 6x5 grid\n";
          return 2;
        }
      std::size_t match = 0;
      for (std::size_t i = 0; i < ref.size (); ++i)
        match += ref[i] == got[i];
      std::cout << "reference match: " << match << "/" << ref.size () << "\n";
      return match == ref.size () ? 0 : 3;
    }
  return 0;
}

int
DoTrial (const Globals &g, double latencyMs, double jitterMs, const std::string &profile, bool trace)
{
  HarnessConfig c = LoadGlobals (g);
  const LoopConfig &loop = profile == "adapted" ? c.loops.adapted : c.loops.standard;
  if (profile != "adapted" && profile != "default")
    throw ConfigError ("profile must be 'default' or 'adapted'");
  uint64_t seed = g.seed ? *g.seed : c.sweep.Seeds ().front ();
  TrialSetup s = MakeTrialSetup (c.env, loop, latencyMs, jitterMs, c.sweep.trialLengthS, seed);
  std::ofstream traceOut;
  if (trace)
    {
      fs::create_directories (g.outDir);
      traceOut.open (fs::path (g.outDir) / "trial_trace.csv");
      WriteTrialTraceHeader (traceOut);
      s.traceCsv = &traceOut;
    }
  TrialVerdict v = RunTrial (s);
  nlohmann::ordered_json j;
  j["latency_ms"] = latencyMs;
  j["jitter_ms"] = jitterMs;
  j["profile"] = profile;
  j["seed"] = seed;
  j["outcome"] = ToString (v.outcome);
  j["cause"] = ToString (v.cause);
  j["max_following_error_mm"] = v.maxFollowingErrorMm;
  j["duration_survived_s"] = v.durationSurvived.S ();
  j["mode"] = ToString (v.mode);
  j["commands_sent"] = v.commandsSent;
  j["feedback_received"] = v.feedbackReceived;
  j["sensor_frames_bridged"] = v.sensorFramesBridged;
  j["events"] = v.eventsProcessed;
  std::cout << j.dump (2) << "\n";
  return 0;
}

int
DoSpectrum (const Globals &g, const std::string &script)
{
  std::ifstream in (script);
  if (!in)
    throw ConfigError ("cannot open scenario '" + script + "'");
  auto cmds = ParseScenario (in);
  ScenarioResult r = RunSpectrumScenario (cmds);
  std::ostringstream audit, occ;
  WriteAuditCsv (audit, r.audit);
  WriteOccupancyCsv (occ, r.finalGrants);
  WriteFile (g, "spectrum_audit.csv", audit.str ());
  WriteFile (g, "spectrum_occupancy.csv", occ.str ());
  std::cout << "grants: " << r.grants << ", rejections: " << r.rejections << ", active at end: "
            << r.finalGrants.size () << "\n"
            << occ.str ();
  return 0;
}

int
DoCalibrate (const Globals &g)
{
  HarnessConfig c = LoadGlobals (g);
  SweepOptions opt;
  opt.threads = c.threads;
  auto t0 = std::chrono::steady_clock::now ();
  CalibrationResult r = CalibrateToTable1 (c, opt);
  double wall = std::chrono::duration<double> (std::chrono::steady_clock::now () - t0).count ();
  std::cout << "candidates tried: " << r.candidatesTried << " of " << c.calibration.Size ()
            << ", best match " << r.bestMatches << "/30, " << wall << " s\n";
  std::ostringstream confusion;
  WriteConfusion (confusion, r);
  WriteFile (g, "calibration_confusion.tsv", confusion.str ());
  if (!r.success)
    {
      std::cerr << "calibration failed: no candidate reproduces the reference matrix\n" << confusion.str ();
      return 2;
    }
  HarnessConfig out = c;
  out.loops = r.configs;
  std::ostringstream ini;
  WriteConfigIni (ini, out);
  std::string path = WriteFile (g, "calibrated.ini", ini.str ());
  std::cout << "candidate " << r.candidateIndex << " reproduces all 30 cells; written to " << path << "\n"
            << confusion.str ();
  return 0;
}

int
DoRender (const std::string &input, const std::string &format)
{
  std::ifstream in (input);
  if (!in)
    throw ConfigError ("cannot open matrix '" + input + "'");
  SweepMatrix m = ParseMatrixCsv (in);
  std::cout << RenderMatrix (m, ParseMatrixFormat (format));
  return 0;
}

} // namespace

int
main (int argc, char **argv)
{
  CLI::App app{"Underlayer network / machine-tool co-simulator"};
  app.require_subcommand (1);
  Globals g;
  app.add_option ("--config", g.configPath, "INI configuration file");
  app.add_option ("--seed", g.seed, "base seed (sweep) or trial seed (trial)");
  app.add_option ("--out", g.outDir, "output directory")->capture_default_str ();
  app.add_option ("--trial-length", g.trialLengthS, "simulated seconds per trial");
  app.add_option ("--threads", g.threads, "worker threads (0: all cores)");

  auto *sweep = app.add_subcommand ("sweep", "latency x jitter verdict matrix");
  std::string manifestIn, order = "descending";
  bool checkTable1 = false;
  sweep->add_option ("--from-manifest", manifestIn, "rerun the configuration recorded in a manifest");
  sweep->add_option ("--order", order, "descending|ascending|shuffled")->capture_default_str ();
  sweep->add_flag ("--check-table1", checkTable1, "compare against the reference matrix");

  auto *trial = app.add_subcommand ("trial", "one closed-loop trial");
  double lat = 1.0, jit = 0.1;
  std::string profile = "default";
  bool trace = false;
  trial->add_option ("--latency", lat, "one-way latency in ms")->capture_default_str ();
  trial->add_option ("--jitter", jit, "jitter half-width in ms")->capture_default_str ();
  trial->add_option ("--profile", profile, "default|adapted")->capture_default_str ();
  trial->add_flag ("--trace", trace, "write trial_trace.csv");

  auto *spectrum = app.add_subcommand ("spectrum", "replay a spectrum scenario script");
  std::string script;
  spectrum->add_option ("script", script, "scenario file")->required ();

  auto *calibrate = app.add_subcommand ("calibrate", "grid-search loop settings against the reference matrix");

  auto *render = app.add_subcommand ("render", "re-render a matrix CSV");
  std::string input, format = "markdown";
  render->add_option ("matrix", input, "matrix.csv from a sweep")->required ();
  render->add_option ("--format", format, "markdown|csv|structured")->capture_default_str ();

  CLI11_PARSE (app, argc, argv);

  try
    {
      if (*sweep)
        return DoSweep (g, manifestIn, order, checkTable1);
      if (*trial)
        return DoTrial (g, lat, jit, profile, trace);
      if (*spectrum)
        return DoSpectrum (g, script);
      if (*calibrate)
        return DoCalibrate (g);
      if (*render)
        return DoRender (input, format);
    }
  catch (const std::exception &e)
    {
      std::cerr << "error: " << e.what () << "\n";
      return 1;
    }
  return 0;
}
