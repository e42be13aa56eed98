#include "underlayer/plant.h"

#include <ostream>

namespace underlayer {

std::size_t
CalibrationSpace::Size () const
{
  return kp.size () * ki.size () * kd.size () * followingErrorLimitMm.size () * defaultWatchdogUs.size ()
         * adaptedWatchdogUs.size () * defaultInitGraceUs.size () * adaptedInitGraceUs.size ();
}

void
CalibrationSpace::Validate () const
{
  if (Size () == 0)
    throw ConfigError ("calibration space has an empty axis");
}

LoopConfigPair
CalibrationSpace::Candidate (std::size_t index, const LoopConfigPair &base) const
{
  // innermost axis first
  auto pick = [&index] (const auto &values) {
    auto v = values[index % values.size ()];
    index /= values.size ();
    return v;
  };
  int64_t adaptedGrace = pick (adaptedInitGraceUs);
  int64_t defaultGrace = pick (defaultInitGraceUs);
  int64_t adaptedWd = pick (adaptedWatchdogUs);
  int64_t defaultWd = pick (defaultWatchdogUs);
  double feLimit = pick (followingErrorLimitMm);
  double d = pick (kd);
  double i = pick (ki);
  double p = pick (kp);

  LoopConfigPair out = base;
  for (LoopConfig *c : {&out.standard, &out.adapted})
    {
      c->gains.kp = p;
      c->gains.ki = i;
      c->gains.kd = d;
      c->followingErrorLimitMm = feLimit;
    }
  out.standard.watchdogTimeoutUs = defaultWd;
  out.standard.initGraceUs = defaultGrace;
  out.adapted.watchdogTimeoutUs = adaptedWd;
  out.adapted.initGraceUs = adaptedGrace;
  return out;
}

CalibrationResult
Calibrate (const CalibrationSpace &space, const LoopConfigPair &base, const std::vector<CellClass> &target,
           const CandidateEvaluator &evaluate)
{
  space.Validate ();
  CalibrationResult best;
  bool haveBest = false;
  for (std::size_t idx = 0; idx < space.Size (); ++idx)
    {
      LoopConfigPair candidate = space.Candidate (idx, base);
      try
        {
          candidate.Validate ();
        }
      catch (const ConfigError &)
        {
          continue;
        }
      std::vector<CellClass> got = evaluate (candidate);
      ++best.candidatesTried;
      if (got.size () != target.size ())
        throw std::logic_error ("evaluator returned the wrong number of cells");
      std::size_t matches = 0;
      for (std::size_t k = 0; k < got.size (); ++k)
        matches += got[k] == target[k] ? 1 : 0;
      if (!haveBest || matches > best.bestMatches)
        {
          haveBest = true;
          best.bestMatches = matches;
          best.configs = candidate;
          best.candidateIndex = idx;
          best.bestClasses = got;
          best.confusion = {};
          for (std::size_t k = 0; k < got.size (); ++k)
            ++best.confusion[static_cast<int> (target[k])][static_cast<int> (got[k])];
        }
      if (matches == target.size ())
        {
          best.success = true;
          return best;
        }
    }
  return best;
}

void
WriteConfusion (std::ostream &os, const CalibrationResult &result)
{
  const CellClass classes[] = {CellClass::Pass, CellClass::PassWithAdaptation, CellClass::Fail};
  os << "target \\ achieved";
  for (auto c : classes)
    os << '\t' << Symbol (c);
  os << '\n';
  for (auto t : classes)
    {
      os << Symbol (t);
      for (auto a : classes)
        os << '\t' << result.confusion[static_cast<int> (t)][static_cast<int> (a)];
      os << '\n';
    }
}

} // namespace underlayer
