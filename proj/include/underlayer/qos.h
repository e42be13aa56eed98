#ifndef UNDERLAYER_QOS_H
#define UNDERLAYER_QOS_H

#include <cstdint>

namespace underlayer {

/// Service requirements attached to a network or a traffic class.
struct QosProfile
{
  int64_t maxLatencyUs = 10000;
  int64_t maxJitterUs = 1000;
  double maxLossRate = 1e-3;

  /// Machine-tool closed-loop class: 0.5-10 ms end-to-end, loss below 1e-9.
  bool IsUrllc () const { return maxLatencyUs >= 500 && maxLatencyUs <= 10000 && maxLossRate <= 1e-9; }

  static QosProfile Urllc () { return {2000, 200, 1e-9}; }
  static QosProfile Sensor () { return {10000, 1000, 1e-6}; }
  /// Relaxed overlay service for non mission critical traffic.
  static QosProfile Overlay () { return {50000, 10000, 1e-3}; }
};

} // namespace underlayer

#endif
