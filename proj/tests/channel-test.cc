#include "underlayer/channel.h"

#include <doctest.h>

#include <sstream>
#include <vector>

using namespace underlayer;

namespace {

std::vector<DeliveryRecord>
Send (const ChannelProfile &p, int n, int64_t spacingUs, uint64_t seed = 3)
{
  Channel ch (p);
  RngStream rng (seed, stream::kCommandJitter);
  std::vector<DeliveryRecord> out;
  out.reserve (n);
  for (int i = 0; i < n; ++i)
    out.push_back (ch.Transmit (i, SimTime (i * spacingUs), rng));
  return out;
}

} // namespace

TEST_CASE ("degenerate jitter gives a fixed delay")
{
  auto recs = Send (ChannelProfile::FromMillis (1.0, 0.0), 1000, 100);
  for (const auto &r : recs)
    {
      REQUIRE (r.delivered);
      CHECK ((*r.delivered - r.sent).Us () == 1000);
    }
}

TEST_CASE ("zero impairment is the identity")
{
  auto recs = Send (ChannelProfile{}, 10000, 37);
  for (const auto &r : recs)
    {
      REQUIRE (r.delivered);
      CHECK (*r.delivered == r.sent);
      CHECK (r.appliedDelayUs == 0);
    }
}

TEST_CASE ("uniform jitter stays inside mean +- jitter with the right mean")
{
  ChannelProfile p = ChannelProfile::FromMillis (3.0, 0.2);
  auto recs = Send (p, 100000, 1000);
  auto s = EmpiricalStats (recs);
  CHECK (s.minUs >= 2800);
  CHECK (s.maxUs <= 3200);
  CHECK (std::abs (s.meanUs - 3000.0) <= 10.0);
  CHECK (s.dropped == 0);
}

TEST_CASE ("bounded support over 1e6 samples")
{
  ChannelProfile p = ChannelProfile::FromMillis (1.0, 0.2);
  p.reorderAllowed = true;
  auto recs = Send (p, 1000000, 10);
  int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (const auto &r : recs)
    {
      lo = std::min (lo, r.appliedDelayUs);
      hi = std::max (hi, r.appliedDelayUs);
    }
  CHECK (lo >= 800);
  CHECK (hi <= 1200);
  // the extremes are actually reached
  CHECK (lo <= 801);
  CHECK (hi >= 1199);
}

TEST_CASE ("truncated normal jitter is bounded too")
{
  ChannelProfile p = ChannelProfile::FromMillis (1.0, 0.3);
  p.distribution = JitterDistribution::TruncatedNormal;
  p.reorderAllowed = true;
  auto s = EmpiricalStats (Send (p, 100000, 10));
  CHECK (s.minUs >= 700);
  CHECK (s.maxUs <= 1300);
  CHECK (std::abs (s.meanUs - 1000.0) <= 5.0);
}

TEST_CASE ("delays are clamped at zero")
{
  ChannelProfile p = ChannelProfile::FromMillis (0.1, 0.3);
  p.reorderAllowed = true;
  auto recs = Send (p, 100000, 10);
  bool sawZero = false;
  for (const auto &r : recs)
    {
      REQUIRE (r.appliedDelayUs >= 0);
      REQUIRE (*r.delivered >= r.sent);
      sawZero |= r.appliedDelayUs == 0;
    }
  CHECK (sawZero);
}

TEST_CASE ("loss extremes and binomial bound")
{
  auto all = Send (ChannelProfile::FromMillis (1.0, 0.0, 1.0), 1000, 10);
  for (const auto &r : all)
    CHECK (r.Dropped ());

  auto s = EmpiricalStats (Send (ChannelProfile::FromMillis (0.0, 0.0, 1e-3), 1000000, 1));
  CHECK (s.lossFraction >= 0.0005);
  CHECK (s.lossFraction <= 0.0015);
}

TEST_CASE ("fifo preserved unless reordering is allowed")
{
  ChannelProfile p = ChannelProfile::FromMillis (1.0, 0.3);
  auto recs = Send (p, 20000, 50);
  SimTime last;
  for (const auto &r : recs)
    {
      REQUIRE (*r.delivered >= last);
      last = *r.delivered;
    }
  p.reorderAllowed = true;
  auto loose = Send (p, 20000, 50);
  int inversions = 0;
  for (std::size_t i = 1; i < loose.size (); ++i)
    inversions += *loose[i].delivered < *loose[i - 1].delivered;
  CHECK (inversions > 0);
}

TEST_CASE ("same seed, same records")
{
  ChannelProfile p = ChannelProfile::FromMillis (2.0, 0.15, 0.01);
  auto a = Send (p, 5000, 100, 11);
  auto b = Send (p, 5000, 100, 11);
  auto c = Send (p, 5000, 100, 12);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < a.size (); ++i)
    {
      same &= a[i].delivered == b[i].delivered && a[i].appliedDelayUs == b[i].appliedDelayUs;
      differ |= a[i].delivered != c[i].delivered;
    }
  CHECK (same);
  CHECK (differ);
}

TEST_CASE ("sever drops everything from that time on")
{
  Channel ch (ChannelProfile::FromMillis (1.0, 0.0));
  RngStream rng (1, 1);
  ch.SeverAt (SimTime (5000));
  CHECK_FALSE (ch.Transmit (1, SimTime (4999), rng).Dropped ());
  CHECK (ch.Transmit (2, SimTime (5000), rng).Dropped ());
  CHECK (ch.Transmit (3, SimTime (9000), rng).Dropped ());
}

TEST_CASE ("empirical stats")
{
  std::vector<DeliveryRecord> one{{1, SimTime (0), SimTime (500), 500}};
  auto s = EmpiricalStats (one);
  CHECK (s.meanUs == 500);
  CHECK (s.p99Us == 500);
  CHECK (s.maxUs == 500);
  CHECK_THROWS (EmpiricalStats (std::vector<DeliveryRecord>{}));

  std::vector<DeliveryRecord> hundred;
  for (int i = 1; i <= 100; ++i)
    hundred.push_back ({static_cast<uint64_t> (i), SimTime (0), SimTime (i), i});
  CHECK (EmpiricalStats (hundred).p99Us == 99);
}

TEST_CASE ("profile validation")
{
  ChannelProfile p;
  p.meanDelayUs = -1;
  CHECK_THROWS (p.Validate ());
  p = {};
  p.lossRate = 1.5;
  CHECK_THROWS (Channel (p));
  CHECK (ParseJitterDistribution (ToString (JitterDistribution::TruncatedNormal))
         == JitterDistribution::TruncatedNormal);
}

TEST_CASE ("delivery trace csv")
{
  std::ostringstream os;
  std::vector<DeliveryRecord> recs{{1, SimTime (0), SimTime (10), 10}, {2, SimTime (5), std::nullopt, 0}};
  WriteDeliveryTraceCsv (os, recs);
  CHECK (os.str ().rfind ("frame_id,sent_us,delivered_us,delay_us,dropped\n", 0) == 0);
  CHECK (os.str ().find ("2,5,,") != std::string::npos);
}
