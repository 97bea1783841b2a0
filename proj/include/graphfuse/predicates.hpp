// Copyright 2026 The GraphFuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Planar orientation and in-circle predicates with exact signs.
//
// Both predicates first evaluate in double precision with a forward error
// bound (Shewchuk's stage-A bounds). Only when the result is too close to zero
// to trust is the determinant recomputed exactly: in 128-bit integers when all
// coordinates are small integers (pixel positions), else in rationals.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

namespace graphfuse {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

namespace detail {

using Exact = boost::multiprecision::cpp_rational;

inline constexpr double kEpsilon = std::numeric_limits<double>::epsilon() / 2.0;
inline constexpr double kOrientBound = (3.0 + 16.0 * kEpsilon) * kEpsilon;
inline constexpr double kInCircleBound = (10.0 + 96.0 * kEpsilon) * kEpsilon;

inline int sign_of(const Exact& v) { return v.sign(); }
inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }
inline int sign_of(__int128 v) { return (v > 0) - (v < 0); }

/// Coordinates up to 2^24 in magnitude keep every in-circle term below 2^104.
inline constexpr double kSmallIntegerLimit = 16777216.0;

inline bool small_integer(double v) {
  return std::abs(v) <= kSmallIntegerLimit && v == std::floor(v);
}

template <class... P>
bool small_integers(const P&... p) {
  return ((small_integer(p.x) && small_integer(p.y)) && ...);
}

inline __int128 as_int(double v) { return static_cast<__int128>(static_cast<std::int64_t>(v)); }

inline int orient_exact(const Point2& a, const Point2& b, const Point2& c) {
  if (small_integers(a, b, c)) {
    const __int128 acx = as_int(a.x) - as_int(c.x), bcx = as_int(b.x) - as_int(c.x);
    const __int128 acy = as_int(a.y) - as_int(c.y), bcy = as_int(b.y) - as_int(c.y);
    return sign_of(acx * bcy - acy * bcx);
  }
  const Exact acx = Exact(a.x) - Exact(c.x), bcx = Exact(b.x) - Exact(c.x);
  const Exact acy = Exact(a.y) - Exact(c.y), bcy = Exact(b.y) - Exact(c.y);
  return sign_of(acx * bcy - acy * bcx);
}

inline int incircle_exact(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  if (small_integers(a, b, c, d)) {
    const __int128 adx = as_int(a.x) - as_int(d.x), ady = as_int(a.y) - as_int(d.y);
    const __int128 bdx = as_int(b.x) - as_int(d.x), bdy = as_int(b.y) - as_int(d.y);
    const __int128 cdx = as_int(c.x) - as_int(d.x), cdy = as_int(c.y) - as_int(d.y);
    const __int128 alift = adx * adx + ady * ady;
    const __int128 blift = bdx * bdx + bdy * bdy;
    const __int128 clift = cdx * cdx + cdy * cdy;
    return sign_of(alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                   clift * (adx * bdy - bdx * ady));
  }
  const Exact adx = Exact(a.x) - Exact(d.x), ady = Exact(a.y) - Exact(d.y);
  const Exact bdx = Exact(b.x) - Exact(d.x), bdy = Exact(b.y) - Exact(d.y);
  const Exact cdx = Exact(c.x) - Exact(d.x), cdy = Exact(c.y) - Exact(d.y);
  const Exact alift = adx * adx + ady * ady;
  const Exact blift = bdx * bdx + bdy * bdy;
  const Exact clift = cdx * cdx + cdy * cdy;
  const Exact det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                    clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace detail

/// +1 if a, b, c turn counter-clockwise, -1 if clockwise, 0 if collinear.
inline int orient2d(const Point2& a, const Point2& b, const Point2& c) {
  const double left = (a.x - c.x) * (b.y - c.y);
  const double right = (a.y - c.y) * (b.x - c.x);
  const double det = left - right;
  const double bound = detail::kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return detail::sign_of(det);
  return detail::orient_exact(a, b, c);
}

/// +1 if d lies strictly inside the circle through the counter-clockwise
/// triangle a, b, c; -1 if strictly outside; 0 if on the circle.
inline int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = detail::kInCircleBound * permanent;
  if (det > bound || -det > bound) return detail::sign_of(det);
  return detail::incircle_exact(a, b, c, d);
}

}  // namespace graphfuse
