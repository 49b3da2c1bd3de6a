#include "relief/predicates.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

namespace relief {

namespace {

using Rational = boost::multiprecision::cpp_rational;
using Wide = boost::multiprecision::int512_t;

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;  // 2^-53
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

template <typename T>
int sign(const T& v) {
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

// Writes every value as an integer multiple of a common power of two.
// Fails when the exponents spread too far for the 512-bit products.
template <std::size_t N>
bool to_fixed(const std::array<double, N>& v, std::array<Wide, N>& out) {
  std::array<std::int64_t, N> mant{};
  std::array<int, N> expo{};
  int emin = std::numeric_limits<int>::max();
  int emax = std::numeric_limits<int>::min();
  for (std::size_t i = 0; i < N; ++i) {
    if (v[i] == 0.0) continue;
    int e = 0;
    const double f = std::frexp(v[i], &e);
    mant[i] = static_cast<std::int64_t>(std::ldexp(f, 53));
    expo[i] = e - 53;
    emin = std::min(emin, expo[i]);
    emax = std::max(emax, expo[i]);
  }
  if (emin != std::numeric_limits<int>::max() && emax - emin > 64) return false;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = v[i] == 0.0 ? Wide(0) : (Wide(mant[i]) << (expo[i] - emin));
  }
  return true;
}

int orient_exact(const Vec2& a, const Vec2& b, const Vec2& c) {
  std::array<Wide, 6> w;
  if (to_fixed(std::array<double, 6>{a.x(), a.y(), b.x(), b.y(), c.x(), c.y()}, w)) {
    const Wide det = (w[0] - w[4]) * (w[3] - w[5]) - (w[1] - w[5]) * (w[2] - w[4]);
    return sign(det);
  }
  const Rational ax(a.x()), ay(a.y()), bx(b.x()), by(b.y()), cx(c.x()), cy(c.y());
  const Rational det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
  return sign(det);
}

int incircle_exact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  std::array<Wide, 8> w;
  if (to_fixed(std::array<double, 8>{a.x(), a.y(), b.x(), b.y(), c.x(), c.y(), d.x(), d.y()}, w)) {
    const Wide adx = w[0] - w[6], ady = w[1] - w[7];
    const Wide bdx = w[2] - w[6], bdy = w[3] - w[7];
    const Wide cdx = w[4] - w[6], cdy = w[5] - w[7];
    const Wide det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) +
                     (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
                     (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    return sign(det);
  }
  const Rational dx(d.x()), dy(d.y());
  const Rational adx = Rational(a.x()) - dx, ady = Rational(a.y()) - dy;
  const Rational bdx = Rational(b.x()) - dx, bdy = Rational(b.y()) - dy;
  const Rational cdx = Rational(c.x()) - dx, cdy = Rational(c.y()) - dy;
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
  return sign(det);
}

}  // namespace

int orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double left = (a.x() - c.x()) * (b.y() - c.y());
  const double right = (a.y() - c.y()) * (b.x() - c.x());
  const double det = left - right;
  const double bound = kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return det > 0 ? 1 : -1;
  return orient_exact(a, b, c);
}

int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = kInCircleBound * permanent;
  if (det > bound || -det > bound) return det > 0 ? 1 : -1;
  return incircle_exact(a, b, c, d);
}

}  // namespace relief
