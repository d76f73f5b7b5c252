#pragma once

namespace alphaadv {

/// Inverse error function on (-1, 1). Returns +/-inf at +/-1 and NaN outside.
///
/// A rational starting guess is refined with Newton steps on erf, so that
/// |erf(erfinv(x)) - x| stays within a few ulps of 1 across the open interval.
double erfinv(double x);

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile, sqrt(2) * erfinv(2p - 1).
double normal_quantile(double p);

} // namespace alphaadv
