//! Bessel functions `J0`, `J1`, `I0`, `I1` for the transfer-matrix kernels.
//!
//! All kernel arguments have the form `2 sqrt(positive)`, so only `x >= 0`
//! is supported.  The `J` functions alternate in sign and lose digits to
//! cancellation in a plain f64 Taylor sum, so the series region is evaluated
//! in double-double arithmetic; beyond it the Hankel asymptotic expansion
//! takes over.  The target is 1e-12 relative accuracy for `x <= 50`.

use crate::error::{Error, Result};

/// Kernel function selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    J0,
    J1,
    I0,
    I1,
}

/// Evaluate the selected Bessel function at `x >= 0`.
pub fn bessel(kind: Kind, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("bessel: argument {x} must be >= 0")));
    }
    Ok(match kind {
        Kind::J0 => j0(x),
        Kind::J1 => j1(x),
        Kind::I0 => i0(x),
        Kind::I1 => i1(x),
    })
}

// ---------------------------------------------------------------------------
// double-double helpers (unevaluated sum hi + lo with |lo| <= ulp(hi)/2)

#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, b: Dd) -> Dd {
        let s = self.hi + b.hi;
        let v = s - self.hi;
        let e = (self.hi - (s - v)) + (b.hi - v);
        let lo = e + self.lo + b.lo;
        let hi = s + lo;
        Dd { hi, lo: lo - (hi - s) }
    }

    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        let lo = e + self.hi * b.lo + self.lo * b.hi;
        let hi = p + lo;
        Dd { hi, lo: lo - (hi - p) }
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = q1 * d;
        let e_p = q1.mul_add(d, -p); // exact: q1*d = p + e_p
        let r = (self.hi - p) - e_p + self.lo; // self.hi - p exact by Sterbenz
        let q2 = r / d;
        let hi = q1 + q2;
        Dd { hi, lo: q2 - (hi - q1) }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

// switch point between the Taylor series and the asymptotic expansion
const J_SERIES_CUT: f64 = 22.0;

/// Taylor series for J_nu (nu = 0 or 1) in double-double arithmetic.
/// Near the cut the largest term is ~3e8, so the ~11 digits lost to
/// cancellation still leave well over f64 precision in the dd sum.
fn j_series(nu: u32, x: f64) -> f64 {
    let q = Dd::from(x * 0.5).mul(Dd::from(x * 0.5));
    let mut term = Dd::from(1.0);
    if nu == 1 {
        term = Dd::from(x * 0.5);
    }
    let mut sum = term;
    let mut k = 1u32;
    loop {
        term = term.mul(q).div_f64(-((k * (k + nu)) as f64));
        sum = sum.add(term);
        if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-30) || k > 200 {
            break;
        }
        k += 1;
    }
    sum.value()
}

/// Hankel asymptotic expansion
///   J_nu(x) ~ sqrt(2/(pi x)) [P cos(chi) - Q sin(chi)],
///   chi = x - (nu/2 + 1/4) pi,
/// with P = 1 - u2 + u4 - ..., Q = u1 - u3 + ... and
/// u_m = u_{m-1} (4 nu^2 - (2m-1)^2) / (8 m x).  The smallest term at the
/// series cut is ~e^(-2x), far below 1e-13 for x >= 22.
fn j_asymptotic(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut u = 1.0;
    let mut m = 1u32;
    loop {
        u *= (mu - f64::from((2 * m - 1).pow(2))) / (8.0 * f64::from(m) * x);
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if m % 2 == 1 {
            q += sign * u;
        } else {
            p += sign * u;
        }
        m += 1;
        if u.abs() < 1e-18 || m > 40 {
            break;
        }
    }
    let chi = x - (0.5 * f64::from(nu) + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

pub fn j0(x: f64) -> f64 {
    if x < J_SERIES_CUT {
        j_series(0, x)
    } else {
        j_asymptotic(0, x)
    }
}

pub fn j1(x: f64) -> f64 {
    if x < J_SERIES_CUT {
        j_series(1, x)
    } else {
        j_asymptotic(1, x)
    }
}

/// Modified Bessel functions: all series terms are positive, so the plain
/// f64 Taylor sum is accurate at any argument this crate uses; terms are
/// added until they no longer contribute.
fn i_series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if nu == 1 { 0.5 * x } else { 1.0 };
    let mut sum = term;
    let mut k = 1u32;
    loop {
        term *= q / ((k * (k + nu)) as f64);
        sum += term;
        if term < 1e-17 * sum || k > 400 {
            break;
        }
        k += 1;
    }
    sum
}

pub fn i0(x: f64) -> f64 {
    i_series(0, x)
}

pub fn i1(x: f64) -> f64 {
    i_series(1, x)
}

// ---------------------------------------------------------------------------
// exact cell integrals of the weakly singular convolution kernels
//
// The self-coupling kernels of the transfer matrices have the form
//   k(tau) = sqrt(c/tau) B1(2 sqrt(c tau)),   B in {J, I},
// whose antiderivatives are -J0(2 sqrt(c tau)) and +I0(2 sqrt(c tau)).
// Integrating each quadrature cell exactly removes the 1/sqrt weak
// singularity at tau -> 0.

/// Integral of `sqrt(c/tau) J1(2 sqrt(c tau))` over `tau` in `[lo, hi]`.
pub fn j1_kernel_cell(c: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(c >= 0.0 && 0.0 <= lo && lo <= hi);
    j0(2.0 * (c * lo).sqrt()) - j0(2.0 * (c * hi).sqrt())
}

/// Integral of `sqrt(c/tau) I1(2 sqrt(c tau))` over `tau` in `[lo, hi]`.
pub fn i1_kernel_cell(c: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(c >= 0.0 && 0.0 <= lo && lo <= hi);
    i0(2.0 * (c * hi).sqrt()) - i0(2.0 * (c * lo).sqrt())
}

/// Integral of `J0(2 sqrt(c v))` over `v` in `[lo, hi]`, using the
/// antiderivative `sqrt(v/c) J1(2 sqrt(c v))`.  Falls back to two-point
/// Gauss-Legendre when `c (hi - lo)` is small enough that the antiderivative
/// difference would cancel catastrophically.
pub fn j0_cell(c: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(c >= 0.0 && 0.0 <= lo && lo <= hi);
    if c * hi < 1e-3 {
        return gauss2(|v| j0(2.0 * (c * v).sqrt()), lo, hi);
    }
    let anti = |v: f64| {
        let u = c * v;
        u.sqrt() * j1(2.0 * u.sqrt()) / c
    };
    anti(hi) - anti(lo)
}

/// Integral of `I0(2 sqrt(c v))` over `v` in `[lo, hi]`, via the
/// antiderivative `sqrt(v/c) I1(2 sqrt(c v))`.
pub fn i0_cell(c: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(c >= 0.0 && 0.0 <= lo && lo <= hi);
    if c * hi < 1e-3 {
        return gauss2(|v| i0(2.0 * (c * v).sqrt()), lo, hi);
    }
    let anti = |v: f64| {
        let u = c * v;
        u.sqrt() * i1(2.0 * u.sqrt()) / c
    };
    anti(hi) - anti(lo)
}

fn gauss2<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let x = half / 3.0f64.sqrt();
    half * (f(mid - x) + f(mid + x))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive-Simpson quadrature of the integral representations, used as
    /// an independent oracle:
    ///   J0(x) = (1/pi) int_0^pi cos(x sin t) dt
    ///   J1(x) = (1/pi) int_0^pi cos(t - x sin t) dt
    ///   I0(x) = (1/pi) int_0^pi exp(x cos t) dt
    ///   I1(x) = (1/pi) int_0^pi exp(x cos t) cos t dt
    mod oracle {
        /// Composite Simpson rule; at this resolution the error for the
        /// integrands below stays under 1e-13 up to x = 50.
        fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
            let n = 100_000usize; // even
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + k as f64 * h);
            }
            acc * h / 3.0
        }

        pub fn j0(x: f64) -> f64 {
            integrate(|t| (x * t.sin()).cos(), 0.0, std::f64::consts::PI) / std::f64::consts::PI
        }

        pub fn j1(x: f64) -> f64 {
            integrate(|t| (t - x * t.sin()).cos(), 0.0, std::f64::consts::PI)
                / std::f64::consts::PI
        }

        pub fn i0(x: f64) -> f64 {
            integrate(|t| (x * t.cos()).exp(), 0.0, std::f64::consts::PI) / std::f64::consts::PI
        }

        pub fn i1(x: f64) -> f64 {
            integrate(|t| (x * t.cos()).exp() * t.cos(), 0.0, std::f64::consts::PI)
                / std::f64::consts::PI
        }
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
        assert_eq!(i0(0.0), 1.0);
        assert_eq!(i1(0.0), 0.0);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        assert!(bessel(Kind::J0, -0.5).is_err());
        assert!(bessel(Kind::I1, f64::NAN).is_err());
    }

    #[test]
    fn j0_first_zero() {
        assert!(j0(2.404825557695773).abs() < 1e-9);
    }

    #[test]
    fn matches_quadrature_oracle() {
        let xs: Vec<f64> = (0..=100)
            .map(|k| 0.5 * k as f64)
            .chain([0.01, 0.1, 2.404826, 21.9, 22.1, 49.7].into_iter())
            .collect();
        for &x in &xs {
            let scale_j = 1.0f64.max(x.abs().sqrt().recip());
            assert!(
                (j0(x) - oracle::j0(x)).abs() < 1e-12 * scale_j,
                "j0({x}): {} vs {}",
                j0(x),
                oracle::j0(x)
            );
            assert!(
                (j1(x) - oracle::j1(x)).abs() < 1e-12 * scale_j,
                "j1({x}): {} vs {}",
                j1(x),
                oracle::j1(x)
            );
            let ref_i0 = oracle::i0(x);
            assert!(
                (i0(x) - ref_i0).abs() < 1e-12 * ref_i0,
                "i0({x}): {} vs {}",
                i0(x),
                ref_i0
            );
            // the cancelling cos-weighted integrand leaves ~1e-14 absolute
            // noise in the oracle itself at small x
            let ref_i1 = oracle::i1(x);
            assert!(
                (i1(x) - ref_i1).abs() < 1e-12 * ref_i1.max(0.1),
                "i1({x}): {} vs {}",
                i1(x),
                ref_i1
            );
        }
    }

    #[test]
    fn scaled_i0_monotone_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 0..=500 {
            let x = 0.1 * k as f64;
            let v = i0(x) * (-x).exp();
            assert!(v <= prev + 1e-15, "i0(x)*exp(-x) not monotone at x={x}");
            prev = v;
        }
    }

    #[test]
    fn kernel_cells_match_quadrature() {
        // cell integrals vs direct numerical integration away from the edge
        let c = 37.0;
        for (lo, hi) in [(0.0, 0.03), (0.03, 0.08), (0.5, 0.52), (0.0, 1.0)] {
            let n = 40_000;
            let mut acc_j = 0.0;
            let mut acc_i = 0.0;
            let h = (hi - lo) / n as f64;
            for k in 0..n {
                let tau = lo + (k as f64 + 0.5) * h;
                acc_j += (c / tau).sqrt() * j1(2.0 * (c * tau).sqrt()) * h;
                acc_i += (c / tau).sqrt() * i1(2.0 * (c * tau).sqrt()) * h;
            }
            let exact_j = j1_kernel_cell(c, lo, hi);
            let exact_i = i1_kernel_cell(c, lo, hi);
            // midpoint quadrature of the 1/sqrt singularity converges slowly;
            // tolerance reflects the reference, not the exact cell value
            let tol = if lo == 0.0 { 2e-4 } else { 1e-8 };
            assert!((acc_j - exact_j).abs() < tol * exact_j.abs().max(1.0));
            assert!((acc_i - exact_i).abs() < tol * exact_i.abs().max(1.0));
        }
    }
}
