//! Exact angular-momentum algebra.
//!
//! Clebsch-Gordan and Wigner 6j coefficients are evaluated from the Racah
//! closed forms in big-integer rational arithmetic and converted to `f64`
//! only at the API boundary, so selection rules and symmetries hold exactly.
//! On top of those sit the commutator structure constants of the irreducible
//! tensor operators `T_KQ` on a spin-`F0` manifold and the alignment
//! coupling coefficients `c1`, `c3`, `cbar13`.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Angular momentum stored as twice its value, so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };

    /// Construct from twice the value (`from_twice(3)` is 3/2).
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt { twice: 2 * n }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// `j` and `m` must both be integer or both half-integer.
    pub const fn same_parity(self, other: HalfInt) -> bool {
        (self.twice - other.twice) % 2 == 0
    }

    pub const fn abs(self) -> HalfInt {
        HalfInt { twice: self.twice.abs() }
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt { twice: self.twice + rhs.twice }
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt { twice: self.twice - rhs.twice }
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt { twice: -self.twice }
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl std::str::FromStr for HalfInt {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            if den.trim() != "2" {
                return Err(Error::Domain(format!(
                    "half-integer denominator must be 2: `{s}`"
                )));
            }
            let n: i32 = num
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad half-integer `{s}`")))?;
            Ok(HalfInt::from_twice(n))
        } else {
            let n: i32 = s
                .parse()
                .map_err(|_| Error::Domain(format!("bad half-integer `{s}`")))?;
            Ok(HalfInt::from_int(n))
        }
    }
}

/// Alignment coupling coefficients of a spin-`F0` ground state.
///
/// `c1` and `cbar13` are exact rationals; `c3` carries a square root and is
/// kept as a float.  `c3` vanishes identically for `F0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCoefficients {
    pub c1: Ratio<i64>,
    pub c3: f64,
    pub cbar13: Ratio<i64>,
}

impl CouplingCoefficients {
    pub fn c1_f64(&self) -> f64 {
        ratio_to_f64(self.c1)
    }

    pub fn cbar13_f64(&self) -> f64 {
        ratio_to_f64(self.cbar13)
    }
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One term of a tensor-operator commutator expansion: `coefficient * T_{rank, projection}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorTerm {
    pub rank: u32,
    pub projection: i32,
    pub coefficient: f64,
}

// ---------------------------------------------------------------------------
// exact arithmetic helpers

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// Value represented as `factor * sqrt(radicand)` with both parts exact.
struct ExactRoot {
    factor: BigRational,
    radicand: BigRational,
}

impl ExactRoot {
    fn to_f64(&self) -> f64 {
        let f = self.factor.to_f64().expect("rational out of f64 range");
        let r = self.radicand.to_f64().expect("rational out of f64 range");
        f * r.sqrt()
    }
}

/// Halve a twice-value known to be even.
fn half(twice: i32) -> i32 {
    debug_assert!(twice % 2 == 0, "twice-value {twice} is not even");
    twice / 2
}

fn triangle_ok(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    let perim = a.twice + b.twice + c.twice;
    perim % 2 == 0
        && (a.twice - b.twice).abs() <= c.twice
        && c.twice <= a.twice + b.twice
}

/// `Delta^2(a,b,c) = (a+b-c)!(a-b+c)!(-a+b+c)! / (a+b+c+1)!` as an exact rational.
fn delta_sq(a: HalfInt, b: HalfInt, c: HalfInt) -> BigRational {
    let n1 = factorial(half(a.twice + b.twice - c.twice));
    let n2 = factorial(half(a.twice - b.twice + c.twice));
    let n3 = factorial(half(-a.twice + b.twice + c.twice));
    let d = factorial(half(a.twice + b.twice + c.twice) + 1);
    BigRational::new(n1 * n2 * n3, d)
}

fn check_jm(j: HalfInt, m: HalfInt, what: &str) -> Result<()> {
    if j.twice < 0 {
        return Err(Error::Domain(format!("{what}: j = {j} is negative")));
    }
    if !j.same_parity(m) {
        return Err(Error::Domain(format!(
            "{what}: j = {j} and m = {m} have inconsistent parity"
        )));
    }
    if m.abs() > j {
        return Err(Error::Domain(format!("{what}: |m| = |{m}| exceeds j = {j}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// public operations

/// Clebsch-Gordan coefficient `C(j1 m1, j2 m2 | j m)` in the
/// Condon-Shortley convention.
///
/// Returns 0 when `m1 + m2 != m` or the triangle rule fails; malformed
/// half-integers (inconsistent `j`/`m` parity, `|m| > j`) are domain errors.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    check_jm(j1, m1, "clebsch_gordan j1/m1")?;
    check_jm(j2, m2, "clebsch_gordan j2/m2")?;
    check_jm(j, m, "clebsch_gordan j/m")?;

    if m1 + m2 != m || !triangle_ok(j1, j2, j) {
        return Ok(0.0);
    }

    // Racah closed form.  All factorial arguments below are integers once the
    // parity and triangle checks have passed.
    let radicand = BigRational::from(BigInt::from(j.twice + 1))
        * delta_sq(j1, j2, j)
        * BigRational::from(
            factorial(half(j1.twice + m1.twice))
                * factorial(half(j1.twice - m1.twice))
                * factorial(half(j2.twice + m2.twice))
                * factorial(half(j2.twice - m2.twice))
                * factorial(half(j.twice + m.twice))
                * factorial(half(j.twice - m.twice)),
        );

    let k_min = 0
        .max(half(j2.twice - j.twice - m1.twice))
        .max(half(j1.twice + m2.twice - j.twice));
    let k_max = half(j1.twice + j2.twice - j.twice)
        .min(half(j1.twice - m1.twice))
        .min(half(j2.twice + m2.twice));

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(half(j1.twice + j2.twice - j.twice) - k)
            * factorial(half(j1.twice - m1.twice) - k)
            * factorial(half(j2.twice + m2.twice) - k)
            * factorial(half(j.twice - j2.twice + m1.twice) + k)
            * factorial(half(j.twice - j1.twice - m2.twice) + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }

    Ok(ExactRoot { factor: sum, radicand }.to_f64())
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` from the Racah formula.
///
/// Returns 0 when any of the four triads violates the triangle conditions.
pub fn wigner6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> Result<f64> {
    for (j, name) in [(j1, "j1"), (j2, "j2"), (j3, "j3"), (j4, "j4"), (j5, "j5"), (j6, "j6")] {
        if j.twice < 0 {
            return Err(Error::Domain(format!("wigner6j: {name} = {j} is negative")));
        }
    }

    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if triads.iter().any(|&(a, b, c)| !triangle_ok(a, b, c)) {
        return Ok(0.0);
    }

    let radicand: BigRational = triads.iter().map(|&(a, b, c)| delta_sq(a, b, c)).product();

    let a1 = half(j1.twice + j2.twice + j3.twice);
    let a2 = half(j1.twice + j5.twice + j6.twice);
    let a3 = half(j4.twice + j2.twice + j6.twice);
    let a4 = half(j4.twice + j5.twice + j3.twice);
    let b1 = half(j1.twice + j2.twice + j4.twice + j5.twice);
    let b2 = half(j2.twice + j3.twice + j5.twice + j6.twice);
    let b3 = half(j3.twice + j1.twice + j6.twice + j4.twice);

    let k_min = a1.max(a2).max(a3).max(a4);
    let k_max = b1.min(b2).min(b3);

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let num = factorial(k + 1);
        let den = factorial(k - a1)
            * factorial(k - a2)
            * factorial(k - a3)
            * factorial(k - a4)
            * factorial(b1 - k)
            * factorial(b2 - k)
            * factorial(b3 - k);
        let term = BigRational::new(num, den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }

    Ok(ExactRoot { factor: sum, radicand }.to_f64())
}

/// Alignment coefficients `c1`, `c3`, `cbar13` of a spin-`F0` ground state.
///
/// Defined for `F0 >= 1`; the alignment (rank-2) sector does not exist below
/// that, so smaller spins are a domain error.
pub fn alignment_coefficients(f0: HalfInt) -> Result<CouplingCoefficients> {
    let t = i64::from(f0.twice());
    if t < 2 {
        return Err(Error::Domain(format!(
            "alignment coefficients require F0 >= 1, got F0 = {f0}"
        )));
    }
    // c1 = 3 / [F0 (F0+1) (2F0+1)], cbar13 = 15 / [F0 (F0+1) (2F0+1) (2F0+3)]
    // written in twice-values t = 2 F0.
    let c1 = Ratio::new(12, t * (t + 1) * (t + 2));
    let cbar13 = Ratio::new(60, t * (t + 1) * (t + 2) * (t + 3));
    // c3 = -6 sqrt[(F0-1)(F0+2)] / sqrt[7 F0 (F0+1) (2F0-1) (2F0+1) (2F0+3)]
    let num = ((t - 2) * (t + 4)) as f64;
    let den = (7 * t * (t + 2) * (t - 1) * (t + 1) * (t + 3)) as f64;
    let c3 = if t == 2 { 0.0 } else { -6.0 * num.sqrt() / den.sqrt() };
    Ok(CouplingCoefficients { c1, c3, cbar13 })
}

/// Commutator of irreducible tensor operators on a spin-`F0` manifold:
/// `[T_{KQ}, T_{K'Q'}] = sum_K'' coeff * T_{K'' Q+Q'}`.
///
/// Only `K''` with `K + K' + K''` odd contribute; the projection of every
/// term is `Q + Q'`.
pub fn tensor_commutator(
    f0: HalfInt,
    k: u32,
    q: i32,
    kp: u32,
    qp: i32,
) -> Result<Vec<TensorTerm>> {
    let two_f0 = f0.twice();
    if two_f0 < 0 {
        return Err(Error::Domain(format!("tensor_commutator: F0 = {f0} is negative")));
    }
    for (rank, proj, name) in [(k, q, "K"), (kp, qp, "K'")] {
        if rank as i32 > two_f0 {
            return Err(Error::Domain(format!(
                "tensor_commutator: rank {name} = {rank} exceeds 2 F0 = {two_f0}"
            )));
        }
        if proj.abs() as u32 > rank {
            return Err(Error::Domain(format!(
                "tensor_commutator: |projection| exceeds rank {name} = {rank}"
            )));
        }
    }

    let qpp = q + qp;
    let k_low = k.abs_diff(kp);
    let k_high = (k + kp).min(two_f0 as u32);
    let mut terms = Vec::new();
    for kpp in k_low..=k_high {
        // the factor [1 - (-1)^(K+K'+K'')] kills even K+K'+K''
        if (k + kp + kpp) % 2 == 0 {
            continue;
        }
        if qpp.unsigned_abs() > kpp {
            continue;
        }
        let sixj = wigner6j(
            HalfInt::from_int(k as i32),
            HalfInt::from_int(kp as i32),
            HalfInt::from_int(kpp as i32),
            f0,
            f0,
            f0,
        )?;
        let cg = clebsch_gordan(
            HalfInt::from_int(k as i32),
            HalfInt::from_int(q),
            HalfInt::from_int(kp as i32),
            HalfInt::from_int(qp),
            HalfInt::from_int(kpp as i32),
            HalfInt::from_int(qpp),
        )?;
        let sign = if (two_f0 + kpp as i32) % 2 == 0 { 1.0 } else { -1.0 };
        let coefficient =
            (f64::from(2 * k + 1) * f64::from(2 * kp + 1)).sqrt() * 2.0 * sixj * sign * cg;
        if coefficient != 0.0 {
            terms.push(TensorTerm { rank: kpp, projection: qpp, coefficient });
        }
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent float-arithmetic oracles used only by tests.
    mod oracle {
        /// Exact in f64 up to 18!.
        pub fn fact(n: i32) -> f64 {
            (2..=n).map(f64::from).product()
        }

        /// Clebsch-Gordan from the Racah closed form evaluated in plain f64.
        /// Arguments are twice-values.
        pub fn cg(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
            if tm1 + tm2 != tm {
                return 0.0;
            }
            if (tj1 + tj2 + tj) % 2 != 0
                || (tj1 - tj2).abs() > tj
                || tj > tj1 + tj2
            {
                return 0.0;
            }
            // states with mismatched j/m parity or |m| > j do not exist
            if (tj1 + tm1) % 2 != 0
                || (tj2 + tm2) % 2 != 0
                || (tj + tm) % 2 != 0
                || tm1.abs() > tj1
                || tm2.abs() > tj2
                || tm.abs() > tj
            {
                return 0.0;
            }
            let h = |t: i32| {
                assert!(t % 2 == 0);
                t / 2
            };
            let delta = (fact(h(tj1 + tj2 - tj)) * fact(h(tj1 - tj2 + tj))
                * fact(h(-tj1 + tj2 + tj))
                / fact(h(tj1 + tj2 + tj) + 1))
            .sqrt();
            let pre = ((f64::from(tj) + 1.0)
                * fact(h(tj1 + tm1))
                * fact(h(tj1 - tm1))
                * fact(h(tj2 + tm2))
                * fact(h(tj2 - tm2))
                * fact(h(tj + tm))
                * fact(h(tj - tm)))
            .sqrt();
            let k_min = 0.max(h(tj2 - tj - tm1)).max(h(tj1 + tm2 - tj));
            let k_max = h(tj1 + tj2 - tj).min(h(tj1 - tm1)).min(h(tj2 + tm2));
            let mut sum = 0.0;
            for k in k_min..=k_max {
                let den = fact(k)
                    * fact(h(tj1 + tj2 - tj) - k)
                    * fact(h(tj1 - tm1) - k)
                    * fact(h(tj2 + tm2) - k)
                    * fact(h(tj - tj2 + tm1) + k)
                    * fact(h(tj - tj1 - tm2) + k);
                sum += if k % 2 == 0 { 1.0 / den } else { -1.0 / den };
            }
            delta * pre * sum
        }

        /// 6j from its definition as a recoupling contraction of four CG
        /// coefficients (structurally independent of the Racah 6j formula):
        ///
        /// {a b c; d e f} = (-1)^(a+b+d+e) / sqrt[(2c+1)(2f+1)]
        ///   * sum C(a m1 b m2|c m12) C(c m12 d m3|e M) C(b m2 d m3|f m23) C(a m1 f m23|e M)
        ///
        /// with the stretched projection M = e.
        pub fn sixj(ta: i32, tb: i32, tc: i32, td: i32, te: i32, tf: i32) -> f64 {
            let tm = te;
            let mut total = 0.0;
            let mut tm1 = -ta;
            while tm1 <= ta {
                let mut tm3 = -td;
                while tm3 <= td {
                    let tm2 = tm - tm1 - tm3;
                    if tm2.abs() <= tb {
                        let tm12 = tm1 + tm2;
                        let tm23 = tm2 + tm3;
                        if tm12.abs() <= tc && tm23.abs() <= tf {
                            total += cg(ta, tm1, tb, tm2, tc, tm12)
                                * cg(tc, tm12, td, tm3, te, tm)
                                * cg(tb, tm2, td, tm3, tf, tm23)
                                * cg(ta, tm1, tf, tm23, te, tm);
                        }
                    }
                    tm3 += 2;
                }
                tm1 += 2;
            }
            let phase = if (ta + tb + td + te) % 4 == 0 { 1.0 } else { -1.0 };
            phase * total / ((f64::from(tc) + 1.0) * (f64::from(tf) + 1.0)).sqrt()
        }
    }

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    fn cg_impl(t: [i32; 6]) -> f64 {
        clebsch_gordan(h(t[0]), h(t[1]), h(t[2]), h(t[3]), h(t[4]), h(t[5])).unwrap()
    }

    #[test]
    fn cg_spot_values() {
        // C(1,1,1,-1 -> 0,0) = 1/sqrt(3)
        assert!((cg_impl([2, 2, 2, -2, 0, 0]) - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
        // C(1,0,1,0 -> 2,0) = sqrt(2/3)
        assert!((cg_impl([2, 0, 2, 0, 4, 0]) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        // projection selection rule
        assert_eq!(cg_impl([2, 2, 2, 0, 0, 0]), 0.0);
        // stretched state
        assert_eq!(cg_impl([2, 2, 2, 2, 4, 4]), 1.0);
        // half-integer case: C(1/2,1/2,1/2,-1/2 -> 0,0) = 1/sqrt(2)
        assert!((cg_impl([1, 1, 1, -1, 0, 0]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cg_matches_float_oracle() {
        for tj1 in 0i32..=6 {
            for tj2 in 0..=6 {
                for tj in (tj1 - tj2).abs()..=(tj1 + tj2).min(6) {
                    if (tj1 + tj2 + tj) % 2 != 0 {
                        continue;
                    }
                    let mut tm1 = -tj1;
                    while tm1 <= tj1 {
                        let mut tm2 = -tj2;
                        while tm2 <= tj2 {
                            let tm = tm1 + tm2;
                            if tm.abs() <= tj {
                                let a = cg_impl([tj1, tm1, tj2, tm2, tj, tm]);
                                let b = oracle::cg(tj1, tm1, tj2, tm2, tj, tm);
                                assert!(
                                    (a - b).abs() < 1e-13,
                                    "mismatch at {tj1},{tm1},{tj2},{tm2},{tj},{tm}: {a} vs {b}"
                                );
                            }
                            tm2 += 2;
                        }
                        tm1 += 2;
                    }
                }
            }
        }
    }

    #[test]
    fn cg_orthogonality() {
        // sum_{m1,m2} C(..J,M) C(..J',M) = delta_JJ' for all j <= 3 and
        // every shared projection M (distinct projections vanish term by term)
        for tj1 in 0i32..=6 {
            for tj2 in 0..=6 {
                let tj_lo = (tj1 - tj2).abs();
                let tj_hi = tj1 + tj2;
                let mut tj_a = tj_lo;
                while tj_a <= tj_hi {
                    let mut tj_b = tj_lo;
                    while tj_b <= tj_hi {
                        let tj_min = tj_a.min(tj_b);
                        let mut tm = -tj_min;
                        while tm <= tj_min {
                            let mut sum = 0.0;
                            let mut tm1 = -tj1;
                            while tm1 <= tj1 {
                                let tm2 = tm - tm1;
                                if tm2.abs() <= tj2 {
                                    sum += cg_impl([tj1, tm1, tj2, tm2, tj_a, tm])
                                        * cg_impl([tj1, tm1, tj2, tm2, tj_b, tm]);
                                }
                                tm1 += 2;
                            }
                            let expect = if tj_a == tj_b { 1.0 } else { 0.0 };
                            assert!(
                                (sum - expect).abs() < 1e-12,
                                "orthogonality fails at 2j1={tj1} 2j2={tj2} 2J={tj_a} 2J'={tj_b} 2M={tm}"
                            );
                            tm += 2;
                        }
                        tj_b += 2;
                    }
                    tj_a += 2;
                }
            }
        }
    }

    fn sixj_impl(t: [i32; 6]) -> f64 {
        wigner6j(h(t[0]), h(t[1]), h(t[2]), h(t[3]), h(t[4]), h(t[5])).unwrap()
    }

    #[test]
    fn sixj_spot_values() {
        assert!((sixj_impl([2, 2, 2, 2, 2, 2]) - 1.0 / 6.0).abs() < 1e-15);
        // closed form for one zero argument: {a b c; 0 c b} = (-1)^(a+b+c)/sqrt((2b+1)(2c+1))
        assert!((sixj_impl([2, 2, 2, 0, 2, 2]) - (-1.0 / 3.0)).abs() < 1e-15);
        // triangle violation
        assert_eq!(sixj_impl([2, 2, 8, 2, 2, 2]), 0.0);
        // values entering the polarizability sums
        assert!((sixj_impl([2, 2, 2, 2, 2, 4]) - 1.0 / 6.0).abs() < 1e-15);
        assert!((sixj_impl([2, 2, 4, 2, 2, 4]) - 1.0 / 30.0).abs() < 1e-15);
        assert!((sixj_impl([2, 2, 4, 2, 2, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((sixj_impl([2, 2, 4, 4, 4, 2]) - 21.0f64.sqrt() / 30.0).abs() < 1e-15);
    }

    #[test]
    fn sixj_matches_contraction_oracle() {
        for ta in 0i32..=4 {
            for tb in 0..=4 {
                for tc in 0..=4 {
                    for td in 0..=4 {
                        for te in 0..=4 {
                            for tf in 0..=4 {
                                let a = sixj_impl([ta, tb, tc, td, te, tf]);
                                let b = oracle::sixj(ta, tb, tc, td, te, tf);
                                assert!(
                                    (a - b).abs() < 1e-12,
                                    "6j mismatch at {ta},{tb},{tc},{td},{te},{tf}: {a} vs {b}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sixj_symmetries() {
        // column permutations and upper/lower swaps in two columns
        for (ta, tb, tc, td, te, tf) in
            [(2, 4, 6, 6, 4, 2), (2, 2, 4, 4, 4, 2), (1, 2, 3, 3, 2, 1), (3, 3, 4, 2, 4, 3)]
        {
            let base = sixj_impl([ta, tb, tc, td, te, tf]);
            // column swaps
            assert_eq!(base, sixj_impl([tb, ta, tc, te, td, tf]));
            assert_eq!(base, sixj_impl([tc, tb, ta, tf, te, td]));
            assert_eq!(base, sixj_impl([ta, tc, tb, td, tf, te]));
            // swap upper and lower rows in two columns
            assert_eq!(base, sixj_impl([td, te, tc, ta, tb, tf]));
            assert_eq!(base, sixj_impl([td, tb, tf, ta, te, tc]));
            assert_eq!(base, sixj_impl([ta, te, tf, td, tb, tc]));
        }
    }

    #[test]
    fn malformed_input_is_domain_error() {
        assert!(clebsch_gordan(h(2), h(1), h(2), h(0), h(2), h(1)).is_err());
        assert!(clebsch_gordan(h(2), h(4), h(2), h(-2), h(2), h(2)).is_err());
        assert!(wigner6j(h(-2), h(2), h(2), h(2), h(2), h(2)).is_err());
    }

    #[test]
    fn alignment_spot_values() {
        let f1 = alignment_coefficients(HalfInt::from_int(1)).unwrap();
        assert_eq!(f1.c1, Ratio::new(1, 2));
        assert_eq!(f1.c3, 0.0);
        assert_eq!(f1.cbar13, Ratio::new(1, 2));

        let f2 = alignment_coefficients(HalfInt::from_int(2)).unwrap();
        assert_eq!(f2.c1, Ratio::new(1, 10));
        assert_eq!(f2.cbar13, Ratio::new(1, 14));
        // c3 = -6 sqrt(1*4) / sqrt(7*2*3*3*5*7)
        let expect = -12.0 / 4410.0f64.sqrt();
        assert!((f2.c3 - expect).abs() < 1e-15);
        assert!((f2.c3 + 0.18070).abs() < 5e-6);

        assert!(alignment_coefficients(HalfInt::from_twice(1)).is_err());
        assert!(alignment_coefficients(HalfInt::from_int(0)).is_err());
    }

    #[test]
    fn tensor_commutator_selection_rules() {
        let f0 = HalfInt::from_int(2);
        // an operator commutes with itself
        assert!(tensor_commutator(f0, 2, 2, 2, 2).unwrap().is_empty());
        // all contributing ranks have K + K' + K'' odd and Q'' = Q + Q'
        let terms = tensor_commutator(f0, 2, -2, 2, 2).unwrap();
        assert!(!terms.is_empty());
        for t in &terms {
            assert_eq!((2 + 2 + t.rank) % 2, 1);
            assert_eq!(t.projection, 0);
        }
        // rank out of range
        assert!(tensor_commutator(HalfInt::from_int(1), 3, 0, 2, 0).is_err());
    }

    #[test]
    fn tensor_commutator_antisymmetry() {
        let f0 = HalfInt::from_twice(5);
        for (k, q, kp, qp) in [(1, 0, 2, 2), (2, 1, 2, -1), (1, 1, 3, -2), (2, -2, 2, 2)] {
            let ab = tensor_commutator(f0, k, q, kp, qp).unwrap();
            let ba = tensor_commutator(f0, kp, qp, k, q).unwrap();
            assert_eq!(ab.len(), ba.len());
            for (x, y) in ab.iter().zip(ba.iter()) {
                assert_eq!(x.rank, y.rank);
                assert!((x.coefficient + y.coefficient).abs() < 1e-14);
            }
        }
    }

    /// Dense matrix of `T_KQ` on the `|F0 M>` basis from Eq.-style definition
    /// `T_KQ = sqrt[(2K+1)/(2F0+1)] sum C(F0 M, K Q | F0 M') |M'><M|`.
    fn tensor_matrix(f0: HalfInt, k: u32, q: i32) -> Vec<Vec<f64>> {
        let dim = (f0.twice() + 1) as usize;
        let mut m = vec![vec![0.0; dim]; dim];
        let norm = (f64::from(2 * k + 1) / (f64::from(f0.twice()) + 1.0)).sqrt();
        for (row, tmp) in (0..dim).map(|r| (r, -f0.twice() + 2 * r as i32)) {
            for (col, tm) in (0..dim).map(|c| (c, -f0.twice() + 2 * c as i32)) {
                let c = clebsch_gordan(
                    f0,
                    HalfInt::from_twice(tm),
                    HalfInt::from_int(k as i32),
                    HalfInt::from_int(q),
                    f0,
                    HalfInt::from_twice(tmp),
                )
                .unwrap();
                m[row][col] = norm * c;
            }
        }
        m
    }

    fn mat_commutator(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i][j] += a[i][k] * b[k][j] - b[i][k] * a[k][j];
                }
            }
        }
        c
    }

    #[test]
    fn tensor_commutator_matches_matrix_oracle() {
        // structure constants of Eq-type expansion vs explicit matrix commutators
        for tf0 in [2, 3, 4, 5] {
            let f0 = HalfInt::from_twice(tf0);
            for (k, q, kp, qp) in [(2, -2, 2, 2), (1, 0, 2, 2), (2, 1, 2, -1), (1, 1, 1, -1)] {
                if k as i32 > tf0 || kp as i32 > tf0 {
                    continue;
                }
                let lhs = mat_commutator(&tensor_matrix(f0, k, q), &tensor_matrix(f0, kp, qp));
                let dim = lhs.len();
                let mut rhs = vec![vec![0.0; dim]; dim];
                for term in tensor_commutator(f0, k, q, kp, qp).unwrap() {
                    let t = tensor_matrix(f0, term.rank, term.projection);
                    for i in 0..dim {
                        for j in 0..dim {
                            rhs[i][j] += term.coefficient * t[i][j];
                        }
                    }
                }
                for i in 0..dim {
                    for j in 0..dim {
                        assert!(
                            (lhs[i][j] - rhs[i][j]).abs() < 1e-12,
                            "F0={f0} [{k}{q},{kp}{qp}] entry ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn alignment_agrees_with_commutator_reconstruction() {
        // [T_xy, T_xieta] = i c1 Fz + i c3 T_30 with
        // T_xy = (T_{2-2}+T_{22})/2, T_xieta = -(T_{2-2}-T_{22})/(2i), so
        // [T_xy, T_xieta] = (1/2i) [T_{2-2}, T_{22}] and the expansion
        // coefficients of [T_{2-2}, T_{22}] give
        //   c1 = -coef(K''=1) / (2 sqrt[F0(F0+1)(2F0+1)/3]),
        //   c3 = -coef(K''=3) / 2.
        for tf0 in [2, 3, 4, 5, 6] {
            let f0 = HalfInt::from_twice(tf0);
            let coefs = alignment_coefficients(f0).unwrap();
            let expansion = tensor_commutator(f0, 2, -2, 2, 2).unwrap();
            let coef_of = |rank: u32| {
                expansion
                    .iter()
                    .find(|t| t.rank == rank)
                    .map_or(0.0, |t| t.coefficient)
            };
            let ff = f0.as_f64();
            let fz_norm = (ff * (ff + 1.0) * (2.0 * ff + 1.0) / 3.0).sqrt();
            let c1_rec = -coef_of(1) / (2.0 * fz_norm);
            let c3_rec = -coef_of(3) / 2.0;
            assert!(
                (c1_rec - coefs.c1_f64()).abs() < 1e-12,
                "c1 reconstruction at F0={f0}: {c1_rec} vs {}",
                coefs.c1_f64()
            );
            assert!(
                (c3_rec - coefs.c3).abs() < 1e-12,
                "c3 reconstruction at F0={f0}: {c3_rec} vs {}",
                coefs.c3
            );
        }
    }

    #[test]
    fn fz_commutators_close() {
        // [Fz, T_xy] = 2i T_xieta read off from the rank-1/rank-2 expansion:
        // with Fz = fz_norm * T_10, the K''=2, Q''=+-2 coefficients must give
        // matrix elements consistent with the factor 2.
        for tf0 in [2, 4] {
            let f0 = HalfInt::from_twice(tf0);
            let ff = f0.as_f64();
            let fz_norm = (ff * (ff + 1.0) * (2.0 * ff + 1.0) / 3.0).sqrt();
            // [T_10, T_{2 2}]: single term on T_{2 2}
            let terms = tensor_commutator(f0, 1, 0, 2, 2).unwrap();
            assert_eq!(terms.len(), 1);
            assert_eq!(terms[0].rank, 2);
            // [Fz, T_{22}] = 2 T_{22} (ladder action of Jz on projection 2)
            assert!((fz_norm * terms[0].coefficient - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn halfint_parse_and_display() {
        let x: HalfInt = "3/2".parse().unwrap();
        assert_eq!(x.twice(), 3);
        assert_eq!(x.to_string(), "3/2");
        let y: HalfInt = "2".parse().unwrap();
        assert_eq!(y, HalfInt::from_int(2));
        assert!("2/3".parse::<HalfInt>().is_err());
    }
}
