//! The odd cutoff `ζ`, the truncated quadratic weight `𝒳 = ∫₀ˣ ζ` and its
//! rescaling `𝒳_R(x) = R²𝒳(x/R)`.
//!
//! `ζ` is `2s` on `[0, 1]`, the cubic `2[s - (s-1)³]` on `[1, s1]` with
//! `s1 = 1 + 1/√3`, a decreasing quintic on `[s1, 2]` and zero beyond `2`,
//! extended to negative `s` as an odd function. The quintic is the Hermite
//! interpolant matching value, slope and curvature of the cubic at `s1` and
//! of the zero function at `2`, which makes `ζ ∈ C²` with bounded `ζ‴`.
//!
//! At the knots `{1, s1, 2}` the derivative orders two and three take the
//! value of the branch on the bump side: the cubic at `1` and at `s1`, the
//! quintic at `2`.

use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_8;
/// Right end of the cubic branch, `1 + 1/√3`.
pub const S1: f64 = 1.0 + FRAC_1_SQRT_3;

const SQRT_6: f64 = 2.449_489_742_783_178;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Branch {
    Linear,
    Cubic,
    Quintic,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub s1: f64,
    /// Coefficients of the tail polynomial in powers of `s - s1`.
    pub tail_coeffs: [f64; 6],
    /// `‖ζ″‖_∞` over `s1 ≤ |s| ≤ 2`.
    pub z2: f64,
    /// `‖ζ‴‖_∞` over `1 ≤ |s| ≤ 2`.
    pub z3: f64,
}

impl WeightProfile {
    /// The quintic Hermite profile with analytically maximised `z2`, `z3`.
    pub fn certified() -> Self {
        let d = 2.0 - S1;
        let c0 = 2.0 + 4.0 * FRAC_1_SQRT_3 / 3.0;
        let c1 = 0.0;
        let c2 = -2.0 * 3f64.sqrt();
        // Unknowns a = c3 d³, b = c4 d⁴, e = c5 d⁵ from p = p' = p'' = 0 at t = d.
        let r0 = -(c0 + c1 * d + c2 * d * d);
        let r1 = -(c1 * d + 2.0 * c2 * d * d);
        let r2 = -2.0 * c2 * d * d;
        let e = (r2 - 6.0 * r1 + 12.0 * r0) / 2.0;
        let b = r1 - 3.0 * r0 - 2.0 * e;
        let a = r0 - b - e;
        Self::from_tail_coeffs([c0, c1, c2, a / d.powi(3), b / d.powi(4), e / d.powi(5)])
    }

    /// Shared instance of [`WeightProfile::certified`].
    pub fn standard() -> &'static WeightProfile {
        static PROFILE: OnceLock<WeightProfile> = OnceLock::new();
        PROFILE.get_or_init(WeightProfile::certified)
    }

    /// Builds a profile around arbitrary tail coefficients, computing the
    /// sup-norm constants from the polynomial itself.
    pub fn from_tail_coeffs(tail_coeffs: [f64; 6]) -> Self {
        let mut p = WeightProfile { s1: S1, tail_coeffs, z2: 0.0, z3: 0.0 };
        p.z2 = p.tail_second_derivative_max();
        p.z3 = p.tail_third_derivative_max().max(12.0);
        p
    }

    fn tail_poly(&self, t: f64, order: u8) -> f64 {
        let c = &self.tail_coeffs;
        match order {
            0 => c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5])))),
            1 => c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5]))),
            2 => 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5])),
            3 => 6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5]),
            4 => 24.0 * c[4] + t * 120.0 * c[5],
            _ => unreachable!("tail derivative order"),
        }
    }

    fn tail_antiderivative(&self, t: f64) -> f64 {
        let c = &self.tail_coeffs;
        t * (c[0]
            + t * (c[1] / 2.0
                + t * (c[2] / 3.0 + t * (c[3] / 4.0 + t * (c[4] / 5.0 + t * c[5] / 6.0)))))
    }

    /// max |p''| on [0, 2 - s1]: endpoints plus roots of the quadratic p'''.
    fn tail_second_derivative_max(&self) -> f64 {
        let d = 2.0 - self.s1;
        let c = &self.tail_coeffs;
        let (qa, qb, qc) = (60.0 * c[5], 24.0 * c[4], 6.0 * c[3]);
        let mut cands = vec![0.0, d];
        if qa.abs() > 0.0 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                cands.push((-qb + sq) / (2.0 * qa));
                cands.push((-qb - sq) / (2.0 * qa));
            }
        } else if qb.abs() > 0.0 {
            cands.push(-qc / qb);
        }
        cands
            .into_iter()
            .filter(|t| (0.0..=d).contains(t))
            .map(|t| self.tail_poly(t, 2).abs())
            .fold(0.0, f64::max)
    }

    /// max |p'''| on [0, 2 - s1]: endpoints plus the vertex of the parabola.
    fn tail_third_derivative_max(&self) -> f64 {
        let d = 2.0 - self.s1;
        let c = &self.tail_coeffs;
        let mut cands = vec![0.0, d];
        if c[5].abs() > 0.0 {
            cands.push(-24.0 * c[4] / (120.0 * c[5]));
        }
        cands
            .into_iter()
            .filter(|t| (0.0..=d).contains(t))
            .map(|t| self.tail_poly(t, 3).abs())
            .fold(0.0, f64::max)
    }

    fn branch_of(&self, a: f64) -> Branch {
        if a < 1.0 {
            Branch::Linear
        } else if a <= self.s1 {
            Branch::Cubic
        } else if a <= 2.0 {
            Branch::Quintic
        } else {
            Branch::Zero
        }
    }

    fn branch_eval(&self, branch: Branch, a: f64, order: u8) -> f64 {
        match branch {
            Branch::Linear => match order {
                0 => 2.0 * a,
                1 => 2.0,
                _ => 0.0,
            },
            Branch::Cubic => {
                let y = a - 1.0;
                match order {
                    0 => 2.0 * (a - y * y * y),
                    1 => 2.0 * (1.0 - 3.0 * y * y),
                    2 => -12.0 * y,
                    _ => -12.0,
                }
            }
            Branch::Quintic => self.tail_poly(a - self.s1, order),
            Branch::Zero => 0.0,
        }
    }

    /// `ζ^{(order)}(s)` without argument checks.
    #[inline]
    pub fn zeta_unchecked(&self, s: f64, order: u8) -> f64 {
        let a = s.abs();
        let v = self.branch_eval(self.branch_of(a), a, order);
        // ζ^{(k)}(-s) = (-1)^{k+1} ζ^{(k)}(s)
        if s < 0.0 && order % 2 == 0 {
            -v
        } else {
            v
        }
    }

    pub fn zeta(&self, s: f64, order: u32) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("zeta argument {s}")));
        }
        if order > 3 {
            return invalid(format!("zeta derivative order {order} outside 0..=3"));
        }
        Ok(self.zeta_unchecked(s, order as u8))
    }

    /// `2 - ζ'(s)`, evaluated without cancellation on the cubic branch.
    #[inline]
    pub fn two_minus_zeta_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        match self.branch_of(a) {
            Branch::Linear => 0.0,
            Branch::Cubic => {
                let y = a - 1.0;
                6.0 * y * y
            }
            Branch::Quintic => 2.0 - self.tail_poly(a - self.s1, 1),
            Branch::Zero => 2.0,
        }
    }

    fn chi_at_s1(&self) -> f64 {
        let y = self.s1 - 1.0;
        self.s1 * self.s1 - y.powi(4) / 2.0
    }

    #[inline]
    pub fn chi_unchecked(&self, x: f64) -> f64 {
        let a = x.abs();
        match self.branch_of(a) {
            Branch::Linear => a * a,
            Branch::Cubic => {
                let y = a - 1.0;
                a * a - y.powi(4) / 2.0
            }
            Branch::Quintic => self.chi_at_s1() + self.tail_antiderivative(a - self.s1),
            Branch::Zero => self.chi_at_s1() + self.tail_antiderivative(2.0 - self.s1),
        }
    }

    pub fn chi(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("chi argument {x}")));
        }
        Ok(self.chi_unchecked(x))
    }

    /// `𝒳_R` and its derivatives of order 0, 1, 2 and 4.
    pub fn chi_r(&self, x: f64, r: f64, order: u32) -> Result<f64> {
        let w = self.scaled(r)?;
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("chi_R argument {x}")));
        }
        match order {
            0 => Ok(w.value(x)),
            1 => Ok(w.first(x)),
            2 => Ok(w.second(x)),
            4 => Ok(w.fourth(x)),
            _ => invalid(format!("chi_R derivative order {order} unsupported")),
        }
    }

    pub fn g_r(&self, x: f64, r: f64) -> Result<f64> {
        let w = self.scaled(r)?;
        Ok(w.g(x))
    }

    /// `η(R) = (4/3R²)(√6 + z2/2)² m³ + (z3/2R²) m` with `m = ‖u₀‖²`.
    pub fn eta(&self, r: f64, mass2: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("eta needs R > 0, got {r}"));
        }
        if !(mass2 >= 0.0) || !mass2.is_finite() {
            return invalid(format!("eta needs mass >= 0, got {mass2}"));
        }
        let k = SQRT_6 + self.z2 / 2.0;
        Ok(4.0 / (3.0 * r * r) * k * k * mass2.powi(3) + self.z3 / (2.0 * r * r) * mass2)
    }

    pub fn scaled(&self, r: f64) -> Result<ScaledWeight<'_>> {
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("weight radius must be positive and finite, got {r}"));
        }
        Ok(ScaledWeight { profile: self, r })
    }

    /// Writes `s, ζ, ζ', ζ'', ζ'''` on a uniform grid over `[-3, 3]`.
    pub fn dump_csv<W: Write>(&self, out: &mut W, samples: usize) -> Result<()> {
        writeln!(out, "s,zeta,zeta1,zeta2,zeta3")?;
        let n = samples.max(2);
        for i in 0..n {
            let s = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            writeln!(
                out,
                "{},{},{},{},{}",
                crate::io::fmt_g17(s),
                crate::io::fmt_g17(self.zeta_unchecked(s, 0)),
                crate::io::fmt_g17(self.zeta_unchecked(s, 1)),
                crate::io::fmt_g17(self.zeta_unchecked(s, 2)),
                crate::io::fmt_g17(self.zeta_unchecked(s, 3)),
            )?;
        }
        Ok(())
    }

    /// Dense-sampling certification of every inequality the weight must obey.
    pub fn verify(&self, samples: usize) -> Result<ProfileReport> {
        if samples < 1000 {
            return invalid(format!("verify_profile needs at least 1000 samples, got {samples}"));
        }
        let grid: Vec<f64> =
            (0..samples).map(|i| -3.0 + 6.0 * i as f64 / (samples - 1) as f64).collect();
        let z = |s: f64, k: u8| self.zeta_unchecked(s, k);
        let mut checks = Vec::new();

        let mut c = Check::new("oddness");
        for &s in &grid {
            c.observe(1e-14 - (z(s, 0) + z(-s, 0)).abs(), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("linear_branch_exact");
        for &s in grid.iter().filter(|s| s.abs() <= 1.0) {
            c.observe(1e-14 - (z(s, 0) - 2.0 * s).abs(), s);
        }
        c.observe(1e-15 - (z(0.5, 0) - 1.0).abs(), 0.5);
        c.observe(1e-15 - z(2.5, 0).abs(), 2.5);
        checks.push(c.finish());

        let mut c = Check::new("knot_continuity");
        let knots = [(1.0, Branch::Linear, Branch::Cubic), (self.s1, Branch::Cubic, Branch::Quintic), (2.0, Branch::Quintic, Branch::Zero)];
        for (k, left, right) in knots {
            for order in 0..2 {
                let jump = (self.branch_eval(left, k, order) - self.branch_eval(right, k, order)).abs();
                c.observe(1e-10 - jump, k);
            }
        }
        checks.push(c.finish());

        let mut c = Check::new("zeta_prime_le_2");
        for &s in &grid {
            c.observe(2.0 - z(s, 1), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("zeta_nonnegative_on_right");
        for &s in grid.iter().filter(|s| **s >= 0.0) {
            c.observe(z(s, 0), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("zeta_vanishes_beyond_2");
        for &s in grid.iter().filter(|s| s.abs() >= 2.0) {
            c.observe(-z(s, 0).abs(), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("strict_decrease_on_tail").strict();
        for &s in grid.iter().filter(|s| **s > self.s1 && **s < 2.0) {
            c.observe(-z(s, 1), s);
        }
        for i in 1..64 {
            let s = self.s1 + (2.0 - self.s1) * i as f64 / 64.0;
            c.observe(-z(s, 1), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("zeta_over_s_le_2");
        for &s in grid.iter().filter(|s| **s != 0.0) {
            c.observe(2.0 - z(s, 0) / s, s);
        }
        checks.push(c.finish());

        let mut c = Check::new("chi_prime_squared_le_4chi");
        for &s in &grid {
            let chi = self.chi_unchecked(s);
            let zs = z(s, 0);
            c.observe(4.0 * chi - zs * zs + 1e-12 * (1.0 + 4.0 * chi), s);
        }
        checks.push(c.finish());

        let mut c = Check::new("chi_ge_1_outside_unit_ball");
        for &s in grid.iter().filter(|s| s.abs() >= 1.0) {
            c.observe(self.chi_unchecked(s) - 1.0, s);
        }
        checks.push(c.finish());

        for r in [1.0, 2.5] {
            let w = self.scaled(r)?;
            let mut c0 = Check::new(&format!("g_r_derivative_zero_off_annulus(R={r})"));
            let mut c1 = Check::new(&format!("g_r_derivative_le_sqrt6_over_R(R={r})"));
            let mut c2 = Check::new(&format!("g_r_derivative_le_z2_over_2R(R={r})"));
            for &s in &grid {
                let x = s * r;
                let a = s.abs();
                let d = w.g_squared_derivative(x).abs();
                if a < 1.0 || a > 2.0 {
                    c0.observe(-d, x);
                } else if a <= self.s1 {
                    c1.observe(SQRT_6 / r * (1.0 + 1e-12) - d, x);
                } else {
                    c2.observe(self.z2 / (2.0 * r) * (1.0 + 1e-12) - d, x);
                }
            }
            checks.push(c0.finish());
            checks.push(c1.finish());
            checks.push(c2.finish());
        }

        let mut c = Check::new("sup_norm_constants");
        let fine = samples.max(100_000);
        let (mut s2, mut s3) = (0.0f64, 0.0f64);
        for i in 0..=fine {
            let s = 1.0 + i as f64 / fine as f64;
            s3 = s3.max(z(s, 3).abs());
            if s >= self.s1 {
                s2 = s2.max(z(s, 2).abs());
            }
        }
        s2 = s2.max(z(self.s1, 2).abs()).max(self.tail_poly(0.0, 2).abs());
        s3 = s3.max(self.tail_poly(0.0, 3).abs()).max(self.tail_poly(2.0 - self.s1, 3).abs());
        c.observe(if self.z2 > 0.0 && self.z2.is_finite() { 1.0 } else { -1.0 }, self.s1);
        c.observe(if self.z3 > 0.0 && self.z3.is_finite() { 1.0 } else { -1.0 }, 1.0);
        c.observe(self.z2 * (1.0 + 1e-12) - s2, self.s1);
        c.observe(self.z3 * (1.0 + 1e-12) - s3, 1.0);
        c.observe(1e-3 * self.z2 - (self.z2 - s2), self.s1);
        c.observe(1e-3 * self.z3 - (self.z3 - s3), 1.0);
        checks.push(c.finish());

        let all_passed = checks.iter().all(|c| c.passed);
        Ok(ProfileReport { samples, all_passed, checks })
    }
}

/// `𝒳_R` for a fixed radius, with infallible evaluation for hot loops.
#[derive(Clone, Copy, Debug)]
pub struct ScaledWeight<'a> {
    profile: &'a WeightProfile,
    r: f64,
}

impl ScaledWeight<'_> {
    pub fn radius(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.r * self.r * self.profile.chi_unchecked(x / self.r)
    }

    #[inline]
    pub fn first(&self, x: f64) -> f64 {
        self.r * self.profile.zeta_unchecked(x / self.r, 0)
    }

    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        self.profile.zeta_unchecked(x / self.r, 1)
    }

    #[inline]
    pub fn third(&self, x: f64) -> f64 {
        self.profile.zeta_unchecked(x / self.r, 2) / self.r
    }

    #[inline]
    pub fn fourth(&self, x: f64) -> f64 {
        self.profile.zeta_unchecked(x / self.r, 3) / (self.r * self.r)
    }

    /// `𝒳_R'(x)/x`, equal to 2 on `|x| ≤ R`.
    #[inline]
    pub fn first_over_x(&self, x: f64) -> f64 {
        if x.abs() <= self.r {
            2.0
        } else {
            self.first(x) / x
        }
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.profile.two_minus_zeta_prime(x / self.r).powf(0.25)
    }

    /// `∂_x (g_R²)`.
    pub fn g_squared_derivative(&self, x: f64) -> f64 {
        let s = x / self.r;
        let a = s.abs();
        let base = self.profile.two_minus_zeta_prime(s);
        if a <= 1.0 || a > 2.0 {
            return 0.0;
        }
        if a <= self.profile.s1 {
            // 2 - ζ' = 6(|s|-1)², so g_R² = √6(|s|-1) there.
            return SQRT_6 / self.r * s.signum();
        }
        -self.profile.zeta_unchecked(s, 2) / (2.0 * self.r * base.sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Smallest observed slack; negative means violated.
    pub worst_margin: f64,
    pub location: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub samples: usize,
    pub all_passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl ProfileReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Check {
    name: String,
    strict: bool,
    worst: f64,
    location: Option<f64>,
}

impl Check {
    fn new(name: &str) -> Self {
        Check { name: name.to_string(), strict: false, worst: f64::INFINITY, location: None }
    }

    fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    fn observe(&mut self, margin: f64, at: f64) {
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
            self.location = Some(at);
        }
    }

    fn finish(self) -> CheckOutcome {
        let passed = if self.strict { self.worst > 0.0 } else { self.worst >= 0.0 };
        CheckOutcome { name: self.name, passed, worst_margin: self.worst, location: self.location }
    }
}

/// `ζ^{(order)}(s)` of the certified profile.
pub fn zeta(s: f64, order: u32) -> Result<f64> {
    WeightProfile::standard().zeta(s, order)
}

pub fn chi(x: f64) -> Result<f64> {
    WeightProfile::standard().chi(x)
}

pub fn chi_r(x: f64, r: f64, order: u32) -> Result<f64> {
    WeightProfile::standard().chi_r(x, r, order)
}

pub fn g_r(x: f64, r: f64) -> Result<f64> {
    WeightProfile::standard().g_r(x, r)
}

pub fn eta(r: f64, mass2: f64) -> Result<f64> {
    WeightProfile::standard().eta(r, mass2)
}

pub fn verify_profile(samples: usize) -> Result<ProfileReport> {
    WeightProfile::standard().verify(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss–Legendre on many panels, kept independent of the
    /// closed-form antiderivatives.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        let weights = [0.236_926_885_056_189_1, 0.478_628_670_499_366_5, 0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
        let panels = 4000;
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (n, w) in nodes.iter().zip(weights) {
                sum += w * f(mid + n * h / 2.0);
            }
        }
        sum * h / 2.0
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(0.5, 0).unwrap(), 1.0);
        assert_eq!(zeta(-0.5, 0).unwrap(), -1.0);
        assert_eq!(zeta(2.5, 0).unwrap(), 0.0);
        // 2 + 4/(3√3), evaluated from the cubic branch formula by hand
        let expected = 2.0 + 4.0 / (3.0 * 3f64.sqrt());
        assert!((zeta(S1, 0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 2.769_800_358_919_501).abs() < 1e-14);
        assert_eq!(zeta(1.0, 1).unwrap(), 2.0);
    }

    #[test]
    fn zeta_rejects_bad_input() {
        assert!(zeta(f64::NAN, 0).is_err());
        assert!(zeta(f64::INFINITY, 1).is_err());
        assert!(zeta(0.3, 4).is_err());
    }

    #[test]
    fn hermite_tail_matches_cubic_at_s1() {
        let p = WeightProfile::certified();
        assert!((p.tail_coeffs[0] - zeta(S1, 0).unwrap()).abs() < 1e-15);
        assert!(p.tail_poly(2.0 - S1, 0).abs() < 1e-12);
        assert!(p.tail_poly(2.0 - S1, 1).abs() < 1e-11);
        assert!(p.tail_poly(2.0 - S1, 2).abs() < 1e-10);
        assert!((p.tail_poly(0.0, 2) + 4.0 * 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi(0.5).unwrap(), 0.25);
        assert_eq!(chi(-1.0).unwrap(), 1.0);
        let plateau = integrate(|s| zeta(s, 0).unwrap(), 0.0, 2.0);
        assert!((chi(3.0).unwrap() - plateau).abs() < 1e-12);
        assert_eq!(chi(3.0).unwrap(), chi(2.0).unwrap());
        assert!(chi(f64::NAN).is_err());
    }

    #[test]
    fn chi_matches_quadrature_of_zeta() {
        for &x in &[0.3, 1.0, 1.2, S1, 1.8, 2.0, -1.7] {
            let q = integrate(|s| zeta(s, 0).unwrap(), 0.0, x);
            assert!((chi(x).unwrap() - q).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn chi_r_examples() {
        assert!((chi_r(1.0, 2.0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(chi_r(0.0, 5.0, 2).unwrap(), 2.0);
        assert!(chi_r(1.0, 0.0, 0).is_err());
        assert!(chi_r(1.0, -1.0, 1).is_err());
        assert!(chi_r(1.0, 1.0, 3).is_err());
        for r in [0.5, 1.0, 10.0, 1000.0] {
            for i in 0..10_000 {
                let x = r * (1.0 + 3.0 * i as f64 / 9_999.0);
                let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
                assert!(chi_r(sgn * x, r, 0).unwrap() >= r * r);
            }
        }
    }

    #[test]
    fn chi_r_scaling_identity() {
        for r in [0.5, 1.0, 10.0, 1000.0] {
            for i in 0..200 {
                let x = -3.0 * r + 6.0 * r * i as f64 / 199.0;
                let lhs = chi_r(x, r, 0).unwrap();
                let rhs = r * r * chi(x / r).unwrap();
                assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn g_r_examples() {
        assert_eq!(g_r(0.5, 1.0).unwrap(), 0.0);
        assert!((g_r(5.0, 1.0).unwrap() - 2f64.powf(0.25)).abs() < 1e-15);
        let g4 = g_r(1.2 * 3.0, 3.0).unwrap().powi(4);
        assert!((g4 - 0.24).abs() < 1e-12);
        assert!(g_r(1.0, 0.0).is_err());
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(3.0, 0.0).unwrap(), 0.0);
        let ratio = eta(8.0, 2.7).unwrap() / eta(4.0, 2.7).unwrap();
        assert!((ratio - 0.25).abs() < 1e-15);
        let p = WeightProfile::standard();
        let m: f64 = 2.72070;
        let k = 6f64.sqrt() + p.z2 / 2.0;
        let direct = 4.0 / 300.0 * k * k * m * m * m + p.z3 / 200.0 * m;
        assert!((eta(10.0, m).unwrap() - direct).abs() < 1e-12 * direct);
        assert!(eta(0.0, 1.0).is_err());
        assert!(eta(1.0, -1.0).is_err());
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let step = 1e-4;
        for i in 0..400 {
            let s = -2.7 + 5.4 * i as f64 / 399.0;
            let near_knot = [1.0, S1, 2.0].iter().any(|k| (s.abs() - k).abs() < 3.0 * step);
            if near_knot {
                continue;
            }
            for order in 0..3u32 {
                let fd = (zeta(s + step, order).unwrap() - zeta(s - step, order).unwrap()) / (2.0 * step);
                let exact = zeta(s, order + 1).unwrap();
                assert!((fd - exact).abs() < 1e-3 * (1.0 + exact.abs()), "s={s} order={order}");
            }
        }
    }

    #[test]
    fn certified_profile_passes_all_checks() {
        let report = verify_profile(100_000).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(report.all_passed);
    }

    #[test]
    fn zeroed_tail_fails_continuity() {
        let broken = WeightProfile::from_tail_coeffs([0.0; 6]);
        let report = broken.verify(10_000).unwrap();
        assert!(!report.all_passed);
        assert!(report.failures().any(|c| c.name == "knot_continuity"));
    }

    #[test]
    fn verify_rejects_too_few_samples() {
        assert!(verify_profile(999).is_err());
    }

    #[test]
    fn sup_of_zeta_over_s_bounded_by_two() {
        let worst = (1..=100_000)
            .map(|i| -3.0 + 6.0 * i as f64 / 100_001.0)
            .filter(|s| *s != 0.0)
            .map(|s| zeta(s, 0).unwrap() / s)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 2.0);
    }
}
