//! Closed-form metrics used as oracles and comparison functions.
//!
//! Every model is a conformal factor `u(t, s)` in logarithmic cylindrical
//! coordinates, `g = e^{2u}(ds² + dθ²)`, with `s → +∞` the tip.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic function `1 / (1 + e^{-x})`, evaluated without overflow.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log cosh x` without overflow for large `|x|`.
pub(crate) fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// The standard cigar `C(s) = -½ log(e^{2s} + 1)`.
pub fn cigar(s: f64) -> f64 {
    if s > 0.0 {
        -s - 0.5 * (-2.0 * s).exp().ln_1p()
    } else {
        -0.5 * (2.0 * s).exp().ln_1p()
    }
}

/// `C'(s) = -e^{2s} / (e^{2s} + 1)`.
pub fn cigar_slope(s: f64) -> f64 {
    -logistic(2.0 * s)
}

/// `C''(s) = -2 e^{2s} / (e^{2s} + 1)²`.
pub fn cigar_second(s: f64) -> f64 {
    -2.0 * logistic(2.0 * s) * logistic(-2.0 * s)
}

/// Gauss curvature of the standard cigar, `2 e^{2s} / (e^{2s} + 1)`.
pub fn cigar_curvature(s: f64) -> f64 {
    2.0 * logistic(2.0 * s)
}

/// Scaled cigar `C_λ(s) = C(s) - ½ log λ`.
pub fn scaled_cigar(lambda: f64, s: f64) -> f64 {
    cigar(s) - 0.5 * lambda.ln()
}

/// Scaled cigar soliton flow `C_λ(t, s) = C_λ(2λt + s)`.
pub fn cigar_flow(lambda: f64, t: f64, s: f64) -> f64 {
    scaled_cigar(lambda, 2.0 * lambda * t + s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cigar,
    Sphere,
    Cusp,
    Plane,
    Cylinder,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Cigar => "cigar",
            Family::Sphere => "sphere",
            Family::Cusp => "cusp",
            Family::Plane => "plane",
            Family::Cylinder => "cylinder",
        };
        f.write_str(name)
    }
}

/// A closed-form comparison metric.
///
/// * `Cigar`: `C_λ(2λ(t - t_shift) + s - s_shift)`, a steady soliton.
/// * `Sphere`: `-log cosh(s - s_center) + ½ log(R² - 2(t - t_shift))`, a round
///   sphere of radius `R = radius` at `t = t_shift`, extinct at `t_shift + R²/2`.
/// * `Cusp`: `-log(s - s_e) + log multiplier`, the static metric
///   `multiplier² g_hyp` on the punctured disc (not a Ricci flow).
/// * `Plane`: `-(s - s_e) + log multiplier`, static flat plane.
/// * `Cylinder`: `log radius`, static flat cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Barrier {
    Cigar {
        lambda: f64,
        #[serde(default)]
        s_shift: f64,
        #[serde(default)]
        t_shift: f64,
    },
    Sphere {
        radius: f64,
        #[serde(default)]
        s_center: f64,
        #[serde(default)]
        t_shift: f64,
    },
    Cusp {
        s_e: f64,
        #[serde(default = "one")]
        multiplier: f64,
    },
    Plane {
        s_e: f64,
        #[serde(default = "one")]
        multiplier: f64,
    },
    Cylinder {
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Barrier {
    pub fn cigar(lambda: f64, s_shift: f64, t_shift: f64) -> Self {
        Barrier::Cigar { lambda, s_shift, t_shift }
    }

    /// The sphere barrier `-log cosh(s - s_b) + ½ log 2(1 - t)`.
    pub fn unit_bulb(s_b: f64) -> Self {
        Barrier::Sphere { radius: std::f64::consts::SQRT_2, s_center: s_b, t_shift: 0.0 }
    }

    pub fn family(&self) -> Family {
        match self {
            Barrier::Cigar { .. } => Family::Cigar,
            Barrier::Sphere { .. } => Family::Sphere,
            Barrier::Cusp { .. } => Family::Cusp,
            Barrier::Plane { .. } => Family::Plane,
            Barrier::Cylinder { .. } => Family::Cylinder,
        }
    }

    /// Positive scale parameter of the family.
    pub fn scale(&self) -> f64 {
        match *self {
            Barrier::Cigar { lambda, .. } => lambda,
            Barrier::Sphere { radius, .. } => radius,
            Barrier::Cusp { multiplier, .. } | Barrier::Plane { multiplier, .. } => multiplier,
            Barrier::Cylinder { radius } => radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!("{} scale must be positive, got {scale}", self.family())));
        }
        Ok(())
    }

    /// Extinction time of the sphere family.
    pub fn extinction_time(&self) -> Option<f64> {
        match *self {
            Barrier::Sphere { radius, t_shift, .. } => Some(t_shift + 0.5 * radius * radius),
            _ => None,
        }
    }

    fn sphere_radius_sq(radius: f64, t_shift: f64, t: f64) -> Result<f64> {
        let r2 = radius * radius - 2.0 * (t - t_shift);
        // rounding in radius² must not leave a sliver of life past extinction
        if r2 > 4.0 * f64::EPSILON * radius * radius {
            Ok(r2)
        } else {
            Err(Error::BarrierDomain(format!(
                "sphere evaluated at t = {t}, past extinction at {}",
                t_shift + 0.5 * radius * radius
            )))
        }
    }

    fn cusp_offset(s_e: f64, s: f64) -> Result<f64> {
        let d = s - s_e;
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::BarrierDomain(format!("cusp requires s > {s_e}, got {s}")))
        }
    }

    /// Conformal factor at `(t, s)`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        match *self {
            Barrier::Cigar { lambda, s_shift, t_shift } => Ok(cigar_flow(lambda, t - t_shift, s - s_shift)),
            Barrier::Sphere { radius, s_center, t_shift } => {
                let r2 = Self::sphere_radius_sq(radius, t_shift, t)?;
                Ok(-log_cosh(s - s_center) + 0.5 * r2.ln())
            }
            Barrier::Cusp { s_e, multiplier } => Ok(-Self::cusp_offset(s_e, s)?.ln() + multiplier.ln()),
            Barrier::Plane { s_e, multiplier } => Ok(-(s - s_e) + multiplier.ln()),
            Barrier::Cylinder { radius } => Ok(radius.ln()),
        }
    }

    /// `∂u/∂s`.
    pub fn ds(&self, t: f64, s: f64) -> Result<f64> {
        match *self {
            Barrier::Cigar { lambda, s_shift, t_shift } => Ok(cigar_slope(2.0 * lambda * (t - t_shift) + s - s_shift)),
            Barrier::Sphere { radius, s_center, t_shift } => {
                Self::sphere_radius_sq(radius, t_shift, t)?;
                Ok(-(s - s_center).tanh())
            }
            Barrier::Cusp { s_e, .. } => Ok(-1.0 / Self::cusp_offset(s_e, s)?),
            Barrier::Plane { .. } => Ok(-1.0),
            Barrier::Cylinder { .. } => Ok(0.0),
        }
    }

    /// Gauss curvature `-e^{-2u} u_ss`.
    pub fn curvature(&self, t: f64, s: f64) -> Result<f64> {
        match *self {
            Barrier::Cigar { lambda, s_shift, t_shift } => {
                Ok(lambda * cigar_curvature(2.0 * lambda * (t - t_shift) + s - s_shift))
            }
            Barrier::Sphere { radius, t_shift, .. } => Ok(1.0 / Self::sphere_radius_sq(radius, t_shift, t)?),
            Barrier::Cusp { s_e, multiplier } => {
                Self::cusp_offset(s_e, s)?;
                Ok(-1.0 / (multiplier * multiplier))
            }
            Barrier::Plane { .. } | Barrier::Cylinder { .. } => Ok(0.0),
        }
    }

    /// Supremum of the curvature over `[s, ∞)`.
    pub fn sup_curvature_from(&self, t: f64, s: f64) -> Result<f64> {
        match *self {
            // cigar curvature increases toward the tip
            Barrier::Cigar { lambda, .. } => {
                self.curvature(t, s)?;
                Ok(2.0 * lambda)
            }
            _ => self.curvature(t, s),
        }
    }

    /// Area of `[s, ∞) × S¹`, i.e. `2π ∫_s^∞ e^{2u} ds'`.
    pub fn tail_area(&self, t: f64, s: f64) -> Result<f64> {
        match *self {
            Barrier::Cigar { lambda, s_shift, t_shift } => {
                let x = 2.0 * lambda * (t - t_shift) + s - s_shift;
                Ok(2.0 * PI / lambda * (-cigar(-x)))
            }
            Barrier::Sphere { radius, s_center, t_shift } => {
                let r2 = Self::sphere_radius_sq(radius, t_shift, t)?;
                // 1 - tanh(x) = 2 logistic(-2x)
                Ok(2.0 * PI * r2 * 2.0 * logistic(-2.0 * (s - s_center)))
            }
            Barrier::Cusp { s_e, multiplier } => Ok(2.0 * PI * multiplier * multiplier / Self::cusp_offset(s_e, s)?),
            Barrier::Plane { s_e, multiplier } => Ok(PI * multiplier * multiplier * (-2.0 * (s - s_e)).exp()),
            Barrier::Cylinder { .. } => Err(Error::BarrierDomain("a cylinder end has infinite area".into())),
        }
    }

    pub fn is_ricci_flow(&self) -> bool {
        !matches!(self, Barrier::Cusp { .. })
    }

    /// Returns the Ricci-flow residual `u_t - e^{-2u} u_ss` as a callable,
    /// built from analytic derivatives. Outside the time domain the callable
    /// yields `NaN`.
    pub fn flow_residual(&self) -> Result<impl Fn(f64, f64) -> f64> {
        if !self.is_ricci_flow() {
            return Err(Error::NotAFlow("the hyperbolic cusp"));
        }
        self.validate()?;
        let b = *self;
        Ok(move |t: f64, s: f64| b.residual_unchecked(t, s))
    }

    fn residual_unchecked(&self, t: f64, s: f64) -> f64 {
        match *self {
            Barrier::Cigar { lambda, s_shift, t_shift } => {
                let x = 2.0 * lambda * (t - t_shift) + s - s_shift;
                let up = logistic(2.0 * x);
                let down = logistic(-2.0 * x);
                let u_t = 2.0 * lambda * (-up);
                // e^{-2u} = λ (1 + e^{2x}) = λ / down
                let u_ss = -2.0 * up * down;
                u_t - lambda / down * u_ss
            }
            Barrier::Sphere { radius, s_center, t_shift } => {
                let Ok(r2) = Self::sphere_radius_sq(radius, t_shift, t) else {
                    return f64::NAN;
                };
                let x = s - s_center;
                let u_t = -1.0 / r2;
                // e^{-2u} u_ss = cosh²x / R² · (-sech²x)
                let ratio = if x.abs() < 300.0 {
                    let c = x.cosh();
                    (c * (1.0 / c)).powi(2)
                } else {
                    1.0
                };
                u_t + ratio / r2
            }
            Barrier::Plane { .. } | Barrier::Cylinder { .. } => 0.0,
            Barrier::Cusp { .. } => f64::NAN,
        }
    }
}

/// One violated rough cigar estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub s: f64,
    pub which: EnvelopeBound,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeBound {
    CigarLower,
    CigarUpper,
    SphereUnderCigar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub lambda: f64,
    pub samples: usize,
    pub violations: Vec<EnvelopeViolation>,
    pub pass: bool,
}

/// Checks the two-sided rough estimates for `C(s)` and the domination
/// `-log cosh s ≤ C_{1/4}(s)` on the samples. The scaled envelope
/// `C_λ(s) - (-½ log λ)` is tested for the given `λ`, which reduces to `C`.
pub fn cigar_envelope_checks(lambda: f64, samples: &[f64]) -> EnvelopeReport {
    const SLACK: f64 = 1e-14;
    let shift = -0.5 * lambda.ln();
    let mut violations = Vec::new();
    for &s in samples {
        let c = scaled_cigar(lambda, s) - shift;
        let lower = if s <= 0.0 { -0.5 * LN_2 } else { -0.5 * LN_2 - s };
        let upper = if s <= 0.0 { 0.0 } else { -s };
        if c < lower - SLACK {
            violations.push(EnvelopeViolation { s, which: EnvelopeBound::CigarLower, amount: lower - c });
        }
        if c > upper + SLACK {
            violations.push(EnvelopeViolation { s, which: EnvelopeBound::CigarUpper, amount: c - upper });
        }
        let sphere = -log_cosh(s);
        let dominating = scaled_cigar(0.25, s);
        if sphere > dominating + SLACK {
            violations.push(EnvelopeViolation {
                s,
                which: EnvelopeBound::SphereUnderCigar,
                amount: sphere - dominating,
            });
        }
    }
    EnvelopeReport { lambda, samples: samples.len(), pass: violations.is_empty(), violations }
}

/// Exact area of the cigar tail `[s, ∞)` at time `t` together with the
/// linear lower bound `-2πλ^{-1}(2λt + s)`. Requires `s < -2λt`.
pub fn cigar_tail_area(lambda: f64, t: f64, s: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let x = 2.0 * lambda * t + s;
    if x >= 0.0 {
        return Err(Error::BarrierDomain(format!("tail area bound needs s < -2λt, got 2λt + s = {x}")));
    }
    let exact = Barrier::cigar(lambda, 0.0, 0.0).tail_area(t, s)?;
    let bound = -2.0 * PI / lambda * x;
    Ok((exact, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cigar_at_origin() {
        let b = Barrier::cigar(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(b.eval(0.0, 0.0).unwrap(), -0.5 * LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval(0.0, 0.0).unwrap(), -0.346_573_590_279_972_6, epsilon = 1e-15);
        assert_abs_diff_eq!(b.curvature(0.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cigar_is_stable_for_huge_arguments() {
        assert_abs_diff_eq!(cigar(1e6), -1e6, epsilon = 1e-9);
        assert!(cigar(-1e6).abs() < 1e-300);
        assert!(cigar(800.0).is_finite());
    }

    #[test]
    fn sphere_goes_extinct() {
        let b = Barrier::unit_bulb(0.0);
        let near = b.eval(1.0 - 1e-12, 0.0).unwrap();
        assert!(near < -13.0);
        assert!(matches!(b.eval(1.0, 0.0), Err(Error::BarrierDomain(_))));
        assert!(matches!(b.eval(1.5, 3.0), Err(Error::BarrierDomain(_))));
        assert_abs_diff_eq!(b.extinction_time().unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cusp_unit_point() {
        let b = Barrier::Cusp { s_e: -4.0, multiplier: 1.0 };
        assert_eq!(b.eval(0.0, -3.0).unwrap(), 0.0);
        assert!(b.eval(0.0, -4.0).is_err());
        assert!(b.flow_residual().is_err());
    }

    #[test]
    fn envelope_examples() {
        let r = cigar_envelope_checks(1.0, &[0.0, 5.0]);
        assert!(r.pass, "{:?}", r.violations);
        assert_eq!(cigar(0.0), -0.5 * LN_2);
        let c5 = cigar(5.0);
        assert!((-0.5 * LN_2 - 5.0..=-5.0).contains(&c5));
        // -log cosh 0 = 0 ≤ C_{1/4}(0) = ½ log 2
        assert_abs_diff_eq!(scaled_cigar(0.25, 0.0), 0.5 * LN_2, epsilon = 1e-15);
    }

    #[test]
    fn envelope_dense_grid() {
        let samples: Vec<f64> = (0..=100_000).map(|i| -50.0 + 1e-3 * i as f64).collect();
        let r = cigar_envelope_checks(1.0, &samples);
        assert!(r.pass, "{:?}", &r.violations[..r.violations.len().min(5)]);
    }

    #[test]
    fn tail_area_examples() {
        let (exact, bound) = cigar_tail_area(1.0, 0.0, -1.0).unwrap();
        assert_abs_diff_eq!(exact, PI * (1.0f64.exp().powi(2) + 1.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(exact, 6.6819, epsilon = 1e-3);
        assert_abs_diff_eq!(bound, 2.0 * PI, epsilon = 1e-12);
        assert!(exact >= bound);

        let (exact, bound) = cigar_tail_area(1.0, 0.0, -1e-9).unwrap();
        assert!(bound > 0.0 && bound < 1e-8);
        assert_abs_diff_eq!(exact, PI * LN_2, epsilon = 1e-8);

        // λ=1/4, t=1, s=-3: 2λt + s = -5/2, bound = 8π · 5/2 = 20π
        let (exact, bound) = cigar_tail_area(0.25, 1.0, -3.0).unwrap();
        assert_abs_diff_eq!(bound, 20.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(exact, 4.0 * PI * (5.0f64.exp() + 1.0).ln(), epsilon = 1e-10);
        assert!(exact >= bound);

        assert!(cigar_tail_area(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn cigar_residual_example() {
        let f = Barrier::cigar(1.0, 0.0, 0.0).flow_residual().unwrap();
        assert!(f(0.3, -2.0).abs() < 1e-15);
        let cyl = Barrier::Cylinder { radius: 0.05 }.flow_residual().unwrap();
        assert_eq!(cyl(1.0, 3.0), 0.0);
        let sph = Barrier::unit_bulb(0.0).flow_residual().unwrap();
        assert!(sph(0.5, 2.0).abs() < 1e-14);
    }

    #[test]
    fn residual_matches_finite_differences() {
        // independent check of the analytic residual: central differences
        let cases = [
            Barrier::cigar(1.0, 0.0, 0.0),
            Barrier::cigar(400.0, 2.0, 0.1),
            Barrier::unit_bulb(1.5),
            Barrier::Sphere { radius: 2.0, s_center: 0.0, t_shift: 0.0 },
        ];
        for b in cases {
            for &(t, s) in &[(0.1, -0.7), (0.2, 0.4), (0.3, 1.3)] {
                let (t, s) = match b {
                    Barrier::Cigar { lambda, .. } => (t / lambda, s),
                    _ => (t, s),
                };
                let ht = 1e-6 * t.max(1e-3);
                let hs = 1e-4;
                let u = |t: f64, s: f64| b.eval(t, s).unwrap();
                let u_t = (u(t + ht, s) - u(t - ht, s)) / (2.0 * ht);
                let u_ss = (u(t, s + hs) - 2.0 * u(t, s) + u(t, s - hs)) / (hs * hs);
                let fd = u_t - (-2.0 * u(t, s)).exp() * u_ss;
                let scale = u_t.abs().max(1.0);
                assert!(fd.abs() < 1e-5 * scale, "{b:?} fd residual {fd}");
                let k = -(-2.0 * u(t, s)).exp() * u_ss;
                let k_exact = b.curvature(t, s).unwrap();
                assert!((k - k_exact).abs() < 1e-5 * k_exact.abs().max(1.0), "{b:?}: {k} vs {k_exact}");
            }
        }
    }

    #[test]
    fn tail_area_matches_quadrature() {
        let cases = [
            Barrier::cigar(2.0, 0.5, 0.1),
            Barrier::unit_bulb(3.0),
            Barrier::Cusp { s_e: -2.0, multiplier: 3.0 },
            Barrier::Plane { s_e: 1.0, multiplier: 2.0 },
        ];
        for b in cases {
            let (t, s0) = (0.2, 0.5);
            let n = 400_000;
            let len = 60.0;
            let h = len / n as f64;
            // composite Simpson on [s0, s0 + len]
            let f = |s: f64| 2.0 * PI * (2.0 * b.eval(t, s).unwrap()).exp();
            let mut acc = f(s0) + f(s0 + len);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(s0 + i as f64 * h);
            }
            let mut quad = acc * h / 3.0;
            if let Barrier::Cusp { s_e, multiplier } = b {
                quad += 2.0 * PI * multiplier * multiplier / (s0 + len - s_e);
            }
            let exact = b.tail_area(t, s0).unwrap();
            assert!((quad - exact).abs() < 1e-8 * exact.max(1.0), "{b:?}: {quad} vs {exact}");
        }
    }

    proptest! {
        #[test]
        fn rescaling_identity(lambda in 1e-3f64..1e3, t in -2.0f64..2.0, s in -40.0f64..40.0) {
            let lhs = cigar_flow(lambda, t, s);
            let rhs = cigar_flow(1.0, lambda * t, s) - 0.5 * lambda.ln();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn flow_families_have_zero_residual(
            lambda in 0.01f64..100.0,
            t in 0.0f64..0.9,
            s in -20.0f64..20.0,
            shift in -5.0f64..5.0,
        ) {
            let cigar = Barrier::cigar(lambda, shift, 0.0).flow_residual().unwrap();
            prop_assert!(cigar(t / lambda, s).abs() < 1e-12 * lambda.max(1.0));
            let sphere = Barrier::unit_bulb(shift).flow_residual().unwrap();
            prop_assert!(sphere(t, s).abs() < 1e-12);
            let plane = Barrier::Plane { s_e: shift, multiplier: lambda }.flow_residual().unwrap();
            prop_assert_eq!(plane(t, s), 0.0);
        }
    }
}
