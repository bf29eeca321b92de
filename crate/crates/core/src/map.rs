//! Circle-map families, their derivatives and orbits.
//!
//! Every family is a trigonometric polynomial lift
//! `F(x) = x + ω + Σ b_k sin(2π k x)`, which makes derivatives of all
//! orders closed-form and the critical set explicit.

use rug::float::Constant;
use rug::ops::{AddAssignRound, Pow};
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

pub const DEFAULT_PRECISION: u32 = 256;

/// Parameters of the two-harmonic family
/// `F(x) = x + ω + a₁ sin(2πx) + a₂ sin(4πx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BicriticalParams {
    /// Amplitudes tuned so that `F′ = 8πa₂ (cos 2πx − u₀)²`: two cubic
    /// critical points at `cos 2πx = u₀`.
    Shape { u0: f64 },
    /// Raw amplitudes; the critical set is read off the minimum of `F′`.
    Amplitudes { a1: f64, a2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    RigidRotation,
    ArnoldCubic,
    MfoldCubic { m: u32 },
    PerturbedBicritical(BicriticalParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::RigidRotation => "rigid_rotation",
            Family::ArnoldCubic => "arnold_cubic",
            Family::MfoldCubic { .. } => "mfold_cubic",
            Family::PerturbedBicritical(_) => "perturbed_bicritical",
        }
    }

    /// Builds a family from its config name and optional parameter object.
    pub fn from_config(name: &str, params: Option<&serde_json::Value>) -> Result<Self> {
        let need = |what: &str| Error::Config(format!("family {name} needs params.{what}"));
        match name {
            "rigid_rotation" => Ok(Family::RigidRotation),
            "arnold_cubic" => Ok(Family::ArnoldCubic),
            "mfold_cubic" => {
                let m = params.and_then(|p| p.get("m")).and_then(|v| v.as_u64()).ok_or_else(|| need("m"))?;
                Ok(Family::MfoldCubic { m: m as u32 })
            }
            "perturbed_bicritical" => {
                let p = params.ok_or_else(|| need("u0 or params.a1/a2"))?;
                let parsed: BicriticalParams = serde_json::from_value(p.clone())
                    .map_err(|e| Error::Config(format!("perturbed_bicritical params: {e}")))?;
                Ok(Family::PerturbedBicritical(parsed))
            }
            other => Err(Error::InvalidFamily(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub position: Float,
    pub criticality: u32,
}

/// One member of a family: lift, rotation parameter and working precision.
#[derive(Clone, Debug)]
pub struct MapSpec {
    family: Family,
    omega: Float,
    prec: u32,
    two_pi: Float,
    // (k, b_k) for the terms b_k sin(2π k x)
    terms: Vec<(u32, Float)>,
    terms_f64: Vec<(f64, f64)>,
    critical: Vec<CriticalPoint>,
}

impl MapSpec {
    pub fn new(family: Family, omega: &Float, precision_bits: u32) -> Result<Self> {
        if precision_bits < 64 {
            return Err(Error::InvalidInput(format!("precision_bits must be >= 64, got {precision_bits}")));
        }
        let prec = precision_bits;
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        let pi = Float::with_val(prec, Constant::Pi);
        let mut terms = Vec::new();
        match &family {
            Family::RigidRotation => {}
            Family::ArnoldCubic => terms.push((1, -Float::with_val(prec, two_pi.recip_ref()))),
            Family::MfoldCubic { m } => {
                if *m == 0 {
                    return Err(Error::InvalidFamily("mfold_cubic needs m >= 1".into()));
                }
                let denom = Float::with_val(prec, &two_pi * *m);
                terms.push((*m, -denom.recip()));
            }
            Family::PerturbedBicritical(BicriticalParams::Shape { u0 }) => {
                if !(u0.abs() < 1.0) {
                    return Err(Error::InvalidFamily(format!("u0 must lie in (-1, 1), got {u0}")));
                }
                let u = Float::with_val(prec, *u0);
                let s = Float::with_val(prec, u.square_ref()) * 2u32 + 1u32;
                let a2 = (Float::with_val(prec, &pi * &s) * 4u32).recip();
                let a1 = -(Float::with_val(prec, &u * 2u32) / (Float::with_val(prec, &pi * &s)));
                terms.push((1, a1));
                terms.push((2, a2));
            }
            Family::PerturbedBicritical(BicriticalParams::Amplitudes { a1, a2 }) => {
                terms.push((1, Float::with_val(prec, *a1)));
                terms.push((2, Float::with_val(prec, *a2)));
            }
        }
        let terms_f64 = terms.iter().map(|(k, b)| (*k as f64, b.to_f64())).collect();
        let mut spec = MapSpec {
            family,
            omega: Float::with_val(prec, omega),
            prec,
            two_pi,
            terms,
            terms_f64,
            critical: Vec::new(),
        };
        spec.critical = spec.declared_critical_points();
        Ok(spec)
    }

    pub fn from_decimal(family: Family, omega: &str, precision_bits: u32) -> Result<Self> {
        let w = Float::parse(omega).map_err(|e| Error::InvalidInput(format!("omega {omega:?}: {e}")))?;
        Self::new(family, &Float::with_val(precision_bits.max(64), w), precision_bits)
    }

    /// Same family and precision with a different rotation parameter.
    pub fn with_omega(&self, omega: &Float) -> MapSpec {
        let mut s = self.clone();
        s.omega = Float::with_val(self.prec, omega);
        s
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn omega(&self) -> &Float {
        &self.omega
    }

    pub fn precision_bits(&self) -> u32 {
        self.prec
    }

    /// Critical points in increasing order on `[0, 1)`.
    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    /// Base point of the dynamical partitions: a critical point, or 0 for a map without any.
    pub fn base_point(&self, index: usize) -> Result<Float> {
        if self.critical.is_empty() {
            if index == 0 {
                return Ok(Float::new(self.prec));
            }
        } else if let Some(c) = self.critical.get(index) {
            return Ok(c.position.clone());
        }
        Err(Error::InvalidInput(format!("no critical point with index {index}")))
    }

    pub fn eval_lift(&self, x: &Float) -> Float {
        let mut out = Float::with_val(self.prec, x + &self.omega);
        for (k, b) in &self.terms {
            let arg = Float::with_val(self.prec, &self.two_pi * *k) * x;
            out += arg.sin() * b;
        }
        out
    }

    /// `F^(order)(x)` for `order` in 1..=3.
    pub fn derivative(&self, x: &Float, order: u32) -> Float {
        assert!((1..=3).contains(&order), "derivative order {order} outside 1..=3");
        let mut out = Float::with_val(self.prec, if order == 1 { 1 } else { 0 });
        for (k, b) in &self.terms {
            let w = Float::with_val(self.prec, &self.two_pi * *k);
            let arg = Float::with_val(self.prec, &w * x);
            let scale = Float::with_val(self.prec, (&w).pow(order)) * b;
            let v = match order {
                1 => arg.cos() * scale,
                2 => -(arg.sin() * scale),
                _ => -(arg.cos() * scale),
            };
            out += v;
        }
        out
    }

    /// `F′` in double precision, used for error propagation.
    pub fn derivative_f64(&self, x: f64) -> f64 {
        let tp = std::f64::consts::TAU;
        1.0 + self.terms_f64.iter().map(|(k, b)| b * tp * k * (tp * k * x).cos()).sum::<f64>()
    }

    /// `(F′, F″, F‴)` in double precision.
    pub fn derivatives_f64(&self, x: f64) -> (f64, f64, f64) {
        let tp = std::f64::consts::TAU;
        let (mut d1, mut d2, mut d3) = (1.0, 0.0, 0.0);
        for (k, b) in &self.terms_f64 {
            let w = tp * k;
            let (s, c) = (w * x).sin_cos();
            d1 += b * w * c;
            d2 -= b * w * w * s;
            d3 -= b * w * w * w * c;
        }
        (d1, d2, d3)
    }

    pub fn eval_lift_f64(&self, x: f64) -> f64 {
        let tp = std::f64::consts::TAU;
        x + self.omega.to_f64() + self.terms_f64.iter().map(|(k, b)| b * (tp * k * x).sin()).sum::<f64>()
    }

    pub fn schwarzian(&self, x: &Float) -> Result<Float> {
        let d1 = self.derivative(x, 1);
        let guard = Float::with_val(self.prec, Float::i_exp(1, -((self.prec / 2) as i32)));
        if Float::with_val(self.prec, d1.abs_ref()) <= guard {
            let near = self.nearest_critical(x);
            return Err(Error::Domain(format!(
                "schwarzian undefined near critical point {}",
                near.map(|c| numeric::decimal(&c, 20)).unwrap_or_else(|| "?".into())
            )));
        }
        let d2 = self.derivative(x, 2);
        let d3 = self.derivative(x, 3);
        let r = Float::with_val(self.prec, &d2 / &d1);
        Ok(d3 / &d1 - Float::with_val(self.prec, r.square_ref()) * 1.5f64)
    }

    fn nearest_critical(&self, x: &Float) -> Option<Float> {
        let frac = Float::with_val(self.prec, x - Float::with_val(self.prec, x.floor_ref()));
        self.critical
            .iter()
            .map(|c| {
                let d = Float::with_val(self.prec, &frac - &c.position).abs();
                let d = d.clone().min(&(Float::with_val(self.prec, 1) - d));
                (d, c.position.clone())
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map(|(_, p)| p)
    }

    fn declared_critical_points(&self) -> Vec<CriticalPoint> {
        let prec = self.prec;
        let cubic = |position: Float| CriticalPoint { position, criticality: 3 };
        match &self.family {
            Family::RigidRotation => Vec::new(),
            Family::ArnoldCubic => vec![cubic(Float::new(prec))],
            Family::MfoldCubic { m } => {
                (0..*m).map(|k| cubic(Float::with_val(prec, k) / *m)).collect()
            }
            Family::PerturbedBicritical(params) => {
                let u0 = match params {
                    BicriticalParams::Shape { u0 } => Float::with_val(prec, *u0),
                    BicriticalParams::Amplitudes { .. } => {
                        // F′ = 1 − 4πa₂ + 2πa₁u + 8πa₂u² with u = cos 2πx
                        let (a1, a2) = (&self.terms[0].1, &self.terms[1].1);
                        if a2.is_zero() {
                            return Vec::new();
                        }
                        let u = -Float::with_val(prec, a1 / Float::with_val(prec, a2 * 8u32));
                        if Float::with_val(prec, u.abs_ref()) >= 1 {
                            return Vec::new();
                        }
                        let x = Float::with_val(prec, u.acos_ref()) / &self.two_pi;
                        let guard = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
                        if self.derivative(&x, 1) > guard {
                            return Vec::new();
                        }
                        u
                    }
                };
                let x = Float::with_val(prec, u0.acos_ref()) / &self.two_pi;
                let y = Float::with_val(prec, 1u32) - &x;
                vec![cubic(x), cubic(y)]
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalCheck {
    pub position: String,
    pub criticality: u32,
    pub first_derivative: f64,
    pub second_derivative: f64,
    pub third_derivative: f64,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub family: String,
    pub precision_bits: u32,
    pub min_derivative: f64,
    pub monotone: bool,
    pub critical_points: Vec<CriticalCheck>,
}

const VALIDATION_GRID: usize = 4096;

/// Checks that the lift is a multicritical circle homeomorphism with the declared critical set.
pub fn validate_map(spec: &MapSpec) -> Result<ValidationReport> {
    let prec = spec.prec;
    let mut min_d = f64::INFINITY;
    let mut argmin = 0.0;
    for i in 0..VALIDATION_GRID {
        let x = Float::with_val(prec, i) / VALIDATION_GRID as u32;
        let d = spec.derivative(&x, 1).to_f64();
        if d < min_d {
            min_d = d;
            argmin = i as f64 / VALIDATION_GRID as f64;
        }
    }
    let tol = 2f64.powi(-((prec / 2) as i32));
    if min_d < -tol {
        return Err(Error::InvalidFamily(format!(
            "F' = {min_d:.3e} < 0 at x = {argmin}: parameters leave the homeomorphism class"
        )));
    }
    let mut checks = Vec::new();
    for c in spec.critical_points() {
        let f1 = spec.derivative(&c.position, 1).to_f64();
        let f2 = spec.derivative(&c.position, 2).to_f64();
        let f3 = spec.derivative(&c.position, 3).to_f64();
        let fc = spec.eval_lift(&c.position);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 8..=(prec / 4) {
            let h = Float::with_val(prec, Float::i_exp(1, -(k as i32)));
            let x = Float::with_val(prec, &c.position + &h);
            let dy = Float::with_val(prec, spec.eval_lift(&x) - &fc);
            xs.push(-(k as f64));
            ys.push(dy.abs().log2().to_f64());
        }
        let (slope, icpt) = numeric::linear_fit(&xs, &ys).unwrap_or((f64::NAN, f64::NAN));
        let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - icpt).powi(2)).sum::<f64>()
            / xs.len().max(1) as f64)
            .sqrt();
        checks.push(CriticalCheck {
            position: numeric::decimal(&c.position, 30),
            criticality: c.criticality,
            first_derivative: f1,
            second_derivative: f2,
            third_derivative: f3,
            fitted_exponent: slope,
            fit_residual: residual,
        });
    }
    Ok(ValidationReport {
        family: spec.family.name().to_string(),
        precision_bits: prec,
        min_derivative: min_d,
        monotone: true,
        critical_points: checks,
    })
}

/// Orbit `x_0, F(x_0), ...` stored as integer winding plus fractional part.
#[derive(Clone, Debug)]
pub struct OrbitSegment {
    prec: u32,
    winding: Vec<i64>,
    frac: Vec<Float>,
    // a-posteriori error estimate in units of 2^-prec
    err: Vec<f64>,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.frac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frac.is_empty()
    }

    pub fn precision_bits(&self) -> u32 {
        self.prec
    }

    pub fn winding(&self, k: usize) -> i64 {
        self.winding[k]
    }

    /// Position of `x_k` on the circle, in `[0, 1)`.
    pub fn frac(&self, k: usize) -> &Float {
        &self.frac[k]
    }

    /// Lift value `x_k`.
    pub fn position(&self, k: usize) -> Float {
        Float::with_val(self.prec, &self.frac[k] + self.winding[k])
    }

    /// `x_i − x_j` in lift coordinates, without loss from large windings.
    pub fn diff(&self, i: usize, j: usize) -> Float {
        let mut d = Float::with_val(self.prec, &self.frac[i] - &self.frac[j]);
        d += self.winding[i] - self.winding[j];
        d
    }

    /// Estimated absolute error of `x_k`.
    pub fn abs_error(&self, k: usize) -> f64 {
        self.err[k] * 2f64.powi(-(self.prec as i32))
    }

    pub fn max_abs_error(&self) -> f64 {
        self.err.iter().copied().fold(0.0, f64::max) * 2f64.powi(-(self.prec as i32))
    }

    /// Moves `x_k` by `delta` without touching later points.
    pub fn shift_point(&mut self, k: usize, delta: f64) {
        let mut u = Float::with_val(self.prec, &self.frac[k] + delta);
        let fl = Float::with_val(self.prec, u.floor_ref());
        u -= &fl;
        self.frac[k] = u;
        self.winding[k] += fl.to_integer().and_then(|i| i.to_i64()).unwrap_or(0);
    }

    /// Appends `extra` further iterates.
    pub fn extend(&mut self, spec: &MapSpec, extra: usize) -> Result<()> {
        let last = self.len() - 1;
        let start = self.frac[last].to_f64();
        precision_precheck(spec, start, self.err[last], extra)?;
        let budget = (spec.prec - 64) as f64;
        let mut w = self.winding[last];
        let mut u = self.frac[last].clone();
        let mut e = self.err[last];
        for _ in 0..extra {
            let d = spec.derivative_f64(u.to_f64()).abs();
            let mut y = spec.eval_lift(&u);
            let fl = Float::with_val(spec.prec, y.floor_ref());
            let shift = fl.to_integer().and_then(|i| i.to_i64()).ok_or_else(|| Error::Domain("orbit left the i64 winding range".into()))?;
            y.add_assign_round(-shift, rug::float::Round::Nearest);
            w += shift;
            e = d * e + 1.0;
            if e.log2() > budget {
                return Err(precision_error(spec, e.log2(), self.len()));
            }
            u = y;
            self.winding.push(w);
            self.frac.push(u.clone());
            self.err.push(e);
        }
        Ok(())
    }
}

fn precision_error(spec: &MapSpec, lost_bits: f64, step: usize) -> Error {
    let need = (lost_bits.ceil() as u32 + 64).div_ceil(64) * 64 + 64;
    Error::Precision {
        detail: format!("about {lost_bits:.0} bits lost by step {step} at {} bits", spec.prec),
        suggested_bits: need.max(spec.prec + 64),
    }
}

/// Double-precision rehearsal of the error recursion; refuses before any expensive work.
fn precision_precheck(spec: &MapSpec, start: f64, e0: f64, count: usize) -> Result<()> {
    let budget = (spec.prec - 64) as f64;
    let mut x = start;
    let mut e = e0;
    for k in 0..count {
        e = spec.derivative_f64(x).abs() * e + 1.0;
        if e.log2() > budget {
            return Err(precision_error(spec, e.log2(), k + 1));
        }
        x = spec.eval_lift_f64(x);
        x -= x.floor();
    }
    Ok(())
}

/// `x_0, ..., x_count` with `x_0` reduced to `[0, 1)`.
pub fn iterate_orbit(spec: &MapSpec, x0: &Float, count: usize) -> Result<OrbitSegment> {
    if count < 1 {
        return Err(Error::InvalidInput("orbit count must be at least 1".into()));
    }
    let prec = spec.prec;
    let x0 = Float::with_val(prec, x0);
    let fl = Float::with_val(prec, x0.floor_ref());
    let u0 = Float::with_val(prec, &x0 - &fl);
    let mut orbit = OrbitSegment { prec, winding: vec![0], frac: vec![u0], err: vec![1.0] };
    orbit.extend(spec, count)?;
    Ok(orbit)
}
