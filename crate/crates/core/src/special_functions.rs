//! Heat kernel, singular drift families and explicit moduli of continuity.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{adaptive, gl20, graded, to_infinity, SingularEnd};

/// Viscosity of the operator ∂t − 4ν∂².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub nu: f64,
}

impl KernelParams {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return domain(format!("viscosity must be positive, got {nu}"));
        }
        Ok(Self { nu })
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { nu: 1.0 }
    }
}

/// (16πνt)^{-1/2} exp(−y²/(16νt)).
pub fn heat_kernel(t: f64, y: f64, params: KernelParams) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    Ok(heat_kernel_unchecked(t, y, params.nu))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(t: f64, y: f64, nu: f64) -> f64 {
    let a = 16.0 * nu * t;
    (-y * y / a).exp() / (PI * a).sqrt()
}

fn moment_cache() -> &'static Mutex<BTreeMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<BTreeMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// C_r = 4^r π^{-1/2} ∫|σ|^r e^{−σ²} dσ, computed once per exponent.
pub fn moment_constant(r: f64) -> Result<f64> {
    if !(r > -1.0) || !r.is_finite() {
        return domain(format!("moment exponent must exceed -1, got {r}"));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let key = r.to_bits();
    if let Some(v) = moment_cache().lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let near = graded(0.0, 1.0, SingularEnd::Left, |s| s.powf(r) * (-s * s).exp());
    let far = to_infinity(1.0, |s| s.powf(r) * (-s * s).exp());
    let value = 4f64.powf(r) * 2.0 * (near + far) / PI.sqrt();
    moment_cache().lock().unwrap().insert(key, value);
    Ok(value)
}

/// ∫ Ψ(t, σ) |σ|^r dσ = C_r (νt)^{r/2}.
pub fn heat_kernel_moment(r: f64, t: f64, params: KernelParams) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("moment needs t > 0, got {t}"));
    }
    Ok(moment_constant(r)? * (params.nu * t).powf(0.5 * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriftFamily {
    H0Exact,
    HEpsMollified,
    HBarEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriftSign {
    #[default]
    Stabilizing,
    Flipped,
}

/// Which singular coefficient h is used, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub beta: f64,
    #[serde(default)]
    pub mollify_eps: f64,
    #[serde(default)]
    pub sign: DriftSign,
}

impl DriftSpec {
    pub fn h0(beta: f64) -> Self {
        Self { family: DriftFamily::H0Exact, beta, mollify_eps: 0.0, sign: DriftSign::Stabilizing }
    }

    pub fn h_eps(beta: f64, eps: f64) -> Self {
        Self { family: DriftFamily::HEpsMollified, beta, mollify_eps: eps, sign: DriftSign::Stabilizing }
    }

    pub fn h_bar(beta: f64, eps: f64) -> Self {
        Self { family: DriftFamily::HBarEps, beta, mollify_eps: eps, sign: DriftSign::Stabilizing }
    }

    pub fn with_sign(mut self, sign: DriftSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return domain(format!("beta must lie in (0,1), got {}", self.beta));
        }
        match self.family {
            DriftFamily::H0Exact => {}
            DriftFamily::HEpsMollified => {
                if !(self.mollify_eps > 0.0 && self.mollify_eps < 1.0 / 80.0) {
                    return domain(format!("mollification level must lie in (0,1/80), got {}", self.mollify_eps));
                }
            }
            DriftFamily::HBarEps => {
                if !(self.mollify_eps > 0.0 && self.mollify_eps <= 1.0) {
                    return domain(format!("smoothing level must lie in (0,1], got {}", self.mollify_eps));
                }
            }
        }
        Ok(())
    }

    /// +1 for the stabilizing transport direction, −1 when flipped.
    pub fn transport_sign(&self) -> f64 {
        match self.sign {
            DriftSign::Stabilizing => 1.0,
            DriftSign::Flipped => -1.0,
        }
    }
}

/// Validated drift evaluator.
#[derive(Debug, Clone, Copy)]
pub struct Drift {
    spec: DriftSpec,
}

const BUMP_NORM: f64 = 35.0 / 32.0;

impl Drift {
    pub fn new(spec: DriftSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &DriftSpec {
        &self.spec
    }

    /// h(ξ); odd in ξ.
    pub fn value(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let a = xi.abs();
        let v = match self.spec.family {
            DriftFamily::H0Exact => a.powf(self.spec.beta),
            DriftFamily::HEpsMollified => self.mollified(a, false),
            DriftFamily::HBarEps => self.bar_value(a),
        };
        v.copysign(xi)
    }

    /// h'(ξ); even in ξ. Singular at 0 for the exact family.
    pub fn deriv(&self, xi: f64) -> Result<f64> {
        let a = xi.abs();
        let b = self.spec.beta;
        match self.spec.family {
            DriftFamily::H0Exact => {
                if a == 0.0 {
                    return Err(Error::Singularity("h' of |xi|^beta is infinite at 0".into()));
                }
                Ok(b * a.powf(b - 1.0))
            }
            DriftFamily::HEpsMollified => Ok(self.mollified(a, true)),
            DriftFamily::HBarEps => Ok(b / (self.spec.mollify_eps.powf(0.5 * (1.0 - b)) + a.powf(1.0 - b))),
        }
    }

    /// Average of h' over [a, b], finite for every family.
    pub fn deriv_average(&self, a: f64, b: f64) -> f64 {
        if b > a {
            (self.value(b) - self.value(a)) / (b - a)
        } else {
            self.deriv(a).unwrap_or(f64::INFINITY)
        }
    }

    /// ε^{β/2} ∫₀^{ξ/√ε} β/(1+z^{1−β}) dz for ξ > 0.
    fn bar_value(&self, a: f64) -> f64 {
        let b = self.spec.beta;
        let se = self.spec.mollify_eps.sqrt();
        let y = a / se;
        let integral = graded(0.0, y, SingularEnd::Left, |z| b / (1.0 + z.powf(1.0 - b)));
        se.powf(b) * integral
    }

    // Base profile before mollification: ξ^β up to 1/ε, then a concave quadratic
    // bridge whose slope ramps linearly to 0 at 2/ε, then constant.
    fn base(&self, x: f64, deriv: bool) -> f64 {
        let b = self.spec.beta;
        let x0 = 1.0 / self.spec.mollify_eps;
        let x1 = 2.0 * x0;
        let m0 = b * x0.powf(b - 1.0);
        if x <= x0 {
            if deriv {
                b * x.powf(b - 1.0)
            } else {
                x.powf(b)
            }
        } else if x <= x1 {
            let s = x - x0;
            if deriv {
                m0 * (1.0 - s / (x1 - x0))
            } else {
                x0.powf(b) + m0 * (s - s * s / (2.0 * (x1 - x0)))
            }
        } else if deriv {
            0.0
        } else {
            x0.powf(b) * (1.0 + 0.5 * b)
        }
    }

    fn mollified(&self, a: f64, deriv: bool) -> f64 {
        let eps = self.spec.mollify_eps;
        if a < 2.0 * eps {
            return self.mollified_near_origin(a, deriv);
        }
        let x0 = 1.0 / eps;
        let x1 = 2.0 * x0;
        let lo = a - eps;
        let hi = a + eps;
        let mut cuts = vec![lo];
        for c in [x0, x1] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.push(hi);
        let rule = gl20();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            acc += rule.integrate(w[0], w[1], |x| {
                let y = (a - x) / eps;
                let q = 1.0 - y * y;
                self.base(x, deriv) * q * q * q
            });
        }
        acc * BUMP_NORM / eps
    }

    // Exact moments of sgn(z)|z|^β against the bump polynomial, in units of ε.
    fn mollified_near_origin(&self, a: f64, deriv: bool) -> f64 {
        let b = self.spec.beta;
        let eps = self.spec.mollify_eps;
        let w = a / eps;
        let coeffs = bump_polynomial(w);
        let lo = w - 1.0;
        let hi = w + 1.0;
        let plo = lo.max(0.0);
        let neg = (-lo).max(0.0);
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
            if deriv {
                let e = b + k as f64;
                let pos = (hi.powf(e) - plo.powf(e)) / e;
                let ng = parity * neg.powf(e) / e;
                acc += c * (pos + ng);
            } else {
                let e = b + k as f64 + 1.0;
                let pos = (hi.powf(e) - plo.powf(e)) / e;
                let ng = -parity * neg.powf(e) / e;
                acc += c * (pos + ng);
            }
        }
        if deriv {
            BUMP_NORM * b * eps.powf(b - 1.0) * acc
        } else {
            BUMP_NORM * eps.powf(b) * acc
        }
    }
}

/// Coefficients of (1 − (z − w)²)³ in powers of z.
fn bump_polynomial(w: f64) -> [f64; 7] {
    let q = [1.0 - w * w, 2.0 * w, -1.0];
    let mut sq = [0.0; 5];
    for i in 0..3 {
        for j in 0..3 {
            sq[i + j] += q[i] * q[j];
        }
    }
    let mut cube = [0.0; 7];
    for i in 0..5 {
        for j in 0..3 {
            cube[i + j] += sq[i] * q[j];
        }
    }
    cube
}

pub fn drift_eval(spec: &DriftSpec, xi: f64) -> Result<f64> {
    Ok(Drift::new(*spec)?.value(xi))
}

pub fn drift_deriv(spec: &DriftSpec, xi: f64) -> Result<f64> {
    Drift::new(*spec)?.deriv(xi)
}

/// Fast interpolated (h, h') on an asinh-stretched grid, for path simulation.
#[derive(Debug, Clone)]
pub struct DriftTable {
    drift: Drift,
    scale: f64,
    s_max: f64,
    ds: f64,
    x: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
}

impl DriftTable {
    /// Exact for |ξ| > `reach`; `cells` intervals on the stretched axis.
    pub fn new(drift: Drift, reach: f64, cells: usize) -> Self {
        let scale = match drift.spec.family {
            DriftFamily::H0Exact => 1e-4,
            _ => drift.spec.mollify_eps.min(1.0) * 0.25,
        };
        let s_max = (reach / scale).asinh();
        let n = cells.max(16);
        let ds = 2.0 * s_max / n as f64;
        let x: Vec<f64> = (0..=n).map(|k| scale * (-s_max + k as f64 * ds).sinh()).collect();
        let h: Vec<f64> = x.iter().map(|&v| drift.value(v)).collect();
        let dh: Vec<f64> = x.iter().map(|&v| drift.deriv(v).unwrap_or_else(|_| drift.deriv_average(-scale, scale))).collect();
        Self { drift, scale, s_max, ds, x, h, dh }
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    /// (h(ξ), h'(ξ)); h is cubic Hermite, h' linear between table nodes.
    #[inline]
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let s = (xi / self.scale).asinh();
        if !(s.abs() < self.s_max) {
            return (self.drift.value(xi), self.drift.deriv(xi).unwrap_or(0.0));
        }
        let u = (s + self.s_max) / self.ds;
        let k = (u as usize).min(self.x.len() - 2);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let hx = x1 - x0;
        let t = (xi - x0) / hx;
        let (h0, h1, d0, d1) = (self.h[k], self.h[k + 1], self.dh[k], self.dh[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h = (2.0 * t3 - 3.0 * t2 + 1.0) * h0
            + (t3 - 2.0 * t2 + t) * hx * d0
            + (-2.0 * t3 + 3.0 * t2) * h1
            + (t3 - t2) * hx * d1;
        (h, d0 + (d1 - d0) * t)
    }
}

/// Modulus of continuity families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Modulus {
    ExplicitHeur1 { delta: f64, beta: f64 },
    TanhInitial { b0: f64, b1: f64 },
    ChiForcing { alpha: f64 },
    /// coef · ξ^exponent.
    Power { coef: f64, exponent: f64 },
    /// ξ / (1 + ξ^{(1+β)/2}).
    Rational { beta: f64 },
    /// Piecewise linear through (xs, values), constant beyond the last node.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl Modulus {
    pub fn tanh_initial(u0_sup: f64, u0_lip: f64) -> Result<Self> {
        let (b0, b1) = initial_modulus_constants(u0_sup, u0_lip)?;
        Ok(Modulus::TanhInitial { b0, b1 })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modulus::ExplicitHeur1 { delta, beta } => {
                check_delta(*delta)?;
                check_unit(*beta, "beta")
            }
            Modulus::TanhInitial { b0, b1 } => {
                if *b0 < 0.0 || *b1 < 0.0 {
                    return domain("tanh modulus needs non-negative constants");
                }
                Ok(())
            }
            Modulus::ChiForcing { alpha } => check_unit(*alpha, "alpha"),
            Modulus::Power { coef, exponent } => {
                if *coef < 0.0 || !(*exponent > 0.0) {
                    return domain("power modulus needs coef >= 0 and exponent > 0");
                }
                Ok(())
            }
            Modulus::Rational { beta } => check_unit(*beta, "beta"),
            Modulus::Tabulated { xs, values } => {
                if xs.len() != values.len() || xs.len() < 2 {
                    return domain("tabulated modulus needs matching tables of length >= 2");
                }
                if xs[0] != 0.0 || values[0] != 0.0 {
                    return domain("tabulated modulus must start at (0, 0)");
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return domain("tabulated modulus nodes must increase strictly");
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return domain("tabulated modulus must be non-decreasing");
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Modulus::ExplicitHeur1 { delta, beta } => explicit_modulus_unchecked(x, *delta, *beta),
            Modulus::TanhInitial { b0, b1 } => b1 * (b0 * x).tanh(),
            Modulus::ChiForcing { alpha } => x.powf(*alpha).min(1.0),
            Modulus::Power { coef, exponent } => coef * x.powf(*exponent),
            Modulus::Rational { beta } => x / (1.0 + x.powf(0.5 * (1.0 + beta))),
            Modulus::Tabulated { xs, values } => {
                let n = xs.len();
                if x >= xs[n - 1] {
                    return values[n - 1];
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    /// Right derivative.
    pub fn deriv(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Modulus::ExplicitHeur1 { delta, beta } => {
                if x <= *delta {
                    1.0 - 1.5 * x.sqrt()
                } else {
                    right_branch_slope(x, *beta)
                }
            }
            Modulus::TanhInitial { b0, b1 } => {
                let c = (b0 * x).cosh();
                b0 * b1 / (c * c)
            }
            Modulus::ChiForcing { alpha } => {
                if x >= 1.0 {
                    0.0
                } else if x == 0.0 {
                    f64::INFINITY
                } else {
                    alpha * x.powf(alpha - 1.0)
                }
            }
            Modulus::Power { coef, exponent } => {
                if x == 0.0 && *exponent < 1.0 {
                    f64::INFINITY
                } else {
                    coef * exponent * x.powf(exponent - 1.0)
                }
            }
            Modulus::Rational { beta } => {
                let a = 0.5 * (1.0 + beta);
                let p = x.powf(a);
                (1.0 + p - a * p) / ((1.0 + p) * (1.0 + p))
            }
            Modulus::Tabulated { xs, values } => {
                let n = xs.len();
                if x >= xs[n - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                (values[k + 1] - values[k]) / (xs[k + 1] - xs[k])
            }
        }
    }

    /// Points where the derivative is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Modulus::ExplicitHeur1 { delta, .. } => vec![*delta],
            Modulus::ChiForcing { .. } => vec![1.0],
            Modulus::Tabulated { xs, .. } => xs[1..].to_vec(),
            _ => Vec::new(),
        }
    }

    /// a such that ω(η) = O(η^a) as η → ∞.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            Modulus::Power { exponent, .. } => *exponent,
            Modulus::Rational { beta } => 0.5 * (1.0 - beta),
            _ => 0.0,
        }
    }

    /// b such that ω(η) ≍ η^b as η → 0, when known.
    pub fn origin_exponent(&self) -> f64 {
        match self {
            Modulus::Power { exponent, .. } => *exponent,
            Modulus::ChiForcing { alpha } => *alpha,
            _ => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Modulus::TanhInitial { b0, b1 } => *b0 == 0.0 || *b1 == 0.0,
            Modulus::Power { coef, .. } => *coef == 0.0,
            Modulus::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
            _ => false,
        }
    }

    /// Same modulus scaled by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Modulus {
        match self {
            Modulus::Power { coef, exponent } => Modulus::Power { coef: coef * factor, exponent: *exponent },
            Modulus::TanhInitial { b0, b1 } => Modulus::TanhInitial { b0: *b0, b1: b1 * factor },
            other => {
                let xs: Vec<f64> = (0..=4000).map(|k| 1e-6 * 1.005f64.powi(k) - 1e-6).collect();
                let values = xs.iter().map(|&x| factor * other.value(x)).collect();
                Modulus::Tabulated { xs, values }
            }
        }
    }
}

fn check_unit(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return domain(format!("{name} must lie in (0,1), got {v}"));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.25) {
        return domain(format!("shape parameter must lie in (0,1/4), got {delta}"));
    }
    Ok(())
}

fn right_branch_slope(x: f64, beta: f64) -> f64 {
    0.25 * (-x.powf(beta + 1.0) / (4.0 * (beta + 1.0))).exp()
}

fn explicit_modulus_unchecked(x: f64, delta: f64, beta: f64) -> f64 {
    if x <= delta {
        return x - x.powf(1.5);
    }
    let (tail, _) = adaptive(delta, x, 1e-14, |eta| right_branch_slope(eta, beta));
    delta - delta.powf(1.5) + tail
}

/// σ − σ^{3/2} on [0,δ], continued by δ − δ^{3/2} + ¼∫_δ^σ exp(−η^{β+1}/(4(β+1)))dη.
pub fn explicit_modulus(sigma: f64, delta: f64, beta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_unit(beta, "beta")?;
    if sigma < 0.0 {
        return domain(format!("modulus argument must be non-negative, got {sigma}"));
    }
    Ok(explicit_modulus_unchecked(sigma, delta, beta))
}

/// 4ω''(σ) + σ^β ω'(σ) for the explicit modulus, branch by branch.
pub fn condition_residual(sigma: f64, delta: f64, beta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_unit(beta, "beta")?;
    if !(sigma > 0.0) {
        return domain(format!("residual needs sigma > 0, got {sigma}"));
    }
    let sb = sigma.powf(beta);
    if sigma <= delta {
        let d1 = 1.0 - 1.5 * sigma.sqrt();
        let d2 = -0.75 / sigma.sqrt();
        Ok(4.0 * d2 + sb * d1)
    } else {
        let d1 = right_branch_slope(sigma, beta);
        let d2 = -(sb / 4.0) * d1;
        Ok(4.0 * d2 + sb * d1)
    }
}

/// (B₀, B₁) = (2 lip / sup, 3 sup / tanh 1).
pub fn initial_modulus_constants(u0_sup: f64, u0_lip: f64) -> Result<(f64, f64)> {
    if !(u0_sup > 0.0) {
        return Err(Error::DegenerateData(format!("initial sup norm must be positive, got {u0_sup}")));
    }
    if !(u0_lip >= 0.0) {
        return domain(format!("initial Lipschitz constant must be non-negative, got {u0_lip}"));
    }
    Ok((2.0 * u0_lip / u0_sup, 3.0 * u0_sup / 1f64.tanh()))
}

/// Ω₀(ξ) = B₁ tanh(B₀ ξ).
pub fn initial_modulus(u0_sup: f64, u0_lip: f64, xi: f64) -> Result<f64> {
    let (b0, b1) = initial_modulus_constants(u0_sup, u0_lip)?;
    Ok(b1 * (b0 * xi).tanh())
}

/// φ(ξ) = ∫₀^ξ η^{β−1} ω'(η) dη.
pub fn phi_forcing(xi: f64, beta: f64, omega: &Modulus) -> Result<f64> {
    check_unit(beta, "beta")?;
    omega.validate()?;
    if xi < 0.0 {
        return domain(format!("phi needs xi >= 0, got {xi}"));
    }
    Ok(phi_increments(&[0.0, xi], beta, omega)[1])
}

/// φ at every (sorted, non-negative) node, accumulated cell by cell.
pub fn phi_forcing_on_nodes(nodes: &[f64], beta: f64, omega: &Modulus) -> Result<Vec<f64>> {
    check_unit(beta, "beta")?;
    omega.validate()?;
    if nodes.iter().any(|&x| x < 0.0) || nodes.windows(2).any(|w| w[1] < w[0]) {
        return domain("phi nodes must be sorted and non-negative");
    }
    let mut pts = vec![0.0];
    pts.extend_from_slice(nodes);
    let cum = phi_increments(&pts, beta, omega);
    Ok(cum[1..].to_vec())
}

fn phi_increments(pts: &[f64], beta: f64, omega: &Modulus) -> Vec<f64> {
    let kinks = omega.breakpoints();
    let weight = |eta: f64| eta.powf(beta - 1.0) * omega.deriv(eta);
    let mut out = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let mut cuts = vec![a];
            cuts.extend(kinks.iter().cloned().filter(|&k| k > a && k < b));
            cuts.push(b);
            for seg in cuts.windows(2) {
                let end = if seg[0] == 0.0 { SingularEnd::Left } else { SingularEnd::None };
                acc += graded(seg[0], seg[1], end, weight);
            }
        }
        out.push(acc);
    }
    out
}

/// χ(ξ) = min(ξ^α, 1).
pub fn chi_forcing(xi: f64, alpha: f64) -> Result<f64> {
    check_unit(alpha, "alpha")?;
    if xi < 0.0 {
        return domain(format!("chi needs xi >= 0, got {xi}"));
    }
    Ok(xi.powf(alpha).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_at_reference_point() {
        let p = KernelParams::new(1.0).unwrap();
        assert_relative_eq!(heat_kernel(1.0 / (16.0 * PI), 0.0, p).unwrap(), 1.0, epsilon = 1e-14);
        assert!(heat_kernel(0.0, 1.0, p).is_err());
        assert!(KernelParams::new(0.0).is_err());
    }

    #[test]
    fn kernel_mass_is_one() {
        let p = KernelParams::new(0.7).unwrap();
        let m = 2.0 * to_infinity(0.0, |y| heat_kernel(0.3, y, p).unwrap());
        assert_relative_eq!(m, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn moments_match_gamma_function() {
        // ∫|σ|^r e^{-σ²} = Γ((r+1)/2)
        for r in [0.25, 0.5, 1.0, 2.0, -0.5] {
            let expect = 4f64.powf(r) * libm::tgamma(0.5 * (r + 1.0)) / PI.sqrt();
            assert_relative_eq!(moment_constant(r).unwrap(), expect, max_relative = 1e-11);
        }
        let p = KernelParams::new(1.0).unwrap();
        assert_relative_eq!(heat_kernel_moment(2.0, 1.0, p).unwrap(), 8.0, max_relative = 1e-11);
        assert_relative_eq!(heat_kernel_moment(1.0, 1.0, p).unwrap(), 4.0 / PI.sqrt(), max_relative = 1e-11);
        assert_eq!(heat_kernel_moment(0.0, 3.0, p).unwrap(), 1.0);
        assert!(heat_kernel_moment(-1.0, 1.0, p).is_err());
    }

    #[test]
    fn bump_polynomial_expands_correctly() {
        let w = 0.7;
        let c = bump_polynomial(w);
        for z in [-0.3, 0.1, 0.9, 1.5] {
            let direct = (1.0 - (z - w) * (z - w)).powi(3);
            let series: f64 = c.iter().enumerate().map(|(k, ck)| ck * z.powi(k as i32)).sum();
            assert_relative_eq!(direct, series, epsilon = 1e-13);
        }
    }

    #[test]
    fn mollified_branches_agree_at_switch() {
        let d = Drift::new(DriftSpec::h_eps(0.5, 0.01)).unwrap();
        let below = d.mollified_near_origin(0.02, false);
        let above = d.mollified(0.02 + 1e-15, false);
        assert_relative_eq!(below, above, max_relative = 1e-12);
        let below = d.mollified_near_origin(0.02, true);
        let above = d.mollified(0.02 + 1e-15, true);
        assert_relative_eq!(below, above, max_relative = 1e-12);
    }

    #[test]
    fn mollified_derivative_integrates_to_value() {
        let d = Drift::new(DriftSpec::h_eps(0.5, 0.01)).unwrap();
        for xi in [0.005, 0.03, 1.0, 150.0] {
            let (int, _) = adaptive(0.0, xi, 1e-13, |x| d.deriv(x).unwrap());
            assert_relative_eq!(int, d.value(xi), max_relative = 1e-9);
        }
    }

    #[test]
    fn bar_family_closed_forms() {
        let d = Drift::new(DriftSpec::h_bar(0.5, 0.04)).unwrap();
        assert_eq!(d.value(0.0), 0.0);
        assert_relative_eq!(d.deriv(0.0).unwrap(), 0.5 * 0.04f64.powf(-0.25), epsilon = 1e-14);
        // β = 1/2: H(y) = √y − ln(1 + √y)
        let y: f64 = 9.0;
        let h = 0.04f64.powf(0.25) * (y.sqrt() - (1.0 + y.sqrt()).ln());
        assert_relative_eq!(d.value(y * 0.2), h, max_relative = 1e-12);
    }

    #[test]
    fn exact_family_derivative_is_singular_at_origin() {
        let d = Drift::new(DriftSpec::h0(0.5)).unwrap();
        assert!(matches!(d.deriv(0.0), Err(Error::Singularity(_))));
        assert_relative_eq!(d.value(-4.0), -2.0);
    }

    #[test]
    fn spec_validation() {
        assert!(DriftSpec::h_eps(0.5, 0.02).validate().is_err());
        assert!(DriftSpec::h0(1.0).validate().is_err());
        assert!(DriftSpec::h_bar(0.5, 1.0).validate().is_ok());
    }

    #[test]
    fn table_tracks_direct_evaluation() {
        let d = Drift::new(DriftSpec::h_eps(0.5, 0.01)).unwrap();
        let t = DriftTable::new(d, 50.0, 20_000);
        for xi in [-3.0, -0.011, -0.001, 0.0, 0.004, 0.5, 7.0, 60.0] {
            let (h, dh) = t.eval(xi);
            assert_relative_eq!(h, d.value(xi), epsilon = 1e-7, max_relative = 1e-6);
            assert_relative_eq!(dh, d.deriv(xi).unwrap(), epsilon = 1e-6, max_relative = 1e-4);
        }
    }

    #[test]
    fn explicit_modulus_examples() {
        let delta = 0.125;
        assert_eq!(explicit_modulus(0.0, delta, 0.5).unwrap(), 0.0);
        assert_relative_eq!(explicit_modulus(delta, delta, 0.5).unwrap(), delta - delta.powf(1.5));
        for s in [delta / 2.0, delta, 2.0 * delta, 1.0, 10.0] {
            assert!(condition_residual(s, delta, 0.5).unwrap() <= 0.0);
        }
        assert!(explicit_modulus(0.1, 0.3, 0.5).is_err());
    }

    #[test]
    fn residual_matches_symbolic_derivatives() {
        // independent finite-difference check of the right branch
        let (delta, beta) = (0.125, 0.5);
        let s = 1.3;
        let h = 1e-3;
        let f = |x: f64| explicit_modulus(x, delta, beta).unwrap();
        let d1 = (f(s + h) - f(s - h)) / (2.0 * h);
        let d2 = (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
        let fd = 4.0 * d2 + s.powf(beta) * d1;
        assert!(fd.abs() < 1e-5, "{fd}");
        // left branch: ω'' = −(3/4)σ^{−1/2}
        let s: f64 = 0.05;
        let expect = -3.0 / s.sqrt() + s.sqrt() * (1.0 - 1.5 * s.sqrt());
        assert_relative_eq!(condition_residual(s, delta, beta).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn initial_modulus_examples() {
        let (b0, b1) = initial_modulus_constants(1.0, 2.0).unwrap();
        assert_eq!(b0, 4.0);
        assert_relative_eq!(b1, 3.0 / 1f64.tanh());
        assert_eq!(initial_modulus(1.0, 2.0, 0.0).unwrap(), 0.0);
        let m = Modulus::tanh_initial(1.0, 2.0).unwrap();
        assert_relative_eq!(m.deriv(0.0) * 1.0 / 2.0, 6.0 / 1f64.tanh(), max_relative = 1e-14);
        assert!(matches!(initial_modulus(0.0, 1.0, 1.0), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn phi_examples() {
        let lin = Modulus::Power { coef: 1.0, exponent: 1.0 };
        assert_eq!(phi_forcing(0.0, 0.5, &lin).unwrap(), 0.0);
        assert_relative_eq!(phi_forcing(2.0, 0.3, &lin).unwrap(), 2f64.powf(0.3) / 0.3, max_relative = 1e-12);
        let delta = 0.125;
        let heur = Modulus::ExplicitHeur1 { delta, beta: 0.5 };
        let expect = 2.0 * delta.sqrt() - 1.5 * delta;
        assert_relative_eq!(phi_forcing(delta, 0.5, &heur).unwrap(), expect, max_relative = 1e-12);
        let on_nodes = phi_forcing_on_nodes(&[0.01, delta, 1.0], 0.5, &heur).unwrap();
        assert_relative_eq!(on_nodes[1], expect, max_relative = 1e-12);
        assert!(on_nodes[2] > on_nodes[1]);
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_forcing(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(chi_forcing(0.0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(chi_forcing(0.25, 0.5).unwrap(), 0.5);
        assert!(chi_forcing(0.5, 1.0).is_err());
    }

    #[test]
    fn modulus_values_start_at_zero() {
        let all = [
            Modulus::ExplicitHeur1 { delta: 0.1, beta: 0.5 },
            Modulus::TanhInitial { b0: 2.0, b1: 1.0 },
            Modulus::ChiForcing { alpha: 0.4 },
            Modulus::Power { coef: 2.0, exponent: 0.75 },
            Modulus::Rational { beta: 0.5 },
            Modulus::Tabulated { xs: vec![0.0, 1.0, 2.0], values: vec![0.0, 1.0, 1.5] },
        ];
        for m in all {
            m.validate().unwrap();
            assert_eq!(m.value(0.0), 0.0);
            let mut prev = 0.0;
            for k in 1..200 {
                let v = m.value(k as f64 * 0.05);
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
    }
}
