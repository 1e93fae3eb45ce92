//! Closed-form a-priori bounds evaluated from sampled coefficient series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{gl20, graded, SingularEnd};
use crate::series::CoefficientSeries;
use crate::special_functions::Modulus;

pub use crate::series::Interpolation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub nu: f64,
    pub beta: f64,
    pub mu1: f64,
    /// Exponent ε ∈ (0, 1] of the Navier-Stokes bound.
    pub exponent_eps: f64,
    #[serde(default = "default_cd")]
    pub c_d: f64,
}

fn default_cd() -> f64 {
    1.0
}

impl Default for BoundParams {
    fn default() -> Self {
        Self { nu: 1.0, beta: 0.5, mu1: 1.0, exponent_eps: 1.0, c_d: 1.0 }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return domain(format!("viscosity must be positive, got {}", self.nu));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return domain(format!("beta must lie in (0,1), got {}", self.beta));
        }
        if !(self.mu1 >= 0.0) {
            return domain(format!("mu1 must be non-negative, got {}", self.mu1));
        }
        if !(self.exponent_eps > 0.0 && self.exponent_eps <= 1.0) {
            return domain(format!("exponent eps must lie in (0,1], got {}", self.exponent_eps));
        }
        if !(self.c_d >= 1.0) {
            return domain(format!("c_d must be at least 1, got {}", self.c_d));
        }
        Ok(())
    }

    /// c_d / (β(1−β)ε).
    pub fn mu_navier_stokes(&self) -> f64 {
        self.c_d / (self.beta * (1.0 - self.beta) * self.exponent_eps)
    }
}

/// Γ(s,t) = ∫_s^t g.
pub fn gamma(g: &CoefficientSeries, s: f64, t: f64) -> Result<f64> {
    g.integral(s, t)
}

fn weights(g: &CoefficientSeries, s: f64, t: f64, beta: f64) -> Result<(f64, f64, f64)> {
    let gam = g.integral(s, t)?;
    let j1 = g.singular_weight_integral(s, t, 0.5 * (beta - 1.0))?;
    let j2 = g.singular_weight_integral(s, t, 0.5 * (beta - 2.0))?;
    Ok((gam, j1, j2))
}

/// G(s,t) = 1 + 8μ₁ν^{(β−2)/2} e^{2μ₁Γ} [ν^{1/2} ∫(t−r)^{(β−1)/2} g + μ₁Γ ∫(t−r)^{(β−2)/2} g].
pub fn g_bound(g: &CoefficientSeries, s: f64, t: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    if p.mu1 == 0.0 || g.is_identically_zero() {
        g.integral(s, t)?;
        return Ok(1.0);
    }
    let (gam, j1, j2) = weights(g, s, t, p.beta)?;
    let pre = 8.0 * p.mu1 * p.nu.powf(0.5 * (p.beta - 2.0)) * (2.0 * p.mu1 * gam).exp();
    Ok(1.0 + pre * (p.nu.sqrt() * j1 + p.mu1 * gam * j2))
}

/// G(t) of the Navier-Stokes bound, with μ = c_d/(β(1−β)ε) in place of μ₁.
pub fn g_navier_stokes(g: &CoefficientSeries, t: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let s = g.start();
    if g.is_identically_zero() {
        g.integral(s, t)?;
        return Ok(1.0);
    }
    let mu = p.mu_navier_stokes();
    let (gam, j1, j2) = weights(g, s, t, p.beta)?;
    let inner = p.nu.powf(0.5 * (p.beta - 1.0)) * j1 + p.nu.powf(0.5 * (p.beta - 2.0)) * mu * gam * j2;
    Ok(1.0 + mu * (mu * gam).exp() * inner)
}

/// Dimensionless variant of G without exponential growth in Γ.
pub fn g_tilde(g: &CoefficientSeries, t: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let s0 = g.start();
    g.integral(s0, t)?;
    if g.is_identically_zero() {
        return Ok(1.0);
    }
    let b = p.beta;
    let eb = p.exponent_eps * b;
    let outer = 2.0 * p.c_d * (1.0 - b).powf(b - 1.0) / eb;
    let inner_c = p.c_d * p.nu.powf(0.5 * (b - 2.0)) / (eb * (1.0 - b));
    let kappa = 0.5 * (b - 2.0);
    let mut err = None;
    let mut integrand = |s: f64| {
        if s >= t {
            return 0.0;
        }
        let k = match g.singular_weight_integral(s, t, kappa) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let base = (t - s).powf(-0.5) / p.nu.sqrt() + inner_c * k;
        g.value(s) * base.powf(1.0 - b)
    };
    let knots = g.knots_in(s0, t);
    let mut acc = 0.0;
    let last = knots.len() - 2;
    for (k, w) in knots.windows(2).enumerate() {
        let end = if k == last { SingularEnd::Right } else { SingularEnd::None };
        acc += graded(w[0], w[1], end, &mut integrand);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok((1.0 + outer * acc).powf(1.0 / (1.0 - b)))
}

/// (3‖u₀‖∞ + ∫₀ᵗ f) G(t)^ε.
pub fn nse_apriori_sup(
    u0_sup: f64,
    f: &CoefficientSeries,
    g: &CoefficientSeries,
    t: f64,
    p: &BoundParams,
) -> Result<f64> {
    if !(u0_sup >= 0.0) {
        return domain(format!("initial sup norm must be non-negative, got {u0_sup}"));
    }
    let forcing = f.integral(f.start(), t)?;
    Ok((3.0 * u0_sup + forcing) * g_navier_stokes(g, t, p)?.powf(p.exponent_eps))
}

/// ∫₀ᵀ (nse_apriori_sup with ε = 1/q)^q dt.
pub fn nse_apriori_lq(
    q: f64,
    u0_sup: f64,
    f: &CoefficientSeries,
    g: &CoefficientSeries,
    horizon: f64,
    p: &BoundParams,
) -> Result<f64> {
    if !(q >= 1.0) {
        return domain(format!("q must be at least 1, got {q}"));
    }
    let pq = BoundParams { exponent_eps: 1.0 / q, ..*p };
    let t0 = g.start().max(f.start());
    g.integral(t0, horizon)?;
    f.integral(t0, horizon)?;
    let mut err = None;
    let mut knots = g.knots_in(t0, horizon);
    knots.extend(f.knots_in(t0, horizon));
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut acc = 0.0;
    for (k, w) in knots.windows(2).enumerate() {
        let end = if k == 0 { SingularEnd::Left } else { SingularEnd::None };
        acc += graded(w[0], w[1], end, |t| match nse_apriori_sup(u0_sup, f, g, t, &pq) {
            Ok(v) => v.powf(q),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

fn check_tail(m: &Modulus) -> Result<()> {
    if m.is_zero() {
        return Ok(());
    }
    if m.growth_exponent() >= 1.0 {
        return Err(Error::NonConvergence(format!(
            "tail integral of omega/eta^2 diverges for growth exponent {}",
            m.growth_exponent()
        )));
    }
    Ok(())
}

/// ∫_ξ^∞ ω(η)/η² dη = ξ^{-1} ∫₀¹ ω(ξ/u) du.
fn tail_integral(m: &Modulus, xi: f64) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    let mut cuts = vec![0.0];
    let mut inner: Vec<f64> = m.breakpoints().into_iter().filter(|&b| b > xi).map(|b| xi / b).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.extend(inner);
    cuts.push(1.0);
    let mut acc = 0.0;
    for (k, w) in cuts.windows(2).enumerate() {
        let end = if k == 0 { SingularEnd::Left } else { SingularEnd::None };
        acc += graded(w[0], w[1], end, |u| if u <= 0.0 { 0.0 } else { m.value(xi / u) });
    }
    acc / xi
}

/// Modulus of the pressure gradient built from the velocity and drift moduli.
pub fn pressure_modulus(omega_u: &Modulus, omega_b: &Modulus, xi: f64, c_d: f64) -> Result<f64> {
    omega_u.validate()?;
    omega_b.validate()?;
    if !(xi > 0.0) {
        return domain(format!("pressure modulus needs xi > 0, got {xi}"));
    }
    check_tail(omega_u)?;
    check_tail(omega_b)?;
    if omega_u.is_zero() || omega_b.is_zero() {
        // head term vanishes; tails may not
        let t1 = omega_b.value(xi) * tail_integral(omega_u, xi);
        let t2 = omega_u.value(xi) * tail_integral(omega_b, xi);
        return Ok(c_d * (t1 + t2));
    }
    if omega_u.origin_exponent() + omega_b.origin_exponent() <= 1.0 {
        return Err(Error::NonConvergence("product of moduli is not o(eta) at the origin".into()));
    }
    let mut cuts = vec![0.0];
    let mut kinks: Vec<f64> = omega_u
        .breakpoints()
        .into_iter()
        .chain(omega_b.breakpoints())
        .filter(|&b| b > 0.0 && b < xi)
        .collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();
    cuts.extend(kinks);
    cuts.push(xi);
    let mut head = 0.0;
    for (k, w) in cuts.windows(2).enumerate() {
        let end = if k == 0 { SingularEnd::Left } else { SingularEnd::None };
        head += graded(w[0], w[1], end, |e| {
            if e <= 0.0 {
                0.0
            } else {
                omega_u.value(e) * omega_b.value(e) / (e * e)
            }
        });
    }
    let t1 = omega_b.value(xi) * tail_integral(omega_u, xi);
    let t2 = omega_u.value(xi) * tail_integral(omega_b, xi);
    Ok(c_d * (head + t1 + t2))
}

/// c_d ‖∇u‖∞ ‖u‖∞.
pub fn pressure_sup(grad_u_sup: f64, u_sup: f64, c_d: f64) -> f64 {
    c_d * grad_u_sup * u_sup
}

/// Evaluable form of the singular Gronwall bound.
#[derive(Debug, Clone)]
pub struct GronwallBound {
    pub alpha: f64,
    pub q: f64,
    pub horizon: f64,
    /// Hölder constant of the kernel, (∫₀ᵀ s^{−αp} ds)^{1/p}.
    pub kernel_constant: f64,
    /// C = max(2K, (2K)^q / q).
    pub constant: f64,
    /// ‖g‖_q^q over [0, T].
    pub g_norm_q: f64,
    h: CoefficientSeries,
    g: CoefficientSeries,
}

impl GronwallBound {
    /// h(t) + C e^{C‖g‖_q^q} (∫₀ᵗ h^q g^q)^{1/q}.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let t0 = self.h.start();
        if t < t0 || t > self.horizon + 1e-12 {
            return domain(format!("time {t} outside [{t0}, {}]", self.horizon));
        }
        let mut knots = self.h.knots_in(t0, t);
        knots.extend(self.g.knots_in(t0, t));
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let q = self.q;
        let rule = gl20();
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += rule.integrate(w[0], w[1], |s| (self.h.value(s) * self.g.value(s)).powf(q));
        }
        Ok(self.h.value(t) + self.constant * (self.constant * self.g_norm_q).exp() * acc.powf(1.0 / q))
    }
}

pub fn singular_gronwall(
    h: &CoefficientSeries,
    g: &CoefficientSeries,
    q: f64,
    alpha: f64,
    horizon: f64,
) -> Result<GronwallBound> {
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0,1), got {alpha}"));
    }
    if !(q * (1.0 - alpha) > 1.0) {
        return Err(Error::InadmissibleExponent(format!(
            "need q(1-alpha) > 1, got q = {q}, alpha = {alpha}"
        )));
    }
    let t0 = h.start();
    h.integral(t0, horizon)?;
    g.integral(t0, horizon)?;
    let p = q / (q - 1.0);
    let len = horizon - t0;
    let k = (len.powf(1.0 - alpha * p) / (1.0 - alpha * p)).powf(1.0 / p);
    let constant = (2.0 * k).max((2.0 * k).powf(q) / q);
    let g_norm_q = g.power_integral(t0, horizon, q)?;
    Ok(GronwallBound {
        alpha,
        q,
        horizon,
        kernel_constant: k,
        constant,
        g_norm_q,
        h: h.clone(),
        g: g.clone(),
    })
}

/// ξ^{1/q} ‖·‖_p with 1/p + 1/q = 1.
pub fn holder_from_lp(lp_norm: f64, p: f64, xi: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("conjugate exponent undefined for p = {p}")));
    }
    if xi < 0.0 {
        return domain(format!("increment must be non-negative, got {xi}"));
    }
    let q = p / (p - 1.0);
    Ok(xi.powf(1.0 / q) * lp_norm)
}

/// ν^{-1/2}(t−s)^{-1/2} + μ₁ν^{(β−2)/2} ∫_s^t (t−r)^{(β−2)/2} g.
pub fn sup_operator_bound(g: &CoefficientSeries, s: f64, t: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    if !(t > s) {
        return domain(format!("need s < t, got s = {s}, t = {t}"));
    }
    let j2 = g.singular_weight_integral(s, t, 0.5 * (p.beta - 2.0))?;
    Ok((t - s).powf(-0.5) / p.nu.sqrt() + p.mu1 * p.nu.powf(0.5 * (p.beta - 2.0)) * j2)
}

/// [1 + 2μ₁(1−β)^β ∫_s^t g(r) z(r)^{1−β} dr]^{1/(1−β)} where z(r) = sup_σ Z(t,0;r,σ)
/// is sampled at increasing times `r` < t. The integrand is treated as
/// w(r)(t−r)^{−(1−β)/2} with w piecewise linear, integrated exactly.
pub fn scaled_operator_bound(
    g: &CoefficientSeries,
    s: f64,
    t: f64,
    r: &[f64],
    zsup: &[f64],
    p: &BoundParams,
) -> Result<f64> {
    p.validate()?;
    if r.len() != zsup.len() || r.len() < 2 {
        return domain("need at least two matching samples of the kernel sup");
    }
    if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] > s + 1e-12 || *r.last().unwrap() >= t {
        return domain("kernel samples must increase strictly, start at s and stay below t");
    }
    let b = p.beta;
    let kappa = -0.5 * (1.0 - b);
    let w: Vec<f64> = r
        .iter()
        .zip(zsup)
        .map(|(&ri, &zi)| g.value(ri) * zi.max(0.0).powf(1.0 - b) * (t - ri).powf(-kappa))
        .collect();
    let n = r.len();
    let mut nodes = r.to_vec();
    let mut vals = w;
    nodes.push(t);
    vals.push(vals[n - 1]);
    let p1 = kappa + 1.0;
    let p2 = kappa + 2.0;
    let mut acc = 0.0;
    for k in 0..nodes.len() - 1 {
        let (a, c) = (nodes[k], nodes[k + 1]);
        let slope = (vals[k + 1] - vals[k]) / (c - a);
        let ua = t - a;
        let uc = t - c;
        let i1 = (ua.powf(p1) - uc.max(0.0).powf(p1)) / p1;
        let i2 = (ua.powf(p2) - uc.max(0.0).powf(p2)) / p2;
        acc += (vals[k] + slope * ua) * i1 - slope * i2;
    }
    Ok((1.0 + 2.0 * p.mu1 * (1.0 - b).powf(b) * acc).powf(1.0 / (1.0 - b)))
}

/// ∫₀ᵗ c_ν [(t−s)^{-1/2} + μ₁ν^{(β−2)/2} ∫_s^t (t−r)^{(β−2)/2} g dr] f(s) ds,
/// with c_ν = ν^{-1/2} on both terms when `outer_nu` is set and the operator
/// sup-bound weights otherwise.
pub fn forcing_kernel_integral(
    f: &CoefficientSeries,
    g: &CoefficientSeries,
    t: f64,
    p: &BoundParams,
    outer_nu: bool,
) -> Result<f64> {
    p.validate()?;
    let s0 = f.start().max(g.start());
    f.integral(s0, t)?;
    g.integral(s0, t)?;
    let sing = f.singular_weight_integral(s0, t, -0.5)?;
    let kappa = 0.5 * (p.beta - 2.0);
    let mut knots = f.knots_in(s0, t);
    knots.extend(g.knots_in(s0, t));
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut nonlocal = 0.0;
    let last = knots.len() - 2;
    for (k, w) in knots.windows(2).enumerate() {
        let end = if k == last { SingularEnd::Right } else { SingularEnd::None };
        nonlocal += graded(w[0], w[1], end, |s| {
            f.value(s) * g.singular_weight_integral(s, t, kappa).unwrap_or(0.0)
        });
    }
    let nb = p.nu.powf(0.5 * (p.beta - 2.0));
    if outer_nu {
        Ok((sing + p.mu1 * nb * nonlocal) / p.nu.sqrt())
    } else {
        Ok(sing / p.nu.sqrt() + p.mu1 * nb * nonlocal)
    }
}

/// Measured quantity against its theoretical bound at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub point: BTreeMap<String, f64>,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl BoundReport {
    pub fn new(bound_id: impl Into<String>, point: BTreeMap<String, f64>, measured: f64, bound: f64, tolerance: f64) -> Self {
        let ratio = if bound > 0.0 {
            measured / bound
        } else if measured <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let pass = ratio.is_finite() && ratio <= 1.0 + tolerance;
        Self {
            bound_id: bound_id.into(),
            point,
            measured,
            bound,
            ratio,
            tolerance,
            pass,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn ones(t1: f64) -> CoefficientSeries {
        CoefficientSeries::constant(1.0, 0.0, t1).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&ones(2.0), 0.0, 2.0).unwrap(), 2.0);
        assert_eq!(gamma(&CoefficientSeries::zero(0.0, 1.0), 0.0, 1.0).unwrap(), 0.0);
        let lin = CoefficientSeries::from_fn(0.0, 1.0, 100, Interpolation::Linear, |t| t).unwrap();
        assert_relative_eq!(gamma(&lin, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        assert!(gamma(&lin, 0.7, 0.2).is_err());
    }

    #[test]
    fn g_bound_desk_value() {
        let p = BoundParams::default();
        let v = g_bound(&ones(1.0), 0.0, 1.0, &p).unwrap();
        assert_relative_eq!(v, 1.0 + 128.0 / 3.0 * E * E, max_relative = 1e-13);
        let p0 = BoundParams { mu1: 0.0, ..p };
        assert_eq!(g_bound(&ones(1.0), 0.0, 1.0, &p0).unwrap(), 1.0);
        assert_eq!(g_bound(&CoefficientSeries::zero(0.0, 1.0), 0.0, 1.0, &p).unwrap(), 1.0);
    }

    #[test]
    fn g_navier_stokes_desk_value() {
        let p = BoundParams::default();
        assert_relative_eq!(p.mu_navier_stokes(), 4.0);
        let v = g_navier_stokes(&ones(1.0), 1.0, &p).unwrap();
        assert_relative_eq!(v, 1.0 + 4.0 * E.powi(4) * (4.0 / 3.0 + 16.0), max_relative = 1e-13);
        let half = BoundParams { exponent_eps: 0.5, ..p };
        assert!(g_navier_stokes(&ones(1.0), 1.0, &half).unwrap() >= v);
    }

    #[test]
    fn g_tilde_matches_independent_quadrature() {
        let p = BoundParams::default();
        let v = g_tilde(&ones(1.0), 1.0, &p).unwrap();
        // g ≡ 1, β = 1/2: inner integral = 4(1−s)^{1/4}; substitute 1 − s = u⁴.
        let b = 0.5f64;
        let outer = 2.0 * (1.0 - b).powf(b - 1.0) / b;
        let ci = 1.0 / (b * (1.0 - b));
        let n = 200_000;
        let mut acc = 0.0;
        for k in 0..n {
            let u = (k as f64 + 0.5) / n as f64;
            let base = u.powi(-2) + ci * 4.0 * u;
            acc += base.powf(1.0 - b) * 4.0 * u.powi(3) / n as f64;
        }
        let expect = (1.0 + outer * acc).powf(1.0 / (1.0 - b));
        assert_relative_eq!(v, expect, max_relative = 1e-6);
        assert_eq!(g_tilde(&CoefficientSeries::zero(0.0, 1.0), 1.0, &p).unwrap(), 1.0);
    }

    #[test]
    fn g_tilde_scaling() {
        let p = BoundParams::default();
        let lam: f64 = 2.0;
        let base = g_tilde(&ones(4.0), 4.0, &p).unwrap();
        let scaled = CoefficientSeries::constant(lam.powf(1.0 + p.beta), 0.0, 1.0).unwrap();
        let v = g_tilde(&scaled, 1.0, &p).unwrap();
        assert_relative_eq!(base, v, max_relative = 1e-6);
    }

    #[test]
    fn nse_examples() {
        let p = BoundParams::default();
        let z = CoefficientSeries::zero(0.0, 1.0);
        assert_relative_eq!(nse_apriori_sup(1.0, &z, &z, 1.0, &p).unwrap(), 3.0);
        assert_relative_eq!(nse_apriori_sup(0.0, &ones(1.0), &z, 1.0, &p).unwrap(), 1.0);
        let g1 = g_navier_stokes(&ones(1.0), 1.0, &p).unwrap();
        assert_relative_eq!(nse_apriori_sup(1.0, &z, &ones(1.0), 1.0, &p).unwrap(), 3.0 * g1);
        assert_relative_eq!(nse_apriori_lq(2.0, 1.0, &z, &z, 1.0, &p).unwrap(), 9.0, max_relative = 1e-12);
        // f ≡ 1, g ≡ 0, q = 2: ∫₀¹ (3 + t)² dt = 37/3
        assert_relative_eq!(nse_apriori_lq(2.0, 1.0, &ones(1.0), &z, 1.0, &p).unwrap(), 37.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn pressure_examples() {
        let zero = Modulus::Power { coef: 0.0, exponent: 0.75 };
        assert_eq!(pressure_modulus(&zero, &zero, 1.0, 1.0).unwrap(), 0.0);
        let w = Modulus::Power { coef: 1.0, exponent: 0.75 };
        assert_relative_eq!(pressure_modulus(&w, &w, 1.0, 2.0).unwrap(), 20.0, max_relative = 1e-10);
        let lin = Modulus::Power { coef: 1.0, exponent: 1.0 };
        assert!(matches!(pressure_modulus(&lin, &w, 1.0, 1.0), Err(Error::NonConvergence(_))));
        assert_eq!(pressure_sup(2.0, 3.0, 5.0), 30.0);
    }

    #[test]
    fn holder_examples() {
        assert_relative_eq!(holder_from_lp(1.0, 2.0, 4.0).unwrap(), 2.0);
        assert_eq!(holder_from_lp(0.0, 2.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(holder_from_lp(3.0, 4.0 / 3.0, 8.0).unwrap(), 8f64.powf(0.25) * 3.0, max_relative = 1e-14);
        assert!(matches!(holder_from_lp(1.0, 1.0, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn gronwall_zero_g_returns_h() {
        let h = CoefficientSeries::from_fn(0.0, 1.0, 10, Interpolation::Linear, |t| 1.0 + t).unwrap();
        let b = singular_gronwall(&h, &CoefficientSeries::zero(0.0, 1.0), 3.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(b.eval(0.5).unwrap(), 1.5, epsilon = 1e-14);
        assert!(matches!(
            singular_gronwall(&h, &h, 2.0, 0.5, 1.0),
            Err(Error::InadmissibleExponent(_))
        ));
    }

    #[test]
    fn gronwall_dominates_classical_solution() {
        // α = 0, h = g = 1: f = e^t solves the equality case
        let b = singular_gronwall(&ones(1.0), &ones(1.0), 2.0, 0.0, 1.0).unwrap();
        for k in 1..=10 {
            let t = k as f64 / 10.0;
            assert!(b.eval(t).unwrap() >= t.exp());
        }
    }

    #[test]
    fn sup_operator_bound_closed_form() {
        let p = BoundParams::default();
        // 1 + ∫₀¹(1−r)^{−3/4} = 5
        assert_relative_eq!(sup_operator_bound(&ones(1.0), 0.0, 1.0, &p).unwrap(), 5.0, max_relative = 1e-14);
    }

    #[test]
    fn scaled_bound_exact_for_power_law_kernel() {
        let p = BoundParams::default();
        // z(r) = (1−r)^{−1/2}: ∫₀¹ (1−r)^{−1/4} dr = 4/3
        let r: Vec<f64> = (0..100).map(|k| k as f64 / 100.0).collect();
        let z: Vec<f64> = r.iter().map(|x| (1.0 - x).powf(-0.5)).collect();
        let v = scaled_operator_bound(&ones(1.0), 0.0, 1.0, &r, &z, &p).unwrap();
        let expect = (1.0 + 2.0 * 0.5f64.sqrt() * 4.0 / 3.0).powi(2);
        assert_relative_eq!(v, expect, max_relative = 1e-12);
    }

    #[test]
    fn forcing_integral_weights() {
        let p = BoundParams { nu: 4.0, ..BoundParams::default() };
        let z = CoefficientSeries::zero(0.0, 1.0);
        // g ≡ 0: only the local part, ν^{-1/2} ∫₀¹(1−s)^{−1/2} = 1
        assert_relative_eq!(forcing_kernel_integral(&ones(1.0), &z, 1.0, &p, true).unwrap(), 1.0, max_relative = 1e-13);
        // g ≡ 1, f ≡ 1, ν = 1: ∫₀¹ 4(1−s)^{1/4} ds = 16/5, plus 2
        let p1 = BoundParams::default();
        let v = forcing_kernel_integral(&ones(1.0), &ones(1.0), 1.0, &p1, false).unwrap();
        assert_relative_eq!(v, 2.0 + 16.0 / 5.0, max_relative = 1e-10);
    }

    #[test]
    fn report_ratio_and_pass() {
        let r = BoundReport::new("x", BTreeMap::new(), 1.01, 1.0, 0.02);
        assert!(r.pass);
        let r = BoundReport::new("x", BTreeMap::new(), 1.03, 1.0, 0.02);
        assert!(!r.pass);
        let r = BoundReport::new("x", BTreeMap::new(), 0.0, 0.0, 0.0);
        assert!(r.pass);
    }
}
