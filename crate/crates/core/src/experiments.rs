//! Counter-example runs, the lower-bound series, the minimum-principle
//! experiment, sweep orchestration and series ingestion.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound_calculus::{g_bound, BoundParams};
use crate::error::{Error, Result};
use crate::io::{read_config, write_json, write_with, RunManifest};
use crate::pde::norms::fmt;
use crate::pde::{solve_linear, solve_linear_between, GridPreset, LinearProblem, SolverConfig};
use crate::quadrature::gl10;
use crate::series::{CoefficientSeries, Interpolation};
use crate::special_functions::{DriftSign, DriftSpec};
use crate::verifier::{
    random_gronwall_cases, verify_all, verify_fs_bounds, verify_gronwall, verify_keyprop, verify_kernel_holder,
    verify_lp, verify_spcase, verify_thmbuildmod, KernelLattice, SweepSpec, VerifyOutput,
};

/// ε^{-1/p} e^{−t/ε} sampled finely enough to resolve the decay.
pub fn pulse_series(eps: f64, p: f64, horizon: f64) -> Result<CoefficientSeries> {
    let n = ((horizon / eps) * 200.0).ceil().max(200.0) as usize;
    let amp = eps.powf(-1.0 / p);
    CoefficientSeries::from_fn(0.0, horizon, n, Interpolation::Linear, |t| amp * (-t / eps).exp())
}

/// Largest admissible integrability exponent, 2/(1+β).
pub fn critical_exponent(beta: f64) -> f64 {
    2.0 / (1.0 + beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub eps_list: Vec<f64>,
    pub beta: f64,
    pub p: f64,
    pub mu1: f64,
    pub grid: GridPreset,
    pub dt: f64,
    /// Acceptance threshold on the fitted log-log slope.
    pub slope_threshold: f64,
    pub tolerance: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.2, 0.1, 0.05],
            beta: 0.5,
            p: 1.0,
            mu1: 1.0,
            grid: GridPreset::default(),
            dt: 1e-4,
            slope_threshold: -0.8,
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub eps: f64,
    pub horizon: f64,
    /// ∫₀ᵀ ‖V_ε‖∞ dt with the flipped transport.
    pub sup_integral: f64,
    /// Same integral with the stabilizing transport.
    pub control_integral: f64,
    /// ‖v0‖∞ ∫₀ᵀ G(0,t) dt.
    pub control_bound: f64,
    pub control_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    /// Least-squares slope of log(sup_integral) against log(ε); NaN with fewer than two rows.
    pub slope: f64,
    pub slope_pass: bool,
    /// Integral non-increasing in ε.
    pub monotone: bool,
}

impl CounterexampleReport {
    pub fn all_pass(&self) -> bool {
        self.slope_pass && self.rows.iter().all(|r| r.control_pass)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps", "horizon", "sup_integral", "control_integral", "control_bound", "control_pass"])?;
        for r in &self.rows {
            w.write_record([
                fmt(r.eps),
                fmt(r.horizon),
                fmt(r.sup_integral),
                fmt(r.control_integral),
                fmt(r.control_bound),
                r.control_pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// ∫₀ᵀ G(0,t) dt by the trapezoid rule on a grid clustered at 0.
fn g_time_integral(g: &CoefficientSeries, horizon: f64, p: &BoundParams) -> Result<f64> {
    let n = 400;
    let mut prev = (0.0, 1.0);
    let mut acc = 0.0;
    for k in 1..=n {
        let t = horizon * (k as f64 / n as f64).powi(2);
        let v = g_bound(g, 0.0, t, p)?;
        acc += 0.5 * (t - prev.0) * (v + prev.1);
        prev = (t, v);
    }
    Ok(acc)
}

fn counterexample_row(cfg: &CounterexampleConfig, eps: f64, grid: &crate::pde::SpatialGrid) -> Result<CounterexampleRow> {
    let horizon = (5.0 * eps).max(1.0);
    let g = pulse_series(eps, cfg.p, horizon)?;
    let v0 = grid.sample(|x| (-x * x / eps).exp());
    let solver = SolverConfig { dt: cfg.dt, store_every: usize::MAX, ..Default::default() };
    let flipped = LinearProblem::new(DriftSpec::h_bar(cfg.beta, eps).with_sign(DriftSign::Flipped), cfg.mu1, 1.0, 1.0, g.clone());
    let sup_integral = solve_linear(&v0, &flipped, &solver, grid, horizon)?.sup_time_integral();
    let control = LinearProblem::new(DriftSpec::h_bar(cfg.beta, eps), cfg.mu1, 1.0, 1.0, g.clone());
    let control_integral = solve_linear(&v0, &control, &solver, grid, horizon)?.sup_time_integral();
    let bp = BoundParams { nu: 1.0, beta: cfg.beta, mu1: cfg.mu1, ..Default::default() };
    let control_bound = g_time_integral(&g, horizon, &bp)?;
    Ok(CounterexampleRow {
        eps,
        horizon,
        sup_integral,
        control_integral,
        control_bound,
        control_pass: control_integral <= control_bound * (1.0 + cfg.tolerance),
    })
}

/// Flipped-transport runs over the ε list with the stabilizing control beside each.
pub fn counterexample_run(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0,1), got {}", cfg.beta)));
    }
    let pc = critical_exponent(cfg.beta);
    if !(cfg.p > 0.0 && cfg.p < pc) {
        return Err(Error::InadmissibleExponent(format!(
            "p = {} must lie in (0, 2/(1+beta)) = (0, {pc})",
            cfg.p
        )));
    }
    if !(cfg.mu1 >= 1.0) {
        return Err(Error::Parameter(format!("mu1 must be at least 1, got {}", cfg.mu1)));
    }
    if let Some(e) = cfg.eps_list.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Parameter(format!("eps must lie in (0,1], got {e}")));
    }
    let grid = cfg.grid.build()?;
    let rows: Vec<Result<CounterexampleRow>> = cfg.eps_list.par_iter().map(|&e| counterexample_row(cfg, e, &grid)).collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.sup_integral.ln()).collect();
    let slope = least_squares_slope(&lx, &ly);
    let mut by_eps: Vec<&CounterexampleRow> = rows.iter().collect();
    by_eps.sort_by(|a, b| a.eps.partial_cmp(&b.eps).unwrap());
    let monotone = by_eps.windows(2).all(|w| w[0].sup_integral >= w[1].sup_integral);
    Ok(CounterexampleReport { slope_pass: slope <= cfg.slope_threshold, slope, monotone, rows })
}

/// Resolution of the nested quadrature for the G_j table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GjQuadrature {
    pub time_steps: usize,
    pub space_nodes: usize,
    /// Half width of the spatial table; 0 picks one from s and y.
    pub half_width: f64,
}

impl Default for GjQuadrature {
    fn default() -> Self {
        Self { time_steps: 64, space_nodes: 801, half_width: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GjSeries {
    pub beta: f64,
    pub p: f64,
    pub eps: f64,
    pub s: f64,
    pub y: f64,
    /// (β+1)/2 − 1/p.
    pub exponent: f64,
    /// G_j(s, y), j = 0..=N.
    pub terms: Vec<f64>,
    /// Σ_{i≤j} ε^{i·exponent} G_i(s, y).
    pub partial_sums: Vec<f64>,
}

impl GjSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "s", "y", "G_j", "partial_sum"])?;
        for (j, (g, ps)) in self.terms.iter().zip(&self.partial_sums).enumerate() {
            w.write_record([j.to_string(), fmt(self.s), fmt(self.y), fmt(*g), fmt(*ps)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// π^{-1/2} ∫ e^{−u²} f(y + 4√τ u) du, i.e. the heat semigroup of ∂ − 4∂² at time τ.
fn heat_smooth(tau: f64, y: f64, f: impl Fn(f64) -> f64) -> f64 {
    if tau <= 0.0 {
        return f(y);
    }
    let c = 4.0 * tau.sqrt();
    // panels no wider than the data scale seen through the kernel
    let per_unit = c.max(1.0).ceil() as usize;
    let width = 1.0 / per_unit as f64;
    let rule = gl10();
    let mut acc = 0.0;
    for k in 0..13 * per_unit {
        let a = -6.5 + k as f64 * width;
        acc += rule.integrate(a, a + width, |u| (-u * u).exp() * f(y + c * u));
    }
    acc / PI.sqrt()
}

/// H'(z) = β / (1 + |z|^{1−β}).
fn reaction_profile(beta: f64, z: f64) -> f64 {
    beta / (1.0 + z.abs().powf(1.0 - beta))
}

fn interp_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let u = (x - x0) / h;
    if u < 0.0 || u > (values.len() - 1) as f64 {
        return 0.0;
    }
    let k = (u.floor() as usize).min(values.len() - 2);
    let w = u - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Weights of the heat kernel at time τ against the hat functions of a uniform
/// grid with spacing h, indexed by node offset: [R(d+h) − 2R(d) + R(d−h)]/h with
/// R(x) = xΦ(x/σ) + σφ(x/σ), σ² = 8τ.
fn hat_weights(tau: f64, h: f64, len: usize) -> Vec<f64> {
    let mut w = vec![0.0; len];
    if tau <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    let sigma = (8.0 * tau).sqrt();
    let ramp = |x: f64| {
        let u = x / sigma;
        x * 0.5 * libm::erfc(-u / std::f64::consts::SQRT_2) + sigma * (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
    };
    for (k, wk) in w.iter_mut().enumerate() {
        let d = k as f64 * h;
        *wk = ((ramp(d + h) - 2.0 * ramp(d) + ramp(d - h)) / h).max(0.0);
    }
    w
}

/// Terms of the iterated Duhamel lower bound and their partial sums at (s, y).
pub fn gj_series(n: usize, beta: f64, p: f64, eps: f64, s: f64, y: f64, quad: &GjQuadrature) -> Result<GjSeries> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0,1), got {beta}")));
    }
    let exponent = 0.5 * (beta + 1.0) - 1.0 / p;
    if !(p > 0.0) || !(exponent < 0.0) {
        return Err(Error::InadmissibleExponent(format!(
            "need (beta+1)/2 - 1/p < 0, got {exponent} for p = {p}"
        )));
    }
    if !(s > 0.0) || !(eps > 0.0) {
        return Err(Error::Parameter(format!("need s > 0 and eps > 0, got s = {s}, eps = {eps}")));
    }
    if quad.time_steps == 0 || quad.space_nodes < 3 {
        return Err(Error::Parameter("quadrature needs time_steps >= 1 and space_nodes >= 3".into()));
    }
    let m = quad.time_steps;
    let dr = s / m as f64;
    let times: Vec<f64> = (0..=m).map(|k| k as f64 * dr).collect();
    let half = if quad.half_width > 0.0 { quad.half_width } else { y.abs() + 4.0 * (16.0 * s + 1.0).sqrt() + 4.0 };
    let nz = quad.space_nodes;
    let hz = 2.0 * half / (nz - 1) as f64;
    let z: Vec<f64> = (0..nz).map(|i| -half + i as f64 * hz).collect();
    let weight: Vec<f64> = z.iter().map(|&v| reaction_profile(beta, v)).collect();
    let kernels: Vec<Vec<f64>> = (0..=m).map(|k| hat_weights(k as f64 * dr, hz, nz)).collect();

    // G_0 by quadrature of the kernel against the Gaussian datum
    let g0_at = |r: f64, zi: f64| heat_smooth(r, zi, |w| (-w * w).exp());
    let mut prev: Vec<Vec<f64>> = times.par_iter().map(|&r| z.iter().map(|&zi| g0_at(r, zi)).collect()).collect();
    let mut terms = vec![g0_at(s, y)];
    for _ in 1..=n {
        // H' G_{j−1}(r_l, ·), weighted by e^{−r_l} and the trapezoid rule in r
        let forced: Vec<Vec<f64>> = prev
            .iter()
            .zip(&times)
            .map(|(row, &r)| row.iter().zip(&weight).map(|(a, b)| a * b * (-r).exp()).collect())
            .collect();
        let next: Vec<Vec<f64>> = (0..=m)
            .into_par_iter()
            .map(|k| {
                let mut out = vec![0.0; nz];
                for l in 0..=k {
                    if k == 0 {
                        break;
                    }
                    let tw = if l == 0 || l == k { 0.5 } else { 1.0 } * dr;
                    let ker = &kernels[k - l];
                    let f = &forced[l];
                    for (a, o) in out.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (b, fb) in f.iter().enumerate() {
                            acc += ker[a.abs_diff(b)] * fb;
                        }
                        *o += tw * acc;
                    }
                }
                out
            })
            .collect();
        terms.push(interp_uniform(&next[m], -half, hz, y).max(0.0));
        prev = next;
    }
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for (j, g) in terms.iter().enumerate() {
        acc += eps.powf(j as f64 * exponent) * g;
        partial_sums.push(acc);
    }
    Ok(GjSeries { beta, p, eps, s, y, exponent, terms, partial_sums })
}

/// v(s, y) for ∂v = 4∂²v + ε^{exponent} e^{−s} H'(y) v, v(0) = e^{−y²}.
pub fn reaction_only_value(beta: f64, p: f64, eps: f64, s: f64, y: f64, grid: &GridPreset, dt: f64) -> Result<f64> {
    let exponent = 0.5 * (beta + 1.0) - 1.0 / p;
    let g = CoefficientSeries::from_fn(0.0, s, 400, Interpolation::Linear, |r| (-r).exp())?;
    // h̄ at smoothing level 1 is exactly H
    let problem = LinearProblem::new(DriftSpec::h_bar(beta, 1.0), 0.0, eps.powf(exponent), 1.0, g);
    let grid = grid.build()?;
    let v0 = grid.sample(|x| (-x * x).exp());
    let cfg = SolverConfig { dt, store_every: usize::MAX, ..Default::default() };
    let field = solve_linear(&v0, &problem, &cfg, &grid, s)?;
    Ok(grid.interpolate(field.last(), y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinPrincipleConfig {
    pub eps: f64,
    /// Shift of the reported coordinates, ξ ↦ ξ + δ.
    pub delta: f64,
    pub k1: f64,
    pub k2: f64,
    pub beta: f64,
    pub p: f64,
    pub horizon: f64,
    pub grid: GridPreset,
    pub dt: f64,
    /// Snapshots at which Ω is scanned.
    pub snapshots: usize,
}

impl Default for MinPrincipleConfig {
    fn default() -> Self {
        Self {
            eps: 0.02,
            delta: 0.0,
            k1: 80.0,
            k2: 80.0,
            beta: 0.5,
            p: 1.0,
            horizon: 1.0,
            grid: GridPreset::default(),
            dt: 1e-4,
            snapshots: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPrincipleResult {
    pub eps: f64,
    pub k1: f64,
    pub k2: f64,
    pub min_omega: f64,
    pub min_at: (f64, f64),
    pub first_negative: Option<(f64, f64)>,
    /// k2 below which Ω turns negative somewhere on the scanned grid.
    pub critical_k2: f64,
    /// Largest ε for which Ω(0, ·) ≥ 0, (2 k2/√π)².
    pub max_admissible_eps: f64,
    /// max_ξ |discrete Ω(0, ξ) − closed form|.
    pub initial_deviation: f64,
    /// ∫₀^∞ V(t) at the final time, half the total mass.
    pub final_half_mass: f64,
}

impl MinPrincipleResult {
    pub fn violated(&self) -> bool {
        self.min_omega < 0.0
    }
}

/// Closed form of Ω(0, ξ) = k2 − √ε ∫₀^{ξ/√ε} e^{−η²} dη.
pub fn initial_omega(k2: f64, eps: f64, xi: f64) -> f64 {
    k2 - 0.5 * (PI * eps).sqrt() * libm::erf(xi / eps.sqrt())
}

/// Scan Ω(t, ξ) = t k1 + k2 − ∫₀^ξ V_ε(t, η) dη for sign changes.
pub fn min_principle_violation(cfg: &MinPrincipleConfig) -> Result<MinPrincipleResult> {
    if !(cfg.k2 > 0.0) || !(cfg.k1 >= 0.0) {
        return Err(Error::Parameter(format!("need k2 > 0 and k1 >= 0, got k1 = {}, k2 = {}", cfg.k1, cfg.k2)));
    }
    let max_eps = (2.0 * cfg.k2 / PI.sqrt()).powi(2);
    if !(cfg.eps > 0.0 && cfg.eps <= 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1], got {}", cfg.eps)));
    }
    if cfg.eps > max_eps {
        return Err(Error::Parameter(format!(
            "initial data negative: Omega(0, inf) = {} < 0; need eps <= {max_eps}",
            initial_omega(cfg.k2, cfg.eps, f64::INFINITY)
        )));
    }
    if !(cfg.delta >= 0.0) || cfg.snapshots == 0 {
        return Err(Error::Parameter("need delta >= 0 and snapshots > 0".into()));
    }
    let grid = cfg.grid.build()?;
    let g = pulse_series(cfg.eps, cfg.p, cfg.horizon)?;
    let problem = LinearProblem::new(DriftSpec::h_bar(cfg.beta, cfg.eps), 0.0, 1.0, 1.0, g);
    let v0 = grid.sample(|x| (-x * x / cfg.eps).exp());
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let every = (steps / cfg.snapshots).max(1);
    let c = grid.center();
    let x = grid.right_half().to_vec();
    // running minimum of t k1 − ∫₀^ξ V over the scanned snapshots
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    let mut first: Option<(f64, f64)> = None;
    let mut half_mass = 0.0;
    let mut scan = |t: f64, v: &[f64]| {
        let mut cum = 0.0;
        let base = t * cfg.k1;
        for i in 0..x.len() {
            if i > 0 {
                cum += 0.5 * (x[i] - x[i - 1]) * (v[c + i] + v[c + i - 1]);
            }
            let shifted = base - cum;
            if shifted < worst.0 {
                worst = (shifted, t, x[i] + cfg.delta);
            }
            if first.is_none() && cfg.k2 + shifted < 0.0 {
                first = Some((t, x[i] + cfg.delta));
            }
        }
        half_mass = cum;
    };
    let mut deviation: f64 = 0.0;
    {
        let mut cum = 0.0;
        for i in 1..x.len() {
            cum += 0.5 * (x[i] - x[i - 1]) * (v0[c + i] + v0[c + i - 1]);
            deviation = deviation.max(((cfg.k2 - cum) - initial_omega(cfg.k2, cfg.eps, x[i])).abs());
        }
    }
    scan(0.0, &v0);
    let mut observer = |step: usize, t: f64, v: &[f64]| {
        if step > 0 && (step % every == 0 || step == steps) {
            scan(t, v);
        }
    };
    let solver = SolverConfig { dt: cfg.dt, store_every: usize::MAX, ..Default::default() };
    solve_linear_between(&v0, &problem, &solver, &grid, 0.0, cfg.horizon, Some(&mut observer))?;
    Ok(MinPrincipleResult {
        eps: cfg.eps,
        k1: cfg.k1,
        k2: cfg.k2,
        min_omega: cfg.k2 + worst.0,
        min_at: (worst.1, worst.2),
        first_negative: first,
        critical_k2: -worst.0,
        max_admissible_eps: max_eps,
        initial_deviation: deviation,
        final_half_mass: half_mass,
    })
}

/// Which verifier families a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    FsBounds,
    Keyprop,
    Lp,
    Thmbuildmod,
    Spcase,
    KernelHolder,
    Gronwall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GronwallSpec {
    pub cases: usize,
    pub horizon: f64,
    pub steps: usize,
    pub tolerance: f64,
}

impl Default for GronwallSpec {
    fn default() -> Self {
        Self { cases: 50, horizon: 1.0, steps: 2000, tolerance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep: SweepSpec,
    /// Empty runs every solver-based family.
    pub checks: Vec<Check>,
    pub kernel: KernelLattice,
    pub gronwall: GronwallSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { sweep: SweepSpec::default(), checks: Vec::new(), kernel: KernelLattice::default(), gronwall: GronwallSpec::default() }
    }
}

pub fn run_checks(cfg: &SweepConfig) -> Result<VerifyOutput> {
    if cfg.checks.is_empty() {
        return verify_all(&cfg.sweep);
    }
    let mut out = VerifyOutput::default();
    for check in &cfg.checks {
        out.extend(match check {
            Check::FsBounds => verify_fs_bounds(&cfg.sweep)?,
            Check::Keyprop => verify_keyprop(&cfg.sweep)?,
            Check::Lp => verify_lp(&cfg.sweep)?,
            Check::Thmbuildmod => verify_thmbuildmod(&cfg.sweep)?,
            Check::Spcase => verify_spcase(&cfg.sweep)?,
            Check::KernelHolder => verify_kernel_holder(&cfg.kernel)?,
            Check::Gronwall => {
                let g = &cfg.gronwall;
                let cases = random_gronwall_cases(g.cases, g.horizon, cfg.sweep.seed)?;
                verify_gronwall(&cases, g.horizon, g.steps, g.tolerance)?
            }
        });
    }
    Ok(out)
}

/// Result files of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub output: VerifyOutput,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

/// Load a sweep config, run it and write reports.csv, summary.json and manifest.json into `out`.
pub fn run_sweep(config: &Path, out: &Path, seed: Option<u64>) -> Result<SweepRun> {
    let (mut cfg, raw): (SweepConfig, serde_json::Value) = read_config(config)?;
    if let Some(s) = seed {
        cfg.sweep.seed = s;
    }
    run_sweep_config(&cfg, &raw, out)
}

pub fn run_sweep_config(cfg: &SweepConfig, raw: &serde_json::Value, out: &Path) -> Result<SweepRun> {
    let mut manifest = RunManifest::start("verify", raw, cfg.sweep.seed);
    let output = run_checks(cfg)?;
    let reports = out.join("reports.csv");
    write_with(&reports, |b| output.write_reports_csv(b))?;
    manifest.record(&reports)?;
    let summary = out.join("summary.json");
    write_json(&summary, &output.summary())?;
    manifest.record(&summary)?;
    let all_pass = output.all_pass();
    let manifest_path = manifest.clone().finish(out, all_pass)?;
    manifest.all_pass = all_pass;
    Ok(SweepRun { output, manifest, manifest_path })
}

/// Two-column CSV with a header row into a validated series.
pub fn ingest_series(path: &Path) -> Result<CoefficientSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != 2 {
            return Err(Error::Series(format!("line {line}: expected 2 columns, found {}", rec.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Series(format!("line {line}: cannot parse {s:?}: {e}")))
        };
        times.push(parse(&rec[0])?);
        values.push(parse(&rec[1])?);
    }
    CoefficientSeries::new(times, values, Interpolation::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [0.2f64, 0.1, 0.05].iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 3.0 - 1.5 * l).collect();
        assert!((least_squares_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn counterexample_rejects_critical_p() {
        let cfg = CounterexampleConfig { p: critical_exponent(0.5), ..Default::default() };
        assert!(matches!(counterexample_run(&cfg), Err(Error::InadmissibleExponent(_))));
    }

    #[test]
    fn unit_eps_row_is_finite_and_positive() {
        let cfg = CounterexampleConfig { eps_list: vec![1.0], grid: GridPreset::coarse(), dt: 1e-3, ..Default::default() };
        let r = counterexample_run(&cfg).unwrap();
        let row = &r.rows[0];
        assert!(row.sup_integral.is_finite() && row.sup_integral > 0.0);
        assert!(row.control_pass);
        assert!(r.slope.is_nan());
    }

    #[test]
    fn pulse_has_unit_lp_norm_asymptotically() {
        let (eps, p) = (0.05, 1.0);
        let g = pulse_series(eps, p, 1.0).unwrap();
        // ∫ (ε^{-1/p} e^{−t/ε})^p = 1 − e^{−p/ε}·…, here 1 − e^{−20}
        let v = g.power_integral(0.0, 1.0, p).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn g0_matches_gaussian_convolution() {
        let q = GjQuadrature { time_steps: 8, space_nodes: 201, half_width: 0.0 };
        let gj = gj_series(0, 0.5, 1.0, 0.1, 1.0, 0.0, &q).unwrap();
        // ∫Ψ(1, z) e^{−z²} dz = (1 + 16)^{−1/2}
        assert!((gj.terms[0] - 17f64.powf(-0.5)).abs() < 1e-10, "{}", gj.terms[0]);
        let near = gj_series(0, 0.5, 1.0, 0.1, 1e-8, 0.7, &q).unwrap();
        assert!((near.terms[0] - (-0.49f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn gj_terms_are_nonnegative_and_sums_increase() {
        let q = GjQuadrature { time_steps: 16, space_nodes: 201, half_width: 0.0 };
        let gj = gj_series(3, 0.5, 1.0, 0.1, 1.0, 0.0, &q).unwrap();
        assert!(gj.terms.iter().all(|&g| g >= 0.0));
        assert!(gj.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        assert!(gj.terms[1] > 0.0);
    }

    #[test]
    fn gj_partial_sums_sit_below_the_reaction_solve() {
        let gj = gj_series(4, 0.5, 1.0, 0.1, 1.0, 0.0, &GjQuadrature::default()).unwrap();
        let v = reaction_only_value(0.5, 1.0, 0.1, 1.0, 0.0, &GridPreset::default(), 1e-3).unwrap();
        // both discretizations converge to within ~1e-3 relative of each other at this resolution
        let top = *gj.partial_sums.last().unwrap();
        assert!(top <= v * (1.0 + 2e-3), "{top} vs {v}");
        assert!(gj.partial_sums[0] < v && top > gj.partial_sums[0]);
    }

    #[test]
    fn gj_rejects_nonnegative_exponent() {
        assert!(gj_series(2, 0.5, 2.0, 0.1, 1.0, 0.0, &GjQuadrature::default()).is_err());
    }

    #[test]
    fn initial_positivity_check_names_the_bound() {
        let cfg = MinPrincipleConfig { k2: 0.1, eps: 0.5, ..Default::default() };
        let err = min_principle_violation(&cfg).unwrap_err().to_string();
        let need = (0.2 / PI.sqrt()).powi(2);
        assert!(err.contains(&format!("{need}")), "{err}");
    }

    #[test]
    fn initial_omega_closed_form() {
        // Ω(0, ∞) = k2 − √(επ)/2
        let (k2, eps) = (1.0, 0.3);
        assert!((initial_omega(k2, eps, f64::INFINITY) - (k2 - 0.5 * (PI * eps).sqrt())).abs() < 1e-15);
        assert_eq!(initial_omega(k2, eps, 0.0), k2);
    }

    #[test]
    fn ingest_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.csv");
        std::fs::write(&ok, "t,g\n0,1\n0.5,2\n1,0\n").unwrap();
        let s = ingest_series(&ok).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 0.0]);
        let neg = dir.path().join("neg.csv");
        std::fs::write(&neg, "t,g\n0,1\n1,-2\n").unwrap();
        assert!(ingest_series(&neg).is_err());
        let unsorted = dir.path().join("unsorted.csv");
        std::fs::write(&unsorted, "t,g\n0,1\n1,2\n0.5,1\n").unwrap();
        assert!(ingest_series(&unsorted).is_err());
    }
}
