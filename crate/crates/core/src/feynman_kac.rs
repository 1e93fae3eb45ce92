//! Monte-Carlo simulation of the stochastic flow Φ, its derivative ψ, the
//! inverse flow A and B = ∂ξA, and Feynman-Kac reconstruction of solutions.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::norms::fmt;
use crate::pde::Forcing;
use crate::series::CoefficientSeries;
use crate::special_functions::{Drift, DriftSpec, DriftTable};

/// Fewer retained samples than this at a point raise the insufficient flag.
pub const MIN_RETAINED: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt_sde: f64,
    pub seed: u64,
    pub start_grid: Vec<f64>,
    pub antithetic: bool,
    /// Times at which Φ and ψ are kept; empty means the horizon only.
    pub output_times: Vec<f64>,
    /// Paths leaving |Φ| <= escape_radius are flagged (and kept).
    pub escape_radius: f64,
    /// Cells of the drift lookup table.
    pub table_cells: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt_sde: 2e-3,
            seed: 20_240_601,
            start_grid: graded_starts(),
            antithetic: false,
            output_times: Vec::new(),
            escape_radius: 200.0,
            table_cells: 8192,
        }
    }
}

/// Step 0.1 on [−8, 8], 0.4 out to ±20.
pub fn graded_starts() -> Vec<f64> {
    let mut v = uniform_starts(-20.0, -8.4, 0.4);
    v.extend(uniform_starts(-8.0, 8.0, 0.1));
    v.extend(uniform_starts(8.4, 20.0, 0.4));
    v
}

/// a, a + step, ..., b (inclusive up to rounding).
pub fn uniform_starts(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).round() as usize;
    (0..=n).map(|k| a + k as f64 * step).collect()
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Setup("need at least one path".into()));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::Setup("antithetic sampling needs an even number of paths".into()));
        }
        if !(self.dt_sde > 0.0) {
            return Err(Error::Setup(format!("SDE step must be positive, got {}", self.dt_sde)));
        }
        if self.start_grid.len() < 2 || self.start_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Setup("start grid must have two or more strictly increasing points".into()));
        }
        Ok(())
    }
}

/// Φ and ψ per path, stored time, and start point (path-major, start fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub seed: u64,
    pub antithetic: bool,
    pub n_paths: usize,
    pub start_grid: Vec<f64>,
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Per path: did |Φ| exceed the escape radius at some step.
    pub escaped: Vec<bool>,
}

impl PathEnsemble {
    fn offset(&self, path: usize, k: usize) -> usize {
        (path * self.times.len() + k) * self.start_grid.len()
    }

    pub fn phi_at(&self, path: usize, k: usize) -> &[f64] {
        let o = self.offset(path, k);
        &self.phi[o..o + self.start_grid.len()]
    }

    pub fn psi_at(&self, path: usize, k: usize) -> &[f64] {
        let o = self.offset(path, k);
        &self.psi[o..o + self.start_grid.len()]
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Setup(format!("time {t} is not stored; stored times are {:?}", self.times)))
    }

    pub fn escape_count(&self) -> usize {
        self.escaped.iter().filter(|&&e| e).count()
    }

    /// Little-endian dump: magic "SDLABFK1", then u64 seed, n_paths, n_times,
    /// n_starts, antithetic flag; then f64 start grid, times, Φ and ψ
    /// (path-major, then time, then start) and one byte per path for escapes.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"SDLABFK1")?;
        for v in [
            self.seed,
            self.n_paths as u64,
            self.times.len() as u64,
            self.start_grid.len() as u64,
            self.antithetic as u64,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        for block in [&self.start_grid, &self.times, &self.phi, &self.psi] {
            for v in block.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        let flags: Vec<u8> = self.escaped.iter().map(|&e| e as u8).collect();
        out.write_all(&flags)?;
        Ok(())
    }
}

/// Transport coefficient of the flow: Φ' = −b(t, Φ) + noise with b = s μ₁ g h.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub drift: DriftSpec,
    pub mu1: f64,
    pub g: CoefficientSeries,
    pub nu: f64,
}

fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Euler-Maruyama with one Brownian path shared by every start point;
/// ψ = exp(−s μ₁ ∫ g h'(Φ)) by left-endpoint quadrature.
pub fn simulate_flow(model: &FlowModel, cfg: &McConfig, horizon: f64) -> Result<PathEnsemble> {
    cfg.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Setup(format!("horizon must be positive, got {horizon}")));
    }
    if !(model.nu >= 0.0 && model.mu1 >= 0.0) {
        return Err(Error::Setup("need nu >= 0 and mu1 >= 0".into()));
    }
    let drift = Drift::new(model.drift)?;
    let steps = step_count(horizon, cfg.dt_sde);
    let dt = horizon / steps as f64;
    let mut outputs: Vec<usize> = if cfg.output_times.is_empty() {
        vec![steps]
    } else {
        cfg.output_times
            .iter()
            .map(|&t| {
                if !(t > 0.0 && t <= horizon * (1.0 + 1e-12)) {
                    Err(Error::Setup(format!("output time {t} outside (0, {horizon}]")))
                } else {
                    Ok(((t / dt).round() as usize).clamp(1, steps))
                }
            })
            .collect::<Result<_>>()?
    };
    outputs.sort_unstable();
    outputs.dedup();
    let times: Vec<f64> = outputs.iter().map(|&k| if k == steps { horizon } else { k as f64 * dt }).collect();

    let zero_drift = model.mu1 == 0.0 || model.g.is_identically_zero();
    let table = if zero_drift { None } else { Some(DriftTable::new(drift, cfg.escape_radius, cfg.table_cells)) };
    let coef = model.drift.transport_sign() * model.mu1;
    let g_steps: Vec<f64> = (0..steps).map(|k| model.g.value(k as f64 * dt)).collect();
    let sigma = (8.0 * model.nu * dt).sqrt();
    let ns = cfg.start_grid.len();
    let per_path = times.len() * ns;

    let results: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let (stream, flip) = if cfg.antithetic { (path as u64 / 2, path % 2 == 1) } else { (path as u64, false) };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream);
            let mut disp = vec![0.0; ns];
            let mut log_psi = vec![0.0; ns];
            let mut phi_out = Vec::with_capacity(per_path);
            let mut psi_out = Vec::with_capacity(per_path);
            let mut escaped = false;
            let mut next_out = 0;
            for k in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                let dw = if flip { -sigma * z } else { sigma * z };
                match &table {
                    None => {
                        for d in disp.iter_mut() {
                            *d += dw;
                        }
                    }
                    Some(tab) => {
                        let c = coef * g_steps[k] * dt;
                        for j in 0..ns {
                            let x = cfg.start_grid[j] + disp[j];
                            let (h, dh) = tab.eval(x);
                            log_psi[j] -= c * dh;
                            disp[j] += dw - c * h;
                        }
                    }
                }
                if !escaped {
                    escaped = disp.iter().zip(&cfg.start_grid).any(|(d, x)| (x + d).abs() > cfg.escape_radius);
                }
                while next_out < outputs.len() && outputs[next_out] == k + 1 {
                    for j in 0..ns {
                        phi_out.push(cfg.start_grid[j] + disp[j]);
                        psi_out.push(log_psi[j].exp());
                    }
                    next_out += 1;
                }
            }
            (phi_out, psi_out, escaped)
        })
        .collect();

    let mut phi = Vec::with_capacity(cfg.n_paths * per_path);
    let mut psi = Vec::with_capacity(cfg.n_paths * per_path);
    let mut escaped = Vec::with_capacity(cfg.n_paths);
    for (p, q, e) in results {
        phi.extend(p);
        psi.extend(q);
        escaped.push(e);
    }
    Ok(PathEnsemble {
        seed: cfg.seed,
        antithetic: cfg.antithetic,
        n_paths: cfg.n_paths,
        start_grid: cfg.start_grid.clone(),
        times,
        phi,
        psi,
        escaped,
    })
}

/// Bracketing start index j and weight w with Φ(x) = (1−w)Φ_j + wΦ_{j+1}.
fn bracket(phi: &[f64], q: f64) -> Option<(usize, f64)> {
    let n = phi.len();
    if !(q >= phi[0] && q <= phi[n - 1]) {
        return None;
    }
    let j = phi.partition_point(|&v| v <= q).clamp(1, n - 1) - 1;
    let w = (q - phi[j]) / (phi[j + 1] - phi[j]);
    Some((j, w))
}

fn check_monotone(ens: &PathEnsemble, k: usize) -> Result<()> {
    for p in 0..ens.n_paths {
        let phi = ens.phi_at(p, k);
        if let Some(j) = phi.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Setup(format!(
                "flow is not monotone on path {p} at t = {} between starts {j} and {}",
                ens.times[k],
                j + 1
            )));
        }
    }
    Ok(())
}

/// Samples of A(t, ξ) and B(t, ξ) per query point and path; NaN marks a dropped sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseFlow {
    pub t: f64,
    pub queries: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub dropped: Vec<usize>,
}

pub fn invert_flow(ens: &PathEnsemble, t: f64, queries: &[f64]) -> Result<InverseFlow> {
    let k = ens.time_index(t)?;
    check_monotone(ens, k)?;
    let starts = &ens.start_grid;
    let mut a = vec![Vec::with_capacity(ens.n_paths); queries.len()];
    let mut b = vec![Vec::with_capacity(ens.n_paths); queries.len()];
    let mut dropped = vec![0; queries.len()];
    for p in 0..ens.n_paths {
        let phi = ens.phi_at(p, k);
        let psi = ens.psi_at(p, k);
        for (i, &q) in queries.iter().enumerate() {
            match bracket(phi, q) {
                Some((j, w)) => {
                    a[i].push(starts[j] + w * (starts[j + 1] - starts[j]));
                    b[i].push((1.0 - w) / psi[j] + w / psi[j + 1]);
                }
                None => {
                    a[i].push(f64::NAN);
                    b[i].push(f64::NAN);
                    dropped[i] += 1;
                }
            }
        }
    }
    Ok(InverseFlow { t, queries: queries.to_vec(), a, b, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub xi: f64,
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub n_retained: usize,
    pub insufficient: bool,
}

/// Mean and standard error over retained samples, in path order; antithetic
/// pairs are averaged first and the SE is taken over complete pairs.
fn summarize(samples: &[f64], antithetic: bool, xi: f64, t: f64) -> Estimate {
    let units: Vec<f64> = if antithetic {
        samples
            .chunks(2)
            .filter(|c| c.len() == 2 && c[0].is_finite() && c[1].is_finite())
            .map(|c| 0.5 * (c[0] + c[1]))
            .collect()
    } else {
        samples.iter().cloned().filter(|v| v.is_finite()).collect()
    };
    let n_retained = samples.iter().filter(|v| v.is_finite()).count();
    let m = units.len();
    let (mean, se) = if m == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = pairwise_sum(&units) / m as f64;
        let dev: Vec<f64> = units.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if m > 1 { pairwise_sum(&dev) / (m - 1) as f64 } else { f64::INFINITY };
        (mean, (var / m as f64).sqrt())
    };
    Estimate { xi, t, mean, se, n_retained, insufficient: n_retained < MIN_RETAINED }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// E[B(t, ξ)] on the query grid with standard errors.
pub fn estimate_bbar(ens: &PathEnsemble, t: f64, grid: &[f64]) -> Result<Vec<Estimate>> {
    let inv = invert_flow(ens, t, grid)?;
    Ok(grid.iter().enumerate().map(|(i, &xi)| summarize(&inv.b[i], ens.antithetic, xi, t)).collect())
}

/// Empirical E[B^λ]; exploratory only, no bound is asserted for λ > 1.
pub fn empirical_moment(ens: &PathEnsemble, t: f64, grid: &[f64], lambda: f64) -> Result<Vec<Estimate>> {
    let inv = invert_flow(ens, t, grid)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let s: Vec<f64> = inv.b[i].iter().map(|b| b.powf(lambda)).collect();
            summarize(&s, ens.antithetic, xi, t)
        })
        .collect())
}

/// max over the grid of E[B^{λ−1}] − (E[B])^{λ−1} on the sample measure, λ ∈ [1, 2].
pub fn holder_in_mean_gap(ens: &PathEnsemble, t: f64, grid: &[f64], lambda: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&lambda) {
        return Err(Error::Parameter(format!("lambda must lie in [1,2], got {lambda}")));
    }
    let inv = invert_flow(ens, t, grid)?;
    let mut worst = f64::NEG_INFINITY;
    for samples in &inv.b {
        let kept: Vec<f64> = samples.iter().cloned().filter(|v| v.is_finite()).collect();
        if kept.is_empty() {
            continue;
        }
        let n = kept.len() as f64;
        let lhs = pairwise_sum(&kept.iter().map(|b| b.powf(lambda - 1.0)).collect::<Vec<_>>()) / n;
        let rhs = (pairwise_sum(&kept) / n).powf(lambda - 1.0);
        worst = worst.max(lhs - rhs);
    }
    Ok(worst)
}

/// Feynman-Kac estimate of V(t, ξ) for ∂tV = 4νV'' + μ₁ghV' + λμ₁gh'V + d:
/// V = E[v0(A) B^λ] + E[ψ(t,x)^{−λ} ∫₀ᵗ d(s, Φ(s,x)) ψ(s,x)^λ ds] with x = A(t, ξ).
/// The time integral uses the trapezoid rule on the stored times.
pub fn reconstruct_solution(
    ens: &PathEnsemble,
    t: f64,
    grid: &[f64],
    v0: &(dyn Fn(f64) -> f64 + Sync),
    lambda: f64,
    forcing: &Forcing,
) -> Result<Vec<Estimate>> {
    if !(0.0..=2.0).contains(&lambda) {
        return Err(Error::Parameter(format!("lambda must lie in [0,2], got {lambda}")));
    }
    let k = ens.time_index(t)?;
    check_monotone(ens, k)?;
    let starts = &ens.start_grid;
    let with_source = !forcing.is_none();
    let mut samples = vec![Vec::with_capacity(ens.n_paths); grid.len()];
    for p in 0..ens.n_paths {
        let phi = ens.phi_at(p, k);
        let psi = ens.psi_at(p, k);
        // source integral per start point, for the path started at x_j
        let src: Vec<f64> = if with_source {
            (0..starts.len())
                .map(|j| {
                    let mut prev_t = 0.0;
                    let mut prev = forcing.eval(0.0, starts[j]);
                    let mut acc = 0.0;
                    for kk in 0..=k {
                        let tk = ens.times[kk];
                        let cur = forcing.eval(tk, ens.phi_at(p, kk)[j]) * ens.psi_at(p, kk)[j].powf(lambda);
                        acc += 0.5 * (tk - prev_t) * (prev + cur);
                        prev_t = tk;
                        prev = cur;
                    }
                    acc
                })
                .collect()
        } else {
            Vec::new()
        };
        for (i, &q) in grid.iter().enumerate() {
            match bracket(phi, q) {
                Some((j, w)) => {
                    let x = starts[j] + w * (starts[j + 1] - starts[j]);
                    let bl = (1.0 - w) / psi[j] + w / psi[j + 1];
                    let mut v = v0(x) * bl.powf(lambda);
                    if with_source {
                        let s = (1.0 - w) * src[j] + w * src[j + 1];
                        v += bl.powf(lambda) * s;
                    }
                    samples[i].push(v);
                }
                None => samples[i].push(f64::NAN),
            }
        }
    }
    Ok(grid.iter().enumerate().map(|(i, &xi)| summarize(&samples[i], ens.antithetic, xi, t)).collect())
}

/// CSV "xi,t,mean_B,se_B,n_retained".
pub fn write_bbar_csv<W: Write>(rows: &[Estimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xi", "t", "mean_B", "se_B", "n_retained"])?;
    for r in rows {
        w.write_record([fmt(r.xi), fmt(r.t), fmt(r.mean), fmt(r.se), r.n_retained.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Monte-Carlo E[B] beside the divergence-form solve at one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub xi: f64,
    pub t: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub pde: f64,
    /// |mc_mean − pde| / mc_se.
    pub z: f64,
    /// Smallest retained B sample.
    pub min_b: f64,
    pub n_retained: usize,
    pub insufficient: bool,
}

impl CrossRow {
    pub fn within(&self, n_se: f64) -> bool {
        !self.insufficient && self.z <= n_se
    }
}

/// E[B(t, ·)] against the solve of ∂tB̄ = 4νB̄'' + μ₁g(hB̄)' with B̄(0) = 1.
pub fn cross_validate_bbar(
    model: &FlowModel,
    cfg: &McConfig,
    t: f64,
    queries: &[f64],
    grid: &crate::pde::SpatialGrid,
    dt_pde: f64,
) -> Result<Vec<CrossRow>> {
    if model.drift.transport_sign() < 0.0 {
        return Err(Error::Parameter("the divergence-form comparison needs the stabilizing sign".into()));
    }
    let mut mc = cfg.clone();
    mc.output_times = vec![t];
    let ens = simulate_flow(model, &mc, t)?;
    let inv = invert_flow(&ens, t, queries)?;
    let est: Vec<Estimate> = queries.iter().enumerate().map(|(i, &xi)| summarize(&inv.b[i], ens.antithetic, xi, t)).collect();
    let problem = crate::pde::LinearProblem::new(model.drift, model.mu1, model.mu1, model.nu, model.g.clone());
    let solver = crate::pde::SolverConfig { dt: dt_pde, store_every: usize::MAX, ..Default::default() };
    let field = crate::pde::solve_linear(&vec![1.0; grid.len()], &problem, &solver, grid, t)?;
    Ok(est
        .iter()
        .zip(&inv.b)
        .map(|(e, samples)| {
            let pde = grid.interpolate(field.last(), e.xi);
            let min_b = samples.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
            CrossRow {
                xi: e.xi,
                t,
                mc_mean: e.mean,
                mc_se: e.se,
                pde,
                z: (e.mean - pde).abs() / e.se.max(f64::MIN_POSITIVE),
                min_b,
                n_retained: e.n_retained,
                insufficient: e.insufficient,
            }
        })
        .collect())
}

pub fn write_cross_csv<W: Write>(rows: &[CrossRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xi", "t", "mc_mean", "mc_se", "pde", "z", "min_b", "n_retained"])?;
    for r in rows {
        w.write_record([
            fmt(r.xi),
            fmt(r.t),
            fmt(r.mc_mean),
            fmt(r.mc_se),
            fmt(r.pde),
            fmt(r.z),
            fmt(r.min_b),
            r.n_retained.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::DriftSign;

    fn model(g: f64, nu: f64) -> FlowModel {
        FlowModel {
            drift: DriftSpec::h_bar(0.5, 0.1),
            mu1: 1.0,
            g: CoefficientSeries::constant(g, 0.0, 2.0).unwrap(),
            nu,
        }
    }

    fn small_cfg() -> McConfig {
        McConfig {
            n_paths: 64,
            dt_sde: 1e-2,
            start_grid: uniform_starts(-8.0, 8.0, 0.25),
            output_times: vec![0.5, 1.0],
            table_cells: 2048,
            ..Default::default()
        }
    }

    #[test]
    fn zero_drift_is_pure_translation() {
        let ens = simulate_flow(&model(0.0, 1.0), &small_cfg(), 1.0).unwrap();
        for p in 0..ens.n_paths {
            let phi = ens.phi_at(p, 1);
            let shift = phi[0] - ens.start_grid[0];
            for (x, f) in ens.start_grid.iter().zip(phi) {
                assert!((f - x - shift).abs() < 1e-12);
            }
            assert!(ens.psi_at(p, 1).iter().all(|&v| v == 1.0));
        }
        let est = estimate_bbar(&ens, 1.0, &[0.0, 1.0]).unwrap();
        assert!(est.iter().all(|e| e.mean == 1.0 && e.insufficient));
    }

    #[test]
    fn stabilizing_flow_contracts() {
        let ens = simulate_flow(&model(1.0, 1.0), &small_cfg(), 1.0).unwrap();
        assert!(ens.psi.iter().all(|&v| v > 0.0 && v <= 1.0));
        let inv = invert_flow(&ens, 1.0, &[-1.0, 0.0, 2.0]).unwrap();
        for col in &inv.b {
            assert!(col.iter().filter(|v| v.is_finite()).all(|&b| b >= 1.0));
        }
    }

    #[test]
    fn flipped_flow_expands() {
        let m = FlowModel { drift: DriftSpec::h_bar(0.5, 0.1).with_sign(DriftSign::Flipped), ..model(1.0, 1.0) };
        let ens = simulate_flow(&m, &small_cfg(), 1.0).unwrap();
        assert!(ens.psi.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn round_trip_through_the_inverse() {
        let ens = simulate_flow(&model(1.0, 1.0), &small_cfg(), 1.0).unwrap();
        let q = [-2.0, -0.3, 0.0, 0.7, 3.0];
        let inv = invert_flow(&ens, 1.0, &q).unwrap();
        let k = ens.time_index(1.0).unwrap();
        for p in 0..ens.n_paths {
            let phi = ens.phi_at(p, k);
            for (i, &xi) in q.iter().enumerate() {
                let a = inv.a[i][p];
                if a.is_finite() {
                    let j = ens.start_grid.partition_point(|&s| s <= a).clamp(1, ens.start_grid.len() - 1) - 1;
                    let w = (a - ens.start_grid[j]) / (ens.start_grid[j + 1] - ens.start_grid[j]);
                    let back = (1.0 - w) * phi[j] + w * phi[j + 1];
                    assert!((back - xi).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn queries_outside_the_image_are_dropped() {
        let ens = simulate_flow(&model(1.0, 1.0), &small_cfg(), 1.0).unwrap();
        let inv = invert_flow(&ens, 1.0, &[1e6]).unwrap();
        assert_eq!(inv.dropped[0], ens.n_paths);
        let est = estimate_bbar(&ens, 1.0, &[1e6]).unwrap();
        assert_eq!(est[0].n_retained, 0);
        assert!(est[0].insufficient);
    }

    #[test]
    fn seeding_is_reproducible_and_prefix_stable() {
        let cfg = small_cfg();
        let a = simulate_flow(&model(1.0, 1.0), &cfg, 1.0).unwrap();
        let b = simulate_flow(&model(1.0, 1.0), &cfg, 1.0).unwrap();
        assert_eq!(a.phi, b.phi);
        let more = McConfig { n_paths: 96, ..cfg };
        let c = simulate_flow(&model(1.0, 1.0), &more, 1.0).unwrap();
        assert_eq!(&c.phi[..a.phi.len()], &a.phi[..]);
    }

    #[test]
    fn unstored_time_is_an_error() {
        let ens = simulate_flow(&model(1.0, 1.0), &small_cfg(), 1.0).unwrap();
        assert!(estimate_bbar(&ens, 0.3, &[0.0]).is_err());
    }

    #[test]
    fn binary_dump_layout() {
        let cfg = McConfig { n_paths: 2, output_times: vec![1.0], ..small_cfg() };
        let ens = simulate_flow(&model(1.0, 1.0), &cfg, 1.0).unwrap();
        let mut buf = Vec::new();
        ens.write_binary(&mut buf).unwrap();
        let ns = ens.start_grid.len();
        assert_eq!(&buf[..8], b"SDLABFK1");
        assert_eq!(buf.len(), 8 + 5 * 8 + 8 * (ns + 1 + 2 * 2 * ns) + 2);
        let seed = u64::from_le_bytes(buf[8..16].try_into().unwrap());
        assert_eq!(seed, cfg.seed);
    }
}
