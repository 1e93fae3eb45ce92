//! Z(t, ξ; s, σ) by two routes: forward solves from narrow Gaussian sources,
//! and a backward (transposed) sweep that yields whole rows σ ↦ Z(t, 0; r, σ)
//! for every step time r at once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use super::norms::{integral, l1};
use super::solver::{run_stepper, schedule, Forcing, LinearProblem, SolverConfig, Stepper};
use crate::error::{Error, Result};

fn homogeneous(problem: &LinearProblem) -> LinearProblem {
    LinearProblem { forcing: Forcing::None, ..problem.clone() }
}

/// Spacing of the grid cells around σ.
fn local_spacing(grid: &SpatialGrid, sigma: f64) -> f64 {
    let x = grid.nodes();
    let k = grid.nearest(sigma);
    let left = if k > 0 { x[k] - x[k - 1] } else { 0.0 };
    let right = if k + 1 < x.len() { x[k + 1] - x[k] } else { 0.0 };
    left.max(right)
}

/// Unit-mass Gaussian (πw²)^{-1/2} e^{-(ξ-σ)²/w²} sampled on the grid.
pub fn gaussian_source(grid: &SpatialGrid, sigma: f64, width: f64) -> Result<Vec<f64>> {
    let required = 3.0 * local_spacing(grid, sigma);
    if !(width >= required) {
        return Err(Error::Resolution { width, required });
    }
    let norm = 1.0 / (std::f64::consts::PI.sqrt() * width);
    Ok(grid.sample(|x| {
        let z = (x - sigma) / width;
        norm * (-z * z).exp()
    }))
}

/// ξ ↦ Z(t, ξ; s, σ₀) from a smoothed delta.
pub fn fundamental_column(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    s: f64,
    t: f64,
    sigma0: f64,
    width: f64,
) -> Result<Vec<f64>> {
    let v0 = gaussian_source(grid, sigma0, width)?;
    let p = homogeneous(problem);
    let stepper = Stepper::new(&p, cfg, grid.nodes())?;
    let run = run_stepper(&stepper, v0, s, t, None)?;
    Ok(run.states.into_iter().last().expect("final state"))
}

/// σ ↦ Z(t, 0; s, σ) at the given source positions, one forward solve each.
pub fn fundamental_row_forward(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    s: f64,
    t: f64,
    sources: &[f64],
    width: f64,
) -> Result<Vec<f64>> {
    let c = grid.center();
    let cfg = SolverConfig { store_every: usize::MAX, ..cfg.clone() };
    sources
        .par_iter()
        .map(|&sigma| fundamental_column(problem, &cfg, grid, s, t, sigma, width).map(|col| col[c]))
        .collect()
}

/// Rows of Z(t, 0; r, ·) produced by one backward sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjointRows {
    pub t: f64,
    /// Step times r, increasing from s to t (the last entry is t itself).
    pub times: Vec<f64>,
    /// sup_σ Z(t, 0; r, σ) per entry of `times` (infinite at r = t).
    pub sup: Vec<f64>,
    /// ∫ Z(t, 0; r, σ) dσ per entry of `times`.
    pub mass: Vec<f64>,
    /// σ ↦ Z(t, 0; s, σ) on the grid nodes.
    pub row: Vec<f64>,
    /// Rows kept at the requested times (nearest step).
    pub kept: Vec<(f64, Vec<f64>)>,
}

impl AdjointRows {
    /// sup_σ Z(t, 0; r, σ) interpolated in r.
    pub fn sup_at(&self, r: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= r).clamp(1, self.times.len() - 1);
        let (r0, r1) = (self.times[k - 1], self.times[k]);
        if !self.sup[k].is_finite() {
            return self.sup[k - 1];
        }
        let w = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
        self.sup[k - 1] * (1.0 - w) + self.sup[k] * w
    }

    pub fn row_mass(&self) -> f64 {
        self.mass[0]
    }

    pub fn row_sup(&self) -> f64 {
        self.sup[0]
    }
}

/// Transposed sweep from y = e₀ at time t back to s; the row at step time r
/// is y / (trapezoid weight), and its mass is Σ y. Boundary entries are zero.
pub fn fundamental_row_adjoint(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    s: f64,
    t: f64,
    keep: &[f64],
) -> Result<AdjointRows> {
    let p = homogeneous(problem);
    let stepper = Stepper::new(&p, cfg, grid.nodes())?;
    let sched = schedule(s, t, cfg.dt)?;
    if sched.steps == 0 {
        return Err(Error::Setup("adjoint sweep needs s < t".into()));
    }
    let required = stepper.max_explicit_dt();
    if sched.dt > required {
        return Err(Error::StepSize { dt: sched.dt, required });
    }
    let n = grid.len();
    let w = grid.weights();
    let mut y = vec![0.0; n];
    y[grid.center()] = 1.0;
    let mut tmp = vec![0.0; n];
    let mut times = vec![t];
    let mut sup = vec![f64::INFINITY];
    let mut mass = vec![1.0];
    let mut keep_steps: Vec<usize> = keep
        .iter()
        .map(|&r| (((r - s) / sched.dt).round().max(0.0) as usize).min(sched.steps))
        .collect();
    keep_steps.sort_unstable();
    keep_steps.dedup();
    let mut kept = Vec::new();
    for step in (0..sched.steps).rev() {
        let r = s + step as f64 * sched.dt;
        let (l, rm) = stepper.operators(r, sched.dt);
        l.transpose().solve(&y, &mut tmp);
        rm.apply_transpose(&tmp, &mut y);
        y[0] = 0.0;
        y[n - 1] = 0.0;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step, t: r });
        }
        times.push(r);
        mass.push(y.iter().sum());
        sup.push(y.iter().zip(&w).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max));
        if keep_steps.binary_search(&step).is_ok() {
            kept.push((r, y.iter().zip(&w).map(|(a, b)| a / b).collect()));
        }
    }
    let row: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a / b).collect();
    times.reverse();
    sup.reverse();
    mass.reverse();
    kept.reverse();
    Ok(AdjointRows { t, times, sup, mass, row, kept })
}

/// Column, row and row norms for one (s, t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FundamentalSolution {
    pub s: f64,
    pub t: f64,
    pub sigma0: f64,
    pub width: f64,
    pub column: Vec<f64>,
    pub row: Vec<f64>,
    pub row_l1: f64,
    pub row_sup: f64,
}

pub fn fundamental_solution(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    s: f64,
    t: f64,
    sigma0: f64,
    width: f64,
) -> Result<FundamentalSolution> {
    let column = fundamental_column(problem, cfg, grid, s, t, sigma0, width)?;
    let rows = fundamental_row_adjoint(problem, cfg, grid, s, t, &[])?;
    Ok(FundamentalSolution {
        s,
        t,
        sigma0,
        width,
        column,
        row_l1: rows.row_mass(),
        row_sup: rows.row_sup(),
        row: rows.row,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonCheck {
    pub width: f64,
    pub l1_full: f64,
    pub l1_half: f64,
    pub sup_full: f64,
    pub sup_half: f64,
    /// |change in L¹| relative to the full-width value.
    pub l1_factor: f64,
    pub sup_factor: f64,
}

/// Recompute the forward row with the source width halved.
pub fn richardson_check(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    s: f64,
    t: f64,
    sources: &[f64],
    width: f64,
) -> Result<RichardsonCheck> {
    let norms = |w: f64| -> Result<(f64, f64)> {
        let row = fundamental_row_forward(problem, cfg, grid, s, t, sources, w)?;
        let mass: f64 = sources
            .windows(2)
            .zip(row.windows(2))
            .map(|(x, z)| 0.5 * (x[1] - x[0]) * (z[0] + z[1]))
            .sum();
        Ok((mass, row.iter().cloned().fold(0.0, f64::max)))
    };
    let (l1_full, sup_full) = norms(width)?;
    let (l1_half, sup_half) = norms(0.5 * width)?;
    Ok(RichardsonCheck {
        width,
        l1_full,
        l1_half,
        sup_full,
        sup_half,
        l1_factor: (l1_half - l1_full).abs() / l1_full.abs().max(1e-300),
        sup_factor: (sup_half - sup_full).abs() / sup_full.abs().max(1e-300),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionCheck {
    pub s: f64,
    pub r: f64,
    pub t: f64,
    /// L¹ over sources of (composed − direct).
    pub l1_error: f64,
    pub l1_direct: f64,
}

/// Compare ∫ Z(t,0;r,x) Z(r,x;s,σ) dx with Z(t,0;s,σ) over the given sources:
/// the inner column comes from a forward solve, the outer row from a backward sweep.
pub fn chapman_kolmogorov(
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    (s, r, t): (f64, f64, f64),
    sources: &[f64],
    width: f64,
) -> Result<CompositionCheck> {
    if !(s < r && r < t) {
        return Err(Error::Setup(format!("need s < r < t, got {s}, {r}, {t}")));
    }
    let outer = fundamental_row_adjoint(problem, cfg, grid, r, t, &[])?;
    let direct = fundamental_row_forward(problem, cfg, grid, s, t, sources, width)?;
    let cfg_store = SolverConfig { store_every: usize::MAX, ..cfg.clone() };
    let composed: Vec<f64> = sources
        .par_iter()
        .map(|&sigma| {
            let col = fundamental_column(problem, &cfg_store, grid, s, r, sigma, width)?;
            let prod: Vec<f64> = outer.row.iter().zip(&col).map(|(a, b)| a * b).collect();
            Ok(integral(grid, &prod))
        })
        .collect::<Result<_>>()?;
    let diff: Vec<f64> = composed.iter().zip(&direct).map(|(a, b)| a - b).collect();
    let trap = |v: &[f64]| -> f64 {
        sources.windows(2).zip(v.windows(2)).map(|(x, z)| 0.5 * (x[1] - x[0]) * (z[0].abs() + z[1].abs())).sum()
    };
    Ok(CompositionCheck { s, r, t, l1_error: trap(&diff), l1_direct: trap(&direct) })
}

/// L¹ norm of a column returned by `fundamental_column`.
pub fn column_l1(grid: &SpatialGrid, column: &[f64]) -> f64 {
    l1(grid, column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::GridPreset;
    use crate::series::CoefficientSeries;
    use crate::special_functions::{heat_kernel, DriftSpec, KernelParams};

    fn free(nu: f64) -> LinearProblem {
        LinearProblem::new(DriftSpec::h0(0.5), 1.0, 1.0, nu, CoefficientSeries::zero(0.0, 2.0))
    }

    #[test]
    fn zero_drift_row_is_the_heat_kernel() {
        let grid = GridPreset::coarse().build().unwrap();
        let cfg = SolverConfig { dt: 1e-3, ..Default::default() };
        let rows = fundamental_row_adjoint(&free(1.0), &cfg, &grid, 0.0, 1.0, &[]).unwrap();
        assert!((rows.row_mass() - 1.0).abs() < 1e-4, "{}", rows.row_mass());
        let k = KernelParams::new(1.0).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&rows.row)
            .skip(1)
            .take(grid.len() - 2)
            .fold(0.0f64, |m, (&x, &z)| m.max((z - heat_kernel(1.0, -x, k).unwrap()).abs()));
        assert!(err < 5e-4, "{err}");
    }

    #[test]
    fn forward_and_adjoint_rows_agree() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 1.0, 1.0, 1.0, g);
        let cfg = SolverConfig { dt: 1e-3, ..Default::default() };
        let rows = fundamental_row_adjoint(&p, &cfg, &grid, 0.0, 1.0, &[]).unwrap();
        let sources = [-2.0, -0.5, 0.0, 1.0, 3.0];
        let fwd = fundamental_row_forward(&p, &cfg, &grid, 0.0, 1.0, &sources, 0.2).unwrap();
        for (sig, z) in sources.iter().zip(&fwd) {
            let adj = grid.interpolate(&rows.row, *sig);
            assert!((adj - z).abs() < 1e-2 * rows.row_sup(), "{sig}: {adj} vs {z}");
        }
    }

    #[test]
    fn narrow_source_is_rejected() {
        let grid = GridPreset::default().build().unwrap();
        match gaussian_source(&grid, 0.0, 1e-3) {
            Err(Error::Resolution { required, .. }) => assert!(required > 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn composition_matches_direct_solve() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 1.0, 1.0, 1.0, g);
        let cfg = SolverConfig { dt: 1e-3, ..Default::default() };
        let sources: Vec<f64> = (0..21).map(|k| -5.0 + 0.5 * k as f64).collect();
        let ck = chapman_kolmogorov(&p, &cfg, &grid, (0.0, 0.4, 1.0), &sources, 0.2).unwrap();
        assert!(ck.l1_error < 1e-3 * ck.l1_direct.max(1.0), "{ck:?}");
    }
}
