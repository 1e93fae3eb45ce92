use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use super::norms::{linf, norm_row, SolutionField};
use super::tridiag::Tridiagonal;
use crate::error::{Error, Result};
use crate::series::CoefficientSeries;
use crate::special_functions::{Drift, DriftSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    /// Implicit diffusion, explicit upwind transport and reaction.
    #[default]
    Imex,
    FullyImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Boundary {
    /// Whole line, far-field values held at their initial values.
    #[default]
    DirichletFarfield,
    /// Odd data on the half line with V(t, 0) = 0.
    HomogeneousAtZeroHalfline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
    /// Residual tolerance accepted from the tridiagonal solve, relative to the right side.
    pub tol: f64,
    /// Implicitness of the diffusion step; 1 is backward Euler, 1/2 Crank-Nicolson.
    pub theta: f64,
    /// Keep every n-th step (the final state is always kept).
    pub store_every: usize,
    pub p_list: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            scheme: Scheme::Imex,
            boundary: Boundary::DirichletFarfield,
            tol: 1e-10,
            theta: 1.0,
            store_every: 100,
            p_list: vec![2.0],
        }
    }
}

impl SolverConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Setup(format!("time step must be positive, got {}", self.dt)));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Setup(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        if self.store_every == 0 {
            return Err(Error::Setup("store_every must be at least 1".into()));
        }
        if self.p_list.iter().any(|&p| !(p >= 1.0)) {
            return Err(Error::Setup("every norm exponent must be >= 1".into()));
        }
        Ok(())
    }
}

pub type ForcingFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Source term d(t, ξ).
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    Field(ForcingFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::None => write!(f, "Forcing::None"),
            Forcing::Field(_) => write!(f, "Forcing::Field(..)"),
        }
    }
}

impl Forcing {
    pub fn field(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing::Field(Arc::new(f))
    }

    /// d(t, ξ) = f(t) χ(ξ).
    pub fn separable(time: CoefficientSeries, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing::field(move |t, x| time.value(t) * profile(x))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Field(f) => f(t, x),
        }
    }
}

/// ∂tV = 4ν V'' + s μ₁ g h V' + μ₂ g h' V + d, with s the transport sign of the drift.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub drift: DriftSpec,
    pub mu1: f64,
    pub mu2: f64,
    pub nu: f64,
    pub g: CoefficientSeries,
    pub forcing: Forcing,
}

impl LinearProblem {
    pub fn new(drift: DriftSpec, mu1: f64, mu2: f64, nu: f64, g: CoefficientSeries) -> Self {
        Self { drift, mu1, mu2, nu, g, forcing: Forcing::None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        if !(self.mu1 >= 0.0 && self.mu2 >= 0.0 && self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::Setup(format!("need finite mu1, mu2 >= 0, got {}, {}", self.mu1, self.mu2)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::Setup(format!("viscosity must be positive, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Spatial operators of one problem on one node set, with both ends pinned.
pub(crate) struct Stepper<'a> {
    problem: &'a LinearProblem,
    cfg: &'a SolverConfig,
    x: Vec<f64>,
    dual: Vec<f64>,
    diffusion: Tridiagonal,
    face_h: Vec<f64>,
    reaction: Vec<f64>,
    sign_mu1: f64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(problem: &'a LinearProblem, cfg: &'a SolverConfig, x: &[f64]) -> Result<Self> {
        problem.validate()?;
        cfg.validate()?;
        let drift = Drift::new(problem.drift)?;
        let n = x.len();
        if n < 3 {
            return Err(Error::Setup("need at least three nodes".into()));
        }
        let faces: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let face_h: Vec<f64> = faces.iter().map(|&f| drift.value(f)).collect();
        let mut dual = vec![0.0; n];
        dual[0] = faces[0] - x[0];
        dual[n - 1] = x[n - 1] - faces[n - 2];
        for i in 1..n - 1 {
            dual[i] = faces[i] - faces[i - 1];
        }
        let sign_mu1 = problem.drift.transport_sign() * problem.mu1;
        let react_coef = problem.mu2 - sign_mu1;
        let mut reaction = vec![0.0; n];
        let mut diffusion = Tridiagonal::zeros(n);
        let four_nu = 4.0 * problem.nu;
        for i in 1..n - 1 {
            // cell average of h' over the dual cell
            reaction[i] = react_coef * (face_h[i] - face_h[i - 1]) / dual[i];
            let cl = four_nu / (dual[i] * (x[i] - x[i - 1]));
            let cu = four_nu / (dual[i] * (x[i + 1] - x[i]));
            diffusion.lower[i] = cl;
            diffusion.upper[i] = cu;
            diffusion.diag[i] = -(cl + cu);
        }
        Ok(Self { problem, cfg, x: x.to_vec(), dual, diffusion, face_h, reaction, sign_mu1 })
    }

    /// Upwind transport plus reaction at coefficient value g; boundary rows are zero.
    fn explicit_part(&self, g: f64) -> Tridiagonal {
        let n = self.x.len();
        let mut a = Tridiagonal::zeros(n);
        for i in 1..n - 1 {
            a.diag[i] = g * self.reaction[i];
        }
        for k in 0..n - 1 {
            let vel = -self.sign_mu1 * g * self.face_h[k];
            if vel > 0.0 {
                // mass moves from node k to node k+1
                if k > 0 {
                    a.diag[k] -= vel / self.dual[k];
                }
                if k + 1 < n - 1 {
                    a.lower[k + 1] += vel / self.dual[k + 1];
                }
            } else if vel < 0.0 {
                let s = -vel;
                if k > 0 {
                    a.upper[k] += s / self.dual[k];
                }
                if k + 1 < n - 1 {
                    a.diag[k + 1] -= s / self.dual[k + 1];
                }
            }
        }
        a
    }

    /// Largest stable explicit step for the transport and reaction parts.
    pub(crate) fn max_explicit_dt(&self) -> f64 {
        if self.cfg.scheme == Scheme::FullyImplicit {
            return f64::INFINITY;
        }
        let gmax = self.problem.g.max_value();
        let n = self.x.len();
        let mut rate: f64 = 0.0;
        for i in 1..n - 1 {
            let mut out = 0.0;
            let right = -self.sign_mu1 * gmax * self.face_h[i];
            if right > 0.0 {
                out += right;
            }
            let left = -self.sign_mu1 * gmax * self.face_h[i - 1];
            if left < 0.0 {
                out -= left;
            }
            let r = out / self.dual[i] + (-gmax * self.reaction[i]).max(0.0);
            rate = rate.max(r);
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    /// (L, R) with L V^{n+1} = R V^n + dt d; rows 0 and n−1 are identities.
    pub(crate) fn operators(&self, t0: f64, dt: f64) -> (Tridiagonal, Tridiagonal) {
        let n = self.x.len();
        let theta = self.cfg.theta;
        let (mut l, mut r) = match self.cfg.scheme {
            Scheme::Imex => {
                let a = self.explicit_part(self.problem.g.value(t0));
                let l = self.diffusion.shifted_identity(-theta * dt);
                let mut r = self.diffusion.shifted_identity((1.0 - theta) * dt);
                r.add_scaled(&a, dt);
                (l, r)
            }
            Scheme::FullyImplicit => {
                let mut a = self.explicit_part(self.problem.g.value(t0 + dt));
                a.add_scaled(&self.diffusion, 1.0);
                (a.shifted_identity(-dt), Tridiagonal::identity(n))
            }
        };
        for i in [0, n - 1] {
            l.pin_row(i);
            r.pin_row(i);
        }
        (l, r)
    }

    /// Time at which the source is sampled for the step starting at t0.
    pub(crate) fn source_time(&self, t0: f64, dt: f64) -> f64 {
        match self.cfg.scheme {
            Scheme::Imex => t0,
            Scheme::FullyImplicit => t0 + dt,
        }
    }

    pub(crate) fn source(&self, t: f64, out: &mut [f64]) {
        let n = self.x.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = self.problem.forcing.eval(t, self.x[i]);
        }
    }

    /// Mass leaving through the two end faces over one step.
    fn boundary_outflow(&self, t0: f64, dt: f64, old: &[f64], new: &[f64]) -> f64 {
        let n = self.x.len();
        let theta = self.cfg.theta;
        let four_nu = 4.0 * self.problem.nu;
        let (gt, tv) = match self.cfg.scheme {
            Scheme::Imex => (self.problem.g.value(t0), old),
            Scheme::FullyImplicit => (self.problem.g.value(t0 + dt), new),
        };
        let diff_weight = match self.cfg.scheme {
            Scheme::Imex => theta,
            Scheme::FullyImplicit => 1.0,
        };
        let grad = |v: &[f64], k: usize| (v[k + 1] - v[k]) / (self.x[k + 1] - self.x[k]);
        let diff_left = diff_weight * grad(new, 0) + (1.0 - diff_weight) * grad(old, 0);
        let diff_right = diff_weight * grad(new, n - 2) + (1.0 - diff_weight) * grad(old, n - 2);
        let vl = -self.sign_mu1 * gt * self.face_h[0];
        let vr = -self.sign_mu1 * gt * self.face_h[n - 2];
        let up = |vel: f64, k: usize| if vel > 0.0 { tv[k] } else { tv[k + 1] };
        let left = four_nu * diff_left - vl * up(vl, 0);
        let right = -four_nu * diff_right + vr * up(vr, n - 2);
        dt * (left + right)
    }
}

/// Called after every accepted step with (step index, time, state).
pub type Observer<'o> = &'o mut dyn FnMut(usize, f64, &[f64]);

pub(crate) struct StepSchedule {
    pub steps: usize,
    pub dt: f64,
}

pub(crate) fn schedule(t0: f64, t1: f64, dt: f64) -> Result<StepSchedule> {
    if !(t1 >= t0) {
        return Err(Error::Setup(format!("end time {t1} precedes start time {t0}")));
    }
    if t1 == t0 {
        return Ok(StepSchedule { steps: 0, dt });
    }
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    Ok(StepSchedule { steps, dt: (t1 - t0) / steps as f64 })
}

/// Run the stepper on an arbitrary node set; returns stored (times, states),
/// the per-step sup trail and the accumulated boundary outflow.
pub(crate) struct RawRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub sup_trail: Vec<(f64, f64)>,
    pub outflow: f64,
}

pub(crate) fn run_stepper(
    stepper: &Stepper<'_>,
    v0: Vec<f64>,
    t0: f64,
    t1: f64,
    observer: Option<Observer<'_>>,
) -> Result<RawRun> {
    let cfg = stepper.cfg;
    let sched = schedule(t0, t1, cfg.dt)?;
    let required = stepper.max_explicit_dt();
    if sched.steps > 0 && sched.dt > required {
        return Err(Error::StepSize { dt: sched.dt, required });
    }
    let n = v0.len();
    let mut v = v0;
    let mut next = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut src = vec![0.0; n];
    let mut times = vec![t0];
    let mut states = vec![v.clone()];
    let mut sup_trail = vec![(t0, linf(&v))];
    let mut outflow = 0.0;
    let mut observer = observer;
    if let Some(obs) = observer.as_mut() {
        obs(0, t0, &v);
    }
    let with_source = !stepper.problem.forcing.is_none();
    for step in 1..=sched.steps {
        let ts = t0 + (step - 1) as f64 * sched.dt;
        let t = if step == sched.steps { t1 } else { t0 + step as f64 * sched.dt };
        let (l, r) = stepper.operators(ts, sched.dt);
        r.apply(&v, &mut rhs);
        if with_source {
            stepper.source(stepper.source_time(ts, sched.dt), &mut src);
            for i in 0..n {
                rhs[i] += sched.dt * src[i];
            }
        }
        l.solve(&rhs, &mut next);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step, t });
        }
        let scale = linf(&rhs).max(1.0);
        let res = l.residual(&next, &rhs);
        if res > cfg.tol * scale {
            return Err(Error::NonConvergence(format!("tridiagonal residual {res} at step {step}")));
        }
        outflow += stepper.boundary_outflow(ts, sched.dt, &v, &next);
        std::mem::swap(&mut v, &mut next);
        sup_trail.push((t, linf(&v)));
        if let Some(obs) = observer.as_mut() {
            obs(step, t, &v);
        }
        if step % cfg.store_every == 0 || step == sched.steps {
            times.push(t);
            states.push(v.clone());
        }
    }
    Ok(RawRun { times, states, sup_trail, outflow })
}

fn odd_extend(half: &[f64]) -> Vec<f64> {
    let mut full: Vec<f64> = half[1..].iter().rev().map(|v| -v).collect();
    full.extend_from_slice(half);
    full
}

pub(crate) fn assemble_field(grid: &SpatialGrid, cfg: &SolverConfig, run: RawRun, odd: bool) -> SolutionField {
    let values: Vec<Vec<f64>> = if odd { run.states.iter().map(|h| odd_extend(h)).collect() } else { run.states };
    let norm_trail = run
        .times
        .iter()
        .zip(&values)
        .map(|(&t, v)| norm_row(grid, t, v, &cfg.p_list))
        .collect();
    SolutionField {
        grid: grid.clone(),
        times: run.times,
        values,
        p_list: cfg.p_list.clone(),
        norm_trail,
        sup_trail: run.sup_trail,
        boundary_outflow: if odd { 2.0 * run.outflow } else { run.outflow },
    }
}

/// Solve the linear problem on [t0, t1] starting from nodal values `v0`.
pub fn solve_linear_between(
    v0: &[f64],
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    t0: f64,
    t1: f64,
    observer: Option<Observer<'_>>,
) -> Result<SolutionField> {
    if v0.len() != grid.len() {
        return Err(Error::Setup(format!("{} initial values for {} nodes", v0.len(), grid.len())));
    }
    if let Some(k) = v0.iter().position(|v| !v.is_finite()) {
        return Err(Error::Setup(format!("initial value at node {k} is not finite")));
    }
    match cfg.boundary {
        Boundary::DirichletFarfield => {
            let stepper = Stepper::new(problem, cfg, grid.nodes())?;
            let run = run_stepper(&stepper, v0.to_vec(), t0, t1, observer)?;
            Ok(assemble_field(grid, cfg, run, false))
        }
        Boundary::HomogeneousAtZeroHalfline => {
            let c = grid.center();
            let scale = linf(v0).max(1e-300);
            for k in 0..c {
                if (v0[k] + v0[grid.len() - 1 - k]).abs() > 1e-12 * scale {
                    return Err(Error::Setup("half-line boundary needs odd initial data".into()));
                }
            }
            if v0[c] != 0.0 {
                return Err(Error::Setup("half-line boundary needs V0(0) = 0".into()));
            }
            let stepper = Stepper::new(problem, cfg, grid.right_half())?;
            let mut wrapped;
            let obs: Option<Observer<'_>> = match observer {
                Some(o) => {
                    wrapped = move |k: usize, t: f64, h: &[f64]| o(k, t, &odd_extend(h));
                    Some(&mut wrapped)
                }
                None => None,
            };
            let run = run_stepper(&stepper, v0[c..].to_vec(), t0, t1, obs)?;
            Ok(assemble_field(grid, cfg, run, true))
        }
    }
}

/// Solve on [0, horizon].
pub fn solve_linear(
    v0: &[f64],
    problem: &LinearProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    horizon: f64,
) -> Result<SolutionField> {
    solve_linear_between(v0, problem, cfg, grid, 0.0, horizon, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::GridPreset;
    use crate::pde::norms::integral;
    use crate::special_functions::DriftSign;

    fn heat(t: f64, x: f64, nu: f64, w: f64) -> f64 {
        // e^{-x²/w²} evolved under ∂t = 4ν ∂²
        let s = w * w + 16.0 * nu * t;
        (w * w / s).sqrt() * (-x * x / s).exp()
    }

    #[test]
    fn heat_reduction_desk_grid() {
        let grid = GridPreset::default().build().unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 1.0, 1.0, 1.0, CoefficientSeries::zero(0.0, 1.0));
        let w = 2.0;
        let v0 = grid.sample(|x| heat(0.0, x, 1.0, w));
        let f = solve_linear(&v0, &p, &SolverConfig::default(), &grid, 0.5).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(f.last())
            .fold(0.0f64, |m, (&x, &v)| m.max((v - heat(0.5, x, 1.0, w)).abs()));
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn divergence_form_conserves_mass() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 4.0, 4.0, 1.0, g);
        let v0 = grid.sample(|x| (-x * x).exp());
        let cfg = SolverConfig { dt: 2e-4, ..Default::default() };
        let f = solve_linear(&v0, &p, &cfg, &grid, 0.5).unwrap();
        let m0 = integral(&grid, &v0);
        let m1 = integral(&grid, f.last()) + f.boundary_outflow;
        assert!(((m1 - m0) / m0).abs() < 1e-10, "{m0} {m1}");
        assert!(f.last().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn step_size_error_reports_requirement() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(10.0, 0.0, 1.0).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 4.0, 4.0, 1.0, g);
        let v0 = grid.sample(|x| (-x * x).exp());
        let cfg = SolverConfig { dt: 0.05, ..Default::default() };
        match solve_linear(&v0, &p, &cfg, &grid, 0.1) {
            Err(Error::StepSize { dt, required }) => assert!(required < dt),
            other => panic!("expected a step-size error, got {other:?}"),
        }
        let fi = SolverConfig { dt: 0.05, scheme: Scheme::FullyImplicit, ..Default::default() };
        assert!(solve_linear(&v0, &p, &fi, &grid, 0.1).is_ok());
    }

    #[test]
    fn flipped_sign_changes_the_solution() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let v0 = grid.sample(|x| (-x * x).exp());
        let cfg = SolverConfig { dt: 2e-4, ..Default::default() };
        let a = LinearProblem::new(DriftSpec::h_bar(0.5, 0.1), 1.0, 1.0, 1.0, g.clone());
        let b = LinearProblem::new(DriftSpec::h_bar(0.5, 0.1).with_sign(DriftSign::Flipped), 1.0, 1.0, 1.0, g);
        let fa = solve_linear(&v0, &a, &cfg, &grid, 0.3).unwrap();
        let fb = solve_linear(&v0, &b, &cfg, &grid, 0.3).unwrap();
        let c = grid.center();
        assert!(fb.last()[c] > fa.last()[c]);
    }

    #[test]
    fn half_line_matches_whole_line_for_odd_data() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(0.5), 2.0, 2.0, 1.0, g);
        let v0 = grid.sample(|x| x * (-x * x).exp());
        let cfg = SolverConfig { dt: 2e-4, ..Default::default() };
        let whole = solve_linear(&v0, &p, &cfg, &grid, 0.2).unwrap();
        let half_cfg = SolverConfig { boundary: Boundary::HomogeneousAtZeroHalfline, ..cfg };
        let half = solve_linear(&v0, &p, &half_cfg, &grid, 0.2).unwrap();
        let diff = whole.last().iter().zip(half.last()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-10, "{diff}");
        assert_eq!(half.last()[grid.center()], 0.0);
    }
}
