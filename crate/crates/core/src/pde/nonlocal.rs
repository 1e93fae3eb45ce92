use super::grid::SpatialGrid;
use super::norms::{linf as norms_linf, SolutionField};
use super::solver::{assemble_field, schedule, Forcing, Observer, RawRun, Scheme, SolverConfig};
use super::tridiag::Tridiagonal;
use crate::error::{Error, Result};
use crate::series::CoefficientSeries;
use crate::special_functions::{Drift, DriftSpec};

/// ∂tΩ = 4νΩ'' + s μ₁ g h Ω' + (C/β) g ∫₀^ξ h'(η) ∂ηΩ dη + a on ξ > 0, Ω(t, 0) = 0.
#[derive(Debug, Clone)]
pub struct NonlocalProblem {
    pub drift: DriftSpec,
    pub mu1: f64,
    /// Constant C in front of the nonlocal term.
    pub pressure_constant: f64,
    pub nu: f64,
    pub g: CoefficientSeries,
    pub forcing: Forcing,
}

impl NonlocalProblem {
    pub fn new(drift: DriftSpec, mu1: f64, pressure_constant: f64, nu: f64, g: CoefficientSeries) -> Self {
        Self { drift, mu1, pressure_constant, nu, g, forcing: Forcing::None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    /// Reaction coefficient of the equation satisfied by ∂ξΩ.
    pub fn differentiated_mu2(&self) -> f64 {
        self.mu1 + self.pressure_constant / self.drift.beta
    }
}

/// Solve on the half line and return the odd extension on the full grid.
pub fn solve_nonlocal(
    omega0: &[f64],
    problem: &NonlocalProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    horizon: f64,
) -> Result<SolutionField> {
    solve_nonlocal_observed(omega0, problem, cfg, grid, horizon, None)
}

pub fn solve_nonlocal_observed(
    omega0: &[f64],
    problem: &NonlocalProblem,
    cfg: &SolverConfig,
    grid: &SpatialGrid,
    horizon: f64,
    observer: Option<Observer<'_>>,
) -> Result<SolutionField> {
    cfg.validate()?;
    let drift = Drift::new(problem.drift)?;
    if !(problem.mu1 >= 0.0 && problem.pressure_constant >= 0.0 && problem.nu > 0.0) {
        return Err(Error::Setup("need mu1 >= 0, C >= 0 and nu > 0".into()));
    }
    if omega0.len() != grid.len() {
        return Err(Error::Setup(format!("{} initial values for {} nodes", omega0.len(), grid.len())));
    }
    let c = grid.center();
    if omega0[c] != 0.0 {
        return Err(Error::Setup(format!("initial data must vanish at 0, got {}", omega0[c])));
    }
    if omega0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Setup("initial data is not finite".into()));
    }
    for t in [0.0, 0.5 * horizon, horizon] {
        let a0 = problem.forcing.eval(t, 0.0);
        if a0 != 0.0 {
            return Err(Error::Setup(format!("forcing must vanish at 0, got {a0} at t = {t}")));
        }
    }
    let x = grid.right_half();
    let m = x.len() - 1;
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let hx: Vec<f64> = x.iter().map(|&v| drift.value(v)).collect();
    let sign_mu1 = problem.drift.transport_sign() * problem.mu1;
    let nonlocal_coef = problem.pressure_constant / problem.drift.beta;

    let four_nu = 4.0 * problem.nu;
    let mut diffusion = Tridiagonal::zeros(m + 1);
    for i in 1..m {
        let dual = 0.5 * (h[i - 1] + h[i]);
        diffusion.lower[i] = four_nu / (dual * h[i - 1]);
        diffusion.upper[i] = four_nu / (dual * h[i]);
        diffusion.diag[i] = -(diffusion.lower[i] + diffusion.upper[i]);
    }
    // Neumann at L through a mirrored ghost node
    diffusion.lower[m] = 2.0 * four_nu / (h[m - 1] * h[m - 1]);
    diffusion.diag[m] = -diffusion.lower[m];

    // upwind transport stencil per unit g
    let mut transport = Tridiagonal::zeros(m + 1);
    for i in 1..m {
        let c = sign_mu1 * hx[i];
        if c > 0.0 {
            transport.diag[i] = -c / h[i];
            transport.upper[i] = c / h[i];
        } else {
            transport.lower[i] = c / h[i - 1];
            transport.diag[i] = -c / h[i - 1];
        }
    }

    let sched = schedule(0.0, horizon, cfg.dt)?;
    if cfg.scheme == Scheme::Imex {
        let gmax = problem.g.max_value();
        let rate = (1..m).map(|i| (sign_mu1 * hx[i]).abs() * gmax / h[i - 1].min(h[i])).fold(0.0, f64::max);
        if rate > 0.0 && sched.steps > 0 && sched.dt * rate > 1.0 {
            return Err(Error::StepSize { dt: sched.dt, required: 1.0 / rate });
        }
    }

    let mut v = omega0[c..].to_vec();
    let mut times = vec![0.0];
    let mut states = vec![v.clone()];
    let mut sup_trail = vec![(0.0, norms_linf(&v))];
    let mut rhs = vec![0.0; m + 1];
    let mut next = vec![0.0; m + 1];
    let mut explicit = vec![0.0; m + 1];
    let mut observer = observer;
    let odd = |half: &[f64]| -> Vec<f64> {
        let mut full: Vec<f64> = half[1..].iter().rev().map(|v| -v).collect();
        full.extend_from_slice(half);
        full
    };
    if let Some(obs) = observer.as_mut() {
        obs(0, 0.0, &odd(&v));
    }
    let theta = cfg.theta;
    for step in 1..=sched.steps {
        let ts = (step - 1) as f64 * sched.dt;
        let t = if step == sched.steps { horizon } else { step as f64 * sched.dt };
        let dt = sched.dt;
        let (g_transport, t_src) = match cfg.scheme {
            Scheme::Imex => (problem.g.value(ts), ts),
            Scheme::FullyImplicit => (problem.g.value(t), t),
        };
        let g_nonlocal = problem.g.value(ts);

        // explicit part: nonlocal term and source, plus transport under IMEX
        let mut acc = 0.0;
        explicit[0] = 0.0;
        for i in 1..=m {
            let k = i - 1;
            acc += (v[k + 1] - v[k]) / h[k] * (hx[k + 1] - hx[k]);
            explicit[i] = nonlocal_coef * g_nonlocal * acc + problem.forcing.eval(t_src, x[i]);
        }
        if cfg.scheme == Scheme::Imex {
            let mut tv = vec![0.0; m + 1];
            transport.apply(&v, &mut tv);
            for i in 1..m {
                explicit[i] += g_transport * tv[i];
            }
        }

        let (mut l, r) = match cfg.scheme {
            Scheme::Imex => (
                diffusion.shifted_identity(-theta * dt),
                diffusion.shifted_identity((1.0 - theta) * dt),
            ),
            Scheme::FullyImplicit => {
                let mut a = diffusion.clone();
                a.add_scaled(&transport, g_transport);
                (a.shifted_identity(-dt), Tridiagonal::identity(m + 1))
            }
        };
        l.pin_row(0);
        r.apply(&v, &mut rhs);
        for i in 1..=m {
            rhs[i] += dt * explicit[i];
        }
        rhs[0] = 0.0;
        l.solve(&rhs, &mut next);
        next[0] = 0.0;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step, t });
        }
        let res = l.residual(&next, &rhs);
        if res > cfg.tol * norms_linf(&rhs).max(1.0) {
            return Err(Error::NonConvergence(format!("tridiagonal residual {res} at step {step}")));
        }
        std::mem::swap(&mut v, &mut next);
        sup_trail.push((t, norms_linf(&v)));
        if let Some(obs) = observer.as_mut() {
            obs(step, t, &odd(&v));
        }
        if step % cfg.store_every == 0 || step == sched.steps {
            times.push(t);
            states.push(v.clone());
        }
    }
    let run = RawRun { times, states, sup_trail, outflow: 0.0 };
    Ok(assemble_field(grid, cfg, run, true))
}

/// Difference quotients on every cell, placed at the cell midpoints.
pub fn derivative_on_faces(grid: &SpatialGrid, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = grid.nodes();
    let faces = grid.faces();
    let d = x.windows(2).zip(values.windows(2)).map(|(xs, vs)| (vs[1] - vs[0]) / (xs[1] - xs[0])).collect();
    (faces, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::GridPreset;
    use crate::pde::solver::{solve_linear, LinearProblem};

    #[test]
    fn boundary_value_stays_zero() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = NonlocalProblem::new(DriftSpec::h0(0.5), 4.0, 1.0, 1.0, g);
        let om0 = grid.sample(f64::tanh);
        let cfg = SolverConfig { dt: 5e-4, store_every: 10, ..Default::default() };
        let f = solve_nonlocal(&om0, &p, &cfg, &grid, 0.2).unwrap();
        for v in &f.values {
            assert_eq!(v[grid.center()], 0.0);
        }
    }

    #[test]
    fn rejects_nonzero_origin_value() {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = NonlocalProblem::new(DriftSpec::h0(0.5), 4.0, 1.0, 1.0, g);
        let om0 = grid.sample(|x| x.tanh() + 0.1);
        assert!(solve_nonlocal(&om0, &p, &SolverConfig::default(), &grid, 0.1).is_err());
        let forced = p.clone().with_forcing(Forcing::field(|_, _| 1.0));
        let om0 = grid.sample(f64::tanh);
        assert!(solve_nonlocal(&om0, &forced, &SolverConfig::default(), &grid, 0.1).is_err());
    }

    #[test]
    fn derivative_tracks_the_differentiated_equation() {
        let grid = GridPreset::default().build().unwrap();
        let g = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let p = NonlocalProblem::new(DriftSpec::h0(0.5), 4.0, 1.0, 1.0, g.clone());
        let cfg = SolverConfig { dt: 1e-4, store_every: 10_000, ..Default::default() };
        let om0 = grid.sample(f64::tanh);
        let om = solve_nonlocal(&om0, &p, &cfg, &grid, 1.0).unwrap();
        let lin = LinearProblem::new(DriftSpec::h0(0.5), 4.0, p.differentiated_mu2(), 1.0, g);
        let v0 = grid.sample(|x| 1.0 / x.cosh().powi(2));
        let v = solve_linear(&v0, &lin, &cfg, &grid, 1.0).unwrap();
        let (_, d) = derivative_on_faces(&grid, om.last());
        let vl = v.last();
        let err = d.iter().enumerate().fold(0.0f64, |m, (k, dk)| m.max((dk - 0.5 * (vl[k] + vl[k + 1])).abs()));
        assert!(err < 5e-3, "{err}");
    }
}
