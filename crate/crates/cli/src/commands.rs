use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sdlab::bound_calculus::{g_bound, g_navier_stokes, g_tilde, gamma, sup_operator_bound};
use sdlab::experiments::{
    counterexample_run, gj_series, ingest_series, min_principle_violation, reaction_only_value, run_sweep_config,
    CounterexampleConfig, GjQuadrature, MinPrincipleConfig, SweepConfig,
};
use sdlab::feynman_kac::{
    cross_validate_bbar, estimate_bbar, simulate_flow, uniform_starts, write_bbar_csv, write_cross_csv, FlowModel,
    McConfig,
};
use sdlab::io::{read_config, write_json, write_with, RunManifest};
use sdlab::pde::norms::{check_symmetry_values, fmt};
use sdlab::pde::{fundamental_solution, solve_linear, GridPreset, LinearProblem, SolverConfig};
use sdlab::verifier::{GProfile, InitialProfile};
use sdlab::{BoundParams, DriftSpec, Error, Result};

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub struct Outcome {
    pub message: String,
    pub manifest: PathBuf,
    pub all_pass: bool,
}

impl Context {
    /// The parsed config and the JSON document its digest is taken from.
    fn load<T: DeserializeOwned + Serialize + Default>(&self) -> Result<(T, serde_json::Value)> {
        match &self.config {
            Some(path) => read_config(path),
            None => {
                let cfg = T::default();
                let raw = serde_json::to_value(&cfg)?;
                Ok((cfg, raw))
            }
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Writes files through the manifest so each one is hashed as it lands.
struct Outputs<'a> {
    ctx: &'a Context,
    manifest: RunManifest,
}

impl<'a> Outputs<'a> {
    fn new(ctx: &'a Context, command: &str, raw: &serde_json::Value, seed: u64) -> Self {
        Self { ctx, manifest: RunManifest::start(command, raw, seed) }
    }

    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let path = self.ctx.path(name);
        write_with(&path, fill)?;
        self.manifest.record(&path)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.ctx.path(name);
        write_json(&path, value)?;
        self.manifest.record(&path)
    }

    fn finish(self, message: impl Display, all_pass: bool) -> Result<Outcome> {
        let manifest = self.manifest.finish(&self.ctx.out, all_pass)?;
        Ok(Outcome { message: message.to_string(), manifest, all_pass })
    }
}

fn csv_rows<W: std::io::Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn default_drift() -> DriftSpec {
    DriftSpec::h0(0.5)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub drift: DriftSpec,
    pub mu1: f64,
    /// Zeroth-order weight λ; the reaction coefficient is λμ₁.
    pub lambda: f64,
    pub nu: f64,
    pub g: GProfile,
    pub initial: InitialProfile,
    pub horizon: f64,
    pub grid: GridPreset,
    pub solver: SolverConfig,
    /// Tolerance for condition (S) at the final time when the data satisfy it.
    pub symmetry_tolerance: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            drift: default_drift(),
            mu1: 1.0,
            lambda: 1.0,
            nu: 1.0,
            g: GProfile::Constant { value: 1.0 },
            initial: InitialProfile::Gaussian { width: 1.0, center: 0.0 },
            horizon: 1.0,
            grid: GridPreset::default(),
            solver: SolverConfig::default(),
            symmetry_tolerance: 1e-6,
        }
    }
}

pub fn solve(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (SolveConfig, _) = ctx.load()?;
    let mut out = Outputs::new(ctx, "solve", &raw, 0);
    let grid = cfg.grid.build()?;
    let g = cfg.g.series(cfg.horizon)?;
    let problem = LinearProblem::new(cfg.drift, cfg.mu1, cfg.lambda * cfg.mu1, cfg.nu, g);
    let v0 = grid.sample(|x| cfg.initial.eval(x));
    let field = solve_linear(&v0, &problem, &cfg.solver, &grid, cfg.horizon)?;
    out.csv("field.csv", |b| field.write_values_csv(b))?;
    out.csv("norms.csv", |b| field.write_norms_csv(b))?;
    let symmetric_data = matches!(cfg.initial, InitialProfile::Constant { .. } | InitialProfile::Gaussian { center: 0.0, .. });
    let symmetry = check_symmetry_values(&grid, field.last(), cfg.symmetry_tolerance)?;
    let finite = field.last().iter().all(|v| v.is_finite());
    let pass = finite && (!symmetric_data || symmetry.pass);
    out.json(
        "summary.json",
        &serde_json::json!({
            "final_time": field.final_time(),
            "sup_time_integral": field.sup_time_integral(),
            "symmetric_data": symmetric_data,
            "symmetry": symmetry,
        }),
    )?;
    out.finish(
        format!("solve: t = {}, sup integral {}, symmetry violation {}", fmt(field.final_time()), fmt(field.sup_time_integral()), fmt(symmetry.max_violation)),
        pass,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FundamentalConfig {
    pub drift: DriftSpec,
    pub mu1: f64,
    pub nu: f64,
    pub g: GProfile,
    pub s: f64,
    pub t: f64,
    /// Source position of the forward column.
    pub sigma0: f64,
    /// Width of the smoothed delta.
    pub width: f64,
    pub grid: GridPreset,
    pub solver: SolverConfig,
    pub tolerance: f64,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        Self {
            drift: default_drift(),
            mu1: 1.0,
            nu: 1.0,
            g: GProfile::Constant { value: 1.0 },
            s: 0.0,
            t: 1.0,
            sigma0: 0.0,
            width: 0.05,
            grid: GridPreset::default(),
            solver: SolverConfig::default(),
            tolerance: 0.02,
        }
    }
}

pub fn fundamental(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (FundamentalConfig, _) = ctx.load()?;
    let mut out = Outputs::new(ctx, "fundamental", &raw, 0);
    let grid = cfg.grid.build()?;
    let g = cfg.g.series(cfg.t)?;
    let problem = LinearProblem::new(cfg.drift, cfg.mu1, cfg.mu1, cfg.nu, g.clone());
    let fs = fundamental_solution(&problem, &cfg.solver, &grid, cfg.s, cfg.t, cfg.sigma0, cfg.width)?;
    out.csv("fundamental.csv", |b| {
        let rows = grid.nodes().iter().zip(&fs.column).zip(&fs.row).map(|((x, c), r)| vec![fmt(*x), fmt(*c), fmt(*r)]);
        csv_rows(b, &["x", "column", "row"], rows)
    })?;
    let bp = BoundParams { nu: cfg.nu, beta: cfg.drift.beta, mu1: cfg.mu1, ..Default::default() };
    let g_st = g_bound(&g, cfg.s, cfg.t, &bp)?;
    let sup_b = sup_operator_bound(&g, cfg.s, cfg.t, &bp)?;
    let l1_pass = fs.row_l1 <= g_st * (1.0 + cfg.tolerance);
    let sup_pass = fs.row_sup <= sup_b * (1.0 + cfg.tolerance);
    out.json(
        "summary.json",
        &serde_json::json!({
            "s": cfg.s, "t": cfg.t,
            "row_l1": fs.row_l1, "g_bound": g_st, "l1_pass": l1_pass,
            "row_sup": fs.row_sup, "sup_bound": sup_b, "sup_pass": sup_pass,
        }),
    )?;
    out.finish(
        format!(
            "fundamental: row L1 {} vs G {}, row sup {} vs {}",
            fmt(fs.row_l1),
            fmt(g_st),
            fmt(fs.row_sup),
            fmt(sup_b)
        ),
        l1_pass && sup_pass,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub params: BoundParams,
    pub g: GProfile,
    pub s: f64,
    pub horizon: f64,
    pub points: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { params: BoundParams::default(), g: GProfile::Constant { value: 1.0 }, s: 0.0, horizon: 1.0, points: 50 }
    }
}

pub fn bounds(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (BoundsConfig, _) = ctx.load()?;
    if cfg.points == 0 || !(cfg.horizon > cfg.s) {
        return Err(Error::Config("need points >= 1 and horizon > s".into()));
    }
    let mut out = Outputs::new(ctx, "bounds", &raw, 0);
    let g = cfg.g.series(cfg.horizon)?;
    let p = &cfg.params;
    let mut rows = Vec::with_capacity(cfg.points);
    for k in 1..=cfg.points {
        let t = cfg.s + (cfg.horizon - cfg.s) * k as f64 / cfg.points as f64;
        rows.push(vec![
            fmt(t),
            fmt(gamma(&g, cfg.s, t)?),
            fmt(g_bound(&g, cfg.s, t, p)?),
            fmt(sup_operator_bound(&g, cfg.s, t, p)?),
            fmt(g_navier_stokes(&g, t, p)?),
            fmt(g_tilde(&g, t, p)?),
        ]);
    }
    out.csv("bounds.csv", |b| csv_rows(b, &["t", "gamma", "G", "sup_operator", "G_navier_stokes", "G_tilde"], rows))?;
    out.finish(format!("bounds: {} rows", cfg.points), true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub drift: DriftSpec,
    pub mu1: f64,
    pub nu: f64,
    pub g: GProfile,
    pub horizon: f64,
    pub mc: McConfig,
    /// Points where E[B] is estimated.
    pub queries: Vec<f64>,
    /// Compare against the divergence-form solve.
    pub cross_check: bool,
    pub grid: GridPreset,
    pub dt_pde: f64,
    /// Agreement threshold in standard errors.
    pub n_se: f64,
    /// Acceptance ceiling on the relative standard error.
    pub max_relative_se: f64,
    /// Also write the raw path ensemble.
    pub dump_paths: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            drift: DriftSpec::h_eps(0.5, 0.01),
            mu1: 1.0,
            nu: 1.0,
            g: GProfile::Constant { value: 1.0 },
            horizon: 1.0,
            mc: McConfig::default(),
            queries: uniform_starts(-2.0, 2.0, 0.25),
            cross_check: true,
            grid: GridPreset::default(),
            dt_pde: 1e-4,
            n_se: 3.0,
            max_relative_se: 0.02,
            dump_paths: false,
        }
    }
}

pub fn montecarlo(ctx: &Context) -> Result<Outcome> {
    let (mut cfg, raw): (MonteCarloConfig, _) = ctx.load()?;
    if let Some(s) = ctx.seed {
        cfg.mc.seed = s;
    }
    let mut out = Outputs::new(ctx, "montecarlo", &raw, cfg.mc.seed);
    let model = FlowModel { drift: cfg.drift, mu1: cfg.mu1, g: cfg.g.series(cfg.horizon)?, nu: cfg.nu };
    if cfg.cross_check {
        let grid = cfg.grid.build()?;
        let rows = cross_validate_bbar(&model, &cfg.mc, cfg.horizon, &cfg.queries, &grid, cfg.dt_pde)?;
        out.csv("cross.csv", |b| write_cross_csv(&rows, b))?;
        let agree = rows.iter().all(|r| r.within(cfg.n_se));
        let se_ok = rows.iter().all(|r| r.mc_se <= cfg.max_relative_se * r.mc_mean.abs());
        let b_ok = cfg.drift.transport_sign() < 0.0 || rows.iter().all(|r| r.min_b >= 1.0 - 1e-12);
        let worst = rows.iter().map(|r| r.z).fold(0.0, f64::max);
        return out.finish(
            format!("montecarlo: worst |z| {} over {} points, SE ok {se_ok}, B >= 1 {b_ok}", fmt(worst), rows.len()),
            agree && se_ok && b_ok,
        );
    }
    let mut mc = cfg.mc.clone();
    mc.output_times = vec![cfg.horizon];
    let ens = simulate_flow(&model, &mc, cfg.horizon)?;
    let est = estimate_bbar(&ens, cfg.horizon, &cfg.queries)?;
    out.csv("bbar.csv", |b| write_bbar_csv(&est, b))?;
    if cfg.dump_paths {
        out.csv("paths.bin", |b| ens.write_binary(b))?;
    }
    let sufficient = est.iter().all(|e| !e.insufficient);
    out.finish(format!("montecarlo: {} paths, {} escaped", ens.n_paths, ens.escape_count()), sufficient)
}

pub fn verify(ctx: &Context) -> Result<Outcome> {
    let (mut cfg, raw): (SweepConfig, _) = ctx.load()?;
    if let Some(s) = ctx.seed {
        cfg.sweep.seed = s;
    }
    let run = run_sweep_config(&cfg, &raw, &ctx.out)?;
    let s = run.output.summary();
    Ok(Outcome {
        message: format!("verify: {} reports, {} failed, {} skipped, {} audited", s.total, s.failed, s.skipped, s.audited),
        manifest: run.manifest_path,
        all_pass: run.manifest.all_pass,
    })
}

pub fn counterexample(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (CounterexampleConfig, _) = ctx.load()?;
    let mut out = Outputs::new(ctx, "counterexample", &raw, 0);
    let report = counterexample_run(&cfg)?;
    out.csv("counterexample.csv", |b| report.write_csv(b))?;
    out.json("summary.json", &serde_json::json!({ "slope": report.slope, "slope_pass": report.slope_pass, "monotone": report.monotone }))?;
    let pass = report.all_pass();
    out.finish(format!("counterexample: slope {} (threshold {})", fmt(report.slope), fmt(cfg.slope_threshold)), pass)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GjConfig {
    pub terms: usize,
    pub beta: f64,
    pub p: f64,
    pub eps: f64,
    pub s: f64,
    pub y: f64,
    pub quadrature: GjQuadrature,
    /// Solve the reaction-only equation at the same point.
    pub pde_check: bool,
    pub grid: GridPreset,
    pub dt: f64,
    /// Relative slack allowed between the partial sum and the solve.
    pub tolerance: f64,
}

impl Default for GjConfig {
    fn default() -> Self {
        Self {
            terms: 4,
            beta: 0.5,
            p: 1.0,
            eps: 0.1,
            s: 1.0,
            y: 0.0,
            quadrature: GjQuadrature::default(),
            pde_check: true,
            grid: GridPreset::default(),
            dt: 1e-3,
            tolerance: 2e-3,
        }
    }
}

pub fn gjseries(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (GjConfig, _) = ctx.load()?;
    let mut out = Outputs::new(ctx, "gjseries", &raw, 0);
    let series = gj_series(cfg.terms, cfg.beta, cfg.p, cfg.eps, cfg.s, cfg.y, &cfg.quadrature)?;
    out.csv("gj.csv", |b| series.write_csv(b))?;
    let top = *series.partial_sums.last().expect("at least G_0");
    let (pde, pass) = if cfg.pde_check {
        let v = reaction_only_value(cfg.beta, cfg.p, cfg.eps, cfg.s, cfg.y, &cfg.grid, cfg.dt)?;
        (Some(v), top <= v * (1.0 + cfg.tolerance))
    } else {
        (None, true)
    };
    out.json("summary.json", &serde_json::json!({ "partial_sum": top, "reaction_solve": pde, "pass": pass }))?;
    out.finish(format!("gjseries: partial sum {} with {} terms", fmt(top), series.terms.len()), pass)
}

pub fn minprinciple(ctx: &Context) -> Result<Outcome> {
    let (cfg, raw): (MinPrincipleConfig, _) = ctx.load()?;
    let mut out = Outputs::new(ctx, "minprinciple", &raw, 0);
    let res = min_principle_violation(&cfg)?;
    out.json("minprinciple.json", &res)?;
    out.finish(
        format!("minprinciple: min omega {} at t = {}, xi = {}", fmt(res.min_omega), fmt(res.min_at.0), fmt(res.min_at.1)),
        res.violated(),
    )
}

pub fn ingest(ctx: &Context, input: &Path) -> Result<Outcome> {
    let raw = serde_json::json!({ "input": input.display().to_string() });
    let mut out = Outputs::new(ctx, "ingest", &raw, 0);
    let series = ingest_series(input)?;
    let rows: Vec<Vec<String>> = series.times().iter().zip(series.values()).map(|(t, v)| vec![fmt(*t), fmt(*v)]).collect();
    out.csv("series.csv", |b| csv_rows(b, &["t", "g"], rows))?;
    let total = series.integral(series.start(), series.end())?;
    out.json(
        "summary.json",
        &serde_json::json!({ "samples": series.values().len(), "start": series.start(), "end": series.end(), "integral": total }),
    )?;
    out.finish(format!("ingest: {} samples on [{}, {}]", series.values().len(), fmt(series.start()), fmt(series.end())), true)
}
