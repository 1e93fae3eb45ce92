//! Parameter sweeps comparing solver output against the analytic bounds.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound_calculus::{
    forcing_kernel_integral, g_bound, scaled_operator_bound, singular_gronwall, sup_operator_bound, BoundParams,
    BoundReport,
};
use crate::error::{Error, Result};
use crate::pde::norms::{check_symmetry_values, fmt, l1, linf, lp};
use crate::pde::{
    fundamental_row_adjoint, solve_linear, solve_nonlocal, Forcing, GridPreset, LinearProblem,
    NonlocalProblem, SolverConfig, SpatialGrid,
};
use crate::quadrature::adaptive;
use crate::series::{CoefficientSeries, Interpolation};
use crate::special_functions::{chi_forcing, heat_kernel_unchecked, Drift, DriftSpec};

/// Time profile of the drift strength g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GProfile {
    Zero,
    Constant { value: f64 },
    /// amplitude · exp(−((t − center)/width)²)
    Bump { amplitude: f64, center: f64, width: f64 },
    Series { times: Vec<f64>, values: Vec<f64> },
}

impl GProfile {
    pub fn label(&self) -> String {
        match self {
            GProfile::Zero => "zero".into(),
            GProfile::Constant { value } => format!("constant({})", fmt(*value)),
            GProfile::Bump { amplitude, center, width } => {
                format!("bump({},{},{})", fmt(*amplitude), fmt(*center), fmt(*width))
            }
            GProfile::Series { times, .. } => format!("series({} samples)", times.len()),
        }
    }

    /// Series covering [0, horizon].
    pub fn series(&self, horizon: f64) -> Result<CoefficientSeries> {
        match self {
            GProfile::Zero => Ok(CoefficientSeries::zero(0.0, horizon)),
            GProfile::Constant { value } => CoefficientSeries::constant(*value, 0.0, horizon),
            GProfile::Bump { amplitude, center, width } => {
                if !(*width > 0.0) || !(*amplitude >= 0.0) {
                    return Err(Error::Config(format!("bump needs width > 0 and amplitude >= 0, got {width}, {amplitude}")));
                }
                let (a, c, w) = (*amplitude, *center, *width);
                CoefficientSeries::from_fn(0.0, horizon, 400, Interpolation::Linear, |t| {
                    a * (-((t - c) / w).powi(2)).exp()
                })
            }
            GProfile::Series { times, values } => {
                let s = CoefficientSeries::new(times.clone(), values.clone(), Interpolation::Linear)?;
                if s.start() > 0.0 || s.end() < horizon {
                    return Err(Error::Config(format!(
                        "series covers [{}, {}] but the horizon is {horizon}",
                        s.start(),
                        s.end()
                    )));
                }
                Ok(s)
            }
        }
    }
}

/// Initial data for the symmetric special case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitialProfile {
    Constant { value: f64 },
    Gaussian { width: f64, #[serde(default)] center: f64 },
}

impl InitialProfile {
    pub fn label(&self) -> String {
        match self {
            InitialProfile::Constant { value } => format!("constant({})", fmt(*value)),
            InitialProfile::Gaussian { width, center } => format!("gaussian({},{})", fmt(*width), fmt(*center)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Constant { value } => value,
            InitialProfile::Gaussian { width, center } => (-((x - center) / width).powi(2)).exp(),
        }
    }
}

fn default_betas() -> Vec<f64> {
    vec![0.5]
}
fn default_ones() -> Vec<f64> {
    vec![1.0]
}
fn default_profiles() -> Vec<GProfile> {
    vec![GProfile::Constant { value: 1.0 }]
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_c() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_initial() -> Vec<InitialProfile> {
    vec![InitialProfile::Constant { value: 1.0 }, InitialProfile::Gaussian { width: 1.0, center: 0.0 }]
}

/// Lattice of parameter points plus tolerances and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub betas: Vec<f64>,
    pub mu1s: Vec<f64>,
    /// λ = μ₂/μ₁; ignored by the checks that fix λ = 1.
    pub lambdas: Vec<f64>,
    pub nus: Vec<f64>,
    pub profiles: Vec<GProfile>,
    pub grid: GridPreset,
    pub horizon: f64,
    /// Start time of the fundamental-solution checks.
    pub s: f64,
    pub p_values: Vec<f64>,
    pub pressure_constants: Vec<f64>,
    pub initial_data: Vec<InitialProfile>,
    /// Bound ids to report; empty means all.
    pub bounds: Vec<String>,
    pub tolerance: f64,
    pub equality_tolerance: f64,
    pub dt: f64,
    pub audit_fraction: f64,
    pub c_d: f64,
    pub seed: u64,
    /// Amplitude of the forcing terms (0 disables them).
    pub forcing_amplitude: f64,
    /// Exponent of χ in the nonlocal forcing.
    pub chi_alpha: f64,
    /// 0 selects the exact drift |ξ|^β, otherwise the mollified one.
    pub mollify_eps: f64,
    /// Number of stored snapshots at which time-dependent bounds are checked.
    pub snapshots: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            betas: default_betas(),
            mu1s: default_ones(),
            lambdas: default_ones(),
            nus: default_ones(),
            profiles: default_profiles(),
            grid: GridPreset::default(),
            horizon: 1.0,
            s: 0.0,
            p_values: default_p(),
            pressure_constants: default_c(),
            initial_data: default_initial(),
            bounds: Vec::new(),
            tolerance: 0.02,
            equality_tolerance: 1e-4,
            dt: 1e-4,
            audit_fraction: 0.1,
            c_d: 1.0,
            seed: 0,
            forcing_amplitude: 0.5,
            chi_alpha: 0.5,
            mollify_eps: 0.0,
            snapshots: 20,
        }
    }
}

impl SweepSpec {
    /// Desk lattice β ∈ {1/4, 1/2, 3/4} × μ₁ ∈ {1, 4}.
    pub fn desk() -> Self {
        Self { betas: vec![0.25, 0.5, 0.75], mu1s: vec![1.0, 4.0], ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} is out of range")));
        for &b in &self.betas {
            if !(b > 0.0 && b < 1.0) {
                return bad("beta", b);
            }
        }
        for &m in &self.mu1s {
            if !(m >= 0.0 && m.is_finite()) {
                return bad("mu1", m);
            }
        }
        for &l in &self.lambdas {
            if !(0.0..=2.0).contains(&l) {
                return bad("lambda", l);
            }
        }
        for &n in &self.nus {
            if !(n > 0.0 && n.is_finite()) {
                return bad("nu", n);
            }
        }
        for &p in &self.p_values {
            if !(p >= 1.0 && p.is_finite()) {
                return bad("p", p);
            }
        }
        for &c in &self.pressure_constants {
            if !(c >= 0.0 && c.is_finite()) {
                return bad("pressure constant", c);
            }
        }
        if !(self.horizon > self.s && self.s >= 0.0) {
            return Err(Error::Config(format!("need 0 <= s < horizon, got s = {}, horizon = {}", self.s, self.horizon)));
        }
        if !(self.dt > 0.0) {
            return bad("dt", self.dt);
        }
        if !(self.tolerance >= 0.0) || !(self.equality_tolerance >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.audit_fraction) {
            return bad("audit_fraction", self.audit_fraction);
        }
        if !(self.c_d >= 1.0) {
            return bad("c_d", self.c_d);
        }
        if !(self.forcing_amplitude >= 0.0) {
            return bad("forcing_amplitude", self.forcing_amplitude);
        }
        if !(self.chi_alpha > 0.0 && self.chi_alpha < 1.0) {
            return bad("chi_alpha", self.chi_alpha);
        }
        if self.snapshots == 0 {
            return Err(Error::Config("snapshots must be positive".into()));
        }
        for p in &self.profiles {
            p.series(self.horizon)?;
        }
        self.drift(0.5).validate()?;
        Ok(())
    }

    fn drift(&self, beta: f64) -> DriftSpec {
        if self.mollify_eps > 0.0 {
            DriftSpec::h_eps(beta, self.mollify_eps)
        } else {
            DriftSpec::h0(beta)
        }
    }

    fn wants(&self, id: &str) -> bool {
        self.bounds.is_empty() || self.bounds.iter().any(|b| b == id)
    }

    fn grid_label(grid: &GridPreset) -> String {
        format!(
            "{}:{}:{}:{}",
            fmt(grid.half_width),
            fmt(grid.min_spacing),
            fmt(grid.ratio),
            fmt(grid.max_spacing)
        )
    }

    fn solver_config(&self, dt: f64, horizon: f64) -> SolverConfig {
        let steps = (horizon / dt).ceil().max(1.0) as usize;
        SolverConfig { dt, store_every: (steps / self.snapshots).max(1), ..Default::default() }
    }
}

/// Lattice point not evaluated, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub check: String,
    pub point: BTreeMap<String, f64>,
    pub reason: String,
}

/// Verdicts of one audited point on the base and the refined resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub bound_id: String,
    pub point: BTreeMap<String, f64>,
    pub ratio_base: f64,
    pub ratio_refined: f64,
    pub pass_base: bool,
    pub pass_refined: bool,
}

impl AuditRecord {
    pub fn stable(&self) -> bool {
        self.pass_base == self.pass_refined
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub reports: Vec<BoundReport>,
    pub skipped: Vec<Skipped>,
    pub audit: Vec<AuditRecord>,
}

impl VerifyOutput {
    pub fn extend(&mut self, other: VerifyOutput) {
        self.reports.extend(other.reports);
        self.skipped.extend(other.skipped);
        self.audit.extend(other.audit);
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass) && self.audit.iter().all(AuditRecord::stable)
    }

    pub fn summary(&self) -> VerifySummary {
        let mut worst: BTreeMap<String, WorstCase> = BTreeMap::new();
        for r in &self.reports {
            let e = worst.entry(r.bound_id.clone()).or_insert_with(|| WorstCase {
                ratio: f64::NEG_INFINITY,
                count: 0,
                failed: 0,
                point: BTreeMap::new(),
            });
            e.count += 1;
            if !r.pass {
                e.failed += 1;
            }
            if r.ratio > e.ratio || (r.ratio.is_nan() && !e.ratio.is_nan()) {
                e.ratio = r.ratio;
                e.point = r.point.clone();
            }
        }
        let passed = self.reports.iter().filter(|r| r.pass).count();
        VerifySummary {
            total: self.reports.len(),
            passed,
            failed: self.reports.len() - passed,
            skipped: self.skipped.len(),
            audited: self.audit.len(),
            audit_unstable: self.audit.iter().filter(|a| !a.stable()).count(),
            worst,
        }
    }

    /// One row per report; the point is flattened to `key=value` pairs.
    pub fn write_reports_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bound_id", "pass", "ratio", "measured", "bound", "tolerance", "point", "metadata"])?;
        for r in &self.reports {
            let point: Vec<String> = r.point.iter().map(|(k, v)| format!("{k}={}", fmt(*v))).collect();
            let meta: Vec<String> = r.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
            w.write_record([
                r.bound_id.clone(),
                r.pass.to_string(),
                fmt(r.ratio),
                fmt(r.measured),
                fmt(r.bound),
                fmt(r.tolerance),
                point.join(";"),
                meta.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub ratio: f64,
    pub count: usize,
    pub failed: usize,
    pub point: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub audited: usize,
    pub audit_unstable: usize,
    pub worst: BTreeMap<String, WorstCase>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    beta: f64,
    mu1: f64,
    lambda: f64,
    nu: f64,
    profile: usize,
    /// p for the Lᵖ check, C for the nonlocal one, initial profile index for the special case.
    extra: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Fundamental,
    Keyprop,
    Lp,
    Nonlocal,
    Special,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Fundamental => "fs_bounds",
            Family::Keyprop => "keyprop",
            Family::Lp => "lp",
            Family::Nonlocal => "thmbuildmod",
            Family::Special => "spcase",
        }
    }

    fn ids(self) -> &'static [&'static str] {
        match self {
            Family::Fundamental => &["goodopnorm", "supopbd", "scaledopnorm", "scaledopnorm_le_goodopnorm"],
            Family::Keyprop => &["linftybd", "l1bd", "implinftybd"],
            Family::Lp => &["lpbd"],
            Family::Nonlocal => &["maindbomega", "maindbomega_sup_le_l1", "bddd", "bddd2", "thmbuildmod_shape"],
            Family::Special => &["splinftybd", "splinftybd_peak_at_origin"],
        }
    }
}

struct Ctx<'a> {
    spec: &'a SweepSpec,
    preset: GridPreset,
    grid: SpatialGrid,
    dt: f64,
}

impl Ctx<'_> {
    fn base_point(&self, pt: &Point) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("beta".into(), pt.beta);
        m.insert("mu1".into(), pt.mu1);
        m.insert("lambda".into(), pt.lambda);
        m.insert("mu2".into(), pt.lambda * pt.mu1);
        m.insert("nu".into(), pt.nu);
        m.insert("c_d".into(), self.spec.c_d);
        m
    }

    fn report(&self, id: &str, point: BTreeMap<String, f64>, measured: f64, bound: f64, tol: f64, pt: &Point) -> BoundReport {
        BoundReport::new(id, point, measured, bound, tol)
            .with_meta("profile", self.spec.profiles[pt.profile].label())
            .with_meta("grid", SweepSpec::grid_label(&self.preset))
            .with_meta("dt", fmt(self.dt))
            .with_meta("seed", self.spec.seed)
            .with_meta("drift", format!("{:?}", self.spec.drift(pt.beta).family))
    }

    fn params(&self, pt: &Point) -> BoundParams {
        BoundParams { nu: pt.nu, beta: pt.beta, mu1: pt.mu1, exponent_eps: 1.0, c_d: self.spec.c_d }
    }

    fn g(&self, pt: &Point) -> Result<CoefficientSeries> {
        self.spec.profiles[pt.profile].series(self.spec.horizon)
    }
}

fn lattice(spec: &SweepSpec, family: Family) -> Vec<Point> {
    let lambdas: Vec<f64> = match family {
        Family::Fundamental | Family::Special | Family::Nonlocal => vec![1.0],
        Family::Keyprop | Family::Lp => spec.lambdas.clone(),
    };
    let extras: Vec<f64> = match family {
        Family::Lp => spec.p_values.clone(),
        Family::Nonlocal => spec.pressure_constants.clone(),
        Family::Special => (0..spec.initial_data.len()).map(|k| k as f64).collect(),
        _ => vec![0.0],
    };
    let mut out = Vec::new();
    for &beta in &spec.betas {
        for &mu1 in &spec.mu1s {
            for &lambda in &lambdas {
                for &nu in &spec.nus {
                    for profile in 0..spec.profiles.len() {
                        for &extra in &extras {
                            out.push(Point { beta, mu1, lambda, nu, profile, extra });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Reason a point cannot be evaluated for this family, if any.
fn admissibility(spec: &SweepSpec, family: Family, pt: &Point) -> Option<String> {
    match family {
        Family::Keyprop => {
            let any = (spec.wants("linftybd") && pt.lambda <= 1.0)
                || (spec.wants("l1bd") && pt.lambda >= 1.0)
                || (spec.wants("implinftybd") && pt.lambda == 1.0);
            (!any).then(|| format!("no requested bound applies at lambda = {}", pt.lambda))
        }
        Family::Lp => {
            if pt.lambda < 1.0 {
                Some(format!("Lp bound needs lambda in [1,2], got {}", pt.lambda))
            } else if pt.extra * pt.lambda > 2.0 + 1e-12 {
                Some(format!("p * lambda = {} exceeds 2", pt.extra * pt.lambda))
            } else {
                None
            }
        }
        Family::Nonlocal => {
            let c = pt.extra;
            let main = pt.mu1 > c / pt.beta;
            let zero_c = c == 0.0;
            (!main && !zero_c).then(|| format!("need mu1 > C/beta, got mu1 = {}, C/beta = {}", pt.mu1, c / pt.beta))
        }
        _ => None,
    }
}

fn point_reports(ctx: &Ctx, family: Family, pt: &Point) -> Result<Vec<BoundReport>> {
    match family {
        Family::Fundamental => fs_point(ctx, pt),
        Family::Keyprop => keyprop_point(ctx, pt),
        Family::Lp => lp_point(ctx, pt),
        Family::Nonlocal => nonlocal_point(ctx, pt),
        Family::Special => special_point(ctx, pt),
    }
}

fn run_family(spec: &SweepSpec, family: Family) -> Result<VerifyOutput> {
    spec.validate()?;
    if !family.ids().iter().any(|id| spec.wants(id)) {
        return Ok(VerifyOutput::default());
    }
    let points = lattice(spec, family);
    if points.is_empty() {
        return Ok(VerifyOutput::default());
    }
    let ctx = Ctx { spec, preset: spec.grid, grid: spec.grid.build()?, dt: spec.dt };
    let results: Vec<std::result::Result<Vec<BoundReport>, String>> = points
        .par_iter()
        .map(|pt| match admissibility(spec, family, pt) {
            Some(reason) => Err(reason),
            None => point_reports(&ctx, family, pt).map_err(|e| e.to_string()),
        })
        .collect();
    let mut out = VerifyOutput::default();
    let mut evaluated = Vec::new();
    for (k, (pt, res)) in points.iter().zip(results).enumerate() {
        match res {
            Ok(reps) => {
                evaluated.push(k);
                out.reports.extend(reps.into_iter().filter(|r| spec.wants(&r.bound_id)));
            }
            Err(reason) => out.skipped.push(Skipped {
                check: family.name().into(),
                point: ctx.base_point(pt),
                reason,
            }),
        }
    }
    out.audit = audit(spec, family, &points, &evaluated, &out.reports)?;
    Ok(out)
}

/// Rerun a seeded sample of the evaluated points on the refined grid with half the step.
fn audit(
    spec: &SweepSpec,
    family: Family,
    points: &[Point],
    evaluated: &[usize],
    base: &[BoundReport],
) -> Result<Vec<AuditRecord>> {
    if spec.audit_fraction == 0.0 || evaluated.is_empty() {
        return Ok(Vec::new());
    }
    let n = evaluated.len();
    let k = ((spec.audit_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_iter().map(|i| evaluated[i]).collect();
    chosen.sort_unstable();
    let preset = spec.grid.refined();
    let ctx = Ctx { spec, preset, grid: preset.build()?, dt: 0.5 * spec.dt };
    let refined: Vec<Result<Vec<BoundReport>>> = chosen.par_iter().map(|&i| point_reports(&ctx, family, &points[i])).collect();
    let mut out = Vec::new();
    for res in refined {
        for r in res?.into_iter().filter(|r| spec.wants(&r.bound_id)) {
            let same = |b: &&BoundReport| {
                b.bound_id == r.bound_id
                    && b.metadata.get("case") == r.metadata.get("case")
                    && b.metadata.get("profile") == r.metadata.get("profile")
                    && without_time(&b.point) == without_time(&r.point)
            };
            if let Some(b) = base.iter().find(same) {
                out.push(AuditRecord {
                    bound_id: r.bound_id.clone(),
                    point: r.point.clone(),
                    ratio_base: b.ratio,
                    ratio_refined: r.ratio,
                    pass_base: b.pass,
                    pass_refined: r.pass,
                });
            }
        }
    }
    Ok(out)
}

// the worst snapshot time may move under refinement
fn without_time(point: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    point.iter().filter(|(k, _)| k.as_str() != "t").map(|(k, v)| (k.clone(), *v)).collect()
}

/// Row mass, row sup and the scaled operator bound of Z(t, 0; s, ·).
pub fn verify_fs_bounds(spec: &SweepSpec) -> Result<VerifyOutput> {
    run_family(spec, Family::Fundamental)
}

/// L∞ (λ ≤ 1), L¹ (λ ≥ 1) and the improved symmetric-forcing L∞ bound.
pub fn verify_keyprop(spec: &SweepSpec) -> Result<VerifyOutput> {
    run_family(spec, Family::Keyprop)
}

pub fn verify_lp(spec: &SweepSpec) -> Result<VerifyOutput> {
    run_family(spec, Family::Lp)
}

/// Bounds on the nonlocal equation and its derivative.
pub fn verify_thmbuildmod(spec: &SweepSpec) -> Result<VerifyOutput> {
    run_family(spec, Family::Nonlocal)
}

pub fn verify_spcase(spec: &SweepSpec) -> Result<VerifyOutput> {
    run_family(spec, Family::Special)
}

/// Every solver-based check in sequence.
pub fn verify_all(spec: &SweepSpec) -> Result<VerifyOutput> {
    let mut out = VerifyOutput::default();
    for f in [Family::Fundamental, Family::Keyprop, Family::Lp, Family::Nonlocal, Family::Special] {
        out.extend(run_family(spec, f)?);
    }
    Ok(out)
}

fn fs_point(ctx: &Ctx, pt: &Point) -> Result<Vec<BoundReport>> {
    let spec = ctx.spec;
    let (s, t) = (spec.s, spec.horizon);
    let g = ctx.g(pt)?;
    let problem = LinearProblem::new(spec.drift(pt.beta), pt.mu1, pt.mu1, pt.nu, g.clone());
    let cfg = SolverConfig { dt: ctx.dt, ..Default::default() };
    let rows = fundamental_row_adjoint(&problem, &cfg, &ctx.grid, s, t, &[])?;
    let bp = ctx.params(pt);
    let good = g_bound(&g, s, t, &bp)?;
    let sup = sup_operator_bound(&g, s, t, &bp)?;
    let n = rows.times.len() - 1;
    let scaled = scaled_operator_bound(&g, s, t, &rows.times[..n], &rows.sup[..n], &bp)?;
    let trivial = g.is_identically_zero() || pt.mu1 == 0.0;
    let tol = if trivial { spec.equality_tolerance } else { spec.tolerance };
    let mut point = ctx.base_point(pt);
    point.insert("s".into(), s);
    point.insert("t".into(), t);
    let mass = rows.row_mass();
    Ok(vec![
        ctx.report("goodopnorm", point.clone(), mass, good, tol, pt),
        ctx.report("supopbd", point.clone(), rows.row_sup(), sup, spec.tolerance, pt),
        ctx.report("scaledopnorm", point.clone(), mass, scaled, tol, pt),
        ctx.report("scaledopnorm_le_goodopnorm", point, scaled, good, 0.0, pt),
    ])
}

/// Worst ratio over the stored snapshots (t > 0) of `measured(k)` against `bound(t)`.
fn worst_over_time(
    times: &[f64],
    mut measured: impl FnMut(usize) -> f64,
    mut bound: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64, f64)> {
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for (k, &t) in times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        let m = measured(k);
        let b = bound(t)?;
        let ratio = if b > 0.0 { m / b } else if m <= 0.0 { 0.0 } else { f64::INFINITY };
        if ratio > worst.0 {
            worst = (ratio, t, m, b);
        }
    }
    Ok((worst.1, worst.2, worst.3))
}

fn gaussian_forcing(amplitude: f64) -> Forcing {
    if amplitude == 0.0 {
        Forcing::None
    } else {
        Forcing::field(move |_, x| amplitude * (-x * x).exp())
    }
}

fn keyprop_point(ctx: &Ctx, pt: &Point) -> Result<Vec<BoundReport>> {
    let spec = ctx.spec;
    let horizon = spec.horizon;
    let g = ctx.g(pt)?;
    let a = spec.forcing_amplitude;
    let problem = LinearProblem::new(spec.drift(pt.beta), pt.mu1, pt.lambda * pt.mu1, pt.nu, g.clone())
        .with_forcing(gaussian_forcing(a));
    let grid = &ctx.grid;
    let v0 = grid.sample(|x| (-x * x).exp());
    let profile = v0.clone();
    let cfg = spec.solver_config(ctx.dt, horizon);
    let field = solve_linear(&v0, &problem, &cfg, grid, horizon)?;
    let bp = ctx.params(pt);
    let zero_case = g.is_identically_zero() || pt.mu1 == 0.0;
    let tol = spec.tolerance;
    let mut out = Vec::new();
    let d_inf = a * linf(&profile);
    let d_l1 = a * l1(grid, &profile);
    if pt.lambda <= 1.0 {
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| linf(&field.values[k]),
            |t| Ok((linf(&v0) + d_inf * t) * g_bound(&g, 0.0, t, &bp)?.powf(pt.lambda)),
        )?;
        let mut point = ctx.base_point(pt);
        point.insert("t".into(), t);
        out.push(ctx.report("linftybd", point, m, b, tol, pt).with_meta("zero_drift", zero_case));
    }
    if pt.lambda >= 1.0 {
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| l1(grid, &field.values[k]),
            |t| Ok((l1(grid, &v0) + d_l1 * t) * g_bound(&g, 0.0, t, &bp)?.powf(pt.lambda - 1.0)),
        )?;
        let mut point = ctx.base_point(pt);
        point.insert("t".into(), t);
        out.push(ctx.report("l1bd", point, m, b, tol, pt));
    }
    if pt.lambda == 1.0 && a > 0.0 {
        let f = CoefficientSeries::constant(d_l1, 0.0, horizon)?;
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| linf(&field.values[k]),
            |t| Ok(linf(&v0) * g_bound(&g, 0.0, t, &bp)? + forcing_kernel_integral(&f, &g, t, &bp, true)?),
        )?;
        let mut point = ctx.base_point(pt);
        point.insert("t".into(), t);
        out.push(ctx.report("implinftybd", point, m, b, tol, pt));
    }
    Ok(out)
}

fn lp_point(ctx: &Ctx, pt: &Point) -> Result<Vec<BoundReport>> {
    let spec = ctx.spec;
    let p = pt.extra;
    let horizon = spec.horizon;
    let g = ctx.g(pt)?;
    let a = spec.forcing_amplitude;
    let problem = LinearProblem::new(spec.drift(pt.beta), pt.mu1, pt.lambda * pt.mu1, pt.nu, g.clone())
        .with_forcing(gaussian_forcing(a));
    let grid = &ctx.grid;
    let v0 = grid.sample(|x| (-x * x).exp());
    let cfg = spec.solver_config(ctx.dt, horizon);
    let field = solve_linear(&v0, &problem, &cfg, grid, horizon)?;
    let bp = ctx.params(pt);
    let d_p = a * lp(grid, &v0, p);
    let (t, m, b) = worst_over_time(
        &field.times,
        |k| lp(grid, &field.values[k], p),
        |t| Ok((lp(grid, &v0, p) + d_p * t) * g_bound(&g, 0.0, t, &bp)?.powf(pt.lambda - 1.0 / p)),
    )?;
    let mut point = ctx.base_point(pt);
    point.insert("p".into(), p);
    point.insert("t".into(), t);
    Ok(vec![ctx.report("lpbd", point, m, b, spec.tolerance, pt)])
}

/// Σ|Ω_{k+1} − Ω_k| over the whole line and max |ΔΩ/Δξ|.
fn derivative_norms(grid: &SpatialGrid, v: &[f64]) -> (f64, f64) {
    let x = grid.nodes();
    let mut l1 = 0.0;
    let mut sup: f64 = 0.0;
    for k in 0..x.len() - 1 {
        let d = v[k + 1] - v[k];
        l1 += d.abs();
        sup = sup.max(d.abs() / (x[k + 1] - x[k]));
    }
    (l1, sup)
}

/// Largest violation of monotonicity or concavity on [0, L], relative to ‖Ω‖∞.
fn shape_violation(grid: &SpatialGrid, v: &[f64]) -> f64 {
    let c = grid.center();
    let x = &grid.nodes()[c..];
    let v = &v[c..];
    let scale = linf(v).max(1e-300);
    let slopes: Vec<f64> = (0..x.len() - 1).map(|k| (v[k + 1] - v[k]) / (x[k + 1] - x[k])).collect();
    let mut worst: f64 = 0.0;
    for (k, s) in slopes.iter().enumerate() {
        worst = worst.max(-s * (x[k + 1] - x[k]) / scale);
    }
    for k in 0..slopes.len() - 1 {
        // increase of the slope, weighted by the cell size to compare with value jumps
        let h = x[k + 2] - x[k];
        worst = worst.max((slopes[k + 1] - slopes[k]) * h / scale);
    }
    worst
}

fn nonlocal_point(ctx: &Ctx, pt: &Point) -> Result<Vec<BoundReport>> {
    let spec = ctx.spec;
    let c = pt.extra;
    let horizon = spec.horizon;
    let g = ctx.g(pt)?;
    let grid = &ctx.grid;
    let bp = ctx.params(pt);
    let f_amp = spec.forcing_amplitude;
    let cfg = spec.solver_config(ctx.dt, horizon);
    let omega0 = grid.sample(f64::tanh);
    let (om_l1, om_inf) = derivative_norms(grid, &omega0);
    let chi = |x: f64, alpha: f64| chi_forcing(x.abs(), alpha).map(|v| v.copysign(x)).unwrap_or(0.0);
    let mut out = Vec::new();
    let mut point = ctx.base_point(pt);
    point.insert("C".into(), c);
    let zero_case = g.is_identically_zero() || pt.mu1 == 0.0;
    let tol = if zero_case && f_amp == 0.0 { spec.equality_tolerance } else { spec.tolerance };

    let alpha = spec.chi_alpha;
    let forcing = if f_amp > 0.0 { Forcing::field(move |_, x| f_amp * chi(x, alpha)) } else { Forcing::None };
    let problem = NonlocalProblem::new(spec.drift(pt.beta), pt.mu1, c, pt.nu, g.clone()).with_forcing(forcing);
    let field = solve_nonlocal(&omega0, &problem, &cfg, grid, horizon)?;

    if pt.mu1 > c / pt.beta {
        let lambda = 1.0 + c / (pt.beta * pt.mu1);
        // ∂a = f χ' has whole-line L¹ norm 2f
        let da_l1 = 2.0 * f_amp;
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| derivative_norms(grid, &field.values[k]).0,
            |t| Ok((om_l1 + da_l1 * t) * g_bound(&g, 0.0, t, &bp)?.powf(lambda - 1.0)),
        )?;
        let mut p1 = point.clone();
        p1.insert("t".into(), t);
        p1.insert("lambda".into(), lambda);
        out.push(ctx.report("maindbomega", p1, m, b, tol, pt));
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| linf(&field.values[k]),
            |t| {
                let k = field.times.iter().position(|&s| s == t).unwrap();
                Ok(derivative_norms(grid, &field.values[k]).0)
            },
        )?;
        let mut p2 = point.clone();
        p2.insert("t".into(), t);
        out.push(ctx.report("maindbomega_sup_le_l1", p2, m, b, spec.equality_tolerance, pt));
    }

    if c == 0.0 {
        let f = CoefficientSeries::constant(f_amp, 0.0, horizon)?;
        let (t, m, b) = worst_over_time(
            &field.times,
            |k| derivative_norms(grid, &field.values[k]).1,
            |t| Ok(om_inf * g_bound(&g, 0.0, t, &bp)? + forcing_kernel_integral(&f, &g, t, &bp, false)?),
        )?;
        let mut p3 = point.clone();
        p3.insert("t".into(), t);
        p3.insert("alpha".into(), alpha);
        out.push(ctx.report("bddd2", p3, m, b, spec.tolerance, pt));

        // the unsharpened bound needs a Lipschitz forcing, χ with exponent 1
        let lip = NonlocalProblem::new(spec.drift(pt.beta), pt.mu1, 0.0, pt.nu, g.clone()).with_forcing(if f_amp > 0.0 {
            Forcing::field(move |_, x| f_amp * x.clamp(-1.0, 1.0))
        } else {
            Forcing::None
        });
        let lip_field = solve_nonlocal(&omega0, &lip, &cfg, grid, horizon)?;
        let (t, m, b) = worst_over_time(
            &lip_field.times,
            |k| derivative_norms(grid, &lip_field.values[k]).1,
            |t| Ok((om_inf + f_amp * t) * g_bound(&g, 0.0, t, &bp)?),
        )?;
        let mut p4 = point.clone();
        p4.insert("t".into(), t);
        p4.insert("alpha".into(), 1.0);
        out.push(ctx.report("bddd", p4, m, b, tol, pt));
    }

    let shape = field.values.iter().map(|v| shape_violation(grid, v)).fold(0.0, f64::max);
    out.push(ctx.report("thmbuildmod_shape", point, shape, SHAPE_TOLERANCE, 0.0, pt));
    Ok(out)
}

/// Relative violation of monotone/concave shape accepted as round-off.
pub const SHAPE_TOLERANCE: f64 = 1e-8;

fn special_point(ctx: &Ctx, pt: &Point) -> Result<Vec<BoundReport>> {
    let spec = ctx.spec;
    let init = spec.initial_data[pt.extra as usize];
    let grid = &ctx.grid;
    let v0 = grid.sample(|x| init.eval(x));
    let sym = check_symmetry_values(grid, &v0, 1e-12 * linf(&v0).max(1.0))?;
    if !sym.pass {
        return Err(Error::Setup(format!(
            "initial data {} violates condition (S) by {}",
            init.label(),
            sym.max_violation
        )));
    }
    let g = ctx.g(pt)?;
    let problem = LinearProblem::new(spec.drift(pt.beta), pt.mu1, pt.mu1, pt.nu, g.clone());
    let cfg = spec.solver_config(ctx.dt, spec.horizon);
    let field = solve_linear(&v0, &problem, &cfg, grid, spec.horizon)?;
    let bp = ctx.params(pt);
    let c = grid.center();
    let mut point = ctx.base_point(pt);
    point.insert("initial".into(), pt.extra);
    let (t, m, b) = worst_over_time(
        &field.times,
        |k| linf(&field.values[k]),
        |t| Ok(linf(&v0) * g_bound(&g, 0.0, t, &bp)?),
    )?;
    let zero_case = g.is_identically_zero() || pt.mu1 == 0.0;
    let tol = if zero_case { spec.equality_tolerance } else { spec.tolerance };
    let mut p1 = point.clone();
    p1.insert("t".into(), t);
    let (tp, mp, bp0) = worst_over_time(&field.times, |k| linf(&field.values[k]), |t| {
        let k = field.times.iter().position(|&s| s == t).unwrap();
        Ok(field.values[k][c])
    })?;
    let mut p2 = point;
    p2.insert("t".into(), tp);
    Ok(vec![
        ctx.report("splinftybd", p1, m, b, tol, pt).with_meta("case", init.label()),
        ctx.report("splinftybd_peak_at_origin", p2, mp, bp0, spec.equality_tolerance, pt).with_meta("case", init.label()),
    ])
}

/// Lattice for the weighted Hölder estimates of the heat kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelLattice {
    pub xis: Vec<f64>,
    pub ts: Vec<f64>,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub nu: f64,
    pub beta: f64,
    pub mollify_eps: f64,
    pub tolerance: f64,
    pub quadrature_tol: f64,
}

impl Default for KernelLattice {
    fn default() -> Self {
        Self {
            xis: vec![0.0, 0.5, 2.0],
            ts: vec![0.1, 1.0, 4.0],
            deltas: vec![0.01, 0.5, 0.9],
            gammas: vec![0.1, 0.5, 0.9],
            nu: 1.0,
            beta: 0.5,
            mollify_eps: 0.01,
            tolerance: 0.0,
            quadrature_tol: 1e-10,
        }
    }
}

/// Left sides of the three kernel estimates at one (ξ, t, δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDifferences {
    /// ∫ |∂σΨ(t, ξ−σ+δ) − ∂σΨ(t, ξ−σ)| |h(σ)| dσ
    pub gradient_weighted: f64,
    /// ∫ |Ψ(t, ξ−σ+δ) − Ψ(t, ξ−σ)| |h'(σ)| dσ
    pub value_weighted: f64,
    /// sup_y |Ψ(t, y+δ) − Ψ(t, y)|
    pub pointwise: f64,
    pub converged: bool,
}

fn kernel_deriv(t: f64, y: f64, nu: f64) -> f64 {
    -y / (8.0 * nu * t) * heat_kernel_unchecked(t, y, nu)
}

/// Adaptive quadrature over panels cut at the given points and no wider than `max_width`.
fn panel_integral(cuts: &mut Vec<f64>, max_width: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, bool) {
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    let mut ok = true;
    let span = cuts[cuts.len() - 1] - cuts[0];
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for i in 0..pieces {
            let a = w[0] + i as f64 * h;
            let b = if i + 1 == pieces { w[1] } else { a + h };
            let (v, conv) = adaptive(a, b, tol * (b - a) / span, &f);
            acc += v;
            ok &= conv;
        }
    }
    (acc, ok)
}

pub fn kernel_differences(xi: f64, t: f64, delta: f64, nu: f64, drift: &Drift, tol: f64) -> KernelDifferences {
    let root = (nu * t).sqrt();
    let reach = 26.0 * root + delta;
    let eps = drift.spec().mollify_eps.max(1e-3);
    let mut cuts = vec![xi - reach, xi + reach, 0.0, xi, xi + delta, xi + 0.5 * delta];
    for k in [-10.0, -2.0, -1.0, 1.0, 2.0, 10.0] {
        cuts.push(k * eps);
    }
    for k in [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0] {
        cuts.push(xi + 0.5 * delta + k * 2.0 * root);
    }
    cuts.retain(|&c| c >= xi - reach && c <= xi + reach);
    let width = 0.5 * root;
    let (gw, ok1) = panel_integral(&mut cuts.clone(), width, tol, |s| {
        (kernel_deriv(t, xi - s + delta, nu) - kernel_deriv(t, xi - s, nu)).abs() * drift.value(s).abs()
    });
    let (vw, ok2) = panel_integral(&mut cuts, width, tol, |s| {
        (heat_kernel_unchecked(t, xi - s + delta, nu) - heat_kernel_unchecked(t, xi - s, nu)).abs()
            * drift.deriv(s).unwrap_or(0.0).abs()
    });
    KernelDifferences { gradient_weighted: gw, value_weighted: vw, pointwise: pointwise_difference(t, delta, nu), converged: ok1 && ok2 }
}

/// sup_y |Ψ(t, y+δ) − Ψ(t, y)| by a scan followed by golden-section refinement.
pub fn pointwise_difference(t: f64, delta: f64, nu: f64) -> f64 {
    let diff = |y: f64| (heat_kernel_unchecked(t, y + delta, nu) - heat_kernel_unchecked(t, y, nu)).abs();
    let reach = 12.0 * (nu * t).sqrt() + delta;
    let n = 4000;
    let h = 2.0 * reach / n as f64;
    let mut best = (0.0, -reach);
    for k in 0..=n {
        let y = -reach + k as f64 * h;
        let v = diff(y);
        if v > best.0 {
            best = (v, y);
        }
    }
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if diff(c) > diff(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.max(diff(0.5 * (a + b)))
}

/// Right sides of the three estimates.
pub fn kernel_holder_bounds(xi: f64, t: f64, delta: f64, gamma: f64, nu: f64, beta: f64) -> (f64, f64, f64) {
    let nt = nu * t;
    let pre = delta.powf(gamma) / nt.powf(0.5 * (gamma + 1.0));
    let grad = 8.0 * pre
        * (1.0 + xi.abs().powf(beta) + nt.powf(0.5 * beta)).powf(gamma)
        * (nt.powf(beta) + xi.abs().powf(beta)).powf(1.0 - gamma);
    let value = pre * (1.0 + nt.powf(0.5 * gamma));
    (grad, value, pre)
}

pub fn verify_kernel_holder(lattice: &KernelLattice) -> Result<VerifyOutput> {
    let drift = Drift::new(DriftSpec::h_eps(lattice.beta, lattice.mollify_eps))?;
    if !(lattice.nu > 0.0) {
        return Err(Error::Config(format!("nu must be positive, got {}", lattice.nu)));
    }
    let mut cases = Vec::new();
    for &xi in &lattice.xis {
        for &t in &lattice.ts {
            for &delta in &lattice.deltas {
                cases.push((xi, t, delta));
            }
        }
    }
    let mut out = VerifyOutput::default();
    for &(xi, t, delta) in &cases {
        let mut point = BTreeMap::new();
        point.insert("xi".into(), xi);
        point.insert("t".into(), t);
        point.insert("delta".into(), delta);
        if !(delta > 0.0 && delta < 1.0) || !(t > 0.0) {
            out.skipped.push(Skipped {
                check: "kernel_holder".into(),
                point,
                reason: format!("need delta in (0,1) and t > 0, got delta = {delta}, t = {t}"),
            });
        }
    }
    let valid: Vec<_> = cases.into_iter().filter(|&(_, t, d)| d > 0.0 && d < 1.0 && t > 0.0).collect();
    let diffs: Vec<KernelDifferences> = valid
        .par_iter()
        .map(|&(xi, t, delta)| kernel_differences(xi, t, delta, lattice.nu, &drift, lattice.quadrature_tol))
        .collect();
    for (&(xi, t, delta), d) in valid.iter().zip(&diffs) {
        for &gamma in &lattice.gammas {
            if !(gamma > 0.0 && gamma < 1.0) {
                continue;
            }
            let (bg, bv, bp) = kernel_holder_bounds(xi, t, delta, gamma, lattice.nu, lattice.beta);
            let mut point = BTreeMap::new();
            point.insert("xi".into(), xi);
            point.insert("t".into(), t);
            point.insert("delta".into(), delta);
            point.insert("gamma".into(), gamma);
            point.insert("nu".into(), lattice.nu);
            point.insert("beta".into(), lattice.beta);
            let tag = |r: BoundReport| {
                let r = r
                    .with_meta("drift", format!("h_eps({})", fmt(lattice.mollify_eps)))
                    .with_meta("quadrature", if d.converged { "converged" } else { "flagged" });
                if d.converged {
                    r
                } else {
                    BoundReport { pass: false, ..r }
                }
            };
            out.reports.push(tag(BoundReport::new("wgthdholdgrad", point.clone(), d.gradient_weighted, bg, lattice.tolerance)));
            out.reports.push(tag(BoundReport::new("wgthdhold", point.clone(), d.value_weighted, bv, lattice.tolerance)));
            out.reports.push(tag(BoundReport::new("c335n", point, d.pointwise, bp, lattice.tolerance)));
        }
    }
    Ok(out)
}

/// Solution of f(t) = h(t) + ∫₀ᵗ (t−s)^{−α} g(s) f(s) ds by product integration
/// with piecewise-linear g·f on `n` uniform steps.
pub fn volterra_equality(h: &CoefficientSeries, g: &CoefficientSeries, alpha: f64, horizon: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&alpha) || n == 0 {
        return Err(Error::Domain(format!("need alpha in [0,1) and n > 0, got {alpha}, {n}")));
    }
    let t0 = h.start();
    let dt = (horizon - t0) / n as f64;
    let times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).collect();
    let a1 = 1.0 - alpha;
    let a2 = 2.0 - alpha;
    // ∫ over one cell of (u)^{−α} against the two hat functions, u = distance to t_n
    let moment = |u0: f64, u1: f64| -> (f64, f64) {
        let m0 = (u1.powf(a1) - u0.powf(a1)) / a1;
        let m1 = (u1.powf(a2) - u0.powf(a2)) / a2;
        (m0, m1)
    };
    let mut f = vec![h.value(t0)];
    let mut gf = vec![g.value(t0) * f[0]];
    for k in 1..=n {
        let tk = times[k];
        let mut acc = 0.0;
        let mut self_weight = 0.0;
        for j in 0..k {
            // cell [t_j, t_{j+1}], distance to t_k runs from u1 = tk − t_j down to u0 = tk − t_{j+1}
            let u1 = tk - times[j];
            let u0 = tk - times[j + 1];
            let (m0, m1) = moment(u0, u1);
            // gf linear: weight on t_{j+1} end is (u1 − u)/dt, on t_j end is (u − u0)/dt
            let w_right = (u1 * m0 - m1) / dt;
            let w_left = (m1 - u0 * m0) / dt;
            acc += w_left * gf[j];
            if j + 1 == k {
                self_weight = w_right;
            } else {
                acc += w_right * gf[j + 1];
            }
        }
        let gk = g.value(tk);
        let denom = 1.0 - self_weight * gk;
        if !(denom > 0.0) {
            return Err(Error::NonConvergence(format!("product integration step too coarse at t = {tk}")));
        }
        let fk = (h.value(tk) + acc) / denom;
        f.push(fk);
        gf.push(gk * fk);
    }
    Ok((times, f))
}

/// One randomized admissible case of the singular Gronwall check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallCase {
    pub alpha: f64,
    pub q: f64,
    pub h: CoefficientSeries,
    pub g: CoefficientSeries,
}

/// Draw admissible cases: α ∈ [0, 0.8], q ∈ (1/(1−α), 1/(1−α) + 3], piecewise-linear h, g ≥ 0.
pub fn random_gronwall_cases(n: usize, horizon: f64, seed: u64) -> Result<Vec<GronwallCase>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let alpha: f64 = rng.random_range(0.0..0.8);
        let q = 1.0 / (1.0 - alpha) + rng.random_range(0.05..3.0);
        let knots = rng.random_range(2..6usize);
        let times: Vec<f64> = (0..=knots).map(|k| horizon * k as f64 / knots as f64).collect();
        let hv: Vec<f64> = times.iter().map(|_| rng.random_range(0.1..2.0)).collect();
        let gv: Vec<f64> = times.iter().map(|_| rng.random_range(0.0..1.5)).collect();
        out.push(GronwallCase {
            alpha,
            q,
            h: CoefficientSeries::new(times.clone(), hv, Interpolation::Linear)?,
            g: CoefficientSeries::new(times, gv, Interpolation::Linear)?,
        });
    }
    Ok(out)
}

/// The equality solution against the Gronwall bound at every step time; one report per case.
pub fn verify_gronwall(cases: &[GronwallCase], horizon: f64, steps: usize, tolerance: f64) -> Result<VerifyOutput> {
    let mut out = VerifyOutput::default();
    let reports: Vec<Result<BoundReport>> = cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let bound = singular_gronwall(&case.h, &case.g, case.q, case.alpha, horizon)?;
            let (times, f) = volterra_equality(&case.h, &case.g, case.alpha, horizon, steps)?;
            let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
            for (&t, &fv) in times.iter().zip(&f).skip(1) {
                let b = bound.eval(t)?;
                if fv / b > worst.0 {
                    worst = (fv / b, t, fv, b);
                }
            }
            let mut point = BTreeMap::new();
            point.insert("case".into(), k as f64);
            point.insert("alpha".into(), case.alpha);
            point.insert("q".into(), case.q);
            point.insert("t".into(), worst.1);
            Ok(BoundReport::new("gineqest", point, worst.2, worst.3, tolerance))
        })
        .collect();
    for r in reports {
        out.reports.push(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quick(spec: SweepSpec) -> SweepSpec {
        SweepSpec { grid: GridPreset::coarse(), dt: 5e-4, audit_fraction: 0.0, ..spec }
    }

    #[test]
    fn zero_drift_fundamental_point_is_an_equality() {
        let spec = quick(SweepSpec { profiles: vec![GProfile::Zero], bounds: vec!["goodopnorm".into()], ..Default::default() });
        let out = verify_fs_bounds(&spec).unwrap();
        assert_eq!(out.reports.len(), 1);
        let r = &out.reports[0];
        assert_eq!(r.bound, 1.0);
        assert!((r.ratio - 1.0).abs() < 1e-4, "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn scaled_bound_is_below_the_good_bound() {
        let spec = quick(SweepSpec::default());
        let out = verify_fs_bounds(&spec).unwrap();
        let get = |id: &str| out.reports.iter().find(|r| r.bound_id == id).unwrap().clone();
        assert!(get("scaledopnorm").bound < get("goodopnorm").bound);
        assert!(get("scaledopnorm_le_goodopnorm").pass);
        assert!(out.reports.iter().all(|r| r.pass), "{:?}", out.reports);
    }

    #[test]
    fn lp_rejects_large_exponents() {
        let spec = quick(SweepSpec { lambdas: vec![1.5], p_values: vec![1.0, 2.0], ..Default::default() });
        let out = verify_lp(&spec).unwrap();
        assert_eq!(out.reports.len(), 1);
        assert_eq!(out.skipped.len(), 1);
        assert!(out.skipped[0].reason.contains("exceeds 2"));
    }

    #[test]
    fn nonlocal_skips_small_mu1() {
        let spec = quick(SweepSpec { mu1s: vec![1.0], pressure_constants: vec![1.0], ..Default::default() });
        let out = verify_thmbuildmod(&spec).unwrap();
        assert!(out.reports.is_empty());
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn asymmetric_initial_data_is_skipped_as_setup_error() {
        let spec = quick(SweepSpec {
            initial_data: vec![InitialProfile::Gaussian { width: 1.0, center: 0.5 }],
            ..Default::default()
        });
        let out = verify_spcase(&spec).unwrap();
        assert!(out.reports.is_empty());
        assert!(out.skipped[0].reason.contains("condition (S)"), "{:?}", out.skipped);
    }

    #[test]
    fn audit_pairs_refined_reports() {
        let spec = SweepSpec { audit_fraction: 1.0, ..quick(SweepSpec { bounds: vec!["l1bd".into()], ..Default::default() }) };
        let out = verify_keyprop(&spec).unwrap();
        assert_eq!(out.audit.len(), 1);
        assert!(out.audit[0].stable());
        let s = out.summary();
        assert_eq!(s.audited, 1);
        assert!(s.worst.contains_key("l1bd"));
    }

    #[test]
    fn kernel_differences_match_brute_force() {
        let drift = Drift::new(DriftSpec::h_eps(0.5, 0.01)).unwrap();
        let (xi, t, delta, nu) = (0.0, 1.0, 0.5, 1.0);
        let d = kernel_differences(xi, t, delta, nu, &drift, 1e-10);
        assert!(d.converged);
        // midpoint rule on a fine uniform grid
        let n = 400_000;
        let (a, b) = (-30.0, 30.0);
        let h = (b - a) / n as f64;
        let psi = |y: f64| (-y * y / (16.0 * nu * t)).exp() / (16.0 * PI * nu * t).sqrt();
        let dpsi = |y: f64| -y / (8.0 * nu * t) * psi(y);
        let (mut gw, mut vw) = (0.0, 0.0);
        for k in 0..n {
            let s = a + (k as f64 + 0.5) * h;
            gw += (dpsi(xi - s + delta) - dpsi(xi - s)).abs() * drift.value(s).abs() * h;
            vw += (psi(xi - s + delta) - psi(xi - s)).abs() * drift.deriv(s).unwrap().abs() * h;
        }
        assert!((d.gradient_weighted - gw).abs() < 1e-6 * gw, "{} {gw}", d.gradient_weighted);
        assert!((d.value_weighted - vw).abs() < 1e-5 * vw, "{} {vw}", d.value_weighted);
        let mut sup: f64 = 0.0;
        for k in 0..200_001 {
            let y = -10.0 + 1e-4 * k as f64;
            sup = sup.max((psi(y + delta) - psi(y)).abs());
        }
        assert!((d.pointwise - sup).abs() < 1e-8, "{} {sup}", d.pointwise);
    }

    #[test]
    fn kernel_ratios_vanish_as_delta_shrinks() {
        let lattice = KernelLattice { xis: vec![0.5], ts: vec![1.0], deltas: vec![1e-2, 1e-4], gammas: vec![0.5], ..Default::default() };
        let out = verify_kernel_holder(&lattice).unwrap();
        let ratios: Vec<f64> = out.reports.iter().filter(|r| r.bound_id == "wgthdholdgrad").map(|r| r.ratio).collect();
        assert!(ratios[1] < 0.2 * ratios[0], "{ratios:?}");
    }

    #[test]
    fn volterra_solver_matches_exponential_growth() {
        // α = 0, constant h and g: f = h e^{g t}
        let h = CoefficientSeries::constant(1.5, 0.0, 1.0).unwrap();
        let g = CoefficientSeries::constant(0.7, 0.0, 1.0).unwrap();
        let (t, f) = volterra_equality(&h, &g, 0.0, 1.0, 2000).unwrap();
        for (tk, fk) in t.iter().zip(&f) {
            assert!((fk - 1.5 * (0.7 * tk).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn volterra_solver_matches_abel_series() {
        // α = 1/2, h = 1, g = c: f = Σ (cΓ(1/2))^k t^{k/2} / Γ(k/2 + 1) = E_{1/2}(c√π √t)
        let c = 0.4;
        let h = CoefficientSeries::constant(1.0, 0.0, 1.0).unwrap();
        let g = CoefficientSeries::constant(c, 0.0, 1.0).unwrap();
        let (_, f) = volterra_equality(&h, &g, 0.5, 1.0, 4000).unwrap();
        let z = c * PI.sqrt();
        let mut expected = 0.0;
        for k in 0..60 {
            expected += z.powi(k) / libm::tgamma(0.5 * k as f64 + 1.0);
        }
        let got = *f.last().unwrap();
        assert!((got - expected).abs() < 1e-4 * expected, "{got} {expected}");
    }
}
