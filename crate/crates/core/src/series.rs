//! Sampled non-negative functions of time with exact quadrature of their interpolants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gl20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Interpolation {
    PiecewiseConstantLeft,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl CoefficientSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Series(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Series("need at least two samples".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Series(format!(
                    "times not strictly increasing at row {}: {} then {}",
                    k + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Series(format!("value {v} at row {k} is negative or non-finite")));
            }
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Series("non-finite time".into()));
        }
        Ok(Self { times, values, interpolation })
    }

    pub fn constant(value: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(vec![t0, t1], vec![value, value], Interpolation::Linear)
    }

    pub fn zero(t0: f64, t1: f64) -> Self {
        Self::constant(0.0, t0, t1).expect("valid zero series")
    }

    /// Sample `f` at `n + 1` equispaced times on [t0, t1].
    pub fn from_fn(
        t0: f64,
        t1: f64,
        n: usize,
        interpolation: Interpolation,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let n = n.max(1);
        let times: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values, interpolation)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Multiply every sample by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.interpolation,
        )
    }

    fn cell(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        }
    }

    /// Interpolated value; constant extension outside the support.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().unwrap();
        }
        let k = self.cell(t);
        match self.interpolation {
            Interpolation::PiecewiseConstantLeft => self.values[k],
            Interpolation::Linear => {
                let (t0, t1) = (self.times[k], self.times[k + 1]);
                let w = (t - t0) / (t1 - t0);
                self.values[k] * (1.0 - w) + self.values[k + 1] * w
            }
        }
    }

    fn check_window(&self, s: f64, t: f64) -> Result<()> {
        if s > t {
            return Err(Error::Domain(format!("window start {s} exceeds end {t}")));
        }
        let tol = 1e-12 * (1.0 + self.end().abs());
        if s < self.start() - tol || t > self.end() + tol {
            return Err(Error::Domain(format!(
                "window [{s}, {t}] leaves the series support [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        Ok(())
    }

    /// Visit each interpolation cell intersected with [s, t] as
    /// (left, right, value at left, slope).
    fn for_each_piece(&self, s: f64, t: f64, mut visit: impl FnMut(f64, f64, f64, f64)) {
        if t <= s {
            return;
        }
        let mut k = self.cell(s);
        let n = self.times.len();
        loop {
            let (c0, c1) = (self.times[k], self.times[k + 1]);
            let lo = s.max(c0);
            let hi = if k == n - 2 { t } else { t.min(c1) };
            if hi > lo {
                let (v0, slope) = match self.interpolation {
                    Interpolation::PiecewiseConstantLeft => (self.values[k], 0.0),
                    Interpolation::Linear => {
                        let m = (self.values[k + 1] - self.values[k]) / (c1 - c0);
                        (self.values[k] + m * (lo - c0), m)
                    }
                };
                visit(lo, hi, v0, slope);
            }
            if hi >= t || k == n - 2 {
                break;
            }
            k += 1;
        }
    }

    /// Exact integral of the interpolant over [s, t].
    pub fn integral(&self, s: f64, t: f64) -> Result<f64> {
        self.check_window(s, t)?;
        let mut acc = 0.0;
        self.for_each_piece(s, t, |lo, hi, v0, m| {
            let h = hi - lo;
            acc += h * (v0 + 0.5 * m * h);
        });
        Ok(acc)
    }

    /// Exact value of the weakly singular integral ∫_s^t (t - r)^kappa g(r) dr, kappa > -1.
    pub fn singular_weight_integral(&self, s: f64, t: f64, kappa: f64) -> Result<f64> {
        self.check_window(s, t)?;
        if kappa <= -1.0 {
            return Err(Error::Domain(format!("weight exponent {kappa} is not integrable")));
        }
        let mut acc = 0.0;
        let p1 = kappa + 1.0;
        let p2 = kappa + 2.0;
        self.for_each_piece(s, t, |lo, hi, v0, m| {
            // on the piece g(r) = v0 + m (r - lo) = (v0 + m (t - lo)) - m (t - r)
            let a = t - lo;
            let b = t - hi;
            let i1 = (a.powf(p1) - b.max(0.0).powf(p1)) / p1;
            let i2 = (a.powf(p2) - b.max(0.0).powf(p2)) / p2;
            acc += (v0 + m * a) * i1 - m * i2;
        });
        Ok(acc)
    }

    /// ∫_s^t g(r)^q dr (exact for piecewise constant, 20-point Gauss per piece otherwise).
    pub fn power_integral(&self, s: f64, t: f64, q: f64) -> Result<f64> {
        self.check_window(s, t)?;
        let mut acc = 0.0;
        self.for_each_piece(s, t, |lo, hi, v0, m| {
            if m == 0.0 {
                acc += (hi - lo) * v0.powf(q);
            } else {
                acc += gl20().integrate(lo, hi, |r| (v0 + m * (r - lo)).max(0.0).powf(q));
            }
        });
        Ok(acc)
    }

    /// Breakpoints of the interpolant inside (s, t), including s and t.
    pub fn knots_in(&self, s: f64, t: f64) -> Vec<f64> {
        let mut out = vec![s];
        out.extend(self.times.iter().cloned().filter(|&x| x > s && x < t));
        out.push(t);
        out
    }
}
