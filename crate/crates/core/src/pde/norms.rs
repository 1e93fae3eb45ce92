use std::io::Write;

use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub linf: f64,
    pub l1: f64,
    pub lp: Vec<f64>,
}

/// Snapshots of a scalar field plus the norm trail recorded while solving.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionField {
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub p_list: Vec<f64>,
    pub norm_trail: Vec<NormRow>,
    /// (t, sup |V|) after every step, including t0.
    pub sup_trail: Vec<(f64, f64)>,
    /// Net mass that left through the truncation boundary.
    pub boundary_outflow: f64,
}

impl SolutionField {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("field has at least one snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("field has at least one snapshot")
    }

    /// ∫ ‖V(t)‖∞ dt over the whole run by the trapezoid rule on the step trail.
    pub fn sup_time_integral(&self) -> f64 {
        self.sup_trail.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
    }

    pub fn write_values_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "xi", "value"])?;
        for (t, row) in self.times.iter().zip(&self.values) {
            for (x, v) in self.grid.nodes().iter().zip(row) {
                w.write_record([fmt(*t), fmt(*x), fmt(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_norms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "linf".to_string(), "l1".to_string()];
        header.extend(self.p_list.iter().map(|p| format!("lp:{p}")));
        w.write_record(&header)?;
        for row in &self.norm_trail {
            let mut rec = vec![fmt(row.t), fmt(row.linf), fmt(row.l1)];
            rec.extend(row.lp.iter().map(|v| fmt(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form, so CSV output is reproducible bit for bit.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn linf(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn lp(grid: &SpatialGrid, values: &[f64], p: f64) -> f64 {
    let x = grid.nodes();
    let mut acc = 0.0;
    for k in 0..x.len() - 1 {
        let h = x[k + 1] - x[k];
        acc += 0.5 * h * (values[k].abs().powf(p) + values[k + 1].abs().powf(p));
    }
    acc.powf(1.0 / p)
}

pub fn l1(grid: &SpatialGrid, values: &[f64]) -> f64 {
    lp(grid, values, 1.0)
}

/// Signed trapezoid integral.
pub fn integral(grid: &SpatialGrid, values: &[f64]) -> f64 {
    let x = grid.nodes();
    (0..x.len() - 1).map(|k| 0.5 * (x[k + 1] - x[k]) * (values[k] + values[k + 1])).sum()
}

pub fn norm_row(grid: &SpatialGrid, t: f64, values: &[f64], p_list: &[f64]) -> NormRow {
    NormRow {
        t,
        linf: linf(values),
        l1: l1(grid, values),
        lp: p_list.iter().map(|&p| lp(grid, values, p)).collect(),
    }
}

/// Recompute L∞, L¹ and Lᵖ for every stored snapshot.
pub fn field_norms(field: &SolutionField, p_list: &[f64]) -> Vec<NormRow> {
    field
        .times
        .iter()
        .zip(&field.values)
        .map(|(&t, v)| norm_row(&field.grid, t, v, p_list))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub pass: bool,
    pub max_violation: f64,
    pub evenness: f64,
    pub negativity: f64,
    pub monotonicity: f64,
}

/// Evenness, non-negativity and non-increase on [0, L] of one profile.
pub fn check_symmetry_values(grid: &SpatialGrid, values: &[f64], tol: f64) -> Result<SymmetryCheck> {
    let x = grid.nodes();
    let n = x.len();
    if values.len() != n {
        return Err(Error::Setup(format!("{} values for {} nodes", values.len(), n)));
    }
    for k in 0..n / 2 {
        if (x[k] + x[n - 1 - k]).abs() > 1e-12 * x[n - 1].abs() {
            return Err(Error::Setup("symmetry check needs a mirror-symmetric grid".into()));
        }
    }
    let mut evenness: f64 = 0.0;
    for k in 0..n / 2 {
        evenness = evenness.max((values[k] - values[n - 1 - k]).abs());
    }
    let negativity = values.iter().fold(0.0f64, |m, &v| m.max(-v));
    let c = n / 2;
    let mut monotonicity: f64 = 0.0;
    for k in c..n - 1 {
        monotonicity = monotonicity.max(values[k + 1] - values[k]);
    }
    let max_violation = evenness.max(negativity).max(monotonicity);
    Ok(SymmetryCheck { pass: max_violation <= tol, max_violation, evenness, negativity, monotonicity })
}

/// Worst symmetry violation over every stored snapshot.
#[allow(non_snake_case)]
pub fn check_symmetry_S(field: &SolutionField, tol: f64) -> Result<SymmetryCheck> {
    let mut worst = SymmetryCheck { pass: true, max_violation: 0.0, evenness: 0.0, negativity: 0.0, monotonicity: 0.0 };
    for v in &field.values {
        let c = check_symmetry_values(&field.grid, v, tol)?;
        worst.evenness = worst.evenness.max(c.evenness);
        worst.negativity = worst.negativity.max(c.negativity);
        worst.monotonicity = worst.monotonicity.max(c.monotonicity);
        worst.max_violation = worst.max_violation.max(c.max_violation);
    }
    worst.pass = worst.max_violation <= tol;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_and_gaussian_norms() {
        let g = SpatialGrid::uniform(20.0, 4000).unwrap();
        let one = vec![1.0; g.len()];
        assert_relative_eq!(l1(&g, &one), 40.0, max_relative = 1e-13);
        let gauss = g.sample(|x| (-x * x).exp());
        let pi = std::f64::consts::PI;
        assert_relative_eq!(l1(&g, &gauss), pi.sqrt(), max_relative = 1e-9);
        // ∫ e^{−2x²} = √(π/2)
        assert_relative_eq!(lp(&g, &gauss, 2.0), (pi / 2.0).sqrt().sqrt(), max_relative = 1e-9);
        assert_eq!(linf(&gauss), 1.0);
        let zero = vec![0.0; g.len()];
        assert_eq!(l1(&g, &zero), 0.0);
    }

    #[test]
    fn symmetry_examples() {
        let g = SpatialGrid::uniform(5.0, 200).unwrap();
        let even = g.sample(|x| (-x * x).exp());
        assert!(check_symmetry_values(&g, &even, 1e-12).unwrap().pass);
        let odd = g.sample(|x| x * (-x * x).exp());
        let c = check_symmetry_values(&g, &odd, 1e-6).unwrap();
        assert!(!c.pass && c.evenness > 0.1);
        let noisy: Vec<f64> = even
            .iter()
            .enumerate()
            .map(|(k, v)| v + 1e-6 * ((k * 7919 % 13) as f64 / 13.0 - 0.5))
            .collect();
        assert!(check_symmetry_values(&g, &noisy, 1e-5).unwrap().pass);
    }

    #[test]
    fn rejects_asymmetric_grid() {
        let g = SpatialGrid::uniform(1.0, 2).unwrap();
        assert!(check_symmetry_values(&g, &[1.0, 2.0], 1e-6).is_err());
    }
}
