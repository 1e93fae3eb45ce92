/// Tridiagonal matrix stored by diagonals; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![1.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// I + scale * self.
    pub fn shifted_identity(&self, scale: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 + scale * v).collect(),
            upper: self.upper.iter().map(|v| scale * v).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Tridiagonal, scale: f64) {
        for i in 0..self.len() {
            self.lower[i] += scale * other.lower[i];
            self.diag[i] += scale * other.diag[i];
            self.upper[i] += scale * other.upper[i];
        }
    }

    /// Replace row i by the identity row.
    pub fn pin_row(&mut self, i: usize) {
        self.lower[i] = 0.0;
        self.diag[i] = 1.0;
        self.upper[i] = 0.0;
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.upper[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.lower[i + 1] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Self::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 1..n {
            t.lower[i] = self.upper[i - 1];
            t.upper[i - 1] = self.lower[i];
        }
        t
    }

    /// Thomas algorithm; the matrix must be diagonally dominant.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut m = self.diag[0];
        c[0] = self.upper[0] / m;
        d[0] = rhs[0] / m;
        for i in 1..n {
            m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / m } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / m;
        }
        out[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            out[i] = d[i] - c[i] * out[i + 1];
        }
    }

    /// max |A x − rhs|.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut tmp = vec![0.0; x.len()];
        self.apply(x, &mut tmp);
        tmp.iter().zip(rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tridiagonal {
        Tridiagonal {
            lower: vec![0.0, -1.0, -0.5, -2.0],
            diag: vec![4.0, 5.0, 3.0, 6.0],
            upper: vec![-1.0, -2.0, -0.25, 0.0],
        }
    }

    #[test]
    fn solve_inverts_apply() {
        let a = sample();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        a.apply(&x, &mut b);
        let mut y = [0.0; 4];
        a.solve(&b, &mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_matches_dense() {
        let a = sample();
        let v = [0.3, 1.0, -1.0, 2.0];
        let mut p = [0.0; 4];
        let mut q = [0.0; 4];
        a.apply_transpose(&v, &mut p);
        a.transpose().apply(&v, &mut q);
        assert_eq!(p, q);
        // dense check of one entry: (Aᵀ v)_0 = a00 v0 + a10 v1
        assert!((p[0] - (4.0 * 0.3 - 1.0 * 1.0)).abs() < 1e-15);
    }
}
