//! Dense-tableau primal simplex for small problems of the form
//! `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`, so the slack basis is
//! feasible from the start. Bland's rule prevents cycling.

use thiserror::Error;

const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow prices of the `<=` rows (non-negative at optimality).
    pub duals: Vec<f64>,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(LpError::Malformed("constraint matrix shape".into()));
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(LpError::Malformed("right-hand side must be non-negative".into()));
    }
    let width = n + m + 1;
    let rhs = width - 1;
    let mut data = vec![0.0; (m + 1) * width];
    for r in 0..m {
        data[r * width..r * width + n].copy_from_slice(&a[r]);
        data[r * width + n + r] = 1.0;
        data[r * width + rhs] = b[r];
    }
    for (j, cj) in c.iter().enumerate() {
        data[m * width + j] = -cj;
    }
    let mut t = Tableau {
        rows: m,
        width,
        data,
        basis: (n..n + m).collect(),
    };

    let limit = 200 * (n + m) + 10_000;
    let mut pivots = 0;
    loop {
        let entering = (0..n + m).find(|&col| t.at(m, col) < -PIVOT_TOLERANCE);
        let Some(pc) = entering else { break };
        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..m {
            let coef = t.at(r, pc);
            if coef > PIVOT_TOLERANCE {
                let ratio = t.at(r, rhs) / coef;
                leaving = match leaving {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_TOLERANCE
                            || (ratio <= lratio + PIVOT_TOLERANCE && t.basis[r] < t.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leaving else {
            return Err(LpError::Unbounded);
        };
        t.pivot(pr, pc);
        pivots += 1;
        if pivots > limit {
            return Err(LpError::IterationLimit(limit));
        }
    }

    let mut x = vec![0.0; n];
    for (r, &var) in t.basis.iter().enumerate() {
        if var < n {
            x[var] = t.at(r, rhs).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    let duals = (0..m).map(|r| t.at(m, n + r).max(0.0)).collect();
    Ok(LpSolution {
        x,
        objective,
        duals,
    })
}
