//! Dense two-phase simplex for `min cᵀz` subject to `Az = b`, `z ≥ 0`.
//!
//! Pivoting follows Bland's rule, so the method terminates without cycling.
//! Problems here have a few dozen rows at most.

const EPS: f64 = 1e-11;
const FEASIBILITY_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { z: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        *self.rows[r].last().expect("nonempty row")
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut()
                    .zip(&pivot_row)
                    .for_each(|(v, q)| *v -= f * q);
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            self.obj
                .iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, q)| *v -= f * q);
        }
        self.basis[r] = col;
    }

    /// Price out the basic columns of `cost` into the objective row.
    fn set_objective(&mut self, cost: &[f64]) {
        let width = self.rows[0].len();
        let mut obj = vec![0.0; width];
        obj[..cost.len()].copy_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = obj[b];
            if cb != 0.0 {
                obj.iter_mut()
                    .zip(&self.rows[r])
                    .for_each(|(v, q)| *v -= cb * q);
            }
        }
        self.obj = obj;
    }

    /// Returns `false` if the objective is unbounded below.
    fn optimize(&mut self, allowed: usize) -> bool {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < -EPS) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[col] > EPS {
                    let ratio = self.rhs(r) / row[col];
                    let better = match best {
                        None => true,
                        Some((q, _, b)) => {
                            ratio < q - EPS || (ratio <= q + EPS && self.basis[r] < b)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                Some((_, r, _)) => self.pivot(r, col),
                None => return false,
            }
        }
        true
    }
}

/// Solve `min cᵀz` s.t. `Az = b`, `z ≥ 0`.
pub(crate) fn solve_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    if m == 0 {
        return if c.iter().any(|v| *v < 0.0) {
            LpOutcome::Unbounded
        } else {
            LpOutcome::Optimal {
                z: vec![0.0; n],
                value: 0.0,
            }
        };
    }
    // columns: n originals, m artificials, rhs
    let rows: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, &bi))| {
            let sign = if bi < 0.0 { -1.0 } else { 1.0 };
            let mut out: Vec<f64> = row.iter().map(|v| sign * v).collect();
            out.extend((0..m).map(|j| if j == i { 1.0 } else { 0.0 }));
            out.push(sign * bi);
            out
        })
        .collect();
    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis: (n..n + m).collect(),
    };
    let mut phase_one = vec![0.0; n + m];
    phase_one[n..].iter_mut().for_each(|v| *v = 1.0);
    t.set_objective(&phase_one);
    t.optimize(n + m);
    let infeasibility = -t.obj[n + m];
    if infeasibility > FEASIBILITY_EPS {
        return LpOutcome::Infeasible;
    }
    // move artificials out of the basis where a structural pivot exists
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.rows[r][j].abs() > EPS) {
                t.pivot(r, col);
            }
        }
    }
    t.set_objective(c);
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut z = vec![0.0; n];
    for (r, &bcol) in t.basis.iter().enumerate() {
        if bcol < n {
            z[bcol] = t.rhs(r).max(0.0);
        }
    }
    let value = c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum();
    LpOutcome::Optimal { z, value }
}
