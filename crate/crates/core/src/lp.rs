//! Dense two-phase simplex for small linear programs.
//!
//! Solves `maximize cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.
//! Pivoting follows Bland's rule (lowest eligible index for both the entering
//! and the leaving variable), so the method terminates on degenerate problems
//! and gives identical results on every run.

/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-9;
/// Smallest reduced cost that counts as an improvement.
const COST_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-10;
/// Largest constraint residual accepted in the returned point.
const RESIDUAL_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ub_rows: Vec<(Vec<f64>, f64)>,
    pub eq_rows: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpFailure {
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The final point violates a constraint by more than the residual tolerance.
    Numerical,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn less_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        debug_assert_eq!(row.len(), self.num_vars());
        self.ub_rows.push((row, rhs));
        self
    }

    pub fn equal(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        debug_assert_eq!(row.len(), self.num_vars());
        self.eq_rows.push((row, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpFailure> {
        let solution = Tableau::build(self).solve(&self.objective)?;
        if self.residual(&solution.x) > RESIDUAL_TOL {
            return Err(LpFailure::Numerical);
        }
        Ok(solution)
    }

    /// Largest violation of any constraint at `x` (including `x ≥ 0`).
    pub fn residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let ub = self.ub_rows.iter().map(|(row, rhs)| dot(row) - rhs);
        let eq = self.eq_rows.iter().map(|(row, rhs)| (dot(row) - rhs).abs());
        ub.chain(eq).chain(x.iter().map(|v| -v)).fold(0.0, f64::max)
    }
}

struct Tableau {
    /// Constraint rows; the last entry of each row is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    /// Columns `>= first_artificial` are artificial.
    first_artificial: usize,
    n_cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let n_slack = lp.ub_rows.len();
        let m = n_slack + lp.eq_rows.len();

        // Orient every row so that its right-hand side is nonnegative.
        let mut oriented: Vec<(Vec<f64>, f64, Option<f64>)> = Vec::with_capacity(m);
        for (row, rhs) in &lp.ub_rows {
            if *rhs >= 0.0 {
                oriented.push((row.clone(), *rhs, Some(1.0)));
            } else {
                oriented.push((row.iter().map(|v| -v).collect(), -rhs, Some(-1.0)));
            }
        }
        for (row, rhs) in &lp.eq_rows {
            if *rhs >= 0.0 {
                oriented.push((row.clone(), *rhs, None));
            } else {
                oriented.push((row.iter().map(|v| -v).collect(), -rhs, None));
            }
        }

        let needs_artificial: Vec<bool> = oriented.iter().map(|(_, _, s)| *s != Some(1.0)).collect();
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art = first_artificial;
        for (i, (coeffs, rhs, slack)) in oriented.into_iter().enumerate() {
            let mut row = vec![0.0; n_cols + 1];
            row[..n].copy_from_slice(&coeffs);
            if let Some(sign) = slack {
                row[n + i] = sign;
            }
            if needs_artificial[i] {
                row[art] = 1.0;
                basis.push(art);
                art += 1;
            } else {
                basis.push(n + i);
            }
            row[n_cols] = rhs;
            rows.push(row);
        }
        Self { rows, basis, n_orig: n, first_artificial, n_cols }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_cols]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Run simplex iterations for `cost` restricted to columns below `col_limit`.
    fn optimize(&mut self, cost: &[f64], col_limit: usize) -> Result<(), LpFailure> {
        for _ in 0..MAX_PIVOTS {
            // Reduced costs c_j − c_Bᵀ B⁻¹ A_j, lowest eligible index enters.
            let entering = (0..col_limit).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let zj: f64 = self.rows.iter().zip(&self.basis).map(|(row, &b)| cost[b] * row[j]).sum();
                cost[j] - zj > COST_TOL
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpFailure::Unbounded);
            };
            self.pivot(r, col);
        }
        Err(LpFailure::IterationLimit)
    }

    fn solve(mut self, objective: &[f64]) -> Result<LpSolution, LpFailure> {
        if self.first_artificial < self.n_cols {
            let mut phase1 = vec![0.0; self.n_cols];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.optimize(&phase1, self.n_cols)?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(i, _)| self.rhs(i))
                .sum();
            if infeasibility > FEASIBILITY_TOL {
                return Err(LpFailure::Infeasible);
            }
            // Drive remaining (zero-valued) artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.first_artificial {
                    let replacement = (0..self.first_artificial)
                        .filter(|&j| self.rows[i][j].abs() > PIVOT_TOL)
                        .max_by(|&a, &b| self.rows[i][a].abs().total_cmp(&self.rows[i][b].abs()).then(b.cmp(&a)));
                    match replacement {
                        Some(j) => {
                            self.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        let mut cost = vec![0.0; self.n_cols];
        cost[..self.n_orig].copy_from_slice(objective);
        self.optimize(&cost, self.first_artificial)?;

        let mut x = vec![0.0; self.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let value = x.iter().zip(objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(vec![3.0, 5.0]);
        lp.less_eq(vec![1.0, 0.0], 4.0).less_eq(vec![0.0, 2.0], 12.0).less_eq(vec![3.0, 2.0], 18.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equalities_and_negative_rhs() {
        // max x − y, x + y = 1, x − y ≤ −0.5 → x = 0.25, y = 0.75
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.equal(vec![1.0, 1.0], 1.0).less_eq(vec![1.0, -1.0], -0.5);
        let s = lp.solve().unwrap();
        assert!((s.value + 0.5).abs() < 1e-12, "{s:?}");
        assert!((s.x[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.equal(vec![1.0], 1.0).less_eq(vec![1.0], 0.5);
        assert_eq!(lp.solve(), Err(LpFailure::Infeasible));
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.less_eq(vec![-1.0, 1.0], 1.0);
        assert_eq!(lp.solve(), Err(LpFailure::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 0.0]);
        lp.equal(vec![1.0, 1.0, 1.0], 1.0).equal(vec![2.0, 2.0, 2.0], 2.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.less_eq(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .less_eq(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .less_eq(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 0.05).abs() < 1e-12, "{s:?}");
    }
}
