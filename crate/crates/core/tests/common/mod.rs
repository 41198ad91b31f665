//! Independent oracles shared by the integration tests. Nothing here calls the
//! crate's optimizers or its simplex solver.

#![allow(dead_code)]

use rayon::prelude::*;

pub fn f_phi(phi: f64, theta: f64, x: f64) -> f64 {
    phi.cos() * (theta.cos().powi(2) - x) + 0.5 * (2.0 * theta).sin() * phi.sin().abs() * (1.0 - x * x).max(0.0).sqrt()
}

pub fn w(x: f64) -> f64 {
    1.0 - (1.0 - x * x).max(0.0).sqrt()
}

/// Finite phase-error problem written out from scratch.
#[derive(Debug, Clone)]
pub struct BoundData {
    pub m: usize,
    pub theta: f64,
    pub phi_prime: f64,
    pub x_target: f64,
    pub r_con: f64,
    pub budget: Vec<f64>,
}

impl BoundData {
    pub fn coefficient(&self, k: usize, x: f64) -> f64 {
        f_phi(2.0 * (k as f64 * self.theta + self.phi_prime), self.theta, x) / (2.0 * self.m as f64)
    }

    pub fn bound(&self, p: &[f64], xs: &[f64]) -> f64 {
        self.r_con / 2.0 + (0..self.m).map(|k| p[k] * self.coefficient(k, xs[k])).sum::<f64>()
    }

    pub fn violation(&self, p: &[f64], xs: &[f64]) -> f64 {
        let m = self.m;
        let mut worst = (p.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max((p.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>() - self.x_target).abs());
        for k in 0..m {
            let prev = (k + m - 1) % m;
            worst = worst.max(-p[k]).max(xs[k].abs() - 1.0);
            worst = worst.max(p[k] * w(xs[k]) + p[prev] * w(xs[prev]) - self.budget[k]);
        }
        worst.max(0.0)
    }

    /// Exact LP over `p` at fixed `xs` by enumerating basic solutions.
    pub fn lp_by_vertices(&self, xs: &[f64]) -> Option<f64> {
        let m = self.m;
        let eq: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; m], 1.0), (xs.to_vec(), self.x_target)];
        let mut ineq: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|k| {
                let mut row = vec![0.0; m];
                row[k] = -1.0;
                (row, 0.0)
            })
            .collect();
        for k in 0..m {
            // Rows with budget ≥ 1 cannot bind since p_k + p_{k−1} ≤ 1.
            if self.budget[k] < 1.0 {
                let prev = (k + m - 1) % m;
                let mut row = vec![0.0; m];
                row[k] += w(xs[k]);
                row[prev] += w(xs[prev]);
                ineq.push((row, self.budget[k]));
            }
        }
        let obj: Vec<f64> = (0..m).map(|k| self.coefficient(k, xs[k])).collect();
        let mut best: Option<f64> = None;
        for size in m.saturating_sub(2)..=m {
            for subset in subsets(ineq.len(), size) {
                let rows: Vec<&(Vec<f64>, f64)> = eq.iter().chain(subset.iter().map(|&i| &ineq[i])).collect();
                let Some(p) = solve_square(&rows, m) else { continue };
                let feasible = eq.iter().all(|(r, b)| (dot(r, &p) - b).abs() <= 1e-10)
                    && ineq.iter().all(|(r, b)| dot(r, &p) - b <= 1e-10);
                if feasible {
                    let v = dot(&obj, &p);
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
        best
    }

    /// Exhaustive grid over `{X_k}` with the given step; returns the best bound.
    pub fn grid_value(&self, step: f64) -> Option<f64> {
        let n = (2.0 / step).round() as usize + 1;
        let total = n.pow(self.m as u32);
        (0..total)
            .into_par_iter()
            .filter_map(|mut idx| {
                let xs: Vec<f64> = (0..self.m)
                    .map(|_| {
                        let v = -1.0 + step * (idx % n) as f64;
                        idx /= n;
                        v.clamp(-1.0, 1.0)
                    })
                    .collect();
                self.lp_by_vertices(&xs)
            })
            .reduce_with(f64::max)
            .map(|v| self.r_con / 2.0 + v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Unique solution of the (possibly overdetermined) system, if the rows have full column rank.
fn solve_square(rows: &[&(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = rows.iter().map(|(r, b)| r.iter().copied().chain([*b]).collect()).collect();
    let mut pivot_rows = Vec::new();
    let mut used = vec![false; a.len()];
    for col in 0..n {
        let (best, mag) = (0..a.len())
            .filter(|&i| !used[i])
            .map(|i| (i, a[i][col].abs()))
            .fold((usize::MAX, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best == usize::MAX || mag < 1e-12 {
            return None;
        }
        used[best] = true;
        pivot_rows.push(best);
        let pr = a[best].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != best {
                let f = row[col] / pr[col];
                for (v, pv) in row.iter_mut().zip(&pr) {
                    *v -= f * pv;
                }
            }
        }
    }
    Some((0..n).map(|col| a[pivot_rows[col]][n] / a[pivot_rows[col]][col]).collect())
}

/// Sample (Bessel-free) two-proportion z for counts drawn from one multinomial.
pub fn multinomial_difference_z(k1: u64, k2: u64, n: u64) -> f64 {
    let (p1, p2) = (k1 as f64 / n as f64, k2 as f64 / n as f64);
    let var = (p1 + p2 - (p1 - p2).powi(2)) / n as f64;
    if var > 0.0 {
        (p1 - p2) / var.sqrt()
    } else {
        0.0
    }
}
