//! Upper concave envelope of a pointwise maximum of phase functions
//! `f_φ(x) = cos φ (cos²Θ − x) + ½ sin 2Θ |sin φ| √(1 − x²)` on `[−1, 1]`.
//!
//! Each member has the closed-form concave conjugate
//! `c(s) = sup_x f(x) − s·x = A + √((B + s)² + D²)`, so the envelope is
//! `inf_s [max_i c_i(s) + s·x]`. Sweeping the slope `s` and locating where the
//! maximizing member changes gives the envelope as an ordered list of exact
//! member segments joined by common-tangent bridges.

use serde::Serialize;

use crate::error::{Error, Result};

/// `f_φ` for a fixed separation angle, stored as `A − B·x + D·√(1 − x²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFunction {
    pub phi: f64,
    a: f64,
    b: f64,
    d: f64,
}

impl PhaseFunction {
    pub fn new(phi: f64, theta: f64) -> Self {
        let (cp, sp) = (phi.cos(), phi.sin());
        Self { phi, a: cp * theta.cos().powi(2), b: cp, d: 0.5 * (2.0 * theta).sin() * sp.abs() }
    }

    /// Evaluate at `x`, clamped into `[−1, 1]`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        self.a - self.b * x + self.d * (1.0 - x * x).max(0.0).sqrt()
    }

    #[inline]
    fn conjugate(&self, s: f64) -> f64 {
        self.a + (self.b + s).hypot(self.d)
    }

    /// Point where the tangent has slope `s`.
    #[inline]
    fn tangent_point(&self, s: f64) -> f64 {
        let t = self.b + s;
        let r = t.hypot(self.d);
        if r == 0.0 {
            0.0
        } else {
            -t / r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Piece {
    /// The envelope follows member `member` on `[lo, hi]`.
    Member { member: usize, lo: f64, hi: f64 },
    /// Common tangent `y = intercept + slope·x` on `[lo, hi]`.
    Bridge { lo: f64, hi: f64, slope: f64, intercept: f64 },
}

impl Piece {
    fn hi(&self) -> f64 {
        match *self {
            Piece::Member { hi, .. } | Piece::Bridge { hi, .. } => hi,
        }
    }
}

/// Concave envelope of the "good" phase functions `f_{(K−1)Θ}, f_{(K−3)Θ}, …`.
#[derive(Debug, Clone, Serialize)]
pub struct GoodEnvelope {
    pub members: Vec<PhaseFunction>,
    pub pieces: Vec<Piece>,
}

const SWEEP_SAMPLES: usize = 20_000;

/// `cos((K−1)Θ)` at or below this is treated as zero.
pub const COS_FLOOR: f64 = 1e-12;

impl GoodEnvelope {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParams("K must be at least 1".into()));
        }
        if !(((k - 1) as f64 * theta).cos() > COS_FLOOR) || !(theta > 0.0) {
            return Err(Error::InvalidParams(format!("cos((K-1)Θ) must be positive (K = {k}, Θ = {theta})")));
        }
        let members = (0..k)
            .rev()
            .step_by(2)
            .map(|mult| PhaseFunction::new(mult as f64 * theta, theta))
            .collect();
        Ok(Self::from_members(members))
    }

    /// Envelope of an arbitrary set of phase functions.
    pub fn from_members(members: Vec<PhaseFunction>) -> Self {
        assert!(!members.is_empty(), "envelope of an empty family");
        let conj_max = |s: f64| -> (usize, f64) {
            let mut best = (0, members[0].conjugate(s));
            for (i, m) in members.iter().enumerate().skip(1) {
                let v = m.conjugate(s);
                if v > best.1 {
                    best = (i, v);
                }
            }
            best
        };

        // Sweep slopes from +∞ to −∞, i.e. tangent points from x = −1 to x = 1.
        let half_pi = std::f64::consts::FRAC_PI_2;
        let slope_at = |i: usize| {
            let tau = half_pi * (1.0 - 2.0 * i as f64 / SWEEP_SAMPLES as f64) * (1.0 - 1e-9);
            tau.tan()
        };
        let mut crossings: Vec<(usize, usize, f64)> = Vec::new();
        let mut s_prev = slope_at(0);
        let mut current = conj_max(s_prev).0;
        for i in 1..=SWEEP_SAMPLES {
            let s = slope_at(i);
            let next = conj_max(s).0;
            if next != current {
                // Bisect c_current − c_next on [s, s_prev].
                let (mut hi, mut lo) = (s_prev, s);
                for _ in 0..200 {
                    let mid = 0.5 * (hi + lo);
                    if mid == hi || mid == lo {
                        break;
                    }
                    if members[current].conjugate(mid) >= members[next].conjugate(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                crossings.push((current, next, 0.5 * (hi + lo)));
                current = next;
            }
            s_prev = s;
        }

        let mut pieces = Vec::new();
        let mut x_start = -1.0;
        let mut member = conj_max(slope_at(0)).0;
        for &(from, to, s) in &crossings {
            debug_assert_eq!(from, member);
            let x_from = members[from].tangent_point(s).max(x_start);
            let x_to = members[to].tangent_point(s).max(x_from);
            if x_from > x_start {
                pieces.push(Piece::Member { member: from, lo: x_start, hi: x_from });
            }
            if x_to > x_from {
                pieces.push(Piece::Bridge {
                    lo: x_from,
                    hi: x_to,
                    slope: s,
                    intercept: members[from].conjugate(s).max(members[to].conjugate(s)),
                });
            }
            x_start = x_to;
            member = to;
        }
        if x_start < 1.0 || pieces.is_empty() {
            pieces.push(Piece::Member { member, lo: x_start, hi: 1.0 });
        }
        Self { members, pieces }
    }

    /// Envelope value at `x ∈ [−1, 1]` (clamped).
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        let idx = self.pieces.partition_point(|p| p.hi() < x).min(self.pieces.len() - 1);
        match self.pieces[idx] {
            Piece::Member { member, .. } => self.members[member].eval(x),
            Piece::Bridge { slope, intercept, .. } => intercept + slope * x,
        }
    }

    /// Pointwise maximum of the members (no hull).
    pub fn member_max(&self, x: f64) -> f64 {
        self.members.iter().map(|m| m.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Independent route: upper hull of a fine sampling of the member maximum.
    fn sampled_hull(env: &GoodEnvelope, n: usize) -> Vec<(f64, f64)> {
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let y = env.member_max(x);
            while hull.len() >= 2 {
                let (x1, y1) = hull[hull.len() - 2];
                let (x2, y2) = hull[hull.len() - 1];
                if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((x, y));
        }
        hull
    }

    fn interp(hull: &[(f64, f64)], x: f64) -> f64 {
        let i = hull.partition_point(|p| p.0 < x).clamp(1, hull.len() - 1);
        let (x0, y0) = hull[i - 1];
        let (x1, y1) = hull[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    #[test]
    fn single_member_is_its_own_envelope() {
        let env = GoodEnvelope::new(2, PI / 4.0).unwrap();
        assert_eq!(env.members.len(), 1);
        for i in 0..=100 {
            let x = -1.0 + 0.02 * i as f64;
            assert!((env.eval(x) - env.members[0].eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(GoodEnvelope::new(0, 0.3).is_err());
        assert!(GoodEnvelope::new(3, PI / 4.0).is_err());
    }

    #[test]
    fn matches_sampled_hull() {
        for (k, theta) in [(3, PI / 6.0), (3, PI / 5.0), (4, PI / 12.0), (5, PI / 9.0), (4, 0.4)] {
            let env = GoodEnvelope::new(k, theta).unwrap();
            let hull = sampled_hull(&env, 400_000);
            for i in 0..=1000 {
                let x = -0.99 + 1.98 * i as f64 / 1000.0;
                let a = env.eval(x);
                let b = interp(&hull, x);
                assert!((a - b).abs() < 1e-8, "K={k} Θ={theta} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dominates_members_and_is_concave() {
        for (k, theta) in [(3, PI / 6.0), (4, PI / 12.0), (5, 0.3)] {
            let env = GoodEnvelope::new(k, theta).unwrap();
            for i in 0..=2000 {
                let x = -1.0 + 0.001 * i as f64;
                for m in &env.members {
                    assert!(env.eval(x) >= m.eval(x) - 1e-12);
                }
            }
            for i in 0..500 {
                let a = -1.0 + (i as f64 * 0.7548776662).fract() * 2.0;
                let b = -1.0 + (i as f64 * 0.5698402910).fract() * 2.0;
                let mid = env.eval(0.5 * (a + b));
                assert!(mid >= 0.5 * (env.eval(a) + env.eval(b)) - 1e-12);
            }
        }
    }
}
