//! One-dimensional search helpers shared by the optimizers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]`, stopping when the bracket
/// is narrower than `x_tol`. Both endpoints are evaluated explicitly, so a
/// maximum sitting on the boundary is never lost. Returns `(argmax, max)`.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let mut best = (lo, f(lo));
    let f_hi = f(hi);
    if f_hi > best.1 {
        best = (hi, f_hi);
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > x_tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Evaluate `f` on `n ≥ 2` evenly spaced points of `[lo, hi]` and refine the
/// best one by golden section on its neighbouring cells.
pub(crate) fn scan_then_golden(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, n: usize, x_tol: f64) -> (f64, f64) {
    let n = n.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = if best_i + 1 >= n - 1 { hi } else { lo + step * (best_i + 1) as f64 };
    let x_best = if best_i == n - 1 { hi } else { lo + step * best_i as f64 };
    let refined = golden_max(&mut f, a, b, x_tol);
    if refined.1 >= best_v {
        refined
    } else {
        (x_best, best_v)
    }
}
