//! Adaptive Gauss–Legendre integration on finite intervals.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, ElfError, Result};

const ORDER: usize = 20;
const MAX_DEPTH: u32 = 48;
const MAX_PANELS: usize = 1 << 16;

/// Nodes and weights on [−1, 1] from Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// ∫_a^b f with absolute tolerance `tol`, bisecting panels whose two-half estimate
/// disagrees with the whole-panel estimate. Panels are visited in a fixed order.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(invalid(format!("bad integration interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let total_width = b - a;
    let mut stack = vec![(a, b, panel(f, a, b), 0u32)];
    let mut sum = 0.0;
    let mut unresolved = 0.0;
    let mut panels = 0usize;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(f, lo, mid);
        let right = panel(f, mid, hi);
        let err = (left + right - whole).abs();
        let budget = tol * (hi - lo) / total_width;
        panels += 1;
        if err <= budget || depth >= MAX_DEPTH || panels >= MAX_PANELS {
            if err > budget {
                unresolved += err;
            }
            sum += left + right;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    if unresolved > tol {
        return Err(ElfError::Numeric {
            message: format!("quadrature on [{a}, {b}] did not converge"),
            estimate: unresolved,
        });
    }
    Ok(sum)
}
