//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Every accepted step satisfies the sufficient-decrease condition, so the
//! recorded objective history is non-increasing.

use std::collections::VecDeque;

/// Largest gradient component accepted when the line search gives up.
pub const LINE_SEARCH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    /// Correction pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Stop after `stall_iterations` steps each improving by less than
    /// this (relative).
    pub value_tolerance: f64,
    pub stall_iterations: usize,
    /// Armijo and curvature constants.
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 12,
            max_iterations: 3000,
            gradient_tolerance: 1e-9,
            value_tolerance: 1e-15,
            stall_iterations: 8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Stalled,
    LineSearch,
    MaxIterations,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective after each accepted iteration, starting with the initial value.
    pub history: Vec<f64>,
}

impl OptimResult {
    pub fn gradient_norm(&self) -> f64 {
        norm(&self.gradient)
    }

    /// A line search that fails with the gradient already at this level has
    /// hit the floating-point floor of the objective and counts as converged.
    pub fn converged(&self) -> bool {
        match self.termination {
            Termination::Gradient | Termination::Stalled => true,
            Termination::LineSearch => self.gradient.iter().all(|g| g.abs() <= LINE_SEARCH_FLOOR),
            Termination::MaxIterations | Termination::NonFinite => false,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimizes `f`, which returns the value and writes the gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut stalled = 0;
    let finish = |x, value, gradient, iterations, evaluations, termination, history| OptimResult {
        x,
        value,
        gradient,
        iterations,
        evaluations,
        termination,
        history,
    };

    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, fx, g, 0, evaluations, Termination::NonFinite, history);
    }

    for iter in 0..opts.max_iterations {
        if max_abs(&g) <= opts.gradient_tolerance {
            return finish(x, fx, g, iter, evaluations, Termination::Gradient, history);
        }
        let mut d = two_loop(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if pairs.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };

        let probe = line_search(&mut f, &x, fx, slope, &d, alpha0, opts, &mut evaluations);
        let Some(p) = probe else {
            return finish(x, fx, g, iter, evaluations, Termination::LineSearch, history);
        };
        if !p.value.is_finite() {
            return finish(x, fx, g, iter, evaluations, Termination::NonFinite, history);
        }

        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let improvement = fx - p.value;
        x = p.x;
        g = p.grad;
        fx = p.value;
        history.push(fx);

        if improvement <= opts.value_tolerance * fx.abs().max(1.0) {
            stalled += 1;
            if stalled >= opts.stall_iterations {
                return finish(x, fx, g, iter + 1, evaluations, Termination::Stalled, history);
            }
        } else {
            stalled = 0;
        }
    }
    let iterations = opts.max_iterations;
    let termination =
        if max_abs(&g) <= opts.gradient_tolerance { Termination::Gradient } else { Termination::MaxIterations };
    finish(x, fx, g, iterations, evaluations, termination, history)
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    opts: &LbfgsOptions,
    evaluations: &mut usize,
) -> Option<Probe>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut eval = |alpha: f64| {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let mut ga = vec![0.0; x.len()];
        let va = f(&xa, &mut ga);
        *evaluations += 1;
        let slope = dot(&ga, d);
        Probe { alpha, value: va, slope, x: xa, grad: ga }
    };
    let armijo = |p: &Probe| p.value <= f0 + opts.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -opts.c2 * slope0;

    let mut prev = Probe { alpha: 0.0, value: f0, slope: slope0, x: x.to_vec(), grad: Vec::new() };
    let mut alpha = alpha0;
    for i in 0..opts.max_line_search {
        let p = eval(alpha);
        if !p.value.is_finite() {
            // Step into a region where the objective is undefined: shrink.
            alpha *= 0.1;
            continue;
        }
        if !armijo(&p) || (i > 0 && p.value >= prev.value) {
            return zoom(&mut eval, prev, p, f0, slope0, opts);
        }
        if curvature(&p) {
            return Some(p);
        }
        if p.slope >= 0.0 {
            return zoom(&mut eval, p, prev, f0, slope0, opts);
        }
        prev = p;
        alpha *= 2.0;
    }
    (prev.alpha > 0.0).then_some(prev)
}

/// `lo` satisfies sufficient decrease and has the lowest value seen.
fn zoom<E>(eval: &mut E, mut lo: Probe, mut hi: Probe, f0: f64, slope0: f64, opts: &LbfgsOptions) -> Option<Probe>
where
    E: FnMut(f64) -> Probe,
{
    for _ in 0..opts.max_line_search {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1.0) {
            break;
        }
        let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        let p = eval(alpha);
        if !p.value.is_finite() || p.value > f0 + opts.c1 * alpha * slope0 || p.value >= lo.value {
            hi = p;
        } else {
            if p.slope.abs() <= -opts.c2 * slope0 {
                return Some(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    (lo.alpha > 0.0).then_some(lo)
}

/// Minimizer of the cubic through two points with slopes.
fn cubic_min(p: &Probe, q: &Probe) -> Option<f64> {
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let alpha = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    alpha.is_finite().then_some(alpha)
}

/// Central-difference gradient.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
