//! Projected-gradient ascent on products of probability simplices.
//!
//! Variables are stored as one flat vector split into consecutive blocks,
//! each block a pmf. A [`Program`] supplies an objective and a single
//! constraint `con(x) >= d`; [`solve_point`] handles the constraint with an
//! exterior quadratic penalty followed by a feasibility polish.

use crate::rng::{flat_dirichlet, stream, Purpose};

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let k = v.len();
    if k == 0 {
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // renormalize away the last ulp of drift
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

pub fn project_blocks(x: &mut [f64], blocks: &[usize]) {
    let mut off = 0;
    for &b in blocks {
        project_simplex(&mut x[off..off + b]);
        off += b;
    }
}

pub fn uniform_point(blocks: &[usize]) -> Vec<f64> {
    blocks
        .iter()
        .flat_map(|&b| std::iter::repeat_n(1.0 / b as f64, b))
        .collect()
}

pub fn random_point(blocks: &[usize], seed: u64, indices: &[u64]) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Restart, indices);
    let mut x = vec![0.0; blocks.iter().sum()];
    let mut off = 0;
    for &b in blocks {
        flat_dirichlet(&mut rng, &mut x[off..off + b]);
        off += b;
    }
    x
}

/// Maximizes `f` from `x` in place; `f` returns the value and writes the
/// gradient. Returns the final value.
pub fn ascend<F>(blocks: &[usize], x: &mut Vec<f64>, max_iters: usize, mut f: F) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const ARMIJO: f64 = 1e-4;
    const XTOL: f64 = 1e-12;
    const FTOL: f64 = 1e-11;
    const STALL_ITERS: usize = 20;
    let dim = x.len();
    let mut g = vec![0.0; dim];
    let mut g_trial = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut fx = f(x, &mut g);
    let mut step = 1.0;
    let mut stalled = 0;
    for _ in 0..max_iters {
        let mut accepted = false;
        let mut moved = 0.0f64;
        while step > 1e-18 {
            for i in 0..dim {
                y[i] = x[i] + step * g[i];
            }
            project_blocks(&mut y, blocks);
            let mut dir = 0.0;
            moved = 0.0;
            for i in 0..dim {
                let d = y[i] - x[i];
                dir += g[i] * d;
                moved = moved.max(d.abs());
            }
            if moved < XTOL {
                break;
            }
            let fy = f(&y, &mut g_trial);
            if fy >= fx + ARMIJO * dir {
                std::mem::swap(x, &mut y);
                std::mem::swap(&mut g, &mut g_trial);
                stalled = if fy - fx <= FTOL * (1.0 + fx.abs()) { stalled + 1 } else { 0 };
                fx = fy;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || moved < XTOL || stalled >= STALL_ITERS {
            break;
        }
        step = (step * 2.0).min(1e6);
    }
    fx
}

/// A constrained program: maximize `obj(x)` subject to `con(x) >= d`.
pub trait Program: Sync {
    fn blocks(&self) -> &[usize];

    /// Returns `(obj, con)`. When `grads` is given, writes both gradients.
    fn eval(&self, x: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> (f64, f64);

    fn dim(&self) -> usize {
        self.blocks().iter().sum()
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct OptConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub penalties: Vec<f64>,
    pub seed: u64,
    /// Slack allowed on `con(x) >= d` when reporting a point feasible.
    pub feas_tol: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            restarts: 32,
            max_iters: 5000,
            penalties: vec![10.0, 100.0, 1e3, 1e4, 1e5],
            seed: 0,
            feas_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub obj: f64,
    pub con: f64,
}

fn starts(prog: &dyn Program, warm: &[Vec<f64>], cfg: &OptConfig, point: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = warm.to_vec();
    for r in 0..cfg.restarts {
        out.push(random_point(prog.blocks(), cfg.seed, &[point, r as u64]));
    }
    out
}

fn evaluate(prog: &dyn Program, x: Vec<f64>) -> Solution {
    let (obj, con) = prog.eval(&x, None);
    Solution { x, obj, con }
}

/// Maximizes the constraint function alone.
pub fn maximize_constraint(prog: &dyn Program, warm: &[Vec<f64>], cfg: &OptConfig) -> Solution {
    let blocks = prog.blocks().to_vec();
    let dim = prog.dim();
    let mut best: Option<Solution> = None;
    let mut scratch = vec![0.0; dim];
    for mut x in starts(prog, warm, cfg, u64::MAX) {
        ascend(&blocks, &mut x, cfg.max_iters, |p, g| {
            prog.eval(p, Some((&mut scratch, g))).1
        });
        let s = evaluate(prog, x);
        if best.as_ref().is_none_or(|b| s.con > b.con) {
            best = Some(s);
        }
    }
    best.expect("at least one start")
}

/// Best feasible point for `con >= d`, or `None` if no start reached
/// feasibility. `top` is the constraint maximizer used for polishing.
pub fn solve_point(
    prog: &dyn Program,
    d: f64,
    warm: &[Vec<f64>],
    top: &Solution,
    cfg: &OptConfig,
    point: u64,
) -> Option<Solution> {
    if top.con < d - cfg.feas_tol {
        return None;
    }
    let blocks = prog.blocks().to_vec();
    let dim = prog.dim();
    let mut best: Option<Solution> = None;
    let mut gobj = vec![0.0; dim];
    let mut gcon = vec![0.0; dim];
    let mut candidates = starts(prog, warm, cfg, point);
    candidates.push(top.x.clone());
    for mut x in candidates {
        for &rho in &cfg.penalties {
            ascend(&blocks, &mut x, cfg.max_iters, |p, g| {
                let (o, c) = prog.eval(p, Some((&mut gobj, &mut gcon)));
                let gap = (d - c).max(0.0);
                for i in 0..g.len() {
                    g[i] = gobj[i] + rho * gap * gcon[i];
                }
                o - 0.5 * rho * gap * gap
            });
            // once feasible the penalty vanishes and larger weights change nothing
            if d <= 0.0 || prog.eval(&x, None).1 >= d {
                break;
            }
        }
        let sol = polish(prog, x, d, top);
        if sol.con >= d - cfg.feas_tol && best.as_ref().is_none_or(|b| sol.obj > b.obj) {
            best = Some(sol);
        }
    }
    best
}

/// Moves an infeasible point along the segment towards `top` until the
/// constraint holds.
fn polish(prog: &dyn Program, x: Vec<f64>, d: f64, top: &Solution) -> Solution {
    let s = evaluate(prog, x);
    if s.con >= d {
        return s;
    }
    let mix = |t: f64| -> Vec<f64> {
        s.x.iter()
            .zip(&top.x)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if prog.eval(&mix(mid), None).1 >= d {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    evaluate(prog, mix(hi))
}

/// Derivative of `a log2(1/a)` with respect to `a`, clamped near zero.
#[inline]
pub fn dplog(a: f64) -> f64 {
    -(a.max(1e-300)).log2() - std::f64::consts::LOG2_E
}
