//! Broadcast channels `P(y, z | x)`, their single-user marginals,
//! degradedness and strong typicality.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optim::project_blocks;
use crate::probkit::{entropy_of, Pmf, SUM_TOL};
use crate::rng::{flat_dirichlet, stream, Purpose};

/// Default tolerance of the degradedness test.
pub const DEGRADED_TOL: f64 = 1e-7;

/// A discrete memoryless channel stored as a row-major stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    in_size: usize,
    out_size: usize,
    rows: Vec<f64>,
}

fn check_row(row: &[f64], index: usize) -> Result<()> {
    for &p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidChannel {
                row: index,
                reason: format!("has entry {p}"),
                residual: if p.is_finite() { -p } else { f64::INFINITY },
            });
        }
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidChannel {
            row: index,
            reason: format!("sums to {total}"),
            residual: (total - 1.0).abs(),
        });
    }
    Ok(())
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let in_size = rows.len();
        let out_size = rows.first().map_or(0, |r| r.len());
        if in_size == 0 || out_size == 0 {
            return Err(Error::Dimension("a channel needs non-empty alphabets".into()));
        }
        let mut flat = Vec::with_capacity(in_size * out_size);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != out_size {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {out_size}",
                    r.len()
                )));
            }
            check_row(r, i)?;
            flat.extend_from_slice(r);
        }
        Ok(Dmc {
            in_size,
            out_size,
            rows: flat,
        })
    }

    pub fn from_flat(in_size: usize, out_size: usize, rows: Vec<f64>) -> Result<Self> {
        if in_size == 0 || out_size == 0 || rows.len() != in_size * out_size {
            return Err(Error::Dimension(format!(
                "{in_size}x{out_size} channel with {} entries",
                rows.len()
            )));
        }
        for i in 0..in_size {
            check_row(&rows[i * out_size..(i + 1) * out_size], i)?;
        }
        Ok(Dmc {
            in_size,
            out_size,
            rows,
        })
    }

    pub fn identity(k: usize) -> Self {
        let mut rows = vec![0.0; k * k];
        for i in 0..k {
            rows[i * k + i] = 1.0;
        }
        Dmc {
            in_size: k,
            out_size: k,
            rows,
        }
    }

    /// Binary symmetric channel with crossover `q`.
    pub fn bsc(q: f64) -> Result<Self> {
        Dmc::new(vec![vec![1.0 - q, q], vec![q, 1.0 - q]])
    }

    /// Binary erasure channel over outputs `{0, e, 1}`.
    pub fn bec(p: f64) -> Result<Self> {
        Dmc::new(vec![vec![1.0 - p, p, 0.0], vec![0.0, p, 1.0 - p]])
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.out_size..(i + 1) * self.out_size]
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.rows[input * self.out_size + output]
    }

    /// Row-major transition matrix.
    pub fn flat(&self) -> &[f64] {
        &self.rows
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.in_size).map(|i| self.row(i).to_vec()).collect()
    }

    /// `P(c | a) = sum_b self(b | a) next(c | b)`.
    pub fn then(&self, next: &Dmc) -> Result<Dmc> {
        if self.out_size != next.in_size {
            return Err(Error::Dimension(format!(
                "cannot compose {}->{} with {}->{}",
                self.in_size, self.out_size, next.in_size, next.out_size
            )));
        }
        let mut rows = vec![0.0; self.in_size * next.out_size];
        for a in 0..self.in_size {
            for b in 0..self.out_size {
                let w = self.get(a, b);
                if w == 0.0 {
                    continue;
                }
                for c in 0..next.out_size {
                    rows[a * next.out_size + c] += w * next.get(b, c);
                }
            }
        }
        Ok(Dmc {
            in_size: self.in_size,
            out_size: next.out_size,
            rows,
        })
    }

    /// Output law for the input law `p`.
    pub fn output_law(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.out_size];
        for (a, &pa) in p.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (o, qo) in q.iter_mut().enumerate() {
                *qo += pa * self.get(a, o);
            }
        }
        q
    }

    /// `I(X;Y)` in bits for the input law `p`.
    pub fn mutual_information(&self, p: &[f64]) -> f64 {
        let hy = entropy_of(&self.output_law(p));
        let hyx: f64 = p
            .iter()
            .enumerate()
            .map(|(a, &pa)| pa * entropy_of(self.row(a)))
            .sum();
        (hy - hyx).max(0.0)
    }

    /// Blahut-Arimoto capacity in bits and a capacity-achieving input law.
    pub fn capacity(&self) -> (f64, Vec<f64>) {
        let k = self.in_size;
        let mut p = vec![1.0 / k as f64; k];
        let mut d = vec![0.0; k];
        for _ in 0..100_000 {
            let q = self.output_law(&p);
            for a in 0..k {
                let row = self.row(a);
                d[a] = row
                    .iter()
                    .zip(&q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, qo)| w * (w / qo).log2())
                    .sum();
            }
            let lower: f64 = p.iter().zip(&d).map(|(pa, da)| pa * da).sum();
            let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if upper - lower < 1e-12 {
                break;
            }
            let mut total = 0.0;
            for a in 0..k {
                p[a] *= d[a].exp2();
                total += p[a];
            }
            for pa in p.iter_mut() {
                *pa /= total;
            }
        }
        (self.mutual_information(&p), p)
    }
}

/// Which receiver's marginal to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bob,
    Judy,
}

/// On-disk channel format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
    pub p: Vec<Vec<Vec<f64>>>,
}

/// A broadcast channel with input `X`, legitimate output `Y` and
/// eavesdropper output `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastChannel {
    x_names: Vec<String>,
    y_names: Vec<String>,
    z_names: Vec<String>,
    law: Vec<f64>,
}

fn default_names(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

impl BroadcastChannel {
    /// `law` is indexed `[(x * |Y| + y) * |Z| + z]`.
    pub fn new(x_size: usize, y_size: usize, z_size: usize, law: Vec<f64>) -> Result<Self> {
        Self::with_names(
            default_names(x_size),
            default_names(y_size),
            default_names(z_size),
            law,
        )
    }

    pub fn with_names(
        x_names: Vec<String>,
        y_names: Vec<String>,
        z_names: Vec<String>,
        law: Vec<f64>,
    ) -> Result<Self> {
        let ch = BroadcastChannel {
            x_names,
            y_names,
            z_names,
            law,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Checks sizes and that every `P(., . | x)` is a pmf.
    pub fn validate(&self) -> Result<()> {
        let (nx, ny, nz) = (self.x_size(), self.y_size(), self.z_size());
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Dimension("alphabets must be non-empty".into()));
        }
        if self.law.len() != nx * ny * nz {
            return Err(Error::Dimension(format!(
                "law has {} entries, sizes need {}",
                self.law.len(),
                nx * ny * nz
            )));
        }
        let block = ny * nz;
        for x in 0..nx {
            check_row(&self.law[x * block..(x + 1) * block], x)?;
        }
        Ok(())
    }

    /// Conditionally independent outputs: `P(y, z | x) = P(y | x) P(z | x)`.
    pub fn from_marginals(bob: &Dmc, judy: &Dmc) -> Result<Self> {
        if bob.in_size() != judy.in_size() {
            return Err(Error::Dimension("marginals need a common input".into()));
        }
        let mut law = Vec::with_capacity(bob.in_size() * bob.out_size() * judy.out_size());
        for x in 0..bob.in_size() {
            for y in 0..bob.out_size() {
                for z in 0..judy.out_size() {
                    law.push(bob.get(x, y) * judy.get(x, z));
                }
            }
        }
        Self::new(bob.in_size(), bob.out_size(), judy.out_size(), law)
    }

    /// Physically degraded channel `X -> Y -> Z`.
    pub fn degraded(bob: &Dmc, z_given_y: &Dmc) -> Result<Self> {
        if bob.out_size() != z_given_y.in_size() {
            return Err(Error::Dimension("P(z|y) must take Y as input".into()));
        }
        let mut law = Vec::with_capacity(bob.in_size() * bob.out_size() * z_given_y.out_size());
        for x in 0..bob.in_size() {
            for y in 0..bob.out_size() {
                for z in 0..z_given_y.out_size() {
                    law.push(bob.get(x, y) * z_given_y.get(y, z));
                }
            }
        }
        Self::new(bob.in_size(), bob.out_size(), z_given_y.out_size(), law)
    }

    /// `Y = X` noiselessly and `Z` an erasure of `X` with probability `p`.
    pub fn erasure_example(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("erasure probability {p}")));
        }
        let mut ch = Self::degraded(&Dmc::identity(2), &Dmc::bec(p)?)?;
        ch.z_names = vec!["0".into(), "e".into(), "1".into()];
        Ok(ch)
    }

    /// Three-symbol channel with `Y = X` whose eavesdropper cannot tell the
    /// first two inputs apart.
    pub fn three_symbol_example() -> Self {
        let zy = Dmc::new(vec![
            vec![0.3, 0.7, 0.0],
            vec![0.3, 0.7, 0.0],
            vec![0.0, 0.4, 0.6],
        ])
        .expect("valid rows");
        let mut ch = Self::degraded(&Dmc::identity(3), &zy).expect("valid law");
        ch.x_names = vec!["w1".into(), "w2".into(), "w3".into()];
        ch.y_names = vec!["y1".into(), "y2".into(), "y3".into()];
        ch.z_names = vec!["z1".into(), "z2".into(), "z3".into()];
        ch
    }

    pub fn x_size(&self) -> usize {
        self.x_names.len()
    }
    pub fn y_size(&self) -> usize {
        self.y_names.len()
    }
    pub fn z_size(&self) -> usize {
        self.z_names.len()
    }
    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }
    pub fn y_names(&self) -> &[String] {
        &self.y_names
    }
    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn law(&self, x: usize, y: usize, z: usize) -> f64 {
        self.law[(x * self.y_size() + y) * self.z_size() + z]
    }

    pub fn law_flat(&self) -> &[f64] {
        &self.law
    }

    pub fn marginal(&self, which: Side) -> Dmc {
        let (nx, ny, nz) = (self.x_size(), self.y_size(), self.z_size());
        let out = match which {
            Side::Bob => ny,
            Side::Judy => nz,
        };
        let mut rows = vec![0.0; nx * out];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let o = match which {
                        Side::Bob => y,
                        Side::Judy => z,
                    };
                    rows[x * out + o] += self.law(x, y, z);
                }
            }
        }
        Dmc {
            in_size: nx,
            out_size: out,
            rows,
        }
    }

    pub fn bob(&self) -> Dmc {
        self.marginal(Side::Bob)
    }

    pub fn judy(&self) -> Dmc {
        self.marginal(Side::Judy)
    }

    pub fn from_file(file: ChannelFile) -> Result<Self> {
        let (nx, ny, nz) = (file.x.len(), file.y.len(), file.z.len());
        if file.p.len() != nx {
            return Err(Error::Dimension(format!(
                "p has {} input rows, x declares {nx}",
                file.p.len()
            )));
        }
        let mut law = Vec::with_capacity(nx * ny * nz);
        for (x, block) in file.p.iter().enumerate() {
            if block.len() != ny {
                return Err(Error::Dimension(format!(
                    "p[{x}] has {} y rows, y declares {ny}",
                    block.len()
                )));
            }
            for (y, row) in block.iter().enumerate() {
                if row.len() != nz {
                    return Err(Error::Dimension(format!(
                        "p[{x}][{y}] has {} entries, z declares {nz}",
                        row.len()
                    )));
                }
                law.extend_from_slice(row);
            }
        }
        Self::with_names(file.x, file.y, file.z, law)
    }

    pub fn to_file(&self) -> ChannelFile {
        let (nx, ny, nz) = (self.x_size(), self.y_size(), self.z_size());
        ChannelFile {
            name: None,
            x: self.x_names.clone(),
            y: self.y_names.clone(),
            z: self.z_names.clone(),
            p: (0..nx)
                .map(|x| {
                    (0..ny)
                        .map(|y| (0..nz).map(|z| self.law(x, y, z)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Parses and validates a channel file. JSON syntax errors keep
    /// serde's line/column position.
    pub fn from_json_str(s: &str) -> std::result::Result<Self, LoadError> {
        let file: ChannelFile = serde_json::from_str(s).map_err(LoadError::Parse)?;
        Self::from_file(file).map_err(LoadError::Invalid)
    }

    /// SHA-256 over the alphabets and the exact bit patterns of the law.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for names in [&self.x_names, &self.y_names, &self.z_names] {
            h.update((names.len() as u64).to_le_bytes());
            for n in names {
                h.update((n.len() as u64).to_le_bytes());
                h.update(n.as_bytes());
            }
        }
        for &p in &self.law {
            h.update(p.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Failure to load a channel file.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("malformed channel file: {0}")]
    Parse(serde_json::Error),
    #[error(transparent)]
    Invalid(Error),
}

/// Result of the degradedness test.
#[derive(Debug, Clone, PartialEq)]
pub struct Degradedness {
    pub degraded: bool,
    /// The law itself factors as `P(y|x) P(z|y)`, not only its marginals.
    pub physical: bool,
    pub witness: Option<Dmc>,
    /// `max |P(z|x) - sum_y W(z|y) P(y|x)|` of the best map found.
    pub residual: f64,
}

fn composition_residual(bob: &Dmc, judy: &Dmc, w: &Dmc) -> f64 {
    let comp = bob.then(w).expect("sizes match");
    comp.rows
        .iter()
        .zip(&judy.rows)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Exact test of `P(y, z | x) = P(y | x) W(z | y)`.
fn physical_witness(ch: &BroadcastChannel, tol: f64) -> Option<Dmc> {
    let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
    let bob = ch.bob();
    let mut rows = vec![0.0; ny * nz];
    for y in 0..ny {
        let mut found = false;
        for x in 0..nx {
            let pyx = bob.get(x, y);
            if pyx <= 0.0 {
                continue;
            }
            let cond: Vec<f64> = (0..nz).map(|z| ch.law(x, y, z) / pyx).collect();
            if !found {
                rows[y * nz..(y + 1) * nz].copy_from_slice(&cond);
                found = true;
            } else {
                // the factorization must hold on the joint entries
                for z in 0..nz {
                    if (ch.law(x, y, z) - pyx * rows[y * nz + z]).abs() > tol {
                        return None;
                    }
                }
            }
        }
        if !found {
            // never observed: any row will do
            rows[y * nz..(y + 1) * nz].fill(1.0 / nz as f64);
        }
    }
    let w = Dmc {
        in_size: ny,
        out_size: nz,
        rows,
    };
    // rows of observed outputs may carry rounding; renormalize
    let rows: Vec<Vec<f64>> = w
        .rows()
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Dmc::new(rows).ok()
}

/// Least-squares search for a stochastic map `W` with `P_{Z|X} = P_{Y|X} W`
/// (accelerated projected gradient over row-stochastic matrices).
fn stochastic_witness(bob: &Dmc, judy: &Dmc, tol: f64) -> (Dmc, f64) {
    const ITERS: usize = 10_000;
    const RESTARTS: u64 = 8;
    let (nx, ny, nz) = (bob.in_size(), bob.out_size(), judy.out_size());
    let blocks = vec![nz; ny];
    // Lipschitz constant of the gradient is bounded by 2 ||A||_F^2
    let frob: f64 = bob.rows.iter().map(|a| a * a).sum();
    let step = 1.0 / (2.0 * frob.max(1e-12));
    let grad = |w: &[f64], g: &mut [f64]| {
        g.fill(0.0);
        for x in 0..nx {
            for z in 0..nz {
                let mut r = -judy.get(x, z);
                for y in 0..ny {
                    r += bob.get(x, y) * w[y * nz + z];
                }
                for y in 0..ny {
                    g[y * nz + z] += 2.0 * bob.get(x, y) * r;
                }
            }
        }
    };
    let mut best: Option<(Dmc, f64)> = None;
    for restart in 0..RESTARTS {
        let mut w = vec![0.0; ny * nz];
        if restart == 0 {
            w.fill(1.0 / nz as f64);
        } else {
            let mut rng = stream(restart, Purpose::Degraded, &[ny as u64, nz as u64]);
            for y in 0..ny {
                flat_dirichlet(&mut rng, &mut w[y * nz..(y + 1) * nz]);
            }
        }
        let mut prev = w.clone();
        let mut look = w.clone();
        let mut g = vec![0.0; ny * nz];
        let mut t = 1.0f64;
        for it in 0..ITERS {
            grad(&look, &mut g);
            let mut next: Vec<f64> = look.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            project_blocks(&mut next, &blocks);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..look.len() {
                look[i] = next[i] + beta * (next[i] - prev[i]);
            }
            project_blocks(&mut look, &blocks);
            prev = next;
            t = t_next;
            if it % 100 == 99 {
                let cand = Dmc {
                    in_size: ny,
                    out_size: nz,
                    rows: prev.clone(),
                };
                if composition_residual(bob, judy, &cand) <= tol * 0.1 {
                    break;
                }
            }
        }
        let cand = Dmc {
            in_size: ny,
            out_size: nz,
            rows: prev,
        };
        let res = composition_residual(bob, judy, &cand);
        if best.as_ref().is_none_or(|(_, r)| res < *r) {
            best = Some((cand, res));
        }
        if res <= tol * 0.1 {
            break;
        }
    }
    best.expect("at least one restart")
}

/// Decides whether `Z` is a degraded version of `Y`.
///
/// The exact factorization of the law is tried first; when it fails the
/// marginals are searched numerically for a stochastic map (in which case
/// `physical` is false).
pub fn is_physically_degraded(ch: &BroadcastChannel, tol: f64) -> Degradedness {
    let bob = ch.bob();
    let judy = ch.judy();
    if let Some(w) = physical_witness(ch, tol) {
        let residual = composition_residual(&bob, &judy, &w);
        if residual <= tol {
            return Degradedness {
                degraded: true,
                physical: true,
                witness: Some(w),
                residual,
            };
        }
    }
    let (w, residual) = stochastic_witness(&bob, &judy, tol);
    let degraded = residual <= tol;
    Degradedness {
        degraded,
        physical: false,
        witness: degraded.then_some(w),
        residual,
    }
}

/// `prod_i d(out_i | x_i)`.
pub fn sequence_likelihood(d: &Dmc, x: &[usize], out: &[usize]) -> Result<f64> {
    if x.len() != out.len() {
        return Err(Error::Dimension(format!(
            "input length {} vs output length {}",
            x.len(),
            out.len()
        )));
    }
    let mut p = 1.0;
    for (&a, &b) in x.iter().zip(out) {
        if a >= d.in_size {
            return Err(Error::SymbolOutOfRange {
                index: a,
                size: d.in_size,
            });
        }
        if b >= d.out_size {
            return Err(Error::SymbolOutOfRange {
                index: b,
                size: d.out_size,
            });
        }
        p *= d.get(a, b);
    }
    Ok(p)
}

/// Strong typicality: `max_a |N(a|seq)/n - p(a)| <= eps / |alphabet|`.
pub fn is_strongly_typical(seq: &[usize], p: &Pmf, eps: f64) -> Result<bool> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let k = p.support_size();
    let mut counts = vec![0usize; k];
    for &s in seq {
        if s >= k {
            return Err(Error::SymbolOutOfRange { index: s, size: k });
        }
        counts[s] += 1;
    }
    let n = seq.len() as f64;
    let bound = eps / k as f64;
    Ok(counts
        .iter()
        .zip(p.probs())
        .all(|(&c, &pa)| (c as f64 / n - pa).abs() <= bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn swapped() -> BroadcastChannel {
        // Z = X noiselessly, Y an erasure of X
        let bob = Dmc::bec(0.3).unwrap();
        BroadcastChannel::from_marginals(&bob, &Dmc::identity(2)).unwrap()
    }

    #[test]
    fn example_channels_validate() {
        assert!(BroadcastChannel::erasure_example(0.3).is_ok());
        let ch = BroadcastChannel::three_symbol_example();
        assert!(ch.validate().is_ok());
        assert!((ch.law(2, 2, 1) - 0.4).abs() < 1e-15);
        assert!((ch.law(0, 0, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn scaled_row_reports_residual() {
        let ch = BroadcastChannel::erasure_example(0.3).unwrap();
        let mut law = ch.law_flat().to_vec();
        for v in &mut law[6..12] {
            *v *= 1.01;
        }
        match BroadcastChannel::new(2, 2, 3, law) {
            Err(Error::InvalidChannel { row, residual, .. }) => {
                assert_eq!(row, 1);
                assert!((residual - 0.01).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            BroadcastChannel::new(2, 2, 3, vec![0.5; 5]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn marginals_of_examples() {
        let p = 0.3;
        let ch = BroadcastChannel::erasure_example(p).unwrap();
        assert_eq!(ch.bob(), Dmc::identity(2));
        let judy = ch.judy();
        assert_eq!(judy.row(0), &[1.0 - p, p, 0.0]);
        assert_eq!(judy.row(1), &[0.0, p, 1.0 - p]);

        let judy = BroadcastChannel::three_symbol_example().judy();
        assert_eq!(judy.row(0), &[0.3, 0.7, 0.0]);
        assert_eq!(judy.row(1), &[0.3, 0.7, 0.0]);
        assert_eq!(judy.row(2), &[0.0, 0.4, 0.6]);
    }

    #[test]
    fn degradedness_examples() {
        let ch = BroadcastChannel::erasure_example(0.3).unwrap();
        let d = is_physically_degraded(&ch, DEGRADED_TOL);
        assert!(d.degraded && d.physical);
        assert_eq!(d.witness.unwrap(), Dmc::bec(0.3).unwrap());

        let bsc = Dmc::bsc(0.1).unwrap();
        let ch = BroadcastChannel::degraded(&bsc, &Dmc::identity(2)).unwrap();
        let d = is_physically_degraded(&ch, DEGRADED_TOL);
        assert!(d.degraded);
        assert_eq!(d.witness.unwrap(), Dmc::identity(2));

        let d = is_physically_degraded(&swapped(), DEGRADED_TOL);
        assert!(!d.degraded);
        assert!(d.witness.is_none());
        assert!(d.residual >= 0.1, "{}", d.residual);
    }

    #[test]
    fn swapped_channel_grid_oracle() {
        // brute-force grid over 3x2 stochastic maps at step 0.01
        let bob = Dmc::bec(0.3).unwrap();
        let judy = Dmc::identity(2);
        let mut best = f64::INFINITY;
        for a in 0..=100 {
            for b in 0..=100 {
                for c in 0..=100 {
                    let w = Dmc::new(vec![
                        vec![a as f64 / 100.0, 1.0 - a as f64 / 100.0],
                        vec![b as f64 / 100.0, 1.0 - b as f64 / 100.0],
                        vec![c as f64 / 100.0, 1.0 - c as f64 / 100.0],
                    ])
                    .unwrap();
                    best = best.min(composition_residual(&bob, &judy, &w));
                }
            }
        }
        assert!(best >= 0.1, "{best}");
    }

    #[test]
    fn stochastic_but_not_physical() {
        // Y, Z conditionally independent given X, yet Z = BSC(0.2) of Y's
        // BSC(0.1) in distribution: 0.1 * 0.8 + 0.9 * 0.2 = 0.26
        let bob = Dmc::bsc(0.1).unwrap();
        let judy = Dmc::bsc(0.26).unwrap();
        let ch = BroadcastChannel::from_marginals(&bob, &judy).unwrap();
        let d = is_physically_degraded(&ch, DEGRADED_TOL);
        assert!(d.degraded && !d.physical);
        let w = d.witness.unwrap();
        assert!((w.get(0, 1) - 0.2).abs() < 1e-6);
    }

    #[test]
    fn likelihood_examples() {
        let bec = Dmc::bec(0.3).unwrap();
        assert_eq!(sequence_likelihood(&bec, &[], &[]).unwrap(), 1.0);
        let id = Dmc::identity(3);
        assert_eq!(sequence_likelihood(&id, &[0, 2, 1], &[0, 2, 1]).unwrap(), 1.0);
        let p = sequence_likelihood(&bec, &[0, 1], &[1, 2]).unwrap();
        assert!((p - 0.21).abs() < 1e-15);
        assert!(sequence_likelihood(&bec, &[0, 2], &[1, 2]).is_err());
        assert!(sequence_likelihood(&bec, &[0], &[1, 2]).is_err());
    }

    #[test]
    fn typicality_examples() {
        let u = Pmf::uniform(2);
        assert!(is_strongly_typical(&[0, 1, 0, 1], &u, 0.1).unwrap());
        assert!(!is_strongly_typical(&[0, 0, 0, 0], &u, 0.1).unwrap());
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let seq = [0, 1, 1, 0, 1, 1, 1, 0, 1, 1];
        assert!(is_strongly_typical(&seq, &p, 1e-9).unwrap());
        assert_eq!(is_strongly_typical(&[], &u, 0.1), Err(Error::EmptySequence));
    }

    #[test]
    fn capacity_of_standard_channels() {
        let (c, p) = Dmc::bsc(0.11).unwrap().capacity();
        let h = -(0.11f64 * 0.11f64.log2() + 0.89 * 0.89f64.log2());
        assert!((c - (1.0 - h)).abs() < 1e-9);
        assert!((p[0] - 0.5).abs() < 1e-6);
        let (c, _) = Dmc::bec(0.3).unwrap().capacity();
        assert!((c - 0.7).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_and_digest() {
        let ch = BroadcastChannel::three_symbol_example();
        let s = serde_json::to_string(&ch.to_file()).unwrap();
        let back = BroadcastChannel::from_json_str(&s).unwrap();
        assert_eq!(back, ch);
        assert_eq!(back.digest(), ch.digest());
        assert_ne!(
            ch.digest(),
            BroadcastChannel::erasure_example(0.3).unwrap().digest()
        );
        match BroadcastChannel::from_json_str("{\"x\": [\n 1") {
            Err(LoadError::Parse(e)) => assert_eq!(e.line(), 2),
            other => panic!("{other:?}"),
        }
    }

    fn arb_dmc(ins: usize, outs: usize) -> impl Strategy<Value = Dmc> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, outs), ins).prop_map(|rows| {
            Dmc::new(
                rows.into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn marginals_are_stochastic(law in prop::collection::vec(0.0f64..1.0, 2 * 3 * 2)) {
            let mut law = law;
            for x in 0..2 {
                let s: f64 = law[x * 6..(x + 1) * 6].iter().sum();
                if s == 0.0 { law[x * 6] = 1.0; continue; }
                for v in &mut law[x * 6..(x + 1) * 6] { *v /= s; }
            }
            let ch = BroadcastChannel::new(2, 3, 2, law).unwrap();
            for d in [ch.bob(), ch.judy()] {
                for i in 0..d.in_size() {
                    prop_assert!((d.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn degraded_witness_reproduces_judy(bob in arb_dmc(2, 3), zy in arb_dmc(3, 2)) {
            let ch = BroadcastChannel::degraded(&bob, &zy).unwrap();
            let d = is_physically_degraded(&ch, DEGRADED_TOL);
            prop_assert!(d.degraded);
            let w = d.witness.unwrap();
            prop_assert!(composition_residual(&ch.bob(), &ch.judy(), &w) <= DEGRADED_TOL);
        }

        #[test]
        fn sequence_likelihood_sums_to_one(d in arb_dmc(2, 3), n in 0usize..9, seed in 0u64..1000) {
            let x: Vec<usize> = (0..n).map(|i| ((seed >> i) & 1) as usize).collect();
            let mut total = 0.0;
            let count = 3usize.pow(n as u32);
            for code in 0..count {
                let mut c = code;
                let out: Vec<usize> = (0..n).map(|_| { let s = c % 3; c /= 3; s }).collect();
                total += sequence_likelihood(&d, &x, &out).unwrap();
            }
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
