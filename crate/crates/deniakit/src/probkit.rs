//! Finite-alphabet information measures.
//!
//! All logarithms are base 2 and the convention `0 log(1/0) = 0` is used
//! throughout. Pmfs are validated once at construction; the raw slice helpers
//! (`entropy_of`, `kl_of`) skip validation and are what the hot loops in the
//! optimizers and the exact evaluators use.

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a pmf.
pub const SUM_TOL: f64 = 1e-12;

/// Entries within this distance outside `[0, 1]` are clamped instead of
/// rejected.
pub const ENTRY_SLACK: f64 = 1e-15;

/// Information quantities that come out negative by at most this much are
/// rounding noise and are clamped to zero.
pub const INFO_CLAMP: f64 = 1e-12;

/// `p * log2(1/p)` with the value 0 at `p = 0`.
#[inline]
pub fn plog(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of an (unvalidated) mass vector.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plog(p)).sum()
}

/// Kullback-Leibler divergence in bits, or the infinite sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_finite(&self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// The divergence as a float, `f64::INFINITY` for the sentinel.
    pub fn value(&self) -> f64 {
        match *self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{v}"),
            Divergence::Infinite => f.write_str("inf"),
        }
    }
}

impl serde::Serialize for Divergence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Divergence::Finite(v) => s.serialize_f64(*v),
            Divergence::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Unvalidated KL divergence between two mass vectors of equal length.
pub fn kl_of(p: &[f64], q: &[f64]) -> Divergence {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Divergence::Infinite;
            }
            acc += a * (a / b).log2();
        }
    }
    // Cancellation can leave tiny negative values for p ~= q.
    Divergence::Finite(acc.max(0.0))
}

fn validate_masses(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    for (i, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidPmf(format!("entry {i} is not finite")));
        }
        if *p < -ENTRY_SLACK || *p > 1.0 + ENTRY_SLACK {
            return Err(Error::InvalidPmf(format!("entry {i} = {p} outside [0, 1]")));
        }
        *p = p.clamp(0.0, 1.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidPmf(format!(
            "entries sum to {total} (residual {:.3e})",
            total - 1.0
        )));
    }
    Ok(probs)
}

/// Shared read access for [`Pmf`] and [`JointPmf`].
pub trait Distribution {
    fn masses(&self) -> &[f64];
    fn dims(&self) -> Vec<usize>;
}

/// A probability mass function over `{0, .., support_size - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Pmf {
            probs: validate_masses(probs)?,
        })
    }

    /// Normalizes non-negative weights into a pmf.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidPmf("weights must be non-negative with positive sum".into()));
        }
        Pmf::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform pmf needs a non-empty support");
        Pmf {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        assert!(at < k);
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Pmf { probs }
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl Distribution for Pmf {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn dims(&self) -> Vec<usize> {
        vec![self.probs.len()]
    }
}

/// A joint pmf over 2 or 3 finite alphabets stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&shape.len()) || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "joint shape must have 2 or 3 positive axes, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                probs.len()
            )));
        }
        Ok(JointPmf {
            shape,
            probs: validate_masses(probs)?,
        })
    }

    /// Builds `P(a, b) = p(a) q(b)`.
    pub fn product(p: &Pmf, q: &Pmf) -> Self {
        let mut probs = Vec::with_capacity(p.support_size() * q.support_size());
        for &a in p.probs() {
            for &b in q.probs() {
                probs.push(a * b);
            }
        }
        JointPmf {
            shape: vec![p.support_size(), q.support_size()],
            probs,
        }
    }

    /// Builds `P(a, b) = p(a) W(b | a)` from a row-stochastic matrix.
    pub fn from_input_and_rows(p: &Pmf, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != p.support_size() {
            return Err(Error::ShapeMismatch("one row per input symbol required".into()));
        }
        let width = rows.first().map_or(0, |r| r.len());
        let mut probs = Vec::with_capacity(rows.len() * width);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::ShapeMismatch("ragged rows".into()));
            }
            probs.extend(row.iter().map(|w| p.get(a) * w));
        }
        JointPmf::new(vec![rows.len(), width], probs)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.probs[self.flat(idx)]
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Marginal over the listed axes (kept in the given order), flattened
    /// row-major.
    pub fn marginal_masses(&self, keep: &[usize]) -> Vec<f64> {
        let out_shape: Vec<usize> = keep.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        let mut idx = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let pos = keep
                .iter()
                .zip(&out_shape)
                .fold(0, |acc, (&a, &s)| acc * s + idx[a]);
            out[pos] += p;
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        out
    }

    /// Single-axis marginal as a validated [`Pmf`].
    pub fn marginal(&self, axis: usize) -> Result<Pmf> {
        Pmf::new(self.marginal_masses(&[axis]))
    }

    /// Two-axis marginal of a 3-way joint.
    pub fn marginal_pair(&self, a: usize, b: usize) -> Result<JointPmf> {
        JointPmf::new(
            vec![self.shape[a], self.shape[b]],
            self.marginal_masses(&[a, b]),
        )
    }
}

impl Distribution for JointPmf {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn dims(&self) -> Vec<usize> {
        self.shape.clone()
    }
}

pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

/// Joint entropy of all axes.
pub fn joint_entropy(j: &JointPmf) -> f64 {
    entropy_of(j.probs())
}

pub fn kl_divergence<D: Distribution>(p: &D, q: &D) -> Result<Divergence> {
    if p.dims() != q.dims() {
        return Err(Error::ShapeMismatch(format!(
            "KL between shapes {:?} and {:?}",
            p.dims(),
            q.dims()
        )));
    }
    Ok(kl_of(p.masses(), q.masses()))
}

/// Clamps rounding noise; larger negative values indicate a bug upstream.
pub(crate) fn clamp_info(v: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -INFO_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!("{what} evaluated to {v:.3e} < 0")))
    }
}

/// `I(A;B)` of a 2-way joint.
pub fn mutual_information(j: &JointPmf) -> Result<f64> {
    if j.shape().len() != 2 {
        return Err(Error::ShapeMismatch("mutual information needs a 2-way joint".into()));
    }
    let ha = entropy_of(&j.marginal_masses(&[0]));
    let hb = entropy_of(&j.marginal_masses(&[1]));
    let i = clamp_info(ha + hb - joint_entropy(j), "I(A;B)")?;
    Ok(i.min(ha.min(hb)))
}

/// `I(A;B|C)` of a 3-way joint over `(A, B, C)`.
pub fn conditional_mutual_information(j: &JointPmf) -> Result<f64> {
    if j.shape().len() != 3 {
        return Err(Error::ShapeMismatch(
            "conditional mutual information needs a 3-way joint".into(),
        ));
    }
    let hac = entropy_of(&j.marginal_masses(&[0, 2]));
    let hbc = entropy_of(&j.marginal_masses(&[1, 2]));
    let hc = entropy_of(&j.marginal_masses(&[2]));
    clamp_info(hac + hbc - joint_entropy(j) - hc, "I(A;B|C)")
}

/// `H(B | A)` of a 2-way joint.
pub fn conditional_entropy(j: &JointPmf) -> Result<f64> {
    if j.shape().len() != 2 {
        return Err(Error::ShapeMismatch("conditional entropy needs a 2-way joint".into()));
    }
    clamp_info(
        joint_entropy(j) - entropy_of(&j.marginal_masses(&[0])),
        "H(B|A)",
    )
}

/// L1 distance between two mass vectors.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}
