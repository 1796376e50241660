//! Zero-information partitions: inputs grouped by identical eavesdropper
//! rows, and the induced variable `U0`.

use serde::Serialize;

use crate::channel::Dmc;
use crate::error::{Error, Result};
use crate::probkit::{JointPmf, Pmf};

/// Default max-norm tolerance for two rows to count as equal.
pub const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroInfoPartition {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl ZeroInfoPartition {
    /// Builds a partition from a class label per symbol. Classes are
    /// renumbered by lowest member.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut seen: Vec<(usize, usize)> = Vec::new();
        let mut class_of = vec![0; labels.len()];
        for (w, &l) in labels.iter().enumerate() {
            let c = match seen.iter().find(|(lab, _)| *lab == l) {
                Some(&(_, c)) => c,
                None => {
                    seen.push((l, classes.len()));
                    classes.push(Vec::new());
                    classes.len() - 1
                }
            };
            classes[c].push(w);
            class_of[w] = c;
        }
        ZeroInfoPartition { classes, class_of }
    }

    pub fn singletons(k: usize) -> Self {
        Self::from_labels(&(0..k).collect::<Vec<_>>())
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, w: usize) -> usize {
        self.class_of[w]
    }

    pub fn labels(&self) -> &[usize] {
        &self.class_of
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.class_of.len()
    }

    pub fn representative(&self, class: usize) -> usize {
        self.classes[class][0]
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.len() == self.class_of.len()
    }

    /// Per-symbol class labels of a sequence.
    pub fn class_sequence(&self, seq: &[usize]) -> Vec<usize> {
        seq.iter().map(|&w| self.class_of[w]).collect()
    }

    /// Formats classes as `{a,b} {c}` with the given symbol names.
    pub fn display_with(&self, names: &[String]) -> String {
        self.classes
            .iter()
            .map(|c| {
                let inner: Vec<&str> = c.iter().map(|&w| names[w].as_str()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Groups inputs of `d` whose rows agree within `row_tol` in max-norm.
///
/// Each symbol is compared with class representatives only, in index
/// order, so the result never chains near-equal rows transitively.
pub fn zero_info_partition(d: &Dmc, row_tol: f64) -> ZeroInfoPartition {
    let mut reps: Vec<usize> = Vec::new();
    let mut labels = vec![0; d.in_size()];
    for w in 0..d.in_size() {
        match reps
            .iter()
            .position(|&r| max_norm(d.row(r), d.row(w)) <= row_tol)
        {
            Some(c) => labels[w] = c,
            None => {
                labels[w] = reps.len();
                reps.push(w);
            }
        }
    }
    ZeroInfoPartition::from_labels(&labels)
}

/// The channel seen from a class: the representative's row.
pub fn collapse(d: &Dmc, part: &ZeroInfoPartition) -> Result<Dmc> {
    check_match(d, part)?;
    Dmc::new(
        (0..part.num_classes())
            .map(|c| d.row(part.representative(c)).to_vec())
            .collect(),
    )
}

fn check_match(d: &Dmc, part: &ZeroInfoPartition) -> Result<()> {
    if part.alphabet_size() != d.in_size() {
        return Err(Error::Dimension(format!(
            "partition covers {} symbols, channel has {} inputs",
            part.alphabet_size(),
            d.in_size()
        )));
    }
    Ok(())
}

/// `P(w, u, z) = p_w(w) 1{class(w) = u} d(z | w)` over axes `(W, U0, Z)`.
pub fn zero_info_joint(p_w: &Pmf, d: &Dmc, part: &ZeroInfoPartition) -> Result<JointPmf> {
    check_match(d, part)?;
    if p_w.support_size() != d.in_size() {
        return Err(Error::Dimension("p_w must range over the channel input".into()));
    }
    let (nw, nu, nz) = (d.in_size(), part.num_classes(), d.out_size());
    let mut probs = vec![0.0; nw * nu * nz];
    for w in 0..nw {
        let u = part.class_of(w);
        for z in 0..nz {
            probs[(w * nu + u) * nz + z] = p_w.get(w) * d.get(w, z);
        }
    }
    JointPmf::new(vec![nw, nu, nz], probs)
}
