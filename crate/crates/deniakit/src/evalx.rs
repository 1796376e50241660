//! Exact and Monte Carlo evaluation of codes and faking procedures.
//!
//! The exact joint enumerates every `(m, w, w~, z)` tuple with positive
//! probability under uniform messages, uniform encoder randomness, the
//! channel, and the faker's exact conditional law.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{BroadcastChannel, Dmc};
use crate::codec::{
    build_iid_codebook, decode, pack, transmitter_msg, unpack, Codebook, Decoder, Faker, Setting,
};
use crate::error::{Error, Result};
use crate::probkit::{entropy_of, kl_of, mutual_information, plog, Divergence, JointPmf, Pmf};
use crate::rng::{sample_index, stream, Purpose};

/// Largest number of weighted states an exact evaluation may touch.
pub const STATE_BUDGET: f64 = (1u64 << 26) as f64;

/// Residual below which a bound check counts as violated.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEntry {
    pub m: u32,
    pub w: u64,
    pub wt: u64,
    /// `Msg(w~)`.
    pub mt: u32,
    pub z: u64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct ExactJoint {
    setting: Setting,
    n: usize,
    messages: usize,
    w_base: usize,
    z_base: usize,
    states: f64,
    entries: Vec<JointEntry>,
}

fn bits_for_base(base: usize) -> u32 {
    usize::BITS - base.saturating_sub(1).leading_zeros()
}

/// Sequences are packed into `u64` keys, `ceil(log2 base)` bits per symbol.
fn check_packing(n: usize, base: usize) -> Result<()> {
    let bits = n as f64 * bits_for_base(base) as f64;
    if bits > 63.0 {
        return Err(Error::BudgetExceeded {
            needed: bits,
            budget: 63.0,
        });
    }
    Ok(())
}

/// All output sequences of a memoryless channel on `x`, as `(a, b, p)` with
/// `a` and `b` packed from per-position pairs.
fn product_support(per_symbol: &[Vec<(usize, usize, f64)>], a_base: u64, b_base: u64) -> Vec<(u64, u64, f64)> {
    let mut out = vec![(0u64, 0u64, 1.0f64, 1u64, 1u64)];
    for opts in per_symbol {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for &(a, b, p, sa, sb) in &out {
            for &(oa, ob, q) in opts {
                next.push((a + oa as u64 * sa, b + ob as u64 * sb, p * q, sa * a_base, sb * b_base));
            }
        }
        out = next;
    }
    out.into_iter().map(|(a, b, p, _, _)| (a, b, p)).collect()
}

fn fake_bound(faker: &Faker, cb: &Codebook) -> f64 {
    match faker {
        Faker::Identity => 1.0,
        Faker::MessageSplit { s_bits, .. } => (*s_bits as f64).exp2(),
        Faker::MessageMixed { .. } => cb.messages() as f64,
        Faker::Clique => match cb.layer() {
            Some(l) => (0..l.cloud_count)
                .map(|j| cb.cloud_members(j).len())
                .max()
                .unwrap_or(1) as f64,
            None => cb.words().len() as f64,
        },
        Faker::NaiveUniform | Faker::TransmitterMixed { .. } => cb.words().len() as f64,
        Faker::Receiver { partition } => {
            let big = partition.classes().iter().map(|c| c.len()).max().unwrap_or(1);
            (big as f64).powi(cb.n() as i32)
        }
    }
}

/// The exact joint law of `(M, W, W~, Z)`.
pub fn exact_joint(setting: Setting, cb: &Codebook, ch: &BroadcastChannel, faker: &Faker, rule: Decoder) -> Result<ExactJoint> {
    if let Some(s) = faker.setting() {
        if s != setting {
            return Err(Error::Unsupported(format!("{s:?} faker in the {setting:?} setting")));
        }
    }
    if ch.x_size() != cb.x_size() {
        return Err(Error::Dimension("codebook alphabet does not match the channel input".into()));
    }
    let n = cb.n();
    let bob = ch.bob();
    let judy = ch.judy();
    let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
    check_packing(n, nz)?;
    let w_base = match setting {
        Setting::Message => cb.messages(),
        Setting::Transmitter => nx,
        Setting::Receiver => ny,
    };
    if setting != Setting::Message {
        check_packing(n, w_base)?;
    }
    let words = cb.words().len() as f64;
    let outputs = match setting {
        Setting::Receiver => ((ny * nz) as f64).powi(n as i32),
        _ => (nz as f64).powi(n as i32),
    };
    let states = words * outputs * fake_bound(faker, cb);
    if states > STATE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: states,
            budget: STATE_BUDGET,
        });
    }

    // fake laws and Msg values, keyed by the revealed value
    let mut laws: HashMap<u64, Vec<(u64, f64)>> = HashMap::new();
    let mut msg_cache: HashMap<u64, u32> = HashMap::new();
    let mut msg_of_fake = |wt: &[usize], key: u64| -> Result<u32> {
        if let Some(&v) = msg_cache.get(&key) {
            return Ok(v);
        }
        let v = match setting {
            Setting::Message => wt[0],
            Setting::Transmitter => transmitter_msg(cb, wt),
            Setting::Receiver => decode(cb, &bob, wt, rule)?,
        } as u32;
        msg_cache.insert(key, v);
        Ok(v)
    };
    let mut law_of = |w: &[usize], key: u64| -> Result<Vec<(u64, f64)>> {
        if let Some(l) = laws.get(&key) {
            return Ok(l.clone());
        }
        let law = faker.law(cb, &bob, w)?;
        let packed: Vec<(u64, f64)> = law
            .into_iter()
            .map(|(wt, p)| {
                let k = if setting == Setting::Message { wt[0] as u64 } else { pack(&wt, w_base) };
                (k, p)
            })
            .collect();
        laws.insert(key, packed.clone());
        Ok(packed)
    };

    let base = 1.0 / words;
    let mut entries = Vec::new();
    for m in 0..cb.messages() {
        for r in 0..cb.randomness() {
            let x = cb.word(m, r);
            // (w, z, p(w, z | x))
            let outs: Vec<(u64, u64, f64)> = match setting {
                Setting::Receiver => {
                    let per: Vec<Vec<(usize, usize, f64)>> = x
                        .iter()
                        .map(|&a| {
                            let mut v = Vec::new();
                            for y in 0..ny {
                                for z in 0..nz {
                                    let p = ch.law(a, y, z);
                                    if p > 0.0 {
                                        v.push((y, z, p));
                                    }
                                }
                            }
                            v
                        })
                        .collect();
                    product_support(&per, ny as u64, nz as u64)
                }
                _ => {
                    let per: Vec<Vec<(usize, usize, f64)>> = x
                        .iter()
                        .map(|&a| (0..nz).filter(|&z| judy.get(a, z) > 0.0).map(|z| (0, z, judy.get(a, z))).collect())
                        .collect();
                    let w = if setting == Setting::Message { m as u64 } else { pack(x, nx) };
                    product_support(&per, 1, nz as u64)
                        .into_iter()
                        .map(|(_, z, p)| (w, z, p))
                        .collect()
                }
            };
            for (w, z, pwz) in outs {
                let wseq = match setting {
                    Setting::Message => vec![m],
                    _ => unpack(w, w_base, n),
                };
                for (wt, pf) in law_of(&wseq, w)? {
                    let wt_seq = match setting {
                        Setting::Message => vec![wt as usize],
                        _ => unpack(wt, w_base, n),
                    };
                    let mt = msg_of_fake(&wt_seq, wt)?;
                    entries.push(JointEntry {
                        m: m as u32,
                        w,
                        wt,
                        mt,
                        z,
                        p: base * pwz * pf,
                    });
                }
            }
        }
    }
    entries.sort_by_key(|e| (e.m, e.w, e.wt, e.z));
    let mut merged: Vec<JointEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        match merged.last_mut() {
            Some(l) if (l.m, l.w, l.wt, l.z) == (e.m, e.w, e.wt, e.z) => l.p += e.p,
            _ => merged.push(e),
        }
    }
    Ok(ExactJoint {
        setting,
        n,
        messages: cb.messages(),
        w_base,
        z_base: nz,
        states,
        entries: merged,
    })
}

impl ExactJoint {
    pub fn setting(&self) -> Setting {
        self.setting
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn messages(&self) -> usize {
        self.messages
    }
    pub fn w_base(&self) -> usize {
        self.w_base
    }
    pub fn z_base(&self) -> usize {
        self.z_base
    }
    /// Upper bound on the states touched, as checked against the budget.
    pub fn states(&self) -> f64 {
        self.states
    }
    pub fn entries(&self) -> &[JointEntry] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.p).sum()
    }

    /// Marginal masses over the key `f`, sorted by key.
    pub fn marginal<K: Ord + Copy>(&self, f: impl Fn(&JointEntry) -> K) -> Vec<(K, f64)> {
        let mut v: Vec<(K, f64)> = self.entries.iter().map(|e| (f(e), e.p)).collect();
        v.sort_by_key(|a| a.0);
        let mut out: Vec<(K, f64)> = Vec::with_capacity(v.len());
        for (k, p) in v {
            match out.last_mut() {
                Some(l) if l.0 == k => l.1 += p,
                _ => out.push((k, p)),
            }
        }
        out
    }

    /// Entropy in bits of the key `f`.
    pub fn entropy<K: Ord + Copy>(&self, f: impl Fn(&JointEntry) -> K) -> f64 {
        self.marginal(f).iter().map(|&(_, p)| plog(p)).sum()
    }

    /// `max |P(z | w, w~) - P(z | w)|` over the support.
    pub fn markov_gap(&self) -> f64 {
        let pw: HashMap<u64, f64> = self.marginal(|e| e.w).into_iter().collect();
        let pwz: HashMap<(u64, u64), f64> = self.marginal(|e| (e.w, e.z)).into_iter().collect();
        let pwwt: HashMap<(u64, u64), f64> = self.marginal(|e| (e.w, e.wt)).into_iter().collect();
        self.marginal(|e| (e.w, e.wt, e.z))
            .into_iter()
            .map(|((w, wt, z), p)| (p / pwwt[&(w, wt)] - pwz[&(w, z)] / pw[&w]).abs())
            .fold(0.0, f64::max)
    }
}

fn non_negative(v: f64) -> f64 {
    v.max(0.0)
}

/// `KL(Q_{Z,W~} || Q_{Z,W})`.
pub fn plausibility_kl(j: &ExactJoint) -> Divergence {
    let fake = j.marginal(|e| (e.wt, e.z));
    let real: HashMap<(u64, u64), f64> = j.marginal(|e| (e.w, e.z)).into_iter().collect();
    let p: Vec<f64> = fake.iter().map(|&(_, p)| p).collect();
    let q: Vec<f64> = fake.iter().map(|(k, _)| real.get(k).copied().unwrap_or(0.0)).collect();
    kl_of(&p, &q)
}

/// `(1/n) H(Msg(W~) | W)`; zero at `n = 0`.
pub fn deniability_rate(j: &ExactJoint) -> f64 {
    if j.n == 0 {
        return 0.0;
    }
    non_negative(j.entropy(|e| (e.w, e.mt)) - j.entropy(|e| e.w)) / j.n as f64
}

/// `Σ_{(m, y): Dec(y) != m} Q(m, y)`, summed over every `y` in `Y^n`.
pub fn error_probability(cb: &Codebook, bob: &Dmc, rule: Decoder) -> Result<f64> {
    let n = cb.n();
    let ny = bob.out_size();
    let words = cb.words().len();
    let outputs = (ny as f64).powi(n as i32);
    let needed = outputs * words as f64;
    if needed > STATE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: STATE_BUDGET,
        });
    }
    let outputs = outputs as u64;
    let per_y: Vec<f64> = (0..outputs)
        .into_par_iter()
        .map(|code| -> Result<f64> {
            let y = unpack(code, ny, n);
            let guess = decode(cb, bob, &y, rule)?;
            let mut err = 0.0;
            for m in (0..cb.messages()).filter(|&m| m != guess) {
                for r in 0..cb.randomness() {
                    let mut p = 1.0;
                    for (&a, &b) in cb.word(m, r).iter().zip(&y) {
                        p *= bob.get(a, b);
                    }
                    err += p;
                }
            }
            Ok(err / words as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_y.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Constants of the converse lemmas as instantiated for a code and channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Smallest positive entry of `P_{Z|X}`.
    pub p_min: f64,
    /// `max log2(1/P_{Z|X})` over positive entries.
    pub kappa0: f64,
    /// `log2(1/min Q_X)` over codewords with positive probability.
    pub log_inv_min_qx: f64,
    /// `sqrt(2) (log2|M| + n log2(1/p_min)) / n`.
    pub lambda: f64,
    /// `sqrt(2) max(kappa0, log_inv_min_qx / n)`.
    pub kappa: f64,
}

pub fn constants(cb: &Codebook, judy: &Dmc) -> Constants {
    let p_min = judy.flat().iter().cloned().filter(|&p| p > 0.0).fold(1.0, f64::min);
    let kappa0 = -p_min.log2();
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for w in cb.words() {
        *counts.entry(w.as_slice()).or_insert(0) += 1;
    }
    let min_count = counts.values().copied().min().unwrap_or(1);
    let log_inv_min_qx = (cb.words().len() as f64 / min_count as f64).log2();
    let n = cb.n().max(1) as f64;
    let lambda = std::f64::consts::SQRT_2 * ((cb.messages() as f64).log2() + n * kappa0) / n;
    let kappa = std::f64::consts::SQRT_2 * kappa0.max(log_inv_min_qx / n);
    Constants {
        p_min,
        kappa0,
        log_inv_min_qx,
        lambda,
        kappa,
    }
}

/// `value <= bound`, or `bound <= value` for lower bounds; `residual`
/// is the slack, negative when violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub lower: bool,
    pub residual: f64,
}

impl BoundCheck {
    fn upper(name: &str, value: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            value,
            bound,
            lower: false,
            residual: bound - value,
        }
    }

    fn lower(name: &str, value: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            value,
            bound,
            lower: true,
            residual: value - bound,
        }
    }

    pub fn holds(&self) -> bool {
        self.residual >= -CHECK_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivocation {
    pub h_m: f64,
    /// `H(Msg(W~))`.
    pub h_fake_msg: f64,
    pub h_m_given_z: f64,
    pub h_m_given_fake_z: f64,
    /// `|H(M) - H(Msg(W~))|`.
    pub h_gap: f64,
}

pub fn equivocation(j: &ExactJoint) -> Equivocation {
    let h_m = j.entropy(|e| e.m);
    let h_fake_msg = j.entropy(|e| e.mt);
    Equivocation {
        h_m,
        h_fake_msg,
        h_m_given_z: non_negative(j.entropy(|e| (e.m, e.z)) - j.entropy(|e| e.z)),
        h_m_given_fake_z: non_negative(j.entropy(|e| (e.m, e.wt, e.z)) - j.entropy(|e| (e.wt, e.z))),
        h_gap: (h_m - h_fake_msg).abs(),
    }
}

/// `I(A;B|C)` from the joint, with `a`, `b`, `c` key extractors.
fn cmi<A: Ord + Copy, B: Ord + Copy, C: Ord + Copy>(
    j: &ExactJoint,
    a: impl Fn(&JointEntry) -> A,
    b: impl Fn(&JointEntry) -> B,
    c: impl Fn(&JointEntry) -> C,
) -> f64 {
    let hac = j.entropy(|e| (a(e), c(e)));
    let hbc = j.entropy(|e| (b(e), c(e)));
    let habc = j.entropy(|e| (a(e), b(e), c(e)));
    let hc = j.entropy(&c);
    non_negative(hac + hbc - habc - hc)
}

/// Converse-lemma and proposition checks for the joint's setting. Returns
/// the checks, or a diagnostic when they do not apply.
pub fn bound_checks(j: &ExactJoint, k: &Constants) -> std::result::Result<Vec<BoundCheck>, String> {
    let delta = match plausibility_kl(j) {
        Divergence::Finite(d) => d,
        Divergence::Infinite => return Err("plausibility divergence is infinite".into()),
    };
    if j.n == 0 {
        return Err("block length 0".into());
    }
    let n = j.n as f64;
    let nd = n * deniability_rate(j);
    let sd = delta.sqrt();
    let eq = equivocation(j);
    let mut out = Vec::new();
    match j.setting {
        Setting::Message => {
            let slack = delta + n * k.lambda * sd;
            out.push(BoundCheck::upper("lemma2 I(M;Z|M~)", cmi(j, |e| e.m, |e| e.z, |e| e.wt), slack));
            out.push(BoundCheck::upper("lemma2 |H(M)-H(M~)|", eq.h_gap, slack));
            out.push(BoundCheck::lower(
                "prop1 H(M|Z) lower",
                eq.h_m_given_z,
                nd - 2.0 * n * k.lambda * sd - 2.0 * delta,
            ));
            out.push(BoundCheck::lower("prop2 H(M|M~,Z) lower", eq.h_m_given_fake_z, nd - slack));
            out.push(BoundCheck::upper("prop2 H(M|M~,Z) upper", eq.h_m_given_fake_z, nd + slack));
        }
        Setting::Transmitter => {
            let slack = delta + n * k.kappa * sd;
            let h_x = j.entropy(|e| e.w);
            let h_xt = j.entropy(|e| e.wt);
            let h_x_xt = j.entropy(|e| (e.w, e.wt));
            let x_given_xt = h_x_xt - h_xt;
            let xt_given_x = h_x_xt - h_x;
            let x_given_xt_m = j.entropy(|e| (e.w, e.wt, e.m)) - j.entropy(|e| (e.wt, e.m));
            let xt_given_x_mt = j.entropy(|e| (e.w, e.wt, e.mt)) - j.entropy(|e| (e.w, e.mt));
            out.push(BoundCheck::upper("lemma3 I(X;Z|X~)", cmi(j, |e| e.w, |e| e.z, |e| e.wt), slack));
            out.push(BoundCheck::upper(
                "lemma3 |H(X|X~)-H(X~|X)|",
                (x_given_xt - xt_given_x).abs(),
                slack,
            ));
            out.push(BoundCheck::upper("lemma3 |H(X)-H(X~)|", (h_x - h_xt).abs(), slack));
            out.push(BoundCheck::upper(
                "lemma3 |H(X|X~,M)-H(X~|X,Msg(X~))|",
                (x_given_xt_m - xt_given_x_mt).abs(),
                slack,
            ));
            let wide = 2.0 * n * k.kappa * sd + 2.0 * delta;
            // H(M|X~) - H(Msg(X~)|X) also carries H(M|X, X~) = H(M|X), which
            // vanishes only when every codeword determines its message
            let m_given_x = non_negative(j.entropy(|e| (e.m, e.w)) - h_x);
            out.push(BoundCheck::lower("prop3 H(M|Z,X~) lower", eq.h_m_given_fake_z, nd - wide));
            out.push(BoundCheck::upper(
                "prop3 H(M|Z,X~) upper",
                eq.h_m_given_fake_z,
                nd + wide + m_given_x,
            ));
        }
        Setting::Receiver => {}
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub setting: Setting,
    pub n: usize,
    pub messages: usize,
    pub randomness: usize,
    pub rate: f64,
    pub error_prob: f64,
    pub kl_plausibility: Divergence,
    pub deniability_rate: f64,
    pub equivocation: Equivocation,
    pub checks: Vec<BoundCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks_skipped: Option<String>,
    pub constants: Constants,
    pub markov_gap: f64,
    pub total_mass: f64,
    pub states: f64,
    pub budget: f64,
}

/// Full exact evaluation of a code and faker.
pub fn evaluate(setting: Setting, cb: &Codebook, ch: &BroadcastChannel, faker: &Faker, rule: Decoder) -> Result<EvalReport> {
    let j = exact_joint(setting, cb, ch, faker, rule)?;
    let k = constants(cb, &ch.judy());
    let (checks, checks_skipped) = match bound_checks(&j, &k) {
        Ok(c) => (c, None),
        Err(why) => (Vec::new(), Some(why)),
    };
    Ok(EvalReport {
        setting,
        n: cb.n(),
        messages: cb.messages(),
        randomness: cb.randomness(),
        rate: cb.rate(),
        error_prob: error_probability(cb, &ch.bob(), rule)?,
        kl_plausibility: plausibility_kl(&j),
        deniability_rate: deniability_rate(&j),
        equivocation: equivocation(&j),
        checks,
        checks_skipped,
        constants: k,
        markov_gap: j.markov_gap(),
        total_mass: j.total(),
        states: j.states(),
        budget: STATE_BUDGET,
    })
}

/// Outcome of the reverse-divergence mixing construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixReport {
    pub alpha: f64,
    /// `I(I~;J)`, used as `beta`.
    pub beta: f64,
    /// `P(I = I~)`.
    pub p_equal: f64,
    /// `max |P_I - P_I~|`.
    pub marginal_gap: f64,
    /// `I(I;J)`.
    pub mi_new: f64,
    /// `KL(P_I P_J || P_{I,J})`.
    pub kl_reverse: f64,
    /// `sqrt(2 beta) log2(1/alpha)`.
    pub bound: f64,
    /// Indices of `I~` and `J` kept after dropping zero-mass symbols.
    pub kept_i: Vec<usize>,
    pub kept_j: Vec<usize>,
    #[serde(skip)]
    pub joint: Option<JointPmf>,
}

impl MixReport {
    /// The four conclusions, each with the given slack.
    pub fn conclusions(&self, marginal_tol: f64, tol: f64) -> [bool; 4] {
        [
            self.p_equal >= 1.0 - self.alpha - tol,
            self.marginal_gap <= marginal_tol,
            self.mi_new <= self.beta + tol,
            self.kl_reverse <= self.bound + tol,
        ]
    }
}

/// Mixes `I~` into `I` with `P(i | i~) = (1-alpha) 1{i = i~} + alpha P(i)`.
/// The returned joint has axes `(I, I~, J)`.
pub fn mix_for_reverse_kl(p: &JointPmf, alpha: f64) -> Result<MixReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} outside (0, 1]")));
    }
    if p.shape().len() != 2 {
        return Err(Error::ShapeMismatch("mixing needs a 2-way joint".into()));
    }
    let pi = p.marginal_masses(&[0]);
    let pj = p.marginal_masses(&[1]);
    let kept_i: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] > 0.0).collect();
    let kept_j: Vec<usize> = (0..pj.len()).filter(|&j| pj[j] > 0.0).collect();
    let (ni, nj) = (kept_i.len(), kept_j.len());
    let mut q = Vec::with_capacity(ni * nj);
    for &i in &kept_i {
        for &j in &kept_j {
            q.push(p.get(&[i, j]));
        }
    }
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    let q = JointPmf::new(vec![ni, nj], q)?;
    let qi = q.marginal_masses(&[0]);
    let qj = q.marginal_masses(&[1]);

    let mut mixed = vec![0.0; ni * ni * nj];
    for i in 0..ni {
        for it in 0..ni {
            let cond = if i == it { 1.0 - alpha } else { 0.0 } + alpha * qi[i];
            for j in 0..nj {
                mixed[(i * ni + it) * nj + j] = cond * q.get(&[it, j]);
            }
        }
    }
    let mixed = JointPmf::new(vec![ni, ni, nj], mixed)?;
    let new_i = mixed.marginal_masses(&[0]);
    let marginal_gap = new_i.iter().zip(&qi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let p_equal = (0..ni).map(|i| mixed.marginal_masses(&[0, 1])[i * ni + i]).sum();
    let ij = mixed.marginal_pair(0, 2)?;
    let mi_new = mutual_information(&ij)?;
    let beta = mutual_information(&q)?;
    let ij_i = ij.marginal_masses(&[0]);
    let product: Vec<f64> = ij_i.iter().flat_map(|&a| qj.iter().map(move |&b| a * b)).collect();
    let kl_reverse = kl_of(&product, ij.probs()).value();
    let bound = (2.0 * beta).sqrt() * (1.0 / alpha).log2();
    Ok(MixReport {
        alpha,
        beta,
        p_equal,
        marginal_gap,
        mi_new,
        kl_reverse,
        bound,
        kept_i,
        kept_j,
        joint: Some(mixed),
    })
}

/// Error-probability estimate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub errors: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = z * z;
    let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lower = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let upper = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lower, upper)
}

/// Counts decoding errors over `trials` keyed trials in parallel.
fn count_errors(trials: u64, seed: u64, trial: impl Fn(&mut ChaCha8Rng) -> Result<bool> + Sync) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::OutOfRange("at least one trial".into()));
    }
    let errors = (0..trials)
        .into_par_iter()
        .map(|t| trial(&mut stream(seed, Purpose::MonteCarlo, &[t])).map(u64::from))
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let (lower, upper) = wilson_interval(errors, trials, Z95);
    Ok(McEstimate {
        trials,
        errors,
        estimate: errors as f64 / trials as f64,
        lower,
        upper,
        seed,
    })
}

/// Sends a uniform message through `cb` and `bob`; true on a decoding error.
fn one_trial<R: rand::Rng>(cb: &Codebook, bob: &Dmc, rule: Decoder, rng: &mut R) -> Result<bool> {
    let m = rng.gen_range(0..cb.messages());
    let k = rng.gen::<u64>();
    let x = cb.encode(m, k)?;
    let y: Vec<usize> = x.iter().map(|&a| sample_index(rng, bob.row(a))).collect();
    Ok(decode(cb, bob, &y, rule)? != m)
}

/// Simulates `(m, k_a, y)` and decodes; trial `t` draws from its own keyed
/// stream, so the result does not depend on scheduling.
pub fn monte_carlo(cb: &Codebook, bob: &Dmc, trials: u64, seed: u64, rule: Decoder) -> Result<McEstimate> {
    if bob.in_size() != cb.x_size() {
        return Err(Error::Dimension("channel input does not match the code alphabet".into()));
    }
    count_errors(trials, seed, |rng| one_trial(cb, bob, rule, rng))
}

/// Random-coding average: every trial draws a fresh i.i.d. codebook from
/// its own stream before sending one message through it.
pub fn monte_carlo_ensemble(
    p_x: &Pmf,
    n: usize,
    rate: f64,
    bob: &Dmc,
    trials: u64,
    seed: u64,
    rule: Decoder,
) -> Result<McEstimate> {
    if bob.in_size() != p_x.probs().len() {
        return Err(Error::Dimension("channel input does not match the input law".into()));
    }
    count_errors(trials, seed, |rng| {
        let cb = build_iid_codebook(p_x, n, rate, rng.gen::<u64>())?;
        one_trial(&cb, bob, rule, rng)
    })
}

/// Binary entropy, used by the reliability sanity checks.
pub fn binary_entropy(q: f64) -> f64 {
    entropy_of(&[q, 1.0 - q])
}
