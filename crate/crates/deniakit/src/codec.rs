//! Codebooks, encoding, decoding, the setting-specific `Msg` maps and the
//! faking procedures.
//!
//! Messages of split codes are laid out as `m = (t << s_bits) | s`: the top
//! bits `t` select the cloud, the low bits `s` the satellite. Randomized
//! codes store `|M| * |K|` words, word `(m, r)` at index `m * |K| + r`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::channel::{is_strongly_typical, Dmc};
use crate::error::{Error, Result};
use crate::probkit::Pmf;
use crate::rng::{sample_index, stream, Purpose};
use crate::zeroinfo::{zero_info_partition, ZeroInfoPartition};

/// Largest number of stored codeword symbols (`|M| |K| n`).
pub const WORD_BUDGET: f64 = (1u64 << 28) as f64;

/// Largest number of candidate outputs the receiver faker enumerates.
pub const FAKE_BUDGET: f64 = (1u64 << 26) as f64;

/// Who is summoned to reveal their view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Message,
    Transmitter,
    Receiver,
}

/// Superposition / binning layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub cloud_count: usize,
    /// One length-`n` word per cloud over the auxiliary alphabet.
    pub cloud_words: Vec<Vec<usize>>,
    /// Cloud of each message.
    pub cloud_of: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub s_bits: u32,
    pub t_bits: u32,
    pub r_bits: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    x_size: usize,
    messages: usize,
    randomness: usize,
    words: Vec<Vec<usize>>,
    layer: Option<Layer>,
    split: Option<Split>,
    seed: u64,
    input_law: Option<Vec<f64>>,
    /// Messages carrying each distinct word, with multiplicity, ascending.
    index: HashMap<Vec<usize>, Vec<usize>>,
}

/// Rounds `n * rate` to a bit count.
pub fn bits_for(n: usize, rate: f64) -> Result<u32> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::OutOfRange(format!("rate {rate}")));
    }
    let b = (n as f64 * rate).round();
    if b > 40.0 {
        return Err(Error::BudgetExceeded {
            needed: b.exp2(),
            budget: WORD_BUDGET,
        });
    }
    Ok(b as u32)
}

fn check_budget(words: usize, n: usize) -> Result<()> {
    let needed = words as f64 * n.max(1) as f64;
    if needed > WORD_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: WORD_BUDGET,
        });
    }
    Ok(())
}

fn draw_sequence(rng: &mut rand_chacha::ChaCha8Rng, law: &[f64], n: usize) -> Vec<usize> {
    (0..n).map(|_| sample_index(rng, law)).collect()
}

impl Codebook {
    fn assemble(
        n: usize,
        x_size: usize,
        messages: usize,
        randomness: usize,
        words: Vec<Vec<usize>>,
        layer: Option<Layer>,
        split: Option<Split>,
        seed: u64,
        input_law: Option<Vec<f64>>,
    ) -> Result<Self> {
        if messages == 0 || randomness == 0 || words.len() != messages * randomness {
            return Err(Error::Codebook(format!(
                "{} words for {messages} messages x {randomness} randomness values",
                words.len()
            )));
        }
        for w in &words {
            if w.len() != n {
                return Err(Error::Codebook(format!("word of length {} in a length-{n} code", w.len())));
            }
            if let Some(&s) = w.iter().find(|&&s| s >= x_size) {
                return Err(Error::SymbolOutOfRange { index: s, size: x_size });
            }
        }
        if let Some(sp) = split {
            if messages != 1usize << (sp.s_bits + sp.t_bits) || randomness != 1usize << sp.r_bits {
                return Err(Error::Codebook("split does not match the message count".into()));
            }
        }
        if let Some(l) = &layer {
            if l.cloud_of.len() != messages || l.cloud_words.len() != l.cloud_count {
                return Err(Error::Codebook("layer does not match the message count".into()));
            }
            if l.cloud_of.iter().any(|&j| j >= l.cloud_count) {
                return Err(Error::Codebook("cloud index out of range".into()));
            }
        }
        let mut index: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            index.entry(w.clone()).or_default().push(i / randomness);
        }
        Ok(Codebook {
            n,
            x_size,
            messages,
            randomness,
            words,
            layer,
            split,
            seed,
            input_law,
            index,
        })
    }

    /// A deterministic code from explicit words (one per message).
    pub fn from_words(n: usize, x_size: usize, words: Vec<Vec<usize>>) -> Result<Self> {
        let m = words.len();
        Self::assemble(n, x_size, m, 1, words, None, None, 0, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn x_size(&self) -> usize {
        self.x_size
    }
    pub fn messages(&self) -> usize {
        self.messages
    }
    /// `|K|`, the number of encoder randomness values.
    pub fn randomness(&self) -> usize {
        self.randomness
    }
    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }
    pub fn layer(&self) -> Option<&Layer> {
        self.layer.as_ref()
    }
    pub fn split(&self) -> Option<Split> {
        self.split
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn input_law(&self) -> Option<&[f64]> {
        self.input_law.as_deref()
    }

    /// Realized rate `log2 |M| / n`.
    pub fn rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.messages as f64).log2() / self.n as f64
        }
    }

    pub fn word(&self, m: usize, r: usize) -> &[usize] {
        &self.words[m * self.randomness + r]
    }

    /// Messages (with multiplicity) whose words equal `x`.
    pub fn messages_of(&self, x: &[usize]) -> &[usize] {
        self.index.get(x).map_or(&[], |v| v.as_slice())
    }

    pub fn all_distinct(&self) -> bool {
        self.index.len() == self.words.len()
    }

    /// All `(m, r)` word indices of cloud `j`.
    pub fn cloud_members(&self, j: usize) -> Vec<usize> {
        match &self.layer {
            Some(l) => (0..self.messages)
                .filter(|&m| l.cloud_of[m] == j)
                .flat_map(|m| (0..self.randomness).map(move |r| m * self.randomness + r))
                .collect(),
            None => (0..self.words.len()).collect(),
        }
    }

    /// The stored word for message `m`; `k_a` picks the randomness index.
    pub fn encode(&self, m: usize, k_a: u64) -> Result<&[usize]> {
        if m >= self.messages {
            return Err(Error::MessageOutOfRange {
                message: m,
                count: self.messages,
            });
        }
        let r = (k_a % self.randomness as u64) as usize;
        Ok(self.word(m, r))
    }
}

/// Codebook with `2^round(nR)` words drawn i.i.d. from `p_x`.
pub fn build_iid_codebook(p_x: &Pmf, n: usize, rate: f64, seed: u64) -> Result<Codebook> {
    let bits = bits_for(n, rate)?;
    let messages = 1usize << bits;
    check_budget(messages, n)?;
    let words = (0..messages)
        .map(|m| {
            let mut rng = stream(seed, Purpose::Codebook, &[m as u64]);
            draw_sequence(&mut rng, p_x.probs(), n)
        })
        .collect();
    Codebook::assemble(
        n,
        p_x.support_size(),
        messages,
        1,
        words,
        None,
        Some(Split {
            s_bits: 0,
            t_bits: bits,
            r_bits: 0,
        }),
        seed,
        Some(p_x.probs().to_vec()),
    )
}

/// Cloud and satellite bit counts `(round(n(R-D)), round(nD))`.
pub fn superposition_bits(n: usize, rate: f64, deniability: f64) -> Result<(u32, u32)> {
    if deniability < 0.0 || rate < deniability {
        return Err(Error::OutOfRange(format!(
            "need R >= D >= 0, got R = {rate}, D = {deniability}"
        )));
    }
    Ok((bits_for(n, rate - deniability)?, bits_for(n, deniability)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionParams {
    /// Law of the cloud symbols, one entry per zero-information class.
    pub p_u: Pmf,
    /// Satellite symbols given the class; row `u` must live on class `u`.
    pub p_x_given_u: Dmc,
    pub partition: ZeroInfoPartition,
    pub n: usize,
    pub t_bits: u32,
    pub s_bits: u32,
    pub seed: u64,
    /// Redraw the whole codebook until all codewords differ.
    pub distinct: bool,
}

const DISTINCT_ATTEMPTS: u64 = 10_000;

/// Superposition code over the zero-information classes: cloud words over
/// classes, satellites drawn symbol-wise inside each class.
pub fn build_superposition_codebook(params: &SuperpositionParams) -> Result<Codebook> {
    let SuperpositionParams {
        p_u,
        p_x_given_u,
        partition,
        n,
        t_bits,
        s_bits,
        seed,
        distinct,
    } = params;
    let n = *n;
    let nu = partition.num_classes();
    if p_u.support_size() != nu || p_x_given_u.in_size() != nu {
        return Err(Error::Codebook(format!(
            "cloud law and satellite rows must range over the {nu} classes"
        )));
    }
    if p_x_given_u.out_size() != partition.alphabet_size() {
        return Err(Error::Codebook("satellite rows must range over X".into()));
    }
    for u in 0..nu {
        for x in 0..partition.alphabet_size() {
            if p_x_given_u.get(u, x) > 0.0 && partition.class_of(x) != u {
                return Err(Error::Codebook(format!(
                    "P(x|u) puts mass on symbol {x} outside class {u}"
                )));
            }
        }
    }
    let clouds = 1usize << t_bits;
    let sats = 1usize << s_bits;
    check_budget(clouds * sats, n)?;
    let attempts = if *distinct { DISTINCT_ATTEMPTS } else { 1 };
    for attempt in 0..attempts {
        let cloud_words: Vec<Vec<usize>> = (0..clouds)
            .map(|j| {
                let mut rng = stream(*seed, Purpose::Cloud, &[attempt, j as u64]);
                draw_sequence(&mut rng, p_u.probs(), n)
            })
            .collect();
        let mut words = Vec::with_capacity(clouds * sats);
        let mut cloud_of = Vec::with_capacity(clouds * sats);
        for (j, cw) in cloud_words.iter().enumerate() {
            for s in 0..sats {
                let mut rng = stream(*seed, Purpose::Satellite, &[attempt, j as u64, s as u64]);
                words.push(cw.iter().map(|&u| sample_index(&mut rng, p_x_given_u.row(u))).collect());
                cloud_of.push(j);
            }
        }
        let mut law = vec![0.0; partition.alphabet_size()];
        for u in 0..nu {
            for (x, l) in law.iter_mut().enumerate() {
                *l += p_u.get(u) * p_x_given_u.get(u, x);
            }
        }
        let cb = Codebook::assemble(
            n,
            partition.alphabet_size(),
            clouds * sats,
            1,
            words,
            Some(Layer {
                cloud_count: clouds,
                cloud_words,
                cloud_of,
            }),
            Some(Split {
                s_bits: *s_bits,
                t_bits: *t_bits,
                r_bits: 0,
            }),
            *seed,
            Some(law),
        )?;
        if !distinct || cb.all_distinct() {
            return Ok(cb);
        }
    }
    Err(Error::Codebook(format!(
        "no codebook with distinct words in {DISTINCT_ATTEMPTS} draws"
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinningParams {
    pub p_v: Pmf,
    pub p_u_given_v: Dmc,
    pub p_x_given_u: Dmc,
    pub n: usize,
    pub t_bits: u32,
    pub s_bits: u32,
    pub r_bits: u32,
    pub seed: u64,
}

/// Binning code: clouds indexed by `t` drawn from `P_V`; inside a cloud,
/// satellites indexed by `(s, r)` drawn through `P_{U|V}` then `P_{X|U}`.
pub fn build_binning_codebook(params: &BinningParams) -> Result<Codebook> {
    let BinningParams {
        p_v,
        p_u_given_v,
        p_x_given_u,
        n,
        t_bits,
        s_bits,
        r_bits,
        seed,
    } = params;
    let n = *n;
    if p_u_given_v.in_size() != p_v.support_size() || p_x_given_u.in_size() != p_u_given_v.out_size() {
        return Err(Error::Dimension("auxiliary chain V - U - X does not line up".into()));
    }
    let clouds = 1usize << t_bits;
    let sats = 1usize << s_bits;
    let keys = 1usize << r_bits;
    check_budget(clouds * sats * keys, n)?;
    let cloud_words: Vec<Vec<usize>> = (0..clouds)
        .map(|j| {
            let mut rng = stream(*seed, Purpose::Cloud, &[j as u64]);
            draw_sequence(&mut rng, p_v.probs(), n)
        })
        .collect();
    let mut words = Vec::with_capacity(clouds * sats * keys);
    let mut cloud_of = Vec::with_capacity(clouds * sats);
    for (j, cw) in cloud_words.iter().enumerate() {
        for s in 0..sats {
            cloud_of.push(j);
            for r in 0..keys {
                let mut rng = stream(*seed, Purpose::Satellite, &[j as u64, s as u64, r as u64]);
                let word = cw
                    .iter()
                    .map(|&v| {
                        let u = sample_index(&mut rng, p_u_given_v.row(v));
                        sample_index(&mut rng, p_x_given_u.row(u))
                    })
                    .collect();
                words.push(word);
            }
        }
    }
    let pu = p_u_given_v.output_law(p_v.probs());
    let law = p_x_given_u.output_law(&pu);
    Codebook::assemble(
        n,
        p_x_given_u.out_size(),
        clouds * sats,
        keys,
        words,
        Some(Layer {
            cloud_count: clouds,
            cloud_words,
            cloud_of,
        }),
        Some(Split {
            s_bits: *s_bits,
            t_bits: *t_bits,
            r_bits: *r_bits,
        }),
        *seed,
        Some(law),
    )
}

/// Decoding rule for Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Decoder {
    /// Maximum likelihood over messages, averaging over `K`.
    Ml,
    /// Smallest message with a jointly typical codeword.
    Typical { eps: f64 },
}

/// Transition probabilities grouped by exact value, so that words whose
/// likelihoods are equal as products also get bit-identical log scores.
struct LikelihoodTable {
    ny: usize,
    class: Vec<usize>,
    logs: Vec<f64>,
}

impl LikelihoodTable {
    fn new(bob: &Dmc) -> Self {
        let mut values: Vec<f64> = bob.flat().to_vec();
        values.sort_by(|a, b| a.total_cmp(b));
        values.dedup();
        let class = bob
            .flat()
            .iter()
            .map(|v| values.binary_search_by(|a| a.total_cmp(v)).expect("value present"))
            .collect();
        let logs = values.iter().map(|v| v.ln()).collect();
        LikelihoodTable {
            ny: bob.out_size(),
            class,
            logs,
        }
    }

    fn log_likelihood(&self, x: &[usize], y: &[usize], counts: &mut Vec<u32>) -> f64 {
        counts.clear();
        counts.resize(self.logs.len(), 0);
        for (&a, &b) in x.iter().zip(y) {
            counts[self.class[a * self.ny + b]] += 1;
        }
        let mut ll = 0.0;
        for (&c, &l) in counts.iter().zip(&self.logs) {
            if c > 0 {
                if l == f64::NEG_INFINITY {
                    return l;
                }
                ll += c as f64 * l;
            }
        }
        ll
    }
}

fn check_output(cb: &Codebook, bob: &Dmc, y: &[usize]) -> Result<()> {
    if y.len() != cb.n {
        return Err(Error::Dimension(format!("received {} symbols, n = {}", y.len(), cb.n)));
    }
    if bob.in_size() != cb.x_size {
        return Err(Error::Dimension("channel input does not match the code alphabet".into()));
    }
    if let Some(&s) = y.iter().find(|&&s| s >= bob.out_size()) {
        return Err(Error::SymbolOutOfRange {
            index: s,
            size: bob.out_size(),
        });
    }
    Ok(())
}

/// Bob's estimate of the message from `y`. Ties go to the smallest index.
pub fn decode(cb: &Codebook, bob: &Dmc, y: &[usize], rule: Decoder) -> Result<usize> {
    check_output(cb, bob, y)?;
    match rule {
        Decoder::Ml => {
            let table = LikelihoodTable::new(bob);
            let mut counts = Vec::new();
            let mut best = (f64::NEG_INFINITY, 0usize);
            let mut lls = vec![0.0; cb.randomness];
            for m in 0..cb.messages {
                for (r, l) in lls.iter_mut().enumerate() {
                    *l = table.log_likelihood(cb.word(m, r), y, &mut counts);
                }
                let top = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let score = if top == f64::NEG_INFINITY || lls.len() == 1 {
                    top
                } else {
                    top + lls.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
                };
                if score > best.0 {
                    best = (score, m);
                }
            }
            Ok(best.1)
        }
        Decoder::Typical { eps } => {
            let law = cb
                .input_law
                .as_ref()
                .ok_or_else(|| Error::Unsupported("typicality decoding needs the input law".into()))?;
            let ny = bob.out_size();
            let mut joint = Vec::with_capacity(law.len() * ny);
            for (a, &pa) in law.iter().enumerate() {
                joint.extend(bob.row(a).iter().map(|w| pa * w));
            }
            let joint = Pmf::new(joint)?;
            if cb.n == 0 {
                return Ok(0);
            }
            for m in 0..cb.messages {
                for r in 0..cb.randomness {
                    let pairs: Vec<usize> = cb.word(m, r).iter().zip(y).map(|(&a, &b)| a * ny + b).collect();
                    if is_strongly_typical(&pairs, &joint, eps)? {
                        return Ok(m);
                    }
                }
            }
            Ok(0)
        }
    }
}

/// Transmitter `Msg`: the most likely message given the codeword, smallest
/// index on ties, message 0 for a word outside the codebook.
pub fn transmitter_msg(cb: &Codebook, x: &[usize]) -> usize {
    let ms = cb.messages_of(x);
    let mut best = (0usize, 0usize);
    let mut i = 0;
    while i < ms.len() {
        let m = ms[i];
        let mut c = 0;
        while i < ms.len() && ms[i] == m {
            c += 1;
            i += 1;
        }
        if c > best.0 {
            best = (c, m);
        }
    }
    best.1
}

/// The setting's map from a revealed value back to a message. In the
/// message setting `w` is `[m]`.
pub fn msg_of(setting: Setting, cb: &Codebook, bob: &Dmc, w: &[usize], rule: Decoder) -> Result<usize> {
    match setting {
        Setting::Message => match w {
            [m] if *m < cb.messages => Ok(*m),
            [m] => Err(Error::MessageOutOfRange {
                message: *m,
                count: cb.messages,
            }),
            _ => Err(Error::Dimension("a message is a single index".into())),
        },
        Setting::Transmitter => {
            if w.len() != cb.n {
                return Err(Error::Dimension(format!("word of length {}, n = {}", w.len(), cb.n)));
            }
            Ok(transmitter_msg(cb, w))
        }
        Setting::Receiver => decode(cb, bob, w, rule),
    }
}

/// Faking procedures. Each has an exact conditional law given the true
/// value; sampling draws from that law with the faker's private key.
#[derive(Debug, Clone, PartialEq)]
pub enum Faker {
    Identity,
    /// Keep `t`, redraw `s` uniformly.
    MessageSplit { s_bits: u32, t_bits: u32 },
    /// Keep the message with probability `keep`, else draw uniformly.
    MessageMixed { keep: f64 },
    /// Uniform over the sub-code of the true codeword's cloud.
    Clique,
    /// Uniform over the whole codebook.
    NaiveUniform,
    /// Keep the codeword with probability `keep`, else uniform over the
    /// codebook.
    TransmitterMixed { keep: f64 },
    /// Redraw `y` from the code-induced law of `Y` given its class
    /// sequence under the degradation map.
    Receiver { partition: ZeroInfoPartition },
}

impl Faker {
    pub fn receiver(witness: &Dmc, row_tol: f64) -> Self {
        Faker::Receiver {
            partition: zero_info_partition(witness, row_tol),
        }
    }

    /// The setting this faker applies to; `None` for the identity.
    pub fn setting(&self) -> Option<Setting> {
        match self {
            Faker::Identity => None,
            Faker::MessageSplit { .. } | Faker::MessageMixed { .. } => Some(Setting::Message),
            Faker::Clique | Faker::NaiveUniform | Faker::TransmitterMixed { .. } => {
                Some(Setting::Transmitter)
            }
            Faker::Receiver { .. } => Some(Setting::Receiver),
        }
    }

    /// Exact law of the fake value given `w`, merged and sorted.
    pub fn law(&self, cb: &Codebook, bob: &Dmc, w: &[usize]) -> Result<Vec<(Vec<usize>, f64)>> {
        let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut add = |k: Vec<usize>, p: f64| {
            if p > 0.0 {
                *acc.entry(k).or_insert(0.0) += p;
            }
        };
        match self {
            Faker::Identity => add(w.to_vec(), 1.0),
            Faker::MessageSplit { s_bits, t_bits } => {
                let m = single_message(cb, w)?;
                if cb.messages != 1usize << (s_bits + t_bits) {
                    return Err(Error::Codebook(format!(
                        "split ({s_bits}, {t_bits}) does not fit {} messages",
                        cb.messages
                    )));
                }
                let t = m >> s_bits;
                let k = 1usize << s_bits;
                for s in 0..k {
                    add(vec![(t << s_bits) | s], 1.0 / k as f64);
                }
            }
            Faker::MessageMixed { keep } => {
                let m = single_message(cb, w)?;
                check_keep(*keep)?;
                add(vec![m], *keep);
                for m2 in 0..cb.messages {
                    add(vec![m2], (1.0 - keep) / cb.messages as f64);
                }
            }
            Faker::Clique => {
                if cb.messages_of(w).is_empty() {
                    return Err(Error::NotACodeword);
                }
                let layer = cb
                    .layer
                    .as_ref()
                    .ok_or_else(|| Error::Codebook("clique faking needs a layered codebook".into()))?;
                let j = layer.cloud_of[transmitter_msg(cb, w)];
                let members = cb.cloud_members(j);
                for &i in &members {
                    add(cb.words[i].clone(), 1.0 / members.len() as f64);
                }
            }
            Faker::NaiveUniform | Faker::TransmitterMixed { .. } => {
                if cb.messages_of(w).is_empty() {
                    return Err(Error::NotACodeword);
                }
                let keep = match self {
                    Faker::TransmitterMixed { keep } => {
                        check_keep(*keep)?;
                        *keep
                    }
                    _ => 0.0,
                };
                add(w.to_vec(), keep);
                let total = cb.words.len() as f64;
                for word in &cb.words {
                    add(word.clone(), (1.0 - keep) / total);
                }
            }
            Faker::Receiver { partition } => {
                check_output(cb, bob, w)?;
                if partition.alphabet_size() != bob.out_size() {
                    return Err(Error::Dimension("partition must cover Y".into()));
                }
                return receiver_law(cb, bob, partition, w);
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// One fake value drawn with key `k`.
    pub fn sample(&self, cb: &Codebook, bob: &Dmc, w: &[usize], k: u64) -> Result<Vec<usize>> {
        let law = self.law(cb, bob, w)?;
        let weights: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
        let mut rng = stream(k, Purpose::Faker, &[]);
        Ok(law[sample_index(&mut rng, &weights)].0.clone())
    }
}

fn check_keep(keep: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::OutOfRange(format!("keep probability {keep}")));
    }
    Ok(())
}

fn single_message(cb: &Codebook, w: &[usize]) -> Result<usize> {
    match w {
        [m] if *m < cb.messages => Ok(*m),
        [m] => Err(Error::MessageOutOfRange {
            message: *m,
            count: cb.messages,
        }),
        _ => Err(Error::Dimension("a message is a single index".into())),
    }
}

/// `Q(y' | v) ∝ sum_{m,r} P(y' | x(m, r))` over `y'` with class sequence `v`.
fn receiver_law(
    cb: &Codebook,
    bob: &Dmc,
    partition: &ZeroInfoPartition,
    y: &[usize],
) -> Result<Vec<(Vec<usize>, f64)>> {
    let choices: Vec<&[usize]> = y
        .iter()
        .map(|&s| partition.classes()[partition.class_of(s)].as_slice())
        .collect();
    let count: f64 = choices.iter().map(|c| c.len() as f64).product();
    if count > FAKE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget: FAKE_BUDGET,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut digits = vec![0usize; y.len()];
    let mut total = 0.0;
    loop {
        let cand: Vec<usize> = digits.iter().zip(&choices).map(|(&d, c)| c[d]).collect();
        let mut weight = 0.0;
        for word in &cb.words {
            let mut p = 1.0;
            for (&a, &b) in word.iter().zip(&cand) {
                p *= bob.get(a, b);
                if p == 0.0 {
                    break;
                }
            }
            weight += p;
        }
        if weight > 0.0 {
            total += weight;
            out.push((cand, weight));
        }
        // odometer over the per-position choices
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            break;
        }
    }
    if total <= 0.0 {
        return Err(Error::ZeroProbability(
            "class sequence has zero probability under the code".into(),
        ));
    }
    for (_, p) in out.iter_mut() {
        *p /= total;
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// `(s', t)` with `s'` drawn uniformly from the key `k_c`.
pub fn fake_message(m: usize, split: (u32, u32), k_c: u64) -> Result<usize> {
    let (s_bits, t_bits) = split;
    if s_bits + t_bits >= usize::BITS || m >> (s_bits + t_bits) != 0 {
        return Err(Error::MessageOutOfRange {
            message: m,
            count: 1usize.checked_shl(s_bits + t_bits).unwrap_or(usize::MAX),
        });
    }
    let mut rng = stream(k_c, Purpose::Faker, &[]);
    let s = (rand::Rng::gen::<u64>(&mut rng) as usize) & ((1usize << s_bits) - 1);
    Ok(((m >> s_bits) << s_bits) | s)
}

/// Uniform draw from the true codeword's sub-code.
pub fn fake_transmitter(cb: &Codebook, x: &[usize], k_a: u64) -> Result<Vec<usize>> {
    Faker::Clique.sample(cb, &Dmc::identity(cb.x_size), x, k_a)
}

/// Redraw of `y` from the code-induced law given its class sequence.
pub fn fake_receiver(cb: &Codebook, bob: &Dmc, witness: &Dmc, row_tol: f64, y: &[usize], k_b: u64) -> Result<Vec<usize>> {
    Faker::receiver(witness, row_tol).sample(cb, bob, y, k_b)
}

/// Mixed-radix packing of a sequence into a `u64` (first symbol least
/// significant).
pub fn pack(seq: &[usize], base: usize) -> u64 {
    seq.iter().rev().fold(0u64, |acc, &s| acc * base as u64 + s as u64)
}

pub fn unpack(mut code: u64, base: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let s = (code % base as u64) as usize;
            code /= base as u64;
            s
        })
        .collect()
}

/// JSON dump of a codebook with symbol names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CodebookFile {
    pub n: usize,
    pub messages: usize,
    pub randomness: usize,
    pub rate: f64,
    pub seed: u64,
    pub x: Vec<String>,
    pub words: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_law: Option<Vec<f64>>,
}

impl Codebook {
    pub fn to_file(&self, x_names: &[String]) -> CodebookFile {
        CodebookFile {
            n: self.n,
            messages: self.messages,
            randomness: self.randomness,
            rate: self.rate(),
            seed: self.seed,
            x: x_names.to_vec(),
            words: self
                .words
                .iter()
                .map(|w| w.iter().map(|&s| x_names[s].clone()).collect())
                .collect(),
            layer: self.layer.clone(),
            split: self.split,
            input_law: self.input_law.clone(),
        }
    }

    pub fn from_file(f: &CodebookFile) -> Result<Self> {
        let lookup: HashMap<&str, usize> = f.x.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let words = f
            .words
            .iter()
            .map(|w| {
                w.iter()
                    .map(|s| {
                        lookup
                            .get(s.as_str())
                            .copied()
                            .ok_or_else(|| Error::Codebook(format!("unknown symbol {s:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Codebook::assemble(
            f.n,
            f.x.len(),
            f.messages,
            f.randomness,
            words,
            f.layer.clone(),
            f.split,
            f.seed,
            f.input_law.clone(),
        )
    }
}
