//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use deniakit::channel::{BroadcastChannel, Dmc};
use deniakit::codec::{
    build_iid_codebook, build_superposition_codebook, unpack, Codebook, Decoder, Faker, Setting,
    SuperpositionParams,
};
use deniakit::evalx::{
    binary_entropy, bound_checks, constants, deniability_rate, equivocation, error_probability,
    exact_joint, mix_for_reverse_kl, monte_carlo, monte_carlo_ensemble, plausibility_kl, ExactJoint,
};
use deniakit::probkit::{JointPmf, Pmf};
use deniakit::regions::{
    bec_closed_form_rate, closed_form_region, default_grid, inclusion_margin, message_region,
    ternary_entropy, transmitter_region, ClosedForm, RegionConfig,
};
use deniakit::rng::{flat_dirichlet, stream, Purpose};
use deniakit::zeroinfo::{zero_info_partition, ROW_TOL};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn example2() -> BroadcastChannel {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/example2.json"))
        .expect("example2.json");
    BroadcastChannel::from_json_str(&text).expect("valid channel")
}

fn superposition_code(ch: &BroadcastChannel, distinct: bool) -> Codebook {
    build_superposition_codebook(&SuperpositionParams {
        p_u: Pmf::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        p_x_given_u: Dmc::new(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
        partition: zero_info_partition(&ch.judy(), ROW_TOL),
        n: 3,
        t_bits: 1,
        s_bits: 2,
        seed: 7,
        distinct,
    })
    .unwrap()
}

/// Noisy Bob over three symbols whose eavesdropper is the three-symbol
/// example's `P(z|y)`, so the `Y` partition is `{y1,y2} {y3}`.
fn degraded_three_symbol() -> (BroadcastChannel, Dmc) {
    let witness = Dmc::new(vec![vec![0.3, 0.7, 0.0], vec![0.3, 0.7, 0.0], vec![0.0, 0.4, 0.6]]).unwrap();
    let bob = Dmc::new(vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.1, 0.8]]).unwrap();
    (BroadcastChannel::degraded(&bob, &witness).unwrap(), witness)
}

fn c1() -> Outcome {
    let ch = example2();
    let judy = ch.judy();
    let t = Instant::now();
    let part = zero_info_partition(&judy, ROW_TOL);
    let took = t.elapsed();
    let shown = part.display_with(ch.x_names());
    let pass = shown == "{w1,w2} {w3}" && part.classes() == [vec![0, 1], vec![2]] && took < Duration::from_millis(1);
    outcome(pass, format!("classes {shown} in {took:?}"))
}

fn c2() -> Outcome {
    let ch = example2();
    let ds = [0.0, 0.2, 0.4, 2.0 / 3.0, 0.9, 1.0];
    let t = Instant::now();
    let b = match transmitter_region(&ch, Some(&ds), &RegionConfig::default()) {
        Ok(b) => b,
        Err(e) => return outcome(false, e.to_string()),
    };
    let took = t.elapsed();
    let mut worst: f64 = 0.0;
    let mut missing = 0;
    for &d in &ds {
        // the ternary expression is the frontier once D >= 2/3; below that
        // the full log2(3) is already available
        let e = d.max(2.0 / 3.0);
        let want = ternary_entropy(e / 2.0, e / 2.0, 1.0 - e);
        match b.rate_at(d) {
            Some(r) => worst = worst.max((r - want).abs()),
            None => missing += 1,
        }
    }
    let at_23 = b.rate_at(2.0 / 3.0).map(|r| (r - 3f64.log2()).abs() <= 1e-3).unwrap_or(false);
    let at_1 = b.rate_at(1.0).map(|r| (r - 1.0).abs() <= 1e-3).unwrap_or(false);
    let pass = missing == 0 && worst <= 1e-3 && at_23 && at_1 && took < Duration::from_secs(60);
    outcome(pass, format!("max |R - H_t| = {worst:.2e}, {missing} missing, {took:?}"))
}

fn c3() -> Outcome {
    let t = Instant::now();
    let mut worst_margin = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    for p in [0.2, 0.5, 0.8] {
        let grid = default_grid(p, 101);
        let region = |k| closed_form_region(k, p, Some(&grid), 101).unwrap();
        let (bcc, rm, eq) = (region(ClosedForm::Rbcc), region(ClosedForm::Rm), region(ClosedForm::Req));
        if rm.points.len() != 101 || eq.points.len() != 101 || bcc.points.len() != 101 {
            return outcome(false, format!("p = {p}: closed forms not defined on the whole grid"));
        }
        worst_margin = worst_margin
            .min(inclusion_margin(&bcc, &rm).unwrap())
            .min(inclusion_margin(&rm, &eq).unwrap());
        let ch = BroadcastChannel::erasure_example(p).unwrap();
        let opt = match message_region(&ch, Some(&grid), None, &RegionConfig::default()) {
            Ok(b) => b,
            Err(e) => return outcome(false, e.to_string()),
        };
        if opt.points.len() != grid.len() {
            return outcome(false, format!("p = {p}: optimizer missed {} grid points", grid.len() - opt.points.len()));
        }
        for pt in &opt.points {
            let want = bec_closed_form_rate(ClosedForm::Rm, p, pt.d).unwrap().unwrap();
            worst_gap = worst_gap.max((pt.r - want).abs());
        }
    }
    let took = t.elapsed();
    let pass = worst_margin >= -1e-9 && worst_gap <= 2e-2 && took < Duration::from_secs(300);
    outcome(
        pass,
        format!("inclusion margin {worst_margin:.2e}, optimizer gap {worst_gap:.2e}, {took:?}"),
    )
}

fn c4() -> Outcome {
    let ch = example2();
    let cb = superposition_code(&ch, false);
    let t = Instant::now();
    let j = exact_joint(Setting::Transmitter, &cb, &ch, &Faker::Clique, Decoder::Ml).unwrap();
    let kl_tx = plausibility_kl(&j).value();
    let took_tx = t.elapsed();

    let (ch, witness) = degraded_three_symbol();
    let faker = Faker::receiver(&witness, ROW_TOL);
    let nontrivial = match &faker {
        Faker::Receiver { partition } => !partition.is_trivial(),
        _ => false,
    };
    let cb = build_iid_codebook(&Pmf::uniform(3), 3, 1.0, 7).unwrap();
    let t = Instant::now();
    let j = exact_joint(Setting::Receiver, &cb, &ch, &faker, Decoder::Ml).unwrap();
    let kl_rx = plausibility_kl(&j).value();
    let took_rx = t.elapsed();
    let pass = kl_tx <= 1e-12
        && kl_rx <= 1e-12
        && nontrivial
        && took_tx < Duration::from_secs(30)
        && took_rx < Duration::from_secs(30);
    outcome(
        pass,
        format!("tx KL {kl_tx:.2e} ({took_tx:?}), rx KL {kl_rx:.2e} ({took_rx:?})"),
    )
}

fn c5() -> Outcome {
    let ch = example2();
    let cb = superposition_code(&ch, true);
    if !cb.all_distinct() {
        return outcome(false, "codebook words are not distinct");
    }
    let j = exact_joint(Setting::Transmitter, &cb, &ch, &Faker::Clique, Decoder::Ml).unwrap();
    let h_m_zx = equivocation(&j).h_m_given_fake_z;
    let h_msg_x = j.entropy(|e| (e.w, e.mt)) - j.entropy(|e| e.w);
    let target = (3.0 * deniability_rate(&j)).round();
    let pass = target == 2.0 && (h_m_zx - target).abs() <= 1e-9 && (h_msg_x - target).abs() <= 1e-9;
    outcome(pass, format!("H(M|Z,X~) = {h_m_zx:.12}, H(Msg(X~)|X) = {h_msg_x:.12}, round(nD) = {target}"))
}

fn naive_joint() -> (BroadcastChannel, Codebook, ExactJoint) {
    let ch = BroadcastChannel::erasure_example(0.5).unwrap();
    let cb = Codebook::from_words(2, 2, vec![vec![0, 0], vec![1, 1]]).unwrap();
    let j = exact_joint(Setting::Transmitter, &cb, &ch, &Faker::NaiveUniform, Decoder::Ml).unwrap();
    (ch, cb, j)
}

fn c6() -> Outcome {
    let (_, cb, j) = naive_joint();
    let kl = plausibility_kl(&j);
    let pass = cb.all_distinct() && kl.value() > 0.1;
    outcome(pass, format!("KL = {:?}", kl))
}

fn c7() -> Outcome {
    let t = Instant::now();
    let mut failures = 0;
    let mut runs = 0;
    for i in 0..100u64 {
        let mut rng = stream(2024, Purpose::Random, &[i]);
        let mut w = vec![0.0; 16];
        flat_dirichlet(&mut rng, &mut w);
        let p = JointPmf::new(vec![4, 4], w).unwrap();
        for alpha in [0.1, 0.5, 1.0] {
            runs += 1;
            match mix_for_reverse_kl(&p, alpha) {
                Ok(r) if r.conclusions(1e-12, 1e-10).iter().all(|&b| b) => {}
                _ => failures += 1,
            }
        }
    }
    let took = t.elapsed();
    outcome(
        failures == 0 && took < Duration::from_secs(10),
        format!("{failures} of {runs} failed, {took:?}"),
    )
}

fn random_dmc(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Dmc {
    let mut flat = vec![0.0; rows * cols];
    for r in 0..rows {
        flat_dirichlet(rng, &mut flat[r * cols..(r + 1) * cols]);
    }
    Dmc::from_flat(rows, cols, flat).unwrap()
}

fn c8() -> Outcome {
    let mut configs: Vec<(String, ExactJoint, deniakit::evalx::Constants)> = Vec::new();
    let ch = example2();
    for distinct in [false, true] {
        let cb = superposition_code(&ch, distinct);
        let j = exact_joint(Setting::Transmitter, &cb, &ch, &Faker::Clique, Decoder::Ml).unwrap();
        configs.push((format!("clique distinct={distinct}"), j, constants(&cb, &ch.judy())));
    }
    let (rch, witness) = degraded_three_symbol();
    let cb = build_iid_codebook(&Pmf::uniform(3), 3, 1.0, 7).unwrap();
    let j = exact_joint(Setting::Receiver, &cb, &rch, &Faker::receiver(&witness, ROW_TOL), Decoder::Ml).unwrap();
    configs.push(("receiver".into(), j, constants(&cb, &rch.judy())));
    let (nch, ncb, nj) = naive_joint();
    configs.push(("naive".into(), nj, constants(&ncb, &nch.judy())));

    for i in 0..20u64 {
        let mut rng = stream(99, Purpose::Random, &[i]);
        let nx = 2 + (i as usize % 2);
        let n = 2 + (i as usize / 2) % 2;
        let bob = random_dmc(&mut rng, nx, nx);
        let judy = random_dmc(&mut rng, nx, 2);
        let ch = BroadcastChannel::from_marginals(&bob, &judy).unwrap();
        // |M| <= 8: at most 3 message bits
        let bits = 1 + (i as usize % 3);
        let cb = build_iid_codebook(&Pmf::uniform(nx), n, bits as f64 / n as f64, 100 + i).unwrap();
        let keep = (i as f64 + 0.5) / 20.0;
        let (setting, faker) = match i % 4 {
            0 => (Setting::Message, Faker::MessageMixed { keep }),
            1 => (Setting::Message, Faker::MessageSplit { s_bits: 1, t_bits: bits as u32 - 1 }),
            2 => (Setting::Transmitter, Faker::TransmitterMixed { keep }),
            _ => (Setting::Transmitter, Faker::NaiveUniform),
        };
        let j = exact_joint(setting, &cb, &ch, &faker, Decoder::Ml).unwrap();
        configs.push((format!("random {i}"), j, constants(&cb, &ch.judy())));
    }

    let mut checked = 0;
    let mut skipped = Vec::new();
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    for (name, j, k) in &configs {
        match bound_checks(j, k) {
            Ok(checks) => {
                for c in checks {
                    checked += 1;
                    worst = worst.min(c.residual);
                    if c.residual < -1e-9 {
                        failed.push(format!("{name}: {}", c.name));
                    }
                }
            }
            // infinite divergence makes every right-hand side infinite
            Err(why) => skipped.push(format!("{name} ({why})")),
        }
    }
    let pass = failed.is_empty() && checked > 0;
    outcome(
        pass,
        format!(
            "{} configs, {checked} inequalities, min residual {worst:.2e}, vacuous: [{}]{}",
            configs.len(),
            skipped.join(", "),
            if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
        ),
    )
}

fn c9() -> Outcome {
    let q = 0.295;
    let bob = Dmc::bsc(q).unwrap();
    let rate = 0.5 * (1.0 - binary_entropy(q));
    let mut errs = Vec::new();
    let mut detail = Vec::new();
    let mut single = Vec::new();
    for (i, n) in [16usize, 32, 64, 128].into_iter().enumerate() {
        let mc = monte_carlo_ensemble(&Pmf::uniform(2), n, rate, &bob, 10_000, 9100 + i as u64, Decoder::Ml).unwrap();
        detail.push(format!("n={n} Pe={:.4} [{:.4},{:.4}]", mc.estimate, mc.lower, mc.upper));
        errs.push(mc.estimate);
        // one drawn code per n, reported for comparison only
        let cb = build_iid_codebook(&Pmf::uniform(2), n, rate, 9000 + i as u64).unwrap();
        single.push(format!("{:.4}", monte_carlo(&cb, &bob, 10_000, 9100 + i as u64, Decoder::Ml).unwrap().estimate));
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);

    // brute force at n = 4 with an independent maximum-likelihood argmax
    let cb = build_iid_codebook(&Pmf::uniform(2), 4, 0.5, 17).unwrap();
    let mut oracle = 0.0;
    for yc in 0..16u64 {
        let y = unpack(yc, 2, 4);
        let lik: Vec<f64> = (0..cb.messages())
            .map(|m| (0..4).map(|t| bob.get(cb.word(m, 0)[t], y[t])).product())
            .collect();
        let top = lik.iter().cloned().fold(0.0, f64::max);
        let pick = lik.iter().position(|&l| l >= top).unwrap();
        for (m, l) in lik.iter().enumerate() {
            if m != pick {
                oracle += l / cb.messages() as f64;
            }
        }
    }
    let exact = error_probability(&cb, &bob, Decoder::Ml).unwrap();
    let exact_ok = (exact - oracle).abs() <= 1e-10;
    outcome(
        monotone && exact_ok,
        format!(
            "ensemble {}; single codes {}; n=4 exact {exact:.6} vs oracle {oracle:.6}",
            detail.join(", "),
            single.join(" ")
        ),
    )
}

fn run_cli(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_deniakit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DENIAKIT_SEED")
        .output()
        .expect("run deniakit")
}

fn c10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let ex2 = data.join("example2.json");
    let ex2 = ex2.to_str().unwrap();
    let ex1 = data.join("example1.json");
    let ex1 = ex1.to_str().unwrap();
    let runs: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["region", "tx", ex2, "--grid", "11", "--out", "tx.csv"], vec!["tx.csv", "tx.csv.witness.json"]),
        (vec!["region", "message", "--bec", "0.5", "--closed-form", "--out", "rm.csv"], vec!["rm.csv"]),
        (
            vec!["simulate", "--setting", "transmitter", ex2, "--n", "3", "--rate", "1", "--deniability", "0.6666666667", "--seed", "7", "--distinct", "--trials", "200", "--out", "sim.json", "--codebook-out", "cb.json"],
            vec!["sim.json", "cb.json"],
        ),
        (vec!["simulate", "--setting", "receiver", ex1, "--n", "3", "--rate", "0.67", "--out", "rx.json"], vec!["rx.json"]),
        (vec!["channel", "marginals", ex2, "--out", "marg.json"], vec!["marg.json"]),
    ];
    let mut compared = 0;
    for (i, (args, outs)) in runs.iter().enumerate() {
        let o = run_cli(args, dir.path());
        if !o.status.success() {
            return outcome(false, format!("run {i} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let manifest = format!("{}.manifest.json", outs[0]);
        let again = format!("again{i}");
        let o = run_cli(&["rerun", &manifest, "--out-dir", &again], dir.path());
        if !o.status.success() {
            return outcome(false, format!("rerun {i} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        for f in outs {
            let a = std::fs::read(dir.path().join(f)).unwrap();
            let b = std::fs::read(dir.path().join(&again).join(f)).unwrap();
            if a != b {
                return outcome(false, format!("{f} differs after rerun"));
            }
            compared += 1;
        }
    }
    outcome(true, format!("{compared} output files byte-identical after rerun"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("zero-information partition", c1),
        ("three-symbol transmitter frontier", c2),
        ("erasure example sandwich and optimizer", c3),
        ("exact plausibility zero", c4),
        ("deniability equals equivocation", c5),
        ("naive faking detected", c6),
        ("mixing construction suite", c7),
        ("bound residual suite", c8),
        ("reliability trend and exact error", c9),
        ("manifest reproducibility", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
