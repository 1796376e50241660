use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use deniakit::channel::{is_physically_degraded, BroadcastChannel, Dmc, LoadError, DEGRADED_TOL};
use deniakit::codec::{
    bits_for, build_binning_codebook, build_iid_codebook, build_superposition_codebook,
    superposition_bits, BinningParams, Codebook, Decoder, Faker, Setting, SuperpositionParams,
};
use deniakit::evalx::{evaluate, monte_carlo};
use deniakit::format::{sig9, write_atomic};
use deniakit::optim::OptConfig;
use deniakit::probkit::Pmf;
use deniakit::regions::{
    bec_closed_form, closed_form_region, message_region, receiver_region, transmitter_region,
    ClosedForm, RegionBoundary, RegionConfig,
};
use deniakit::zeroinfo::{zero_info_partition, ROW_TOL};

const MANIFEST_FORMAT: u32 = 1;

#[derive(Parser, Debug, Clone, Serialize, Deserialize)]
#[command(name = "deniakit", version, about = "Deniable communication over broadcast channels")]
struct Cli {
    /// Worker thread cap (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Run manifest path. Defaults to `<out>.manifest.json` when `--out`
    /// is given.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Cmd {
    /// Inspect a channel file.
    Channel {
        #[command(subcommand)]
        action: ChannelCmd,
    },
    /// Zero-information classes of the inputs (tx) or of Bob's outputs (rx).
    Zeroinfo(ZeroinfoArgs),
    /// Deniability and comparison region frontiers as CSV.
    Region(RegionArgs),
    /// Build a code, fake, and evaluate everything by exact enumeration.
    Simulate(SimulateArgs),
    /// Re-execute a run from its manifest and compare output digests.
    Rerun(RerunArgs),
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ChannelCmd {
    /// Parse and validate.
    Validate {
        #[command(flatten)]
        src: Source,
    },
    /// Bob's and the eavesdropper's transition matrices as JSON.
    Marginals {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degradedness test with the witness map.
    Degraded {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = DEGRADED_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Where the channel comes from.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Source {
    /// Channel JSON file.
    #[arg(required_unless_present = "bec", conflicts_with = "bec")]
    file: Option<PathBuf>,
    /// Erasure example: `Y = X`, `Z` a binary erasure of `X` with this
    /// probability.
    #[arg(long)]
    bec: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SideArg {
    Tx,
    Rx,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ZeroinfoArgs {
    #[command(flatten)]
    src: Source,
    #[arg(long, value_enum)]
    side: SideArg,
    /// Largest entrywise difference for two rows to count as equal.
    #[arg(long, default_value_t = ROW_TOL)]
    row_tol: f64,
    /// Degradedness tolerance (rx side).
    #[arg(long, default_value_t = DEGRADED_TOL)]
    tol: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Message,
    Tx,
    Rx,
    Eq,
    Bcc,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RegionArgs {
    #[arg(value_enum)]
    kind: KindArg,
    #[command(flatten)]
    src: Source,
    /// Number of uniform grid points.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Explicit grid, overriding `--grid`.
    #[arg(long, value_delimiter = ',')]
    d_values: Option<Vec<f64>>,
    /// Use the erasure-example closed form (requires `--bec`).
    #[arg(long)]
    closed_form: bool,
    /// Closed forms only: tabulate the largest D for each R on a uniform
    /// rate grid instead.
    #[arg(long)]
    by_rate: bool,
    /// Message region auxiliary caps `|V|,|U|`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    caps: Option<Vec<usize>>,
    /// Optimizer seed (default from DENIAKIT_SEED, else 0).
    #[arg(long, env = "DENIAKIT_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = ROW_TOL)]
    row_tol: f64,
    /// Degradedness tolerance.
    #[arg(long, default_value_t = DEGRADED_TOL)]
    tol: f64,
    /// CSV output; a `.witness.json` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SettingArg {
    Message,
    Transmitter,
    Receiver,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CodeArg {
    Iid,
    Superposition,
    Binning,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FakerArg {
    Identity,
    Split,
    Mixed,
    Clique,
    Naive,
    Receiver,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DecoderArg {
    Ml,
    Typical,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    setting: SettingArg,
    #[command(flatten)]
    src: Source,
    /// Blocklength.
    #[arg(long)]
    n: usize,
    /// Total message rate R.
    #[arg(long)]
    rate: f64,
    /// Target deniability D (bits of the fakeable message part per symbol).
    #[arg(long, default_value_t = 0.0)]
    deniability: f64,
    /// Private randomness rate (binning codes).
    #[arg(long, default_value_t = 0.0)]
    rate_r: f64,
    /// Code family (default: superposition for transmitter, iid otherwise).
    #[arg(long, value_enum)]
    code: Option<CodeArg>,
    /// Faking procedure (default: split, clique or receiver by setting).
    #[arg(long, value_enum)]
    faker: Option<FakerArg>,
    /// Keep probability of the mixed fakers.
    #[arg(long, default_value_t = 0.5)]
    keep: f64,
    /// Input law of an iid code (default uniform).
    #[arg(long, value_delimiter = ',')]
    p_x: Option<Vec<f64>>,
    /// Superposition: cloud law over the zero-information classes.
    #[arg(long, value_delimiter = ',')]
    p_u: Option<Vec<f64>>,
    /// `P_{X|U}` rows separated by ';'.
    #[arg(long)]
    p_x_given_u: Option<String>,
    /// Binning: law of the cloud variable V.
    #[arg(long, value_delimiter = ',')]
    p_v: Option<Vec<f64>>,
    /// Binning: `P_{U|V}` rows separated by ';'.
    #[arg(long)]
    p_u_given_v: Option<String>,
    /// Redraw superposition codebooks until all words differ.
    #[arg(long)]
    distinct: bool,
    #[arg(long, value_enum, default_value_t = DecoderArg::Ml)]
    decoder: DecoderArg,
    /// Typicality slack for `--decoder typical`.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Monte Carlo trials added to the report (0: none).
    #[arg(long, default_value_t = 0)]
    trials: u64,
    /// Code and faker seed (default from DENIAKIT_SEED, else 0).
    #[arg(long, env = "DENIAKIT_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = ROW_TOL)]
    row_tol: f64,
    /// Degradedness tolerance.
    #[arg(long, default_value_t = DEGRADED_TOL)]
    tol: f64,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the codebook as JSON.
    #[arg(long)]
    codebook_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RerunArgs {
    manifest_path: PathBuf,
    /// Write outputs into this directory instead of the recorded paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// What a failed run reports, mapped onto the exit codes.
#[derive(Debug)]
enum Fail {
    Usage(String),
    Domain(String),
}

impl From<deniakit::error::Error> for Fail {
    fn from(e: deniakit::error::Error) -> Self {
        Fail::Domain(e.to_string())
    }
}

type Res<T> = std::result::Result<T, Fail>;

fn io_fail(path: &Path, e: std::io::Error) -> Fail {
    Fail::Usage(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    tool: String,
    version: String,
    threads: usize,
    command: Cmd,
    inputs: Vec<FileDigest>,
    channel_digest: Option<String>,
    code_digest: Option<String>,
    outputs: Vec<FileDigest>,
}

/// Everything a command produced, before anything is written.
#[derive(Default)]
struct Run {
    stdout: String,
    files: Vec<(PathBuf, Vec<u8>)>,
    inputs: Vec<FileDigest>,
    channel_digest: Option<String>,
    code_digest: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_channel(src: &Source, run: &mut Run) -> Res<BroadcastChannel> {
    let ch = match (&src.file, src.bec) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
            run.inputs.push(FileDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(text.as_bytes()),
            });
            match BroadcastChannel::from_json_str(&text) {
                Ok(ch) => ch,
                Err(LoadError::Parse(e)) => {
                    return Err(Fail::Usage(format!(
                        "{}: malformed channel file at line {} column {}: {e}",
                        path.display(),
                        e.line(),
                        e.column()
                    )))
                }
                Err(LoadError::Invalid(e)) => {
                    return Err(Fail::Domain(format!("{}: {e}", path.display())))
                }
            }
        }
        (None, Some(p)) => BroadcastChannel::erasure_example(p)?,
        (None, None) => return Err(Fail::Usage("a channel file or --bec is required".into())),
    };
    run.channel_digest = Some(ch.digest());
    Ok(ch)
}

/// Rounds every float in a JSON tree to nine significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let r: f64 = sig9(x).parse().expect("sig9 parses");
            json!(r)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn pretty(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("serializable");
    s.push('\n');
    s
}

/// Sends `body` to `out` if given, else to stdout.
fn emit(run: &mut Run, out: &Option<PathBuf>, body: String) {
    match out {
        Some(p) => run.files.push((p.clone(), body.into_bytes())),
        None => run.stdout.push_str(&body),
    }
}

fn parse_matrix(s: &str) -> Res<Dmc> {
    let rows = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Fail::Usage(format!("bad matrix entry {t:?}: {e}")))
                })
                .collect::<Res<Vec<f64>>>()
        })
        .collect::<Res<Vec<_>>>()?;
    Ok(Dmc::new(rows)?)
}

fn cmd_channel(action: &ChannelCmd, run: &mut Run) -> Res<()> {
    match action {
        ChannelCmd::Validate { src } => {
            let ch = load_channel(src, run)?;
            run.stdout.push_str(&format!(
                "ok: |X|={} |Y|={} |Z|={} digest={}\n",
                ch.x_size(),
                ch.y_size(),
                ch.z_size(),
                ch.digest()
            ));
        }
        ChannelCmd::Marginals { src, out } => {
            let ch = load_channel(src, run)?;
            let body = pretty(json!({
                "x": ch.x_names(),
                "y": ch.y_names(),
                "z": ch.z_names(),
                "bob": ch.bob().rows(),
                "eavesdropper": ch.judy().rows(),
            }));
            emit(run, out, body);
        }
        ChannelCmd::Degraded { src, tol, out } => {
            let ch = load_channel(src, run)?;
            let d = is_physically_degraded(&ch, *tol);
            let yes = |b: bool| if b { "yes" } else { "no" };
            let mut body = format!(
                "degraded: {}\nphysical: {}\nresidual: {}\n",
                yes(d.degraded),
                yes(d.physical),
                sig9(d.residual)
            );
            if let Some(w) = &d.witness {
                body.push_str("witness P(z|y):\n");
                for (y, row) in w.rows().iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|&p| sig9(p)).collect();
                    body.push_str(&format!("  {}: {}\n", ch.y_names()[y], cells.join(" ")));
                }
            }
            emit(run, out, body);
        }
    }
    Ok(())
}

fn cmd_zeroinfo(a: &ZeroinfoArgs, run: &mut Run) -> Res<()> {
    let ch = load_channel(&a.src, run)?;
    let line = match a.side {
        SideArg::Tx => zero_info_partition(&ch.judy(), a.row_tol).display_with(ch.x_names()),
        SideArg::Rx => {
            let d = is_physically_degraded(&ch, a.tol);
            let Some(w) = d.witness.filter(|_| d.degraded) else {
                return Err(deniakit::error::Error::NotDegraded { residual: d.residual }.into());
            };
            zero_info_partition(&w, a.row_tol).display_with(ch.y_names())
        }
    };
    run.stdout.push_str(&line);
    run.stdout.push('\n');
    Ok(())
}

fn closed_form_of(kind: KindArg) -> Option<ClosedForm> {
    match kind {
        KindArg::Message => Some(ClosedForm::Rm),
        KindArg::Eq => Some(ClosedForm::Req),
        KindArg::Bcc => Some(ClosedForm::Rbcc),
        KindArg::Tx | KindArg::Rx => None,
    }
}

fn by_rate_csv(kind: ClosedForm, p: f64, points: usize, digest: &str) -> Res<String> {
    let mut s = String::from("R,D,kind,channel_digest\n");
    let steps = points.max(2) - 1;
    for i in 0..=steps {
        let r = i as f64 / steps as f64;
        if let Some(d) = bec_closed_form(kind, p, r)? {
            s.push_str(&format!("{},{},{},{}\n", sig9(r), sig9(d), kind.kind().name(), digest));
        }
    }
    Ok(s)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_region(a: &RegionArgs, run: &mut Run) -> Res<()> {
    let closed = match a.kind {
        KindArg::Eq | KindArg::Bcc => true,
        KindArg::Message => a.closed_form,
        KindArg::Tx | KindArg::Rx => {
            if a.closed_form || a.by_rate {
                return Err(Fail::Usage("closed forms exist for message, eq and bcc only".into()));
            }
            false
        }
    };
    if a.by_rate && !closed {
        return Err(Fail::Usage("--by-rate needs a closed-form region".into()));
    }
    if a.grid == 0 {
        return Err(Fail::Usage("--grid must be positive".into()));
    }
    let grid = a.d_values.as_deref();
    let boundary: RegionBoundary = if closed {
        let Some(p) = a.src.bec else {
            return Err(Fail::Usage("closed forms need --bec p".into()));
        };
        let kind = closed_form_of(a.kind).expect("closed kind");
        let ch = load_channel(&a.src, run)?;
        if a.by_rate {
            let csv = by_rate_csv(kind, p, a.grid, &ch.digest())?;
            emit(run, &a.out, csv);
            return Ok(());
        }
        closed_form_region(kind, p, grid, a.grid)?
    } else {
        let ch = load_channel(&a.src, run)?;
        let cfg = RegionConfig {
            opt: OptConfig {
                restarts: a.restarts,
                max_iters: a.max_iters,
                seed: a.seed.unwrap_or(0),
                ..OptConfig::default()
            },
            row_tol: a.row_tol,
            degraded_tol: a.tol,
            grid_points: a.grid,
        };
        match a.kind {
            KindArg::Tx => transmitter_region(&ch, grid, &cfg)?,
            KindArg::Rx => receiver_region(&ch, grid, &cfg)?,
            KindArg::Message => {
                let caps = a.caps.as_ref().map(|c| (c[0], c[1]));
                message_region(&ch, grid, caps, &cfg)?
            }
            KindArg::Eq | KindArg::Bcc => unreachable!("closed forms handled above"),
        }
    };
    eprintln!("{}: {}", boundary.kind.name(), boundary.label);
    for note in &boundary.notes {
        eprintln!("note: {note}");
    }
    if !boundary.infeasible.is_empty() {
        eprintln!("{} grid values above the largest deniability omitted", boundary.infeasible.len());
    }
    emit(run, &a.out, boundary.to_csv());
    if let Some(out) = &a.out {
        let w = pretty(boundary.witnesses_json());
        run.files.push((sidecar(out, ".witness.json"), w.into_bytes()));
    }
    Ok(())
}

fn input_law(p: &Option<Vec<f64>>, k: usize) -> Res<Pmf> {
    match p {
        Some(v) => Ok(Pmf::new(v.clone())?),
        None => Ok(Pmf::uniform(k)),
    }
}

fn build_code(a: &SimulateArgs, ch: &BroadcastChannel, code: CodeArg, seed: u64) -> Res<Codebook> {
    let nx = ch.x_size();
    match code {
        CodeArg::Iid => Ok(build_iid_codebook(&input_law(&a.p_x, nx)?, a.n, a.rate, seed)?),
        CodeArg::Superposition => {
            let partition = zero_info_partition(&ch.judy(), a.row_tol);
            let classes = partition.classes();
            let (t_bits, s_bits) = superposition_bits(a.n, a.rate, a.deniability)?;
            let p_x_given_u = match &a.p_x_given_u {
                Some(s) => parse_matrix(s)?,
                None => Dmc::new(
                    classes
                        .iter()
                        .map(|c| {
                            let mut row = vec![0.0; nx];
                            for &x in c {
                                row[x] = 1.0 / c.len() as f64;
                            }
                            row
                        })
                        .collect(),
                )?,
            };
            let p_u = match &a.p_u {
                Some(v) => Pmf::new(v.clone())?,
                None => {
                    let w: Vec<f64> = classes.iter().map(|c| c.len() as f64).collect();
                    Pmf::from_weights(&w)?
                }
            };
            Ok(build_superposition_codebook(&SuperpositionParams {
                p_u,
                p_x_given_u,
                partition,
                n: a.n,
                t_bits,
                s_bits,
                seed,
                distinct: a.distinct,
            })?)
        }
        CodeArg::Binning => {
            let (t_bits, s_bits) = superposition_bits(a.n, a.rate, a.deniability)?;
            let p_v = match &a.p_v {
                Some(v) => Pmf::new(v.clone())?,
                None => Pmf::uniform(1),
            };
            let p_x_given_u = match &a.p_x_given_u {
                Some(s) => parse_matrix(s)?,
                None => Dmc::identity(nx),
            };
            let p_u_given_v = match &a.p_u_given_v {
                Some(s) => parse_matrix(s)?,
                None => {
                    let row = vec![1.0 / p_x_given_u.in_size() as f64; p_x_given_u.in_size()];
                    Dmc::new(vec![row; p_v.probs().len()])?
                }
            };
            Ok(build_binning_codebook(&BinningParams {
                p_v,
                p_u_given_v,
                p_x_given_u,
                n: a.n,
                t_bits,
                s_bits,
                r_bits: bits_for(a.n, a.rate_r)?,
                seed,
            })?)
        }
    }
}

fn build_faker(a: &SimulateArgs, setting: Setting, cb: &Codebook, ch: &BroadcastChannel) -> Res<(FakerArg, Faker)> {
    let kind = a.faker.unwrap_or(match setting {
        Setting::Message => FakerArg::Split,
        Setting::Transmitter => FakerArg::Clique,
        Setting::Receiver => FakerArg::Receiver,
    });
    let faker = match kind {
        FakerArg::Identity => Faker::Identity,
        FakerArg::Split => {
            let total = cb.messages().trailing_zeros();
            if !cb.messages().is_power_of_two() {
                return Err(Fail::Domain("split faking needs a power-of-two message count".into()));
            }
            let s_bits = match cb.split() {
                Some(s) if s.s_bits + s.t_bits == total && a.code != Some(CodeArg::Iid) => s.s_bits,
                _ => bits_for(a.n, a.deniability)?.min(total),
            };
            Faker::MessageSplit {
                s_bits,
                t_bits: total - s_bits,
            }
        }
        FakerArg::Mixed => match setting {
            Setting::Message => Faker::MessageMixed { keep: a.keep },
            Setting::Transmitter => Faker::TransmitterMixed { keep: a.keep },
            Setting::Receiver => return Err(Fail::Usage("no mixed faker for the receiver".into())),
        },
        FakerArg::Clique => Faker::Clique,
        FakerArg::Naive => Faker::NaiveUniform,
        FakerArg::Receiver => {
            let d = is_physically_degraded(ch, a.tol);
            let Some(w) = d.witness.filter(|_| d.degraded) else {
                return Err(deniakit::error::Error::NotDegraded { residual: d.residual }.into());
            };
            Faker::receiver(&w, a.row_tol)
        }
    };
    if let Some(s) = faker.setting() {
        if s != setting {
            return Err(Fail::Usage(format!("faker {kind:?} does not apply to the {setting:?} setting")));
        }
    }
    Ok((kind, faker))
}

fn cmd_simulate(a: &SimulateArgs, run: &mut Run) -> Res<()> {
    let ch = load_channel(&a.src, run)?;
    let seed = a.seed.unwrap_or(0);
    let setting = match a.setting {
        SettingArg::Message => Setting::Message,
        SettingArg::Transmitter => Setting::Transmitter,
        SettingArg::Receiver => Setting::Receiver,
    };
    let code = a.code.unwrap_or(match setting {
        Setting::Transmitter => CodeArg::Superposition,
        _ => CodeArg::Iid,
    });
    let cb = build_code(a, &ch, code, seed)?;
    let (faker_kind, faker) = build_faker(a, setting, &cb, &ch)?;
    let rule = match a.decoder {
        DecoderArg::Ml => Decoder::Ml,
        DecoderArg::Typical => Decoder::Typical { eps: a.eps },
    };
    let report = evaluate(setting, &cb, &ch, &faker, rule)?;
    let cb_json = pretty(serde_json::to_value(cb.to_file(ch.x_names())).expect("serializable"));
    let code_digest = sha256_hex(cb_json.as_bytes());
    let mut body = json!({
        "code": {
            "family": code,
            "n": cb.n(),
            "messages": cb.messages(),
            "randomness": cb.randomness(),
            "rate": cb.rate(),
            "seed": seed,
            "split": cb.split(),
            "distinct_words": cb.all_distinct(),
            "digest": code_digest,
        },
        "faker": faker_kind,
        "decoder": rule,
        "channel_digest": ch.digest(),
        "report": report,
    });
    if a.trials > 0 {
        let mc = monte_carlo(&cb, &ch.bob(), a.trials, seed, rule)?;
        body["monte_carlo"] = serde_json::to_value(mc).expect("serializable");
    }
    emit(run, &a.out, pretty(body));
    if let Some(p) = &a.codebook_out {
        run.files.push((p.clone(), cb_json.into_bytes()));
    }
    run.code_digest = Some(code_digest);
    Ok(())
}

/// Makes every defaulted value explicit.
fn resolve(cmd: &mut Cmd) {
    match cmd {
        Cmd::Region(a) => a.seed = Some(a.seed.unwrap_or(0)),
        Cmd::Simulate(a) => {
            a.seed = Some(a.seed.unwrap_or(0));
            a.code = Some(a.code.unwrap_or(match a.setting {
                SettingArg::Transmitter => CodeArg::Superposition,
                _ => CodeArg::Iid,
            }));
            a.faker = Some(a.faker.unwrap_or(match a.setting {
                SettingArg::Message => FakerArg::Split,
                SettingArg::Transmitter => FakerArg::Clique,
                SettingArg::Receiver => FakerArg::Receiver,
            }));
        }
        _ => {}
    }
}

fn execute(cmd: &Cmd) -> Res<Run> {
    let mut run = Run::default();
    match cmd {
        Cmd::Channel { action } => cmd_channel(action, &mut run)?,
        Cmd::Zeroinfo(a) => cmd_zeroinfo(a, &mut run)?,
        Cmd::Region(a) => cmd_region(a, &mut run)?,
        Cmd::Simulate(a) => cmd_simulate(a, &mut run)?,
        Cmd::Rerun(_) => return Err(Fail::Usage("a manifest cannot record a rerun".into())),
    }
    Ok(run)
}

fn primary_out(cmd: &Cmd) -> Option<&PathBuf> {
    match cmd {
        Cmd::Channel { action } => match action {
            ChannelCmd::Validate { .. } => None,
            ChannelCmd::Marginals { out, .. } | ChannelCmd::Degraded { out, .. } => out.as_ref(),
        },
        Cmd::Region(a) => a.out.as_ref(),
        Cmd::Simulate(a) => a.out.as_ref(),
        Cmd::Zeroinfo(_) | Cmd::Rerun(_) => None,
    }
}

/// Writes outputs and, when requested or implied, the manifest. Returns
/// the output digests.
fn finish(threads: usize, cmd: &Cmd, manifest: Option<PathBuf>, run: Run) -> Res<Vec<FileDigest>> {
    let mut outputs = Vec::new();
    for (path, bytes) in &run.files {
        write_atomic(path, bytes).map_err(|e| io_fail(path, e))?;
        outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }
    if !run.stdout.is_empty() || run.files.is_empty() {
        outputs.push(FileDigest {
            path: "-".into(),
            sha256: sha256_hex(run.stdout.as_bytes()),
        });
    }
    print!("{}", run.stdout);
    let manifest = manifest.or_else(|| primary_out(cmd).map(|p| sidecar(p, ".manifest.json")));
    if let Some(mp) = manifest {
        let m = Manifest {
            format: MANIFEST_FORMAT,
            tool: "deniakit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads,
            command: cmd.clone(),
            inputs: run.inputs,
            channel_digest: run.channel_digest,
            code_digest: run.code_digest,
            outputs: outputs.clone(),
        };
        let mut text = serde_json::to_string_pretty(&m).expect("serializable");
        text.push('\n');
        write_atomic(&mp, text.as_bytes()).map_err(|e| io_fail(&mp, e))?;
    }
    Ok(outputs)
}

fn relocate(p: &mut Option<PathBuf>, dir: &Path) {
    if let Some(path) = p {
        let name = path.file_name().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
        *path = dir.join(name);
    }
}

fn redirect_outputs(cmd: &mut Cmd, dir: &Path) {
    match cmd {
        Cmd::Channel { action } => match action {
            ChannelCmd::Validate { .. } => {}
            ChannelCmd::Marginals { out, .. } | ChannelCmd::Degraded { out, .. } => relocate(out, dir),
        },
        Cmd::Region(a) => relocate(&mut a.out, dir),
        Cmd::Simulate(a) => {
            relocate(&mut a.out, dir);
            relocate(&mut a.codebook_out, dir);
        }
        Cmd::Zeroinfo(_) | Cmd::Rerun(_) => {}
    }
}

fn source_of(cmd: &mut Cmd) -> Option<&mut Source> {
    match cmd {
        Cmd::Channel { action } => Some(match action {
            ChannelCmd::Validate { src } | ChannelCmd::Marginals { src, .. } | ChannelCmd::Degraded { src, .. } => src,
        }),
        Cmd::Zeroinfo(a) => Some(&mut a.src),
        Cmd::Region(a) => Some(&mut a.src),
        Cmd::Simulate(a) => Some(&mut a.src),
        Cmd::Rerun(_) => None,
    }
}

fn cmd_rerun(a: &RerunArgs) -> Res<()> {
    let text = std::fs::read_to_string(&a.manifest_path).map_err(|e| io_fail(&a.manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| {
        Fail::Usage(format!(
            "{}: malformed manifest at line {} column {}: {e}",
            a.manifest_path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let mut cmd = m.command.clone();
    // relative channel paths are tried from the manifest's directory too
    if let Some(src) = source_of(&mut cmd) {
        if let Some(f) = &src.file {
            if f.is_relative() && !f.exists() {
                if let Some(dir) = a.manifest_path.parent() {
                    src.file = Some(dir.join(f));
                }
            }
        }
    }
    let mut manifest = None;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        redirect_outputs(&mut cmd, dir);
        manifest = a
            .manifest_path
            .file_name()
            .map(|n| dir.join(n));
    }
    let run = execute(&cmd)?;
    for (old, new) in m.inputs.iter().zip(&run.inputs) {
        if old.sha256 != new.sha256 {
            return Err(Fail::Domain(format!("input {} changed since the recorded run", new.path)));
        }
    }
    let produced = finish(m.threads, &cmd, manifest, run)?;
    let mut mismatches = 0;
    for (old, new) in m.outputs.iter().zip(&produced) {
        if old.sha256 == new.sha256 {
            eprintln!("reproduced: {}", new.path);
        } else {
            eprintln!("MISMATCH: {} (recorded {}, got {})", new.path, old.sha256, new.sha256);
            mismatches += 1;
        }
    }
    if m.outputs.len() != produced.len() {
        return Err(Fail::Domain("the rerun produced a different set of outputs".into()));
    }
    if mismatches > 0 {
        return Err(Fail::Domain(format!("{mismatches} outputs differ from the recorded run")));
    }
    Ok(())
}

fn real_main() -> Res<()> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                Err(Fail::Usage(String::new()))
            } else {
                Ok(())
            };
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Fail::Usage(format!("thread pool: {e}")))?;
    let mut cmd = cli.cmd.clone();
    if let Cmd::Rerun(a) = &cmd {
        return cmd_rerun(a);
    }
    resolve(&mut cmd);
    let run = execute(&cmd)?;
    finish(cli.threads, &cmd, cli.manifest.clone(), run)?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(2)
        }
    }
}
