use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigcorrect::correction::{correct, CorrectionOptions, OracleKind, DEFAULT_BIT_CAP};
use sigcorrect::estimator::{
    estimate, render_table, sweep, EstimatorInput, SweepRow, DEFAULT_M_MAX, LEVEL2_REFERENCE_ROWS,
};
use sigcorrect::fault::{inject, CampaignConfig, FaultSpec};
use sigcorrect::packing::{pack_secret_key_words, pack_signature, unpack_public_key, unpack_secret_key_any};
use sigcorrect::pipeline;
use sigcorrect::scheme::{sign, verify, SignMode, DEFAULT_KAPPA_CAP};
use sigcorrect::seed::derive_rng;
use sigcorrect::{Error, ParameterSet, Result, Revision};

#[derive(Parser)]
#[command(name = "sigcorrect", version, about = "Dilithium fault-injection and signature-correction lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate pk.bin and sk.bin.
    Keygen {
        #[arg(long, default_value_t = 2)]
        level: u8,
        #[command(flatten)]
        rev: Rev,
        /// 32-byte seed as hex.
        #[arg(long)]
        seed: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sign a message file.
    Sign {
        #[arg(long)]
        sk: PathBuf,
        #[arg(long)]
        msg: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        rev: Rev,
        /// Randomized signing, seeded from this value.
        #[arg(long)]
        randomized: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_KAPPA_CAP)]
        kappa_cap: u32,
    },
    /// Check a signature; exits 1 when invalid.
    Verify {
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        msg: PathBuf,
        #[arg(long)]
        sig: PathBuf,
        #[command(flatten)]
        rev: Rev,
    },
    /// Flip one bit of s1 and write the faulty key in word layout.
    Inject {
        #[arg(long)]
        sk: PathBuf,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        col: usize,
        /// Bit position within the 32-bit word, 0 = LSB.
        #[arg(long)]
        bit: u32,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        rev: Rev,
    },
    /// Run a simulated fault campaign into a run directory.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct faulty signatures, either a run directory or one signature.
    Correct {
        #[arg(long, conflicts_with_all = ["pk", "msg", "sig"])]
        dir: Option<PathBuf>,
        #[arg(long, requires_all = ["msg", "sig"])]
        pk: Option<PathBuf>,
        #[arg(long)]
        msg: Option<PathBuf>,
        #[arg(long)]
        sig: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BIT_CAP)]
        bit_cap: u32,
        #[arg(long, value_enum, default_value_t = Oracle::Incremental)]
        oracle: Oracle,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[command(flatten)]
        rev: Rev,
    },
    /// Fold recovered bits into per-coefficient knowledge.
    Aggregate {
        #[arg(long)]
        dir: PathBuf,
        /// Record contradicting observations instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Lattice attack cost of a (reduced) instance.
    Estimate(EstimateArgs),
    /// Summarize a run directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Rev {
    /// Scheme revision, 3.0 or 3.1.
    #[arg(long, default_value = "3.0")]
    revision: Revision,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Full,
    Incremental,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, requires = "zeta", conflicts_with_all = ["dir", "input", "reference"])]
    n_bar: Option<u32>,
    #[arg(long)]
    zeta: Option<f64>,
    /// JSON file with n_bar, zeta and optional q, m_max, conventions.
    #[arg(long, conflicts_with_all = ["dir", "reference"])]
    input: Option<PathBuf>,
    /// Estimate the aggregated knowledge of a run directory.
    #[arg(long, conflicts_with = "reference")]
    dir: Option<PathBuf>,
    /// Evaluate the published level-2 row set.
    #[arg(long)]
    reference: bool,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    m_max: u32,
    #[arg(long)]
    json: bool,
}

fn parse_seed(hex_seed: &str) -> Result<[u8; 32]> {
    hex::decode(hex_seed)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| Error::Parse {
            what: "seed",
            reason: "expected 64 hex characters".into(),
        })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn pk_params(len: usize, rev: Revision) -> Result<ParameterSet> {
    ParameterSet::from_public_key_len(len, rev)
        .ok_or_else(|| Error::InvalidParameter(format!("no parameter set has a {len}-byte public key")))
}

fn load_sk(path: &Path, rev: Revision) -> Result<sigcorrect::scheme::SecretKey> {
    let bytes = read(path)?;
    let (params, _) = ParameterSet::from_secret_key_len(bytes.len(), rev)
        .ok_or_else(|| Error::InvalidParameter(format!("no parameter set has a {}-byte secret key", bytes.len())))?;
    unpack_secret_key_any(&params, &bytes)
}

fn print_estimates(rows: &[SweepRow], json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(rows)?);
    } else {
        print!("{}", render_table(rows));
    }
    Ok(())
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Keygen { level, rev, seed, out } => {
            pipeline::keygen_stage(&out, level, rev.revision, &parse_seed(&seed)?)?;
            println!("wrote {} and {}", out.join(pipeline::PK).display(), out.join(pipeline::SK).display());
        }
        Command::Sign {
            sk,
            msg,
            out,
            rev,
            randomized,
            kappa_cap,
        } => {
            let sk = load_sk(&sk, rev.revision)?;
            let msg = read(&msg)?;
            let mut rng = randomized.map(|s| derive_rng(s, "cli-sign"));
            let mode = match rng.as_mut() {
                Some(r) => SignMode::Randomized(r),
                None => SignMode::Deterministic,
            };
            let outcome = sign(&sk, &msg, mode, kappa_cap);
            let kappa = outcome.kappa_used();
            match outcome.signature() {
                Some(sig) => {
                    fs::write(&out, pack_signature(&sig)?)?;
                    println!("signed after {kappa} attempts");
                }
                None => {
                    eprintln!("signing loop exhausted after {kappa} attempts");
                    return Ok(false);
                }
            }
        }
        Command::Verify { pk, msg, sig, rev } => {
            let pk_bytes = read(&pk)?;
            let pk = unpack_public_key(&pk_params(pk_bytes.len(), rev.revision)?, &pk_bytes)?;
            let ok = verify(&pk, &read(&msg)?, &read(&sig)?);
            println!("{}", if ok { "valid" } else { "invalid" });
            return Ok(ok);
        }
        Command::Inject {
            sk,
            row,
            col,
            bit,
            out,
            rev,
        } => {
            let sk = load_sk(&sk, rev.revision)?;
            if row >= sk.params.l || col >= sk.params.n || bit >= 32 {
                return Err(Error::InvalidParameter(format!("fault site ({row}, {col}, {bit}) out of range")));
            }
            let spec = FaultSpec::effective(&sk, row, col, bit);
            let faulty = inject(&sk, &spec)?;
            fs::write(&out, pack_secret_key_words(&faulty))?;
            println!("{}", serde_json::to_string(&spec)?);
        }
        Command::Campaign { config, out } => {
            let text = fs::read_to_string(&config)?;
            let cfg = CampaignConfig::from_json(&text).map_err(|e| e.in_stage("campaign"))?;
            let events = pipeline::campaign_stage(&out, &cfg)?;
            let released = events.iter().filter(|e| e.sig_hex.is_some()).count();
            let dos = events.iter().filter(|e| e.dos).count();
            println!("{} rounds, {released} signatures released, {dos} denial of service", events.len());
        }
        Command::Correct {
            dir,
            pk,
            msg,
            sig,
            bit_cap,
            oracle,
            threads,
            rev,
        } => {
            let options = CorrectionOptions {
                bit_cap,
                oracle: match oracle {
                    Oracle::Full => OracleKind::Full,
                    Oracle::Incremental => OracleKind::Incremental,
                },
            };
            if let Some(dir) = dir {
                let threads = if threads == 0 {
                    std::thread::available_parallelism().map_or(1, |n| n.get())
                } else {
                    threads
                };
                let s = pipeline::correct_stage(&dir, &options, threads)?;
                println!(
                    "{} events: {} recovered, {} not found, {} without fault, {} skipped",
                    s.events,
                    s.recovered,
                    s.not_found,
                    s.no_fault_detected,
                    s.skipped_dos + s.skipped_suppressed
                );
            } else if let (Some(pk), Some(msg), Some(sig)) = (pk, msg, sig) {
                let pk_bytes = read(&pk)?;
                let pk = unpack_public_key(&pk_params(pk_bytes.len(), rev.revision)?, &pk_bytes)?;
                let report = correct(&read(&sig)?, &read(&msg)?, &pk, &options)?;
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                return Err(Error::InvalidParameter("correct needs --dir or --pk/--msg/--sig".into()));
            }
        }
        Command::Aggregate { dir, lenient } => {
            let g = pipeline::aggregate_stage(&dir, lenient)?;
            println!(
                "{} records, {} unique bits, n_bar {}, zeta {:.5}",
                g.recovered_records, g.unique_bits, g.reduced.n_bar, g.reduced.zeta
            );
        }
        Command::Estimate(a) => {
            let with_q = |mut i: EstimatorInput| {
                if let Some(q) = a.q {
                    i.q = q;
                }
                i
            };
            if a.reference {
                let base = with_q(EstimatorInput {
                    m_max: a.m_max,
                    ..EstimatorInput::new(0, 1.0)
                });
                return print_estimates(&sweep(1024, &LEVEL2_REFERENCE_ROWS, &base)?, a.json).map(|_| true);
            }
            if let Some(dir) = a.dir {
                let art = pipeline::estimate_stage(&dir, a.m_max)?;
                match art.estimate {
                    Some(e) => print_estimates(&[SweepRow { recovered: 0, estimate: e }], a.json)?,
                    None => println!("every coefficient recovered"),
                }
                return Ok(true);
            }
            let input = if let Some(path) = a.input {
                serde_json::from_str::<EstimatorInput>(&fs::read_to_string(path)?)?
            } else if let (Some(n_bar), Some(zeta)) = (a.n_bar, a.zeta) {
                with_q(EstimatorInput {
                    m_max: a.m_max,
                    ..EstimatorInput::new(n_bar, zeta)
                })
            } else {
                return Err(Error::InvalidParameter(
                    "estimate needs --n-bar/--zeta, --input, --dir or --reference".into(),
                ));
            };
            let e = estimate(&input)?;
            print_estimates(&[SweepRow { recovered: 0, estimate: e }], a.json)?;
        }
        Command::Report { dir, json } => {
            let r = pipeline::report_stage(&dir)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", pipeline::render_report(&r));
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
