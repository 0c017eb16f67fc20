use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use uniformity::concat::{b_norm_pow, concat_experiment, invert_arithmetic_box};
use uniformity::counting::{
    dual_function, enumerate_progressions, greedy_free_set, lambda_count, planted_increment_set,
};
use uniformity::degree::{degree_lower_report, find_denominator, ExponentMode, Thresholds};
use uniformity::gowers::{box_norm_pow, u_norm_local_pow, u_norm_pow_exact, u_norm_pow_guarded, BoxSpec, OP_LIMIT};
use uniformity::increment::{find_increment, iterate_increment, SearchParams, N_FLOOR};
use uniformity::io::{read_set, read_signal, set_to_text, signal_to_json, to_json, witnesses_to_csv};
use uniformity::params::{parse_rational, Rational};
use uniformity::rng::SplitMix64;
use uniformity::verify::{run_suite, VerifyConfig};
use uniformity::weights::{triple_box_average, AverageMode};
use uniformity::{Error, Params, ProgressionInstance, Signal};

const EXIT_FAILURES: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MALFORMED: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// Gowers norms, progression counts and density increments for the pattern
/// x, x+y, x+qy^2.
///
/// Set UNIFORMITY_THREADS to cap the worker pool.
#[derive(Parser)]
#[command(name = "uniformity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Instance {
    #[arg(long = "N")]
    n: u64,
    #[arg(long, default_value_t = 1)]
    q: u64,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Paper,
    Derived,
}

impl From<Mode> for ExponentMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => ExponentMode::Paper,
            Mode::Derived => ExponentMode::Derived,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Greedy progression-free subset of [N].
    GreedyFree,
    /// Random set with a denser planted progression.
    Planted,
    /// Random complex signal in the unit disk on [1, width].
    Disk,
    /// Random +-1 signal on [1, width].
    Signs,
}

#[derive(Subcommand)]
enum Command {
    /// ||f||_{U^s}^{2^s}, optionally localized to u + qZ.
    Norm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        s: u32,
        #[arg(long, requires = "q")]
        u: Option<i64>,
        #[arg(long)]
        q: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Box norm over arithmetic directions given as step:len.
    Box {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "dir", required = true, value_parser = parse_direction)]
        dirs: Vec<(i64, u64)>,
        #[command(flatten)]
        out: Output,
    },
    /// Progression count of a set; --out receives the witness CSV.
    Count {
        #[arg(long)]
        set: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        out: Output,
    },
    /// Dual function of (f0, f1) as signal JSON.
    Dual {
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        f1: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        out: Output,
    },
    /// Averaged triple box norm.
    Boxavg {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[arg(long, value_parser = parse_rational_arg)]
        delta2: Rational,
        #[arg(long, value_parser = parse_rational_arg)]
        delta3: Rational,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// The b-norm used in the concatenation step.
    Bnorm {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[arg(long)]
        b: u64,
        #[arg(long, value_parser = parse_rational_arg)]
        delta1: Rational,
        #[arg(long, value_parser = parse_rational_arg)]
        delta2: Rational,
        #[command(flatten)]
        out: Output,
    },
    /// Factor pair for the arithmetic box norm; writes l.json, r.json and
    /// metrics.json into --out.
    Invertbox {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        d: u64,
        /// Exceptional window width used for the metrics.
        #[arg(long, default_value_t = 0)]
        window: u64,
        #[arg(long, default_value_t = 8)]
        grid_factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triple box average against averaged local U^5 norms.
    Concat {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[arg(long, value_parser = parse_rational_arg)]
        delta1: Rational,
        #[arg(long, value_parser = parse_rational_arg)]
        delta2: Rational,
        #[arg(long, value_parser = parse_rational_arg)]
        delta3: Rational,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Trace of the U^3 to U^2 degree-lowering argument.
    DegreeLower {
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        f1: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[arg(long, default_value_t = 1)]
        u: i64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        qmax: u64,
        #[arg(long = "C", default_value_t = 4.0)]
        c: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Best denominator t <= qmax for q^2 t alpha.
    Denom {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        q: u64,
        #[arg(long)]
        qmax: u64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Densest progression window of a set.
    Increment {
        #[arg(long)]
        set: PathBuf,
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        out: Output,
    },
    /// Density-increment iteration; emits a CSV trace.
    Iterate {
        #[arg(long)]
        set: PathBuf,
        #[arg(long = "N")]
        n: u64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        out: Output,
    },
    /// Fixture generation.
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long = "N", default_value_t = 100)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        q: u64,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        qprime: u64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        a: i64,
        #[arg(long = "Nprime", default_value_t = 10)]
        nprime: u64,
        #[arg(long, default_value_t = 0.9)]
        alpha_in: f64,
        #[arg(long, default_value_t = 0.3)]
        alpha_out: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Randomized property suite; exits 1 when any case fails.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long = "N", default_value_t = 10_000)]
        n: u64,
        #[arg(long, value_enum, default_value = "derived")]
        mode: Mode,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Search {
    #[arg(long, default_value_t = 8)]
    qmax: u64,
    #[arg(long, default_value_t = N_FLOOR)]
    nprime_min: u64,
    #[arg(long)]
    nprime_max: Option<u64>,
}

impl Search {
    fn params(&self) -> SearchParams {
        SearchParams {
            qprime_max: self.qmax,
            nprime_min: self.nprime_min,
            nprime_max: self.nprime_max.unwrap_or(u64::MAX),
            ..SearchParams::default()
        }
    }
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn parse_direction(s: &str) -> Result<(i64, u64), String> {
    let (step, len) = s.split_once(':').ok_or("expected step:len")?;
    let step = step.trim().parse().map_err(|_| format!("bad step {step:?}"))?;
    let len = len.trim().parse().map_err(|_| format!("bad length {len:?}"))?;
    Ok((step, len))
}

fn emit(out: &Output, text: &str) -> Result<(), Error> {
    write_text(out.out.as_deref(), text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Error> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Malformed or unreadable inputs map to exit code 3.
fn load_signal(path: &Path) -> Result<Signal, Error> {
    read_signal(path).map_err(as_malformed(path))
}

fn load_set(path: &Path) -> Result<Vec<i64>, Error> {
    read_set(path).map_err(as_malformed(path))
}

fn as_malformed(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io(io) => Error::Malformed(format!("{}: {io}", path.display())),
        Error::Malformed(m) => Error::Malformed(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn params(inst: &Instance, deltas: &[(&str, Rational)]) -> Result<Params, Error> {
    let mut p = Params::new(inst.n, inst.q)?;
    for (name, v) in deltas {
        p.set(name, *v)?;
    }
    Ok(p)
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Norm { input, s, u, q, out } => {
            let f = load_signal(&input)?;
            let report = match (u, q) {
                (Some(u), Some(q)) => json!({ "s": s, "u": u, "q": q, "value": u_norm_local_pow(&f, s, u, q)? }),
                _ => {
                    let value = u_norm_pow_guarded(&f, s, OP_LIMIT)?;
                    let exact = if f.is_exact() {
                        u_norm_pow_exact(&f, s)?.map(|v| v.to_string())
                    } else {
                        None
                    };
                    json!({ "s": s, "value": value, "exact": exact })
                }
            };
            emit(&out, &to_json(&report))?;
        }
        Command::Box { input, dirs, out } => {
            let f = load_signal(&input)?;
            let v: Complex64 = box_norm_pow(&f, &BoxSpec::progressions(&dirs)?)?;
            emit(&out, &to_json(&json!({ "re": v.re, "im": v.im })))?;
        }
        Command::Count { set, inst, out } => {
            let set = load_set(&set)?;
            let inst = ProgressionInstance::new(inst.n, inst.q)?;
            let witnesses = enumerate_progressions(&set, &inst);
            let report = json!({ "lambda": lambda_count(&set, &inst), "witnesses": witnesses.len() });
            println!("{}", to_json(&report));
            if let Some(p) = &out.out {
                write_text(Some(p), &witnesses_to_csv(&witnesses))?;
            }
        }
        Command::Dual { f0, f1, inst, out } => {
            let (f0, f1) = (load_signal(&f0)?, load_signal(&f1)?);
            let inst = ProgressionInstance::new(inst.n, inst.q)?;
            emit(&out, &signal_to_json(&dual_function(&f0, &f1, &inst)))?;
        }
        Command::Boxavg {
            input,
            inst,
            delta2,
            delta3,
            seed,
            out,
        } => {
            let f = load_signal(&input)?;
            let p = params(&inst, &[("delta2", delta2), ("delta3", delta3)])?;
            let avg = triple_box_average(&f, &p, delta2, delta3, AverageMode::auto(p.m(), seed))?;
            emit(&out, &to_json(&avg))?;
        }
        Command::Bnorm {
            input,
            inst,
            b,
            delta1,
            delta2,
            out,
        } => {
            let f = load_signal(&input)?;
            let p = params(&inst, &[("delta1", delta1), ("delta2", delta2)])?;
            let v = b_norm_pow(&f, b, &p, delta1, delta2)?;
            emit(&out, &to_json(&json!({ "b": b, "value": v })))?;
        }
        Command::Invertbox {
            input,
            c,
            d,
            window,
            grid_factor,
            out,
        } => {
            let f = load_signal(&input)?;
            let pair = invert_arithmetic_box(&f, c, d, grid_factor)?;
            std::fs::create_dir_all(&out)?;
            write_text(Some(&out.join("l.json")), &signal_to_json(&pair.l))?;
            write_text(Some(&out.join("r.json")), &signal_to_json(&pair.r))?;
            let metrics = to_json(&pair.metrics(&f, window));
            write_text(Some(&out.join("metrics.json")), &metrics)?;
            println!("{metrics}");
        }
        Command::Concat {
            input,
            inst,
            delta1,
            delta2,
            delta3,
            seed,
            out,
        } => {
            let f = load_signal(&input)?;
            let p = params(&inst, &[("delta1", delta1), ("delta2", delta2), ("delta3", delta3)])?;
            let rep = concat_experiment(&f, &p, delta1, delta2, delta3, AverageMode::auto(p.m(), seed))?;
            emit(&out, &to_json(&rep))?;
        }
        Command::DegreeLower {
            f0,
            f1,
            inst,
            u,
            gamma,
            qmax,
            c,
            out,
        } => {
            let (f0, f1) = (load_signal(&f0)?, load_signal(&f1)?);
            let inst = ProgressionInstance::new(inst.n, inst.q)?;
            let th = Thresholds {
                gamma,
                tmax: qmax,
                c,
                ..Thresholds::default()
            };
            emit(&out, &to_json(&degree_lower_report(&f0, &f1, &inst, u, th)?))?;
        }
        Command::Denom {
            alpha,
            q,
            qmax,
            eps,
            out,
        } => {
            emit(&out, &to_json(&find_denominator(alpha, q, qmax, eps)?))?;
        }
        Command::Increment { set, inst, search, out } => {
            let set = load_set(&set)?;
            let inst = ProgressionInstance::new(inst.n, inst.q)?;
            emit(&out, &to_json(&find_increment(&set, &inst, &search.params())?))?;
        }
        Command::Iterate {
            set,
            n,
            steps,
            search,
            out,
        } => {
            let set = load_set(&set)?;
            emit(&out, &iterate_increment(&set, n, steps, &search.params())?.to_csv())?;
        }
        Command::Gen {
            kind,
            n,
            q,
            width,
            seed,
            qprime,
            a,
            nprime,
            alpha_in,
            alpha_out,
            out,
        } => {
            let mut rng = SplitMix64::new(seed);
            let text = match kind {
                Kind::GreedyFree => set_to_text(&greedy_free_set(&ProgressionInstance::new(n, q)?)),
                Kind::Planted => set_to_text(&planted_increment_set(
                    n, q, qprime, a, nprime, alpha_in, alpha_out, seed,
                )?),
                Kind::Disk => signal_to_json(&Signal::new(1, (0..width).map(|_| rng.disk()).collect())),
                Kind::Signs => {
                    let v: Vec<i64> = (0..width).map(|_| rng.sign()).collect();
                    signal_to_json(&Signal::from_ints(1, &v))
                }
            };
            emit(&out, &text)?;
        }
        Command::Verify {
            suite,
            trials,
            seed,
            width,
            n,
            mode,
            out,
        } => {
            let cfg = VerifyConfig {
                trials,
                seed,
                width,
                n,
                mode: mode.into(),
            };
            let report = run_suite(&suite, &cfg)?;
            emit(&out, &to_json(&report))?;
            if !report.success() {
                return Ok(EXIT_FAILURES);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Some(t) = std::env::var("UNIFORMITY_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Malformed(_) | Error::Io(_) => EXIT_MALFORMED,
                Error::Infeasible { .. } => EXIT_INFEASIBLE,
                Error::InvalidArgument(_) | Error::DegenerateWeight { .. } => EXIT_USAGE,
            })
        }
    }
}
