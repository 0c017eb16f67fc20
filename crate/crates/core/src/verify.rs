//! Randomized property suites.
//!
//! Trial `t` of a run with seed `s` draws from `SplitMix64::for_trial(s, t)`,
//! whose seed `s ^ t * 0xD1B54A32D192ED03` is recorded with any failure.
//! Re-running the suite with that seed and one trial replays the failing case.
//! Trials run in parallel but are collected in order, so reports do not
//! depend on the thread count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::concat::{b_norm_pow, box3_correlation_check, factored_correlation, invert_arithmetic_box, Grid3};
use crate::counting::{
    enumerate_progressions, greedy_free_set, lambda, lambda_count, lambda_via_dual, planted_increment_set,
};
use crate::degree::{lemma64_check, ExponentMode, PhaseGrid};
use crate::error::{invalid, Error, Result};
use crate::gowers::{gcs_check, u2_pow_dft};
use crate::increment::{find_increment, iterate_increment, rescale_set, SearchParams};
use crate::params::{Params, ProgressionInstance};
use crate::rng::SplitMix64;
use crate::signal::Signal;
use crate::weights::{mu, triple_box_average, vdc_check, AverageMode, Wide};

pub const SUITES: [&str; 11] = [
    "gcs",
    "vdc",
    "lemma58",
    "lemma64",
    "mu",
    "counting-identity",
    "u2-oracle",
    "boxavg-positivity",
    "invertbox-post",
    "increment-planted",
    "rescale-transport",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub trials: u64,
    pub seed: u64,
    /// Upper bound on random signal widths (each suite also applies its own cap).
    pub width: usize,
    /// Ambient size for the increment suites.
    pub n: u64,
    pub mode: ExponentMode,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 100,
            seed: 1,
            width: 16,
            n: 10_000,
            mode: ExponentMode::Derived,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    /// `"trial 7"` or `"fixed: <name>"`.
    pub case: String,
    /// Per-trial seed; absent for fixed cases.
    pub seed: Option<u64>,
    pub diagnostic: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub trials: u64,
    pub seed: u64,
    pub passed: u64,
    pub failures: Vec<Failure>,
    /// Per-suite statistics, e.g. the largest observed `lhs / rhs`.
    pub summary: BTreeMap<String, f64>,
}

impl VerifyReport {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// One trial: `Ok(stats)` on success, `Err(diagnostic)` on failure.
type Outcome = std::result::Result<Vec<(&'static str, f64)>, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn disk_signal(rng: &mut SplitMix64, offset: i64, width: usize) -> Signal {
    Signal::new(offset, (0..width).map(|_| rng.disk()).collect())
}

fn sign_signal(rng: &mut SplitMix64, width: usize) -> Signal {
    Signal::from_ints(1, &(0..width).map(|_| rng.sign()).collect::<Vec<_>>())
}

fn err(e: Error) -> String {
    e.to_string()
}

pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let trial: fn(&mut SplitMix64, &VerifyConfig) -> Outcome = match name {
        "gcs" => gcs_trial,
        "vdc" => vdc_trial,
        "lemma58" => lemma58_trial,
        "lemma64" => lemma64_trial,
        "mu" => mu_trial,
        "counting-identity" => counting_trial,
        "u2-oracle" => u2_oracle_trial,
        "boxavg-positivity" => boxavg_trial,
        "invertbox-post" => invertbox_trial,
        "increment-planted" => increment_trial,
        "rescale-transport" => transport_trial,
        _ => return invalid(format!("unknown suite {name:?}; known: {}", SUITES.join(", "))),
    };
    if cfg.width == 0 || cfg.n < 100 {
        return invalid("verify needs width >= 1 and N >= 100");
    }
    let outcomes: Vec<(u64, Outcome)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::for_trial(cfg.seed, t);
            let trial_seed = cfg.seed ^ t.wrapping_mul(0xD1B5_4A32_D192_ED03);
            (trial_seed, trial(&mut rng, cfg))
        })
        .collect();

    let mut failures = Vec::new();
    let mut summary: BTreeMap<String, f64> = BTreeMap::new();
    let mut passed = 0;
    for (t, (trial_seed, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(stats) => {
                passed += 1;
                for (k, v) in stats {
                    let e = summary.entry(format!("max_{k}")).or_insert(f64::NEG_INFINITY);
                    *e = e.max(v);
                }
            }
            Err(diagnostic) => failures.push(Failure {
                case: format!("trial {t}"),
                seed: Some(trial_seed),
                diagnostic,
            }),
        }
    }
    for (case, outcome) in fixed_cases(name, cfg) {
        if let Err(diagnostic) = outcome {
            failures.push(Failure {
                case: format!("fixed: {case}"),
                seed: None,
                diagnostic,
            });
        }
    }
    Ok(VerifyReport {
        suite: name.to_string(),
        trials: cfg.trials,
        seed: cfg.seed,
        passed,
        failures,
        summary,
    })
}

/// Deterministic instances checked on every run alongside the random trials.
fn fixed_cases(name: &str, cfg: &VerifyConfig) -> Vec<(&'static str, Outcome)> {
    match name {
        "lemma64" => {
            let f = Signal::interval(1, 8);
            let rep = lemma64_check(&f, 1, &[PhaseGrid::constant(1, 7, 0.0)], cfg.mode);
            vec![(
                "indicator of [8]",
                rep.map_err(err).and_then(|r| {
                    check(r.holds, || {
                        format!("lhs {} > rhs {} ({:?} exponent)", r.lhs, r.rhs, cfg.mode)
                    })
                    .map(|_| vec![])
                }),
            )]
        }
        "vdc" => {
            let rep = vdc_check(&Signal::interval(1, 4), 4, 2);
            vec![(
                "g = 1 on [4], H = 2",
                rep.map_err(err).and_then(|r| {
                    check(r.lhs == 16.0 && r.rhs == 21.0 && r.holds, || {
                        format!("got lhs {} rhs {}", r.lhs, r.rhs)
                    })
                    .map(|_| vec![])
                }),
            )]
        }
        "invertbox-post" => {
            let f = Signal::from_fn(1, 20, |x| Complex64::new(if x % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
            let out = invert_arithmetic_box(&f, 2, 1, 8).map_err(err).and_then(|p| {
                check(p.correlation >= 0.9 * f.l2_sq(), || {
                    format!("correlation {} < 0.9 * {}", p.correlation, f.l2_sq())
                })
                .map(|_| vec![])
            });
            vec![("alternating signs, c = 2, d = 1", out)]
        }
        "counting-identity" => {
            let full9: Vec<i64> = (1..=9).collect();
            let full8: Vec<i64> = (1..=8).collect();
            let a = lambda_count(&full9, &ProgressionInstance::new(9, 1).unwrap());
            let b = lambda_count(&full8, &ProgressionInstance::new(8, 2).unwrap());
            vec![(
                "hand counts",
                check(a == 13 && b == 6, || format!("got {a} and {b}")).map(|_| vec![]),
            )]
        }
        _ => Vec::new(),
    }
}

fn gcs_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let s = rng.range(1, 3) as u32;
    let fs: Vec<Signal> = (0..1usize << s)
        .map(|_| {
            let w = rng.range(1, cfg.width as i64) as usize;
            let off = rng.range(-3, 3);
            disk_signal(rng, off, w)
        })
        .collect();
    let r = gcs_check(&fs, s).map_err(err)?;
    check(r.holds, || format!("s={s}: |<f>| = {} > prod = {}", r.lhs, r.rhs))?;
    Ok(vec![("ratio", r.lhs / r.rhs.max(f64::MIN_POSITIVE))])
}

fn vdc_trial(rng: &mut SplitMix64, _cfg: &VerifyConfig) -> Outcome {
    let (m, h) = [(20u64, 3u64), (50, 7), (64, 16)][rng.below(3) as usize];
    let off = rng.range(-4, 4);
    let g = disk_signal(rng, off, m as usize + 8);
    let r = vdc_check(&g, m, h).map_err(err)?;
    check(r.holds, || format!("M={m} H={h}: lhs {} > rhs {}", r.lhs, r.rhs))?;
    Ok(vec![("ratio", r.lhs / r.rhs.max(f64::MIN_POSITIVE))])
}

fn lemma58_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let cap = cfg.width.min(8) as i64;
    let dims = [
        rng.range(1, cap) as usize,
        rng.range(1, cap) as usize,
        rng.range(1, cap) as usize,
    ];
    let total: usize = dims.iter().product();
    let f = Grid3::new(dims, (0..total).map(|_| rng.disk()).collect()).map_err(err)?;
    let [n1, n2, n3] = dims;
    let t1: Vec<Complex64> = (0..n2 * n3).map(|_| rng.disk()).collect();
    let t2: Vec<Complex64> = (0..n1 * n3).map(|_| rng.disk()).collect();
    let t3: Vec<Complex64> = (0..n1 * n2).map(|_| rng.disk()).collect();
    let g1 = Grid3::from_fn(dims, |_, j, k| t1[j * n3 + k]);
    let g2 = Grid3::from_fn(dims, |i, _, k| t2[i * n3 + k]);
    let g3 = Grid3::from_fn(dims, |i, j, _| t3[i * n2 + j]);
    let r = box3_correlation_check(&f, [&g1, &g2, &g3]).map_err(err)?;
    check(r.holds, || format!("dims {dims:?}: corr {} > box {}", r.corr, r.r#box))?;
    Ok(vec![("ratio", r.corr / r.r#box.max(f64::MIN_POSITIVE))])
}

fn lemma64_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let m = rng.range(1, 2) as usize;
    let w = rng.range(1, cfg.width.min(16) as i64) as usize;
    let f = sign_signal(rng, w);
    let radius = w as i64 - 1;
    let phis: Vec<PhaseGrid> = if m == 1 {
        vec![PhaseGrid::constant(1, radius, rng.next_f64())]
    } else {
        let side = (2 * radius + 1) as usize;
        let t1: Vec<f64> = (0..side).map(|_| rng.next_f64()).collect();
        let t2: Vec<f64> = (0..side).map(|_| rng.next_f64()).collect();
        vec![
            PhaseGrid::from_fn(2, radius, |h| t1[(h[1] + radius) as usize]),
            PhaseGrid::from_fn(2, radius, |h| t2[(h[0] + radius) as usize]),
        ]
    };
    let r = lemma64_check(&f, 1, &phis, cfg.mode).map_err(err)?;
    check(r.holds, || format!("m={m} width={w}: lhs {} > rhs {}", r.lhs, r.rhs))?;
    Ok(vec![("ratio", r.lhs / r.rhs.max(f64::MIN_POSITIVE))])
}

fn mu_trial(rng: &mut SplitMix64, _cfg: &VerifyConfig) -> Outcome {
    let b = rng.range(1, 12);
    let a = rng.range(1, b);
    let delta = Ratio::new(a, b);
    let m = rng.range(1, 200) as u64;
    let w = match mu(delta, m) {
        Ok(w) => w,
        Err(Error::DegenerateWeight { .. }) => {
            return check(crate::params::floor_scaled(delta, m) == 0, || {
                "spurious degenerate weight".into()
            })
            .map(|_| vec![]);
        }
        Err(e) => return Err(err(e)),
    };
    let mass = w.mass_exact();
    check(w.mass_summed() == mass, || {
        format!("delta={delta} M={m}: summed mass != H^2/(delta^2 M)")
    })?;
    check(
        (-w.radius()..=w.radius()).all(|h| w.value_exact(h) == w.value_exact(-h)),
        || "asymmetric weight".into(),
    )?;
    if w.is_integral() {
        check(mass == Wide::from_integer(m as i128), || {
            format!("delta={delta} M={m}: mass {mass} != M")
        })?;
    }
    Ok(vec![])
}

fn counting_trial(rng: &mut SplitMix64, _cfg: &VerifyConfig) -> Outcome {
    let n = rng.range(1, 128) as u64;
    let q = rng.range(1, 4.min(n as i64)) as u64;
    let inst = ProgressionInstance::new(n, q).map_err(err)?;
    if rng.bernoulli(0.5) {
        let f: Vec<Signal> = (0..3).map(|_| disk_signal(rng, 1, n as usize)).collect();
        let a = lambda(&f[0], &f[1], &f[2], &inst);
        let b = lambda_via_dual(&f[0], &f[1], &f[2], &inst);
        let rel = (a - b).norm() / a.norm().max(1.0);
        check(rel <= 1e-9, || format!("{inst}: lambda {a} vs dual {b}"))?;
        Ok(vec![("relative_error", rel)])
    } else {
        let p = rng.next_f64();
        let set: Vec<i64> = (1..=n as i64).filter(|_| rng.bernoulli(p)).collect();
        let ind = Signal::indicator(&set);
        let count = lambda_count(&set, &inst);
        let via = lambda_via_dual(&ind, &ind, &ind, &inst);
        check(
            via.re.round() as u64 == count && (via.re - count as f64).abs() < 1e-6,
            || format!("{inst}: count {count} vs dual {via}"),
        )?;
        check((count == 0) == enumerate_progressions(&set, &inst).is_empty(), || {
            "enumeration disagrees".into()
        })?;
        Ok(vec![])
    }
}

fn u2_oracle_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let w = rng.range(1, cfg.width.min(30) as i64);
    let set: Vec<i64> = (1..=w).filter(|_| rng.bernoulli(0.5)).collect();
    let dft = u2_pow_dft(&Signal::indicator(&set));
    let member = crate::counting::Membership::new(&set);
    let mut quads = 0u64;
    for &a in &set {
        for &b in &set {
            for &c in &set {
                if member.contains(a + b - c) {
                    quads += 1;
                }
            }
        }
    }
    check(dft == quads as f64, || {
        format!("A={set:?}: DFT {dft} vs {quads} additive quadruples")
    })?;
    Ok(vec![])
}

fn boxavg_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let n = rng.range(16, 64) as u64;
    let params = Params::new(n, 1).map_err(err)?;
    let half = Ratio::new(1, 2);
    let w = rng.range(1, cfg.width as i64) as usize;
    let f = disk_signal(rng, 1, w);
    let abs = f.map(|_, z| Complex64::new(z.norm(), 0.0));
    let avg = |g: &Signal| triple_box_average(g, &params, half, half, AverageMode::Exact).map(|a| a.value);
    let bn = |g: &Signal| b_norm_pow(g, 1, &params, half, half);
    let (t, t_scale) = (avg(&f).map_err(err)?, avg(&abs).map_err(err)?);
    let (b, b_scale) = (bn(&f).map_err(err)?, bn(&abs).map_err(err)?);
    check(t >= -1e-9 * t_scale, || {
        format!("triple box average {t} (scale {t_scale})")
    })?;
    check(b >= -1e-9 * b_scale, || format!("b-norm {b} (scale {b_scale})"))?;
    for c in [Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)] {
        let g = f.scale(c);
        let k = c.norm();
        let (t2, b2) = (avg(&g).map_err(err)?, bn(&g).map_err(err)?);
        check((t2 - k.powi(8) * t).abs() <= 1e-9 * k.powi(8) * t_scale, || {
            format!("degree-8 homogeneity at c={c}")
        })?;
        check((b2 - k.powi(4) * b).abs() <= 1e-9 * k.powi(4) * b_scale, || {
            format!("degree-4 homogeneity at c={c}")
        })?;
    }
    Ok(vec![])
}

fn invertbox_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let c = rng.range(1, 7);
    let d = rng.range(1, 7);
    let w = rng.range(1, cfg.width.clamp(1, 200) as i64) as usize;
    let off = rng.range(-20, 20);
    let f = disk_signal(rng, off, w);
    let p = invert_arithmetic_box(&f, c as u64, d as u64, 8).map_err(err)?;
    let (lo, hi) = f.support().unwrap_or((0, -1));
    for x in lo..=hi {
        check(p.r.get(x) == p.r_at(x) && p.l.get(x) == p.l_at(x), || {
            format!("factor tables disagree at {x}")
        })?;
        if x + c <= hi {
            check(p.r.get(x) == p.r.get(x + c), || {
                format!("c={c} d={d}: r({x}) != r({})", x + c)
            })?;
        }
        check(
            p.l.get(x).norm() <= 1.0 + 1e-12 && p.r.get(x).norm() <= 1.0 + 1e-12,
            || format!("unbounded factor at {x}"),
        )?;
    }
    let recount = factored_correlation(&f, &p.l, &p.r);
    check((recount - p.correlation).abs() <= 1e-9 * recount.max(1.0), || {
        format!("correlation {} vs recount {recount}", p.correlation)
    })?;
    Ok(vec![(
        "correlation_fraction",
        p.correlation / f.l2_sq().max(f64::MIN_POSITIVE),
    )])
}

fn increment_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let n = cfg.n;
    let inst = ProgressionInstance::new(n, 1).map_err(err)?;
    let qprime = rng.range(1, 5) as u64;
    let nprime = rng.range(40, inst.m.max(40) as i64) as u64;
    let span = (qprime * nprime) as i64;
    let a = rng.range(0, n as i64 - span);
    let alpha_out = 0.05 + 0.45 * rng.next_f64();
    let alpha_in = alpha_out + 0.4 + (0.6 - alpha_out) * rng.next_f64();
    let alpha_in = alpha_in.min(1.0);
    let plant_seed = rng.next_u64();
    let set = planted_increment_set(n, 1, qprime, a, nprime, alpha_in, alpha_out, plant_seed).map_err(err)?;
    let sp = SearchParams {
        qprime_max: 6,
        nprime_min: 16,
        nprime_max: inst.m,
        grid_factor: 8,
    };
    let best = find_increment(&set, &inst, &sp).map_err(err)?.best;
    let density = *best.density.numer() as f64 / *best.density.denom() as f64;
    let floor = alpha_in - 3.0 * (alpha_in / nprime as f64).sqrt();
    check(density >= floor, || {
        format!(
            "plant q'={qprime} a={a} N'={nprime} alpha_in={alpha_in:.3}: found {} < {floor:.3}",
            best.density
        )
    })?;
    Ok(vec![("density_excess", density - floor)])
}

fn transport_trial(rng: &mut SplitMix64, cfg: &VerifyConfig) -> Outcome {
    let n = rng.range(100, cfg.n.min(10_000) as i64) as u64;
    let set = greedy_free_set(&ProgressionInstance::new(n, 1).map_err(err)?);
    let sp = SearchParams {
        nprime_min: rng.range(8, 100) as u64,
        ..SearchParams::default()
    };
    let trace = iterate_increment(&set, n, 10, &sp).map_err(err)?;
    let mut a_i = set;
    for s in &trace.steps {
        let inst = ProgressionInstance::new(s.n_i, s.q_i).map_err(err)?;
        check(enumerate_progressions(&a_i, &inst).is_empty(), || {
            format!("N={n} step {}: set has progressions", s.i)
        })?;
        let next = rescale_set(&a_i, s.a, s.q_i * s.qprime, s.nprime);
        check(
            s.alpha_new == Ratio::new(next.len() as u64, s.nprime) && s.alpha_new > s.alpha_i,
            || format!("N={n} step {}: density bookkeeping", s.i),
        )?;
        if let Ok(next_inst) = ProgressionInstance::new(s.nprime, s.q_i * s.q_i * s.qprime) {
            check(enumerate_progressions(&next, &next_inst).is_empty(), || {
                format!("N={n} step {}: transport failed", s.i)
            })?;
        }
        a_i = next;
    }
    check(trace.witness.is_none(), || {
        format!("N={n}: progression reported in a free set")
    })?;
    Ok(vec![("steps", trace.steps.len() as f64)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: u64) -> VerifyConfig {
        VerifyConfig {
            trials,
            n: 2000,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn every_suite_passes_briefly() {
        for name in SUITES {
            let rep = run_suite(name, &small(6)).unwrap();
            assert!(rep.success(), "{name}: {:?}", rep.failures);
            assert_eq!(rep.passed, 6);
        }
        assert!(run_suite("nope", &small(1)).is_err());
    }

    #[test]
    fn weak_exponent_fails_on_indicator() {
        let cfg = VerifyConfig {
            mode: ExponentMode::Paper,
            ..small(0)
        };
        let rep = run_suite("lemma64", &cfg).unwrap();
        assert_eq!(rep.failures.len(), 1);
        assert_eq!(rep.failures[0].case, "fixed: indicator of [8]");
    }

    #[test]
    fn failures_replay_from_their_seed() {
        // The weak exponent fails on some random trials; each failing seed must
        // reproduce as trial 0 of a one-trial run.
        let cfg = VerifyConfig {
            mode: ExponentMode::Paper,
            ..small(40)
        };
        let rep = run_suite("lemma64", &cfg).unwrap();
        let random: Vec<&Failure> = rep.failures.iter().filter(|f| f.seed.is_some()).collect();
        assert!(!random.is_empty());
        for f in random {
            let again = run_suite(
                "lemma64",
                &VerifyConfig {
                    seed: f.seed.unwrap(),
                    trials: 1,
                    ..cfg
                },
            )
            .unwrap();
            assert_eq!(again.failures[0].diagnostic, f.diagnostic);
        }
    }
}
