//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::Command as Process;
use std::time::{Duration, Instant};

use common::*;
use fastsim::channel::RandomStream;
use fastsim::codes::{make_hamming, make_repetition};
use fastsim::decoders::Decoder;
use fastsim::estimators::{
    estimate_t, merge_reports, required_samples, run_is_at, run_is_basic, run_is_invariant,
    tally_words, ErrorTally, ISConfig, Sharding, StopReason, StopRule,
};
use fastsim::exact::{
    approx_variance, argmin_q, error_profile, exact_wer, fixed_point_q, paper_variance,
    scan_effective_t, true_variance, variance_derivative, xi, xi_discriminant, EnumerationCaps,
    ErrorProfile,
};

/// Sub-check results of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failed.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn criterion(id: u32, name: &str, body: impl FnOnce(&mut Checks)) -> bool {
    let mut c = Checks::default();
    let start = Instant::now();
    body(&mut c);
    let secs = start.elapsed().as_secs_f64();
    let mut detail = c.notes.join("; ");
    if !c.failed.is_empty() {
        if !detail.is_empty() {
            detail.push_str("; ");
        }
        let shown: Vec<&str> = c.failed.iter().take(3).map(String::as_str).collect();
        detail.push_str(&format!(
            "{} failed check(s): {}",
            c.failed.len(),
            shown.join(" | ")
        ));
    }
    let verdict = if c.failed.is_empty() { "PASS" } else { "FAIL" };
    println!("{verdict} [{id:>2}] {name} ({secs:.2}s) {detail}");
    c.failed.is_empty()
}

/// The decoders used for the exactness checks, with their full indicator tables.
fn oracle_suite() -> Vec<(String, Decoder, Vec<bool>)> {
    let mut decoders = vec![Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap()];
    for n in [3, 5, 7] {
        decoders.push(Decoder::syndrome_table(&make_repetition(n).unwrap()).unwrap());
    }
    decoders.push(Decoder::syndrome_table(&random_code_10_5()).unwrap());
    decoders.push(Decoder::bit_flip(&ldpc12(), 20).unwrap());
    decoders
        .into_iter()
        .map(|d| {
            let label = format!("{} {}", d.code().name(), d.describe());
            let table = indicator_table(&d);
            (label, d, table)
        })
        .collect()
}

const Q_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn oracle_exactness(c: &mut Checks) {
    let start = Instant::now();
    for (label, d, table) in oracle_suite() {
        let prof = error_profile(&d).unwrap();
        for p in [0.1, 0.01] {
            for q in Q_GRID {
                let want = brute_force_moments(&table, d.n(), p, q).variance();
                let got = true_variance(&prof, p, q, 1).unwrap();
                let e = rel_err(got, want);
                c.check(e <= 1e-12, || {
                    format!("{label} p={p} q={q}: rel err {e:.2e}")
                });
            }
        }
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(5), || {
        format!("runtime {elapsed:?} >= 5s")
    });
}

/// Spacing of doubles at `x`.
fn ulp(x: f64) -> f64 {
    let x = x.abs();
    f64::from_bits(x.to_bits() + 1) - x
}

fn gap_identity(c: &mut Checks) {
    // A difference of two doubles cannot resolve the gap below one ulp of the
    // operands; track how far each miss sits from that floor.
    let mut worst_vs_floor = 0.0f64;
    let mut below_floor = 0;
    for (label, d, table) in oracle_suite() {
        let prof = error_profile(&d).unwrap();
        for p in [0.1, 0.01] {
            for q in Q_GRID {
                let m = brute_force_moments(&table, d.n(), p, q);
                // (sum P_i)^2 - sum P_i^2 as the cross terms, free of cancellation.
                let mut cross = Sum::default();
                for (i, a) in m.per_weight.iter().enumerate() {
                    for b in &m.per_weight[i + 1..] {
                        cross.add(2.0 * a * b);
                    }
                }
                let want = cross.value();
                let pv = paper_variance(&prof, p, q, 1).unwrap();
                let tv = true_variance(&prof, p, q, 1).unwrap();
                let got = pv - tv;
                let e = rel_err(got, want);
                let floor = (ulp(pv) + ulp(tv)) / want.abs();
                if e > 1e-12 {
                    worst_vs_floor = worst_vs_floor.max(e / floor);
                    if floor > 1e-12 {
                        below_floor += 1;
                    }
                }
                c.check(e <= 1e-12, || {
                    format!(
                        "{label} p={p} q={q}: rel err {e:.2e} (double-precision floor {floor:.2e})"
                    )
                });
                c.check(got >= 0.0, || {
                    format!("{label} p={p} q={q}: negative gap {got:e}")
                });
            }
        }
    }
    if worst_vs_floor > 0.0 {
        c.note(format!(
            "{below_floor} point(s) where one ulp of the variances exceeds 1e-12 of the gap; \
             worst miss is {worst_vs_floor:.2}x that floor"
        ));
    }
}

fn derivative_check(c: &mut Checks) {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (label, d, _) in oracle_suite() {
        let prof = error_profile(&d).unwrap();
        for p in [0.1, 0.01] {
            for k in 1..=19 {
                let q = k as f64 * 0.05;
                let fd = (true_variance(&prof, p, q + h, 1).unwrap()
                    - true_variance(&prof, p, q - h, 1).unwrap())
                    / (2.0 * h);
                let got = variance_derivative(&prof, p, q, 1).unwrap();
                let e = rel_err(got, fd);
                worst = worst.max(e);
                c.check(e <= 1e-5, || {
                    format!("{label} p={p} q={q:.2}: rel err {e:.2e}")
                });
            }
        }
    }
    c.note(format!("worst rel err {worst:.1e}"));
}

fn convexity(c: &mut Checks) {
    let grid: Vec<f64> = (1..1000).map(|k| k as f64 / 1000.0).collect();
    let mut top_worst = 0.0f64;
    for n in 1..=64usize {
        for &q in &grid {
            for i in 0..=n {
                let v = xi(n, q, i);
                c.check(v >= 0.0, || {
                    format!("xi(q={q}, i={i}) = {v:e} < 0 at n={n}")
                });
                let (nf, fi) = (n as f64, i as f64);
                let direct = (fi - nf * q).powi(2) + nf * q * q - fi * (2.0 * q - 1.0);
                let scale = (fi + nf * q).powi(2) + nf + fi;
                c.check((v - direct).abs() <= 1e-14 * scale, || {
                    format!(
                        "xi(q={q}, i={i}) = {v} disagrees with its definition {direct} at n={n}"
                    )
                });
            }
            let stated = (n + 1) as f64 * (1.0 - q).powi(2);
            let e = rel_err(xi(n, q, n), stated);
            top_worst = top_worst.max(e);
            c.check(e <= 1e-12, || {
                format!(
                    "n={n} q={q}: xi(q,n) = {} vs (n+1)(1-q)^2 = {stated}",
                    xi(n, q, n)
                )
            });
        }
        for i in 1..n {
            c.check(xi_discriminant(n, i) < 0, || {
                format!("discriminant >= 0 at n={n}, i={i}")
            });
        }
    }
    c.note(format!(
        "worst rel err of xi(q,n) vs (n+1)(1-q)^2: {top_worst:.3}"
    ));
}

fn test_profiles() -> Vec<(String, ErrorProfile)> {
    oracle_suite()
        .into_iter()
        .map(|(label, d, _)| (label, error_profile(&d).unwrap()))
        .collect()
}

fn fixed_point(c: &mut Checks) {
    let mut worst_gap = 0.0f64;
    let mut worst_slope = 0.0f64;
    for (label, prof) in test_profiles() {
        for p in [0.1, 0.01, 1e-3, 1e-4] {
            let fp = fixed_point_q(&prof, p).unwrap();
            let am = argmin_q(&prof, p).unwrap();
            let gap = (fp.q - am).abs();
            let slope = variance_derivative(&prof, p, fp.q, 1).unwrap().abs();
            worst_gap = worst_gap.max(gap);
            worst_slope = worst_slope.max(slope);
            c.check(gap <= 1e-6, || {
                format!("{label} p={p}: |fp - argmin| = {gap:e}")
            });
            c.check(slope <= 1e-10, || {
                format!("{label} p={p}: |d var/dq| = {slope:e}")
            });
        }
    }
    c.note(format!(
        "max |fp-argmin| {worst_gap:.1e}, max |slope| {worst_slope:.1e}"
    ));
}

fn small_p_optimum(c: &mut Checks) {
    let d = Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap();
    let prof = error_profile(&d).unwrap();
    let am = argmin_q(&prof, 1e-3).unwrap();
    c.note(format!("argmin_q = {am:.6}"));
    c.check((am - 2.0 / 7.0).abs() <= 0.02, || {
        format!("argmin_q {am} not within 0.02 of 2/7")
    });
    for (label, prof) in test_profiles() {
        let n = prof.n();
        let t = prof.t_effective();
        let target = (t + 1) as f64 / n as f64;
        if target >= 1.0 {
            continue;
        }
        for p in [1e-2, 1e-3, 1e-4] {
            let m = golden_min(
                |q| approx_variance(&prof, p, q, 1).unwrap().ln(),
                1e-3,
                1.0 - 1e-3,
            );
            c.check((m - target).abs() <= 1e-6, || {
                format!("{label} p={p}: approx minimizer {m} vs (t+1)/n = {target}")
            });
        }
    }
}

fn statistical_correctness(c: &mut Checks) {
    let d = Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap();
    let exact = exact_wer(&error_profile(&d).unwrap(), 0.01).unwrap();
    c.check((exact - 2.0310e-3).abs() < 5e-8, || {
        format!("exact WER {exact} does not round to 2.0310e-3")
    });
    let stop = StopRule {
        target_kappa: 0.1,
        min_words: 10_000,
        max_words: 10_000,
        target_error_count: None,
    };
    let runs: Vec<_> = (0..100u64)
        .map(|seed| {
            run_is_at(
                &d,
                0.01,
                2.0 / 7.0,
                &stop,
                &mut RandomStream::new(seed, 0),
                &Sharding::default(),
            )
            .unwrap()
        })
        .collect();
    c.check(runs.iter().all(|r| r.estimation_words == 10_000), || {
        "run length differs from 10^4".into()
    });
    let m = runs.len() as f64;
    let mean = runs.iter().map(|r| r.wer).sum::<f64>() / m;
    let sd = (runs.iter().map(|r| (r.wer - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let mean_kappa = runs.iter().map(|r| r.kappa.unwrap()).sum::<f64>() / m;
    let empirical = sd / exact;
    c.note(format!(
        "mean {mean:.5e} vs {exact:.5e}, bound {:.2e}; empirical rel err {empirical:.4} vs mean kappa {mean_kappa:.4}",
        3.0 * sd / m.sqrt()
    ));
    c.check((mean - exact).abs() <= 3.0 * sd / m.sqrt(), || {
        "mean outside 3 standard errors".into()
    });
    c.check(empirical <= 1.5 * mean_kappa, || {
        "empirical relative error above 1.5 kappa".into()
    });
}

fn efficiency_gain(c: &mut Checks) {
    let start = Instant::now();
    let d = Decoder::syndrome_table(&make_repetition(15).unwrap()).unwrap();
    let exact = exact_wer(&error_profile(&d).unwrap(), 0.05).unwrap();
    let mut stream = RandomStream::new(0, 0);
    let r = run_is_basic(
        &d,
        0.05,
        &ISConfig::new(0.05),
        &StopRule::default(),
        &mut stream,
        &Sharding::default(),
    )
    .unwrap();
    let mc = required_samples(0.1, exact);
    let gain = mc as f64 / r.words_generated as f64;
    c.note(format!(
        "exact WER {exact:.4e}; IS {} words, kappa {:.3}, estimate {:.3e}; MC needs {mc}; gain {gain:.2e}",
        r.words_generated,
        r.kappa.unwrap_or(f64::NAN),
        r.wer
    ));
    c.check(
        r.stop_reason == StopReason::TargetKappa && r.kappa.is_some_and(|k| k <= 0.1),
        || "IS did not reach kappa 0.1".into(),
    );
    c.check(r.words_generated <= 100_000, || {
        format!("IS used {} words", r.words_generated)
    });
    c.check(mc as f64 > 5e9, || {
        format!("MC requirement {mc} is not above 5e9")
    });
    c.check(gain >= 5e4, || {
        format!("sample-count gain {gain:.3e} below 5e4")
    });
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(30), || {
        format!("runtime {elapsed:?} >= 30s")
    });
}

fn snr_invariance(c: &mut Checks) {
    let d = Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap();
    let prof = error_profile(&d).unwrap();
    let ps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let reports = run_is_invariant(
        &d,
        1,
        &ps,
        &StopRule::default(),
        &mut RandomStream::new(0, 0),
        &Sharding::default(),
    )
    .unwrap();
    for r in &reports {
        let exact = exact_wer(&prof, r.p).unwrap();
        let k = r.kappa.unwrap();
        c.check((r.wer - exact).abs() <= 3.0 * k * r.wer, || {
            format!("p={}: {} vs exact {exact} (kappa {k})", r.p, r.wer)
        });
    }
    let words = reports[0].words_generated;
    c.check(reports.iter().all(|r| r.words_generated == words), || {
        "words differ across points".into()
    });
    c.note(format!("{} points from {words} words", reports.len()));
}

fn t_estimation(c: &mut Checks) {
    let cfg = ISConfig {
        q0: 0.5,
        l: 3,
        words_per_iteration: 100,
    };
    let ldpc = Decoder::bit_flip(&ldpc12(), 20).unwrap();
    let ldpc_t = scan_effective_t(&ldpc, EnumerationCaps::default()).unwrap();
    c.check(ldpc_t == brute_force_t(&indicator_table(&ldpc)), || {
        "scan disagrees with brute force".into()
    });
    let cases = [
        (
            "hamming(7,4)",
            Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap(),
            1,
        ),
        (
            "repetition(5)",
            Decoder::syndrome_table(&make_repetition(5).unwrap()).unwrap(),
            2,
        ),
        (
            "bch(15,5) bounded t=3",
            Decoder::bounded_distance(&bch15_5(), 3).unwrap(),
            3,
        ),
        ("ldpc12 bit-flip", ldpc, ldpc_t),
    ];
    let mut seen = Vec::new();
    for (label, d, want) in cases {
        let te = estimate_t(
            &d,
            1e-3,
            &cfg,
            &mut RandomStream::new(0, 0),
            &Sharding::default(),
        )
        .unwrap();
        seen.push(format!("{label}: {} ({} words)", te.t, te.words));
        c.check(te.t == want, || {
            format!("{label}: got t={} want {want}", te.t)
        });
        c.check(te.words <= 1_000, || format!("{label}: {} words", te.words));
    }
    c.note(seen.join(", "));
}

fn run_cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Process::new(env!("CARGO_BIN_EXE_fastsim"))
        .args(args)
        .output()
        .unwrap();
    (out.status.code(), out.stdout)
}

fn determinism(c: &mut Checks) {
    let commands: [&[&str]; 4] = [
        &[
            "is",
            "--code",
            "hamming:3",
            "--snr",
            "3:7:1",
            "--seed",
            "11",
            "--workers",
            "3",
        ],
        &[
            "mc",
            "--code",
            "repetition:5",
            "--p-list",
            "0.05,0.02",
            "--seed",
            "4",
            "--workers",
            "2",
            "--format",
            "json",
        ],
        &[
            "is-invariant",
            "--code",
            "hamming:3",
            "--p-list",
            "1e-2,1e-3,1e-4",
            "--seed",
            "9",
            "--workers",
            "4",
        ],
        &[
            "estimate-t",
            "--code",
            "hamming:3",
            "--p-list",
            "1e-3",
            "--seed",
            "2",
            "--batch",
            "100",
        ],
    ];
    for args in commands {
        let (s1, o1) = run_cli(args);
        let (s2, o2) = run_cli(args);
        c.check(s1 == Some(0) && s2 == Some(0), || {
            format!("{args:?}: exit {s1:?}/{s2:?}")
        });
        c.check(!o1.is_empty() && o1 == o2, || {
            format!("{args:?}: output differs between runs")
        });
    }

    // 4-way split merged versus the same words tallied as one sequence.
    let d = Decoder::syndrome_table(&make_hamming(3).unwrap()).unwrap();
    let words = 5_000u64;
    let stop = StopRule {
        min_words: words,
        max_words: words,
        ..StopRule::default()
    };
    let subs = RandomStream::new(21, 0).split(4).unwrap();
    let parts: Vec<_> = subs
        .iter()
        .map(|s| {
            run_is_at(
                &d,
                1e-3,
                0.3,
                &stop,
                &mut s.clone(),
                &Sharding {
                    workers: 2,
                    batch: 700,
                },
            )
            .unwrap()
        })
        .collect();
    let merged = merge_reports(&parts).unwrap();
    let mut single = ErrorTally::new(7);
    for s in &subs {
        single.merge(&tally_words(&d, s, 0.3, 0, words, 1).unwrap());
    }
    c.check(merged.tally() == single, || {
        "merged tallies differ from the single sequence".into()
    });
    let (s1, s2) = single.weighted_sums(1e-3, 0.3);
    let direct_wer = s1 / single.words as f64;
    c.check(merged.wer == direct_wer, || {
        format!("wer {} vs {direct_wer}", merged.wer)
    });
    c.check(
        merged.errors == single.errors() && merged.estimation_words == single.words,
        || "error or word counts differ".into(),
    );
    let var = s2 / single.words as f64 - direct_wer * direct_wer;
    let kappa = (var / single.words as f64).sqrt() / direct_wer;
    c.check(merged.kappa == Some(kappa), || {
        format!("kappa {:?} vs {kappa}", merged.kappa)
    });

    // Worker count does not change a run.
    let base = run_is_at(
        &d,
        1e-3,
        0.3,
        &stop,
        &mut RandomStream::new(5, 0),
        &Sharding {
            workers: 1,
            batch: 1_000,
        },
    )
    .unwrap();
    for workers in [2, 4, 8] {
        let mut r = run_is_at(
            &d,
            1e-3,
            0.3,
            &stop,
            &mut RandomStream::new(5, 0),
            &Sharding {
                workers,
                batch: 1_000,
            },
        )
        .unwrap();
        r.workers = 1;
        c.check(r == base, || {
            format!("{workers} workers changed the report")
        });
    }
}

fn main() {
    let results = [
        criterion(1, "oracle exactness of the variance", oracle_exactness),
        criterion(2, "variance gap identity", gap_identity),
        criterion(
            3,
            "variance derivative vs finite differences",
            derivative_check,
        ),
        criterion(4, "convexity certificate", convexity),
        criterion(5, "fixed point equals minimizer", fixed_point),
        criterion(6, "small-p optimum (t+1)/n", small_p_optimum),
        criterion(7, "statistical correctness of IS", statistical_correctness),
        criterion(8, "efficiency gain over MC", efficiency_gain),
        criterion(9, "one sample set for the whole curve", snr_invariance),
        criterion(10, "t estimation", t_estimation),
        criterion(11, "determinism and sharding", determinism),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
