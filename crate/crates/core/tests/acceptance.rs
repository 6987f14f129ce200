//! Acceptance suite: the full verification battery, one pass/fail line per
//! criterion, plus independent oracles and end-to-end CLI checks.

use std::process::Command;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use iwasawa_kit::cli::battery::{criterion_names, verify_suite, Options, VerifyReport};
use iwasawa_kit::cli::{render, MINIMAL_SCENARIO};
use iwasawa_kit::coeff::zp_log;

fn full_options() -> Options {
    Options {
        seed: 0,
        quick: false,
        inject: None,
        threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        only: Vec::new(),
    }
}

fn summarize(first: &VerifyReport, identical: bool) -> Vec<(u32, String, bool, String)> {
    first
        .criteria
        .iter()
        .map(|c| {
            let mut pass = c.pass;
            let mut why = c.failures.first().cloned().unwrap_or_default();
            if c.id == 11 && !identical {
                pass = false;
                why = "two verify runs with the same seed rendered different bytes".into();
            }
            (c.id, c.name.clone(), pass, why)
        })
        .collect()
}

#[test]
fn acceptance_criteria() {
    let opts = full_options();
    let first = verify_suite(&opts);
    let second = verify_suite(&opts);
    let identical = render(&first) == render(&second);

    let names = criterion_names();
    assert_eq!(first.criteria.len(), names.len(), "every criterion reports");
    let rows = summarize(&first, identical);
    for (id, name, pass, why) in &rows {
        if *pass {
            println!("criterion {id:>2} {name}: PASS");
        } else {
            println!("criterion {id:>2} {name}: FAIL ({why})");
        }
    }
    let failed: Vec<String> = rows.iter().filter(|r| !r.2).map(|r| format!("{} {}: {}", r.0, r.1, r.3)).collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}

/// log(u) mod p^m from the rational series Σ (−1)^{k+1} (u−1)^k / k.
fn series_log(p: u64, m: u32, u: u64) -> u64 {
    let q = BigInt::from(p.pow(m));
    let w = BigRational::from_integer(BigInt::from(u) - 1);
    let mut acc = BigRational::zero();
    let mut pw = BigRational::one();
    for k in 1..=(4 * m as i64 + 8) {
        pw *= &w;
        let term = &pw / BigRational::from_integer(BigInt::from(k));
        acc = if k % 2 == 1 { acc + term } else { acc - term };
    }
    let (num, den) = (acc.numer().clone(), acc.denom().clone());
    let inv = den.modinv(&q).expect("p-integral series");
    let r = (num * inv) % &q;
    let r = if r.is_negative() { r + &q } else { r };
    r.to_u64().unwrap()
}

#[test]
fn logarithm_matches_the_rational_series() {
    assert_eq!(series_log(5, 3, 6), 55);
    assert_eq!(zp_log(5, 3, 6).unwrap(), 55);
    for m in 2..=6 {
        for t in 0..25 {
            let u = 1 + 5 * t;
            assert_eq!(zp_log(5, m, u).unwrap(), series_log(5, m, u), "log({u}) mod 5^{m}");
        }
    }
}

fn iwasawa(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_iwasawa")).args(args).output().expect("binary runs")
}

fn temp_file(name: &str, text: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(format!("iwasawa-{}-{name}", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn cli_exit_codes() {
    let good = temp_file("minimal.json", MINIMAL_SCENARIO);
    let ok = iwasawa(&["run", good.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["pass"], true);
    let again = iwasawa(&["run", good.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(ok.stdout, again.stdout, "reports do not depend on the thread count");

    let bad = temp_file("bad.json", r#"{"schema": 1, "coeff": {"p": 5}}"#);
    assert_eq!(iwasawa(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(iwasawa(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    assert_eq!(iwasawa(&["verify", "--no-such-flag"]).status.code(), Some(2));

    let clean = iwasawa(&["verify", "--quick", "--criterion", "10"]);
    assert_eq!(clean.status.code(), Some(0));
    let injected = iwasawa(&["verify", "--quick", "--criterion", "10", "--inject", "h1-action"]);
    assert_eq!(injected.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&injected.stdout).unwrap();
    assert_eq!(rep["criteria"][0]["pass"], false);

    let _ = std::fs::remove_file(good);
    let _ = std::fs::remove_file(bad);
}
