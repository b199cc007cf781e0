//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{count_oracle, probability as oracle_p, RuleMemory, Xorshift};
use lom::code::centered_inner_product;
use lom::memory::{InputMask, LearningParams, Representation, SynapticMemory};
use lom::soma::{probability, spike};
use lom::{encode, BinaryVector, ProbabilityVector, SpikeRng};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn bv(bits: u64, len: usize) -> BinaryVector {
    BinaryVector::from_packed(bits, len).unwrap()
}

fn label_bits(x: u64, r: usize) -> Vec<u8> {
    (0..r).map(|k| ((x >> k) & 1) as u8).collect()
}

fn positions(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()
}

fn within(start: Instant, limit: Duration) -> Outcome {
    let t = start.elapsed();
    if t < limit {
        Ok(format!("{:.1}s", t.as_secs_f64()))
    } else {
        Err(format!(
            "took {:.1}s, limit {:.0}s",
            t.as_secs_f64(),
            limit.as_secs_f64()
        ))
    }
}

fn orthogonality() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0u64;
    for m in 1..=10usize {
        let codes: Vec<_> = (0..1u64 << m).map(|v| encode(&bv(v, m)).unwrap()).collect();
        let self_product = 2f64.powi(m as i32 - 2);
        for (a, ca) in codes.iter().enumerate() {
            for (b, cb) in codes.iter().enumerate() {
                let ip = centered_inner_product(ca, cb).unwrap();
                let expected = if a == b { self_product } else { 0.0 };
                if ip != expected {
                    return Err(format!("m={m} a={a:b} b={b:b}: {ip} != {expected}"));
                }
                pairs += 1;
            }
        }
    }
    within(start, Duration::from_secs(60)).map(|t| format!("{pairs} pairs, {t}"))
}

fn count_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = Xorshift(0xacce97);
    let mut checks = 0u64;
    let mut exact = 0usize;
    for case in 0..1000 {
        let m = 1 + rng.below(8) as usize;
        let r = 1 + rng.below(4) as usize;
        let forgetting = if case % 2 == 0 { 1.0 } else { 0.9 };
        // Half the gains are powers of two, where every stored quantity is exact.
        let dyadic = rng.below(2) == 0;
        let gain = if dyadic {
            2f64.powi(rng.below(9) as i32 - 4)
        } else {
            0.01 + 10.0 * rng.unit()
        };
        let params = LearningParams::new(forgetting, gain).unwrap();
        let mut mem = SynapticMemory::new(m, r, params, Representation::Counts).unwrap();
        let full = (1u64 << m) - 1;
        let pool: Vec<u64> = (0..1 + rng.below(6)).map(|_| rng.below(1 << m)).collect();
        let mut history = Vec::new();
        for _ in 0..rng.below(50) {
            let v = pool[rng.below(pool.len() as u64) as usize];
            let l = rng.below(1 << r);
            mem.learn_input(&bv(v, m), &bv(l, r)).unwrap();
            history.push((v, label_bits(l, r)));
        }
        for _ in 0..8 {
            let q = if rng.below(2) == 0 {
                pool[rng.below(pool.len() as u64) as usize]
            } else {
                rng.below(1 << m)
            };
            let ignored = rng.below(1 << m) & rng.below(1 << m) & full;
            let mask = InputMask::ignoring(m, &positions(ignored)).unwrap();
            let (d, c) = mem.retrieve_raw_input(&bv(q, m), &mask).unwrap();
            let (ed, ec) = count_oracle(m, r, forgetting, gain, &history, q, ignored);
            let ok = (c - ec).abs() <= 1e-9 && d.iter().zip(&ed).all(|(a, b)| (a - b).abs() <= 1e-9);
            if !ok {
                return Err(format!("case {case}: got ({d:?}, {c}), oracle ({ed:?}, {ec})"));
            }
            checks += 1;
        }
        if forgetting == 1.0 {
            for &q in &pool {
                let matching: Vec<&Vec<u8>> = history.iter().filter(|(v, _)| *v == q).map(|(_, l)| l).collect();
                let p = probability(&mem.retrieve_generalized_input(&bv(q, m), 0).unwrap());
                for k in 0..r {
                    let freq = if matching.is_empty() {
                        0.5
                    } else {
                        matching.iter().filter(|l| l[k] == 1).count() as f64 / matching.len() as f64
                    };
                    let ok = if dyadic {
                        p[k] == freq
                    } else {
                        (p[k] - freq).abs() <= 1e-12
                    };
                    if !ok {
                        return Err(format!("case {case}: p[{k}] = {} but frequency is {freq}", p[k]));
                    }
                    exact += usize::from(dyadic);
                }
            }
        }
    }
    within(start, Duration::from_secs(60))
        .map(|t| format!("1000 sequences, {checks} retrievals, {exact} bitwise-exact frequencies, {t}"))
}

fn generalization_semantics() -> Outcome {
    let mut rng = Xorshift(0x6e4e);
    let mut by_tier = [0usize; 4];
    for case in 0..600 {
        let m = 3 + rng.below(6) as usize;
        let max_tier = (rng.below(3) as usize).min(m - 2);
        let r = 1 + rng.below(4) as usize;
        let params = LearningParams::default();
        let mut rules = RuleMemory::new(m, r, 1.0, 1.0);
        let mut dense = SynapticMemory::new(m, r, params, Representation::Dense).unwrap();
        let mut counts = SynapticMemory::new(m, r, params, Representation::Counts).unwrap();
        let stored: Vec<u64> = (0..1 + rng.below(10)).map(|_| rng.below(1 << m)).collect();
        for &v in &stored {
            let l = rng.below(1 << r);
            rules.learn(v, &label_bits(l, r));
            dense.learn_input(&bv(v, m), &bv(l, r)).unwrap();
            counts.learn_input(&bv(v, m), &bv(l, r)).unwrap();
        }
        let mut q = stored[rng.below(stored.len() as u64) as usize];
        for _ in 0..1 + rng.below(2) {
            q ^= 1 << rng.below(m as u64);
        }
        let expected = rules.retrieve_tiered(q, max_tier);
        for (name, mem) in [("dense", &dense), ("counts", &counts)] {
            let got = mem.retrieve_generalized_input(&bv(q, m), max_tier).unwrap();
            let ok = match &expected {
                None => got.tier_used.is_none() && got.c == 0.0,
                Some((k, d, c)) => got.tier_used == Some(*k) && probability(&got).into_vec() == oracle_p(d, *c),
            };
            if !ok {
                return Err(format!("case {case} ({name}): got {got:?}, oracle {expected:?}"));
            }
        }
        by_tier[expected.map_or(3, |e| e.0)] += 1;
    }
    Ok(format!(
        "600 queries; tier 0/1/2/none: {}/{}/{}/{}",
        by_tier[0], by_tier[1], by_tier[2], by_tier[3]
    ))
}

fn probability_bounds() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        any::<bool>(),
        0.5f64..=1.0,
        0.01f64..10.0,
        0usize..=3,
        prop::collection::vec((any::<bool>(), 0u64..256, 0u64..16), 1..100),
    );
    runner
        .run(&strategy, |(dense, decay, gain, max_tier, ops)| {
            let repr = if dense {
                Representation::Dense
            } else {
                Representation::Counts
            };
            let params = LearningParams::new(decay, gain).unwrap();
            let mut mem = SynapticMemory::new(8, 4, params, repr).unwrap();
            for (learn, v, l) in ops {
                if learn {
                    mem.learn_input(&bv(v, 8), &bv(l, 4)).unwrap();
                    continue;
                }
                let res = mem.retrieve_generalized_input(&bv(v, 8), max_tier).unwrap();
                for &dk in &res.d {
                    prop_assert!(dk.abs() <= res.c * (1.0 + 1e-9) + 1e-12, "|d| {} > c {}", dk, res.c);
                }
                for &p in probability(&res).as_slice() {
                    prop_assert!((0.0..=1.0).contains(&p), "p = {}", p);
                }
            }
            Ok(())
        })
        .map(|()| "512 fuzzed learn/retrieve sequences".to_string())
        .map_err(|e| e.to_string())
}

fn spike_statistics() -> Outcome {
    let n = 100_000u32;
    let mut report = Vec::new();
    for (i, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let mut rng = SpikeRng::new(20_240 + i as u64, "acceptance");
        let pv = ProbabilityVector::new(vec![p]).unwrap();
        let ones: u32 = (0..n).map(|_| spike(&pv, &mut rng).packed() as u32).sum();
        let freq = f64::from(ones) / f64::from(n);
        let sigma = (p * (1.0 - p) / f64::from(n)).sqrt();
        if (freq - p).abs() > 3.0 * sigma {
            return Err(format!("p={p}: frequency {freq} outside {p} +/- {:.5}", 3.0 * sigma));
        }
        report.push(format!("p={p}: {freq:.4}"));
    }
    Ok(report.join(", "))
}

struct Run {
    metrics: String,
    checkpoint: Vec<u8>,
    dir: PathBuf,
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_experiment(out: &Path) -> Result<Run, String> {
    let config = workspace().join("configs/default.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_lom"))
        .arg("experiment")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("experiment exited with {status}"));
    }
    Ok(Run {
        metrics: fs::read_to_string(out.join("metrics.csv")).map_err(|e| e.to_string())?,
        checkpoint: fs::read(out.join("checkpoint.lom")).map_err(|e| e.to_string())?,
        dir: out.to_path_buf(),
    })
}

fn parse_curve(metrics: &str) -> Result<Vec<(usize, f64)>, String> {
    metrics
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            match (
                f.get(1).and_then(|x| x.parse().ok()),
                f.get(2).and_then(|x| x.parse().ok()),
            ) {
                (Some(seen), Some(err)) => Ok((seen, err)),
                _ => Err(format!("bad metrics row {line:?}")),
            }
        })
        .collect()
}

fn mnist_curve(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let curve = parse_curve(&run.metrics)?;
    if curve.len() != 30 || curve.iter().enumerate().any(|(i, &(seen, _))| seen != 2000 * (i + 1)) {
        return Err(format!("expected 30 bins of 2000 images, got {curve:?}"));
    }
    let first = curve[0].1;
    let at_12k = curve[5].1;
    let last = curve[29].1;
    let a = (0.25..=0.50).contains(&first);
    let b = at_12k < 0.10;
    let c = last <= 0.06;
    let mark = |ok: bool| if ok { "ok" } else { "MISSED" };
    let detail = format!(
        "(a) first {first:.4} in [0.25, 0.50] {}; (b) 12000 images {at_12k:.4} < 0.10 {}; (c) final {last:.4} <= 0.06 {}",
        mark(a),
        mark(b),
        mark(c)
    );
    if a && b && c {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism(a: &Result<Run, String>, b: &Result<Run, String>) -> Outcome {
    let (a, b) = (a.as_ref().map_err(Clone::clone)?, b.as_ref().map_err(Clone::clone)?);
    if a.metrics != b.metrics {
        return Err("metrics files differ".into());
    }
    if a.checkpoint != b.checkpoint {
        return Err("checkpoints differ".into());
    }
    Ok(format!(
        "metrics ({} bytes) and checkpoint ({} bytes) byte-identical",
        a.metrics.len(),
        a.checkpoint.len()
    ))
}

fn eval_consistency(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let out = Command::new(env!("CARGO_BIN_EXE_lom"))
        .arg("eval")
        .arg("--checkpoint")
        .arg(run.dir.join("checkpoint.lom"))
        .arg("--dataset")
        .arg(workspace().join("data/mnist"))
        .output()
        .map_err(|e| e.to_string())?;
    let printed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let last = run.metrics.lines().last().unwrap_or_default();
    let row30 = last.rsplit(',').next().unwrap_or_default();
    if out.status.success() && printed == row30 {
        Ok(format!("eval prints {printed}, metrics row 30 has {row30}"))
    } else {
        Err(format!("eval printed {printed:?}, metrics row 30 has {row30:?}"))
    }
}

fn report(name: &str, outcome: &Outcome, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(detail) => {
            *failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    }
}

fn main() {
    let mut failures = 0;
    report("orthogonality", &orthogonality(), &mut failures);
    report("count-oracle equivalence", &count_oracle_equivalence(), &mut failures);
    report("generalization semantics", &generalization_semantics(), &mut failures);
    report("probability bounds", &probability_bounds(), &mut failures);
    report("spike statistics", &spike_statistics(), &mut failures);

    let tmp = tempfile::tempdir().expect("temporary directory");
    let first = run_experiment(&tmp.path().join("a"));
    report("mnist curve", &mnist_curve(&first), &mut failures);
    let second = run_experiment(&tmp.path().join("b"));
    report("determinism", &determinism(&first, &second), &mut failures);
    report(
        "checkpoint eval matches final bin",
        &eval_consistency(&first),
        &mut failures,
    );

    if let Ok(run) = &first {
        println!("\nmetrics.csv of the default run:\n{}", run.metrics);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
