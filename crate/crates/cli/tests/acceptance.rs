//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../core/tests/gradients.rs"]
mod gradients;
#[path = "../../core/tests/oracles.rs"]
mod oracles;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hole_core::datasets::{generate_sbm, SbmParams};
use hole_core::metrics::nmi;
use hole_core::{load_dataset, preset, run, Dataset, HoleConfig, RoundTrace};

const SEEDS: [u64; 3] = [0, 1, 2];

type Outcome = Result<String, String>;

fn data(name: &str) -> Dataset {
    load_dataset(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)).unwrap()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Traces of one run per seed.
struct Runs {
    traces: Vec<Vec<RoundTrace>>,
}

impl Runs {
    fn new(name: &str, cfg: &HoleConfig) -> Self {
        let ds = data(name);
        let traces = SEEDS
            .iter()
            .map(|&seed| run(&HoleConfig { seed, ..cfg.clone() }, &ds).unwrap().traces)
            .collect();
        Self { traces }
    }

    fn final_mean(&self, f: impl Fn(&RoundTrace) -> Option<f64>) -> f64 {
        mean(self.traces.iter().map(|t| f(t.last().unwrap()).unwrap()))
    }
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reproduction(runs: &Runs, acc_min: f64, ari_min: f64, nmi_min: Option<f64>) -> Outcome {
    let acc = runs.final_mean(|t| t.acc);
    let ari = runs.final_mean(|t| t.ari);
    let nmi = runs.final_mean(|t| t.nmi);
    let ok = acc >= acc_min && ari >= ari_min && nmi_min.is_none_or(|m| nmi >= m);
    judge(ok, format!("mean acc {acc:.4} ari {ari:.4} nmi {nmi:.4} over seeds {SEEDS:?}"))
}

fn ablation(full: &Runs) -> Outcome {
    let ds = data("cora");
    let cfg = HoleConfig { gsl_epochs: 0, ..preset("cora").unwrap() };
    let without = mean(SEEDS.iter().map(|&seed| {
        let out = run(&HoleConfig { seed, ..cfg.clone() }, &ds).unwrap();
        out.traces[0].acc.unwrap()
    }));
    let with = full.final_mean(|t| t.acc);
    judge(with > without, format!("full {with:.4} vs no structure learning {without:.4}"))
}

fn homophily_rises(runs: &[(&str, &Runs)]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, r) in runs {
        for (seed, t) in SEEDS.iter().zip(&r.traces) {
            let (first, last) = (t[0].homophily.unwrap(), t.last().unwrap().homophily.unwrap());
            ok &= last > first;
            detail.push(format!("{name}/{seed}: {first:.4}->{last:.4}"));
        }
    }
    judge(ok, detail.join(", "))
}

fn hole_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hole"))
}

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn oracle_study() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let status = hole_bin()
        .args(["oracle", "--preset", "citeseer", "--seeds", "5", "--step", "0.05", "--data"])
        .arg(data_dir("citeseer"))
        .arg("--out")
        .arg(tmp.path())
        .status()
        .unwrap();
    if !status.success() {
        return Err(format!("oracle command failed: {status}"));
    }
    let csv = fs::read_to_string(tmp.path().join("oracle.csv")).unwrap();
    let mut by_target: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut within = true;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        within &= (v[0] - v[1]).abs() <= 0.005;
        match by_target.last_mut() {
            Some((t, accs)) if *t == v[0] => accs.push(v[3]),
            _ => by_target.push((v[0], vec![v[3]])),
        }
    }
    let means: Vec<f64> = by_target.iter().map(|(_, a)| mean(a.iter().copied())).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let detail = by_target
        .iter()
        .zip(&means)
        .map(|((t, _), m)| format!("h {t:.4}: acc {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    judge(by_target.len() == 3 && increasing && within, detail)
}

fn sbm_recovery() -> Outcome {
    let mut hits = 0;
    let mut slowest = 0.0f64;
    for seed in 0..5 {
        let ds = generate_sbm(&SbmParams::balanced(2, 100, 0.3, 0.02, 1.0, seed)).unwrap();
        let clock = Instant::now();
        let out = run(&HoleConfig { seed, ..HoleConfig::default() }, &ds).unwrap();
        slowest = slowest.max(clock.elapsed().as_secs_f64());
        let score = nmi(out.labels.as_slice(), ds.labels.as_ref().unwrap().as_slice()).unwrap();
        hits += (score > 0.9) as usize;
    }
    judge(hits >= 4 && slowest < 30.0, format!("{hits}/5 seeds with nmi > 0.9, slowest run {slowest:.1}s"))
}

fn checks(fs: &[fn()]) -> Outcome {
    for f in fs {
        if catch_unwind(AssertUnwindSafe(f)).is_err() {
            return Err("a check panicked; see message above".into());
        }
    }
    Ok(format!("{} suites", fs.len()))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let sbm = tmp.path().join("sbm");
    let made = hole_bin().arg("sbm").arg("--out").arg(&sbm).output().unwrap();
    if !made.status.success() {
        return Err("sbm command failed".into());
    }
    let cases: [(PathBuf, &[&str]); 2] = [
        (sbm, &["--seed", "3"]),
        (data_dir("cora"), &["--preset", "cora", "--gsl-epochs", "1", "--seed", "1"]),
    ];
    for (i, (dir, extra)) in cases.iter().enumerate() {
        let outs: Vec<PathBuf> = (0..2).map(|r| tmp.path().join(format!("run{i}_{r}"))).collect();
        for out in &outs {
            let st = hole_bin().arg("train").arg("--data").arg(dir).arg("--out").arg(out).args(*extra).status().unwrap();
            if !st.success() {
                return Err(format!("train failed on {}", dir.display()));
            }
        }
        for f in ["metrics.csv", "assignments.tsv"] {
            if fs::read(outs[0].join(f)).unwrap() != fs::read(outs[1].join(f)).unwrap() {
                return Err(format!("{f} differs between reruns on {}", dir.display()));
            }
        }
    }
    Ok("metrics.csv and assignments.tsv identical on SBM and Cora".into())
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cora = Runs::new("cora", &preset("cora").unwrap());
    let citeseer = Runs::new("citeseer", &preset("citeseer").unwrap());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("cora reproduction", Box::new(|| reproduction(&cora, 0.713, 0.509, Some(0.546)))),
        ("citeseer reproduction", Box::new(|| reproduction(&citeseer, 0.694, 0.452, None))),
        ("ablation direction", Box::new(|| ablation(&cora))),
        ("homophily rises", Box::new(|| homophily_rises(&[("cora", &cora), ("citeseer", &citeseer)]))),
        ("oracle study", Box::new(oracle_study)),
        ("sbm recovery", Box::new(sbm_recovery)),
        (
            "gradient suite",
            Box::new(|| {
                checks(&[
                    gradients::check_reconstruction_gradient,
                    gradients::check_weight_gradient_through_reconstruction,
                    gradients::check_kl_gradients,
                ])
            }),
        ),
        ("selection oracles", Box::new(|| checks(&[oracles::check_edge_selection_matches_brute_force]))),
        (
            "metric oracles",
            Box::new(|| {
                checks(&[
                    oracles::check_accuracy_matches_factorial_enumeration,
                    oracles::check_ari_matches_pair_counting,
                    oracles::check_nmi_and_purity_match_direct_formulas,
                ])
            }),
        ),
        ("determinism", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} ({:.1}s)", i + 1, clock.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed in {:.0}s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
