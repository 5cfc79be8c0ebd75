use std::fs;
use std::path::Path;
use std::time::Instant;

use hole_core::datasets::{generate_sbm, load_edge_list, oracle_perturb, read_id_column, save_dataset, SbmParams};
use hole_core::pipeline::{run_with, HoleConfig};
use hole_core::{edge_homophily, load_dataset, preset, score_all, Dataset, Error, LabelVector, Result};
use serde::Serialize;

use crate::output::{self, write};
use crate::{ConfigArgs, EvalArgs, HomophilyArgs, OracleArgs, SbmArgs, TrainArgs};

/// preset < JSON file < individual flags; `HOLE_THREADS` sets propagation threads.
pub fn resolve_config(args: &ConfigArgs) -> Result<HoleConfig> {
    let mut cfg = match &args.preset {
        Some(name) => preset(name)?,
        None => HoleConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg = cfg.overlay_json(&text)?;
    }
    macro_rules! flag {
        ($($f:ident),*) => {$(if let Some(v) = args.$f { cfg.$f = v; })*};
    }
    flag!(seed, gsl_epochs, gamma, xi, eta, hops, kappa, dim, lr, pretrain_epochs, joint_epochs);
    if let Ok(v) = std::env::var("HOLE_THREADS") {
        cfg.threads = v
            .trim()
            .parse()
            .ok()
            .filter(|&t: &usize| t > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("HOLE_THREADS must be a positive integer, got `{v}`")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn loaded(dir: &Path) -> Result<Dataset> {
    let ds = load_dataset(dir)?;
    let st = ds.stats();
    log::info!(
        "{}: N={} |E|={} (raw lines {}) F={} K={} homophily={:?}",
        ds.name,
        st.nodes,
        st.edges,
        st.raw_edge_lines,
        st.features,
        st.classes,
        st.homophily
    );
    Ok(ds)
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a HoleConfig,
    traces: &'a [hole_core::RoundTrace],
    seconds: Phases,
}

#[derive(Serialize)]
struct Phases {
    pretrain: f64,
    init: f64,
    joint: f64,
    structure: f64,
    total: f64,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let cfg = resolve_config(&args.cfg)?;
    let ds = loaded(&args.data)?;
    ensure_dir(&args.out)?;
    let started = Instant::now();
    let mut write_err = None;
    let out = run_with(&cfg, &ds, |trace, graph| {
        if args.save_structures && trace.round > 0 && write_err.is_none() {
            let path = args.out.join(format!("structure_{}.edges.tsv", trace.round));
            write_err = write(&path, &output::edges_tsv(graph)).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    write(&args.out.join("metrics.csv"), &output::metrics_csv(&out.traces))?;
    write(&args.out.join("assignments.tsv"), &output::id_column(out.labels.as_slice()))?;
    if args.save_embedding {
        write(&args.out.join("embedding.tsv"), &output::matrix_tsv(out.z.view()))?;
    }
    let t = out.timings;
    let report = RunReport {
        config: &cfg,
        traces: &out.traces,
        seconds: Phases {
            pretrain: t.pretrain.as_secs_f64(),
            init: t.init.as_secs_f64(),
            joint: t.joint.as_secs_f64(),
            structure: t.structure.as_secs_f64(),
            total: started.elapsed().as_secs_f64(),
        },
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&args.out.join("report.json"), &(json + "\n"))?;

    let last = out.traces.last().expect("round 0 is always traced");
    match (last.acc, last.nmi, last.ari, last.purity) {
        (Some(acc), Some(nmi), Some(ari), Some(purity)) => println!(
            "final round {}: acc={acc:.4} nmi={nmi:.4} ari={ari:.4} purity={purity:.4} homophily={:.4} edges={}",
            last.round,
            last.homophily.unwrap_or(f64::NAN),
            last.num_edges
        ),
        _ => println!("final round {}: edges={} (no labels to score)", last.round, last.num_edges),
    }
    Ok(())
}

fn labels_of(ds: &Dataset) -> Result<&LabelVector> {
    ds.labels
        .as_ref()
        .ok_or_else(|| Error::InvalidLabels(format!("dataset `{}` has no labels.tsv", ds.name)))
}

/// `structure_<r>.edges.tsv` files in `dir`, ordered by round.
pub fn structure_files(dir: &Path) -> Result<Vec<(usize, std::path::PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(r) = name
            .strip_prefix("structure_")
            .and_then(|s| s.strip_suffix(".edges.tsv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            found.push((r, path));
        }
    }
    found.sort();
    Ok(found)
}

pub fn homophily(args: &HomophilyArgs) -> Result<()> {
    let ds = loaded(&args.data)?;
    let labels = labels_of(&ds)?;
    match &args.run {
        None => println!("{}", edge_homophily(&ds.graph, labels)?),
        Some(run) => {
            println!("round\thomophily");
            println!("0\t{}", edge_homophily(&ds.graph, labels)?);
            for (r, path) in structure_files(run)? {
                let g = load_edge_list(&path, ds.num_nodes())?;
                println!("{r}\t{}", edge_homophily(&g, labels)?);
            }
        }
    }
    Ok(())
}

/// `start, start + step, …` up to `cap` inclusive.
pub fn oracle_targets(start: f64, cap: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let t = start + i as f64 * step;
        if t > cap + 1e-9 {
            break;
        }
        out.push(t);
        i += 1;
    }
    out
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    if !(args.step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {}", args.step)));
    }
    let mut cfg = resolve_config(&args.cfg)?;
    cfg.gsl_epochs = 0;
    let ds = loaded(&args.data)?;
    let h0 = edge_homophily(&ds.graph, labels_of(&ds)?)?;
    let cap = args.cap.unwrap_or((h0 + 0.10).min(1.0));
    ensure_dir(&args.out)?;
    let mut csv = String::from("target_h,achieved_h,seed,acc,nmi,ari\n");
    let base_seed = cfg.seed;
    for target in oracle_targets(h0, cap, args.step) {
        let mut accs = Vec::new();
        for seed in base_seed..base_seed + args.seeds {
            let perturbed = oracle_perturb(&ds, target, seed)?;
            let achieved = edge_homophily(&perturbed.graph, labels_of(&perturbed)?)?;
            let run_cfg = HoleConfig { seed, ..cfg.clone() };
            let out = hole_core::run(&run_cfg, &perturbed)?;
            let s = score_all(out.labels.as_slice(), labels_of(&perturbed)?.as_slice())?;
            csv.push_str(&format!("{target},{achieved},{seed},{},{},{}\n", s.acc, s.nmi, s.ari));
            accs.push(s.acc);
        }
        let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
        println!("target {target:.4}: mean acc {mean:.4} over {} seeds", accs.len());
    }
    write(&args.out.join("oracle.csv"), &csv)
}

pub fn sbm(args: &SbmArgs) -> Result<()> {
    let params = SbmParams {
        block_sizes: vec![args.block_size; args.blocks],
        p_in: args.p_in,
        p_out: args.p_out,
        feature_dim: args.feature_dim.unwrap_or(args.blocks),
        signal: args.signal,
        seed: args.seed,
    };
    let ds = generate_sbm(&params)?;
    save_dataset(&ds, &args.out)?;
    let st = ds.stats();
    println!(
        "wrote {}: N={} |E|={} homophily={:.4}",
        args.out.display(),
        st.nodes,
        st.edges,
        st.homophily.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let pred = read_id_column(&args.pred)?;
    let truth = read_id_column(&args.truth)?;
    let s = score_all(&pred, &truth)?;
    println!("acc={} nmi={} ari={} purity={}", s.acc, s.nmi, s.ari, s.purity);
    Ok(())
}
