//! End-to-end training: pretraining, center initialization, then alternating
//! structure updates and joint training.

use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clusterer::{
    hard_labels, kl_loss_and_grads, kmeans_init, soft_assign, target_distribution, Centers, SoftAssignment,
};
use crate::datasets::Dataset;
use crate::encoder::{normalize_rows, normalize_rows_backward, reconstruction_loss_and_grad, Encoder, ReconOptions};
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, Propagator};
use crate::graph::{edge_homophily, LabelVector, UndirectedGraph};
use crate::metrics::score_all;
use crate::optim::Adam;
use crate::struct_learn::{plan_round, RemovalMode, SparsifyParams};

/// Every knob of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleConfig {
    /// Structure-learning rounds after the initial joint phase.
    pub gsl_epochs: usize,
    pub gamma: f64,
    pub xi: f64,
    pub eta: f64,
    pub kappa: f64,
    pub hops: usize,
    /// Linear layers; only 1 is supported.
    pub layers: usize,
    pub lr: f64,
    pub dim: usize,
    /// Cluster count; `None` takes it from the dataset.
    pub k: Option<usize>,
    pub seed: u64,
    pub pretrain_epochs: usize,
    /// Joint epochs per round, including round 0.
    pub joint_epochs: usize,
    pub recon_diag_one: bool,
    pub loss_mean_scale: bool,
    /// Unit-normalize embedding rows after propagation.
    pub normalize_embedding: bool,
    /// Divide the KL term by `N`.
    pub kl_mean_scale: bool,
    pub removal_mode: RemovalMode,
    /// Edge count the recovery budget scales with.
    #[serde(default)]
    pub budget_base: BudgetBase,
    /// What is re-initialized after each structure update.
    #[serde(default)]
    pub restart: Restart,
    /// Worker threads for graph propagation; results do not depend on it.
    #[serde(default = "one")]
    pub threads: usize,
}

/// Which graph's edge count sets the recovery budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetBase {
    /// The graph being edited.
    #[default]
    Current,
    /// The input graph, so additions do not compound across rounds.
    Original,
}

/// State reset between structure rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restart {
    /// Keep encoder and centers; only the graph changes.
    #[default]
    None,
    /// Re-run k-means on the embedding over the new graph.
    Centers,
    /// Fresh encoder, pretraining and k-means on the new graph.
    Full,
}

fn one() -> usize {
    1
}

impl Default for HoleConfig {
    fn default() -> Self {
        Self {
            gsl_epochs: 5,
            gamma: 1.0,
            xi: 0.5,
            eta: 0.01,
            kappa: crate::filter::default_kappa(),
            hops: 8,
            layers: 1,
            lr: 1e-3,
            dim: 500,
            k: None,
            seed: 0,
            pretrain_epochs: 3,
            joint_epochs: 50,
            recon_diag_one: true,
            loss_mean_scale: true,
            normalize_embedding: true,
            kl_mean_scale: false,
            removal_mode: RemovalMode::GlobalWindow,
            budget_base: BudgetBase::Current,
            restart: Restart::None,
            threads: 1,
        }
    }
}

/// `(name, Ep., γ, ξ, η, l, lr)` for every tuned benchmark.
const PRESETS: &[(&str, usize, f64, f64, f64, usize, f64)] = &[
    ("cora", 5, 1.0, 0.5, 0.01, 8, 1e-3),
    ("citeseer", 5, 0.3, 0.5, 0.005, 3, 1e-3),
    ("pubmed", 3, 0.5, 0.5, 0.005, 35, 1e-3),
    ("acm", 10, 0.3, 0.5, 0.005, 3, 1e-3),
    ("flickr", 10, 0.5, 0.5, 0.005, 1, 1e-3),
    ("blog", 10, 1.0, 0.5, 0.005, 1, 1e-3),
    ("reddit", 1, 0.01, 0.005, 0.02, 3, 2e-5),
    ("wisconsin", 15, 0.3, 0.5, 0.1, 0, 1e-3),
    ("texas", 5, 0.2, 0.5, 0.01, 0, 1e-3),
    ("cornell", 15, 0.3, 0.5, 0.1, 0, 1e-3),
    ("actor", 1, 0.1, 0.5, 0.05, 0, 1e-3),
    ("chameleon", 1, 0.5, 0.5, 0.005, 0, 1e-3),
    ("squirrel", 1, 0.3, 0.5, 0.05, 1, 1e-3),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// Published per-dataset hyperparameters on top of the defaults.
pub fn preset(name: &str) -> Result<HoleConfig> {
    let key = name.to_ascii_lowercase();
    let &(_, gsl_epochs, gamma, xi, eta, hops, lr) =
        PRESETS.iter().find(|p| p.0 == key).ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available: preset_names().join(", "),
        })?;
    Ok(HoleConfig {
        gsl_epochs,
        gamma,
        xi,
        eta,
        hops,
        lr,
        ..HoleConfig::default()
    })
}

impl HoleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [("xi", self.xi), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.layers != 1 {
            return bad(format!("only one linear layer is supported, got {}", self.layers));
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.k == Some(0) {
            return bad("k must be at least 1".into());
        }
        FilterSpec::new(self.kappa, self.hops)?;
        Ok(())
    }

    /// Applies the fields present in a JSON object on top of `self`.
    pub fn overlay_json(&self, json: &str) -> Result<Self> {
        let patch: serde_json::Value =
            serde_json::from_str(json).map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
        let serde_json::Value::Object(patch) = patch else {
            return Err(Error::InvalidConfig("config JSON must be an object".into()));
        };
        let mut base = serde_json::to_value(self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            obj.insert(k, v);
        }
        serde_json::from_value(base).map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))
    }

    fn propagator<'g>(&self, graph: &'g UndirectedGraph) -> Result<Propagator<'g>> {
        Ok(Propagator::new(graph, FilterSpec::new(self.kappa, self.hops)?).with_threads(self.threads))
    }

    fn recon_options(&self) -> ReconOptions {
        ReconOptions {
            diag_one: self.recon_diag_one,
            mean_scale: self.loss_mean_scale,
        }
    }
}

/// One row of the training trace. Round 0 is the state after the initial
/// joint phase, before any structure update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: usize,
    pub homophily: Option<f64>,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub purity: Option<f64>,
    pub loss_gsl: f64,
    pub loss_cls: f64,
    pub edges_added: usize,
    pub edges_removed: usize,
    pub num_edges: usize,
    /// Some cluster's soft mass fell below `1e-6·N`.
    pub collapsed: bool,
}

/// Wall-clock time per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub pretrain: Duration,
    pub init: Duration,
    pub joint: Duration,
    pub structure: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub labels: LabelVector,
    pub q: SoftAssignment,
    pub z: Array2<f64>,
    pub graph: UndirectedGraph,
    pub traces: Vec<RoundTrace>,
    pub timings: Timings,
}

// How the filtered input reaches the linear map. `Cached` holds `P^l·X`
// and is used when that product is cheaper than filtering `X·W` every pass.
enum Smoother<'g> {
    Lazy(Propagator<'g>),
    Cached(Array2<f64>),
}

struct Forward {
    z: Array2<f64>,
    norms: Option<ndarray::Array1<f64>>,
}

/// Mutable training state: encoder, centers and the current structure.
pub struct Trainer<'d> {
    ds: &'d Dataset,
    cfg: HoleConfig,
    k: usize,
    encoder: Encoder,
    graph: UndirectedGraph,
    centers: Option<(Centers, Adam)>,
}

impl<'d> Trainer<'d> {
    pub fn new(cfg: &HoleConfig, ds: &'d Dataset) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.k.unwrap_or(ds.k);
        if k > ds.num_nodes() {
            return Err(Error::TooFewPoints { k, n: ds.num_nodes() });
        }
        if ds.features.nrows() != ds.num_nodes() {
            return Err(Error::DimensionMismatch {
                what: "feature rows vs. graph nodes",
                expected: ds.num_nodes(),
                got: ds.features.nrows(),
            });
        }
        let encoder = fresh_encoder(cfg, ds);
        Ok(Self {
            ds,
            cfg: cfg.clone(),
            k,
            encoder,
            graph: ds.graph.clone(),
            centers: None,
        })
    }

    /// Replaces the encoder with the seed's initial weights.
    pub fn reset_encoder(&mut self) {
        self.encoder = fresh_encoder(&self.cfg, self.ds);
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn centers(&self) -> Option<&Centers> {
        self.centers.as_ref().map(|c| &c.0)
    }

    fn smoother<'g>(&self, graph: &'g UndirectedGraph) -> Result<Smoother<'g>> {
        let prop = self.cfg.propagator(graph)?;
        let x = &self.ds.features;
        let lazy_cost = x.nnz() + self.cfg.hops * (2 * graph.edge_count() + graph.num_nodes());
        if x.nrows() * x.ncols() >= lazy_cost {
            return Ok(Smoother::Lazy(prop));
        }
        Ok(Smoother::Cached(prop.apply(x.to_dense().view())?))
    }

    fn forward(&self, sm: &Smoother<'_>) -> Result<Forward> {
        let w = self.encoder.weights().view();
        let y = match sm {
            Smoother::Lazy(prop) => prop.apply(self.ds.features.dot(w)?.view())?,
            Smoother::Cached(h) => h.dot(&w),
        };
        Ok(if self.cfg.normalize_embedding {
            let (z, norms) = normalize_rows(y.view());
            Forward { z, norms: Some(norms) }
        } else {
            Forward { z: y, norms: None }
        })
    }

    // dL/dZ -> dL/dW through normalization, the symmetric filter and X.
    fn backward(&self, sm: &Smoother<'_>, fwd: &Forward, dz: Array2<f64>) -> Result<Array2<f64>> {
        let dy = match &fwd.norms {
            Some(norms) => normalize_rows_backward(fwd.z.view(), norms, dz.view()),
            None => dz,
        };
        match sm {
            Smoother::Lazy(prop) => self.ds.features.t_dot(prop.apply(dy.view())?.view()),
            Smoother::Cached(h) => Ok(h.t().dot(&dy)),
        }
    }

    /// Current embedding on the current structure.
    pub fn embed(&self) -> Result<Array2<f64>> {
        let sm = self.smoother(&self.graph)?;
        Ok(self.forward(&sm)?.z)
    }

    /// Reconstruction-only training on the current structure. Returns the
    /// loss before each step.
    pub fn pretrain(&mut self) -> Result<Vec<f64>> {
        let graph = self.graph.clone();
        let sm = self.smoother(&graph)?;
        let mut losses = Vec::with_capacity(self.cfg.pretrain_epochs);
        for epoch in 0..self.cfg.pretrain_epochs {
            let fwd = self.forward(&sm)?;
            let (loss, dz) = reconstruction_loss_and_grad(fwd.z.view(), &graph, self.cfg.recon_options())?;
            let grad = self.backward(&sm, &fwd, dz)?;
            self.encoder
                .adam_step(&grad)
                .map_err(|e| annotate(e, "pretraining", epoch))?;
            losses.push(loss);
        }
        Ok(losses)
    }

    /// k-means centers on the current embedding.
    pub fn init_centers(&mut self) -> Result<()> {
        let z = self.embed()?;
        let centers = kmeans_init(z.view(), self.k, self.cfg.seed)?;
        let adam = Adam::new(centers.0.dim());
        self.centers = Some((centers, adam));
        Ok(())
    }

    fn centers_ref(&self) -> Result<&Centers> {
        self.centers
            .as_ref()
            .map(|c| &c.0)
            .ok_or_else(|| Error::InvalidConfig("centers are not initialized".into()))
    }

    /// Soft assignments for the current embedding and centers.
    pub fn assignments(&self) -> Result<(Array2<f64>, SoftAssignment)> {
        let z = self.embed()?;
        let q = soft_assign(z.view(), self.centers_ref()?)?;
        Ok((z, q))
    }

    /// `joint_epochs` steps on reconstruction + KL with the target `p` fixed.
    /// Returns the final `(loss_gsl, loss_cls)`.
    pub fn joint_train(&mut self, p: &SoftAssignment) -> Result<(f64, f64)> {
        let graph = self.graph.clone();
        let sm = self.smoother(&graph)?;
        let kl_scale = if self.cfg.kl_mean_scale {
            1.0 / self.ds.num_nodes() as f64
        } else {
            1.0
        };
        let mut last = (f64::NAN, f64::NAN);
        for epoch in 0..self.cfg.joint_epochs {
            let fwd = self.forward(&sm)?;
            let (lg, mut dz) = reconstruction_loss_and_grad(fwd.z.view(), &graph, self.cfg.recon_options())?;
            let kl = kl_loss_and_grads(p, fwd.z.view(), self.centers_ref()?)?;
            dz.scaled_add(kl_scale, &kl.dz);
            let grad = self.backward(&sm, &fwd, dz)?;
            self.encoder
                .adam_step(&grad)
                .map_err(|e| annotate(e, "joint training", epoch))?;
            let dmu = kl.dmu * kl_scale;
            let (centers, adam) = self.centers.as_mut().expect("checked above");
            adam.step(&mut centers.0, &dmu, self.cfg.lr)
                .map_err(|e| annotate(e, "center update", epoch))?;
            last = (lg, kl.loss * kl_scale);
        }
        Ok(last)
    }

    /// One structure update from `q` and `z`; returns `(added, removed)`.
    pub fn update_structure(&mut self, z: &Array2<f64>, q: &SoftAssignment) -> Result<(usize, usize)> {
        let mut params = SparsifyParams::new(self.cfg.xi, self.cfg.eta)?;
        if self.cfg.budget_base == BudgetBase::Original {
            params = params.with_budget_edges(self.ds.graph.edge_count());
        }
        let edits = plan_round(z.view(), q, &self.graph, self.cfg.gamma, params, self.cfg.removal_mode)?;
        self.graph = self.graph.apply(&edits.delta)?;
        Ok((edits.delta.recovered.len(), edits.delta.removed.len()))
    }

    fn trace(&self, round: usize, q: &SoftAssignment, losses: (f64, f64), edits: (usize, usize)) -> Result<RoundTrace> {
        let pred = hard_labels(q);
        let n = self.ds.num_nodes() as f64;
        let collapsed = q.cluster_mass().iter().any(|&f| f < 1e-6 * n);
        if collapsed {
            log::warn!("round {round}: a cluster has collapsed (soft mass below 1e-6·N)");
        }
        let (mut homophily, mut scores) = (None, None);
        if let Some(truth) = &self.ds.labels {
            homophily = edge_homophily(&self.graph, truth).ok();
            scores = Some(score_all(pred.as_slice(), truth.as_slice())?);
        }
        Ok(RoundTrace {
            round,
            homophily,
            acc: scores.map(|s| s.acc),
            nmi: scores.map(|s| s.nmi),
            ari: scores.map(|s| s.ari),
            purity: scores.map(|s| s.purity),
            loss_gsl: losses.0,
            loss_cls: losses.1,
            edges_added: edits.0,
            edges_removed: edits.1,
            num_edges: self.graph.edge_count(),
            collapsed,
        })
    }
}

fn fresh_encoder(cfg: &HoleConfig, ds: &Dataset) -> Encoder {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Encoder::glorot(ds.features.ncols(), cfg.dim, cfg.lr, &mut rng)
}

fn annotate(e: Error, phase: &str, epoch: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} during {phase}, epoch {epoch}")),
        other => other,
    }
}

/// Pretrains a fresh encoder on the original graph and returns it with the
/// resulting embedding.
pub fn pretrain(cfg: &HoleConfig, ds: &Dataset) -> Result<(Encoder, Array2<f64>)> {
    let mut t = Trainer::new(cfg, ds)?;
    t.pretrain()?;
    let z = t.embed()?;
    Ok((t.encoder, z))
}

/// Full training run.
pub fn run(cfg: &HoleConfig, ds: &Dataset) -> Result<RunOutput> {
    run_with(cfg, ds, |_, _| {})
}

/// [`run`], calling `observe` after every round with its trace and the
/// structure it trained on.
pub fn run_with<F>(cfg: &HoleConfig, ds: &Dataset, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(&RoundTrace, &UndirectedGraph),
{
    let mut timings = Timings::default();
    let mut t = Trainer::new(cfg, ds)?;

    let clock = Instant::now();
    t.pretrain()?;
    timings.pretrain = clock.elapsed();

    let clock = Instant::now();
    t.init_centers()?;
    timings.init = clock.elapsed();

    let clock = Instant::now();
    let (_, q) = t.assignments()?;
    let mut losses = t.joint_train(&target_distribution(&q))?;
    timings.joint += clock.elapsed();

    let mut traces = Vec::with_capacity(cfg.gsl_epochs + 1);
    let (_, q) = t.assignments()?;
    let tr = t.trace(0, &q, losses, (0, 0))?;
    observe(&tr, t.graph());
    traces.push(tr);

    for round in 1..=cfg.gsl_epochs {
        let clock = Instant::now();
        let (z, q) = t.assignments()?;
        let p = target_distribution(&q);
        let edits = t.update_structure(&z, &q)?;
        timings.structure += clock.elapsed();

        let clock = Instant::now();
        let p = match cfg.restart {
            Restart::None => p,
            Restart::Centers => {
                t.init_centers()?;
                target_distribution(&t.assignments()?.1)
            }
            Restart::Full => {
                t.reset_encoder();
                t.pretrain()?;
                t.init_centers()?;
                target_distribution(&t.assignments()?.1)
            }
        };
        losses = t.joint_train(&p)?;
        timings.joint += clock.elapsed();

        let (_, q) = t.assignments()?;
        let tr = t.trace(round, &q, losses, edits)?;
        log::info!(
            "round {round}: +{} -{} edges, |E| = {}, acc = {:?}",
            tr.edges_added,
            tr.edges_removed,
            tr.num_edges,
            tr.acc
        );
        observe(&tr, t.graph());
        traces.push(tr);
    }

    let (z, q) = t.assignments()?;
    Ok(RunOutput {
        labels: hard_labels(&q),
        q,
        z,
        graph: t.graph.clone(),
        traces,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_sbm, SbmParams};

    fn small() -> HoleConfig {
        HoleConfig {
            dim: 8,
            pretrain_epochs: 20,
            joint_epochs: 10,
            gsl_epochs: 2,
            hops: 2,
            lr: 1e-2,
            ..HoleConfig::default()
        }
    }

    #[test]
    fn presets_match_published_tables() {
        let c = preset("cora").unwrap();
        assert_eq!((c.gsl_epochs, c.gamma, c.xi, c.eta, c.hops, c.layers, c.lr, c.dim), (5, 1.0, 0.5, 0.01, 8, 1, 1e-3, 500));
        let c = preset("citeseer").unwrap();
        assert_eq!((c.gsl_epochs, c.gamma, c.xi, c.eta, c.hops), (5, 0.3, 0.5, 0.005, 3));
        let c = preset("Texas").unwrap();
        assert_eq!((c.gsl_epochs, c.gamma, c.xi, c.eta, c.hops), (5, 0.2, 0.5, 0.01, 0));
        match preset("nope") {
            Err(Error::UnknownPreset { available, .. }) => assert!(available.contains("citeseer")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let ok = HoleConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            HoleConfig { layers: 2, ..ok.clone() },
            HoleConfig { gamma: 0.0, ..ok.clone() },
            HoleConfig { xi: 1.5, ..ok.clone() },
            HoleConfig { eta: -0.1, ..ok.clone() },
            HoleConfig { dim: 0, ..ok.clone() },
            HoleConfig { kappa: 0.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn json_overlay_keeps_unmentioned_fields() {
        let base = preset("cora").unwrap();
        let c = base.overlay_json(r#"{"xi": 0.25, "removal_mode": "inter_cluster_only"}"#).unwrap();
        assert_eq!(c.xi, 0.25);
        assert_eq!(c.removal_mode, RemovalMode::InterClusterOnly);
        assert_eq!(c.hops, base.hops);
        assert!(base.overlay_json(r#"{"bogus": 1}"#).is_err());
        assert!(base.overlay_json("[1]").is_err());
    }

    #[test]
    fn zero_pretrain_epochs_leave_weights() {
        let ds = generate_sbm(&SbmParams::balanced(2, 10, 0.5, 0.05, 1.0, 1)).unwrap();
        let cfg = HoleConfig { pretrain_epochs: 0, ..small() };
        let fresh = Trainer::new(&cfg, &ds).unwrap();
        let (enc, _) = pretrain(&cfg, &ds).unwrap();
        assert_eq!(enc.weights(), fresh.encoder().weights());
    }

    #[test]
    fn edge_bookkeeping_holds_every_round() {
        let ds = generate_sbm(&SbmParams::balanced(2, 20, 0.3, 0.05, 1.0, 2)).unwrap();
        let out = run(&small(), &ds).unwrap();
        assert_eq!(out.traces.len(), 3);
        for w in out.traces.windows(2) {
            assert_eq!(w[1].num_edges, w[0].num_edges + w[1].edges_added - w[1].edges_removed);
        }
        assert_eq!(out.traces.last().unwrap().num_edges, out.graph.edge_count());
    }
}
