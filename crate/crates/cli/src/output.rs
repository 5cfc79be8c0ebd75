//! Plain-text run artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hole_core::{Error, Result, RoundTrace, UndirectedGraph};
use ndarray::ArrayView2;

pub const METRICS_HEADER: &str =
    "round,homophily,acc,nmi,ari,purity,loss_gsl,loss_cls,edges_added,edges_removed,num_edges";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(traces: &[RoundTrace]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for t in traces {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.round,
            opt(t.homophily),
            opt(t.acc),
            opt(t.nmi),
            opt(t.ari),
            opt(t.purity),
            t.loss_gsl,
            t.loss_cls,
            t.edges_added,
            t.edges_removed,
            t.num_edges
        )
        .unwrap();
    }
    s
}

pub fn id_column(ids: &[usize]) -> String {
    let mut s = String::with_capacity(ids.len() * 3);
    for id in ids {
        writeln!(s, "{id}").unwrap();
    }
    s
}

pub fn matrix_tsv(m: ArrayView2<'_, f64>) -> String {
    let mut s = String::new();
    for row in m.outer_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join("\t"));
        s.push('\n');
    }
    s
}

pub fn edges_tsv(g: &UndirectedGraph) -> String {
    let mut s = String::new();
    for (u, v) in g.edges() {
        writeln!(s, "{u}\t{v}").unwrap();
    }
    s
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
