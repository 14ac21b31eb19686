//! `qsim graph`: perfect matchings of a pair-source graph and the ket terms
//! they contribute.

use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;

use qsim_core::analysis::{perfect_matchings, permanent_biadjacency, state_terms, Graph};
use qsim_core::experiment::build_state;
use qsim_core::io;

use crate::{fatal, sayln, shown, usage, CmdResult, Ctx, Failure};

#[derive(Serialize)]
struct GraphReport {
    file: String,
    vertices: usize,
    edges: usize,
    perfect_matchings: u64,
    state_terms: Vec<String>,
    /// Matching count along the permanent route, when the graph admits it.
    permanent_cross_check: Option<u64>,
    /// Nonzero amplitudes of the chip state, when the graph maps onto the
    /// pumped-pair layout.
    chip_state_terms: Option<usize>,
    note: Option<String>,
}

/// Ket-term count from the coincidence engine for a two-vertex graph whose
/// parallel edges carry distinct modes: pumping exactly those sources must
/// produce one amplitude per matching.
fn chip_state_terms(g: &Graph) -> Option<usize> {
    if g.vertices.len() != 2 {
        return None;
    }
    let mut amp = [0.0; 3];
    for e in &g.edges {
        let joins = (e.u == g.vertices[0] && e.v == g.vertices[1])
            || (e.u == g.vertices[1] && e.v == g.vertices[0]);
        if !joins || e.mode > 2 {
            return None;
        }
        let m = e.mode as usize;
        if amp[m] != 0.0 {
            // duplicated source: matchings outnumber the superposed amplitudes
            return None;
        }
        amp[m] = 1.0;
    }
    if amp.iter().all(|a| *a == 0.0) {
        return None;
    }
    let state = build_state(amp, [0.0, 0.0]).ok()?;
    Some(
        state
            .ket()
            .vector()
            .iter()
            .filter(|c| c.norm() > 1e-12)
            .count(),
    )
}

pub fn run(ctx: &Ctx, file: &Path) -> CmdResult<()> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| usage(anyhow!(e).context(format!("reading graph {}", file.display()))))?;
    let g: Graph = serde_json::from_str(&text)
        .map_err(|e| usage(anyhow!(e).context(format!("parsing graph {}", file.display()))))?;
    let matchings = perfect_matchings(&g)?;
    let terms = fatal(state_terms(&g))?;

    // The permanent route only covers moderate bipartite graphs; elsewhere it
    // is skipped rather than failed.
    let permanent = permanent_biadjacency(&g).ok();
    if let Some(p) = permanent {
        if p != matchings {
            return Err(Failure::Fatal(anyhow!(
                "matching enumeration ({matchings}) and permanent ({p}) disagree"
            )));
        }
    }
    let chip_terms = chip_state_terms(&g);
    if let Some(t) = chip_terms {
        if t as u64 != matchings {
            return Err(Failure::Fatal(anyhow!(
                "chip state has {t} terms but the graph has {matchings} matchings"
            )));
        }
    }

    let note = g
        .vertices
        .is_empty()
        .then(|| "the empty matching is the only perfect matching of the empty graph".to_string());
    let report = GraphReport {
        file: file.display().to_string(),
        vertices: g.vertices.len(),
        edges: g.edges.len(),
        perfect_matchings: matchings,
        state_terms: terms.clone(),
        permanent_cross_check: permanent,
        chip_state_terms: chip_terms,
        note,
    };
    let json = ctx.path("graph.json");
    fatal(io::write_json(&json, &report))?;

    if terms.is_empty() {
        sayln!("graph: {matchings} perfect matchings");
    } else {
        let head: Vec<&str> = terms.iter().take(12).map(String::as_str).collect();
        let tail = if terms.len() > 12 { " + ..." } else { "" };
        sayln!(
            "graph: {matchings} perfect matchings -> {}{}",
            head.join(" + "),
            tail
        );
    }
    sayln!("wrote {}", shown(&json));
    Ok(())
}
