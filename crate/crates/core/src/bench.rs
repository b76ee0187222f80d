//! Width experiments: six jointree constructions per random instance, with
//! per-cell means and standard deviations written as CSV.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elimination::minfill_order;
use crate::error::{Error, Result};
use crate::jointree::{
    classical_separators, jointree_from_order, make_twin_jointree, twin_separators_direct,
    SeparatorAssignment,
};
use crate::model::Dag;
use crate::moral::moral_graph;
use crate::parallel;
use crate::randgen::{GenConfig, GenMethod};
use crate::thinning::{internal_mask, replicate_and_thin, thinned_twin_separators, DEFAULT_CHAIN_BOUND};
use crate::worlds::twin_dag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchMethod {
    #[serde(rename = "BASE-MF")]
    BaseMf,
    #[serde(rename = "TWIN-ALG1")]
    TwinAlg1,
    #[serde(rename = "TWIN-MF")]
    TwinMf,
    #[serde(rename = "BASE-MF-RLS")]
    BaseMfRls,
    #[serde(rename = "TWIN-THM3")]
    TwinThm3,
    #[serde(rename = "TWIN-MF-RLS")]
    TwinMfRls,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 6] = [
        BenchMethod::BaseMf,
        BenchMethod::TwinAlg1,
        BenchMethod::TwinMf,
        BenchMethod::BaseMfRls,
        BenchMethod::TwinThm3,
        BenchMethod::TwinMfRls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::BaseMf => "BASE-MF",
            BenchMethod::TwinAlg1 => "TWIN-ALG1",
            BenchMethod::TwinMf => "TWIN-MF",
            BenchMethod::BaseMfRls => "BASE-MF-RLS",
            BenchMethod::TwinThm3 => "TWIN-THM3",
            BenchMethod::TwinMfRls => "TWIN-MF-RLS",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Widths {
    pub width: usize,
    pub normalized_width: f64,
}

impl From<&SeparatorAssignment> for Widths {
    fn from(s: &SeparatorAssignment) -> Self {
        Self {
            width: s.width,
            normalized_width: s.normalized_width,
        }
    }
}

/// Widths of the six constructions on one instance, in `BenchMethod::ALL`
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceWidths {
    pub widths: [Widths; 6],
    pub base_nodes: usize,
    pub twin_nodes: usize,
    /// Milliseconds per method, when requested.
    pub timings_ms: Option<[f64; 6]>,
}

impl InstanceWidths {
    pub fn get(&self, m: BenchMethod) -> Widths {
        self.widths[m as usize]
    }

    /// Per-instance bounds: the lifted twin jointree and the thinned lifting
    /// stay within `2w + 1`, and the twin jointree has at most twice the nodes.
    pub fn check(&self) -> Result<()> {
        let w = |m| self.get(m).width;
        let mut bad = Vec::new();
        if w(BenchMethod::TwinAlg1) > 2 * w(BenchMethod::BaseMf) + 1 {
            bad.push("TWIN-ALG1 > 2 BASE-MF + 1".to_string());
        }
        if w(BenchMethod::TwinThm3) > 2 * w(BenchMethod::BaseMfRls) + 1 {
            bad.push("TWIN-THM3 > 2 BASE-MF-RLS + 1".to_string());
        }
        if self.twin_nodes > 2 * self.base_nodes.max(2) {
            bad.push(format!("twin jointree has {} nodes, base {}", self.twin_nodes, self.base_nodes));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvariantViolation(bad.join("; ")))
        }
    }
}

/// Runs the six pipelines on `dag`, treating internal nodes as functional.
pub fn evaluate_instance(dag: &Dag, chain_bound: usize, timed: bool) -> Result<InstanceWidths> {
    let mut timings = [0.0; 6];
    let mut clock = Instant::now();
    let mut lap = |m: BenchMethod| {
        if timed {
            timings[m as usize] = clock.elapsed().as_secs_f64() * 1e3;
            clock = Instant::now();
        }
    };

    let base_jt = jointree_from_order(dag, &minfill_order(&moral_graph(dag)))?;
    let base = classical_separators(&base_jt);
    lap(BenchMethod::BaseMf);

    let twin_jt = make_twin_jointree(&base_jt)?;
    let alg1 = twin_separators_direct(&base, &twin_jt)?;
    lap(BenchMethod::TwinAlg1);

    let (twin, _, _) = twin_dag(dag)?;
    let twin_mf_jt = jointree_from_order(&twin, &minfill_order(&moral_graph(&twin)))?;
    let twin_mf = classical_separators(&twin_mf_jt);
    lap(BenchMethod::TwinMf);

    let rls = replicate_and_thin(&base_jt, &internal_mask(dag), chain_bound);
    lap(BenchMethod::BaseMfRls);

    let lifted = make_twin_jointree(&rls.jointree)?;
    let thm3 = thinned_twin_separators(&rls, &lifted)?;
    lap(BenchMethod::TwinThm3);

    let twin_rls = replicate_and_thin(&twin_mf_jt, &internal_mask(&twin), chain_bound);
    lap(BenchMethod::TwinMfRls);

    Ok(InstanceWidths {
        widths: [
            (&base).into(),
            (&alg1).into(),
            (&twin_mf).into(),
            (&rls.thinned).into(),
            (&thm3.thinned).into(),
            (&twin_rls.thinned).into(),
        ],
        base_nodes: base_jt.node_count(),
        twin_nodes: twin_jt.node_count(),
        timings_ms: timed.then_some(timings),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Template; `n`, the parameter and the seed are overridden per task.
    pub generator: GenConfig,
    pub ns: Vec<usize>,
    /// Parent caps (rNET) or degree caps (rNET2).
    pub params: Vec<usize>,
    pub reps: usize,
    /// Seed of the first repetition; repetition `r` uses `seed + r`.
    pub seed: u64,
    pub chain_bound: usize,
    /// Worker threads; `0` picks the default.
    pub workers: usize,
    pub timings: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig {
                method: GenMethod::Rnet,
                n: 50,
                p: 5,
                d: 5,
                seed: 0,
                scm: false,
            },
            ns: vec![50],
            params: vec![3, 5, 7],
            reps: 50,
            seed: 0,
            chain_bound: DEFAULT_CHAIN_BOUND,
            workers: 0,
            timings: false,
        }
    }
}

impl SuiteConfig {
    pub fn generator_label(&self) -> &'static str {
        match (self.generator.method, self.generator.scm) {
            (GenMethod::Rnet, false) => "rNET",
            (GenMethod::Rnet, true) => "rSCM",
            (GenMethod::Rnet2, false) => "rNET2",
            (GenMethod::Rnet2, true) => "rSCM2",
        }
    }

    /// Generator settings for one (n, parameter, repetition) task.
    pub fn instance(&self, n: usize, param: usize, rep: usize) -> GenConfig {
        let mut g = self.generator.with_seed(self.seed.wrapping_add(rep as u64));
        g.n = n;
        match g.method {
            GenMethod::Rnet => g.p = param,
            GenMethod::Rnet2 => g.d = param,
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub generator: String,
    pub n: usize,
    pub param: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub result: InstanceWidths,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub generator: String,
    pub n: usize,
    pub param: usize,
    pub count: usize,
    pub mean: [WidthStats; 6],
    pub std: [WidthStats; 6],
}

/// Real-valued width pair for summary rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub width: f64,
    pub normalized_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellStats>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per (n, parameter, repetition), then one summary per cell.
/// Rows and their order do not depend on the worker count.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let label = cfg.generator_label();
    let tasks: Vec<(usize, usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| cfg.params.iter().flat_map(move |&p| (0..cfg.reps).map(move |r| (n, p, r))))
        .collect();
    let results = parallel::map(&tasks, cfg.workers, |&(n, p, r)| {
        let g = cfg.instance(n, p, r);
        let res = evaluate_instance(&g.generate(), cfg.chain_bound, cfg.timings)?;
        res.check()?;
        Ok(ResultRow {
            generator: label.to_string(),
            n,
            param: p,
            seed: g.seed,
            result: res,
        })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for chunk in rows.chunks(cfg.reps) {
        let mut mean = [WidthStats::default(); 6];
        let mut std = [WidthStats::default(); 6];
        for k in 0..6 {
            let w: Vec<f64> = chunk.iter().map(|r| r.result.widths[k].width as f64).collect();
            let nw: Vec<f64> = chunk.iter().map(|r| r.result.widths[k].normalized_width).collect();
            let (mw, sw) = mean_std(&w);
            let (mn, sn) = mean_std(&nw);
            mean[k] = WidthStats { width: mw, normalized_width: mn };
            std[k] = WidthStats { width: sw, normalized_width: sn };
        }
        cells.push(CellStats {
            generator: label.to_string(),
            n: chunk[0].n,
            param: chunk[0].param,
            count: chunk.len(),
            mean,
            std,
        });
    }
    Ok(SuiteResult { rows, cells })
}

fn header(timings: bool) -> Vec<String> {
    let mut h: Vec<String> = ["kind", "generator", "n", "param", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in BenchMethod::ALL {
        h.push(format!("{}_width", m.name()));
        h.push(format!("{}_nwd", m.name()));
    }
    h.push("base_nodes".into());
    h.push("twin_nodes".into());
    if timings {
        h.extend(BenchMethod::ALL.iter().map(|m| format!("{}_ms", m.name())));
    }
    h
}

/// Writes the suite as CSV: a fixed header, one `row` line per instance,
/// then `mean` and `std` lines per cell. Timing columns appear only when
/// `timings` is set.
pub fn write_csv<W: Write>(suite: &SuiteResult, out: W, timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header(timings)).map_err(io)?;
    for r in &suite.rows {
        let mut rec = vec![
            "row".to_string(),
            r.generator.clone(),
            r.n.to_string(),
            r.param.to_string(),
            r.seed.to_string(),
        ];
        for x in &r.result.widths {
            rec.push(x.width.to_string());
            rec.push(format!("{:.6}", x.normalized_width));
        }
        rec.push(r.result.base_nodes.to_string());
        rec.push(r.result.twin_nodes.to_string());
        if timings {
            let t = r.result.timings_ms.unwrap_or_default();
            rec.extend(t.iter().map(|ms| format!("{ms:.3}")));
        }
        w.write_record(&rec).map_err(io)?;
    }
    for c in &suite.cells {
        for (kind, vals) in [("mean", &c.mean), ("std", &c.std)] {
            let mut rec = vec![
                kind.to_string(),
                c.generator.clone(),
                c.n.to_string(),
                c.param.to_string(),
                String::new(),
            ];
            for x in vals.iter() {
                rec.push(format!("{:.4}", x.width));
                rec.push(format!("{:.6}", x.normalized_width));
            }
            rec.push(String::new());
            rec.push(String::new());
            if timings {
                rec.extend(std::iter::repeat_n(String::new(), 6));
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
