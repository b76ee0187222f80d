use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use twinet::audit::{run_bound_audit, tightness_search, AuditConfig};
use twinet::bench::{run_suite, write_csv, SuiteConfig};
use twinet::elimination::{minfill_order, order_width, twin_order, EliminationOrder};
use twinet::inference::{counterfactual_with, CounterfactualQuery, Engine, EngineOptions};
use twinet::jointree::{
    classical_separators, jointree_from_order, make_n_world_jointree, make_twin_jointree,
    twin_separators_direct, Jointree, JointreeDoc,
};
use twinet::model::io::{load_network_file, network_to_string, NetworkFile};
use twinet::model::{Evidence, Scm};
use twinet::moral::moral_graph;
use twinet::randgen::{parameterize, GenConfig, GenMethod};
use twinet::thinning::{internal_mask, replicate_and_thin, thinned_twin_separators, DEFAULT_CHAIN_BOUND};
use twinet::treewidth::{exact_treewidth, DEFAULT_NODE_LIMIT};
use twinet::worlds::{mutilate, n_world_network, twin_dag, twin_network};

#[derive(Parser)]
#[command(name = "twinet", version, about = "Twin networks, jointrees and counterfactual inference")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Rnet,
    Rnet2,
    Rscm,
    Rscm2,
}

impl Generator {
    fn method(self) -> (GenMethod, bool) {
        match self {
            Generator::Rnet => (GenMethod::Rnet, false),
            Generator::Rnet2 => (GenMethod::Rnet2, false),
            Generator::Rscm => (GenMethod::Rnet, true),
            Generator::Rscm2 => (GenMethod::Rnet2, true),
        }
    }
}

#[derive(Args)]
struct WorldArgs {
    /// Number of worlds.
    #[arg(long, default_value_t = 2)]
    worlds: usize,
    /// Comma-separated shared roots; all roots when omitted.
    #[arg(long, value_delimiter = ',')]
    shared: Option<Vec<String>>,
}

impl WorldArgs {
    fn shared_set(&self, scm: &Scm) -> BTreeSet<String> {
        match &self.shared {
            Some(s) => s.iter().filter(|x| !x.is_empty()).cloned().collect(),
            None => twinet::worlds::root_ids(scm.dag()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random parameterized network.
    Gen {
        #[arg(long, value_enum, default_value = "rnet")]
        generator: Generator,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Parent cap (rNET, rSCM).
        #[arg(long, default_value_t = 3)]
        p: usize,
        /// Degree cap (rNET2, rSCM2).
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        cardinality: usize,
    },
    /// Twin network of a model.
    Twin { network: PathBuf },
    /// N-world network of a model.
    Nworld {
        network: PathBuf,
        #[command(flatten)]
        worlds: WorldArgs,
    },
    /// Apply interventions, e.g. `--do A=1,B=0`.
    Mutilate {
        network: PathBuf,
        #[arg(long = "do", value_delimiter = ',', required = true)]
        interventions: Vec<String>,
    },
    /// Minfill elimination order and its width.
    Order {
        network: PathBuf,
        /// Also report the lifted twin order.
        #[arg(long)]
        twin: bool,
    },
    /// Jointree from an elimination order (minfill by default).
    Jointree {
        network: PathBuf,
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Lift a base jointree to the twin or N-world network.
    TwinJointree {
        network: PathBuf,
        #[command(flatten)]
        worlds: WorldArgs,
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Replicate and thin a jointree; `--twin` lifts the thinned result.
    Thin {
        network: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHAIN_BOUND)]
        chain_bound: usize,
        #[arg(long)]
        twin: bool,
    },
    /// Answer a counterfactual query given as JSON.
    Infer {
        network: PathBuf,
        query: PathBuf,
        #[arg(long, default_value = "jointree")]
        engine: String,
        #[arg(long, default_value_t = DEFAULT_CHAIN_BOUND)]
        chain_bound: usize,
    },
    /// Width experiments over random networks.
    Bench {
        #[arg(long, value_enum, default_value = "rnet")]
        generator: Generator,
        #[arg(long, value_delimiter = ',', default_value = "50")]
        n: Vec<usize>,
        /// Parent caps (rNET, rSCM) or degree caps (rNET2, rSCM2).
        #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
        params: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_CHAIN_BOUND)]
        chain_bound: usize,
        /// Add per-method timing columns.
        #[arg(long)]
        timings: bool,
    },
    /// Check the width bounds on random instances.
    Audit {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 30)]
        max_nodes: usize,
        /// Also search small networks for instances meeting the bounds.
        #[arg(long)]
        tightness: bool,
        #[arg(long, default_value_t = 6)]
        search_nodes: usize,
    },
    /// Exact treewidth of the moral graph.
    Treewidth {
        network: PathBuf,
        #[arg(long)]
        twin: bool,
        #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
        limit: usize,
    },
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct Finding(String);

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Finding {}

fn load(path: &Path) -> anyhow::Result<NetworkFile> {
    load_network_file(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(global: &Global, text: &str) -> anyhow::Result<()> {
    match &global.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(global: &Global, value: &T) -> anyhow::Result<()> {
    if global.format == Some(Format::Csv) {
        bail!("this command only writes JSON");
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(global, &text)
}

fn parse_order(order: &Option<Vec<String>>, scm: &Scm) -> EliminationOrder {
    match order {
        Some(o) => EliminationOrder(o.clone()),
        None => minfill_order(&moral_graph(scm.dag())),
    }
}

fn parse_interventions(items: &[String]) -> anyhow::Result<Evidence> {
    let mut ev = Evidence::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("expected VAR=STATE, got `{item}`"))?;
        ev.insert(k.to_string(), v.parse().with_context(|| format!("bad state in `{item}`"))?);
    }
    Ok(ev)
}

fn base_jointree(scm: &Scm, order: &Option<Vec<String>>) -> anyhow::Result<Jointree> {
    Ok(jointree_from_order(scm.dag(), &parse_order(order, scm))?)
}

#[derive(Serialize)]
struct OrderReport {
    order: Vec<String>,
    width: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    twin_order: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    twin_width: Option<usize>,
}

#[derive(Serialize)]
struct ThinReport {
    jointree: JointreeDoc,
    classical_width: usize,
    removals: Vec<twinet::thinning::Removal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    twin: Option<JointreeDoc>,
}

#[derive(Serialize)]
struct TreewidthReport {
    nodes: usize,
    treewidth: usize,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen {
            generator,
            n,
            p,
            d,
            cardinality,
        } => {
            let (method, scm) = generator.method();
            let cfg = GenConfig {
                method,
                n: *n,
                p: *p,
                d: *d,
                seed: g.seed,
                scm,
            };
            let model = parameterize(&cfg.generate(), g.seed, *cardinality);
            emit_json_text(g, &network_to_string(&model, None))
        }
        Command::Twin { network } => {
            let (net, map) = twin_network(&load(network)?.scm)?;
            emit_json_text(g, &network_to_string(&net, Some(&map)))
        }
        Command::Nworld { network, worlds } => {
            let scm = load(network)?.scm;
            let (net, map) = n_world_network(&scm, &worlds.shared_set(&scm), worlds.worlds)?;
            emit_json_text(g, &network_to_string(&net, Some(&map)))
        }
        Command::Mutilate {
            network,
            interventions,
        } => {
            let file = load(network)?;
            let net = mutilate(&file.scm, &parse_interventions(interventions)?)?;
            emit_json_text(g, &network_to_string(&net, file.world_map.as_ref()))
        }
        Command::Order { network, twin } => {
            let scm = load(network)?.scm;
            let graph = moral_graph(scm.dag());
            let order = minfill_order(&graph);
            let width = order_width(&graph, &order)?;
            let (twin_order, twin_width) = if *twin {
                let t = twin_order(&order, scm.dag())?;
                let (net, _, _) = twin_dag(scm.dag())?;
                let w = order_width(&moral_graph(&net), &t)?;
                (Some(t.0), Some(w))
            } else {
                (None, None)
            };
            emit_json(
                g,
                &OrderReport {
                    order: order.0,
                    width,
                    twin_order,
                    twin_width,
                },
            )
        }
        Command::Jointree { network, order } => {
            let scm = load(network)?.scm;
            let jt = base_jointree(&scm, order)?;
            emit_json(g, &JointreeDoc::new(&jt, &classical_separators(&jt)))
        }
        Command::TwinJointree {
            network,
            worlds,
            order,
        } => {
            let scm = load(network)?.scm;
            let jt = base_jointree(&scm, order)?;
            let lifted = if worlds.worlds == 2 && worlds.shared.is_none() {
                make_twin_jointree(&jt)?
            } else {
                make_n_world_jointree(&jt, &worlds.shared_set(&scm), worlds.worlds)?
            };
            let seps = twin_separators_direct(&classical_separators(&jt), &lifted)?;
            if seps != classical_separators(&lifted) {
                return Err(Finding("lifted separators differ from classical separators".into()).into());
            }
            emit_json(g, &JointreeDoc::new(&lifted, &seps))
        }
        Command::Thin {
            network,
            chain_bound,
            twin,
        } => {
            let scm = load(network)?.scm;
            let jt = base_jointree(&scm, &None)?;
            let t = replicate_and_thin(&jt, &internal_mask(scm.dag()), *chain_bound);
            let twin_doc = if *twin {
                let lifted = make_twin_jointree(&t.jointree)?;
                let tt = thinned_twin_separators(&t, &lifted)?;
                if tt.thinned.width > 2 * t.thinned.width + 1 {
                    return Err(Finding("thinned twin width exceeds 2w+1".into()).into());
                }
                Some(JointreeDoc::new(&lifted, &tt.thinned))
            } else {
                None
            };
            emit_json(
                g,
                &ThinReport {
                    jointree: JointreeDoc::new(&t.jointree, &t.thinned),
                    classical_width: classical_separators(&jt).width,
                    removals: t.log.clone(),
                    twin: twin_doc,
                },
            )
        }
        Command::Infer {
            network,
            query,
            engine,
            chain_bound,
        } => {
            let scm = load(network)?.scm;
            let text = std::fs::read_to_string(query).with_context(|| format!("reading {}", query.display()))?;
            let q = CounterfactualQuery::from_json(&text)?;
            let engine: Engine = engine.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
            let opts = EngineOptions {
                chain_bound: *chain_bound,
            };
            emit_json(g, &counterfactual_with(&scm, &q, engine, &opts)?)
        }
        Command::Bench {
            generator,
            n,
            params,
            reps,
            chain_bound,
            timings,
        } => {
            let (method, scm) = generator.method();
            let mut cfg = SuiteConfig {
                ns: n.clone(),
                params: params.clone(),
                reps: *reps,
                seed: g.seed,
                chain_bound: *chain_bound,
                workers: g.workers,
                timings: *timings,
                ..SuiteConfig::default()
            };
            cfg.generator.method = method;
            cfg.generator.scm = scm;
            let suite = run_suite(&cfg)?;
            if g.format == Some(Format::Json) {
                emit_json(g, &suite)
            } else {
                let mut buf = Vec::new();
                write_csv(&suite, &mut buf, *timings)?;
                emit(g, &String::from_utf8(buf)?)
            }
        }
        Command::Audit {
            instances,
            max_nodes,
            tightness,
            search_nodes,
        } => {
            let cfg = AuditConfig {
                instances: *instances,
                seed: g.seed,
                max_nodes: (*max_nodes).max(4),
                workers: g.workers,
                ..AuditConfig::default()
            };
            let report = run_bound_audit(&cfg)?;
            let search = if *tightness {
                Some(tightness_search(*search_nodes, g.workers)?)
            } else {
                None
            };
            #[derive(Serialize)]
            struct Out {
                audit: twinet::audit::AuditReport,
                #[serde(skip_serializing_if = "Option::is_none")]
                tightness: Option<twinet::audit::TightnessReport>,
            }
            let passed = report.passed();
            emit_json(g, &Out { audit: report, tightness: search })?;
            if !passed {
                return Err(Finding("bound audit found violations".into()).into());
            }
            Ok(())
        }
        Command::Treewidth { network, twin, limit } => {
            let scm = load(network)?.scm;
            let dag = if *twin { twin_dag(scm.dag())?.0 } else { scm.dag().clone() };
            let tw = exact_treewidth(&moral_graph(&dag), *limit)?;
            emit_json(
                g,
                &TreewidthReport {
                    nodes: dag.node_count(),
                    treewidth: tw,
                },
            )
        }
    }
}

fn emit_json_text(global: &Global, text: &str) -> anyhow::Result<()> {
    if global.format == Some(Format::Csv) {
        bail!("this command only writes JSON");
    }
    emit(global, &format!("{text}\n"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invariant = e.downcast_ref::<Finding>().is_some()
                || matches!(
                    e.downcast_ref::<twinet::Error>(),
                    Some(twinet::Error::InvariantViolation(_))
                );
            ExitCode::from(if invariant { 2 } else { 1 })
        }
    }
}
