//! The six subcommands. Each returns the files it produced; `main` decides
//! where they go.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use xplain_core::analyzer::{
    find_adversarial, membership, AdversarialPoint, ExclusionSet, InputSpace, NotFound, Strategy,
};
use xplain_core::explainer::{emit_dot, emit_json, explain_problem, Heatmap};
use xplain_core::flow_dsl::{self, evaluate, FlowError};
use xplain_core::generalizer::{analyzer_probe, evaluate_predicate, generate_instances};
use xplain_core::heuristics::{
    pin_dp, te_inputs, te_network, vbp_program, Allocation, GapMode, Model, Outcome, Problem, Scenario,
    TeInstance, VbpInstance, UNMET,
};
use xplain_core::milp_bridge::{compile_network, encode_milp, parse_milp_file};
use xplain_core::rng;
use xplain_core::solver::{solve_mip, to_lp_format, SolveStatus};
use xplain_core::subspace::{build_subspace, generate_subspaces, Round, Subspace};

use crate::config::{ConfigError, Loaded};

/// Exit code for "nothing found" and "not significant".
pub const EXIT_NOT_FOUND: u8 = 3;

/// Named outputs of one command. `primary` indexes the file printed to
/// stdout when no output directory is given.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub primary: usize,
    pub exit: u8,
}

impl Report {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn space_of(p: &Problem) -> Result<InputSpace> {
    InputSpace::new(p.bounds(), p.labels()).map_err(|e| anyhow!(ConfigError(format!("input space: {e}"))))
}

fn mode_name(m: GapMode) -> &'static str {
    match m {
        GapMode::Absolute => "absolute",
        GapMode::Relative => "relative",
    }
}

// ---------------------------------------------------------------- run-heuristic

#[derive(Serialize)]
struct Labeled {
    label: String,
    value: f64,
}

#[derive(Serialize)]
struct PathFlow {
    nodes: Vec<String>,
    flow: f64,
}

#[derive(Serialize)]
struct DemandRoute {
    demand: String,
    value: f64,
    paths: Vec<PathFlow>,
    unmet: f64,
}

#[derive(Serialize)]
struct BinLoad {
    bin: usize,
    balls: Vec<usize>,
    load: f64,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum AllocationDoc {
    Te { routes: Vec<DemandRoute> },
    Vbp { bins_used: usize, bins: Vec<BinLoad> },
}

#[derive(Serialize)]
struct Side {
    name: String,
    total: f64,
    allocation: AllocationDoc,
}

#[derive(Serialize)]
struct RunDoc {
    summary: String,
    gap_mode: &'static str,
    inputs: Vec<Labeled>,
    heuristic: Side,
    benchmark: Side,
    gap: f64,
}

fn path_nodes(inst: &TeInstance, links: &[usize]) -> Vec<String> {
    let mut nodes = Vec::with_capacity(links.len() + 1);
    if let Some(&first) = links.first() {
        nodes.push(inst.links[first].from.clone());
    }
    nodes.extend(links.iter().map(|&l| inst.links[l].to.clone()));
    nodes
}

fn allocation_doc(alloc: &Allocation, p: &Problem, x: &[f64], open_extra: bool) -> AllocationDoc {
    match (alloc, p) {
        (Allocation::Te(a), Problem::Te(t)) => {
            let inst = &t.instance;
            let routes = inst
                .demands
                .iter()
                .enumerate()
                .map(|(k, d)| DemandRoute {
                    demand: inst.demand_label(k),
                    value: x[k],
                    paths: d
                        .paths
                        .iter()
                        .zip(&a.flows[k])
                        .map(|(links, &flow)| PathFlow { nodes: path_nodes(inst, links), flow })
                        .collect(),
                    unmet: a.unmet[k],
                })
                .collect();
            AllocationDoc::Te { routes }
        }
        (Allocation::Vbp(a), Problem::Vbp(v)) => {
            let inst = v.instance(x, open_extra);
            let used = a.assignment.iter().map(|&j| j + 1).max().unwrap_or(0);
            let bins = (0..used)
                .map(|j| {
                    let balls: Vec<usize> = (0..a.assignment.len()).filter(|&i| a.assignment[i] == j).collect();
                    let load = balls.iter().map(|&i| inst.sizes[i][0]).sum();
                    BinLoad { bin: j, balls, load }
                })
                .collect();
            AllocationDoc::Vbp { bins_used: a.bins_used, bins }
        }
        _ => unreachable!("allocations come from the same problem"),
    }
}

fn summary(p: &Problem, o: &Outcome) -> String {
    let (h, b) = p.names();
    match p {
        Problem::Te(_) => format!("{h} total {} / {b} total {}", o.heuristic, o.benchmark),
        Problem::Vbp(_) => format!("{h} {} / {b} {}", o.heuristic, o.benchmark),
    }
}

/// Bins the benchmark program may open for a VBP instance.
fn available_bins(inst: &VbpInstance) -> usize {
    if inst.open_extra {
        inst.bins.len().max(inst.sizes.len())
    } else {
        inst.bins.len()
    }
}

pub fn run_heuristic(l: &Loaded, _seed: u64) -> Result<Report> {
    let p = l.problem()?;
    let x: Vec<f64> = l.cfg.inputs.clone().unwrap_or_else(|| p.defaults().to_vec());
    let open_extra = match &p {
        Problem::Vbp(v) => v.open_extra,
        Problem::Te(_) => false,
    };
    let o = p.run(&x, open_extra).context("running the heuristic pair")?;
    let (hn, bn) = p.names();
    let doc = RunDoc {
        summary: summary(&p, &o),
        gap_mode: mode_name(p.mode()),
        inputs: p.labels().into_iter().zip(&x).map(|(label, &value)| Labeled { label, value }).collect(),
        heuristic: Side {
            name: hn.into(),
            total: o.heuristic,
            allocation: allocation_doc(&o.heuristic_alloc, &p, &x, open_extra),
        },
        benchmark: Side {
            name: bn.into(),
            total: o.benchmark,
            allocation: allocation_doc(&o.benchmark_alloc, &p, &x, open_extra),
        },
        gap: o.gap,
    };
    eprintln!("{}", doc.summary);
    let mut r = Report::default();
    r.add("run.json", pretty(&doc));
    match &p {
        Problem::Te(t) => {
            let inst = &t.instance;
            let inputs = te_inputs(inst, &x);
            let mut dp = te_network(inst, Model::Dp);
            pin_dp(&mut dp, inst, &x).context("pinning")?;
            let opt = te_network(inst, Model::OptTe);
            for (name, net) in [("heuristic", &dp), ("benchmark", &opt)] {
                let prog = compile_network(net, Some(UNMET), &inputs).context("compiling network")?;
                r.add(format!("{name}_network.json"), flow_dsl::to_json(net) + "\n");
                r.add(format!("{name}.lp"), to_lp_format(&prog));
            }
        }
        Problem::Vbp(v) => {
            let inst = v.instance(&x, open_extra);
            let net = xplain_core::heuristics::vbp_network(&inst, Model::Ff);
            r.add("heuristic_network.json", flow_dsl::to_json(&net) + "\n");
            r.add("benchmark.lp", to_lp_format(&vbp_program(&inst, available_bins(&inst))));
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------- analyze

#[derive(Serialize)]
struct AnalyzeDoc {
    found: bool,
    dimensions: Vec<String>,
    gap_mode: &'static str,
    min_gap: f64,
    point: Option<AdversarialPoint>,
    best_gap: f64,
    evaluations: usize,
}

pub fn analyze(l: &Loaded, seed: u64) -> Result<Report> {
    let p = l.problem()?;
    let space = space_of(&p)?;
    let params = l.analyzer_params(&p);
    let mut ex = ExclusionSet::new(l.cfg.subspace.revisit_cap);
    let res = find_adversarial(&space, &|x: &[f64]| p.gap(x), &mut ex, &params, seed);
    let doc = match res {
        Ok(a) => {
            eprintln!("adversarial gap {} after {} evaluations", a.gap, a.evaluations);
            AnalyzeDoc {
                found: true,
                dimensions: space.labels.clone(),
                gap_mode: mode_name(p.mode()),
                min_gap: params.min_gap,
                best_gap: a.gap,
                evaluations: a.evaluations,
                point: Some(a),
            }
        }
        Err(NotFound { evaluations, best_gap, min_gap }) => {
            eprintln!("no gap >= {min_gap} in {evaluations} evaluations (best {best_gap})");
            AnalyzeDoc {
                found: false,
                dimensions: space.labels.clone(),
                gap_mode: mode_name(p.mode()),
                min_gap,
                point: None,
                best_gap,
                evaluations,
            }
        }
    };
    let mut r = Report::default();
    if !doc.found {
        r.exit = EXIT_NOT_FOUND;
    }
    r.add("adversarial.json", pretty(&doc));
    Ok(r)
}

// ---------------------------------------------------------------- subspaces

#[derive(Serialize)]
struct SubspacesDoc<'a> {
    dimensions: Vec<String>,
    gap_mode: &'static str,
    min_gap: f64,
    subspaces: &'a [Subspace],
    rounds: &'a [Round],
    stop: &'a str,
}

/// CSV with one row per sample: the coordinates, then the gap.
fn samples_csv(labels: &[String], rows: &[(Vec<f64>, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = labels.iter().map(String::as_str).collect();
    header.push("gap");
    w.write_record(&header)?;
    for (x, g) in rows {
        w.write_record(x.iter().chain(std::iter::once(g)).map(f64::to_string))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn subspaces(l: &Loaded, seed: u64) -> Result<Report> {
    let p = l.problem()?;
    let space = space_of(&p)?;
    let params = l.generate_params(&p)?;
    let rep = generate_subspaces(&space, &|x: &[f64]| p.gap(x), &params, seed);
    eprintln!(
        "{} subspace(s) kept over {} round(s); stopped: {}",
        rep.subspaces.len(),
        rep.rounds.len(),
        rep.stop
    );
    for (k, s) in rep.subspaces.iter().enumerate() {
        let seed_ok = s.seed.as_ref().is_some_and(|a| membership(&a.x, s));
        if !seed_ok {
            return Err(anyhow!("subspace {k} does not contain its seed point"));
        }
    }
    let doc = SubspacesDoc {
        dimensions: space.labels.clone(),
        gap_mode: mode_name(p.mode()),
        min_gap: params.analyzer.min_gap,
        subspaces: &rep.subspaces,
        rounds: &rep.rounds,
        stop: &rep.stop,
    };
    let mut r = Report::default();
    r.add("subspaces.json", pretty(&doc));
    for (k, (s, rows)) in rep.subspaces.iter().zip(&rep.samples).enumerate() {
        r.add(format!("subspace_{k}.json"), s.to_json() + "\n");
        r.add(format!("samples_{k}.csv"), samples_csv(&space.labels, rows)?);
    }
    if rep.subspaces.is_empty() {
        r.exit = EXIT_NOT_FOUND;
    }
    Ok(r)
}

// ---------------------------------------------------------------- explain

pub fn explain(l: &Loaded, seed: u64) -> Result<Report> {
    let p = l.problem()?;
    let space = space_of(&p)?;
    let gap = |x: &[f64]| p.gap(x);
    let mut r = Report::default();
    let mut generated = false;
    let subs: Vec<Subspace> = if let Some((path, text)) = l.subspace_text()? {
        let s = Subspace::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if s.dims() != space.dims() {
            return Err(ConfigError(format!(
                "{}: {} dimensions, scenario has {}",
                path.display(),
                s.dims(),
                space.dims()
            ))
            .into());
        }
        vec![s]
    } else if let Some(x) = &l.cfg.explainer.seed_point {
        let params = l.generate_params(&p)?;
        let g = gap(x);
        if g < params.analyzer.min_gap {
            eprintln!("seed point gap {g} is below min_gap {}", params.analyzer.min_gap);
            r.exit = EXIT_NOT_FOUND;
            r.add("heatmaps.json", pretty(&Vec::<Heatmap>::new()));
            return Ok(r);
        }
        let point = AdversarialPoint { x: x.clone(), gap: g, strategy: Strategy::Grid, evaluations: 1 };
        let (s, _) = build_subspace(&point, &space, &gap, &params, rng::derive(seed, &[rng::tag("subspace")]))
            .map_err(|e| anyhow!("building subspace: {e}"))?;
        if !s.significance.as_ref().is_some_and(|t| t.keep) {
            eprintln!("subspace around the seed point is not significant");
            r.exit = EXIT_NOT_FOUND;
        }
        generated = true;
        vec![s]
    } else {
        let params = l.generate_params(&p)?;
        let rep = generate_subspaces(&space, &gap, &params, rng::derive(seed, &[rng::tag("subspace")]));
        if rep.subspaces.is_empty() {
            eprintln!("no significant subspace; stopped: {}", rep.stop);
            r.exit = EXIT_NOT_FOUND;
        }
        generated = true;
        rep.subspaces
    };
    let n = l.cfg.explainer.samples;
    let mut maps = Vec::with_capacity(subs.len());
    for (k, s) in subs.iter().enumerate() {
        let (hm, net) = explain_problem(&p, s, &space, n, rng::derive(seed, &[rng::tag("explain"), k as u64]))
            .with_context(|| format!("explaining subspace {k}"))?;
        eprintln!("subspace {k}: {} edges scored over {n} samples", hm.edges.len());
        if generated {
            r.add(format!("subspace_{k}.json"), s.to_json() + "\n");
        }
        r.add(format!("heatmap_{k}.json"), emit_json(&hm) + "\n");
        r.add(format!("heatmap_{k}.dot"), emit_dot(&hm, &net)?);
        maps.push(hm);
    }
    r.primary = r.files.len();
    r.add("heatmaps.json", pretty(&maps));
    Ok(r)
}

// ---------------------------------------------------------------- generalize

pub fn generalize(l: &Loaded, seed: u64) -> Result<Report> {
    let g = l.generalizer()?;
    let fam = g.family.with_seed(rng::derive(seed, &[rng::tag("instances")]));
    let scenarios = generate_instances(&fam).context("generating instances")?;
    let problems = scenarios
        .iter()
        .cloned()
        .map(Scenario::into_problem)
        .collect::<Result<Vec<_>, _>>()
        .context("instance validation")?;
    let probe = analyzer_probe(xplain_core::analyzer::AnalyzerParams {
        budget: g.budget,
        ..Default::default()
    });
    let finding = evaluate_predicate(&g.predicate, &problems, probe, rng::derive(seed, &[rng::tag("probe")]))
        .map_err(|e| match e {
            xplain_core::generalizer::GeneralizeError::FeatureUnavailable { .. } => {
                anyhow!(ConfigError(e.to_string()))
            }
            other => anyhow!(other),
        })?;
    eprintln!(
        "{:?}({}) tau {} p {} holds {}",
        finding.predicate.kind, finding.predicate.feature, finding.tau, finding.p, finding.holds
    );
    let mut r = Report::default();
    r.add("trend.json", finding.to_json() + "\n");
    r.add("instances.json", pretty(&scenarios));
    if !finding.holds {
        r.exit = EXIT_NOT_FOUND;
    }
    Ok(r)
}

// ---------------------------------------------------------------- encode-milp

#[derive(Serialize)]
struct SolveSide {
    status: SolveStatus,
    objective: Option<f64>,
}

#[derive(Serialize)]
struct EncodeDoc {
    raw: SolveSide,
    encoded: SolveSide,
    agree: bool,
    /// Decoded from the network's optimal flow.
    point: Vec<Labeled>,
    nodes: usize,
    edges: usize,
    objective_sink: String,
}

pub fn encode_milp_cmd(l: &Loaded, _seed: u64) -> Result<Report> {
    let (path, text) = l.milp_text()?;
    let file = parse_milp_file(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let prog = file.milp.to_program().context("raw program")?;
    let raw = solve_mip(&prog).context("solving the raw MILP")?;
    let (net, trace) = encode_milp(&file.milp).context("encoding")?;
    let empty = BTreeMap::new();
    let (encoded, point) = match evaluate(&net, &empty, &trace.objective_sink) {
        Ok(ev) => {
            let (x, y) = trace.point(&net, &ev.flows);
            let names = file.x_names.iter().zip(x).chain(file.y_names.iter().zip(y));
            let point = names.map(|(n, v)| Labeled { label: n.clone(), value: v }).collect();
            let obj = trace.objective_from_sink(ev.objective);
            (SolveSide { status: SolveStatus::Optimal, objective: Some(obj) }, point)
        }
        Err(FlowError::Infeasible) => (SolveSide { status: SolveStatus::Infeasible, objective: None }, Vec::new()),
        Err(FlowError::Unbounded) => (SolveSide { status: SolveStatus::Unbounded, objective: None }, Vec::new()),
        Err(e) => return Err(anyhow!(e).context("solving the encoded network")),
    };
    let raw = SolveSide {
        status: raw.status,
        objective: raw.is_optimal().then_some(raw.objective),
    };
    let agree = raw.status == encoded.status
        && match (raw.objective, encoded.objective) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
            _ => true,
        };
    eprintln!("raw {:?} {:?} / encoded {:?} {:?}", raw.status, raw.objective, encoded.status, encoded.objective);
    let doc = EncodeDoc {
        raw,
        encoded,
        agree,
        point,
        nodes: net.nodes.len(),
        edges: net.edges.len(),
        objective_sink: trace.objective_sink.clone(),
    };
    let mut r = Report::default();
    r.add("encode_report.json", pretty(&doc));
    r.add("network.json", flow_dsl::to_json(&net) + "\n");
    r.add("milp.lp", to_lp_format(&prog));
    let compiled = compile_network(&net, Some(&trace.objective_sink), &empty).context("compiling network")?;
    r.add("network.lp", to_lp_format(&compiled));
    if !agree {
        return Err(anyhow!("raw and encoded optima disagree"));
    }
    Ok(r)
}
