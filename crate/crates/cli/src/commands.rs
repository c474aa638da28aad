use std::fs;
use std::ops::Range;
use std::path::Path;

use mcm_core::search::count::scientific;
use mcm_core::search::exhaustive::{enum_limit_from_env, ENUM_LIMIT_VAR};
use mcm_core::search::{design_space_size, exhaustive_search, search_segment};
use mcm_core::{
    builtin_network, coefficient_of_variation, load_hardware, load_network, schedule_baseline, CostModel, Error,
    HardwareConfig, Method, Network, SearchResult, BUILTIN_NETWORKS,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{opt, write_json, write_rows, write_with};
use crate::Opts;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoFeasibleSchedule(_) | Error::InfeasibleSchedule { .. } => 2,
            Error::SpaceTooLarge { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(format!("i/o: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn resolve_network(name: &str) -> Result<Network, Failure> {
    if BUILTIN_NETWORKS.contains(&name) {
        return Ok(builtin_network(name)?);
    }
    if Path::new(name).exists() {
        return Ok(load_network(name)?);
    }
    Err(Error::UnknownNetwork(name.to_string()).into())
}

fn hardware(opts: &Opts, chiplets: Option<usize>) -> Result<HardwareConfig, Failure> {
    let hw = match &opts.hw {
        Some(path) => load_hardware(path)?,
        None => HardwareConfig::default(),
    };
    let hw = match chiplets {
        Some(n) => hw.resized(n),
        None => hw,
    };
    hw.validate()?;
    Ok(hw)
}

fn one_network(opts: &Opts) -> Result<Network, Failure> {
    match opts.net.as_slice() {
        [one] => resolve_network(one),
        [] => Err(Failure::usage("--net is required")),
        _ => Err(Failure::usage("this command takes a single --net")),
    }
}

fn one_chiplets(opts: &Opts) -> Result<Option<usize>, Failure> {
    match opts.chiplets.as_slice() {
        [] => Ok(None),
        [n] => Ok(Some(*n)),
        _ => Err(Failure::usage("this command takes a single --chiplets value")),
    }
}

fn one_method(opts: &Opts) -> Result<Method, Failure> {
    match opts.method.as_slice() {
        [] => Ok(Method::Merged),
        [m] => Ok(*m),
        _ => Err(Failure::usage("this command takes a single --method")),
    }
}

fn check_samples(opts: &Opts) -> CmdResult {
    if opts.samples == 0 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    Ok(())
}

fn cluster_counts(r: &SearchResult) -> String {
    r.schedule
        .num_clusters()
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn schedule(opts: &Opts) -> CmdResult {
    check_samples(opts)?;
    let net = one_network(opts)?;
    let hw = hardware(opts, one_chiplets(opts)?)?;
    let method = one_method(opts)?;
    let result = schedule_baseline(method, &net, &hw, opts.samples)?;

    fs::create_dir_all(&opts.out)?;
    write_json(&opts.out.join("schedule.json"), &result)?;
    write_json(&opts.out.join("report.json"), &result.report)?;
    write_with(&opts.out.join("layers.csv"), |buf| result.report.write_layer_csv(buf))?;

    let r = &result.report;
    println!("network      {} ({} layers)", net.name, net.len());
    println!("chiplets     {} ({}x{})", hw.num_chiplets, hw.mesh_rows, hw.mesh_cols);
    println!("method       {method}");
    println!("segments     {} (clusters {})", r.segments.len(), cluster_counts(&result));
    println!("t_system     {:.6e} s", r.t_system);
    println!("throughput   {:.3} samples/s", r.throughput());
    println!(
        "energy       {:.6e} J (mac {:.6e}, nop {:.6e}, dram {:.6e})",
        r.energy.total(),
        r.energy.e_mac,
        r.energy.e_nop,
        r.energy.e_dram
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    network: String,
    chiplets: usize,
    method: Method,
    status: &'static str,
    latency: String,
    throughput: String,
    e_mac: String,
    e_nop: String,
    e_dram: String,
    e_total: String,
    segments: String,
    clusters: String,
    message: String,
}

struct Cell {
    network: String,
    chiplets: usize,
    method: Method,
    outcome: Result<SearchResult, Failure>,
}

impl Cell {
    fn throughput(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.report.throughput())
    }

    fn row(&self) -> CompareRow {
        let mut row = CompareRow {
            network: self.network.clone(),
            chiplets: self.chiplets,
            method: self.method,
            status: "ok",
            latency: String::new(),
            throughput: String::new(),
            e_mac: String::new(),
            e_nop: String::new(),
            e_dram: String::new(),
            e_total: String::new(),
            segments: String::new(),
            clusters: String::new(),
            message: String::new(),
        };
        match &self.outcome {
            Ok(r) => {
                let rep = &r.report;
                row.latency = rep.t_system.to_string();
                row.throughput = rep.throughput().to_string();
                row.e_mac = rep.energy.e_mac.to_string();
                row.e_nop = rep.energy.e_nop.to_string();
                row.e_dram = rep.energy.e_dram.to_string();
                row.e_total = rep.energy.total().to_string();
                row.segments = rep.segments.len().to_string();
                row.clusters = cluster_counts(r);
            }
            Err(f) => {
                row.status = if f.code == 2 { "infeasible" } else { "error" };
                row.message = f.message.clone();
            }
        }
        row
    }
}

pub fn compare(opts: &Opts) -> CmdResult {
    check_samples(opts)?;
    if opts.net.is_empty() {
        return Err(Failure::usage("--net is required"));
    }
    let nets = opts
        .net
        .iter()
        .map(|n| resolve_network(n))
        .collect::<Result<Vec<_>, _>>()?;
    let base_hw = hardware(opts, None)?;
    let counts = if opts.chiplets.is_empty() {
        vec![base_hw.num_chiplets]
    } else {
        opts.chiplets.clone()
    };
    let hws = counts
        .iter()
        .map(|&c| hardware(opts, Some(c)))
        .collect::<Result<Vec<_>, _>>()?;
    let methods = if opts.method.is_empty() {
        Method::ALL.to_vec()
    } else {
        opts.method.clone()
    };

    let mut jobs = Vec::new();
    for net in &nets {
        for hw in &hws {
            for &m in &methods {
                jobs.push((net, hw, m));
            }
        }
    }
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(net, hw, method)| Cell {
            network: net.name.clone(),
            chiplets: hw.num_chiplets,
            method,
            outcome: schedule_baseline(method, net, hw, opts.samples).map_err(Failure::from),
        })
        .collect();

    fs::create_dir_all(&opts.out)?;
    let rows: Vec<CompareRow> = cells.iter().map(Cell::row).collect();
    write_rows(&opts.out.join("compare.csv"), &rows)?;
    write_normalized(&opts.out.join("normalized.csv"), &nets, &counts, &methods, &cells)?;

    for row in &rows {
        println!(
            "{:<10} {:>4} {:<14} {:<10} {}",
            row.network,
            row.chiplets,
            row.method.name(),
            row.status,
            if row.status == "ok" { &row.throughput } else { &row.message }
        );
    }
    if cells.iter().any(|c| c.outcome.is_ok()) {
        Ok(())
    } else {
        let code = if cells.iter().all(|c| matches!(&c.outcome, Err(f) if f.code == 2)) { 2 } else { 1 };
        Err(Failure {
            code,
            message: "no cell of the sweep produced a schedule".into(),
        })
    }
}

/// Wide table, one row per (network, chiplets): raw and normalized
/// throughput per method. The base is 16 chiplets when swept, otherwise the
/// smallest count.
fn write_normalized(path: &Path, nets: &[Network], counts: &[usize], methods: &[Method], cells: &[Cell]) -> CmdResult {
    let base = if counts.contains(&16) {
        16
    } else {
        counts.iter().copied().min().unwrap_or(16)
    };
    let find = |net: &str, c: usize, m: Method| {
        cells
            .iter()
            .find(|x| x.network == net && x.chiplets == c && x.method == m)
            .and_then(Cell::throughput)
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["network".to_string(), "chiplets".into(), "base_chiplets".into()];
    for m in methods {
        header.push(format!("{m}_throughput"));
        header.push(format!("{m}_normalized"));
    }
    let csv_err = |e: csv::Error| Failure::usage(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for net in nets {
        for &c in counts {
            let mut rec = vec![net.name.clone(), c.to_string(), base.to_string()];
            for &m in methods {
                let t = find(&net.name, c, m);
                let b = find(&net.name, base, m);
                rec.push(opt(t));
                rec.push(opt(t.zip(b).map(|(t, b)| t / b)));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
    crate::output::write_atomic(path, &bytes)?;
    Ok(())
}

fn parse_range(text: &str, len: usize) -> Result<Range<usize>, Failure> {
    let bad = || Failure::usage(format!("--layers expects START:END with 0 <= START < END <= {len}, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let start: usize = a.trim().parse().map_err(|_| bad())?;
    let end: usize = b.trim().parse().map_err(|_| bad())?;
    if start >= end || end > len {
        return Err(bad());
    }
    Ok(start..end)
}

#[derive(Debug, Serialize)]
struct ValidateSummary {
    network: String,
    chiplets: usize,
    first_layer: usize,
    end_layer: usize,
    candidates: usize,
    feasible: usize,
    heuristic_latency: f64,
    optimum_latency: f64,
    ratio: f64,
    percentile_rank: f64,
}

pub fn validate(opts: &Opts, layers: Option<&str>) -> CmdResult {
    check_samples(opts)?;
    let net = one_network(opts)?;
    let hw = hardware(opts, one_chiplets(opts)?)?;
    let range = match layers {
        Some(t) => parse_range(t, net.len())?,
        None => 0..net.len(),
    };
    let limit = enum_limit_from_env();
    let model = CostModel::new(&net, &hw, opts.samples);
    let oracle = match exhaustive_search(&model, range.clone(), limit) {
        Err(Error::SpaceTooLarge { .. }) => {
            let size = design_space_size(range.len(), hw.num_chiplets);
            println!("Q_total {} ({})", size, scientific(&size));
            return Err(Failure {
                code: 3,
                message: format!(
                    "design space of {} layers on {} chiplets has {} candidates, above {ENUM_LIMIT_VAR}={limit}",
                    range.len(),
                    hw.num_chiplets,
                    scientific(&size)
                ),
            });
        }
        other => other?,
    };
    let heuristic = search_segment(&model, range.clone())?;
    let Some((_, optimum)) = oracle.best else {
        return Err(Error::NoFeasibleSchedule("exhaustive search found no feasible candidate".into()).into());
    };
    let summary = ValidateSummary {
        network: net.name.clone(),
        chiplets: hw.num_chiplets,
        first_layer: range.start,
        end_layer: range.end,
        candidates: oracle.candidates.len(),
        feasible: oracle.feasible(),
        heuristic_latency: heuristic.latency,
        optimum_latency: optimum,
        ratio: heuristic.latency / optimum,
        percentile_rank: oracle.percentile_rank(heuristic.latency),
    };
    fs::create_dir_all(&opts.out)?;
    write_with(&opts.out.join("distribution.csv"), |buf| oracle.write_csv(buf))?;
    write_rows(&opts.out.join("validate_summary.csv"), std::slice::from_ref(&summary))?;

    println!("candidates   {} ({} feasible)", summary.candidates, summary.feasible);
    println!("heuristic    {:.6e} s", summary.heuristic_latency);
    println!("optimum      {:.6e} s", summary.optimum_latency);
    println!("ratio        {:.4}", summary.ratio);
    println!("rank         {:.4}% of feasible schedules are faster", summary.percentile_rank * 100.0);
    Ok(())
}

#[derive(Debug, Serialize)]
struct LoadRow {
    method: Method,
    segment: usize,
    cluster: usize,
    first_layer: usize,
    last_layer: usize,
    region_size: usize,
    macs: u64,
    normalized_load: f64,
}

#[derive(Debug, Serialize)]
struct EnergyRow {
    method: Method,
    e_mac: f64,
    e_nop: f64,
    e_dram: f64,
    e_total: f64,
    mac_normalized: f64,
    nop_normalized: f64,
    dram_normalized: f64,
    total_normalized: f64,
}

pub fn breakdown(opts: &Opts) -> CmdResult {
    check_samples(opts)?;
    let net = one_network(opts)?;
    let hw = hardware(opts, one_chiplets(opts)?)?;
    let methods = if opts.method.is_empty() {
        vec![Method::Merged, Method::Segmented]
    } else {
        opts.method.clone()
    };
    let results = methods
        .par_iter()
        .map(|&m| schedule_baseline(m, &net, &hw, opts.samples))
        .collect::<Result<Vec<_>, _>>()?;

    // energies are normalized to the merged schedule when present
    let base = results
        .iter()
        .find(|r| r.method == Method::Merged)
        .unwrap_or(&results[0])
        .report
        .energy
        .total();

    let mut loads = Vec::new();
    let mut energy = Vec::new();
    for r in &results {
        let macs = r.report.cluster_loads();
        let mean = macs.iter().sum::<u64>() as f64 / macs.len() as f64;
        for (i, seg) in r.schedule.segments.iter().enumerate() {
            for (j, c) in seg.clusters.iter().enumerate() {
                let m = r.report.segments[i].clusters[j].macs;
                loads.push(LoadRow {
                    method: r.method,
                    segment: i,
                    cluster: j,
                    first_layer: c.start,
                    last_layer: c.end - 1,
                    region_size: c.region_size,
                    macs: m,
                    normalized_load: m as f64 / mean,
                });
            }
        }
        let e = &r.report.energy;
        energy.push(EnergyRow {
            method: r.method,
            e_mac: e.e_mac,
            e_nop: e.e_nop,
            e_dram: e.e_dram,
            e_total: e.total(),
            mac_normalized: e.e_mac / base,
            nop_normalized: e.e_nop / base,
            dram_normalized: e.e_dram / base,
            total_normalized: e.total() / base,
        });
        let as_f64: Vec<f64> = macs.iter().map(|&m| m as f64).collect();
        println!(
            "{:<14} segments {:>2}  clusters {:>3}  load cv {:.4}  energy {:.4}",
            r.method.name(),
            r.schedule.segments.len(),
            macs.len(),
            coefficient_of_variation(&as_f64),
            e.total() / base
        );
    }
    fs::create_dir_all(&opts.out)?;
    write_rows(&opts.out.join("loads.csv"), &loads)?;
    write_rows(&opts.out.join("energy.csv"), &energy)?;
    Ok(())
}

pub fn count(opts: &Opts, num_layers: Option<usize>) -> CmdResult {
    let layers = match (num_layers, opts.net.as_slice()) {
        (Some(l), _) => l,
        (None, [_]) => one_network(opts)?.len(),
        (None, []) => return Err(Failure::usage("count needs --net or --num-layers")),
        (None, _) => return Err(Failure::usage("count takes a single --net")),
    };
    let chiplets = match one_chiplets(opts)? {
        Some(c) => c,
        None => hardware(opts, None)?.num_chiplets,
    };
    let size = design_space_size(layers, chiplets);
    println!("L {layers}  C {chiplets}");
    println!("Q_total {size}");
    println!("approx  {}", scientific(&size));
    Ok(())
}
