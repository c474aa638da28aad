//! Exit criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mcm_core::cost::{comm_volume, pipeline_time, ClusterReport, Endpoint};
use mcm_core::search::exhaustive::exhaustive_search;
use mcm_core::search::{design_space_size, search_segment};
use mcm_core::{
    builtin_network, coefficient_of_variation, schedule_baseline, schedule_scope, CostModel, CostReport, Error,
    HardwareConfig, LayerDesc, Method, Network, Partition, BUILTIN_NETWORKS,
};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (took <= limit, format!("{:.2}s of {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))
}

fn random_conv(rng: &mut ChaCha8Rng) -> LayerDesc {
    let k = [1, 3, 5, 7, 11][rng.gen_range(0..5)];
    let stride = rng.gen_range(1..=4);
    let hw = rng.gen_range(k..=64);
    LayerDesc::conv("r", rng.gen_range(1..=256), rng.gen_range(1..=256), hw, k, stride, rng.gen_range(0..=k / 2))
}

fn table_rows() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..200 {
        let this = random_conv(&mut rng);
        let next = random_conv(&mut rng);
        let r = rng.gen_range(1..=64usize);
        let r_next = rng.gen_range(1..=64usize);
        let act = rng.gen_range(1..=2u64);
        let hw = HardwareConfig {
            act_bytes: act,
            ..HardwareConfig::default()
        };
        let output = (this.c_out * this.h_out() * this.w_out()) as u64 * act;
        let halo = (r as u64 - 1) * next.k_h.saturating_sub(next.stride) as u64 * (next.w_in * next.c_in) as u64 * act;
        use Partition::{Isp, Wsp};
        let rows = [
            (Wsp, Wsp, true, halo),
            (Wsp, Isp, true, (r as u64 - 1) * output),
            (Isp, Wsp, true, (r as u64 - 1) * output + halo),
            (Isp, Isp, true, (r as u64 - 1) * output),
            (if rng.gen() { Wsp } else { Isp }, Wsp, false, output),
            (if rng.gen() { Wsp } else { Isp }, Isp, false, r_next as u64 * output),
        ];
        for (tp, np, same, expect) in rows {
            let n_next = if same { r } else { r_next };
            let got = comm_volume(
                Endpoint {
                    layer: &this,
                    partition: tp,
                    region_size: r,
                },
                Endpoint {
                    layer: &next,
                    partition: np,
                    region_size: n_next,
                },
                same,
                &hw,
            );
            checked += 1;
            if got != Ok(expect) {
                mismatches += 1;
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(1), start);
    outcome(mismatches == 0 && fast, format!("{checked} rows, {mismatches} mismatches, {time}"))
}

/// Lock-step replay: each beat lasts as long as the slowest stage and moves
/// every sample one stage forward.
fn replay(times: &[f64], samples: usize) -> f64 {
    let stages = times.len();
    let mut slots = vec![false; stages];
    slots[0] = true;
    let (mut admitted, mut done, mut beats) = (1usize, 0usize, 0u64);
    while done < samples {
        beats += 1;
        if std::mem::take(&mut slots[stages - 1]) {
            done += 1;
        }
        slots.rotate_right(1);
        if admitted < samples {
            slots[0] = true;
            admitted += 1;
        }
    }
    let beat = times.iter().copied().fold(0.0, f64::max);
    beats as f64 * beat
}

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn pipeline_replay() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=32);
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-7..1e-3)).collect();
        let clusters: Vec<ClusterReport> = times
            .iter()
            .map(|&t| ClusterReport {
                t_cluster: t,
                region_size: 1,
                macs: 0,
                layers: Vec::new(),
            })
            .collect();
        worst = worst.max(ulps(pipeline_time(m, &clusters), replay(&times, m)));
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    outcome(worst <= 1 && fast, format!("100 segments, worst {worst} ulp, {time}"))
}

fn brute_space(layers: usize, chiplets: usize) -> u64 {
    // compositions of the chiplets into n parts, counted by scanning [1, C]^n
    let compositions = |parts: usize| -> u64 {
        let mut count = 0;
        let mut digits = vec![1usize; parts];
        'outer: loop {
            if digits.iter().sum::<usize>() == chiplets {
                count += 1;
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d <= chiplets {
                    continue 'outer;
                }
                *d = 1;
            }
            return count;
        }
    };
    let divisions: u64 = (0u64..1 << (layers - 1))
        .map(|cuts| compositions(cuts.count_ones() as usize + 1))
        .sum();
    divisions << layers
}

fn counting() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for l in 1..=5 {
        for c in 1..=6 {
            let formula = design_space_size(l, c).to_u64();
            if formula != Some(brute_space(l, c)) {
                bad.push(format!("L={l} C={c}"));
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    outcome(bad.is_empty() && fast, format!("30 (L, C) pairs, mismatches {bad:?}, {time}"))
}

fn toy_five() -> Network {
    Network::new(
        "toy5",
        vec![
            LayerDesc::conv("c1", 3, 32, 32, 3, 1, 1),
            LayerDesc::conv("c2", 32, 64, 32, 3, 2, 1),
            LayerDesc::conv("c3", 64, 64, 16, 3, 1, 1),
            LayerDesc::conv("c4", 64, 128, 16, 3, 2, 1),
            LayerDesc::conv("c5", 128, 128, 8, 1, 1, 0),
        ],
    )
    .unwrap()
}

fn oracle_quality(net: &Network, label: &str) -> Outcome {
    let start = Instant::now();
    let hw = HardwareConfig::with_chiplets(8);
    let model = CostModel::new(net, &hw, 64);
    let heuristic = match search_segment(&model, 0..5) {
        Ok(h) => h,
        Err(e) => return outcome(false, format!("{label}: heuristic failed: {e}")),
    };
    let oracle = exhaustive_search(&model, 0..5, u64::MAX).unwrap();
    let Some((_, best)) = oracle.best else {
        return outcome(false, format!("{label}: no feasible candidate"));
    };
    let rank = oracle.percentile_rank(heuristic.latency);
    let ratio = heuristic.latency / best;
    let (fast, time) = within(Duration::from_secs(300), start);
    outcome(
        rank <= 0.01 && ratio <= 1.05 && fast,
        format!(
            "{label}: rank {:.4}% of {} feasible, {ratio:.4}x optimum, {time}",
            rank * 100.0,
            oracle.feasible()
        ),
    )
}

fn dominance(reports: &mut Vec<CostReport>) -> Outcome {
    let start = Instant::now();
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for name in BUILTIN_NETWORKS {
        let net = builtin_network(name).unwrap();
        for c in [16, 64] {
            let hw = HardwareConfig::with_chiplets(c);
            let scope = schedule_scope(&net, &hw, 64);
            let seg = schedule_baseline(Method::Segmented, &net, &hw, 64);
            match (scope, seg) {
                (Ok(a), Ok(b)) => {
                    if a.report.t_system > b.report.t_system {
                        violations.push(format!("{name}@{c}"));
                    }
                    worst = worst.max(b.report.t_system / a.report.t_system);
                    reports.push(a.report);
                    reports.push(b.report);
                }
                (a, b) => violations.push(format!("{name}@{c}: {:?} {:?}", a.err(), b.err())),
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(600), start);
    outcome(
        violations.is_empty() && fast,
        format!("16 pairs, violations {violations:?}, best speedup {worst:.3}x, {time}"),
    )
}

fn trend(reports: &mut Vec<CostReport>) -> Outcome {
    let net = builtin_network("resnet34").unwrap();
    let thr = |method, c| {
        let r = schedule_baseline(method, &net, &HardwareConfig::with_chiplets(c), 64).unwrap();
        let t = r.report.throughput();
        (t, r.report)
    };
    let (s16, r1) = thr(Method::Merged, 16);
    let (s64, r2) = thr(Method::Merged, 64);
    let (q16, r3) = thr(Method::Sequential, 16);
    let (q64, r4) = thr(Method::Sequential, 64);
    reports.extend([r1, r2, r3, r4]);
    let scope_gain = s64 / s16;
    let seq_gain = q64 / q16;
    outcome(
        s64 >= s16 && seq_gain < scope_gain,
        format!("scope {s16:.1} -> {s64:.1} ({scope_gain:.3}x), sequential {q16:.1} -> {q64:.1} ({seq_gain:.3}x)"),
    )
}

fn full_pipeline_overflow() -> Outcome {
    let net = builtin_network("resnet152").unwrap();
    match schedule_baseline(Method::FullPipeline, &net, &HardwareConfig::with_chiplets(16), 64) {
        Err(Error::NoFeasibleSchedule(msg)) => outcome(msg.contains("weight buffer overflow"), msg),
        Err(e) => outcome(false, format!("unexpected error: {e}")),
        Ok(r) => outcome(false, format!("got a schedule, t_system {}", r.report.t_system)),
    }
}

fn balance(reports: &mut Vec<CostReport>) -> Outcome {
    let net = builtin_network("resnet152").unwrap();
    let hw = HardwareConfig::with_chiplets(256);
    let cv = |method| {
        let r = schedule_baseline(method, &net, &hw, 64).unwrap();
        let loads: Vec<f64> = r.report.cluster_loads().iter().map(|&m| m as f64).collect();
        (coefficient_of_variation(&loads), loads.len(), r.report)
    };
    let (scope, n_scope, a) = cv(Method::Merged);
    let (seg, n_seg, b) = cv(Method::Segmented);
    reports.extend([a, b]);
    outcome(
        scope < seg,
        format!("cv scope {scope:.4} over {n_scope} clusters, segmented {seg:.4} over {n_seg} layers"),
    )
}

fn identities(reports: &[CostReport]) -> Outcome {
    let broken: Vec<String> = reports
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.check_identities().err().map(|e| format!("#{i}: {e}")))
        .collect();
    outcome(broken.is_empty(), format!("{} reports, broken {broken:?}", reports.len()))
}

fn run_cli(args: &[&str], out: &Path, envs: &[(&str, &str)]) -> (i32, Vec<u8>) {
    let output = Command::new(env!("CARGO_BIN_EXE_mcm-sched"))
        .args(args)
        .arg("--out")
        .arg(out)
        .envs(envs.iter().copied())
        .output()
        .expect("spawn mcm-sched");
    (output.status.code().unwrap_or(-1), output.stdout)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let toy = tempfile::tempdir().unwrap();
    let toy_net = toy.path().join("toy5.json");
    let layers: Vec<serde_json::Value> = toy_five()
        .layers
        .iter()
        .map(|l| {
            serde_json::json!({
                "kind": "conv", "name": l.name, "c_in": l.c_in, "c_out": l.c_out,
                "h_in": l.h_in, "k": l.k_h, "stride": l.stride, "pad": l.padding
            })
        })
        .collect();
    fs::write(&toy_net, serde_json::json!({ "name": "toy5", "layers": layers }).to_string()).unwrap();
    let toy_net = toy_net.to_str().unwrap().to_string();

    let commands: Vec<Vec<&str>> = vec![
        vec!["schedule", "--net", "resnet50", "--chiplets", "64"],
        vec!["compare", "--net", "alexnet,resnet34", "--chiplets", "16,64"],
        vec!["validate", "--net", &toy_net, "--chiplets", "8"],
        vec!["breakdown", "--net", "resnet152", "--chiplets", "256"],
        vec!["count", "--net", "resnet152", "--chiplets", "256"],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (code_a, out_a) = run_cli(args, a.path(), &[]);
        let (code_b, out_b) = run_cli(args, b.path(), &[]);
        let files = snapshot(a.path());
        if code_a != 0 || code_a != code_b || out_a != out_b || files != snapshot(b.path()) {
            differing.push(format!("{} (exit {code_a}/{code_b})", args[0]));
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} commands run twice, differing {differing:?}", commands.len()),
    )
}

fn main() {
    let mut reports = Vec::new();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("comm volume table rows", table_rows()),
        ("pipeline closed form vs replay", pipeline_replay()),
        ("design space count vs brute force", counting()),
        ("oracle quality toy5", oracle_quality(&toy_five(), "toy5")),
        (
            "oracle quality alexnet convs",
            oracle_quality(&builtin_network("alexnet").unwrap(), "alexnet conv1-5"),
        ),
        ("merged dominates segmented", dominance(&mut reports)),
        ("resnet34 scaling trend", trend(&mut reports)),
        ("full pipeline overflow", full_pipeline_overflow()),
        ("cluster load balance resnet152@256", balance(&mut reports)),
        ("deterministic outputs", determinism()),
    ];
    let ids = identities(&reports);
    results.insert(3, ("report latency identities", ids));

    let mut failed = 0;
    for (name, o) in &results {
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
