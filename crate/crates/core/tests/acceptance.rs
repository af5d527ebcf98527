//! End-to-end acceptance suite. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process fails if any does.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use poromorph::conditioner::{
    combine_gaussian, condition, evaluate_property, ConditionerConfig, PropertyKind, PropertyTarget,
};
use poromorph::generators::{
    neural_generate, save_weight_bundle, transposed_conv3d, GrfGenerator, GrfGeneratorConfig, LatentVector,
    NeuralGeneratorSpec, TransposedConvGeometry, VolumeGenerator, WeightBundle,
};
use poromorph::harness::{normalized_rmse, pearson_correlation};
use poromorph::imageops::{multi_otsu_cuts, squared_edt, Connectivity, Exterior, Histogram};
use poromorph::morphometrics::{euler_characteristic, euler_characteristic_with, porosity};
use poromorph::network::{
    extract_network, mass_balance_check, simulate_permeability, throat_conductance, BoundaryLabel, Domain,
    ExtractionParams, FlowAxis, FlowConfig, Pore, PoreNetwork, Throat,
};
use poromorph::VoxelVolume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Outcome of one criterion: pass flag plus a one-line summary.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

// 1 ------------------------------------------------------------------------

fn gradual_deformation_identities() -> Verdict {
    let d = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z1 = LatentVector::sample(d, &mut rng);
    let z2 = LatentVector::sample(d, &mut rng);
    let bits = |z: &LatentVector| z.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let at0 = combine_gaussian(&z1, &z2, 0.0).unwrap();
    let at_quarter = combine_gaussian(&z1, &z2, std::f64::consts::FRAC_PI_2).unwrap();
    let exact = bits(&at0) == bits(&z1) && bits(&at_quarter) == bits(&z2);

    let n = 10_000;
    let mut sum = vec![0.0f64; d];
    let mut sq = vec![0.0f64; d];
    for _ in 0..n {
        let a = LatentVector::sample(d, &mut rng);
        let b = LatentVector::sample(d, &mut rng);
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        let z = combine_gaussian(&a, &b, t).unwrap();
        for (i, v) in z.values().iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for i in 0..d {
        let mean = sum[i] / n as f64;
        let var = sq[i] / n as f64 - mean * mean;
        worst_mean = worst_mean.max(mean.abs());
        worst_var = worst_var.max((var - 1.0).abs());
    }
    verdict(
        exact && worst_mean <= 0.05 && worst_var <= 0.05,
        format!("endpoints bit-exact: {exact}; max |mean| {worst_mean:.4}, max |var-1| {worst_var:.4}"),
    )
}

// 2 ------------------------------------------------------------------------

fn porosity_conditioning() -> Verdict {
    let g = GrfGenerator::new(GrfGeneratorConfig::default()).unwrap();
    let (lo, hi) = (0.14, 0.30);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = ConditionerConfig::default();
    let mut achieved = Vec::new();
    let mut targets = Vec::new();
    let runs = 20;
    for i in 0..runs {
        let value = rng.random_range(lo..hi);
        let target = PropertyTarget::new(PropertyKind::Porosity, value).unwrap();
        let r = condition(
            &g,
            &target,
            &ConditionerConfig {
                rng_seed: 1000 + i as u64,
                ..cfg
            },
            None,
        )
        .unwrap();
        if r.converged {
            achieved.push(r.achieved.unwrap());
            targets.push(value);
        }
    }
    let rate = achieved.len() as f64 / runs as f64;
    let nrmse = if achieved.is_empty() {
        f64::INFINITY
    } else {
        normalized_rmse(&achieved, &targets, (lo, hi)).unwrap()
    };
    verdict(
        rate >= 0.9 && nrmse <= 0.05,
        format!("{}/{runs} converged, normalized RMSE {nrmse:.4}", achieved.len()),
    )
}

// 3 ------------------------------------------------------------------------

fn size_conditioning(kind: PropertyKind, ref_tol: f64, ref_width: f64, seed: u64) -> (bool, String) {
    let g = GrfGenerator::new(GrfGeneratorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    for _ in 0..50 {
        let v = g.generate(&LatentVector::sample(g.latent_dim(), &mut rng)).unwrap();
        if let Ok(x) = evaluate_property(&v, kind) {
            values.push(x);
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Keep the tolerance-to-range ratio of the Berea targets (±1e-7 m over
    // 1.5e-6 m for pores, ±5e-8 m over 6e-7 m for throats).
    let tol = ref_tol / ref_width * (hi - lo);
    let mut converged = 0;
    let mut monotone = 0;
    let runs = 10;
    for i in 0..runs {
        let value = rng.random_range(lo..hi);
        let target = PropertyTarget::with_tolerance(kind, value, tol).unwrap();
        let cfg = ConditionerConfig {
            rng_seed: seed * 100 + i as u64,
            ..Default::default()
        };
        let r = condition(&g, &target, &cfg, None).unwrap();
        converged += r.converged as usize;
        monotone += r.error_trace.windows(2).all(|w| w[1].error <= w[0].error) as usize;
    }
    let pass = converged as f64 >= 0.8 * runs as f64 && monotone == runs;
    (
        pass,
        format!(
            "{kind}: range [{lo:.3e}, {hi:.3e}] from {} samples, tol {tol:.2e}, {converged}/{runs} converged, {monotone}/{runs} monotone",
            values.len()
        ),
    )
}

fn pore_and_throat_conditioning() -> Verdict {
    let (p_ok, p) = size_conditioning(PropertyKind::MeanPoreSize, 1e-7, 1.1e-5 - 0.95e-5, 31);
    let (t_ok, t) = size_conditioning(PropertyKind::MeanThroatSize, 5e-8, 4.2e-6 - 3.6e-6, 32);
    verdict(p_ok && t_ok, format!("{p}; {t}"))
}

// 4 ------------------------------------------------------------------------

fn pore(id: usize, label: BoundaryLabel) -> Pore {
    Pore {
        id,
        center: [0.0, 0.0, id as f64 * 1e-5],
        inscribed_diameter: 2e-5,
        region_volume: 8e-15,
        boundary_label: label,
        faces: [false; 6],
    }
}

fn tube(a: usize, b: usize, d: f64, l: f64) -> Throat {
    Throat {
        pore_a: a,
        pore_b: b,
        diameter: d,
        length: l,
    }
}

fn net(pores: Vec<Pore>, throats: Vec<Throat>) -> PoreNetwork {
    PoreNetwork {
        axis: FlowAxis::Z,
        pores,
        throats,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn permeability_oracle() -> Verdict {
    use BoundaryLabel::*;
    let mu = 1e-3;
    let flow = FlowConfig {
        axis: FlowAxis::Z,
        viscosity: mu,
        delta_p: 1e4,
    };
    let (d, len, area) = (1e-5, 2e-4, 4e-8);
    let domain = Domain { length: len, area };
    let mut balance = Vec::new();
    let mut solve = |n: &PoreNetwork, domain: Domain| {
        let r = simulate_permeability(n, &flow, domain).unwrap();
        balance.push(mass_balance_check(&r, n));
        r.k_m2
    };

    let single = net(vec![pore(0, Inlet), pore(1, Outlet)], vec![tube(0, 1, d, len)]);
    let k1 = solve(&single, domain);
    let analytic = std::f64::consts::PI * d.powi(4) / (128.0 * area);
    let e_single = rel(k1, analytic);

    let parallel = net(
        vec![pore(0, Inlet), pore(1, Outlet), pore(2, Inlet), pore(3, Outlet)],
        vec![tube(0, 1, d, len), tube(2, 3, d, len)],
    );
    let e_parallel = rel(solve(&parallel, domain), 2.0 * k1);

    let segs = [(1.2e-5, 5e-5), (0.7e-5, 8e-5), (1.6e-5, 3e-5), (0.9e-5, 4e-5)];
    let series = net(
        (0..=segs.len())
            .map(|i| pore(i, if i == 0 { Inlet } else if i == segs.len() { Outlet } else { Interior }))
            .collect(),
        segs.iter().enumerate().map(|(i, &(d, l))| tube(i, i + 1, d, l)).collect(),
    );
    let g = 1.0 / segs.iter().map(|&(d, l)| 1.0 / throat_conductance(d, l, mu)).sum::<f64>();
    let e_series = rel(solve(&series, domain), g * mu * len / area);

    // Two parallel branches joined at interior nodes, plus a dead end.
    let loopy = net(
        vec![pore(0, Inlet), pore(1, Interior), pore(2, Interior), pore(3, Interior), pore(4, Outlet), pore(5, Interior)],
        vec![
            tube(0, 1, 1e-5, 3e-5),
            tube(1, 2, 0.6e-5, 4e-5),
            tube(1, 3, 1.3e-5, 6e-5),
            tube(2, 3, 0.8e-5, 2e-5),
            tube(2, 4, 1.1e-5, 5e-5),
            tube(3, 4, 0.5e-5, 3e-5),
            tube(3, 5, 0.9e-5, 1e-5),
        ],
    );
    solve(&loopy, domain);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grf = GrfGenerator::new(GrfGeneratorConfig {
        threshold: 0.3,
        ..Default::default()
    })
    .unwrap();
    let v = grf.generate(&LatentVector::sample(64, &mut rng)).unwrap();
    let extracted = extract_network(&v, &ExtractionParams::default()).unwrap();
    solve(&extracted, Domain::from_volume(&v, FlowAxis::Z));

    let worst_balance = balance.iter().copied().fold(0.0, f64::max);
    verdict(
        e_single <= 0.01 && e_parallel <= 1e-9 && e_series <= 1e-9 && worst_balance <= 1e-6,
        format!(
            "single tube rel err {e_single:.2e}, parallel {e_parallel:.2e}, series {e_series:.2e}, worst mass balance {worst_balance:.2e} over {} fixtures",
            balance.len()
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn euler_exactness() -> Verdict {
    let vol = |dims: [usize; 3], p: Vec<u8>| VoxelVolume::binary(dims, 1.0, p).unwrap();
    let single = euler_characteristic(&vol([1; 3], vec![1])).unwrap();
    let mut ring = vec![1u8; 9];
    ring[4] = 0;
    let ring_chi = euler_characteristic(&vol([3, 3, 1], ring)).unwrap();
    let mut shell = vec![1u8; 27];
    shell[13] = 0;
    let shell_chi = euler_characteristic(&vol([3; 3], shell)).unwrap();
    let named = single == 1 && ring_chi == 0 && shell_chi == 2;

    let mut mismatches = 0;
    let mut checked = 0;
    let mut check = |dims: [usize; 3], p: Vec<u8>| {
        let v = vol(dims, p.clone());
        checked += 1;
        if euler_characteristic_with(&v, Connectivity::Face6).unwrap() != euler_face6_by_duality(&p, dims)
            || euler_characteristic_with(&v, Connectivity::Full26).unwrap() != euler_closed_cubes(&p, dims)
        {
            mismatches += 1;
        }
    };
    for mask in 0u32..256 {
        check([2; 3], (0..8).map(|b| ((mask >> b) & 1) as u8).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p = rng.random_range(0.1..0.9);
        check([4; 3], random_phase(&mut rng, [4; 3], p));
    }
    verdict(
        named && mismatches == 0,
        format!(
            "voxel {single}, ring {ring_chi}, shell {shell_chi}; {mismatches} mismatches over {checked} grids (both connectivities)"
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn edt_and_otsu_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut edt_bad = 0;
    for _ in 0..100 {
        let dims = [rng.random_range(1..=12), rng.random_range(1..=12), rng.random_range(1..=12)];
        let p = rng.random_range(0.3..0.97);
        let phase = random_phase(&mut rng, dims, p);
        if squared_edt(&phase, dims, Exterior::Solid).unwrap() != edt_brute_squared(&phase, dims) {
            edt_bad += 1;
        }
    }
    let mut otsu_bad = 0;
    for _ in 0..100 {
        let counts: Vec<u64> = (0..64)
            .map(|_| if rng.random_bool(0.2) { 0 } else { rng.random_range(0..1000) })
            .collect();
        let hist = Histogram {
            bin_edges: (0..=64).map(f64::from).collect(),
            counts: counts.clone(),
        };
        let ours = multi_otsu_cuts(&hist, 2).ok().map(|c| c[0]);
        if ours != otsu_exact_cut(&counts) {
            otsu_bad += 1;
        }
    }
    verdict(
        edt_bad == 0 && otsu_bad == 0,
        format!("EDT mismatches {edt_bad}/100, Otsu mismatches {otsu_bad}/100"),
    )
}

// 7 ------------------------------------------------------------------------

fn porosity_permeability_trend() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut phi = Vec::new();
    let mut k = Vec::new();
    let n = 100;
    for i in 0..n {
        // Every sample spans at least a dozen correlation lengths; the
        // threshold spread widens the porosity range.
        let cfg = GrfGeneratorConfig {
            correlation_length: rng.random_range(3.0..5.0),
            threshold: rng.random_range(0.3..1.0),
            seed_spectrum: 0x5eed + i,
            ..Default::default()
        };
        let g = GrfGenerator::new(cfg).unwrap();
        let v = g.generate(&LatentVector::sample(cfg.mode_count, &mut rng)).unwrap();
        if let Ok(kv) = evaluate_property(&v, PropertyKind::AbsolutePermeability) {
            phi.push(porosity(&v).unwrap());
            k.push(kv);
        }
    }
    let r = if phi.len() >= 2 {
        pearson_correlation(&phi, &k).unwrap()
    } else {
        None
    };
    verdict(
        r.is_some_and(|r| r > 0.5),
        format!("pearson(phi, k) = {r:.3?} over {} percolating of {n} samples", phi.len()),
    )
}

// 8 ------------------------------------------------------------------------

fn neural_forward_engine() -> Verdict {
    let spec = NeuralGeneratorSpec::default();
    let bundle = WeightBundle::random(&spec, 8);
    let valid = bundle.validate().is_ok() && bundle.validate_against(&spec).is_ok();
    let params = bundle.parameter_count();
    let reloaded = WeightBundle::from_bytes(&bundle.to_bytes()).is_ok_and(|b| b == bundle);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z = LatentVector::sample(20, &mut rng);
    let a = neural_generate(&z, &bundle, &spec).unwrap();
    let b = neural_generate(&z, &bundle, &spec).unwrap();
    let va = a.as_continuous().unwrap();
    let bounded = va.iter().all(|v| (-1.0..=1.0).contains(v));
    let deterministic = va
        .iter()
        .zip(b.as_continuous().unwrap())
        .all(|(x, y)| x.to_bits() == y.to_bits());

    let geom = TransposedConvGeometry {
        kernel: 4,
        stride: 2,
        padding: 1,
    };
    let mut cases = 0;
    let mut worst = 0.0f32;
    for d in 1..=3 {
        for h in 1..=3 {
            for w in 1..=3 {
                for (cin, cout) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
                    let weight: Vec<f32> = (0..cin * cout * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let bias: Vec<f32> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n = cin * d * h * w;
                    // Every unit impulse, then one dense input.
                    let mut inputs: Vec<Vec<f32>> = (0..n)
                        .map(|j| (0..n).map(|i| (i == j) as u8 as f32).collect())
                        .collect();
                    inputs.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
                    for x in inputs {
                        let (ours, shape) = transposed_conv3d(&x, [cin, d, h, w], &weight, &bias, geom).unwrap();
                        let (oracle, oshape) = tconv_scatter(&x, [cin, d, h, w], &weight, &bias, geom);
                        cases += 1;
                        if shape != oshape {
                            worst = f32::INFINITY;
                            continue;
                        }
                        for (p, q) in ours.iter().zip(&oracle) {
                            worst = worst.max((p - q).abs());
                        }
                    }
                }
            }
        }
    }
    let conv_ok = worst <= 1e-5;
    verdict(
        valid && params == 5_769_889 && reloaded && a.dims() == [128; 3] && bounded && deterministic && conv_ok,
        format!(
            "{params} parameters, validates {valid}, WB1 round trip {reloaded}, output {:?} bounded {bounded}, bit-deterministic {deterministic}; transposed conv {cases} cases max abs diff {worst:.1e}",
            a.dims()
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_poromorph"))
        .args(args)
        .env_remove("POROMORPH_JOBS")
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

/// Every non-manifest file under `root`, with its bytes.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_string_lossy().ends_with("manifest.json") {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_session(root: &Path, weights: &Path, spec: &Path, target: &Path, scan: &Path) -> Vec<i32> {
    let s = |p: PathBuf| p.to_string_lossy().into_owned();
    let gen = s(root.join("gen"));
    let sample = s(root.join("gen/sample_0000.vvol"));
    vec![
        cli(&["generate", "--size", "24", "--correlation-length", "5", "--threshold", "0.3", "--seed", "9", "--count", "4", "--out", &gen]),
        cli(&["generate", "--backend", "neural", "--weights", &s(weights.into()), "--spec", &s(spec.into()), "--seed", "9", "--count", "2", "--postprocess", "--out", &s(root.join("neural"))]),
        cli(&["analyze", &sample, "--out", &s(root.join("analyze.json"))]),
        cli(&["network", &sample, "--out", &s(root.join("network.json"))]),
        cli(&["perm", &sample, "--axis", "x", "--out", &s(root.join("perm.json"))]),
        cli(&["condition", "--size", "24", "--correlation-length", "5", "--target", &s(target.into()), "--seed", "9", "--max-iters", "8", "--out", &s(root.join("cond"))]),
        cli(&["evaluate", &gen, "--out", &s(root.join("eval"))]),
        cli(&["ingest", &s(scan.into()), "--size", "8", "--stride", "5", "--out", &s(root.join("ingest"))]),
    ]
}

fn cli_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("inputs");
    fs::create_dir_all(&inputs).unwrap();
    let spec = NeuralGeneratorSpec {
        latent_dim: 6,
        base_size: 4,
        channels: vec![8, 4, 1],
        ..Default::default()
    };
    let spec_path = inputs.join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let weights = inputs.join("toy.wb1");
    save_weight_bundle(&WeightBundle::random(&spec, 9), &weights).unwrap();
    let target = inputs.join("target.json");
    fs::write(&target, r#"{"kind":"porosity","value":0.2,"tolerance":0.01}"#).unwrap();
    let scan = inputs.join("scan.vvol");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let scan_vol = VoxelVolume::binary([18, 18, 18], 2.25, random_phase(&mut rng, [18; 3], 0.3)).unwrap();
    poromorph::volume::save_volume(&scan_vol, &scan).unwrap();

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let codes_a = cli_session(&a, &weights, &spec_path, &target, &scan);
    let codes_b = cli_session(&b, &weights, &spec_path, &target, &scan);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let all_ran = codes_a.iter().all(|&c| c == 0 || c == 3);
    let identical = codes_a == codes_b && sa == sb;
    verdict(
        all_ran && identical && !sa.is_empty(),
        format!("{} commands, exit codes {codes_a:?}; {} result files byte-identical: {identical}", codes_a.len(), sa.len()),
    )
}

// --------------------------------------------------------------------------

fn main() {
    let criteria: [(u8, &str, u64, fn() -> Verdict); 9] = [
        (1, "gradual deformation identities", 5, gradual_deformation_identities),
        (2, "porosity conditioning", 600, porosity_conditioning),
        (3, "pore and throat size conditioning", 1800, pore_and_throat_conditioning),
        (4, "permeability solver oracle", 1, permeability_oracle),
        (5, "Euler characteristic exactness", 60, euler_exactness),
        (6, "EDT and multi-Otsu oracles", 120, edt_and_otsu_oracles),
        (7, "porosity-permeability trend", 1200, porosity_permeability_trend),
        (8, "neural forward engine", 120, neural_forward_engine),
        (9, "CLI reproducibility", 600, cli_reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let on_time = within_budget(elapsed, Duration::from_secs(budget));
        let pass = v.pass && on_time;
        failed += !pass as usize;
        println!(
            "criterion {id} [{}] {name}: {} ({:.2}s of {budget}s budget)",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
