//! The ten acceptance criteria. Each test prints one `PASS`/`FAIL` line.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hullforge::construction::{recheck_selection, ring_caps, select_epsilons, Schedule, SelectionState};
use hullforge::exact::{rat, to_f64};
use hullforge::geometry::{ArcSpec, ComplexPoint, Hole, PerforatedDisc};
use hullforge::harmonic_measure::{estimate, exact_annulus, verify_arc, verify_outer, TargetSet, WalkConfig};
use hullforge::hull_prober::{make_probe, two_constant_check, EvidenceTable, ProbeKind, ProbeSource};
use hullforge::pipeline::{assemble_counterexample, Bundle, RunConfig};
use hullforge::series::certify::{default_threshold, radius_witness, smoothness_constants};
use hullforge::series::LacunarySeries;
use hullforge::thinness::ThinnessCertificate;

const SEED: u64 = 1729;

fn report(n: u32, what: &str, ok: bool, detail: String) {
    println!("criterion {n:>2} {} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {what}: {detail}");
}

fn lacunary_bundle() -> &'static Bundle {
    static B: OnceLock<Bundle> = OnceLock::new();
    B.get_or_init(|| assemble_counterexample(&RunConfig::lacunary_default(SEED)).expect("lacunary build"))
}

fn file<T: serde::de::DeserializeOwned>(b: &Bundle, path: &str) -> T {
    serde_json::from_slice(&b.files[path]).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn selected_series(b: &Bundle) -> LacunarySeries {
    file::<SelectionState>(b, "selection.json").series()
}

#[test]
fn c01_annulus_oracle_suite() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let rho: f64 = rng.gen_range(0.5..2.0);
        let r_in = rho * rng.gen_range(0.05..0.5);
        let r = rng.gen_range(r_in * 1.05..rho * 0.95);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let domain = PerforatedDisc::new_general(
            rho,
            vec![Hole::new(ComplexPoint::new_unchecked(0.0, 0.0), r_in)],
            ArcSpec::new(0, 1).unwrap(),
        )
        .unwrap();
        let start = ComplexPoint::new_unchecked(r * theta.cos(), r * theta.sin());
        let cfg = WalkConfig { n_walks: 100_000, eps_boundary: 1e-6, max_steps: 1_000_000, rng_seed: SEED + case };
        let e = estimate(&domain, start, &TargetSet::OuterCircle, &cfg).unwrap();
        let exact = exact_annulus(r, r_in, rho).unwrap();
        let err = (e.value - exact).abs();
        worst = worst.max(err / (3.0 * e.stderr + 1e-4));
        if e.valid && err <= 3.0 * e.stderr + 1e-4 {
            within += 1;
        }
    }
    let el = t.elapsed();
    report(
        1,
        "harmonic-measure annulus oracles",
        within >= 19 && el <= Duration::from_secs(120),
        format!("{within}/20 within 3 stderr + 1e-4 (worst ratio {worst:.3}), {:.1}s", el.as_secs_f64()),
    );
}

fn thinness_and_config() -> (ThinnessCertificate, RunConfig) {
    let b = lacunary_bundle();
    (file(b, "thinness.json"), b.config.clone())
}

#[test]
fn c02_outer_measure_sweep() {
    let (thin, cfg) = thinness_and_config();
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut ok = cfg.symmetry_order == 4;
    for n in [1usize, 2, 5, 10] {
        let c = verify_outer(&thin, n, &cfg.mc.walk(10 * n as u64)).unwrap();
        let e = &c.details["estimate"];
        let (v, sd) = (e["value"].as_f64().unwrap(), e["stderr"].as_f64().unwrap());
        ok &= c.valid && v >= 0.5 - 3.0 * sd;
        ok &= lacunary_bundle().certificate(&c.id).map(|s| s.to_json()) == Some(c.to_json());
        lines.push(format!("n={n}: {v:.4}±{sd:.4}"));
    }
    let el = t.elapsed();
    ok &= el <= Duration::from_secs(300);
    report(2, "outer-circle measure >= 1/2", ok, format!("{} ({:.1}s)", lines.join(", "), el.as_secs_f64()));
}

#[test]
fn c03_arc_measure_sweep_and_symmetry() {
    let (thin, cfg) = thinness_and_config();
    let arc = file::<Schedule>(lacunary_bundle(), "schedule.json").arc;
    let bound = 1.0 / (2.0 * arc.n0 as f64);
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [1usize, 2, 5, 10] {
        let c = verify_arc(&thin, arc, n, &cfg.mc.walk(10 * n as u64 + 2)).unwrap();
        let e = &c.details["estimate"];
        let (v, sd) = (e["value"].as_f64().unwrap(), e["stderr"].as_f64().unwrap());
        let sym = c.details["symmetry_ok"].as_bool().unwrap();
        let z = c.details["worst_symmetry_z"].as_f64().unwrap();
        ok &= c.valid && sym && v >= bound - 3.0 * sd;
        lines.push(format!("n={n}: {v:.4}±{sd:.4} sym z={z:.2}"));
    }
    report(3, "arc measure >= 1/(2 n0) with rotated-arc symmetry", ok, lines.join(", "));
}

#[test]
fn c04_exact_selection_and_recheck() {
    let b = lacunary_bundle();
    let cfg = &b.config;
    let schedule: Schedule = file(b, "schedule.json");
    let caps = ring_caps(&schedule, 4).unwrap();
    let t = Instant::now();
    let sel = select_epsilons(&caps, 4, 3, &cfg.selection_options()).unwrap();
    let el = t.elapsed();
    let re = recheck_selection(&sel);
    let stored: SelectionState = file(b, "selection.json");
    let families: BTreeMap<&str, usize> = sel.audit.iter().fold(BTreeMap::new(), |mut m, e| {
        *m.entry(e.family.as_str()).or_default() += 1;
        m
    });
    let ok = el <= Duration::from_secs(60) && re.ok() && sel == stored && sel.options.k_max >= 1 << 16;
    report(
        4,
        "exact selection J=4 L=3 with independent re-check",
        ok,
        format!(
            "selected in {:.2}s; {} logged inequalities {:?}; {} checks, {} coefficient checks, {} violations",
            el.as_secs_f64(),
            sel.audit.len(),
            families,
            re.checked,
            re.coefficient_checks,
            re.violations.len()
        ),
    );
}

#[test]
fn c05_radius_witnesses_and_coefficient_paths() {
    let series = selected_series(lacunary_bundle());
    let mut ok = series.stages() == 4;
    let mut lines = Vec::new();
    let mut prev: Option<BigRational> = None;
    for j in 0..=4 {
        let rho = default_threshold(j);
        let w = radius_witness(&series, j, &rho, 1 << 20).unwrap();
        ok &= w.holds_for(&series, j) && w.root_ratio > 1.0;
        if let Some(p) = &prev {
            ok &= rho < *p;
        }
        lines.push(format!("k_{j}={} (rho'={})", w.k, rho));
        prev = Some(rho);
    }
    let last = prev.unwrap();
    ok &= last == rat(5, 4) && to_f64(&last) < 1.26;
    let div = series.coefficients_by_division(4, 200);
    let identical = (0..=200u64).all(|k| {
        let d = series.coefficient(k);
        div[k as usize] == d && div[k as usize].to_string() == d.to_string()
    });
    ok &= identical;
    report(
        5,
        "radius witnesses and two exact coefficient paths",
        ok,
        format!("{}; k<=200 identical: {identical}", lines.join(", ")),
    );
}

#[test]
fn c06_smoothness_certificate() {
    let series = selected_series(lacunary_bundle());
    let s = smoothness_constants(&series, 3, 1 << 16).unwrap();
    let tails_ok = s.tails.iter().all(|t| t.ok);
    let ok = s.valid && s.order == 3 && s.k_max == 1 << 16 && s.tails.len() == 4 && tails_ok;
    let cs: Vec<String> = s.constants.iter().map(|c| format!("{:.4e}", to_f64(c))).collect();
    report(6, "smoothness orders l<=3 exact to 2^16 plus tails", ok, format!("C_l = [{}], tails ok: {tails_ok}", cs.join(", ")));
}

#[test]
fn c07_pole_growth() {
    let series = selected_series(lacunary_bundle());
    let ap = series.pole_approach(2, 1, 2, &(4..=10).collect::<Vec<_>>()).unwrap();
    let ok = ap.monotone && ap.simple_pole_within(0.2);
    let rs: Vec<String> = ap.ratios.iter().map(|r| format!("{r:.4}")).collect();
    report(7, "simple-pole growth toward r_2 i", ok, format!("monotone {}, ratios [{}]", ap.monotone, rs.join(", ")));
}

#[test]
fn c08_liminf_on_placed_poles() {
    let cfg = RunConfig::pole_disc_default(SEED);
    let b = assemble_counterexample(&cfg).unwrap();
    let certs: Vec<_> = (1..=8).map(|n| b.certificate(&format!("liminf-n{n}")).cloned()).collect();
    let ok = cfg.pole_count == 8 && certs.iter().all(|c| c.as_ref().is_some_and(|c| c.valid));
    let worst = certs
        .iter()
        .flatten()
        .map(|c| c.margin.approx() / c.bound.approx())
        .fold(f64::INFINITY, f64::min);
    report(8, "liminf bound on 8 unit-disc poles", ok, format!("8 poles, smallest relative margin {worst:.4}"));
}

#[test]
fn c09_two_constant_reports_and_evidence() {
    let b = lacunary_bundle();
    let series = selected_series(b);
    let schedule: Schedule = file(b, "schedule.json");
    let source = ProbeSource::Lacunary(&series, b.config.anchor);
    let probe = make_probe(source, 3, None, ProbeKind::Plain).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for n in [1usize, 2] {
        let r = two_constant_check(&probe, source, &schedule, n, &b.config.mc.walk(100_000 + n as u64)).unwrap();
        ok &= r.pass && r.s0.is_finite();
        lines.push(format!("n={n}: s0={:.4} implied={:.4} slack={:.4}", r.s0, r.implied_bound, r.slack));
    }
    let ev: EvidenceTable = file(b, "evidence.json");
    let stages: Vec<usize> = ev.rows.iter().map(|r| r.stage).collect();
    let values: Vec<String> = ev.rows.iter().map(|r| format!("{:.4}", r.value)).collect();
    ok &= stages == [1, 2, 3] && ev.strictly_decreasing;
    ok &= ev.rows.windows(2).all(|w| w[1].value < w[0].value);
    report(
        9,
        "two-constant reports m=3 and decreasing hull evidence",
        ok,
        format!("{}; evidence [{}]", lines.join(", "), values.join(", ")),
    );
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn c10_deterministic_bundles() {
    let work = tempfile::tempdir().unwrap();
    let cfg_path = work.path().join("forge.json");
    std::fs::write(&cfg_path, serde_json::to_string(&RunConfig::lacunary_default(SEED)).unwrap()).unwrap();
    let mut trees = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = work.path().join(format!("run{i}"));
        let st = Command::new(env!("CARGO_BIN_EXE_hullforge"))
            .args(["--threads", threads, "construct", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        trees.push(tree(&out));
    }
    let svgs = trees[0].keys().filter(|k| k.ends_with(".svg")).count();
    let identical = trees[0] == trees[1];
    let certs = trees[0].keys().filter(|k| k.starts_with("certificates")).count();
    report(
        10,
        "byte-identical bundles across runs",
        identical && svgs >= 4 && certs >= 5,
        format!("{} files ({certs} certificates, {svgs} SVGs) identical across 1 and 4 threads: {identical}", trees[0].len()),
    );
}
