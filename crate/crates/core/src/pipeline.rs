//! End-to-end builds from a `forge.json` run configuration, and the bundle
//! directory format (manifest with hashes, one JSON per certificate, plots).

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::certificate::{sha256_hex, Certificate, Quantity};
use crate::construction::{
    build_hull_schedule, combine_caps, recheck_selection, ring_caps, select_epsilons, Schedule, SelectionOptions,
    SelectionState,
};
use crate::error::{Error, Result};
use crate::exact::{serde_rat_vec, RationalRepr};
use crate::geometry::{
    placed_poles, select_rho_and_arc, ring_poles, ArcSpec, ComplexPoint, DomainSpec, Frame, Hole, PlacementData,
    PerforatedDisc, Turn,
};
use crate::harmonic_measure::{verify_outer, verify_arc, WalkConfig};
use crate::hull_prober::{hull_evidence, make_probe, stage_holes, two_constant_check, ProbeKind, ProbeSource};
use crate::series::certify::smoothness_constants;
use crate::series::{eval_fn, liminf_check, LacunarySeries, PoleSeries};
use crate::svg;
use crate::thinness::{build_potential, choose_disc_radii, verify_thinness};

pub const BUNDLE_FORMAT: &str = "hullforge-bundle/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pole series on a general domain pair with placement caps.
    Poles,
    /// Lacunary series on the unit disc, smooth up to the boundary.
    Lacunary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainPair {
    pub d1: DomainSpec,
    pub d2: DomainSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_walks: u64,
    #[serde(default = "default_eps")]
    pub eps_boundary: f64,
    #[serde(default = "default_steps")]
    pub max_steps: u64,
    pub seed: u64,
}

fn default_eps() -> f64 {
    1e-6
}

fn default_steps() -> u64 {
    1_000_000
}

impl McConfig {
    pub fn walk(&self, offset: u64) -> WalkConfig {
        WalkConfig {
            n_walks: self.n_walks,
            eps_boundary: self.eps_boundary,
            max_steps: self.max_steps,
            rng_seed: self.seed.wrapping_add(offset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Probe stage m (rings 0..=m in lacunary mode, poles 1..=m in poles mode).
    pub stage: usize,
    /// Evaluation stages n < m for the two-constant check.
    pub eval_stages: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub domains: DomainPair,
    /// The boundary point a whose graph point is shown to lie in the hull.
    pub anchor: ComplexPoint,
    /// User assertion that D_2 minus D_1 has a density point in D_2.
    #[serde(default = "yes")]
    pub density_point_asserted: bool,
    /// J: rings 0..=J (lacunary mode).
    #[serde(default = "default_stages")]
    pub stages: usize,
    /// Number of placed poles (poles mode).
    #[serde(default = "default_pole_count")]
    pub pole_count: usize,
    #[serde(default = "default_order")]
    pub smooth_order: usize,
    #[serde(default = "default_n0")]
    pub symmetry_order: u64,
    #[serde(default = "default_trials")]
    pub rho_trials: Vec<f64>,
    /// Radius of the discs around pole copies that the circle must avoid.
    #[serde(default = "default_forbidden")]
    pub forbidden_radius: f64,
    #[serde(default = "default_measure_stages")]
    pub measure_stages: Vec<usize>,
    #[serde(default)]
    pub selection: SelectionConfig,
    pub mc: McConfig,
    pub probe: ProbeConfig,
    #[serde(default = "default_placement_samples")]
    pub placement_samples: usize,
    #[serde(default = "default_out")]
    pub output_dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub k_max: u64,
    pub witness_scan_max: u64,
    pub halving_limit: u32,
    pub stage_limit: usize,
    /// Also shrink ε_n until the normalized probe values at the anchor decrease.
    pub evidence_decay: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k_max: 1 << 16,
            witness_scan_max: 1 << 20,
            halving_limit: 256,
            stage_limit: 8,
            evidence_decay: true,
        }
    }
}

fn yes() -> bool {
    true
}
fn default_stages() -> usize {
    4
}
fn default_pole_count() -> usize {
    8
}
fn default_order() -> usize {
    3
}
fn default_n0() -> u64 {
    4
}
fn default_trials() -> Vec<f64> {
    (0..12).map(|i| 0.375 * 0.5f64.powi(i)).collect()
}
fn default_forbidden() -> f64 {
    1.0 / 64.0
}
fn default_measure_stages() -> Vec<usize> {
    vec![1, 2, 5, 10]
}
fn default_placement_samples() -> usize {
    1024
}
fn default_out() -> String {
    "out".into()
}

impl RunConfig {
    pub fn lacunary_default(seed: u64) -> Self {
        RunConfig {
            mode: Mode::Lacunary,
            domains: DomainPair { d1: DomainSpec::UnitDisc, d2: DomainSpec::Plane },
            anchor: ComplexPoint::new_unchecked(1.0, 0.0),
            density_point_asserted: true,
            stages: default_stages(),
            pole_count: default_pole_count(),
            smooth_order: default_order(),
            symmetry_order: default_n0(),
            rho_trials: default_trials(),
            forbidden_radius: default_forbidden(),
            measure_stages: default_measure_stages(),
            selection: SelectionConfig::default(),
            mc: McConfig { n_walks: 100_000, eps_boundary: 1e-6, max_steps: 1_000_000, seed },
            probe: ProbeConfig { stage: 3, eval_stages: vec![1, 2] },
            placement_samples: default_placement_samples(),
            output_dir: default_out(),
        }
    }

    pub fn pole_disc_default(seed: u64) -> Self {
        let t = std::f64::consts::PI / 8.0;
        RunConfig {
            mode: Mode::Poles,
            anchor: ComplexPoint::new_unchecked(t.cos(), t.sin()),
            pole_count: 8,
            probe: ProbeConfig { stage: 8, eval_stages: vec![1, 2] },
            ..Self::lacunary_default(seed)
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.domains.d1.validate().map_err(|e| Error::Config(format!("d1: {e}")))?;
        self.domains.d2.validate().map_err(|e| Error::Config(format!("d2: {e}")))?;
        if !self.density_point_asserted {
            return bad("the density-point hypothesis must be asserted".into());
        }
        if !self.anchor.is_finite() {
            return bad("anchor must be finite".into());
        }
        if self.mc.n_walks < 100 {
            return bad(format!("mc.n_walks = {} is below the minimum 100", self.mc.n_walks));
        }
        if !(self.mc.eps_boundary > 0.0) || self.mc.max_steps == 0 {
            return bad("mc.eps_boundary and mc.max_steps must be positive".into());
        }
        if self.symmetry_order == 0 || self.symmetry_order > 64 {
            return bad("symmetry_order must be in 1..=64".into());
        }
        if self.rho_trials.is_empty()
            || self.rho_trials.iter().any(|r| !(*r > 0.0) || !r.is_finite())
            || self.rho_trials.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("rho_trials must be positive and strictly decreasing".into());
        }
        if !(self.forbidden_radius >= 0.0) {
            return bad("forbidden_radius must be non-negative".into());
        }
        if self.measure_stages.is_empty() || self.measure_stages.contains(&0) {
            return bad("measure_stages must be non-empty and positive".into());
        }
        if self.probe.eval_stages.iter().any(|&n| n >= self.probe.stage) {
            return bad("probe.eval_stages must be below probe.stage".into());
        }
        if self.placement_samples < 2 {
            return bad("placement_samples must be at least 2".into());
        }
        match self.mode {
            Mode::Lacunary => {
                if self.domains.d1 != DomainSpec::UnitDisc {
                    return bad("lacunary mode works on the unit disc".into());
                }
                if self.stages > self.selection.stage_limit {
                    return bad(format!("stages = {} exceeds selection.stage_limit", self.stages));
                }
                if self.probe.stage > self.stages || self.probe.eval_stages.contains(&0) {
                    return bad("probe stages must lie in 1..=stages".into());
                }
                if self.selection.k_max < (1 << self.stages) {
                    return bad("selection.k_max must be at least 2^stages".into());
                }
            }
            Mode::Poles => {
                if self.pole_count == 0 || self.pole_count > 4096 {
                    return bad("pole_count must be in 1..=4096".into());
                }
                if self.probe.stage > self.pole_count || self.probe.eval_stages.contains(&0) {
                    return bad("probe stages must lie in 1..=pole_count".into());
                }
            }
        }
        let a = self.anchor.c();
        if self.domains.d1.boundary_distance(a) > 1e-9 || self.domains.d1.contains(a) {
            return bad("anchor must lie on the boundary of d1".into());
        }
        if !self.domains.d2.contains(a) {
            return bad("anchor must lie in d2".into());
        }
        Ok(())
    }

    pub fn selection_options(&self) -> SelectionOptions {
        SelectionOptions {
            k_max: self.selection.k_max,
            witness_scan_max: self.selection.witness_scan_max,
            halving_limit: self.selection.halving_limit,
            stage_limit: self.selection.stage_limit,
            evidence_anchor: self.selection.evidence_decay.then_some(self.anchor),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesFile {
    Lacunary {
        #[serde(with = "serde_rat_vec")]
        eps: Vec<BigRational>,
        anchor: ComplexPoint,
        poles: PoleSeries,
    },
    Poles {
        series: PoleSeries,
    },
}

impl SeriesFile {
    pub fn lacunary(&self) -> Option<LacunarySeries> {
        match self {
            SeriesFile::Lacunary { eps, .. } => LacunarySeries::new(eps.clone()).ok(),
            SeriesFile::Poles { .. } => None,
        }
    }

    pub fn pole_series(&self) -> &PoleSeries {
        match self {
            SeriesFile::Lacunary { poles, .. } => poles,
            SeriesFile::Poles { series } => series,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: String,
    pub valid: bool,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub mode: Mode,
    pub valid: bool,
    /// Ids of invalid certificates, or the stage that aborted.
    pub failed: Vec<String>,
    pub certificates: Vec<ManifestEntry>,
    /// Whether the hull evidence table decreases; evidence only, not part of `valid`.
    pub evidence_strictly_decreasing: Option<bool>,
    /// path -> sha256 of every other file in the bundle.
    pub files: BTreeMap<String, String>,
}

/// A complete bundle held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub config: RunConfig,
    pub certificates: Vec<Certificate>,
    pub files: BTreeMap<String, Vec<u8>>,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn valid(&self) -> bool {
        self.manifest.valid
    }

    pub fn certificate(&self, id: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.id == id)
    }
}

struct Builder {
    certs: Vec<Certificate>,
    files: BTreeMap<String, Vec<u8>>,
    aborted: Option<String>,
    evidence_decreasing: Option<bool>,
}

impl Builder {
    fn push(&mut self, c: Certificate) -> bool {
        let ok = c.valid;
        self.certs.push(c);
        ok
    }

    fn json(&mut self, path: &str, v: &impl Serialize) {
        let mut s = serde_json::to_string_pretty(v).expect("bundle data serializes");
        s.push('\n');
        self.files.insert(path.into(), s.into_bytes());
    }

    fn text(&mut self, path: &str, s: String) {
        self.files.insert(path.into(), s.into_bytes());
    }

    fn finish(mut self, config: &RunConfig) -> Bundle {
        self.json("config.json", config);
        let mut files = self.files;
        let mut entries = Vec::new();
        for c in &self.certs {
            let file = format!("certificates/{}.json", c.id);
            files.insert(file.clone(), c.to_json().into_bytes());
            entries.push(ManifestEntry { id: c.id.clone(), kind: c.kind.clone(), valid: c.valid, file });
        }
        let mut failed: Vec<String> = self.certs.iter().filter(|c| !c.valid).map(|c| c.id.clone()).collect();
        if let Some(stage) = self.aborted {
            failed.push(stage);
        }
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            mode: config.mode,
            valid: failed.is_empty(),
            failed,
            certificates: entries,
            evidence_strictly_decreasing: self.evidence_decreasing,
            files: files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect(),
        };
        Bundle { config: config.clone(), certificates: self.certs, files, manifest }
    }
}

/// Frame at the anchor turning the inward direction to the middle of arc 0.
fn anchor_frame(cfg: &RunConfig) -> Result<Frame> {
    let a = cfg.anchor.c();
    let inward = cfg.domains.d1.inward_direction(a)?;
    let t_in = if (inward + 1.0).norm() < 1e-15 {
        Turn::new(1, 2)?
    } else {
        Turn::approximate(inward.arg(), 1 << 16)
    };
    let mid = Turn::new(1, 2 * cfg.symmetry_order)?;
    Ok(Frame { origin: cfg.anchor, turn: mid.add(&t_in.neg()) })
}

struct Geometry {
    frame: Frame,
    local: Vec<ComplexPoint>,
    rho: f64,
    arc: ArcSpec,
}

fn geometry_stage(cfg: &RunConfig, poles: &[ComplexPoint], b: &mut Builder) -> Result<Geometry> {
    let frame = anchor_frame(cfg)?;
    let local: Vec<ComplexPoint> = poles.iter().map(|p| frame.to_local(p.c()).into()).collect();
    let n0 = cfg.symmetry_order;
    let mut forbidden = Vec::new();
    for p in &local {
        for k in 1..=n0 {
            forbidden.push(Hole::new((Turn::new(k as i64, n0)?.unit() * p.c()).into(), cfg.forbidden_radius));
        }
    }
    let d1 = frame.local_domain(&cfg.domains.d1);
    let d2 = frame.local_domain(&cfg.domains.d2);
    let ra = select_rho_and_arc(&d1, &d2, &forbidden, &cfg.rho_trials, n0)?;
    let mut c = Certificate::new(
        "domain",
        "geometry",
        "closed disc of radius rho at the anchor lies in d2, its circle avoids the pole neighbourhoods, and the arc J lies in d1",
    )
    .input("anchor", cfg.anchor)
    .input("frame", frame)
    .input("rho_trials", &cfg.rho_trials)
    .input("forbidden_radius", cfg.forbidden_radius);
    c.method = "first admissible trial radius; arc containment by boundary distance sampling".into();
    c.valid = true;
    c.value = Quantity::float(ra.rho);
    c.details = serde_json::json!({ "rho": ra.rho, "arc": ra.arc });
    b.push(c);
    Ok(Geometry { frame, local, rho: ra.rho, arc: ra.arc })
}

/// Thinness, both measure bounds, and the hull schedule. None when a certificate failed.
fn hull_stage(cfg: &RunConfig, poles: &[ComplexPoint], g: &Geometry, b: &mut Builder) -> Result<Option<Schedule>> {
    let n0 = cfg.symmetry_order;
    let interior: Vec<ComplexPoint> = g.local.iter().filter(|p| p.norm() < g.rho).cloned().collect();
    let potential = if interior.is_empty() { None } else { Some(build_potential(&interior, n0, g.rho)?) };
    let radii = choose_disc_radii(potential.as_ref(), &g.local, n0, g.rho, g.local.len())?;
    let thin = verify_thinness(potential.as_ref(), &radii);
    b.json("thinness.json", &thin);
    if !b.push(thin.to_certificate()) {
        return Ok(None);
    }
    let mut measures = Vec::new();
    let mut ok = true;
    for &n in &cfg.measure_stages {
        let n = n.min(poles.len());
        if measures.iter().any(|c: &Certificate| c.id == format!("outer-n{n}")) {
            continue;
        }
        let e4 = verify_outer(&thin, n, &cfg.mc.walk(10 * n as u64))?;
        let e5 = verify_arc(&thin, g.arc, n, &cfg.mc.walk(10 * n as u64 + 2))?;
        ok &= e4.valid && e5.valid;
        measures.push(e4);
        measures.push(e5);
    }
    for c in &measures {
        b.push(c.clone());
    }
    if !ok {
        return Ok(None);
    }
    let schedule = build_hull_schedule(poles, g.frame, g.arc, &thin, &measures)?;
    Ok(Some(schedule))
}

/// |f_n| <= 2 C_1 at grid points of the stage-n perforated disc.
fn fn_bound_certificate(series: &PoleSeries, schedule: &Schedule, stages: &[usize]) -> Certificate {
    let c1 = crate::exact::to_f64(&schedule.c1);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let grid = 64;
    for &n in stages {
        let n = n.min(series.len());
        let Ok(domain) = PerforatedDisc::new(schedule.rho, stage_holes(schedule, n), schedule.arc) else {
            failures.push(format!("stage {n}: domain"));
            continue;
        };
        for i in 0..=grid {
            for j in 0..=grid {
                let w = Complex64::new(
                    schedule.rho * (2.0 * i as f64 / grid as f64 - 1.0),
                    schedule.rho * (2.0 * j as f64 / grid as f64 - 1.0),
                );
                if !domain.contains(w) {
                    continue;
                }
                let z = schedule.frame.to_global(w);
                match eval_fn(series, n, z.into()) {
                    Ok(v) => {
                        checked += 1;
                        worst = worst.max(v.norm());
                    }
                    Err(e) => failures.push(format!("stage {n}: {e}")),
                }
            }
        }
    }
    let mut c = Certificate::new(
        "fn-bound",
        "fn_bound",
        "|f_n| <= 2 C_1 on the stage-n perforated disc (sampled)",
    )
    .input("stages", stages)
    .input("grid", grid);
    c.method = "evaluation of the anchored partial sums on a square grid clipped to the domain".into();
    c.valid = failures.is_empty() && worst <= 2.0 * c1 && checked > 0;
    c.value = Quantity::float(worst);
    c.bound = Quantity::float(2.0 * c1);
    c.margin = Quantity::float(2.0 * c1 - worst);
    c.details = serde_json::json!({ "points": checked, "failures": failures });
    c
}

fn coefficient_cap_certificate(series: &LacunarySeries, schedule: &Schedule) -> Certificate {
    let mut worst: Option<(usize, BigRational)> = None;
    let mut ok = true;
    for j in 0..=series.stages() {
        let nj = 1usize << j;
        // |c| = ε_j r_j / (2^j r_j^{2^j}) for every pole of ring j
        let c = &series.eps()[j] * LacunarySeries::radius(j) / (LacunarySeries::pole_power(j) * crate::exact::int(nj as i64));
        for n in nj..2 * nj {
            let m = &schedule.caps[n - 1] - &c;
            ok &= m >= BigRational::from_integer(0.into());
            if worst.as_ref().map(|w| m < w.1).unwrap_or(true) {
                worst = Some((n, m));
            }
        }
    }
    let mut c = Certificate::new("coefficient-caps", "coefficient_caps", "|c_n| <= R_n for every pole of the series");
    c.method = "exact residues of the ring terms against the hull caps".into();
    c.valid = ok;
    if let Some((n, m)) = worst {
        c.margin = Quantity::exact(&m);
        c.details = serde_json::json!({ "tightest_index": n });
    }
    c
}

fn plots(b: &mut Builder, g: &Geometry, schedule: &Schedule, series: &PoleSeries, coeffs: &[(f64, f64)], evidence: &[(f64, f64)], probe_stage_poles: usize) {
    let holes = stage_holes(schedule, probe_stage_poles);
    b.text("plots/domain.svg", svg::domain_svg(g.rho, &holes, g.arc));
    b.text("plots/poles.svg", svg::poles_svg(&series.poles, series.anchor, g.rho));
    b.text("plots/coeffs.svg", svg::decay_svg("log10 coefficient modulus", coeffs));
    b.text("plots/probe.svg", svg::decay_svg("probe value at the anchor", evidence));
}

fn probe_stage_certs(
    cfg: &RunConfig,
    source: ProbeSource,
    schedule: &Schedule,
    b: &mut Builder,
) -> Result<Vec<(f64, f64)>> {
    let max = source.max_stage();
    let stages: Vec<usize> = (source.min_stage().max(1)..=cfg.probe.stage.min(max)).collect();
    let table = hull_evidence(source, &stages)?;
    b.text("evidence.csv", table.to_csv());
    b.json("evidence.json", &table);
    b.evidence_decreasing = Some(table.strictly_decreasing);
    let probe = make_probe(source, cfg.probe.stage, None, ProbeKind::Plain)?;
    for &n in &cfg.probe.eval_stages {
        let r = two_constant_check(&probe, source, schedule, n, &cfg.mc.walk(100_000 + n as u64))?;
        b.push(r.to_certificate());
    }
    Ok(table.rows.iter().map(|r| (r.stage as f64, r.value)).collect())
}

fn assemble_lacunary(cfg: &RunConfig, b: &mut Builder) -> Result<()> {
    let poles = ring_poles(cfg.stages)?;
    let g = geometry_stage(cfg, &poles, b)?;
    let Some(schedule) = hull_stage(cfg, &poles, &g, b)? else { return Ok(()) };
    b.json("schedule.json", &schedule);
    b.push(schedule.to_certificate());
    let caps = ring_caps(&schedule, cfg.stages)?;
    let sel: SelectionState = select_epsilons(&caps, cfg.stages, cfg.smooth_order, &cfg.selection_options())?;
    b.json("selection.json", &sel);
    b.push(sel.to_certificate());
    let re = recheck_selection(&sel);
    let mut rc = Certificate::new(
        "recheck",
        "recheck",
        "an independent exact checker confirms every logged inequality of the selection",
    );
    rc.method = "long division for small k, termwise block envelopes above, exact tails".into();
    rc.valid = re.ok();
    rc.value = Quantity::float(re.violations.len() as f64);
    rc.details = serde_json::to_value(&re).expect("report serializes");
    rc.references.push(sel.to_certificate().hash());
    b.push(rc);
    let series = sel.series();
    for w in &sel.witnesses {
        b.push(w.to_certificate());
    }
    let smooth = smoothness_constants(&series, cfg.smooth_order, cfg.selection.k_max)?;
    b.push(smooth.to_certificate());
    if cfg.stages >= 2 {
        let ap = series.pole_approach(2, 1, 2, &(4..=10).collect::<Vec<_>>())?;
        let mut c = Certificate::new(
            "pole-growth",
            "pole_growth",
            "|f| grows like a simple pole approaching r_2 i radially from outside",
        );
        c.method = "rings >= 2 evaluated at (1 + 2^-m) r_2 i, m = 4..10".into();
        c.valid = ap.monotone && ap.simple_pole_within(0.2);
        let dev = ap.ratios.iter().map(|r| (r / 2.0 - 1.0).abs()).fold(0.0, f64::max);
        c.value = Quantity::float(dev);
        c.bound = Quantity::float(0.2);
        c.margin = Quantity::float(0.2 - dev);
        c.details = serde_json::to_value(&ap).expect("approach serializes");
        b.push(c);
    }
    let ps = series.pole_series(cfg.anchor)?;
    b.push(coefficient_cap_certificate(&series, &schedule));
    b.push(fn_bound_certificate(&ps, &schedule, &cfg.measure_stages));
    b.json(
        "series.json",
        &SeriesFile::Lacunary { eps: sel.eps.clone(), anchor: cfg.anchor, poles: ps.clone() },
    );
    let coeffs: Vec<(f64, f64)> = (0..=256u64)
        .filter_map(|k| {
            let d = series.coefficient(k);
            (d != BigRational::from_integer(0.into())).then(|| (k as f64, crate::exact::ln_abs(&d) / std::f64::consts::LN_10))
        })
        .collect();
    let evidence = probe_stage_certs(cfg, ProbeSource::Lacunary(&series, cfg.anchor), &schedule, b)?;
    plots(b, &g, &schedule, &ps, &coeffs, &evidence, (1 << (cfg.probe.stage + 1)) - 1);
    Ok(())
}

fn assemble_poles(cfg: &RunConfig, b: &mut Builder) -> Result<()> {
    let data: PlacementData = placed_poles(&cfg.domains.d1, cfg.pole_count, cfg.placement_samples)?;
    let poles = data.boundary_poles.clone();
    if poles.iter().any(|p| p.dist(&cfg.anchor) < 1e-12) {
        return Err(Error::Config("anchor coincides with a pole".into()));
    }
    let g = geometry_stage(cfg, &poles, b)?;
    let Some(hull) = hull_stage(cfg, &poles, &g, b)? else { return Ok(()) };
    let schedule = combine_caps(&hull, &data)?;
    b.json("schedule.json", &schedule);
    b.push(schedule.to_certificate());
    let coeffs: Vec<ComplexPoint> =
        schedule.caps.iter().map(|r| ComplexPoint::new_unchecked(crate::exact::to_f64(r), 0.0)).collect();
    let series = PoleSeries::new(poles.clone(), coeffs, cfg.anchor, true)?;
    for n in 1..=series.len() {
        b.push(liminf_check(&series, &data, n, cfg.placement_samples)?);
    }
    b.push(fn_bound_certificate(&series, &schedule, &cfg.measure_stages));
    b.json("series.json", &SeriesFile::Poles { series: series.clone() });
    b.json("placement.json", &data);
    let mags: Vec<(f64, f64)> =
        series.coefficients.iter().enumerate().map(|(i, c)| ((i + 1) as f64, c.norm().log10())).collect();
    let evidence = probe_stage_certs(cfg, ProbeSource::Poles(&series), &schedule, b)?;
    plots(b, &g, &schedule, &series, &mags, &evidence, cfg.probe.stage);
    Ok(())
}

/// Runs the whole pipeline in memory. Invalid certificates end the build early
/// and leave an invalid bundle; hard errors abort with the stage's error.
pub fn assemble_counterexample(cfg: &RunConfig) -> Result<Bundle> {
    cfg.validate()?;
    let mut b = Builder { certs: Vec::new(), files: BTreeMap::new(), aborted: None, evidence_decreasing: None };
    match cfg.mode {
        Mode::Lacunary => assemble_lacunary(cfg, &mut b)?,
        Mode::Poles => assemble_poles(cfg, &mut b)?,
    }
    if !b.certs.iter().all(|c| c.valid) && !b.files.contains_key("series.json") {
        b.aborted = Some("pipeline stopped after an invalid prerequisite".into());
    }
    Ok(b.finish(cfg))
}

pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (path, bytes) in &bundle.files {
        let p = dir.join(path);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(p, bytes)?;
    }
    let mut m = serde_json::to_string_pretty(&bundle.manifest)?;
    m.push('\n');
    std::fs::write(dir.join("manifest.json"), m)?;
    Ok(())
}

/// A bundle read from disk with every manifest hash checked.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub manifest: Manifest,
    pub config: RunConfig,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl LoadedBundle {
    pub fn json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T> {
        let bytes = self.files.get(path).ok_or_else(|| Error::Bundle(format!("bundle has no {path}")))?;
        serde_json::from_slice(bytes).map_err(|e| Error::Bundle(format!("{path}: {e}")))
    }

    pub fn series(&self) -> Result<SeriesFile> {
        self.json("series.json")
    }

    pub fn certificates(&self) -> Result<Vec<Certificate>> {
        self.manifest.certificates.iter().map(|e| self.json(&e.file)).collect()
    }
}

pub fn read_bundle(dir: &Path) -> Result<LoadedBundle> {
    let mpath = dir.join("manifest.json");
    if !mpath.is_file() {
        return Err(Error::Bundle(format!("no manifest.json in {}", dir.display())));
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&mpath)?)
        .map_err(|e| Error::Bundle(format!("manifest.json: {e}")))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Bundle(format!("unknown bundle format {}", manifest.format)));
    }
    let mut files = BTreeMap::new();
    for (path, hash) in &manifest.files {
        if path.contains("..") || Path::new(path).is_absolute() {
            return Err(Error::Bundle(format!("bad path {path} in manifest")));
        }
        let bytes = std::fs::read(dir.join(path)).map_err(|e| Error::Bundle(format!("{path}: {e}")))?;
        if &sha256_hex(&bytes) != hash {
            return Err(Error::StaleManifest(format!("hash of {path} does not match")));
        }
        files.insert(path.clone(), bytes);
    }
    let config = serde_json::from_slice(files.get("config.json").ok_or_else(|| Error::Bundle("bundle has no config.json".into()))?)
        .map_err(|e| Error::Bundle(format!("config.json: {e}")))?;
    Ok(LoadedBundle { manifest, config, files })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub id: String,
    pub stored_valid: bool,
    pub recomputed_valid: Option<bool>,
    pub identical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
    pub flags_match: bool,
    pub all_valid: bool,
}

/// Rebuilds the bundle from its own config and compares every certificate.
pub fn verify_bundle(dir: &Path) -> Result<VerifyReport> {
    let loaded = read_bundle(dir)?;
    let stored = loaded.certificates()?;
    let fresh = assemble_counterexample(&loaded.config)?;
    let mut entries = Vec::new();
    for c in &stored {
        let again = fresh.certificate(&c.id);
        entries.push(VerifyEntry {
            id: c.id.clone(),
            stored_valid: c.valid,
            recomputed_valid: again.map(|a| a.valid),
            identical: again.map(|a| a.to_json() == c.to_json()).unwrap_or(false),
        });
    }
    let flags_match = entries.iter().all(|e| e.recomputed_valid == Some(e.stored_valid))
        && fresh.certificates.len() == stored.len()
        && fresh.manifest.valid == loaded.manifest.valid;
    let all_valid = loaded.manifest.valid && entries.iter().all(|e| e.stored_valid);
    Ok(VerifyReport { entries, flags_match, all_valid })
}

/// Exact coefficient rows (k, numerator, denominator, decimal) of a lacunary bundle series.
pub fn coefficient_rows(series: &LacunarySeries, from: u64, to: u64) -> Vec<(u64, RationalRepr)> {
    (from..=to).map(|k| (k, RationalRepr::from(&series.coefficient(k)))).collect()
}
