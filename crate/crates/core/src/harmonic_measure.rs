//! Walk-on-spheres harmonic measure on a perforated disc.
//!
//! Walks run in fixed-size chunks; chunk `i` draws from ChaCha8 seeded with
//! the run seed on stream `i`, so results do not depend on the thread count.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Quantity};
use crate::error::{Error, Result};
use crate::geometry::{ArcSpec, Component, ComplexPoint, PerforatedDisc};
use crate::thinness::{RadiiSchedule, ThinnessCertificate};

const CHUNK: u64 = 1024;
const TIMEOUT_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub n_walks: u64,
    pub eps_boundary: f64,
    pub max_steps: u64,
    pub rng_seed: u64,
}

impl WalkConfig {
    pub fn new(n_walks: u64, rng_seed: u64) -> Self {
        WalkConfig { n_walks, eps_boundary: 1e-6, max_steps: 1_000_000, rng_seed }
    }

    pub fn validate(&self, domain: &PerforatedDisc) -> Result<()> {
        if self.n_walks < 100 {
            return Err(Error::WalkConfig(format!("n_walks = {} is below the minimum of 100", self.n_walks)));
        }
        if !(self.eps_boundary > 0.0) || !self.eps_boundary.is_finite() {
            return Err(Error::WalkConfig("eps_boundary must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::WalkConfig("max_steps must be positive".into()));
        }
        if let Some(r) = domain.min_hole_radius() {
            if self.eps_boundary >= r / 10.0 {
                return Err(Error::WalkConfig(format!(
                    "eps_boundary {} is not below min hole radius / 10 = {}",
                    self.eps_boundary,
                    r / 10.0
                )));
            }
        }
        if self.eps_boundary >= domain.rho() / 10.0 {
            return Err(Error::WalkConfig("eps_boundary is not small against the outer radius".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    OuterCircle,
    /// Union of the arcs π^k(J), J = arc k0 of order n0, over k in `copies` ⊆ 1..=n0.
    OuterArc { k0: u64, n0: u64, copies: BTreeSet<u64> },
    HoleBoundaries { holes: BTreeSet<usize> },
}

impl TargetSet {
    pub fn arc(arc: ArcSpec) -> Self {
        TargetSet::OuterArc { k0: arc.k0, n0: arc.n0, copies: [arc.n0].into_iter().collect() }
    }

    pub fn rotated_arc(arc: ArcSpec, k: u64) -> Self {
        TargetSet::OuterArc { k0: arc.k0, n0: arc.n0, copies: [k].into_iter().collect() }
    }

    fn validate(&self, domain: &PerforatedDisc) -> Result<()> {
        match self {
            TargetSet::OuterCircle => Ok(()),
            TargetSet::OuterArc { k0, n0, copies } => {
                ArcSpec::new(*k0, *n0)?;
                if copies.iter().any(|&k| k == 0 || k > *n0) {
                    return Err(Error::InvalidInput(format!("arc copies must lie in 1..={n0}")));
                }
                Ok(())
            }
            TargetSet::HoleBoundaries { holes } => {
                if holes.iter().any(|&i| i >= domain.holes().len()) {
                    return Err(Error::InvalidInput("target names a hole that does not exist".into()));
                }
                Ok(())
            }
        }
    }
}

/// Where a walk was absorbed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    /// On the outer circle, at this fraction of a full turn in [0, 1).
    Outer(f64),
    Hole(u32),
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentHistogram {
    pub outer: u64,
    pub holes: Vec<u64>,
    pub timeouts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub stderr: f64,
    pub hits: u64,
    pub n_walks: u64,
    pub histogram: ComponentHistogram,
    pub seed: u64,
    pub eps_boundary: f64,
    pub valid: bool,
    pub target: TargetSet,
}

/// All walk outcomes of one run, in walk order.
#[derive(Clone, Debug)]
pub struct WalkRecord {
    pub outcomes: Vec<Outcome>,
    pub absorbed: Vec<ComplexPoint>,
    pub n_holes: usize,
    pub cfg: WalkConfig,
}

fn one_walk(domain: &PerforatedDisc, start: Complex64, eps: f64, max_steps: u64, rng: &mut ChaCha8Rng) -> (Outcome, Complex64) {
    let mut z = start;
    for _ in 0..max_steps {
        let (d, comp) = domain.nearest(z);
        if d < eps {
            let o = match comp {
                Component::Outer => {
                    let t = z.im.atan2(z.re) / TAU;
                    Outcome::Outer(if t < 0.0 { t + 1.0 } else { t })
                }
                Component::Hole(i) => Outcome::Hole(i as u32),
            };
            return (o, z);
        }
        let theta: f64 = rng.gen::<f64>() * TAU;
        let (s, c) = theta.sin_cos();
        z += Complex64::new(d * c, d * s);
    }
    (Outcome::Timeout, z)
}

/// Runs all walks and keeps every outcome; targets are classified afterwards
/// so several targets can share the same walks.
pub fn run_walks(domain: &PerforatedDisc, start: ComplexPoint, cfg: &WalkConfig) -> Result<WalkRecord> {
    cfg.validate(domain)?;
    let z0 = start.c();
    if !start.is_finite() || domain.nearest(z0).0 <= cfg.eps_boundary {
        return Err(Error::StartOutside { re: start.re, im: start.im });
    }
    let chunks = cfg.n_walks.div_ceil(CHUNK);
    let parts: Vec<(Vec<Outcome>, Vec<ComplexPoint>)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(ci);
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_walks);
            let mut out = Vec::with_capacity((hi - lo) as usize);
            let mut pts = Vec::new();
            for w in lo..hi {
                let (o, z) = one_walk(domain, z0, cfg.eps_boundary, cfg.max_steps, &mut rng);
                out.push(o);
                if w < 4096 {
                    pts.push(z.into());
                }
            }
            (out, pts)
        })
        .collect();
    let mut outcomes = Vec::with_capacity(cfg.n_walks as usize);
    let mut absorbed = Vec::new();
    for (o, p) in parts {
        outcomes.extend(o);
        absorbed.extend(p);
    }
    Ok(WalkRecord { outcomes, absorbed, n_holes: domain.holes().len(), cfg: cfg.clone() })
}

fn in_arc(t: f64, k0: u64, n0: u64, copies: &BTreeSet<u64>) -> bool {
    // sector index of the absorbed angle; arcs π^k(J) have index (k0 + k) mod n0
    let s = ((t * n0 as f64).floor() as u64).min(n0 - 1);
    copies.iter().any(|k| (k0 + k) % n0 == s)
}

impl WalkRecord {
    pub fn histogram(&self) -> ComponentHistogram {
        let mut h = ComponentHistogram { outer: 0, holes: vec![0; self.n_holes], timeouts: 0 };
        for o in &self.outcomes {
            match o {
                Outcome::Outer(_) => h.outer += 1,
                Outcome::Hole(i) => h.holes[*i as usize] += 1,
                Outcome::Timeout => h.timeouts += 1,
            }
        }
        h
    }

    pub fn hits(&self, target: &TargetSet) -> u64 {
        self.outcomes
            .iter()
            .filter(|o| match (o, target) {
                (Outcome::Outer(_), TargetSet::OuterCircle) => true,
                (Outcome::Outer(t), TargetSet::OuterArc { k0, n0, copies }) => in_arc(*t, *k0, *n0, copies),
                (Outcome::Hole(i), TargetSet::HoleBoundaries { holes }) => holes.contains(&(*i as usize)),
                _ => false,
            })
            .count() as u64
    }

    pub fn measure(&self, target: &TargetSet) -> MeasureEstimate {
        let n = self.outcomes.len() as u64;
        let hits = self.hits(target);
        let value = hits as f64 / n as f64;
        let histogram = self.histogram();
        let valid = (histogram.timeouts as f64) <= TIMEOUT_LIMIT * n as f64;
        MeasureEstimate {
            value,
            stderr: (value * (1.0 - value) / n as f64).sqrt(),
            hits,
            n_walks: n,
            histogram,
            seed: self.cfg.rng_seed,
            eps_boundary: self.cfg.eps_boundary,
            valid,
            target: target.clone(),
        }
    }
}

/// Monte Carlo estimate of ω(start, target, domain).
pub fn estimate(domain: &PerforatedDisc, start: ComplexPoint, target: &TargetSet, cfg: &WalkConfig) -> Result<MeasureEstimate> {
    target.validate(domain)?;
    Ok(run_walks(domain, start, cfg)?.measure(target))
}

/// log(|z|/r_in) / log(r_out/r_in): harmonic measure of the outer circle of an annulus.
pub fn exact_annulus(z_mod: f64, r_in: f64, r_out: f64) -> Result<f64> {
    if !(0.0 < r_in && r_in < z_mod && z_mod < r_out) || !r_out.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need 0 < r_in < |z| < r_out, got {r_in}, {z_mod}, {r_out}"
        )));
    }
    Ok((z_mod / r_in).ln() / (r_out / r_in).ln())
}

/// Joint standard error of p_k − p_l for two cells of one multinomial sample.
pub fn joint_stderr(a: &MeasureEstimate, b: &MeasureEstimate) -> f64 {
    let n = a.n_walks as f64;
    ((a.value + b.value - (a.value - b.value).powi(2)) / n).max(0.0).sqrt()
}

fn estimate_json(e: &MeasureEstimate) -> serde_json::Value {
    serde_json::to_value(e).expect("estimate serializes")
}

/// Outer-circle measure from 0 with Y_n removed: should be at least 1/2.
pub fn measure_outer(schedule: &RadiiSchedule, n: usize, cfg: &WalkConfig) -> Result<Certificate> {
    let holes = schedule.half_discs(n, true);
    let arc = ArcSpec::new(0, schedule.symmetry_order)?;
    let domain = PerforatedDisc::new(schedule.rho, holes, arc)?;
    let mut cert = Certificate::new(
        format!("outer-n{n}"),
        "outer_measure",
        "omega(0, outer circle, D_rho minus Y_n) >= 1/2",
    )
    .input("stage", n)
    .input("rho", schedule.rho)
    .input("holes", domain.holes())
    .input("walk_config", cfg);
    cert.method = "walk on spheres; pass iff estimate >= 1/2 - 3 stderr".into();
    cert.bound = Quantity::float(0.5);
    match estimate(&domain, ComplexPoint::new_unchecked(0.0, 0.0), &TargetSet::OuterCircle, cfg) {
        Ok(e) => {
            cert.value = Quantity::float(e.value);
            cert.margin = Quantity::float(e.value - 0.5);
            cert.valid = e.valid && e.value >= 0.5 - 3.0 * e.stderr;
            cert.details = serde_json::json!({ "estimate": estimate_json(&e) });
        }
        Err(err) if err.is_config() => {
            cert.valid = false;
            cert.details = serde_json::json!({ "error": err.to_string() });
        }
        Err(err) => return Err(err),
    }
    Ok(cert)
}

/// Outer-circle measure with the thinness certificate as precondition.
pub fn verify_outer(thin: &ThinnessCertificate, n: usize, cfg: &WalkConfig) -> Result<Certificate> {
    if !thin.valid {
        return Err(Error::Precondition("thinness certificate is invalid".into()));
    }
    let mut c = measure_outer(&thin.schedule, n, cfg)?;
    c.references.push(thin.to_certificate().hash());
    Ok(c)
}

/// Arc measure from 0 with only the unrotated half discs removed: should be at
/// least 1/(2 n0). Also checks the comparison with the Y_n domain and that the
/// n0 rotated arcs agree on the Y_n domain.
pub fn measure_arc(schedule: &RadiiSchedule, arc: ArcSpec, n: usize, cfg: &WalkConfig) -> Result<Certificate> {
    let n0 = arc.n0;
    let plain = PerforatedDisc::new(schedule.rho, schedule.half_discs(n, false), arc)?;
    let full = PerforatedDisc::new(schedule.rho, schedule.half_discs(n, true), arc)?;
    let bound = 1.0 / (2.0 * n0 as f64);
    let mut cert = Certificate::new(
        format!("arc-n{n}"),
        "arc_measure",
        "omega(0, J, D_rho minus the stage-n half discs) >= 1/(2 n0)",
    )
    .input("stage", n)
    .input("rho", schedule.rho)
    .input("arc", arc)
    .input("holes", plain.holes())
    .input("walk_config", cfg);
    cert.method = "walk on spheres; pass iff estimate >= 1/(2 n0) - 3 stderr, the Y_n estimate is not above it beyond 3 joint stderr, and rotated arcs agree within 3 joint stderr".into();
    cert.bound = Quantity::float(bound);
    let origin = ComplexPoint::new_unchecked(0.0, 0.0);
    let run = || -> Result<(MeasureEstimate, MeasureEstimate, Vec<MeasureEstimate>)> {
        let target = TargetSet::arc(arc);
        let e_plain = estimate(&plain, origin, &target, cfg)?;
        let mut cfg_full = cfg.clone();
        cfg_full.rng_seed = cfg.rng_seed.wrapping_add(1);
        let rec = run_walks(&full, origin, &cfg_full)?;
        let e_full = rec.measure(&target);
        let rotated = (1..=n0).map(|k| rec.measure(&TargetSet::rotated_arc(arc, k))).collect();
        Ok((e_plain, e_full, rotated))
    };
    match run() {
        Ok((e_plain, e_full, rotated)) => {
            let pass_bound = e_plain.value >= bound - 3.0 * e_plain.stderr;
            let sd = (e_plain.stderr.powi(2) + e_full.stderr.powi(2)).sqrt();
            let monotone = e_full.value <= e_plain.value + 3.0 * sd;
            let mut worst_sym: f64 = 0.0;
            let mut sym_ok = true;
            for i in 0..rotated.len() {
                for j in i + 1..rotated.len() {
                    let diff = (rotated[i].value - rotated[j].value).abs();
                    let js = joint_stderr(&rotated[i], &rotated[j]);
                    worst_sym = worst_sym.max(diff / js.max(f64::MIN_POSITIVE));
                    if diff > 3.0 * js {
                        sym_ok = false;
                    }
                }
            }
            cert.value = Quantity::float(e_plain.value);
            cert.margin = Quantity::float(e_plain.value - bound);
            cert.valid = e_plain.valid && e_full.valid && pass_bound && monotone && sym_ok;
            cert.details = serde_json::json!({
                "estimate": estimate_json(&e_plain),
                "estimate_with_rotated_holes": estimate_json(&e_full),
                "rotated_arc_estimates": rotated.iter().map(estimate_json).collect::<Vec<_>>(),
                "monotone": monotone,
                "symmetry_ok": sym_ok,
                "worst_symmetry_z": worst_sym,
            });
        }
        Err(err) if err.is_config() => {
            cert.valid = false;
            cert.details = serde_json::json!({ "error": err.to_string() });
        }
        Err(err) => return Err(err),
    }
    Ok(cert)
}

pub fn verify_arc(thin: &ThinnessCertificate, arc: ArcSpec, n: usize, cfg: &WalkConfig) -> Result<Certificate> {
    if !thin.valid {
        return Err(Error::Precondition("thinness certificate is invalid".into()));
    }
    let mut c = measure_arc(&thin.schedule, arc, n, cfg)?;
    c.references.push(thin.to_certificate().hash());
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Hole;

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new_unchecked(re, im)
    }

    fn disc(holes: Vec<Hole>) -> PerforatedDisc {
        PerforatedDisc::new_general(1.0, holes, ArcSpec::new(0, 8).unwrap()).unwrap()
    }

    #[test]
    fn plain_disc_is_certain() {
        let e = estimate(&disc(vec![]), cp(0.0, 0.0), &TargetSet::OuterCircle, &WalkConfig::new(2000, 1)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn eighth_arc() {
        let arc = ArcSpec::new(0, 8).unwrap();
        let e = estimate(&disc(vec![]), cp(0.0, 0.0), &TargetSet::arc(arc), &WalkConfig::new(20000, 7)).unwrap();
        assert!((e.value - 0.125).abs() <= 3.0 * e.stderr, "{}", e.value);
    }

    #[test]
    fn annulus_half() {
        let d = disc(vec![Hole::new(cp(0.0, 0.0), 0.25)]);
        let mut cfg = WalkConfig::new(20000, 3);
        cfg.eps_boundary = 1e-5;
        let e = estimate(&d, cp(0.5, 0.0), &TargetSet::OuterCircle, &cfg).unwrap();
        assert!((e.value - 0.5).abs() <= 3.0 * e.stderr + 1e-4, "{}", e.value);
    }

    #[test]
    fn exact_annulus_examples() {
        let (r, big) = (0.3f64, 2.0);
        assert!((exact_annulus((r * big).sqrt(), r, big).unwrap() - 0.5).abs() < 1e-15);
        assert!((exact_annulus(0.5, 0.25, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(exact_annulus(1.0 - 1e-12, 0.25, 1.0).unwrap() > 1.0 - 1e-11);
        assert!(exact_annulus(0.1, 0.25, 1.0).is_err());
    }

    #[test]
    fn arcs_partition_the_circle() {
        let d = disc(vec![Hole::new(cp(0.4, 0.2), 0.1)]);
        let rec = run_walks(&d, cp(0.0, 0.0), &WalkConfig::new(5000, 11)).unwrap();
        let arc = ArcSpec::new(2, 8).unwrap();
        let sum: u64 = (1..=8).map(|k| rec.hits(&TargetSet::rotated_arc(arc, k))).sum();
        assert_eq!(sum, rec.hits(&TargetSet::OuterCircle));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let d = disc(vec![Hole::new(cp(0.4, 0.2), 0.1)]);
        let cfg = WalkConfig::new(5000, 99);
        let a = estimate(&d, cp(0.0, 0.0), &TargetSet::OuterCircle, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate(&d, cp(0.0, 0.0), &TargetSet::OuterCircle, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let d = disc(vec![Hole::new(cp(0.4, 0.2), 0.1)]);
        assert!(estimate(&d, cp(0.0, 0.0), &TargetSet::OuterCircle, &WalkConfig::new(10, 1)).is_err());
        let mut cfg = WalkConfig::new(1000, 1);
        cfg.eps_boundary = 0.02;
        assert!(matches!(
            estimate(&d, cp(0.0, 0.0), &TargetSet::OuterCircle, &cfg),
            Err(Error::WalkConfig(_))
        ));
        assert!(matches!(
            estimate(&d, cp(0.4, 0.2), &TargetSet::OuterCircle, &WalkConfig::new(1000, 1)),
            Err(Error::StartOutside { .. })
        ));
    }

    #[test]
    fn timeouts_invalidate() {
        let d = disc(vec![Hole::new(cp(0.4, 0.2), 0.1)]);
        let mut cfg = WalkConfig::new(1000, 5);
        cfg.max_steps = 2;
        let e = estimate(&d, cp(0.0, 0.0), &TargetSet::OuterCircle, &cfg).unwrap();
        assert!(!e.valid);
        assert!(e.histogram.timeouts > 0);
    }

    #[test]
    fn outer_without_holes_and_with_blocking_holes() {
        let empty = RadiiSchedule { rho: 0.5, symmetry_order: 4, entries: vec![] };
        let c = measure_outer(&empty, 0, &WalkConfig::new(1000, 1)).unwrap();
        assert!(c.valid);
        assert_eq!(c.value.approx(), 1.0);
        let c = measure_arc(&empty, ArcSpec::new(1, 4).unwrap(), 0, &WalkConfig::new(20000, 1)).unwrap();
        assert!(c.valid, "{}", c.to_json());
        assert!((c.value.approx() - 0.25).abs() < 0.02);
    }
}
