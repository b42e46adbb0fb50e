//! Explicit weighted log-potential u with u(0) = -1/2, u <= 0 on the working
//! disc, and u <= -1 on a union of small discs around the poles; plus the
//! dyadic radii schedule derived from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Quantity};
use crate::error::{Error, Result};
use crate::exact::dyadic;
use crate::geometry::{ComplexPoint, Hole, Turn};

pub const ORIGIN_VALUE: f64 = -0.5;
const MAX_EXPONENT: u32 = 64;

/// u(z) = offset + Σ λ_i log(|z − c_i| / M) over all rotated copies c_i of the poles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPotential {
    pub poles: Vec<ComplexPoint>,
    pub symmetry_order: u64,
    pub centers: Vec<ComplexPoint>,
    /// Index into `poles` for each center.
    pub pole_of_center: Vec<usize>,
    /// Final weights λ_i (normalization included).
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub scale: f64,
    pub offset: f64,
    pub working_radius: f64,
    /// Certified upper bound of Σ w_i log(|z − c_i|/M) on |z| = ρ before normalization.
    pub circle_max: f64,
    /// Weight an infinite continuation of the 2^{-n} scheme could still add.
    pub tail_bound: f64,
}

fn raw_weight(rank: usize, modulus: f64, scale: f64) -> f64 {
    let w = 0.5f64.powi(rank as i32);
    w / f64::max(1.0, -(modulus / scale).ln())
}

/// Σ w_i log(|z − c_i|/M).
fn raw_sum(centers: &[Complex64], weights: &[f64], scale: f64, z: Complex64) -> f64 {
    centers
        .iter()
        .zip(weights)
        .map(|(c, w)| w * ((z - c).norm() / scale).ln())
        .sum()
}

/// Upper bound of the raw sum over |z| = ρ from equally spaced samples and a
/// Lipschitz bound in the angle.
fn certified_circle_max(centers: &[Complex64], weights: &[f64], scale: f64, rho: f64) -> Result<f64> {
    let mut lip = 0.0;
    for (c, w) in centers.iter().zip(weights) {
        let gap = (c.norm() - rho).abs();
        if gap < 1e-12 {
            return Err(Error::Precondition(format!(
                "pole copy ({}, {}) lies on the circle of radius {rho}",
                c.re, c.im
            )));
        }
        lip += w * rho / gap;
    }
    let n = ((PI * lip / 1e-7).ceil() as u64).clamp(1024, 1 << 22) as usize;
    let max = (0..n)
        .into_par_iter()
        .map(|i| raw_sum(centers, weights, scale, Complex64::from_polar(rho, 2.0 * PI * i as f64 / n as f64)))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * (1.0 + weights.iter().sum::<f64>() * 60.0);
    Ok(max + lip * PI / n as f64 + slack)
}

/// Builds the normalized potential over `poles` and their `symmetry_order`
/// rotated copies.
pub fn build_potential(poles: &[ComplexPoint], symmetry_order: u64, working_radius: f64) -> Result<LogPotential> {
    if poles.is_empty() {
        return Err(Error::InvalidInput("empty pole list: no potential needed".into()));
    }
    if symmetry_order == 0 {
        return Err(Error::InvalidInput("symmetry order must be positive".into()));
    }
    if !(working_radius > 0.0) || !working_radius.is_finite() {
        return Err(Error::InvalidInput(format!("working radius must be positive, got {working_radius}")));
    }
    for (i, p) in poles.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("pole {} is not finite (unbounded pole set)", i + 1)));
        }
        if p.norm() < 1e-300 {
            return Err(Error::InvalidInput(format!("pole {} is at the origin", i + 1)));
        }
    }
    let sup = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let scale = 2.0 * sup + 2.0 * working_radius;
    let mut centers = Vec::new();
    let mut pole_of_center = Vec::new();
    let mut raw = Vec::new();
    for (i, p) in poles.iter().enumerate() {
        let w = raw_weight(i + 1, p.norm(), scale);
        for k in 1..=symmetry_order {
            let t = Turn::new(k as i64, symmetry_order)?;
            centers.push(t.unit() * p.c());
            pole_of_center.push(i);
            raw.push(w);
        }
    }
    let s0 = raw_sum(&centers, &raw, scale, Complex64::new(0.0, 0.0));
    let smax = certified_circle_max(&centers, &raw, scale, working_radius)?;
    if !(smax > s0) {
        return Err(Error::Precondition("potential is flat on the working circle".into()));
    }
    let lambda = 0.5 / (smax - s0);
    let offset = -lambda * smax;
    let weights: Vec<f64> = raw.iter().map(|w| lambda * w).collect();
    let tail_bound = lambda * symmetry_order as f64 * 0.5f64.powi(poles.len() as i32);
    Ok(LogPotential {
        poles: poles.to_vec(),
        symmetry_order,
        centers: centers.into_iter().map(Into::into).collect(),
        pole_of_center,
        weights,
        lambda,
        scale,
        offset,
        working_radius,
        circle_max: smax,
        tail_bound,
    })
}

impl LogPotential {
    pub fn eval(&self, z: Complex64) -> f64 {
        self.offset
            + self
                .centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * ((z - c.c()).norm() / self.scale).ln())
                .sum::<f64>()
    }

    pub fn pole_index(&self, p: &ComplexPoint) -> Option<usize> {
        self.poles.iter().position(|q| q.dist(p) < 1e-12)
    }

    /// Analytic upper bound of u over the closed disc D̄(centers[i], r): the
    /// singular term is exact at radius r, every other term is bounded by the
    /// largest distance from the disc to its center (clipped at M).
    pub fn disc_sup_bound(&self, center_index: usize, r: f64) -> f64 {
        let c0 = self.centers[center_index].c();
        let mut s = self.offset + self.weights[center_index] * (r / self.scale).ln();
        for (i, (c, w)) in self.centers.iter().zip(&self.weights).enumerate() {
            if i == center_index {
                continue;
            }
            let far = ((c.c() - c0).norm() + r).min(self.scale);
            s += w * (far / self.scale).ln();
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusEntry {
    /// 1-based pole index.
    pub index: usize,
    pub pole: ComplexPoint,
    /// ρ_n = 2^{-exponent}.
    pub exponent: u32,
    /// Whether the potential covers this pole (it lies inside D_ρ).
    pub covered: bool,
    pub verified: bool,
}

impl RadiusEntry {
    pub fn radius(&self) -> f64 {
        0.5f64.powi(self.exponent as i32)
    }

    pub fn radius_exact(&self) -> BigRational {
        dyadic(self.exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiiSchedule {
    pub rho: f64,
    pub symmetry_order: u64,
    pub entries: Vec<RadiusEntry>,
}

impl RadiiSchedule {
    pub fn copies(&self, p: &ComplexPoint) -> Vec<Complex64> {
        (1..=self.symmetry_order)
            .map(|k| Turn::new(k as i64, self.symmetry_order).unwrap().unit() * p.c())
            .collect()
    }

    /// Closed discs of half radius for indices <= n that lie inside D_ρ, all
    /// rotated copies when `rotated`, else only the discs themselves.
    /// Concentric copies are merged.
    pub fn half_discs(&self, n: usize, rotated: bool) -> Vec<Hole> {
        let mut out: Vec<Hole> = Vec::new();
        for e in self.entries.iter().filter(|e| e.index <= n && e.covered) {
            let r = e.radius() / 2.0;
            let centers = if rotated { self.copies(&e.pole) } else { vec![e.pole.c()] };
            for c in centers {
                if c.norm() + r >= self.rho {
                    continue;
                }
                match out.iter_mut().find(|h| (h.center.c() - c).norm() < 1e-12) {
                    Some(h) => h.radius = h.radius.max(r),
                    None => out.push(Hole::new(c.into(), r)),
                }
            }
        }
        out
    }

    /// Geometric invariants for entry `pos` against all earlier ones, plus half
    /// the separation `sep` from the copies of every other pole.
    fn geometry_ok(&self, pos: usize, r: f64, sep: f64) -> std::result::Result<(), String> {
        let e = &self.entries[pos];
        let p = e.pole;
        if r > p.norm() / 2.0 {
            return Err(format!("radius exceeds |a_{}|/2", e.index));
        }
        if 2.0 * r >= sep {
            return Err(format!("radius leaves no room around a_{} for the other poles", e.index));
        }
        if (p.norm() - self.rho).abs() <= r {
            return Err(format!("disc around a_{} meets the circle of radius {}", e.index, self.rho));
        }
        let mine = self.copies(&p);
        for (i, a) in mine.iter().enumerate() {
            for b in mine.iter().skip(i + 1) {
                if (a - b).norm() <= 2.0 * r {
                    return Err(format!("rotated copies of the disc around a_{} overlap", e.index));
                }
            }
        }
        for prev in &self.entries[..pos] {
            let rq = prev.radius();
            for a in &mine {
                for b in self.copies(&prev.pole) {
                    // coinciding centers nest; the union is still one disc
                    let d = (a - b).norm();
                    if d >= 1e-12 && d <= r + rq {
                        return Err(format!("disc around a_{} meets the disc around a_{}", e.index, prev.index));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Largest dyadic radius per pole meeting the potential bound (for covered
/// poles) and the disjointness invariants. `poles` are in the local frame.
pub fn choose_disc_radii(
    potential: Option<&LogPotential>,
    poles: &[ComplexPoint],
    symmetry_order: u64,
    rho: f64,
    n_max: usize,
) -> Result<RadiiSchedule> {
    if symmetry_order == 0 {
        return Err(Error::InvalidInput("symmetry order must be positive".into()));
    }
    for (i, p) in poles.iter().enumerate() {
        if (p.norm() - rho).abs() < 1e-12 {
            return Err(Error::Precondition(format!("pole {} lies on the circle of radius {rho}", i + 1)));
        }
        if p.norm() < 1e-300 {
            return Err(Error::Precondition(format!("pole {} is at the origin", i + 1)));
        }
    }
    let mut sched = RadiiSchedule { rho, symmetry_order, entries: Vec::new() };
    let used = &poles[..n_max.min(poles.len())];
    let all_copies: Vec<(usize, Complex64)> =
        used.iter().enumerate().flat_map(|(i, p)| sched.copies(p).into_iter().map(move |c| (i, c))).collect();
    for (i, p) in used.iter().enumerate() {
        let sep = sched
            .copies(p)
            .iter()
            .flat_map(|a| all_copies.iter().filter(|(j, _)| *j != i).map(move |(_, b)| (a - b).norm()))
            .filter(|d| *d >= 1e-12)
            .fold(f64::INFINITY, f64::min);
        let covered_idx = potential.and_then(|u| u.pole_index(p));
        if p.norm() < rho && covered_idx.is_none() {
            return Err(Error::Precondition(format!("pole {} is inside D_rho but not covered by the potential", i + 1)));
        }
        sched.entries.push(RadiusEntry {
            index: i + 1,
            pole: *p,
            exponent: 0,
            covered: covered_idx.is_some(),
            verified: false,
        });
        let pos = sched.entries.len() - 1;
        let mut last_reason = String::new();
        let mut chosen = None;
        for m in 1..=MAX_EXPONENT {
            let r = 0.5f64.powi(m as i32);
            if let Err(why) = sched.geometry_ok(pos, r, sep) {
                last_reason = why;
                continue;
            }
            if let (Some(u), Some(pi)) = (potential, covered_idx) {
                let ci = u.pole_of_center.iter().position(|&q| q == pi).expect("center of covered pole");
                let b = u.disc_sup_bound(ci, r);
                if b > -1.0 {
                    last_reason = format!("potential bound {b:.6} > -1 (margin {:.3e})", -1.0 - b);
                    continue;
                }
            }
            chosen = Some(m);
            break;
        }
        match chosen {
            Some(m) => {
                sched.entries[pos].exponent = m;
                sched.entries[pos].verified = true;
            }
            None => {
                return Err(Error::NoAdmissibleRadius(format!(
                    "pole {}: no radius 2^-m with m <= {MAX_EXPONENT}: {last_reason}",
                    i + 1
                )))
            }
        }
    }
    Ok(sched)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscBound {
    pub index: usize,
    pub copy: u64,
    pub radius: f64,
    pub sup_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinnessCertificate {
    pub potential: Option<LogPotential>,
    pub schedule: RadiiSchedule,
    pub disc_bounds: Vec<DiscBound>,
    pub origin_value: f64,
    pub tail_bound: f64,
    pub valid: bool,
    pub offending: Option<usize>,
    pub notes: Vec<String>,
}

/// Re-derives every per-disc bound and the geometric invariants.
pub fn verify_thinness(potential: Option<&LogPotential>, schedule: &RadiiSchedule) -> ThinnessCertificate {
    let mut notes = Vec::new();
    let mut offending = None;
    let origin_value = potential.map(|u| u.eval(Complex64::new(0.0, 0.0))).unwrap_or(ORIGIN_VALUE);
    if (origin_value - ORIGIN_VALUE).abs() > 1e-9 {
        notes.push(format!("u(0) = {origin_value} differs from -1/2"));
    }
    let mut work = Vec::new();
    for e in &schedule.entries {
        if !e.covered {
            continue;
        }
        for k in 1..=schedule.symmetry_order {
            work.push((e.index, e.pole, k, e.radius()));
        }
    }
    let disc_bounds: Vec<DiscBound> = work
        .par_iter()
        .map(|&(index, pole, k, r)| {
            let sup_bound = match potential {
                Some(u) => {
                    let c = Turn::new(k as i64, schedule.symmetry_order).unwrap().unit() * pole.c();
                    match u.centers.iter().position(|q| (q.c() - c).norm() < 1e-12) {
                        Some(ci) => u.disc_sup_bound(ci, r),
                        None => f64::INFINITY,
                    }
                }
                None => f64::INFINITY,
            };
            DiscBound { index, copy: k, radius: r, sup_bound }
        })
        .collect();
    for b in &disc_bounds {
        if !(b.sup_bound <= -1.0) && offending.is_none() {
            offending = Some(b.index);
            notes.push(format!("disc around a_{} copy {}: sup bound {} > -1", b.index, b.copy, b.sup_bound));
        }
    }
    for pos in 0..schedule.entries.len() {
        let e = &schedule.entries[pos];
        if let Err(why) = schedule.geometry_ok(pos, e.radius(), f64::INFINITY) {
            if offending.is_none() {
                offending = Some(e.index);
            }
            notes.push(why);
        }
        if e.pole.norm() < schedule.rho && !e.covered {
            offending.get_or_insert(e.index);
            notes.push(format!("a_{} inside D_rho is not covered", e.index));
        }
    }
    if let Some(u) = potential {
        let sup = u.offset + u.lambda * u.circle_max;
        if sup > 1e-12 {
            notes.push(format!("u exceeds 0 on the working circle: {sup}"));
            offending.get_or_insert(0);
        }
    }
    let valid = offending.is_none() && (origin_value - ORIGIN_VALUE).abs() <= 1e-9;
    notes.push("per-disc bounds: singular term exact at the disc radius; other terms bounded by the farthest disc point".into());
    ThinnessCertificate {
        potential: potential.cloned(),
        schedule: schedule.clone(),
        disc_bounds,
        origin_value,
        tail_bound: potential.map(|u| u.tail_bound).unwrap_or(0.0),
        valid,
        offending,
        notes,
    }
}

impl ThinnessCertificate {
    pub fn to_certificate(&self) -> Certificate {
        let worst = self.disc_bounds.iter().map(|b| b.sup_bound).fold(f64::NEG_INFINITY, f64::max);
        let mut c = Certificate::new(
            "thinness",
            "thinness",
            "u(0) = -1/2, u <= 0 on D_rho, and u <= -1 on every rotated pole disc inside D_rho",
        )
        .input("rho", self.schedule.rho)
        .input("symmetry_order", self.schedule.symmetry_order)
        .input("radii_exponents", self.schedule.entries.iter().map(|e| e.exponent).collect::<Vec<_>>());
        c.method = "explicit weighted log potential; analytic per-disc sup bounds; Lipschitz-certified circle maximum".into();
        c.valid = self.valid;
        c.value = Quantity::float(worst);
        c.bound = Quantity::float(-1.0);
        c.margin = Quantity::float(if self.disc_bounds.is_empty() { f64::MAX } else { -1.0 - worst });
        c.details = serde_json::json!({
            "origin_value": self.origin_value,
            "tail_bound": self.tail_bound,
            "offending": self.offending,
            "disc_bounds": self.disc_bounds,
            "potential": self.potential,
            "notes": self.notes,
        });
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ring_poles;

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new_unchecked(re, im)
    }

    #[test]
    fn single_pole_normalization() {
        let u = build_potential(&[cp(2.0, 0.0)], 1, 1.0).unwrap();
        assert_eq!(u.scale, 6.0);
        assert!((u.eval(Complex64::new(0.0, 0.0)) + 0.5).abs() < 1e-12);
        for i in 0..256 {
            let z = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / 256.0);
            assert!(u.eval(z) <= 1e-12);
        }
    }

    #[test]
    fn single_pole_radius_grid_oracle() {
        let p = [cp(2.0, 0.0)];
        let u = build_potential(&p, 1, 1.0).unwrap();
        let s = choose_disc_radii(Some(&u), &p, 1, 1.0, 1).unwrap();
        let r = s.entries[0].radius();
        for i in 0..1000 {
            let z = Complex64::new(2.0, 0.0) + Complex64::from_polar(r, 2.0 * PI * i as f64 / 1000.0);
            assert!(u.eval(z) <= -1.0);
        }
        // twice the radius must fail the analytic bound unless r is already maximal
        assert!(s.entries[0].exponent == 1 || u.disc_sup_bound(0, 2.0 * r) > -1.0);
    }

    #[test]
    fn empty_list_is_error() {
        assert!(build_potential(&[], 4, 1.0).is_err());
        assert!(build_potential(&[cp(0.0, 0.0)], 4, 1.0).is_err());
    }

    #[test]
    fn ring_origin_value_resummed() {
        let p = ring_poles(2).unwrap();
        let u = build_potential(&p, 1, 0.5).unwrap();
        // independent re-summation in extended form: sort terms by magnitude
        let mut terms: Vec<f64> = u
            .centers
            .iter()
            .zip(&u.weights)
            .map(|(c, w)| w * (c.norm() / u.scale).ln())
            .collect();
        terms.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
        let mut s = u.offset;
        let mut comp = 0.0;
        for t in terms {
            let y = t - comp;
            let tt = s + y;
            comp = (tt - s) - y;
            s = tt;
        }
        assert!((s + 0.5).abs() < 1e-12);
    }

    #[test]
    fn antipodal_pair() {
        let p = [cp(2.0, 0.0), cp(-2.0, 0.0)];
        let u = build_potential(&p, 2, 1.0).unwrap();
        let s = choose_disc_radii(Some(&u), &p, 2, 1.0, 2).unwrap();
        assert!(s.entries.iter().all(|e| e.radius() < 2.0));
    }

    #[test]
    fn small_modulus_pole_respects_half_modulus() {
        let p = [cp(0.01, 0.0)];
        let u = build_potential(&p, 1, 0.5).unwrap();
        let s = choose_disc_radii(Some(&u), &p, 1, 0.5, 1).unwrap();
        assert!(s.entries[0].radius() <= 0.005);
    }

    #[test]
    fn verify_and_inflate() {
        let p = [cp(0.2, 0.1), cp(-0.1, 0.25)];
        let u = build_potential(&p, 4, 0.5).unwrap();
        let s = choose_disc_radii(Some(&u), &p, 4, 0.5, 2).unwrap();
        let cert = verify_thinness(Some(&u), &s);
        assert!(cert.valid, "{:?}", cert.notes);
        let mut bad = s.clone();
        bad.entries[0].exponent -= 2;
        let cert = verify_thinness(Some(&u), &bad);
        assert!(!cert.valid);
        assert_eq!(cert.offending, Some(1));
        // shrinking keeps validity
        let mut small = s.clone();
        small.entries[1].exponent += 3;
        assert!(verify_thinness(Some(&u), &small).valid);
    }

    #[test]
    fn empty_schedule_vacuous() {
        let s = RadiiSchedule { rho: 0.5, symmetry_order: 4, entries: vec![] };
        let cert = verify_thinness(None, &s);
        assert!(cert.valid);
        assert_eq!(cert.origin_value, -0.5);
    }

    #[test]
    fn potential_is_harmonic_off_poles() {
        let p = [cp(0.2, 0.1), cp(-0.1, 0.25)];
        let u = build_potential(&p, 4, 0.5).unwrap();
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let z = Complex64::new(next() - 0.5, next() - 0.5) * 0.8;
            let dmin = u.centers.iter().map(|c| (c.c() - z).norm()).fold(f64::INFINITY, f64::min);
            if dmin < 0.05 {
                continue;
            }
            let h = dmin / 4.0;
            let mean: f64 = (0..128)
                .map(|i| u.eval(z + Complex64::from_polar(h, 2.0 * PI * i as f64 / 128.0)))
                .sum::<f64>()
                / 128.0;
            assert!((mean - u.eval(z)).abs() < 1e-10);
        }
    }
}
