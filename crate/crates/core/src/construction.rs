//! Schedules (radii, caps, C_1), cap combination, and the exact selection of
//! the lacunary coefficients ε_n with constants C_n and witnesses k_n.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Quantity};
use crate::error::{Error, Result};
use crate::exact::{dyadic, from_f64, int, ln_abs, rat, serde_rat, serde_rat_vec, to_f64, RationalRepr};
use crate::geometry::{ArcSpec, ComplexPoint, Frame, PlacementData};
use crate::series::certify::{default_threshold, radius_witness, tail_check, CoefficientModel, TaylorWitness};
use crate::series::LacunarySeries;
use crate::thinness::ThinnessCertificate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapSource {
    Hull,
    Placement,
}

/// Radii ρ_n, caps R_n, and C_1 = Σ R_n/ρ_n for one pole sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub frame: Frame,
    pub rho: f64,
    pub arc: ArcSpec,
    pub symmetry_order: u64,
    /// Poles in global coordinates, index order.
    pub poles: Vec<ComplexPoint>,
    /// ρ_n = 2^{-radii_exponents[n-1]}.
    pub radii_exponents: Vec<u32>,
    #[serde(with = "serde_rat_vec")]
    pub caps: Vec<BigRational>,
    pub cap_sources: Vec<CapSource>,
    pub combined: bool,
    /// Σ R_n/ρ_n over the finite schedule.
    #[serde(with = "serde_rat")]
    pub c1: BigRational,
    /// Σ R_n.
    #[serde(with = "serde_rat")]
    pub cap_sum: BigRational,
    /// Bound on C_1 for any continuation with R_n <= ρ_n/n².
    #[serde(with = "serde_rat")]
    pub c1_extension_bound: BigRational,
    /// Hashes of the certificates this schedule relies on.
    pub references: Vec<String>,
}

impl Schedule {
    pub fn radius(&self, n: usize) -> BigRational {
        dyadic(self.radii_exponents[n - 1])
    }

    pub fn radius_f64(&self, n: usize) -> f64 {
        0.5f64.powi(self.radii_exponents[n - 1] as i32)
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    fn recompute_sums(&mut self) {
        let mut c1 = BigRational::zero();
        let mut sum = BigRational::zero();
        for (i, r) in self.caps.iter().enumerate() {
            c1 += r / self.radius(i + 1);
            sum += r;
        }
        let n = self.caps.len().max(1) as i64;
        self.c1_extension_bound = &c1 + rat(1, n);
        self.c1 = c1;
        self.cap_sum = sum;
    }

    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new(
            "schedule",
            "schedule",
            "R_n = rho_n/n^2 (or the smaller placement cap) and C_1 = sum R_n/rho_n is finite",
        )
        .input("poles", &self.poles)
        .input("radii_exponents", &self.radii_exponents);
        c.method = "exact rational summation over the finite schedule; continuation bound sum_{n>N} 1/n^2 < 1/N".into();
        c.valid = self.caps.iter().all(|r| r.is_positive());
        c.value = Quantity::exact(&self.c1);
        c.bound = Quantity::exact(&self.c1_extension_bound);
        c.margin = Quantity::exact(&(&self.c1_extension_bound - &self.c1));
        c.references = self.references.clone();
        c.details = serde_json::json!({
            "caps": self.caps.iter().map(RationalRepr::from).collect::<Vec<_>>(),
            "cap_sources": self.cap_sources,
            "cap_sum": RationalRepr::from(&self.cap_sum),
            "combined": self.combined,
        });
        c
    }
}

/// Hull caps R_n = ρ_n/n² from a valid thinness certificate and valid
/// harmonic-measure certificates.
pub fn build_hull_schedule(
    poles: &[ComplexPoint],
    frame: Frame,
    arc: ArcSpec,
    thin: &ThinnessCertificate,
    measure_certs: &[Certificate],
) -> Result<Schedule> {
    if !thin.valid {
        return Err(Error::Precondition("thinness certificate is invalid".into()));
    }
    if thin.schedule.entries.len() != poles.len() {
        return Err(Error::Precondition("thinness schedule does not cover every pole".into()));
    }
    for kind in ["outer_measure", "arc_measure"] {
        if !measure_certs.iter().any(|c| c.kind == kind) {
            return Err(Error::Precondition(format!("missing {kind} certificate")));
        }
    }
    if let Some(bad) = measure_certs.iter().find(|c| !c.valid) {
        return Err(Error::Precondition(format!("certificate {} is invalid", bad.id)));
    }
    let radii_exponents: Vec<u32> = thin.schedule.entries.iter().map(|e| e.exponent).collect();
    let caps = radii_exponents
        .iter()
        .enumerate()
        .map(|(i, &m)| dyadic(m) / int(((i + 1) * (i + 1)) as i64))
        .collect::<Vec<_>>();
    let mut references = vec![thin.to_certificate().hash()];
    references.extend(measure_certs.iter().map(Certificate::hash));
    let mut s = Schedule {
        frame,
        rho: thin.schedule.rho,
        arc,
        symmetry_order: thin.schedule.symmetry_order,
        poles: poles.to_vec(),
        cap_sources: vec![CapSource::Hull; caps.len()],
        radii_exponents,
        caps,
        combined: false,
        c1: BigRational::zero(),
        cap_sum: BigRational::zero(),
        c1_extension_bound: BigRational::zero(),
        references,
    };
    s.recompute_sums();
    Ok(s)
}

/// Schedule from explicit dyadic radii, R_n = ρ_n/n² (no certificates attached).
pub fn schedule_from_radii(poles: &[ComplexPoint], radii_exponents: &[u32], frame: Frame, rho: f64, arc: ArcSpec) -> Schedule {
    let caps = radii_exponents
        .iter()
        .enumerate()
        .map(|(i, &m)| dyadic(m) / int(((i + 1) * (i + 1)) as i64))
        .collect::<Vec<_>>();
    let mut s = Schedule {
        frame,
        rho,
        arc,
        symmetry_order: arc.n0,
        poles: poles.to_vec(),
        radii_exponents: radii_exponents.to_vec(),
        cap_sources: vec![CapSource::Hull; caps.len()],
        caps,
        combined: false,
        c1: BigRational::zero(),
        cap_sum: BigRational::zero(),
        c1_extension_bound: BigRational::zero(),
        references: Vec::new(),
    };
    s.recompute_sums();
    s
}

/// caps'_n = min(R_n^hull, R_n^placement), source recorded per index.
pub fn combine_caps(hull: &Schedule, placement: &PlacementData) -> Result<Schedule> {
    if hull.poles.len() != placement.boundary_poles.len()
        || hull.poles.iter().zip(&placement.boundary_poles).any(|(a, b)| a.dist(b) > 1e-12)
    {
        return Err(Error::InvalidInput("hull schedule and placement data use different poles".into()));
    }
    let mut out = hull.clone();
    for (i, lc) in placement.caps.iter().enumerate() {
        let l = from_f64(*lc)?;
        if l < out.caps[i] {
            out.caps[i] = l;
            out.cap_sources[i] = CapSource::Placement;
        }
    }
    out.combined = true;
    out.recompute_sums();
    Ok(out)
}

/// R'_j = min of R_n over the ring indices 2^j <= n < 2^{j+1}.
pub fn ring_caps(schedule: &Schedule, stages: usize) -> Result<Vec<BigRational>> {
    if schedule.caps.len() < (1usize << (stages + 1)) - 1 {
        return Err(Error::InvalidInput("schedule has fewer poles than the ring layout needs".into()));
    }
    Ok((0..=stages)
        .map(|j| {
            let lo = 1usize << j;
            let hi = 1usize << (j + 1);
            schedule.caps[lo - 1..hi - 1].iter().min().cloned().expect("non-empty ring")
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub k_max: u64,
    pub witness_scan_max: u64,
    pub halving_limit: u32,
    pub stage_limit: usize,
    /// When set, ε_n is also made small enough that the degree-normalized
    /// probe values at this point decrease from stage to stage.
    #[serde(default)]
    pub evidence_anchor: Option<ComplexPoint>,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            k_max: 1 << 16,
            witness_scan_max: 1 << 20,
            halving_limit: 256,
            stage_limit: 8,
            evidence_anchor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub stage: usize,
    #[serde(with = "serde_rat")]
    pub candidate: BigRational,
    pub reason: String,
}

/// One strict inequality with its exact margin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// smooth | tail | cn | radius | eps_cap
    pub family: String,
    pub stage: usize,
    pub order: usize,
    pub k: u64,
    #[serde(with = "serde_rat")]
    pub lhs: BigRational,
    #[serde(with = "serde_rat")]
    pub rhs: BigRational,
    /// Positive slack of the inequality.
    #[serde(with = "serde_rat")]
    pub margin: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub stages: usize,
    pub order: usize,
    #[serde(with = "serde_rat_vec")]
    pub caps: Vec<BigRational>,
    #[serde(with = "serde_rat_vec")]
    pub eps: Vec<BigRational>,
    #[serde(with = "serde_rat_vec")]
    pub constants: Vec<BigRational>,
    pub witnesses: Vec<TaylorWitness>,
    pub halvings: Vec<u32>,
    pub rejected: Vec<RejectedCandidate>,
    pub audit: Vec<AuditEntry>,
    pub options: SelectionOptions,
}

impl SelectionState {
    pub fn series(&self) -> LacunarySeries {
        LacunarySeries::new(self.eps.clone()).expect("selected eps are positive")
    }

    pub fn to_certificate(&self) -> Certificate {
        let min_margin = self
            .audit
            .iter()
            .map(|e| crate::exact::to_f64(&e.margin))
            .fold(f64::INFINITY, f64::min);
        let mut c = Certificate::new(
            "selection",
            "selection",
            "every (smooth), (Cn), (radius), tail, and eps-cap inequality of the selection holds strictly",
        )
        .input("stages", self.stages)
        .input("order", self.order)
        .input("caps", self.caps.iter().map(RationalRepr::from).collect::<Vec<_>>())
        .input("options", &self.options);
        c.method = "exact rational decisions with log2-bracket filters; halving search per stage".into();
        c.valid = self.audit.iter().all(|e| e.margin.is_positive());
        c.value = Quantity::float(self.audit.len() as f64);
        c.bound = Quantity::float(0.0);
        c.margin = Quantity::float(min_margin);
        c.details = serde_json::to_value(self).expect("selection serializes");
        c
    }
}

fn sup_all_k(series: &LacunarySeries, n: usize, l: usize, k_max: u64) -> Result<(BigRational, u64)> {
    let (best, k) = CoefficientModel::new(series, n).sup_scaled(l, k_max);
    let t = tail_check(series, n, l, k_max, &best, false)?;
    if !t.ok {
        return Err(Error::SmoothnessTail { order: l, k_max, required: k_max * 2 });
    }
    Ok((best, k))
}

/// Conditions (1) and (2) for a stage-n candidate: (smooth) for l <= n at all
/// k <= k_max plus tails, and persistence of the earlier witnesses.
fn stage_ok(series: &LacunarySeries, n: usize, constants: &[BigRational], witnesses: &[TaylorWitness], k_max: u64) -> Result<Option<String>> {
    let model = CoefficientModel::new(series, n);
    for (l, c) in constants.iter().enumerate().take(n + 1) {
        if let Some(k) = model.first_violation(l, c, k_max, true) {
            return Ok(Some(format!("(smooth) fails for l={l} at k={k}")));
        }
        let t = tail_check(series, n, l, k_max, c, true)?;
        if !t.ok {
            return Ok(Some(format!("(smooth) tail fails for l={l} beyond k={k_max}")));
        }
    }
    for w in witnesses {
        if !w.holds_for(series, n) {
            return Ok(Some(format!("witness k_{} = {} lost", w.stage, w.k)));
        }
    }
    Ok(None)
}

fn ring_gap(j: usize, a: Complex64) -> Complex64 {
    let mut z = a;
    for _ in 0..j {
        z = z * z;
    }
    Complex64::new(to_f64(&LacunarySeries::pole_power(j)), 0.0) - z
}

/// Estimated change of the normalized probe value at `a` from stage n−2 to
/// n−1 when ε_n is the last entry; negative means decreasing.
fn decay_gap(eps: &[BigRational], a: Complex64) -> f64 {
    let n = eps.len() - 1;
    let q = |m: usize| (0..=m).map(|j| ring_gap(j, a).norm().ln()).sum::<f64>();
    let deg = |m: usize| ((1u64 << (m + 1)) - 1) as f64;
    let logs: Vec<(f64, Complex64)> = (n - 1..=n)
        .map(|j| {
            let g = ring_gap(j, a);
            (ln_abs(&eps[j]) - g.norm().ln(), g.conj() / g.norm())
        })
        .collect();
    let top = logs.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let sum: Complex64 = logs.iter().map(|(l, ph)| ph * (l - top).exp()).sum();
    let prev = (q(n - 2) + sum.norm().ln() + top) / deg(n - 2);
    let next = (q(n - 1) + std::f64::consts::LN_2 + logs[1].0) / deg(n - 1);
    next - prev
}

/// Chooses ε_0..ε_J, C_0..C_max(J,L), and witnesses k_0..k_J.
pub fn select_epsilons(caps: &[BigRational], stages: usize, order: usize, opts: &SelectionOptions) -> Result<SelectionState> {
    if stages > opts.stage_limit {
        return Err(Error::InvalidInput(format!("J = {stages} exceeds the stage limit {}", opts.stage_limit)));
    }
    if caps.len() < stages + 1 {
        return Err(Error::InvalidInput(format!("need {} ring caps, got {}", stages + 1, caps.len())));
    }
    if let Some(j) = caps[..=stages].iter().position(|c| !c.is_positive()) {
        return Err(Error::InvalidInput(format!("cap R'_{j} must be positive")));
    }
    if opts.k_max < (1u64 << stages) {
        return Err(Error::InvalidInput("k_max must be at least 2^J".into()));
    }
    let two = int(2);
    let mut eps: Vec<BigRational> = Vec::new();
    let mut constants: Vec<BigRational> = Vec::new();
    let mut witnesses = Vec::new();
    let mut halvings = Vec::new();
    let mut rejected = Vec::new();
    for n in 0..=stages {
        if n == 0 {
            eps.push(caps[0].clone());
            let s = LacunarySeries::new(eps.clone())?;
            let (sup, _) = sup_all_k(&s, 0, 0, opts.k_max)?;
            constants.push(&sup * &two);
            halvings.push(0);
            if let Some(why) = stage_ok(&s, 0, &constants, &witnesses, opts.k_max)? {
                return Err(Error::Selection(format!("stage 0: {why}")));
            }
        } else {
            let prev = LacunarySeries::new(eps.clone())?;
            let (sup, _) = sup_all_k(&prev, n - 1, n, opts.k_max)?;
            constants.push(&sup * &two);
            let mut cand = &caps[n] / &two;
            let mut h = 1u32;
            loop {
                let mut trial = eps.clone();
                trial.push(cand.clone());
                let decay = match opts.evidence_anchor {
                    Some(a) if n >= 3 => {
                        let g = decay_gap(&trial, a.c());
                        (g >= 0.0).then(|| format!("probe evidence would not decrease (gap {g:.3e})"))
                    }
                    _ => None,
                };
                let verdict = match decay {
                    Some(why) => Some(why),
                    None => stage_ok(&LacunarySeries::new(trial)?, n, &constants, &witnesses, opts.k_max)?,
                };
                match verdict {
                    None => break,
                    Some(why) => {
                        rejected.push(RejectedCandidate { stage: n, candidate: cand.clone(), reason: why.clone() });
                        if h >= opts.halving_limit {
                            return Err(Error::Selection(format!(
                                "stage {n}: eps below 2^-{h} R'_{n} still fails: {why}"
                            )));
                        }
                        cand /= &two;
                        h += 1;
                    }
                }
            }
            eps.push(cand);
            halvings.push(h);
        }
        let s = LacunarySeries::new(eps.clone())?;
        witnesses.push(radius_witness(&s, n, &default_threshold(n), opts.witness_scan_max)?);
    }
    let full = LacunarySeries::new(eps.clone())?;
    for l in stages + 1..=order {
        let (sup, _) = sup_all_k(&full, stages, l, opts.k_max)?;
        constants.push(&sup * &two);
    }
    let mut state = SelectionState {
        stages,
        order,
        caps: caps[..=stages].to_vec(),
        eps,
        constants,
        witnesses,
        halvings,
        rejected,
        audit: Vec::new(),
        options: opts.clone(),
    };
    state.audit = build_audit(&state)?;
    Ok(state)
}

fn build_audit(state: &SelectionState) -> Result<Vec<AuditEntry>> {
    let series = state.series();
    let k_max = state.options.k_max;
    let mut out = Vec::new();
    let kp = |k: u64, l: usize| BigRational::from_integer(num_traits::pow(BigInt::from(k), l));
    for j in 0..=state.stages {
        let model = CoefficientModel::new(&series, j);
        for (l, c) in state.constants.iter().enumerate() {
            let (sup, k) = model.sup_scaled(l, k_max);
            out.push(AuditEntry {
                family: "smooth".into(),
                stage: j,
                order: l,
                k,
                margin: c - &sup,
                lhs: sup,
                rhs: c.clone(),
            });
            let t = tail_check(&series, j, l, k_max, c, true)?;
            out.push(AuditEntry {
                family: "tail".into(),
                stage: j,
                order: l,
                k: t.k_from,
                margin: c - &t.bound,
                lhs: t.bound,
                rhs: c.clone(),
            });
        }
    }
    for (n, c) in state.constants.iter().enumerate().skip(1) {
        let j = (n - 1).min(state.stages);
        let (sup, k) = CoefficientModel::new(&series, j).sup_scaled(n, k_max);
        debug_assert_eq!(series.stage_coefficient(j, k) * kp(k, n), sup);
        out.push(AuditEntry { family: "cn".into(), stage: j, order: n, k, margin: c - &sup, lhs: sup, rhs: c.clone() });
    }
    for w in &state.witnesses {
        let rhs = num_traits::pow(w.threshold.recip(), w.k as usize);
        for l in w.stage..=state.stages {
            let lhs = series.stage_coefficient(l, w.k);
            out.push(AuditEntry {
                family: "radius".into(),
                stage: w.stage,
                order: l,
                k: w.k,
                margin: &lhs - &rhs,
                lhs,
                rhs: rhs.clone(),
            });
        }
    }
    for n in 1..=state.stages {
        out.push(AuditEntry {
            family: "eps_cap".into(),
            stage: n,
            order: 0,
            k: 0,
            margin: &state.caps[n] - &state.eps[n],
            lhs: state.eps[n].clone(),
            rhs: state.caps[n].clone(),
        });
    }
    out.sort_by(|a, b| (&a.family, a.stage, a.order, a.k).cmp(&(&b.family, b.stage, b.order, b.k)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecheckReport {
    pub checked: usize,
    pub coefficient_checks: u64,
    pub violations: Vec<String>,
}

impl RecheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Independent re-check of a selection: its own coefficient code (long
/// division for small k, termwise envelopes over dyadic blocks above),
/// its own tail arithmetic, and exact integer comparisons throughout.
pub struct Rechecker<'a> {
    eps: &'a [BigRational],
    small: Vec<Vec<BigRational>>,
    k_small: u64,
    pub coefficient_checks: u64,
}

fn ring_ratio(j: usize) -> (BigInt, BigInt) {
    // 1/r_j = (j+1)/(j+2)
    (BigInt::from(j as i64 + 1), BigInt::from(j as i64 + 2))
}

impl<'a> Rechecker<'a> {
    pub fn new(eps: &'a [BigRational], k_small: u64) -> Self {
        // per-stage coefficient tables by power-series division
        let mut small = Vec::new();
        let mut acc = vec![BigRational::zero(); k_small as usize + 1];
        for (j, e) in eps.iter().enumerate() {
            let (p, q) = ring_ratio(j);
            let nj = 1usize << j;
            let a = BigRational::new(num_traits::pow(q.clone(), nj), num_traits::pow(p.clone(), nj));
            // 1/(A − w) with w = z^N: Σ_m w^m / A^{m+1}
            let mut term = e / &a;
            let mut k = 0usize;
            while k <= k_small as usize {
                acc[k] += &term;
                term /= &a;
                k += nj;
            }
            small.push(acc.clone());
        }
        Rechecker { eps, small, k_small, coefficient_checks: 0 }
    }

    fn direct(&self, j: usize, k: u64) -> BigRational {
        if k <= self.k_small {
            return self.small[j][k as usize].clone();
        }
        let mut s = BigRational::zero();
        for i in 0..=j {
            let nj = 1u64 << i;
            if k.is_multiple_of(nj) {
                let (p, q) = ring_ratio(i);
                let e = (k + nj) as usize;
                s += &self.eps[i] * BigRational::new(num_traits::pow(p, e), num_traits::pow(q, e));
            }
        }
        s
    }

    /// d_{j,k} k^l < c for every 1 <= k <= k_max.
    pub fn smooth_holds(&mut self, j: usize, l: usize, c: &BigRational, k_max: u64) -> Option<u64> {
        let kp = |k: u64| BigRational::from_integer(num_traits::pow(BigInt::from(k), l));
        for k in 1..=k_max.min(self.k_small) {
            self.coefficient_checks += 1;
            if self.direct(j, k) * kp(k) >= *c {
                return Some(k);
            }
        }
        let mut lo = self.k_small + 1;
        while lo <= k_max {
            let hi = (2 * lo - 1).min(k_max);
            if let Some(k) = self.block(j, l, c, lo, hi) {
                return Some(k);
            }
            lo = hi + 1;
        }
        None
    }

    /// Termwise envelope over [lo, hi]: each ring term at lo times hi^l below c/(j+1).
    fn block(&mut self, j: usize, l: usize, c: &BigRational, lo: u64, hi: u64) -> Option<u64> {
        self.coefficient_checks += 1;
        let hl = num_traits::pow(BigInt::from(hi), l);
        let parts = BigInt::from(j as i64 + 1);
        let ok = (0..=j).all(|i| {
            let (p, q) = ring_ratio(i);
            let e = (lo + (1u64 << i)) as usize;
            // ε p^e hi^l (j+1) c.den < c.num q^e ε.den
            let lhs = self.eps[i].numer() * num_traits::pow(p, e) * &hl * &parts * c.denom();
            let rhs = c.numer() * num_traits::pow(q, e) * self.eps[i].denom();
            lhs < rhs
        });
        if ok {
            return None;
        }
        if lo == hi {
            let v = self.direct(j, lo) * BigRational::from_integer(hl);
            return if v >= *c { Some(lo) } else { None };
        }
        let mid = lo + (hi - lo) / 2;
        self.block(j, l, c, lo, mid).or_else(|| self.block(j, l, c, mid + 1, hi))
    }

    /// Exact Cauchy tail of the stage-j series from k_from on is at most `bound`.
    pub fn tail_holds(&self, j: usize, l: usize, k_from: u64, bound: &BigRational) -> bool {
        // r' = (1 + r_j)/2 = (2j+3)/(2j+2)
        let rp = BigRational::new(BigInt::from(2 * j as i64 + 3), BigInt::from(2 * j as i64 + 2));
        let mut m = BigRational::zero();
        for i in 0..=j {
            let nj = 1usize << i;
            let r = BigRational::new(BigInt::from(i as i64 + 2), BigInt::from(i as i64 + 1));
            m += &self.eps[i] / (num_traits::pow(r, nj) - num_traits::pow(rp.clone(), nj));
        }
        let step = num_traits::pow(BigRational::new(BigInt::from(k_from + 1), BigInt::from(k_from)), l);
        if step > rp {
            return false;
        }
        // m (1/r')^{k} k^l <= bound, cross-multiplied
        let kl = num_traits::pow(BigInt::from(k_from), l);
        let lhs = m.numer() * num_traits::pow(rp.denom().clone(), k_from as usize) * kl * bound.denom();
        let rhs = bound.numer() * m.denom() * num_traits::pow(rp.numer().clone(), k_from as usize);
        lhs <= rhs
    }

    pub fn coefficient(&self, j: usize, k: u64) -> BigRational {
        self.direct(j, k)
    }
}

pub fn recheck_selection(state: &SelectionState) -> RecheckReport {
    let mut rc = Rechecker::new(&state.eps, 256);
    let mut violations = Vec::new();
    let k_max = state.options.k_max;
    let kp = |k: u64, l: usize| BigRational::from_integer(num_traits::pow(BigInt::from(k), l));
    for e in &state.audit {
        if !e.margin.is_positive() {
            violations.push(format!("{} j={} l={}: non-positive margin", e.family, e.stage, e.order));
        }
        match e.family.as_str() {
            "smooth" => {
                if let Some(k) = rc.smooth_holds(e.stage, e.order, &e.rhs, k_max) {
                    violations.push(format!("smooth j={} l={} fails at k={k}", e.stage, e.order));
                }
                if rc.coefficient(e.stage, e.k) * kp(e.k, e.order) != e.lhs || &e.rhs - &e.lhs != e.margin {
                    violations.push(format!("smooth j={} l={}: recorded value mismatch", e.stage, e.order));
                }
                if Some(&e.rhs) != state.constants.get(e.order) {
                    violations.push(format!("smooth l={}: constant mismatch", e.order));
                }
            }
            "tail" => {
                if !rc.tail_holds(e.stage, e.order, e.k, &e.lhs) || e.lhs >= e.rhs {
                    violations.push(format!("tail j={} l={} fails", e.stage, e.order));
                }
            }
            "cn" => {
                let v = rc.coefficient(e.stage, e.k) * kp(e.k, e.order);
                if v != e.lhs || v >= e.rhs || Some(&e.rhs) != state.constants.get(e.order) {
                    violations.push(format!("cn n={} fails", e.order));
                }
                if let Some(k) = rc.smooth_holds(e.stage, e.order, &e.rhs, k_max) {
                    violations.push(format!("cn n={} exceeded at k={k}", e.order));
                }
            }
            "radius" => {
                let d = rc.coefficient(e.order, e.k);
                let w = &state.witnesses[e.stage];
                let th = &w.threshold;
                let lhs = d.numer() * num_traits::pow(th.numer().clone(), e.k as usize);
                let rhs = d.denom() * num_traits::pow(th.denom().clone(), e.k as usize);
                if !(lhs > rhs) || d != e.lhs {
                    violations.push(format!("radius j={} l={} fails", e.stage, e.order));
                }
            }
            "eps_cap" => {
                if !(e.lhs < e.rhs) || state.eps[e.stage] != e.lhs || state.caps[e.stage] != e.rhs {
                    violations.push(format!("eps_cap n={} fails", e.stage));
                }
            }
            other => violations.push(format!("unknown family {other}")),
        }
    }
    // completeness: every (family, j, l) pair expected is present exactly once
    let lmax = state.constants.len();
    for fam in ["smooth", "tail"] {
        for j in 0..=state.stages {
            for l in 0..lmax {
                let n = state.audit.iter().filter(|e| e.family == fam && e.stage == j && e.order == l).count();
                if n != 1 {
                    violations.push(format!("{fam} j={j} l={l} logged {n} times"));
                }
            }
        }
    }
    if state.witnesses.len() != state.stages + 1 {
        violations.push("missing witnesses".into());
    }
    RecheckReport { checked: state.audit.len(), coefficient_checks: rc.coefficient_checks, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{placed_poles, DomainSpec};

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new_unchecked(re, im)
    }

    #[test]
    fn single_pole_schedule() {
        let s = schedule_from_radii(&[cp(2.0, 0.0)], &[2], Frame::identity(), 1.0, ArcSpec::new(0, 4).unwrap());
        assert_eq!(s.caps[0], rat(1, 4));
        assert_eq!(s.c1, rat(1, 1));
    }

    #[test]
    fn dyadic_radii_cap_sum_matches_dilogarithm() {
        let n = 200;
        let poles: Vec<ComplexPoint> = (0..n).map(|i| cp(2.0 + i as f64, 0.0)).collect();
        let exps: Vec<u32> = (1..=n as u32).collect();
        let s = schedule_from_radii(&poles, &exps, Frame::identity(), 1.0, ArcSpec::new(0, 4).unwrap());
        // Σ 2^{-n}/n² = Li2(1/2) = π²/12 − (ln 2)²/2, tail below 2^{-200}
        let li2: BigRational = crate::exact::parse_rational("0.58224052646501250590265632015968010874419847480").unwrap();
        let diff = (&s.cap_sum - &li2).abs();
        assert!(diff < crate::exact::pow2(-150), "{}", crate::exact::decimal_string(&diff));
        // C_1 = Σ 1/n² here
        assert!(s.c1 < rat(16449, 10000) && s.c1 > rat(1639, 1000));
    }

    #[test]
    fn combine_takes_minimum() {
        let data = placed_poles(&DomainSpec::UnitDisc, 4, 1024).unwrap();
        let hull = schedule_from_radii(&data.boundary_poles, &[0, 0, 0, 0], Frame::identity(), 0.375, ArcSpec::new(0, 4).unwrap());
        let c = combine_caps(&hull, &data).unwrap();
        for i in 0..4 {
            assert!(c.caps[i] <= hull.caps[i]);
            assert!(crate::exact::to_f64(&c.caps[i]) <= data.caps[i] * (1.0 + 1e-15));
        }
        assert_eq!(c.cap_sources[0], CapSource::Hull);
        assert!(c.cap_sources.contains(&CapSource::Placement));
        let same = combine_caps(&c, &data).unwrap();
        assert_eq!(same.caps, c.caps);
        let other = schedule_from_radii(&[cp(5.0, 0.0)], &[3], Frame::identity(), 0.375, ArcSpec::new(0, 4).unwrap());
        assert!(combine_caps(&other, &data).is_err());
    }

    #[test]
    fn selection_j0() {
        let st = select_epsilons(&[rat(1, 10)], 0, 0, &SelectionOptions { k_max: 256, ..Default::default() }).unwrap();
        assert_eq!(st.eps[0], rat(1, 10));
        // C_0 = 2 max_k d_{0,k} = 2 ε_0/4
        assert_eq!(st.constants[0], rat(1, 20));
        assert_eq!(st.witnesses.len(), 1);
        assert!(recheck_selection(&st).ok());
    }

    #[test]
    fn selection_j1_rechecked() {
        let opts = SelectionOptions { k_max: 1 << 12, ..Default::default() };
        let st = select_epsilons(&[rat(1, 10), rat(1, 10)], 1, 2, &opts).unwrap();
        assert!(st.eps[1] < rat(1, 10));
        assert_eq!(st.constants.len(), 3);
        let rep = recheck_selection(&st);
        assert!(rep.ok(), "{:?}", rep.violations);
        // tampering is caught
        let mut bad = st.clone();
        bad.constants[0] = &bad.constants[0] / int(4);
        for e in bad.audit.iter_mut().filter(|e| e.order == 0 && e.family == "smooth") {
            e.rhs = bad.constants[0].clone();
            e.margin = &e.rhs - &e.lhs;
        }
        assert!(!recheck_selection(&bad).ok());
    }

    #[test]
    fn zero_cap_rejected() {
        assert!(select_epsilons(&[rat(1, 10), rat(0, 1)], 1, 1, &SelectionOptions::default()).is_err());
    }
}
