//! Exact decisions about lacunary coefficients. Each comparison first tries
//! integer log2 brackets and falls back to exact rationals only when the
//! brackets overlap.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Quantity};
use crate::error::{Error, Result};
use crate::exact::{pow2, serde_rat, serde_rat_vec, to_f64, Log2Bracket, LOG_DEN};
use crate::series::lacunary::LacunarySeries;

fn floor_log2_u64(k: u64) -> i64 {
    63 - k.leading_zeros() as i64
}

fn ceil_log2_u64(k: u64) -> i64 {
    floor_log2_u64(k) + if k.is_power_of_two() { 0 } else { 1 }
}

/// (lo, hi) with 2^lo < x < 2^hi for a positive rational.
fn rat_exp_bounds(x: &BigRational) -> (i64, i64) {
    let bn = x.numer().bits() as i64;
    let bd = x.denom().bits() as i64;
    (bn - 1 - bd, bn - bd + 1)
}

fn kpow(k: u64, l: usize) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(k), l))
}

/// Stage-n coefficients d_{n,k} with bracket filters.
pub struct CoefficientModel<'a> {
    series: &'a LacunarySeries,
    n: usize,
    ring_log: Vec<Log2Bracket>,
    eps_hi: Vec<i64>,
    eps_lo: Vec<i64>,
}

impl<'a> CoefficientModel<'a> {
    pub fn new(series: &'a LacunarySeries, n: usize) -> Self {
        let n = n.min(series.stages());
        let ring_log = (0..=n).map(|j| Log2Bracket::fine(&LacunarySeries::radius(j))).collect();
        let (eps_lo, eps_hi) = series.eps()[..=n].iter().map(rat_exp_bounds).unzip();
        CoefficientModel { series, n, ring_log, eps_hi, eps_lo }
    }

    pub fn stage(&self) -> usize {
        self.n
    }

    pub fn series(&self) -> &LacunarySeries {
        self.series
    }

    fn rings(&self, k: u64) -> impl Iterator<Item = usize> + '_ {
        (0..=self.n).filter(move |&j| k.is_multiple_of(1u64 << j))
    }

    /// e with d_{n,k} <= 2^e; None when d_{n,k} = 0.
    pub fn upper_exp(&self, k: u64) -> Option<i64> {
        let mut best: Option<i64> = None;
        let mut count = 0u64;
        for j in self.rings(k) {
            let e = self.eps_hi[j] - self.ring_log[j].pow_lower((k + (1u64 << j)) as i64);
            best = Some(best.map_or(e, |b| b.max(e)));
            count += 1;
        }
        best.map(|b| b + ceil_log2_u64(count.max(1)))
    }

    /// e with d_{n,k} >= 2^e; None when d_{n,k} = 0.
    pub fn lower_exp(&self, k: u64) -> Option<i64> {
        self.rings(k)
            .map(|j| self.eps_lo[j] - self.ring_log[j].pow_upper((k + (1u64 << j)) as i64))
            .max()
    }

    pub fn exact(&self, k: u64) -> BigRational {
        self.series.stage_coefficient(self.n, k)
    }

    /// d_{n,k} k^l < c, decided exactly.
    pub fn scaled_below(&self, k: u64, l: usize, c: &BigRational) -> bool {
        let (c_lo, c_hi) = rat_exp_bounds(c);
        let Some(up) = self.upper_exp(k) else { return c.is_positive() };
        if up + l as i64 * ceil_log2_u64(k) <= c_lo {
            return true;
        }
        let lo = self.lower_exp(k).expect("nonzero coefficient");
        if lo + l as i64 * floor_log2_u64(k) >= c_hi {
            return false;
        }
        self.exact(k) * kpow(k, l) < *c
    }

    /// max_{1<=k<=k_max} d_{n,k} k^l and its smallest maximizer.
    pub fn sup_scaled(&self, l: usize, k_max: u64) -> (BigRational, u64) {
        let mut best = self.exact(1) * kpow(1, l);
        let mut arg = 1;
        let mut best_lo = rat_exp_bounds(&best).0;
        for k in 2..=k_max {
            let Some(up) = self.upper_exp(k) else { continue };
            if up + l as i64 * ceil_log2_u64(k) <= best_lo {
                continue;
            }
            let v = self.exact(k) * kpow(k, l);
            if v > best {
                best = v;
                arg = k;
                best_lo = rat_exp_bounds(&best).0;
            }
        }
        (best, arg)
    }

    /// First k <= k_max with d_{n,k} k^l >= c (strict) or > c (non-strict).
    pub fn first_violation(&self, l: usize, c: &BigRational, k_max: u64, strict: bool) -> Option<u64> {
        (1..=k_max).find(|&k| {
            if strict {
                !self.scaled_below(k, l, c)
            } else {
                let v = self.exact_if_close(k, l, c);
                match v {
                    Some(v) => v > *c,
                    None => false,
                }
            }
        })
    }

    /// Exact d_{n,k} k^l unless the brackets already place it below c.
    fn exact_if_close(&self, k: u64, l: usize, c: &BigRational) -> Option<BigRational> {
        let (c_lo, _) = rat_exp_bounds(c);
        let up = self.upper_exp(k)?;
        if up + l as i64 * ceil_log2_u64(k) <= c_lo {
            return None;
        }
        Some(self.exact(k) * kpow(k, l))
    }
}

/// Cauchy tail: for k > k_max, d_k k^l <= M(r') r'^{-k} k^l <= `bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub order: usize,
    pub stage: usize,
    pub k_from: u64,
    #[serde(with = "serde_rat")]
    pub r_prime: BigRational,
    #[serde(with = "serde_rat")]
    pub majorant: BigRational,
    /// Certified upper bound of M(r') r'^{-k_from} k_from^l.
    #[serde(with = "serde_rat")]
    pub bound: BigRational,
    pub ok: bool,
}

/// Checks the Cauchy tail of the stage-n series beyond k_max against c.
pub fn tail_check(series: &LacunarySeries, n: usize, l: usize, k_max: u64, c: &BigRational, strict: bool) -> Result<TailReport> {
    let s = series.truncated(n);
    let rp = s.cauchy_radius();
    let m = s.cauchy_majorant(&rp)?;
    let k1 = k_max + 1;
    // k^l r'^{-k} is non-increasing from k1 on when ((k1+1)/k1)^l <= r'
    let step = num_traits::pow(
        BigRational::new(BigInt::from(k1 + 1), BigInt::from(k1)),
        l,
    );
    let monotone = step <= rp;
    let br = Log2Bracket::fine(&rp);
    let (_, m_hi) = rat_exp_bounds(&m);
    let e = m_hi + br.pow_upper(-(k1 as i64)) + l as i64 * ceil_log2_u64(k1);
    let (c_lo, _) = rat_exp_bounds(c);
    let (bound, ok) = if e <= c_lo {
        (pow2(e), true)
    } else {
        let exact = &m * num_traits::pow(rp.recip(), k1 as usize) * kpow(k1, l);
        let ok = if strict { exact < *c } else { exact <= *c };
        (exact, ok)
    };
    Ok(TailReport { order: l, stage: n, k_from: k1, r_prime: rp, majorant: m, bound, ok: ok && monotone })
}

/// Smallest k_max (by doubling) for which the tail check passes.
fn required_k(series: &LacunarySeries, n: usize, l: usize, from: u64, c: &BigRational, strict: bool) -> u64 {
    let mut k = from.max(1);
    while k < (1u64 << 40) {
        k *= 2;
        if tail_check(series, n, l, k, c, strict).map(|t| t.ok).unwrap_or(false) {
            return k;
        }
    }
    k
}

/// |d_k| <= C_l / k^l for l = 0..=L and all k >= 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub order: usize,
    #[serde(with = "serde_rat_vec")]
    pub constants: Vec<BigRational>,
    pub argmax: Vec<u64>,
    pub k_max: u64,
    pub tails: Vec<TailReport>,
    pub valid: bool,
}

/// C_l = max_{k<=K} d_k k^l, extended to all k by the Cauchy tail.
pub fn smoothness_constants(series: &LacunarySeries, order: usize, k_max: u64) -> Result<SmoothnessCertificate> {
    let j = series.stages();
    if k_max < (1u64 << j) {
        return Err(Error::InvalidInput(format!("k_max = {k_max} is below 2^J = {}", 1u64 << j)));
    }
    let model = CoefficientModel::new(series, j);
    let mut constants = Vec::new();
    let mut argmax = Vec::new();
    let mut tails = Vec::new();
    for l in 0..=order {
        let (c, k) = model.sup_scaled(l, k_max);
        let t = tail_check(series, j, l, k_max, &c, false)?;
        if !t.ok {
            return Err(Error::SmoothnessTail { order: l, k_max, required: required_k(series, j, l, k_max, &c, false) });
        }
        constants.push(c);
        argmax.push(k);
        tails.push(t);
    }
    Ok(SmoothnessCertificate { order, constants, argmax, k_max, tails, valid: true })
}

/// Re-checks given constants: d_k k^l <= C_l (or < when strict) for k <= K and the tail.
pub fn verify_smoothness(series: &LacunarySeries, constants: &[BigRational], k_max: u64, strict: bool) -> Result<SmoothnessCertificate> {
    let j = series.stages();
    let model = CoefficientModel::new(series, j);
    let mut tails = Vec::new();
    let mut valid = true;
    let mut argmax = Vec::new();
    for (l, c) in constants.iter().enumerate() {
        if model.first_violation(l, c, k_max, strict).is_some() {
            valid = false;
        }
        let t = tail_check(series, j, l, k_max, c, strict)?;
        valid &= t.ok;
        tails.push(t);
        argmax.push(model.sup_scaled(l, k_max.min(4096)).1);
    }
    Ok(SmoothnessCertificate {
        order: constants.len().saturating_sub(1),
        constants: constants.to_vec(),
        argmax,
        k_max,
        tails,
        valid,
    })
}

impl SmoothnessCertificate {
    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new(
            "smoothness",
            "smoothness",
            "|d_k| k^l <= C_l for all k >= 1 and l = 0..=L",
        )
        .input("order", self.order)
        .input("k_max", self.k_max);
        c.method = "exact scan k <= k_max with log2-bracket filter and exact fallback; Cauchy majorant beyond k_max on the monotone range of k^l r'^-k".into();
        c.valid = self.valid;
        let last = self.constants.last().cloned().unwrap_or_else(BigRational::zero);
        c.value = Quantity::exact(&last);
        c.bound = Quantity::exact(&last);
        let tail_gap = self
            .tails
            .iter()
            .zip(&self.constants)
            .map(|(t, cl)| to_f64(&(cl - &t.bound)))
            .fold(f64::INFINITY, f64::min);
        c.margin = Quantity::float(tail_gap);
        c.details = serde_json::json!({
            "constants": self.constants.iter().map(crate::exact::RationalRepr::from).collect::<Vec<_>>(),
            "argmax": self.argmax,
            "tails": self.tails,
        });
        c
    }
}

/// |d_{n,k}| > ρ'^{-k}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorWitness {
    pub stage: usize,
    pub k: u64,
    #[serde(with = "serde_rat")]
    pub value: BigRational,
    #[serde(with = "serde_rat")]
    pub threshold: BigRational,
    /// d_{n,k} − ρ'^{-k}, positive.
    #[serde(with = "serde_rat")]
    pub margin: BigRational,
    /// |d_{n,k}|^{1/k}·ρ' (display only; exceeds 1).
    pub root_ratio: f64,
}

impl TaylorWitness {
    /// Re-checks the witness inequality for the stage-n coefficients of `series`.
    pub fn holds_for(&self, series: &LacunarySeries, n: usize) -> bool {
        witness_exceeds(&series.stage_coefficient(n, self.k), &self.threshold, self.k)
    }
}

fn witness_exceeds(d: &BigRational, rho: &BigRational, k: u64) -> bool {
    // d ρ^k > 1  <=>  d.num · p^k > d.den · q^k
    let pk = num_traits::pow(rho.numer().clone(), k as usize);
    let qk = num_traits::pow(rho.denom().clone(), k as usize);
    d.numer() * pk > d.denom() * qk
}

fn log2_estimate(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (lo, hi) = rat_exp_bounds(x);
    let f = to_f64(x);
    if f.is_finite() && f > 0.0 {
        f.log2()
    } else {
        0.5 * (lo + hi) as f64
    }
}

/// Smallest k in 1..=k_max with d_{n,k} > ρ'^{-k}, without the threshold precondition.
pub fn scan_witness(series: &LacunarySeries, n: usize, threshold: &BigRational, k_max: u64) -> Result<TaylorWitness> {
    if !threshold.is_positive() {
        return Err(Error::InvalidInput("threshold radius must be positive".into()));
    }
    let model = CoefficientModel::new(series, n);
    let br = Log2Bracket::fine(threshold);
    let mut best = f64::NEG_INFINITY;
    for k in 1..=k_max {
        let Some(up) = model.upper_exp(k) else { continue };
        if up + br.pow_upper(k as i64) <= 0 {
            // d ρ^k <= 1: no witness; track the best log ratio coarsely
            best = best.max((up + br.pow_upper(k as i64)) as f64 / k as f64);
            continue;
        }
        let lo = model.lower_exp(k).unwrap();
        let d = model.exact(k);
        let sure = lo + br.pow_lower(k as i64) >= 1;
        if sure || witness_exceeds(&d, threshold, k) {
            let inv = num_traits::pow(threshold.recip(), k as usize);
            let margin = &d - &inv;
            let root_ratio = 2f64.powf(log2_estimate(&d) / k as f64) * to_f64(threshold);
            return Ok(TaylorWitness { stage: n, k, value: d, threshold: threshold.clone(), margin, root_ratio });
        }
        best = best.max((log2_estimate(&d) + k as f64 * to_f64(threshold).log2()) / k as f64);
    }
    Err(Error::WitnessNotFound { stage: n, k_max, best: 2f64.powf(best) })
}

/// Witness against a threshold strictly above the stage radius r_n.
pub fn radius_witness(series: &LacunarySeries, n: usize, threshold: &BigRational, k_max: u64) -> Result<TaylorWitness> {
    if n > series.stages() {
        return Err(Error::InvalidInput(format!("stage {n} exceeds J = {}", series.stages())));
    }
    if *threshold <= LacunarySeries::radius(n) {
        return Err(Error::Precondition(format!(
            "threshold {threshold} must exceed r_{n} = {}; no witness can exist",
            LacunarySeries::radius(n)
        )));
    }
    scan_witness(series, n, threshold, k_max)
}

/// Default threshold ρ'_n: r_{n−1} for n >= 1 and r_0 + 1 for n = 0.
pub fn default_threshold(n: usize) -> BigRational {
    if n == 0 {
        LacunarySeries::radius(0) + BigRational::one()
    } else {
        LacunarySeries::radius(n - 1)
    }
}

impl TaylorWitness {
    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new(
            format!("witness-{}", self.stage),
            "radius_witness",
            "|d_{n,k}| > rho'^-k, so the stage-n radius of convergence is below rho'",
        )
        .input("stage", self.stage)
        .input("k", self.k)
        .input("threshold", crate::exact::RationalRepr::from(&self.threshold));
        c.method = "exact integer comparison d.num p^k > d.den q^k".into();
        c.valid = self.margin.is_positive();
        c.value = Quantity::exact(&self.value);
        c.bound = Quantity::exact(&num_traits::pow(self.threshold.recip(), self.k as usize));
        c.margin = Quantity::exact(&self.margin);
        c.details = serde_json::json!({ "root_ratio": self.root_ratio, "log_den": LOG_DEN });
        c
    }
}
