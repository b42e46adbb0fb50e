use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Quantity};
use crate::error::{Error, Result};
use crate::geometry::{ComplexPoint, PlacementData};

const POLE_GUARD: f64 = 1e-12;

/// f(z) = Σ c_j/(z − a_j), finite, with the anchor point a used by the
/// regularized partial sums f_n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleSeries {
    pub poles: Vec<ComplexPoint>,
    pub coefficients: Vec<ComplexPoint>,
    pub anchor: ComplexPoint,
    pub placement_mode: bool,
    /// Σ|c_j|.
    pub abs_sum: f64,
    /// Σ|c_j|/|a − a_j|.
    pub anchor_sum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: ComplexPoint,
    pub error_bound: f64,
    pub terms_used: usize,
}

impl PoleSeries {
    pub fn new(poles: Vec<ComplexPoint>, coefficients: Vec<ComplexPoint>, anchor: ComplexPoint, placement_mode: bool) -> Result<Self> {
        if poles.len() != coefficients.len() {
            return Err(Error::InvalidInput("pole and coefficient counts differ".into()));
        }
        if poles.iter().chain(&coefficients).chain([&anchor]).any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite pole, coefficient, or anchor".into()));
        }
        for (i, p) in poles.iter().enumerate() {
            if p.dist(&anchor) <= POLE_GUARD * p.norm().max(1.0) {
                return Err(Error::InvalidInput(format!("anchor coincides with pole {}", i + 1)));
            }
        }
        if placement_mode {
            if let Some(i) = coefficients.iter().position(|c| c.norm() == 0.0) {
                return Err(Error::Precondition(format!("coefficient c_{} is zero", i + 1)));
            }
        }
        let abs_sum = coefficients.iter().map(|c| c.norm()).sum();
        let anchor_sum = poles.iter().zip(&coefficients).map(|(p, c)| c.norm() / p.dist(&anchor)).sum();
        Ok(PoleSeries { poles, coefficients, anchor, placement_mode, abs_sum, anchor_sum })
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    fn guard(&self, z: Complex64, upto: usize) -> Result<()> {
        for (i, p) in self.poles[..upto].iter().enumerate() {
            let d = (z - p.c()).norm();
            if d <= POLE_GUARD * p.norm().max(1.0) {
                return Err(Error::PoleProximity { index: i + 1, distance: d });
            }
        }
        Ok(())
    }

    /// Σ_{j>n} c_j/(a − a_j): the constant that makes f_n(a) = f(a).
    pub fn anchor_tail(&self, n: usize) -> Complex64 {
        let a = self.anchor.c();
        self.poles[n.min(self.len())..]
            .iter()
            .zip(&self.coefficients[n.min(self.len())..])
            .map(|(p, c)| c.c() / (a - p.c()))
            .sum()
    }

    /// Σ_{j<=n} c_j/(z − a_j).
    pub fn partial(&self, n: usize, z: Complex64) -> Complex64 {
        let n = n.min(self.len());
        self.poles[..n]
            .iter()
            .zip(&self.coefficients[..n])
            .map(|(p, c)| c.c() / (z - p.c()))
            .sum()
    }
}

/// f(z) from the shortest prefix whose remaining terms are bounded by `tol`.
pub fn eval_f(series: &PoleSeries, z: ComplexPoint, tol: f64) -> Result<Evaluation> {
    let zc = z.c();
    if !z.is_finite() || !(tol >= 0.0) {
        return Err(Error::InvalidInput("bad evaluation point or tolerance".into()));
    }
    series.guard(zc, series.len())?;
    let mags: Vec<f64> = series
        .poles
        .iter()
        .zip(&series.coefficients)
        .map(|(p, c)| c.norm() / (zc - p.c()).norm())
        .collect();
    let mut suffix = 0.0;
    let mut n = series.len();
    while n > 0 && suffix + mags[n - 1] <= tol {
        suffix += mags[n - 1];
        n -= 1;
    }
    if suffix > tol {
        return Err(Error::TailNotAchievable { bound: suffix, tol, terms: series.len() });
    }
    Ok(Evaluation { value: series.partial(n, zc).into(), error_bound: suffix * (1.0 + 1e-15), terms_used: n })
}

/// f_n(z) = Σ_{j<=n} c_j/(z − a_j) + Σ_{j>n} c_j/(a − a_j).
pub fn eval_fn(series: &PoleSeries, n: usize, z: ComplexPoint) -> Result<Complex64> {
    let n = n.min(series.len());
    let zc = z.c();
    series.guard(zc, n)?;
    Ok(series.partial(n, zc) + series.anchor_tail(n))
}

/// f_n(z), failing with a schedule violation when |f_n(z)| > 2 C_1.
pub fn check_fn_bound(series: &PoleSeries, n: usize, z: ComplexPoint, c1: f64) -> Result<Complex64> {
    let v = eval_fn(series, n, z)?;
    if v.norm() > 2.0 * c1 {
        return Err(Error::ScheduleViolation(format!(
            "|f_{n}({}, {})| = {} exceeds 2 C_1 = {}",
            z.re,
            z.im,
            v.norm(),
            2.0 * c1
        )));
    }
    Ok(v)
}

/// Checks |(z − a_n) f(z)| >= |c_n|/2 on B_n within δ_n of a_n, where
/// δ_n = |c_n| / (2 Σ_{j≠n} |c_j|/ε_{nj}). `n` is 1-based.
pub fn liminf_check(series: &PoleSeries, data: &PlacementData, n: usize, samples: usize) -> Result<Certificate> {
    if !series.placement_mode {
        return Err(Error::Precondition("series is not in placement mode".into()));
    }
    if n == 0 || n > series.len() || n > data.boundary_poles.len() {
        return Err(Error::InvalidInput(format!("pole index {n} out of range")));
    }
    if series.len() > data.boundary_poles.len()
        || series.poles.iter().zip(&data.boundary_poles).any(|(a, b)| a.dist(b) > 1e-12)
    {
        return Err(Error::InvalidInput("series poles differ from the placed poles".into()));
    }
    let i = n - 1;
    let cn = series.coefficients[i].c();
    if cn.norm() == 0.0 {
        return Err(Error::Precondition(format!("c_{n} = 0")));
    }
    let s: f64 = (0..series.len())
        .filter(|&j| j != i)
        .map(|j| series.coefficients[j].norm() / data.eps_matrix[i][j])
        .sum();
    let delta = if s > 0.0 { cn.norm() / (2.0 * s) } else { f64::INFINITY };
    let an = series.poles[i].c();
    let mut min_val = f64::INFINITY;
    let mut count = 0usize;
    let mut violation = None;
    for seg in &data.segments[i] {
        let len = (seg.to.c() - seg.from.c()).norm();
        let tmax = if delta.is_finite() { (delta / len).min(1.0) } else { 1.0 };
        for step in 1..=samples {
            let z = seg.point_at(tmax * step as f64 / samples as f64);
            let h = z - an;
            let others: Complex64 = (0..series.len())
                .filter(|&j| j != i)
                .map(|j| series.coefficients[j].c() / (z - series.poles[j].c()))
                .sum();
            let v = (cn + h * others).norm();
            let analytic = cn.norm() - h.norm() * s;
            if v < analytic - 1e-12 * (1.0 + cn.norm()) && violation.is_none() {
                violation = Some(format!("sample at distance {} is below the analytic bound", h.norm()));
            }
            min_val = min_val.min(v);
            count += 1;
        }
    }
    if let Some(v) = violation {
        return Err(Error::Precondition(format!("{v}: eps_{{n j}} mis-computed")));
    }
    let half = cn.norm() / 2.0;
    let mut cert = Certificate::new(
        format!("liminf-n{n}"),
        "liminf",
        "|(z - a_n) f(z)| >= |c_n|/2 on B_n within delta_n of a_n",
    )
    .input("index", n)
    .input("samples", samples);
    cert.method = "analytic bound |c_n| - |z - a_n| sum_j |c_j|/eps_nj checked against direct evaluation on B_n samples".into();
    cert.valid = min_val >= half;
    cert.value = Quantity::float(min_val);
    cert.bound = Quantity::float(half);
    cert.margin = Quantity::float(min_val - half);
    cert.details = serde_json::json!({
        "delta": if delta.is_finite() { serde_json::json!(delta) } else { serde_json::json!("unbounded") },
        "weighted_sum": s,
        "sample_count": count,
        "abs_c_n": cn.norm(),
    });
    Ok(cert)
}
