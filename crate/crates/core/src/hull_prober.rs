//! Plurisubharmonic probes h(z, w) = α log|Q(z) w − P(z)| vanishing on the
//! graphs of rational approximants, the two-constant propagation check, and
//! hull evidence at the anchor.
//!
//! Everything here is evidence: no finite family of probes decides membership
//! in a pluripolar hull.

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{serde_ext_f64, Certificate, Quantity};
use crate::construction::Schedule;
use crate::error::{Error, Result};
use crate::exact::{from_f64, ln_abs, serde_rat_vec, to_f64};
use crate::geometry::{ComplexPoint, Hole, PerforatedDisc};
use crate::harmonic_measure::{estimate, MeasureEstimate, TargetSet, WalkConfig};
use crate::series::{LacunarySeries, PoleSeries};

/// Complex polynomial, ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<ComplexPoint>,
}

impl Poly {
    pub fn constant(c: Complex64) -> Self {
        Poly { coeffs: vec![c.into()] }
    }

    /// z − root
    pub fn linear(root: Complex64) -> Self {
        Poly { coeffs: vec![(-root).into(), Complex64::new(1.0, 0.0).into()] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| c.c() != Complex64::zero()).unwrap_or(0)
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![Complex64::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a.c() * b.c();
            }
        }
        Poly { coeffs: out.into_iter().map(Into::into).collect() }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let get = |p: &Poly, i: usize| p.coeffs.get(i).map(|c| c.c()).unwrap_or_default();
        Poly { coeffs: (0..n).map(|i| (get(self, i) + get(o, i)).into()).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| (c.c() * s).into()).collect() }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::zero(), |acc, c| acc * z + c.c())
    }

    /// Coefficients of p(a + t) in t.
    pub fn shifted(&self, a: Complex64) -> Poly {
        let mut c: Vec<Complex64> = self.coeffs.iter().map(|x| x.c()).collect();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let t = c[j + 1] * a;
                c[j] += t;
            }
        }
        Poly { coeffs: c.into_iter().map(Into::into).collect() }
    }

    /// Σ k |b_k| r^k for the expansion around `a`: bounds |d/dθ p(a + r e^{iθ})|.
    pub fn angular_lipschitz(&self, a: Complex64, r: f64) -> f64 {
        self.shifted(a)
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, b)| k as f64 * b.norm() * r.powi(k as i32))
            .sum()
    }
}

/// Rational polynomial, ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPoly {
    #[serde(with = "serde_rat_vec")]
    pub coeffs: Vec<BigRational>,
}

impl ExactPoly {
    pub fn constant(c: BigRational) -> Self {
        ExactPoly { coeffs: vec![c] }
    }

    /// A − z^N
    pub fn ring(a: BigRational, n: usize) -> Self {
        let mut coeffs = vec![BigRational::zero(); n + 1];
        coeffs[0] = a;
        coeffs[n] = -BigRational::one();
        ExactPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn mul(&self, o: &ExactPoly) -> ExactPoly {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ExactPoly { coeffs: out }
    }

    pub fn add(&self, o: &ExactPoly) -> ExactPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let get = |p: &ExactPoly, i: usize| p.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero);
        ExactPoly { coeffs: (0..n).map(|i| get(self, i) + get(o, i)).collect() }
    }

    pub fn scale(&self, s: &BigRational) -> ExactPoly {
        ExactPoly { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn to_poly(&self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| ComplexPoint::new_unchecked(to_f64(c), 0.0)).collect() }
    }
}

/// The series a probe family is built from.
#[derive(Clone, Copy, Debug)]
pub enum ProbeSource<'a> {
    /// Stage m clears the first m poles.
    Poles(&'a PoleSeries),
    /// Stage m clears rings 0..=m, that is 2^{m+1} − 1 poles.
    Lacunary(&'a LacunarySeries, ComplexPoint),
}

impl ProbeSource<'_> {
    pub fn min_stage(&self) -> usize {
        match self {
            ProbeSource::Poles(_) => 1,
            ProbeSource::Lacunary(..) => 0,
        }
    }

    pub fn max_stage(&self) -> usize {
        match self {
            ProbeSource::Poles(s) => s.len(),
            ProbeSource::Lacunary(s, _) => s.stages(),
        }
    }

    pub fn pole_count(&self, stage: usize) -> usize {
        match self {
            ProbeSource::Poles(_) => stage,
            ProbeSource::Lacunary(..) => (1usize << (stage + 1)) - 1,
        }
    }

    fn check_stage(&self, stage: usize) -> Result<()> {
        if stage < self.min_stage() || stage > self.max_stage() {
            return Err(Error::InvalidInput(format!(
                "stage {stage} outside {}..={}",
                self.min_stage(),
                self.max_stage()
            )));
        }
        Ok(())
    }

    pub fn pole_series(&self) -> Result<PoleSeries> {
        match self {
            ProbeSource::Poles(s) => Ok((*s).clone()),
            ProbeSource::Lacunary(s, a) => s.pole_series(*a),
        }
    }

    pub fn anchor(&self) -> ComplexPoint {
        match self {
            ProbeSource::Poles(s) => s.anchor,
            ProbeSource::Lacunary(_, a) => *a,
        }
    }

    /// Exact Σ_{j>m} ε_j/(A_j − a^{2^j}) when the anchor is a real binary fraction.
    fn exact_ring_tail(&self, m: usize) -> Option<BigRational> {
        let ProbeSource::Lacunary(s, a) = self else { return None };
        if a.im != 0.0 {
            return None;
        }
        let a = from_f64(a.re).ok()?;
        let mut t = BigRational::zero();
        for j in m + 1..=s.stages() {
            let g = LacunarySeries::pole_power(j) - num_traits::pow(a.clone(), 1 << j);
            if g.is_zero() {
                return None;
            }
            t += &s.eps()[j] / g;
        }
        Some(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Vanishes on the graph of Σ_{j<=m} c_j/(z − a_j).
    Plain,
    /// Vanishes on the graph of the anchored partial sum f_m.
    Anchored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PshProbe {
    pub kind: ProbeKind,
    pub stage: usize,
    /// Number of poles cleared by Q.
    pub cleared: usize,
    pub alpha: f64,
    pub q: Poly,
    pub p: Poly,
    pub q_exact: Option<ExactPoly>,
    pub p_exact: Option<ExactPoly>,
    /// Constant added to the cleared partial sum (zero for plain probes).
    pub tail: ComplexPoint,
    pub series: PoleSeries,
}

/// Probe of stage m; α defaults to 1/deg Q.
pub fn make_probe(source: ProbeSource, stage: usize, alpha: Option<f64>, kind: ProbeKind) -> Result<PshProbe> {
    source.check_stage(stage)?;
    let series = source.pole_series()?;
    let cleared = source.pole_count(stage);
    let tail = match kind {
        ProbeKind::Plain => Complex64::zero(),
        ProbeKind::Anchored => series.anchor_tail(cleared),
    };
    let (q, p, q_exact, p_exact) = match source {
        ProbeSource::Lacunary(s, _) => {
            let rings: Vec<ExactPoly> =
                (0..=stage).map(|j| ExactPoly::ring(LacunarySeries::pole_power(j), 1 << j)).collect();
            let q = rings.iter().fold(ExactPoly::constant(BigRational::one()), |acc, r| acc.mul(r));
            let mut p = ExactPoly::constant(BigRational::zero());
            for j in 0..=stage {
                let others = rings
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != j)
                    .fold(ExactPoly::constant(BigRational::one()), |acc, (_, r)| acc.mul(r));
                p = p.add(&others.scale(&s.eps()[j]));
            }
            let p = match kind {
                ProbeKind::Plain => Some(p),
                ProbeKind::Anchored => source.exact_ring_tail(stage).map(|t| p.add(&q.scale(&t))),
            };
            let pf = match &p {
                Some(p) => p.to_poly(),
                None => {
                    let base = p_from_poles(&series, cleared);
                    // ring form and pole form differ by the sign (−1)^{stage+1}
                    let sign = if stage.is_multiple_of(2) { -1.0 } else { 1.0 };
                    base.add(&poles_q(&series, cleared).scale(tail)).scale(Complex64::new(sign, 0.0))
                }
            };
            (q.to_poly(), pf, Some(q), p)
        }
        ProbeSource::Poles(_) => {
            let q = poles_q(&series, cleared);
            let p = p_from_poles(&series, cleared).add(&q.scale(tail));
            (q, p, None, None)
        }
    };
    let deg = q.degree().max(1);
    let alpha = alpha.unwrap_or(1.0 / deg as f64);
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput("probe weight must be positive".into()));
    }
    Ok(PshProbe { kind, stage, cleared, alpha, q, p, q_exact, p_exact, tail: tail.into(), series })
}

fn poles_q(series: &PoleSeries, n: usize) -> Poly {
    series.poles[..n].iter().fold(Poly::constant(Complex64::new(1.0, 0.0)), |acc, a| acc.mul(&Poly::linear(a.c())))
}

fn p_from_poles(series: &PoleSeries, n: usize) -> Poly {
    let mut p = Poly::constant(Complex64::zero());
    for j in 0..n {
        let others = series.poles[..n]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .fold(Poly::constant(series.coefficients[j].c()), |acc, (_, a)| acc.mul(&Poly::linear(a.c())));
        p = p.add(&others);
    }
    p
}

impl PshProbe {
    pub fn degree(&self) -> usize {
        self.q.degree()
    }

    /// h(z, w) from the expanded polynomials.
    pub fn eval(&self, z: Complex64, w: Complex64) -> f64 {
        self.alpha * (self.q.eval(z) * w - self.p.eval(z)).norm().ln()
    }

    /// ln|Q(z)| from the cleared poles.
    pub fn ln_abs_q(&self, z: Complex64) -> f64 {
        self.series.poles[..self.cleared].iter().map(|a| (z - a.c()).norm().ln()).sum()
    }

    /// P(z)/Q(z): the function whose graph is the probe's −∞ set.
    pub fn graph_value(&self, z: Complex64) -> Complex64 {
        self.series.partial(self.cleared, z) + self.tail.c()
    }

    /// s_n(z) = h(z, f_n(z)) in difference form, for n <= the probe stage
    /// (n counted in the same stage units as the probe).
    pub fn eval_on_partial(&self, n_poles: usize, z: Complex64) -> f64 {
        let s = &self.series;
        let a = s.anchor.c();
        let mut d = Complex64::zero();
        for j in n_poles..self.cleared {
            let p = s.poles[j].c();
            d += s.coefficients[j].c() * (z - a) / ((a - p) * (z - p));
        }
        if self.kind == ProbeKind::Plain {
            d += s.anchor_tail(self.cleared);
        }
        self.alpha * (self.ln_abs_q(z) + d.norm().ln())
    }

    pub fn with_alpha(&self, alpha: f64) -> PshProbe {
        PshProbe { alpha, ..self.clone() }
    }
}

/// Certified upper bound for sup |Q(z)| W + |P(z)| over the closed disc |z − a| <= r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSup {
    pub grid_max: f64,
    pub lipschitz: f64,
    pub points: usize,
    pub upper: f64,
}

/// The function is a sum of moduli of polynomials, so its maximum over the
/// disc sits on the circle. Branch and bound over angle intervals with the
/// angular Lipschitz bound closes the gap to a relative 1e-9.
pub fn circle_sup(q: &Poly, p: &Poly, w_max: f64, a: Complex64, r: f64) -> CircleSup {
    let lip = w_max * q.angular_lipschitz(a, r) + p.angular_lipschitz(a, r);
    let f = |t: f64| {
        let z = a + Complex64::from_polar(r, t);
        q.eval(z).norm() * w_max + p.eval(z).norm()
    };
    let n = 4096usize;
    let mut h = std::f64::consts::TAU / n as f64;
    let mut cand: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            (t, f(t))
        })
        .collect();
    let mut points = n;
    let mut best = cand.iter().map(|c| c.1).fold(0.0, f64::max);
    loop {
        cand.retain(|c| c.1 + lip * h / 2.0 > best);
        let upper = cand.iter().map(|c| c.1 + lip * h / 2.0).fold(best, f64::max);
        if upper - best <= 1e-9 * best || h < 1e-14 {
            return CircleSup { grid_max: best, lipschitz: lip, points, upper };
        }
        h /= 2.0;
        cand = cand
            .par_iter()
            .flat_map_iter(|&(t, _)| [t - h / 2.0, t + h / 2.0].map(|s| (s, f(s))))
            .collect();
        points += cand.len();
        best = cand.iter().map(|c| c.1).fold(best, f64::max);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoConstantReport {
    pub probe_stage: usize,
    pub stage: usize,
    pub alpha: f64,
    /// sup of h over the closed disc times {|w| <= 2 C_1}.
    pub c2: f64,
    pub c2_sup: CircleSup,
    pub w_max: f64,
    /// sampled sup of s_n over the arc J.
    #[serde(with = "serde_ext_f64")]
    pub a_n: f64,
    pub arc_samples: usize,
    /// max |f_n| on the arc samples, expected below w_max.
    pub max_fn_on_arc: f64,
    pub omega: MeasureEstimate,
    #[serde(with = "serde_ext_f64")]
    pub implied_bound: f64,
    #[serde(with = "serde_ext_f64")]
    pub s0: f64,
    #[serde(with = "serde_ext_f64")]
    pub slack: f64,
    pub pass: bool,
}

impl TwoConstantReport {
    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new(
            format!("two-constant-m{}-n{}", self.probe_stage, self.stage),
            "two_constant",
            "s_n(a) <= C_2 - omega (C_2 - A_n) within 3 stderr (numerical evidence)",
        )
        .input("probe_stage", self.probe_stage)
        .input("stage", self.stage)
        .input("alpha", self.alpha)
        .input("walk_seed", self.omega.seed);
        c.method = "C_2 by the maximum principle on the circle with an angular Lipschitz bound; A_n by arc sampling; omega by walk on spheres".into();
        c.valid = self.pass;
        c.value = Quantity::float(self.s0);
        c.bound = Quantity::float(self.implied_bound);
        c.margin = Quantity::float(self.slack);
        c.details = serde_json::to_value(self).expect("report serializes");
        c
    }
}

/// Half-radius discs of the first `n_poles` poles inside D_ρ, in the local frame.
pub fn stage_holes(schedule: &Schedule, n_poles: usize) -> Vec<Hole> {
    let mut out: Vec<Hole> = Vec::new();
    for i in 0..n_poles.min(schedule.len()) {
        let c = schedule.frame.to_local(schedule.poles[i].c());
        let r = schedule.radius_f64(i + 1) / 2.0;
        if c.norm() + r < schedule.rho {
            out.push(Hole::new(c.into(), r));
        }
    }
    out
}

pub fn two_constant_check(
    probe: &PshProbe,
    source: ProbeSource,
    schedule: &Schedule,
    n: usize,
    cfg: &WalkConfig,
) -> Result<TwoConstantReport> {
    source.check_stage(n)?;
    if probe.stage <= n {
        return Err(Error::DegenerateProbe(format!(
            "probe stage {} must exceed the evaluation stage {n}: A_n would be -inf",
            probe.stage
        )));
    }
    if schedule.poles.len() != probe.series.len()
        || schedule.poles.iter().zip(&probe.series.poles).any(|(a, b)| a.dist(b) > 1e-9)
    {
        return Err(Error::InvalidInput("schedule and series use different poles".into()));
    }
    let n_poles = source.pole_count(n);
    let a = probe.series.anchor.c();
    let rho = schedule.rho;
    let w_max = 2.0 * to_f64(&schedule.c1);
    let sup = circle_sup(&probe.q, &probe.p, w_max, a, rho);
    let c2 = probe.alpha * sup.upper.ln();

    let arc = schedule.arc;
    let samples = 1usize << 13;
    let (t0, t1) = arc.angles();
    let pts: Vec<Complex64> = (0..=samples)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / samples as f64;
            schedule.frame.to_global(Complex64::from_polar(rho, t))
        })
        .collect();
    let a_n = pts
        .par_iter()
        .map(|z| probe.eval_on_partial(n_poles, *z))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if a_n == f64::NEG_INFINITY {
        return Err(Error::DegenerateProbe("A_n is -inf on every arc sample".into()));
    }
    let max_fn = pts
        .iter()
        .map(|z| (probe.series.partial(n_poles, *z) + probe.series.anchor_tail(n_poles)).norm())
        .fold(0.0, f64::max);

    let domain = PerforatedDisc::new(rho, stage_holes(schedule, n_poles), arc)?;
    let omega = estimate(&domain, ComplexPoint::new_unchecked(0.0, 0.0), &TargetSet::arc(arc), cfg)?;
    if !omega.valid {
        return Err(Error::Precondition("harmonic-measure estimate is invalid".into()));
    }
    let s0 = probe.eval_on_partial(n_poles, a);
    let implied = c2 - omega.value * (c2 - a_n);
    let slack = implied + 3.0 * omega.stderr * (c2 - a_n) - s0;
    Ok(TwoConstantReport {
        probe_stage: probe.stage,
        stage: n,
        alpha: probe.alpha,
        c2,
        c2_sup: sup,
        w_max,
        a_n,
        arc_samples: pts.len(),
        max_fn_on_arc: max_fn,
        omega,
        implied_bound: implied,
        s0,
        slack,
        pass: slack >= 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub stage: usize,
    pub degree: usize,
    pub alpha: f64,
    pub ln_abs_q: f64,
    /// ln|f(a) − P_m(a)/Q_m(a)|
    #[serde(with = "serde_ext_f64")]
    pub ln_abs_tail: f64,
    /// h_m(a, f(a))
    #[serde(with = "serde_ext_f64")]
    pub value: f64,
    /// the tail is exactly zero
    pub exact_cancellation: bool,
    /// the tail came from exact rational arithmetic
    pub exact_tail: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub anchor: ComplexPoint,
    pub rows: Vec<EvidenceRow>,
    pub strictly_decreasing: bool,
}

fn fmt_ext(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.17e}")
    }
}

impl EvidenceTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["stage", "degree", "alpha", "ln_abs_q", "ln_abs_tail", "value", "exact_cancellation"])
            .expect("in-memory csv");
        for r in &self.rows {
            w.write_record([
                r.stage.to_string(),
                r.degree.to_string(),
                format!("{:.17e}", r.alpha),
                format!("{:.17e}", r.ln_abs_q),
                fmt_ext(r.ln_abs_tail),
                fmt_ext(r.value),
                r.exact_cancellation.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    pub fn to_certificate(&self) -> Certificate {
        let mut c = Certificate::new(
            "hull-evidence",
            "hull_evidence",
            "h_m(a, f(a)) with alpha = 1/deg Q_m decreases in m (numerical evidence, not a proof)",
        )
        .input("anchor", self.anchor)
        .input("stages", self.rows.iter().map(|r| r.stage).collect::<Vec<_>>());
        c.method = "plain probes evaluated in difference form; exact ring tails when available".into();
        c.valid = self.strictly_decreasing;
        c.value = Quantity::float(self.rows.last().map(|r| r.value).unwrap_or(f64::NAN));
        c.details = serde_json::to_value(self).expect("table serializes");
        c
    }
}

/// h_m(a, f(a)) for plain probes of the given stages, α = 1/deg Q_m.
pub fn hull_evidence(source: ProbeSource, stages: &[usize]) -> Result<EvidenceTable> {
    let mut rows = Vec::new();
    for &m in stages {
        let probe = make_probe(source, m, None, ProbeKind::Plain)?;
        let a = probe.series.anchor.c();
        let ln_q = probe.ln_abs_q(a);
        let (ln_tail, exact_tail, cancel) = match source.exact_ring_tail(m) {
            Some(t) => (ln_abs(&t), true, t.is_zero()),
            None => {
                let full = probe.cleared >= probe.series.len();
                let t = probe.series.anchor_tail(probe.cleared);
                (if full { f64::NEG_INFINITY } else { t.norm().ln() }, false, full)
            }
        };
        let value = if cancel { f64::NEG_INFINITY } else { probe.alpha * (ln_q + ln_tail) };
        rows.push(EvidenceRow {
            stage: m,
            degree: probe.degree(),
            alpha: probe.alpha,
            ln_abs_q: ln_q,
            ln_abs_tail: ln_tail,
            value,
            exact_cancellation: cancel,
            exact_tail,
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].value < w[0].value);
    Ok(EvidenceTable { anchor: source.anchor(), rows, strictly_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use crate::geometry::{ArcSpec, Frame};
    use rand::{Rng, SeedableRng};

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new_unchecked(re, im)
    }

    fn one_pole() -> PoleSeries {
        PoleSeries::new(vec![cp(2.0, 0.0)], vec![cp(1.0, 0.0)], cp(0.0, 0.0), false).unwrap()
    }

    #[test]
    fn single_pole_probe() {
        let s = one_pole();
        let p = make_probe(ProbeSource::Poles(&s), 1, Some(1.0), ProbeKind::Anchored).unwrap();
        assert_eq!(p.degree(), 1);
        assert_eq!(p.q.coeffs, vec![cp(-2.0, 0.0), cp(1.0, 0.0)]);
        assert_eq!(p.p.coeffs[0], cp(1.0, 0.0));
        for z in [Complex64::new(0.3, 0.1), Complex64::new(-1.0, 2.0)] {
            let w = p.graph_value(z);
            assert!(p.eval(z, w) < -30.0);
        }
        // constant series: −∞ at the anchor at once
        let t = hull_evidence(ProbeSource::Poles(&s), &[1]).unwrap();
        assert_eq!(t.rows[0].value, f64::NEG_INFINITY);
    }

    #[test]
    fn lacunary_stage_one_polynomials() {
        let s = LacunarySeries::new(vec![rat(1, 10), rat(1, 100)]).unwrap();
        let p = make_probe(ProbeSource::Lacunary(&s, cp(1.0, 0.0)), 1, None, ProbeKind::Plain).unwrap();
        let q = p.q_exact.as_ref().unwrap();
        // (2 − z)(9/4 − z²) = 9/2 − 9/4 z − 2 z² + z³
        assert_eq!(q.coeffs, vec![rat(9, 2), rat(-9, 4), int(-2), int(1)]);
        let by_hand = ExactPoly { coeffs: vec![int(2), int(-1)] }.mul(&ExactPoly::ring(rat(9, 4), 2));
        assert_eq!(&by_hand, q);
        // P = ε_0 (9/4 − z²) + ε_1 (2 − z)
        let pe = p.p_exact.as_ref().unwrap();
        assert_eq!(pe.coeffs, vec![rat(9, 40) + rat(2, 100), rat(-1, 100), rat(-1, 10)]);
        assert!((p.alpha - 1.0 / 3.0).abs() < 1e-15);
        let z = Complex64::new(0.2, -0.4);
        assert!(p.eval(z, p.graph_value(z)) < -10.0);
    }

    #[test]
    fn sub_mean_value_on_random_lines() {
        let s = LacunarySeries::new(vec![rat(1, 10), rat(1, 50), rat(1, 400)]).unwrap();
        let p = make_probe(ProbeSource::Lacunary(&s, cp(1.0, 0.0)), 2, None, ProbeKind::Plain).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..1000 {
            let mut g = || Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let (z0, w0, dz, dw) = (g(), g(), g(), g());
            let r = 0.05;
            let center = p.eval(z0, w0);
            let n = 512;
            let vals: Vec<f64> = (0..n)
                .map(|k| {
                    let t = Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / n as f64);
                    p.eval(z0 + t * dz, w0 + t * dw)
                })
                .collect();
            // skip circles passing next to the zero set, where quadrature is poor
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if lo < center - 3.0 {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / n as f64;
            assert!(center <= mean + 1e-6, "{center} > {mean}");
            checked += 1;
        }
        assert!(checked > 900);
    }

    #[test]
    fn circle_sup_bounds_samples() {
        let q = Poly::linear(Complex64::new(2.0, 0.0)).mul(&Poly::linear(Complex64::new(0.0, 1.5)));
        let p = Poly::constant(Complex64::new(0.5, 0.0));
        let s = circle_sup(&q, &p, 3.0, Complex64::new(1.0, 0.0), 0.375);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let z = Complex64::new(1.0, 0.0) + Complex64::from_polar(0.375 * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * 6.3);
            assert!(q.eval(z).norm() * 3.0 + p.eval(z).norm() <= s.upper);
        }
        assert!(s.upper - s.grid_max <= 1e-8 * s.grid_max);
    }

    #[test]
    fn shift_matches_eval() {
        let q = Poly::linear(Complex64::new(2.0, 1.0)).mul(&Poly::linear(Complex64::new(-0.5, 0.0))).mul(&Poly::linear(Complex64::new(0.1, -3.0)));
        let a = Complex64::new(0.7, -0.2);
        let sh = q.shifted(a);
        let t = Complex64::new(0.3, 0.4);
        assert!((sh.eval(t) - q.eval(a + t)).norm() < 1e-12);
    }

    fn lacunary_setup() -> (LacunarySeries, Schedule) {
        let s = LacunarySeries::new(vec![rat(1, 8), rat(1, 100), rat(1, 10_000), rat(1, 10_000_000)]).unwrap();
        let ps = s.pole_series(cp(1.0, 0.0)).unwrap();
        let arc = ArcSpec::new(0, 4).unwrap();
        let frame = Frame { origin: cp(1.0, 0.0), turn: crate::geometry::Turn::new(1, 8).unwrap() };
        let exps = vec![4u32; ps.len()];
        let sched = crate::construction::schedule_from_radii(&ps.poles, &exps, frame, 0.375, arc);
        (s, sched)
    }

    #[test]
    fn two_constant_passes_and_scales() {
        let (s, sched) = lacunary_setup();
        let src = ProbeSource::Lacunary(&s, cp(1.0, 0.0));
        let cfg = WalkConfig::new(20_000, 5);
        let full = make_probe(src, 3, None, ProbeKind::Plain).unwrap();
        let r = two_constant_check(&full, src, &sched, 1, &cfg).unwrap();
        assert_eq!(r.s0, f64::NEG_INFINITY);
        assert!(r.pass);
        let probe = make_probe(src, 2, None, ProbeKind::Plain).unwrap();
        let r = two_constant_check(&probe, src, &sched, 1, &cfg).unwrap();
        assert!(r.s0.is_finite());
        assert!(r.pass, "{r:?}");
        assert!(r.max_fn_on_arc <= r.w_max);
        let r2 = two_constant_check(&probe.with_alpha(2.0 * probe.alpha), src, &sched, 1, &cfg).unwrap();
        assert!((r2.c2 - 2.0 * r.c2).abs() <= 1e-12 * r.c2.abs().max(1.0));
        assert!((r2.a_n - 2.0 * r.a_n).abs() <= 1e-12 * r.a_n.abs().max(1.0));
        assert!((r2.s0 - 2.0 * r.s0).abs() <= 1e-12 * r.s0.abs().max(1.0));
        assert_eq!(r.pass, r2.pass);
        // equal stages degenerate
        let p1 = make_probe(src, 1, None, ProbeKind::Plain).unwrap();
        assert!(matches!(two_constant_check(&p1, src, &sched, 1, &cfg), Err(Error::DegenerateProbe(_))));
    }

    #[test]
    fn evidence_full_stage_is_neg_infinity() {
        let (s, _) = lacunary_setup();
        let t = hull_evidence(ProbeSource::Lacunary(&s, cp(1.0, 0.0)), &[1, 2, 3]).unwrap();
        assert_eq!(t.rows[2].value, f64::NEG_INFINITY);
        assert!(t.rows[2].exact_cancellation);
        assert!(t.rows.iter().all(|r| r.exact_tail));
        assert!(t.to_csv().starts_with("stage,degree"));
    }
}
