use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{serde_rat_vec, to_f64};
use crate::geometry::{ring_radius, ComplexPoint, Turn};
use crate::series::pole_series::PoleSeries;

/// f(z) = Σ_{j=0}^{J} ε_j / (r_j^{2^j} − z^{2^j}) with r_j = (j+2)/(j+1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunarySeries {
    #[serde(with = "serde_rat_vec")]
    eps: Vec<BigRational>,
}

impl LacunarySeries {
    pub fn new(eps: Vec<BigRational>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidInput("lacunary series needs at least one ring".into()));
        }
        if let Some(j) = eps.iter().position(|e| !e.is_positive()) {
            return Err(Error::InvalidInput(format!("eps_{j} must be positive")));
        }
        Ok(LacunarySeries { eps })
    }

    /// Index J of the last ring.
    pub fn stages(&self) -> usize {
        self.eps.len() - 1
    }

    pub fn eps(&self) -> &[BigRational] {
        &self.eps
    }

    pub fn radius(j: usize) -> BigRational {
        ring_radius(j)
    }

    /// A_j = r_j^{2^j}.
    pub fn pole_power(j: usize) -> BigRational {
        num_traits::pow(ring_radius(j), 1usize << j)
    }

    /// Rings 0..=n only.
    pub fn truncated(&self, n: usize) -> LacunarySeries {
        LacunarySeries { eps: self.eps[..=n.min(self.stages())].to_vec() }
    }

    /// d_{n,k} = Σ_{j<=n, 2^j | k} ε_j r_j^{-(k+2^j)}.
    pub fn stage_coefficient(&self, n: usize, k: u64) -> BigRational {
        let mut s = BigRational::zero();
        for j in 0..=n.min(self.stages()) {
            let step = 1u64 << j;
            if !k.is_multiple_of(step) {
                continue;
            }
            let (p, q) = (j as u32 + 1, j as u32 + 2);
            let e = (k + step) as usize;
            let term = BigRational::new_raw(
                num_traits::pow(BigInt::from(p), e),
                num_traits::pow(BigInt::from(q), e),
            );
            s += &self.eps[j] * term;
        }
        s
    }

    pub fn coefficient(&self, k: u64) -> BigRational {
        self.stage_coefficient(self.stages(), k)
    }

    /// d_{n,0..=k_max} by long division of each term 1/(A_j − z^{N_j}).
    pub fn coefficients_by_division(&self, n: usize, k_max: usize) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); k_max + 1];
        for j in 0..=n.min(self.stages()) {
            let a = Self::pole_power(j);
            let inv_a = a.recip();
            let nj = 1usize << j;
            // (A − z^N) B = 1  =>  b_k = (δ_{k0} + b_{k−N}) / A
            let mut b = vec![BigRational::zero(); k_max + 1];
            for k in 0..=k_max {
                let mut num = if k == 0 { BigRational::one() } else { BigRational::zero() };
                if k >= nj {
                    num += &b[k - nj];
                }
                b[k] = num * &inv_a;
            }
            for k in 0..=k_max {
                if !b[k].is_zero() {
                    out[k] += &self.eps[j] * &b[k];
                }
            }
        }
        out
    }

    fn ring_term(&self, j: usize, z: Complex64) -> Complex64 {
        let a = to_f64(&Self::pole_power(j));
        let mut zn = z;
        for _ in 0..j {
            zn = zn * zn;
        }
        Complex64::new(to_f64(&self.eps[j]), 0.0) / (Complex64::new(a, 0.0) - zn)
    }

    /// Floating evaluation of rings `from..=J`.
    pub fn eval_rings(&self, from: usize, z: Complex64) -> Complex64 {
        (from..=self.stages()).map(|j| self.ring_term(j, z)).sum()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_rings(0, z)
    }

    /// Poles a_{2^j+k} = r_j e^{2πik/2^j} with residues −ε_j a/(2^j r_j^{2^j}).
    pub fn pole_series(&self, anchor: ComplexPoint) -> Result<PoleSeries> {
        let mut poles = Vec::new();
        let mut coeffs = Vec::new();
        for j in 0..=self.stages() {
            let nj = 1u64 << j;
            let r = to_f64(&Self::radius(j));
            let scale = to_f64(&(&self.eps[j] / (Self::pole_power(j) * BigRational::from_integer(BigInt::from(nj)))));
            for k in 0..nj {
                let u = Turn::new(k as i64, nj)?.unit();
                let a = u * r;
                poles.push(ComplexPoint::from(a));
                coeffs.push(ComplexPoint::from(-a * scale));
            }
        }
        PoleSeries::new(poles, coeffs, anchor, false)
    }

    /// Cauchy majorant M(r') = Σ_j ε_j / (A_j − r'^{2^j}) for r' below every ring radius.
    pub fn cauchy_majorant(&self, r_prime: &BigRational) -> Result<BigRational> {
        let mut m = BigRational::zero();
        for j in 0..=self.stages() {
            let gap = Self::pole_power(j) - num_traits::pow(r_prime.clone(), 1usize << j);
            if !gap.is_positive() {
                return Err(Error::InvalidInput("Cauchy radius is not below the pole rings".into()));
            }
            m += &self.eps[j] / gap;
        }
        Ok(m)
    }

    /// r' = (1 + r_J)/2.
    pub fn cauchy_radius(&self) -> BigRational {
        (BigRational::one() + Self::radius(self.stages())) / BigRational::from_integer(BigInt::from(2))
    }

    /// Bound on Σ_{k>K} |d_k| |z|^k for |z| = t < r'.
    pub fn taylor_remainder_bound(&self, k_max: u64, t: f64) -> Result<f64> {
        let rp = self.cauchy_radius();
        let m = to_f64(&self.cauchy_majorant(&rp)?);
        let q = t / to_f64(&rp);
        if !(q < 1.0) {
            return Err(Error::InvalidInput("point outside the Cauchy disc".into()));
        }
        Ok(m * q.powi(k_max as i32 + 1) / (1.0 - q) * (1.0 + 1e-12))
    }

    /// |f_{>=split}| at z_m = (1 + 2^{-m}) r_ring e^{2πik/2^ring}, approaching a
    /// pole of ring `ring` radially from outside.
    pub fn pole_approach(&self, ring: usize, k: u64, split: usize, ms: &[u32]) -> Result<PoleApproach> {
        if ring > self.stages() || split > ring {
            return Err(Error::InvalidInput("ring out of range".into()));
        }
        let ps = self.pole_series(ComplexPoint::new_unchecked(0.0, 0.0))?;
        let first = (1usize << split) - 1;
        let u = Turn::new(k as i64, 1u64 << ring)?.unit();
        let r = to_f64(&Self::radius(ring));
        let mut samples = Vec::new();
        for &m in ms {
            let z = u * (r * (1.0 + 0.5f64.powi(m as i32)));
            let v: Complex64 = ps.poles[first..]
                .iter()
                .zip(&ps.coefficients[first..])
                .map(|(a, c)| c.c() / (z - a.c()))
                .sum();
            samples.push((m, v.norm()));
        }
        let ratios: Vec<f64> = samples.windows(2).map(|w| w[1].1 / w[0].1).collect();
        let monotone = samples.windows(2).all(|w| w[1].1 > w[0].1);
        Ok(PoleApproach { ring, k, split, samples, ratios, monotone })
    }
}

/// d_k of the full series.
pub fn lacunary_coefficient(series: &LacunarySeries, k: u64) -> BigRational {
    series.coefficient(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleApproach {
    pub ring: usize,
    pub k: u64,
    pub split: usize,
    /// (m, |f|) pairs.
    pub samples: Vec<(u32, f64)>,
    /// Consecutive growth ratios; a simple pole gives 2 per halving step.
    pub ratios: Vec<f64>,
    pub monotone: bool,
}

impl PoleApproach {
    /// Whether every ratio is within `tol` (relative) of the simple-pole ratio 2.
    pub fn simple_pole_within(&self, tol: f64) -> bool {
        self.ratios.iter().all(|r| (r / 2.0 - 1.0).abs() <= tol)
    }
}
