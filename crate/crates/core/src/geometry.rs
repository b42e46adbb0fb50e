//! Planar domains, pole layouts, rotations, and the choice of the working
//! circle and arc.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{rat, serde_rat};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite point ({re}, {im})")));
        }
        Ok(ComplexPoint { re, im })
    }

    pub const fn new_unchecked(re: f64, im: f64) -> Self {
        ComplexPoint { re, im }
    }

    pub fn c(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn norm(&self) -> f64 {
        self.c().norm()
    }

    pub fn dist(&self, other: &ComplexPoint) -> f64 {
        (self.c() - other.c()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Parses `x,y`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidInput(format!("expected x,y: {s:?}")))?;
        let re = a.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {a:?}")))?;
        let im = b.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {b:?}")))?;
        ComplexPoint::new(re, im)
    }
}

impl From<Complex64> for ComplexPoint {
    fn from(z: Complex64) -> Self {
        ComplexPoint { re: z.re, im: z.im }
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(p: ComplexPoint) -> Self {
        p.c()
    }
}

/// An exact rational angle k/n of a full turn (2πk/n radians), kept reduced
/// with 0 <= k < n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Turn {
    pub k: i64,
    pub n: u64,
}

impl Turn {
    pub fn new(k: i64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("turn denominator must be positive".into()));
        }
        let n = n as i64;
        let k = k.rem_euclid(n);
        let g = k.gcd(&n).max(1);
        Ok(Turn { k: k / g, n: (n / g) as u64 })
    }

    pub const ZERO: Turn = Turn { k: 0, n: 1 };

    pub fn add(&self, other: &Turn) -> Turn {
        let n = self.n.lcm(&other.n);
        let k = self.k * (n / self.n) as i64 + other.k * (n / other.n) as i64;
        Turn::new(k, n).expect("positive denominator")
    }

    pub fn neg(&self) -> Turn {
        Turn::new(-self.k, self.n).expect("positive denominator")
    }

    pub fn fraction(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn radians(&self) -> f64 {
        TAU * self.fraction()
    }

    /// e^{2πik/n}, exact for multiples of an eighth turn.
    pub fn unit(&self) -> Complex64 {
        let k = self.k.rem_euclid(self.n as i64) as u64;
        let n = self.n;
        if (8 * k).is_multiple_of(n) {
            let s = FRAC_1_SQRT_2;
            return match (8 * k) / n {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(s, s),
                2 => Complex64::new(0.0, 1.0),
                3 => Complex64::new(-s, s),
                4 => Complex64::new(-1.0, 0.0),
                5 => Complex64::new(-s, -s),
                6 => Complex64::new(0.0, -1.0),
                _ => Complex64::new(s, -s),
            };
        }
        let (s, c) = self.radians().sin_cos();
        Complex64::new(c, s)
    }

    /// Parses `k/n`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidInput(format!("expected k/n: {s:?}")))?;
        let k = a.trim().parse::<i64>().map_err(|_| Error::InvalidInput(format!("bad k {a:?}")))?;
        let n = b.trim().parse::<u64>().map_err(|_| Error::InvalidInput(format!("bad n {b:?}")))?;
        Turn::new(k, n)
    }

    /// Closest turn with denominator `den` to an angle in radians.
    pub fn approximate(radians: f64, den: u64) -> Turn {
        let k = (radians / TAU * den as f64).round() as i64;
        Turn::new(k, den).expect("positive denominator")
    }
}

impl std::fmt::Display for Turn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.k, self.n)
    }
}

/// e^{2πik/n}·z.
pub fn rotate(z: ComplexPoint, k: i64, n: u64) -> Result<ComplexPoint> {
    let t = Turn::new(k, n)?;
    Ok((t.unit() * z.c()).into())
}

/// Angle of z in [0, 2π).
pub fn arg_positive(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Similarity frame ζ = e^{2πi·turn}(z − origin).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: ComplexPoint,
    pub turn: Turn,
}

impl Frame {
    pub fn identity() -> Self {
        Frame { origin: ComplexPoint::new_unchecked(0.0, 0.0), turn: Turn::ZERO }
    }

    pub fn to_local(&self, z: Complex64) -> Complex64 {
        self.turn.unit() * (z - self.origin.c())
    }

    pub fn to_global(&self, w: Complex64) -> Complex64 {
        self.origin.c() + self.turn.unit().conj() * w
    }

    pub fn local_domain(&self, d: &DomainSpec) -> DomainSpec {
        match d {
            DomainSpec::Plane => DomainSpec::Plane,
            DomainSpec::UnitDisc => DomainSpec::Disc {
                center: self.to_local(Complex64::new(0.0, 0.0)).into(),
                radius: 1.0,
            },
            DomainSpec::Disc { center, radius } => DomainSpec::Disc {
                center: self.to_local(center.c()).into(),
                radius: *radius,
            },
            DomainSpec::Polygon { vertices } => DomainSpec::Polygon {
                vertices: vertices.iter().map(|v| self.to_local(v.c()).into()).collect(),
            },
        }
    }
}

/// One pole of the lacunary layout: a_{2^j+k} = r_j e^{2πik/2^j}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingPole {
    pub index: usize,
    pub ring: usize,
    pub k: u64,
    #[serde(with = "serde_rat")]
    pub radius: BigRational,
    pub turn: Turn,
}

impl RingPole {
    pub fn point(&self) -> ComplexPoint {
        (self.turn.unit() * crate::exact::to_f64(&self.radius)).into()
    }
}

/// r_j = (j+2)/(j+1).
pub fn ring_radius(j: usize) -> BigRational {
    rat(j as i64 + 2, j as i64 + 1)
}

pub fn ring_layout(j_max: usize) -> Result<Vec<RingPole>> {
    if j_max > 30 {
        return Err(Error::InvalidInput(format!("j_max = {j_max} overflows the pole index (limit 30)")));
    }
    let mut out = Vec::with_capacity((1usize << (j_max + 1)) - 1);
    for j in 0..=j_max {
        let n = 1u64 << j;
        for k in 0..n {
            out.push(RingPole {
                index: (1usize << j) + k as usize,
                ring: j,
                k,
                radius: ring_radius(j),
                turn: Turn::new(k as i64, n)?,
            });
        }
    }
    Ok(out)
}

/// Poles a_{2^j+k} in index order, j = 0..=j_max.
pub fn ring_poles(j_max: usize) -> Result<Vec<ComplexPoint>> {
    Ok(ring_layout(j_max)?.iter().map(RingPole::point).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    UnitDisc,
    Disc { center: ComplexPoint, radius: f64 },
    Plane,
    Polygon { vertices: Vec<ComplexPoint> },
}

fn seg_point_dist(p: Complex64, a: Complex64, b: Complex64) -> (f64, Complex64) {
    let ab = b - a;
    let l2 = ab.norm_sqr();
    let t = if l2 == 0.0 { 0.0 } else { (((p - a) * ab.conj()).re / l2).clamp(0.0, 1.0) };
    let q = a + ab * t;
    ((p - q).norm(), q)
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_intersect(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Complex64, b: Complex64, p: Complex64, d: f64| {
        d == 0.0 && p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::UnitDisc | DomainSpec::Plane => Ok(()),
            DomainSpec::Disc { center, radius } => {
                if !center.is_finite() || !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::Geometry(format!("disc radius must be positive and finite, got {radius}")));
                }
                Ok(())
            }
            DomainSpec::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Geometry("non-finite polygon vertex".into()));
                }
                let v: Vec<Complex64> = vertices.iter().map(|p| p.c()).collect();
                let mut area = 0.0;
                for i in 0..n {
                    area += cross(v[i], v[(i + 1) % n]);
                }
                if area.abs() < 1e-14 {
                    return Err(Error::Geometry("polygon has empty interior".into()));
                }
                for i in 0..n {
                    for j in i + 1..n {
                        let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                        if adjacent {
                            continue;
                        }
                        if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                            return Err(Error::Geometry(format!("polygon edges {i} and {j} intersect")));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn disc_params(&self) -> Option<(Complex64, f64)> {
        match self {
            DomainSpec::UnitDisc => Some((Complex64::new(0.0, 0.0), 1.0)),
            DomainSpec::Disc { center, radius } => Some((center.c(), *radius)),
            _ => None,
        }
    }

    fn edges(&self) -> Vec<(Complex64, Complex64)> {
        match self {
            DomainSpec::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| (vertices[i].c(), vertices[(i + 1) % n].c())).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Open-set membership.
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            DomainSpec::Plane => true,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                (z - c).norm() < r
            }
            DomainSpec::Polygon { .. } => {
                let mut inside = false;
                for (a, b) in self.edges() {
                    if seg_point_dist(z, a, b).0 == 0.0 {
                        return false;
                    }
                    if (a.im > z.im) != (b.im > z.im) {
                        let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
                        if z.re < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// Distance to the boundary (infinite for the plane).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self {
            DomainSpec::Plane => f64::INFINITY,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                ((z - c).norm() - r).abs()
            }
            DomainSpec::Polygon { .. } => self
                .edges()
                .iter()
                .map(|(a, b)| seg_point_dist(z, *a, *b).0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// A nearest boundary point; ties go to the smallest direction angle
    /// arg(a − z) in [0, 2π), then the smallest modulus |a|.
    pub fn nearest_boundary_point(&self, z: Complex64) -> Result<Complex64> {
        match self {
            DomainSpec::Plane => Err(Error::Geometry("the plane has no boundary".into())),
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                let d = z - c;
                if d.norm() == 0.0 {
                    Ok(c + Complex64::new(r, 0.0))
                } else {
                    Ok(c + d * (r / d.norm()))
                }
            }
            DomainSpec::Polygon { .. } => {
                let cands: Vec<(f64, Complex64)> =
                    self.edges().iter().map(|(a, b)| seg_point_dist(z, *a, *b)).collect();
                let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let tol = 1e-12 * (1.0 + best);
                let mut pts: Vec<Complex64> = cands.into_iter().filter(|c| c.0 <= best + tol).map(|c| c.1).collect();
                pts.sort_by(|p, q| {
                    let ap = arg_positive(*p - z);
                    let aq = arg_positive(*q - z);
                    ap.partial_cmp(&aq)
                        .unwrap()
                        .then(p.norm().partial_cmp(&q.norm()).unwrap())
                });
                Ok(pts[0])
            }
        }
    }

    /// Whether the closed disc D̄(center, r) lies inside the open domain.
    pub fn closed_disc_inside(&self, center: Complex64, r: f64) -> bool {
        match self {
            DomainSpec::Plane => true,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, rr) = self.disc_params().unwrap();
                (center - c).norm() + r < rr
            }
            DomainSpec::Polygon { .. } => self.contains(center) && self.boundary_distance(center) > r,
        }
    }

    /// Whether the closed arc {ρe^{iθ}: θ0 <= θ <= θ1} lies inside the open domain.
    pub fn arc_inside(&self, rho: f64, t0: f64, t1: f64) -> bool {
        match self {
            DomainSpec::Plane => true,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                // farthest arc point from c is opposite c's direction, or an endpoint
                let far_dir = arg_positive(-c);
                let mut worst = f64::max(
                    (Complex64::from_polar(rho, t0) - c).norm(),
                    (Complex64::from_polar(rho, t1) - c).norm(),
                );
                for shift in [-TAU, 0.0, TAU] {
                    let t = far_dir + shift;
                    if c.norm() > 0.0 && t >= t0 && t <= t1 {
                        worst = worst.max(c.norm() + rho);
                    }
                }
                if c.norm() == 0.0 {
                    worst = rho;
                }
                worst < r
            }
            DomainSpec::Polygon { .. } => {
                let samples = 4096;
                let h = rho * (t1 - t0) / samples as f64;
                (0..=samples).all(|i| {
                    let z = Complex64::from_polar(rho, t0 + (t1 - t0) * i as f64 / samples as f64);
                    self.contains(z) && self.boundary_distance(z) > h
                })
            }
        }
    }

    /// Whether the circle |z| = ρ meets the domain.
    pub fn circle_meets(&self, rho: f64) -> bool {
        match self {
            DomainSpec::Plane => true,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                (c.norm() - rho).abs() < r
            }
            DomainSpec::Polygon { .. } => (0..4096).any(|i| {
                let z = Complex64::from_polar(rho, TAU * i as f64 / 4096.0);
                self.contains(z)
            }),
        }
    }

    /// Axis-aligned bounding box (min, max); None for the plane.
    pub fn bounding_box(&self) -> Option<(Complex64, Complex64)> {
        match self {
            DomainSpec::Plane => None,
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, r) = self.disc_params().unwrap();
                Some((c - Complex64::new(r, r), c + Complex64::new(r, r)))
            }
            DomainSpec::Polygon { vertices } => {
                let mut lo = vertices[0].c();
                let mut hi = lo;
                for v in vertices {
                    lo = Complex64::new(lo.re.min(v.re), lo.im.min(v.im));
                    hi = Complex64::new(hi.re.max(v.re), hi.im.max(v.im));
                }
                Some((lo, hi))
            }
        }
    }

    /// Unit inward direction at a boundary point (disc: toward the center;
    /// polygon: inward normal of the nearest edge, bisector at vertices).
    pub fn inward_direction(&self, a: Complex64) -> Result<Complex64> {
        match self {
            DomainSpec::Plane => Err(Error::Geometry("the plane has no boundary".into())),
            DomainSpec::UnitDisc | DomainSpec::Disc { .. } => {
                let (c, _) = self.disc_params().unwrap();
                let d = c - a;
                Ok(d / d.norm())
            }
            DomainSpec::Polygon { .. } => {
                let mut sum = Complex64::new(0.0, 0.0);
                let edges = self.edges();
                let best = edges.iter().map(|(p, q)| seg_point_dist(a, *p, *q).0).fold(f64::INFINITY, f64::min);
                for (p, q) in &edges {
                    if seg_point_dist(a, *p, *q).0 <= best + 1e-12 {
                        let t = (*q - *p) / (*q - *p).norm();
                        let nrm = Complex64::new(-t.im, t.re);
                        let probe = a + nrm * 1e-7;
                        sum += if self.contains(probe) { nrm } else { -nrm };
                    }
                }
                if sum.norm() == 0.0 {
                    return Err(Error::Geometry("no inward direction at boundary point".into()));
                }
                Ok(sum / sum.norm())
            }
        }
    }
}

/// Closed disc removed from the working disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: ComplexPoint,
    pub radius: f64,
}

impl Hole {
    pub fn new(center: ComplexPoint, radius: f64) -> Self {
        Hole { center, radius }
    }
}

/// Arc J = {ρe^{iθ}: 2πk0/n0 <= θ <= 2π(k0+1)/n0}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub k0: u64,
    pub n0: u64,
}

impl ArcSpec {
    pub fn new(k0: u64, n0: u64) -> Result<Self> {
        if n0 == 0 || k0 >= n0 {
            return Err(Error::InvalidInput(format!("arc {k0}/{n0} needs 0 <= k0 < n0")));
        }
        Ok(ArcSpec { k0, n0 })
    }

    pub fn angles(&self) -> (f64, f64) {
        (TAU * self.k0 as f64 / self.n0 as f64, TAU * (self.k0 + 1) as f64 / self.n0 as f64)
    }

    /// Parses `k0/n0`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidInput(format!("expected k0/n0: {s:?}")))?;
        let k0 = a.trim().parse::<u64>().map_err(|_| Error::InvalidInput(format!("bad k0 {a:?}")))?;
        let n0 = b.trim().parse::<u64>().map_err(|_| Error::InvalidInput(format!("bad n0 {b:?}")))?;
        ArcSpec::new(k0, n0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Outer,
    Hole(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PerforatedDiscRaw {
    rho: f64,
    holes: Vec<Hole>,
    arc: ArcSpec,
    #[serde(default)]
    origin_free: bool,
}

/// D_ρ minus finitely many pairwise disjoint closed discs, with a marked arc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerforatedDiscRaw", into = "PerforatedDiscRaw")]
pub struct PerforatedDisc {
    rho: f64,
    holes: Vec<Hole>,
    arc: ArcSpec,
    origin_free: bool,
}

impl TryFrom<PerforatedDiscRaw> for PerforatedDisc {
    type Error = Error;
    fn try_from(r: PerforatedDiscRaw) -> Result<Self> {
        if r.origin_free {
            PerforatedDisc::new(r.rho, r.holes, r.arc)
        } else {
            PerforatedDisc::new_general(r.rho, r.holes, r.arc)
        }
    }
}

impl From<PerforatedDisc> for PerforatedDiscRaw {
    fn from(p: PerforatedDisc) -> Self {
        PerforatedDiscRaw { rho: p.rho, holes: p.holes, arc: p.arc, origin_free: p.origin_free }
    }
}

impl PerforatedDisc {
    /// The construction's arena: additionally no hole may contain the origin.
    pub fn new(rho: f64, holes: Vec<Hole>, arc: ArcSpec) -> Result<Self> {
        let mut d = Self::new_general(rho, holes, arc)?;
        for (i, h) in d.holes.iter().enumerate() {
            if h.center.norm() <= h.radius {
                return Err(Error::Geometry(format!("hole {i} contains the origin")));
            }
        }
        d.origin_free = true;
        Ok(d)
    }

    /// Containment and disjointness only; holes may cover the origin (annuli).
    pub fn new_general(rho: f64, holes: Vec<Hole>, arc: ArcSpec) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::Geometry(format!("outer radius must be positive, got {rho}")));
        }
        ArcSpec::new(arc.k0, arc.n0)?;
        for (i, h) in holes.iter().enumerate() {
            if !h.center.is_finite() || !h.radius.is_finite() || h.radius <= 0.0 {
                return Err(Error::Geometry(format!("hole {i} has invalid radius {}", h.radius)));
            }
            if h.center.norm() + h.radius >= rho {
                return Err(Error::Geometry(format!("hole {i} is not inside the open disc of radius {rho}")));
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                if holes[i].center.dist(&holes[j].center) <= holes[i].radius + holes[j].radius {
                    return Err(Error::Geometry(format!("holes {i} and {j} overlap")));
                }
            }
        }
        Ok(PerforatedDisc { rho, holes, arc, origin_free: false })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn arc(&self) -> ArcSpec {
        self.arc
    }

    pub fn min_hole_radius(&self) -> Option<f64> {
        self.holes.iter().map(|h| h.radius).reduce(f64::min)
    }

    /// Distance to the nearest boundary component and which one it is.
    #[inline]
    pub fn nearest(&self, z: Complex64) -> (f64, Component) {
        let mut d = self.rho - z.norm();
        let mut comp = Component::Outer;
        for (i, h) in self.holes.iter().enumerate() {
            let dh = (z - h.center.c()).norm() - h.radius;
            if dh < d {
                d = dh;
                comp = Component::Hole(i);
            }
        }
        (d, comp)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.nearest(z).0 > 0.0
    }
}

/// Result of the ρ / arc search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoArc {
    pub rho: f64,
    pub arc: ArcSpec,
}

/// Picks the first trial radius whose circle avoids the forbidden discs,
/// whose closed disc lies in `d2`, and which carries an arc of order `n0`
/// inside `d1`. All sets are in the local frame with the density point at 0.
pub fn select_rho_and_arc(
    d1: &DomainSpec,
    d2: &DomainSpec,
    forbidden: &[Hole],
    trial_radii: &[f64],
    n0: u64,
) -> Result<RhoArc> {
    d1.validate()?;
    d2.validate()?;
    if n0 == 0 {
        return Err(Error::InvalidInput("n0 must be positive".into()));
    }
    if trial_radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("trial radii must be strictly decreasing".into()));
    }
    let mut report = Vec::new();
    'trials: for &rho in trial_radii {
        if !(rho > 0.0) || !rho.is_finite() {
            report.push(format!("rho={rho}: not a positive radius"));
            continue;
        }
        for (i, f) in forbidden.iter().enumerate() {
            if (f.center.norm() - rho).abs() <= f.radius {
                report.push(format!("rho={rho}: circle meets forbidden disc {i}"));
                continue 'trials;
            }
        }
        if !d2.closed_disc_inside(Complex64::new(0.0, 0.0), rho) {
            report.push(format!("rho={rho}: closed disc not inside d2"));
            continue;
        }
        if !d1.circle_meets(rho) {
            report.push(format!("rho={rho}: circle misses d1"));
            continue;
        }
        for k0 in 0..n0 {
            let arc = ArcSpec { k0, n0 };
            let (t0, t1) = arc.angles();
            if d1.arc_inside(rho, t0, t1) {
                return Ok(RhoArc { rho, arc });
            }
        }
        report.push(format!("rho={rho}: no arc of order {n0} lies inside d1"));
    }
    Err(Error::NoAdmissibleRadius(report.join("; ")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: ComplexPoint,
    pub to: ComplexPoint,
}

impl Segment {
    pub fn distance(&self, p: Complex64) -> f64 {
        seg_point_dist(p, self.from.c(), self.to.c()).0
    }

    /// Minimum distance over `samples`+1 equally spaced points (oracle form).
    pub fn sampled_distance(&self, p: Complex64, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| {
                let t = i as f64 / samples as f64;
                (p - (self.from.c() + (self.to.c() - self.from.c()) * t)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn point_at(&self, t: f64) -> Complex64 {
        self.from.c() + (self.to.c() - self.from.c()) * t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementData {
    pub domain: DomainSpec,
    pub interior_dense: Vec<ComplexPoint>,
    pub boundary_poles: Vec<ComplexPoint>,
    /// Segments starting at a_n whose union represents B_n.
    pub segments: Vec<Vec<Segment>>,
    /// eps_matrix[n][j] = dist(a_j, B_n); the diagonal is 0 and unused.
    pub eps_matrix: Vec<Vec<f64>>,
    pub caps: Vec<f64>,
    pub samples_per_segment: usize,
}

/// Rational grid points i/q + i·j/q in lowest terms, q = 1, 2, ..., inside the
/// domain, in a fixed diagonal order.
pub struct RationalGrid<'a> {
    domain: &'a DomainSpec,
    q: i64,
    extent: i64,
    buf: std::vec::IntoIter<Complex64>,
}

impl<'a> RationalGrid<'a> {
    pub fn new(domain: &'a DomainSpec) -> Result<Self> {
        let (lo, hi) = domain
            .bounding_box()
            .ok_or_else(|| Error::Geometry("dense enumeration needs a bounded domain".into()))?;
        let m = [lo.re, lo.im, hi.re, hi.im].iter().fold(1.0f64, |a, b| a.max(b.abs()));
        Ok(RationalGrid { domain, q: 0, extent: m.ceil() as i64, buf: Vec::new().into_iter() })
    }

    pub fn denominator(&self) -> i64 {
        self.q
    }
}

impl Iterator for RationalGrid<'_> {
    type Item = Complex64;
    fn next(&mut self) -> Option<Complex64> {
        loop {
            if let Some(z) = self.buf.next() {
                return Some(z);
            }
            self.q += 1;
            let q = self.q;
            let r = q * self.extent;
            let mut pts = Vec::new();
            for i in -r..=r {
                for j in -r..=r {
                    if i.gcd(&j).gcd(&q) != 1 {
                        continue;
                    }
                    let z = Complex64::new(i as f64 / q as f64, j as f64 / q as f64);
                    if self.domain.contains(z) {
                        pts.push(z);
                    }
                }
            }
            self.buf = pts.into_iter();
        }
    }
}

fn extend_b_segment(domain: &DomainSpec, a: Complex64, b: Complex64) -> Segment {
    let u = (b - a) / (b - a).norm();
    let t0 = (b - a).norm();
    let ok = |t: f64| {
        let z = a + u * t;
        domain.contains(z) && domain.boundary_distance(z) >= t * (1.0 - 1e-12) - 1e-15
    };
    let (lo_box, hi_box) = domain.bounding_box().expect("bounded");
    let diam = (hi_box - lo_box).norm();
    let mut lo = t0;
    let mut hi = t0;
    while hi < diam && ok(hi * 2.0) {
        hi *= 2.0;
        lo = hi;
    }
    hi = (hi * 2.0).min(diam);
    if ok(hi) {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Segment { from: a.into(), to: (a + u * lo).into() }
}

/// Boundary poles from a dense interior sequence: each b_n goes to a nearest
/// boundary point a_n; repeated a_n are dropped (their segments join B_n).
pub fn placed_poles(domain: &DomainSpec, count: usize, samples_per_segment: usize) -> Result<PlacementData> {
    placed_poles_from(domain, count, samples_per_segment, None)
}

/// As `placed_poles`, with an explicit interior sequence instead of the grid.
pub fn placed_poles_from(
    domain: &DomainSpec,
    count: usize,
    samples_per_segment: usize,
    dense: Option<&[ComplexPoint]>,
) -> Result<PlacementData> {
    if matches!(domain, DomainSpec::Plane) {
        return Err(Error::Geometry("placed poles need a domain with boundary".into()));
    }
    domain.validate()?;
    if count == 0 {
        return Err(Error::InvalidInput("pole count must be positive".into()));
    }
    let mut interior = Vec::new();
    let mut poles: Vec<Complex64> = Vec::new();
    let mut segments: Vec<Vec<Segment>> = Vec::new();
    let mut push = |b: Complex64, interior: &mut Vec<ComplexPoint>| -> Result<()> {
        let a = domain.nearest_boundary_point(b)?;
        let seg = extend_b_segment(domain, a, b);
        if let Some(i) = poles.iter().position(|p| (*p - a).norm() < 1e-12) {
            let dir = seg.to.c() - seg.from.c();
            let dup = segments[i].iter().any(|s| {
                let d = s.to.c() - s.from.c();
                (d / d.norm() - dir / dir.norm()).norm() < 1e-9
            });
            if !dup {
                segments[i].push(seg);
            }
        } else {
            poles.push(a);
            interior.push(b.into());
            segments.push(vec![seg]);
        }
        Ok(())
    };
    match dense {
        Some(list) => {
            for b in list {
                if !domain.contains(b.c()) {
                    return Err(Error::Geometry(format!("dense point ({}, {}) is outside the domain", b.re, b.im)));
                }
                push(b.c(), &mut interior)?;
                if interior.len() == count {
                    break;
                }
            }
            if interior.len() < count {
                return Err(Error::InvalidInput("dense sequence yields too few distinct poles".into()));
            }
        }
        None => {
            let mut grid = RationalGrid::new(domain)?;
            while interior.len() < count {
                let b = grid.next().expect("infinite enumeration");
                if grid.denominator() > 4096 {
                    return Err(Error::Geometry("dense enumeration did not produce enough poles".into()));
                }
                push(b, &mut interior)?;
            }
        }
    }
    let n = poles.len();
    let mut eps = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                eps[i][j] = segments[i]
                    .iter()
                    .map(|s| s.distance(poles[j]))
                    .fold(f64::INFINITY, f64::min);
                if !(eps[i][j] > 0.0) {
                    return Err(Error::Geometry(format!("pole {} lies on B_{}", j + 1, i + 1)));
                }
            }
        }
    }
    let caps = (0..n)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                let m = (0..j).map(|i| eps[i][j]).fold(f64::INFINITY, f64::min);
                m / ((j + 1) * (j + 1)) as f64
            }
        })
        .collect();
    Ok(PlacementData {
        domain: domain.clone(),
        interior_dense: interior,
        boundary_poles: poles.into_iter().map(Into::into).collect(),
        segments,
        eps_matrix: eps,
        caps,
        samples_per_segment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new_unchecked(re, im)
    }

    #[test]
    fn rotation_examples() {
        let z = rotate(cp(1.0, 0.0), 1, 4).unwrap();
        assert_eq!((z.re, z.im), (0.0, 1.0));
        let z = rotate(cp(1.0, 0.0), 1, 2).unwrap();
        assert_eq!((z.re, z.im), (-1.0, 0.0));
        let w = cp(0.3, -1.7);
        assert_eq!(rotate(w, 5, 5).unwrap(), w);
        assert!(rotate(w, 1, 0).is_err());
    }

    #[test]
    fn turn_reduces() {
        assert_eq!(Turn::new(6, 8).unwrap(), Turn { k: 3, n: 4 });
        assert_eq!(Turn::new(-1, 4).unwrap(), Turn { k: 3, n: 4 });
        assert_eq!(Turn::new(1, 8).unwrap().add(&Turn::new(7, 8).unwrap()), Turn::ZERO);
    }

    #[test]
    fn ring_examples() {
        let p = ring_poles(0).unwrap();
        assert_eq!(p, vec![cp(2.0, 0.0)]);
        let p = ring_poles(1).unwrap();
        assert_eq!(p[1], cp(1.5, 0.0));
        assert_eq!(p[2], cp(-1.5, 0.0));
        let p = ring_poles(2).unwrap();
        assert_eq!(p.len(), 7);
        let r = 4.0 / 3.0;
        assert_eq!(p[3..], [cp(r, 0.0), cp(0.0, r), cp(-r, 0.0), cp(0.0, -r)]);
        assert!(ring_poles(31).is_err());
        let lay = ring_layout(3).unwrap();
        assert_eq!(lay[5].index, 6);
        assert_eq!(lay[5].ring, 2);
        assert_eq!(lay[5].turn, Turn { k: 1, n: 2 });
    }

    #[test]
    fn placement_nearest_points() {
        let d = placed_poles_from(&DomainSpec::UnitDisc, 1, 1024, Some(&[cp(0.5, 0.0)])).unwrap();
        assert_eq!(d.boundary_poles[0], cp(1.0, 0.0));
        let d = placed_poles_from(&DomainSpec::UnitDisc, 1, 1024, Some(&[cp(0.0, 0.0)])).unwrap();
        assert_eq!(d.boundary_poles[0], cp(1.0, 0.0));
    }

    #[test]
    fn placement_three_poles_eps_matches_sampling() {
        let pts = [cp(0.5, 0.0), cp(0.0, 0.5), cp(-0.5, 0.0)];
        let d = placed_poles_from(&DomainSpec::UnitDisc, 3, 1024, Some(&pts)).unwrap();
        let e12 = d.eps_matrix[0][1];
        let sampled = d.segments[0][0].sampled_distance(d.boundary_poles[1].c(), 1 << 10);
        assert!(e12 > 0.0);
        assert!((e12 - sampled).abs() < 1e-9, "{e12} vs {sampled}");
        assert!((e12 - 1.0).abs() < 1e-12);
        assert!((d.caps[2] - (d.eps_matrix[0][2].min(d.eps_matrix[1][2]) / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn default_grid_gives_eighth_roots() {
        let d = placed_poles(&DomainSpec::UnitDisc, 8, 1024).unwrap();
        let mut angles: Vec<f64> = d.boundary_poles.iter().map(|p| arg_positive(p.c())).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, a) in angles.iter().enumerate() {
            assert!((a - TAU * i as f64 / 8.0).abs() < 1e-12);
        }
        for i in 0..8 {
            let s = &d.segments[i][0];
            for t in [0.1, 0.5, 0.9] {
                let z = s.point_at(t);
                assert!(DomainSpec::UnitDisc.contains(z));
                let dz = DomainSpec::UnitDisc.boundary_distance(z);
                assert!((dz - (z - s.from.c()).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polygon_segments_stop_at_medial_axis() {
        let sq = DomainSpec::Polygon {
            vertices: vec![cp(-1.0, -1.0), cp(1.0, -1.0), cp(1.0, 1.0), cp(-1.0, 1.0)],
        };
        let d = placed_poles_from(&sq, 1, 1024, Some(&[cp(0.5, 0.0)])).unwrap();
        assert_eq!(d.boundary_poles[0], cp(1.0, 0.0));
        let s = &d.segments[0][0];
        assert!((s.to.re - 0.0).abs() < 1e-9, "{:?}", s.to);
    }

    #[test]
    fn polygon_validation() {
        let bow = DomainSpec::Polygon {
            vertices: vec![cp(0.0, 0.0), cp(1.0, 1.0), cp(1.0, 0.0), cp(0.0, 1.0)],
        };
        assert!(bow.validate().is_err());
        assert!(DomainSpec::Disc { center: cp(0.0, 0.0), radius: 0.0 }.validate().is_err());
    }

    #[test]
    fn select_rho_examples() {
        let d1 = DomainSpec::Disc { center: cp(-1.0, 0.0), radius: 1.0 };
        let r = select_rho_and_arc(&d1, &DomainSpec::Plane, &[], &[0.5], 8).unwrap();
        assert_eq!(r.rho, 0.5);
        let (t0, t1) = r.arc.angles();
        assert!(d1.arc_inside(0.5, t0, t1));

        let f = [Hole::new(cp(0.5, 0.0), 0.1)];
        let r = select_rho_and_arc(&DomainSpec::Plane, &DomainSpec::Plane, &f, &[0.5, 0.45, 0.35], 4).unwrap();
        assert_eq!(r.rho, 0.35);

        let err = select_rho_and_arc(&d1, &DomainSpec::Disc { center: cp(0.0, 0.0), radius: 0.3 }, &[], &[0.5], 8);
        match err {
            Err(Error::NoAdmissibleRadius(msg)) => assert!(msg.contains("d2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perforated_disc_invariants() {
        let arc = ArcSpec::new(0, 4).unwrap();
        assert!(PerforatedDisc::new(1.0, vec![Hole::new(cp(0.5, 0.0), 0.1)], arc).is_ok());
        assert!(PerforatedDisc::new(1.0, vec![Hole::new(cp(0.95, 0.0), 0.1)], arc).is_err());
        assert!(PerforatedDisc::new(
            1.0,
            vec![Hole::new(cp(0.5, 0.0), 0.1), Hole::new(cp(0.6, 0.0), 0.05)],
            arc
        )
        .is_err());
        assert!(PerforatedDisc::new(1.0, vec![Hole::new(cp(0.0, 0.0), 0.25)], arc).is_err());
        assert!(PerforatedDisc::new_general(1.0, vec![Hole::new(cp(0.0, 0.0), 0.25)], arc).is_ok());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rotate_inverse(re in -10.0f64..10.0, im in -10.0f64..10.0, n in 1u64..64, k in 0i64..64) {
            let z = cp(re, im);
            let k = k % n as i64;
            let w = rotate(rotate(z, k, n).unwrap(), n as i64 - k, n).unwrap();
            prop_assert!((w.c() - z.c()).norm() < 1e-12 * (1.0 + z.norm()));
        }
    }
}
