//! Small deterministic SVG plots. Numbers are printed with fixed precision so
//! equal inputs give equal bytes.

use std::fmt::Write;

use num_complex::Complex64;

use crate::geometry::{ArcSpec, ComplexPoint, Hole};

const SIZE: f64 = 480.0;
const PAD: f64 = 24.0;

struct Canvas {
    body: String,
    lo: Complex64,
    scale: f64,
}

impl Canvas {
    fn new(lo: Complex64, hi: Complex64) -> Self {
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        Canvas { body: String::new(), lo, scale: (SIZE - 2.0 * PAD) / span }
    }

    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.lo.re) * self.scale
    }

    fn y(&self, v: f64) -> f64 {
        SIZE - PAD - (v - self.lo.im) * self.scale
    }

    fn circle(&mut self, c: Complex64, r: f64, style: &str) {
        let (x, y, rr) = (self.x(c.re), self.y(c.im), r * self.scale);
        writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{rr:.3}" {style}/>"#).unwrap();
    }

    fn dot(&mut self, c: Complex64, style: &str) {
        let (x, y) = (self.x(c.re), self.y(c.im));
        writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.000" {style}/>"#).unwrap();
    }

    fn polyline(&mut self, pts: &[Complex64], style: &str) {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                d.push(' ');
            }
            write!(d, "{:.3},{:.3}", self.x(p.re), self.y(p.im)).unwrap();
        }
        writeln!(self.body, r#"<polyline points="{d}" fill="none" {style}/>"#).unwrap();
    }

    fn finish(self, title: &str) -> String {
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        )
        .unwrap();
        writeln!(s, "<title>{}</title>", escape(title)).unwrap();
        writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn arc_points(center: Complex64, rho: f64, t0: f64, t1: f64, n: usize) -> Vec<Complex64> {
    (0..=n).map(|i| center + Complex64::from_polar(rho, t0 + (t1 - t0) * i as f64 / n as f64)).collect()
}

/// The perforated disc in its local frame: circle, holes, and the arc.
pub fn domain_svg(rho: f64, holes: &[Hole], arc: ArcSpec) -> String {
    let m = rho * 1.1;
    let mut c = Canvas::new(Complex64::new(-m, -m), Complex64::new(m, m));
    let o = Complex64::new(0.0, 0.0);
    c.circle(o, rho, r##"fill="#eef3fb" stroke="#234" stroke-width="1""##);
    for h in holes {
        c.circle(h.center.c(), h.radius, r##"fill="#c33" stroke="none""##);
    }
    let (t0, t1) = arc.angles();
    c.polyline(&arc_points(o, rho, t0, t1, 128), r##"stroke="#1a7f37" stroke-width="4""##);
    c.dot(o, r##"fill="#000""##);
    c.finish("perforated disc")
}

/// Pole cloud with the unit circle and the disc of radius rho at the anchor.
pub fn poles_svg(poles: &[ComplexPoint], anchor: ComplexPoint, rho: f64) -> String {
    let m = poles.iter().map(|p| p.norm()).fold(anchor.norm() + rho, f64::max) * 1.1;
    let mut c = Canvas::new(Complex64::new(-m, -m), Complex64::new(m, m));
    let o = Complex64::new(0.0, 0.0);
    c.circle(o, 1.0, r##"fill="none" stroke="#888" stroke-width="1""##);
    c.circle(anchor.c(), rho, r##"fill="none" stroke="#1a7f37" stroke-width="1""##);
    for p in poles {
        c.dot(p.c(), r##"fill="#c33""##);
    }
    c.dot(anchor.c(), r##"fill="#000""##);
    c.finish("poles")
}

/// Line plot of finite (x, y) pairs; non-finite y values are marked at the bottom edge.
pub fn decay_svg(title: &str, pts: &[(f64, f64)]) -> String {
    let finite: Vec<(f64, f64)> = pts.iter().cloned().filter(|p| p.1.is_finite()).collect();
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        if y.is_finite() {
            ylo = ylo.min(y);
            yhi = yhi.max(y);
        }
    }
    if !ylo.is_finite() {
        ylo = 0.0;
        yhi = 1.0;
    }
    if !xlo.is_finite() {
        xlo = 0.0;
        xhi = 1.0;
    }
    let ylo = ylo - 0.05 * (yhi - ylo).max(1.0);
    let xs = (xhi - xlo).max(1e-12);
    let ys = (yhi - ylo).max(1e-12);
    // normalize into the unit square
    let to = |x: f64, y: f64| Complex64::new((x - xlo) / xs, (y - ylo) / ys);
    let mut c = Canvas::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0));
    c.polyline(
        &[Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        r##"stroke="#444" stroke-width="1""##,
    );
    let line: Vec<Complex64> = finite.iter().map(|&(x, y)| to(x, y)).collect();
    c.polyline(&line, r##"stroke="#234" stroke-width="1.5""##);
    for &(x, y) in pts {
        if y.is_finite() {
            c.dot(to(x, y), r##"fill="#234""##);
        } else {
            c.dot(Complex64::new((x - xlo) / xs, 0.0), r##"fill="#c33""##);
        }
    }
    writeln!(
        c.body,
        r#"<text x="{PAD}" y="16" font-family="monospace" font-size="11">{} y:[{ylo:.4e}, {yhi:.4e}] x:[{xlo}, {xhi}]</text>"#,
        escape(title)
    )
    .unwrap();
    c.finish(title)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let holes = vec![Hole::new(ComplexPoint::new_unchecked(0.1, 0.0), 0.02)];
        let a = domain_svg(0.375, &holes, ArcSpec::new(0, 4).unwrap());
        let b = domain_svg(0.375, &holes, ArcSpec::new(0, 4).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        let d = decay_svg("x<y", &[(1.0, -2.0), (2.0, -3.0), (3.0, f64::NEG_INFINITY)]);
        assert!(d.contains("x&lt;y"));
        assert_eq!(d.matches("<circle").count(), 3);
    }
}
