//! Segment-pair integrals of the reduced thin-wire kernel
//! `G = e^{−jkR}/(4πR)`, `R = √(|r − r'|² + a²)`.
//!
//! For a pair of straight segments `(s, s')` with local coordinates
//! `u ∈ [0, L]`, `u' ∈ [0, L']` four moments are needed:
//! `∫∫ G`, `∫∫ (u/L) G`, `∫∫ (u'/L') G`, `∫∫ (u/L)(u'/L') G`. The kernel is
//! split into the static part `1/(4πR)`, whose inner integral is done in
//! closed form and which does not depend on frequency, and the smooth
//! remainder `(e^{−jkR} − 1)/(4πR)`, integrated with a tensor Gauss rule at
//! each frequency.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub start: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub len: f64,
    pub radius: f64,
}

impl Segment {
    pub fn point(&self, u: f64) -> Vector3<f64> {
        self.start + self.dir * u
    }

    pub fn midpoint(&self) -> Vector3<f64> {
        self.point(0.5 * self.len)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub m00: Complex64,
    pub m10: Complex64,
    pub m01: Complex64,
    pub m11: Complex64,
}

impl Moments {
    /// Moments of the reversed pair `(s', s)`.
    pub fn swapped(self) -> Self {
        Moments {
            m00: self.m00,
            m10: self.m01,
            m01: self.m10,
            m11: self.m11,
        }
    }

    pub fn add(self, o: Moments) -> Self {
        Moments {
            m00: self.m00 + o.m00,
            m10: self.m10 + o.m10,
            m01: self.m01 + o.m01,
            m11: self.m11 + o.m11,
        }
    }

    /// `∫∫ f_α(u) f_β(u') G` where `f` is the rising (`u/L`) or falling
    /// (`1 − u/L`) half of a triangle.
    pub fn shape_product(&self, rising_obs: bool, rising_src: bool) -> Complex64 {
        match (rising_obs, rising_src) {
            (true, true) => self.m11,
            (true, false) => self.m10 - self.m11,
            (false, true) => self.m01 - self.m11,
            (false, false) => self.m00 - self.m10 - self.m01 + self.m11,
        }
    }
}

/// Gauss points per panel for both static and dynamic parts.
const ORDER: usize = 8;

pub(crate) struct Rules {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rules {
    pub fn new() -> Self {
        let (x, w) = gauss_legendre(ORDER);
        Rules { x, w }
    }

    /// Nodes and weights on `[0, len]` split into `panels` equal panels.
    fn on(&self, len: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = len / panels as f64;
        (0..panels).flat_map(move |p| {
            let mid = (p as f64 + 0.5) * h;
            self.x
                .iter()
                .zip(&self.w)
                .map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
    }
}

fn effective_radius_sq(s: &Segment, t: &Segment) -> f64 {
    0.5 * (s.radius * s.radius + t.radius * t.radius)
}

fn is_near(s: &Segment, t: &Segment) -> bool {
    (s.midpoint() - t.midpoint()).norm() < 1.5 * (s.len + t.len)
}

/// Frequency-independent moments of `1/(4πR)`.
pub(crate) fn static_moments(rules: &Rules, s: &Segment, t: &Segment) -> Moments {
    let a2 = effective_radius_sq(s, t);
    let panels = if is_near(s, t) {
        ((2.0 * s.len / a2.sqrt()).ceil() as usize).clamp(8, 64)
    } else {
        1
    };
    let (mut m00, mut m10, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
    for (u, w) in rules.on(s.len, panels) {
        let r = s.point(u);
        let d = r - t.start;
        let proj = d.dot(&t.dir);
        let rho2 = (d.norm_squared() - proj * proj).max(0.0) + a2;
        let rho = rho2.sqrt();
        let i0 = ((t.len - proj) / rho).asinh() + (proj / rho).asinh();
        let r_end = ((t.len - proj).powi(2) + rho2).sqrt();
        let r_start = (proj * proj + rho2).sqrt();
        let i1 = (r_end - r_start + proj * i0) / t.len;
        let f = u / s.len;
        m00 += w * i0;
        m10 += w * f * i0;
        m01 += w * i1;
        m11 += w * f * i1;
    }
    let c = 1.0 / (4.0 * PI);
    Moments {
        m00: Complex64::new(c * m00, 0.0),
        m10: Complex64::new(c * m10, 0.0),
        m01: Complex64::new(c * m01, 0.0),
        m11: Complex64::new(c * m11, 0.0),
    }
}

/// Moments of `(e^{−jkR} − 1)/(4πR)`.
pub(crate) fn dynamic_moments(rules: &Rules, s: &Segment, t: &Segment, k: f64) -> Moments {
    let a2 = effective_radius_sq(s, t);
    let mut acc = Moments::default();
    let src: Vec<(f64, f64, Vector3<f64>)> = rules.on(t.len, 1).map(|(v, w)| (v, w, t.point(v))).collect();
    for (u, wu) in rules.on(s.len, 1) {
        let r = s.point(u);
        let f = u / s.len;
        for &(v, wv, rp) in &src {
            let big_r = ((r - rp).norm_squared() + a2).sqrt();
            let half = 0.5 * k * big_r;
            // (cos kR − 1 − j sin kR)/R without cancellation
            let re = -2.0 * half.sin() * half.sin() / big_r;
            let im = -k * sinc(k * big_r);
            let g = Complex64::new(re, im) * (wu * wv);
            let fp = v / t.len;
            acc.m00 += g;
            acc.m10 += g * f;
            acc.m01 += g * fp;
            acc.m11 += g * (f * fp);
        }
    }
    let c = 1.0 / (4.0 * PI);
    Moments {
        m00: acc.m00 * c,
        m10: acc.m10 * c,
        m01: acc.m01 * c,
        m11: acc.m11 * c,
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: [f64; 3], dir: [f64; 3], len: f64, radius: f64) -> Segment {
        Segment {
            start: Vector3::from(start),
            dir: Vector3::from(dir).normalize(),
            len,
            radius,
        }
    }

    /// Brute-force tensor quadrature of the static kernel.
    fn brute(s: &Segment, t: &Segment, n: usize) -> [f64; 4] {
        let a2 = effective_radius_sq(s, t);
        let mut m = [0.0; 4];
        let h = s.len / n as f64;
        let hp = t.len / n as f64;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            for j in 0..n {
                let v = (j as f64 + 0.5) * hp;
                let r = ((s.point(u) - t.point(v)).norm_squared() + a2).sqrt();
                let g = h * hp / (4.0 * PI * r);
                let (f, fp) = (u / s.len, v / t.len);
                m[0] += g;
                m[1] += g * f;
                m[2] += g * fp;
                m[3] += g * f * fp;
            }
        }
        m
    }

    #[test]
    fn static_moments_match_brute_force() {
        let rules = Rules::new();
        let a = seg([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.004, 0.00075);
        let cases = [
            a,
            seg([0.0, 0.0, 0.004], [0.0, 0.0, 1.0], 0.004, 0.00075),
            seg([0.0, 0.0, 0.02], [0.0, 0.0, 1.0], 0.004, 0.00075),
            seg([0.03, 0.0, 0.001], [0.0, 0.0, 1.0], 0.004, 0.00075),
        ];
        for t in &cases {
            let m = static_moments(&rules, &a, t);
            let b = brute(&a, t, 1200);
            for (got, want) in [m.m00.re, m.m10.re, m.m01.re, m.m11.re].iter().zip(b) {
                assert!((got - want).abs() < 2e-4 * want.abs(), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn swapping_pairs_transposes_moments() {
        let rules = Rules::new();
        let a = seg([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.004, 0.00075);
        let b = seg([0.01, 0.0, 0.006], [0.0, 0.0, 1.0], 0.004, 0.00075);
        let ab = static_moments(&rules, &a, &b);
        let ba = static_moments(&rules, &b, &a).swapped();
        assert!((ab.m10 - ba.m10).norm() < 1e-9 * ab.m10.norm());
        let k = 2.0 * PI / 0.1;
        let ab = dynamic_moments(&rules, &a, &b, k);
        let ba = dynamic_moments(&rules, &b, &a, k).swapped();
        assert!((ab.m01 - ba.m01).norm() < 1e-12 * ab.m01.norm());
    }
}
