//! Thin-wire method-of-moments solver.
//!
//! Straight PEC wires are split into equal segments; the current is expanded
//! in triangle functions centred on the interior nodes of each wire and the
//! mixed-potential electric-field integral equation is tested with the same
//! functions (Galerkin). Feeds and lumped loads sit at interior nodes: a
//! delta-gap voltage at node `k` drives the triangle centred there, and the
//! current through the gap is that triangle's coefficient. For an element with
//! `M` segments the admissible node indices are `1..M`; a centre-fed wire uses
//! node `M/2` with `M` even.

mod kernel;
mod network;

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use kernel::{dynamic_moments, static_moments, Moments, Rules, Segment};

pub use network::{
    radiated_power, realized_gain_curve, transfer_dataset, Observation, PolarizationComponent, PortSweep,
    TerminalSweep,
};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Largest stub reactance magnitude returned near the `tan` poles (Ω).
pub const STUB_REACTANCE_CAP: f64 = 1e9;
/// Condition estimate above which a sample is recomputed at `ω(1 + 1e−9)`.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Straight wire between two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireElement {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub radius: f64,
    pub segments: usize,
}

impl WireElement {
    pub fn length(&self) -> f64 {
        (Vector3::from(self.end) - Vector3::from(self.start)).norm()
    }

    /// Strip of width `w` replaced by a wire of radius `w/4`.
    pub fn from_strip(start: [f64; 3], end: [f64; 3], width: f64, segments: usize) -> Self {
        WireElement {
            start,
            end,
            radius: width / 4.0,
            segments,
        }
    }
}

/// Terminal location: interior node `node` (1-based along the wire) of
/// element `element`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub element: usize,
    pub node: usize,
}

/// Lumped series impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoadImpedance {
    Short,
    /// Shorted lossless line, `Z = j·z_char·tan(ωℓ/c)`.
    Stub { length: f64, z_char: f64 },
    Fixed { re: f64, im: f64 },
}

impl LoadImpedance {
    pub fn at(&self, omega: f64) -> Complex64 {
        match *self {
            LoadImpedance::Short => Complex64::new(0.0, 0.0),
            LoadImpedance::Stub { length, z_char } => {
                let x = z_char * (omega * length / C0).tan();
                Complex64::new(0.0, x.clamp(-STUB_REACTANCE_CAP, STUB_REACTANCE_CAP))
            }
            LoadImpedance::Fixed { re, im } => Complex64::new(re, im),
        }
    }
}

/// Shorted-stub load of length `length` on a line of impedance `z_char`.
pub fn reactive_load(length: f64, z_char: f64) -> Result<LoadImpedance> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::Domain(format!("stub length must be non-negative, got {length}")));
    }
    if !(z_char.is_finite() && z_char > 0.0) {
        return Err(Error::Domain("stub impedance must be positive".into()));
    }
    Ok(if length == 0.0 {
        LoadImpedance::Short
    } else {
        LoadImpedance::Stub { length, z_char }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub at: Terminal,
    pub impedance: LoadImpedance,
}

/// Wire geometry with delta-gap feeds and lumped loads (PEC conductors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireModel {
    pub elements: Vec<WireElement>,
    pub feeds: Vec<Terminal>,
    pub loads: Vec<Load>,
}

/// One triangle function: the segment where it rises and the one where it
/// falls.
#[derive(Debug, Clone, Copy)]
struct Triangle {
    rising: usize,
    falling: usize,
}

/// Discretised model ready for assembly.
pub struct Mesh {
    segments: Vec<Segment>,
    triangles: Vec<Triangle>,
    /// Unique segment pairs `(obs, src)` and their static moments.
    pairs: Vec<(usize, usize, Moments)>,
    /// For every ordered segment pair: index into `pairs` and whether it is
    /// stored reversed.
    pair_of: Vec<(usize, bool)>,
    first_basis: Vec<usize>,
    rules: Rules,
}

impl WireModel {
    /// Centre-fed straight dipole along `z`, centred at `center`.
    pub fn dipole(length: f64, radius: f64, segments: usize, center: [f64; 3]) -> Result<Self> {
        let m = WireModel {
            elements: vec![WireElement {
                start: [center[0], center[1], center[2] - 0.5 * length],
                end: [center[0], center[1], center[2] + 0.5 * length],
                radius,
                segments,
            }],
            feeds: vec![Terminal {
                element: 0,
                node: segments / 2,
            }],
            loads: Vec::new(),
        };
        m.validate_structure()?;
        Ok(m)
    }

    /// Smallest even segment count with segments no longer than `λ_min/20`.
    pub fn default_segments(length: f64, f_max_hz: f64) -> usize {
        let lambda = C0 / f_max_hz;
        let n = (20.0 * length / lambda).ceil() as usize;
        (n + n % 2).max(4)
    }

    pub fn n_basis(&self) -> usize {
        self.elements.iter().map(|e| e.segments.saturating_sub(1)).sum()
    }

    fn basis_index(&self, t: Terminal) -> usize {
        self.elements[..t.element].iter().map(|e| e.segments - 1).sum::<usize>() + t.node - 1
    }

    /// Checks that does not depend on frequency.
    pub fn validate_structure(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Validation("wire model has no elements".into()));
        }
        for (i, e) in self.elements.iter().enumerate() {
            let len = e.length();
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Validation(format!("element {i} has zero length")));
            }
            if !(e.radius.is_finite() && e.radius > 0.0) {
                return Err(Error::Validation(format!("element {i} radius must be positive")));
            }
            if e.segments < 2 {
                return Err(Error::Validation(format!("element {i} needs at least 2 segments")));
            }
            let seg = len / e.segments as f64;
            if e.radius / seg >= 0.5 {
                return Err(Error::Model(format!(
                    "element {i}: radius/segment = {:.3} violates the thin-wire limit 0.5",
                    e.radius / seg
                )));
            }
        }
        let check_terminal = |t: &Terminal, what: &str| -> Result<()> {
            let e = self
                .elements
                .get(t.element)
                .ok_or_else(|| Error::Validation(format!("{what} refers to missing element {}", t.element)))?;
            if t.node == 0 || t.node >= e.segments {
                return Err(Error::Validation(format!(
                    "{what} node {} must be an interior node 1..{} of element {}",
                    t.node,
                    e.segments - 1,
                    t.element
                )));
            }
            Ok(())
        };
        for f in &self.feeds {
            check_terminal(f, "feed")?;
        }
        for l in &self.loads {
            check_terminal(&l.at, "load")?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in self.feeds.iter().chain(self.loads.iter().map(|l| &l.at)) {
            if !seen.insert((t.element, t.node)) {
                return Err(Error::Validation(format!(
                    "two terminals share node {} of element {}",
                    t.node, t.element
                )));
            }
        }
        for i in 0..self.elements.len() {
            for j in i + 1..self.elements.len() {
                let (a, b) = (&self.elements[i], &self.elements[j]);
                let d = segment_distance(
                    Vector3::from(a.start),
                    Vector3::from(a.end),
                    Vector3::from(b.start),
                    Vector3::from(b.end),
                );
                if d < 2.0 * (a.radius + b.radius) {
                    return Err(Error::Model(format!(
                        "elements {i} and {j} are {d:.3e} m apart, closer than twice their radii sum"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Full validation including the segment/wavelength limit at `ω_max`.
    pub fn validate(&self, omega_max: f64) -> Result<()> {
        self.validate_structure()?;
        let lambda = 2.0 * PI * C0 / omega_max;
        for (i, e) in self.elements.iter().enumerate() {
            let seg = e.length() / e.segments as f64;
            if seg >= lambda / 10.0 {
                return Err(Error::Model(format!(
                    "element {i}: segment {seg:.3e} m is not below λ_min/10 = {:.3e} m",
                    lambda / 10.0
                )));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        self.validate_structure()?;
        let mut segments = Vec::new();
        let mut triangles = Vec::new();
        let mut first_basis = Vec::new();
        for e in &self.elements {
            let a = Vector3::from(e.start);
            let b = Vector3::from(e.end);
            let dir = (b - a).normalize();
            let len = (b - a).norm() / e.segments as f64;
            let first = segments.len();
            first_basis.push(triangles.len());
            for k in 0..e.segments {
                segments.push(Segment {
                    start: a + dir * (len * k as f64),
                    dir,
                    len,
                    radius: e.radius,
                });
            }
            for node in 1..e.segments {
                triangles.push(Triangle {
                    rising: first + node - 1,
                    falling: first + node,
                });
            }
        }
        let rules = Rules::new();
        let ns = segments.len();
        let mut lookup: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut pairs = Vec::new();
        let mut pair_of = vec![(0, false); ns * ns];
        for s in 0..ns {
            for t in s..ns {
                let key = pair_key(&segments[s], &segments[t]);
                let idx = *lookup.entry(key).or_insert_with(|| {
                    pairs.push((s, t, static_moments(&rules, &segments[s], &segments[t])));
                    pairs.len() - 1
                });
                pair_of[s * ns + t] = (idx, false);
                pair_of[t * ns + s] = (idx, true);
            }
        }
        Ok(Mesh {
            segments,
            triangles,
            pairs,
            pair_of,
            first_basis,
            rules,
        })
    }
}

/// Quantised relative geometry of a segment pair; equal keys give equal
/// kernel integrals.
fn pair_key(s: &Segment, t: &Segment) -> Vec<i64> {
    let q = |x: f64, unit: f64| (x / unit).round() as i64;
    let d = t.start - s.start;
    let len_unit = 1e-10;
    let mut key = Vec::with_capacity(13);
    key.extend(d.iter().map(|&x| q(x, len_unit)));
    key.extend(s.dir.iter().map(|&x| q(x, 1e-12)));
    key.extend(t.dir.iter().map(|&x| q(x, 1e-12)));
    key.push(q(s.len, len_unit));
    key.push(q(t.len, len_unit));
    key.push(q(s.radius, len_unit));
    key.push(q(t.radius, len_unit));
    key
}

/// Minimum distance between segments `[p0, p1]` and `[q0, q1]`.
fn segment_distance(p0: Vector3<f64>, p1: Vector3<f64>, q0: Vector3<f64>, q1: Vector3<f64>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let (a, e, f) = (d1.dot(&d1), d2.dot(&d2), d2.dot(&r));
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let mut best = ((p0 + d1 * s) - (q0 + d2 * t)).norm();
    // Parallel segments: also try the end points of each against the other.
    for (pt, a0, dir) in [(p0, q0, d2), (p1, q0, d2), (q0, p0, d1), (q1, p0, d1)] {
        let tt = ((pt - a0).dot(&dir) / dir.dot(&dir)).clamp(0.0, 1.0);
        best = best.min((pt - (a0 + dir * tt)).norm());
    }
    best
}

impl Mesh {
    pub fn n_basis(&self) -> usize {
        self.triangles.len()
    }

    fn moments(&self, dynamic: &[Moments], s: usize, t: usize) -> Moments {
        let (idx, reversed) = self.pair_of[s * self.segments.len() + t];
        let m = self.pairs[idx].2.add(dynamic[idx]);
        if reversed {
            m.swapped()
        } else {
            m
        }
    }

    /// Unloaded impedance matrix at `ω > 0`.
    pub(crate) fn impedance(&self, omega: f64) -> DMatrix<Complex64> {
        let k = omega / C0;
        let dynamic: Vec<Moments> = self
            .pairs
            .iter()
            .map(|(s, t, _)| dynamic_moments(&self.rules, &self.segments[*s], &self.segments[*t], k))
            .collect();
        let jwmu = Complex64::new(0.0, omega * MU0);
        let inv_jwe = Complex64::new(0.0, -1.0 / (omega * EPS0));
        let n = self.n_basis();
        let mut z = DMatrix::zeros(n, n);
        for m in 0..n {
            for nn in m..n {
                let (tm, tn) = (self.triangles[m], self.triangles[nn]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, rs) in [(tm.rising, true), (tm.falling, false)] {
                    for (t, rt) in [(tn.rising, true), (tn.falling, false)] {
                        let mo = self.moments(&dynamic, s, t);
                        let (ss, st) = (&self.segments[s], &self.segments[t]);
                        let vector = jwmu * ss.dir.dot(&st.dir) * mo.shape_product(rs, rt);
                        let ds = if rs { 1.0 / ss.len } else { -1.0 / ss.len };
                        let dt = if rt { 1.0 / st.len } else { -1.0 / st.len };
                        acc += vector + inv_jwe * (ds * dt) * mo.m00;
                    }
                }
                z[(m, nn)] = acc;
                z[(nn, m)] = acc;
            }
        }
        z
    }

    /// Far-field rows `[F_θ; F_φ]` (2 × basis) in direction `(θ, φ)`, with
    /// the `e^{−jkr}/r` factor removed.
    pub(crate) fn far_field(&self, omega: f64, theta: f64, phi: f64) -> DMatrix<Complex64> {
        let k = omega / C0;
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        let rhat = Vector3::new(st * cp, st * sp, ct);
        let th = Vector3::new(ct * cp, ct * sp, -st);
        let ph = Vector3::new(-sp, cp, 0.0);
        let pre = Complex64::new(0.0, -omega * MU0 / (4.0 * PI));
        let (x, w) = crate::quadrature::gauss_legendre(8);
        // per segment: ∫ (u/L) e^{jk r̂·r} du and ∫ e^{jk r̂·r} du
        let seg_int: Vec<(Complex64, Complex64)> = self
            .segments
            .iter()
            .map(|s| {
                let mut i0 = Complex64::new(0.0, 0.0);
                let mut i1 = Complex64::new(0.0, 0.0);
                for (xi, wi) in x.iter().zip(&w) {
                    let u = 0.5 * s.len * (1.0 + xi);
                    let e = Complex64::from_polar(0.5 * s.len * wi, k * rhat.dot(&s.point(u)));
                    i0 += e;
                    i1 += e * (u / s.len);
                }
                (i0, i1)
            })
            .collect();
        let mut f = DMatrix::zeros(2, self.n_basis());
        for (n, tri) in self.triangles.iter().enumerate() {
            let (r, fl) = (&self.segments[tri.rising], &self.segments[tri.falling]);
            let ir = seg_int[tri.rising].1;
            let ifl = seg_int[tri.falling].0 - seg_int[tri.falling].1;
            f[(0, n)] = pre * (ir * r.dir.dot(&th) + ifl * fl.dir.dot(&th));
            f[(1, n)] = pre * (ir * r.dir.dot(&ph) + ifl * fl.dir.dot(&ph));
        }
        f
    }

    pub(crate) fn terminal_index(&self, t: Terminal) -> usize {
        self.first_basis[t.element] + t.node - 1
    }
}

/// Full MoM matrix at `ω` with the model's lumped loads on the diagonal.
pub fn assemble_impedance(model: &WireModel, omega: f64) -> Result<DMatrix<Complex64>> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("angular frequency must be positive, got {omega}")));
    }
    model.validate(omega)?;
    let mesh = model.mesh()?;
    let mut z = mesh.impedance(omega);
    for l in &model.loads {
        let i = model.basis_index(l.at);
        z[(i, i)] += l.impedance.at(omega);
    }
    Ok(z)
}

/// Port matrix `P` (basis × feeds) mapping feed voltages to excitation.
pub fn port_matrix(model: &WireModel) -> DMatrix<Complex64> {
    let mut p = DMatrix::zeros(model.n_basis(), model.feeds.len());
    for (j, f) in model.feeds.iter().enumerate() {
        p[(model.basis_index(*f), j)] = Complex64::new(1.0, 0.0);
    }
    p
}

/// Far-field rows `[F_θ; F_φ]` mapping current coefficients to the
/// distance-normalised far field (V) in direction `(θ, φ)`.
pub fn far_field_matrix(model: &WireModel, omega: f64, theta: f64, phi: f64) -> Result<DMatrix<Complex64>> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("angular frequency must be positive, got {omega}")));
    }
    Ok(model.mesh()?.far_field(omega, theta, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_segment_count_for_reference_dipole() {
        assert_eq!(WireModel::default_segments(0.15, 3.8e9), 40);
    }

    #[test]
    fn stub_values() {
        let w = 2.0 * PI * 1e9;
        assert_eq!(reactive_load(0.0, 50.0).unwrap().at(w), Complex64::new(0.0, 0.0));
        let quarter = PI / 4.0 * C0 / w;
        let z = reactive_load(quarter, 50.0).unwrap().at(w);
        assert!((z - Complex64::new(0.0, 50.0)).norm() < 1e-9);
        let pole = PI / 2.0 * C0 / w;
        assert_eq!(reactive_load(pole, 50.0).unwrap().at(w).im.abs(), STUB_REACTANCE_CAP);
        assert!(reactive_load(-1.0, 50.0).is_err());
    }

    #[test]
    fn structural_validation() {
        assert!(WireModel::dipole(0.0, 1e-3, 10, [0.0; 3]).is_err());
        assert!(matches!(WireModel::dipole(0.15, 0.01, 40, [0.0; 3]), Err(Error::Model(_))));
        let mut m = WireModel::dipole(0.15, 0.00075, 40, [0.0; 3]).unwrap();
        let mut other = m.elements[0].clone();
        other.start[0] = 0.002;
        other.end[0] = 0.002;
        m.elements.push(other);
        assert!(matches!(m.validate_structure(), Err(Error::Model(_))));
        let m = WireModel::dipole(0.15, 0.00075, 10, [0.0; 3]).unwrap();
        assert!(matches!(m.validate(2.0 * PI * 3.8e9), Err(Error::Model(_))));
    }

    #[test]
    fn segment_distance_cases() {
        let v = |x: f64, y: f64, z: f64| Vector3::new(x, y, z);
        let d = segment_distance(v(0.0, 0.0, 0.0), v(0.0, 0.0, 1.0), v(0.3, 0.0, 0.0), v(0.3, 0.0, 1.0));
        assert!((d - 0.3).abs() < 1e-12);
        let d = segment_distance(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.5, 1.0, 2.0), v(0.5, -1.0, 2.0));
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn impedance_is_symmetric() {
        let m = WireModel::dipole(0.15, 0.00075, 20, [0.0; 3]).unwrap();
        let z = assemble_impedance(&m, 2.0 * PI * 1e9).unwrap();
        let asym = (&z - z.transpose()).norm() / z.norm();
        assert!(asym < 1e-12, "{asym}");
    }
}
