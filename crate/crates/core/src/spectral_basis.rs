//! Band-limited orthonormal spectral basis.
//!
//! Every basis function is a single sine lobe series member on the band
//! `ω_min ≤ |ω| ≤ ω_max`:
//!
//! ```text
//! ξ_n(ω) = sin(nπ (|ω| − ω_min) / Δ) / √Δ  ×  { 1            (real family)
//!                                             { j·sign(ω)    (imaginary family)
//! ```
//!
//! with `Δ = ω_max − ω_min`. Both families satisfy `ξ(−ω) = conj ξ(ω)`, so any
//! real combination has a real time-domain image.
//!
//! Transform convention: a spectrum `a(ω)` maps to the time signal
//! `a(t) = (1/√(2π)) ∫ a(ω) e^{jωt} dω`. The `1/√(2π)` factor is the square
//! root of the unit constant `C = 1/(2π)` that Parseval's theorem demands for
//! the unnormalised `∫ a(ω) e^{jωt} dω` transform; folding it into the
//! time-domain image makes `∫ |a(t)|² dt = ∫_Ω |a(ω)|² dω = qᵀq`, i.e. the
//! coefficient norm is the signal energy in joules.
//!
//! Coefficients are real (one real number per function); the imaginary
//! family carries the quadrature part of the spectrum.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{CompositeRule, PANEL_ORDER};

/// `1/√(2π)`: the per-signal share of the Parseval unit constant.
pub const TIME_SCALE: f64 = 0.398_942_280_401_432_7;

/// Frequency band in angular frequency (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLimits {
    omega_min: f64,
    omega_max: f64,
}

impl BandLimits {
    pub fn new(omega_min: f64, omega_max: f64) -> Result<Self> {
        if !(omega_min.is_finite() && omega_max.is_finite()) {
            return Err(Error::Domain("band limits must be finite".into()));
        }
        if omega_min < 0.0 || omega_min >= omega_max {
            return Err(Error::Domain(format!(
                "band requires 0 ≤ ω_min < ω_max, got [{omega_min}, {omega_max}]"
            )));
        }
        Ok(BandLimits {
            omega_min,
            omega_max,
        })
    }

    pub fn from_hz(f_min: f64, f_max: f64) -> Result<Self> {
        Self::new(2.0 * PI * f_min, 2.0 * PI * f_max)
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn width(&self) -> f64 {
        self.omega_max - self.omega_min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.omega_min + self.omega_max)
    }

    /// True when `|omega|` lies in the closed band.
    pub fn contains(&self, omega: f64) -> bool {
        let w = omega.abs();
        w >= self.omega_min && w <= self.omega_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisFunctionId {
    pub index: usize,
    pub family: Family,
}

impl BasisFunctionId {
    pub fn real(index: usize) -> Self {
        BasisFunctionId {
            index,
            family: Family::Real,
        }
    }

    pub fn imaginary(index: usize) -> Self {
        BasisFunctionId {
            index,
            family: Family::Imaginary,
        }
    }
}

/// `N` sine functions per family on a band.
///
/// Coefficient vectors are port-major: each port owns a block of `2N`
/// entries, real family `n = 1..N` first, then imaginary family `n = 1..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    band: BandLimits,
    n_per_family: usize,
}

pub const DEFAULT_BASIS_SIZE: usize = 120;

impl BasisSet {
    pub fn new(band: BandLimits, n_per_family: usize) -> Result<Self> {
        if n_per_family == 0 {
            return Err(Error::Domain("basis needs at least one function per family".into()));
        }
        Ok(BasisSet { band, n_per_family })
    }

    pub fn band(&self) -> &BandLimits {
        &self.band
    }

    pub fn n_per_family(&self) -> usize {
        self.n_per_family
    }

    /// `2N`
    pub fn per_port(&self) -> usize {
        2 * self.n_per_family
    }

    pub fn coefficient_len(&self, ports: usize) -> usize {
        ports * self.per_port()
    }

    /// Position of `id` for `port` in a coefficient vector.
    pub fn position(&self, port: usize, id: BasisFunctionId) -> usize {
        let offset = match id.family {
            Family::Real => 0,
            Family::Imaginary => self.n_per_family,
        };
        port * self.per_port() + offset + id.index - 1
    }

    /// Inverse of [`position`](Self::position): `(port, id)`.
    pub fn id_at(&self, position: usize) -> (usize, BasisFunctionId) {
        let port = position / self.per_port();
        let local = position % self.per_port();
        if local < self.n_per_family {
            (port, BasisFunctionId::real(local + 1))
        } else {
            (port, BasisFunctionId::imaginary(local - self.n_per_family + 1))
        }
    }

    fn check_id(&self, id: BasisFunctionId) -> Result<()> {
        if id.index == 0 {
            return Err(Error::Domain("basis index starts at 1".into()));
        }
        Ok(())
    }

    /// Positive-band sine shape `sin(nπ(ω − ω_min)/Δ)/√Δ`; zero outside.
    pub fn shape(&self, n: usize, omega_abs: f64) -> f64 {
        let b = &self.band;
        if omega_abs < b.omega_min || omega_abs > b.omega_max {
            return 0.0;
        }
        let d = b.width();
        (n as f64 * PI * (omega_abs - b.omega_min) / d).sin() / d.sqrt()
    }

    pub fn evaluate(&self, id: BasisFunctionId, omega: f64) -> Result<Complex64> {
        self.check_id(id)?;
        let s = self.shape(id.index, omega.abs());
        Ok(match id.family {
            Family::Real => Complex64::new(s, 0.0),
            Family::Imaginary => Complex64::new(0.0, omega.signum() * s),
        })
    }

    /// Closed-form time-domain image `(1/√(2π)) ∫_Ω ξ(ω) e^{jωt} dω`.
    pub fn time_image(&self, id: BasisFunctionId, t: f64) -> Result<f64> {
        self.check_id(id)?;
        Ok(self.time_image_unchecked(id, t))
    }

    pub(crate) fn time_image_unchecked(&self, id: BasisFunctionId, t: f64) -> f64 {
        let d = self.band.width();
        let w0 = self.band.omega_min;
        let k = id.index as f64 * PI / d;
        let scale = 2.0 * TIME_SCALE / d.sqrt();
        match id.family {
            // 2∫ s(ω) cos(ωt) dω over the positive band
            Family::Real => {
                let v = 0.5 * (sine_integral(k + t, w0 * t, d) + sine_integral(k - t, -w0 * t, d));
                scale * v
            }
            // −2∫ s(ω) sin(ωt) dω over the positive band
            Family::Imaginary => {
                let v = 0.5
                    * (cosine_integral(k - t, -w0 * t, d) - cosine_integral(k + t, w0 * t, d));
                -scale * v
            }
        }
    }

    /// Quadrature rule on the positive band with panels no wider than
    /// `Δ/(4N)` (and `max_width` when given) that honours `breakpoints`.
    pub(crate) fn band_rule(&self, extra_breaks: &[f64], max_width: f64, halvings: u32) -> CompositeRule {
        let b = &self.band;
        let mut breaks: Vec<f64> = Vec::with_capacity(extra_breaks.len() + 2);
        breaks.push(b.omega_min);
        breaks.extend(
            extra_breaks
                .iter()
                .copied()
                .filter(|&w| w > b.omega_min && w < b.omega_max),
        );
        breaks.push(b.omega_max);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut width = b.width() / (4.0 * self.n_per_family as f64);
        if max_width.is_finite() && max_width > 0.0 {
            width = width.min(max_width);
        }
        width /= f64::from(1u32 << halvings);
        CompositeRule::from_breakpoints(&breaks, width, PANEL_ORDER)
    }

    /// Shape values `s_n(ω_i)` as an `nodes × N` matrix.
    pub(crate) fn shape_matrix(&self, nodes: &[f64]) -> DMatrix<f64> {
        let n = self.n_per_family;
        let d = self.band.width();
        let norm = 1.0 / d.sqrt();
        DMatrix::from_fn(nodes.len(), n, |i, j| {
            let x = PI * (nodes[i] - self.band.omega_min) / d;
            ((j + 1) as f64 * x).sin() * norm
        })
    }

    /// Inner products `∫_Ω ξ_m*(ω) ξ_n(ω) dω` by composite Gauss–Legendre
    /// quadrature on the positive band (the negative band folds in as the
    /// complex conjugate, so every entry is real).
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let rule = self.band_rule(&[], f64::INFINITY, 0);
        let s = self.shape_matrix(&rule.nodes);
        let mut sw = s.clone();
        for (mut row, w) in sw.row_iter_mut().zip(&rule.weights) {
            row *= 2.0 * w;
        }
        let block = s.transpose() * sw;
        let n = self.n_per_family;
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&block);
        g.view_mut((n, n), (n, n)).copy_from(&block);
        // Real/imaginary cross terms: 2·Re(j ∫ s s) = 0 exactly.
        g
    }

    pub fn synthesize_spectrum(&self, q: &[f64], ports: usize) -> Result<Spectrum> {
        let expected = self.coefficient_len(ports);
        if q.len() != expected {
            return Err(Error::Dimension {
                context: "coefficient vector",
                expected,
                actual: q.len(),
            });
        }
        Ok(Spectrum {
            basis: *self,
            ports,
            q: q.to_vec(),
        })
    }
}

/// `∫_0^Δ sin(αu + β) du`, stable as `α → 0`.
fn sine_integral(alpha: f64, beta: f64, d: f64) -> f64 {
    let h = 0.5 * alpha * d;
    d * (beta + h).sin() * sinc(h)
}

/// `∫_0^Δ cos(αu + β) du`, stable as `α → 0`.
fn cosine_integral(alpha: f64, beta: f64, d: f64) -> f64 {
    let h = 0.5 * alpha * d;
    d * (beta + h).cos() * sinc(h)
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Per-port excitation spectrum `a_p(ω) = Σ_n q_pn ξ_n(ω)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    basis: BasisSet,
    ports: usize,
    q: Vec<f64>,
}

impl Spectrum {
    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.q
    }

    /// Exactly zero outside the band.
    pub fn eval(&self, port: usize, omega: f64) -> Complex64 {
        let n = self.basis.n_per_family;
        let w = omega.abs();
        if !self.basis.band.contains(w) {
            return Complex64::new(0.0, 0.0);
        }
        let block = &self.q[port * 2 * n..(port + 1) * 2 * n];
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..n {
            let s = self.basis.shape(k + 1, w);
            re += block[k] * s;
            im += block[n + k] * s;
        }
        Complex64::new(re, omega.signum() * im)
    }

    /// Time-domain signal of one port via the closed-form images.
    pub fn time_value(&self, port: usize, t: f64) -> f64 {
        let n = self.basis.n_per_family;
        let block = &self.q[port * 2 * n..(port + 1) * 2 * n];
        (0..2 * n)
            .filter(|&k| block[k] != 0.0)
            .map(|k| {
                let (_, id) = self.basis.id_at(k);
                block[k] * self.basis.time_image_unchecked(id, t)
            })
            .sum()
    }
}
