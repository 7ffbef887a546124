//! Analytic transfer datasets used for demonstrations and tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer_data::{DofKind, TransferDataset};

/// Excitation band of the THz resonator demo (Hz).
pub const THZ_BAND_HZ: (f64, f64) = (625e9, 2.8e12);
/// Source-to-target delay of the THz resonator demo (s).
pub const THZ_DELAY_S: f64 = 0.2e-12;

/// Second-order band-pass term `g / (1 + jQ(ω/ω₀ − ω₀/ω))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub f0_hz: f64,
    pub q: f64,
    pub gain: f64,
}

impl Resonance {
    pub fn response(&self, f_hz: f64) -> Complex64 {
        if f_hz == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = self.q * (f_hz / self.f0_hz - self.f0_hz / f_hz);
        Complex64::new(self.gain, 0.0) / Complex64::new(1.0, x)
    }
}

/// Single-port, single-output dataset `H(f) = Σ_k r_k(f) e^{−jωt_d}`.
pub fn resonator_dataset(
    freqs_hz: &[f64],
    resonances: &[Resonance],
    t_delay: f64,
    dof: DofKind,
) -> Result<TransferDataset> {
    if resonances.is_empty() {
        return Err(Error::Validation("at least one resonance is required".into()));
    }
    for r in resonances {
        if !(r.f0_hz > 0.0 && r.q > 0.0 && r.gain.is_finite()) {
            return Err(Error::Domain(format!("invalid resonance {r:?}")));
        }
    }
    let samples = freqs_hz
        .iter()
        .map(|&f| {
            let h: Complex64 = resonances.iter().map(|r| r.response(f)).sum();
            h * Complex64::from_polar(1.0, -2.0 * PI * f * t_delay)
        })
        .collect();
    let mut d = TransferDataset::new(freqs_hz.to_vec(), 1, 1, samples, dof)?;
    d.t_delay = t_delay;
    d.metadata.insert("generator".into(), "resonator".into());
    d.metadata.insert("resonances".into(), serde_json::to_value(resonances)?);
    Ok(d)
}

/// Frequency-flat single-port response `H = value·e^{−jωt_d}`.
pub fn flat_dataset(freqs_hz: &[f64], value: f64, t_delay: f64, dof: DofKind) -> Result<TransferDataset> {
    let samples = freqs_hz
        .iter()
        .map(|&f| Complex64::from_polar(value, -2.0 * PI * f * t_delay))
        .collect();
    let mut d = TransferDataset::new(freqs_hz.to_vec(), 1, 1, samples, dof)?;
    d.t_delay = t_delay;
    d.metadata.insert("generator".into(), "flat".into());
    Ok(d)
}

pub fn linear_grid(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| f_lo + (f_hi - f_lo) * i as f64 / (n - 1) as f64).collect()
}

/// Plane-wave to target-field response of a multi-resonant THz structure:
/// three lightly damped modes inside 625 GHz – 2.8 THz, sampled on 1001
/// points over 0.5–3 THz. The excitation band is stored as `band_hz`.
pub fn thz_resonator() -> TransferDataset {
    let modes = [
        Resonance {
            f0_hz: 0.9e12,
            q: 20.0,
            gain: 1.0,
        },
        Resonance {
            f0_hz: 1.45e12,
            q: 35.0,
            gain: 0.8,
        },
        Resonance {
            f0_hz: 2.2e12,
            q: 25.0,
            gain: 0.6,
        },
    ];
    let freqs = linear_grid(0.5e12, 3.0e12, 1001);
    resonator_dataset(&freqs, &modes, THZ_DELAY_S, DofKind::PlaneWaveField)
        .expect("fixed parameters are valid")
        .with_metadata("band_hz", vec![THZ_BAND_HZ.0, THZ_BAND_HZ.1])
}
