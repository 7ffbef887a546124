//! Reduced-size invariant suites run by `pulsecraft selftest`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_assembly::{total_energy_matrix, windowed_energy_matrix, TimeWindow};
use crate::quadrature::{trapezoid, CompositeRule};
use crate::spectral_basis::{BandLimits, BasisSet, TIME_SCALE};
use crate::synthetic::{linear_grid, resonator_dataset, Resonance};
use crate::transfer_data::{DofKind, InterpolatedTransfer};
use crate::wire_mom::{assemble_impedance, port_matrix, radiated_power, WireModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Orthonormality,
    Parseval,
    Oracle,
    EnergyBalance,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Orthonormality, Suite::Parseval, Suite::Oracle, Suite::EnergyBalance];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Orthonormality => "orthonormality",
            Suite::Parseval => "parseval",
            Suite::Oracle => "oracle",
            Suite::EnergyBalance => "energy-balance",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Suites to run; all when empty.
    pub suites: Vec<Suite>,
    /// Test hook: added to one off-diagonal Gram entry before checking.
    pub gram_perturbation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub invariant: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<15} {}: {:.3e} (tol {:.1e}, {:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.as_str(),
            self.invariant,
            self.measured,
            self.tolerance,
            self.seconds
        )
    }
}

pub fn run(options: &SelftestOptions) -> Result<Vec<SuiteReport>> {
    let suites = if options.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        options.suites.clone()
    };
    suites
        .into_iter()
        .map(|s| {
            let start = Instant::now();
            let (invariant, measured, tolerance) = match s {
                Suite::Orthonormality => ("gram matrix equals identity", orthonormality(options.gram_perturbation)?, 1e-10),
                Suite::Parseval => ("time energy equals coefficient norm", parseval()?, 1e-3),
                Suite::Oracle => ("energy forms match time integration", oracle()?, 1e-3),
                Suite::EnergyBalance => ("radiated power equals delivered power", energy_balance()?, 2e-2),
            };
            Ok(SuiteReport {
                suite: s,
                invariant,
                passed: measured < tolerance,
                measured,
                tolerance,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn dipole_band(n: usize) -> Result<BasisSet> {
    BasisSet::new(BandLimits::from_hz(0.0, 3.8e9)?, n)
}

fn orthonormality(perturb: Option<f64>) -> Result<f64> {
    let basis = dipole_band(40)?;
    let mut g = basis.gram_matrix();
    if let Some(p) = perturb {
        g[(0, 1)] += p;
        g[(1, 0)] += p;
    }
    Ok((g - DMatrix::identity(80, 80)).amax())
}

fn random_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Sampled time images of every basis function on `times`.
fn image_matrix(basis: &BasisSet, times: &[f64]) -> Result<DMatrix<f64>> {
    let n = basis.coefficient_len(1);
    let mut m = DMatrix::zeros(times.len(), n);
    for j in 0..n {
        let (_, id) = basis.id_at(j);
        for (i, &t) in times.iter().enumerate() {
            m[(i, j)] = basis.time_image(id, t)?;
        }
    }
    Ok(m)
}

fn parseval() -> Result<f64> {
    let basis = dipole_band(30)?;
    let wmax = basis.band().omega_max();
    let step = PI / (8.0 * wmax);
    let span = 400.0 * 2.0 * PI / basis.band().width();
    let count = (2.0 * span / step) as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| -span + k as f64 * step).collect();
    let images = image_matrix(&basis, &times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let q = random_q(&mut rng, basis.coefficient_len(1));
        let a = &images * nalgebra::DVector::from_column_slice(&q);
        let e: Vec<f64> = a.iter().map(|v| v * v).collect();
        let time_energy = trapezoid(&e, step);
        let norm: f64 = q.iter().map(|x| x * x).sum();
        worst = worst.max((time_energy - norm).abs() / norm);
    }
    Ok(worst)
}

/// Output `y(t) = (1/√2π)∫ H a e^{jωt} dω` by a dense trapezoid sum.
fn brute_field(h: &InterpolatedTransfer, basis: &BasisSet, q: &[f64], omegas: &[f64], t: f64) -> f64 {
    let spectrum = basis.synthesize_spectrum(q, 1).expect("sized");
    let dw = omegas[1] - omegas[0];
    let mut acc = 0.0;
    for (i, &w) in omegas.iter().enumerate() {
        let wt = if i == 0 || i == omegas.len() - 1 { 0.5 } else { 1.0 };
        acc += wt * (h.entry(w, 0, 0) * spectrum.eval(0, w) * Complex64::from_polar(1.0, w * t)).re;
    }
    2.0 * TIME_SCALE * acc * dw
}

fn oracle() -> Result<f64> {
    let f = linear_grid(0.0, 2e9, 401);
    let modes = [Resonance {
        f0_hz: 1e9,
        q: 4.0,
        gain: 1.0,
    }];
    let data = resonator_dataset(&f, &modes, 0.3e-9, DofKind::IncidentWave)?;
    let basis = BasisSet::new(BandLimits::from_hz(0.2e9, 1.8e9)?, 12)?;
    let h = InterpolatedTransfer::new(data, *basis.band())?;
    let window = TimeWindow::new(0.2e-9, 1.0e-9)?;
    let w_in = windowed_energy_matrix(None, &basis, 1, window)?;
    let w_out = windowed_energy_matrix(Some(&h), &basis, 1, window)?;
    let total = total_energy_matrix(Some(&h), &basis, 1)?;
    let omegas = linear_grid(basis.band().omega_min(), basis.band().omega_max(), 8001);
    let rule = CompositeRule::uniform(window.start(), window.end(), PI / (4.0 * basis.band().omega_max()), 8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let q = random_q(&mut rng, basis.coefficient_len(1));
        let spectrum = basis.synthesize_spectrum(&q, 1)?;
        let e_in = rule.integrate(|t| spectrum.time_value(0, t).powi(2));
        let e_out = rule.integrate(|t| brute_field(&h, &basis, &q, &omegas, t).powi(2));
        let e_total = {
            let dw = omegas[1] - omegas[0];
            let v: Vec<f64> = omegas
                .iter()
                .map(|&w| 2.0 * (h.entry(w, 0, 0) * spectrum.eval(0, w)).norm_sqr())
                .collect();
            trapezoid(&v, dw)
        };
        for (form, brute) in [(&w_in, e_in), (&w_out, e_out), (&total, e_total)] {
            worst = worst.max((form.quadratic_form(&q) - brute).abs() / brute);
        }
    }
    Ok(worst)
}

fn energy_balance() -> Result<f64> {
    let model = WireModel::dipole(0.15, 0.00075, 20, [0.0; 3])?;
    let mut worst: f64 = 0.0;
    for f in [0.5e9, 0.95e9, 1.5e9] {
        let w = 2.0 * PI * f;
        let z = assemble_impedance(&model, w)?;
        let v = port_matrix(&model);
        let i = z
            .lu()
            .solve(&v)
            .ok_or_else(|| Error::Numerical("singular impedance matrix".into()))?;
        let delivered = 0.5 * (v.adjoint() * &i)[(0, 0)].re;
        let radiated = radiated_power(&model, w, i.as_slice())?;
        worst = worst.max((radiated - delivered).abs() / delivered);
    }
    Ok(worst)
}
