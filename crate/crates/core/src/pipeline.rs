//! End-to-end optimisation of a dataset: interpolation, operator assembly,
//! QCQP solution and time-domain reconstruction.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_assembly::{
    field_matrix, frequency_rule, total_energy_matrix, windowed_energy_matrix, FieldMatrix, TimeWindow,
};
use crate::qcqp::{solve, Objective, QcqpProblem, QcqpSolution};
use crate::quadrature::trapezoid;
use crate::spectral_basis::{BandLimits, BasisSet, DEFAULT_BASIS_SIZE};
use crate::transfer_data::{densify_check, DensifyReport, InterpolatedTransfer, TransferDataset};
use crate::waveform::{
    auto_grid, radiation_intensity, reconstruct_excitation, reconstruct_field, window_energy_fraction, IntensityTrace,
    TimeGrid, Waveform, Z0,
};

/// Signal a window constraint applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowTarget {
    /// The excitation (`@in`).
    Excitation,
    /// The observed response (`@out`).
    Response,
}

/// `∫_window |s|² ≥ fraction · ∫ |s|²` for the chosen signal `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowConstraint {
    pub fraction: f64,
    pub window: TimeWindow,
    pub target: WindowTarget,
}

impl WindowConstraint {
    pub fn new(fraction: f64, window: TimeWindow, target: WindowTarget) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Domain(format!("energy fraction must lie in (0, 1), got {fraction}")));
        }
        Ok(WindowConstraint {
            fraction,
            window,
            target,
        })
    }
}

/// Parses `fraction,center_s,half_width_s[@in|@out]`; the target defaults to
/// the excitation.
impl FromStr for WindowConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, target) = match s.rsplit_once('@') {
            Some((b, "in")) => (b, WindowTarget::Excitation),
            Some((b, "out")) => (b, WindowTarget::Response),
            Some((_, t)) => return Err(Error::Validation(format!("unknown window target `@{t}`"))),
            None => (s, WindowTarget::Excitation),
        };
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "window constraint `{s}` must read fraction,center,half_width"
            )));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            parts[i]
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("window {name} `{}` is not a number", parts[i])))
        };
        let window = TimeWindow::new(num(1, "center")?, num(2, "half-width")?)?;
        WindowConstraint::new(num(0, "fraction")?, window, target)
    }
}

impl fmt::Display for WindowConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.target {
            WindowTarget::Excitation => "in",
            WindowTarget::Response => "out",
        };
        write!(
            f,
            "{},{:e},{:e}@{t}",
            self.fraction, self.window.center, self.window.half_width
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeConfig {
    /// Excitation band; defaults to the dataset's `band_hz` metadata or its
    /// frequency span.
    pub band: Option<BandLimits>,
    pub basis_size: usize,
    /// Incident energy (J).
    pub w0: f64,
    /// Time at which the response peak is maximised (s).
    pub t0: f64,
    pub windows: Vec<WindowConstraint>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            band: None,
            basis_size: DEFAULT_BASIS_SIZE,
            w0: 1e-10,
            t0: 0.0,
            windows: Vec::new(),
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::Validation(format!("W0 must be positive, got {}", self.w0)));
        }
        if !self.t0.is_finite() {
            return Err(Error::Validation("t0 must be finite".into()));
        }
        if self.basis_size == 0 {
            return Err(Error::Validation("basis size must be positive".into()));
        }
        if self.windows.len() > 2 {
            return Err(Error::Validation("at most two window constraints are supported".into()));
        }
        Ok(())
    }
}

/// Band used for `data` under `config`.
pub fn resolve_band(data: &TransferDataset, config: &OptimizeConfig) -> Result<BandLimits> {
    if let Some(b) = config.band {
        return Ok(b);
    }
    if let Some(v) = data.metadata.get("band_hz") {
        let pair: Vec<f64> = serde_json::from_value(v.clone())
            .map_err(|_| Error::Validation("metadata `band_hz` must be [low, high]".into()))?;
        if pair.len() == 2 {
            return BandLimits::from_hz(pair[0], pair[1]);
        }
        return Err(Error::Validation("metadata `band_hz` must be [low, high]".into()));
    }
    let f = data.frequencies_hz();
    BandLimits::from_hz(f[0], f[f.len() - 1])
}

/// Assembled problem for a dataset.
pub struct Assembled {
    pub basis: BasisSet,
    pub transfer: InterpolatedTransfer,
    pub field: FieldMatrix,
    pub problem: QcqpProblem,
}

/// Builds `max qᵀFᵀFq` s.t. `qᵀq = W₀` plus one inequality
/// `qᵀ(f·W − W_T)q ≤ 0` per window constraint.
pub fn assemble(data: &TransferDataset, config: &OptimizeConfig) -> Result<Assembled> {
    config.validate()?;
    let band = resolve_band(data, config)?;
    let basis = BasisSet::new(band, config.basis_size)?;
    let h = InterpolatedTransfer::new(data.clone(), band)?;
    let ports = h.n_ports();
    let field = field_matrix(&h, &basis, config.t0)?;
    let b0 = total_energy_matrix(None, &basis, ports)?;
    let mut problem = QcqpProblem::new(Objective::Factor(field.entries.clone()), b0.entries.clone(), config.w0);
    for c in &config.windows {
        let (total, part) = match c.target {
            WindowTarget::Excitation => (b0.entries.clone(), windowed_energy_matrix(None, &basis, ports, c.window)?),
            WindowTarget::Response => (
                total_energy_matrix(Some(&h), &basis, ports)?.entries,
                windowed_energy_matrix(Some(&h), &basis, ports, c.window)?,
            ),
        };
        problem = problem.with_inequality(total * c.fraction - part.entries);
    }
    Ok(Assembled {
        basis,
        transfer: h,
        field,
        problem,
    })
}

/// Result of [`optimize`].
pub struct OptimizeReport {
    pub basis: BasisSet,
    pub ports: usize,
    pub solution: QcqpSolution,
    pub excitation: Waveform,
    pub response: Waveform,
    pub intensity: IntensityTrace,
    /// Measured window fractions, one per constraint, in input order.
    pub window_fractions: Vec<f64>,
    /// Response at `t0` predicted by the field matrix.
    pub peak_response: Vec<f64>,
    pub densify: Option<DensifyReport>,
}

impl OptimizeReport {
    pub fn to_json(&self, config: &OptimizeConfig) -> serde_json::Value {
        let band = self.basis.band();
        serde_json::json!({
            "tool": "pulsecraft",
            "version": env!("CARGO_PKG_VERSION"),
            "band_rad_s": [band.omega_min(), band.omega_max()],
            "basis_size": self.basis.n_per_family(),
            "ports": self.ports,
            "w0_joule": config.w0,
            "t0_s": config.t0,
            "windows": config.windows.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            "window_fractions": self.window_fractions,
            "peak_response": self.peak_response,
            "peak_intensity_w_per_sr": self.intensity.peak,
            "solution": self.solution.to_json(),
        })
    }
}

fn energy_on(w: &Waveform) -> f64 {
    trapezoid(&w.squared_sum(), w.grid.step)
}

fn covering(grid: TimeGrid, windows: impl Iterator<Item = TimeWindow>) -> Result<TimeGrid> {
    let (mut a, mut b) = (grid.start, grid.end());
    for w in windows {
        a = a.min(w.start());
        b = b.max(w.end());
    }
    if a == grid.start && b == grid.end() {
        return Ok(grid);
    }
    TimeGrid::new(a, b, grid.step)
}

/// Runs the whole chain on `data`.
pub fn optimize(data: &TransferDataset, config: &OptimizeConfig) -> Result<OptimizeReport> {
    let a = assemble(data, config)?;
    let solution = solve(&a.problem)?;
    let ports = a.transfer.n_ports();
    let peak_response = a.field.apply(&solution.q);

    let basis = a.basis;
    let q = &solution.q;
    let in_windows = config
        .windows
        .iter()
        .filter(|c| c.target == WindowTarget::Excitation)
        .map(|c| c.window);
    let out_windows = config
        .windows
        .iter()
        .filter(|c| c.target == WindowTarget::Response)
        .map(|c| c.window);
    let excitation_grid = auto_grid(&basis, config.t0 - data.t_delay, config.w0, |g| {
        Ok(energy_on(&reconstruct_excitation(&basis, q, ports, g)?))
    })?;
    let excitation = reconstruct_excitation(&basis, q, ports, &covering(excitation_grid, in_windows)?)?;
    let response_total = total_energy_matrix(Some(&a.transfer), &basis, ports)?.quadratic_form(q);
    let response_grid = auto_grid(&basis, config.t0, response_total, |g| {
        Ok(energy_on(&reconstruct_field(&a.transfer, &basis, q, g)?))
    })?;
    let response = reconstruct_field(&a.transfer, &basis, q, &covering(response_grid, out_windows)?)?;
    let intensity = radiation_intensity(&response, Z0)?;
    let window_fractions = config
        .windows
        .iter()
        .map(|c| match c.target {
            WindowTarget::Excitation => window_energy_fraction(&excitation, c.window),
            WindowTarget::Response => window_energy_fraction(&response, c.window),
        })
        .collect::<Result<Vec<_>>>()?;
    let densify = densify_check(data, &basis).ok();
    Ok(OptimizeReport {
        basis,
        ports,
        solution,
        excitation,
        response,
        intensity,
        window_fractions,
        peak_response,
        densify,
    })
}

/// Cosine similarity between the excitation spectrum of `q` and the matched
/// filter `conj(H_c(ω)) e^{−jωt₀}` of output `output`, over the band. The
/// optimum is only defined up to a global sign, so the magnitude is returned.
pub fn matched_filter_similarity(
    h: &InterpolatedTransfer,
    basis: &BasisSet,
    q: &[f64],
    output: usize,
    t0: f64,
) -> Result<f64> {
    if output >= h.n_outputs() {
        return Err(Error::Range(format!("output {output} out of range")));
    }
    let ports = h.n_ports();
    let spectrum = basis.synthesize_spectrum(q, ports)?;
    let rule = frequency_rule(basis, Some(h), t0.abs(), 1);
    let (mut dot, mut na, mut ng) = (0.0, 0.0, 0.0);
    for (&w, &wt) in rule.nodes.iter().zip(&rule.weights) {
        for p in 0..ports {
            let a = spectrum.eval(p, w);
            let g = h.entry(w, output, p).conj() * Complex64::from_polar(1.0, -w * t0);
            dot += wt * (a * g.conj()).re;
            na += wt * a.norm_sqr();
            ng += wt * g.norm_sqr();
        }
    }
    if na == 0.0 || ng == 0.0 {
        return Err(Error::Numerical("zero spectrum in similarity".into()));
    }
    Ok(dot.abs() / (na * ng).sqrt())
}
