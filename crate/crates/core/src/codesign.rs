//! Parametric co-design sweeps of two-element dipole arrays with the
//! optimal-pulse solver in the inner loop.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_assembly::{dissipated_energy_matrix, field_matrix, total_energy_matrix};
use crate::qcqp::{solve_unconstrained, Objective, QcqpProblem};
use crate::spectral_basis::{BandLimits, BasisSet, DEFAULT_BASIS_SIZE};
use crate::transfer_data::{DofKind, InterpolatedTransfer, DEFAULT_Z_CHAR};
use crate::waveform::Z0;
use crate::wire_mom::{
    reactive_load, Load, LoadImpedance, Observation, PortSweep, Terminal, TerminalSweep, WireElement, WireModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    Single,
    DrivenDriven,
    Reflector,
    Director,
    ReflectorLoaded,
}

impl Configuration {
    pub const ALL: [Configuration; 5] = [
        Configuration::Single,
        Configuration::DrivenDriven,
        Configuration::Reflector,
        Configuration::Director,
        Configuration::ReflectorLoaded,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Configuration::Single => "single",
            Configuration::DrivenDriven => "driven-driven",
            Configuration::Reflector => "reflector",
            Configuration::Director => "director",
            Configuration::ReflectorLoaded => "reflector-loaded",
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown configuration `{s}`")))
    }
}

/// Optimised degree of freedom: port voltages normalised by dissipated
/// energy, or incident power waves normalised by incident energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofMode {
    Unmatched,
    Matched,
}

impl DofMode {
    pub fn dof_kind(&self) -> DofKind {
        match self {
            DofMode::Unmatched => DofKind::PortVoltage,
            DofMode::Matched => DofKind::IncidentWave,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DofMode::Unmatched => "unmatched",
            DofMode::Matched => "matched",
        }
    }
}

impl fmt::Display for DofMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DofMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unmatched" => Ok(DofMode::Unmatched),
            "matched" => Ok(DofMode::Matched),
            _ => Err(Error::Validation(format!("unknown mode `{s}` (expected matched or unmatched)"))),
        }
    }
}

/// Full description of a sweep; serialised verbatim into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub configuration: Configuration,
    /// Element spacing normalised by twice the dipole length.
    pub spacing: Vec<f64>,
    /// Stub lengths normalised by twice the dipole length (loaded case).
    pub load_grid: Vec<f64>,
    pub mode: DofMode,
    pub f_max_hz: f64,
    pub n_freq: usize,
    pub basis_size: usize,
    pub w0: f64,
    pub t0: f64,
    pub z_char: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub segments: usize,
}

impl SweepSpec {
    /// 150 mm dipoles of 3 mm strip width, 0–3.8 GHz, 20 log-spaced
    /// spacings in `[0.05, 1]`.
    pub fn new(configuration: Configuration, mode: DofMode) -> Self {
        let length_m = 0.15;
        let f_max_hz = 3.8e9;
        SweepSpec {
            configuration,
            spacing: log_grid(0.05, 1.0, 20),
            load_grid: (0..=40).map(|i| i as f64 / 40.0).collect(),
            mode,
            f_max_hz,
            n_freq: 1001,
            basis_size: DEFAULT_BASIS_SIZE,
            w0: 1e-10,
            t0: 0.0,
            z_char: DEFAULT_Z_CHAR,
            length_m,
            width_m: 0.003,
            segments: WireModel::default_segments(length_m, f_max_hz),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spacing.is_empty() {
            return Err(Error::Validation("spacing grid is empty".into()));
        }
        if self.spacing.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Validation("spacing values must be positive".into()));
        }
        if self.configuration == Configuration::ReflectorLoaded {
            if self.load_grid.is_empty() {
                return Err(Error::Validation("load grid is empty".into()));
            }
            if self.load_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(Error::Validation("load lengths must be non-negative".into()));
            }
        }
        let positive = [
            ("f_max_hz", self.f_max_hz),
            ("w0", self.w0),
            ("z_char", self.z_char),
            ("length_m", self.length_m),
            ("width_m", self.width_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.t0.is_finite() {
            return Err(Error::Validation("t0 must be finite".into()));
        }
        if self.n_freq < 3 {
            return Err(Error::Validation("at least 3 frequency samples are needed".into()));
        }
        if self.basis_size == 0 || self.segments < 2 {
            return Err(Error::Validation("basis size and segment count must be positive".into()));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_freq - 1;
        (0..=n).map(|i| self.f_max_hz * i as f64 / n as f64).collect()
    }

    pub fn basis(&self) -> Result<BasisSet> {
        BasisSet::new(BandLimits::from_hz(0.0, self.f_max_hz)?, self.basis_size)
    }

    /// Far-field observation: end-fire along +x.
    pub fn observation(&self) -> Observation {
        Observation::theta(PI / 2.0, 0.0)
    }

    fn element(&self, x: f64) -> WireElement {
        let h = 0.5 * self.length_m;
        WireElement::from_strip([x, 0.0, -h], [x, 0.0, h], self.width_m, self.segments)
    }

    /// Array geometry at normalised spacing `d_over_2l`. The driven element
    /// sits at the origin; a reflector lies behind it (−x), a director in
    /// front (+x).
    pub fn model(&self, configuration: Configuration, d_over_2l: f64) -> WireModel {
        let d = d_over_2l * 2.0 * self.length_m;
        let center = Terminal {
            element: 0,
            node: self.segments / 2,
        };
        let second = Terminal { element: 1, ..center };
        let short = |at| Load {
            at,
            impedance: LoadImpedance::Short,
        };
        let driven = self.element(0.0);
        match configuration {
            Configuration::Single => WireModel {
                elements: vec![driven],
                feeds: vec![center],
                loads: vec![],
            },
            Configuration::DrivenDriven => WireModel {
                elements: vec![driven, self.element(-d)],
                feeds: vec![center, second],
                loads: vec![],
            },
            Configuration::Reflector | Configuration::ReflectorLoaded => WireModel {
                elements: vec![driven, self.element(-d)],
                feeds: vec![center],
                loads: vec![short(second)],
            },
            Configuration::Director => WireModel {
                elements: vec![driven, self.element(d)],
                feeds: vec![center],
                loads: vec![short(second)],
            },
        }
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub configuration: Configuration,
    pub d_over_2l: f64,
    pub l_over_2l: Option<f64>,
    /// Peak radiation intensity (W/sr).
    pub u_max: f64,
    /// Optimal coefficient vector.
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "config,d_over_2L,l_over_2L,u_max_w_per_sr")?;
        for r in &self.rows {
            let l = r.l_over_2l.map(|l| l.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.configuration, r.d_over_2l, l, r.u_max)?;
        }
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "pulsecraft",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "sweep",
            "spec": self.spec,
            "rows": self.rows.len(),
        })
    }
}

/// Peak intensity and optimal coefficients for one port-level response.
pub fn peak_intensity(spec: &SweepSpec, basis: &BasisSet, sweep: &PortSweep) -> Result<(f64, Vec<f64>)> {
    let data = sweep.dataset(spec.mode.dof_kind(), spec.z_char)?;
    let h = InterpolatedTransfer::new(data, *basis.band())?;
    let f = field_matrix(&h, basis, spec.t0)?;
    let b0 = match spec.mode {
        DofMode::Matched => total_energy_matrix(None, basis, sweep.ports)?,
        DofMode::Unmatched => {
            let y = InterpolatedTransfer::new(sweep.admittance_dataset()?, *basis.band())?;
            dissipated_energy_matrix(&y, basis)?
        }
    };
    let sol = solve_unconstrained(&QcqpProblem::new(Objective::Factor(f.entries), b0.entries, spec.w0))?;
    Ok((sol.value / Z0, sol.q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptimum {
    pub l_over_2l: f64,
    pub u_max: f64,
    pub q: Vec<f64>,
}

const GOLDEN_TOL: f64 = 1e-4;

/// Best stub length for the loaded reflector at normalised spacing
/// `d_over_2l`: grid search over `load_grid` then golden-section refinement
/// between the neighbours of the best grid point.
pub fn optimize_load(spec: &SweepSpec, d_over_2l: f64, load_grid: &[f64]) -> Result<LoadOptimum> {
    if load_grid.is_empty() {
        return Err(Error::Validation("load grid is empty".into()));
    }
    let basis = spec.basis()?;
    let model = spec.model(Configuration::ReflectorLoaded, d_over_2l);
    let terminals = TerminalSweep::compute(&model, &spec.frequencies(), &[spec.observation()])?;
    let eval = |x: f64| -> Result<(f64, Vec<f64>)> {
        let load = reactive_load(x * 2.0 * spec.length_m, spec.z_char)?;
        peak_intensity(spec, &basis, &terminals.reduce(&[load])?)
    };
    let mut grid: Vec<f64> = load_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;
    let (ib, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v.0 > b.1 { (i, v.0) } else { b });
    let mut best = LoadOptimum {
        l_over_2l: grid[ib],
        u_max: values[ib].0,
        q: values[ib].1.clone(),
    };
    if grid.len() < 2 {
        return Ok(best);
    }
    let mut a = grid[ib.saturating_sub(1)];
    let mut b = grid[(ib + 1).min(grid.len() - 1)];
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > GOLDEN_TOL {
        if f1.0 >= f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = eval(x2)?;
        }
    }
    for (x, (u, q)) in [(x1, f1), (x2, f2)] {
        if u > best.u_max {
            best = LoadOptimum { l_over_2l: x, u_max: u, q };
        }
    }
    Ok(best)
}

fn sweep_point(spec: &SweepSpec, basis: &BasisSet, d: f64) -> Result<SweepRow> {
    if spec.configuration == Configuration::ReflectorLoaded {
        let opt = optimize_load(spec, d, &spec.load_grid)?;
        return Ok(SweepRow {
            configuration: spec.configuration,
            d_over_2l: d,
            l_over_2l: Some(opt.l_over_2l),
            u_max: opt.u_max,
            q: opt.q,
        });
    }
    let model = spec.model(spec.configuration, d);
    let sweep = PortSweep::compute(&model, &spec.frequencies(), &[spec.observation()])?;
    let (u_max, q) = peak_intensity(spec, basis, &sweep)?;
    Ok(SweepRow {
        configuration: spec.configuration,
        d_over_2l: d,
        l_over_2l: None,
        u_max,
        q,
    })
}

/// Evaluates every spacing of `spec`; points run in parallel and rows come
/// back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let basis = spec.basis()?;
    let rows = if spec.configuration == Configuration::Single {
        let row = sweep_point(spec, &basis, spec.spacing[0]).map_err(|e| e.context("single dipole"))?;
        spec.spacing
            .iter()
            .map(|&d| SweepRow { d_over_2l: d, ..row.clone() })
            .collect()
    } else {
        spec.spacing
            .par_iter()
            .map(|&d| {
                sweep_point(spec, &basis, d).map_err(|e| e.context(format!("{} at d/(2L) = {d}", spec.configuration)))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(configuration: Configuration, mode: DofMode) -> SweepSpec {
        SweepSpec {
            spacing: vec![0.15],
            load_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_freq: 201,
            basis_size: 24,
            segments: 20,
            ..SweepSpec::new(configuration, mode)
        }
    }

    #[test]
    fn configuration_names_round_trip() {
        for c in Configuration::ALL {
            assert_eq!(c.as_str().parse::<Configuration>().unwrap(), c);
        }
        assert!("yagi".parse::<Configuration>().is_err());
        assert_eq!("matched".parse::<DofMode>().unwrap(), DofMode::Matched);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.05, 1.0, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[19] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn spec_validation() {
        let mut s = small(Configuration::Reflector, DofMode::Matched);
        s.spacing.clear();
        assert!(s.validate().is_err());
        let mut s = small(Configuration::ReflectorLoaded, DofMode::Unmatched);
        assert!(s.validate().is_ok());
        s.load_grid = vec![-0.1];
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
        let mut s = small(Configuration::Director, DofMode::Matched);
        s.spacing = vec![-0.1];
        assert!(s.validate().is_err());
    }

    #[test]
    fn model_layout() {
        let s = small(Configuration::Reflector, DofMode::Matched);
        let m = s.model(Configuration::Reflector, 0.5);
        assert_eq!(m.elements[1].start[0], -0.15);
        let m = s.model(Configuration::Director, 0.5);
        assert_eq!(m.elements[1].start[0], 0.15);
        assert_eq!(s.model(Configuration::DrivenDriven, 0.5).feeds.len(), 2);
    }

    #[test]
    fn loaded_reflector_at_least_shorted_reflector() {
        let s = small(Configuration::ReflectorLoaded, DofMode::Matched);
        let loaded = run_sweep(&s).unwrap();
        let plain = run_sweep(&small(Configuration::Reflector, DofMode::Matched)).unwrap();
        assert!(loaded.rows[0].u_max >= plain.rows[0].u_max * (1.0 - 1e-9));
        assert!(loaded.rows[0].l_over_2l.is_some());
    }

    #[test]
    fn matched_never_beats_unmatched() {
        let m = run_sweep(&small(Configuration::Reflector, DofMode::Matched)).unwrap();
        let u = run_sweep(&small(Configuration::Reflector, DofMode::Unmatched)).unwrap();
        assert!(m.rows[0].u_max <= u.rows[0].u_max, "{} {}", m.rows[0].u_max, u.rows[0].u_max);
        let m = run_sweep(&small(Configuration::ReflectorLoaded, DofMode::Matched)).unwrap();
        let u = run_sweep(&small(Configuration::ReflectorLoaded, DofMode::Unmatched)).unwrap();
        assert!(m.rows[0].u_max <= u.rows[0].u_max, "{} {}", m.rows[0].u_max, u.rows[0].u_max);
    }

    #[test]
    fn csv_layout_is_stable() {
        let r = SweepResult {
            spec: small(Configuration::Single, DofMode::Matched),
            rows: vec![SweepRow {
                configuration: Configuration::ReflectorLoaded,
                d_over_2l: 0.11,
                l_over_2l: Some(0.2),
                u_max: 0.0362,
                q: vec![],
            }],
        };
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "config,d_over_2L,l_over_2L,u_max_w_per_sr\nreflector-loaded,0.11,0.2,0.0362\n"
        );
    }
}
