use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pulsecraft::codesign::{log_grid, run_sweep, Configuration, DofMode, SweepSpec};
use pulsecraft::pipeline::{matched_filter_similarity, optimize, OptimizeConfig, WindowConstraint};
use pulsecraft::selftest::{self, SelftestOptions, Suite};
use pulsecraft::spectral_basis::{BandLimits, BasisSet, DEFAULT_BASIS_SIZE};
use pulsecraft::synthetic::{flat_dataset, linear_grid, thz_resonator};
use pulsecraft::transfer_data::{densify_check, DofKind, FileFormat, InterpolatedTransfer, TransferDataset};
use pulsecraft::waveform::write_gain_csv;
use pulsecraft::wire_mom::{realized_gain_curve, Observation, PortSweep, WireModel};
use pulsecraft::{Error, Result};

#[derive(Parser)]
#[command(name = "pulsecraft", version, about = "Optimal pulse excitation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a thin-wire dipole and write its transfer dataset.
    Dipole(DipoleArgs),
    /// Find the excitation that maximises the response peak.
    Optimize(OptimizeArgs),
    /// Sweep array spacing for a two-element configuration.
    Sweep(SweepArgs),
    /// Run the built-in invariant suites.
    Selftest(SelftestArgs),
    /// Write a built-in synthetic dataset.
    #[command(hide = true)]
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dof {
    IncidentWave,
    PortVoltage,
}

impl From<Dof> for DofKind {
    fn from(d: Dof) -> Self {
        match d {
            Dof::IncidentWave => DofKind::IncidentWave,
            Dof::PortVoltage => DofKind::PortVoltage,
        }
    }
}

#[derive(Args)]
struct DipoleArgs {
    #[arg(long, default_value_t = 0.15)]
    length_m: f64,
    /// Strip width; the equivalent wire radius is a quarter of it.
    #[arg(long, default_value_t = 0.003)]
    width_m: f64,
    #[arg(long, default_value_t = 0.0)]
    fmin_hz: f64,
    #[arg(long, default_value_t = 3.8e9)]
    fmax_hz: f64,
    #[arg(long, default_value_t = 1001)]
    nfreq: usize,
    /// Segment count; chosen from the highest frequency when omitted.
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long, value_enum, default_value = "incident-wave")]
    dof: Dof,
    #[arg(long, default_value_t = 50.0)]
    z_char_ohm: f64,
    /// Observation polar angle (rad); broadside by default.
    #[arg(long, default_value_t = PI / 2.0)]
    theta_rad: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_rad: f64,
    /// Output dataset (.json or .csv).
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the realized gain curve here.
    #[arg(long)]
    gain_csv: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Transfer dataset (.json or .csv).
    #[arg(long, short)]
    data: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    w0_joule: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t0_s: f64,
    /// `fraction,center_s,half_width_s[@in|@out]`, at most twice.
    #[arg(long, allow_hyphen_values = true)]
    window_energy: Vec<String>,
    /// Excitation band `low,high`; dataset metadata or span otherwise.
    #[arg(long)]
    band_hz: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BASIS_SIZE)]
    basis_size: usize,
    /// Directory receiving solution.json and the waveform CSVs.
    #[arg(long, short)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: String,
    #[arg(long, default_value = "matched")]
    mode: String,
    /// Explicit spacings d/(2L), comma separated.
    #[arg(long, value_delimiter = ',')]
    spacing: Option<Vec<f64>>,
    /// Number of log-spaced spacings in [0.05, 1] when --spacing is absent.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Number of uniform load lengths l/(2L) in [0, 1].
    #[arg(long, default_value_t = 41)]
    load_points: usize,
    #[arg(long, default_value_t = 1001)]
    nfreq: usize,
    #[arg(long, default_value_t = DEFAULT_BASIS_SIZE)]
    basis_size: usize,
    #[arg(long, default_value_t = 1e-10)]
    w0_joule: f64,
    #[arg(long)]
    segments: Option<usize>,
    /// Sweep CSV path; the manifest goes next to it.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run only these suites.
    #[arg(long)]
    suite: Vec<String>,
    #[arg(long, hide = true)]
    perturb_gram: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Three-mode THz resonator, 625 GHz – 2.8 THz band.
    Thz,
    /// Unit flat response over 0–1 THz.
    Flat,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let result = match cli.command {
        Command::Dipole(a) => cmd_dipole(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Selftest(a) => cmd_selftest(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PULSECRAFT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Validation(format!("PULSECRAFT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_dipole(a: DipoleArgs) -> Result<ExitCode> {
    if !(a.length_m.is_finite() && a.length_m > 0.0) {
        return Err(Error::Validation(format!("length must be positive, got {}", a.length_m)));
    }
    if !(a.width_m.is_finite() && a.width_m > 0.0) {
        return Err(Error::Validation(format!("width must be positive, got {}", a.width_m)));
    }
    if !(a.fmax_hz > a.fmin_hz && a.fmin_hz >= 0.0) {
        return Err(Error::Validation("frequency range must satisfy 0 ≤ fmin < fmax".into()));
    }
    if a.nfreq < 3 {
        return Err(Error::Validation("at least 3 frequency samples are needed".into()));
    }
    let segments = a
        .segments
        .unwrap_or_else(|| WireModel::default_segments(a.length_m, a.fmax_hz));
    let model = WireModel::dipole(a.length_m, a.width_m / 4.0, segments, [0.0; 3])?;
    let freqs = linear_grid(a.fmin_hz, a.fmax_hz, a.nfreq);
    let obs = [Observation::theta(a.theta_rad, a.phi_rad)];
    let sweep = PortSweep::compute(&model, &freqs, &obs)?;
    let data = sweep
        .dataset(a.dof.into(), a.z_char_ohm)?
        .with_metadata("length_m", a.length_m)
        .with_metadata("width_m", a.width_m)
        .with_metadata("segments", segments);
    data.save(&a.out, FileFormat::from_path(&a.out))?;

    println!("dipole: L = {} m, w = {} m, {segments} segments", a.length_m, a.width_m);
    println!("dataset: {} samples, {} -> {}", data.n_freq(), data.dof_kind, a.out.display());
    match resonance(&sweep) {
        Some((f, r)) => println!("first resonance: {:.4} GHz, R = {:.2} ohm", f / 1e9, r),
        None => println!("first resonance: not found in the sampled range"),
    }
    let basis = BasisSet::new(BandLimits::from_hz(a.fmin_hz, a.fmax_hz)?, DEFAULT_BASIS_SIZE)?;
    let report = densify_check(&data, &basis)?;
    println!(
        "grid check: max relative change {:.3e}, spacing ratio {:.3} -> {}",
        report.max_relative_change,
        report.spacing_ratio,
        if report.passes() {
            "ok".to_string()
        } else {
            format!("flagged ({})", report.flags.join(", "))
        }
    );
    if !sweep.flagged.is_empty() {
        println!("warning: {} ill-conditioned samples", sweep.flagged.len());
    }
    if let Some(path) = &a.gain_csv {
        let gains = realized_gain_curve(&model, &freqs, a.theta_rad, a.phi_rad, a.z_char_ohm)?;
        let mut w = create(path)?;
        write_gain_csv(&gains, &mut w)?;
        w.flush()?;
        println!("gain curve -> {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// First upward zero crossing of the input reactance, linearly interpolated.
fn resonance(sweep: &PortSweep) -> Option<(f64, f64)> {
    let z: Vec<Option<num_complex::Complex64>> = (0..sweep.freqs_hz.len())
        .map(|k| sweep.impedance(k).map(|z| z[(0, 0)]))
        .collect();
    for k in 0..z.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (z[k], z[k + 1]) {
            if a.im < 0.0 && b.im >= 0.0 {
                let s = -a.im / (b.im - a.im);
                let f = sweep.freqs_hz[k] + s * (sweep.freqs_hz[k + 1] - sweep.freqs_hz[k]);
                return Some((f, a.re + s * (b.re - a.re)));
            }
        }
    }
    None
}

fn parse_band(s: &str) -> Result<BandLimits> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("band `{s}` must read low,high")))?;
    if v.len() != 2 {
        return Err(Error::Validation(format!("band `{s}` must read low,high")));
    }
    BandLimits::from_hz(v[0], v[1])
}

fn cmd_optimize(a: OptimizeArgs) -> Result<ExitCode> {
    let windows = a
        .window_energy
        .iter()
        .map(|s| s.parse::<WindowConstraint>())
        .collect::<Result<Vec<_>>>()?;
    let config = OptimizeConfig {
        band: a.band_hz.as_deref().map(parse_band).transpose()?,
        basis_size: a.basis_size,
        w0: a.w0_joule,
        t0: a.t0_s,
        windows,
    };
    config.validate()?;
    let data = TransferDataset::load(&a.data, FileFormat::from_path(&a.data))?;
    let report = optimize(&data, &config)?;

    fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("solution.json"), &report.to_json(&config))?;
    let mut w = create(&a.out_dir.join("excitation.csv"))?;
    report.excitation.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("field.csv"))?;
    report.response.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("intensity.csv"))?;
    report.intensity.write_csv(&mut w)?;
    w.flush()?;

    println!("objective |y(t0)|^2: {:.6e}", report.solution.value);
    println!(
        "peak intensity U: {:.6e} W/sr at t = {:.6e} s",
        report.intensity.peak, report.intensity.peak_time
    );
    for (c, f) in config.windows.iter().zip(&report.window_fractions) {
        println!("window {c}: energy fraction {f:.6}");
    }
    if config.windows.is_empty() {
        let h = InterpolatedTransfer::new(data, *report.basis.band())?;
        for c in 0..h.n_outputs() {
            let s = matched_filter_similarity(&h, &report.basis, &report.solution.q, c, config.t0)?;
            println!("matched-filter similarity (output {c}): {s:.6}");
        }
    }
    if let Some(d) = report.densify.as_ref().filter(|d| !d.passes()) {
        println!("warning: dataset grid flagged ({})", d.flags.join(", "));
    }
    println!("outputs -> {}", a.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let configuration: Configuration = a.config.parse()?;
    let mode: DofMode = a.mode.parse()?;
    let mut spec = SweepSpec::new(configuration, mode);
    spec.spacing = match a.spacing {
        Some(s) => s,
        None => log_grid(0.05, 1.0, a.points.max(1)),
    };
    spec.load_grid = if a.load_points < 2 {
        vec![0.0]
    } else {
        linear_grid(0.0, 1.0, a.load_points)
    };
    spec.n_freq = a.nfreq;
    spec.basis_size = a.basis_size;
    spec.w0 = a.w0_joule;
    if let Some(s) = a.segments {
        spec.segments = s;
    }
    spec.validate()?;
    let result = run_sweep(&spec)?;
    let mut w = create(&a.out)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let manifest = a.out.with_extension("manifest.json");
    write_json(&manifest, &result.manifest())?;
    for r in &result.rows {
        let l = r.l_over_2l.map(|l| format!(", l/(2L) = {l:.4}")).unwrap_or_default();
        println!("d/(2L) = {:.4}{l}: U_max = {:.6e} W/sr", r.d_over_2l, r.u_max);
    }
    println!("sweep -> {}, manifest -> {}", a.out.display(), manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(a: SelftestArgs) -> Result<ExitCode> {
    let options = SelftestOptions {
        suites: a.suite.iter().map(|s| s.parse::<Suite>()).collect::<Result<_>>()?,
        gram_perturbation: a.perturb_gram,
    };
    let reports = selftest::run(&options)?;
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().all(|r| r.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.invariant).collect();
        eprintln!("failed invariants: {}", failed.join("; "));
        Ok(ExitCode::from(3))
    }
}

fn cmd_synth(a: SynthArgs) -> Result<ExitCode> {
    let data = match a.kind {
        SynthKind::Thz => thz_resonator(),
        SynthKind::Flat => flat_dataset(&linear_grid(0.0, 1e12, 201), 1.0, 0.0, DofKind::PlaneWaveField)?,
    };
    data.save(&a.out, FileFormat::from_path(&a.out))?;
    println!("dataset -> {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}
