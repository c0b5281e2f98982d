//! Run configuration: what to compute, on which spectrum, and where to write it.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use vortexrate_core::quadrature::Rule;
use vortexrate_core::{SpectralMoments, Spectrum};

use crate::format::{PresetSpec, SpectrumFile};
use crate::report::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Moments,
    Rates,
    VerifyQuadrature,
    VerifyMc,
    VerifyNormalization,
    Simulate,
    VerifyAll,
}

impl Command {
    /// Commands that draw random numbers and so need a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::VerifyMc | Command::VerifyNormalization | Command::Simulate | Command::VerifyAll)
    }
}

/// Exactly one spectrum source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    File(PathBuf),
    Inline(SpectrumFile),
    Preset(PresetSpec),
}

impl SpectrumSource {
    pub fn resolve(&self) -> anyhow::Result<SpectrumFile> {
        match self {
            SpectrumSource::File(p) => SpectrumFile::load(p),
            SpectrumSource::Inline(f) => Ok(f.clone()),
            SpectrumSource::Preset(p) => Ok(p.to_file()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Pass/fail bounds of the verification checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative, closed form against residue route.
    pub routes: f64,
    /// Relative, structural matrix identities.
    pub matrix: f64,
    /// Relative, shifted contour integrals against residues.
    pub contour: f64,
    /// Relative, reduced spatial integral against the total rate.
    pub reduced_3d: f64,
    /// Relative, reduced planar integral against the pair rate.
    pub reduced_2d: f64,
    /// Absolute, normalization integrals against 1.
    pub normalization: f64,
    /// Monte-Carlo bound in standard errors.
    pub mc_sigma: f64,
    /// Monte-Carlo relative bound.
    pub mc_relative: f64,
    /// Relative, counted planar pair rate.
    pub sim_rate: f64,
    /// Relative, counted planar vortex density.
    pub sim_density: f64,
    /// Relative, counted spatial birth-plus-death to reconnection ratio.
    pub sim_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            routes: 1e-9,
            matrix: 1e-10,
            contour: 1e-6,
            reduced_3d: 1e-5,
            reduced_2d: 1e-6,
            normalization: 1e-5,
            mc_sigma: 4.0,
            mc_relative: 1e-2,
            sim_rate: 0.10,
            sim_density: 0.03,
            sim_ratio: 0.15,
        }
    }
}

/// Options of the shifted-contour quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureOptions {
    pub epsilon: Option<f64>,
    pub cutoff: Option<f64>,
    /// Evaluation budget per integral.
    pub nodes: Option<usize>,
    /// Tanh-sinh unless set.
    pub rule: Option<Rule>,
}

/// Event-counting box and resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationOptions {
    /// Extents `(x, y[, z], t)` of the searched box, which starts at the origin.
    pub extent: Vec<f64>,
    /// Seeding grid `(spacing, dt)`; derived from the spectrum when absent.
    pub grid: Option<[f64; 2]>,
    pub realizations: u64,
    pub n_waves: usize,
    /// Plaquette size of the planar vortex census; none when absent.
    pub census_spacing: Option<f64>,
    /// Evenly spaced time slices of the census.
    pub census_slices: u32,
    /// Where to write the events as JSON lines.
    pub events: Option<PathBuf>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            extent: Vec::new(),
            grid: None,
            realizations: 8,
            n_waves: 200,
            census_spacing: None,
            census_slices: 1,
            events: None,
        }
    }
}

impl SimulationOptions {
    /// Box extents; by default 3 dominant wavelengths `2π/√k̄²` per side
    /// in the plane and 1.5 in space, over as many periods `2π/σ_ω`.
    pub fn extent_for(&self, m: &SpectralMoments) -> anyhow::Result<Vec<f64>> {
        let n = m.dimension.get() + 1;
        if self.extent.is_empty() {
            let cells = if n == 3 { 3.0 } else { 1.5 };
            let wavelength = 2.0 * PI / m.k2.sqrt();
            let spread = m.frequency_variance().sqrt();
            // motionless fields have no events; any duration will do
            let period = if spread > 0.0 { 2.0 * PI / spread } else { 1.0 };
            let mut e = vec![cells * wavelength; n - 1];
            e.push(cells * period);
            return Ok(e);
        }
        if self.extent.len() != n || self.extent.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            bail!("box needs {n} positive extents (space then time), got {:?}", self.extent);
        }
        Ok(self.extent.clone())
    }
}

/// A complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub spectrum: SpectrumSource,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Worker threads; from the environment or the machine when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
    #[serde(default)]
    pub simulation: SimulationOptions,
    /// Include event counting in `verify-all`.
    #[serde(default)]
    pub with_simulation: bool,
    /// Random coefficient sets per normalization check.
    #[serde(default = "default_normalization_cases")]
    pub normalization_cases: usize,
    /// Write the correlation matrices and inverses here as JSON.
    #[serde(default)]
    pub dump_matrices: Option<PathBuf>,
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_normalization_cases() -> usize {
    10
}

impl RunConfig {
    pub fn new(command: Command, spectrum: SpectrumSource) -> Self {
        RunConfig {
            command,
            spectrum,
            output: OutputSpec::default(),
            seed: None,
            samples: default_samples(),
            workers: None,
            tolerances: Tolerances::default(),
            quadrature: QuadratureOptions::default(),
            simulation: SimulationOptions::default(),
            with_simulation: false,
            normalization_cases: default_normalization_cases(),
            dump_matrices: None,
        }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Checks the invariants that serde cannot express.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.command.is_stochastic() && self.seed.is_none() {
            bail!("{:?} draws random numbers and needs a seed", self.command);
        }
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        if self.normalization_cases == 0 {
            bail!("normalization_cases must be positive");
        }
        if self.simulation.census_slices == 0 {
            bail!("census_slices must be positive");
        }
        Ok(())
    }

    pub fn spectrum(&self) -> anyhow::Result<(SpectrumFile, Spectrum)> {
        let file = self.spectrum.resolve()?;
        let s = file.to_spectrum()?;
        Ok((file, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::Preset;

    #[test]
    fn parses_minimal_and_full_configs() {
        let c = RunConfig::parse(r#"{"command": "rates", "spectrum": {"preset": {"name": "blackbody", "W": 2}}}"#).unwrap();
        assert_eq!(c.command, Command::Rates);
        assert_eq!(c.samples, 1_000_000);
        assert!(c.validate().is_ok());
        let full = RunConfig::parse(
            r#"{
                "command": "verify-all",
                "spectrum": {"inline": {"dimension": 2, "kind": "special-dispersion", "k": 1, "c": 1}},
                "output": {"format": "csv", "path": "out.csv"},
                "seed": 7, "samples": 1000, "workers": 2,
                "tolerances": {"mc_sigma": 5},
                "quadrature": {"epsilon": 0.001},
                "simulation": {"extent": [10, 10, 10], "realizations": 2},
                "with_simulation": true
            }"#,
        )
        .unwrap();
        assert_eq!(full.tolerances.mc_sigma, 5.0);
        assert_eq!(full.tolerances.contour, 1e-6);
        assert_eq!(full.output.format, Format::Csv);
        assert!(full.validate().is_ok());
        let round = RunConfig::parse(&serde_json::to_string(&full).unwrap()).unwrap();
        assert_eq!(round, full);
    }

    #[test]
    fn enforces_invariants() {
        assert!(RunConfig::parse(r#"{"command": "rates"}"#).is_err());
        assert!(RunConfig::parse(r#"{"command": "rates", "spectrum": {"preset": {"name": "blackbody"}}, "typo": 1}"#).is_err());
        let c = RunConfig::new(Command::VerifyMc, SpectrumSource::Preset(PresetSpec::new(Preset::Blackbody)));
        assert!(c.validate().is_err());
        assert!(RunConfig { seed: Some(1), ..c }.validate().is_ok());
    }

    #[test]
    fn box_extents() {
        let m = vortexrate_core::SpectralMoments::new(vortexrate_core::Dimension::Two, 1.0, 1.0, 0.0, 4.0, 0.0);
        let e = SimulationOptions::default().extent_for(&m).unwrap();
        assert_eq!(e.len(), 3);
        assert!((e[0] - 6.0 * PI).abs() < 1e-12 && (e[2] - 3.0 * PI).abs() < 1e-12);
        let bad = SimulationOptions { extent: vec![1.0, 2.0], ..SimulationOptions::default() };
        assert!(bad.extent_for(&m).is_err());
        let ok = SimulationOptions { extent: vec![1.0, 2.0, 3.0], ..SimulationOptions::default() };
        assert_eq!(ok.extent_for(&m).unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
