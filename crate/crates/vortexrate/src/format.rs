//! Spectrum files and presets.
//!
//! A spectrum file is a JSON object with a `dimension`, a `kind` tag, the
//! kind's parameters and an optional `field_variance` (default 1):
//!
//! ```json
//! {"dimension": 3, "kind": "blackbody", "W": 1.0, "c": 1.0}
//! {"dimension": 3, "kind": "ring-mixture", "rings": [[0.5, 1.0, 2.0], [0.5, 2.0, -1.0]]}
//! {"dimension": 2, "kind": "tabulated", "omega_grid": [0, 1], "k_grid": [1, 2], "phi": [[1, 1], [1, 1]]}
//! ```
//!
//! Ring entries are `[weight, k, omega]` triples.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use vortexrate_core::spectra::{Ring, Tabulated};
use vortexrate_core::{Dimension, Spectrum, SpectrumKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KindSpec {
    Monochromatic {
        k: f64,
        omega: f64,
    },
    MonochromaticModulus {
        k: f64,
        omega: f64,
    },
    Blackbody {
        #[serde(rename = "W", alias = "w")]
        w: f64,
        c: f64,
    },
    SpecialDispersion {
        k: f64,
        c: f64,
    },
    RingMixture {
        rings: Vec<[f64; 3]>,
    },
    Tabulated {
        omega_grid: Vec<f64>,
        k_grid: Vec<f64>,
        phi: Vec<Vec<f64>>,
    },
}

/// On-disk form of a [`Spectrum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub dimension: Dimension,
    #[serde(flatten)]
    pub kind: KindSpec,
    #[serde(default = "unit")]
    pub field_variance: f64,
}

fn unit() -> f64 {
    1.0
}

impl SpectrumFile {
    pub fn to_spectrum(&self) -> anyhow::Result<Spectrum> {
        let kind = match &self.kind {
            KindSpec::Monochromatic { k, omega } => SpectrumKind::Monochromatic { k: *k, omega: *omega },
            KindSpec::MonochromaticModulus { k, omega } => {
                SpectrumKind::MonochromaticModulus { k: *k, omega: *omega }
            }
            KindSpec::Blackbody { w, c } => SpectrumKind::Blackbody { w: *w, c: *c },
            KindSpec::SpecialDispersion { k, c } => SpectrumKind::SpecialDispersion { k: *k, c: *c },
            KindSpec::RingMixture { rings } => SpectrumKind::RingMixture(
                rings.iter().map(|&[weight, k, omega]| Ring { weight, k, omega }).collect(),
            ),
            KindSpec::Tabulated { omega_grid, k_grid, phi } => SpectrumKind::Tabulated(Tabulated {
                omega_grid: omega_grid.clone(),
                k_grid: k_grid.clone(),
                phi: phi.clone(),
            }),
        };
        let s = Spectrum::new(self.dimension, kind).with_field_variance(self.field_variance);
        s.check()?;
        Ok(s)
    }

    pub fn from_spectrum(s: &Spectrum) -> Self {
        let kind = match &s.kind {
            SpectrumKind::Monochromatic { k, omega } => KindSpec::Monochromatic { k: *k, omega: *omega },
            SpectrumKind::MonochromaticModulus { k, omega } => {
                KindSpec::MonochromaticModulus { k: *k, omega: *omega }
            }
            SpectrumKind::Blackbody { w, c } => KindSpec::Blackbody { w: *w, c: *c },
            SpectrumKind::SpecialDispersion { k, c } => KindSpec::SpecialDispersion { k: *k, c: *c },
            SpectrumKind::RingMixture(rings) => {
                KindSpec::RingMixture { rings: rings.iter().map(|r| [r.weight, r.k, r.omega]).collect() }
            }
            SpectrumKind::Tabulated(t) => KindSpec::Tabulated {
                omega_grid: t.omega_grid.clone(),
                k_grid: t.k_grid.clone(),
                phi: t.phi.clone(),
            },
        };
        SpectrumFile { dimension: s.dimension, kind, field_variance: s.field_variance }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing spectrum file {}", path.display()))
    }
}

/// Named analytic spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Blackbody,
    Monochromatic,
    MonochromaticModulus,
    SpecialDispersion,
}

impl Preset {
    /// The special-dispersion preset is planar; the rest default to 3D.
    pub fn default_dimension(self) -> Dimension {
        match self {
            Preset::SpecialDispersion => Dimension::Two,
            _ => Dimension::Three,
        }
    }
}

/// A preset with its parameters; absent parameters default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub name: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<Dimension>,
    #[serde(rename = "W", alias = "w", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_variance: Option<f64>,
}

impl PresetSpec {
    pub fn new(name: Preset) -> Self {
        PresetSpec { name, dimension: None, w: None, c: None, k: None, omega: None, field_variance: None }
    }

    pub fn to_file(&self) -> SpectrumFile {
        let p = |v: Option<f64>| v.unwrap_or(1.0);
        let kind = match self.name {
            Preset::Blackbody => KindSpec::Blackbody { w: p(self.w), c: p(self.c) },
            Preset::Monochromatic => KindSpec::Monochromatic { k: p(self.k), omega: p(self.omega) },
            Preset::MonochromaticModulus => KindSpec::MonochromaticModulus { k: p(self.k), omega: p(self.omega) },
            Preset::SpecialDispersion => KindSpec::SpecialDispersion { k: p(self.k), c: p(self.c) },
        };
        SpectrumFile {
            dimension: self.dimension.unwrap_or(self.name.default_dimension()),
            kind,
            field_variance: p(self.field_variance),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let cases = [
            r#"{"dimension": 3, "kind": "blackbody", "W": 2.0, "c": 1.0}"#,
            r#"{"dimension": 3, "kind": "monochromatic", "k": 1.0, "omega": 1.0}"#,
            r#"{"dimension": 3, "kind": "monochromatic-modulus", "k": 1.0, "omega": 1.0}"#,
            r#"{"dimension": 2, "kind": "special-dispersion", "k": 1.0, "c": 1.0}"#,
            r#"{"dimension": 3, "kind": "ring-mixture", "rings": [[0.5, 1.0, 2.0], [0.5, 2.0, -1.0]], "field_variance": 3.0}"#,
            r#"{"dimension": 2, "kind": "tabulated", "omega_grid": [0, 1], "k_grid": [1, 2], "phi": [[1, 1], [1, 1]]}"#,
        ];
        for text in cases {
            let f = SpectrumFile::parse(text).unwrap();
            let s = f.to_spectrum().unwrap();
            assert_eq!(SpectrumFile::from_spectrum(&s), f);
            let again = SpectrumFile::parse(&serde_json::to_string(&f).unwrap()).unwrap();
            assert_eq!(again, f);
        }
    }

    #[test]
    fn blackbody_accepts_lowercase_w() {
        let f = SpectrumFile::parse(r#"{"dimension": 3, "kind": "blackbody", "w": 2.0, "c": 1.0}"#).unwrap();
        assert_eq!(f.kind, KindSpec::Blackbody { w: 2.0, c: 1.0 });
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            r#"{"dimension": 4, "kind": "blackbody", "W": 1.0, "c": 1.0}"#,
            r#"{"dimension": 3, "kind": "plasma", "W": 1.0}"#,
            r#"{"dimension": 3, "kind": "blackbody", "W": 1.0}"#,
            r#"{"dimension": 3, "kind": "blackbody", "W": 1.0, "c": 1.0, "extra": 1}"#,
        ] {
            assert!(SpectrumFile::parse(text).is_err(), "{text}");
        }
        let planar_only = SpectrumFile::parse(r#"{"dimension": 3, "kind": "special-dispersion", "k": 1.0, "c": 1.0}"#);
        assert!(planar_only.unwrap().to_spectrum().is_err());
    }

    #[test]
    fn preset_defaults() {
        let f = PresetSpec::new(Preset::SpecialDispersion).to_file();
        assert_eq!(f.dimension, Dimension::Two);
        assert_eq!(f.kind, KindSpec::SpecialDispersion { k: 1.0, c: 1.0 });
        let f = PresetSpec { w: Some(2.0), ..PresetSpec::new(Preset::Blackbody) }.to_file();
        assert_eq!(f.kind, KindSpec::Blackbody { w: 2.0, c: 1.0 });
        assert_eq!(f.dimension, Dimension::Three);
    }
}
