//! Executes a [`RunConfig`].

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use vortexrate_core::field::RealizationResult;
use vortexrate_core::mc::McConfig;
use vortexrate_core::rates::units;
use vortexrate_core::{build_2d, build_3d, rate_2d, rates_3d, Dimension, EventRates, Spectrum};

use crate::config::{Command, RunConfig};
use crate::format::{KindSpec, SpectrumFile};
use crate::parallel;
use crate::report::{digest, flatten, Output};
use crate::verify::{self, Section};

/// Bad configuration or input.
pub const EXIT_USAGE: u8 = 2;
/// A verification check exceeded its tolerance.
pub const EXIT_CHECK_FAILED: u8 = 3;
/// A computation failed (non-convergence, singular matrix, ...).
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0:#}")]
    Usage(anyhow::Error),
    #[error("{0:#}")]
    Numerical(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

trait Classify<T> {
    fn usage(self) -> Result<T, RunError>;
    fn numerical(self) -> Result<T, RunError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, RunError> {
        self.map_err(|e| RunError::Usage(e.into()))
    }
    fn numerical(self) -> Result<T, RunError> {
        self.map_err(|e| RunError::Numerical(e.into()))
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "W", alias = "w")]
    W,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "k")]
    K,
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "field_variance")]
    FieldVariance,
}

/// Rates over a list of values of one spectrum parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parses `NAME=v1,v2,...` or `NAME=start:stop:count`.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let (name, spec) = text.split_once('=').ok_or_else(|| anyhow::anyhow!("expected NAME=VALUES, got {text:?}"))?;
        let parameter: SweepParameter = serde_json::from_value(json!(name.trim()))
            .map_err(|_| anyhow::anyhow!("unknown sweep parameter {name:?}; expected W, c, k, omega or field_variance"))?;
        let values = match spec.split(':').collect::<Vec<_>>()[..] {
            [a, b, n] => {
                let (a, b, n): (f64, f64, usize) = (a.trim().parse()?, b.trim().parse()?, n.trim().parse()?);
                match n {
                    0 => anyhow::bail!("sweep needs at least one value"),
                    1 => vec![a],
                    _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
                }
            }
            [_] => spec.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>()?,
            _ => anyhow::bail!("sweep values must be a comma list or start:stop:count, got {spec:?}"),
        };
        Ok(Sweep { parameter, values })
    }

    fn apply(&self, base: &SpectrumFile, value: f64) -> anyhow::Result<SpectrumFile> {
        let mut f = base.clone();
        let slot = match (&mut f.kind, self.parameter) {
            (_, SweepParameter::FieldVariance) => &mut f.field_variance,
            (KindSpec::Blackbody { w, .. }, SweepParameter::W) => w,
            (KindSpec::Blackbody { c, .. } | KindSpec::SpecialDispersion { c, .. }, SweepParameter::C) => c,
            (
                KindSpec::Monochromatic { k, .. }
                | KindSpec::MonochromaticModulus { k, .. }
                | KindSpec::SpecialDispersion { k, .. },
                SweepParameter::K,
            ) => k,
            (KindSpec::Monochromatic { omega, .. } | KindSpec::MonochromaticModulus { omega, .. }, SweepParameter::Omega) => {
                omega
            }
            (kind, p) => anyhow::bail!("spectrum kind {} has no parameter {p:?}", kind_name(kind)),
        };
        *slot = value;
        Ok(f)
    }
}

fn kind_name(k: &KindSpec) -> String {
    serde_json::to_value(k).ok().and_then(|v| v["kind"].as_str().map(str::to_owned)).unwrap_or_default()
}

/// Everything that determines a run's numbers; hashed into `inputs_digest`.
#[derive(Serialize)]
struct Inputs<'a> {
    command: Command,
    spectrum: &'a SpectrumFile,
    seed: Option<u64>,
    samples: u64,
    tolerances: &'a crate::config::Tolerances,
    quadrature: &'a crate::config::QuadratureOptions,
    simulation: Value,
    with_simulation: bool,
    normalization_cases: usize,
    sweep: Option<&'a Sweep>,
}

fn inputs_digest(cfg: &RunConfig, spectrum: &SpectrumFile, sweep: Option<&Sweep>) -> String {
    let mut sim = serde_json::to_value(&cfg.simulation).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut sim {
        m.remove("events");
    }
    digest(&Inputs {
        command: cfg.command,
        spectrum,
        seed: cfg.seed,
        samples: cfg.samples,
        tolerances: &cfg.tolerances,
        quadrature: &cfg.quadrature,
        simulation: sim,
        with_simulation: cfg.with_simulation,
        normalization_cases: cfg.normalization_cases,
        sweep,
    })
}

/// Outcome of a run: its output and whether every check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output: Output,
    pub passed: bool,
    /// Per-realization events of a simulation, in realization order.
    pub events: Vec<RealizationResult>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Runs `cfg`; `sweep` applies to the `rates` command only.
pub fn run(cfg: &RunConfig, sweep: Option<&Sweep>) -> Result<RunOutcome, RunError> {
    cfg.validate().usage()?;
    let (file, spectrum) = cfg.spectrum().usage()?;
    if sweep.is_some() && cfg.command != Command::Rates {
        return Err(RunError::Usage(anyhow::anyhow!("sweeps apply to the rates command only")));
    }
    let digest = inputs_digest(cfg, &file, sweep);
    if let Some(path) = &cfg.dump_matrices {
        let dump = matrices(&spectrum).numerical()?;
        let text = serde_json::to_string_pretty(&dump).numerical()?;
        std::fs::write(path, text + "\n").usage()?;
    }
    let workers = cfg.workers.unwrap_or_else(parallel::default_workers);
    let mc = McConfig { n_samples: cfg.samples, seed: cfg.seed.unwrap_or(0), n_workers: workers, batch: McConfig::DEFAULT_BATCH };
    let tol = &cfg.tolerances;
    let verification = |sections: Vec<Section>| verification_output(cfg.command, &spectrum, sections, &digest);
    let outcome = match cfg.command {
        Command::Moments => plain(moments_output(&file, &spectrum, &digest).numerical()?),
        Command::Rates => match sweep {
            None => plain(rates_output(&file, &spectrum, &digest).numerical()?),
            Some(sw) => plain(sweep_output(&file, sw, &digest)?),
        },
        Command::VerifyQuadrature => verification(vec![verify::quadrature(&spectrum, tol, &cfg.quadrature).numerical()?]),
        Command::VerifyMc => verification(vec![verify::monte_carlo(&spectrum, tol, &mc).numerical()?]),
        Command::VerifyNormalization => {
            verification(vec![verify::normalization(&spectrum, tol, cfg.normalization_cases, &mc).numerical()?])
        }
        Command::VerifyAll => {
            let mut sections = vec![
                verify::closed_form(&spectrum, tol).numerical()?,
                verify::quadrature(&spectrum, tol, &cfg.quadrature).numerical()?,
                verify::monte_carlo(&spectrum, tol, &mc).numerical()?,
                verify::normalization(&spectrum, tol, cfg.normalization_cases, &mc).numerical()?,
            ];
            let mut events = Vec::new();
            if cfg.with_simulation {
                let (s, ev) = verify::simulation(&spectrum, tol, &cfg.simulation, mc.seed, workers).numerical()?;
                sections.push(s);
                events = ev;
            }
            RunOutcome { events, ..verification(sections) }
        }
        Command::Simulate => {
            let (section, events) = verify::simulation(&spectrum, tol, &cfg.simulation, mc.seed, workers).numerical()?;
            simulate_output(&spectrum, section, events, &digest).numerical()?
        }
    };
    if let Some(path) = &cfg.simulation.events {
        if !outcome.events.is_empty() || cfg.command == Command::Simulate {
            std::fs::write(path, events_jsonl(&outcome.events).numerical()?).usage()?;
        }
    }
    Ok(outcome)
}

fn plain(output: Output) -> RunOutcome {
    RunOutcome { output, passed: true, events: Vec::new() }
}

fn matrices(s: &Spectrum) -> anyhow::Result<Value> {
    let m = s.moments()?;
    Ok(match s.dimension {
        Dimension::Two => {
            let model = build_2d(&m)?;
            json!({ "dimension": 2, "ordering": ["f", "f_t", "f_xx", "g", "g_t", "g_xx"], "corr": model.corr, "inverse": model.gamma })
        }
        Dimension::Three => {
            let model = build_3d(&m)?;
            json!({
                "dimension": 3,
                "ordering": ["f", "f_t", "f_xx", "f_yy", "g", "g_t", "g_xx", "g_yy"],
                "corr": model.corr,
                "inverse": model.gamma,
            })
        }
    })
}

fn moments_output(file: &SpectrumFile, s: &Spectrum, digest: &str) -> anyhow::Result<Output> {
    let m = s.moments()?;
    let (kx2, kx4) = m.component_moments();
    let doc = json!({
        "spectrum": file,
        "moments": m,
        "kx2": kx2,
        "kx4": kx4,
        "kurtosis": kx4 / (kx2 * kx2),
        "frequency_variance": m.frequency_variance(),
        "violations": m.validate(),
        "inputs_digest": digest,
    });
    let mut row = flatten(&json!({ "moments": m }));
    row.insert("kx2".into(), json!(kx2));
    row.insert("kx4".into(), json!(kx4));
    row.insert("inputs_digest".into(), json!(digest));
    Ok(Output { document: doc, rows: vec![row] })
}

fn closed_form_rates(s: &Spectrum) -> anyhow::Result<EventRates> {
    let m = s.moments()?;
    Ok(match s.dimension {
        Dimension::Two => rate_2d(&m)?,
        Dimension::Three => rates_3d(&m)?,
    })
}

fn rate_record(r: &EventRates, digest: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("dimension".into(), json!(r.dimension));
    m.insert("method".into(), json!(r.method));
    m.insert("units".into(), json!(units(r.dimension)));
    m.insert("reconnection".into(), json!(r.reconnection));
    m.insert("birth".into(), json!(r.birth));
    m.insert("death".into(), json!(r.death));
    m.insert("birth_plus_death".into(), json!(r.birth_plus_death()));
    m.insert("pair_events".into(), json!(r.pair_events));
    m.insert("total".into(), json!(r.total()));
    m.insert("inputs_digest".into(), json!(digest));
    m
}

fn rates_output(file: &SpectrumFile, s: &Spectrum, digest: &str) -> anyhow::Result<Output> {
    let row = rate_record(&closed_form_rates(s)?, digest);
    let mut doc = row.clone();
    doc.insert("spectrum".into(), json!(file));
    Ok(Output { document: Value::Object(doc), rows: vec![row] })
}

fn sweep_output(base: &SpectrumFile, sw: &Sweep, digest: &str) -> Result<Output, RunError> {
    let mut rows = Vec::with_capacity(sw.values.len());
    for &v in &sw.values {
        let f = sw.apply(base, v).usage()?;
        let s = f.to_spectrum().usage()?;
        let mut row = Map::new();
        row.insert(json!(sw.parameter).as_str().unwrap_or("value").to_owned(), json!(v));
        row.extend(rate_record(&closed_form_rates(&s).numerical()?, digest));
        rows.push(row);
    }
    let doc = json!({ "spectrum": base, "sweep": sw, "rows": rows, "inputs_digest": digest });
    Ok(Output { document: doc, rows })
}

fn check_rows(sections: &[Section]) -> Vec<Map<String, Value>> {
    let mut rows = Vec::new();
    for s in sections {
        for c in &s.checks {
            let mut row = Map::new();
            row.insert("section".into(), json!(s.name));
            row.extend(flatten(&json!(c)));
            rows.push(row);
        }
    }
    rows
}

fn verification_output(command: Command, s: &Spectrum, sections: Vec<Section>, digest: &str) -> RunOutcome {
    let passed = sections.iter().all(Section::passed);
    let doc = json!({
        "command": command,
        "dimension": s.dimension,
        "units": units(s.dimension),
        "passed": passed,
        "sections": sections,
        "inputs_digest": digest,
    });
    RunOutcome { output: Output { document: doc, rows: check_rows(&sections) }, passed, events: Vec::new() }
}

fn event_row(r: &RealizationResult, e: &vortexrate_core::field::EventRecord) -> Map<String, Value> {
    let mut row = Map::new();
    row.insert("realization".into(), json!(r.index));
    row.insert("t".into(), json!(e.time));
    for (name, x) in ["x", "y", "z"].iter().zip(&e.location) {
        row.insert((*name).into(), json!(x));
    }
    row.insert("kind".into(), json!(e.kind));
    row.extend(flatten(&json!({ "residuals": e.residuals, "normal_form": e.normal_form })));
    row
}

fn events_jsonl(results: &[RealizationResult]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in results {
        for e in &r.events {
            let mut v = serde_json::to_value(e)?;
            v["realization"] = json!(r.index);
            serde_json::to_writer(&mut out, &v)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

/// Event-counting output. Comparisons are reported but do not fail the
/// command: their tolerances only make sense for large enough boxes.
fn simulate_output(s: &Spectrum, section: Section, events: Vec<RealizationResult>, digest: &str) -> anyhow::Result<RunOutcome> {
    let rows = events.iter().flat_map(|r| r.events.iter().map(move |e| event_row(r, e))).collect();
    let doc = json!({
        "dimension": s.dimension,
        "units": units(s.dimension),
        "closed_form": closed_form_rates(s)?,
        "summary": section.details["summary"],
        "config": section.details["config"],
        "comparisons": section.checks,
        "inputs_digest": digest,
    });
    Ok(RunOutcome { output: Output { document: doc, rows }, passed: true, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SpectrumSource;
    use crate::format::{Preset, PresetSpec};

    fn preset(cmd: Command, p: Preset) -> RunConfig {
        RunConfig::new(cmd, SpectrumSource::Preset(PresetSpec::new(p)))
    }

    #[test]
    fn blackbody_rates_document() {
        let out = run(&preset(Command::Rates, Preset::Blackbody), None).unwrap();
        let d = &out.output.document;
        assert!((d["reconnection"].as_f64().unwrap() - 4.2702).abs() < 5e-4);
        assert!((d["birth"].as_f64().unwrap() - 0.9263).abs() < 5e-4);
        assert_eq!(d["death"], d["birth"]);
        assert_eq!(d["units"], "length^-3 time^-1");
        assert_eq!(d["inputs_digest"].as_str().unwrap().len(), 64);
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn monochromatic_rates_are_zero() {
        let out = run(&preset(Command::Rates, Preset::Monochromatic), None).unwrap();
        assert_eq!(out.output.document["total"], 0.0);
    }

    #[test]
    fn sweep_rows_scale() {
        let sw = Sweep::parse("W=1:2:3").unwrap();
        assert_eq!(sw.values, vec![1.0, 1.5, 2.0]);
        let out = run(&preset(Command::Rates, Preset::Blackbody), Some(&sw)).unwrap();
        let r: Vec<f64> = out.output.rows.iter().map(|r| r["reconnection"].as_f64().unwrap()).collect();
        // Ω ∝ W⁴ at fixed c
        assert!((r[2] / r[0] - 16.0).abs() < 1e-9);
        let csv = String::from_utf8(out.output.render(crate::report::Format::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("W,dimension,method"));
        assert!(Sweep::parse("omega=1,2").is_ok());
        assert!(Sweep::parse("q=1").is_err());
        let bad = run(&preset(Command::Rates, Preset::Blackbody), Some(&Sweep::parse("k=1").unwrap()));
        assert_eq!(bad.unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn exit_codes() {
        let e = run(&preset(Command::VerifyMc, Preset::Blackbody), None).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let strict = RunConfig {
            seed: Some(1),
            samples: 20_000,
            tolerances: crate::config::Tolerances { mc_sigma: 1e-9, mc_relative: 1e-12, ..Default::default() },
            ..preset(Command::VerifyMc, Preset::Blackbody)
        };
        assert_eq!(run(&strict, None).unwrap().exit_code(), EXIT_CHECK_FAILED);
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let cfg = RunConfig { seed: Some(3), samples: 30_000, workers: Some(2), ..preset(Command::VerifyMc, Preset::SpecialDispersion) };
        let a = run(&cfg, None).unwrap().output.render(crate::report::Format::Json).unwrap();
        let b = run(&RunConfig { workers: Some(1), ..cfg.clone() }, None).unwrap().output.render(crate::report::Format::Json).unwrap();
        assert_eq!(a, b);
        let c = run(&RunConfig { seed: Some(4), ..cfg }, None).unwrap().output.render(crate::report::Format::Json).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn matrix_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let cfg = RunConfig { dump_matrices: Some(path.clone()), ..preset(Command::Moments, Preset::Blackbody) };
        run(&cfg, None).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["corr"].as_array().unwrap().len(), 8);
        assert_eq!(v["inverse"][0].as_array().unwrap().len(), 8);
    }
}
