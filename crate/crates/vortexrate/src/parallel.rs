//! Thread-parallel drivers for the Monte-Carlo estimators and the event search.
//!
//! Work items (sample batches, realizations) are computed on a rayon pool
//! and reduced in index order, so every result is bitwise identical to the
//! sequential one for any worker count.

use rayon::prelude::*;
use vortexrate_core::field::{run_realization, summarize, RealizationResult, SimConfig, SimulationSummary};
use vortexrate_core::gaussian_model::{CorrelationModel2D, CorrelationModel3D};
use vortexrate_core::mc::{McAccumulator, McConfig, McEstimate, Sampler2D, Sampler3D};
use vortexrate_core::Spectrum;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "VORTEXRATE_WORKERS";

/// Worker count from the environment, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

fn reduce(parts: Vec<McAccumulator>) -> McAccumulator {
    parts.iter().fold(McAccumulator::default(), |mut acc, p| {
        acc.merge(p);
        acc
    })
}

pub fn mc_rate_2d(model: &CorrelationModel2D, cfg: &McConfig) -> anyhow::Result<McEstimate> {
    cfg.check()?;
    let sampler = Sampler2D::new(model)?;
    if model.is_degenerate() {
        return Ok(McEstimate::zero(cfg.n_samples, false));
    }
    let parts = pool(cfg.n_workers)?
        .install(|| (0..cfg.n_batches()).into_par_iter().map(|i| sampler.batch(cfg, i)).collect::<Vec<_>>());
    Ok(sampler.finish(&reduce(parts)))
}

pub fn mc_rate_3d(model: &CorrelationModel3D, cfg: &McConfig) -> anyhow::Result<McEstimate> {
    cfg.check()?;
    let sampler = Sampler3D::new(model)?;
    if model.is_degenerate() {
        return Ok(McEstimate::zero(cfg.n_samples, true));
    }
    let parts = pool(cfg.n_workers)?
        .install(|| (0..cfg.n_batches()).into_par_iter().map(|i| sampler.batch(cfg, i)).collect::<Vec<_>>());
    Ok(sampler.finish(&reduce(parts)))
}

/// Runs every realization, in parallel, returning them in index order.
pub fn simulate(
    spectrum: &Spectrum,
    cfg: &SimConfig,
    workers: usize,
) -> anyhow::Result<(Vec<RealizationResult>, SimulationSummary)> {
    let results = pool(workers)?.install(|| {
        (0..cfg.realizations)
            .into_par_iter()
            .map(|i| run_realization(spectrum, cfg, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = summarize(spectrum.dimension, cfg, &results);
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vortexrate_core::field::{Census, RootTolerance, SpacetimeBox};
    use vortexrate_core::gaussian_model::{build_2d, build_3d};
    use vortexrate_core::{mc, Dimension, SpectrumKind};

    #[test]
    fn matches_sequential_estimators_bitwise() {
        let s = Spectrum::new(Dimension::Three, SpectrumKind::Blackbody { w: 1.0, c: 1.0 });
        let m3 = build_3d(&s.moments().unwrap()).unwrap();
        let cfg = McConfig { n_samples: 20_000, seed: 9, n_workers: 3, batch: 3000 };
        let seq = mc::mc_rate_3d(&m3, &cfg).unwrap();
        let par = mc_rate_3d(&m3, &cfg).unwrap();
        assert_eq!(seq, par);
        let m2 = build_2d(&Spectrum { dimension: Dimension::Two, ..s }.moments().unwrap()).unwrap();
        assert_eq!(mc::mc_rate_2d(&m2, &cfg).unwrap(), mc_rate_2d(&m2, &cfg).unwrap());
    }

    #[test]
    fn simulation_is_independent_of_workers() {
        let s = Spectrum::new(Dimension::Two, SpectrumKind::SpecialDispersion { k: 1.0, c: 1.0 });
        let cfg = SimConfig {
            n_waves: 60,
            realizations: 3,
            seed: 5,
            bx: SpacetimeBox::cube(Dimension::Two, 6.0, 6.0),
            grid: None,
            tol: RootTolerance::default(),
            census: Some(Census { spacing: 0.2, slices: 2 }),
        };
        let (a, sa) = simulate(&s, &cfg, 1).unwrap();
        let (b, sb) = simulate(&s, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!((a, sa), vortexrate_core::field::simulate(&s, &cfg).unwrap());
    }
}
