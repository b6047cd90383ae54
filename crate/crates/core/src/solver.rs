//! Alternating optimization of beamformers and antenna positions.
//!
//! Each outer iteration runs the fully-digital WMMSE stage (warm-started from
//! the previous digital precoder), factors the result into analog and
//! digital parts, and then sweeps the per-antenna MM updates. Every stage
//! either raises the secrecy margin or is discarded, so the recorded trace
//! never decreases.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{AntennaLayout, ChannelModel, MovingRegion, Point2};
use crate::hybrid::{hybrid_factorize, HybridOptions};
use crate::linalg::{frob2, CMatrix, C64};
use crate::position::{position_sweep, MmOptions};
use crate::rates::{ln_secrecy_margin, BeamformerSet, HybridPair, RatePair};
use crate::scene::Scene;
use crate::wmmse::{generalized_eigen_init, matched_filter_init, wmmse_fully_digital, WmmseOptions};

/// Maximum rejection-sampling draws for random layouts.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayoutMode {
    /// Centered `⌈√M⌉ × ⌈√M⌉` lattice with the given pitch, filled row by row.
    Grid { spacing: f64 },
    /// Lattice whose outer antennas sit on the region boundary.
    SpanningGrid,
    /// Uniform rejection sampling until every pair keeps `d_min`.
    Random,
}

/// Initial antenna positions.
pub fn initialize_layout<R: Rng + ?Sized>(
    antennas: usize,
    region: &MovingRegion,
    min_spacing: f64,
    mode: LayoutMode,
    rng: &mut R,
) -> Result<AntennaLayout> {
    if antennas == 0 {
        return Err(Error::Config("need at least one antenna".into()));
    }
    let side = region.side();
    let packing = || Error::Packing { count: antennas, d_min: min_spacing, width: side };
    let cols = (antennas as f64).sqrt().ceil() as usize;
    let positions = match mode {
        LayoutMode::Grid { spacing } => {
            if spacing < min_spacing || (cols as f64 - 1.0) * spacing > side * (1.0 + 1e-12) {
                return Err(packing());
            }
            lattice(antennas, cols, spacing, region)
        }
        LayoutMode::SpanningGrid => {
            let spacing = if cols > 1 { side / (cols as f64 - 1.0) } else { 0.0 };
            if cols > 1 && spacing < min_spacing {
                return Err(packing());
            }
            lattice(antennas, cols, spacing, region)
        }
        LayoutMode::Random => {
            // Disks of radius d_min/2 centered in the region cover at most
            // the region grown by d_min/2 on every side.
            let grown = side + min_spacing;
            let disk = std::f64::consts::PI * min_spacing * min_spacing / 4.0;
            if antennas as f64 * disk > grown * grown {
                return Err(packing());
            }
            random_positions(antennas, region, min_spacing, rng).ok_or_else(packing)?
        }
    };
    AntennaLayout::new(positions, region, min_spacing)
}

fn lattice(antennas: usize, cols: usize, spacing: f64, region: &MovingRegion) -> Vec<Point2> {
    let rows = antennas.div_ceil(cols);
    let h = region.half_width();
    let offset = |i: usize, n: usize| ((i as f64 - (n as f64 - 1.0) / 2.0) * spacing).clamp(-h, h);
    (0..antennas).map(|i| Point2::new(offset(i % cols, cols), offset(i / cols, rows))).collect()
}

fn random_positions<R: Rng + ?Sized>(
    antennas: usize,
    region: &MovingRegion,
    min_spacing: f64,
    rng: &mut R,
) -> Option<Vec<Point2>> {
    let h = region.half_width();
    let mut placed: Vec<Point2> = Vec::with_capacity(antennas);
    let mut attempts = 0;
    while placed.len() < antennas {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return None;
        }
        attempts += 1;
        let p = Point2::new(rng.random_range(-h..=h), rng.random_range(-h..=h));
        if placed.iter().all(|q| (p - q).norm() >= min_spacing) {
            placed.push(p);
        }
    }
    Some(placed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    /// Unit-modulus analog precoder followed by an `N × K` digital one.
    #[default]
    Hybrid,
    /// One RF chain per antenna.
    FullyDigital,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Relative change of the secrecy margin that ends the outer loop.
    pub tol: f64,
    pub max_outer: usize,
    pub wmmse: WmmseOptions,
    pub hybrid: HybridOptions,
    pub mm: MmOptions,
    pub architecture: Architecture,
    pub optimize_positions: bool,
    /// Channel model the beamformers and positions are designed under. The
    /// reported rates always use the near-field model.
    pub design_model: ChannelModel,
    /// Seed of the initial layout draw in [`solve`].
    pub rng_seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 300,
            wmmse: WmmseOptions::default(),
            hybrid: HybridOptions::default(),
            mm: MmOptions::default(),
            architecture: Architecture::Hybrid,
            optimize_positions: true,
            design_model: ChannelModel::NearField,
            rng_seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let tolerances = [self.tol, self.wmmse.tol, self.hybrid.tol, self.hybrid.mo.grad_tol, self.mm.tol];
        if tolerances.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("all tolerances must be positive".into()));
        }
        let caps =
            [self.max_outer, self.wmmse.max_iters, self.hybrid.max_outer, self.hybrid.mo.max_iters, self.mm.max_iters];
        if caps.contains(&0) {
            return Err(Error::Config("all iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub beamformers: BeamformerSet,
    pub layout: AntennaLayout,
    /// `[R_U − R_E]⁺` in bits/s/Hz under the design model: the initial
    /// configuration, then one entry per outer iteration.
    pub secrecy_trace: Vec<f64>,
    /// Rates of the final configuration under the near-field model.
    pub rates: RatePair,
    pub iterations: usize,
    /// Total per-antenna MM iterations across all sweeps.
    pub position_iterations: usize,
    pub elapsed: Duration,
}

/// Draw a random initial layout from `config.rng_seed` and solve.
pub fn solve(scene: &Scene, config: &SolveConfig) -> Result<SolveResult> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = initialize_layout(scene.antennas, &scene.region, scene.min_spacing, LayoutMode::Random, &mut rng)?;
    solve_from(scene, &layout, config)
}

struct Iterate {
    full: CMatrix,
    hybrid: Option<HybridPair>,
    effective: CMatrix,
}

/// Alternating optimization from a given feasible layout.
pub fn solve_from(scene: &Scene, layout: &AntennaLayout, config: &SolveConfig) -> Result<SolveResult> {
    scene.validate()?;
    config.validate()?;
    if layout.len() != scene.antennas {
        return Err(Error::Config(format!("layout has {} antennas, scene expects {}", layout.len(), scene.antennas)));
    }
    layout.validate(&scene.region)?;
    let start = Instant::now();
    let mut trace = Vec::new();
    let result = run(scene, layout, config, &mut trace);
    match result {
        Ok((layout, iterate, iterations, position_iterations)) => {
            let rates = scene.rates(&layout, &iterate.effective).map_err(|e| abort(e, &trace))?;
            Ok(SolveResult {
                beamformers: BeamformerSet {
                    full: Some(iterate.full),
                    hybrid: iterate.hybrid,
                    power_budget: scene.power_budget,
                },
                layout,
                secrecy_trace: trace,
                rates,
                iterations,
                position_iterations,
                elapsed: start.elapsed(),
            })
        }
        Err(e) => Err(abort(e, &trace)),
    }
}

fn abort(e: Error, trace: &[f64]) -> Error {
    match e {
        Error::Aborted { .. } => e,
        other => Error::Aborted { source: Box::new(other), partial_trace: trace.to_vec() },
    }
}

fn bits(ln_margin: f64) -> f64 {
    (ln_margin / std::f64::consts::LN_2).max(0.0)
}

fn beamformer_step(
    scene: &Scene,
    config: &SolveConfig,
    ht: &CMatrix,
    zt: &CMatrix,
    warm_full: &CMatrix,
    warm_analog: Option<&CMatrix>,
) -> Result<Iterate> {
    let mut w0 = warm_full.clone();
    let power = frob2(&w0);
    if power > scene.power_budget {
        w0 *= C64::from((scene.power_budget / power).sqrt());
    }
    let full = wmmse_fully_digital(ht, zt, scene.power_budget, &w0, config.wmmse)?.state.w;
    Ok(match config.architecture {
        Architecture::FullyDigital => Iterate { effective: full.clone(), full, hybrid: None },
        Architecture::Hybrid => {
            let out = hybrid_factorize(&full, scene.rf_chains, scene.power_budget, warm_analog, config.hybrid)?;
            let pair = HybridPair { analog: out.analog, digital: out.digital };
            Iterate { effective: pair.effective(), full, hybrid: Some(pair) }
        }
    })
}

fn iterate_from(scene: &Scene, config: &SolveConfig, full: CMatrix) -> Result<Iterate> {
    Ok(match config.architecture {
        Architecture::FullyDigital => Iterate { effective: full.clone(), full, hybrid: None },
        Architecture::Hybrid => {
            let out = hybrid_factorize(&full, scene.rf_chains, scene.power_budget, None, config.hybrid)?;
            let pair = HybridPair { analog: out.analog, digital: out.digital };
            Iterate { effective: pair.effective(), full, hybrid: Some(pair) }
        }
    })
}

/// The matched filter, unless the generalized-eigenvector start has the
/// larger secrecy margin. A matched filter toward a user that shares its
/// direction with a nearer eavesdropper starts at a negative margin, where
/// the WMMSE iteration can stall.
fn initial_iterate(scene: &Scene, config: &SolveConfig, ht: &CMatrix, zt: &CMatrix) -> Result<(Iterate, f64)> {
    let matched = iterate_from(scene, config, matched_filter_init(ht, scene.streams, scene.power_budget))?;
    let matched_margin = ln_secrecy_margin(ht, zt, &matched.effective)?;
    let eigen = iterate_from(scene, config, generalized_eigen_init(ht, zt, scene.streams, scene.power_budget)?)?;
    let eigen_margin = ln_secrecy_margin(ht, zt, &eigen.effective)?;
    Ok(if eigen_margin > matched_margin { (eigen, eigen_margin) } else { (matched, matched_margin) })
}

fn run(
    scene: &Scene,
    layout: &AntennaLayout,
    config: &SolveConfig,
    trace: &mut Vec<f64>,
) -> Result<(AntennaLayout, Iterate, usize, usize)> {
    let model = config.design_model;
    let mut layout = layout.clone();
    let (mut ht, mut zt) = scene.whitened_channels(&layout, model)?;
    let (mut iterate, mut objective) = initial_iterate(scene, config, &ht, &zt)?;
    trace.push(bits(objective));
    let mut iterations = 0;
    let mut position_iterations = 0;
    while iterations < config.max_outer {
        iterations += 1;
        let previous = objective;

        let warm_analog = iterate.hybrid.as_ref().map(|p| p.analog.clone());
        let candidate = beamformer_step(scene, config, &ht, &zt, &iterate.full, warm_analog.as_ref())?;
        let candidate_objective = ln_secrecy_margin(&ht, &zt, &candidate.effective)?;
        if candidate_objective >= objective {
            iterate = candidate;
            objective = candidate_objective;
        } else {
            // Keep the transmitted beamformers but let the digital warm start
            // advance.
            iterate.full = candidate.full;
        }

        if config.optimize_positions {
            let sweep = position_sweep(scene, model, &layout, &iterate.effective, config.mm)?;
            position_iterations += sweep.mm_iterations;
            if sweep.ln_margin >= objective {
                layout = sweep.layout;
                objective = sweep.ln_margin;
                (ht, zt) = scene.whitened_channels(&layout, model)?;
            }
        }

        trace.push(bits(objective));
        if (objective - previous).abs() / (previous.abs() + 1e-12) <= config.tol {
            break;
        }
    }
    Ok((layout, iterate, iterations, position_iterations))
}
