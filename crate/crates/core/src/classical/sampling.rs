//! Energy-shell and invariant-torus ensembles, and averages over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classical::system::{ClassicalFastSystem, Observable, PhasePoint, SystemKind};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Relative shell half-width: `|h - E| <= SHELL_WIDTH (E - V_min)`.
pub const SHELL_WIDTH: f64 = 1e-3;

/// Below this overall acceptance rate the shell sampler gives up.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Attempts allowed for a single sample before giving up.
const MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    EnergyShell { energy: f64, half_width: f64 },
    Torus { actions: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    pub samples: Vec<PhasePoint>,
    pub kind: EnsembleKind,
    pub parameters: Vec<f64>,
    pub seed: u64,
    /// Proposals drawn in total (equals the sample count for tori).
    pub attempts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// RNG for sample `index`, independent of evaluation order.
pub(crate) fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Mean and standard error with a fixed left-to-right summation order.
pub fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate { mean, stderr: f64::INFINITY };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Estimate { mean, stderr: (var / n).sqrt() }
}

/// Microcanonical shell sample by rejection.
///
/// Positions are drawn uniformly in a box around `{V <= E + w}` and accepted
/// with probability proportional to the momentum-space volume of the shell
/// at that position, `K_hi^{N/2} - K_lo^{N/2}` with `K = E -+ w - V`. The
/// kinetic energy then follows the `K^{N/2 - 1}` law on `[K_lo, K_hi]` and
/// the momentum direction is isotropic in mass-scaled coordinates.
pub fn sample_energy_shell(
    sys: &ClassicalFastSystem,
    big_r: &[f64],
    energy: f64,
    count: usize,
    seed: u64,
    execution: Execution,
) -> Result<ClassicalEnsemble> {
    sys.check_parameters(big_r)?;
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let pot = sys.potential();
    let v_min = pot.minimum(big_r)?;
    if !(energy.is_finite() && energy > v_min) {
        return Err(Error::EnergyBelowMinimum { energy, minimum: v_min });
    }
    let w = SHELL_WIDTH * (energy - v_min);
    let (hi, lo) = (energy + w, energy - w);
    let bounds = pot.bounding_box(big_r, hi)?;
    let n = sys.dof();
    let k = 0.5 * n as f64;
    let volume = |v: f64| (hi - v).max(0.0).powf(k) - (lo - v).max(0.0).powf(k);
    // the shell volume is largest at V_min for N > 2 and at V = E - w otherwise
    let w_max = if n > 2 { volume(v_min) } else { volume(v_min).max(volume(lo.max(v_min))) };

    let draws = par::try_map_range(execution, count, |i| {
        let mut rng = sample_rng(seed, i);
        let mut r = vec![0.0; n];
        for attempt in 1..=MAX_ATTEMPTS {
            for (x, &(a, b)) in r.iter_mut().zip(&bounds) {
                *x = rng.random_range(a..b);
            }
            let v = pot.value(&r, big_r);
            let f = volume(v);
            if f <= 0.0 || rng.random::<f64>() * w_max >= f {
                continue;
            }
            let klo = (lo - v).max(0.0).powf(k);
            let kin = (klo + rng.random::<f64>() * f).powf(1.0 / k);
            let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            for d in &mut dir {
                *d /= norm;
            }
            let p = dir.iter().zip(&sys.mass).map(|(d, m)| d * (2.0 * m * kin).sqrt()).collect();
            return Ok((PhasePoint { r: r.clone(), p }, attempt));
        }
        Err(Error::SamplingFailure { reason: format!("sample {i}: no acceptance in {MAX_ATTEMPTS} proposals") })
    })?;
    let attempts: u64 = draws.iter().map(|(_, a)| a).sum();
    let rate = count as f64 / attempts as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::SamplingFailure { reason: format!("acceptance rate {rate:.3e} below {MIN_ACCEPTANCE:e}") });
    }
    Ok(ClassicalEnsemble {
        samples: draws.into_iter().map(|(z, _)| z).collect(),
        kind: EnsembleKind::EnergyShell { energy, half_width: w },
        parameters: big_r.to_vec(),
        seed,
        attempts,
    })
}

fn harmonic_torus_point(sys: &ClassicalFastSystem, big_r: &[f64], actions: &[f64], angles: &[f64]) -> Result<PhasePoint> {
    let SystemKind::Harmonic(h) = &sys.kind else {
        return Err(Error::NotIntegrable(format!("{} has no action-angle map", sys.name())));
    };
    let mut r = Vec::with_capacity(actions.len());
    let mut p = Vec::with_capacity(actions.len());
    for k in 0..actions.len() {
        let (m, w) = (h.mass[k], h.omega[k]);
        r.push(big_r[k] + (2.0 * actions[k] / (m * w)).sqrt() * angles[k].cos());
        p.push(-(2.0 * m * w * actions[k]).sqrt() * angles[k].sin());
    }
    Ok(PhasePoint { r, p })
}

fn check_actions(sys: &ClassicalFastSystem, big_r: &[f64], actions: &[f64]) -> Result<()> {
    sys.check_parameters(big_r)?;
    if !matches!(sys.kind, SystemKind::Harmonic(_)) {
        return Err(Error::NotIntegrable(format!("{} has no action-angle map", sys.name())));
    }
    if actions.len() != sys.dof() {
        return Err(Error::DimensionMismatch { what: "actions", expected: sys.dof(), found: actions.len() });
    }
    if actions.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::InvalidInput("actions must be non-negative".into()));
    }
    Ok(())
}

/// Uniformly random angles on the torus of fixed actions.
pub fn sample_torus(
    sys: &ClassicalFastSystem,
    big_r: &[f64],
    actions: &[f64],
    count: usize,
    seed: u64,
) -> Result<ClassicalEnsemble> {
    check_actions(sys, big_r, actions)?;
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let samples = (0..count)
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let angles: Vec<f64> = (0..actions.len()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            harmonic_torus_point(sys, big_r, actions, &angles)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassicalEnsemble {
        samples,
        kind: EnsembleKind::Torus { actions: actions.to_vec() },
        parameters: big_r.to_vec(),
        seed,
        attempts: count as u64,
    })
}

pub fn ensemble_average(ensemble: &ClassicalEnsemble, observable: &Observable) -> Estimate {
    let values: Vec<f64> = ensemble.samples.iter().map(|z| observable.eval(z)).collect();
    mean_and_stderr(&values)
}

/// `<O>_E` over the energy shell, with its standard error.
pub fn microcanonical_average(
    sys: &ClassicalFastSystem,
    big_r: &[f64],
    energy: f64,
    observable: &Observable,
    count: usize,
    seed: u64,
) -> Result<Estimate> {
    if count < 100 {
        return Err(Error::InvalidInput(format!("count must be at least 100, got {count}")));
    }
    let ensemble = sample_energy_shell(sys, big_r, energy, count, seed, Execution::default())?;
    Ok(ensemble_average(&ensemble, observable))
}

/// `(2 pi)^{-N} oint O dtheta` on a uniform angle grid with `grid` points
/// per degree of freedom.
pub fn torus_average(
    sys: &ClassicalFastSystem,
    big_r: &[f64],
    actions: &[f64],
    observable: &Observable,
    grid: usize,
) -> Result<f64> {
    check_actions(sys, big_r, actions)?;
    if grid == 0 {
        return Err(Error::InvalidInput("angle grid must be non-empty".into()));
    }
    let n = actions.len();
    let total = grid.checked_pow(n as u32).ok_or_else(|| Error::InvalidInput("angle grid too large".into()))?;
    let step = std::f64::consts::TAU / grid as f64;
    let mut acc = 0.0;
    let mut angles = vec![0.0; n];
    for idx in 0..total {
        let mut rest = idx;
        for a in angles.iter_mut() {
            *a = (rest % grid) as f64 * step;
            rest /= grid;
        }
        acc += observable.eval(&harmonic_torus_point(sys, big_r, actions, &angles)?);
    }
    Ok(acc / total as f64)
}
