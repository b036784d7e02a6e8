use serde::{Deserialize, Serialize};

use super::CoolingFunction;
use crate::{Error, Result};

/// Largest energy grid accepted for a 1-D scan.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Gap,
    Energy,
    Transition,
    Grid2d,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Gap => "gap",
            Mode::Energy => "energy",
            Mode::Transition => "transition",
            Mode::Grid2d => "grid2d",
        }
    }
}

/// Uniform grid `min, min + step, ...` up to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl EnergyGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let g = Self { min, max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(Error::NonFinite("energy grid bound".into()));
        }
        if self.min >= self.max {
            return Err(Error::invalid(format!(
                "energy grid min {} must be below max {}",
                self.min, self.max
            )));
        }
        if self.step <= 0.0 {
            return Err(Error::invalid(format!("energy grid step {} must be > 0", self.step)));
        }
        if self.len() > MAX_GRID_POINTS {
            return Err(Error::invalid(format!(
                "energy grid has {} points (limit {MAX_GRID_POINTS})",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.min + k as f64 * self.step).collect()
    }

    /// Largest `|E|` on the grid.
    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    Exact,
    Finite(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evolution {
    Exact,
    Trotter { steps_per_unit_time: f64 },
}

impl Evolution {
    /// Trotter steps used for time `t` (at least one).
    pub fn trotter_steps(rate: f64, t: f64) -> usize {
        ((t.abs() * rate).ceil() as usize).max(1)
    }
}

/// How the `N_t / 2` positive times are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// One draw per equal-probability stratum of the half density.
    #[default]
    Stratified,
    /// Independent draws.
    Iid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    MonteCarlo,
    Quadrature,
}

/// Parameters of one scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub mode: Mode,
    pub cooling: CoolingFunction,
    /// Cutoff time `T`; times are drawn from `[-T, T]`.
    #[serde(rename = "T")]
    pub t_max: f64,
    /// `N_t`, even.
    pub n_samples: usize,
    pub e_grid: EnergyGrid,
    /// Second axis for `grid2d`.
    pub e2_grid: Option<EnergyGrid>,
    pub shots: Shots,
    pub seed: u64,
    pub evolution: Evolution,
    pub sampling: Sampling,
    pub backend: Backend,
    /// Quadrature step; defaults to `pi / (2 max|E|)`.
    pub tau: Option<f64>,
}

impl ScanConfig {
    /// Gaussian-cooled Monte Carlo scan with exact evolution and no shot noise.
    pub fn new(mode: Mode, a: f64, t_max: f64, n_samples: usize, e_grid: EnergyGrid) -> Result<Self> {
        let cfg = Self {
            mode,
            cooling: CoolingFunction::gaussian(a)?,
            t_max,
            n_samples,
            e_grid,
            e2_grid: None,
            shots: Shots::Exact,
            seed: 0,
            evolution: Evolution::Exact,
            sampling: Sampling::Stratified,
            backend: Backend::MonteCarlo,
            tau: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.cooling {
            CoolingFunction::Gaussian { a } => {
                CoolingFunction::gaussian(a)?;
            }
            CoolingFunction::Lorentzian { beta } => {
                CoolingFunction::lorentzian(beta)?;
            }
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invalid(format!("cutoff T = {} must be > 0", self.t_max)));
        }
        if self.n_samples < 2 || !self.n_samples.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "n_samples = {} must be even and at least 2 (antithetic pairs)",
                self.n_samples
            )));
        }
        self.e_grid.validate()?;
        if let Some(g) = &self.e2_grid {
            g.validate()?;
        }
        if self.mode == Mode::Grid2d && self.e2_grid.is_none() {
            return Err(Error::invalid("grid2d mode needs a second energy grid"));
        }
        if let Shots::Finite(0) = self.shots {
            return Err(Error::invalid("shots must be at least 1"));
        }
        if let Evolution::Trotter { steps_per_unit_time } = self.evolution {
            if !(steps_per_unit_time.is_finite() && steps_per_unit_time > 0.0) {
                return Err(Error::invalid("trotter steps_per_unit_time must be > 0"));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::invalid(format!("tau = {tau} must be > 0")));
            }
        }
        Ok(())
    }

    /// Quadrature step `tau = T / N` and `N`, checked against aliasing.
    pub fn quadrature_step(&self) -> Result<(f64, usize)> {
        let e_max = self.e_grid.abs_max();
        let requested = self
            .tau
            .unwrap_or(std::f64::consts::FRAC_PI_2 / e_max.max(f64::MIN_POSITIVE));
        let n = (self.t_max / requested).ceil().max(1.0) as usize;
        let tau = self.t_max / n as f64;
        let limit = std::f64::consts::PI / e_max;
        if tau > limit {
            return Err(Error::Aliasing { tau, e_max, limit });
        }
        Ok((tau, n))
    }
}
