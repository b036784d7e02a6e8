//! Estimation of `C(E)`, the Fourier transform of a cooled time signal.
//!
//! Two backends share one assembly core. The Monte Carlo backend draws
//! antithetic time pairs `(t, -t)` from the truncated cooling density and
//! averages `Z k(t) e^{iEt}` over them; the quadrature backend sums the same
//! integrand on a uniform trapezoid grid. Kernels are evaluated once per time
//! and reused across the whole energy grid.

mod config;
mod cooling;
mod kernel;

pub use config::{
    Backend, EnergyGrid, Evolution, Mode, Sampling, ScanConfig, Shots, MAX_GRID_POINTS,
};
pub use cooling::CoolingFunction;
pub use kernel::{
    energy_kernel, gap_kernel, transition_kernel, KernelEngine, KernelKind, COMMUTATOR_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pauli::{Hamiltonian, Observable};
use crate::rng::{Domain, StreamKey};
use crate::state::Statevector;
use crate::{Error, Result};

/// Largest `|E grid| x |E' grid|` accepted by [`scan_2d`].
pub const MAX_GRID2D_POINTS: usize = 1_000_000;

/// One evolution time and the kernel evaluated there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: f64,
    pub kernel_value: Complex64,
}

/// `C(E)` tabulated on an energy grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralScan {
    pub e_values: Vec<f64>,
    pub c_values: Vec<Complex64>,
    /// Standard error of `Re C(E)`; zero for the quadrature backend.
    pub stderr: Vec<f64>,
    pub kind: KernelKind,
    pub config: ScanConfig,
}

impl SpectralScan {
    pub fn len(&self) -> usize {
        self.e_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_values.is_empty()
    }

    pub fn re(&self) -> Vec<f64> {
        self.c_values.iter().map(|c| c.re).collect()
    }
}

/// `C(E, E')`, rows indexed by `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan2d {
    pub e_values: Vec<f64>,
    pub e2_values: Vec<f64>,
    pub c_values: DMatrix<Complex64>,
    pub config: ScanConfig,
}

/// `N_t` times in antithetic order `[t0, -t0, t1, -t1, ...]`, `t_j >= 0`.
///
/// Pair `j` draws its uniform variate from its own counter stream, so the
/// list does not depend on evaluation order.
pub fn sample_times(config: &ScanConfig) -> Result<Vec<f64>> {
    sample_times_in(config, Domain::Times)
}

fn sample_times_in(config: &ScanConfig, domain: Domain) -> Result<Vec<f64>> {
    config.validate()?;
    let m = config.n_samples / 2;
    let mut out = Vec::with_capacity(config.n_samples);
    for j in 0..m {
        let v: f64 = StreamKey::new(config.seed, j as u64).rng(domain, 0).random();
        let u = match config.sampling {
            Sampling::Stratified => (j as f64 + v) / m as f64,
            Sampling::Iid => v,
        };
        let t = config.cooling.inverse_half_cdf(u, config.t_max);
        out.push(t);
        out.push(-t);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
struct Pair {
    t: f64,
    plus: Complex64,
    minus: Complex64,
    weight: f64,
}

/// `C(E)` as a weighted sum over kernel values, evaluable at any `E`.
#[derive(Clone, Debug)]
pub struct ScanCurve {
    center: Option<(Complex64, f64)>,
    pairs: Vec<Pair>,
    symmetric: bool,
}

impl ScanCurve {
    /// Monte Carlo weights `Z / N_t` on antithetic samples.
    pub fn from_samples(samples: &[TimeSample], config: &ScanConfig, symmetric: bool) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no time samples"));
        }
        if !samples.len().is_multiple_of(2) {
            return Err(Error::invalid("time samples must come in antithetic pairs"));
        }
        let weight = config.cooling.normalization(config.t_max) / samples.len() as f64;
        let pairs = samples
            .chunks_exact(2)
            .map(|p| {
                if p[1].t != -p[0].t {
                    return Err(Error::invalid(format!(
                        "samples {} and {} are not an antithetic pair",
                        p[0].t, p[1].t
                    )));
                }
                Ok(Pair {
                    t: p[0].t,
                    plus: p[0].kernel_value,
                    minus: p[1].kernel_value,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            center: None,
            pairs,
            symmetric,
        })
    }

    /// Trapezoid rule `sum_n w_n p(n tau) k(n tau) e^{iE n tau} tau`, `|n| <= N`.
    pub fn deterministic(engine: &KernelEngine, config: &ScanConfig) -> Result<Self> {
        config.validate()?;
        let (tau, n) = config.quadrature_step()?;
        let mut times = vec![0.0];
        for k in 1..=n {
            let t = k as f64 * tau;
            times.push(t);
            times.push(-t);
        }
        let samples = engine.eval_many(&times)?;
        let p = &config.cooling;
        let center = Some((samples[0].kernel_value, p.weight(0.0) * tau));
        let pairs = (1..=n)
            .map(|k| {
                let t = samples[2 * k - 1].t;
                let w = if k == n { 0.5 } else { 1.0 };
                Pair {
                    t,
                    plus: samples[2 * k - 1].kernel_value,
                    minus: samples[2 * k].kernel_value,
                    weight: w * p.weight(t) * tau,
                }
            })
            .collect();
        Ok(Self {
            center,
            pairs,
            symmetric: engine.is_hermitian_symmetric(),
        })
    }

    fn pair_term(&self, p: &Pair, e: f64) -> (f64, f64) {
        let (s, c) = (e * p.t).sin_cos();
        let re = (p.plus.re + p.minus.re) * c - (p.plus.im - p.minus.im) * s;
        let im = if self.symmetric {
            0.0
        } else {
            (p.plus.im + p.minus.im) * c + (p.plus.re - p.minus.re) * s
        };
        (p.weight * re, p.weight * im)
    }

    pub fn value(&self, e: f64) -> Complex64 {
        let mut acc = match self.center {
            Some((k, w)) => Complex64::new(w * k.re, if self.symmetric { 0.0 } else { w * k.im }),
            None => Complex64::new(0.0, 0.0),
        };
        for p in &self.pairs {
            let (re, im) = self.pair_term(p, e);
            acc.re += re;
            acc.im += im;
        }
        acc
    }

    /// `d Re C / dE`.
    pub fn re_derivative(&self, e: f64) -> f64 {
        self.pairs
            .iter()
            .map(|p| {
                let (s, c) = (e * p.t).sin_cos();
                let a = p.plus.re + p.minus.re;
                let b = p.plus.im - p.minus.im;
                -p.weight * p.t * (a * s + b * c)
            })
            .sum()
    }

    /// Standard error of `Re C(E)` from the spread of pair contributions.
    ///
    /// Stratified pairs are grouped two by two (three in a trailing odd
    /// group) and the within-group variance is pooled.
    fn re_stderr(&self, e: f64, sampling: Sampling) -> f64 {
        let m = self.pairs.len();
        if m < 2 {
            return f64::NAN;
        }
        let ys: Vec<f64> = self
            .pairs
            .iter()
            .map(|p| self.pair_term(p, e).0 * m as f64)
            .collect();
        let mf = m as f64;
        match sampling {
            Sampling::Iid => {
                let mean = ys.iter().sum::<f64>() / mf;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (mf - 1.0);
                (var / mf).sqrt()
            }
            Sampling::Stratified => {
                let mut total = 0.0;
                let mut start = 0;
                while start < m {
                    let len = if m - start == 3 { 3 } else { 2.min(m - start) };
                    let g = &ys[start..start + len];
                    if len > 1 {
                        let gm = g.iter().sum::<f64>() / len as f64;
                        let ss: f64 = g.iter().map(|y| (y - gm).powi(2)).sum();
                        total += len as f64 / (len as f64 - 1.0) * ss;
                    }
                    start += len;
                }
                total.sqrt() / mf
            }
        }
    }

    fn tabulate(&self, grid: &[f64]) -> Vec<Complex64> {
        grid.par_iter().map(|&e| self.value(e)).collect()
    }
}

/// Monte Carlo `C(E) = (Z/N_t) sum_s k(t_s) e^{iE t_s}` with per-point stderr.
///
/// `symmetric` declares `k(-t) = conj(k(t))`; the imaginary part is then
/// identically zero and is reported as such.
pub fn assemble_scan(
    samples: &[TimeSample],
    config: &ScanConfig,
    kind: KernelKind,
    symmetric: bool,
) -> Result<SpectralScan> {
    let curve = ScanCurve::from_samples(samples, config, symmetric)?;
    let e_values = config.e_grid.points();
    let c_values = curve.tabulate(&e_values);
    let stderr = e_values
        .par_iter()
        .map(|&e| curve.re_stderr(e, config.sampling))
        .collect();
    finish(e_values, c_values, stderr, kind, config)
}

/// Quadrature backend; `stderr` is zero.
pub fn assemble_scan_deterministic(engine: &KernelEngine, config: &ScanConfig) -> Result<SpectralScan> {
    let curve = ScanCurve::deterministic(engine, config)?;
    let e_values = config.e_grid.points();
    let c_values = curve.tabulate(&e_values);
    let stderr = vec![0.0; e_values.len()];
    finish(e_values, c_values, stderr, engine.kind(), config)
}

fn finish(
    e_values: Vec<f64>,
    c_values: Vec<Complex64>,
    stderr: Vec<f64>,
    kind: KernelKind,
    config: &ScanConfig,
) -> Result<SpectralScan> {
    if let Some(i) = c_values.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite(format!("C(E) at E = {}", e_values[i])));
    }
    Ok(SpectralScan {
        e_values,
        c_values,
        stderr,
        kind,
        config: config.clone(),
    })
}

/// Runs `engine` with the backend named in `config`.
pub fn scan(engine: &KernelEngine, config: &ScanConfig) -> Result<SpectralScan> {
    match config.backend {
        Backend::MonteCarlo => {
            let times = sample_times(config)?;
            let samples = engine.eval_many(&times)?;
            assemble_scan(&samples, config, engine.kind(), engine.is_hermitian_symmetric())
        }
        Backend::Quadrature => assemble_scan_deterministic(engine, config),
    }
}

/// Gap-mode scan with kernel `Tr[O S psi(t) psi(t)^dagger]`; `s` must commute with `h`.
pub fn degeneracy_probe(
    h: &Hamiltonian,
    psi0: &Statevector,
    s: &Observable,
    config: &ScanConfig,
) -> Result<SpectralScan> {
    if config.shots != Shots::Exact {
        return Err(Error::invalid("the degeneracy probe uses exact expectation values"));
    }
    let engine = KernelEngine::probe(h, psi0, None, s, config.evolution)?;
    scan(&engine, config)
}

/// Monte Carlo `C(E, E') = (Z^2/N_t) sum_s <psi(t'_s)|O|psi(t_s)> e^{iE t_s} e^{-iE' t'_s}`.
///
/// `t` and `t'` come from independent streams; the `t'` list is shuffled so
/// the pairs `(t_s, t'_s)` are independent. Peaks sit at `(E_i, E_j)`.
pub fn scan_2d(
    h: &Hamiltonian,
    psi0: &Statevector,
    o: Option<Observable>,
    config: &ScanConfig,
) -> Result<Scan2d> {
    config.validate()?;
    let grid2 = config
        .e2_grid
        .ok_or_else(|| Error::invalid("grid2d scan needs a second energy grid"))?;
    let (rows, cols) = (config.e_grid.len(), grid2.len());
    if rows.saturating_mul(cols) > MAX_GRID2D_POINTS {
        return Err(Error::invalid(format!(
            "2-D grid of {rows} x {cols} points exceeds {MAX_GRID2D_POINTS}"
        )));
    }
    let engine = KernelEngine::gap(h, psi0, o, config.evolution, Shots::Exact, config.seed)?;
    let ts = sample_times_in(config, Domain::Times)?;
    let mut ts2 = sample_times_in(config, Domain::SecondaryTimes)?;
    ts2.shuffle(&mut StreamKey::new(config.seed, 0).rng(Domain::Shuffle, 0));
    let f: Vec<Complex64> = ts
        .par_iter()
        .zip(ts2.par_iter())
        .map(|(&t, &t2)| engine.two_time(t, t2))
        .collect::<Result<_>>()?;

    let e1 = config.e_grid.points();
    let e2 = grid2.points();
    let z = config.cooling.normalization(config.t_max);
    let scale = z * z / ts.len() as f64;
    let mut c = DMatrix::<Complex64>::zeros(rows, cols);
    const CHUNK: usize = 1024;
    for start in (0..ts.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(ts.len());
        let a = DMatrix::from_fn(rows, end - start, |r, s| {
            f[start + s] * Complex64::from_polar(1.0, e1[r] * ts[start + s])
        });
        let b = DMatrix::from_fn(end - start, cols, |s, k| {
            Complex64::from_polar(1.0, -e2[k] * ts2[start + s])
        });
        c += a * b;
    }
    c *= Complex64::new(scale, 0.0);
    if c.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("C(E, E')".into()));
    }
    Ok(Scan2d {
        e_values: e1,
        e2_values: e2,
        c_values: c,
        config: config.clone(),
    })
}
