//! Error budgets: truncation of the time integral and measurement shot noise.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::estimator::{Backend, KernelEngine, ScanConfig, ScanCurve};
use crate::peaks::find_peaks_in;
use crate::{Error, Result};

/// Bounds on `|C_inf(E) - C_T(E)|` for Gaussian cooling and a kernel bounded by one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffBound {
    /// `(2/a) exp(-(aT)^2)`.
    pub relaxed: f64,
    /// `(sqrt(pi)/a) erfc(aT)`, the exact weight of the discarded tails.
    pub tight: f64,
}

/// `T = 0` is allowed and gives the untruncated-away value `2/a`.
pub fn cutoff_error_bound(a: f64, t_max: f64) -> Result<CutoffBound> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("a = {a} must be > 0")));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::invalid(format!("T = {t_max} must be >= 0")));
    }
    let x = a * t_max;
    Ok(CutoffBound {
        relaxed: 2.0 / a * (-x * x).exp(),
        tight: std::f64::consts::PI.sqrt() / a * erfc(x),
    })
}

/// Smallest `T` with `(2/a) exp(-(aT)^2) <= eps_c`.
pub fn min_sampling_range(a: f64, eps_c: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0 && eps_c.is_finite() && eps_c > 0.0) {
        return Err(Error::invalid(format!("need a > 0 and eps_c > 0 (got {a}, {eps_c})")));
    }
    if a * eps_c >= 2.0 {
        return Err(Error::invalid(format!(
            "a * eps_c = {} must be below 2 (log argument must exceed 1)",
            a * eps_c
        )));
    }
    Ok((2.0 / (a * eps_c)).ln().sqrt() / a)
}

/// `(1 / 4N_s) sum |alpha_i|^2`.
pub fn shot_variance_bound(coeffs: &[f64], shots: u64) -> Result<f64> {
    if coeffs.is_empty() {
        return Err(Error::invalid("no coefficients"));
    }
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("coefficient".into()));
    }
    Ok(coeffs.iter().map(|c| c * c).sum::<f64>() / (4.0 * shots as f64))
}

/// All closed-form bounds for one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub a: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub cutoff_bound: f64,
    pub tight_cutoff_bound: f64,
    pub eps_c: Option<f64>,
    pub min_t: Option<f64>,
    pub shots: Option<u64>,
    pub sum_alpha_sq: Option<f64>,
    pub shot_variance_bound: Option<f64>,
}

impl ErrorBudget {
    /// `shot_terms` holds `(|alpha_i|, N_s)` when the kernel is shot-sampled.
    pub fn new(a: f64, t_max: f64, eps_c: Option<f64>, shot_terms: Option<(&[f64], u64)>) -> Result<Self> {
        let cut = cutoff_error_bound(a, t_max)?;
        let min_t = eps_c.map(|e| min_sampling_range(a, e)).transpose()?;
        let (shots, sum_alpha_sq, shot_variance_bound) = match shot_terms {
            Some((coeffs, n)) => (
                Some(n),
                Some(coeffs.iter().map(|c| c * c).sum()),
                Some(shot_variance_bound(coeffs, n)?),
            ),
            None => (None, None, None),
        };
        Ok(Self {
            a,
            t_max,
            cutoff_bound: cut.relaxed,
            tight_cutoff_bound: cut.tight,
            eps_c,
            min_t,
            shots,
            sum_alpha_sq,
            shot_variance_bound,
        })
    }

    /// Two-column `quantity, value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity, value\n");
        let mut row = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k}, {v}");
            }
        };
        row("a", Some(fmt(self.a)));
        row("T", Some(fmt(self.t_max)));
        row("cutoff_bound", Some(fmt(self.cutoff_bound)));
        row("tight_cutoff_bound", Some(fmt(self.tight_cutoff_bound)));
        row("eps_c", self.eps_c.map(fmt));
        row("min_T", self.min_t.map(fmt));
        row("shots", self.shots.map(|s| s.to_string()));
        row("sum_alpha_sq", self.sum_alpha_sq.map(fmt));
        row("shot_variance_bound", self.shot_variance_bound.map(fmt));
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// What a cutoff sweep looks for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepTarget {
    /// Exact gap the tracked peak should converge to.
    pub gap: f64,
    /// Peaks farther than this from `gap` do not count as the target.
    pub window: f64,
    /// Relative prominence threshold for detection.
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub t_max: f64,
    /// `None` when no peak was detected inside the window.
    pub gap_error: Option<f64>,
    pub location: Option<f64>,
    pub relaxed_bound: f64,
    pub tight_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffSweep {
    pub rows: Vec<SweepRow>,
    pub a: f64,
    pub eps_c: f64,
    /// Marker from [`min_sampling_range`].
    pub min_t: f64,
}

impl CutoffSweep {
    /// CSV with columns `T, gap_error, paper_bound, tight_bound`; lost peaks print `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# a = {}\n# eps_c = {}\n# T_min = {}\nT, gap_error, paper_bound, tight_bound\n",
            fmt(self.a),
            fmt(self.eps_c),
            fmt(self.min_t)
        );
        for r in &self.rows {
            let err = r.gap_error.map_or_else(|| "nan".to_string(), fmt);
            let _ = writeln!(out, "{}, {err}, {}, {}", fmt(r.t_max), fmt(r.relaxed_bound), fmt(r.tight_bound));
        }
        out
    }

    /// `max` of the gap error over all rows with `T >= t`.
    pub fn tail_max_error(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.t_max >= t)
            .map(|r| r.gap_error.unwrap_or(f64::INFINITY))
            .reduce(f64::max)
    }
}

/// Gap-peak error versus cutoff `T` with the quadrature backend.
///
/// For each `T` the scan curve is tabulated on the configured grid, the
/// detected peak nearest `target.gap` is taken, and its location is polished
/// to a root of `d Re C / dE` on the continuous quadrature curve, so the
/// error is not limited by the grid step.
pub fn cutoff_sweep(
    engine: &KernelEngine,
    config: &ScanConfig,
    target: SweepTarget,
    t_list: &[f64],
    eps_c: f64,
) -> Result<CutoffSweep> {
    let a = match config.cooling {
        crate::estimator::CoolingFunction::Gaussian { a } => a,
        _ => return Err(Error::invalid("cutoff sweep needs Gaussian cooling")),
    };
    if t_list.is_empty() {
        return Err(Error::invalid("empty T list"));
    }
    let min_t = min_sampling_range(a, eps_c)?;
    let grid = config.e_grid.points();
    let rows = t_list
        .par_iter()
        .map(|&t_max| {
            let cfg = ScanConfig {
                t_max,
                backend: Backend::Quadrature,
                ..config.clone()
            };
            let bound = cutoff_error_bound(a, t_max)?;
            let curve = ScanCurve::deterministic(engine, &cfg)?;
            let location = locate_peak(&curve, &grid, config.e_grid.step, target)?;
            Ok(SweepRow {
                t_max,
                gap_error: location.map(|x| (x - target.gap).abs()),
                location,
                relaxed_bound: bound.relaxed,
                tight_bound: bound.tight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CutoffSweep { rows, a, eps_c, min_t })
}

fn locate_peak(curve: &ScanCurve, grid: &[f64], step: f64, target: SweepTarget) -> Result<Option<f64>> {
    let y: Vec<f64> = grid.iter().map(|&e| curve.value(e).re).collect();
    let report = find_peaks_in(grid, &y, target.threshold)?;
    let Some(coarse) = report
        .peaks
        .iter()
        .map(|p| p.location)
        .filter(|x| (x - target.gap).abs() <= target.window)
        .min_by(|x, y| (x - target.gap).abs().total_cmp(&(y - target.gap).abs()))
    else {
        return Ok(None);
    };
    let d = |e: f64| curve.re_derivative(e);
    let (mut lo, mut hi) = (coarse - step, coarse + step);
    if !(d(lo) > 0.0 && d(hi) < 0.0) {
        return Ok(Some(coarse));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn cutoff_bound_values() {
        assert_eq!(cutoff_error_bound(1.0, 0.0).unwrap().relaxed, 2.0);
        let a = 1.0 / (50.0 * SQRT_2);
        let b = cutoff_error_bound(a, 100.0).unwrap();
        assert!((b.relaxed - 19.14).abs() < 0.01);
        assert!((b.relaxed - 2.0 / a * (-2.0f64).exp()).abs() < 1e-12);
        assert!(cutoff_error_bound(0.0, 1.0).is_err());
        assert!(cutoff_error_bound(1.0, -1.0).is_err());
    }

    #[test]
    fn tight_bound_matches_tail_integral() {
        let (a, t) = (0.05, 20.0);
        // Trapezoid on [T, T + 40/a] of exp(-a^2 t^2), both tails.
        let n = 400_000;
        let hi = t + 40.0 / a;
        let h = (hi - t) / n as f64;
        let f = |x: f64| (-(a * x) * (a * x)).exp();
        let mut s = 0.5 * (f(t) + f(hi));
        for k in 1..n {
            s += f(t + k as f64 * h);
        }
        let tail = 2.0 * s * h;
        let b = cutoff_error_bound(a, t).unwrap();
        assert!((b.tight - tail).abs() < 1e-6 * tail);
        assert!(b.tight <= b.relaxed);
    }

    #[test]
    fn min_range_values() {
        assert!((min_sampling_range(1.0, 2.0 / std::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
        let a = 1.0 / (50.0 * SQRT_2);
        let t = min_sampling_range(a, 0.01).unwrap();
        assert!((t - 218.6).abs() < 0.05);
        assert!((cutoff_error_bound(a, t).unwrap().relaxed - 0.01).abs() < 1e-12);
        assert!(min_sampling_range(1.0, 2.0).is_err());
        assert!(min_sampling_range(1.0, 0.0).is_err());
    }

    #[test]
    fn shot_bound_values() {
        assert_eq!(shot_variance_bound(&[1.0], 1).unwrap(), 0.25);
        assert!((shot_variance_bound(&[0.5, 0.5], 100).unwrap() - 0.00125).abs() < 1e-18);
        assert!(shot_variance_bound(&[], 10).is_err());
        assert!(shot_variance_bound(&[1.0], 0).is_err());
    }

    #[test]
    fn budget_csv() {
        let b = ErrorBudget::new(0.1, 30.0, Some(0.01), Some((&[1.0, 0.5], 100))).unwrap();
        let csv = b.to_csv();
        assert!(csv.starts_with("quantity, value\n"));
        assert!(csv.contains("min_T, "));
        assert!(csv.contains("shot_variance_bound, "));
        let none = ErrorBudget::new(0.1, 30.0, None, None).unwrap();
        assert!(!none.to_csv().contains("min_T"));
    }

    proptest! {
        #[test]
        fn round_trip(a in 1e-3f64..0.99, frac in 1e-6f64..0.99) {
            let eps = frac * 2.0 / a;
            let t = min_sampling_range(a, eps).unwrap();
            let back = cutoff_error_bound(a, t).unwrap().relaxed;
            prop_assert!((back - eps).abs() <= 1e-12 * eps.max(1.0));
        }

        #[test]
        fn bounds_monotone(a in 1e-3f64..0.99, t in 0.0f64..200.0, dt in 1e-3f64..10.0) {
            let x = cutoff_error_bound(a, t).unwrap();
            let y = cutoff_error_bound(a, t + dt).unwrap();
            prop_assert!(y.relaxed <= x.relaxed);
            prop_assert!(y.tight <= x.tight);
            prop_assert!(x.tight <= x.relaxed);
        }

        #[test]
        fn shot_bound_scales(c in proptest::collection::vec(-3.0f64..3.0, 1..6), n in 1u64..1_000_000) {
            let one = shot_variance_bound(&c, n).unwrap();
            let two = shot_variance_bound(&c, 2 * n).unwrap();
            prop_assert_eq!(one, 2.0 * two);
        }
    }
}
