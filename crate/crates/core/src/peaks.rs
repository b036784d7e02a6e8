//! Peak detection on `C(E)`, matching against reference energies, and
//! estimates of how far overlapping neighbours pull a peak.

use serde::{Deserialize, Serialize};

use crate::estimator::SpectralScan;
use crate::{Error, Result};

/// Default relative prominence threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(rename = "E")]
    pub location: f64,
    pub height: f64,
    pub prominence: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl PeakReport {
    pub fn locations(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.location).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Which real curve is searched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PeakSignal {
    #[default]
    Real,
    /// `|C(E)|`, for noisy complex scans.
    Magnitude,
}

/// Peaks of `Re C(E)` with prominence at least `threshold * max Re C`.
pub fn find_peaks(scan: &SpectralScan, threshold: f64) -> Result<PeakReport> {
    find_peaks_with(scan, threshold, PeakSignal::Real)
}

pub fn find_peaks_with(scan: &SpectralScan, threshold: f64, signal: PeakSignal) -> Result<PeakReport> {
    let y: Vec<f64> = match signal {
        PeakSignal::Real => scan.re(),
        PeakSignal::Magnitude => scan.c_values.iter().map(|c| c.norm()).collect(),
    };
    find_peaks_in(&scan.e_values, &y, threshold)
}

/// Peak search on a sampled curve `y(e)` with `e` strictly increasing.
///
/// Local maxima (flat tops resolved to the middle of the run) are kept when
/// their prominence reaches `threshold * max(y)`. Locations and heights are
/// refined by the vertex of the parabola through the maximum and its two
/// neighbours.
pub fn find_peaks_in(e: &[f64], y: &[f64], threshold: f64) -> Result<PeakReport> {
    if e.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} energies but {} curve values",
            e.len(),
            y.len()
        )));
    }
    if e.len() < 3 {
        return Err(Error::invalid("peak search needs at least 3 points"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} must lie in (0, 1)")));
    }
    if e.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("peak search input".into()));
    }
    if e.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("energies must be strictly increasing"));
    }
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    if y_max > 0.0 {
        let min_prominence = threshold * y_max;
        for (left, right) in local_maxima(y) {
            let i = (left + right) / 2;
            let prominence = prominence(y, i);
            if prominence < min_prominence {
                continue;
            }
            let (location, height) = if left == right {
                refine(e, y, i)
            } else {
                (0.5 * (e[left] + e[right]), y[i])
            };
            peaks.push(Peak {
                location,
                height,
                prominence,
                half_width: half_width(e, y, left, right, y[i] - 0.5 * prominence),
            });
        }
    }
    Ok(PeakReport {
        peaks,
        threshold,
        meta: None,
    })
}

/// Index runs `[left, right]` of strict local maxima (flat tops allowed),
/// excluding the end points of the curve.
fn local_maxima(y: &[f64]) -> Vec<(usize, usize)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i - 1] < y[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && y[ahead] == y[i] {
                ahead += 1;
            }
            if y[ahead] < y[i] {
                out.push((i, ahead - 1));
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Height above the higher of the two bases, each base being the lowest point
/// between the peak and the nearest strictly higher sample (or the curve end).
fn prominence(y: &[f64], i: usize) -> f64 {
    let top = y[i];
    let mut left_min = top;
    for &v in y[..i].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &y[i + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

fn refine(e: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    let (x0, x1, x2) = (e[i - 1], e[i], e[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d01 = x1 - x0;
    let d21 = x1 - x2;
    let den = d01 * (y1 - y2) - d21 * (y1 - y0);
    if den == 0.0 {
        return (x1, y1);
    }
    let num = d01 * d01 * (y1 - y2) - d21 * d21 * (y1 - y0);
    let x = (x1 - 0.5 * num / den).clamp(x0, x2);
    // Lagrange form evaluated at the vertex.
    let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    (x, y0 * l0 + y1 * l1 + y2 * l2)
}

/// Half the width of the curve at `level`, linearly interpolated.
fn half_width(e: &[f64], y: &[f64], left: usize, right: usize, level: f64) -> f64 {
    let mut l = left;
    while l > 0 && y[l] > level {
        l -= 1;
    }
    let x_left = if y[l] < level {
        e[l] + (level - y[l]) / (y[l + 1] - y[l]) * (e[l + 1] - e[l])
    } else {
        e[l]
    };
    let mut r = right;
    while r + 1 < y.len() && y[r] > level {
        r += 1;
    }
    let x_right = if y[r] < level {
        e[r] - (level - y[r]) / (y[r - 1] - y[r]) * (e[r] - e[r - 1])
    } else {
        e[r]
    };
    let w = 0.5 * (x_right - x_left);
    if w > 0.0 {
        w
    } else {
        0.5 * (e[right.min(e.len() - 1)] - e[left.saturating_sub(1)]).abs().max(f64::MIN_POSITIVE)
    }
}

/// Outcome of [`match_peaks`]; indices refer to the inputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MatchTable {
    /// `(peak index, reference index, |distance|)`.
    pub matched: Vec<(usize, usize, f64)>,
    pub missed: Vec<usize>,
    pub spurious: Vec<usize>,
}

/// Greedy one-to-one matching: closest pairs within `tol` are taken first.
pub fn match_peaks(found: &[f64], reference: &[f64], tol: f64) -> Result<MatchTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!("match tolerance {tol} must be > 0")));
    }
    let mut candidates = Vec::new();
    for (p, x) in found.iter().enumerate() {
        for (r, y) in reference.iter().enumerate() {
            let d = (x - y).abs();
            if d <= tol {
                candidates.push((d, p, r));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut peak_used = vec![false; found.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut table = MatchTable::default();
    for (d, p, r) in candidates {
        if !peak_used[p] && !ref_used[r] {
            peak_used[p] = true;
            ref_used[r] = true;
            table.matched.push((p, r, d));
        }
    }
    table.matched.sort_by_key(|m| m.0);
    table.missed = (0..reference.len()).filter(|&r| !ref_used[r]).collect();
    table.spurious = (0..found.len()).filter(|&p| !peak_used[p]).collect();
    Ok(table)
}

/// Location error estimate or bound for one peak.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyBound {
    pub shift_bound: f64,
    /// Overlap weights used: `[D0, D1]` or `[D_ij, D1, D2]`.
    pub weights: Vec<f64>,
    /// Distances to the neighbouring peaks.
    pub neighbor_gaps: Vec<f64>,
    /// `min` of the neighbour distances, which no shift can reach.
    pub hard_cap: Option<f64>,
}

/// `D1 (E1 - E0) / D0`: how far the first excited level can drag the
/// ground-state peak of a two-level energy scan.
pub fn ground_peak_shift_bound(d0: f64, d1: f64, e0: f64, e1: f64) -> Result<AccuracyBound> {
    if [d0, d1, e0, e1].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("shift bound input".into()));
    }
    if d1 < 0.0 || d0 <= d1 {
        return Err(Error::invalid(format!("bound needs d0 > d1 >= 0 (got {d0}, {d1})")));
    }
    if e1 <= e0 {
        return Err(Error::invalid(format!("bound needs e1 > e0 (got {e0}, {e1})")));
    }
    Ok(AccuracyBound {
        shift_bound: d1 * (e1 - e0) / d0,
        weights: vec![d0, d1],
        neighbor_gaps: vec![e1 - e0],
        hard_cap: Some(e1 - e0),
    })
}

/// Three-peak estimate of `|E - Delta_ij|` with neighbours at `delta1 < delta_ij < delta2`.
pub fn gap_peak_shift_estimate(
    d_ij: f64,
    d1: f64,
    d2: f64,
    delta_ij: f64,
    delta1: f64,
    delta2: f64,
    a: f64,
) -> Result<AccuracyBound> {
    if [d_ij, d1, d2, delta_ij, delta1, delta2, a].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("shift estimate input".into()));
    }
    if !(delta1 < delta_ij && delta_ij < delta2) {
        return Err(Error::invalid(format!(
            "neighbours must bracket the peak: {delta1} < {delta_ij} < {delta2}"
        )));
    }
    if a <= 0.0 || d_ij <= 0.0 || d1 < 0.0 || d2 < 0.0 {
        return Err(Error::invalid("weights must be nonnegative, d_ij and a positive"));
    }
    let (g1, g2) = (delta_ij - delta1, delta2 - delta_ij);
    let w1 = (-(g1 * g1) / (4.0 * a * a)).exp();
    let w2 = (-(g2 * g2) / (4.0 * a * a)).exp();
    let estimate = ((-d1 * g1 * w1 + d2 * g2 * w2) / (d1 * w1 + d2 * w2 + d_ij)).abs();
    Ok(AccuracyBound {
        shift_bound: estimate,
        weights: vec![d_ij, d1, d2],
        neighbor_gaps: vec![g1, g2],
        hard_cap: Some(g1.min(g2)),
    })
}

/// `true` when a peak found at `location` is closer to `delta_ij` than either neighbour is.
pub fn within_hard_caps(location: f64, delta_ij: f64, delta1: Option<f64>, delta2: Option<f64>) -> bool {
    let shift = (location - delta_ij).abs();
    delta1.is_none_or(|d| shift < delta_ij - d) && delta2.is_none_or(|d| shift < d - delta_ij)
}
