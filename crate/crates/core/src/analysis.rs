//! Stability verdicts, root locus, step-response metrics and the
//! force-current curve.

use serde::{Deserialize, Serialize};

use crate::numcore::{poly_roots, sort_roots, Complex64, TransferFunction};
use crate::plant::{magnetic_force, MaglevParams};
use crate::sim::SimTrace;
use crate::{Error, Result};

/// Poles with real part at or above `-STABILITY_MARGIN` count as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Thresholds used by [`step_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConventions {
    /// Settling band half-width as a fraction of the final value.
    pub settling_band: f64,
    pub rise_low: f64,
    pub rise_high: f64,
    /// Fraction of the trace, at its end, averaged for the steady state.
    pub steady_window: f64,
    /// Measure the step from the first sample instead of from zero. The
    /// reported steady-state value stays absolute.
    pub relative_to_initial: bool,
}

impl Default for MetricConventions {
    fn default() -> Self {
        MetricConventions {
            settling_band: 0.02,
            rise_low: 0.1,
            rise_high: 0.9,
            steady_window: 0.05,
            relative_to_initial: false,
        }
    }
}

impl MetricConventions {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.settling_band > 0.0 && self.settling_band < 0.5) {
            return Err(Error::invalid(format!(
                "settling band must lie in (0, 50)%, got {}%",
                100.0 * self.settling_band
            )));
        }
        if !(open(self.rise_low) && open(self.rise_high) && self.rise_low < self.rise_high) {
            return Err(Error::invalid("rise thresholds must satisfy 0 < low < high < 1"));
        }
        if !(self.steady_window > 0.0 && self.steady_window <= 1.0) {
            return Err(Error::invalid("steady-state window must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Step-response figures of merit. Times are measured from the first
/// sample of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Low-to-high threshold crossing time, s. `None` if the high threshold
    /// is never reached.
    pub rise_time: Option<f64>,
    /// Time of the last entry into the settling band, s. `None` if the
    /// trace ends outside the band.
    pub settling_time: Option<f64>,
    /// `(peak - final) / final * 100`, floored at 0. The peak is searched
    /// outside the steady-state window.
    pub percent_overshoot: f64,
    /// Peak excursion beyond the final value, in signal units.
    pub max_overshoot: f64,
    /// Mean over the steady-state window.
    pub steady_state_value: f64,
    /// Set when the final value is zero. Percent overshoot is then reported
    /// as 0, and the settling band is taken relative to the peak magnitude.
    pub zero_final: bool,
}

/// Metrics of a named trace channel under the default conventions.
pub fn step_metrics(trace: &SimTrace, channel: &str) -> Result<StepMetrics> {
    step_metrics_with(trace, channel, &MetricConventions::default())
}

pub fn step_metrics_with(trace: &SimTrace, channel: &str, conv: &MetricConventions) -> Result<StepMetrics> {
    let y = trace
        .channel(channel)
        .ok_or_else(|| Error::domain(format!("trace has no channel `{channel}`")))?;
    step_metrics_samples(&trace.t, y, conv)
}

/// Linear interpolation of the time at which the segment `k-1 -> k` reaches
/// `level`.
fn crossing(t: &[f64], w: &[f64], k: usize, level: f64) -> f64 {
    if k == 0 {
        return t[0];
    }
    let (w0, w1) = (w[k - 1], w[k]);
    let frac = if w1 == w0 { 1.0 } else { (level - w0) / (w1 - w0) };
    t[k - 1] + frac * (t[k] - t[k - 1])
}

/// Metrics of raw samples `y(t)`.
pub fn step_metrics_samples(t: &[f64], y: &[f64], conv: &MetricConventions) -> Result<StepMetrics> {
    conv.validate()?;
    if t.len() != y.len() {
        return Err(Error::domain("time and value channels differ in length"));
    }
    if t.len() < 2 {
        return Err(Error::domain("trace too short for step metrics"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("trace contains non-finite samples"));
    }
    if conv.relative_to_initial && y[0] != 0.0 {
        let y0 = y[0];
        let shifted: Vec<f64> = y.iter().map(|v| v - y0).collect();
        let plain = MetricConventions {
            relative_to_initial: false,
            ..*conv
        };
        let mut m = step_metrics_samples(t, &shifted, &plain)?;
        m.steady_state_value += y0;
        return Ok(m);
    }
    let n = y.len();
    let t0 = t[0];
    let span = t[n - 1] - t0;

    let window = ((conv.steady_window * n as f64).ceil() as usize).clamp(1, n);
    let final_value = y[n - window..].iter().sum::<f64>() / window as f64;
    let peak_abs = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let zero_final = final_value == 0.0 || final_value.abs() <= 1e-12 * peak_abs;
    if zero_final {
        let band = conv.settling_band * peak_abs;
        let settling_time = settling(t, y, final_value, band).map(|ts| ts - t0);
        let max_overshoot = y.iter().fold(0.0f64, |m, v| m.max((v - final_value).abs()));
        return Ok(StepMetrics {
            rise_time: None,
            settling_time,
            percent_overshoot: 0.0,
            max_overshoot,
            steady_state_value: final_value,
            zero_final: true,
        });
    }

    // Work in the direction of the final value so one code path handles
    // negative steps.
    let dir = final_value.signum();
    let w: Vec<f64> = y.iter().map(|v| v * dir).collect();
    let wf = final_value.abs();

    let first_reach = |level: f64| w.iter().position(|&v| v >= level).map(|k| crossing(t, &w, k, level));
    let rise_time = match (first_reach(conv.rise_low * wf), first_reach(conv.rise_high * wf)) {
        (Some(lo), Some(hi)) => Some(hi - lo),
        _ => None,
    };
    if let Some(rise) = rise_time {
        if 10.0 * rise > span {
            return Err(Error::domain(format!(
                "trace spans {span} s, less than 10x its rise time {rise} s"
            )));
        }
    }

    // The peak is taken before the steady-state window, so a response still
    // creeping upward at the end of the trace shows no overshoot.
    let transient = if window < n { &w[..n - window] } else { &w[..] };
    let peak = transient.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Excursions at rounding level (a window mean of equal samples can sit
    // an ulp below them) count as none.
    let excess = peak - wf;
    let max_overshoot = if excess > 1e-12 * wf { excess } else { 0.0 };
    let percent_overshoot = 100.0 * max_overshoot / wf;
    let settling_time = settling(t, &w, wf, conv.settling_band * wf).map(|ts| ts - t0);

    Ok(StepMetrics {
        rise_time,
        settling_time,
        percent_overshoot,
        max_overshoot,
        steady_state_value: final_value,
        zero_final: false,
    })
}

/// Absolute time of the last entry into `|w - target| <= band`, or `None`
/// when the last sample is outside.
fn settling(t: &[f64], w: &[f64], target: f64, band: f64) -> Option<f64> {
    let n = w.len();
    let outside = |k: usize| (w[k] - target).abs() > band;
    match (0..n).rev().find(|&k| outside(k)) {
        None => Some(t[0]),
        Some(k) if k + 1 == n => None,
        Some(k) => {
            let edge = if w[k] > target { target + band } else { target - band };
            let (w0, w1) = (w[k], w[k + 1]);
            let frac = if w1 == w0 { 0.0 } else { (edge - w0) / (w1 - w0) };
            Some(t[k] + frac.clamp(0.0, 1.0) * (t[k + 1] - t[k]))
        }
    }
}

/// Pole list and stability verdict of a transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// All poles, sorted by real part.
    pub poles: Vec<Complex64>,
    /// The poles that violate the strict left-half-plane condition.
    pub offending: Vec<Complex64>,
}

/// Stable iff every pole has real part below `-1e-9`.
pub fn is_stable(g: &TransferFunction) -> StabilityReport {
    let mut poles = g.poles();
    sort_roots(&mut poles);
    let offending: Vec<Complex64> = poles.iter().copied().filter(|z| z.re >= -STABILITY_MARGIN).collect();
    StabilityReport {
        stable: offending.is_empty(),
        poles,
        offending,
    }
}

/// Closed-loop root sets of `den + K num` over a gain sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RootLocusData {
    pub gains: Vec<f64>,
    /// `branches[k][j]`: root on branch `j` at `gains[k]`.
    pub branches: Vec<Vec<Complex64>>,
}

impl RootLocusData {
    /// Root sequence of one branch across all gains.
    pub fn branch(&self, j: usize) -> Vec<Complex64> {
        self.branches.iter().map(|roots| roots[j]).collect()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.first().map_or(0, Vec::len)
    }
}

/// `count` logarithmically spaced gains from `lo` to `hi`.
pub fn log_gains(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (ratio * k as f64).exp()).collect()
}

/// Pairs `roots` with `prev` so the summed displacement is minimal
/// (exhaustively for up to six roots, greedily beyond).
fn match_roots(prev: &[Complex64], roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    if n <= 6 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = p.iter().enumerate().map(|(j, &k)| (roots[k] - prev[j]).norm()).sum();
            if cost < best_cost {
                best_cost = cost;
                best.copy_from_slice(p);
            }
        });
        best.iter().map(|&k| roots[k]).collect()
    } else {
        let mut free: Vec<Option<Complex64>> = roots.into_iter().map(Some).collect();
        prev.iter()
            .map(|p| {
                let (k, _) = free
                    .iter()
                    .enumerate()
                    .filter_map(|(k, z)| z.map(|z| (k, (z - p).norm())))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("as many roots as branches");
                free[k].take().unwrap()
            })
            .collect()
    }
}

fn permute(p: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for j in k..p.len() {
        p.swap(k, j);
        permute(p, k + 1, visit);
        p.swap(k, j);
    }
}

/// Root locus of the unity-feedback loop around `K g`.
pub fn root_locus(g: &TransferFunction, gains: &[f64]) -> Result<RootLocusData> {
    if gains.is_empty() {
        return Err(Error::domain("root locus needs at least one gain"));
    }
    if gains.iter().any(|&k| !(k > 0.0 && k.is_finite())) || gains.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "root locus gains must be positive and strictly ascending",
        ));
    }
    let order = g.den().degree();
    let mut branches: Vec<Vec<Complex64>> = Vec::with_capacity(gains.len());
    for &k in gains {
        let roots = poly_roots(&g.characteristic(k))?;
        if roots.len() != order {
            return Err(Error::domain(format!(
                "closed-loop degree drops at K = {k}; improper cancellation"
            )));
        }
        let matched = match branches.last() {
            None => roots,
            Some(prev) => match_roots(prev, roots),
        };
        branches.push(matched);
    }
    Ok(RootLocusData {
        gains: gains.to_vec(),
        branches,
    })
}

/// `(i, f(i, z_fixed))` over a current grid.
pub fn force_current_curve(p: &MaglevParams, z_fixed: f64, i_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    i_grid
        .iter()
        .map(|&i| magnetic_force(i, z_fixed, p).map(|f| (i, f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Polynomial;
    use approx::assert_abs_diff_eq;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, horizon: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (horizon / dt).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        (t, y)
    }

    #[test]
    fn first_order_response() {
        let (t, y) = sampled(|t| 1.0 - (-t).exp(), 1e-3, 40.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert_abs_diff_eq!(m.rise_time.unwrap(), 9f64.ln(), epsilon = 1e-6);
        assert_eq!(m.percent_overshoot, 0.0);
        assert_abs_diff_eq!(m.steady_state_value, 1.0, epsilon = 1e-12);
        // 2% band: 1 - e^{-t} = 0.98
        assert_abs_diff_eq!(m.settling_time.unwrap(), 50f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn constant_trace() {
        let (t, y) = sampled(|_| 1.0, 0.01, 1.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert_eq!(m.rise_time, Some(0.0));
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.percent_overshoot, 0.0);
        assert_eq!(m.steady_state_value, 1.0);
    }

    #[test]
    fn negative_step_mirrors_positive() {
        let (t, y) = sampled(|t| -(1.0 - (-t).exp()), 1e-3, 40.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert_abs_diff_eq!(m.rise_time.unwrap(), 9f64.ln(), epsilon = 1e-6);
        assert!(m.steady_state_value < 0.0);
    }

    #[test]
    fn too_short_and_never_settling() {
        let (t, y) = sampled(|t| 1.0 - (-t).exp(), 1e-3, 5.0);
        assert!(step_metrics_samples(&t, &y, &MetricConventions::default()).is_err());

        let (t, y) = sampled(|t| if t < 1.0 { t } else { 1.0 + 0.5 * (40.0 * t).sin() }, 1e-3, 30.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert_eq!(m.settling_time, None);
        assert!(step_metrics_samples(&t[..1], &y[..1], &MetricConventions::default()).is_err());
    }

    #[test]
    fn zero_final_is_flagged() {
        let (t, y) = sampled(|t| t * (-t).exp(), 1e-3, 40.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert!(m.zero_final || m.steady_state_value.abs() < 1e-12);
        let (t, y) = sampled(|t| if t < 1.0 { t } else { 0.0 }, 1e-2, 10.0);
        let m = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        assert!(m.zero_final);
        assert_eq!(m.percent_overshoot, 0.0);
        assert_abs_diff_eq!(m.max_overshoot, 0.99, epsilon = 1e-12);
    }

    #[test]
    fn missing_channel_is_an_error() {
        let trace = SimTrace::new(0.1, vec![]);
        assert!(step_metrics(&trace, "ym").is_err());
    }

    #[test]
    fn relative_metrics_measure_from_the_first_sample() {
        let t: Vec<f64> = (0..=3000).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|&t| 5.0 + 1.0 - (-t).exp()).collect();
        let conv = MetricConventions {
            relative_to_initial: true,
            ..MetricConventions::default()
        };
        let m = step_metrics_samples(&t, &y, &conv).unwrap();
        assert!((m.rise_time.unwrap() - 9f64.ln()).abs() < 1e-3);
        assert!((m.steady_state_value - 6.0).abs() < 1e-6);
        assert_eq!(m.percent_overshoot, 0.0);
        let absolute = step_metrics_samples(&t, &y, &MetricConventions::default()).unwrap();
        // From zero, 10% is met at t = 0 and 90% (5.4) at ln(1 / 0.6).
        assert!((absolute.rise_time.unwrap() - (1.0f64 / 0.6).ln()).abs() < 1e-3);
    }

    #[test]
    fn conventions_validated() {
        let bad = MetricConventions {
            settling_band: 0.6,
            ..MetricConventions::default()
        };
        assert!(bad.validate().is_err());
        let bad = MetricConventions {
            rise_low: 0.9,
            rise_high: 0.1,
            ..MetricConventions::default()
        };
        assert!(bad.validate().is_err());
    }

    fn maglev_tf() -> TransferFunction {
        TransferFunction::new(
            Polynomial::constant(-280.0),
            Polynomial::from_roots(&[-29.0, -56.0, 56.0]),
        )
        .unwrap()
    }

    #[test]
    fn maglev_is_unstable() {
        let rep = is_stable(&maglev_tf());
        assert!(!rep.stable);
        assert_eq!(rep.offending.len(), 1);
        assert_abs_diff_eq!(rep.offending[0].re, 56.0, epsilon = 1e-9);
        let re: Vec<f64> = rep.poles.iter().map(|z| z.re).collect();
        assert_abs_diff_eq!(re[0], -56.0, epsilon = 1e-9);
        assert_abs_diff_eq!(re[1], -29.0, epsilon = 1e-9);
    }

    #[test]
    fn simple_verdicts() {
        let lag = TransferFunction::from_descending(&[1.0], &[1.0, 1.0]).unwrap();
        assert!(is_stable(&lag).stable);
        let integrator = TransferFunction::from_descending(&[1.0], &[1.0, 0.0]).unwrap();
        assert!(!is_stable(&integrator).stable);
    }

    #[test]
    fn root_locus_examples() {
        let lag = TransferFunction::from_descending(&[1.0], &[1.0, 1.0]).unwrap();
        let rl = root_locus(&lag, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(rl.branches[0][0].re, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rl.branches[1][0].re, -3.0, epsilon = 1e-12);

        let rl = root_locus(&maglev_tf(), &log_gains(1e-9, 1e3, 200)).unwrap();
        assert!(rl.branches.iter().all(|b| b.len() == 3));
        let mut start = rl.branches[0].clone();
        sort_roots(&mut start);
        for (z, want) in start.iter().zip([-56.0, -29.0, 56.0]) {
            assert!((z - Complex64::new(want, 0.0)).norm() < 1e-6);
        }
        assert!(root_locus(&lag, &[2.0, 1.0]).is_err());
        assert!(root_locus(&lag, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn force_curve_examples() {
        let p = MaglevParams {
            c: 0.035316,
            ..MaglevParams::default()
        };
        let curve = force_current_curve(&p, 0.06, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert_eq!(curve[0], (0.0, 0.0));
        assert_abs_diff_eq!(curve[2].1, 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(curve[3].1 / curve[2].1, 4.0, epsilon = 1e-12);
        assert!(force_current_curve(&p, 0.0, &[1.0]).is_err());
    }
}
