//! Ziegler-Nichols ultimate-cycle identification, done analytically on the
//! closed-loop characteristic polynomial instead of by experiment.

use super::PidGains;
use crate::numcore::{poly_roots, Complex64, TransferFunction};
use crate::{Error, Result};

const SCAN_POINTS: usize = 600;
const SCAN_MIN_GAIN: f64 = 1e-6;
const SCAN_MAX_GAIN: f64 = 1e6;
const MARGINAL_TOL: f64 = 1e-8;

/// Root of the loop `den + k num` with the largest real part.
fn dominant_root(g: &TransferFunction, k: f64) -> Result<Complex64> {
    let roots = poly_roots(&g.characteristic(k))?;
    Ok(roots
        .into_iter()
        .max_by(|a, b| a.re.total_cmp(&b.re).then(a.im.abs().total_cmp(&b.im.abs())))
        .expect("characteristic polynomial has degree >= 1"))
}

/// Ultimate gain `Ku` and period `Tu` of the proportional loop around `g`.
///
/// Scans a logarithmic gain grid for a change in sign of the largest
/// closed-loop real part, then bisects until the crossing pair sits on the
/// imaginary axis within `1e-8`. Crossings through the origin (a real root)
/// do not oscillate and are skipped.
pub fn zn_ultimate_gain(g: &TransferFunction) -> Result<(f64, f64)> {
    if !g.is_strictly_proper() || g.num().is_zero() {
        return Err(Error::domain(
            "ultimate-gain search needs a strictly proper, nonzero plant",
        ));
    }
    if g.den().degree() < 2 {
        return Err(Error::NotTunable(
            "a first-order loop cannot become marginally stable".into(),
        ));
    }

    let ratio = (SCAN_MAX_GAIN / SCAN_MIN_GAIN).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let mut lo = SCAN_MIN_GAIN;
    let mut lo_re = dominant_root(g, lo)?.re;
    for k in 1..SCAN_POINTS {
        let hi = SCAN_MIN_GAIN * ratio.powi(k as i32);
        let hi_re = dominant_root(g, hi)?.re;
        if lo_re.signum() != hi_re.signum() {
            if let Some(found) = bisect(g, lo, lo_re, hi)? {
                return Ok(found);
            }
        }
        lo = hi;
        lo_re = hi_re;
    }
    Err(Error::NotTunable(format!(
        "no oscillatory stability crossing for gains in [{SCAN_MIN_GAIN:e}, {SCAN_MAX_GAIN:e}]"
    )))
}

fn bisect(g: &TransferFunction, mut a: f64, a_re: f64, mut b: f64) -> Result<Option<(f64, f64)>> {
    let a_sign = a_re.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let root = dominant_root(g, mid)?;
        if root.re.abs() < MARGINAL_TOL || (b - a) <= f64::EPSILON * mid {
            if root.re.abs() >= MARGINAL_TOL || root.im.abs() < 1e-6 {
                return Ok(None);
            }
            return Ok(Some((mid, 2.0 * std::f64::consts::PI / root.im.abs())));
        }
        if root.re.signum() == a_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(None)
}

/// Classic Ziegler-Nichols PID table: `Kp = 0.6 Ku`, `Ki = 1.2 Ku / Tu`,
/// `Kd = 0.075 Ku Tu`.
pub fn zn_pid_gains(ku: f64, tu: f64) -> PidGains {
    PidGains::new(0.6 * ku, 1.2 * ku / tu, 0.075 * ku * tu)
}
