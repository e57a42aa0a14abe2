//! Harmonic-balance steady state of the driven Duffing mode.
//!
//! At first order the response to a drive of complex amplitude `a~` at
//! `omega` is the shifted Lorentzian
//!
//! ```text
//! x~ = a~ / (omega0^2 (1 + eps) - omega^2 - i gamma omega0),   eps = 3 beta |x~|^2
//! ```
//!
//! so the squared modulus `u = |x~|^2` solves the cubic
//! `u [(omega0^2 (1 + 3 beta u) - omega^2)^2 + gamma^2 omega0^2] = amp^2`.
//! The cubic is solved by bisection on its monotone pieces, which stays
//! accurate right up to the saddle-node where two roots merge.

use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::{epsilon, OscillatorParams};

/// Relative residual accepted for a returned root.
pub const RESIDUAL_RTOL: f64 = 1e-10;
/// Absolute tolerance, in units of `omega0`, for saddle-node frequencies.
pub const SADDLE_TOL: f64 = 1e-9;
const SADDLE_SCAN_POINTS: usize = 4000;

/// One steady-state solution at a drive frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub omega: f64,
    /// Phasor modulus `|x~|`, m.
    pub amplitude: f64,
    pub stable: bool,
}

/// Drive-frequency window holding three steady states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistableRegion {
    /// Where the lower branch ends; a downward sweep jumps up here.
    pub omega_lower: f64,
    /// Where the upper branch ends; an upward sweep jumps down here.
    pub omega_upper: f64,
}

impl BistableRegion {
    pub fn width(&self) -> f64 {
        self.omega_upper - self.omega_lower
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.omega_lower && omega <= self.omega_upper
    }
}

/// The amplitude equation `G(u) - amp^2` at one drive frequency.
#[derive(Debug, Clone, Copy)]
struct AmplitudeCubic {
    c: f64,
    d: f64,
    g2: f64,
    amp2: f64,
}

impl AmplitudeCubic {
    fn new(params: &OscillatorParams, amp: f64, omega: f64) -> Self {
        let w0 = params.omega0();
        let g = params.gamma() * w0;
        Self {
            c: 3.0 * params.beta() * w0 * w0,
            d: w0 * w0 - omega * omega,
            g2: g * g,
            amp2: amp * amp,
        }
    }

    #[inline]
    fn value(&self, u: f64) -> f64 {
        let detune = self.c * u + self.d;
        u * (detune * detune + self.g2) - self.amp2
    }

    /// `dG/du`; positive on stable roots.
    #[inline]
    fn slope(&self, u: f64) -> f64 {
        3.0 * self.c * self.c * u * u + 4.0 * self.c * self.d * u + self.d * self.d + self.g2
    }

    /// Interior critical points of `G` in increasing order.
    fn critical_points(&self) -> Vec<f64> {
        if self.c == 0.0 {
            return Vec::new();
        }
        let disc = self.d * self.d - 3.0 * self.g2;
        if disc <= 0.0 || self.d >= 0.0 {
            return Vec::new();
        }
        let root = disc.sqrt();
        let lo = (-2.0 * self.d - root) / (3.0 * self.c);
        let hi = (-2.0 * self.d + root) / (3.0 * self.c);
        [lo, hi].into_iter().filter(|&u| u > 0.0).collect()
    }

    /// Bisection to floating-point resolution on a bracket with a sign change.
    fn bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut f_lo = self.value(lo);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.value(mid);
            if (f_mid < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn validate_drive(amp: f64, omega: f64) -> Result<()> {
    ensure_finite("drive amplitude", amp)?;
    ensure_finite("drive frequency", omega)?;
    if amp < 0.0 {
        return Err(invalid(format!("drive amplitude must be >= 0, got {amp}")));
    }
    if omega <= 0.0 {
        return Err(invalid(format!("drive frequency must be positive, got {omega}")));
    }
    Ok(())
}

/// All steady-state amplitudes at one drive frequency, ascending.
///
/// One entry outside the bistable window, three inside it; of three roots
/// only the middle one is unstable.
pub fn response_amplitudes(
    params: &OscillatorParams,
    amp: f64,
    omega: f64,
) -> Result<Vec<BranchPoint>> {
    validate_drive(amp, omega)?;
    let cubic = AmplitudeCubic::new(params, amp, omega);
    if amp == 0.0 {
        return Ok(vec![BranchPoint {
            omega,
            amplitude: 0.0,
            stable: true,
        }]);
    }
    if cubic.c == 0.0 {
        let amplitude = amp / cubic.d.hypot(cubic.g2.sqrt());
        return Ok(vec![BranchPoint {
            omega,
            amplitude,
            stable: true,
        }]);
    }

    let u_linear_max = cubic.amp2 / cubic.g2;
    let u_max = 100.0 * u_linear_max;
    let mut edges = vec![0.0];
    edges.extend(cubic.critical_points().into_iter().filter(|&u| u < u_max));
    edges.push(u_max);

    let mut points = Vec::with_capacity(3);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (cubic.value(a), cubic.value(b));
        // A zero at an edge counts as negative so a tangency is never split
        // into two roots.
        if (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let u = cubic.bisect(a, b);
        let residual = cubic.value(u).abs();
        // Tolerance relative to the size of the terms that cancel at the
        // root, so far-detuned or very strong drives are judged fairly.
        let detune = (cubic.c * u).abs() + cubic.d.abs();
        let scale = cubic.amp2.max(u * (detune * detune + cubic.g2));
        if residual > RESIDUAL_RTOL * scale + cubic.slope(u).abs() * u * 1e-14 {
            return Err(Error::Internal(format!(
                "amplitude root residual {residual:e} exceeds tolerance"
            )));
        }
        points.push(BranchPoint {
            omega,
            amplitude: u.sqrt(),
            stable: cubic.slope(u) > 0.0,
        });
    }
    match points.len() {
        1 | 3 => Ok(points),
        n => Err(Error::Internal(format!(
            "amplitude cubic returned {n} roots at omega = {omega}"
        ))),
    }
}

/// First-order complex response `x~` for a given phasor
/// modulus (which sets the frequency shift).
pub fn branch_phasor(
    params: &OscillatorParams,
    drive_phasor: Complex64,
    omega: f64,
    amplitude: f64,
) -> Result<Complex64> {
    let eps = epsilon(params, amplitude)?;
    Ok(lorentzian(params, drive_phasor, omega, eps))
}

/// `a~ / (omega0^2 (1 + eps) - omega^2 - i gamma omega0)`.
pub fn lorentzian(params: &OscillatorParams, drive_phasor: Complex64, omega: f64, eps: f64) -> Complex64 {
    let w0 = params.omega0();
    let denom = Complex64::new(w0 * w0 * (1.0 + eps) - omega * omega, -params.gamma() * w0);
    drive_phasor / denom
}

/// Preferred oscillation frequency `omega0 (1 + eps/2)` at a given amplitude.
pub fn backbone_frequency(params: &OscillatorParams, amplitude: f64) -> Result<f64> {
    Ok(params.omega0() * (1.0 + epsilon(params, amplitude)? / 2.0))
}

/// Largest steady-state amplitude, `amp / (gamma omega0)`, reached on the
/// backbone.
pub fn peak_amplitude(params: &OscillatorParams, amp: f64) -> f64 {
    amp / (params.gamma() * params.omega0())
}

/// Drive amplitude whose resonance peak reaches nonlinearity strength `eps`.
pub fn drive_for_peak_epsilon(params: &OscillatorParams, eps: f64) -> Result<f64> {
    let a = crate::model::amplitude_for_epsilon(params, eps)?;
    Ok(a * params.gamma() * params.omega0())
}

fn root_count(params: &OscillatorParams, amp: f64, omega: f64) -> Result<usize> {
    Ok(response_amplitudes(params, amp, omega)?.len())
}

/// Saddle-node frequencies bracketing the three-solution window, or `None`
/// below the bistability threshold.
pub fn bistable_region(params: &OscillatorParams, amp: f64) -> Result<Option<BistableRegion>> {
    ensure_finite("drive amplitude", amp)?;
    if amp < 0.0 {
        return Err(invalid(format!("drive amplitude must be >= 0, got {amp}")));
    }
    if amp == 0.0 || params.beta() == 0.0 {
        return Ok(None);
    }
    let w0 = params.omega0();
    let g = params.gamma() * w0;
    // Three roots need omega0^2 - omega^2 < -sqrt(3) gamma omega0, and every
    // fold satisfies |omega0^2 - omega^2| <= 3 * 3 beta omega0^2 |x~|^2.
    let lo = (w0 * w0 + 3f64.sqrt() * g).sqrt();
    let eps_peak = epsilon(params, peak_amplitude(params, amp))?;
    let hi = w0 * (1.0 + 3.0 * eps_peak).sqrt();
    if hi <= lo {
        return Ok(None);
    }

    let step = (hi - lo) / SADDLE_SCAN_POINTS as f64;
    let mut first = None;
    let mut last = None;
    for i in 0..=SADDLE_SCAN_POINTS {
        let omega = lo + step * i as f64;
        if root_count(params, amp, omega)? == 3 {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    let (Some(first), Some(last)) = (first, last) else {
        return Ok(None);
    };

    let tol = SADDLE_TOL * w0;
    let refine = |mut outside: f64, mut inside: f64| -> Result<f64> {
        while (inside - outside).abs() > tol {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if root_count(params, amp, mid)? == 3 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let inside_lo = lo + step * first as f64;
    let inside_hi = lo + step * last as f64;
    let omega_lower = refine(inside_lo - step, inside_lo)?;
    let omega_upper = refine(inside_hi + step, inside_hi)?;
    Ok(Some(BistableRegion {
        omega_lower,
        omega_upper,
    }))
}

/// Branches followed by ideal upward and downward sweeps, pointwise on
/// `omega_grid` (returned in grid order).
///
/// Inside the bistable window an upward sweep sits on the largest root and a
/// downward sweep on the smallest; elsewhere the single root is shared.
pub fn hysteresis_cycle(
    params: &OscillatorParams,
    amp: f64,
    omega_grid: &[f64],
) -> Result<(Vec<BranchPoint>, Vec<BranchPoint>)> {
    check_monotonic(omega_grid)?;
    let mut up = Vec::with_capacity(omega_grid.len());
    let mut down = Vec::with_capacity(omega_grid.len());
    for &omega in omega_grid {
        let roots = response_amplitudes(params, amp, omega)?;
        up.push(*roots.last().expect("at least one root"));
        down.push(roots[0]);
    }
    Ok((up, down))
}

pub(crate) fn check_monotonic(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("frequency grid is empty"));
    }
    for &w in grid {
        ensure_finite("grid frequency", w)?;
        if w <= 0.0 {
            return Err(invalid(format!("grid frequencies must be positive, got {w}")));
        }
    }
    if grid.len() > 1 {
        let increasing = grid[1] > grid[0];
        let ok = grid
            .windows(2)
            .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        if !ok {
            return Err(invalid("frequency grid must be strictly monotonic"));
        }
    }
    Ok(())
}

/// Duffing coefficient implied by a resonance peak lying on the backbone:
/// `beta = 2 (peak_omega - omega0) / (3 omega0 peak_amplitude^2)`.
pub fn estimate_beta(omega0: f64, peak_omega: f64, peak_amplitude: f64) -> Result<f64> {
    ensure_finite("omega0", omega0)?;
    ensure_finite("peak frequency", peak_omega)?;
    ensure_finite("peak amplitude", peak_amplitude)?;
    if omega0 <= 0.0 {
        return Err(invalid("omega0 must be positive"));
    }
    if peak_amplitude <= 0.0 {
        return Err(invalid("peak amplitude must be positive"));
    }
    if peak_omega < omega0 {
        return Err(invalid(format!(
            "peak frequency {peak_omega} below omega0 {omega0} implies softening"
        )));
    }
    Ok(2.0 * (peak_omega - omega0) / (3.0 * omega0 * peak_amplitude * peak_amplitude))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn membrane_mode() -> OscillatorParams {
        OscillatorParams::from_frequency_q(1.057e6, 5000.0, 1e13).unwrap()
    }

    /// Independent root counter: sign changes of the residual on a dense
    /// u-grid.
    fn brute_force_root_count(p: &OscillatorParams, amp: f64, omega: f64) -> usize {
        let w0 = p.omega0();
        let g = p.gamma() * w0;
        let f = |u: f64| {
            let det = w0 * w0 * (1.0 + 3.0 * p.beta() * u) - omega * omega;
            u * (det * det + g * g) - amp * amp
        };
        let u_max = 4.0 * (amp / g).powi(2);
        let n = 200_000;
        let mut count = 0;
        let mut prev = f(0.0);
        for i in 1..=n {
            let cur = f(u_max * i as f64 / n as f64);
            if (cur > 0.0) != (prev > 0.0) {
                count += 1;
            }
            prev = cur;
        }
        count
    }

    #[test]
    fn linear_resonance_amplitude() {
        let p = membrane_mode().with_beta(0.0).unwrap();
        let amp = 40.0;
        let pts = response_amplitudes(&p, amp, p.omega0()).unwrap();
        assert_eq!(pts.len(), 1);
        let expected = amp / (p.gamma() * p.omega0());
        assert!((pts[0].amplitude - expected).abs() <= 1e-15 * expected);
        assert!(pts[0].stable);
    }

    #[test]
    fn linear_limit_matches_lorentzian() {
        let p = membrane_mode().with_beta(0.0).unwrap();
        for k in -20..=20 {
            let omega = p.omega0() + k as f64 * p.gamma();
            let pts = response_amplitudes(&p, 12.5, omega).unwrap();
            let lor = lorentzian(&p, Complex64::new(12.5, 0.0), omega, 0.0).norm();
            assert_eq!(pts.len(), 1);
            assert!((pts[0].amplitude - lor).abs() <= 4.0 * f64::EPSILON * lor);
        }
    }

    #[test]
    fn root_count_transitions_one_three_one() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 1e-3).unwrap();
        let w0 = p.omega0();
        let mut counts = Vec::new();
        let mut omega = w0 - 5.0 * p.gamma();
        while omega < w0 + 6.0 * p.gamma() {
            let n = response_amplitudes(&p, amp, omega).unwrap().len();
            let oracle = brute_force_root_count(&p, amp, omega);
            assert_eq!(n, oracle, "root count mismatch at omega - w0 = {}", omega - w0);
            if counts.last() != Some(&n) {
                counts.push(n);
            }
            omega += p.gamma() / 20.0;
        }
        assert_eq!(counts, vec![1, 3, 1]);
    }

    #[test]
    fn roots_satisfy_cubic_and_middle_is_unstable() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 1e-3).unwrap();
        let region = bistable_region(&p, amp).unwrap().unwrap();
        let omega = 0.5 * (region.omega_lower + region.omega_upper);
        let pts = response_amplitudes(&p, amp, omega).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].stable && !pts[1].stable && pts[2].stable);
        let cubic = AmplitudeCubic::new(&p, amp, omega);
        for pt in &pts {
            let r = cubic.value(pt.amplitude * pt.amplitude).abs();
            assert!(r <= RESIDUAL_RTOL * amp * amp, "residual {r}");
        }
    }

    #[test]
    fn backbone_values() {
        let p = membrane_mode();
        assert_eq!(backbone_frequency(&p, 0.0).unwrap(), p.omega0());
        let b = backbone_frequency(&p, 1e-9).unwrap();
        assert!((b / p.omega0() - (1.0 + 1.5e-5)).abs() < 1e-15);
    }

    #[test]
    fn backbone_passes_through_swept_peak() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 1e-3).unwrap();
        let step = p.gamma() / 100.0;
        let grid: Vec<f64> = (0..1500).map(|i| p.omega0() - 5.0 * p.gamma() + step * i as f64).collect();
        let (up, _) = hysteresis_cycle(&p, amp, &grid).unwrap();
        let peak = up
            .iter()
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
            .unwrap();
        let amax = peak_amplitude(&p, amp);
        let bb = backbone_frequency(&p, amax).unwrap();
        assert!((bb - peak.omega).abs() < step, "{} vs {}", bb, peak.omega);
    }

    #[test]
    fn no_bistability_for_linear_or_vanishing_drive() {
        let p = membrane_mode();
        assert!(bistable_region(&p.with_beta(0.0).unwrap(), 1e3).unwrap().is_none());
        assert!(bistable_region(&p, 0.0).unwrap().is_none());
        assert!(bistable_region(&p, 1e-6).unwrap().is_none());
    }

    #[test]
    fn stronger_drive_contains_weaker_jump_down() {
        let p = membrane_mode();
        let amp1 = drive_for_peak_epsilon(&p, 1e-3).unwrap();
        let r1 = bistable_region(&p, amp1).unwrap().unwrap();
        let r2 = bistable_region(&p, 2.0 * amp1).unwrap().unwrap();
        assert!(r2.omega_lower < r1.omega_upper && r1.omega_upper < r2.omega_upper);
        assert!(r2.width() > r1.width());
    }

    #[test]
    fn region_boundaries_match_root_count() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 2e-3).unwrap();
        let r = bistable_region(&p, amp).unwrap().unwrap();
        let d = 1e-7 * p.omega0();
        assert_eq!(root_count(&p, amp, r.omega_lower - d).unwrap(), 1);
        assert_eq!(root_count(&p, amp, r.omega_lower + d).unwrap(), 3);
        assert_eq!(root_count(&p, amp, r.omega_upper - d).unwrap(), 3);
        assert_eq!(root_count(&p, amp, r.omega_upper + d).unwrap(), 1);
    }

    #[test]
    fn hysteresis_differs_exactly_inside_window() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 1.5e-3).unwrap();
        let r = bistable_region(&p, amp).unwrap().unwrap();
        let grid: Vec<f64> = (0..400).map(|i| p.omega0() - 2.0 * p.gamma() + i as f64 * p.gamma() / 40.0).collect();
        let (up, down) = hysteresis_cycle(&p, amp, &grid).unwrap();
        for ((u, d), &w) in up.iter().zip(&down).zip(&grid) {
            if r.contains(w) {
                assert!(u.amplitude > d.amplitude);
            } else {
                assert_eq!(u.amplitude, d.amplitude);
            }
        }
        let lin = p.with_beta(0.0).unwrap();
        let (up, down) = hysteresis_cycle(&lin, amp, &grid).unwrap();
        assert_eq!(up, down);
    }

    #[test]
    fn rejects_non_monotonic_grid() {
        let p = membrane_mode();
        assert!(hysteresis_cycle(&p, 1.0, &[1.0, 3.0, 2.0]).is_err());
        assert!(hysteresis_cycle(&p, 1.0, &[]).is_err());
    }

    #[test]
    fn estimate_beta_cases() {
        assert_eq!(estimate_beta(10.0, 10.0, 1e-9).unwrap(), 0.0);
        assert!(estimate_beta(10.0, 9.0, 1e-9).is_err());
        assert!(estimate_beta(10.0, 11.0, 0.0).is_err());
    }

    #[test]
    fn estimate_beta_round_trip() {
        let p = membrane_mode();
        let amp = drive_for_peak_epsilon(&p, 1e-3).unwrap();
        let step = p.gamma() / 200.0;
        let grid: Vec<f64> = (0..3000).map(|i| p.omega0() + step * i as f64).collect();
        let (up, _) = hysteresis_cycle(&p, amp, &grid).unwrap();
        let peak = up.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).unwrap();
        let beta = estimate_beta(p.omega0(), peak.omega, peak.amplitude).unwrap();
        assert!((beta / 1e13 - 1.0).abs() < 0.05, "{beta:e}");
    }

    #[test]
    fn kilohertz_shift_at_nanometre_amplitude_gives_1e13() {
        // a few-kHz shift at a 1 MHz mode with a ~5 nm phasor
        let w0 = TAU * 1.057e6;
        let beta = estimate_beta(w0, w0 + TAU * 2.0e3, 5e-9).unwrap();
        assert!(beta > 1e12 && beta < 1e14, "{beta:e}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn roots_are_valid(eps_peak in 1e-5f64..5e-3, offset in -10.0f64..15.0) {
                let p = membrane_mode();
                let amp = drive_for_peak_epsilon(&p, eps_peak).unwrap();
                let omega = p.omega0() + offset * p.gamma();
                let pts = response_amplitudes(&p, amp, omega).unwrap();
                prop_assert!(pts.len() == 1 || pts.len() == 3);
                let cubic = AmplitudeCubic::new(&p, amp, omega);
                for w in pts.windows(2) {
                    prop_assert!(w[0].amplitude <= w[1].amplitude);
                }
                for pt in &pts {
                    let u = pt.amplitude * pt.amplitude;
                    prop_assert!(cubic.value(u).abs() <= RESIDUAL_RTOL * amp * amp);
                }
                if pts.len() == 3 {
                    prop_assert!(pts[0].stable && !pts[1].stable && pts[2].stable);
                }
            }
        }
    }
}
