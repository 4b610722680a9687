//! Single-mode constituent states and their photon-number statistics.
//!
//! Every state here is pure and real-parameterised: coherent amplitudes and
//! squeeze factors are real numbers. Analytic moments are available for all
//! variants; [`SingleModeState::fock_amplitudes`] gives an independent
//! truncated Fock expansion whose numerical moments can be compared against
//! them.
//!
//! # Squeezed coherent convention
//!
//! `SqueezedCoherent { alpha, r }` is `D(alpha) S(r) |0>`: squeeze first, then
//! displace. The squeezing acts on the phase quadrature relative to the real
//! displacement, i.e. the squeezed core has `c_2 / c_0 = +tanh(r) / sqrt(2)`.
//! With that choice
//!
//! ```text
//! <n>        = alpha^2 + sinh^2 r
//! Var(n)     = alpha^2 e^{2r} + 2 sinh^2 r cosh^2 r
//! |<0|psi>|^2 = exp(-alpha^2 (1 - tanh r)) / cosh r
//! ```
//!
//! A plain `SqueezedVacuum { r }` uses `c_2 / c_0 = -tanh(r) / sqrt(2)`; the
//! sign does not affect any moment but matters when the state interferes with
//! a coherent beam in the optical simulator.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tail mass accepted by [`SingleModeState::fock_amplitudes`] and used as the
/// target of the adaptive cutoff.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Normalisation tolerance for explicit superpositions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

const MAX_AUTO_CUTOFF: usize = 1 << 22;

/// The non-vacuum constituent `|psi>` of a NOON-like probe.
#[derive(Debug, Clone, PartialEq)]
pub enum SingleModeState {
    Fock {
        n: u32,
    },
    Coherent {
        alpha: f64,
    },
    SqueezedVacuum {
        r: f64,
    },
    SqueezedCoherent {
        alpha: f64,
        r: f64,
    },
    /// Amplitudes indexed by photon number.
    FockSuperposition {
        amps: Vec<Complex64>,
    },
}

/// Photon-number statistics of a single-mode state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `<n>`
    pub mean_n: f64,
    /// `<n^2>`
    pub mean_n2: f64,
    /// `|<psi|0>|^2`
    pub vacuum_prob: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.mean_n2 - self.mean_n * self.mean_n
    }

    /// `R = <n^2> / <n>^2`.
    pub fn r_ratio(&self) -> Result<f64> {
        if self.mean_n <= 0.0 {
            return Err(Error::ZeroPhotonState);
        }
        Ok(self.mean_n2 / (self.mean_n * self.mean_n))
    }
}

/// Truncated Fock expansion `c_0 .. c_{n_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub amps: Vec<Complex64>,
    /// Probability mass beyond `n_max`.
    pub tail_mass: f64,
}

impl FockVector {
    pub fn n_max(&self) -> usize {
        self.amps.len().saturating_sub(1)
    }

    pub fn norm_sqr(&self) -> f64 {
        neumaier_sum(self.amps.iter().map(|c| c.norm_sqr()))
    }

    /// Numerical moments, renormalised by the retained mass.
    pub fn moments(&self) -> Moments {
        let norm = self.norm_sqr();
        let mean_n = neumaier_sum(
            self.amps
                .iter()
                .enumerate()
                .map(|(n, c)| n as f64 * c.norm_sqr()),
        );
        let mean_n2 = neumaier_sum(
            self.amps
                .iter()
                .enumerate()
                .map(|(n, c)| (n * n) as f64 * c.norm_sqr()),
        );
        let vacuum = self.amps.first().map_or(0.0, |c| c.norm_sqr());
        Moments {
            mean_n: mean_n / norm,
            mean_n2: mean_n2 / norm,
            vacuum_prob: vacuum / norm,
        }
    }
}

impl SingleModeState {
    pub fn fock(n: u32) -> Self {
        SingleModeState::Fock { n }
    }

    pub fn coherent(alpha: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        Ok(SingleModeState::Coherent { alpha })
    }

    /// Accepts a complex amplitude only if it is real.
    pub fn coherent_complex(alpha: Complex64) -> Result<Self> {
        if alpha.im != 0.0 {
            return Err(Error::InvalidState(format!(
                "only real coherent amplitudes are supported, got {alpha}"
            )));
        }
        Self::coherent(alpha.re)
    }

    pub fn squeezed_vacuum(r: f64) -> Result<Self> {
        ensure_finite("r", r)?;
        Ok(SingleModeState::SqueezedVacuum { r })
    }

    pub fn squeezed_coherent(alpha: f64, r: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        ensure_finite("r", r)?;
        Ok(SingleModeState::SqueezedCoherent { alpha, r })
    }

    pub fn superposition(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty superposition".into()));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm = neumaier_sum(amps.iter().map(|c| c.norm_sqr()));
        if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "superposition has squared norm {norm}, expected 1"
            )));
        }
        Ok(SingleModeState::FockSuperposition { amps })
    }

    /// Closed-form photon-number moments.
    pub fn moments(&self) -> Moments {
        match self {
            SingleModeState::Fock { n } => {
                let n = f64::from(*n);
                Moments {
                    mean_n: n,
                    mean_n2: n * n,
                    vacuum_prob: if n == 0.0 { 1.0 } else { 0.0 },
                }
            }
            SingleModeState::Coherent { alpha } => {
                let a2 = alpha * alpha;
                Moments {
                    mean_n: a2,
                    mean_n2: a2 + a2 * a2,
                    vacuum_prob: (-a2).exp(),
                }
            }
            SingleModeState::SqueezedVacuum { r } => {
                let s2 = r.sinh().powi(2);
                Moments {
                    mean_n: s2,
                    mean_n2: 3.0 * s2 * s2 + 2.0 * s2,
                    vacuum_prob: 1.0 / r.cosh(),
                }
            }
            SingleModeState::SqueezedCoherent { alpha, r } => {
                let a2 = alpha * alpha;
                let s2 = r.sinh().powi(2);
                let c2 = r.cosh().powi(2);
                let n = a2 + s2;
                Moments {
                    mean_n: n,
                    mean_n2: n * n + a2 * (2.0 * r).exp() + 2.0 * s2 * c2,
                    vacuum_prob: (-a2 * (1.0 - r.tanh())).exp() / r.cosh(),
                }
            }
            SingleModeState::FockSuperposition { amps } => FockVector {
                amps: amps.clone(),
                tail_mass: 0.0,
            }
            .moments(),
        }
    }

    /// `f = <n> / <n^2>`.
    pub fn f_factor(&self) -> Result<f64> {
        let m = self.moments();
        if m.mean_n2 <= 0.0 {
            return Err(Error::ZeroPhotonState);
        }
        Ok(m.mean_n / m.mean_n2)
    }

    /// Fock expansion up to `n_max`, rejecting tails above
    /// [`DEFAULT_TAIL_TOLERANCE`].
    pub fn fock_amplitudes(&self, n_max: usize) -> Result<FockVector> {
        self.fock_amplitudes_with_tolerance(n_max, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn fock_amplitudes_with_tolerance(
        &self,
        n_max: usize,
        tolerance: f64,
    ) -> Result<FockVector> {
        let amps = self.raw_amplitudes(n_max);
        let tail_mass = match self {
            SingleModeState::Fock { .. } | SingleModeState::FockSuperposition { .. } => {
                self.explicit_tail(n_max)
            }
            _ => (1.0 - neumaier_sum(amps.iter().map(|c| c.norm_sqr()))).max(0.0),
        };
        if tail_mass > tolerance {
            return Err(Error::TruncationInsufficient {
                n_max,
                tail_mass,
                tolerance,
            });
        }
        Ok(FockVector { amps, tail_mass })
    }

    /// Fock expansion with the smallest doubling cutoff whose tail is below
    /// [`DEFAULT_TAIL_TOLERANCE`].
    pub fn fock_amplitudes_auto(&self) -> Result<FockVector> {
        let m = self.moments();
        let spread = m.mean_n + 10.0 * (m.variance().max(0.0) + 1.0).sqrt();
        let mut n_max = (spread.ceil() as usize).max(20);
        if let SingleModeState::FockSuperposition { amps } = self {
            n_max = n_max.max(amps.len() - 1);
        }
        loop {
            match self.fock_amplitudes(n_max) {
                Err(Error::TruncationInsufficient { .. }) if n_max < MAX_AUTO_CUTOFF => n_max *= 2,
                other => return other,
            }
        }
    }

    fn explicit_tail(&self, n_max: usize) -> f64 {
        match self {
            SingleModeState::Fock { n } => {
                if (*n as usize) > n_max {
                    1.0
                } else {
                    0.0
                }
            }
            SingleModeState::FockSuperposition { amps } => {
                neumaier_sum(amps.iter().skip(n_max + 1).map(|c| c.norm_sqr()))
            }
            _ => unreachable!("explicit tails only exist for Fock-basis states"),
        }
    }

    fn raw_amplitudes(&self, n_max: usize) -> Vec<Complex64> {
        let len = n_max + 1;
        match self {
            SingleModeState::Fock { n } => {
                let mut v = vec![Complex64::new(0.0, 0.0); len];
                if let Some(slot) = v.get_mut(*n as usize) {
                    *slot = Complex64::new(1.0, 0.0);
                }
                v
            }
            SingleModeState::FockSuperposition { amps } => {
                let mut v = vec![Complex64::new(0.0, 0.0); len];
                for (slot, c) in v.iter_mut().zip(amps) {
                    *slot = *c;
                }
                v
            }
            SingleModeState::Coherent { alpha } => {
                real_to_complex(coherent_amplitudes(*alpha, n_max))
            }
            SingleModeState::SqueezedVacuum { r } => {
                real_to_complex(squeezed_vacuum_amplitudes(*r, n_max))
            }
            SingleModeState::SqueezedCoherent { alpha, r } => {
                real_to_complex(squeezed_coherent_amplitudes(*alpha, *r, n_max))
            }
        }
    }
}

fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

fn real_to_complex(v: Vec<f64>) -> Vec<Complex64> {
    v.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

/// `ln k!` for `k = 0..=n`, accumulated term by term.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `c_n = e^{-alpha^2/2} alpha^n / sqrt(n!)`.
fn coherent_amplitudes(alpha: f64, n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_max + 1];
    if alpha == 0.0 {
        v[0] = 1.0;
        return v;
    }
    let lnf = ln_factorials(n_max);
    let ln_a = alpha.abs().ln();
    for (n, slot) in v.iter_mut().enumerate() {
        let ln_c = -0.5 * alpha * alpha + n as f64 * ln_a - 0.5 * lnf[n];
        let sign = if alpha < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        *slot = sign * ln_c.exp();
    }
    v
}

/// `c_{2m} = (cosh r)^{-1/2} (-tanh r)^m sqrt((2m)!) / (2^m m!)`, odd terms zero.
fn squeezed_vacuum_amplitudes(r: f64, n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_max + 1];
    let t = r.tanh();
    if t == 0.0 {
        v[0] = 1.0;
        return v;
    }
    let lnf = ln_factorials(n_max);
    let ln_t = t.abs().ln();
    let ln_pref = -0.5 * r.cosh().ln();
    for m in 0..=n_max / 2 {
        let ln_c = ln_pref + m as f64 * (ln_t - std::f64::consts::LN_2) + 0.5 * lnf[2 * m] - lnf[m];
        // sign of (-tanh r)^m
        let negative = t > 0.0 && m % 2 == 1;
        v[2 * m] = if negative { -ln_c.exp() } else { ln_c.exp() };
    }
    v
}

/// Amplitudes of `D(alpha) S(r) |0>` from the annihilation condition
/// `[(a - alpha) cosh r - (a^dag - alpha) sinh r] |psi> = 0`.
fn squeezed_coherent_amplitudes(alpha: f64, r: f64, n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_max + 1];
    let (sh, ch) = (r.sinh(), r.cosh());
    v[0] = (-0.5 * alpha * alpha * (1.0 - r.tanh())).exp() / ch.sqrt();
    let drive = alpha * (-r).exp();
    for n in 0..n_max {
        let prev = if n > 0 { v[n - 1] } else { 0.0 };
        v[n + 1] = (drive * v[n] + sh * (n as f64).sqrt() * prev) / (ch * ((n + 1) as f64).sqrt());
    }
    v
}

/// Compensated summation.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fock_moments_are_exact() {
        let m = SingleModeState::fock(3).moments();
        assert_eq!((m.mean_n, m.mean_n2, m.vacuum_prob), (3.0, 9.0, 0.0));
        assert_eq!(SingleModeState::fock(0).moments().vacuum_prob, 1.0);
    }

    #[test]
    fn coherent_moments_match_frozen_oracle() {
        // Oracle: direct sums over the n_max = 60 expansion.
        let m = SingleModeState::coherent(1.0).unwrap().moments();
        assert!(close(m.mean_n, 1.0, 1e-15));
        assert!(close(m.mean_n2, 2.0, 1e-15));
        assert!(close(m.vacuum_prob, 0.367_879_441_171_442_3, 1e-15));
    }

    #[test]
    fn squeezed_vacuum_moments_match_frozen_oracle() {
        let m = SingleModeState::squeezed_vacuum(1.0).unwrap().moments();
        assert!(close(m.mean_n, 1.381_097_845_541_815_5, 1e-12));
        assert!(close(m.mean_n2, 8.484_489_467_964_364, 1e-10));
        assert!(close(m.vacuum_prob, 0.648_054_273_663_885_5, 1e-12));
    }

    #[test]
    fn fock_expansion_copies_basis_state() {
        let v = SingleModeState::fock(2).fock_amplitudes(4).unwrap();
        let re: Vec<f64> = v.amps.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(v.tail_mass, 0.0);
    }

    #[test]
    fn fock_expansion_too_short_is_rejected() {
        let err = SingleModeState::fock(5).fock_amplitudes(3).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
        let err = SingleModeState::coherent(3.0)
            .unwrap()
            .fock_amplitudes(5)
            .unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }

    #[test]
    fn coherent_vacuum_amplitude() {
        let v = SingleModeState::coherent(1.0)
            .unwrap()
            .fock_amplitudes(60)
            .unwrap();
        assert!(close(v.amps[0].re, (-0.5f64).exp(), 1e-15));
        assert!(close(v.amps[0].re, 0.606_530_66, 1e-8));
    }

    #[test]
    fn squeezed_vacuum_ratio_and_parity() {
        for r in [0.3, 1.0, 2.0] {
            let v = SingleModeState::squeezed_vacuum(r)
                .unwrap()
                .fock_amplitudes_auto()
                .unwrap();
            let ratio = v.amps[2].re / v.amps[0].re;
            assert!(close(ratio, -r.tanh() / 2f64.sqrt(), 1e-14));
            assert!(v.amps.iter().skip(1).step_by(2).all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn squeezed_coherent_core_has_phase_quadrature_squeezing() {
        let v = SingleModeState::squeezed_coherent(0.0, 0.7)
            .unwrap()
            .fock_amplitudes_auto()
            .unwrap();
        assert!(close(
            v.amps[2].re / v.amps[0].re,
            0.7f64.tanh() / 2f64.sqrt(),
            1e-14
        ));
        assert!(v.amps[1].norm() < 1e-300);
    }

    #[test]
    fn squeezed_coherent_at_zero_squeeze_is_coherent() {
        let a = SingleModeState::squeezed_coherent(1.3, 0.0)
            .unwrap()
            .fock_amplitudes(60)
            .unwrap();
        let b = SingleModeState::coherent(1.3)
            .unwrap()
            .fock_amplitudes(60)
            .unwrap();
        for (x, y) in a.amps.iter().zip(&b.amps) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_vacuum_vector_moments() {
        let v = FockVector {
            amps: vec![Complex64::new(1.0, 0.0)],
            tail_mass: 0.0,
        };
        let m = v.moments();
        assert_eq!((m.mean_n, m.mean_n2, m.vacuum_prob), (0.0, 0.0, 1.0));
    }

    #[test]
    fn f_factor_values() {
        assert_eq!(SingleModeState::fock(4).f_factor().unwrap(), 0.25);
        assert!(close(
            SingleModeState::coherent(1.0).unwrap().f_factor().unwrap(),
            0.5,
            1e-15
        ));
        // 1 / (sinh^2 1 + 2 cosh^2 1)
        let f_sv = SingleModeState::squeezed_vacuum(1.0)
            .unwrap()
            .f_factor()
            .unwrap();
        assert!(close(f_sv, 0.162_779_133_707_048_4, 1e-12));
    }

    #[test]
    fn vacuum_constituent_has_no_f_factor() {
        assert!(matches!(
            SingleModeState::fock(0).f_factor(),
            Err(Error::ZeroPhotonState)
        ));
        assert!(matches!(
            SingleModeState::coherent(0.0).unwrap().f_factor(),
            Err(Error::ZeroPhotonState)
        ));
    }

    #[test]
    fn constructors_validate() {
        assert!(SingleModeState::coherent(f64::NAN).is_err());
        assert!(SingleModeState::squeezed_vacuum(f64::INFINITY).is_err());
        assert!(SingleModeState::coherent_complex(Complex64::new(1.0, 0.5)).is_err());
        assert!(SingleModeState::coherent_complex(Complex64::new(1.0, 0.0)).is_ok());
        assert!(SingleModeState::superposition(vec![Complex64::new(0.9, 0.0)]).is_err());
        assert!(SingleModeState::superposition(vec![]).is_err());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(SingleModeState::superposition(vec![
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s)
        ])
        .is_ok());
    }

    #[test]
    fn neumaier_handles_cancellation() {
        let s = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }
}
