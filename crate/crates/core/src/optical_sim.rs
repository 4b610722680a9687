//! Truncated Fock-space simulation of the heralded linear-optics circuit that
//! prepares a two-mode NOON-like state from a coherent beam and a squeezed
//! vacuum.
//!
//! States are sparse maps from occupation tuples to amplitudes, keeping only
//! tuples whose total photon number is at most the cutoff. Beam splitters and
//! phase shifters conserve total photon number, so once a state is injected
//! no further probability leaves the retained space. Heralding on a fixed
//! photon budget is therefore exact whenever the cutoff covers that budget,
//! regardless of how much of the input tails was discarded.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_states::{neumaier_sum, SingleModeState};
use crate::param_solver::{self, Family, FamilyTarget, SweepAxis, SweepCurve, SweepPoint};
use crate::qcrb::{self, ProbeSpec, QcrbReport};

/// Truncation loss accepted by [`inject`].
pub const DEFAULT_INJECT_TOLERANCE: f64 = 1e-6;

/// Post-selections keeping less probability than this are rejected.
pub const MIN_POST_SELECTION_MASS: f64 = 1e-15;

/// Default total-photon cutoff for the experiment.
pub const DEFAULT_CUTOFF: usize = 14;

const REFERENCE_CIRCUIT_TOML: &str = include_str!("../configs/reference_circuit.toml");

pub type Occupation = Vec<u32>;

/// Pure state of several bosonic modes truncated to at most `cutoff` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModeFockState {
    mode_count: usize,
    cutoff: usize,
    amps: BTreeMap<Occupation, Complex64>,
    /// Probability discarded by the cutoff.
    pub truncation_loss: f64,
}

impl MultiModeFockState {
    pub fn vacuum(mode_count: usize, cutoff: usize) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(vec![0; mode_count], Complex64::new(1.0, 0.0));
        MultiModeFockState {
            mode_count,
            cutoff,
            amps,
            truncation_loss: 0.0,
        }
    }

    /// Builds a state from explicit amplitudes. Tuples must have `mode_count`
    /// entries and at most `cutoff` photons in total.
    pub fn from_amplitudes(
        mode_count: usize,
        cutoff: usize,
        amps: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (occ, amp) in amps {
            if occ.len() != mode_count {
                return Err(Error::InvalidState(format!(
                    "occupation {occ:?} does not have {mode_count} modes"
                )));
            }
            if total(&occ) > cutoff {
                return Err(Error::InvalidState(format!(
                    "occupation {occ:?} exceeds cutoff {cutoff}"
                )));
            }
            *map.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Ok(MultiModeFockState {
            mode_count,
            cutoff,
            amps: map,
            truncation_loss: 0.0,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &BTreeMap<Occupation, Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, occ: &[u32]) -> Complex64 {
        self.amps.get(occ).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        neumaier_sum(self.amps.values().map(|a| a.norm_sqr()))
    }

    /// Photon-number distribution of one mode.
    pub fn mode_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        let mut dist = vec![0.0; self.cutoff + 1];
        for (occ, amp) in &self.amps {
            dist[occ[mode] as usize] += amp.norm_sqr();
        }
        Ok(dist)
    }

    /// `|<self|other>|^2 / (<self|self> <other|other>)`.
    pub fn fidelity(&self, other: &MultiModeFockState) -> f64 {
        let overlap: Complex64 = self
            .amps
            .iter()
            .filter_map(|(occ, a)| other.amps.get(occ).map(|b| a.conj() * b))
            .sum();
        overlap.norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.mode_count {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                modes: self.mode_count,
            })
        }
    }
}

fn total(occ: &[u32]) -> usize {
    occ.iter().map(|&n| n as usize).sum()
}

/// Phase convention for the reflected amplitude of a beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamSplitterConvention {
    /// `a -> sqrt(T) a + i sqrt(1-T) b`, `b -> i sqrt(1-T) a + sqrt(T) b`
    #[default]
    Symmetric,
    /// `a -> sqrt(T) a + sqrt(1-T) b`, `b -> -sqrt(1-T) a + sqrt(T) b`
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitElement {
    BeamSplitter {
        mode_a: usize,
        mode_b: usize,
        transmissivity: f64,
        #[serde(default)]
        convention: BeamSplitterConvention,
    },
    /// Multiplies the amplitude of `n` photons in `mode` by
    /// `exp(i (const_phase + n per_photon_phase))`.
    PhaseShifter {
        mode: usize,
        const_phase: f64,
        per_photon_phase: f64,
    },
}

impl CircuitElement {
    pub fn balanced_beam_splitter(mode_a: usize, mode_b: usize) -> Self {
        CircuitElement::BeamSplitter {
            mode_a,
            mode_b,
            transmissivity: 0.5,
            convention: BeamSplitterConvention::Symmetric,
        }
    }

    pub fn validate(&self, mode_count: usize) -> Result<()> {
        let in_range = |mode: usize| {
            if mode < mode_count {
                Ok(())
            } else {
                Err(Error::ModeOutOfRange {
                    mode,
                    modes: mode_count,
                })
            }
        };
        match *self {
            CircuitElement::BeamSplitter {
                mode_a,
                mode_b,
                transmissivity,
                ..
            } => {
                in_range(mode_a)?;
                in_range(mode_b)?;
                if mode_a == mode_b {
                    return Err(Error::InvalidArgument(format!(
                        "beam splitter needs two distinct modes, got {mode_a} twice"
                    )));
                }
                if !(transmissivity > 0.0 && transmissivity < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "transmissivity must lie in (0, 1), got {transmissivity}"
                    )));
                }
                Ok(())
            }
            CircuitElement::PhaseShifter {
                mode,
                const_phase,
                per_photon_phase,
            } => {
                in_range(mode)?;
                if !const_phase.is_finite() || !per_photon_phase.is_finite() {
                    return Err(Error::InvalidArgument("phases must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

/// Product of per-mode Fock expansions, keeping tuples with at most `cutoff`
/// photons. Fails if more than [`DEFAULT_INJECT_TOLERANCE`] is discarded.
pub fn inject(states: &[SingleModeState], cutoff: usize) -> Result<MultiModeFockState> {
    inject_with_tolerance(states, cutoff, DEFAULT_INJECT_TOLERANCE)
}

pub fn inject_with_tolerance(
    states: &[SingleModeState],
    cutoff: usize,
    tolerance: f64,
) -> Result<MultiModeFockState> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
    }
    if states.is_empty() {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let mut partial: Vec<(Occupation, Complex64)> = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for state in states {
        let vector = state.fock_amplitudes_with_tolerance(cutoff, f64::INFINITY)?;
        let mut next = Vec::new();
        for (occ, amp) in &partial {
            let budget = cutoff - total(occ);
            for (k, c) in vector.amps.iter().enumerate().take(budget + 1) {
                if *c != Complex64::new(0.0, 0.0) {
                    let mut o = occ.clone();
                    o.push(k as u32);
                    next.push((o, amp * c));
                }
            }
        }
        partial = next;
    }
    let mut state = MultiModeFockState::from_amplitudes(states.len(), cutoff, partial)?;
    let loss = (1.0 - state.norm_sqr()).max(0.0);
    if loss > tolerance {
        return Err(Error::TruncationInsufficient {
            n_max: cutoff,
            tail_mass: loss,
            tolerance,
        });
    }
    state.truncation_loss = loss;
    Ok(state)
}

pub fn apply_element(
    state: &MultiModeFockState,
    element: &CircuitElement,
) -> Result<MultiModeFockState> {
    element.validate(state.mode_count)?;
    match *element {
        CircuitElement::PhaseShifter {
            mode,
            const_phase,
            per_photon_phase,
        } => {
            let amps = state
                .amps
                .iter()
                .map(|(occ, a)| {
                    let phase = const_phase + occ[mode] as f64 * per_photon_phase;
                    (occ.clone(), a * Complex64::from_polar(1.0, phase))
                })
                .collect();
            Ok(MultiModeFockState {
                amps,
                ..state.clone()
            })
        }
        CircuitElement::BeamSplitter {
            mode_a,
            mode_b,
            transmissivity,
            convention,
        } => Ok(beam_splitter(
            state,
            mode_a,
            mode_b,
            transmissivity,
            convention,
        )),
    }
}

/// Expands `(t a+ + rho_a b+)^n (rho_b a+ + t b+)^m` binomially for every
/// stored `|.., n_a = n, .., n_b = m, ..>`.
fn beam_splitter(
    state: &MultiModeFockState,
    mode_a: usize,
    mode_b: usize,
    transmissivity: f64,
    convention: BeamSplitterConvention,
) -> MultiModeFockState {
    let t = Complex64::new(transmissivity.sqrt(), 0.0);
    let reflect = (1.0 - transmissivity).sqrt();
    let (rho_a, rho_b) = match convention {
        BeamSplitterConvention::Symmetric => {
            (Complex64::new(0.0, reflect), Complex64::new(0.0, reflect))
        }
        BeamSplitterConvention::Real => {
            (Complex64::new(reflect, 0.0), Complex64::new(-reflect, 0.0))
        }
    };
    let ln_fact = ln_factorials(state.cutoff);
    let ln_binom = |n: usize, k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];

    let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (occ, amp) in &state.amps {
        let (n, m) = (occ[mode_a] as usize, occ[mode_b] as usize);
        for k in 0..=n {
            let left = t.powu(k as u32) * rho_a.powu((n - k) as u32);
            for l in 0..=m {
                let right = rho_b.powu(l as u32) * t.powu((m - l) as u32);
                let (na, nb) = (k + l, n - k + m - l);
                let ln_mag = ln_binom(n, k)
                    + ln_binom(m, l)
                    + 0.5 * (ln_fact[na] + ln_fact[nb] - ln_fact[n] - ln_fact[m]);
                let mut o = occ.clone();
                o[mode_a] = na as u32;
                o[mode_b] = nb as u32;
                *out.entry(o).or_default() += amp * left * right * ln_mag.exp();
            }
        }
    }
    MultiModeFockState {
        amps: out,
        ..state.clone()
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Renormalised state of the output modes after a herald.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedState {
    pub state: MultiModeFockState,
    pub success_prob: f64,
    pub herald_rule: String,
}

/// Keeps amplitudes with exactly `herald_count` photons in `herald_mode` and at
/// most `max_output_photons` in `output_modes`. The herald and output modes
/// must together cover every mode.
pub fn post_select(
    state: &MultiModeFockState,
    herald_mode: usize,
    herald_count: u32,
    output_modes: &[usize],
    max_output_photons: usize,
) -> Result<HeraldedState> {
    state.check_mode(herald_mode)?;
    for (i, &m) in output_modes.iter().enumerate() {
        state.check_mode(m)?;
        if m == herald_mode || output_modes[..i].contains(&m) {
            return Err(Error::InvalidArgument(format!(
                "output modes {output_modes:?} must be distinct and exclude herald mode {herald_mode}"
            )));
        }
    }
    if output_modes.len() + 1 != state.mode_count {
        return Err(Error::InvalidArgument(format!(
            "herald mode and output modes {output_modes:?} must cover all {} modes",
            state.mode_count
        )));
    }
    let mut kept: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (occ, amp) in &state.amps {
        if occ[herald_mode] != herald_count {
            continue;
        }
        let out: Occupation = output_modes.iter().map(|&m| occ[m]).collect();
        if total(&out) <= max_output_photons {
            *kept.entry(out).or_default() += amp;
        }
    }
    let mass = neumaier_sum(kept.values().map(|a| a.norm_sqr()));
    if !(mass >= MIN_POST_SELECTION_MASS) {
        return Err(Error::EmptyPostSelection { mass });
    }
    let scale = mass.sqrt().recip();
    for amp in kept.values_mut() {
        *amp *= scale;
    }
    Ok(HeraldedState {
        state: MultiModeFockState {
            mode_count: output_modes.len(),
            cutoff: max_output_photons,
            amps: kept,
            truncation_loss: 0.0,
        },
        success_prob: mass,
        herald_rule: format!(
            "{herald_count} photon(s) in mode {herald_mode}, at most {max_output_photons} in modes {output_modes:?}"
        ),
    })
}

/// Candidate `(|phi,0> + e^{i gamma} |0,phi>)/sqrt 2` extracted from a
/// two-mode state.
#[derive(Debug, Clone, PartialEq)]
pub struct NoonlikeFit {
    /// `sqrt(2) <n,0|state>` for `n = 0..=cutoff`.
    pub phi: Vec<Complex64>,
    /// Relative phase of the `|0,phi>` branch.
    pub branch_phase: f64,
    pub fidelity: f64,
}

/// Fits the NOON-like form to a two-mode state. Low fidelity is returned, not
/// treated as an error.
pub fn verify_noonlike_form(two_mode: &MultiModeFockState) -> Result<NoonlikeFit> {
    if two_mode.mode_count != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a two-mode state, got {} modes",
            two_mode.mode_count
        )));
    }
    let norm = two_mode.norm_sqr().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidState("state has zero norm".into()));
    }
    let n_max = two_mode.cutoff;
    let sqrt2 = std::f64::consts::SQRT_2;
    let phi: Vec<Complex64> = (0..=n_max as u32)
        .map(|n| two_mode.amplitude(&[n, 0]) * sqrt2 / norm)
        .collect();
    let branch_overlap: Complex64 = (1..=n_max as u32)
        .map(|n| phi[n as usize].conj() * two_mode.amplitude(&[0, n]))
        .sum();
    let branch_phase = if branch_overlap.norm() > 0.0 {
        branch_overlap.arg()
    } else {
        0.0
    };
    let rotation = Complex64::from_polar(1.0, branch_phase);
    let mut candidate: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (n, c) in phi.iter().enumerate() {
        let n = n as u32;
        *candidate.entry(vec![n, 0]).or_default() += c / sqrt2;
        *candidate.entry(vec![0, n]).or_default() += rotation * c / sqrt2;
    }
    let candidate = MultiModeFockState::from_amplitudes(2, n_max, candidate)?;
    let fidelity = if candidate.norm_sqr() > 0.0 {
        candidate.fidelity(two_mode)
    } else {
        0.0
    };
    Ok(NoonlikeFit {
        phi,
        branch_phase,
        fidelity,
    })
}

/// Global phase `theta` and per-photon gauge `chi` with
/// `e^{i (theta + chi n)} amps_n ~ reference_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeFit {
    pub global_phase: f64,
    pub chi: f64,
    /// Largest `|e^{i (theta + chi n)} amps_n - reference_n|`.
    pub max_residual: f64,
}

/// Fits the gauge on the two lowest photon numbers where both vectors are
/// non-negligible, then reports the residual over all entries.
pub fn fit_gauge(amps: &[Complex64], reference: &[Complex64]) -> Result<GaugeFit> {
    let support: Vec<usize> = (0..amps.len().min(reference.len()))
        .filter(|&n| amps[n].norm() > 1e-12 && reference[n].norm() > 1e-12)
        .take(2)
        .collect();
    let (global_phase, chi) = match support[..] {
        [n1, n2] => {
            let d1 = reference[n1].arg() - amps[n1].arg();
            let d2 = reference[n2].arg() - amps[n2].arg();
            let chi = wrap(d2 - d1) / (n2 - n1) as f64;
            (wrap(d1 - chi * n1 as f64), chi)
        }
        [n1] => (wrap(reference[n1].arg() - amps[n1].arg()), 0.0),
        _ => {
            return Err(Error::InvalidArgument(
                "no common support to fit a gauge".into(),
            ))
        }
    };
    let len = amps.len().max(reference.len());
    let zero = Complex64::new(0.0, 0.0);
    let max_residual = (0..len)
        .map(|n| {
            let a = amps.get(n).copied().unwrap_or(zero);
            let r = reference.get(n).copied().unwrap_or(zero);
            (a * Complex64::from_polar(1.0, global_phase + chi * n as f64) - r).norm()
        })
        .fold(0.0, f64::max);
    Ok(GaugeFit {
        global_phase,
        chi,
        max_residual,
    })
}

fn wrap(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// `g(r) = sqrt(8 + 12 t + 12 t^2 + 9 t^3)` with `t = tanh r`.
pub fn target_normalization(r: f64) -> f64 {
    let t = r.tanh();
    (8.0 + 12.0 * t + 12.0 * t * t + 9.0 * t.powi(3)).sqrt()
}

/// Ideal amplitudes `c_0..c_4` of the prepared constituent, with phases `i^n`.
pub fn target_amplitudes(r: f64) -> [Complex64; 5] {
    let t = r.tanh();
    let g = target_normalization(r);
    let mags = [
        0.0,
        2.0 * 2f64.sqrt(),
        2.0 * 3f64.sqrt() * t.sqrt(),
        2.0 * 3f64.sqrt() * t,
        3.0 * t.powf(1.5),
    ];
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (n, m) in mags.iter().enumerate() {
        out[n] = Complex64::i().powu(n as u32) * (m / g);
    }
    out
}

/// `alpha = sqrt(3 tanh(r) / 2)`.
pub fn experiment_alpha(r: f64) -> f64 {
    (1.5 * r.tanh()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldConfig {
    pub mode: usize,
    pub count: u32,
    pub output_modes: Vec<usize>,
    pub max_output_photons: usize,
}

/// Circuit wiring: input ports, ordered elements and herald rule. Modes are
/// numbered from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub modes: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    pub coherent_mode: usize,
    pub squeezed_mode: usize,
    pub elements: Vec<CircuitElement>,
    pub herald: HeraldConfig,
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

impl CircuitConfig {
    /// The wiring shipped in `configs/reference_circuit.toml`.
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_CIRCUIT_TOML).expect("shipped circuit config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: CircuitConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.modes != 3 {
            return bad(format!(
                "circuit must have exactly 3 modes, got {}",
                self.modes
            ));
        }
        for mode in [self.coherent_mode, self.squeezed_mode, self.herald.mode] {
            if mode >= self.modes {
                return bad(format!("mode {mode} out of range for {} modes", self.modes));
            }
        }
        if self.coherent_mode == self.squeezed_mode {
            return bad("coherent and squeezed inputs share a mode".into());
        }
        if self.herald.output_modes.len() != 2 {
            return bad(format!(
                "need exactly two output modes, got {:?}",
                self.herald.output_modes
            ));
        }
        for &m in &self.herald.output_modes {
            if m >= self.modes || m == self.herald.mode {
                return bad(format!("invalid output mode {m}"));
            }
        }
        if self.herald.output_modes[0] == self.herald.output_modes[1] {
            return bad("output modes must differ".into());
        }
        for e in &self.elements {
            e.validate(self.modes)
                .map_err(|err| Error::Config(err.to_string()))?;
        }
        Ok(())
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub r: f64,
    pub alpha: f64,
    /// Constituent amplitudes `c_0..c_N` after the gauge fit to [`target_amplitudes`].
    pub phi_amps: Vec<Complex64>,
    pub fidelity_to_noonlike: f64,
    pub branch_phase: f64,
    pub gauge: GaugeFit,
    /// `sum n |c_n|^2`
    pub n_bar: f64,
    pub success_prob: f64,
    /// Probability discarded when injecting the inputs.
    pub input_truncation_loss: f64,
}

impl ExperimentResult {
    pub fn constituent(&self) -> Result<SingleModeState> {
        SingleModeState::superposition(self.phi_amps.clone())
    }

    /// Single-phase bound of the prepared two-mode state.
    pub fn qcrb_report(&self) -> Result<QcrbReport> {
        qcrb::qcrb_closed_form(&ProbeSpec::balanced(1, self.constituent()?)?)
    }
}

impl fmt::Display for ExperimentResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "r = {}, alpha = {}", self.r, self.alpha)?;
        for (n, c) in self.phi_amps.iter().enumerate() {
            writeln!(
                f,
                "c_{n} = {:.12} {:+.12}i  |c_{n}| = {:.12}",
                c.re,
                c.im,
                c.norm()
            )?;
        }
        writeln!(f, "n_bar = {:.12}", self.n_bar)?;
        writeln!(f, "fidelity = {:.15}", self.fidelity_to_noonlike)?;
        writeln!(f, "branch_phase = {:.12}", self.branch_phase)?;
        writeln!(
            f,
            "gauge: global_phase = {:.12}, chi = {:.12}, residual = {:e}",
            self.gauge.global_phase, self.gauge.chi, self.gauge.max_residual
        )?;
        writeln!(f, "success_prob = {:.12}", self.success_prob)?;
        write!(
            f,
            "input_truncation_loss = {:e}",
            self.input_truncation_loss
        )
    }
}

/// Injects the coherent (`alpha = sqrt(3 tanh r / 2)`) and squeezed inputs,
/// runs the circuit and heralds.
pub fn run_experiment(r: f64, config: &CircuitConfig) -> Result<ExperimentResult> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "squeeze factor must be positive, got {r}"
        )));
    }
    config.validate()?;
    let budget = config.herald.count as usize + config.herald.max_output_photons;
    if config.cutoff < budget {
        return Err(Error::InvalidArgument(format!(
            "cutoff {} is below the heralded photon budget {budget}",
            config.cutoff
        )));
    }
    let alpha = experiment_alpha(r);
    let inputs: Vec<SingleModeState> = (0..config.modes)
        .map(|m| {
            if m == config.coherent_mode {
                SingleModeState::coherent(alpha)
            } else if m == config.squeezed_mode {
                SingleModeState::squeezed_vacuum(r)
            } else {
                Ok(SingleModeState::fock(0))
            }
        })
        .collect::<Result<_>>()?;
    // Sectors above the budget never reach the herald, so the input tail is
    // recorded rather than bounded.
    let mut state = inject_with_tolerance(&inputs, config.cutoff, 1.0)?;
    for element in &config.elements {
        state = apply_element(&state, element)?;
    }
    let heralded = post_select(
        &state,
        config.herald.mode,
        config.herald.count,
        &config.herald.output_modes,
        config.herald.max_output_photons,
    )?;
    let fit = verify_noonlike_form(&heralded.state)?;
    let phi_norm = neumaier_sum(fit.phi.iter().map(|c| c.norm_sqr())).sqrt();
    let phi: Vec<Complex64> = fit.phi.iter().map(|c| c / phi_norm).collect();
    let gauge = fit_gauge(&phi, &target_amplitudes(r))?;
    let rotate = |n: usize| Complex64::from_polar(1.0, gauge.global_phase + gauge.chi * n as f64);
    let phi_amps: Vec<Complex64> = phi.iter().enumerate().map(|(n, c)| c * rotate(n)).collect();
    let n_bar = neumaier_sum(
        phi_amps
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr()),
    );
    Ok(ExperimentResult {
        r,
        alpha,
        phi_amps,
        fidelity_to_noonlike: fit.fidelity,
        branch_phase: fit.branch_phase,
        gauge,
        n_bar,
        success_prob: heralded.success_prob,
        input_truncation_loss: state.truncation_loss,
    })
}

/// Bounds of the prepared state, the effective NOON state and the entangled
/// coherent state at the same `n_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentComparison {
    pub phi: SweepCurve,
    pub noon: SweepCurve,
    pub ecs: SweepCurve,
}

/// Runs the experiment over `r_grid` (increasing, inside `[1, 2]`) and checks
/// `ECS < prepared < NOON` at every point.
pub fn experiment_qcrb_comparison(
    r_grid: &[f64],
    config: &CircuitConfig,
) -> Result<ExperimentComparison> {
    let (mut phi, mut noon, mut ecs) = (Vec::new(), Vec::new(), Vec::new());
    for &r in r_grid {
        if !(1.0..=2.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("r = {r} outside [1, 2]")));
        }
        let result = run_experiment(r, config)?;
        let report = result.qcrb_report()?;
        let n_bar = report.n_bar;
        let noon_q = qcrb::noon_qcrb(1, n_bar)?;
        let ecs_q = param_solver::solve_param_for_nbar(&FamilyTarget::new(Family::Ecs, 1, n_bar))?
            .report(1)?
            .qcrb;
        if !(ecs_q < report.qcrb && report.qcrb < noon_q) {
            return Err(Error::OrderingViolation(format!(
                "at r = {r}: ecs {ecs_q}, prepared {}, noon {noon_q}",
                report.qcrb
            )));
        }
        let point = |qcrb| SweepPoint {
            n_bar,
            qcrb,
            parameter: r,
        };
        phi.push(point(report.qcrb));
        noon.push(point(noon_q));
        ecs.push(point(ecs_q));
    }
    Ok(ExperimentComparison {
        phi: SweepCurve::new("phi", SweepAxis::NBar, phi)?,
        noon: SweepCurve::new("noon_effective", SweepAxis::NBar, noon)?,
        ecs: SweepCurve::new("ecs", SweepAxis::NBar, ecs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_passes_through_elements() {
        let v = MultiModeFockState::vacuum(3, 4);
        let e = CircuitElement::balanced_beam_splitter(0, 2);
        let out = apply_element(&v, &e).unwrap();
        assert_eq!(out.amplitudes().len(), 1);
        assert!((out.amplitude(&[0, 0, 0]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_photon_splits_symmetrically() {
        let s = MultiModeFockState::from_amplitudes(2, 3, [(vec![1, 0], c(1.0, 0.0))]).unwrap();
        let out = apply_element(&s, &CircuitElement::balanced_beam_splitter(0, 1)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[1, 0]) - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let s = MultiModeFockState::from_amplitudes(2, 2, [(vec![1, 1], c(1.0, 0.0))]).unwrap();
        for convention in [
            BeamSplitterConvention::Symmetric,
            BeamSplitterConvention::Real,
        ] {
            let e = CircuitElement::BeamSplitter {
                mode_a: 0,
                mode_b: 1,
                transmissivity: 0.5,
                convention,
            };
            let out = apply_element(&s, &e).unwrap();
            assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
            assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn phase_shifter_pattern() {
        let amps = (0..5u32).map(|n| (vec![n], c(1.0, 0.0)));
        let s = MultiModeFockState::from_amplitudes(1, 4, amps).unwrap();
        let e = CircuitElement::PhaseShifter {
            mode: 0,
            const_phase: PI,
            per_photon_phase: -FRAC_PI_2,
        };
        let out = apply_element(&s, &e).unwrap();
        for n in 0..5u32 {
            let expected = -Complex64::new(0.0, -1.0).powu(n);
            assert!((out.amplitude(&[n]) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn mode_out_of_range() {
        let v = MultiModeFockState::vacuum(2, 4);
        let e = CircuitElement::balanced_beam_splitter(0, 2);
        assert!(matches!(
            apply_element(&v, &e),
            Err(Error::ModeOutOfRange { mode: 2, modes: 2 })
        ));
    }

    #[test]
    fn inject_vacuum_and_product() {
        let v = inject(&[SingleModeState::fock(0), SingleModeState::fock(0)], 3).unwrap();
        assert_eq!(v.amplitudes().len(), 1);
        assert_eq!(v.truncation_loss, 0.0);

        let coh = SingleModeState::coherent(0.5).unwrap();
        let sv = SingleModeState::squeezed_vacuum(0.3).unwrap();
        let s = inject(&[coh.clone(), sv.clone(), SingleModeState::fock(0)], 12).unwrap();
        let a = coh.fock_amplitudes_with_tolerance(12, 1.0).unwrap().amps;
        let b = sv.fock_amplitudes_with_tolerance(12, 1.0).unwrap().amps;
        assert!((s.amplitude(&[3, 2, 0]) - a[3] * b[2]).norm() < 1e-15);
        assert!((s.norm_sqr() + s.truncation_loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inject_rejects_heavy_truncation() {
        let coh = SingleModeState::coherent(3.0).unwrap();
        assert!(matches!(
            inject(&[coh], 5),
            Err(Error::TruncationInsufficient { .. })
        ));
        assert!(inject(&[SingleModeState::fock(0)], 0).is_err());
    }

    #[test]
    fn post_select_cases() {
        let s = MultiModeFockState::from_amplitudes(3, 3, [(vec![1, 0, 1], c(1.0, 0.0))]).unwrap();
        let h = post_select(&s, 2, 1, &[0, 1], 4).unwrap();
        assert!((h.success_prob - 1.0).abs() < 1e-15);
        let none = post_select(&s, 1, 1, &[0, 2], 4);
        assert!(matches!(none, Err(Error::EmptyPostSelection { .. })));
        assert!(post_select(&s, 2, 1, &[0, 2], 4).is_err());
    }

    #[test]
    fn noonlike_fit_exact_and_product() {
        let phi = [c(0.0, 0.0), c(0.6, 0.0), c(0.0, 0.8)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = Vec::new();
        for (n, a) in phi.iter().enumerate().skip(1) {
            amps.push((vec![n as u32, 0], a * h));
            amps.push((vec![0, n as u32], a * h));
        }
        let s = MultiModeFockState::from_amplitudes(2, 2, amps).unwrap();
        let fit = verify_noonlike_form(&s).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-12);
        assert!(fit.branch_phase.abs() < 1e-12);

        let mut product = Vec::new();
        for (i, a) in phi.iter().enumerate() {
            for (j, b) in phi.iter().enumerate() {
                if i + j <= 4 {
                    product.push((vec![i as u32, j as u32], a * b));
                }
            }
        }
        let p = MultiModeFockState::from_amplitudes(2, 4, product).unwrap();
        assert!(verify_noonlike_form(&p).unwrap().fidelity < 0.9);
    }

    #[test]
    fn gauge_recovers_phases() {
        let target = target_amplitudes(1.0);
        let scrambled: Vec<Complex64> = target
            .iter()
            .enumerate()
            .map(|(n, a)| a * Complex64::from_polar(1.0, 0.3 - 0.7 * n as f64))
            .collect();
        let fit = fit_gauge(&scrambled, &target).unwrap();
        assert!(fit.max_residual < 1e-14);
        assert!((fit.chi - 0.7).abs() < 1e-14);
    }

    #[test]
    fn target_examples() {
        let g = target_normalization(1.0);
        assert!((g * g - 28.075).abs() < 1e-3);
        let mags: Vec<f64> = target_amplitudes(1.0).iter().map(|a| a.norm()).collect();
        let expected = [
            0.533_806_755_718_867_2,
            0.570_547_092_773_750_5,
            0.497_912_808_285_454_3,
            0.376_309_975_713_654_6,
        ];
        for (m, e) in mags[1..].iter().zip(expected) {
            assert!((m - e).abs() < 1e-14);
        }
        let norm: f64 = mags.iter().map(|m| m * m).sum();
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_config_parses() {
        let cfg = CircuitConfig::reference();
        assert_eq!(cfg.modes, 3);
        assert_eq!(cfg.cutoff, DEFAULT_CUTOFF);
        assert_eq!(cfg.elements.len(), 3);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_modes() {
        let text = "modes = 3\ncoherent_mode = 0\nsqueezed_mode = 1\nelements = []\nbogus = 1\n\
                    [herald]\nmode = 2\ncount = 1\noutput_modes = [0, 1]\nmax_output_photons = 4\n";
        assert!(matches!(
            CircuitConfig::from_toml_str(text),
            Err(Error::Config(_))
        ));
        let text = text
            .replace("bogus = 1\n", "")
            .replace("squeezed_mode = 1", "squeezed_mode = 5");
        assert!(matches!(
            CircuitConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cutoff_below_budget_rejected() {
        let cfg = CircuitConfig::reference().with_cutoff(4);
        assert!(run_experiment(1.0, &cfg).is_err());
    }
}
