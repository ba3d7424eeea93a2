//! Cross-Kerr photon-number QND measurement.
//!
//! A signal Fock state `|n>` leaves a coherent probe `|alpha>` as
//! `|alpha e^{i n theta}>` with `theta = kappa * t`. The probe is not
//! simulated in its own Hilbert space: each term carries an integer phase
//! multiplier per probe ([`ProbeTag`](crate::fock::ProbeTag)), and the
//! homodyne stage is modeled at the outcome level by [`discriminate`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PhotonicError, Result};
use crate::fock::{c, BasisKet, ModeId, PathId, PhotonicState, ProbeId, ProbeTag, C64};
use crate::optics::{Pbs, PbsBasis};

/// Coherent probe of a cross-Kerr interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct KerrProbe {
    id: ProbeId,
    alpha: C64,
    kappa_t: f64,
}

impl KerrProbe {
    /// `kappa_t` must lie in `(0, pi]` and `|alpha|^2` must be positive.
    pub fn new(id: &str, alpha: C64, kappa_t: f64) -> Result<Self> {
        if !(kappa_t > 0.0 && kappa_t <= PI) {
            return Err(PhotonicError::InvalidProbe(format!("kappa_t = {kappa_t} outside (0, pi]")));
        }
        if !(alpha.norm_sqr() > 0.0) || !alpha.norm_sqr().is_finite() {
            return Err(PhotonicError::InvalidProbe(format!("mean photon number |alpha|^2 = {} must be positive", alpha.norm_sqr())));
        }
        Ok(Self { id: ProbeId::new(id), alpha, kappa_t })
    }

    /// Skips the range checks. Used by parameter sweeps that include the
    /// `theta = 0` limit.
    pub fn new_unchecked(id: &str, alpha: C64, kappa_t: f64) -> Self {
        Self { id: ProbeId::new(id), alpha, kappa_t }
    }

    /// A probe with real amplitude `sqrt(mean_n)`.
    pub fn with_mean_n(id: &str, mean_n: f64, kappa_t: f64) -> Result<Self> {
        Self::new(id, c(mean_n.max(0.0).sqrt(), 0.0), kappa_t)
    }

    /// Same parameters under a new id; probes are single-use per location.
    pub fn relabeled(&self, id: &str) -> Self {
        Self { id: ProbeId::new(id), ..self.clone() }
    }

    pub fn id(&self) -> &ProbeId {
        &self.id
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn kappa_t(&self) -> f64 {
        self.kappa_t
    }

    pub fn theta(&self) -> f64 {
        self.kappa_t
    }

    pub fn mean_n(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `kappa_t > pi / (2 sqrt(<n>))`.
    pub fn is_detectable(&self) -> bool {
        self.kappa_t > detectability_threshold(self.mean_n())
    }

    /// Minimum-error probability of telling `n` photons from none.
    pub fn error_probability(&self, n: u32) -> f64 {
        helstrom_error(coherent_overlap(self.mean_n(), n as f64 * self.kappa_t))
    }
}

/// Smallest interaction strength that allows single-photon detection.
pub fn detectability_threshold(mean_n: f64) -> f64 {
    PI / (2.0 * mean_n.sqrt())
}

/// `|<alpha|alpha e^{i theta}>| = exp(-<n> (1 - cos theta))`.
pub fn coherent_overlap(mean_n: f64, theta: f64) -> f64 {
    let half = (theta / 2.0).sin();
    (-mean_n * 2.0 * half * half).exp()
}

/// Helstrom bound for two equiprobable pure states with overlap `f`:
/// `(1 - sqrt(1 - f^2)) / 2`, written to stay accurate for tiny `f`.
pub fn helstrom_error(overlap: f64) -> f64 {
    let f2 = (overlap * overlap).clamp(0.0, 1.0);
    0.5 * f2 / (1.0 + (1.0 - f2).sqrt())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    /// Probe phases are perfectly distinguishable.
    #[default]
    Ideal,
    /// Minimum-error discrimination of overlapping coherent states.
    Overlap,
}

impl std::str::FromStr for ErrorModel {
    type Err = PhotonicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(ErrorModel::Ideal),
            "overlap" => Ok(ErrorModel::Overlap),
            other => Err(PhotonicError::InvalidInput(format!("unknown error model {other:?}"))),
        }
    }
}

impl std::fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorModel::Ideal => "ideal",
            ErrorModel::Overlap => "overlap",
        })
    }
}

/// Reported branch label for a true photon count: 0, 1, or 2 meaning "2 or more".
pub fn count_label(n: u32) -> u32 {
    n.min(2)
}

/// One measurement branch of a QND readout.
#[derive(Clone, Debug, PartialEq)]
pub struct QndOutcome {
    /// Reported photon-number branch (0, 1, or 2 for "two or more").
    pub photon_count_branch: u32,
    /// Photon count actually present in this branch's terms.
    pub true_count: u32,
    pub probability: f64,
    /// Normalized post-measurement state with the probe tag cleared.
    pub conditional_state: PhotonicState,
    /// Probability that the reported label is wrong for this branch.
    pub herald_error_prob: f64,
}

/// Unnormalized readout branch; amplitudes carry the branch weight.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RawQndBranch {
    pub reported: u32,
    pub true_count: u32,
    pub state: PhotonicState,
    pub error_prob: f64,
}

/// Which modes a probe couples to.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeSet {
    /// Every polarization and time bin of the listed paths.
    Paths(Vec<PathId>),
    Modes(Vec<ModeId>),
}

impl ModeSet {
    pub fn contains(&self, m: &ModeId) -> bool {
        match self {
            ModeSet::Paths(ps) => ps.contains(&m.path),
            ModeSet::Modes(ms) => ms.contains(m),
        }
    }
}

/// Cross-Kerr interaction: each term's tag for `probe` gains the photon
/// count found in `signal_modes`. Amplitudes are untouched.
pub fn kerr_interact(state: &PhotonicState, signal_modes: &ModeSet, probe: &KerrProbe) -> PhotonicState {
    state.map_terms(|ket: &BasisKet, tag: &ProbeTag| {
        let n = ket.count_where(|m| signal_modes.contains(m));
        let mut tag = tag.clone();
        tag.add(probe.id(), n);
        (ket.clone(), tag)
    })
}

pub(crate) fn discriminate_raw(state: &PhotonicState, probe: &KerrProbe, model: ErrorModel) -> Result<Vec<RawQndBranch>> {
    let mut groups: BTreeMap<u32, PhotonicState> = BTreeMap::new();
    for (ket, tag, amp) in state.terms() {
        let n = tag.get(probe.id()).ok_or_else(|| PhotonicError::ProbeNotInteracted(probe.id().to_string()))?;
        let mut cleared = tag.clone();
        cleared.remove(probe.id());
        groups.entry(n).or_default().add_term(ket.clone(), cleared, amp);
    }
    let mut out = Vec::new();
    for (n, s) in groups {
        let label = count_label(n);
        match model {
            ErrorModel::Ideal => out.push(RawQndBranch { reported: label, true_count: n, state: s, error_prob: 0.0 }),
            ErrorModel::Overlap => {
                // Presence vs absence; the vacuum hypothesis is tested
                // against the single-photon phase.
                let p_err = probe.error_probability(n.max(1));
                let wrong = if n == 0 { 1 } else { 0 };
                if 1.0 - p_err > 0.0 {
                    out.push(RawQndBranch {
                        reported: label,
                        true_count: n,
                        state: s.scaled(c((1.0 - p_err).sqrt(), 0.0)),
                        error_prob: p_err,
                    });
                }
                if p_err > 0.0 {
                    let wrong_state = s.scaled(c(p_err.sqrt(), 0.0));
                    if !wrong_state.is_empty() {
                        out.push(RawQndBranch { reported: wrong, true_count: n, state: wrong_state, error_prob: p_err });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reads out the probe: groups terms by phase multiplier and clears the tag.
///
/// In `Ideal` mode each group is its own outcome. In `Overlap` mode each
/// group is reported correctly with probability `1 - P_err` and with the
/// opposite presence label with probability `P_err`, where `P_err` is the
/// Helstrom error for overlap `exp(-<n>(1 - cos theta))`.
pub fn discriminate(state: &PhotonicState, probe: &KerrProbe, model: ErrorModel) -> Result<Vec<QndOutcome>> {
    let raw = discriminate_raw(state, probe, model)?;
    raw.into_iter()
        .map(|b| {
            let p = b.state.norm_squared();
            Ok(QndOutcome {
                photon_count_branch: b.reported,
                true_count: b.true_count,
                probability: p,
                conditional_state: b.state.normalized()?,
                herald_error_prob: b.error_prob,
            })
        })
        .collect()
}

/// Photon-presence check on every mode of `path`.
pub fn qnd_presence(state: &PhotonicState, path: &PathId, probe: &KerrProbe, model: ErrorModel) -> Result<Vec<QndOutcome>> {
    let tagged = kerr_interact(state, &ModeSet::Paths(vec![path.clone()]), probe);
    discriminate(&tagged, probe, model)
}

pub(crate) fn polarization_preserving_interaction(state: &PhotonicState, path: &PathId, probe: &KerrProbe) -> PhotonicState {
    let arm_v = PathId::new(&format!("{path}#qnd_v"));
    let arm_h = PathId::new(&format!("{path}#qnd_h"));
    let vacuum_port = PathId::new(&format!("{path}#qnd_in"));
    let split = Pbs {
        basis: PbsBasis::hv(),
        inputs: [path.clone(), vacuum_port.clone()],
        outputs: [arm_v.clone(), arm_h.clone()],
    };
    let merge = Pbs { basis: PbsBasis::hv(), inputs: [arm_v.clone(), arm_h.clone()], outputs: [path.clone(), vacuum_port] };
    let s = split.apply(state);
    let s = kerr_interact(&s, &ModeSet::Paths(vec![arm_v, arm_h]), probe);
    merge.apply(&s)
}

/// Polarization-preserving single-photon detection: a PBS separates H and V
/// onto two arms, one probe couples to both, and a mirror-image PBS
/// recombines them. The readout reveals presence, never polarization.
pub fn qnd_polarization_preserving(
    state: &PhotonicState,
    path: &PathId,
    probe: &KerrProbe,
    model: ErrorModel,
) -> Result<Vec<QndOutcome>> {
    let tagged = polarization_preserving_interaction(state, path, probe);
    discriminate(&tagged, probe, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Pol, QubitAmplitudes};

    fn probe() -> KerrProbe {
        KerrProbe::with_mean_n("p", 100.0, 0.5).unwrap()
    }

    #[test]
    fn probe_validation() {
        assert!(KerrProbe::with_mean_n("p", 100.0, 0.0).is_err());
        assert!(KerrProbe::with_mean_n("p", 100.0, 4.0).is_err());
        assert!(KerrProbe::with_mean_n("p", 0.0, 0.5).is_err());
        assert!(KerrProbe::with_mean_n("p", 1.0, PI).is_ok());
    }

    #[test]
    fn kerr_tags_photon_count() {
        let a: PathId = "s".into();
        let s = PhotonicState::from_kets([
            (BasisKet::vacuum(), c(0.6, 0.0)),
            (BasisKet::single("s", Pol::H), c(0.8, 0.0)),
        ]);
        let pr = probe();
        let t = kerr_interact(&s, &ModeSet::Paths(vec![a]), &pr);
        let mut tag0 = ProbeTag::none();
        tag0.add(pr.id(), 0);
        let mut tag1 = ProbeTag::none();
        tag1.add(pr.id(), 1);
        assert_eq!(t.amplitude_tagged(&BasisKet::vacuum(), &tag0), c(0.6, 0.0));
        assert_eq!(t.amplitude_tagged(&BasisKet::single("s", Pol::H), &tag1), c(0.8, 0.0));
    }

    #[test]
    fn discriminate_requires_interaction() {
        let s = PhotonicState::qubit("s", QubitAmplitudes::h());
        assert!(matches!(discriminate(&s, &probe(), ErrorModel::Ideal), Err(PhotonicError::ProbeNotInteracted(_))));
    }

    #[test]
    fn presence_on_definite_photon() {
        let s = PhotonicState::qubit("s", QubitAmplitudes::h());
        let out = qnd_presence(&s, &"s".into(), &probe(), ErrorModel::Ideal).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].photon_count_branch, 1);
        assert_eq!(out[0].probability, 1.0);
        assert_eq!(out[0].conditional_state, s);
        assert!(!out[0].conditional_state.has_probe_tags());
    }

    #[test]
    fn presence_on_empty_path() {
        let s = PhotonicState::qubit("other", QubitAmplitudes::h());
        let out = qnd_presence(&s, &"s".into(), &probe(), ErrorModel::Ideal).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].photon_count_branch, 0);
    }

    #[test]
    fn polarization_preserving_keeps_superposition() {
        let s = PhotonicState::qubit("s", QubitAmplitudes::plus());
        let out = qnd_polarization_preserving(&s, &"s".into(), &probe(), ErrorModel::Ideal).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].photon_count_branch, 1);
        assert!((out[0].conditional_state.fidelity(&s) - 1.0).abs() < 1e-12);
        assert!((out[0].conditional_state.inner(&s) - c(1.0, 0.0)).norm() < 1e-12);

        let out = qnd_polarization_preserving(&PhotonicState::vacuum(), &"s".into(), &probe(), ErrorModel::Ideal).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].photon_count_branch, 0);
        assert_eq!(out[0].probability, 1.0);
    }

    #[test]
    fn error_model_limits() {
        assert_eq!(helstrom_error(coherent_overlap(100.0, 0.0)), 0.5);
        // <n>(1 - cos theta) = 20.
        let theta = (1.0f64 - 20.0 / 100.0).acos();
        let e = helstrom_error(coherent_overlap(100.0, theta));
        assert!(e < 1e-9 && e > 0.0, "{e}");
        let big = KerrProbe::with_mean_n("p", 1e6, 0.1).unwrap();
        assert!(big.error_probability(1) < 1e-9);
    }

    #[test]
    fn detectability_boundary() {
        let mean_n: f64 = 100.0;
        let thr = detectability_threshold(mean_n);
        assert!((thr - PI / 20.0).abs() < 1e-15);
        let below = KerrProbe::with_mean_n("p", mean_n, thr * (1.0 - 1e-12)).unwrap();
        let at = KerrProbe::with_mean_n("p", mean_n, thr).unwrap();
        let above = KerrProbe::with_mean_n("p", mean_n, thr * (1.0 + 1e-12)).unwrap();
        assert!(!below.is_detectable());
        assert!(!at.is_detectable());
        assert!(above.is_detectable());
    }

    #[test]
    fn overlap_mode_mixes_labels() {
        let s = PhotonicState::qubit("s", QubitAmplitudes::h());
        let weak = KerrProbe::with_mean_n("p", 1.0, 0.3).unwrap();
        let out = qnd_presence(&s, &"s".into(), &weak, ErrorModel::Overlap).unwrap();
        assert_eq!(out.len(), 2);
        let total: f64 = out.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let wrong = out.iter().find(|o| o.photon_count_branch == 0).unwrap();
        assert!((wrong.probability - weak.error_probability(1)).abs() < 1e-12);
    }
}
