//! Passive and actively switched linear optical elements.
//!
//! Every element is a single-photon mode map pushed through
//! [`PhotonicState::transform_modes`], so photon number is conserved term by
//! term and multi-photon occupancy picks up the correct bosonic factors.
//!
//! Conventions: a rectilinear PBS transmits V and reflects H with no
//! reflection phase; a diagonal PBS transmits |+> and reflects |->. Both are
//! configurable on [`PbsBasis`].

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{PhotonicError, Result};
use crate::fock::{c, matrix2_is_unitary, BasisKet, ModeId, PathId, PhotonicState, Pol, C64};

/// 2x2 unitary acting on the (H, V) amplitudes of one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesMatrix(Matrix2<C64>);

impl JonesMatrix {
    pub const UNITARY_TOLERANCE: f64 = 1e-12;

    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let dev = matrix2_is_unitary(&m, Self::UNITARY_TOLERANCE);
        if dev > 0.0 {
            return Err(PhotonicError::NonUnitary(dev));
        }
        Ok(JonesMatrix(m))
    }

    pub fn identity() -> Self {
        JonesMatrix(Matrix2::identity())
    }

    /// H <-> V swap; a half-wave plate at 45 degrees or an active Pockels cell.
    pub fn x() -> Self {
        JonesMatrix(Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)))
    }

    pub fn z() -> Self {
        JonesMatrix(Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)))
    }

    /// `X Z X = diag(-1, 1)`.
    pub fn xzx() -> Self {
        Self::x().then(&Self::z()).then(&Self::x())
    }

    /// Real rotation of the polarization plane by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, co) = angle.sin_cos();
        JonesMatrix(Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)))
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    /// `other * self`: apply `self` first.
    pub fn then(&self, other: &JonesMatrix) -> JonesMatrix {
        JonesMatrix(other.0 * self.0)
    }

    pub fn adjoint(&self) -> JonesMatrix {
        JonesMatrix(self.0.adjoint())
    }

    /// Column images of the two creation operators.
    fn image(&self, m: &ModeId) -> Vec<(ModeId, C64)> {
        let col = m.pol.index();
        vec![(m.with_pol(Pol::H), self.0[(0, col)]), (m.with_pol(Pol::V), self.0[(1, col)])]
    }
}

/// Which time bins an element acts on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinSelector {
    #[default]
    All,
    Only(u32),
}

impl BinSelector {
    pub fn matches(self, bin: u32) -> bool {
        match self {
            BinSelector::All => true,
            BinSelector::Only(b) => b == bin,
        }
    }
}

/// Switching rule of an EOS or Pockels cell: acts on the selected bins, and
/// only while a classical signal is present when `needs_signal` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub bins: BinSelector,
    pub needs_signal: bool,
}

impl SwitchSchedule {
    pub fn always(bins: BinSelector) -> Self {
        Self { bins, needs_signal: false }
    }

    pub fn on_signal(bins: BinSelector) -> Self {
        Self { bins, needs_signal: true }
    }

    pub fn acts(&self, bin: u32, signal: bool) -> bool {
        (signal || !self.needs_signal) && self.bins.matches(bin)
    }
}

/// Delay line lengths of the time-bin CNOT, in bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Output-stage delay on the non-diverted pulses.
    pub tau: u32,
    /// Extra length of the long interferometer arm.
    pub delta_tau: u32,
    /// Detour length of the switched pulse.
    pub t_resync: u32,
}

impl DelayConfig {
    pub fn new(tau: u32, delta_tau: u32, t_resync: u32) -> Result<Self> {
        if tau != delta_tau + t_resync {
            return Err(PhotonicError::InvalidCircuit(format!(
                "delays must satisfy tau = delta_tau + t ({tau} != {delta_tau} + {t_resync})"
            )));
        }
        Ok(Self { tau, delta_tau, t_resync })
    }
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self { tau: 2, delta_tau: 1, t_resync: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PbsBasis {
    /// Rectilinear PBS; `transmit` is the polarization passed straight through.
    Hv { transmit: Pol },
    /// Diagonal PBS; `plus_transmits` selects which of |+>, |-> is transmitted.
    Diagonal { plus_transmits: bool },
}

impl PbsBasis {
    pub fn hv() -> Self {
        PbsBasis::Hv { transmit: Pol::V }
    }

    pub fn diagonal() -> Self {
        PbsBasis::Diagonal { plus_transmits: true }
    }
}

/// A polarizing beam splitter with two input and two output paths.
///
/// Input `inputs[0]` transmits to `outputs[0]` and reflects to `outputs[1]`;
/// input `inputs[1]` transmits to `outputs[1]` and reflects to `outputs[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pbs {
    pub basis: PbsBasis,
    pub inputs: [PathId; 2],
    pub outputs: [PathId; 2],
}

impl Pbs {
    pub fn hv(inputs: [&str; 2], outputs: [&str; 2]) -> Self {
        Self::new(PbsBasis::hv(), inputs, outputs)
    }

    pub fn diagonal(inputs: [&str; 2], outputs: [&str; 2]) -> Self {
        Self::new(PbsBasis::diagonal(), inputs, outputs)
    }

    pub fn new(basis: PbsBasis, inputs: [&str; 2], outputs: [&str; 2]) -> Self {
        Self { basis, inputs: inputs.map(PathId::new), outputs: outputs.map(PathId::new) }
    }

    fn image(&self, m: &ModeId) -> Option<Vec<(ModeId, C64)>> {
        let port = self.inputs.iter().position(|p| p == &m.path)?;
        let transmit_out = &self.outputs[port];
        let reflect_out = &self.outputs[1 - port];
        Some(match self.basis {
            PbsBasis::Hv { transmit } => {
                let out = if m.pol == transmit { transmit_out } else { reflect_out };
                vec![(m.with_path(out), c(1.0, 0.0))]
            }
            PbsBasis::Diagonal { plus_transmits } => {
                // |H> = (|+> + |->)/sqrt2, |V> = (|+> - |->)/sqrt2, and
                // |+-> = (|H> +- |V>)/sqrt2 on the output path.
                let (plus_out, minus_out) =
                    if plus_transmits { (transmit_out, reflect_out) } else { (reflect_out, transmit_out) };
                let minus_sign = if m.pol == Pol::H { 0.5 } else { -0.5 };
                let mut img = Vec::with_capacity(4);
                let plus = m.with_path(plus_out);
                let minus = m.with_path(minus_out);
                img.push((plus.with_pol(Pol::H), c(0.5, 0.0)));
                img.push((plus.with_pol(Pol::V), c(0.5, 0.0)));
                img.push((minus.with_pol(Pol::H), c(minus_sign, 0.0)));
                img.push((minus.with_pol(Pol::V), c(-minus_sign, 0.0)));
                img
            }
        })
    }

    pub fn apply(&self, state: &PhotonicState) -> PhotonicState {
        state.transform_modes(|m| self.image(m))
    }
}

/// Rectilinear PBS with the default transmit-V convention.
pub fn pbs_hv(state: &PhotonicState, in_ports: [&str; 2], out_ports: [&str; 2]) -> PhotonicState {
    Pbs::hv(in_ports, out_ports).apply(state)
}

/// Diagonal PBS with the default transmit-|+> convention.
pub fn pbs_diag(state: &PhotonicState, in_ports: [&str; 2], out_ports: [&str; 2]) -> PhotonicState {
    Pbs::diagonal(in_ports, out_ports).apply(state)
}

/// Applies `matrix` to every photon on `path` whose bin matches `bins`.
pub fn apply_jones(state: &PhotonicState, path: &PathId, bins: BinSelector, matrix: &JonesMatrix) -> PhotonicState {
    state.transform_modes(|m| (&m.path == path && bins.matches(m.bin)).then(|| matrix.image(m)))
}

/// Pockels cell: an H <-> V flip on the selected bins while `active`.
pub fn pockels(state: &PhotonicState, path: &PathId, bins: BinSelector, active: bool) -> PhotonicState {
    if !active {
        return state.clone();
    }
    apply_jones(state, path, bins, &JonesMatrix::x())
}

/// Shifts every photon on `path` later by `delta_bins`.
pub fn delay(state: &PhotonicState, path: &PathId, delta_bins: u32) -> PhotonicState {
    if delta_bins == 0 {
        return state.clone();
    }
    state.map_terms(|ket, tag| {
        let ket = BasisKet::from_modes(ket.photons().into_iter().map(|m| {
            if &m.path == path {
                ModeId { bin: m.bin + delta_bins, ..m.clone() }
            } else {
                m.clone()
            }
        }));
        (ket, tag.clone())
    })
}

/// Relabels spatial paths for photons in the bins selected by `schedule`.
///
/// Models electro-optic switches, circulators and mirrors. A collision is
/// reported when photons from two different source paths would land on the
/// same path in the same time bin.
pub fn route(
    state: &PhotonicState,
    path_map: &[(PathId, PathId)],
    schedule: SwitchSchedule,
    signal: bool,
) -> Result<PhotonicState> {
    let map: BTreeMap<&PathId, &PathId> = path_map.iter().map(|(a, b)| (a, b)).collect();
    if map.len() != path_map.len() {
        return Err(PhotonicError::InvalidCircuit("route map lists a source path twice".into()));
    }
    let mut out = PhotonicState::empty();
    for (ket, tag, amp) in state.terms() {
        let mut landed: BTreeMap<(PathId, u32), PathId> = BTreeMap::new();
        let mut new_ket = BasisKet::vacuum();
        for m in ket.photons() {
            let dest = match map.get(&m.path) {
                Some(d) if schedule.acts(m.bin, signal) => (*d).clone(),
                _ => m.path.clone(),
            };
            match landed.get(&(dest.clone(), m.bin)) {
                Some(src) if src != &m.path => {
                    return Err(PhotonicError::RoutingCollision { path: dest.to_string(), bin: m.bin })
                }
                _ => {
                    landed.insert((dest.clone(), m.bin), m.path.clone());
                }
            }
            new_ket.add_photon(m.with_path(&dest));
        }
        out.add_term(new_ket, tag.clone(), amp);
    }
    Ok(out.pruned())
}

/// Three-port circulator: port1 -> port2 and port2 -> port3.
pub fn circulator_map(ports: [&str; 3]) -> Vec<(PathId, PathId)> {
    vec![(ports[0].into(), ports[1].into()), (ports[1].into(), ports[2].into())]
}

/// `|+>`/`|->` amplitudes as a Jones column pair; used by tests and oracles.
pub fn diagonal_basis() -> [[C64; 2]; 2] {
    let r = FRAC_1_SQRT_2;
    [[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]]
}
