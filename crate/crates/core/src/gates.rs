//! Prebuilt gate and entangler setups with their verification routines.
//!
//! | builder                          | setup                                              |
//! |----------------------------------|----------------------------------------------------|
//! | [`build_classical_cnot_ancilla`] | deterministic classical CNOT, H ancilla, D1 + EOS  |
//! | [`build_classical_cnot_qnd`]     | time-bin classical CNOT with a QND presence check  |
//! | [`build_bell_cnot`]              | Bell-resource CNOT, detectors D1-D4, corrections   |
//! | [`build_fiber_cnot`]             | fiber CNOT with a probabilistic PBS Bell source    |
//! | [`build_entangler`]              | four-photon entangler with QND heralds             |

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix4;
use serde::Serialize;

use crate::circuit::{
    amplitude_rows, apply_corrections, expected_output, matching_weight, post_select_record, simulate, Action, CircuitGraph, Element,
    ElementKind, Expect, FeedForwardRule, QndScheme, Record, RunResult, Trigger,
};
use crate::error::{PhotonicError, Result};
use crate::fock::{c, wootters_concurrence, BasisKet, ModeId, PathId, PhotonicState, Pol, QubitAmplitudes, C64};
use crate::optics::{circulator_map, BinSelector, DelayConfig, JonesMatrix, Pbs};
use crate::par::{self, Execution};
use crate::qnd::{ErrorModel, KerrProbe};

/// Report format version.
pub const REPORT_SCHEMA: u32 = 1;

fn one() -> C64 {
    c(1.0, 0.0)
}

fn zero() -> C64 {
    c(0.0, 0.0)
}

/// CNOT on (control, target) in (HH, HV, VH, VV) order: V control flips the target.
pub fn cnot() -> Matrix4<C64> {
    let (o, z) = (one(), zero());
    Matrix4::new(o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z)
}

/// `(X (x) I) CNOT (X (x) I)`: flips the target when the control is H.
pub fn cnot_on_h() -> Matrix4<C64> {
    let (o, z) = (one(), zero());
    Matrix4::new(z, o, z, z, o, z, z, z, z, z, o, z, z, z, z, o)
}

pub fn identity4() -> Matrix4<C64> {
    Matrix4::identity()
}

fn detector(id: &str, slot: u32, path: &str, number_resolving: bool) -> Element {
    Element::new(id, slot, ElementKind::Detector { path: path.into(), number_resolving })
}

fn relabel(id: &str, slot: u32, pairs: &[(&str, &str)]) -> Element {
    Element::new(
        id,
        slot,
        ElementKind::Route { map: pairs.iter().map(|(a, b)| (PathId::new(a), PathId::new(b))).collect(), bins: BinSelector::All },
    )
}

fn correct(path: &str, matrix: JonesMatrix) -> Action {
    Action::Correct { path: path.into(), bins: BinSelector::All, matrix }
}

// ---------------------------------------------------------------------------
// Deterministic classical CNOT with an ancilla.

/// Control on `control`, target on `target`, an H ancilla prepared on
/// `ancilla`. The first PBS sends an H control to D1 and lets the H ancilla
/// take its place on the upper arm; a V control joins the ancilla on the
/// upper arm instead, D1 stays dark, and the feed-forward flips the target
/// and switches the upper arm through a PBS that dumps the H photon.
pub fn build_classical_cnot_ancilla() -> CircuitGraph {
    let mut g = CircuitGraph::new("cnot-ancilla")
        .with_inputs(&["control", "target"])
        .with_outputs(&["c_out", "t_out"])
        .with_resource(PhotonicState::qubit("ancilla", QubitAmplitudes::h()));
    g.push(Element::new("PBS1", 0, ElementKind::Pbs(Pbs::hv(["control", "ancilla"], ["upper", "lower"]))))
        .push(detector("D1", 1, "lower", false))
        .push(Element::new("PC", 2, ElementKind::Pockels { path: "target".into(), bins: BinSelector::All }).on_signal())
        .push(relabel("EOS1", 2, &[("upper", "eos")]).on_signal())
        .push(Element::new("PBS2", 3, ElementKind::Pbs(Pbs::hv(["eos", "eos_idle"], ["eos_v", "dump"]))))
        .push(relabel("EOS2", 4, &[("eos_v", "upper")]).on_signal())
        .push(detector("D_dump", 4, "dump", false))
        .push(relabel("OUT", 5, &[("upper", "c_out"), ("target", "t_out")]));
    g.rules.push(FeedForwardRule::new(
        Trigger::when("D1", Expect::NoClick),
        vec![Action::Activate("PC".into()), Action::Activate("EOS1".into()), Action::Activate("EOS2".into())],
    ));
    g
}

// ---------------------------------------------------------------------------
// Time-bin classical CNOT with QND.

/// Trace points of the time-bin CNOT, named after the table locations.
pub const TRACE_POINTS: [&str; 3] = ["3", "5", "6"];

pub fn build_classical_cnot_qnd(probe: &KerrProbe) -> CircuitGraph {
    build_classical_cnot_qnd_with(probe, DelayConfig::default())
}

/// Inputs `a_i` (control) and `b_i` (target); outputs `a_o`, `b_o` in time
/// bin `delays.tau`. Time bin 0 is the short pulse S, bin `delta_tau` the
/// long pulse L.
pub fn build_classical_cnot_qnd_with(probe: &KerrProbe, delays: DelayConfig) -> CircuitGraph {
    let long_bin = BinSelector::Only(delays.delta_tau);
    let mut g = CircuitGraph::new("cnot-qnd").with_inputs(&["a_i", "b_i"]).with_outputs(&["a_o", "b_o"]);
    g.output_bin = delays.tau;
    g.push(Element::new("PBS1", 0, ElementKind::Pbs(Pbs::hv(["a_i", "b_i"], ["upper", "lower"]))))
        // Unbalanced interferometer on the upper arm: H short, V long.
        .push(Element::new("PBS2", 1, ElementKind::Pbs(Pbs::hv(["upper", "u_idle"], ["long", "short"]))))
        .push(Element::new("DELTA_TAU", 2, ElementKind::Delay { path: "long".into(), bins: delays.delta_tau }))
        .push(Element::new("PBS3", 3, ElementKind::Pbs(Pbs::hv(["long", "short"], ["upper", "u_idle"]))))
        .push(Element::new("3", 4, ElementKind::Trace))
        .push(Element::new("PC1", 5, ElementKind::Pockels { path: "upper".into(), bins: long_bin }))
        .push(Element::new("PBS4", 6, ElementKind::Pbs(Pbs::hv(["lower", "upper"], ["upper", "lower"]))))
        .push(Element::new("5", 7, ElementKind::Trace))
        .push(Element::new(
            "QND",
            8,
            ElementKind::Qnd { path: "lower".into(), probe: probe.relabeled("QND"), scheme: QndScheme::Presence },
        ))
        .push(Element::new("PC2", 9, ElementKind::Pockels { path: "upper".into(), bins: BinSelector::All }).on_signal())
        .push(Element::new("6", 10, ElementKind::Trace))
        .push(
            Element::new("EOS1", 11, ElementKind::Route { map: vec![("upper".into(), "detour".into())], bins: long_bin })
                .on_signal(),
        )
        .push(Element::new("T", 12, ElementKind::Delay { path: "detour".into(), bins: delays.t_resync }))
        .push(Element::new("TAU_U", 12, ElementKind::Delay { path: "upper".into(), bins: delays.tau }))
        .push(Element::new("TAU_L", 12, ElementKind::Delay { path: "lower".into(), bins: delays.tau }))
        .push(relabel("EOS2", 13, &[("detour", "lower")]).on_signal())
        .push(relabel("OUT", 14, &[("upper", "b_o"), ("lower", "a_o")]));
    g.rules.push(FeedForwardRule::new(
        Trigger::when("QND", Expect::Count(0)),
        vec![Action::Activate("PC2".into()), Action::Activate("EOS1".into()), Action::Activate("EOS2".into())],
    ));
    g
}

/// One cell of the trace table: photons expected on a path at a trace point.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceExpectation {
    pub point: &'static str,
    pub path: &'static str,
    /// (polarization, time bin) per photon.
    pub photons: Vec<(Pol, u32)>,
}

/// A basis-input row of a classical truth table, control first.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRow {
    pub input: (Pol, Pol),
    pub output: (Pol, Pol),
    pub traces: Vec<TraceExpectation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable {
    pub name: String,
    pub rows: Vec<TruthRow>,
    /// Probability with which each row must be produced.
    pub expected_success: f64,
}

impl TruthTable {
    fn from_fn(name: &str, f: impl Fn(Pol, Pol) -> (Pol, Pol)) -> Self {
        let rows = [(Pol::H, Pol::H), (Pol::H, Pol::V), (Pol::V, Pol::H), (Pol::V, Pol::V)]
            .into_iter()
            .map(|(a, b)| TruthRow { input: (a, b), output: f(a, b), traces: Vec::new() })
            .collect();
        Self { name: name.into(), rows, expected_success: 1.0 }
    }

    pub fn cnot() -> Self {
        Self::from_fn("cnot", |c, t| (c, if c == Pol::V { t.flipped() } else { t }))
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", |c, t| (c, t))
    }

    /// The CNOT table with the intermediate cells of the time-bin gate.
    /// Bins: S = 0, L = 1.
    pub fn time_bin_cnot() -> Self {
        use Pol::{H, V};
        const S: u32 = 0;
        const L: u32 = 1;
        let t = |point, path, photons: &[(Pol, u32)]| TraceExpectation { point, path, photons: photons.to_vec() };
        // Columns: 3(u) 3(l) 5(u) 5(l) 6(u) 6(l); rows keyed by (b_i, a_i).
        let cells: [((Pol, Pol), [&[(Pol, u32)]; 6], (Pol, Pol)); 4] = [
            ((H, H), [&[(H, S)], &[(H, S)], &[(H, S)], &[(H, S)], &[(H, S)], &[(H, S)]], (H, H)),
            ((H, V), [&[(V, L), (H, S)], &[], &[(H, L), (H, S)], &[], &[(V, L), (V, S)], &[]], (V, V)),
            ((V, H), [&[], &[(H, S), (V, S)], &[(V, S)], &[(H, S)], &[(V, S)], &[(H, S)]], (V, H)),
            ((V, V), [&[(V, L)], &[(V, S)], &[(H, L), (V, S)], &[], &[(H, S), (V, L)], &[]], (H, V)),
        ];
        let rows = cells
            .iter()
            .map(|((b_in, a_in), cols, (b_out, a_out))| {
                let mut traces = Vec::new();
                for (i, point) in TRACE_POINTS.iter().enumerate() {
                    traces.push(t(point, "upper", cols[2 * i]));
                    traces.push(t(point, "lower", cols[2 * i + 1]));
                }
                // Control is a, target is b.
                TruthRow { input: (*a_in, *b_in), output: (*a_out, *b_out), traces }
            })
            .collect();
        Self { name: "time-bin cnot".into(), rows, expected_success: 1.0 }
    }
}

// ---------------------------------------------------------------------------
// Bell-resource CNOT.

/// Detector ids of the Bell-resource CNOT. D1/D2 read the control-side
/// photon in the diagonal basis (+/-), D3/D4 the target-side photon in H/V.
pub const BELL_DETECTORS: [&str; 4] = ["D1", "D2", "D3", "D4"];

/// The four single-photon herald patterns and their corrections.
pub fn herald_patterns() -> [(&'static str, &'static str); 4] {
    [("D1", "D3"), ("D2", "D3"), ("D1", "D4"), ("D2", "D4")]
}

/// Exactly one photon on each detector of `pattern`, none on the others.
pub fn herald_trigger(pattern: (&str, &str)) -> Trigger {
    let mut t = Trigger::default();
    for d in BELL_DETECTORS {
        let n = if d == pattern.0 || d == pattern.1 { 1 } else { 0 };
        t = t.and(d, Expect::Count(n));
    }
    t
}

pub fn matches_pattern(record: &Record, pattern: (&str, &str)) -> bool {
    herald_trigger(pattern).evaluate(record) == Some(true)
}

/// D2 -> XZX on the control, D4 -> X on the target, both for D2 and D4.
fn bell_corrections(control_out: &str, target_out: &str) -> Vec<FeedForwardRule> {
    herald_patterns()
        .into_iter()
        .map(|p| {
            let mut actions = Vec::new();
            if p.0 == "D2" {
                actions.push(correct(control_out, JonesMatrix::xzx()));
            }
            if p.1 == "D4" {
                actions.push(correct(target_out, JonesMatrix::x()));
            }
            FeedForwardRule::new(herald_trigger(p), actions)
        })
        .collect()
}

/// Parity checks plus analyzers shared by the Bell-resource and fiber CNOTs.
/// `m1`, `m2` are the measured outputs of the two parity checks.
fn push_analyzers(g: &mut CircuitGraph, slot: u32, m1: &str, m2: &str, hv_device: Option<&str>, plus_device: Option<&str>) {
    let mut plus = Element::new("PBS+_2", slot, ElementKind::Pbs(Pbs::diagonal([m1, "m1_idle"], ["d1", "d2"])));
    let mut hv = Element::new("PBSHV_2", slot, ElementKind::Pbs(Pbs::hv([m2, "m2_idle"], ["d4", "d3"])));
    if let Some(d) = plus_device {
        plus = plus.device(d);
    }
    if let Some(d) = hv_device {
        hv = hv.device(d);
    }
    g.push(plus).push(hv);
    for (id, path) in BELL_DETECTORS.iter().zip(["d1", "d2", "d3", "d4"]) {
        g.push(detector(id, slot + 1, path, true));
    }
}

/// Control on `c`, target on `t`, two-photon `resource` on `e1`, `e2`.
///
/// A rectilinear PBS checks the parity of (c, e1) and a diagonal PBS that of
/// (t, e2); the measured outputs go to a diagonal analyzer (D1 = +, D2 = -)
/// and a rectilinear one (D3 = H, D4 = V). Corrections for the four herald
/// patterns are attached as `corrections`.
pub fn build_bell_cnot(resource: &PhotonicState) -> Result<CircuitGraph> {
    let paths = resource.occupied_paths();
    let expected: std::collections::BTreeSet<PathId> = ["e1", "e2"].iter().map(|p| PathId::new(p)).collect();
    if paths != expected || resource.terms().any(|(k, _, _)| k.total() != 2) {
        return Err(PhotonicError::InvalidInput("Bell-CNOT resource must be a two-photon state on e1, e2".into()));
    }
    let mut g = CircuitGraph::new("cnot-bell")
        .with_inputs(&["c", "t"])
        .with_outputs(&["c_out", "t_out"])
        .with_resource(resource.normalized()?);
    g.push(Element::new("PBSHV_1", 0, ElementKind::Pbs(Pbs::hv(["c", "e1"], ["c_out", "m1"]))))
        .push(Element::new("PBS+_1", 0, ElementKind::Pbs(Pbs::diagonal(["t", "e2"], ["t_out", "m2"]))));
    push_analyzers(&mut g, 1, "m1", "m2", None, None);
    g.corrections = bell_corrections("c_out", "t_out");
    Ok(g)
}

/// Resource states for the Bell-resource CNOT.
pub fn bell_resource(amps: [C64; 4]) -> PhotonicState {
    PhotonicState::two_qubit([&"e1".into(), &"e2".into()], amps, 0)
}

pub fn phi_plus() -> [C64; 4] {
    let s = c(FRAC_1_SQRT_2, 0.0);
    [s, zero(), zero(), s]
}

pub fn psi_plus() -> [C64; 4] {
    let s = c(FRAC_1_SQRT_2, 0.0);
    [zero(), s, s, zero()]
}

/// (|HH> + |VH>)/sqrt2: a product state.
pub fn disentangled_resource() -> [C64; 4] {
    let s = c(FRAC_1_SQRT_2, 0.0);
    [s, zero(), s, zero()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellSourceKind {
    Ideal,
    PbsProbabilistic,
}

/// A Bell pair on `e1`, `e2`, either given directly or produced by a PBS.
#[derive(Clone, Debug, PartialEq)]
pub enum BellSource {
    State(PhotonicState),
    /// Two |+> photons on `s1`, `s2` and the PBS pass that pairs them onto
    /// `e1`, `e2` (half of the time).
    Circuit { input: PhotonicState, circuit: CircuitGraph },
}

fn pbs_source_elements() -> Vec<Element> {
    vec![
        Element::new("PBSHV_src", 0, ElementKind::Pbs(Pbs::hv(["s1", "s2"], ["f1", "f2"]))).device("pbs_hv"),
        Element::new(
            "CIRC1",
            1,
            ElementKind::Route { map: circulator_map(["f1", "e1", "x1"])[..1].to_vec(), bins: BinSelector::All },
        )
        .device("circulator1"),
        Element::new(
            "CIRC2",
            1,
            ElementKind::Route { map: circulator_map(["f2", "e2", "x2"])[..1].to_vec(), bins: BinSelector::All },
        )
        .device("circulator2"),
    ]
}

fn plus_pair() -> PhotonicState {
    PhotonicState::qubit("s1", QubitAmplitudes::plus()).tensor(&PhotonicState::qubit("s2", QubitAmplitudes::plus()))
}

pub fn bell_source(kind: BellSourceKind) -> BellSource {
    match kind {
        BellSourceKind::Ideal => BellSource::State(bell_resource(phi_plus())),
        BellSourceKind::PbsProbabilistic => {
            let mut g = CircuitGraph::new("bell-source").with_inputs(&["s1", "s2"]).with_outputs(&["e1", "e2"]);
            g.elements = pbs_source_elements();
            BellSource::Circuit { input: plus_pair(), circuit: g }
        }
    }
}

/// Fiber CNOT: the Bell pair comes from two |+> photons meeting on the
/// rectilinear PBS, which (with circulators and mirrors) is also used for the
/// control parity check and the target-side analyzer; a single diagonal PBS
/// serves the target parity check and the control-side analyzer.
pub fn build_fiber_cnot() -> CircuitGraph {
    let mut g = CircuitGraph::new("cnot-fiber")
        .with_inputs(&["c", "t"])
        .with_outputs(&["c_out", "t_out"])
        .with_resource(plus_pair());
    for e in pbs_source_elements() {
        g.push(e);
    }
    g.push(Element::new("PBSHV_1", 2, ElementKind::Pbs(Pbs::hv(["c", "e1"], ["c_ret", "m1"]))).device("pbs_hv"))
        .push(Element::new("PBS+_1", 2, ElementKind::Pbs(Pbs::diagonal(["t", "e2"], ["t_ret", "m2"]))).device("pbs_plus"))
        .push(relabel("CIRC3", 3, &[("c_ret", "c_out")]).device("circulator3"))
        .push(relabel("CIRC4", 3, &[("t_ret", "t_out")]).device("circulator4"))
        .push(relabel("MIRRORS", 3, &[("m1", "m1_back"), ("m2", "m2_back")]));
    push_analyzers(&mut g, 4, "m1_back", "m2_back", Some("pbs_hv"), Some("pbs_plus"));
    g.corrections = bell_corrections("c_out", "t_out");
    g
}

// ---------------------------------------------------------------------------
// Entangler.

/// The four input qubits of the entangler. I and IV are the signal inputs,
/// II and III the ancillas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntanglerInput {
    /// (a, b)
    pub qubit_i: QubitAmplitudes,
    /// (c, d)
    pub qubit_ii: QubitAmplitudes,
    /// (sigma, beta)
    pub qubit_iii: QubitAmplitudes,
    /// (gamma, delta)
    pub qubit_iv: QubitAmplitudes,
}

impl EntanglerInput {
    /// Signal qubits I and IV with both ancillas in (|H> + |V>)/sqrt2.
    pub fn with_signals(i: QubitAmplitudes, iv: QubitAmplitudes) -> Self {
        Self { qubit_i: i, qubit_ii: QubitAmplitudes::plus(), qubit_iii: QubitAmplitudes::plus(), qubit_iv: iv }
    }

    pub fn uniform() -> Self {
        Self::with_signals(QubitAmplitudes::plus(), QubitAmplitudes::plus())
    }

    pub fn signal_state(&self) -> PhotonicState {
        PhotonicState::qubit("in_I", self.qubit_i).tensor(&PhotonicState::qubit("in_IV", self.qubit_iv))
    }

    fn ancilla_state(&self) -> PhotonicState {
        PhotonicState::qubit("in_II", self.qubit_ii).tensor(&PhotonicState::qubit("in_III", self.qubit_iii))
    }

    /// `[(H,H) coefficient, (V,V) coefficient]` of the two pairs after a
    /// successful herald, unnormalized: pair 1-3 from II and IV, pair 2-4
    /// from I and III.
    pub fn pair_coefficients(&self) -> ([C64; 2], [C64; 2]) {
        (
            [self.qubit_ii.h * self.qubit_iv.h, self.qubit_ii.v * self.qubit_iv.v],
            [self.qubit_i.h * self.qubit_iii.h, self.qubit_i.v * self.qubit_iii.v],
        )
    }
}

pub const ENTANGLER_OUTPUTS: [&str; 4] = ["out1", "out2", "out3", "out4"];
pub const ENTANGLER_HERALDS: [&str; 4] = ["Q1", "Q2", "Q3", "Q4"];

/// Central PBS traversed by (I, III) towards outputs 2, 4 and by (II, IV)
/// towards outputs 1, 3; a polarization-preserving QND herald on every
/// output and an optional half-wave plate (X) on output 3.
pub fn build_entangler(input: &EntanglerInput, hwp_on_output3: bool, probe: &KerrProbe) -> CircuitGraph {
    let mut g = CircuitGraph::new("entangler")
        .with_inputs(&["in_I", "in_IV"])
        .with_outputs(&ENTANGLER_OUTPUTS)
        .with_resource(input.ancilla_state());
    g.push(Element::new("PBS_I_III", 0, ElementKind::Pbs(Pbs::hv(["in_I", "in_III"], ["out2", "out4"]))).device("central_pbs"))
        .push(Element::new("PBS_II_IV", 0, ElementKind::Pbs(Pbs::hv(["in_II", "in_IV"], ["out1", "out3"]))).device("central_pbs"));
    if hwp_on_output3 {
        g.push(Element::new("HWP3", 1, ElementKind::Jones { path: "out3".into(), bins: BinSelector::All, matrix: JonesMatrix::x() }));
    }
    for (id, out) in ENTANGLER_HERALDS.iter().zip(ENTANGLER_OUTPUTS) {
        g.push(Element::new(
            id,
            2,
            ElementKind::Qnd { path: out.into(), probe: probe.relabeled(id), scheme: QndScheme::PolarizationPreserving },
        ));
    }
    for p in ["in_I", "in_II", "out1", "out2"] {
        g.port_owner.insert(p.into(), "Alice".into());
    }
    for p in ["in_III", "in_IV", "out3", "out4"] {
        g.port_owner.insert(p.into(), "Bob".into());
    }
    g
}

pub fn heralded(record: &Record) -> bool {
    ENTANGLER_HERALDS.iter().all(|h| record.get(h) == Some(1))
}

/// Heralded entangler output with its entanglement figures.
#[derive(Clone, Debug, PartialEq)]
pub struct EntanglerOutcome {
    pub herald_probability: f64,
    pub state: PhotonicState,
    pub concurrence_13: f64,
    pub concurrence_24: f64,
    /// Fidelity with the two-pair product predicted from the input amplitudes.
    pub fidelity: f64,
}

/// `(pair13 (x) pair24)` expected after a herald, normalized.
pub fn entangler_target(input: &EntanglerInput, hwp_on_output3: bool) -> Result<PhotonicState> {
    let ([hh13, vv13], [hh24, vv24]) = input.pair_coefficients();
    let pair13 = if hwp_on_output3 { [zero(), hh13, vv13, zero()] } else { [hh13, zero(), zero(), vv13] };
    let p13 = PhotonicState::two_qubit([&"out1".into(), &"out3".into()], pair13, 0);
    let p24 = PhotonicState::two_qubit([&"out2".into(), &"out4".into()], [hh24, zero(), zero(), vv24], 0);
    p13.tensor(&p24).normalized()
}

pub fn run_entangler(input: &EntanglerInput, hwp_on_output3: bool, probe: &KerrProbe, model: ErrorModel) -> Result<EntanglerOutcome> {
    let mut g = build_entangler(input, hwp_on_output3, probe);
    g.error_model = model;
    let result = simulate(&g, &input.signal_state())?;
    let sel = post_select_record(&result, heralded)?;
    let state = match sel.state {
        Some(s) => s,
        // Heralds that disagree with the photon content (overlap model)
        // leave a mixture; report the dominant branch.
        None => sel.branches.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap().state.clone(),
    };
    let target = entangler_target(input, hwp_on_output3)?;
    let mut fidelity = 0.0;
    for b in &sel.branches {
        fidelity += b.probability * b.state.fidelity(&target);
    }
    fidelity /= sel.probability;
    let c13 = wootters_concurrence(&state.reduced_density(&["out1".into(), "out3".into()])?)?;
    let c24 = wootters_concurrence(&state.reduced_density(&["out2".into(), "out4".into()])?)?;
    Ok(EntanglerOutcome { herald_probability: sel.probability, state, concurrence_13: c13, concurrence_24: c24, fidelity })
}

// ---------------------------------------------------------------------------
// Verification.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmplitudeRow {
    pub ket: String,
    pub re: f64,
    pub im: f64,
}

pub(crate) fn state_rows(s: &PhotonicState) -> Vec<AmplitudeRow> {
    amplitude_rows(s).into_iter().map(|(ket, re, im)| AmplitudeRow { ket, re, im }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchVerdict {
    pub record: String,
    pub probability: f64,
    /// Fidelity of the coincident output part with the expected state.
    pub fidelity: f64,
    /// Share of `probability` that delivers the expected state.
    pub success: f64,
    pub state: Vec<AmplitudeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceCheck {
    pub point: String,
    pub path: String,
    pub expected: String,
    pub found: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputVerdict {
    pub input: String,
    pub expected: String,
    pub success_probability: f64,
    pub passed: bool,
    pub branches: Vec<BranchVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntanglementMetrics {
    pub herald_probability: f64,
    pub concurrence_13: f64,
    pub concurrence_24: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub experiment: String,
    pub verdicts: Vec<InputVerdict>,
    pub aggregate_success: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<EntanglementMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            experiment: experiment.into(),
            verdicts: Vec::new(),
            aggregate_success: 0.0,
            passed: true,
            entanglement: None,
            notes: Vec::new(),
        }
    }
}

fn basis_ket(p: Pol) -> &'static str {
    match p {
        Pol::H => "H",
        Pol::V => "V",
    }
}

fn branch_verdicts(result: &RunResult, expect: &PhotonicState) -> Vec<BranchVerdict> {
    result
        .branches
        .iter()
        .map(|b| {
            let (success, fidelity) = matching_weight(b, &result.outputs, result.output_bin, expect);
            BranchVerdict { record: b.record.to_string(), probability: b.probability, fidelity, success, state: state_rows(&b.state) }
        })
        .collect()
}

fn photons_on(state: &PhotonicState, path: &str) -> Option<Vec<(Pol, u32)>> {
    let mut terms = state.terms();
    let (ket, _, _) = terms.next()?;
    if terms.next().is_some() {
        return None;
    }
    let p = PathId::new(path);
    let mut v: Vec<(Pol, u32)> = Vec::new();
    for (m, n) in ket.iter() {
        if m.path == p {
            for _ in 0..n {
                v.push((m.pol, m.bin));
            }
        }
    }
    Some(v)
}

fn fmt_photons(v: &[(Pol, u32)]) -> String {
    if v.is_empty() {
        return "0".into();
    }
    v.iter().map(|(p, b)| format!("{p}_{b}")).collect::<Vec<_>>().join(" ")
}

/// Runs every basis input and compares the output kets (and any trace
/// cells) with the table.
pub fn verify_truth_table(circuit: &CircuitGraph, oracle: &TruthTable) -> Result<ExperimentReport> {
    if circuit.inputs.len() != 2 || circuit.outputs.len() != 2 {
        return Err(PhotonicError::InvalidCircuit("truth tables need two input and two output ports".into()));
    }
    let mut report = ExperimentReport::new(&circuit.name);
    let mut total = 0.0;
    for row in &oracle.rows {
        let (ci, ti) = row.input;
        let input = PhotonicState::qubit(&circuit.inputs[0], QubitAmplitudes::basis(ci))
            .tensor(&PhotonicState::qubit(&circuit.inputs[1], QubitAmplitudes::basis(ti)));
        let result = simulate(circuit, &input)?;
        let expect = BasisKet::from_modes([
            ModeId::new(&circuit.outputs[0], row.output.0, circuit.output_bin),
            ModeId::new(&circuit.outputs[1], row.output.1, circuit.output_bin),
        ]);
        let expect = PhotonicState::from_ket(expect);
        let branches = branch_verdicts(&result, &expect);
        let success: f64 = branches.iter().map(|b| b.success).sum();
        let mut traces = Vec::new();
        for te in &row.traces {
            let found = result.branches.first().and_then(|b| b.trace(te.point)).and_then(|s| photons_on(s, te.path));
            let mut want = te.photons.clone();
            want.sort();
            let passed = result.branches.len() == 1
                && found.as_ref().map(|f| {
                    let mut f = f.clone();
                    f.sort();
                    f == want
                }) == Some(true);
            traces.push(TraceCheck {
                point: te.point.into(),
                path: te.path.into(),
                expected: fmt_photons(&te.photons),
                found: found.map(|f| fmt_photons(&f)).unwrap_or_else(|| "<superposition>".into()),
                passed,
            });
        }
        let passed = (success - oracle.expected_success).abs() < 1e-10 && traces.iter().all(|t| t.passed);
        report.passed &= passed;
        total += success;
        report.verdicts.push(InputVerdict {
            input: format!("{}{}", basis_ket(ci), basis_ket(ti)),
            expected: format!("{}{}", basis_ket(row.output.0), basis_ket(row.output.1)),
            success_probability: success,
            passed,
            branches,
            traces,
        });
    }
    report.aggregate_success = total / oracle.rows.len() as f64;
    Ok(report)
}

/// Trial inputs spanning the two-qubit space: the four basis products,
/// |+>|+>, and one fixed unbalanced pair.
pub fn spanning_trials() -> Vec<(QubitAmplitudes, QubitAmplitudes)> {
    let mut v = Vec::new();
    for a in [Pol::H, Pol::V] {
        for b in [Pol::H, Pol::V] {
            v.push((QubitAmplitudes::basis(a), QubitAmplitudes::basis(b)));
        }
    }
    v.push((QubitAmplitudes::plus(), QubitAmplitudes::plus()));
    v.push((
        QubitAmplitudes::new(c(0.3f64.sqrt(), 0.0), c(0.0, 0.7f64.sqrt())).unwrap(),
        QubitAmplitudes::new(c(0.6f64.sqrt(), 0.0), c(-(0.4f64.sqrt()), 0.0)).unwrap(),
    ));
    v
}

fn fmt_qubit(q: &QubitAmplitudes) -> String {
    format!("({:.4}{:+.4}i, {:.4}{:+.4}i)", q.h.re, q.h.im, q.v.re, q.v.im)
}

/// Runs each trial, optionally applies the circuit's corrections, and
/// measures the weight of branches that equal `oracle * input`.
pub fn verify_quantum_gate(
    circuit: &CircuitGraph,
    oracle: &Matrix4<C64>,
    trials: &[(QubitAmplitudes, QubitAmplitudes)],
    corrected: bool,
    expected_success: Option<f64>,
    exec: Execution,
) -> Result<ExperimentReport> {
    let verdicts: Vec<Result<InputVerdict>> = par::map(exec, trials, |(ctl, tgt)| {
        let input = PhotonicState::qubit(&circuit.inputs[0], *ctl).tensor(&PhotonicState::qubit(&circuit.inputs[1], *tgt));
        let mut result = simulate(circuit, &input)?;
        if corrected {
            result = apply_corrections(&result, &circuit.corrections)?;
        }
        let expect = expected_output(&result, oracle, (ctl, tgt))?;
        let branches = branch_verdicts(&result, &expect);
        let success: f64 = branches.iter().map(|b| b.success).sum();
        let passed = match expected_success {
            Some(p) => (success - p).abs() < 1e-10,
            None => success > 0.0,
        };
        Ok(InputVerdict {
            input: format!("{} x {}", fmt_qubit(ctl), fmt_qubit(tgt)),
            expected: expect.to_string(),
            success_probability: success,
            passed,
            branches,
            traces: Vec::new(),
        })
    });
    let mut report = ExperimentReport::new(&circuit.name);
    for v in verdicts {
        let v = v?;
        report.passed &= v.passed;
        report.aggregate_success += v.success_probability;
        report.verdicts.push(v);
    }
    if !trials.is_empty() {
        report.aggregate_success /= trials.len() as f64;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::success_probability;

    fn probe() -> KerrProbe {
        KerrProbe::with_mean_n("p", 100.0, 0.5).unwrap()
    }

    #[test]
    fn gate_matrices_are_permutations() {
        for m in [cnot(), cnot_on_h(), identity4()] {
            let p = m.adjoint() * m;
            assert!((p - Matrix4::<C64>::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn ancilla_cnot_table() {
        let g = build_classical_cnot_ancilla();
        let report = verify_truth_table(&g, &TruthTable::cnot()).unwrap();
        assert!(report.passed, "{report:#?}");
        let wrong = verify_truth_table(&g, &TruthTable::identity()).unwrap();
        assert!(!wrong.passed);
        let failing: Vec<_> = wrong.verdicts.iter().filter(|v| !v.passed).map(|v| v.input.clone()).collect();
        assert_eq!(failing, vec!["VH", "VV"]);
    }

    #[test]
    fn qnd_cnot_table_with_traces() {
        let g = build_classical_cnot_qnd(&probe());
        let report = verify_truth_table(&g, &TruthTable::time_bin_cnot()).unwrap();
        assert!(report.passed, "{}", serde_json::to_string_pretty(&report).unwrap());
    }

    #[test]
    fn bell_cnot_success() {
        let g = build_bell_cnot(&bell_resource(phi_plus())).unwrap();
        let (a, b) = (QubitAmplitudes::real(0.3f64.sqrt(), 0.7f64.sqrt()).unwrap(), QubitAmplitudes::real(0.6f64.sqrt(), 0.4f64.sqrt()).unwrap());
        let input = PhotonicState::qubit("c", a).tensor(&PhotonicState::qubit("t", b));
        let r = simulate(&g, &input).unwrap();
        assert!((r.total_probability() - 1.0).abs() < 1e-10);
        let p = success_probability(&r, &cnot(), (&a, &b)).unwrap();
        assert!((p - 1.0 / 16.0).abs() < 1e-12, "{p}");
        let rc = apply_corrections(&r, &g.corrections).unwrap();
        let p = success_probability(&rc, &cnot(), (&a, &b)).unwrap();
        assert!((p - 0.25).abs() < 1e-12, "{p}");
    }

    #[test]
    fn fiber_cnot_success() {
        let g = build_fiber_cnot();
        let (a, b) = (QubitAmplitudes::real(0.3f64.sqrt(), 0.7f64.sqrt()).unwrap(), QubitAmplitudes::real(0.6f64.sqrt(), 0.4f64.sqrt()).unwrap());
        let input = PhotonicState::qubit("c", a).tensor(&PhotonicState::qubit("t", b));
        let r = simulate(&g, &input).unwrap();
        assert!((r.total_probability() - 1.0).abs() < 1e-10);
        let p = success_probability(&r, &cnot(), (&a, &b)).unwrap();
        assert!((p - 1.0 / 32.0).abs() < 1e-12, "{p}");
        let rc = apply_corrections(&r, &g.corrections).unwrap();
        let p = success_probability(&rc, &cnot(), (&a, &b)).unwrap();
        assert!((p - 0.125).abs() < 1e-12, "{p}");
    }

    #[test]
    fn entangler_uniform() {
        let out = run_entangler(&EntanglerInput::uniform(), false, &probe(), ErrorModel::Ideal).unwrap();
        assert!((out.herald_probability - 0.25).abs() < 1e-12);
        assert!((out.concurrence_13 - 1.0).abs() < 1e-10);
        assert!((out.concurrence_24 - 1.0).abs() < 1e-10);
        assert!((out.fidelity - 1.0).abs() < 1e-12);
        let out = run_entangler(&EntanglerInput::uniform(), true, &probe(), ErrorModel::Ideal).unwrap();
        assert!((out.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_cnot_rejects_bad_resource() {
        let bad = PhotonicState::qubit("e1", QubitAmplitudes::h());
        assert!(build_bell_cnot(&bad).is_err());
    }
}
