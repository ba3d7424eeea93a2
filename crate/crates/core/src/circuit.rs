//! Circuit graphs, exact branch enumeration, feed-forward and post-selection.
//!
//! Elements run in schedule-slot order (ties keep insertion order). Every
//! measurement splits the current trajectories into branches; branch states
//! stay unnormalized while the circuit runs so that amplitudes remain linear
//! in the input and a branch's weight is its squared norm. Feed-forward rules
//! are evaluated as soon as every element they reference has been measured.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::Matrix4;
use serde::Serialize;

use crate::error::{PhotonicError, Result};
use crate::fock::{BasisKet, PathId, PhotonicState, QubitAmplitudes, C64};
use crate::optics::{apply_jones, delay, route, BinSelector, JonesMatrix, Pbs, SwitchSchedule};
use crate::qnd::{discriminate_raw, kerr_interact, polarization_preserving_interaction, ErrorModel, KerrProbe, ModeSet};
pub use crate::sampling::{sample, Histogram};

/// Branches with weight below this are dropped.
const BRANCH_EPSILON: f64 = 1e-28;

/// Two branch states closer than this (in infidelity) are merged.
const MERGE_TOLERANCE: f64 = 1e-12;

/// Fidelity threshold that counts a branch as a successful gate run.
pub const SUCCESS_FIDELITY: f64 = 1.0 - 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QndScheme {
    /// Probe couples to both polarizations of the path directly.
    Presence,
    /// PBS split, common probe on both arms, recombination.
    PolarizationPreserving,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Pbs(Pbs),
    Jones { path: PathId, bins: BinSelector, matrix: JonesMatrix },
    Pockels { path: PathId, bins: BinSelector },
    Delay { path: PathId, bins: u32 },
    Route { map: Vec<(PathId, PathId)>, bins: BinSelector },
    Qnd { path: PathId, probe: KerrProbe, scheme: QndScheme },
    /// Absorbing detector; `number_resolving` records counts instead of clicks.
    Detector { path: PathId, number_resolving: bool },
    /// Named snapshot of the branch state.
    Trace,
}

impl ElementKind {
    pub fn is_measurement(&self) -> bool {
        matches!(self, ElementKind::Qnd { .. } | ElementKind::Detector { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Always,
    /// Idle unless a feed-forward rule activates it.
    OnSignal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub id: String,
    pub slot: u32,
    pub kind: ElementKind,
    pub control: Control,
    /// Physical device this pass belongs to, when one device is traversed
    /// several times.
    pub device: Option<String>,
}

impl Element {
    pub fn new(id: &str, slot: u32, kind: ElementKind) -> Self {
        Self { id: id.to_string(), slot, kind, control: Control::Always, device: None }
    }

    pub fn on_signal(mut self) -> Self {
        self.control = Control::OnSignal;
        self
    }

    pub fn device(mut self, name: &str) -> Self {
        self.device = Some(name.to_string());
        self
    }
}

/// Classical outcomes so far: element id -> click/count or QND label.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Record(BTreeMap<String, u32>);

impl Record {
    pub fn get(&self, id: &str) -> Option<u32> {
        self.0.get(id).copied()
    }

    pub fn insert(&mut self, id: &str, value: u32) {
        self.0.insert(id.to_string(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Ids whose value is nonzero.
    pub fn clicked(&self) -> BTreeSet<&str> {
        self.0.iter().filter(|(_, v)| **v > 0).map(|(k, _)| k.as_str()).collect()
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expect {
    Click,
    NoClick,
    Count(u32),
}

impl Expect {
    fn holds(self, value: u32) -> bool {
        match self {
            Expect::Click => value > 0,
            Expect::NoClick => value == 0,
            Expect::Count(n) => value == n,
        }
    }
}

/// Conjunction of conditions on recorded outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trigger(pub Vec<(String, Expect)>);

impl Trigger {
    pub fn when(id: &str, e: Expect) -> Self {
        Trigger(vec![(id.to_string(), e)])
    }

    pub fn and(mut self, id: &str, e: Expect) -> Self {
        self.0.push((id.to_string(), e));
        self
    }

    /// `None` while some referenced element has not been measured yet.
    pub fn evaluate(&self, record: &Record) -> Option<bool> {
        let mut ok = true;
        for (id, e) in &self.0 {
            let v = record.get(id)?;
            ok &= e.holds(v);
        }
        Some(ok)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Activate(String),
    Correct { path: PathId, bins: BinSelector, matrix: JonesMatrix },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForwardRule {
    pub trigger: Trigger,
    pub actions: Vec<Action>,
}

impl FeedForwardRule {
    pub fn new(trigger: Trigger, actions: Vec<Action>) -> Self {
        Self { trigger, actions }
    }
}

/// A timed network of optical elements, measurements and classical control.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitGraph {
    pub name: String,
    /// Ports the caller's input state may occupy.
    pub inputs: Vec<PathId>,
    /// Qubit output ports, in register order.
    pub outputs: Vec<PathId>,
    /// Time bin the output photons leave in.
    pub output_bin: u32,
    /// Ancilla or resource photons prepared by the circuit itself.
    pub resource: Option<PhotonicState>,
    pub elements: Vec<Element>,
    /// Feed-forward applied while the circuit runs.
    pub rules: Vec<FeedForwardRule>,
    /// Post-measurement single-qubit corrections, applied by
    /// [`apply_corrections`].
    pub corrections: Vec<FeedForwardRule>,
    pub error_model: ErrorModel,
    /// Which party holds each port; labeling only.
    pub port_owner: BTreeMap<PathId, String>,
}

impl CircuitGraph {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            output_bin: 0,
            resource: None,
            elements: Vec::new(),
            rules: Vec::new(),
            corrections: Vec::new(),
            error_model: ErrorModel::Ideal,
            port_owner: BTreeMap::new(),
        }
    }

    pub fn with_inputs(mut self, ports: &[&str]) -> Self {
        self.inputs = ports.iter().map(|p| PathId::new(p)).collect();
        self
    }

    pub fn with_outputs(mut self, ports: &[&str]) -> Self {
        self.outputs = ports.iter().map(|p| PathId::new(p)).collect();
        self
    }

    pub fn with_resource(mut self, resource: PhotonicState) -> Self {
        self.resource = Some(resource);
        self
    }

    pub fn push(&mut self, element: Element) -> &mut Self {
        self.elements.push(element);
        self
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn probes(&self) -> Vec<&KerrProbe> {
        self.elements
            .iter()
            .filter_map(|e| match &e.kind {
                ElementKind::Qnd { probe, .. } => Some(probe),
                _ => None,
            })
            .collect()
    }

    /// Replaces the probe of every QND element, keeping each element's id.
    pub fn set_probe_parameters(&mut self, template: &KerrProbe) {
        for e in &mut self.elements {
            if let ElementKind::Qnd { probe, .. } = &mut e.kind {
                *probe = template.relabeled(&e.id);
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.elements {
            if !ids.insert(e.id.as_str()) {
                return Err(PhotonicError::InvalidCircuit(format!("duplicate element id {}", e.id)));
            }
        }
        let mut probe_ids = BTreeSet::new();
        for p in self.probes() {
            if !probe_ids.insert(p.id().clone()) {
                return Err(PhotonicError::InvalidCircuit(format!("probe {} used at two locations", p.id())));
            }
        }
        for rule in self.rules.iter().chain(&self.corrections) {
            for (id, _) in &rule.trigger.0 {
                let e = self.element(id).ok_or_else(|| PhotonicError::UnknownElement(id.clone()))?;
                if !e.kind.is_measurement() {
                    return Err(PhotonicError::InvalidCircuit(format!("trigger references non-measurement {id}")));
                }
            }
            for a in &rule.actions {
                if let Action::Activate(id) = a {
                    let e = self.element(id).ok_or_else(|| PhotonicError::UnknownElement(id.clone()))?;
                    if e.control != Control::OnSignal {
                        return Err(PhotonicError::InvalidCircuit(format!("{id} is not switchable")));
                    }
                }
            }
        }
        Ok(())
    }

    fn schedule(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.elements.len()).collect();
        order.sort_by_key(|&i| (self.elements[i].slot, i));
        order
    }
}

/// Hidden detail of one measurement in a fine-grained branch.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MeasurementDetail {
    /// Photons absorbed by a detector, with their modes.
    Absorbed { id: String, photons: BasisKet },
    /// Photon count actually present at a QND location.
    QndCount { id: String, true_count: u32 },
}

/// Fine-grained, unnormalized branch: the record plus everything the
/// measurement apparatus learned, with the surviving signal amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct RawBranch {
    pub record: Record,
    pub details: Vec<MeasurementDetail>,
    pub state: PhotonicState,
    pub traces: Vec<(String, PhotonicState)>,
}

impl RawBranch {
    pub fn weight(&self) -> f64 {
        self.state.norm_squared()
    }
}

#[derive(Clone)]
struct Trajectory {
    branch: RawBranch,
    active: BTreeSet<String>,
    fired: Vec<bool>,
}

/// Runs the circuit on `input` and returns every fine-grained branch with
/// unnormalized amplitudes. Linear in `input`.
pub fn simulate_branches(circuit: &CircuitGraph, input: &PhotonicState) -> Result<Vec<RawBranch>> {
    circuit.validate()?;
    for p in input.occupied_paths() {
        if !circuit.inputs.contains(&p) {
            return Err(PhotonicError::InvalidInput(format!("input occupies undeclared port {p}")));
        }
    }
    let initial = match &circuit.resource {
        Some(r) => {
            if let Some(p) = r.occupied_paths().intersection(&input.occupied_paths()).next() {
                return Err(PhotonicError::InvalidInput(format!("input overlaps resource port {p}")));
            }
            input.tensor(r)
        }
        None => input.clone(),
    };

    let mut trajs = vec![Trajectory {
        branch: RawBranch { record: Record::default(), details: Vec::new(), state: initial, traces: Vec::new() },
        active: BTreeSet::new(),
        fired: vec![false; circuit.rules.len()],
    }];

    for idx in circuit.schedule() {
        let el = &circuit.elements[idx];
        let mut next = Vec::with_capacity(trajs.len());
        for t in trajs {
            let enabled = el.control == Control::Always || t.active.contains(&el.id);
            if !enabled {
                next.push(t);
                continue;
            }
            for mut t in apply_element(el, t, circuit.error_model)? {
                if el.kind.is_measurement() {
                    fire_rules(circuit, el, &mut t)?;
                }
                if t.branch.state.norm_squared() > BRANCH_EPSILON {
                    next.push(t);
                }
            }
        }
        trajs = next;
    }
    Ok(trajs.into_iter().map(|t| t.branch).collect())
}

fn apply_element(el: &Element, mut t: Trajectory, model: ErrorModel) -> Result<Vec<Trajectory>> {
    let state = &t.branch.state;
    let new_state = match &el.kind {
        ElementKind::Pbs(pbs) => pbs.apply(state),
        ElementKind::Jones { path, bins, matrix } => apply_jones(state, path, *bins, matrix),
        ElementKind::Pockels { path, bins } => apply_jones(state, path, *bins, &JonesMatrix::x()),
        ElementKind::Delay { path, bins } => delay(state, path, *bins),
        ElementKind::Route { map, bins } => route(state, map, SwitchSchedule::always(*bins), true)?,
        ElementKind::Trace => {
            if let Ok(n) = state.normalized() {
                t.branch.traces.push((el.id.clone(), n));
            }
            return Ok(vec![t]);
        }
        ElementKind::Detector { path, number_resolving } => {
            let mut out = Vec::new();
            for (absorbed, rest) in state.split_off(|m| &m.path == path) {
                let n = absorbed.total();
                let mut child = t.clone();
                child.branch.record.insert(&el.id, if *number_resolving { n } else { n.min(1) });
                child.branch.details.push(MeasurementDetail::Absorbed { id: el.id.clone(), photons: absorbed });
                child.branch.state = rest;
                out.push(child);
            }
            return Ok(out);
        }
        ElementKind::Qnd { path, probe, scheme } => {
            let tagged = match scheme {
                QndScheme::Presence => kerr_interact(state, &ModeSet::Paths(vec![path.clone()]), probe),
                QndScheme::PolarizationPreserving => polarization_preserving_interaction(state, path, probe),
            };
            let mut out = Vec::new();
            for b in discriminate_raw(&tagged, probe, model)? {
                let mut child = t.clone();
                child.branch.record.insert(&el.id, b.reported);
                child.branch.details.push(MeasurementDetail::QndCount { id: el.id.clone(), true_count: b.true_count });
                child.branch.state = b.state;
                out.push(child);
            }
            return Ok(out);
        }
    };
    t.branch.state = new_state;
    Ok(vec![t])
}

fn fire_rules(circuit: &CircuitGraph, current: &Element, t: &mut Trajectory) -> Result<()> {
    for (i, rule) in circuit.rules.iter().enumerate() {
        if t.fired[i] {
            continue;
        }
        let Some(matched) = rule.trigger.evaluate(&t.branch.record) else { continue };
        t.fired[i] = true;
        if !matched {
            continue;
        }
        for action in &rule.actions {
            match action {
                Action::Activate(id) => {
                    let target = circuit.element(id).ok_or_else(|| PhotonicError::UnknownElement(id.clone()))?;
                    if target.slot <= current.slot {
                        return Err(PhotonicError::ScheduleViolation {
                            target: id.clone(),
                            target_slot: target.slot,
                            current_slot: current.slot,
                        });
                    }
                    t.active.insert(id.clone());
                }
                Action::Correct { path, bins, matrix } => {
                    t.branch.state = apply_jones(&t.branch.state, path, *bins, matrix);
                }
            }
        }
    }
    Ok(())
}

/// One classical outcome with its normalized conditional state.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub record: Record,
    pub probability: f64,
    pub state: PhotonicState,
    pub traces: Vec<(String, PhotonicState)>,
}

impl Branch {
    pub fn trace(&self, id: &str) -> Option<&PhotonicState> {
        self.traces.iter().find(|(k, _)| k == id).map(|(_, s)| s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMetadata {
    pub error_model: ErrorModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub branches: Vec<Branch>,
    pub input: PhotonicState,
    pub outputs: Vec<PathId>,
    pub output_bin: u32,
    pub metadata: RunMetadata,
}

impl RunResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Probability of each distinct record.
    pub fn record_distribution(&self) -> BTreeMap<Record, f64> {
        let mut out = BTreeMap::new();
        for b in &self.branches {
            *out.entry(b.record.clone()).or_insert(0.0) += b.probability;
        }
        out
    }

    pub fn record_probability(&self, pred: impl Fn(&Record) -> bool) -> f64 {
        self.branches.iter().filter(|b| pred(&b.record)).map(|b| b.probability).sum()
    }

    /// JSON shape `{branches: [{record, probability, state: [{ket, re, im}]}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(RunResultDto::from(self)).expect("plain data serializes")
    }
}

#[derive(Serialize)]
struct AmplitudeDto {
    ket: String,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct BranchDto {
    record: Record,
    probability: f64,
    state: Vec<AmplitudeDto>,
}

#[derive(Serialize)]
struct RunResultDto {
    branches: Vec<BranchDto>,
    input: Vec<AmplitudeDto>,
    metadata: RunMetadata,
}

pub(crate) fn amplitude_rows(s: &PhotonicState) -> Vec<(String, f64, f64)> {
    s.terms().map(|(k, _, a)| (k.to_string(), a.re, a.im)).collect()
}

fn amplitude_dtos(s: &PhotonicState) -> Vec<AmplitudeDto> {
    amplitude_rows(s).into_iter().map(|(ket, re, im)| AmplitudeDto { ket, re, im }).collect()
}

impl From<&RunResult> for RunResultDto {
    fn from(r: &RunResult) -> Self {
        RunResultDto {
            branches: r
                .branches
                .iter()
                .map(|b| BranchDto { record: b.record.clone(), probability: b.probability, state: amplitude_dtos(&b.state) })
                .collect(),
            input: amplitude_dtos(&r.input),
            metadata: r.metadata.clone(),
        }
    }
}

fn same_up_to_phase(a: &PhotonicState, b: &PhotonicState) -> bool {
    a.fidelity(b) > 1.0 - MERGE_TOLERANCE
}

fn traces_match(a: &[(String, PhotonicState)], b: &[(String, PhotonicState)]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|((ka, sa), (kb, sb))| ka == kb && same_up_to_phase(sa, sb))
}

/// Groups fine-grained branches by record and merges those whose states
/// coincide up to a global phase. Records come out in sorted order.
pub fn coalesce(raw: Vec<(Record, f64, PhotonicState, Vec<(String, PhotonicState)>)>) -> Result<Vec<Branch>> {
    let mut by_record: BTreeMap<Record, Vec<Branch>> = BTreeMap::new();
    for (record, p, state, traces) in raw {
        if p <= BRANCH_EPSILON {
            continue;
        }
        let state = state.normalized()?;
        let group = by_record.entry(record.clone()).or_default();
        match group.iter_mut().find(|b| same_up_to_phase(&b.state, &state) && traces_match(&b.traces, &traces)) {
            Some(b) => b.probability += p,
            None => group.push(Branch { record, probability: p, state, traces }),
        }
    }
    Ok(by_record.into_values().flatten().collect())
}

/// Exhaustive, deterministic branch enumeration.
pub fn simulate(circuit: &CircuitGraph, input: &PhotonicState) -> Result<RunResult> {
    let raw = simulate_branches(circuit, input)?;
    let branches = coalesce(raw.into_iter().map(|b| {
        let p = b.weight();
        (b.record, p, b.state, b.traces)
    }).collect())?;
    Ok(RunResult {
        branches,
        input: input.clone(),
        outputs: circuit.outputs.clone(),
        output_bin: circuit.output_bin,
        metadata: RunMetadata { error_model: circuit.error_model, seed: None },
    })
}

/// Outcome of a post-selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub probability: f64,
    /// Present when every selected branch carries the same state up to
    /// global phase.
    pub state: Option<PhotonicState>,
    pub branches: Vec<Branch>,
}

/// Keeps the branches matching `pred`.
pub fn post_select(result: &RunResult, pred: impl Fn(&Branch) -> bool) -> Result<Selection> {
    let branches: Vec<Branch> = result.branches.iter().filter(|b| pred(b)).cloned().collect();
    if branches.is_empty() {
        return Err(PhotonicError::EmptySelection);
    }
    let probability = branches.iter().map(|b| b.probability).sum();
    let first = &branches[0].state;
    let state = branches.iter().all(|b| same_up_to_phase(&b.state, first)).then(|| first.clone());
    Ok(Selection { probability, state, branches })
}

/// Post-selection on the classical record only.
pub fn post_select_record(result: &RunResult, pred: impl Fn(&Record) -> bool) -> Result<Selection> {
    post_select(result, |b| pred(&b.record))
}

/// Applies single-qubit corrections to the branches whose record triggers a
/// rule. At most one rule may match any branch.
pub fn apply_corrections(result: &RunResult, rules: &[FeedForwardRule]) -> Result<RunResult> {
    let mut raw = Vec::with_capacity(result.branches.len());
    for b in &result.branches {
        let mut matching = rules.iter().filter(|r| r.trigger.evaluate(&b.record) == Some(true));
        let rule = matching.next();
        if matching.next().is_some() {
            return Err(PhotonicError::AmbiguousRules(b.record.to_string()));
        }
        let mut state = b.state.clone();
        if let Some(rule) = rule {
            for a in &rule.actions {
                match a {
                    Action::Correct { path, bins, matrix } => state = apply_jones(&state, path, *bins, matrix),
                    Action::Activate(id) => {
                        return Err(PhotonicError::InvalidCircuit(format!(
                            "correction rules may only apply Jones matrices, found activation of {id}"
                        )))
                    }
                }
            }
        }
        raw.push((b.record.clone(), b.probability, state, b.traces.clone()));
    }
    Ok(RunResult { branches: coalesce(raw)?, ..result.clone() })
}

/// `U (control (x) target)` laid out on the result's output ports.
pub fn expected_output(result: &RunResult, target: &Matrix4<C64>, input: (&QubitAmplitudes, &QubitAmplitudes)) -> Result<PhotonicState> {
    if result.outputs.len() != 2 {
        return Err(PhotonicError::InvalidCircuit("gate comparison needs exactly two output ports".into()));
    }
    let amps = crate::fock::product_amplitudes(input.0, input.1);
    let v = nalgebra::Vector4::from_column_slice(&amps);
    let out = target * v;
    Ok(PhotonicState::two_qubit(
        [&result.outputs[0], &result.outputs[1]],
        [out[0], out[1], out[2], out[3]],
        result.output_bin,
    ))
}

/// Coincidence post-selection on the output register: the part of `state`
/// with exactly one photon on each output port in `bin` and nothing else,
/// with its weight.
pub fn output_coincidence(state: &PhotonicState, outputs: &[PathId], bin: u32) -> (PhotonicState, f64) {
    let n = outputs.len() as u32;
    state.project(|k| {
        k.total() == n && outputs.iter().all(|p| k.count_where(|m| &m.path == p && m.bin == bin) == 1)
    })
}

/// Weight of a branch that carries `expect` after coincidence selection on
/// the outputs; zero unless the selected state matches with fidelity above
/// [`SUCCESS_FIDELITY`].
pub fn matching_weight(branch: &Branch, outputs: &[PathId], bin: u32, expect: &PhotonicState) -> (f64, f64) {
    let (sel, w) = output_coincidence(&branch.state, outputs, bin);
    if w <= BRANCH_EPSILON {
        return (0.0, 0.0);
    }
    let f = sel.fidelity(expect);
    (if f > SUCCESS_FIDELITY { branch.probability * w } else { 0.0 }, f)
}

/// Probability of obtaining `target * input` on the outputs in coincidence:
/// summed over branches whose coincident output state matches with
/// fidelity above [`SUCCESS_FIDELITY`].
pub fn success_probability(result: &RunResult, target: &Matrix4<C64>, input: (&QubitAmplitudes, &QubitAmplitudes)) -> Result<f64> {
    let expect = expected_output(result, target, input)?;
    Ok(result.branches.iter().map(|b| matching_weight(b, &result.outputs, result.output_bin, &expect).0).sum())
}
