//! Session timelines and behaviour tags computed from stored experiments.
//!
//! Each detector is a fixed rule over the step records of a session; they
//! approximate a human reading of the experiment log, nothing more.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ReactorConfig;
use crate::recipe::Action;
use crate::telemetry::MASS_EPSILON;
use crate::transport::StepRecord;

/// Per-cycle gain must stay within this fraction of its mean.
pub const CYCLE_STABILITY: f64 = 0.2;

/// What the detectors need to know about one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEvidence {
    pub id: u64,
    pub recipe_text: String,
    /// Simulated seconds consumed.
    pub duration: f64,
    /// First line of the narrative header.
    pub header: String,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorTags {
    pub ale: bool,
    pub ald: bool,
    pub asd: bool,
    pub t_dep: bool,
    pub decomposition: bool,
    pub co_dosing: bool,
    pub multistep: bool,
    pub repeats: bool,
}

impl BehaviorTags {
    pub const LABELS: [&'static str; 8] = [
        "ALE",
        "ALD",
        "ASD",
        "T-dep",
        "Decomposition",
        "Co-dosing",
        "Multistep",
        "Repeats",
    ];

    pub fn flags(&self) -> [bool; 8] {
        [
            self.ale,
            self.ald,
            self.asd,
            self.t_dep,
            self.decomposition,
            self.co_dosing,
            self.multistep,
            self.repeats,
        ]
    }

    pub fn labels(&self) -> Vec<&'static str> {
        Self::LABELS
            .iter()
            .zip(self.flags())
            .filter(|(_, f)| *f)
            .map(|(l, _)| *l)
            .collect()
    }

    pub fn union(&self, other: &BehaviorTags) -> BehaviorTags {
        BehaviorTags {
            ale: self.ale || other.ale,
            ald: self.ald || other.ald,
            asd: self.asd || other.asd,
            t_dep: self.t_dep || other.t_dep,
            decomposition: self.decomposition || other.decomposition,
            co_dosing: self.co_dosing || other.co_dosing,
            multistep: self.multistep || other.multistep,
            repeats: self.repeats || other.repeats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub experiment_id: u64,
    pub duration: f64,
    pub header: String,
    /// Behaviours first evidenced by this experiment.
    pub tags: BehaviorTags,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionTimeline {
    pub entries: Vec<TimelineEntry>,
    pub count: usize,
    pub time_used: f64,
    pub tags: BehaviorTags,
    /// Chemical order of each cyclic block with three or more chemicals, e.g. `C-B-A`.
    pub multistep_sequences: Vec<String>,
}

fn is_open_step(s: &StepRecord) -> bool {
    s.line.action == Action::Valve && s.line.setting >= 0.5
}

fn chemical_of(config: &ReactorConfig, valve: u32) -> String {
    config
        .bubbler_for_valve(valve)
        .map(|b| b.chemical.clone())
        .unwrap_or_else(|| format!("valve{valve}"))
}

fn qcm_change(s: &StepRecord) -> f64 {
    if s.qcm_start.is_empty() {
        0.0
    } else {
        s.qcm_change(0)
    }
}

/// A valve opening and the QCM change until the next valve opens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub step: usize,
    pub valve: u32,
    pub mass_change: f64,
}

pub fn pulses(steps: &[StepRecord]) -> Vec<Pulse> {
    let opens: Vec<usize> = (0..steps.len()).filter(|&k| is_open_step(&steps[k])).collect();
    opens
        .iter()
        .enumerate()
        .map(|(n, &k)| {
            let end = opens.get(n + 1).copied().unwrap_or(steps.len());
            Pulse {
                step: k,
                valve: steps[k].line.component,
                mass_change: steps[k..end].iter().map(qcm_change).sum(),
            }
        })
        .collect()
}

/// Net QCM change of every cycle of `block`, in order.
pub fn cycle_changes(steps: &[StepRecord], block: usize) -> Vec<f64> {
    let mut cycles: BTreeMap<u32, f64> = BTreeMap::new();
    for s in steps.iter().filter(|s| s.block == block) {
        *cycles.entry(s.cycle).or_insert(0.0) += qcm_change(s);
    }
    cycles.into_values().collect()
}

fn stable(values: &[f64]) -> bool {
    if values.is_empty() {
        return false;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= CYCLE_STABILITY * mean.abs()
}

/// (ALD, ALE) for one experiment: a cyclic block alternating two chemicals
/// whose per-cycle net QCM change is steady in sign and size.
fn cyclic_growth(steps: &[StepRecord]) -> (bool, bool) {
    let mut blocks: BTreeMap<usize, BTreeMap<u32, f64>> = BTreeMap::new();
    let mut valves: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for s in steps {
        *blocks.entry(s.block).or_default().entry(s.cycle).or_insert(0.0) += qcm_change(s);
        if is_open_step(s) {
            valves.entry(s.block).or_default().insert(s.line.component);
        }
    }
    let (mut ald, mut ale) = (false, false);
    for (block, cycles) in &blocks {
        if cycles.len() < 2 || valves.get(block).map_or(0, BTreeSet::len) != 2 {
            continue;
        }
        let gains: Vec<f64> = cycles.values().copied().collect();
        // the first cycle starts from a different surface
        let steady = if gains.len() >= 3 { &gains[1..] } else { &gains[..] };
        if !stable(steady) {
            continue;
        }
        if steady.iter().all(|&g| g > MASS_EPSILON) {
            ald = true;
        }
        if steady.iter().all(|&g| g < -MASS_EPSILON) {
            ale = true;
        }
    }
    (ald, ale)
}

fn multistep_sequences(steps: &[StepRecord], config: &ReactorConfig) -> Vec<String> {
    let mut order: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut cyclic: BTreeSet<usize> = BTreeSet::new();
    for s in steps {
        if s.cycle > 0 {
            cyclic.insert(s.block);
        }
        if is_open_step(s) && s.cycle == 0 {
            let seq = order.entry(s.block).or_default();
            if !seq.contains(&s.line.component) {
                seq.push(s.line.component);
            }
        }
    }
    order
        .into_iter()
        .filter(|(b, seq)| cyclic.contains(b) && seq.len() >= 3)
        .map(|(_, seq)| {
            seq.iter()
                .map(|&v| chemical_of(config, v))
                .collect::<Vec<_>>()
                .join("-")
        })
        .collect()
}

/// Valve schedule with temperatures and flows stripped, used to spot the
/// same experiment run hotter or colder.
fn valve_signature(steps: &[StepRecord]) -> String {
    let mut sig = String::new();
    for s in steps.iter().filter(|s| s.line.action == Action::Valve) {
        let _ = write!(sig, "{}:{}:{}:{};", s.block, s.line.component, s.line.setting, s.line.wait);
    }
    sig
}

fn pulse_temperatures(steps: &[StepRecord]) -> BTreeSet<i64> {
    steps
        .iter()
        .filter(|s| is_open_step(s))
        .map(|s| (s.reactor_temperature * 10.0).round() as i64)
        .collect()
}

/// Per-experiment flags for every detector, in session order.
pub fn tag_experiments(experiments: &[ExperimentEvidence], config: &ReactorConfig) -> Vec<BehaviorTags> {
    let mut out = vec![BehaviorTags::default(); experiments.len()];
    let mut seen_text: BTreeSet<&str> = BTreeSet::new();
    let mut signatures: BTreeMap<String, BTreeSet<i64>> = BTreeMap::new();
    let mut grew: BTreeSet<u32> = BTreeSet::new();
    // last pulse in the session: (valve, |Δm| above threshold)
    let mut last_pulse: Option<(u32, bool)> = None;

    for (i, exp) in experiments.iter().enumerate() {
        let tags = &mut out[i];
        let steps = &exp.steps;

        if !seen_text.insert(exp.recipe_text.as_str()) {
            tags.repeats = true;
        }

        let (ald, ale) = cyclic_growth(steps);
        tags.ald = ald;
        tags.ale = ale;
        tags.multistep = !multistep_sequences(steps, config).is_empty();

        for s in steps {
            if s.open_valves.len() >= 2 {
                tags.co_dosing = true;
            }
            for &v in &s.open_valves {
                let hot = config
                    .bubbler_for_valve(v)
                    .and_then(|b| config.chemical_index(&b.chemical))
                    .and_then(|c| config.chemicals[c].decomposition_temperature)
                    .is_some_and(|td| s.reactor_temperature > td);
                if hot {
                    tags.decomposition = true;
                }
            }
        }

        let sig = valve_signature(steps);
        let temps = pulse_temperatures(steps);
        if !sig.is_empty() && !temps.is_empty() {
            let known = signatures.entry(sig).or_default();
            let before = known.len();
            known.extend(temps);
            if known.len() >= 2 && known.len() > before {
                tags.t_dep = true;
            }
        }

        for p in pulses(steps) {
            let (dm, valve) = (p.mass_change, p.valve);
            let changed = dm.abs() > MASS_EPSILON;
            if let Some((prev, prev_changed)) = last_pulse {
                if prev_changed && prev != valve && grew.contains(&valve) && !changed {
                    tags.asd = true;
                }
            }
            if dm > MASS_EPSILON {
                grew.insert(valve);
            }
            last_pulse = Some((valve, changed));
        }
    }
    out
}

/// Session-wide tags: a behaviour is present once any experiment shows it.
pub fn tag_behaviors(experiments: &[ExperimentEvidence], config: &ReactorConfig) -> BehaviorTags {
    tag_experiments(experiments, config)
        .iter()
        .fold(BehaviorTags::default(), |acc, t| acc.union(t))
}

pub fn extract_timeline(experiments: &[ExperimentEvidence], config: &ReactorConfig) -> SessionTimeline {
    let per = tag_experiments(experiments, config);
    let entries: Vec<TimelineEntry> = experiments
        .iter()
        .zip(&per)
        .map(|(e, t)| TimelineEntry {
            experiment_id: e.id,
            duration: e.duration,
            header: e.header.clone(),
            tags: *t,
        })
        .collect();
    let mut multistep = Vec::new();
    for e in experiments {
        for s in multistep_sequences(&e.steps, config) {
            if !multistep.contains(&s) {
                multistep.push(s);
            }
        }
    }
    SessionTimeline {
        count: entries.len(),
        time_used: experiments.iter().map(|e| e.duration).sum(),
        tags: per.iter().fold(BehaviorTags::default(), |acc, t| acc.union(t)),
        entries,
        multistep_sequences: multistep,
    }
}

impl SessionTimeline {
    /// One summary row: experiment count, reactor time, then a column per tag.
    pub fn summary_table(&self) -> String {
        let mut head = String::from("Experiments\tTime (s)");
        let mut row = format!("{}\t{}", self.count, self.time_used);
        for (label, flag) in BehaviorTags::LABELS.iter().zip(self.tags.flags()) {
            let _ = write!(head, "\t{label}");
            let cell = if *label == "Multistep" && flag {
                self.multistep_sequences.join(", ")
            } else if flag {
                "yes".to_string()
            } else {
                "-".to_string()
            };
            let _ = write!(row, "\t{cell}");
        }
        format!("{head}\n{row}\n")
    }

    /// Chronological listing followed by the summary row.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let tags = e.tags.labels();
            let _ = writeln!(
                out,
                "#{}\t{} s\t{}{}",
                e.experiment_id,
                e.duration,
                e.header,
                if tags.is_empty() {
                    String::new()
                } else {
                    format!("\t[{}]", tags.join(", "))
                }
            );
        }
        out.push('\n');
        out.push_str(&self.summary_table());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{reference_config, ReferenceRun};
    use crate::recipe::RecipeLine;

    fn step(block: usize, cycle: u32, line: RecipeLine, open: Vec<u32>, t: f64, dm: f64) -> StepRecord {
        StepRecord {
            index: 0,
            block,
            cycle,
            line,
            start: 0.0,
            end: 0.0,
            open_valves: open,
            reactor_temperature: t,
            pressure_max: vec![133.0],
            pressure_mean: vec![133.0],
            qcm_start: vec![0.0],
            qcm_end: vec![dm],
        }
    }

    fn evidence(id: u64, text: &str, steps: Vec<StepRecord>) -> ExperimentEvidence {
        ExperimentEvidence {
            id,
            recipe_text: text.into(),
            duration: 10.0,
            header: String::new(),
            steps,
        }
    }

    fn open(v: u32) -> RecipeLine {
        RecipeLine::new(Action::Valve, v, 1.0, 1.0)
    }

    fn close(v: u32) -> RecipeLine {
        RecipeLine::new(Action::Valve, v, 0.0, 10.0)
    }

    fn ald_steps(cycles: u32, per_cycle: f64, t: f64) -> Vec<StepRecord> {
        let mut v = Vec::new();
        for c in 0..cycles {
            v.push(step(0, c, open(2), vec![2], t, per_cycle * 0.1));
            v.push(step(0, c, close(2), vec![], t, 0.0));
            v.push(step(0, c, open(3), vec![3], t, per_cycle * 0.9));
            v.push(step(0, c, close(3), vec![], t, 0.0));
        }
        v
    }

    #[test]
    fn empty_session() {
        let cfg = reference_config(ReferenceRun::Run2);
        let tl = extract_timeline(&[], &cfg);
        assert_eq!(tl.count, 0);
        assert_eq!(tl.time_used, 0.0);
        assert_eq!(tl.tags, BehaviorTags::default());
    }

    #[test]
    fn ald_and_ale() {
        let cfg = reference_config(ReferenceRun::Run2);
        let tags = tag_behaviors(&[evidence(1, "ald", ald_steps(5, 26.5, 500.0))], &cfg);
        assert!(tags.ald && !tags.ale);
        assert_eq!(tags.labels(), vec!["ALD"]);
        let tags = tag_behaviors(&[evidence(1, "ale", ald_steps(5, -26.5, 450.0))], &cfg);
        assert!(tags.ale && !tags.ald);
        // one cycle is not a cyclic process
        let tags = tag_behaviors(&[evidence(1, "x", ald_steps(1, 26.5, 500.0))], &cfg);
        assert!(!tags.ald);
    }

    #[test]
    fn repeats_and_tdep() {
        let cfg = reference_config(ReferenceRun::Run2);
        let a = evidence(1, "r", ald_steps(3, 26.5, 500.0));
        let b = evidence(2, "r", ald_steps(3, 26.5, 500.0));
        let c = evidence(3, "r2", ald_steps(3, 20.0, 550.0));
        let per = tag_experiments(&[a, b, c], &cfg);
        assert!(!per[0].repeats && per[1].repeats && !per[2].repeats);
        assert!(!per[1].t_dep && per[2].t_dep);
    }

    #[test]
    fn codosing_decomposition_multistep() {
        let cfg = reference_config(ReferenceRun::Run2);
        let steps = vec![
            step(0, 0, open(2), vec![2], 500.0, 0.0),
            step(0, 0, open(3), vec![2, 3], 500.0, 0.0),
        ];
        let t = tag_behaviors(&[evidence(1, "co", steps)], &cfg);
        assert!(t.co_dosing && !t.decomposition);
        let steps = vec![step(0, 0, open(3), vec![3], 650.0, 5.0)];
        assert!(tag_behaviors(&[evidence(1, "hot", steps)], &cfg).decomposition);
        let mut steps = Vec::new();
        for c in 0..2 {
            for v in [3, 2, 1] {
                steps.push(step(0, c, open(v), vec![v], 500.0, 1.0));
                steps.push(step(0, c, close(v), vec![], 500.0, 0.0));
            }
        }
        let tl = extract_timeline(&[evidence(1, "m", steps)], &cfg);
        assert!(tl.tags.multistep);
        assert_eq!(tl.multistep_sequences, vec!["C-B-A".to_string()]);
        assert!(tl.summary_table().contains("C-B-A"));
    }

    #[test]
    fn passivation_across_experiments() {
        let cfg = reference_config(ReferenceRun::Run2);
        let growth = evidence(1, "c", vec![step(0, 0, open(3), vec![3], 500.0, 24.0)]);
        let d = evidence(2, "d", vec![step(0, 0, open(4), vec![4], 500.0, 14.0)]);
        let blocked = evidence(3, "c2", vec![step(0, 0, open(3), vec![3], 500.0, 0.01)]);
        let per = tag_experiments(&[growth.clone(), d.clone(), blocked.clone()], &cfg);
        assert!(per[2].asd && !per[0].asd && !per[1].asd);
        // saturation of the same chemical is not passivation
        let again = evidence(2, "c", vec![step(0, 0, open(3), vec![3], 500.0, 0.01)]);
        assert!(!tag_behaviors(&[growth, again], &cfg).asd);
    }
}
