//! Non-halting certificates and the loop detector that finds them.
//!
//! Two kinds of lasso are recognised:
//!
//! * an exact repeat of a configuration, found with Brent's power-of-two
//!   scheme so that at most one saved configuration is kept;
//! * a translated cycle: two record-breaking visits (head strictly further
//!   right than ever before) in the same state, where the tape from the
//!   leftmost square touched in between onwards is identical up to the shift.
//!   The second visit then replays the first shifted right, forever.
//!
//! Certificates are self-contained and re-checkable by replay.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::machine::{apply, step_in_place, Configuration, Direction, RunError, Step, TransitionTable};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `start` recurs after exactly `period` steps.
    Repeat { start: Configuration, period: u64 },
    /// After `period` steps from `start` the machine is in the same state,
    /// `shift` squares further right, and the tape from
    /// `start.head - margin` onwards has been translated by `shift`; the head
    /// never went left of `start.head - margin` in between.
    Translated {
        start: Configuration,
        period: u64,
        shift: usize,
        margin: usize,
    },
    /// The applicable instruction at `at` moves left off square 0.
    LeftEdge { at: Configuration },
}

impl Certificate {
    pub fn start(&self) -> &Configuration {
        match self {
            Certificate::Repeat { start, .. } | Certificate::Translated { start, .. } => start,
            Certificate::LeftEdge { at } => at,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Repeat { .. } => "repeat",
            Certificate::Translated { .. } => "translated",
            Certificate::LeftEdge { .. } => "left_edge",
        }
    }

    /// Cycle length in steps (0 for a left-edge fault).
    pub fn period(&self) -> u64 {
        match self {
            Certificate::Repeat { period, .. } | Certificate::Translated { period, .. } => *period,
            Certificate::LeftEdge { .. } => 0,
        }
    }

    pub fn verify<T: TransitionTable + ?Sized>(&self, table: &T) -> bool {
        if let Certificate::LeftEdge { at } = self {
            return match table.instruction(at.state, at.scanned()) {
                Some(ins) => ins.direction == Direction::Left && at.head == 0,
                None => false,
            };
        }
        self.verify_with(|c| step_in_place(c, table))
    }

    /// Replays the cycle with a caller-supplied step function (used for
    /// machines whose steps consult an oracle).
    pub fn verify_with(&self, mut step: impl FnMut(&mut Configuration) -> Result<Step, RunError>) -> bool {
        match self {
            Certificate::Repeat { start, period } => {
                if *period == 0 {
                    return false;
                }
                let mut c = start.clone();
                for _ in 0..*period {
                    if !matches!(step(&mut c), Ok(Step::Moved)) {
                        return false;
                    }
                }
                c.same_instant(start)
            }
            Certificate::Translated {
                start,
                period,
                shift,
                margin,
            } => {
                if *period == 0 || *shift == 0 || *margin > start.head || start.tape.background().is_some() {
                    return false;
                }
                let floor = start.head - margin;
                let mut c = start.clone();
                for _ in 0..*period {
                    if !matches!(step(&mut c), Ok(Step::Moved)) {
                        return false;
                    }
                    if c.head < floor {
                        return false;
                    }
                }
                c.state == start.state && c.head == start.head + shift && suffix_matches(start, &c, floor, *shift)
            }
            Certificate::LeftEdge { at } => {
                let mut c = at.clone();
                matches!(step(&mut c), Err(RunError::LeftEdge { .. }))
            }
        }
    }

    /// Re-runs from `initial` and checks that the certificate's start
    /// configuration is actually reached.
    pub fn reachable_from<T: TransitionTable + ?Sized>(&self, table: &T, initial: &Configuration) -> bool {
        let start = self.start();
        let mut c = initial.clone();
        while c.steps < start.steps {
            match table.instruction(c.state, c.scanned()) {
                Some(ins) => {
                    if apply(&mut c, &ins).is_err() {
                        return false;
                    }
                }
                None => return false,
            }
        }
        c.same_instant(start)
    }
}

/// Tape of `later` from `floor + shift` equals tape of `earlier` from `floor`.
pub(crate) fn suffix_matches(earlier: &Configuration, later: &Configuration, floor: usize, shift: usize) -> bool {
    let end = earlier
        .tape
        .explicit_len()
        .max(later.tape.explicit_len().saturating_sub(shift));
    (floor..end.max(floor)).all(|p| earlier.tape.get(p) == later.tape.get(p + shift))
}

#[derive(Clone, Debug)]
struct Snapshot {
    config: Configuration,
    min_head: usize,
    tainted: bool,
}

#[derive(Clone, Debug, Default)]
struct RecordSlot {
    snapshot: Option<Snapshot>,
    since: u64,
    power: u64,
}

/// Incremental lasso detector. Feed it every configuration of a run, the
/// initial one first.
#[derive(Clone, Debug)]
pub struct LoopDetector {
    saved: Option<Configuration>,
    power: u64,
    lam: u64,
    max_head: Option<usize>,
    slots: HashMap<usize, RecordSlot>,
    translation: bool,
}

impl Default for LoopDetector {
    fn default() -> Self {
        Self::new()
    }
}

impl LoopDetector {
    pub fn new() -> Self {
        LoopDetector {
            saved: None,
            power: 1,
            lam: 0,
            max_head: None,
            slots: HashMap::new(),
            translation: true,
        }
    }

    /// Exact repeats only.
    pub fn without_translation() -> Self {
        LoopDetector {
            translation: false,
            ..Self::new()
        }
    }

    /// Something outside the configuration influenced the last step (an
    /// oracle answer). Translated snapshots taken before it can no longer
    /// be trusted.
    pub fn note_external_input(&mut self) {
        for slot in self.slots.values_mut() {
            if let Some(s) = slot.snapshot.as_mut() {
                s.tainted = true;
            }
        }
    }

    /// Forget everything, e.g. after an arrival that rewrote the tape.
    pub fn reset(&mut self) {
        let translation = self.translation;
        *self = LoopDetector::new();
        self.translation = translation;
    }

    pub fn observe(&mut self, config: &Configuration) -> Option<Certificate> {
        if let Some(cert) = self.observe_exact(config) {
            return Some(cert);
        }
        if self.translation && config.tape.background().is_none() {
            return self.observe_translation(config);
        }
        None
    }

    fn observe_exact(&mut self, config: &Configuration) -> Option<Certificate> {
        match &self.saved {
            None => {
                self.saved = Some(config.clone());
                None
            }
            Some(saved) => {
                self.lam += 1;
                if saved.same_instant(config) {
                    return Some(Certificate::Repeat {
                        start: saved.clone(),
                        period: self.lam,
                    });
                }
                if self.lam == self.power {
                    self.saved = Some(config.clone());
                    self.power *= 2;
                    self.lam = 0;
                }
                None
            }
        }
    }

    fn observe_translation(&mut self, config: &Configuration) -> Option<Certificate> {
        for slot in self.slots.values_mut() {
            if let Some(s) = slot.snapshot.as_mut() {
                s.min_head = s.min_head.min(config.head);
            }
        }
        let record = match self.max_head {
            None => true,
            Some(m) => config.head > m,
        };
        if !record {
            return None;
        }
        self.max_head = Some(config.head);
        let slot = self.slots.entry(config.state).or_insert_with(|| RecordSlot {
            power: 1,
            ..RecordSlot::default()
        });
        if let Some(snap) = &slot.snapshot {
            if !snap.tainted {
                let start = &snap.config;
                let margin = start.head - snap.min_head;
                let shift = config.head - start.head;
                if suffix_matches(start, config, snap.min_head, shift) {
                    return Some(Certificate::Translated {
                        start: start.clone(),
                        period: config.steps - start.steps,
                        shift,
                        margin,
                    });
                }
            }
        }
        slot.since += 1;
        if slot.snapshot.is_none() || slot.since >= slot.power {
            if slot.snapshot.is_some() {
                slot.power *= 2;
            }
            slot.since = 0;
            slot.snapshot = Some(Snapshot {
                config: config.clone(),
                min_head: config.head,
                tainted: false,
            });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{run, Instruction, Machine, Tape};

    #[test]
    fn exact_cycle_found_and_replays() {
        // Bounces between squares 0 and 1 forever.
        let m = Machine::new(
            2,
            vec![
                vec![Instruction::new(0, 0, Direction::Right, 1)],
                vec![Instruction::new(0, 0, Direction::Left, 0)],
            ],
        )
        .unwrap();
        let out = run(&m, Tape::blank(), 100, true).unwrap();
        let cert = out.certificate().unwrap().clone();
        assert_eq!(cert.kind(), "repeat");
        assert_eq!(cert.period(), 2);
        assert!(cert.verify(&m));
        assert!(cert.reachable_from(&m, &Configuration::initial(Tape::blank())));
    }

    #[test]
    fn forged_certificate_rejected() {
        let m = Machine::trivially_halting();
        let cert = Certificate::Repeat {
            start: Configuration::initial(Tape::blank()),
            period: 1,
        };
        assert!(!cert.verify(&m));
    }

    #[test]
    fn translated_with_left_excursions() {
        // Writes 1, steps right, then left and right again before moving on.
        let m = Machine::new(
            2,
            vec![
                vec![Instruction::new(0, 1, Direction::Right, 1)],
                vec![Instruction::new(0, 0, Direction::Left, 2)],
                vec![Instruction::new(1, 1, Direction::Right, 3)],
                vec![Instruction::new(0, 0, Direction::Right, 0)],
            ],
        )
        .unwrap();
        let out = run(&m, Tape::blank(), 1000, true).unwrap();
        let cert = out.certificate().expect("translated lasso");
        assert_eq!(cert.kind(), "translated");
        assert!(cert.verify(&m));
    }
}
