//! Nondeterministic machines: breadth-first computation trees, fairness of
//! lasso-shaped infinite runs, and the bounded-time halting procedure `F`.
//!
//! A nondeterministic machine accepts when some branch halts with 1 on the
//! first square. Trees are explored level by level, so level `d` holds the
//! configurations reachable in exactly `d` steps. A branch that repeats an
//! ancestor's configuration (exactly, or translated rightwards over a tape
//! that looks the same from there on) can be pumped forever; such branches
//! are recorded as lassos alongside the tree.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{suffix_matches, Certificate};
use crate::godel;
use crate::lang::{self, ParseError};
use crate::machine::{
    apply, encode_unary, run, Configuration, Instruction, Machine, MachineError, RunError, RunOutcome, Symbol, Tape,
};
use crate::par;

/// Like [`Machine`] but with any number of instructions per
/// `(state, symbol)`. Instruction lists keep their given order, which fixes
/// the order of sibling branches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NDMachine {
    alphabet_size: u8,
    states: Vec<Vec<Instruction>>,
}

impl NDMachine {
    pub fn new(alphabet_size: u8, states: Vec<Vec<Instruction>>) -> Result<Self, MachineError> {
        if states.is_empty() {
            return Err(MachineError::NoStates);
        }
        if alphabet_size < 2 {
            return Err(MachineError::AlphabetTooSmall(alphabet_size));
        }
        for (state, list) in states.iter().enumerate() {
            for ins in list {
                for symbol in [ins.read, ins.write] {
                    if symbol.0 >= alphabet_size {
                        return Err(MachineError::SymbolOutOfRange { state, symbol });
                    }
                }
                if ins.next_state >= states.len() {
                    return Err(MachineError::DanglingState {
                        state,
                        target: ins.next_state,
                    });
                }
            }
        }
        Ok(NDMachine { alphabet_size, states })
    }

    /// Parses the usual listing syntax, allowing repeated read symbols.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (k, states) = lang::parse_table(text, false)?;
        Ok(NDMachine {
            alphabet_size: k,
            states,
        })
    }

    pub fn to_listing(&self) -> String {
        lang::serialize_table(self.alphabet_size, &self.states)
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn instructions(&self, state: usize) -> &[Instruction] {
        &self.states[state]
    }

    pub fn choices(&self, state: usize, read: Symbol) -> impl Iterator<Item = &Instruction> {
        self.states[state].iter().filter(move |i| i.read == read)
    }

    pub fn is_deterministic(&self) -> bool {
        self.states.iter().all(|list| {
            let reads: BTreeSet<_> = list.iter().map(|i| i.read).collect();
            reads.len() == list.len()
        })
    }
}

impl From<&Machine> for NDMachine {
    fn from(m: &Machine) -> Self {
        NDMachine {
            alphabet_size: m.alphabet_size(),
            states: m.states().to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NodeStatus {
    /// Expanded; its children are all present.
    Internal,
    /// Not expanded for lack of budget.
    Open,
    /// No applicable instruction. `output` is the first square read as a bit.
    Halted { output: u8 },
    /// The chosen instruction moved left off square 0.
    Crashed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    /// Instruction taken from the parent.
    pub label: Option<Instruction>,
    pub depth: u64,
    pub config: Configuration,
    pub status: NodeStatus,
}

/// An infinite run `stem · cycle · cycle · ...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoTrace {
    pub stem: Vec<Instruction>,
    pub cycle: Vec<Instruction>,
}

/// A branch that can diverge: the path to `node` is `stem · cycle`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergentBranch {
    pub node: usize,
    pub lasso: LassoTrace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComputationTree {
    pub nodes: Vec<Node>,
    pub divergent: Vec<DivergentBranch>,
}

#[derive(Serialize)]
struct NodeView<'a> {
    id: usize,
    parent: Option<usize>,
    label: Option<&'a Instruction>,
    depth: u64,
    state: usize,
    head: usize,
    tape: String,
    #[serde(flatten)]
    status: NodeStatus,
}

impl ComputationTree {
    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.status != NodeStatus::Internal)
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    /// Instructions from the root to `id`.
    pub fn path(&self, mut id: usize) -> Vec<Instruction> {
        let mut out = Vec::new();
        while let Some(l) = self.nodes[id].label {
            out.push(l);
            id = self.nodes[id].parent.unwrap();
        }
        out.reverse();
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<NodeView> = self
            .nodes
            .iter()
            .map(|n| NodeView {
                id: n.id,
                parent: n.parent,
                label: n.label.as_ref(),
                depth: n.depth,
                state: n.config.state,
                head: n.config.head,
                tape: n.config.tape.render_explicit(),
                status: n.status,
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "divergent": self.divergent })
    }
}

enum Child {
    Moved(Instruction, Configuration, Option<LassoTrace>),
    Crashed(Instruction),
}

/// Looks for an ancestor of the would-be child that it repeats, walking up
/// from `parent`.
fn find_lasso(nodes: &[Node], parent: usize, child_label: Instruction, child: &Configuration) -> Option<LassoTrace> {
    let mut floor = child.head;
    let mut cur = Some(parent);
    let mut cycle = vec![child_label];
    while let Some(a) = cur {
        let anc = &nodes[a].config;
        floor = floor.min(anc.head);
        if anc.state == child.state && anc.tape.background().is_none() {
            let repeats = if child.head == anc.head {
                child.tape == anc.tape
            } else {
                child.head > anc.head && suffix_matches(anc, child, floor, child.head - anc.head)
            };
            if repeats {
                cycle.reverse();
                let mut stem = Vec::new();
                let mut up = Some(a);
                while let Some(u) = up {
                    if let Some(l) = nodes[u].label {
                        stem.push(l);
                    }
                    up = nodes[u].parent;
                }
                stem.reverse();
                return Some(LassoTrace { stem, cycle });
            }
        }
        if let Some(l) = nodes[a].label {
            cycle.push(l);
        }
        cur = nodes[a].parent;
    }
    None
}

fn leaf_status(m: &NDMachine, c: &Configuration) -> NodeStatus {
    if m.choices(c.state, c.scanned()).next().is_none() {
        NodeStatus::Halted {
            output: u8::from(c.tape.get(0) == Symbol::ONE),
        }
    } else {
        NodeStatus::Open
    }
}

/// Breadth-first tree from `input`, expanding every node of depth at most
/// `depth_budget` while the total node count stays within `node_budget`.
/// Siblings follow instruction-list order; once some node's children do not
/// fit, no further node is expanded.
pub fn explore(m: &NDMachine, input: Tape, depth_budget: u64, node_budget: usize) -> ComputationTree {
    let mut tree = ComputationTree {
        nodes: Vec::new(),
        divergent: Vec::new(),
    };
    if node_budget == 0 {
        return tree;
    }
    let root = Configuration::initial(input);
    tree.nodes.push(Node {
        id: 0,
        parent: None,
        label: None,
        depth: 0,
        status: leaf_status(m, &root),
        config: root,
    });
    // Branches below a recorded lasso need no second certificate.
    let mut pumped = vec![false];
    let mut frontier = vec![0usize];
    let mut depth = 0;
    while depth <= depth_budget && !frontier.is_empty() {
        let expand: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&id| tree.nodes[id].status == NodeStatus::Open)
            .collect();
        let nodes = &tree.nodes;
        let pumped_ref = &pumped;
        let children: Vec<Vec<Child>> = par::map(&expand, |&id| {
            let c = &nodes[id].config;
            m.choices(c.state, c.scanned())
                .map(|ins| {
                    let mut next = c.clone();
                    match apply(&mut next, ins) {
                        Ok(()) => {
                            let lasso = (!pumped_ref[id]).then(|| find_lasso(nodes, id, *ins, &next)).flatten();
                            Child::Moved(*ins, next, lasso)
                        }
                        Err(RunError::LeftEdge { .. }) => Child::Crashed(*ins),
                    }
                })
                .collect()
        });
        let mut next_frontier = Vec::new();
        let mut full = false;
        for (id, kids) in expand.into_iter().zip(children) {
            if tree.nodes.len() + kids.len() > node_budget {
                full = true;
                break;
            }
            tree.nodes[id].status = NodeStatus::Internal;
            for kid in kids {
                let nid = tree.nodes.len();
                let (label, config, status, lasso) = match kid {
                    Child::Moved(ins, cfg, lasso) => {
                        let st = leaf_status(m, &cfg);
                        (ins, cfg, st, lasso)
                    }
                    Child::Crashed(ins) => (ins, tree.nodes[id].config.clone(), NodeStatus::Crashed, None),
                };
                pumped.push(pumped[id] || lasso.is_some());
                if let Some(lasso) = lasso {
                    tree.divergent.push(DivergentBranch { node: nid, lasso });
                }
                tree.nodes.push(Node {
                    id: nid,
                    parent: Some(id),
                    label: Some(label),
                    depth: depth + 1,
                    config,
                    status,
                });
                next_frontier.push(nid);
            }
        }
        if full {
            break;
        }
        frontier = next_frontier;
        depth += 1;
    }
    tree
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdOutput {
    One,
    Zero,
    DivergePossible,
    Unknown,
}

/// Accepts if some branch halts with 1. A crashed branch produces no output
/// and counts like a branch that rejects.
pub fn nd_output(t: &ComputationTree) -> NdOutput {
    let mut open = t.nodes.is_empty();
    for leaf in t.leaves() {
        match leaf.status {
            NodeStatus::Halted { output: 1 } => return NdOutput::One,
            NodeStatus::Open => open = true,
            _ => {}
        }
    }
    if !t.divergent.is_empty() {
        NdOutput::DivergePossible
    } else if open {
        NdOutput::Unknown
    } else {
        NdOutput::Zero
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Fairness {
    Fair,
    Unfair { state: usize, missed: Instruction },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InvalidTrace {
    #[error("the cycle is empty")]
    EmptyCycle,
    #[error("instruction {index} of the trace is not applicable")]
    NotApplicable { index: usize },
    #[error("instruction {index} of the trace moves off square 0")]
    LeftEdge { index: usize },
    #[error("the cycle does not return to its starting configuration")]
    NotACycle,
}

/// Replays `stem · cycle` from `input` and checks that every state visited
/// in the cycle takes each of its applicable instructions at least once.
pub fn fairness_check(m: &NDMachine, input: Tape, trace: &LassoTrace) -> Result<Fairness, InvalidTrace> {
    if trace.cycle.is_empty() {
        return Err(InvalidTrace::EmptyCycle);
    }
    let mut c = Configuration::initial(input);
    let take = |c: &mut Configuration, index: usize, ins: &Instruction| {
        if c.state >= m.state_count() || !m.choices(c.state, c.scanned()).any(|i| i == ins) {
            return Err(InvalidTrace::NotApplicable { index });
        }
        apply(c, ins).map_err(|_| InvalidTrace::LeftEdge { index })
    };
    for (i, ins) in trace.stem.iter().enumerate() {
        take(&mut c, i, ins)?;
    }
    let start = c.clone();
    let mut floor = c.head;
    let mut applicable: Vec<(usize, Instruction)> = Vec::new();
    let mut taken: BTreeSet<(usize, Instruction)> = BTreeSet::new();
    for (i, ins) in trace.cycle.iter().enumerate() {
        for a in m.choices(c.state, c.scanned()) {
            if !applicable.contains(&(c.state, *a)) {
                applicable.push((c.state, *a));
            }
        }
        taken.insert((c.state, *ins));
        take(&mut c, trace.stem.len() + i, ins)?;
        floor = floor.min(c.head);
    }
    let closes = c.state == start.state
        && start.tape.background().is_none()
        && if c.head == start.head {
            c.tape == start.tape
        } else {
            c.head > start.head && suffix_matches(&start, &c, floor, c.head - start.head)
        };
    if !closes {
        return Err(InvalidTrace::NotACycle);
    }
    Ok(match applicable.into_iter().find(|a| !taken.contains(a)) {
        Some((state, missed)) => Fairness::Unfair { state, missed },
        None => Fairness::Fair,
    })
}

/// The number generator at the front of `F`: from state 0 either halt
/// (accept) or write a 1 and stay (increment).
pub fn f_generator() -> NDMachine {
    use crate::machine::Direction::Right as R;
    NDMachine::new(
        2,
        vec![vec![Instruction::new(0, 0, R, 1), Instruction::new(0, 1, R, 0)], vec![]],
    )
    .unwrap()
}

/// Number of ones a run of the generator left on the tape.
pub fn generated_number(c: &Configuration) -> u64 {
    c.tape.cells().iter().filter(|s| **s == Symbol::ONE).count() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FPolicy {
    pub detect_loops: bool,
    /// Steps allowed for finding a non-halting proof; never less than
    /// `n_cap`.
    pub proof_budget: u64,
}

impl Default for FPolicy {
    fn default() -> Self {
        FPolicy {
            detect_loops: true,
            proof_budget: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FVerdict {
    /// Halts within exactly `witness` steps and not fewer.
    Halts {
        witness: u64,
    },
    Loops {
        certificate: Certificate,
    },
    Unknown,
}

/// `F` on the machine/input pair with code `target`.
#[allow(non_snake_case)]
pub fn machine_F(target: &BigUint, n_cap: u64, policy: FPolicy) -> FVerdict {
    let (m, input) = godel::godel_decode(target);
    match u64::try_from(&input) {
        Ok(n) => machine_f_on(&m, encode_unary(n), n_cap, policy),
        // An input this large cannot be written out; say nothing.
        Err(_) => FVerdict::Unknown,
    }
}

/// Searches `n = 0..=n_cap` for the least `n` with the machine halting
/// within `n` steps. All the tests `halts_by(n)` share one run, so the
/// least witness is the halting time itself.
pub fn machine_f_on(m: &Machine, input: Tape, n_cap: u64, policy: FPolicy) -> FVerdict {
    let budget = if policy.detect_loops {
        n_cap.max(policy.proof_budget)
    } else {
        n_cap
    };
    let start = Configuration::initial(input);
    match run(m, start.tape.clone(), budget, policy.detect_loops) {
        Ok(RunOutcome::Halted { config }) if config.steps <= n_cap => FVerdict::Halts { witness: config.steps },
        Ok(RunOutcome::NonHaltingProven { certificate }) => FVerdict::Loops { certificate },
        Err(RunError::LeftEdge { .. }) if policy.detect_loops => {
            let at = left_edge_config(m, start).expect("the run just faulted");
            FVerdict::Loops {
                certificate: Certificate::LeftEdge { at },
            }
        }
        _ => FVerdict::Unknown,
    }
}

fn left_edge_config(m: &Machine, mut c: Configuration) -> Option<Configuration> {
    loop {
        let ins = *m.lookup(c.state, c.scanned())?;
        if apply(&mut c, &ins).is_err() {
            return Some(c);
        }
    }
}
