//! Several machines sharing one tape, each acting on its own clock.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::machine::{apply, Machine, Tape};

/// `τ(n)`: ticks between a machine's action `n - 1` and action `n` (action 0
/// comes `τ(0)` ticks after the start). Every value must be at least 1.
#[derive(Clone)]
pub enum TimingFunction {
    Constant(u64),
    /// Listed delays, then `rest` for every later action.
    Table {
        delays: BTreeMap<u64, u64>,
        rest: u64,
    },
    Generator(Arc<dyn Fn(u64) -> u64 + Send + Sync>),
}

impl fmt::Debug for TimingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingFunction::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            TimingFunction::Table { delays, rest } => f
                .debug_struct("Table")
                .field("delays", delays)
                .field("rest", rest)
                .finish(),
            TimingFunction::Generator(_) => f.write_str("Generator(..)"),
        }
    }
}

impl TimingFunction {
    pub fn delay(&self, n: u64) -> u64 {
        match self {
            TimingFunction::Constant(c) => *c,
            TimingFunction::Table { delays, rest } => delays.get(&n).copied().unwrap_or(*rest),
            TimingFunction::Generator(g) => g(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("a network needs at least one machine")]
    Empty,
    #[error("{machines} machines but {timings} timing functions")]
    Mismatch { machines: usize, timings: usize },
    #[error("machine {machine} got delay 0 for action {action}")]
    ZeroDelay { machine: usize, action: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineStatus {
    Running,
    Halted,
    /// Moved left off square 0; the machine takes no further part.
    LeftEdge,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeOutcome {
    pub state: usize,
    pub head: usize,
    pub steps: u64,
    pub status: MachineStatus,
    /// Tick of the machine's last action (or halt).
    pub last_tick: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetOutcome {
    pub machines: Vec<NodeOutcome>,
    pub tape: Tape,
    /// Last tick at which anything happened.
    pub ticks: u64,
}

/// Runs the network up to global tick `budget`. Machine `k` acts at ticks
/// `τ_k(0)`, `τ_k(0) + τ_k(1)`, ...; machines acting on the same tick go in
/// index order. An action either applies the machine's instruction to the
/// shared tape at its own head or, if none applies, halts it.
pub fn run_async_network(
    ms: &[Machine],
    timings: &[TimingFunction],
    shared: Tape,
    budget: u64,
) -> Result<NetOutcome, NetworkError> {
    if ms.is_empty() {
        return Err(NetworkError::Empty);
    }
    if ms.len() != timings.len() {
        return Err(NetworkError::Mismatch {
            machines: ms.len(),
            timings: timings.len(),
        });
    }
    let delay = |k: usize, n: u64| match timings[k].delay(n) {
        0 => Err(NetworkError::ZeroDelay { machine: k, action: n }),
        d => Ok(d),
    };
    let mut nodes: Vec<NodeOutcome> = ms
        .iter()
        .map(|_| NodeOutcome {
            state: 0,
            head: 0,
            steps: 0,
            status: MachineStatus::Running,
            last_tick: 0,
        })
        .collect();
    let mut heap = BinaryHeap::new();
    for k in 0..ms.len() {
        heap.push(Reverse((delay(k, 0)?, k)));
    }
    let mut tape = shared;
    let mut ticks = 0;
    while let Some(Reverse((tick, k))) = heap.pop() {
        if tick > budget {
            break;
        }
        ticks = tick;
        let node = &mut nodes[k];
        node.last_tick = tick;
        let Some(ins) = ms[k].lookup(node.state, tape.get(node.head)).copied() else {
            node.status = MachineStatus::Halted;
            continue;
        };
        let mut cfg = crate::machine::Configuration {
            state: node.state,
            head: node.head,
            tape,
            steps: node.steps,
        };
        let moved = apply(&mut cfg, &ins);
        tape = cfg.tape;
        if moved.is_err() {
            node.status = MachineStatus::LeftEdge;
            continue;
        }
        node.state = cfg.state;
        node.head = cfg.head;
        node.steps = cfg.steps;
        heap.push(Reverse((tick + delay(k, node.steps)?, k)));
    }
    Ok(NetOutcome {
        machines: nodes,
        tape,
        ticks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{enumerate_machines, parse};
    use crate::machine::{encode_unary, run, RunOutcome};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_machine_at_unit_speed_is_plain() {
        let m = parse(include_str!("../../../../figures/parity.tm")).unwrap();
        for n in 0..8 {
            let net = run_async_network(
                std::slice::from_ref(&m),
                &[TimingFunction::Constant(1)],
                encode_unary(n),
                10_000,
            )
            .unwrap();
            let RunOutcome::Halted { config } = run(&m, encode_unary(n), 10_000, false).unwrap() else {
                panic!()
            };
            let node = &net.machines[0];
            assert_eq!(node.status, MachineStatus::Halted);
            assert_eq!(
                (node.state, node.head, node.steps),
                (config.state, config.head, config.steps)
            );
            assert_eq!(net.tape, config.tape);
            // The halt itself is noticed on the next tick.
            assert_eq!(net.ticks, config.steps + 1);
        }
    }

    #[test]
    fn simultaneous_writers_resolve_by_index() {
        let one = parse("state 0: (0, 1, right, 1)\nstate 1:").unwrap();
        let two = parse("alphabet 3\nstate 0: (0, 2, right, 1)\nstate 1:").unwrap();
        let t = [TimingFunction::Constant(1), TimingFunction::Constant(1)];
        let net = run_async_network(&[one.clone(), two.clone()], &t, Tape::blank(), 10).unwrap();
        // Writer 0 writes 1 first; writer 1 then reads 1, has no instruction
        // and halts without writing.
        assert_eq!(net.tape.get(0).0, 1);
        assert_eq!(net.machines[1].status, MachineStatus::Halted);
        assert_eq!(net.machines[1].steps, 0);
        let both = parse("alphabet 3\nstate 0: (0, 2, right, 1) (1, 2, right, 1)\nstate 1:").unwrap();
        let net = run_async_network(&[one, both], &t, Tape::blank(), 10).unwrap();
        assert_eq!(net.tape.get(0).0, 2);
    }

    #[test]
    fn zero_delay_is_rejected() {
        let m = Machine::trivially_halting();
        assert_eq!(
            run_async_network(&[m], &[TimingFunction::Constant(0)], Tape::blank(), 5),
            Err(NetworkError::ZeroDelay { machine: 0, action: 0 })
        );
    }

    /// Tick-by-tick product simulation: one combined state per tick, every
    /// machine's countdown decremented in index order.
    fn product(
        ms: &[Machine],
        delays: &[Vec<u64>],
        mut tape: Tape,
        budget: u64,
    ) -> (Vec<(usize, usize, u64, u8)>, Tape) {
        let mut st: Vec<(usize, usize, u64, u8)> = ms.iter().map(|_| (0, 0, 0, 0)).collect();
        let mut wait: Vec<u64> = delays.iter().map(|d| d[0]).collect();
        for _tick in 1..=budget {
            for k in 0..ms.len() {
                if st[k].3 != 0 {
                    continue;
                }
                wait[k] -= 1;
                if wait[k] > 0 {
                    continue;
                }
                let (s, h, n, _) = st[k];
                match ms[k].lookup(s, tape.get(h)) {
                    None => st[k].3 = 1,
                    Some(i) => {
                        if i.direction == crate::machine::Direction::Left && h == 0 {
                            st[k].3 = 2;
                            continue;
                        }
                        tape.set(h, i.write);
                        let h2 = if i.direction == crate::machine::Direction::Left {
                            h - 1
                        } else {
                            h + 1
                        };
                        st[k] = (i.next_state, h2, n + 1, 0);
                        wait[k] = delays[k][(n + 1) as usize];
                    }
                }
            }
        }
        (st, tape)
    }

    #[test]
    fn matches_product_simulation() {
        let pool: Vec<Machine> = enumerate_machines(2, 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let count = rng.gen_range(2..=3);
            let ms: Vec<Machine> = (0..count).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
            let delays: Vec<Vec<u64>> = (0..count)
                .map(|_| (0..200).map(|_| rng.gen_range(1..=4)).collect())
                .collect();
            let timings: Vec<TimingFunction> = delays
                .iter()
                .map(|d| TimingFunction::Table {
                    delays: d.iter().enumerate().map(|(i, v)| (i as u64, *v)).collect(),
                    rest: 1,
                })
                .collect();
            let tape = encode_unary(rng.gen_range(0..5));
            let net = run_async_network(&ms, &timings, tape.clone(), 150).unwrap();
            let (st, t) = product(&ms, &delays, tape, 150);
            assert_eq!(net.tape, t);
            for (node, p) in net.machines.iter().zip(st) {
                let status = match p.3 {
                    0 => MachineStatus::Running,
                    1 => MachineStatus::Halted,
                    _ => MachineStatus::LeftEdge,
                };
                assert_eq!(
                    (node.state, node.head, node.steps, node.status),
                    (p.0, p.1, p.2, status)
                );
            }
        }
    }
}
