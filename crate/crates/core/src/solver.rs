//! Fixpoint engines over a single-threaded (global) abstract store.
//!
//! Every abstract machine in the crate implements [`AbstractMachine`]: given a
//! configuration and a view of the store it returns its successors together
//! with the store writes each one performs. [`Worklist`] computes the least
//! fixpoint incrementally, re-running only configurations whose reads were
//! invalidated; [`kleene`] applies the system-space transfer function to the
//! whole space round by round.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;
use std::time::Instant;

use indexmap::IndexSet;

/// A join-only map from abstract addresses to value sets.
#[derive(Clone, Debug)]
pub struct Store<A, V> {
    map: HashMap<A, BTreeSet<V>>,
    size: usize,
}

impl<A, V> Default for Store<A, V> {
    fn default() -> Self {
        Store { map: HashMap::new(), size: 0 }
    }
}

impl<A: Eq + Hash + Clone, V: Ord + Clone> Store<A, V> {
    pub fn get(&self, a: &A) -> Option<&BTreeSet<V>> {
        self.map.get(a)
    }

    /// Joins `vals` into the set at `a`; true if the set grew.
    pub fn join(&mut self, a: &A, vals: &BTreeSet<V>) -> bool {
        if vals.is_empty() {
            return false;
        }
        let slot = match self.map.get_mut(a) {
            Some(s) => s,
            None => self.map.entry(a.clone()).or_default(),
        };
        let before = slot.len();
        slot.extend(vals.iter().cloned());
        self.size += slot.len() - before;
        slot.len() != before
    }

    pub fn join_one(&mut self, a: &A, v: V) -> bool {
        let slot = self.map.entry(a.clone()).or_default();
        let grew = slot.insert(v);
        self.size += grew as usize;
        grew
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, &BTreeSet<V>)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total number of (address, value) pairs.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Pointwise `self ⊑ other`.
    pub fn le(&self, other: &Store<A, V>) -> bool {
        self.map.iter().all(|(a, vs)| match other.map.get(a) {
            Some(ws) => vs.is_subset(ws),
            None => vs.is_empty(),
        })
    }
}

impl<A: Eq + Hash, V: PartialEq> PartialEq for Store<A, V> {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.map == other.map
    }
}

pub trait StoreView<A, V> {
    fn read(&self, a: &A) -> Option<&BTreeSet<V>>;
}

impl<A: Eq + Hash + Clone, V: Ord + Clone> StoreView<A, V> for Store<A, V> {
    fn read(&self, a: &A) -> Option<&BTreeSet<V>> {
        self.get(a)
    }
}

/// One abstract transition out of a configuration. `next` is `None` when the
/// transition halts; its writes still count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor<C, A, V> {
    pub next: Option<C>,
    pub writes: Vec<(A, BTreeSet<V>)>,
}

pub trait AbstractMachine {
    type Config: Clone + Eq + Hash + Debug;
    type Addr: Clone + Eq + Hash + Debug;
    type Val: Clone + Ord + Debug;

    fn initial(&mut self) -> Self::Config;

    /// Store contents present before the first transition.
    fn initial_store(&mut self) -> Vec<(Self::Addr, BTreeSet<Self::Val>)> {
        Vec::new()
    }

    fn step(
        &mut self,
        config: &Self::Config,
        store: &dyn StoreView<Self::Addr, Self::Val>,
    ) -> Vec<Successor<Self::Config, Self::Addr, Self::Val>>;
}

pub type MachineStore<M> = Store<<M as AbstractMachine>::Addr, <M as AbstractMachine>::Val>;

#[derive(Clone, Debug, Default)]
pub struct Budget {
    pub max_transfers: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn transfers(n: u64) -> Self {
        Budget { max_transfers: Some(n), deadline: None }
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    fn exhausted(&self, transfers: u64) -> bool {
        if self.max_transfers.is_some_and(|m| transfers >= m) {
            return true;
        }
        // Reading the clock on every transfer is measurable on tiny steps.
        transfers.is_multiple_of(64) && self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    /// Applications of the per-configuration transfer function.
    pub transfers: u64,
    /// Worklist pops, or rounds for Kleene iteration.
    pub iterations: u64,
    /// Store writes that grew some value set.
    pub store_joins: u64,
    /// Lattice height climbed: configurations plus (address, value) pairs.
    pub ascent: u64,
}

pub struct Fixpoint<M: AbstractMachine> {
    pub machine: M,
    pub configs: IndexSet<M::Config>,
    pub store: MachineStore<M>,
    pub stats: Stats,
    /// True when the budget ran out before the fixpoint was reached.
    pub partial: bool,
}

struct Recorder<'a, A, V> {
    store: &'a Store<A, V>,
    reads: RefCell<Vec<A>>,
}

impl<A: Eq + Hash + Clone, V: Ord + Clone> StoreView<A, V> for Recorder<'_, A, V> {
    fn read(&self, a: &A) -> Option<&BTreeSet<V>> {
        self.reads.borrow_mut().push(a.clone());
        self.store.get(a)
    }
}

/// FIFO worklist over configurations with read-dependency tracking.
pub struct Worklist<M: AbstractMachine> {
    machine: M,
    configs: IndexSet<M::Config>,
    store: MachineStore<M>,
    deps: HashMap<M::Addr, IndexSet<usize>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    stats: Stats,
}

impl<M: AbstractMachine> Worklist<M> {
    pub fn new(mut machine: M) -> Self {
        let c0 = machine.initial();
        let mut store = Store::default();
        for (a, vs) in machine.initial_store() {
            store.join(&a, &vs);
        }
        let mut w = Worklist {
            machine,
            configs: IndexSet::new(),
            store,
            deps: HashMap::new(),
            queue: VecDeque::new(),
            queued: Vec::new(),
            stats: Stats::default(),
        };
        w.add_config(c0);
        w
    }

    fn add_config(&mut self, c: M::Config) {
        let (i, fresh) = self.configs.insert_full(c);
        if fresh {
            self.queued.push(false);
            self.enqueue(i);
        }
    }

    fn enqueue(&mut self, i: usize) {
        if !self.queued[i] {
            self.queued[i] = true;
            self.queue.push_back(i);
        }
    }

    /// Processes one configuration; false once the worklist is empty.
    pub fn step(&mut self) -> bool {
        let Some(i) = self.queue.pop_front() else {
            return false;
        };
        self.queued[i] = false;
        self.stats.iterations += 1;
        self.stats.transfers += 1;
        let config = self.configs[i].clone();
        let recorder = Recorder { store: &self.store, reads: RefCell::new(Vec::new()) };
        let succs = self.machine.step(&config, &recorder);
        for a in recorder.reads.into_inner() {
            self.deps.entry(a).or_default().insert(i);
        }
        let mut changed = Vec::new();
        for s in succs {
            for (a, vs) in &s.writes {
                if self.store.join(a, vs) {
                    self.stats.store_joins += 1;
                    changed.push(a.clone());
                }
            }
            if let Some(next) = s.next {
                self.add_config(next);
            }
        }
        for a in changed {
            if let Some(ds) = self.deps.get(&a) {
                let ds: Vec<usize> = ds.iter().copied().collect();
                for j in ds {
                    self.enqueue(j);
                }
            }
        }
        true
    }

    pub fn store(&self) -> &MachineStore<M> {
        &self.store
    }

    pub fn configs(&self) -> &IndexSet<M::Config> {
        &self.configs
    }

    pub fn machine(&self) -> &M {
        &self.machine
    }

    pub fn run(mut self, budget: &Budget) -> Fixpoint<M> {
        let mut partial = false;
        while !self.queue.is_empty() {
            if budget.exhausted(self.stats.transfers) {
                partial = true;
                break;
            }
            self.step();
        }
        self.stats.ascent = (self.configs.len() + self.store.size()) as u64;
        Fixpoint { machine: self.machine, configs: self.configs, store: self.store, stats: self.stats, partial }
    }
}

/// Runs the worklist solver to completion (or budget exhaustion).
pub fn solve<M: AbstractMachine>(machine: M, budget: &Budget) -> Fixpoint<M> {
    Worklist::new(machine).run(budget)
}

/// One application of the system-space transfer function: every
/// configuration steps against the same store, the successor configurations
/// (plus the initial one) form the new set and all writes are joined.
pub fn transfer<M: AbstractMachine>(
    machine: &mut M,
    c0: &M::Config,
    configs: &IndexSet<M::Config>,
    store: &MachineStore<M>,
) -> (IndexSet<M::Config>, MachineStore<M>, u64) {
    let mut next_configs = IndexSet::new();
    next_configs.insert(c0.clone());
    let mut next_store = store.clone();
    let mut joins = 0;
    for c in configs {
        for s in machine.step(c, store) {
            for (a, vs) in &s.writes {
                joins += next_store.join(a, vs) as u64;
            }
            if let Some(n) = s.next {
                next_configs.insert(n);
            }
        }
    }
    (next_configs, next_store, joins)
}

/// Kleene iteration of [`transfer`] from the bottom element.
pub fn kleene<M: AbstractMachine>(mut machine: M, budget: &Budget) -> Fixpoint<M> {
    let c0 = machine.initial();
    let mut store: MachineStore<M> = Store::default();
    for (a, vs) in machine.initial_store() {
        store.join(&a, &vs);
    }
    let mut configs = IndexSet::new();
    let mut stats = Stats::default();
    let mut partial = false;
    loop {
        if budget.exhausted(stats.transfers) {
            partial = true;
            break;
        }
        stats.iterations += 1;
        stats.transfers += configs.len() as u64;
        let (c2, s2, joins) = transfer(&mut machine, &c0, &configs, &store);
        stats.store_joins += joins;
        let done = joins == 0 && c2 == configs;
        configs = c2;
        store = s2;
        if done {
            break;
        }
    }
    stats.ascent = (configs.len() + store.size()) as u64;
    Fixpoint { machine, configs, store, stats, partial }
}
