//! Greedy output-alphabet reduction of BSC mixtures.
//!
//! Three quantizers shrink a [`MassDistribution`] to at most `k` masses:
//!
//! * [`transport_degrade`] moves a whole mass onto its right neighbour. The
//!   result stochastically dominates the input, hence is degraded.
//! * [`merge_degrade`] replaces two adjacent masses by one at their weighted
//!   mean. The mean crossover is kept and `E[f]` can only grow for concave
//!   `f`, which again gives a degraded channel.
//! * [`split_upgrade`] spreads an interior mass onto its two neighbours while
//!   keeping the mean, the reverse of a merge, and so upgrades the channel.
//!
//! Each step greedily picks the candidate whose kernel cost is smallest;
//! ties go to the leftmost candidate. Candidates live in an indexed heap over
//! a doubly linked list of masses, so a full reduction from `m` masses costs
//! `O(m log m)`.

use serde::Serialize;

use crate::channel::{clamp_crossover, Kernel, Mass, MassDistribution};
use crate::error::{Error, Result};

/// Whether a quantizer can only increase (`Degrade`) or only decrease
/// (`Upgrade`) the expectation of the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Degrade,
    Upgrade,
}

/// Step accounting for one reduction.
///
/// Losses are magnitudes in kernel units. For degrading quantizers `E[f]`
/// grows by `cumulative_loss`; for the upgrading one it shrinks by it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantizeReport {
    pub steps: usize,
    pub cumulative_loss: f64,
    pub max_step_loss: f64,
    pub direction: Direction,
}

impl QuantizeReport {
    fn empty(direction: Direction) -> Self {
        Self {
            steps: 0,
            cumulative_loss: 0.0,
            max_step_loss: 0.0,
            direction,
        }
    }

    fn record(&mut self, loss: f64) {
        self.steps += 1;
        self.cumulative_loss += loss;
        self.max_step_loss = self.max_step_loss.max(loss);
    }

    /// Change of `E[f]` with sign.
    pub fn signed_change(&self) -> f64 {
        match self.direction {
            Direction::Degrade => self.cumulative_loss,
            Direction::Upgrade => -self.cumulative_loss,
        }
    }
}

/// Cost of moving mass `p` from `f_from` to `f_to`.
#[inline]
pub(crate) fn transport_cost(p: f64, f_from: f64, f_to: f64) -> f64 {
    (p * (f_to - f_from)).max(0.0)
}

/// Merged position, its kernel value and the merge cost
/// `p1 (f(xm) - f(x1)) - p2 (f(x2) - f(xm))`.
#[inline]
pub(crate) fn merge_cost(
    kernel: Kernel,
    (p1, x1, f1): (f64, f64, f64),
    (p2, x2, f2): (f64, f64, f64),
) -> (f64, f64, f64) {
    let xm = (x1 + p2 / (p1 + p2) * (x2 - x1)).clamp(x1, x2);
    let fm = kernel.eval(xm);
    let cost = p1 * (fm - f1) - p2 * (f2 - fm);
    (cost.max(0.0), xm, fm)
}

/// Split weight `t` toward the right neighbour and the cost
/// `p (f(x) - t f(x_right) - (1 - t) f(x_left))`.
#[inline]
pub(crate) fn split_cost(
    (x_left, f_left): (f64, f64),
    (p, x, f): (f64, f64, f64),
    (x_right, f_right): (f64, f64),
) -> (f64, f64) {
    let t = (x - x_left) / (x_right - x_left);
    let cost = p * (f - t * f_right - (1.0 - t) * f_left);
    (cost.max(0.0), t)
}

const NIL: u32 = u32::MAX;
const ABSENT: u32 = u32::MAX;
const ARITY: usize = 4;

#[derive(Clone, Copy)]
struct Slot {
    cost: f64,
    idx: u32,
}

impl Slot {
    #[inline]
    fn new(cost: f64, idx: usize) -> Self {
        Self {
            cost,
            idx: idx as u32,
        }
    }

    #[inline]
    fn idx(self) -> usize {
        self.idx as usize
    }

    #[inline]
    fn before(self, other: Slot) -> bool {
        self.cost < other.cost || (self.cost == other.cost && self.idx < other.idx)
    }
}

/// Four-ary min-heap over entry indices keyed by `(cost, index)`, with
/// position tracking so a key can be changed or removed in place.
struct IndexedHeap {
    pos: Vec<u32>,
    items: Vec<Slot>,
}

impl IndexedHeap {
    fn new(m: usize) -> Self {
        Self {
            pos: vec![ABSENT; m],
            items: Vec::with_capacity(m),
        }
    }

    /// Fills the heap at once from `(index, cost)` pairs.
    fn build(&mut self, entries: impl Iterator<Item = (usize, f64)>) {
        for (i, cost) in entries {
            self.pos[i] = self.items.len() as u32;
            self.items.push(Slot::new(cost, i));
        }
        for at in (0..self.items.len().div_ceil(ARITY)).rev() {
            self.sift_down(at);
        }
    }

    #[inline]
    fn place(&mut self, at: usize, slot: Slot) {
        self.items[at] = slot;
        self.pos[slot.idx()] = at as u32;
    }

    fn sift_up(&mut self, mut at: usize) {
        let slot = self.items[at];
        while at > 0 {
            let parent = (at - 1) / ARITY;
            let above = self.items[parent];
            if !slot.before(above) {
                break;
            }
            self.place(at, above);
            at = parent;
        }
        self.place(at, slot);
    }

    fn sift_down(&mut self, mut at: usize) {
        let slot = self.items[at];
        let len = self.items.len();
        loop {
            let first = ARITY * at + 1;
            if first >= len {
                break;
            }
            let mut child = first;
            let mut best = self.items[first];
            for c in first + 1..(first + ARITY).min(len) {
                if self.items[c].before(best) {
                    child = c;
                    best = self.items[c];
                }
            }
            if !best.before(slot) {
                break;
            }
            self.place(at, best);
            at = child;
        }
        self.place(at, slot);
    }

    /// Inserts `i` or changes its key.
    fn set(&mut self, i: usize, cost: f64) {
        let at = self.pos[i];
        let slot = Slot::new(cost, i);
        if at == ABSENT {
            let at = self.items.len();
            self.items.push(slot);
            self.pos[i] = at as u32;
            self.sift_up(at);
        } else {
            let at = at as usize;
            let old = self.items[at];
            self.items[at] = slot;
            if slot.before(old) {
                self.sift_up(at);
            } else {
                self.sift_down(at);
            }
        }
    }

    fn remove(&mut self, i: usize) {
        let at = self.pos[i];
        if at == ABSENT {
            return;
        }
        self.pos[i] = ABSENT;
        let last = self
            .items
            .pop()
            .expect("a present item implies a non-empty heap");
        let at = at as usize;
        if at < self.items.len() {
            let old = self.items[at];
            self.place(at, last);
            if last.before(old) {
                self.sift_up(at);
            } else {
                self.sift_down(at);
            }
        }
    }

    fn peek(&self) -> Option<usize> {
        self.items.first().map(|s| s.idx())
    }

    fn pop(&mut self) -> Option<usize> {
        let top = self.peek()?;
        self.remove(top);
        Some(top)
    }
}

#[derive(Clone, Copy)]
struct Node {
    p: f64,
    x: f64,
    fx: f64,
    prev: u32,
    next: u32,
}

/// Doubly linked mass list with the candidate heap keyed by entry index.
/// Nodes are packed so that one step touches few cache lines.
struct MassList {
    nodes: Vec<Node>,
    head: u32,
    heap: IndexedHeap,
}

impl MassList {
    fn new(w: &MassDistribution, kernel: Kernel) -> Self {
        let m = w.len();
        let nodes = w
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| Node {
                p: e.p,
                x: e.x,
                fx: kernel.eval(e.x),
                prev: if i == 0 { NIL } else { i as u32 - 1 },
                next: if i + 1 == m { NIL } else { i as u32 + 1 },
            })
            .collect();
        Self {
            nodes,
            head: 0,
            heap: IndexedHeap::new(m),
        }
    }

    #[inline]
    fn prev(&self, i: usize) -> Option<usize> {
        let a = self.nodes[i].prev;
        (a != NIL).then_some(a as usize)
    }

    #[inline]
    fn next(&self, i: usize) -> Option<usize> {
        let b = self.nodes[i].next;
        (b != NIL).then_some(b as usize)
    }

    fn unlink(&mut self, i: usize) {
        let Node { prev, next, .. } = self.nodes[i];
        if prev == NIL {
            self.head = next;
        } else {
            self.nodes[prev as usize].next = next;
        }
        if next != NIL {
            self.nodes[next as usize].prev = prev;
        }
        self.heap.remove(i);
    }

    fn into_distribution(self) -> MassDistribution {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut i = self.head;
        while i != NIL {
            let n = self.nodes[i as usize];
            out.push(Mass::new(n.p, n.x));
            i = n.next;
        }
        MassDistribution::from_sorted_unchecked(out)
    }
}

fn check_target(k: usize, min: usize, name: &str) -> Result<()> {
    if k < min {
        return Err(Error::InvalidArgument(format!(
            "{name} needs a target size of at least {min}, got {k}"
        )));
    }
    Ok(())
}

/// Mass transportation: repeatedly moves the mass with the smallest
/// `p_i (f(x_{i+1}) - f(x_i))` onto its right neighbour.
pub fn transport_degrade(
    w: &MassDistribution,
    k: usize,
    kernel: Kernel,
) -> Result<(MassDistribution, QuantizeReport)> {
    check_target(k, 1, "transport_degrade")?;
    let mut report = QuantizeReport::empty(Direction::Degrade);
    if w.len() <= k {
        return Ok((w.clone(), report));
    }

    let mut list = MassList::new(w, kernel);
    let cost_at = |l: &MassList, i: usize, j: usize| {
        let (n, r) = (l.nodes[i], l.nodes[j]);
        transport_cost(n.p, n.fx, r.fx)
    };
    let initial: Vec<(usize, f64)> = (0..w.len() - 1)
        .map(|i| (i, cost_at(&list, i, i + 1)))
        .collect();
    list.heap.build(initial.into_iter());

    for _ in 0..w.len() - k {
        let i = list
            .heap
            .pop()
            .expect("a movable mass exists while more than k remain");
        let j = list.next(i).expect("candidates have a right neighbour");
        let a = list.prev(i);
        report.record(cost_at(&list, i, j));

        list.nodes[j].p += list.nodes[i].p;
        list.unlink(i);

        if let Some(b) = list.next(j) {
            let c = cost_at(&list, j, b);
            list.heap.set(j, c);
        }
        if let Some(a) = a {
            let c = cost_at(&list, a, j);
            list.heap.set(a, c);
        }
    }
    Ok((list.into_distribution(), report))
}

/// Greedy merging: repeatedly replaces the adjacent pair with the smallest
/// merge cost by a single mass at the pair's weighted mean.
pub fn merge_degrade(
    w: &MassDistribution,
    k: usize,
    kernel: Kernel,
) -> Result<(MassDistribution, QuantizeReport)> {
    check_target(k, 1, "merge_degrade")?;
    let mut report = QuantizeReport::empty(Direction::Degrade);
    if w.len() <= k {
        return Ok((w.clone(), report));
    }

    let mut list = MassList::new(w, kernel);
    let cost_at = |l: &MassList, i: usize, j: usize| {
        let (n, r) = (l.nodes[i], l.nodes[j]);
        merge_cost(kernel, (n.p, n.x, n.fx), (r.p, r.x, r.fx))
    };
    let initial: Vec<(usize, f64)> = (0..w.len() - 1)
        .map(|i| (i, cost_at(&list, i, i + 1).0))
        .collect();
    list.heap.build(initial.into_iter());

    for _ in 0..w.len() - k {
        // The merged mass keeps index `i`, so its heap slot is reused.
        let i = list
            .heap
            .peek()
            .expect("an adjacent pair exists while more than k remain");
        let j = list.next(i).expect("candidates have a right neighbour");
        let (cost, xm, fm) = cost_at(&list, i, j);
        report.record(cost);

        let pj = list.nodes[j].p;
        let n = &mut list.nodes[i];
        n.p += pj;
        n.x = clamp_crossover(xm);
        n.fx = fm;
        list.unlink(j);

        match list.next(i) {
            Some(b) => {
                let (c, _, _) = cost_at(&list, i, b);
                list.heap.set(i, c);
            }
            None => list.heap.remove(i),
        }
        if let Some(a) = list.prev(i) {
            let (c, _, _) = cost_at(&list, a, i);
            list.heap.set(a, c);
        }
    }
    Ok((list.into_distribution(), report))
}

/// Greedy splitting: repeatedly removes the interior mass whose
/// mean-preserving spread onto its two neighbours lowers `E[f]` the least.
/// The two extreme masses are never split, so `k >= 2`.
pub fn split_upgrade(
    w: &MassDistribution,
    k: usize,
    kernel: Kernel,
) -> Result<(MassDistribution, QuantizeReport)> {
    check_target(k, 2, "split_upgrade")?;
    let mut report = QuantizeReport::empty(Direction::Upgrade);
    if w.len() <= k {
        return Ok((w.clone(), report));
    }

    let mut list = MassList::new(w, kernel);
    let cost_at = |l: &MassList, a: usize, i: usize, b: usize| {
        let (na, n, nb) = (l.nodes[a], l.nodes[i], l.nodes[b]);
        split_cost((na.x, na.fx), (n.p, n.x, n.fx), (nb.x, nb.fx))
    };
    let initial: Vec<(usize, f64)> = (1..w.len() - 1)
        .map(|i| (i, cost_at(&list, i - 1, i, i + 1).0))
        .collect();
    list.heap.build(initial.into_iter());

    for _ in 0..w.len() - k {
        let i = list
            .heap
            .pop()
            .expect("an interior mass exists while more than k >= 2 remain");
        let (a, b) = match (list.prev(i), list.next(i)) {
            (Some(a), Some(b)) => (a, b),
            _ => unreachable!("only interior masses are candidates"),
        };
        let (cost, t) = cost_at(&list, a, i, b);
        report.record(cost);

        let p = list.nodes[i].p;
        list.nodes[a].p += (1.0 - t) * p;
        list.nodes[b].p += t * p;
        list.unlink(i);

        for n in [a, b] {
            match (list.prev(n), list.next(n)) {
                (Some(l), Some(r)) => {
                    let (c, _) = cost_at(&list, l, n, r);
                    list.heap.set(n, c);
                }
                _ => list.heap.remove(n),
            }
        }
    }
    Ok((list.into_distribution(), report))
}

/// Outcome of checking the per-step cost bounds on one distribution.
#[derive(Clone, Debug, Serialize)]
pub struct StepBoundCheck {
    pub masses: usize,
    /// `min_i p_i d_i` over the transport candidates.
    pub min_transport_cost: f64,
    /// `1 / m^2`.
    pub stated_bound: f64,
    /// `(1 - p_m)(f(x_m) - f(x_1)) / (m - 1)^2`, what Cauchy-Schwarz gives
    /// over the `m - 1` candidates.
    pub cauchy_schwarz_bound: f64,
    /// Pairs whose merge cost exceeds the transport cost of the same pair.
    pub merge_exceeds_transport: Vec<usize>,
}

impl StepBoundCheck {
    pub fn within_stated_bound(&self) -> bool {
        self.min_transport_cost <= self.stated_bound
    }

    pub fn within_cauchy_schwarz_bound(&self) -> bool {
        self.min_transport_cost <= self.cauchy_schwarz_bound * (1.0 + 1e-12)
    }

    pub fn merge_dominated(&self) -> bool {
        self.merge_exceeds_transport.is_empty()
    }
}

/// Per-step bounds of the first greedy step: the smallest transport cost
/// against `1/m^2`, and merge cost `<=` transport cost on every adjacent pair.
pub fn step_cost_bound_check(w: &MassDistribution, kernel: Kernel) -> Result<StepBoundCheck> {
    let e = w.entries();
    let m = e.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "step bounds need at least two masses".into(),
        ));
    }
    let fx: Vec<f64> = e.iter().map(|m| kernel.eval(m.x)).collect();
    let mut min_transport_cost = f64::INFINITY;
    let mut merge_exceeds_transport = Vec::new();
    for i in 0..m - 1 {
        let e1 = transport_cost(e[i].p, fx[i], fx[i + 1]);
        let (e2, _, _) = merge_cost(
            kernel,
            (e[i].p, e[i].x, fx[i]),
            (e[i + 1].p, e[i + 1].x, fx[i + 1]),
        );
        min_transport_cost = min_transport_cost.min(e1);
        if e2 > e1 + 1e-15 {
            merge_exceeds_transport.push(i);
        }
    }
    let spread = fx[m - 1] - fx[0];
    let candidates = (m - 1) as f64;
    Ok(StepBoundCheck {
        masses: m,
        min_transport_cost,
        stated_bound: 1.0 / (m * m) as f64,
        cauchy_schwarz_bound: (1.0 - e[m - 1].p) * spread / (candidates * candidates),
        merge_exceeds_transport,
    })
}

/// Which greedy quantizer a diagnostic runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Transport,
    Merge,
    Split,
}

impl Algorithm {
    pub fn run(
        self,
        w: &MassDistribution,
        k: usize,
        kernel: Kernel,
    ) -> Result<(MassDistribution, QuantizeReport)> {
        match self {
            Algorithm::Transport => transport_degrade(w, k, kernel),
            Algorithm::Merge => merge_degrade(w, k, kernel),
            Algorithm::Split => split_upgrade(w, k, kernel),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub k: usize,
    /// Mean cumulative loss over the input family.
    pub loss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub algorithm: Algorithm,
    pub kernel: Kernel,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln loss` against `ln k` over rows with
    /// positive loss; `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

impl DecayReport {
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].loss <= w[0].loss)
    }
}

/// Cumulative quantization loss as a function of the target size.
pub fn decay_diagnostic(
    family: &[MassDistribution],
    ks: &[usize],
    algorithm: Algorithm,
    kernel: Kernel,
) -> Result<DecayReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty channel family".into()));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("k sweep must be ascending".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut total = 0.0;
        for w in family {
            let (_, report) = algorithm.run(w, k, kernel)?;
            total += report.cumulative_loss;
        }
        rows.push(DecayRow {
            k,
            loss: total / family.len() as f64,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.loss > 0.0)
        .map(|r| ((r.k as f64).ln(), r.loss.ln()))
        .collect();
    Ok(DecayReport {
        algorithm,
        kernel,
        slope: least_squares_slope(&points),
        rows,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
