//! Winner determination: weighted set packing over bidders' bundles.
//!
//! Two solvers share one instance type. [`solve_exact`] is a depth-first
//! branch and bound with a clique-cover bound, used by the centralized
//! baseline and as a test oracle. [`solve_fls`] is the float interval local
//! search used inside every negotiation round.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a packable item. Task ids are used directly; items with
/// [`EXCLUSIVE_BIT`] set are synthetic and only make bundles mutually
/// exclusive (e.g. several alternative bundles from one bidder).
pub type ItemId = u64;

pub const EXCLUSIVE_BIT: ItemId = 1 << 63;

pub const DEFAULT_SIZE_LIMIT: usize = 10_000;

const EPS: f64 = 1e-9;

/// Symmetric conflict relation stored as one bitset row per bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ConflictMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self { n, words, bits: vec![0; n * words] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        BitIter::new(self.row(i))
    }
}

struct BitIter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> BitIter<'a> {
    fn new(words: &'a [u64]) -> Self {
        Self { words, idx: 0, cur: words.first().copied().unwrap_or(0) }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.cur == 0 {
            self.idx += 1;
            self.cur = *self.words.get(self.idx)?;
        }
        let bit = self.cur.trailing_zeros() as usize;
        self.cur &= self.cur - 1;
        Some(self.idx * 64 + bit)
    }
}

/// Two bundles conflict iff they share an item.
pub fn build_conflict_matrix(gt: &[Vec<ItemId>]) -> ConflictMatrix {
    let mut m = ConflictMatrix::new(gt.len());
    let mut holders: std::collections::HashMap<ItemId, Vec<usize>> = Default::default();
    for (i, b) in gt.iter().enumerate() {
        let distinct: BTreeSet<ItemId> = b.iter().copied().collect();
        for it in distinct {
            holders.entry(it).or_default().push(i);
        }
    }
    for list in holders.values() {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                m.set(i, j);
            }
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdpInstance {
    pub gt: Vec<Vec<ItemId>>,
    pub vt: Vec<f64>,
    pub conflicts: ConflictMatrix,
}

impl WdpInstance {
    pub fn new(gt: Vec<Vec<ItemId>>, vt: Vec<f64>) -> Result<Self> {
        if gt.len() != vt.len() {
            return Err(Error::LengthMismatch(format!("{} bundles, {} prices", gt.len(), vt.len())));
        }
        if let Some(v) = vt.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParam(format!("bundle price {v}")));
        }
        let conflicts = build_conflict_matrix(&gt);
        Ok(Self { gt, vt, conflicts })
    }

    pub fn len(&self) -> usize {
        self.gt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt.is_empty()
    }

    pub fn solution(&self, x: Vec<bool>) -> WdpSolution {
        let tasks = x
            .iter()
            .zip(&self.gt)
            .filter(|(s, _)| **s)
            .flat_map(|(_, b)| b.iter().copied())
            .filter(|it| it & EXCLUSIVE_BIT == 0)
            .collect();
        WdpSolution { value: solution_value(self, &x), x, tasks, iterations: 0, hit_cap: false, proven: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdpSolution {
    pub x: Vec<bool>,
    pub value: f64,
    /// Items covered by the selected bundles (synthetic items excluded).
    pub tasks: BTreeSet<ItemId>,
    pub iterations: u64,
    /// The iteration or node budget ran out before normal termination.
    pub hit_cap: bool,
    /// Optimality was proven (always false for the heuristic).
    pub proven: bool,
}

impl WdpSolution {
    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.x.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i)
    }
}

pub fn solution_value(inst: &WdpInstance, x: &[bool]) -> f64 {
    x.iter().zip(&inst.vt).filter(|(s, _)| **s).map(|(_, v)| v).sum()
}

pub fn is_feasible(inst: &WdpInstance, x: &[bool]) -> bool {
    let sel: Vec<usize> = x.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect();
    sel.iter()
        .enumerate()
        .all(|(a, &i)| sel[a + 1..].iter().all(|&j| !inst.conflicts.get(i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactParams {
    pub size_limit: usize,
    /// Search-node budget; `None` searches to proven optimality.
    pub node_limit: Option<u64>,
}

impl Default for ExactParams {
    fn default() -> Self {
        Self { size_limit: DEFAULT_SIZE_LIMIT, node_limit: None }
    }
}

pub fn solve_exact(inst: &WdpInstance) -> Result<WdpSolution> {
    solve_exact_with(inst, &ExactParams::default(), &[])
}

/// Branch and bound with optional feasible warm starts.
///
/// The first pass explores bundles in price order to find the optimal value;
/// the second walks bundles in index order, trying to select before
/// skipping, and stops at the first solution reaching that value. The result
/// is the optimum whose selection vector comes first when selected bundles
/// sort before unselected ones.
pub fn solve_exact_with(inst: &WdpInstance, params: &ExactParams, hints: &[Vec<bool>]) -> Result<WdpSolution> {
    let n = inst.len();
    if n > params.size_limit {
        return Err(Error::SizeGuard { size: n, limit: params.size_limit });
    }
    let mut budget = Budget { left: params.node_limit, used: 0 };

    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&a, &b| inst.vt[b].total_cmp(&inst.vt[a]).then(a.cmp(&b)));
    let permuted = Search::new(inst, &rank);

    let mut best_x = vec![false; n];
    let mut blocked = vec![0u64; n.div_ceil(64)];
    for (p, &i) in rank.iter().enumerate() {
        if blocked[p / 64] >> (p % 64) & 1 == 0 {
            best_x[i] = true;
            for (w, r) in blocked.iter_mut().zip(permuted.conflicts.row(p)) {
                *w |= r;
            }
        }
    }
    let mut best_v = solution_value(inst, &best_x);
    for h in hints {
        if h.len() == n && is_feasible(inst, h) {
            let v = solution_value(inst, h);
            if v > best_v + EPS {
                best_v = v;
                best_x = h.clone();
            }
        }
    }

    let mut incumbent = best_v;
    let mut found_perm: Option<Vec<bool>> = None;
    permuted.maximize(&mut incumbent, &mut found_perm, &mut budget);
    if let Some(xp) = found_perm {
        best_x = vec![false; n];
        for (p, s) in xp.into_iter().enumerate() {
            best_x[rank[p]] = s;
        }
        best_v = solution_value(inst, &best_x);
    }
    if budget.exhausted() {
        let mut sol = inst.solution(best_x);
        sol.iterations = budget.used;
        sol.hit_cap = true;
        sol.proven = false;
        return Ok(sol);
    }

    let identity: Vec<usize> = (0..n).collect();
    let ordered = Search::new(inst, &identity);
    let mut tie_budget = Budget { left: params.node_limit, used: 0 };
    if let Some(x) = ordered.first_reaching(best_v - EPS * (1.0 + best_v.abs()), &mut tie_budget) {
        best_x = x;
    }
    let mut sol = inst.solution(best_x);
    sol.iterations = budget.used + tie_budget.used;
    sol.hit_cap = tie_budget.exhausted();
    Ok(sol)
}

struct Budget {
    left: Option<u64>,
    used: u64,
}

impl Budget {
    fn tick(&mut self) -> bool {
        self.used += 1;
        match &mut self.left {
            Some(0) => false,
            Some(l) => {
                *l -= 1;
                true
            }
            None => true,
        }
    }

    fn exhausted(&self) -> bool {
        self.left == Some(0)
    }
}

/// Instance view in a fixed bundle order, with a clique partition for
/// bounding: every bundle is charged to the most widely shared item it
/// contains, and at most one bundle per such item can be selected.
struct Search {
    prices: Vec<f64>,
    conflicts: ConflictMatrix,
    clique: Vec<usize>,
    n_cliques: usize,
}

impl Search {
    fn new(inst: &WdpInstance, order: &[usize]) -> Self {
        let n = order.len();
        let mut pos = vec![0; n];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let mut conflicts = ConflictMatrix::new(n);
        for (p, &i) in order.iter().enumerate() {
            for j in inst.conflicts.neighbors(i) {
                let q = pos[j];
                if p < q {
                    conflicts.set(p, q);
                }
            }
        }

        let mut count: std::collections::HashMap<ItemId, usize> = Default::default();
        for b in &inst.gt {
            for it in b.iter().collect::<BTreeSet<_>>() {
                *count.entry(*it).or_default() += 1;
            }
        }
        let mut items: Vec<(ItemId, usize)> = count.into_iter().collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let item_rank: std::collections::HashMap<ItemId, usize> =
            items.iter().enumerate().map(|(r, (it, _))| (*it, r)).collect();

        let mut clique = vec![usize::MAX; n];
        let mut next_singleton = items.len();
        for (p, &i) in order.iter().enumerate() {
            clique[p] = match inst.gt[i].iter().map(|it| item_rank[it]).min() {
                Some(r) => r,
                None => {
                    next_singleton += 1;
                    next_singleton - 1
                }
            };
        }
        Self {
            prices: order.iter().map(|&i| inst.vt[i]).collect(),
            conflicts,
            clique,
            n_cliques: next_singleton,
        }
    }

    fn bound(&self, free: &[u64], from: usize, scratch: &mut [f64], touched: &mut Vec<usize>) -> f64 {
        let mut total = 0.0;
        for p in BitIter::new(free).skip_while(|p| *p < from) {
            let c = self.clique[p];
            let v = self.prices[p];
            if scratch[c] < 0.0 {
                scratch[c] = v;
                touched.push(c);
                total += v;
            } else if v > scratch[c] {
                total += v - scratch[c];
                scratch[c] = v;
            }
        }
        for c in touched.drain(..) {
            scratch[c] = -1.0;
        }
        total
    }

    fn initial_free(&self) -> Vec<u64> {
        let n = self.prices.len();
        let mut free = vec![u64::MAX; n.div_ceil(64)];
        if !n.is_multiple_of(64) {
            if let Some(last) = free.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        free
    }

    fn maximize(&self, incumbent: &mut f64, found: &mut Option<Vec<bool>>, budget: &mut Budget) {
        let n = self.prices.len();
        let mut scratch = vec![-1.0; self.n_cliques];
        let mut touched = Vec::new();
        let mut x = vec![false; n];
        let mut ctx = DfsCtx { scratch: &mut scratch, touched: &mut touched, budget };
        self.dfs_max(0, self.initial_free(), 0.0, &mut x, incumbent, found, &mut ctx);
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_max(
        &self,
        from: usize,
        free: Vec<u64>,
        value: f64,
        x: &mut Vec<bool>,
        incumbent: &mut f64,
        found: &mut Option<Vec<bool>>,
        ctx: &mut DfsCtx<'_>,
    ) {
        if !ctx.budget.tick() {
            return;
        }
        let Some(p) = BitIter::new(&free).find(|p| *p >= from) else {
            if value > *incumbent + EPS {
                *incumbent = value;
                *found = Some(x.clone());
            }
            return;
        };
        let bound = self.bound(&free, p, ctx.scratch, ctx.touched);
        if value + bound <= *incumbent + EPS {
            return;
        }
        let mut with = free.clone();
        for (w, r) in with.iter_mut().zip(self.conflicts.row(p)) {
            *w &= !r;
        }
        with[p / 64] &= !(1 << (p % 64));
        x[p] = true;
        self.dfs_max(p + 1, with, value + self.prices[p], x, incumbent, found, ctx);
        x[p] = false;
        let mut without = free;
        without[p / 64] &= !(1 << (p % 64));
        self.dfs_max(p + 1, without, value, x, incumbent, found, ctx);
    }

    fn first_reaching(&self, target: f64, budget: &mut Budget) -> Option<Vec<bool>> {
        let n = self.prices.len();
        let mut scratch = vec![-1.0; self.n_cliques];
        let mut touched = Vec::new();
        let mut x = vec![false; n];
        let mut ctx = DfsCtx { scratch: &mut scratch, touched: &mut touched, budget };
        self.dfs_reach(0, self.initial_free(), 0.0, &mut x, target, &mut ctx).then_some(x)
    }

    fn dfs_reach(
        &self,
        from: usize,
        free: Vec<u64>,
        value: f64,
        x: &mut Vec<bool>,
        target: f64,
        ctx: &mut DfsCtx<'_>,
    ) -> bool {
        if !ctx.budget.tick() {
            return false;
        }
        let Some(p) = BitIter::new(&free).find(|p| *p >= from) else {
            return value >= target;
        };
        if value + self.bound(&free, p, ctx.scratch, ctx.touched) < target {
            return false;
        }
        let mut with = free.clone();
        for (w, r) in with.iter_mut().zip(self.conflicts.row(p)) {
            *w &= !r;
        }
        with[p / 64] &= !(1 << (p % 64));
        x[p] = true;
        if self.dfs_reach(p + 1, with, value + self.prices[p], x, target, ctx) {
            return true;
        }
        x[p] = false;
        let mut without = free;
        without[p / 64] &= !(1 << (p % 64));
        self.dfs_reach(p + 1, without, value, x, target, ctx)
    }
}

struct DfsCtx<'a> {
    scratch: &'a mut [f64],
    touched: &'a mut Vec<usize>,
    budget: &'a mut Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlsParams {
    pub rho: f64,
    pub sigma: f64,
    /// Iterations without improvement before stopping.
    pub y: u32,
    pub rng_seed: u64,
    pub max_iterations: u64,
}

impl Default for FlsParams {
    fn default() -> Self {
        Self { rho: 0.9, sigma: 0.2, y: 10, rng_seed: 0, max_iterations: 10_000 }
    }
}

impl FlsParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParam(format!("rho {} outside [0, 1]", self.rho)));
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return Err(Error::InvalidParam(format!("sigma {} is negative", self.sigma)));
        }
        if self.y == 0 {
            return Err(Error::InvalidParam("y must be positive".into()));
        }
        Ok(())
    }
}

/// Float interval local search.
///
/// Greedily adds the best compatible bundle while any remains; once the
/// candidate is maximal, it perturbs it by forcing in a bundle from outside
/// (near-best price with probability `rho`, uniform otherwise) and evicting
/// whatever conflicts with it. The incumbent is replaced whenever the
/// candidate is at least as good; the run ends after `y` iterations without
/// strict improvement.
pub fn solve_fls(inst: &WdpInstance, params: &FlsParams) -> Result<WdpSolution> {
    params.validate()?;
    let n = inst.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    let mut in_c = vec![false; n];
    // Number of members of C conflicting with each bundle; zero outside C
    // means the bundle is in the priority set.
    let mut blockers = vec![0u32; n];
    let mut c_value = 0.0;
    let mut best = in_c.clone();
    let mut best_value = 0.0;
    let mut stall = 0u32;
    let mut iterations = 0u64;
    let mut hit_cap = false;

    let add = |b: usize, in_c: &mut Vec<bool>, blockers: &mut Vec<u32>, c_value: &mut f64| {
        in_c[b] = true;
        *c_value += inst.vt[b];
        for j in inst.conflicts.neighbors(b) {
            blockers[j] += 1;
        }
    };
    let remove = |b: usize, in_c: &mut Vec<bool>, blockers: &mut Vec<u32>, c_value: &mut f64| {
        in_c[b] = false;
        *c_value -= inst.vt[b];
        for j in inst.conflicts.neighbors(b) {
            blockers[j] -= 1;
        }
    };

    while stall < params.y {
        if iterations >= params.max_iterations {
            hit_cap = true;
            break;
        }
        iterations += 1;

        let priority = (0..n)
            .filter(|&j| !in_c[j] && blockers[j] == 0)
            .max_by(|&a, &b| inst.vt[a].total_cmp(&inst.vt[b]).then(b.cmp(&a)));
        if let Some(b) = priority {
            add(b, &mut in_c, &mut blockers, &mut c_value);
        } else {
            let tem_b: Vec<usize> = (0..n).filter(|&j| !in_c[j]).collect();
            if tem_b.is_empty() {
                break;
            }
            let pick = if rng.gen::<f64>() < params.rho {
                let v_max = tem_b.iter().map(|&j| inst.vt[j]).fold(f64::NEG_INFINITY, f64::max);
                let f_b: Vec<usize> =
                    tem_b.iter().copied().filter(|&j| (v_max - inst.vt[j]).abs() <= params.sigma).collect();
                *f_b.choose(&mut rng).expect("max element is within its own interval")
            } else {
                *tem_b.choose(&mut rng).expect("nonempty")
            };
            let evict: Vec<usize> = inst.conflicts.neighbors(pick).filter(|&j| in_c[j]).collect();
            for j in evict {
                remove(j, &mut in_c, &mut blockers, &mut c_value);
            }
            add(pick, &mut in_c, &mut blockers, &mut c_value);
        }

        if c_value >= best_value - 1e-12 {
            if c_value > best_value + 1e-12 {
                stall = 0;
            } else {
                stall += 1;
            }
            best.clone_from(&in_c);
            best_value = c_value;
        } else {
            stall += 1;
        }
    }

    let mut sol = inst.solution(best);
    sol.iterations = iterations;
    sol.hit_cap = hit_cap;
    sol.proven = false;
    Ok(sol)
}

/// Reproducible instance file for oracle tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDump {
    pub gt: Vec<Vec<ItemId>>,
    pub vt: Vec<f64>,
    pub seed: u64,
}

impl InstanceDump {
    pub fn instance(&self) -> Result<WdpInstance> {
        WdpInstance::new(self.gt.clone(), self.vt.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Seeded random instance: `bm` bundles of 1..=4 items over `n_items`
/// items with prices near the per-item scale of the bidding heuristics.
pub fn random_instance(bm: usize, n_items: u64, seed: u64) -> WdpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt = Vec::with_capacity(bm);
    let mut vt = Vec::with_capacity(bm);
    for _ in 0..bm {
        let k = rng.gen_range(1..=4.min(n_items as usize).max(1));
        let mut items: BTreeSet<ItemId> = BTreeSet::new();
        while items.len() < k {
            items.insert(rng.gen_range(0..n_items));
        }
        vt.push(items.len() as f64 * rng.gen_range(0.3..1.0));
        gt.push(items.into_iter().collect());
    }
    WdpInstance::new(gt, vt).expect("generated prices are valid")
}
