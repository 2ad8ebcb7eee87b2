//! Quasi-polynomial (1+epsilon)-approximation for preemptive weighted
//! flow-time p-norms on a small number of unrelated machines, with or
//! without job migration.
//!
//! The solver discretizes time into steps of `delta = epsilon / n^m`,
//! builds per-job geometric deadline grids whose consecutive deadlines
//! keep flow-time growth within a `1+epsilon` factor, and runs a
//! dynamic program over load profiles that count, for every deadline
//! interval and every machine subset, how many `delta`-slots run the
//! still-unscheduled jobs on exactly that subset. Jobs are processed
//! from the latest release to the earliest; each job is charged at the
//! right endpoint of the last interval that processes it, which
//! overstates its cost by at most a `(1+epsilon)^p` factor.

use crate::cost::{q, q_int, Cost, PNorm, Q};
use crate::instance::{
    objective, validate_schedule, CostModel, Instance, JobId, Schedule, Slot, Time,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::HashMap;

/// Default cap on stored dynamic-program states.
pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;

/// Uniform time grid of step `delta = epsilon / n^m`. Schedules built
/// by the solver start, preempt, and resume only on this grid, so grid
/// times are stored as integer multiples of `delta`.
#[derive(Debug, Clone)]
pub struct DeltaGrid {
    /// `1/delta`, an integer because `1/epsilon` must be integral.
    pub inv_delta: i64,
    /// Horizon `T` = max release + n * largest finite processing time.
    pub horizon: Time,
}

impl DeltaGrid {
    /// Builds the grid; `epsilon` must be the reciprocal of a positive
    /// integer so that the grid step divides every integer time.
    pub fn new(instance: &Instance, epsilon: &Q) -> crate::Result<DeltaGrid> {
        let inv_eps = invert_epsilon(epsilon)?;
        let n = instance.n() as i64;
        let mut scale: i64 = 1;
        for _ in 0..instance.machine_count() {
            scale = scale.checked_mul(n).ok_or_else(grid_too_fine)?;
        }
        let inv_delta = scale.checked_mul(inv_eps).ok_or_else(grid_too_fine)?;
        Ok(DeltaGrid { inv_delta, horizon: instance.horizon_multi() })
    }

    pub fn delta(&self) -> Q {
        q(1, self.inv_delta)
    }

    /// Horizon in grid units, `T / delta`.
    pub fn horizon_units(&self) -> crate::Result<i64> {
        self.horizon.checked_mul(self.inv_delta).ok_or_else(grid_too_fine)
    }
}

fn grid_too_fine() -> crate::Error {
    crate::Error::Budget("time grid is too fine for this instance size".into())
}

fn invert_epsilon(epsilon: &Q) -> crate::Result<i64> {
    if !epsilon.is_positive() {
        return Err(crate::Error::InvalidInstance("epsilon must be positive".into()));
    }
    let inv = epsilon.recip();
    if !inv.is_integer() {
        return Err(crate::Error::InvalidInstance(
            "epsilon must be the reciprocal of a positive integer".into(),
        ));
    }
    inv.to_integer()
        .to_i64()
        .ok_or_else(|| crate::Error::InvalidInstance("epsilon is too small".into()))
}

/// Per-job deadline grids in grid units, for jobs in release order
/// (instance job ids coincide with that order). Consecutive deadlines
/// bound how much a job's flow time can grow before the next deadline.
#[derive(Debug, Clone)]
pub struct DeadlineSets {
    pub grid: DeltaGrid,
    /// Strictly increasing deadline multiples of `delta`, per job;
    /// each set starts at the job's release and ends at the horizon.
    pub deadlines: Vec<Vec<i64>>,
}

impl DeadlineSets {
    /// Half-open intervals between consecutive deadlines of job `j`,
    /// in grid units.
    pub fn intervals(&self, j: usize) -> Vec<(i64, i64)> {
        self.deadlines[j].windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Builds the per-job deadline grids: the earliest job starts from
/// {release, release+1, horizon}; each later job restricts its
/// predecessor's grid to times at or after its own release and re-adds
/// release and release+1. Whenever two consecutive deadlines at or
/// above release+1 grow the flow time by more than `1+epsilon`, their
/// geometric average (relative to the release) is inserted. Finally
/// every deadline is snapped to the two neighboring grid multiples.
pub fn build_deadlines(instance: &Instance, epsilon: &Q) -> crate::Result<DeadlineSets> {
    let grid = DeltaGrid::new(instance, epsilon)?;
    let t_units = grid.horizon_units()?;
    let eps_f = q_to_f64(epsilon);
    // The ratio test runs on the same stored values that get snapped
    // below, and the snapped units fit in u16, so float error of a few
    // ulps can never flip the exact integer re-check that follows.
    let threshold = 1.0 + eps_f;
    let horizon = grid.horizon as f64;

    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(instance.n());
    for job in instance.jobs() {
        let r = job.r as f64;
        let mut set: Vec<f64> = match raw.last() {
            None => vec![r, r + 1.0, horizon],
            Some(prev) => {
                let mut s: Vec<f64> = prev.iter().copied().filter(|d| *d >= r).collect();
                s.push(r);
                s.push(r + 1.0);
                s
            }
        };
        set.sort_by(f64::total_cmp);
        set.dedup();
        let mut k = 0;
        let mut inserted = 0usize;
        while k + 1 < set.len() {
            let (d, d2) = (set[k], set[k + 1]);
            if d >= r + 1.0 - 1e-9 && d2 - r > threshold * (d - r) {
                let mid = r + ((d - r) * (d2 - r)).sqrt();
                if !(mid > d && mid < d2) || inserted > 100_000 {
                    return Err(crate::Error::Internal(
                        "deadline refinement failed to converge".into(),
                    ));
                }
                set.insert(k + 1, mid);
                inserted += 1;
            } else {
                k += 1;
            }
        }
        raw.push(set);
    }

    let inv = grid.inv_delta as f64;
    let mut deadlines: Vec<Vec<i64>> = Vec::with_capacity(raw.len());
    for (set, job) in raw.iter().zip(instance.jobs()) {
        let r_units = job.r * grid.inv_delta;
        let mut units: Vec<i64> = Vec::with_capacity(set.len() * 2);
        for &d in set {
            let x = d * inv;
            units.push(((x + 1e-6).floor() as i64).clamp(r_units, t_units));
            units.push(((x - 1e-6).ceil() as i64).clamp(r_units, t_units));
        }
        units.sort_unstable();
        units.dedup();
        deadlines.push(units);
    }

    let sets = DeadlineSets { grid, deadlines };
    check_deadline_properties(instance, epsilon, &sets)?;
    Ok(sets)
}

/// Verifies the structural guarantees of a deadline grid: membership
/// of release, release+1, and horizon; bounded flow-time growth
/// between consecutive deadlines at or above release+1; and nesting of
/// each job's grid inside the next job's grid from that job's release
/// on. Violations are internal errors: the builder cannot produce them
/// at supported scales.
pub fn check_deadline_properties(
    instance: &Instance,
    epsilon: &Q,
    sets: &DeadlineSets,
) -> crate::Result<()> {
    let bad = |msg: String| Err(crate::Error::Internal(msg));
    let inv_delta = sets.grid.inv_delta;
    let t_units = sets.grid.horizon_units()?;
    let (e_num, e_den) = (
        epsilon.numer().to_i128().expect("validated epsilon"),
        epsilon.denom().to_i128().expect("validated epsilon"),
    );
    for (j, job) in instance.jobs().iter().enumerate() {
        let d = &sets.deadlines[j];
        let r_units = job.r * inv_delta;
        if d.first() != Some(&r_units) || d.last() != Some(&t_units) {
            return bad(format!("deadline set {j} does not span release to horizon"));
        }
        if !d.contains(&(r_units + inv_delta).min(t_units)) {
            return bad(format!("deadline set {j} misses release+1"));
        }
        if d.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("deadline set {j} is not strictly increasing"));
        }
        for w in d.windows(2) {
            if w[0] < r_units + inv_delta {
                continue;
            }
            // (d' - r) <= (1 + eps)(d - r), exactly.
            let lhs = (w[1] - r_units) as i128 * e_den;
            let rhs = (w[0] - r_units) as i128 * (e_den + e_num);
            if lhs > rhs {
                return bad(format!("deadline set {j} violates the growth bound"));
            }
        }
        if j + 1 < instance.n() {
            let next_r = instance.jobs()[j + 1].r * inv_delta;
            let next = &sets.deadlines[j + 1];
            for &v in d.iter().filter(|&&v| v >= next_r) {
                if next.binary_search(&v).is_err() {
                    return bad(format!("deadline set {} drops an inherited deadline", j + 1));
                }
            }
        }
    }
    Ok(())
}

fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Search counters for one solver run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QptasStats {
    /// Dynamic-program states stored across all levels.
    pub cells: u64,
    /// Per-job allocation guesses enumerated.
    pub guesses: u64,
    /// Deadline-set sizes per job, in release order.
    pub deadline_counts: Vec<usize>,
}

/// Output of the quasi-polynomial solver.
#[derive(Debug)]
pub struct QptasResult {
    pub schedule: Schedule,
    /// Exact objective sum of the returned schedule.
    pub objective: Cost,
    /// The cost the search minimized: every job charged at the end of
    /// the last deadline interval that runs it. `objective <= bound`.
    pub bound: Cost,
    pub stats: QptasStats,
}

/// Solves the instance with the default state budget.
pub fn solve_qptas(
    instance: &Instance,
    model: &CostModel,
    migration: bool,
) -> crate::Result<QptasResult> {
    solve_qptas_with_budget(instance, model, migration, DEFAULT_STATE_BUDGET)
}

/// Solves the instance, failing with a budget error once the number of
/// stored states exceeds `state_budget` (or enumerated guesses exceed
/// 64x that).
pub fn solve_qptas_with_budget(
    instance: &Instance,
    model: &CostModel,
    migration: bool,
    state_budget: u64,
) -> crate::Result<QptasResult> {
    let sets = build_deadlines(instance, &model.epsilon)?;
    let mut solver = Solver::new(instance, model.p, migration, sets, state_budget)?;
    solver.run()
}

const MAX_INTERVALS: usize = 1023;
const MAX_UNITS: i64 = u16::MAX as i64;

/// One candidate coordinate for a job's allocation guess: run the job
/// on `machine` during `delta`-slots of interval `ivl` where exactly
/// the machines of `smask` are occupied by later jobs plus this one.
#[derive(Debug, Clone, Copy)]
struct GCoord {
    ivl: u16,
    machine: u8,
    /// Encodes (interval, machine subset, machine); see `pack_coord`.
    pack: u16,
    /// Completion units contributed by one slot on this machine.
    units: u128,
    bin: Bin,
}

/// Supply pool a coordinate draws from: slots with no later job
/// (shared per interval) or slots whose later jobs occupy exactly one
/// machine subset.
#[derive(Debug, Clone, Copy)]
enum Bin {
    Free(u16),
    /// Dense profile coordinate `(ivl, subset)` of the later jobs.
    Busy(u16),
}

fn pack_coord(ivl: usize, smask: u8, machine: usize) -> u16 {
    debug_assert!(ivl < MAX_INTERVALS + 1 && smask < 8 && machine < 8);
    ((ivl as u16) << 6) | ((smask as u16) << 3) | machine as u16
}

fn unpack_coord(pack: u16) -> (usize, u8, usize) {
    ((pack >> 6) as usize, ((pack >> 3) & 7) as u8, (pack & 7) as usize)
}

/// One stored DP state: the load profile of the jobs from this level
/// on (sparse, sorted `(coordinate, count)` pairs), the cheapest cost
/// realizing it, and the guess plus child state that achieved it.
struct Cell {
    key: Box<[u16]>,
    cost: Cost,
    lo: f64,
    hi: f64,
    guess: Box<[u16]>,
    child: u32,
}

/// A not-yet-finalized cell candidate. Exact costs are materialized
/// once per stored cell, not per enumerated guess; until then the
/// cached float enclosure plus an on-demand exact comparison decide
/// which candidate is cheaper.
struct Candidate {
    lo: f64,
    hi: f64,
    guess: Box<[u16]>,
    child: u32,
    last_ivl: u16,
}

struct CostTerm {
    cost: Cost,
    lo: f64,
    hi: f64,
}

struct Solver<'a> {
    instance: &'a Instance,
    p: PNorm,
    migration: bool,
    nsets: usize,
    inv_delta: i64,
    t_units: i64,
    /// Intervals of each job's deadline grid, in grid units.
    ivls: Vec<Vec<(i64, i64)>>,
    /// Charged cost per job per interval index.
    terms: Vec<Vec<CostTerm>>,
    /// Machines that can run each job.
    usable: Vec<Vec<usize>>,
    /// Completion units per slot, per job per machine (0 = unusable).
    units: Vec<Vec<u128>>,
    /// Units required to complete each job.
    need: Vec<u128>,
    deadline_counts: Vec<usize>,
    state_budget: u64,
    cells: u64,
    guesses: u64,
}

impl<'a> Solver<'a> {
    fn new(
        instance: &'a Instance,
        p: PNorm,
        migration: bool,
        sets: DeadlineSets,
        state_budget: u64,
    ) -> crate::Result<Solver<'a>> {
        let m = instance.machine_count();
        if m > 7 {
            return Err(crate::Error::Budget(format!(
                "{m} machines exceed the supported machine-subset encoding"
            )));
        }
        let inv_delta = sets.grid.inv_delta;
        let t_units = sets.grid.horizon_units()?;
        if t_units > MAX_UNITS {
            return Err(crate::Error::Budget(format!(
                "horizon spans {t_units} grid slots, more than {MAX_UNITS}"
            )));
        }
        let n = instance.n();
        let delta = sets.grid.delta();
        let mut ivls = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        let mut usable = Vec::with_capacity(n);
        let mut units = Vec::with_capacity(n);
        let mut need = Vec::with_capacity(n);
        for (j, job) in instance.jobs().iter().enumerate() {
            let iv = sets.intervals(j);
            if iv.len() > MAX_INTERVALS {
                return Err(crate::Error::Budget(format!(
                    "job {j} has {} deadline intervals, more than {MAX_INTERVALS}",
                    iv.len()
                )));
            }
            let r_units = job.r * inv_delta;
            let mut t = Vec::with_capacity(iv.len());
            for &(_, hi) in &iv {
                let base = q_int(hi - r_units) * delta.clone();
                let mut cost = Cost::zero();
                cost.add_power_term(&q_int(job.w), &base, p);
                let b = cost.bounds(192);
                t.push(CostTerm {
                    cost,
                    lo: next_down(q_to_f64(&b.lo)),
                    hi: next_up(q_to_f64(&b.hi)),
                });
            }
            let machines: Vec<usize> =
                (0..m).filter(|&i| instance.p_on(i, j).is_some()).collect();
            let lcm = machines
                .iter()
                .map(|&i| instance.p_on(i, j).expect("filtered") as u128)
                .fold(1u128, |a, b| a.lcm(&b));
            let per: Vec<u128> = (0..m)
                .map(|i| instance.p_on(i, j).map_or(0, |pij| lcm / pij as u128))
                .collect();
            ivls.push(iv);
            terms.push(t);
            usable.push(machines);
            units.push(per);
            need.push(inv_delta as u128 * lcm);
        }
        // Cheap refusal for hopeless grids before any enumeration.
        let per_level = n as u128
            * (1u128 << m)
            * ivls.iter().map(Vec::len).max().unwrap_or(1) as u128
            * (t_units as u128 + 1);
        if per_level > state_budget as u128 * 64 {
            return Err(crate::Error::Budget(
                "estimated search size exceeds the state budget".into(),
            ));
        }
        let deadline_counts = sets.deadlines.iter().map(Vec::len).collect();
        Ok(Solver {
            instance,
            p,
            migration,
            nsets: (1 << m) - 1,
            inv_delta,
            t_units,
            ivls,
            terms,
            usable,
            units,
            need,
            deadline_counts,
            state_budget,
            cells: 0,
            guesses: 0,
        })
    }

    fn coord_list(&self, jx: usize, only_machine: Option<usize>) -> Vec<GCoord> {
        let mut out = Vec::new();
        for ivl in 0..self.ivls[jx].len() {
            for smask in 1..=self.nsets as u8 {
                for &i in &self.usable[jx] {
                    if smask & (1 << i) == 0 {
                        continue;
                    }
                    if only_machine.is_some_and(|pin| pin != i) {
                        continue;
                    }
                    let sub = smask & !(1 << i);
                    let bin = if sub == 0 {
                        Bin::Free(ivl as u16)
                    } else {
                        Bin::Busy((ivl * self.nsets + sub as usize - 1) as u16)
                    };
                    out.push(GCoord {
                        ivl: ivl as u16,
                        machine: i as u8,
                        pack: pack_coord(ivl, smask, i),
                        units: self.units[jx][i],
                        bin,
                    });
                }
            }
        }
        out
    }

    /// Folds a child state's profile (over the next job's intervals)
    /// into this job's intervals and derives the per-interval counts
    /// of slots with no later job.
    fn aggregate(
        &self,
        jx: usize,
        child_key: &[u16],
        child_map: &[usize],
    ) -> crate::Result<(Vec<i64>, Vec<i64>)> {
        let n_ivls = self.ivls[jx].len();
        let mut profile = vec![0i64; n_ivls * self.nsets];
        for pair in child_key.chunks_exact(2) {
            let (coord, val) = (pair[0] as usize, pair[1] as i64);
            let (civl, smask) = (coord / self.nsets, coord % self.nsets);
            profile[child_map[civl] * self.nsets + smask] += val;
        }
        let mut free = Vec::with_capacity(n_ivls);
        for (ivl, &(lo, hi)) in self.ivls[jx].iter().enumerate() {
            let used: i64 = profile[ivl * self.nsets..(ivl + 1) * self.nsets].iter().sum();
            let cap = hi - lo;
            if used > cap {
                return Err(crate::Error::Internal(
                    "stored profile exceeds interval capacity".into(),
                ));
            }
            free.push(cap - used);
        }
        Ok((profile, free))
    }

    /// Maps each interval of job `jx+1` to the enclosing interval of
    /// job `jx` (the later grid refines the earlier one).
    fn child_interval_map(&self, jx: usize) -> crate::Result<Vec<usize>> {
        let parent = &self.ivls[jx];
        let mut out = Vec::new();
        if jx + 1 >= self.ivls.len() {
            return Ok(out);
        }
        for &(a, b) in &self.ivls[jx + 1] {
            let pos = parent.partition_point(|&(lo, _)| lo <= a);
            let idx = pos.checked_sub(1).ok_or_else(nesting_broken)?;
            let (lo, hi) = parent[idx];
            if a < lo || b > hi {
                return Err(nesting_broken());
            }
            out.push(idx);
        }
        Ok(out)
    }

    fn guess_cap(&self) -> u64 {
        self.state_budget.saturating_mul(64)
    }

    fn charge_guesses(&mut self, newly: u64) -> crate::Result<()> {
        self.guesses += newly;
        if self.guesses > self.guess_cap() {
            return Err(crate::Error::Budget(format!(
                "guess enumeration exceeded {} candidates",
                self.guess_cap()
            )));
        }
        Ok(())
    }

    /// Exact cost of a candidate: the child state's cost plus this
    /// job's charge for the candidate's last active interval.
    fn exact_cost(&self, children: &[Cell], child: u32, jx: usize, last_ivl: u16) -> Cost {
        let mut cost = children[child as usize].cost.clone();
        cost.add(&self.terms[jx][last_ivl as usize].cost);
        cost
    }

    /// Strict improvement order: cheaper cost first (float enclosures
    /// fast path, certified exact comparison on overlap), ties by
    /// guess encoding, then by child state rank.
    fn candidate_beats(
        &self,
        children: &[Cell],
        jx: usize,
        cand: &Candidate,
        incumbent: &Candidate,
    ) -> bool {
        if cand.hi < incumbent.lo {
            return true;
        }
        if cand.lo > incumbent.hi {
            return false;
        }
        let a = self.exact_cost(children, cand.child, jx, cand.last_ivl);
        let b = self.exact_cost(children, incumbent.child, jx, incumbent.last_ivl);
        match a.cmp_certified(&b) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                (&cand.guess, cand.child) < (&incumbent.guess, incumbent.child)
            }
        }
    }

    /// Builds all states for job `jx >= 1` from the child states.
    fn run_level(&mut self, jx: usize, children: &[Cell]) -> crate::Result<Vec<Cell>> {
        let child_map = self.child_interval_map(jx)?;
        let coord_sets: Vec<Vec<GCoord>> = if self.migration {
            vec![self.coord_list(jx, None)]
        } else {
            self.usable[jx].iter().map(|&i| self.coord_list(jx, Some(i))).collect()
        };
        let n_coords = self.ivls[jx].len() * self.nsets;
        let mut map: HashMap<Box<[u16]>, Candidate> = HashMap::new();
        let mut emissions: Vec<Emission> = Vec::new();
        for (rank, child) in children.iter().enumerate() {
            let (profile, free) = self.aggregate(jx, &child.key, &child_map)?;
            for coords in &coord_sets {
                emissions.clear();
                let found = enumerate_allocations(
                    coords,
                    &profile,
                    &free,
                    self.need[jx],
                    self.migration,
                    self.guess_cap() - self.guesses,
                    &mut emissions,
                )?;
                self.charge_guesses(found)?;
                for em in emissions.drain(..) {
                    let key = apply_allocation(&profile, n_coords, self.nsets, &em.alloc)?;
                    let term = &self.terms[jx][em.last_ivl as usize];
                    let cand = Candidate {
                        lo: next_down(child.lo + term.lo),
                        hi: next_up(child.hi + term.hi),
                        guess: em.alloc.iter().flat_map(|&(p_, y)| [p_, y]).collect(),
                        child: rank as u32,
                        last_ivl: em.last_ivl,
                    };
                    match map.entry(key) {
                        Entry::Vacant(e) => {
                            e.insert(cand);
                        }
                        Entry::Occupied(mut e) => {
                            if self.candidate_beats(children, jx, &cand, e.get()) {
                                e.insert(cand);
                            }
                        }
                    }
                    if self.cells + map.len() as u64 > self.state_budget {
                        return Err(crate::Error::Budget(format!(
                            "stored states exceeded the budget of {}",
                            self.state_budget
                        )));
                    }
                }
            }
        }
        let mut level: Vec<(Box<[u16]>, Candidate)> = map.into_iter().collect();
        level.sort_by(|a, b| a.0.cmp(&b.0));
        self.cells += level.len() as u64;
        Ok(level
            .into_iter()
            .map(|(key, c)| Cell {
                key,
                cost: self.exact_cost(children, c.child, jx, c.last_ivl),
                lo: c.lo,
                hi: c.hi,
                guess: c.guess,
                child: c.child,
            })
            .collect())
    }

    /// Final level for the earliest-released job: no state is stored,
    /// only the cheapest feasible completion over all child states.
    /// For each child the minimal last interval is found by comparing
    /// the units reachable from a prefix of intervals against the
    /// requirement; the allocation itself is rebuilt greedily,
    /// fastest machine first within each supply pool.
    fn run_fold(&mut self, children: &[Cell]) -> crate::Result<Candidate> {
        let jx = 0;
        let child_map = self.child_interval_map(jx)?;
        let machine_modes: Vec<Option<usize>> = if self.migration {
            vec![None]
        } else {
            self.usable[jx].iter().map(|&i| Some(i)).collect()
        };
        let mut best: Option<Candidate> = None;
        for (rank, child) in children.iter().enumerate() {
            let (profile, free) = self.aggregate(jx, &child.key, &child_map)?;
            for &mode in &machine_modes {
                let Some((last_ivl, alloc)) = self.cheapest_completion(jx, &profile, &free, mode)
                else {
                    continue;
                };
                self.charge_guesses(1)?;
                let term = &self.terms[jx][last_ivl];
                let cand = Candidate {
                    lo: next_down(child.lo + term.lo),
                    hi: next_up(child.hi + term.hi),
                    guess: alloc.iter().flat_map(|&(p_, y)| [p_, y]).collect(),
                    child: rank as u32,
                    last_ivl: last_ivl as u16,
                };
                if best
                    .as_ref()
                    .is_none_or(|b| self.candidate_beats(children, jx, &cand, b))
                {
                    best = Some(cand);
                }
            }
        }
        best.ok_or_else(|| {
            crate::Error::Internal("no feasible completion for the earliest job".into())
        })
    }

    /// Smallest interval index whose prefix can complete job `jx`
    /// given the later jobs' profile, plus a canonical allocation that
    /// achieves it. `None` when even the full horizon cannot.
    fn cheapest_completion(
        &self,
        jx: usize,
        profile: &[i64],
        free: &[i64],
        mode: Option<usize>,
    ) -> Option<(usize, Vec<(u16, u16)>)> {
        let machines: Vec<usize> = match mode {
            Some(i) => vec![i],
            None => self.usable[jx].clone(),
        };
        let max_units = |ivl: usize| -> u128 {
            let alone_best =
                machines.iter().map(|&i| self.units[jx][i]).max().unwrap_or(0);
            let mut total = free[ivl] as u128 * alone_best;
            for sub in 1..=self.nsets as u8 {
                let supply = profile[ivl * self.nsets + sub as usize - 1];
                if supply == 0 {
                    continue;
                }
                let best = machines
                    .iter()
                    .filter(|&&i| sub & (1 << i) == 0)
                    .map(|&i| self.units[jx][i])
                    .max()
                    .unwrap_or(0);
                total += supply as u128 * best;
            }
            total
        };
        let need = self.need[jx];
        let mut reach = 0u128;
        let mut last = None;
        for ivl in 0..self.ivls[jx].len() {
            reach += max_units(ivl);
            if reach >= need {
                last = Some(ivl);
                break;
            }
        }
        let last = last?;
        // Greedy refill in interval order; within an interval the free
        // pool drains before each busy pool, fastest machine first, so
        // the prefix maximum is attainable and the requirement crosses
        // inside `last`.
        let mut have = 0u128;
        let mut alloc: Vec<(u16, u16)> = Vec::new();
        let mut fill = |pool: &mut i64, ivl: usize, sub: u8, order: &[usize], have: &mut u128| {
            for &i in order {
                if *have >= need || *pool == 0 {
                    return;
                }
                let u = self.units[jx][i];
                if u == 0 || (sub & (1 << i)) != 0 {
                    continue;
                }
                let want = (need - *have).div_ceil(u);
                let y = (*pool as u128).min(want) as i64;
                if y > 0 {
                    alloc.push((pack_coord(ivl, sub | (1 << i), i), y as u16));
                    *pool -= y;
                    *have += y as u128 * u;
                }
            }
        };
        let mut order = machines.clone();
        order.sort_by_key(|&i| (std::cmp::Reverse(self.units[jx][i]), i));
        for ivl in 0..=last {
            let mut pool = free[ivl];
            fill(&mut pool, ivl, 0, &order, &mut have);
            for sub in 1..=self.nsets as u8 {
                let mut pool = profile[ivl * self.nsets + sub as usize - 1];
                fill(&mut pool, ivl, sub, &order, &mut have);
            }
            if have >= need {
                break;
            }
        }
        debug_assert!(have >= need);
        alloc.sort_unstable();
        debug_assert_eq!(
            alloc.iter().map(|&(p_, _)| unpack_coord(p_).0).max(),
            Some(last),
            "completion must cross inside the chosen interval"
        );
        Some((last, alloc))
    }

    fn run(&mut self) -> crate::Result<QptasResult> {
        let n = self.instance.n();
        let virtual_child = vec![Cell {
            key: Vec::new().into_boxed_slice(),
            cost: Cost::zero(),
            lo: 0.0,
            hi: 0.0,
            guess: Vec::new().into_boxed_slice(),
            child: 0,
        }];
        // levels[jx] holds the states for job jx, for jx in 1..n.
        let mut levels: Vec<Vec<Cell>> = (0..n).map(|_| Vec::new()).collect();
        for jx in (1..n).rev() {
            let next = if jx + 1 < n { &levels[jx + 1] } else { &virtual_child };
            let built = self.run_level(jx, next)?;
            if built.is_empty() {
                return Err(crate::Error::Internal(format!(
                    "no feasible allocation for job {jx}"
                )));
            }
            levels[jx] = built;
        }
        let fold_children = if n > 1 { &levels[1] } else { &virtual_child };
        let winner = self.run_fold(fold_children)?;
        let bound = self.exact_cost(fold_children, winner.child, 0, winner.last_ivl);

        // Recover the guess chain from the earliest job to the latest.
        let mut guesses: Vec<Vec<(u16, u16)>> = Vec::with_capacity(n);
        let mut keys: Vec<&[u16]> = Vec::with_capacity(n);
        guesses.push(decode_pairs(&winner.guess));
        keys.push(&[]);
        let mut at = winner.child as usize;
        for level in levels.iter().take(n).skip(1) {
            let cell = &level[at];
            guesses.push(decode_pairs(&cell.guess));
            keys.push(&cell.key);
            at = cell.child as usize;
        }

        let schedule = self.materialize(&guesses, &keys)?;
        validate_schedule(self.instance, &schedule)?;
        if !self.migration {
            let mut machine_of: Vec<Option<usize>> = vec![None; n];
            for s in schedule.slots() {
                let entry = machine_of[s.job].get_or_insert(s.machine);
                if *entry != s.machine {
                    return Err(crate::Error::Internal(
                        "migration produced in non-migration mode".into(),
                    ));
                }
            }
        }
        let exact = objective(self.instance, &schedule, self.p)?;
        debug_assert!(
            exact.le_certified(&bound),
            "schedule objective must not exceed the charged bound"
        );
        Ok(QptasResult {
            schedule,
            objective: exact,
            bound,
            stats: QptasStats {
                cells: self.cells,
                guesses: self.guesses,
                deadline_counts: self.deadline_counts.clone(),
            },
        })
    }

    /// Turns the guess chain into concrete grid slots. Jobs are placed
    /// from the latest release backwards; each guess entry claims the
    /// leftmost slots of its interval whose already-placed jobs occupy
    /// exactly the required machine subset. Afterwards every job's
    /// final slot is truncated at its exact completion point.
    fn materialize(
        &self,
        guesses: &[Vec<(u16, u16)>],
        keys: &[&[u16]],
    ) -> crate::Result<Schedule> {
        let n = self.instance.n();
        let m = self.instance.machine_count();
        let t = self.t_units as usize;
        let mut occupied = vec![0u8; t];
        let mut owner: Vec<Vec<Option<JobId>>> = vec![vec![None; t]; m];
        let mut self_taken = vec![false; t];
        for jx in (0..n).rev() {
            self_taken.fill(false);
            let mut marks: Vec<(usize, usize)> = Vec::new();
            for &(pack, y) in &guesses[jx] {
                let (ivl, smask, machine) = unpack_coord(pack);
                let target = smask & !(1 << machine);
                let (lo, hi) = self.ivls[jx][ivl];
                let mut left = y as i64;
                for slot in lo..hi {
                    if left == 0 {
                        break;
                    }
                    let s = slot as usize;
                    if occupied[s] == target && !self_taken[s] {
                        self_taken[s] = true;
                        marks.push((s, machine));
                        left -= 1;
                    }
                }
                if left != 0 {
                    return Err(crate::Error::Internal(
                        "allocation does not fit its interval profile".into(),
                    ));
                }
            }
            for &(s, machine) in &marks {
                occupied[s] |= 1 << machine;
                owner[machine][s] = Some(jx);
            }
            // The placed grid must reproduce the stored load profile.
            debug_assert!(
                jx == 0 || self.grid_matches_profile(jx, &occupied, keys[jx]),
                "materialized slots diverge from the stored profile"
            );
        }

        let delta = q(1, self.inv_delta);
        let mut pieces: Vec<(usize, Q, Q, JobId)> = Vec::new();
        for j in 0..n {
            let mut slots: Vec<(usize, usize)> = (0..m)
                .flat_map(|i| {
                    owner[i]
                        .iter()
                        .enumerate()
                        .filter(move |(_, o)| **o == Some(j))
                        .map(move |(s, _)| (s, i))
                })
                .collect();
            slots.sort_unstable();
            let mut done = Q::zero();
            let mut finished = false;
            for (s, i) in slots {
                if finished {
                    return Err(crate::Error::Internal(
                        "slots allocated past a job's completion".into(),
                    ));
                }
                let p_ij = self.instance.p_on(i, j).expect("placed on usable machine");
                let start = q_int(s as i64) * delta.clone();
                let contrib = delta.clone() / q_int(p_ij);
                if &done + &contrib < Q::one() {
                    pieces.push((i, start.clone(), start + delta.clone(), j));
                    done += contrib;
                } else {
                    let len = (Q::one() - &done) * q_int(p_ij);
                    debug_assert!(len.is_positive() && len <= delta);
                    pieces.push((i, start.clone(), start + len, j));
                    finished = true;
                }
            }
            if !finished {
                return Err(crate::Error::Internal("job left incomplete".into()));
            }
        }

        let mut den = BigInt::one();
        for (_, a, b, _) in &pieces {
            den = den.lcm(a.denom()).lcm(b.denom());
        }
        let den_i = den
            .to_i64()
            .ok_or_else(|| crate::Error::Internal("schedule grid overflow".into()))?;
        let slots = pieces
            .into_iter()
            .map(|(machine, a, b, job)| Slot {
                machine,
                a: ((a * q_int(den_i)).to_integer().to_i64()).expect("scaled to the grid"),
                b: ((b * q_int(den_i)).to_integer().to_i64()).expect("scaled to the grid"),
                job,
            })
            .collect();
        Ok(Schedule::new(den_i, slots))
    }

    #[allow(dead_code)] // referenced from a debug assertion
    fn grid_matches_profile(&self, jx: usize, occupied: &[u8], key: &[u16]) -> bool {
        let mut want = vec![0i64; self.ivls[jx].len() * self.nsets];
        for pair in key.chunks_exact(2) {
            want[pair[0] as usize] = pair[1] as i64;
        }
        let mut got = vec![0i64; want.len()];
        for (ivl, &(lo, hi)) in self.ivls[jx].iter().enumerate() {
            for slot in lo..hi {
                let mask = occupied[slot as usize];
                if mask != 0 {
                    got[ivl * self.nsets + mask as usize - 1] += 1;
                }
            }
        }
        want == got
    }
}

fn nesting_broken() -> crate::Error {
    crate::Error::Internal("deadline grids are not nested across jobs".into())
}

fn decode_pairs(flat: &[u16]) -> Vec<(u16, u16)> {
    flat.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

struct Emission {
    /// Sorted `(packed coordinate, slot count)` pairs.
    alloc: Vec<(u16, u16)>,
    last_ivl: u16,
}

/// Depth-first enumeration of all undominated allocations: walk the
/// coordinates in order, never allocate past the completion
/// requirement, and emit exactly when the requirement is crossed. With
/// migration, allocations where removing one slot of some used machine
/// still completes the job are skipped; their slimmed versions appear
/// elsewhere in the enumeration. Stops with a budget error once `cap`
/// emissions have been produced; otherwise returns their count.
fn enumerate_allocations(
    coords: &[GCoord],
    profile: &[i64],
    free: &[i64],
    need: u128,
    migration: bool,
    cap: u64,
    out: &mut Vec<Emission>,
) -> crate::Result<u64> {
    if need == 0 {
        return Ok(0);
    }
    let mut free_rem = free.to_vec();
    let mut busy_rem = profile.to_vec();
    // Optimistic units still reachable from coordinate k on; shared
    // pools are counted per coordinate, so this only overestimates.
    let mut suffix = vec![0u128; coords.len() + 1];
    for (k, c) in coords.iter().enumerate().rev() {
        let supply = match c.bin {
            Bin::Free(i) => free[i as usize],
            Bin::Busy(i) => profile[i as usize],
        };
        suffix[k] = suffix[k + 1] + supply as u128 * c.units;
    }
    let mut dfs = AllocDfs {
        coords,
        suffix,
        need,
        migration,
        cap,
        alloc: Vec::new(),
        per_machine: [0; 8],
        emitted: 0,
        out,
    };
    dfs.walk(0, 0, &mut free_rem, &mut busy_rem);
    if dfs.emitted >= cap {
        return Err(crate::Error::Budget(format!(
            "guess enumeration produced more than {cap} candidates"
        )));
    }
    Ok(dfs.emitted)
}

struct AllocDfs<'a> {
    coords: &'a [GCoord],
    suffix: Vec<u128>,
    need: u128,
    migration: bool,
    cap: u64,
    alloc: Vec<(usize, i64)>,
    per_machine: [u128; 8],
    emitted: u64,
    out: &'a mut Vec<Emission>,
}

impl AllocDfs<'_> {
    fn walk(&mut self, k: usize, have: u128, free_rem: &mut [i64], busy_rem: &mut [i64]) {
        if k == self.coords.len()
            || have + self.suffix[k] < self.need
            || self.emitted >= self.cap
        {
            return;
        }
        let c = self.coords[k];
        let supply = match c.bin {
            Bin::Free(i) => free_rem[i as usize],
            Bin::Busy(i) => busy_rem[i as usize],
        };
        let gap = self.need - have;
        let to_cross = gap.div_ceil(c.units);
        let crossing = (to_cross <= supply as u128).then_some(to_cross as i64);
        let top = crossing.map_or(supply, |y| y - 1);
        for y in 0..=top {
            self.take(k, y, free_rem, busy_rem);
            self.walk(k + 1, have + y as u128 * c.units, free_rem, busy_rem);
            self.untake(k, y, free_rem, busy_rem);
        }
        if let Some(y) = crossing {
            self.take(k, y, free_rem, busy_rem);
            let total = have + y as u128 * c.units;
            if !self.migration || !self.dominated(total) {
                self.emitted += 1;
                let pairs: Vec<(u16, u16)> = self
                    .alloc
                    .iter()
                    .map(|&(ci, v)| (self.coords[ci].pack, v as u16))
                    .collect();
                debug_assert!(
                    pairs.windows(2).all(|w| w[0].0 < w[1].0),
                    "allocation pairs follow the ascending coordinate order"
                );
                self.out.push(Emission {
                    alloc: pairs,
                    last_ivl: c.ivl,
                });
            }
            self.untake(k, y, free_rem, busy_rem);
        }
    }

    /// True when some used machine could give back a slot and the job
    /// would still complete.
    fn dominated(&self, total: u128) -> bool {
        (0..8).any(|i| self.per_machine[i] > 0 && total - self.coord_units(i) >= self.need)
    }

    fn coord_units(&self, machine: usize) -> u128 {
        self.alloc
            .iter()
            .map(|&(ci, _)| self.coords[ci])
            .find(|c| c.machine as usize == machine)
            .map_or(u128::MAX, |c| c.units)
    }

    fn take(&mut self, k: usize, y: i64, free_rem: &mut [i64], busy_rem: &mut [i64]) {
        if y == 0 {
            return;
        }
        let c = self.coords[k];
        match c.bin {
            Bin::Free(i) => free_rem[i as usize] -= y,
            Bin::Busy(i) => busy_rem[i as usize] -= y,
        }
        self.alloc.push((k, y));
        self.per_machine[c.machine as usize] += y as u128 * c.units;
    }

    fn untake(&mut self, k: usize, y: i64, free_rem: &mut [i64], busy_rem: &mut [i64]) {
        if y == 0 {
            return;
        }
        let c = self.coords[k];
        match c.bin {
            Bin::Free(i) => free_rem[i as usize] += y,
            Bin::Busy(i) => busy_rem[i as usize] += y,
        }
        self.alloc.pop();
        self.per_machine[c.machine as usize] -= y as u128 * c.units;
    }
}

/// Applies a guess to the later jobs' profile: allocated slots join
/// the coordinate of their full machine set and leave the coordinate
/// of the set without this job's machine. Returns the sparse key.
fn apply_allocation(
    profile: &[i64],
    n_coords: usize,
    nsets: usize,
    alloc: &[(u16, u16)],
) -> crate::Result<Box<[u16]>> {
    let mut dense = profile.to_vec();
    debug_assert_eq!(dense.len(), n_coords);
    for &(pack, y) in alloc {
        let (ivl, smask, machine) = unpack_coord(pack);
        dense[ivl * nsets + smask as usize - 1] += y as i64;
        let sub = smask & !(1 << machine);
        if sub != 0 {
            dense[ivl * nsets + sub as usize - 1] -= y as i64;
        }
    }
    let mut key = Vec::new();
    for (coord, &v) in dense.iter().enumerate() {
        if v < 0 || v > MAX_UNITS {
            return Err(crate::Error::Internal("profile count out of range".into()));
        }
        if v > 0 {
            key.push(coord as u16);
            key.push(v as u16);
        }
    }
    Ok(key.into_boxed_slice())
}

fn next_up(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    if x == 0.0 {
        0.0
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}
