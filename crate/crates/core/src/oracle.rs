//! Exact optimal preemptive schedules for small instances, used as
//! ground truth when checking approximation ratios.
//!
//! The single-machine oracle runs a memoized search over unit time
//! slots: at every slot it may run any released unfinished job. Idling
//! while released work is pending is never necessary, because moving a
//! later unit of any pending job into the idle slot only lowers
//! completion times, so the search is restricted to work-conserving
//! schedules. For integer data an optimal preemptive schedule with
//! integer preemption points exists (same exchange argument applied
//! slot by slot); as an extra safeguard the module also provides an
//! independent exhaustive search over priority-list schedules, since
//! some optimal schedule is a list schedule by completion order.
//!
//! The multi-machine oracle searches over assignments of machines to
//! jobs per grid slot of width `1/delta_den`, with exact fractional
//! progress `slot/p[i][j]` per slot and exact mid-slot completion
//! times. With migration disabled a job is pinned to the first machine
//! that runs it.

use crate::cost::{q_int, Cost, PNorm, Q};
use crate::instance::{Instance, JobId, Schedule, Slot, Time};
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::HashMap;

/// Size guards for the single-machine oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_total_work: Time,
    pub max_horizon: Time,
    pub max_states: usize,
}

impl Default for OracleLimits {
    fn default() -> OracleLimits {
        OracleLimits { max_total_work: 20, max_horizon: 32, max_states: 4_000_000 }
    }
}

fn too_large(msg: String) -> crate::Error {
    crate::Error::Budget(format!("instance too large for oracle: {msg}"))
}

/// Exact minimum of `sum w_j (C_j - r_j)^p` over all preemptive
/// single-machine schedules, with a witness schedule.
pub fn oracle_single(instance: &Instance, p: PNorm) -> crate::Result<(Cost, Schedule)> {
    oracle_single_with_limits(instance, p, OracleLimits::default())
}

pub fn oracle_single_with_limits(
    instance: &Instance,
    p: PNorm,
    limits: OracleLimits,
) -> crate::Result<(Cost, Schedule)> {
    if instance.is_multi() {
        return Err(crate::Error::InvalidInstance(
            "single-machine oracle got a machine matrix".into(),
        ));
    }
    let work = instance.total_work();
    if work > limits.max_total_work {
        return Err(too_large(format!(
            "total work {work} exceeds {}",
            limits.max_total_work
        )));
    }
    let span = instance.max_release() + work;
    if span > limits.max_horizon {
        return Err(too_large(format!(
            "time span {span} exceeds {}",
            limits.max_horizon
        )));
    }
    let mut search = SingleSearch {
        instance,
        p,
        memo: HashMap::new(),
        max_states: limits.max_states,
    };
    let mut remaining: Vec<Time> = instance.jobs().iter().map(|j| j.p).collect();
    let best = search.solve(0, &mut remaining)?;
    let segments = search.replay();
    let schedule = Schedule::single(segments);
    Ok((best, schedule))
}

/// Memo key: time plus the sorted multiset of (remaining, release,
/// weight) triples of unfinished jobs, so interchangeable jobs share
/// states.
type SingleKey = (Time, Vec<(Time, Time, i64)>);

struct SingleSearch<'a> {
    instance: &'a Instance,
    p: PNorm,
    memo: HashMap<SingleKey, Cost>,
    max_states: usize,
}

impl SingleSearch<'_> {
    /// Skips idle time: the next decision moment at or after `t`.
    /// `None` means every job is finished.
    fn decision_time(&self, t: Time, remaining: &[Time]) -> Option<Time> {
        let jobs = self.instance.jobs();
        let mut next = None;
        for job in jobs {
            if remaining[job.id] == 0 {
                continue;
            }
            if job.r <= t {
                return Some(t);
            }
            next = Some(next.map_or(job.r, |v: Time| v.min(job.r)));
        }
        next
    }

    fn key(&self, t: Time, remaining: &[Time]) -> SingleKey {
        let mut triples: Vec<(Time, Time, i64)> = self
            .instance
            .jobs()
            .iter()
            .filter(|j| remaining[j.id] > 0)
            .map(|j| (remaining[j.id], j.r, j.w))
            .collect();
        triples.sort_unstable();
        (t, triples)
    }

    /// Minimum cost to finish everything in `remaining` from time `t`.
    fn solve(&mut self, t: Time, remaining: &mut Vec<Time>) -> crate::Result<Cost> {
        let Some(t) = self.decision_time(t, remaining) else {
            return Ok(Cost::zero());
        };
        let key = self.key(t, remaining);
        if let Some(c) = self.memo.get(&key) {
            return Ok(c.clone());
        }
        if self.memo.len() >= self.max_states {
            return Err(too_large(format!("more than {} search states", self.max_states)));
        }
        let mut best: Option<Cost> = None;
        let mut tried: Vec<(Time, Time, i64)> = Vec::new();
        for id in 0..remaining.len() {
            let job = self.instance.jobs()[id];
            if remaining[id] == 0 || job.r > t {
                continue;
            }
            let triple = (remaining[id], job.r, job.w);
            if tried.contains(&triple) {
                continue;
            }
            tried.push(triple);
            remaining[id] -= 1;
            let mut candidate = self.solve(t + 1, remaining)?;
            if remaining[id] == 0 {
                candidate.add_power_term(&q_int(job.w), &q_int(t + 1 - job.r), self.p);
            }
            remaining[id] += 1;
            let better = match &best {
                None => true,
                Some(b) => candidate.cmp_certified(b) == Ordering::Less,
            };
            if better {
                best = Some(candidate);
            }
        }
        let best = best.expect("a released unfinished job exists at a decision time");
        self.memo.insert(key, best.clone());
        Ok(best)
    }

    /// Rebuilds one optimal schedule by walking the memo table and
    /// taking, at each state, the lowest-id action whose value matches.
    fn replay(&self) -> Vec<(Time, Time, JobId)> {
        let jobs = self.instance.jobs();
        let mut remaining: Vec<Time> = jobs.iter().map(|j| j.p).collect();
        let mut segments = Vec::new();
        let mut t: Time = 0;
        loop {
            let Some(now) = self.decision_time(t, &remaining) else {
                break;
            };
            t = now;
            let target = self.memo[&self.key(t, &remaining)].clone();
            let mut chosen = None;
            for id in 0..remaining.len() {
                let job = jobs[id];
                if remaining[id] == 0 || job.r > t {
                    continue;
                }
                remaining[id] -= 1;
                let child = match self.decision_time(t + 1, &remaining) {
                    None => Cost::zero(),
                    Some(t2) => self.memo[&self.key(t2, &remaining)].clone(),
                };
                let mut candidate = child;
                if remaining[id] == 0 {
                    candidate.add_power_term(&q_int(job.w), &q_int(t + 1 - job.r), self.p);
                }
                remaining[id] += 1;
                if candidate.cmp_certified(&target) == Ordering::Equal {
                    chosen = Some(id);
                    break;
                }
            }
            let id = chosen.expect("memoized value is achieved by some action");
            segments.push((t, t + 1, id));
            remaining[id] -= 1;
            t += 1;
        }
        segments
    }
}

/// Completion times of the preemptive list schedule for a priority
/// order: at every moment the released unfinished job appearing
/// earliest in `order` runs.
fn list_schedule_completions(instance: &Instance, order: &[JobId]) -> Vec<Time> {
    let jobs = instance.jobs();
    let n = jobs.len();
    let rank: Vec<usize> = {
        let mut rank = vec![0; n];
        for (pos, &j) in order.iter().enumerate() {
            rank[j] = pos;
        }
        rank
    };
    let mut remaining: Vec<Time> = jobs.iter().map(|j| j.p).collect();
    let mut completions = vec![0; n];
    let mut done = 0;
    let mut t: Time = 0;
    while done < n {
        let ready = (0..n)
            .filter(|&j| remaining[j] > 0 && jobs[j].r <= t)
            .min_by_key(|&j| rank[j]);
        let Some(j) = ready else {
            t = jobs
                .iter()
                .filter(|job| remaining[job.id] > 0)
                .map(|job| job.r)
                .min()
                .expect("unfinished job exists");
            continue;
        };
        // Run j until it completes or a release changes the ready set.
        let finish = t + remaining[j];
        let next_release = jobs
            .iter()
            .filter(|job| remaining[job.id] > 0 && job.r > t)
            .map(|job| job.r)
            .min();
        let end = next_release.map_or(finish, |r| finish.min(r));
        remaining[j] -= end - t;
        t = end;
        if remaining[j] == 0 {
            completions[j] = t;
            done += 1;
        }
    }
    completions
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    fn heap(k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(current.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, current, out);
            if k % 2 == 0 {
                current.swap(i, k - 1);
            } else {
                current.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut current, &mut out);
    out.sort();
    out
}

/// Independent ground truth for tiny instances: the minimum objective
/// over all priority-list schedules. Some optimal preemptive schedule
/// is the list schedule of its own completion order, so this minimum
/// is the true optimum. Intended for n <= 4.
pub fn priority_search_single(instance: &Instance, p: PNorm) -> Cost {
    let n = instance.n();
    let mut best: Option<Cost> = None;
    for order in permutations(n) {
        let completions = list_schedule_completions(instance, &order);
        let mut cost = Cost::zero();
        for job in instance.jobs() {
            cost.add_power_term(&q_int(job.w), &q_int(completions[job.id] - job.r), p);
        }
        let better = match &best {
            None => true,
            Some(b) => cost.cmp_certified(b) == Ordering::Less,
        };
        if better {
            best = Some(cost);
        }
    }
    best.expect("instances are non-empty")
}

/// Size guards for the multi-machine oracle.
#[derive(Debug, Clone, Copy)]
pub struct MultiOracleLimits {
    pub max_slots: i64,
    pub max_states: usize,
}

impl Default for MultiOracleLimits {
    fn default() -> MultiOracleLimits {
        MultiOracleLimits { max_slots: 24, max_states: 4_000_000 }
    }
}

/// Exact minimum objective over schedules aligned to a grid of step
/// `1/delta_den`: per slot each machine runs at most one job and each
/// job runs on at most one machine; a job's last slot counts exactly
/// up to its fractional completion. With `migration` off, each job
/// must stay on a single machine.
pub fn oracle_multi(
    instance: &Instance,
    p: PNorm,
    delta_den: i64,
    migration: bool,
) -> crate::Result<(Cost, Schedule)> {
    oracle_multi_with_limits(instance, p, delta_den, migration, MultiOracleLimits::default())
}

pub fn oracle_multi_with_limits(
    instance: &Instance,
    p: PNorm,
    delta_den: i64,
    migration: bool,
    limits: MultiOracleLimits,
) -> crate::Result<(Cost, Schedule)> {
    assert!(delta_den >= 1);
    let m = instance.machine_count();
    if m > 2 {
        return Err(too_large(format!("{m} machines exceed the oracle limit of 2")));
    }
    let slot_count = instance.horizon_multi() * delta_den;
    if slot_count > limits.max_slots {
        return Err(too_large(format!(
            "{slot_count} grid slots exceed {}",
            limits.max_slots
        )));
    }
    let mut search = MultiSearch {
        instance,
        p,
        den: delta_den,
        migration,
        slot_count,
        memo: HashMap::new(),
        max_states: limits.max_states,
    };
    let n = instance.n();
    let mut remaining: Vec<Q> = vec![Q::one(); n];
    let mut pinned: Vec<i8> = vec![-1; n];
    let best = search
        .solve(0, &mut remaining, &mut pinned)?
        .expect("the horizon leaves room to finish every job");
    let schedule = search.replay()?;
    Ok((best, schedule))
}

type MultiKey = (i64, Vec<Q>, Vec<i8>);

struct MultiSearch<'a> {
    instance: &'a Instance,
    p: PNorm,
    den: i64,
    migration: bool,
    slot_count: i64,
    /// `None` values mark states that cannot finish all jobs in time.
    memo: HashMap<MultiKey, Option<Cost>>,
    max_states: usize,
}

/// Per-machine choice in one grid slot: a job id or idle.
type Assignment = Vec<Option<JobId>>;

impl MultiSearch<'_> {
    fn key(&self, slot: i64, remaining: &[Q], pinned: &[i8]) -> MultiKey {
        (slot, remaining.to_vec(), if self.migration { Vec::new() } else { pinned.to_vec() })
    }

    /// Jobs machine `i` may run during `slot`.
    fn usable(&self, i: usize, slot: i64, remaining: &[Q], pinned: &[i8]) -> Vec<JobId> {
        let slot_start_num = slot; // time = slot / den
        self.instance
            .jobs()
            .iter()
            .filter(|j| {
                remaining[j.id].is_positive()
                    && slot_start_num >= j.r * self.den
                    && self.instance.p_on(i, j.id).is_some()
                    && (self.migration || pinned[j.id] < 0 || pinned[j.id] == i as i8)
            })
            .map(|j| j.id)
            .collect()
    }

    /// All per-slot assignments in canonical order: machine 0's choice
    /// varies slowest, job ids ascending, idle last, jobs distinct
    /// across machines.
    fn assignments(&self, slot: i64, remaining: &[Q], pinned: &[i8]) -> Vec<Assignment> {
        let m = self.instance.machine_count();
        let mut out: Vec<Assignment> = vec![Vec::new()];
        for i in 0..m {
            let mut choices: Vec<Option<JobId>> =
                self.usable(i, slot, remaining, pinned).into_iter().map(Some).collect();
            choices.push(None);
            let mut grown = Vec::with_capacity(out.len() * choices.len());
            for prefix in &out {
                for c in &choices {
                    if let Some(j) = c {
                        if prefix.contains(&Some(*j)) {
                            continue;
                        }
                    }
                    let mut next = prefix.clone();
                    next.push(*c);
                    grown.push(next);
                }
            }
            out = grown;
        }
        out
    }

    /// Applies one slot's assignment; returns the cost contributed by
    /// jobs completing inside this slot.
    fn apply(
        &self,
        slot: i64,
        assignment: &Assignment,
        remaining: &mut [Q],
        pinned: &mut [i8],
    ) -> Cost {
        let mut contributed = Cost::zero();
        for (i, choice) in assignment.iter().enumerate() {
            let Some(j) = *choice else { continue };
            let p_ij = self.instance.p_on(i, j).expect("usable implies processable");
            pinned[j] = i as i8;
            let step = Q::new(1.into(), (self.den * p_ij).into());
            if remaining[j] <= step {
                // Completes mid-slot at start + remaining * p_ij.
                let start = Q::new(slot.into(), self.den.into());
                let completion = start + remaining[j].clone() * q_int(p_ij);
                let job = self.instance.jobs()[j];
                let flow = completion - q_int(job.r);
                contributed.add_power_term(&q_int(job.w), &flow, self.p);
                remaining[j] = Q::zero();
            } else {
                remaining[j] -= step;
            }
        }
        contributed
    }

    fn solve(
        &mut self,
        slot: i64,
        remaining: &mut Vec<Q>,
        pinned: &mut Vec<i8>,
    ) -> crate::Result<Option<Cost>> {
        if remaining.iter().all(|r| r.is_zero()) {
            return Ok(Some(Cost::zero()));
        }
        if slot >= self.slot_count {
            return Ok(None);
        }
        let key = self.key(slot, remaining, pinned);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.max_states {
            return Err(too_large(format!("more than {} search states", self.max_states)));
        }
        let mut best: Option<Cost> = None;
        for assignment in self.assignments(slot, remaining, pinned) {
            let mut rem2 = remaining.clone();
            let mut pin2 = pinned.clone();
            let contributed = self.apply(slot, &assignment, &mut rem2, &mut pin2);
            if let Some(mut candidate) = self.solve(slot + 1, &mut rem2, &mut pin2)? {
                candidate.add(&contributed);
                let better = match &best {
                    None => true,
                    Some(b) => candidate.cmp_certified(b) == Ordering::Less,
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        self.memo.insert(key, best.clone());
        Ok(best)
    }

    fn replay(&self) -> crate::Result<Schedule> {
        let n = self.instance.n();
        let mut remaining: Vec<Q> = vec![Q::one(); n];
        let mut pinned: Vec<i8> = vec![-1; n];
        // Output grid: fine enough for every mid-slot completion.
        let mut out_den = self.den;
        for i in 0..self.instance.machine_count() {
            for j in 0..n {
                if let Some(p_ij) = self.instance.p_on(i, j) {
                    out_den = lcm_i64(out_den, self.den * p_ij);
                }
            }
        }
        let mut slots_out: Vec<Slot> = Vec::new();
        let mut slot: i64 = 0;
        while remaining.iter().any(|r| r.is_positive()) {
            let target = self.memo[&self.key(slot, &remaining, &pinned)]
                .clone()
                .expect("replay follows a feasible path");
            let mut advanced = false;
            for assignment in self.assignments(slot, &remaining, &pinned) {
                let mut rem2 = remaining.clone();
                let mut pin2 = pinned.clone();
                let contributed = self.apply(slot, &assignment, &mut rem2, &mut pin2);
                let child = if rem2.iter().all(|r| r.is_zero()) {
                    Some(Cost::zero())
                } else if slot + 1 >= self.slot_count {
                    None
                } else {
                    self.memo.get(&self.key(slot + 1, &rem2, &pin2)).cloned().flatten()
                };
                let Some(child) = child else { continue };
                let mut candidate = child;
                candidate.add(&contributed);
                if candidate.cmp_certified(&target) == Ordering::Equal {
                    for (i, choice) in assignment.iter().enumerate() {
                        let Some(j) = *choice else { continue };
                        let scale = out_den / self.den;
                        let a = slot * scale;
                        let b = if rem2[j].is_zero() {
                            // Truncate at the exact completion time.
                            let p_ij = self.instance.p_on(i, j).expect("processable");
                            let completion = Q::new(slot.into(), self.den.into())
                                + remaining[j].clone() * q_int(p_ij);
                            let scaled = completion * q_int(out_den);
                            debug_assert!(scaled.is_integer());
                            let v: num_bigint::BigInt = scaled.to_integer();
                            i64::try_from(&v).map_err(|_| {
                                crate::Error::Internal("completion overflows grid".into())
                            })?
                        } else {
                            (slot + 1) * scale
                        };
                        if a < b {
                            slots_out.push(Slot { machine: i, a, b, job: j });
                        }
                    }
                    remaining = rem2;
                    pinned = pin2;
                    slot += 1;
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return Err(crate::Error::Internal(
                    "no slot assignment reproduces the memoized optimum".into(),
                ));
            }
        }
        Ok(Schedule::new(out_den, slots_out))
    }
}

fn lcm_i64(a: i64, b: i64) -> i64 {
    let g = {
        let (mut x, mut y) = (a.abs(), b.abs());
        while y != 0 {
            let t = x % y;
            x = y;
            y = t;
        }
        x
    };
    a / g * b
}
