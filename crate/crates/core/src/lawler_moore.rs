//! Minimum-penalty late-job selection against a common deadline, and a
//! budgeted variant that maximizes the schedule's start time.
//!
//! Problems consist of jobs with processing time, release time, and a
//! non-negative integer penalty charged when the job is late. A job is
//! on time when it completes by the common deadline in a preemptive
//! schedule that starts no earlier than a given time. The classic
//! minimum-penalty question is answered by reversing the timeline
//! (jobs get release 0 and individual deadline `deadline - max(r,
//! start)`) and running the textbook late-jobs dynamic program over
//! (job, consumed time). The budgeted variant asks for the latest
//! start such that total penalty stays within a budget; it is a
//! dynamic program over jobs in release order and residual budget.

use crate::instance::Time;

/// One job of a common-deadline subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmJob {
    /// Processing time, >= 1.
    pub p: Time,
    /// Release time, >= 0.
    pub r: Time,
    /// Penalty paid if the job misses the common deadline.
    pub cost: u64,
}

/// A set of jobs with one shared deadline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmProblem {
    pub jobs: Vec<LmJob>,
    pub deadline: Time,
}

impl LmProblem {
    pub fn total_cost(&self) -> u64 {
        self.jobs.iter().map(|j| j.cost).sum()
    }

    fn total_work(&self) -> Time {
        self.jobs.iter().map(|j| j.p).sum()
    }

    /// Job indices sorted by (release, index).
    fn release_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.jobs.len()).collect();
        order.sort_by_key(|&k| (self.jobs[k].r, k));
        order
    }
}

/// A partition into on-time and late jobs, with the penalty paid and a
/// feasible preemptive schedule fragment for the on-time jobs.
/// Segments are (from, to, job index) triples within [start, deadline].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmSolution {
    pub on_time: Vec<usize>,
    pub late: Vec<usize>,
    pub penalty: u64,
    pub segments: Vec<(Time, Time, usize)>,
}

/// Per-job constraint during canonical-solution reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Force {
    Free,
    Late,
    OnTime,
}

const INF_COST: u64 = u64::MAX;

/// Minimum total late penalty over (job, consumed on-time work), with
/// per-job forcing. Jobs are mapped to release 0 and deadline
/// `deadline - max(r, start)`; a set is on-time feasible exactly when
/// consuming its work in non-decreasing deadline order meets every
/// mapped deadline, which the consumed-time axis checks.
fn min_penalty_forced(problem: &LmProblem, start: Time, force: &[Force]) -> u64 {
    let total: usize = problem.total_work() as usize;
    let mut order: Vec<usize> = (0..problem.jobs.len()).collect();
    order.sort_by_key(|&k| (problem.deadline - problem.jobs[k].r.max(start), k));
    let mut best = vec![INF_COST; total + 1];
    best[0] = 0;
    let mut next = vec![INF_COST; total + 1];
    for &k in &order {
        let job = &problem.jobs[k];
        let mapped_deadline = problem.deadline - job.r.max(start);
        next.fill(INF_COST);
        for t in 0..=total {
            let cur = best[t];
            if cur == INF_COST {
                continue;
            }
            if force[k] != Force::OnTime {
                let late = cur.saturating_add(job.cost);
                if late < next[t] {
                    next[t] = late;
                }
            }
            if force[k] != Force::Late {
                let done = t + job.p as usize;
                if (done as i64) <= mapped_deadline && cur < next[done] {
                    next[done] = cur;
                }
            }
        }
        std::mem::swap(&mut best, &mut next);
    }
    best.iter().copied().min().unwrap_or(INF_COST)
}

/// Late set that is lexicographically smallest as a sorted id
/// sequence among all sets matching the target value, probing with
/// forced decisions: first try leaving every undecided job on time,
/// otherwise make the current id late only if the target stays
/// reachable.
fn canonical_late_set<F>(n: usize, mut achieves: F) -> Vec<Force>
where
    F: FnMut(&[Force]) -> bool,
{
    let mut force = vec![Force::Free; n];
    for id in 0..n {
        let mut all_on_time = force.clone();
        for f in all_on_time.iter_mut().skip(id) {
            *f = Force::OnTime;
        }
        if achieves(&all_on_time) {
            force = all_on_time;
            break;
        }
        force[id] = Force::Late;
        if !achieves(&force) {
            force[id] = Force::OnTime;
        }
    }
    force
}

/// Work-conserving fragment for the on-time set: from `start` onward,
/// the released unfinished on-time job with the smallest index runs.
/// Any work-conserving order meets a common deadline whenever the set
/// is feasible at `start`.
fn build_fragment(
    problem: &LmProblem,
    start: Time,
    on_time: &[usize],
) -> Vec<(Time, Time, usize)> {
    let mut remaining: Vec<(usize, Time, Time)> = on_time
        .iter()
        .map(|&k| (k, problem.jobs[k].r.max(start), problem.jobs[k].p))
        .collect();
    let mut segments = Vec::new();
    let mut now = start;
    while !remaining.is_empty() {
        let pos = match remaining
            .iter()
            .enumerate()
            .filter(|(_, &(_, r, _))| r <= now)
            .min_by_key(|(_, &(k, _, _))| k)
        {
            Some((i, _)) => i,
            None => {
                now = remaining.iter().map(|&(_, r, _)| r).min().expect("non-empty");
                continue;
            }
        };
        let (k, _, rem) = remaining[pos];
        let next_release = remaining
            .iter()
            .filter(|&&(kk, r, _)| kk < k && r > now)
            .map(|&(_, r, _)| r)
            .min();
        let end = match next_release {
            Some(r) => (now + rem).min(r),
            None => now + rem,
        };
        segments.push((now, end, k));
        let used = end - now;
        now = end;
        if used == rem {
            remaining.remove(pos);
        } else {
            remaining[pos].2 -= used;
        }
    }
    // With nothing on time `now` stays at `start`, which may legally
    // sit past the deadline (then every job is late).
    debug_assert!(
        on_time.is_empty() || now <= problem.deadline,
        "fragment overran the common deadline"
    );
    // Coalesce adjacent segments of the same job.
    let mut merged: Vec<(Time, Time, usize)> = Vec::with_capacity(segments.len());
    for seg in segments {
        match merged.last_mut() {
            Some(last) if last.2 == seg.2 && last.1 == seg.0 => last.1 = seg.1,
            _ => merged.push(seg),
        }
    }
    merged
}

fn solution_from_force(problem: &LmProblem, start: Time, force: &[Force]) -> LmSolution {
    let late: Vec<usize> = (0..force.len()).filter(|&k| force[k] == Force::Late).collect();
    let on_time: Vec<usize> = (0..force.len()).filter(|&k| force[k] != Force::Late).collect();
    let penalty = late.iter().map(|&k| problem.jobs[k].cost).sum();
    let segments = build_fragment(problem, start, &on_time);
    LmSolution { on_time, late, penalty, segments }
}

/// Minimum-penalty partition for a schedule that may start at `start`.
/// Among equal-penalty optima the late set is canonical (see
/// `canonical_late_set`).
pub fn lawler_moore(problem: &LmProblem, start: Time) -> LmSolution {
    let optimum = min_penalty_forced(problem, start, &vec![Force::Free; problem.jobs.len()]);
    debug_assert_ne!(optimum, INF_COST, "all-late is always feasible");
    let force = canonical_late_set(problem.jobs.len(), |f| {
        min_penalty_forced(problem, start, f) == optimum
    });
    solution_from_force(problem, start, &force)
}

/// Minimum late penalty only; the cheap inner loop for the deadline
/// solvers, which reconstruct a full partition once per cell.
pub fn min_late_penalty(problem: &LmProblem, start: Time) -> u64 {
    min_penalty_forced(problem, start, &vec![Force::Free; problem.jobs.len()])
}

/// Sentinel for "no feasible start" in latest-start tables.
pub const NO_START: i64 = i64::MIN;

/// Latest feasible start per integer budget 0..=cap (clamped to the
/// total penalty, beyond which everything can be late and the start is
/// the deadline itself).
#[derive(Debug, Clone)]
pub struct LatestStartTable {
    deadline: Time,
    starts: Vec<i64>,
}

impl LatestStartTable {
    /// Latest start with total penalty <= `budget`; `None` if no
    /// partition fits the budget.
    pub fn get(&self, budget: u64) -> Option<Time> {
        let idx = (budget as usize).min(self.starts.len() - 1);
        let b = self.starts[idx];
        (b != NO_START).then_some(b)
    }

    pub fn deadline(&self) -> Time {
        self.deadline
    }
}

/// Suffix dynamic program over jobs in release order and residual
/// budget. For the suffix from job k on, the value is the latest start
/// b such that the suffix jobs can be split into late ones (paying
/// their penalties within the residual budget) and on-time ones packed
/// back-to-back ending at the deadline. Keeping job k on time shifts
/// the start left by its processing time and is valid only when the
/// shifted start is at or after k's release: that inequality is
/// exactly the load condition "work of on-time jobs released at or
/// after r_k fits into [r_k, deadline]", and conditions for later
/// releases are enforced inductively by the suffix values.
fn latest_start_forced(problem: &LmProblem, cap: u64, force: &[Force]) -> Vec<i64> {
    let cap = cap.min(problem.total_cost()) as usize;
    let order = problem.release_order();
    let mut best = vec![problem.deadline; cap + 1];
    let mut next = vec![NO_START; cap + 1];
    for &k in order.iter().rev() {
        let job = &problem.jobs[k];
        next.fill(NO_START);
        for budget in 0..=cap {
            let mut value = NO_START;
            if force[k] != Force::OnTime && budget as u64 >= job.cost {
                value = best[budget - job.cost as usize];
            }
            if force[k] != Force::Late {
                let b = best[budget];
                if b != NO_START && b - job.p >= job.r {
                    value = value.max(b - job.p);
                }
            }
            next[budget] = value;
        }
        std::mem::swap(&mut best, &mut next);
    }
    best
}

/// Latest feasible start for every budget up to `cap`.
pub fn latest_start_table(problem: &LmProblem, cap: u64) -> LatestStartTable {
    let starts = latest_start_forced(problem, cap, &vec![Force::Free; problem.jobs.len()]);
    LatestStartTable { deadline: problem.deadline, starts }
}

/// The latest start whose minimum achievable penalty fits the budget,
/// with a matching partition; `None` when even an unrestricted start
/// cannot meet the budget. Ties prefer the canonical late set.
pub fn lm_latest_start(problem: &LmProblem, budget: u64) -> Option<(Time, LmSolution)> {
    let table = latest_start_table(problem, budget);
    let start = table.get(budget)?;
    let force = canonical_late_set(problem.jobs.len(), |f| {
        let t = latest_start_forced(problem, budget, f);
        let idx = (budget as usize).min(t.len() - 1);
        t[idx] == start
    });
    let mut solution = solution_from_force(problem, start, &force);
    debug_assert!(solution.penalty <= budget);
    // The fragment begins exactly at the reported start.
    solution.segments.retain(|s| s.0 < s.1);
    Some((start, solution))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(jobs: Vec<(Time, Time, u64)>, deadline: Time) -> LmProblem {
        LmProblem {
            jobs: jobs.into_iter().map(|(p, r, cost)| LmJob { p, r, cost }).collect(),
            deadline,
        }
    }

    #[test]
    fn keeps_the_expensive_job() {
        // Capacity 3 fits only one of the two 2-unit jobs.
        let pr = problem(vec![(2, 0, 5), (2, 0, 3)], 3);
        let sol = lawler_moore(&pr, 0);
        assert_eq!(sol.penalty, 3);
        assert_eq!(sol.on_time, vec![0]);
        assert_eq!(sol.late, vec![1]);
        assert_eq!(sol.segments, vec![(0, 2, 0)]);
    }

    #[test]
    fn everything_fits_when_room_is_ample() {
        let pr = problem(vec![(2, 0, 5), (3, 1, 3), (1, 0, 7)], 9);
        let sol = lawler_moore(&pr, 2);
        assert_eq!(sol.penalty, 0);
        assert_eq!(sol.late, Vec::<usize>::new());
    }

    #[test]
    fn zero_room_forces_late() {
        let pr = problem(vec![(1, 4, 9)], 4);
        let sol = lawler_moore(&pr, 0);
        assert_eq!(sol.penalty, 9);
        assert_eq!(sol.late, vec![0]);
        assert!(sol.segments.is_empty());
    }

    #[test]
    fn latest_start_with_full_budget_is_deadline() {
        let pr = problem(vec![(2, 0, 5), (2, 1, 3)], 6);
        let (b, sol) = lm_latest_start(&pr, 8).unwrap();
        assert_eq!(b, 6);
        assert_eq!(sol.late, vec![0, 1]);
    }

    #[test]
    fn latest_start_zero_budget_single_job() {
        let pr = problem(vec![(2, 0, 10)], 5);
        let (b, sol) = lm_latest_start(&pr, 0).unwrap();
        assert_eq!(b, 3);
        assert_eq!(sol.on_time, vec![0]);
        assert_eq!(sol.segments, vec![(3, 5, 0)]);
    }

    #[test]
    fn latest_start_respects_late_releases() {
        // Job released at 4 pins the suffix: [4,6) for it, job 0 before.
        let pr = problem(vec![(3, 0, 1), (2, 4, 1)], 6);
        let (b, _) = lm_latest_start(&pr, 0).unwrap();
        assert_eq!(b, 1);
        // With budget for one penalty, drop job 0 and start at 4.
        let (b, sol) = lm_latest_start(&pr, 1).unwrap();
        assert_eq!(b, 4);
        assert_eq!(sol.late, vec![0]);
    }

    #[test]
    fn latest_start_monotone_in_budget() {
        let pr = problem(vec![(2, 0, 4), (1, 2, 2), (3, 1, 5)], 7);
        let table = latest_start_table(&pr, pr.total_cost());
        let mut prev = None;
        for budget in 0..=pr.total_cost() {
            let cur = table.get(budget);
            if let (Some(p), Some(c)) = (prev, cur) {
                assert!(c >= p);
            }
            assert!(cur.is_some() || prev.is_none());
            prev = cur.or(prev);
        }
        assert_eq!(table.get(pr.total_cost()), Some(7));
    }

    #[test]
    fn infeasible_budget_reports_none() {
        // Neither 2-unit job fits into [3, 4), so both must be late
        // and any budget below the full penalty sum is infeasible.
        let pr = problem(vec![(2, 3, 5), (2, 3, 5)], 4);
        assert!(lm_latest_start(&pr, 4).is_none());
        assert!(lm_latest_start(&pr, 9).is_none());
        assert_eq!(lm_latest_start(&pr, 10).unwrap().0, 4);
    }

    #[test]
    fn empty_problem() {
        let pr = problem(vec![], 5);
        let sol = lawler_moore(&pr, 0);
        assert_eq!(sol.penalty, 0);
        assert!(sol.segments.is_empty());
        assert_eq!(lm_latest_start(&pr, 0).unwrap().0, 5);
    }

    #[test]
    fn penalty_non_increasing_as_start_decreases() {
        let pr = problem(vec![(2, 0, 4), (1, 2, 2), (3, 1, 5), (2, 5, 1)], 8);
        let mut prev = u64::MAX;
        for start in (0..=8).rev() {
            let pen = lawler_moore(&pr, start).penalty;
            assert!(pen <= prev);
            prev = pen;
        }
    }

    #[test]
    fn fragment_respects_clamped_releases() {
        let pr = problem(vec![(2, 0, 3), (1, 3, 3)], 6);
        let sol = lawler_moore(&pr, 2);
        assert_eq!(sol.penalty, 0);
        // Job 0 clamped to start 2, job 1 released at 3 preempts only
        // if its index is smaller; here it waits until job 0 is done.
        assert_eq!(sol.segments, vec![(2, 4, 0), (4, 5, 1)]);
    }
}
