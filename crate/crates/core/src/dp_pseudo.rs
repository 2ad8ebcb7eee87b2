//! Deadline-guessing approximation for total weighted flow time on one
//! machine, pseudo-polynomial in the scheduling horizon.
//!
//! The horizon [0, T) is split into a dyadic tree of intervals. A cell
//! (s, t, b) plans the jobs released shortly before or inside [s, t)
//! under the promise that the machine is free from time b on. Within a
//! cell, jobs released early enough (at or before s - (t-s)) either
//! finish by s or are deferred past t; that split is resolved by the
//! common-deadline late-job solver against a guessed boundary. Jobs
//! released later inherit their deadlines from the two child cells via
//! a fixed merge rule. The root cell's deadlines feed EDF, and the
//! resulting schedule costs at most the root cell's charge, which is
//! within a constant factor of optimal.

use crate::edf::{density_feasible, edf_schedule};
use crate::instance::{DeadlineAssignment, Instance, Schedule, Time};
use crate::lawler_moore::{lawler_moore, min_late_penalty, LmJob, LmProblem};

/// Counters reported for benchmarking.
#[derive(Debug, Clone, Copy, Default)]
pub struct PseudoStats {
    /// Materialized (interval, start) cells.
    pub cells: usize,
}

/// Output of the solver: the chosen deadlines (`None` = only the
/// horizon binds), the EDF schedule they induce, and the exact charge
/// the deadline choice incurs, an upper bound on the schedule's
/// objective.
#[derive(Debug, Clone)]
pub struct PseudoResult {
    pub deadlines: DeadlineAssignment,
    pub schedule: Schedule,
    pub bound: u64,
    pub stats: PseudoStats,
}

/// One dyadic interval [s, t) with its job range. Jobs are indexed by
/// id, which equals release order, so each node's job set is the
/// contiguous range jlo..jhi, split at jsplit into early-released jobs
/// (handled by this cell's late-job subproblem) and late-released jobs
/// (handled by the children).
struct Node {
    s: Time,
    t: Time,
    /// Smallest admissible start for cells of this interval.
    b0: Time,
    jlo: usize,
    jsplit: usize,
    jhi: usize,
}

/// Solved cell: total charge and per-job deadlines aligned with the
/// node's job range; `None` means unbounded (finish by the horizon).
struct CellSol {
    cost: u64,
    d: Vec<Option<Time>>,
}

pub fn solve_pseudo(instance: &Instance) -> crate::Result<PseudoResult> {
    if instance.is_multi() {
        return Err(crate::Error::InvalidInstance(
            "this solver handles single-machine instances only".into(),
        ));
    }
    let horizon = instance.horizon_single();
    let jobs = instance.jobs();
    let releases: Vec<Time> = jobs.iter().map(|j| j.r).collect();

    // Heap-ordered dyadic tree: node 0 is [0, T); children of node k
    // sit at 2k+1 and 2k+2; leaves have length 1.
    let node_count = (2 * horizon - 1) as usize;
    let mut nodes = Vec::with_capacity(node_count);
    for idx in 0..node_count {
        let level = usize::BITS - 1 - (idx + 1).leading_zeros();
        let len = horizon >> level;
        let offset = (idx + 1 - (1usize << level)) as Time;
        let s = offset * len;
        let t = s + len;
        // The job window's lower cutoff is the unclamped earliest start
        // and is exclusive: a job released exactly on it belongs to the
        // parent (as a common-deadline job), never to this interval.
        // Only the start axis clamps at 0.
        let cut = if idx == 0 {
            -1
        } else if idx % 2 == 1 {
            s - 2 * len
        } else {
            s - 3 * len
        };
        let b0 = cut.max(0);
        let jlo = releases.partition_point(|&r| r <= cut);
        let jhi = releases.partition_point(|&r| r < t);
        let jsplit = releases.partition_point(|&r| r <= s - len).clamp(jlo, jhi);
        nodes.push(Node { s, t, b0, jlo, jsplit, jhi });
    }

    let mut cells: Vec<Vec<CellSol>> = (0..node_count).map(|_| Vec::new()).collect();
    let mut stats = PseudoStats::default();

    for idx in (0..node_count).rev() {
        let nd = &nodes[idx];
        if nd.jlo == nd.jhi {
            // No jobs: every cell of this interval is trivially empty.
            continue;
        }
        let len = nd.t - nd.s;
        let gmin = (nd.s - len).max(nd.b0);

        // Merged deadlines and charge of the late-released jobs, per
        // guessed boundary. Leaves defer all of them past t; internal
        // intervals combine the children's cells at the same boundary.
        let near_merged: Vec<(u64, Vec<Option<Time>>)> = if len == 1 {
            let d = vec![None; nd.jhi - nd.jsplit];
            let cost = jobs[nd.jsplit..nd.jhi]
                .iter()
                .map(|j| (j.w * (nd.t - j.r)) as u64)
                .sum();
            vec![(cost, d); (nd.s - gmin + 1) as usize]
        } else {
            let mid = nd.s + len / 2;
            let (li, ri) = (2 * idx + 1, 2 * idx + 2);
            (gmin..=nd.s)
                .map(|guess| {
                    let mut cost = 0u64;
                    let mut d = Vec::with_capacity(nd.jhi - nd.jsplit);
                    for j in nd.jsplit..nd.jhi {
                        // Every late-released job lies in the right
                        // child's range, so that child has cells.
                        let rcell = &cells[ri][(guess - nodes[ri].b0) as usize];
                        let from_right = rcell.d[j - nodes[ri].jlo];
                        let dj = match from_right {
                            None => None,
                            Some(v) if v > mid => Some(v),
                            Some(_) => {
                                // The right child sends the job to its
                                // own start, which it only does for
                                // jobs released before mid, so the
                                // left child also covers the job.
                                assert!(j < nodes[li].jhi, "merge lookup out of range");
                                let lcell = &cells[li][(guess - nodes[li].b0) as usize];
                                match lcell.d[j - nodes[li].jlo] {
                                    None => Some(mid),
                                    Some(v) => Some(v.min(mid)),
                                }
                            }
                        };
                        cost += match dj {
                            Some(v) if v == nd.s => 0,
                            Some(v) => (jobs[j].w * (v.min(nd.t) - jobs[j].r)) as u64,
                            None => (jobs[j].w * (nd.t - jobs[j].r)) as u64,
                        };
                        d.push(dj);
                    }
                    (cost, d)
                })
                .collect()
        };

        let far_base: Vec<(Time, Time, u64)> = jobs[nd.jlo..nd.jsplit]
            .iter()
            .map(|j| (j.p, j.r, (j.w * (nd.t - j.r)) as u64))
            .collect();
        let far_problem = |b: Time, deadline: Time| LmProblem {
            jobs: far_base
                .iter()
                .map(|&(p, r, cost)| LmJob { p, r: r.max(b), cost })
                .collect(),
            deadline,
        };

        let mut sols = Vec::with_capacity((nd.s - nd.b0 + 1) as usize);
        for b in nd.b0..=nd.s {
            // Scan boundary guesses ascending and keep ties at the
            // larger guess.
            let mut best: Option<(u64, Time)> = None;
            for guess in b.max(gmin)..=nd.s {
                let near_cost = near_merged[(guess - gmin) as usize].0;
                let far_cost = if far_base.is_empty() {
                    0
                } else {
                    min_late_penalty(&far_problem(b, guess), b)
                };
                let total = far_cost + near_cost;
                if best.map_or(true, |(c, _)| total <= c) {
                    best = Some((total, guess));
                }
            }
            let (cost, guess) = best.expect("the guess range always contains s");

            let mut d: Vec<Option<Time>> = Vec::with_capacity(nd.jhi - nd.jlo);
            if !far_base.is_empty() {
                let sol = lawler_moore(&far_problem(b, guess), b);
                let mut far_d = vec![None; far_base.len()];
                for &k in &sol.on_time {
                    far_d[k] = Some(nd.s);
                }
                d.extend(far_d);
            }
            d.extend(near_merged[(guess - gmin) as usize].1.iter().cloned());
            debug_assert!(cell_deadlines_feasible(instance, nd, b, &d));
            sols.push(CellSol { cost, d });
            stats.cells += 1;
        }
        cells[idx] = sols;
    }

    let root = &cells[0][0];
    debug_assert_eq!(nodes[0].jlo, 0);
    let deadlines = DeadlineAssignment::new(root.d.clone());
    let edf = edf_schedule(instance, &deadlines)?;
    if !edf.met_all_deadlines {
        return Err(crate::Error::Internal(
            "EDF missed a deadline chosen by the interval solver".into(),
        ));
    }
    Ok(PseudoResult {
        deadlines,
        schedule: edf.schedule,
        bound: root.cost,
        stats,
    })
}

/// Debug invariant: the finite deadlines of a cell admit a preemptive
/// schedule when releases are clamped to the cell's start.
fn cell_deadlines_feasible(
    instance: &Instance,
    nd: &Node,
    b: Time,
    d: &[Option<Time>],
) -> bool {
    let mut triples: Vec<(Time, Time, Time)> = Vec::new();
    for (k, dj) in d.iter().enumerate() {
        if let Some(v) = dj {
            let job = instance.jobs()[nd.jlo + k];
            triples.push((job.p, job.r.max(b), *v));
        }
    }
    if triples.is_empty() {
        return true;
    }
    triples.sort_by_key(|&(_, r, _)| r);
    let check = Instance::new(triples.iter().map(|&(p, r, _)| (p, r, 1)).collect(), None)
        .expect("clamped releases are valid");
    let dl = DeadlineAssignment::new(triples.iter().map(|&(_, _, v)| Some(v)).collect());
    density_feasible(&check, &dl).expect("single-machine check")
}
