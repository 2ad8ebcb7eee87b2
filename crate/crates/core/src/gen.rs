//! Seeded random and adversarial instance generators.
//!
//! Randomness comes from the ChaCha8 stream cipher keyed by the seed,
//! a portable algorithm that yields identical draws on every platform,
//! so a (spec, seed) pair names one instance forever.

use crate::instance::{Instance, Time};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Bounds for random instance generation.
#[derive(Debug, Clone, Copy)]
pub struct GenSpec {
    pub n: usize,
    pub p_max: Time,
    pub r_max: Time,
    pub w_max: i64,
    /// Number of machines; 1 generates a plain single-machine
    /// instance, 2 or more adds a processing-time matrix.
    pub machines: usize,
    /// Percentage (0..=100) of matrix entries marked unprocessable.
    pub inf_percent: u8,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> GenSpec {
        GenSpec {
            n: 5,
            p_max: 4,
            r_max: 8,
            w_max: 4,
            machines: 1,
            inf_percent: 0,
            seed: 0,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    let span = (hi - lo + 1) as u64;
    lo + (rng.next_u64() % span) as i64
}

/// Uniform independent draws within the spec's bounds, deterministic
/// per seed. Jobs are sorted by release; every job keeps at least one
/// machine able to process it.
pub fn gen_random(spec: &GenSpec) -> Instance {
    assert!(spec.n >= 1 && spec.p_max >= 1 && spec.r_max >= 0 && spec.w_max >= 1);
    assert!(spec.machines >= 1 && spec.inf_percent <= 100);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs: Vec<(Time, Time, i64)> = (0..spec.n)
        .map(|_| {
            let p = draw(&mut rng, 1, spec.p_max);
            let r = draw(&mut rng, 0, spec.r_max);
            let w = draw(&mut rng, 1, spec.w_max);
            (p, r, w)
        })
        .collect();
    jobs.sort_by_key(|&(_, r, _)| r);
    let machines = (spec.machines >= 2).then(|| {
        let mut matrix: Vec<Vec<Option<Time>>> = (0..spec.machines)
            .map(|_| {
                (0..spec.n)
                    .map(|_| {
                        let inf = draw(&mut rng, 0, 99) < spec.inf_percent as i64;
                        if inf {
                            None
                        } else {
                            Some(draw(&mut rng, 1, spec.p_max))
                        }
                    })
                    .collect()
            })
            .collect();
        // Re-open one machine for jobs every machine rejected.
        for j in 0..spec.n {
            if matrix.iter().all(|row| row[j].is_none()) {
                let i = j % spec.machines;
                matrix[i][j] = Some(draw(&mut rng, 1, spec.p_max));
            }
        }
        matrix
    });
    Instance::new(jobs, machines).expect("generated instances are valid by construction")
}

/// Named stress families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialKind {
    /// n jobs released together with doubling sizes 1, 2, 4, ...
    Burst,
    /// n unit jobs released together with doubling weights 1, 2, 4, ...
    GeometricWeights,
    /// n unit jobs released one per time step.
    StaircaseReleases,
}

impl std::str::FromStr for AdversarialKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<AdversarialKind> {
        match s {
            "burst" => Ok(AdversarialKind::Burst),
            "geometric-weights" => Ok(AdversarialKind::GeometricWeights),
            "staircase-releases" => Ok(AdversarialKind::StaircaseReleases),
            other => Err(crate::Error::Parse(format!(
                "unknown adversarial family {other:?}; expected burst, geometric-weights, or staircase-releases"
            ))),
        }
    }
}

/// Deterministic single-machine stress instances. Bursts of many jobs
/// released together are where flow-time ratios peak.
pub fn gen_adversarial(kind: AdversarialKind, n: usize) -> Instance {
    assert!(n >= 1);
    let jobs: Vec<(Time, Time, i64)> = match kind {
        AdversarialKind::Burst => (0..n).map(|i| (1 << i.min(16), 0, 1)).collect(),
        AdversarialKind::GeometricWeights => (0..n).map(|i| (1, 0, 1 << i.min(16))).collect(),
        AdversarialKind::StaircaseReleases => (0..n).map(|i| (1, i as Time, 1)).collect(),
    };
    Instance::new(jobs, None).expect("families are valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{read_instance, write_instance};

    #[test]
    fn deterministic_per_seed() {
        let spec = GenSpec { seed: 7, ..GenSpec::default() };
        assert_eq!(gen_random(&spec), gen_random(&spec));
        let other = GenSpec { seed: 8, ..GenSpec::default() };
        assert_ne!(gen_random(&spec), gen_random(&other));
    }

    #[test]
    fn single_job_spec() {
        let spec = GenSpec { n: 1, ..GenSpec::default() };
        let i = gen_random(&spec);
        assert_eq!(i.n(), 1);
    }

    #[test]
    fn zero_inf_density_is_fully_finite() {
        let spec = GenSpec { machines: 2, inf_percent: 0, seed: 3, ..GenSpec::default() };
        let i = gen_random(&spec);
        for m in 0..2 {
            for j in 0..i.n() {
                assert!(i.p_on(m, j).is_some());
            }
        }
    }

    #[test]
    fn high_inf_density_still_valid() {
        for seed in 0..20 {
            let spec = GenSpec { machines: 2, inf_percent: 95, seed, ..GenSpec::default() };
            let i = gen_random(&spec);
            for j in 0..i.n() {
                assert!((0..2).any(|m| i.p_on(m, j).is_some()));
            }
        }
    }

    #[test]
    fn generated_instances_round_trip() {
        for seed in 0..10 {
            let spec = GenSpec { machines: 2, inf_percent: 30, seed, ..GenSpec::default() };
            let i = gen_random(&spec);
            assert_eq!(read_instance(&write_instance(&i)).unwrap(), i);
        }
    }

    #[test]
    fn families_match_their_shapes() {
        let b = gen_adversarial(AdversarialKind::Burst, 3);
        assert_eq!(
            b.jobs().iter().map(|j| (j.p, j.r, j.w)).collect::<Vec<_>>(),
            vec![(1, 0, 1), (2, 0, 1), (4, 0, 1)]
        );
        let s = gen_adversarial(AdversarialKind::StaircaseReleases, 3);
        assert_eq!(
            s.jobs().iter().map(|j| (j.p, j.r, j.w)).collect::<Vec<_>>(),
            vec![(1, 0, 1), (1, 1, 1), (1, 2, 1)]
        );
        let g = gen_adversarial(AdversarialKind::GeometricWeights, 3);
        assert_eq!(
            g.jobs().iter().map(|j| (j.p, j.r, j.w)).collect::<Vec<_>>(),
            vec![(1, 0, 1), (1, 0, 2), (1, 0, 4)]
        );
        assert!("bogus".parse::<AdversarialKind>().is_err());
    }
}
