//! Monte Carlo ensembles of independent runs, and the neighbor-list cost
//! benchmark.
//!
//! Runs are farmed out to a worker pool. Run `k` draws from its own stream
//! seeded with [`run_seed`]`(master_seed, k)`, so the set of trajectories does
//! not depend on the worker count. Aggregation keeps integer sums only, which
//! makes merging exact and independent of completion order.

use std::time::Instant;

use rayon::prelude::*;

use crate::epidemic::{run_single, RunOutcome, Scenario};
use crate::geometry::Domain;
use crate::mobility::{scatter, Mobility, MobilityKind, MobilityModel, DEFAULT_STEP_LENGTH};
use crate::rng::{from_seed, run_seed};
use crate::topology::Method;
use crate::{Result, SimError};

/// Per-step ensemble curves and per-run summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub runs: usize,
    pub mean_s: Vec<f64>,
    pub mean_i: Vec<f64>,
    pub mean_r: Vec<f64>,
    /// Sample standard deviation of I(t) across runs (0 for a single run).
    pub std_i: Vec<f64>,
    pub peak_mean: f64,
    pub peak_std: f64,
    pub peak_time_mean: f64,
    pub peak_time_std: f64,
    pub attack_size_mean: f64,
    pub truncated_runs: usize,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.mean_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_i.is_empty()
    }

    /// Standard error of `peak_mean`.
    pub fn peak_sem(&self) -> f64 {
        self.peak_std / (self.runs as f64).sqrt()
    }

    pub fn peak_time_sem(&self) -> f64 {
        self.peak_time_std / (self.runs as f64).sqrt()
    }
}

/// Running integer sums over runs. Series are padded with each run's final
/// counts, so a shorter accumulator extends by repeating its last entry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Accumulator {
    runs: u64,
    sum_s: Vec<u64>,
    sum_i: Vec<u64>,
    sum_r: Vec<u64>,
    sum_i2: Vec<u128>,
    peak: Moments,
    peak_time: Moments,
    attack: u64,
    truncated: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Moments {
    sum: u64,
    sum_sq: u128,
}

impl Moments {
    fn push(&mut self, x: u64) {
        self.sum += x;
        self.sum_sq += u128::from(x) * u128::from(x);
    }

    fn merge(&mut self, o: Moments) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean(&self, n: u64) -> f64 {
        self.sum as f64 / n as f64
    }

    fn std(&self, n: u64) -> f64 {
        sample_std(self.sum as u128, self.sum_sq, n)
    }
}

fn sample_std(sum: u128, sum_sq: u128, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n = u128::from(n);
    // n * sum_sq - sum^2 >= 0 by Cauchy-Schwarz, exact in integers
    let num = n * sum_sq - sum * sum;
    (num as f64 / (n * (n - 1)) as f64).sqrt()
}

fn pad<T: Copy + Default>(v: &mut Vec<T>, len: usize) {
    if v.len() < len {
        let last = v.last().copied().unwrap_or_default();
        v.resize(len, last);
    }
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn add(&mut self, run: &RunOutcome) {
        let counts = &run.series.counts;
        let mut single = Accumulator {
            runs: 1,
            sum_s: counts.iter().map(|c| c.s as u64).collect(),
            sum_i: counts.iter().map(|c| c.i as u64).collect(),
            sum_r: counts.iter().map(|c| c.r as u64).collect(),
            sum_i2: counts.iter().map(|c| (c.i as u128) * (c.i as u128)).collect(),
            attack: run.series.last().r as u64,
            truncated: u64::from(run.truncated),
            ..Default::default()
        };
        let (peak, at) = run.series.peak();
        single.peak.push(peak as u64);
        single.peak_time.push(at as u64);
        self.merge(&single);
    }

    /// Combines two accumulators; commutative and associative.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.runs == 0 {
            return;
        }
        if self.runs == 0 {
            *self = other.clone();
            return;
        }
        let len = self.sum_i.len().max(other.sum_i.len());
        let mut o = other.clone();
        for acc in [&mut *self, &mut o] {
            pad(&mut acc.sum_s, len);
            pad(&mut acc.sum_i, len);
            pad(&mut acc.sum_r, len);
            pad(&mut acc.sum_i2, len);
        }
        add_into(&mut self.sum_s, &o.sum_s);
        add_into(&mut self.sum_i, &o.sum_i);
        add_into(&mut self.sum_r, &o.sum_r);
        add_into(&mut self.sum_i2, &o.sum_i2);
        self.runs += o.runs;
        self.peak.merge(o.peak);
        self.peak_time.merge(o.peak_time);
        self.attack += o.attack;
        self.truncated += o.truncated;
    }

    pub fn finish(&self) -> Result<EnsembleStats> {
        let n = self.runs;
        if n == 0 {
            return Err(SimError::InvalidParameter("ensemble needs at least one run".into()));
        }
        let mean = |v: &[u64]| v.iter().map(|&x| x as f64 / n as f64).collect::<Vec<_>>();
        Ok(EnsembleStats {
            runs: n as usize,
            mean_s: mean(&self.sum_s),
            mean_i: mean(&self.sum_i),
            mean_r: mean(&self.sum_r),
            std_i: self
                .sum_i
                .iter()
                .zip(&self.sum_i2)
                .map(|(&s, &s2)| sample_std(s as u128, s2, n))
                .collect(),
            peak_mean: self.peak.mean(n),
            peak_std: self.peak.std(n),
            peak_time_mean: self.peak_time.mean(n),
            peak_time_std: self.peak_time.std(n),
            attack_size_mean: self.attack as f64 / n as f64,
            truncated_runs: self.truncated as usize,
        })
    }
}

fn add_into<T: Copy + std::ops::AddAssign>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers < 1 {
        return Err(SimError::InvalidParameter("ensemble.workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// Executes `n_runs` independent runs on `workers` threads, returned in run
/// order.
pub fn run_all(scenario: &Scenario, n_runs: usize, master_seed: u64, workers: usize) -> Result<Vec<RunOutcome>> {
    if n_runs < 1 {
        return Err(SimError::InvalidParameter("ensemble.runs must be >= 1".into()));
    }
    scenario.validate()?;
    pool(workers)?.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|k| run_single(scenario, from_seed(run_seed(master_seed, k as u64))))
            .collect()
    })
}

pub fn run_ensemble(scenario: &Scenario, n_runs: usize, master_seed: u64, workers: usize) -> Result<EnsembleStats> {
    let runs = run_all(scenario, n_runs, master_seed, workers)?;
    aggregate(&runs)
}

pub fn aggregate(runs: &[RunOutcome]) -> Result<EnsembleStats> {
    let mut acc = Accumulator::new();
    for r in runs {
        acc.add(r);
    }
    acc.finish()
}

/// Cost of keeping the communication graph current under mobility.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub n_nodes: usize,
    pub method: Method,
    pub i_update: u32,
    pub rebuilds: u64,
    pub pair_evals: u64,
    pub wall_seconds: f64,
}

/// Benchmark settings. Density and radio/mobility parameters come from the
/// base scenario; the domain edge scales as `sqrt(N / density)`.
#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub node_counts: Vec<usize>,
    pub update_periods: Vec<u32>,
    /// Epidemic steps simulated per record.
    pub steps: u32,
    pub methods: Vec<Method>,
}

impl BenchPlan {
    pub fn new(node_counts: Vec<usize>, update_periods: Vec<u32>, steps: u32) -> Self {
        Self { node_counts, update_periods, steps, methods: vec![Method::BruteForce, Method::CellList] }
    }
}

/// Runs the move-and-rebuild loop for every `(N, method, i_update)`.
///
/// Positions are moved once every `i_update` steps and the communication
/// lists rebuilt after each move; only rebuilds are timed and counted. The
/// random stream depends on `(seed, N)` alone, so both methods see the same
/// trajectory.
pub fn run_bench(plan: &BenchPlan, base: &Scenario, seed: u64) -> Result<Vec<BenchRecord>> {
    let density = base.n_nodes as f64 / base.domain.area();
    let range = base.radio.transmission_range();
    let kind = match base.mobility.kind {
        MobilityKind::Static => MobilityKind::RandomWalk { step_length: DEFAULT_STEP_LENGTH },
        ref k => k.clone(),
    };
    let mut records = Vec::new();
    for &n in &plan.node_counts {
        let domain = Domain::square((n as f64 / density).sqrt(), base.domain.periodic)?;
        for &i_update in &plan.update_periods {
            let model = MobilityModel::new(kind.clone(), i_update)?;
            for &method in &plan.methods {
                records.push(bench_one(n, &domain, range, &model, method, plan.steps, seed)?);
            }
        }
    }
    Ok(records)
}

fn bench_one(
    n: usize,
    domain: &Domain,
    range: f64,
    model: &MobilityModel,
    method: Method,
    steps: u32,
    seed: u64,
) -> Result<BenchRecord> {
    let mut rng = from_seed(run_seed(seed, n as u64));
    let mut positions = scatter(n, domain, &mut rng);
    let mut mobility = Mobility::new(model.clone(), n, domain, &mut rng)?;
    let mut record = BenchRecord {
        n_nodes: n,
        method,
        i_update: model.i_update,
        rebuilds: 0,
        pair_evals: 0,
        wall_seconds: 0.0,
    };
    for t in 1..=steps {
        if !t.is_multiple_of(model.i_update) {
            continue;
        }
        mobility.update_positions(&mut positions, domain, &mut rng)?;
        let start = Instant::now();
        let lists = method.build(&positions, domain, range)?;
        record.wall_seconds += start.elapsed().as_secs_f64();
        record.pair_evals += lists.pair_evals;
        record.rebuilds += 1;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::{Counts, EpidemicParams, ReceptionMode, TimeSeries};
    use crate::radio::RadioParams;
    use proptest::prelude::*;

    fn scenario(n: usize, lambda: f64, delta: f64) -> Scenario {
        Scenario {
            n_nodes: n,
            domain: Domain::square(300.0, true).unwrap(),
            radio: RadioParams::with_range(40.0, 2.0, 2.0).unwrap(),
            mobility: MobilityModel::random_walk(10.0, 1).unwrap(),
            epidemic: EpidemicParams::new(lambda, delta, ReceptionMode::Ideal),
        }
    }

    fn outcome(is: &[usize], n: usize) -> RunOutcome {
        // S drops as infections occur; R absorbs the rest
        let mut counts = Vec::new();
        let mut r = 0;
        let mut prev_i = 0;
        for (t, &i) in is.iter().enumerate() {
            if t > 0 && i < prev_i {
                r += prev_i - i;
            }
            prev_i = i;
            counts.push(Counts { s: n - i - r, i, r });
        }
        RunOutcome { series: TimeSeries { counts }, truncated: false }
    }

    #[test]
    fn single_run_means_equal_the_run() {
        let sc = scenario(100, 0.3, 0.2);
        let runs = run_all(&sc, 1, 5, 1).unwrap();
        let stats = aggregate(&runs).unwrap();
        let series = &runs[0].series;
        assert_eq!(stats.len(), series.len());
        for (t, c) in series.counts.iter().enumerate() {
            assert_eq!(stats.mean_s[t], c.s as f64);
            assert_eq!(stats.mean_i[t], c.i as f64);
            assert_eq!(stats.mean_r[t], c.r as f64);
            assert_eq!(stats.std_i[t], 0.0);
        }
        assert_eq!(stats.peak_mean, series.peak().0 as f64);
        assert_eq!(stats.attack_size_mean, series.last().r as f64);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let sc = scenario(150, 0.3, 0.1);
        let a = run_ensemble(&sc, 24, 77, 1).unwrap();
        let b = run_ensemble(&sc, 24, 77, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_spread_ensemble() {
        let mut sc = scenario(60, 0.0, 1.0);
        sc.epidemic.initial_infected = 3;
        let s = run_ensemble(&sc, 17, 1, 2).unwrap();
        assert_eq!(s.peak_mean, 3.0);
        assert_eq!(s.attack_size_mean, 3.0);
        assert_eq!(s.peak_time_mean, 0.0);
    }

    #[test]
    fn padding_keeps_conservation() {
        let runs = [outcome(&[1, 2, 0], 10), outcome(&[1, 3, 4, 1, 0], 10)];
        let s = aggregate(&runs).unwrap();
        assert_eq!(s.len(), 5);
        for t in 0..5 {
            assert!((s.mean_s[t] + s.mean_i[t] + s.mean_r[t] - 10.0).abs() < 1e-12);
        }
        // the short run contributes (8, 0, 2) after it ends
        assert_eq!(s.mean_i[4], 0.0);
        assert_eq!(s.mean_r[4], (2.0 + 4.0) / 2.0);
        assert_eq!(s.peak_mean, 3.0);
        assert_eq!(s.peak_time_mean, 1.5);
        assert!((s.peak_std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(Accumulator::new().finish().is_err());
        assert!(run_all(&scenario(10, 0.1, 0.1), 0, 0, 1).is_err());
        assert!(run_all(&scenario(10, 0.1, 0.1), 1, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(
            series in proptest::collection::vec(proptest::collection::vec(0usize..20, 1..12), 1..8),
            split in 0usize..8,
        ) {
            let runs: Vec<RunOutcome> = series.iter().map(|is| outcome(is, 1000)).collect();
            let mut forward = Accumulator::new();
            runs.iter().for_each(|r| forward.add(r));
            let mut backward = Accumulator::new();
            runs.iter().rev().for_each(|r| backward.add(r));
            prop_assert_eq!(&forward, &backward);

            let cut = split.min(runs.len());
            let (mut left, mut right) = (Accumulator::new(), Accumulator::new());
            runs[..cut].iter().for_each(|r| left.add(r));
            runs[cut..].iter().for_each(|r| right.add(r));
            let mut lr = left.clone();
            lr.merge(&right);
            right.merge(&left);
            prop_assert_eq!(&lr, &forward);
            prop_assert_eq!(&right, &forward);
        }
    }

    #[test]
    fn brute_force_cost_is_closed_form() {
        let base = scenario(100, 0.3, 0.1);
        let plan = BenchPlan::new(vec![100], vec![1, 3], 10);
        let recs = run_bench(&plan, &base, 4).unwrap();
        for r in &recs {
            let rebuilds = u64::from(10 / r.i_update);
            assert_eq!(r.rebuilds, rebuilds);
            if r.method == Method::BruteForce {
                assert_eq!(r.pair_evals, rebuilds * 4950);
            }
        }
        assert_eq!(recs[0].pair_evals, 49_500);
    }

    #[test]
    fn cell_list_is_cheaper_and_sparser_updates_cost_less() {
        let base = scenario(1000, 0.3, 0.1);
        let plan = BenchPlan::new(vec![400, 800], vec![1, 2, 5], 10);
        let recs = run_bench(&plan, &base, 4).unwrap();
        for pair in recs.chunks(2) {
            assert_eq!(pair[0].method, Method::BruteForce);
            assert!(pair[1].pair_evals <= pair[0].pair_evals);
        }
        for method in [Method::BruteForce, Method::CellList] {
            for n in [400, 800] {
                let costs: Vec<u64> = recs
                    .iter()
                    .filter(|r| r.method == method && r.n_nodes == n)
                    .map(|r| r.pair_evals)
                    .collect();
                assert!(costs.windows(2).all(|w| w[0] > w[1]), "{costs:?}");
            }
        }
    }
}
