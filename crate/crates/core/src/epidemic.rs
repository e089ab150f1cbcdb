//! SIR worm propagation over the time-dependent adhoc network.
//!
//! Every epidemic step has two synchronous phases. In the infection phase the
//! transmitting infected nodes broadcast a worm copy to their communication
//! neighbors; each copy that is received infects a susceptible node with
//! probability `lambda`. In the recovery phase each node that was infected at
//! the start of the step is patched (removed) with probability `delta`.
//!
//! Reception depends on the [`ReceptionMode`]: always in `Ideal`, subject to
//! SINR against the other simultaneous transmitters in `Sinr`, and in
//! `MacSinr` the transmitters are additionally thinned by a listen-before-talk
//! exclusion rule over the interference graph.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Position};
use crate::mobility::{scatter, Mobility, MobilityModel};
use crate::radio::RadioParams;
use crate::rng::SimRng;
use crate::topology::{neighbors_cell_list, NeighborLists};
use crate::{Result, SimError};

/// Distances below this are clamped before evaluating received power.
const MIN_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Susceptible,
    Infected,
    Removed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptionMode {
    Ideal,
    Sinr,
    MacSinr,
}

impl ReceptionMode {
    pub fn needs_interference(self) -> bool {
        !matches!(self, ReceptionMode::Ideal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    /// Infection probability per received worm copy.
    pub lambda: f64,
    /// Per-step patch probability of an infected node.
    pub delta: f64,
    pub reception_mode: ReceptionMode,
    pub max_steps: u32,
    pub initial_infected: usize,
}

impl EpidemicParams {
    pub fn new(lambda: f64, delta: f64, reception_mode: ReceptionMode) -> Self {
        Self { lambda, delta, reception_mode, max_steps: 100_000, initial_infected: 1 }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(SimError::InvalidParameter("epidemic.lambda must lie in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(SimError::InvalidParameter("epidemic.delta must lie in [0,1]".into()));
        }
        if self.max_steps < 1 {
            return Err(SimError::InvalidParameter("epidemic.max_steps must be >= 1".into()));
        }
        if self.initial_infected < 1 || self.initial_infected > n_nodes {
            return Err(SimError::InvalidParameter(format!(
                "epidemic.initial_infected must lie in [1, n_nodes = {n_nodes}]"
            )));
        }
        Ok(())
    }
}

/// Population counts at one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Counts {
    pub s: usize,
    pub i: usize,
    pub r: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.s + self.i + self.r
    }

    fn of(states: &[NodeState]) -> Self {
        let mut c = Counts::default();
        for s in states {
            match s {
                NodeState::Susceptible => c.s += 1,
                NodeState::Infected => c.i += 1,
                NodeState::Removed => c.r += 1,
            }
        }
        c
    }
}

/// S(t), I(t), R(t) for t = 0, 1, ... (step 0 is right after seeding).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TimeSeries {
    pub counts: Vec<Counts>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn last(&self) -> Counts {
        self.counts.last().copied().unwrap_or_default()
    }

    /// Maximum of I(t) and the first step at which it is reached.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (t, c) in self.counts.iter().enumerate() {
            if c.i > best.0 {
                best = (c.i, t);
            }
        }
        best
    }

    /// Conservation and monotonicity of the series for a population of `n`.
    pub fn is_well_formed(&self, n: usize) -> bool {
        self.counts.iter().all(|c| c.total() == n)
            && self.counts.windows(2).all(|w| w[1].r >= w[0].r && w[1].s <= w[0].s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub series: TimeSeries,
    /// The run hit `max_steps` with infected nodes left.
    pub truncated: bool,
}

/// Infects `k` distinct nodes chosen uniformly.
pub fn seed_infection(states: &mut [NodeState], k: usize, rng: &mut SimRng) -> Result<()> {
    if k > states.len() {
        return Err(SimError::TooManySeeds { requested: k, available: states.len() });
    }
    let mut chosen = rand::seq::index::sample(rng, states.len(), k).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        states[i] = NodeState::Infected;
    }
    Ok(())
}

/// Infected nodes that transmit this step, ascending.
///
/// In `MacSinr` mode the infected nodes are visited in a uniformly random
/// order and a node defers when an interference neighbor already transmits,
/// giving a maximal independent set of the interference graph.
pub fn select_transmitters(
    infected: &[usize],
    interference: Option<&NeighborLists>,
    mode: ReceptionMode,
    rng: &mut SimRng,
) -> Vec<usize> {
    let mut out = match (mode, interference) {
        (ReceptionMode::MacSinr, Some(lists)) => {
            let mut order = infected.to_vec();
            order.sort_unstable();
            order.shuffle(rng);
            let mut busy = vec![false; lists.len()];
            let mut chosen = Vec::new();
            for i in order {
                if busy[i] {
                    continue;
                }
                chosen.push(i);
                for &k in lists.neighbors(i) {
                    busy[k] = true;
                }
            }
            chosen
        }
        _ => infected.to_vec(),
    };
    out.sort_unstable();
    out
}

/// What happened during one epidemic step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub transmitters: Vec<usize>,
    pub new_infections: usize,
    pub recoveries: usize,
}

/// Read-only view of the network an epidemic step runs on.
pub struct Network<'a> {
    pub positions: &'a [Position],
    pub domain: &'a Domain,
    pub comm: &'a NeighborLists,
    /// Required in the SINR modes.
    pub interference: Option<&'a NeighborLists>,
    pub radio: &'a RadioParams,
}

/// One synchronous infection + recovery step.
pub fn step(
    states: &mut [NodeState],
    net: &Network<'_>,
    params: &EpidemicParams,
    rng: &mut SimRng,
) -> Result<StepOutcome> {
    let mode = params.reception_mode;
    if mode.needs_interference() && net.interference.is_none() {
        return Err(SimError::InvalidParameter(
            "SINR reception requires interference neighbor lists".into(),
        ));
    }
    let infected: Vec<usize> = (0..states.len()).filter(|&i| states[i] == NodeState::Infected).collect();
    let transmitters = select_transmitters(&infected, net.interference, mode, rng);

    let mut transmitting = vec![false; states.len()];
    for &i in &transmitters {
        transmitting[i] = true;
    }

    let mut newly = Vec::new();
    let mut senders = Vec::new();
    let mut interferers = Vec::new();
    let mut others = Vec::new();
    for (j, _) in states.iter().enumerate().filter(|(_, s)| **s == NodeState::Susceptible) {
        senders.clear();
        senders.extend(net.comm.neighbors(j).iter().copied().filter(|&i| transmitting[i]));
        if senders.is_empty() {
            continue;
        }
        if let (true, Some(intf)) = (mode.needs_interference(), net.interference) {
            interferers.clear();
            interferers.extend(
                intf.neighbors(j)
                    .iter()
                    .copied()
                    .filter(|&k| transmitting[k])
                    .map(|k| (k, clamp(net.domain.distance(net.positions[k], net.positions[j])))),
            );
            senders.retain(|&i| {
                others.clear();
                others.extend(interferers.iter().filter(|(k, _)| *k != i).map(|&(_, d)| d));
                let r = clamp(net.domain.distance(net.positions[i], net.positions[j]));
                net.radio.sinr_ok(r, &others).unwrap_or(false)
            });
        }
        if senders.iter().any(|_| rng.gen_bool(params.lambda)) {
            newly.push(j);
        }
    }

    let mut recoveries = 0;
    for &i in &infected {
        if rng.gen_bool(params.delta) {
            states[i] = NodeState::Removed;
            recoveries += 1;
        }
    }
    for &j in &newly {
        states[j] = NodeState::Infected;
    }
    Ok(StepOutcome { transmitters, new_infections: newly.len(), recoveries })
}

#[inline]
fn clamp(d: f64) -> f64 {
    d.max(MIN_DISTANCE)
}

/// Everything a single run needs apart from its random stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n_nodes: usize,
    pub domain: Domain,
    pub radio: RadioParams,
    pub mobility: MobilityModel,
    pub epidemic: EpidemicParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 1 {
            return Err(SimError::InvalidParameter("n_nodes must be >= 1".into()));
        }
        self.radio.validate()?;
        self.mobility.validate()?;
        self.mobility.check_domain(&self.domain)?;
        self.epidemic.validate(self.n_nodes)?;
        crate::topology::CellGrid::dimensions(&self.domain, self.radio.transmission_range())?;
        if self.epidemic.reception_mode.needs_interference() {
            crate::topology::CellGrid::dimensions(&self.domain, self.radio.interference_range())?;
        }
        Ok(())
    }
}

/// A run in progress: positions, node states, mobility state and the
/// neighbor lists for the current positions.
pub struct Simulation {
    scenario: Scenario,
    rng: SimRng,
    positions: Vec<Position>,
    states: Vec<NodeState>,
    mobility: Mobility,
    comm: NeighborLists,
    interference: Option<NeighborLists>,
    step: u32,
    counts: Counts,
}

impl Simulation {
    /// Places nodes uniformly, initializes mobility, builds the neighbor
    /// lists and seeds the infection, consuming `rng` in that order.
    pub fn new(scenario: Scenario, mut rng: SimRng) -> Result<Self> {
        scenario.validate()?;
        let positions = scatter(scenario.n_nodes, &scenario.domain, &mut rng);
        let mobility = Mobility::new(scenario.mobility.clone(), scenario.n_nodes, &scenario.domain, &mut rng)?;
        let mut states = vec![NodeState::Susceptible; scenario.n_nodes];
        let (comm, interference) = build_lists(&scenario, &positions)?;
        seed_infection(&mut states, scenario.epidemic.initial_infected, &mut rng)?;
        let counts = Counts::of(&states);
        Ok(Self { scenario, rng, positions, states, mobility, comm, interference, step: 0, counts })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn communication(&self) -> &NeighborLists {
        &self.comm
    }

    pub fn interference(&self) -> Option<&NeighborLists> {
        self.interference.as_ref()
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn is_over(&self) -> bool {
        self.counts.i == 0 || self.step >= self.scenario.epidemic.max_steps
    }

    /// Runs one epidemic step, then moves the nodes and rebuilds the lists
    /// if a movement event is due.
    pub fn advance(&mut self) -> Result<StepOutcome> {
        let net = Network {
            positions: &self.positions,
            domain: &self.scenario.domain,
            comm: &self.comm,
            interference: self.interference.as_ref(),
            radio: &self.scenario.radio,
        };
        let outcome = step(&mut self.states, &net, &self.scenario.epidemic, &mut self.rng)?;
        self.counts.s -= outcome.new_infections;
        self.counts.i = self.counts.i + outcome.new_infections - outcome.recoveries;
        self.counts.r += outcome.recoveries;
        self.step += 1;

        let model = self.mobility.model();
        if !model.is_static() && self.step.is_multiple_of(model.i_update) {
            self.mobility.update_positions(&mut self.positions, &self.scenario.domain, &mut self.rng)?;
            let (comm, interference) = build_lists(&self.scenario, &self.positions)?;
            self.comm = comm;
            self.interference = interference;
        }
        Ok(outcome)
    }

    /// Steps until the epidemic dies out or `max_steps` is reached.
    pub fn run(mut self) -> Result<RunOutcome> {
        let mut series = TimeSeries { counts: vec![self.counts] };
        while !self.is_over() {
            self.advance()?;
            series.counts.push(self.counts);
        }
        Ok(RunOutcome { series, truncated: self.counts.i > 0 })
    }
}

fn build_lists(scenario: &Scenario, positions: &[Position]) -> Result<(NeighborLists, Option<NeighborLists>)> {
    let comm = neighbors_cell_list(positions, &scenario.domain, scenario.radio.transmission_range())?;
    let interference = if scenario.epidemic.reception_mode.needs_interference() {
        Some(neighbors_cell_list(positions, &scenario.domain, scenario.radio.interference_range())?)
    } else {
        None
    };
    Ok((comm, interference))
}

pub fn run_single(scenario: &Scenario, rng: SimRng) -> Result<RunOutcome> {
    Simulation::new(scenario.clone(), rng)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn scenario(n: usize, l: f64, range: f64, lambda: f64, delta: f64, mode: ReceptionMode) -> Scenario {
        Scenario {
            n_nodes: n,
            domain: Domain::square(l, true).unwrap(),
            radio: RadioParams::with_range(range, 2.0, 2.0).unwrap(),
            mobility: MobilityModel::fixed(),
            epidemic: EpidemicParams::new(lambda, delta, mode),
        }
    }

    fn line(n: usize) -> Vec<Position> {
        (0..n).map(|i| Position::new(10.0 * i as f64 + 1.0, 1.0)).collect()
    }

    #[test]
    fn seeding_picks_exactly_k() {
        let mut s = vec![NodeState::Susceptible; 10];
        seed_infection(&mut s, 1, &mut from_seed(4)).unwrap();
        assert_eq!(Counts::of(&s), Counts { s: 9, i: 1, r: 0 });

        let mut all = vec![NodeState::Susceptible; 10];
        seed_infection(&mut all, 10, &mut from_seed(4)).unwrap();
        assert!(all.iter().all(|&x| x == NodeState::Infected));

        let mut again = vec![NodeState::Susceptible; 10];
        seed_infection(&mut again, 1, &mut from_seed(4)).unwrap();
        assert_eq!(s, again);

        assert!(matches!(
            seed_infection(&mut [NodeState::Susceptible; 3], 4, &mut from_seed(0)),
            Err(SimError::TooManySeeds { .. })
        ));
    }

    #[test]
    fn transmitter_selection_examples() {
        let far = NeighborLists::from_lists(vec![vec![], vec![]]);
        let near = NeighborLists::from_lists(vec![vec![1], vec![0]]);
        let mut rng = from_seed(0);
        assert_eq!(select_transmitters(&[0, 1], Some(&far), ReceptionMode::MacSinr, &mut rng), vec![0, 1]);
        for _ in 0..20 {
            assert_eq!(select_transmitters(&[0, 1], Some(&near), ReceptionMode::MacSinr, &mut rng).len(), 1);
        }
        assert_eq!(select_transmitters(&[1, 0], Some(&near), ReceptionMode::Ideal, &mut rng), vec![0, 1]);
        assert_eq!(select_transmitters(&[0, 1], Some(&near), ReceptionMode::Sinr, &mut rng), vec![0, 1]);
    }

    #[test]
    fn mac_picks_either_node_over_time() {
        let near = NeighborLists::from_lists(vec![vec![1], vec![0]]);
        let mut rng = from_seed(0);
        let zeros = (0..200)
            .filter(|_| select_transmitters(&[0, 1], Some(&near), ReceptionMode::MacSinr, &mut rng) == vec![0])
            .count();
        assert!((60..140).contains(&zeros), "{zeros}");
    }

    #[test]
    fn certain_infection_reaches_all_neighbors() {
        // star: node 0 linked to 1, 2, 3
        let comm = NeighborLists::from_lists(vec![vec![1, 2, 3], vec![0], vec![0], vec![0]]);
        let pos = line(4);
        let domain = Domain::square(1000.0, false).unwrap();
        let radio = RadioParams::with_range(100.0, 2.0, 2.0).unwrap();
        let net = Network { positions: &pos, domain: &domain, comm: &comm, interference: None, radio: &radio };
        let mut states = vec![NodeState::Infected, NodeState::Susceptible, NodeState::Susceptible, NodeState::Susceptible];
        let out = step(&mut states, &net, &EpidemicParams::new(1.0, 0.0, ReceptionMode::Ideal), &mut from_seed(1)).unwrap();
        assert_eq!(out.new_infections, 3);
        assert!(states.iter().all(|&s| s == NodeState::Infected));
    }

    #[test]
    fn new_infections_do_not_recover_same_step() {
        let comm = NeighborLists::from_lists(vec![vec![1], vec![0]]);
        let pos = line(2);
        let domain = Domain::square(1000.0, false).unwrap();
        let radio = RadioParams::with_range(100.0, 2.0, 2.0).unwrap();
        let net = Network { positions: &pos, domain: &domain, comm: &comm, interference: None, radio: &radio };
        let mut states = vec![NodeState::Infected, NodeState::Susceptible];
        step(&mut states, &net, &EpidemicParams::new(1.0, 1.0, ReceptionMode::Ideal), &mut from_seed(1)).unwrap();
        assert_eq!(states, vec![NodeState::Removed, NodeState::Infected]);
    }

    #[test]
    fn sinr_blocks_reception_under_interference() {
        // receiver 1 sits halfway between transmitters 0 and 2
        let pos = vec![Position::new(0.0, 0.0), Position::new(5.0, 0.0), Position::new(10.0, 0.0)];
        let domain = Domain::square(1000.0, false).unwrap();
        let radio = RadioParams::with_range(10.0, 2.0, 2.0).unwrap();
        let comm = neighbors_cell_list(&pos, &domain, 10.0).unwrap();
        let intf = neighbors_cell_list(&pos, &domain, 20.0).unwrap();
        let params = EpidemicParams::new(1.0, 0.0, ReceptionMode::Sinr);
        let mut states = vec![NodeState::Infected, NodeState::Susceptible, NodeState::Infected];
        let net = Network { positions: &pos, domain: &domain, comm: &comm, interference: Some(&intf), radio: &radio };
        let out = step(&mut states, &net, &params, &mut from_seed(1)).unwrap();
        assert_eq!(out.new_infections, 0);

        // a single transmitter gets through
        let mut states = vec![NodeState::Infected, NodeState::Susceptible, NodeState::Removed];
        let out = step(&mut states, &net, &params, &mut from_seed(1)).unwrap();
        assert_eq!(out.new_infections, 1);

        // with the MAC only one of the two transmits, and it is received
        let mac = EpidemicParams::new(1.0, 0.0, ReceptionMode::MacSinr);
        let mut states = vec![NodeState::Infected, NodeState::Susceptible, NodeState::Infected];
        let out = step(&mut states, &net, &mac, &mut from_seed(1)).unwrap();
        assert_eq!(out.transmitters.len(), 1);
        assert_eq!(out.new_infections, 1);
    }

    #[test]
    fn sinr_without_interference_lists_is_an_error() {
        let comm = NeighborLists::from_lists(vec![vec![]]);
        let pos = line(1);
        let domain = Domain::square(100.0, false).unwrap();
        let radio = RadioParams::with_range(10.0, 2.0, 2.0).unwrap();
        let net = Network { positions: &pos, domain: &domain, comm: &comm, interference: None, radio: &radio };
        let mut states = vec![NodeState::Infected];
        assert!(step(&mut states, &net, &EpidemicParams::new(1.0, 0.0, ReceptionMode::Sinr), &mut from_seed(0)).is_err());
    }

    #[test]
    fn immediate_recovery_dies_at_step_one() {
        let sc = scenario(10, 100.0, 20.0, 0.0, 1.0, ReceptionMode::Ideal);
        let out = run_single(&sc, from_seed(3)).unwrap();
        assert_eq!(out.series.counts, vec![Counts { s: 9, i: 1, r: 0 }, Counts { s: 9, i: 0, r: 1 }]);
        assert!(!out.truncated);
    }

    #[test]
    fn zero_lambda_never_spreads() {
        let mut sc = scenario(50, 200.0, 60.0, 0.0, 0.2, ReceptionMode::Ideal);
        sc.epidemic.initial_infected = 5;
        let out = run_single(&sc, from_seed(3)).unwrap();
        assert!(out.series.counts.iter().all(|c| c.s == 45));
        assert_eq!(out.series.last().r, 5);
    }

    #[test]
    fn static_runs_ignore_update_period() {
        let mut sc = scenario(200, 300.0, 40.0, 0.3, 0.1, ReceptionMode::Sinr);
        let a = run_single(&sc, from_seed(8)).unwrap();
        sc.mobility.i_update = 7;
        let b = run_single(&sc, from_seed(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn runs_are_deterministic_and_well_formed() {
        for mode in [ReceptionMode::Ideal, ReceptionMode::Sinr, ReceptionMode::MacSinr] {
            let mut sc = scenario(300, 300.0, 40.0, 0.3, 0.1, mode);
            sc.mobility = MobilityModel::random_walk(10.0, 2).unwrap();
            let a = run_single(&sc, from_seed(21)).unwrap();
            let b = run_single(&sc, from_seed(21)).unwrap();
            assert_eq!(a, b);
            assert!(a.series.is_well_formed(300));
            assert_eq!(a.series.last().i, 0);
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let mut sc = scenario(10, 100.0, 20.0, 0.0, 0.0, ReceptionMode::Ideal);
        sc.epidemic.max_steps = 5;
        let out = run_single(&sc, from_seed(0)).unwrap();
        assert!(out.truncated);
        assert_eq!(out.series.len(), 6);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(EpidemicParams::new(1.5, 0.1, ReceptionMode::Ideal).validate(10).is_err());
        assert!(EpidemicParams::new(0.5, -0.1, ReceptionMode::Ideal).validate(10).is_err());
        let mut p = EpidemicParams::new(0.5, 0.1, ReceptionMode::Ideal);
        p.initial_infected = 11;
        assert!(p.validate(10).is_err());
    }

    #[test]
    fn peak_reports_first_maximum() {
        let ts = TimeSeries {
            counts: [1, 3, 5, 5, 2, 0].iter().map(|&i| Counts { s: 10 - i, i, r: 0 }).collect(),
        };
        assert_eq!(ts.peak(), (5, 2));
    }
}
