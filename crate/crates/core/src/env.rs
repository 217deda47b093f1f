//! POMDP environment: scheduling, activation, transmission, importance
//! aggregation, AoCI evolution, energy harvesting, and observation generation.
//!
//! `transition` is a pure function of (state, action, draws); `Env` wraps it
//! with a seeded random stream so identical seeds replay identical
//! trajectories. Draw order is fixed: per slot, one success draw per sensor in
//! ascending index order, then one energy-arrival draw per sensor in ascending
//! index order.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::actspace::{validate_action, ValidAction};

/// Energy spent per status update (sensing plus transmission).
pub const UPDATE_COST: u32 = 1;

/// Static description of the network: CSPs, sensors, channels, importance
/// thresholds, caps, and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Number of correlated sensing points.
    pub k: usize,
    /// Disjoint global sensor indices per CSP; together they partition 0..N.
    pub sensor_sets: Vec<Vec<usize>>,
    /// Channels per CSP set: at most this many sensors of one set transmit
    /// simultaneously.
    pub m: usize,
    /// Per-sensor transmission failure probability.
    pub failure_prob: Vec<f64>,
    /// Per-sensor Bernoulli energy-arrival probability.
    pub eh_prob: Vec<f64>,
    /// Per-sensor battery capacity in energy units.
    pub battery_cap: Vec<u32>,
    /// Per-sensor importance of an update.
    pub importance: Vec<f64>,
    /// Per-CSP importance threshold.
    pub threshold: Vec<f64>,
    pub g_max: u32,
    pub x_max: u32,
    pub aoci_max: u32,
    /// Discount factor of the control objective.
    pub discount: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("k must be positive")]
    NoCsps,
    #[error("sensor_sets must have exactly k entries (got {0}, k = {1})")]
    SetCountMismatch(usize, usize),
    #[error("sensor set {0} is empty")]
    EmptySet(usize),
    #[error("sensor_sets do not partition 0..{n}: index {index} {problem}")]
    NotAPartition { n: usize, index: usize, problem: &'static str },
    #[error("m = {m} exceeds |set {set}| = {len}")]
    TooFewSensors { set: usize, m: usize, len: usize },
    #[error("per-sensor field {field} has length {got}, expected {expected}")]
    FieldLength { field: &'static str, got: usize, expected: usize },
    #[error("{field}[{index}] = {value} out of range")]
    FieldRange { field: &'static str, index: usize, value: f64 },
    #[error("battery_cap[{0}] must be at least 1")]
    ZeroBattery(usize),
    #[error("set {set}: no subset of at most {m} sensors reaches threshold {threshold}")]
    NoQualifiedSubset { set: usize, m: usize, threshold: f64 },
    #[error("caps must be positive (g_max {g_max}, x_max {x_max}, aoci_max {aoci_max})")]
    ZeroCap { g_max: u32, x_max: u32, aoci_max: u32 },
    #[error("discount {0} must lie in [0, 1)")]
    BadDiscount(f64),
}

impl NetworkConfig {
    /// Total number of sensors.
    pub fn n(&self) -> usize {
        self.failure_prob.len()
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::NoCsps);
        }
        if self.sensor_sets.len() != self.k {
            return Err(ConfigError::SetCountMismatch(self.sensor_sets.len(), self.k));
        }
        let n = self.n();
        let mut seen = vec![false; n];
        for (k, set) in self.sensor_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(ConfigError::EmptySet(k));
            }
            if self.m > set.len() {
                return Err(ConfigError::TooFewSensors { set: k, m: self.m, len: set.len() });
            }
            for &s in set {
                if s >= n {
                    return Err(ConfigError::NotAPartition { n, index: s, problem: "out of range" });
                }
                if seen[s] {
                    return Err(ConfigError::NotAPartition { n, index: s, problem: "appears twice" });
                }
                seen[s] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&v| !v) {
            return Err(ConfigError::NotAPartition { n, index: missing, problem: "is missing" });
        }
        for (field, values) in [("failure_prob", &self.failure_prob), ("eh_prob", &self.eh_prob)] {
            if values.len() != n {
                return Err(ConfigError::FieldLength { field, got: values.len(), expected: n });
            }
            for (i, &v) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ConfigError::FieldRange { field, index: i, value: v });
                }
            }
        }
        for (field, len) in [("battery_cap", self.battery_cap.len()), ("importance", self.importance.len())] {
            if len != n {
                return Err(ConfigError::FieldLength { field, got: len, expected: n });
            }
        }
        if let Some(i) = self.battery_cap.iter().position(|&c| c == 0) {
            return Err(ConfigError::ZeroBattery(i));
        }
        for (i, &d) in self.importance.iter().enumerate() {
            if d <= 0.0 || !d.is_finite() {
                return Err(ConfigError::FieldRange { field: "importance", index: i, value: d });
            }
        }
        if self.threshold.len() != self.k {
            return Err(ConfigError::FieldLength { field: "threshold", got: self.threshold.len(), expected: self.k });
        }
        for (i, &t) in self.threshold.iter().enumerate() {
            if t <= 0.0 || !t.is_finite() {
                return Err(ConfigError::FieldRange { field: "threshold", index: i, value: t });
            }
        }
        if self.g_max == 0 || self.x_max == 0 || self.aoci_max == 0 {
            return Err(ConfigError::ZeroCap { g_max: self.g_max, x_max: self.x_max, aoci_max: self.aoci_max });
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(ConfigError::BadDiscount(self.discount));
        }
        // Some qualified subset of size <= m must exist per set, otherwise the
        // AoCI can never be reduced.
        for (k, set) in self.sensor_sets.iter().enumerate() {
            if !has_qualified_subset(set, &self.importance, self.m, self.threshold[k]) {
                return Err(ConfigError::NoQualifiedSubset { set: k, m: self.m, threshold: self.threshold[k] });
            }
        }
        Ok(())
    }
}

/// True when some subset of at most `m` of `set` has total importance
/// reaching `threshold`. Greedy check: the `m` largest importances suffice.
fn has_qualified_subset(set: &[usize], importance: &[f64], m: usize, threshold: f64) -> bool {
    let mut ds: Vec<f64> = set.iter().map(|&s| importance[s]).collect();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let best: f64 = ds.iter().take(m).sum();
    best >= threshold
}

/// True POMDP state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    /// Slots since each sensor's last successful delivery (saturating).
    pub g: Vec<u32>,
    /// Times each sensor was scheduled since its last success (saturating).
    pub x: Vec<u32>,
    /// Current battery levels.
    pub battery: Vec<u32>,
    /// Age of correlated information at the fusion center.
    pub aoci: u32,
}

/// Observed battery: sensors report residual energy only inside a delivered
/// update packet; otherwise the fusion center sees nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObsBattery {
    /// No fresh report (the sentinel value E_O).
    Sentinel,
    /// Post-action residual energy reported in the preceding slot, energy
    /// arrival of that slot not included.
    Reported(u32),
}

/// Agent-visible state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub g: Vec<u32>,
    pub x: Vec<u32>,
    pub battery: Vec<ObsBattery>,
    pub aoci: u32,
}

/// Everything one slot produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Negative AoCI at the beginning of the next slot; always <= -1.
    pub reward: i64,
    pub next_obs: Observation,
    /// Per-sensor delivery indicators.
    pub delivered: Vec<bool>,
    /// Per-sensor activation indicators.
    pub activated: Vec<bool>,
    /// Per-CSP importance-condition indicators.
    pub csp_met: Vec<bool>,
    /// All CSP conditions met this slot.
    pub integrated: bool,
    /// Per-CSP-set minimum battery at the start of the next slot.
    pub mre: Vec<u32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid action: {0}")]
    InvalidAction(&'static str),
    #[error("draw vector has length {got}, expected {expected}")]
    DrawLength { got: usize, expected: usize },
}

/// Activates a scheduled sensor when it holds at least one unit of energy.
/// Returns the activation indicator and the residual energy after the action.
pub fn activation(scheduled: bool, battery: u32) -> (bool, u32) {
    let activated = scheduled && battery >= UPDATE_COST;
    (activated, battery - if activated { UPDATE_COST } else { 0 })
}

/// Sums delivered importance for set `k` and checks it against the threshold
/// (inclusive).
pub fn aggregate_importance(delivered: &[bool], config: &NetworkConfig, k: usize) -> (f64, bool) {
    let set = &config.sensor_sets[k];
    assert_eq!(delivered.len(), set.len(), "one indicator per sensor of set k");
    let f_value: f64 = set
        .iter()
        .zip(delivered.iter())
        .map(|(&s, &y)| if y { config.importance[s] } else { 0.0 })
        .sum();
    (f_value, f_value >= config.threshold[k])
}

/// AoCI evolution: reset to 1 on integration, otherwise grow and saturate.
pub fn evolve_aoci(aoci: u32, integrated: bool, aoci_max: u32) -> u32 {
    if integrated {
        1
    } else {
        (aoci + 1).min(aoci_max)
    }
}

/// Battery recharge with unit arrivals and a hard cap.
pub fn battery_transition(residual: u32, arrival: bool, capacity: u32) -> u32 {
    (residual + arrival as u32).min(capacity)
}

/// One slot of dynamics as a pure function of state, action, and the random
/// draws. `success_draws[n]` is consulted only when sensor n is activated.
pub fn transition(
    state: &EnvState,
    action: &ValidAction,
    success_draws: &[bool],
    eh_draws: &[bool],
    config: &NetworkConfig,
) -> Result<(EnvState, StepOutcome), EnvError> {
    let n = config.n();
    if success_draws.len() != n {
        return Err(EnvError::DrawLength { got: success_draws.len(), expected: n });
    }
    if eh_draws.len() != n {
        return Err(EnvError::DrawLength { got: eh_draws.len(), expected: n });
    }
    if !validate_action(action, config) {
        return Err(EnvError::InvalidAction("violates the channel or qualification constraint"));
    }

    let mut activated = vec![false; n];
    let mut residual = vec![0u32; n];
    let mut delivered = vec![false; n];
    for s in 0..n {
        let (a, r) = activation(action.mask[s], state.battery[s]);
        activated[s] = a;
        residual[s] = r;
        delivered[s] = a && success_draws[s];
    }

    let mut csp_met = vec![false; config.k];
    for k in 0..config.k {
        let local: Vec<bool> = config.sensor_sets[k].iter().map(|&s| delivered[s]).collect();
        let (_, met) = aggregate_importance(&local, config, k);
        csp_met[k] = met;
    }
    let integrated = csp_met.iter().all(|&m| m);

    let next_aoci = evolve_aoci(state.aoci, integrated, config.aoci_max);
    let reward = -(next_aoci as i64);

    let mut battery = vec![0u32; n];
    let mut g = vec![0u32; n];
    let mut x = vec![0u32; n];
    let mut obs_battery = vec![ObsBattery::Sentinel; n];
    for s in 0..n {
        battery[s] = battery_transition(residual[s], eh_draws[s], config.battery_cap[s]);
        if delivered[s] {
            g[s] = 0;
            x[s] = 0;
            obs_battery[s] = ObsBattery::Reported(residual[s]);
        } else {
            g[s] = (state.g[s] + 1).min(config.g_max);
            x[s] = (state.x[s] + action.mask[s] as u32).min(config.x_max);
        }
    }

    let mre: Vec<u32> = config
        .sensor_sets
        .iter()
        .map(|set| set.iter().map(|&s| battery[s]).min().unwrap())
        .collect();

    let next_state = EnvState { g: g.clone(), x: x.clone(), battery: battery.clone(), aoci: next_aoci };
    let next_obs = Observation { g, x, battery: obs_battery, aoci: next_aoci };
    Ok((
        next_state,
        StepOutcome { reward, next_obs, delivered, activated, csp_met, integrated, mre },
    ))
}

/// Initial state and observation: full batteries, everything else zero. The
/// initial observation reports every battery (not the sentinel).
pub fn reset(config: &NetworkConfig) -> Result<(EnvState, Observation), EnvError> {
    config.validate()?;
    let n = config.n();
    let state = EnvState {
        g: vec![0; n],
        x: vec![0; n],
        battery: config.battery_cap.clone(),
        aoci: 0,
    };
    let obs = Observation {
        g: vec![0; n],
        x: vec![0; n],
        battery: config.battery_cap.iter().map(|&c| ObsBattery::Reported(c)).collect(),
        aoci: 0,
    };
    Ok((state, obs))
}

/// Sampling environment: owns the state and a seeded generator.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: NetworkConfig,
    pub state: EnvState,
    rng: ChaCha12Rng,
    seed: u64,
}

impl Env {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, EnvError> {
        let (state, _) = reset(&config)?;
        Ok(Env { config, state, rng: ChaCha12Rng::seed_from_u64(seed), seed })
    }

    /// Restarts the episode and the random stream.
    pub fn reset(&mut self) -> Observation {
        let (state, obs) = reset(&self.config).expect("config was validated in new()");
        self.state = state;
        self.rng = ChaCha12Rng::seed_from_u64(self.seed);
        obs
    }

    /// Draws the slot's randomness (successes for sensors 0..N in order, then
    /// arrivals for sensors 0..N in order) and applies `transition`.
    pub fn step(&mut self, action: &ValidAction) -> Result<StepOutcome, EnvError> {
        let n = self.config.n();
        let mut success = vec![false; n];
        for s in 0..n {
            success[s] = self.rng.gen::<f64>() < 1.0 - self.config.failure_prob[s];
        }
        let mut eh = vec![false; n];
        for s in 0..n {
            eh[s] = self.rng.gen::<f64>() < self.config.eh_prob[s];
        }
        let (next_state, outcome) = transition(&self.state, action, &success, &eh, &self.config)?;
        self.state = next_state;
        Ok(outcome)
    }
}

/// The default scenario: `k` CSPs, four sensors each, failure probabilities
/// {0.05, 0.10, 0.15, 0.20}, importances {0.4, 0.6, 0.8, 1.0} against a
/// threshold of 1.0, EH probability 0.2, battery capacity 20, two channels
/// per set, caps G_max = X_max = 2*AoCI_max = 4NK.
pub fn default_config(k: usize) -> NetworkConfig {
    let n = 4 * k;
    let caps = (4 * n * k) as u32;
    NetworkConfig {
        k,
        sensor_sets: (0..k).map(|i| (4 * i..4 * i + 4).collect()).collect(),
        m: 2,
        failure_prob: (0..k).flat_map(|_| [0.05, 0.10, 0.15, 0.20]).collect(),
        eh_prob: vec![0.2; n],
        battery_cap: vec![20; n],
        importance: (0..k).flat_map(|_| [0.4, 0.6, 0.8, 1.0]).collect(),
        threshold: vec![1.0; k],
        g_max: caps,
        x_max: caps,
        aoci_max: caps / 2,
        discount: 0.99,
    }
}
