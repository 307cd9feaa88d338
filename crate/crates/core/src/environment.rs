//! Deterministic time-stepped world: networks with coverage and load, a
//! moving terminal, applications with QoS needs, and providers with prices.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{AppClass, ContextSnapshot, HandoffConstraint, VarId};
use crate::error::{HandoffError, Result};

/// Time-varying network load in [0,1]. Both variants are deterministic in t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoadProcess {
    /// mean + amplitude * sin(2*pi*t / period), clamped to [0,1].
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// Seeded value noise: uniform samples in [-1,1] at multiples of `period`,
    /// linearly interpolated between them.
    Random {
        mean: f64,
        amplitude: f64,
        period: f64,
        seed: u64,
    },
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn noise_sample(seed: u64, net_tag: u64, k: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(net_tag ^ splitmix64(k)));
    // uniform in [-1, 1]
    (h as f64 / u64::MAX as f64) * 2.0 - 1.0
}

fn str_tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

/// An access network: coverage disc, log-distance propagation parameters,
/// capacity, load process, and pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub id: String,
    pub provider_id: String,
    pub technology: String,
    /// Coverage disc center, meters.
    pub coverage_center: [f64; 2],
    /// Coverage disc radius, meters.
    pub coverage_radius: f64,
    /// Received power at the reference distance, dB.
    pub ref_power: f64,
    /// Reference distance d0, meters.
    pub ref_distance: f64,
    pub path_loss_exponent: f64,
    /// Nominal bandwidth, Mb/s.
    pub base_bandwidth: f64,
    /// Nominal one-way delay, seconds.
    pub base_delay: f64,
    pub load: LoadProcess,
    /// Connection price, currency per unit.
    pub price: f64,
    /// Terminal ids allowed to attach.
    pub authorized_terminals: BTreeSet<String>,
    /// Static per-network context values (e.g. AL), raw units.
    #[serde(default)]
    pub extra: BTreeMap<VarId, f64>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.coverage_radius <= 0.0 {
            return Err(HandoffError::Config(format!(
                "network {}: coverage_radius must be > 0",
                self.id
            )));
        }
        if self.ref_distance <= 0.0 || self.path_loss_exponent <= 0.0 {
            return Err(HandoffError::Config(format!(
                "network {}: ref_distance and path_loss_exponent must be > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Mobile terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalState {
    pub id: String,
    /// Position, meters.
    pub position: [f64; 2],
    /// Velocity, m/s.
    pub velocity: [f64; 2],
    /// Battery load, fraction of capacity in [0,1].
    pub battery_load: f64,
    /// Battery drain, fraction per second.
    pub energy_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub app_type: AppClass,
    #[serde(default)]
    pub constraints: Vec<HandoffConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    #[serde(default = "default_price_multiplier")]
    pub price_multiplier: f64,
}

fn default_price_multiplier() -> f64 {
    1.0
}

/// Terminal trajectory over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MobilityModel {
    /// Keep the initial velocity for the whole run.
    Linear,
    /// Visit the waypoints in order at constant speed, then stop.
    Waypoints { points: Vec<[f64; 2]>, speed: f64 },
    /// Constant speed, heading resampled every `turn_interval` seconds from
    /// the scenario RNG.
    RandomWalk { speed: f64, turn_interval: f64 },
}

/// The five heterogeneity dimensions instantiated: providers, applications,
/// networks, terminal, and mobility, plus the time grid and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration: f64,
    pub dt: f64,
    pub networks: Vec<NetworkSpec>,
    pub terminal: TerminalState,
    pub mobility: MobilityModel,
    pub applications: Vec<ApplicationSpec>,
    pub providers: BTreeMap<String, ProviderSpec>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(HandoffError::Config("dt must be > 0".to_string()));
        }
        if self.duration < self.dt {
            return Err(HandoffError::Config("duration must be >= dt".to_string()));
        }
        if self.networks.is_empty() {
            return Err(HandoffError::Config(
                "scenario needs at least one network".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.terminal.battery_load) {
            return Err(HandoffError::Config(
                "battery_load must be in [0,1]".to_string(),
            ));
        }
        for n in &self.networks {
            n.validate()?;
            if !self.providers.contains_key(&n.provider_id) {
                return Err(HandoffError::Config(format!(
                    "network {} references unknown provider {}",
                    n.id, n.provider_id
                )));
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        (self.duration / self.dt).floor() as u64
    }

    pub fn network(&self, id: &str) -> Option<&NetworkSpec> {
        self.networks.iter().find(|n| n.id == id)
    }

    /// Price after the provider multiplier.
    pub fn effective_price(&self, net: &NetworkSpec) -> f64 {
        let mult = self
            .providers
            .get(&net.provider_id)
            .map_or(1.0, |p| p.price_multiplier);
        net.price * mult
    }
}

/// RSS at `pos` from the log-distance path-loss model, or None when outside
/// the coverage disc.
pub fn link_quality(net: &NetworkSpec, pos: [f64; 2]) -> Option<f64> {
    let d = distance(pos, net.coverage_center);
    if d > net.coverage_radius {
        return None;
    }
    let d_eff = d.max(net.ref_distance);
    Some(net.ref_power - 10.0 * net.path_loss_exponent * (d_eff / net.ref_distance).log10())
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Network load at time t, in [0,1].
pub fn sample_load(net: &NetworkSpec, t: f64) -> f64 {
    let raw = match &net.load {
        LoadProcess::Sinusoid {
            mean,
            amplitude,
            period,
        } => mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
        LoadProcess::Random {
            mean,
            amplitude,
            period,
            seed,
        } => {
            let tag = str_tag(&net.id);
            let k = (t / period).floor();
            let frac = t / period - k;
            let a = noise_sample(*seed, tag, k as u64);
            let b = noise_sample(*seed, tag, k as u64 + 1);
            mean + amplitude * (a + (b - a) * frac)
        }
    };
    raw.clamp(0.0, 1.0)
}

/// Mutable world advanced by [`World::step`].
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: ScenarioSpec,
    pub terminal: TerminalState,
    pub time: f64,
    pub step_index: u64,
    rng: ChaCha8Rng,
    waypoint_index: usize,
    next_turn_time: f64,
}

impl World {
    pub fn new(scenario: ScenarioSpec) -> Result<Self> {
        scenario.validate()?;
        let terminal = scenario.terminal.clone();
        let rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        Ok(World {
            scenario,
            terminal,
            time: 0.0,
            step_index: 0,
            rng,
            waypoint_index: 0,
            next_turn_time: 0.0,
        })
    }

    /// Advance one fixed time step and observe the terminal-side context.
    /// Waypoint turning is applied before the position update; battery floors
    /// at zero.
    pub fn step(&mut self) -> ContextSnapshot {
        let dt = self.scenario.dt;
        self.apply_mobility(dt);
        self.terminal.position[0] += self.terminal.velocity[0] * dt;
        self.terminal.position[1] += self.terminal.velocity[1] * dt;
        self.terminal.battery_load =
            (self.terminal.battery_load - self.terminal.energy_rate * dt).max(0.0);
        self.step_index += 1;
        self.time = self.step_index as f64 * dt;
        self.observe()
    }

    fn apply_mobility(&mut self, dt: f64) {
        let mobility = self.scenario.mobility.clone();
        match mobility {
            MobilityModel::Linear => {}
            MobilityModel::Waypoints { points, speed } => {
                loop {
                    let Some(goal) = points.get(self.waypoint_index) else {
                        self.terminal.velocity = [0.0, 0.0];
                        return;
                    };
                    let d = distance(self.terminal.position, *goal);
                    if d <= speed * dt {
                        // reached within this step, aim at the next one
                        self.waypoint_index += 1;
                        continue;
                    }
                    self.terminal.velocity = [
                        (goal[0] - self.terminal.position[0]) / d * speed,
                        (goal[1] - self.terminal.position[1]) / d * speed,
                    ];
                    return;
                }
            }
            MobilityModel::RandomWalk {
                speed,
                turn_interval,
            } => {
                if self.time >= self.next_turn_time {
                    let heading: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
                    self.terminal.velocity = [speed * heading.cos(), speed * heading.sin()];
                    self.next_turn_time = self.time + turn_interval;
                }
            }
        }
    }

    /// Terminal-side snapshot at the current time (battery, speed, drain
    /// rate). Per-network variables are merged in by [`candidate_context`].
    pub fn observe(&self) -> ContextSnapshot {
        let mut s = ContextSnapshot::new(self.time);
        let v = self.terminal.velocity;
        s.set(VarId::new("BL"), self.terminal.battery_load);
        s.set(VarId::new("Vel"), (v[0] * v[0] + v[1] * v[1]).sqrt());
        s.set(VarId::new("ECR"), self.terminal.energy_rate);
        s
    }

    /// Networks whose coverage disc contains the terminal, with their RSS,
    /// sorted by id.
    pub fn reachable_networks(&self) -> Vec<(&NetworkSpec, f64)> {
        let mut out: Vec<_> = self
            .scenario
            .networks
            .iter()
            .filter_map(|n| link_quality(n, self.terminal.position).map(|rss| (n, rss)))
            .collect();
        out.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        out
    }
}

/// Per-candidate context: the terminal snapshot plus this network's observed
/// variables. Effective delay grows with load (`ND = base * (1 + NL)`) and
/// effective bandwidth shrinks with it (`NBW = base * (1 - NL)`).
pub fn candidate_context(
    base: &ContextSnapshot,
    scenario: &ScenarioSpec,
    net: &NetworkSpec,
    rss: f64,
    terminal_pos: [f64; 2],
) -> ContextSnapshot {
    let mut s = base.clone();
    let nl = sample_load(net, base.time);
    s.set(VarId::new("RSS"), rss);
    s.set(VarId::new("Dist"), distance(terminal_pos, net.coverage_center));
    s.set(VarId::new("NL"), nl);
    s.set(VarId::new("NBW"), net.base_bandwidth * (1.0 - nl));
    s.set(VarId::new("ND"), net.base_delay * (1.0 + nl));
    s.set(VarId::new("price"), scenario.effective_price(net));
    for (id, value) in &net.extra {
        s.set(id.clone(), *value);
    }
    s
}
