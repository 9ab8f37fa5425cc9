//! Deterministic scenario construction: JSON config schema, the seeded
//! sign generator, and path/partition/function builders.
//!
//! Randomness appears only here, always derived from the config seed; the
//! mathematical core is randomness-free. Identical `(config, seed)` inputs
//! build identical fixtures bit for bit.

use crate::calculus::{fixture, SmoothFunction};
use crate::error::{Error, Result};
use crate::partition::{PartitionSequence, SequenceKind};
use crate::path::{CadlagPath, PathJson};
use crate::space::{BilinearMap, MatrixNorm, NormKind, NormedSpace};
use serde::{Deserialize, Serialize};

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then mix with
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
/// z *= 0x94D049BB133111EB; z ^= z >> 31`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// +1.0 or -1.0 from the top bit.
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Space descriptor in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    #[serde(default = "default_norm")]
    pub norm: String,
}

fn default_norm() -> String {
    "l2".into()
}

impl SpaceSpec {
    pub fn build(&self) -> Result<NormedSpace> {
        let kind = match self.norm.as_str() {
            "l1" => NormKind::L1,
            "l2" => NormKind::L2,
            "linf" => NormKind::LInf,
            other => return Err(Error::Invalid(format!("unknown norm '{other}'"))),
        };
        NormedSpace::new(self.dim, kind)
    }
}

/// Path fixtures buildable from a config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathSpec {
    /// `steps` increments of `+-sqrt(T/steps)` with seeded signs, stored as
    /// jumps. Aligned walks step at `i T / steps` (dyadic times when `steps`
    /// is a power of two); unaligned walks step at midpoints.
    ScaledWalk {
        steps: usize,
        #[serde(default = "default_true")]
        aligned: bool,
    },
    /// Explicit jump list over a constant-zero skeleton.
    PureJump { jumps: Vec<Vec<f64>> },
    /// Named continuous skeletons: "linear", "zigzag", "sine".
    Smooth {
        id: String,
        #[serde(default = "default_breakpoints")]
        breakpoints: usize,
    },
    /// Pointwise sum of parts.
    Composite { parts: Vec<PathSpec> },
    /// Full serialized path.
    Explicit { path: PathJson },
}

fn default_true() -> bool {
    true
}

fn default_breakpoints() -> usize {
    33
}

/// Build a path fixture; deterministic for `(spec, seed)`.
pub fn build_path(
    spec: &PathSpec,
    space: NormedSpace,
    horizon: f64,
    seed: u64,
) -> Result<CadlagPath> {
    match spec {
        PathSpec::ScaledWalk { steps, aligned } => {
            if *steps == 0 || (*aligned && !steps.is_power_of_two()) {
                return Err(Error::Invalid(
                    "aligned scaled walks need a power-of-two step count".into(),
                ));
            }
            let n = *steps;
            let size = (horizon / n as f64).sqrt();
            let mut rng = SplitMix64::new(seed);
            let mut jumps = Vec::with_capacity(n);
            for i in 1..=n {
                let t = if *aligned {
                    horizon * i as f64 / n as f64
                } else {
                    horizon * (i as f64 - 0.5) / n as f64
                };
                let mut delta = vec![0.0; space.dim()];
                for d in delta.iter_mut() {
                    *d = rng.next_sign() * size;
                }
                jumps.push((t, delta));
            }
            CadlagPath::pure_jump(space, horizon, jumps)
        }
        PathSpec::PureJump { jumps } => {
            let parsed: Vec<(f64, Vec<f64>)> = jumps
                .iter()
                .map(|row| {
                    if row.len() != space.dim() + 1 {
                        return Err(Error::Invalid("jump rows must be [time, coords...]".into()));
                    }
                    Ok((row[0], row[1..].to_vec()))
                })
                .collect::<Result<_>>()?;
            CadlagPath::pure_jump(space, horizon, parsed)
        }
        PathSpec::Smooth { id, breakpoints } => {
            let k = (*breakpoints).max(2);
            let d = space.dim();
            let val = |j: usize, t: f64| -> f64 {
                match id.as_str() {
                    "linear" => (j + 1) as f64 * t / d as f64,
                    "zigzag" => {
                        // triangle wave of period T/4 and unit slope
                        let period = horizon / 4.0;
                        let phase = (t / period).rem_euclid(2.0);
                        let tri = if phase < 1.0 { phase } else { 2.0 - phase };
                        (j + 1) as f64 * tri * period / d as f64
                    }
                    "sine" => (2.0 * std::f64::consts::PI * t / horizon + j as f64).sin(),
                    _ => f64::NAN,
                }
            };
            if !matches!(id.as_str(), "linear" | "zigzag" | "sine") {
                return Err(Error::Invalid(format!("unknown smooth skeleton '{id}'")));
            }
            let skeleton: Vec<(f64, Vec<f64>)> = (0..k)
                .map(|i| {
                    let t = horizon * i as f64 / (k - 1) as f64;
                    (t, (0..d).map(|j| val(j, t)).collect())
                })
                .collect();
            CadlagPath::piecewise_linear(space, horizon, skeleton, vec![])
        }
        PathSpec::Composite { parts } => {
            if parts.is_empty() {
                return Err(Error::Invalid("composite path needs parts".into()));
            }
            let mut acc = build_path(&parts[0], space, horizon, seed)?;
            for (i, part) in parts.iter().enumerate().skip(1) {
                let p = build_path(part, space, horizon, seed.wrapping_add(i as u64))?;
                acc = acc.add(&p)?;
            }
            Ok(acc)
        }
        PathSpec::Explicit { path } => {
            let pageant: CadlagPath = path.clone().try_into()?;
            if pageant.space() != space || pageant.horizon() != horizon {
                return Err(Error::Invalid(
                    "explicit path space/horizon differ from the scenario".into(),
                ));
            }
            Ok(pageant)
        }
    }
}

/// Partition generator descriptor: `{kind, params, horizon}` lives at the
/// scenario level, so only the kind and parameters appear here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PartitionSpec {
    Dyadic,
    Integer,
    Uniform { base: usize, growth: usize },
    OscillationControlled { eps0: f64, decay: f64 },
    Custom { partitions: Vec<Vec<f64>> },
}

pub fn build_sequence(
    spec: &PartitionSpec,
    horizon: f64,
    path: &CadlagPath,
) -> Result<PartitionSequence> {
    let kind = match spec {
        PartitionSpec::Dyadic => SequenceKind::Dyadic,
        PartitionSpec::Integer => SequenceKind::Integer,
        PartitionSpec::Uniform { base, growth } => SequenceKind::Uniform {
            base: *base,
            growth: *growth,
        },
        PartitionSpec::OscillationControlled { eps0, decay } => {
            SequenceKind::OscillationControlled {
                path: path.clone(),
                eps0: *eps0,
                decay: *decay,
            }
        }
        PartitionSpec::Custom { partitions } => {
            let list = partitions
                .iter()
                .map(|pts| crate::partition::Partition::new(pts.clone()))
                .collect::<Result<Vec<_>>>()?;
            SequenceKind::Custom(list)
        }
    };
    PartitionSequence::new(horizon, kind)
}

/// Weight-path descriptor for the weighted-sum check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum XiSpec {
    Constant {
        value: f64,
    },
    /// Left-closed steps `sum 1_{[tau_{i-1}, tau_i)} a_i`.
    Step {
        taus: Vec<f64>,
        values: Vec<f64>,
    },
    /// `xi(s) = s`.
    Ramp,
}

pub fn build_xi(spec: &XiSpec, horizon: f64) -> Result<CadlagPath> {
    let scalar = NormedSpace::scalar();
    match spec {
        XiSpec::Constant { value } => CadlagPath::constant(scalar, horizon, vec![*value]),
        XiSpec::Step { taus, values } => {
            if taus.len() != values.len() + 1 {
                return Err(Error::Invalid("need len(taus) == len(values) + 1".into()));
            }
            let mut skeleton: Vec<(f64, Vec<f64>)> = taus
                .iter()
                .zip(values.iter().chain(values.last()))
                .map(|(&t, &v)| (t, vec![v]))
                .collect();
            if skeleton.last().map(|p| p.0) != Some(horizon) {
                skeleton.push((horizon, vec![*values.last().unwrap()]));
            }
            CadlagPath::new(
                scalar,
                horizon,
                skeleton,
                crate::path::Interpolation::ConstantRight,
                vec![],
            )
        }
        XiSpec::Ramp => CadlagPath::piecewise_linear(
            scalar,
            horizon,
            vec![(0.0, vec![0.0]), (horizon, vec![horizon])],
            vec![],
        ),
    }
}

/// Tolerance overrides; anything unset falls back to the crate defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Tolerances {
    /// Final-residual threshold applied by pass/fail subcommands.
    pub residual: Option<f64>,
}

impl Tolerances {
    pub fn residual_or(&self, default: f64) -> f64 {
        self.residual.unwrap_or(default)
    }
}

/// One scenario document (JSON). Referenced ids must resolve at build time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    pub space: SpaceSpec,
    pub path: PathSpec,
    #[serde(default)]
    pub a_path: Option<PathSpec>,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub function: Option<String>,
    #[serde(default)]
    pub dim_a: Option<usize>,
    #[serde(default)]
    pub bilinear: Option<String>,
    #[serde(default)]
    pub xi: Option<XiSpec>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    pub n_max: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Everything a subcommand needs, built from a config.
pub struct BuiltScenario {
    pub config: ScenarioConfig,
    pub space: NormedSpace,
    pub x: CadlagPath,
    pub a: Option<CadlagPath>,
    pub seq: PartitionSequence,
    pub function: Option<SmoothFunction>,
    pub bilinear: BilinearMap,
    pub xi: Option<CadlagPath>,
}

pub fn build(config: ScenarioConfig) -> Result<BuiltScenario> {
    if config.horizon <= 0.0 {
        return Err(Error::Invalid("horizon must be positive".into()));
    }
    let space = config.space.build()?;
    let x = build_path(&config.path, space, config.horizon, config.seed)?;
    let a = config
        .a_path
        .as_ref()
        .map(|spec| {
            let a_space = NormedSpace::l2(config.dim_a.unwrap_or(1));
            build_path(
                spec,
                a_space,
                config.horizon,
                config.seed.wrapping_add(0x5a),
            )
        })
        .transpose()?;
    let seq = build_sequence(&config.partition, config.horizon, &x)?;
    let function = config
        .function
        .as_deref()
        .map(|id| fixture(id, config.dim_a.unwrap_or(1), space.dim()))
        .transpose()?;
    let bilinear = match config.bilinear.as_deref().unwrap_or("inner") {
        "inner" => BilinearMap::inner(space),
        "outer" => BilinearMap::outer(space, space, MatrixNorm::Frobenius),
        other => return Err(Error::Invalid(format!("unknown bilinear kind '{other}'"))),
    };
    let xi = config
        .xi
        .as_ref()
        .map(|s| build_xi(s, config.horizon))
        .transpose()?;
    Ok(BuiltScenario {
        config,
        space,
        x,
        a,
        seq,
        function,
        bilinear,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn scaled_walk_squares_sum_to_horizon() {
        let space = NormedSpace::scalar();
        let spec = PathSpec::ScaledWalk {
            steps: 16,
            aligned: true,
        };
        let x = build_path(&spec, space, 1.0, 42).unwrap();
        assert_eq!(x.jumps().len(), 16);
        let sum: f64 = x.jumps().iter().map(|j| j.delta[0] * j.delta[0]).sum();
        assert_eq!(sum, 1.0, "exact by construction for even powers of two");
    }

    #[test]
    fn scaled_walk_is_reproducible() {
        let space = NormedSpace::scalar();
        let spec = PathSpec::ScaledWalk {
            steps: 64,
            aligned: true,
        };
        let x1 = build_path(&spec, space, 1.0, 7).unwrap();
        let x2 = build_path(&spec, space, 1.0, 7).unwrap();
        assert_eq!(x1, x2);
        let x3 = build_path(&spec, space, 1.0, 8).unwrap();
        assert_ne!(x1, x3);
    }

    #[test]
    fn unaligned_walk_avoids_dyadic_times() {
        let space = NormedSpace::scalar();
        let spec = PathSpec::ScaledWalk {
            steps: 8,
            aligned: false,
        };
        let x = build_path(&spec, space, 1.0, 1).unwrap();
        for j in x.jumps() {
            assert_ne!(j.time * 16.0, (j.time * 16.0).round() * 2.0);
        }
    }

    #[test]
    fn pure_jump_spec_realizes_indicator_fixtures() {
        let space = NormedSpace::scalar();
        // unit jump at time 1
        let spec = PathSpec::PureJump {
            jumps: vec![vec![1.0, 1.0]],
        };
        let x = build_path(&spec, space, 2.0, 0).unwrap();
        assert_eq!(
            x,
            CadlagPath::indicator(space, 2.0, 1.0, vec![1.0]).unwrap()
        );
        // half-time jump
        let spec = PathSpec::PureJump {
            jumps: vec![vec![0.5, 1.0]],
        };
        let x = build_path(&spec, space, 2.0, 0).unwrap();
        assert_eq!(
            x,
            CadlagPath::indicator(space, 2.0, 0.5, vec![1.0]).unwrap()
        );
    }

    #[test]
    fn composite_sums_parts() {
        let space = NormedSpace::scalar();
        let spec = PathSpec::Composite {
            parts: vec![
                PathSpec::Smooth {
                    id: "linear".into(),
                    breakpoints: 2,
                },
                PathSpec::PureJump {
                    jumps: vec![vec![0.5, 2.0]],
                },
            ],
        };
        let x = build_path(&spec, space, 1.0, 0).unwrap();
        assert_eq!(x.value(0.75).unwrap().coords(), &[2.75]);
    }

    #[test]
    fn config_round_trips_through_json() {
        let doc = r#"{
            "id": "demo",
            "seed": 42,
            "horizon": 1.0,
            "space": {"dim": 1},
            "path": {"kind": "scaled-walk", "steps": 256},
            "partition": {"kind": "dyadic"},
            "function": "quadratic",
            "bilinear": "inner",
            "n_max": 10
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(doc).unwrap();
        let built = build(cfg).unwrap();
        assert_eq!(built.x.jumps().len(), 256);
        assert!(built.function.is_some());
    }

    #[test]
    fn step_xi_builder_places_left_closed_steps() {
        let xi = build_xi(
            &XiSpec::Step {
                taus: vec![0.0, 0.25, 1.0],
                values: vec![1.0, -2.0],
            },
            1.0,
        )
        .unwrap();
        assert_eq!(xi.value(0.0).unwrap().coords(), &[1.0]);
        assert_eq!(xi.value(0.25).unwrap().coords(), &[-2.0]);
        assert_eq!(xi.left_limit(0.25).unwrap().coords(), &[1.0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let space = NormedSpace::scalar();
        assert!(build_path(
            &PathSpec::ScaledWalk {
                steps: 12,
                aligned: true
            },
            space,
            1.0,
            0
        )
        .is_err());
        assert!(build_path(
            &PathSpec::Smooth {
                id: "nope".into(),
                breakpoints: 4
            },
            space,
            1.0,
            0
        )
        .is_err());
    }
}
