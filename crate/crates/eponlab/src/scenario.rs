//! Flat `key = value` scenario files describing one system setup plus a
//! load sweep grid, with defaults matching the reference 16-ONU gigabit
//! deployment.

use std::collections::HashMap;

use crate::dimensioning::{solve_wmax_for_cycle, SystemConfig};
use crate::error::{Error, Result};
use crate::sim::{Fidelity, SimConfig};
use crate::traffic::{Normalization, PerClass, TrafficProfile};

/// One fully resolved experiment description.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: SystemConfig,
    pub mix: PerClass<f64>,
    pub weights: PerClass<f64>,
    pub normalization: Normalization,
    pub load_start: f64,
    pub load_end: f64,
    pub load_steps: usize,
    pub seed: u64,
    pub sim_duration: f64,
    pub warmup: f64,
    pub fidelity: Fidelity,
}

const DEFAULT_N_ONUS: usize = 16;
const DEFAULT_LINE_RATE: f64 = 1e9;
const DEFAULT_GUARD: f64 = 5e-6;
const DEFAULT_T_MAX: f64 = 2e-3;
const DEFAULT_FRAME_BYTES: u32 = 1500;
const DEFAULT_LOAD_START: f64 = 0.05;
const DEFAULT_LOAD_END: f64 = 0.4;
const DEFAULT_LOAD_STEPS: usize = 8;
const DEFAULT_SEED: u64 = 1;
const DEFAULT_SIM_DURATION: f64 = 20.0;
const DEFAULT_WARMUP: f64 = 2.0;
const DEFAULT_BATCH_COUNT: usize = 10;

impl Scenario {
    /// The reference deployment with a uniform class mix and the standard
    /// 0.05..0.4 load grid.
    pub fn default_scenario() -> Self {
        parse_scenario("").expect("defaults are valid")
    }

    /// Grid loads in ascending order, evenly spaced over
    /// [load_start, load_end].
    pub fn loads(&self) -> Vec<f64> {
        if self.load_steps == 1 {
            return vec![self.load_start];
        }
        let span = self.load_end - self.load_start;
        (0..self.load_steps)
            .map(|i| self.load_start + span * i as f64 / (self.load_steps - 1) as f64)
            .collect()
    }

    /// Traffic profile for one grid load.
    pub fn profile_at(&self, load: f64) -> Result<TrafficProfile> {
        TrafficProfile::new(self.mix, self.weights, load, self.normalization)
    }

    /// Simulation settings for grid point `index`, seeded independently
    /// per point.
    pub fn sim_config(&self, index: usize) -> Result<SimConfig> {
        SimConfig::new(
            self.seed.wrapping_add(index as u64),
            self.sim_duration,
            self.warmup,
            self.fidelity,
            DEFAULT_BATCH_COUNT,
        )
    }
}

fn parse_number(raw: &str, line: usize) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got `{raw}`"),
    })
}

fn parse_integer(raw: &str, line: usize) -> Result<u64> {
    raw.parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a non-negative integer, got `{raw}`"),
    })
}

const KEYS: [&str; 20] = [
    "n_onus",
    "line_rate_bps",
    "guard_s",
    "t_max_s",
    "w_max_bytes",
    "frame_bytes",
    "mix_ef",
    "mix_af",
    "mix_be",
    "delta_ef",
    "delta_af",
    "delta_be",
    "normalization",
    "load_start",
    "load_end",
    "load_steps",
    "seed",
    "sim_duration_s",
    "warmup_s",
    "fidelity",
];

/// Parses scenario text. Lines hold `key = value` pairs; `#` starts a
/// comment; blank lines are skipped. Missing keys fall back to the
/// reference deployment defaults. Exactly one of `t_max_s` and
/// `w_max_bytes` may appear.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut seen: HashMap<&str, (String, usize)> = HashMap::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key_raw, value_raw)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key_raw.trim();
        let value = value_raw.trim();
        let Some(&canonical) = KEYS.iter().find(|&&k| k == key) else {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        };
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("key `{key}` has no value"),
            });
        }
        if seen.contains_key(canonical) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        seen.insert(canonical, (value.to_string(), line));
    }

    if let (Some((_, t_line)), Some((_, w_line))) =
        (seen.get("t_max_s"), seen.get("w_max_bytes"))
    {
        return Err(Error::Parse {
            line: (*t_line).max(*w_line),
            message: "t_max_s and w_max_bytes are mutually exclusive".into(),
        });
    }

    let lookup = |key: &str| seen.get(key).cloned();
    let number_or = |key: &str, default: f64| -> Result<(f64, usize)> {
        match lookup(key) {
            Some((raw, line)) => Ok((parse_number(&raw, line)?, line)),
            None => Ok((default, 0)),
        }
    };

    let n_onus = match lookup("n_onus") {
        Some((raw, line)) => {
            let value = parse_integer(&raw, line)?;
            if value == 0 {
                return Err(Error::Parse {
                    line,
                    message: "n_onus must be at least 1".into(),
                });
            }
            value as usize
        }
        None => DEFAULT_N_ONUS,
    };
    let (line_rate, _) = number_or("line_rate_bps", DEFAULT_LINE_RATE)?;
    let (guard, _) = number_or("guard_s", DEFAULT_GUARD)?;
    let frame_bytes = match lookup("frame_bytes") {
        Some((raw, line)) => {
            let value = parse_integer(&raw, line)?;
            u32::try_from(value).map_err(|_| Error::Parse {
                line,
                message: format!("frame_bytes {value} is out of range"),
            })?
        }
        None => DEFAULT_FRAME_BYTES,
    };

    let w_max = match lookup("w_max_bytes") {
        Some((raw, line)) => parse_integer(&raw, line)?,
        None => {
            let (t_max, _) = number_or("t_max_s", DEFAULT_T_MAX)?;
            solve_wmax_for_cycle(n_onus, line_rate, guard, t_max)?
        }
    };
    let config = SystemConfig::homogeneous(n_onus, line_rate, guard, frame_bytes, w_max)?;

    let third = 1.0 / 3.0;
    let (mix_ef, l1) = number_or("mix_ef", third)?;
    let (mix_af, l2) = number_or("mix_af", third)?;
    let (mix_be, l3) = number_or("mix_be", third)?;
    let mix = PerClass::new(mix_ef, mix_af, mix_be);
    let mix_sum = mix_ef + mix_af + mix_be;
    if (mix_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parse {
            line: l1.max(l2).max(l3),
            message: format!("mix fractions sum to {mix_sum}, expected 1"),
        });
    }

    let (delta_ef, d1) = number_or("delta_ef", 0.5)?;
    let (delta_af, d2) = number_or("delta_af", 0.3)?;
    let (delta_be, d3) = number_or("delta_be", 0.2)?;
    let weights = PerClass::new(delta_ef, delta_af, delta_be);
    let weight_sum = delta_ef + delta_af + delta_be;
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parse {
            line: d1.max(d2).max(d3),
            message: format!("delta weights sum to {weight_sum}, expected 1"),
        });
    }

    let normalization = match lookup("normalization") {
        Some((raw, line)) => match raw.as_str() {
            "channel" => Normalization::ChannelCapacity,
            "guaranteed" => Normalization::GuaranteedBandwidth,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "normalization must be `channel` or `guaranteed`, got `{other}`"
                    ),
                })
            }
        },
        None => Normalization::ChannelCapacity,
    };

    let (load_start, ls_line) = number_or("load_start", DEFAULT_LOAD_START)?;
    let (load_end, le_line) = number_or("load_end", DEFAULT_LOAD_END)?;
    if !(0.0..1.0).contains(&load_start) || !(0.0..1.0).contains(&load_end) {
        return Err(Error::Parse {
            line: ls_line.max(le_line),
            message: format!("loads must lie in [0, 1), got {load_start}..{load_end}"),
        });
    }
    if load_start > load_end {
        return Err(Error::Parse {
            line: ls_line.max(le_line),
            message: format!("load_start {load_start} exceeds load_end {load_end}"),
        });
    }
    let load_steps = match lookup("load_steps") {
        Some((raw, line)) => {
            let value = parse_integer(&raw, line)?;
            if value == 0 {
                return Err(Error::Parse {
                    line,
                    message: "load_steps must be at least 1".into(),
                });
            }
            value as usize
        }
        None => DEFAULT_LOAD_STEPS,
    };

    let seed = match lookup("seed") {
        Some((raw, line)) => parse_integer(&raw, line)?,
        None => DEFAULT_SEED,
    };
    let (sim_duration, sd_line) = number_or("sim_duration_s", DEFAULT_SIM_DURATION)?;
    let (warmup, wu_line) = number_or("warmup_s", DEFAULT_WARMUP)?;
    if !(sim_duration > 0.0) || !sim_duration.is_finite() {
        return Err(Error::Parse {
            line: sd_line,
            message: format!("sim_duration_s must be positive, got {sim_duration}"),
        });
    }
    if !(0.0..sim_duration).contains(&warmup) {
        return Err(Error::Parse {
            line: sd_line.max(wu_line),
            message: format!(
                "warmup_s must lie in [0, sim_duration_s), got {warmup} vs {sim_duration}"
            ),
        });
    }

    let fidelity = match lookup("fidelity") {
        Some((raw, line)) => match raw.as_str() {
            "protocol" => Fidelity::Protocol,
            "queueing" => Fidelity::QueueingNetwork,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "fidelity must be `protocol` or `queueing`, got `{other}`"
                    ),
                })
            }
        },
        None => Fidelity::QueueingNetwork,
    };

    Ok(Scenario {
        config,
        mix,
        weights,
        normalization,
        load_start,
        load_end,
        load_steps,
        seed,
        sim_duration,
        warmup,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_text_yields_reference_defaults() {
        let scenario = parse_scenario("").unwrap();
        assert_eq!(scenario.config.n_onus, 16);
        assert_relative_eq!(scenario.config.line_rate, 1e9);
        assert_relative_eq!(scenario.config.guard, 5e-6);
        assert_eq!(scenario.config.frame_length, 1500);
        assert_eq!(scenario.config.w_max, vec![15000; 16]);
        assert_relative_eq!(scenario.mix.ef, 1.0 / 3.0);
        assert_relative_eq!(scenario.weights.ef, 0.5);
        assert_eq!(scenario.normalization, Normalization::ChannelCapacity);
        assert_eq!(scenario.load_steps, 8);
        assert_eq!(scenario.seed, 1);
        assert_eq!(scenario.fidelity, Fidelity::QueueingNetwork);
    }

    #[test]
    fn skewed_mix_parses() {
        let scenario =
            parse_scenario("mix_ef = 0.2\nmix_af = 0.3\nmix_be = 0.5\n").unwrap();
        assert_relative_eq!(scenario.mix.ef, 0.2);
        assert_relative_eq!(scenario.mix.af, 0.3);
        assert_relative_eq!(scenario.mix.be, 0.5);
    }

    #[test]
    fn mix_sum_violation_names_line() {
        let err = parse_scenario("mix_ef = 0.5\nmix_af = 0.6\nmix_be = 0.1\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("sum"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_scenario("n_onus = 8\nbogus_key = 3\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus_key"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_key_names_line() {
        let err = parse_scenario("seed = 1\n# comment\nseed = 2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn window_and_cycle_are_mutually_exclusive() {
        let err = parse_scenario("t_max_s = 2e-3\nw_max_bytes = 15000\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("mutually exclusive"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn explicit_window_skips_cycle_solve() {
        let scenario = parse_scenario("w_max_bytes = 3000\n").unwrap();
        assert_eq!(scenario.config.w_max, vec![3000; 16]);
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let text = "  # full-line comment\n\n  n_onus = 4   # trailing comment\n";
        let scenario = parse_scenario(text).unwrap();
        assert_eq!(scenario.config.n_onus, 4);
    }

    #[test]
    fn loads_linspace_covers_grid() {
        let scenario = Scenario::default_scenario();
        let loads = scenario.loads();
        assert_eq!(loads.len(), 8);
        assert_relative_eq!(loads[0], 0.05);
        assert_relative_eq!(loads[7], 0.4);
        assert_relative_eq!(loads[1] - loads[0], 0.05, max_relative = 1e-12);
    }

    #[test]
    fn single_step_grid_is_start_load() {
        let scenario = parse_scenario("load_start = 0.1\nload_end = 0.3\nload_steps = 1\n")
            .unwrap();
        assert_eq!(scenario.loads(), vec![0.1]);
    }

    #[test]
    fn per_point_seeds_differ() {
        let scenario = Scenario::default_scenario();
        let a = scenario.sim_config(0).unwrap();
        let b = scenario.sim_config(1).unwrap();
        assert_ne!(a.rng_seed, b.rng_seed);
        assert_eq!(a.rng_seed, scenario.seed);
    }

    #[test]
    fn bad_number_names_line() {
        let err = parse_scenario("guard_s = fast\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn invalid_fidelity_rejected() {
        assert!(parse_scenario("fidelity = exact\n").is_err());
        assert!(parse_scenario("fidelity = protocol\n")
            .map(|s| s.fidelity == Fidelity::Protocol)
            .unwrap());
    }

    #[test]
    fn load_bounds_enforced() {
        assert!(parse_scenario("load_end = 1.0\n").is_err());
        assert!(parse_scenario("load_start = 0.5\nload_end = 0.2\n").is_err());
    }
}
