//! Experiment configuration: line-oriented `key = value` with `#` comments.
//!
//! Numbers may be written as fractions (`epsilon = 1/7`). Unknown keys, repeated
//! keys and malformed values are errors.

use f2w_core::boundary::coarsest_scale;
use f2w_core::lattice::ScalingMatrix2;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {msg}")]
    Value { key: &'static str, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rate,
    Reconstruct,
    Compare,
    Verify,
    GramianDump,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rate => "rate",
            Mode::Reconstruct => "reconstruct",
            Mode::Compare => "compare",
            Mode::Verify => "verify",
            Mode::GramianDump => "gramian-dump",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        [Mode::Rate, Mode::Reconstruct, Mode::Compare, Mode::Verify, Mode::GramianDump]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Haar,
    Daubechies,
    /// Smooth non-orthogonal generators for arbitrary scaling matrices.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    F1,
    F2,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub family: Family,
    /// Vanishing moments.
    pub p: usize,
    pub boundary: bool,
    pub matrix: ScalingMatrix2,
    /// Support width of the generators.
    pub a: i64,
    pub j_min: u32,
    pub j_max: u32,
    pub epsilon: f64,
    pub theta_inv: f64,
    pub half_width: Option<(i64, i64)>,
    pub grid: usize,
    pub source: Source,
    pub refine_axes: bool,
    pub max_half_width: i64,
    pub seed: u64,
    pub tolerance: f64,
}

const KEYS: &[&str] = &[
    "mode",
    "family",
    "p",
    "boundary",
    "matrix",
    "a",
    "j_min",
    "j_max",
    "epsilon",
    "theta_inv",
    "half_width",
    "grid",
    "function",
    "samples_file",
    "refine_axes",
    "max_half_width",
    "seed",
    "tolerance",
];

fn number(key: &'static str, s: &str) -> Result<f64, ConfigError> {
    let bad = |m: String| ConfigError::Value { key, msg: m };
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad(format!("bad numerator in {s:?}")))?;
            let d: f64 = d.trim().parse().map_err(|_| bad(format!("bad denominator in {s:?}")))?;
            if d == 0.0 {
                return Err(bad("zero denominator".into()));
            }
            n / d
        }
        None => s.parse().map_err(|_| bad(format!("{s:?} is not a number")))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{s:?} is not finite")))
    }
}

fn integer<T: std::str::FromStr>(key: &'static str, s: &str) -> Result<T, ConfigError> {
    s.parse().map_err(|_| ConfigError::Value {
        key,
        msg: format!("{s:?} is not a valid integer"),
    })
}

fn boolean(key: &'static str, s: &str) -> Result<bool, ConfigError> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key,
            msg: format!("{s:?} is not a boolean"),
        }),
    }
}

fn parse_pairs(text: &str) -> Result<HashMap<String, String>, ConfigError> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            msg: format!("expected `key = value`, found {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if v.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: format!("empty value for `{k}`"),
            });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: format!("repeated key `{k}`"),
            });
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses and validates; relative sample-file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let kv = parse_pairs(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);

        let mode = match get("mode") {
            Some(s) => Some(Mode::parse(s).ok_or_else(|| ConfigError::Value {
                key: "mode",
                msg: format!("unknown mode {s:?}"),
            })?),
            None => None,
        };
        let family = match get("family").unwrap_or("haar") {
            "haar" => Family::Haar,
            "daubechies" => Family::Daubechies,
            "synthetic" => Family::Synthetic,
            s => {
                return Err(ConfigError::Value {
                    key: "family",
                    msg: format!("unknown family {s:?}"),
                })
            }
        };
        let p = match (family, get("p")) {
            (Family::Haar, None) => 1,
            (Family::Haar, Some(s)) => {
                let p: usize = integer("p", s)?;
                if p != 1 {
                    return Err(ConfigError::Value {
                        key: "p",
                        msg: "haar has one vanishing moment".into(),
                    });
                }
                1
            }
            (Family::Daubechies, None) => 2,
            (_, Some(s)) => integer("p", s)?,
            (Family::Synthetic, None) => 1,
        };
        if p == 0 || p > 10 {
            return Err(ConfigError::Value {
                key: "p",
                msg: format!("{p} outside 1..=10"),
            });
        }
        let boundary = get("boundary").map(|s| boolean("boundary", s)).transpose()?.unwrap_or(false);
        let matrix = match get("matrix") {
            None => ScalingMatrix2::dyadic(),
            Some(s) => {
                let e: Vec<i64> = s
                    .split_whitespace()
                    .map(|t| integer("matrix", t))
                    .collect::<Result<_, _>>()?;
                if e.len() != 4 {
                    return Err(ConfigError::Value {
                        key: "matrix",
                        msg: "expected four entries `l1 l2 l3 l4`".into(),
                    });
                }
                ScalingMatrix2::new(e[0], e[1], e[2], e[3]).map_err(|err| ConfigError::Value {
                    key: "matrix",
                    msg: err.to_string(),
                })?
            }
        };
        let derived_a = 2 * p as i64 - 1;
        let a = match get("a") {
            None => derived_a,
            Some(s) => {
                let a: i64 = integer("a", s)?;
                if family != Family::Synthetic && a != derived_a {
                    return Err(ConfigError::Value {
                        key: "a",
                        msg: format!("support width of this family is {derived_a}"),
                    });
                }
                if a < 1 {
                    return Err(ConfigError::Value {
                        key: "a",
                        msg: "must be positive".into(),
                    });
                }
                a
            }
        };
        let j_min: u32 = get("j_min").map(|s| integer("j_min", s)).transpose()?.unwrap_or(1);
        let j_max: u32 = get("j_max").map(|s| integer("j_max", s)).transpose()?.unwrap_or(3);
        if j_max > 12 {
            return Err(ConfigError::Value {
                key: "j_max",
                msg: format!("{j_max} is beyond the supported range"),
            });
        }
        let epsilon = get("epsilon").map(|s| number("epsilon", s)).transpose()?.unwrap_or(0.5);
        if epsilon <= 0.0 {
            return Err(ConfigError::Value {
                key: "epsilon",
                msg: "must be positive".into(),
            });
        }
        let theta_inv = get("theta_inv").map(|s| number("theta_inv", s)).transpose()?.unwrap_or(0.45);
        if !(theta_inv > 0.0 && theta_inv < 1.0) {
            return Err(ConfigError::Value {
                key: "theta_inv",
                msg: "must lie in (0, 1)".into(),
            });
        }
        let half_width = match get("half_width") {
            None => None,
            Some(s) => {
                let v: Vec<i64> = s
                    .split_whitespace()
                    .map(|t| integer("half_width", t))
                    .collect::<Result<_, _>>()?;
                let hw = match v[..] {
                    [m] => (m, m),
                    [m1, m2] => (m1, m2),
                    _ => {
                        return Err(ConfigError::Value {
                            key: "half_width",
                            msg: "expected `M` or `M1 M2`".into(),
                        })
                    }
                };
                if hw.0 < 0 || hw.1 < 0 {
                    return Err(ConfigError::Value {
                        key: "half_width",
                        msg: "must be nonnegative".into(),
                    });
                }
                Some(hw)
            }
        };
        let grid: usize = get("grid").map(|s| integer("grid", s)).transpose()?.unwrap_or(512);
        if grid == 0 || grid > 8192 {
            return Err(ConfigError::Value {
                key: "grid",
                msg: format!("{grid} outside 1..=8192"),
            });
        }
        let source = match (get("function"), get("samples_file")) {
            (None | Some("f1"), None) => Source::F1,
            (Some("f2"), None) => Source::F2,
            (None | Some("samples"), Some(path)) => Source::File(base.join(path)),
            (Some("samples"), None) => {
                return Err(ConfigError::Value {
                    key: "samples_file",
                    msg: "required when function = samples".into(),
                })
            }
            (Some(f), None) => {
                return Err(ConfigError::Value {
                    key: "function",
                    msg: format!("unknown function {f:?}"),
                })
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Value {
                    key: "samples_file",
                    msg: "given together with an analytic function".into(),
                })
            }
        };
        let refine_axes = get("refine_axes").map(|s| boolean("refine_axes", s)).transpose()?.unwrap_or(false);
        let max_half_width: i64 = get("max_half_width")
            .map(|s| integer("max_half_width", s))
            .transpose()?
            .unwrap_or(4096);
        if max_half_width < 1 {
            return Err(ConfigError::Value {
                key: "max_half_width",
                msg: "must be positive".into(),
            });
        }
        let seed: u64 = get("seed").map(|s| integer("seed", s)).transpose()?.unwrap_or(1);
        let tolerance = get("tolerance").map(|s| number("tolerance", s)).transpose()?.unwrap_or(1e-12);
        if tolerance <= 0.0 {
            return Err(ConfigError::Value {
                key: "tolerance",
                msg: "must be positive".into(),
            });
        }

        let cfg = ExperimentConfig {
            mode,
            family,
            p,
            boundary,
            matrix,
            a,
            j_min,
            j_max,
            epsilon,
            theta_inv,
            half_width,
            grid,
            source,
            refine_axes,
            max_half_width,
            seed,
            tolerance,
        };
        cfg.check_combination()?;
        Ok(cfg)
    }

    fn check_combination(&self) -> Result<(), ConfigError> {
        let dyadic = self.matrix.is_dyadic();
        if self.boundary {
            if self.family == Family::Synthetic {
                return Err(ConfigError::Invalid("boundary mode needs an orthonormal family".into()));
            }
            if !dyadic {
                return Err(ConfigError::Invalid("boundary mode needs the dyadic matrix".into()));
            }
            let j0 = coarsest_scale(self.p);
            if self.j_min < j0 && self.j_min <= self.j_max {
                return Err(ConfigError::Invalid(format!(
                    "boundary wavelets with p = {} need j_min >= {j0}",
                    self.p
                )));
            }
            if self.epsilon > 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "epsilon {} exceeds 1, the largest density for the unit square",
                    self.epsilon
                )));
            }
        } else {
            if self.family != Family::Synthetic && !dyadic {
                return Err(ConfigError::Invalid(
                    "only the synthetic family supports a non-dyadic matrix".into(),
                ));
            }
            if dyadic {
                // supports lie in [1 - a, 2a - 1]
                let extent = (3 * self.a - 2) as f64;
                if self.epsilon * extent > 1.0 + 1e-12 {
                    return Err(ConfigError::Invalid(format!(
                        "epsilon {} too large for support width {}: need epsilon <= 1/{}",
                        self.epsilon,
                        self.a,
                        3 * self.a - 2
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scales of the ladder, empty when `j_min > j_max`.
    pub fn scales(&self) -> std::ops::RangeInclusive<u32> {
        self.j_min..=self.j_max
    }

    /// Checks that the configuration's `mode` key, if present, agrees with the command.
    pub fn check_mode(&self, mode: Mode) -> Result<(), ConfigError> {
        match self.mode {
            Some(m) if m != mode => Err(ConfigError::Invalid(format!(
                "config is for mode `{}`, not `{}`",
                m.name(),
                mode.name()
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(s, Path::new("/tmp"))
    }

    #[test]
    fn defaults() {
        let c = parse("# nothing\n\n").unwrap();
        assert_eq!(c.family, Family::Haar);
        assert_eq!((c.p, c.a), (1, 1));
        assert_eq!(c.epsilon, 0.5);
        assert_eq!(c.theta_inv, 0.45);
        assert_eq!(c.scales(), 1..=3);
        assert_eq!(c.source, Source::F1);
    }

    #[test]
    fn fractions_and_comments() {
        let c = parse("family = daubechies  # db2\np = 2\nepsilon = 1/7\nhalf_width = 3 4\n").unwrap();
        assert_eq!(c.a, 3);
        assert!((c.epsilon - 1.0 / 7.0).abs() < 1e-16);
        assert_eq!(c.half_width, Some((3, 4)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(parse("epsilon 1/2"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse("epsilon = 1/0"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse("p = 2\np = 3"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse("family = daubechies\np = 2\nepsilon = 1/2"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("matrix = 1 0 0 1"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse("matrix = 2 1 0 2"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("boundary = true\nfamily = daubechies\np = 3\nj_min = 2"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("theta_inv = 1.2"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse("function = f3"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse("mode = fly"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn synthetic_general_matrix() {
        let c = parse("family = synthetic\nmatrix = 2 1 0 2\na = 1\nepsilon = 1/8").unwrap();
        assert_eq!(c.matrix.entries(), [2, 1, 0, 2]);
    }

    #[test]
    fn samples_path_is_relative_to_config() {
        let c = parse("samples_file = s.txt").unwrap();
        assert_eq!(c.source, Source::File(PathBuf::from("/tmp/s.txt")));
    }

    #[test]
    fn mode_mismatch() {
        let c = parse("mode = rate").unwrap();
        assert!(c.check_mode(Mode::Rate).is_ok());
        assert!(c.check_mode(Mode::Verify).is_err());
    }
}
